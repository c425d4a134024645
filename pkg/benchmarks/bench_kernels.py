"""Time the Jacobi kernels: compiled extension against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeats N]
"""
import argparse
import time

import numpy as np

from vaebounds import linalg


def _time(fn, args, repeats):
    t0 = time.perf_counter()
    for a in args[:repeats]:
        fn(a)
    return (time.perf_counter() - t0) / repeats


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    cases = []
    for n in (4, 8, 16, 32):
        sym = []
        for _ in range(args.repeats):
            a = rng.standard_normal((n, n))
            sym.append(a @ a.T)
        tall = [rng.standard_normal((2 * n, n)) for _ in range(args.repeats)]
        cases.append((n, sym, tall))

    backends = linalg.available_backends()
    print(f"backends: {', '.join(backends)}  (active: {linalg.backend()})")
    print(f"{'op':<9}{'n':>4}" + "".join(f"{b + ' [ms]':>16}" for b in backends) + f"{'speedup':>10}")
    active = linalg.backend()
    try:
        for n, sym, tall in cases:
            # the fallback is slow at n=32; fewer repeats keep the run short
            reps = args.repeats if n < 32 else max(1, args.repeats // 10)
            for name, fn, data in (("sym_eig", linalg.sym_eig, sym), ("thin_svd", linalg.thin_svd, tall)):
                times = {}
                for b in backends:
                    linalg.set_backend(b)
                    fn(data[0])  # warm-up
                    times[b] = _time(fn, data, reps) * 1e3
                speed = times["python"] / times["cython"] if "cython" in times else float("nan")
                print(f"{name:<9}{n:>4}" + "".join(f"{times[b]:>16.4f}" for b in backends) + f"{speed:>10.1f}")
    finally:
        linalg.set_backend(active)


if __name__ == "__main__":
    main()
