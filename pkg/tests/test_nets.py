import numpy as np
import pytest

from vaebounds import autodiff as ad
from vaebounds import nets
from vaebounds.distributions import DiagGaussian
from vaebounds.exceptions import DimensionError


def test_create_shapes_and_init():
    net = nets.MlpGaussianNet.create(5, 2, hidden=(7, 3), seed=1)
    assert net.widths == [5, 7, 3, 4]
    assert net.n_params == 5 * 7 + 7 + 7 * 3 + 3 + 3 * 4 + 4
    assert net.in_dim == 5 and net.out_dim == 2
    bound = np.sqrt(6.0 / 12)
    assert np.all(np.abs(net.weights[0]) <= bound)
    np.testing.assert_array_equal(net.biases[-1], [0.0, 0.0, -1.0, -1.0])
    again = nets.MlpGaussianNet.create(5, 2, hidden=(7, 3), seed=1)
    np.testing.assert_array_equal(net.weights[1], again.weights[1])


def test_affine_net_forward():
    net = nets.MlpGaussianNet.zeros(2, 1)
    net.weights[0][:] = [[1.0, 0.0], [2.0, 0.0]]
    net.biases[0][:] = [0.5, 30.0]
    g = nets.forward(net, np.array([[1.0, 1.0]]))
    np.testing.assert_allclose(g.mean, [[3.5]])
    np.testing.assert_allclose(g.variance, [[np.exp(10.0)]])  # log-variance clipped


def test_forward_dimension_check():
    net = nets.MlpGaussianNet.create(3, 1)
    with pytest.raises(DimensionError):
        nets.forward(net, np.ones((2, 4)))
    with pytest.raises(DimensionError):
        nets.MlpGaussianNet([2, 3], [np.zeros((2, 4))], [np.zeros(4)])


def test_reparam_sample():
    g = DiagGaussian(np.array([1.0, -1.0]), np.array([4.0, 0.25]))
    np.testing.assert_allclose(nets.reparam_sample(g, np.array([1.0, 2.0])), [3.0, 0.0])
    tape = ad.GradientTape()
    m = tape.watch([0.0])
    lv = tape.watch([np.log(4.0)])
    z = nets.reparam_sample((m, lv), np.array([1.5]))
    gm, glv = ad.backward(tape, ad.sum(z))
    np.testing.assert_allclose(ad.value(z), [3.0])
    np.testing.assert_allclose(gm, [1.0])
    np.testing.assert_allclose(glv, [0.5 * 2.0 * 1.5])
    with pytest.raises(DimensionError):
        nets.reparam_sample(g, np.ones(3))


def test_adam_first_step_is_lr_sign():
    opt = nets.Optimizer("adam", lr=0.1)
    out = nets.step(opt, [np.array([1.0, 1.0, 1.0])], [np.array([3.0, -0.2, 0.0])])
    np.testing.assert_allclose(out[0], [0.9, 1.1, 1.0], atol=1e-7)
    assert opt.t == 1


def test_sgd_step():
    opt = nets.Optimizer("sgd", lr=0.5)
    (p,) = nets.step(opt, [np.array([1.0])], [np.array([2.0])])
    assert p[0] == 0.0
    with pytest.raises(DimensionError):
        nets.step(opt, [np.ones(2)], [np.ones(3)])
    with pytest.raises(ValueError):
        nets.Optimizer("rmsprop")


def test_checkpoint_roundtrip(tmp_path):
    enc = nets.MlpGaussianNet.create(4, 2, (3,), seed=0)
    dec = nets.MlpGaussianNet.create(2, 4, (), seed=1)
    opt = nets.Optimizer()
    params = enc.params() + dec.params()
    nets.step(opt, params, [np.ones_like(p) for p in params])
    path = tmp_path / "ck.json"
    nets.save_checkpoint(path, {"enc": enc, "dec": dec}, opt)
    back, opt2 = nets.load_checkpoint(path)
    for name, net in (("enc", enc), ("dec", dec)):
        for a, b in zip(net.params(), back[name].params()):
            np.testing.assert_array_equal(a, b)
    assert opt2.t == 1
    for a, b in zip(opt.m, opt2.m):
        np.testing.assert_array_equal(a, b)
