import numpy as np
import pytest

from nrpinn import autodiff as ad
from nrpinn import network as net
from nrpinn.errors import ConfigurationError


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        net.MlpSpec((5,))
    with pytest.raises(ConfigurationError):
        net.MlpSpec((1, 0, 1))
    with pytest.raises(ConfigurationError):
        net.MlpSpec((1, 4, 1), activation="relu")


def test_normal_with_zero_sigma_rejected():
    with pytest.raises(ConfigurationError):
        net.InitScheme("normal", sigma=0.0)


def test_uniform_bounds_must_be_ordered():
    with pytest.raises(ConfigurationError):
        net.InitScheme("uniform", low=0.5, high=0.5)


def test_init_is_deterministic_per_seed():
    spec = net.MlpSpec((1, 50, 50, 1))
    a = net.init(spec, net.parse_scheme("normal(0,0.1)"), seed=4)
    b = net.init(spec, net.parse_scheme("normal(0,0.1)"), seed=4)
    c = net.init(spec, net.parse_scheme("normal(0,0.1)"), seed=5)
    assert np.array_equal(a.flat, b.flat)
    assert not np.array_equal(a.flat, c.flat)


def test_xavier_weights_within_fan_bound_and_biases_zero():
    spec = net.MlpSpec((1, 50, 50, 50, 50, 1))
    params = net.init(spec, net.InitScheme("xavier"), seed=0)
    for i in range(spec.n_layers):
        fan_in, fan_out = spec.layer_widths[i], spec.layer_widths[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.abs(params.weight(i)).max() <= bound
        assert np.all(params.bias(i) == 0.0)
    # the 50x50 layers specifically stay inside +-sqrt(6/100)
    assert np.abs(params.weight(1)).max() <= np.sqrt(6.0 / 100.0)


def test_roundtrip_flatten_unflatten_exact():
    spec = net.MlpSpec((2, 7, 3))
    params = net.init(spec, net.InitScheme("random"), 2, extra_slots={"nu": 0.25})
    again = net.unflatten(net.flatten(params), params.widths, params.extra_names)
    assert np.array_equal(params.flat, again.flat)
    assert params.widths == again.widths and params.extra_names == again.extra_names


def test_flat_length_counts_weights_biases_extras():
    spec = net.MlpSpec((2, 7, 3), adaptive_slope=True)
    params = net.init(spec, net.InitScheme("xavier"), 0, extra_slots={"nu": 0.1})
    expected = (7 * 2 + 7) + (3 * 7 + 3) + 2
    assert params.flat.size == expected
    assert params.extra_names == ("a", "nu")
    assert params.extra("a") == 1.0
    assert params.extra("nu") == 0.1


def test_forward_zero_params_gives_zero():
    spec = net.MlpSpec((2, 4, 1))
    params = net.unflatten(np.zeros(4 * 2 + 4 + 4 + 1), spec.layer_widths)
    x = np.random.default_rng(0).normal(size=(6, 2))
    assert np.all(net.forward(spec, params, x) == 0.0)


def test_forward_identity_like_net():
    spec = net.MlpSpec((1, 1, 1))
    params = net.unflatten([1.0, 0.0, 1.0, 0.0], spec.layer_widths)
    assert net.forward(spec, params, np.array([[0.0]]))[0, 0] == 0.0


def test_adaptive_with_unit_slope_and_unit_scale_equals_plain():
    base = net.MlpSpec((1, 8, 8, 1))
    adaptive = net.MlpSpec((1, 8, 8, 1), adaptive_slope=True, slope_scale=1)
    params = net.init(base, net.InitScheme("xavier"), 3)
    params_a = net.init(adaptive, net.InitScheme("xavier"), 3)
    assert params_a.extra("a") == 1.0
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.array_equal(net.forward(base, params, x),
                          net.forward(adaptive, params_a, x))


def test_scale_slope_product_invariance():
    # slope a0/n with scale n produces the same map as slope a0 with scale 1
    a0 = 0.7
    spec_n = net.MlpSpec((1, 6, 1), adaptive_slope=True, slope_scale=10)
    spec_1 = net.MlpSpec((1, 6, 1), adaptive_slope=True, slope_scale=1)
    pn = net.init(spec_n, net.InitScheme("xavier"), 8)
    p1 = pn.copy()
    pn.extra_view("a")[...] = a0 / 10.0
    p1.extra_view("a")[...] = a0
    x = np.linspace(-3, 3, 11)[:, None]
    assert np.allclose(net.forward(spec_n, pn, x), net.forward(spec_1, p1, x))


def test_forward_matches_eval_jet_value_exactly():
    for activation in ("tanh", "sin"):
        spec = net.MlpSpec((2, 9, 9, 2), activation=activation)
        params = net.init(spec, net.InitScheme("xavier"), 6)
        x = np.random.default_rng(6).normal(size=(13, 2))
        jet = ad.eval_jet(spec, params, x, (0, 1))
        assert np.array_equal(jet.value, net.forward(spec, params, x))


def test_parse_scheme_tokens():
    assert net.parse_scheme("xavier").kind == "xavier"
    s = net.parse_scheme("uniform(-0.01,0.01)")
    assert (s.low, s.high) == (-0.01, 0.01)
    s = net.parse_scheme("normal(0,0.1)")
    assert s.sigma == 0.1
    s = net.parse_scheme("nrpinn_checkpoint(runs/x.npk)")
    assert s.kind == "nrpinn_checkpoint" and s.path == "runs/x.npk"
    with pytest.raises(ConfigurationError):
        net.parse_scheme("lecun")


def test_checkpoint_roundtrip_and_load_via_init(tmp_path):
    spec = net.MlpSpec((2, 5, 1), adaptive_slope=True, slope_scale=3)
    params = net.init(spec, net.InitScheme("random"), 12, extra_slots={"nu": 0.02})
    path = tmp_path / "ckpt.npk"
    net.save_checkpoint(path, spec, params)
    spec2, params2 = net.load_checkpoint(path)
    assert spec2 == spec
    assert np.array_equal(params.flat, params2.flat)
    assert params2.extra_names == ("a", "nu")

    loaded = net.init(spec, net.InitScheme("nrpinn_checkpoint", path=str(path)), 0)
    assert np.array_equal(loaded.flat, params.flat)


def test_checkpoint_appends_missing_extra_slots():
    spec = net.MlpSpec((2, 4, 1))
    params = net.init(spec, net.InitScheme("xavier"), 1)
    grown = params.with_extra_slots({"nu": 0.5})
    assert grown.extra_names == ("nu",)
    assert grown.extra("nu") == 0.5
    assert np.array_equal(grown.flat[:-1], params.flat)


def test_checkpoint_shape_mismatch_is_configuration_error(tmp_path):
    spec = net.MlpSpec((2, 5, 1))
    params = net.init(spec, net.InitScheme("xavier"), 0)
    path = tmp_path / "ckpt.npk"
    net.save_checkpoint(path, spec, params)
    with pytest.raises(ConfigurationError):
        net.init(net.MlpSpec((2, 6, 1)), net.InitScheme("nrpinn_checkpoint", path=str(path)), 0)


def test_unreadable_checkpoint_is_io_error(tmp_path):
    path = tmp_path / "junk.npk"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(IOError):
        net.load_checkpoint(path)
    with pytest.raises(IOError):
        net.load_checkpoint(tmp_path / "missing.npk")
