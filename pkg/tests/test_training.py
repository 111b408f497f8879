import numpy as np
import pytest

from nrpinn import autodiff as ad
from nrpinn import network as net
from nrpinn import problems as pr
from nrpinn import sampler as sp
from nrpinn import training as tr
from nrpinn.errors import ConfigurationError, NumericError


def zero_params(spec: net.MlpSpec, extras=()):
    n = sum(spec.layer_widths[i + 1] * spec.layer_widths[i] + spec.layer_widths[i + 1]
            for i in range(spec.n_layers)) + len(extras)
    return net.ParamVector(np.zeros(n), spec.layer_widths, tuple(extras))


# -- compute_loss ---------------------------------------------------------------


def test_zero_network_poisson1d_bc_term_is_mean_of_squared_labels():
    spec = net.MlpSpec((1, 4, 1))
    params = zero_params(spec)
    sets = {"boundary": sp.sample_boundary(pr.Poisson1D(), 2, seed=0)}
    out = tr.compute_loss(spec, pr.Poisson1D(), params, sets)
    left = -np.sin(7.0) + np.cos(15.0) + 1.0
    right = np.sin(7.0) + np.cos(15.0) - 1.0
    assert out.bc == pytest.approx((left ** 2 + right ** 2) / 2.0, rel=1e-14)
    assert out.pde == 0.0 and out.data == 0.0 and out.ic == 0.0


def test_all_sets_empty_gives_zero_total():
    spec = net.MlpSpec((1, 4, 1))
    out = tr.compute_loss(spec, pr.Poisson1D(), zero_params(spec), {})
    assert out.total == 0.0 and out.total_var is None


def test_perfect_predictions_zero_data_term():
    spec = net.MlpSpec((1, 3, 1))
    params = net.init(spec, net.InitScheme("xavier"), 0)
    pts = np.linspace(-1, 1, 9)[:, None]
    labels = net.forward(spec, params, pts)[:, 0]
    sets = {"data": sp.PointSet(pts, "data", labels)}
    out = tr.compute_loss(spec, None, params, sets)
    assert out.data == 0.0 and out.total == 0.0


def test_total_recombines_from_terms_with_weights():
    spec = net.MlpSpec((2, 6, 1))
    params = net.init(spec, net.InitScheme("xavier"), 2)
    inst = pr.Burgers()
    cfg_weights = tr.LossWeights(w_pde=2.0, w_ic=0.5, w_bc=3.0, w_data=1.0)
    sets = {
        "interior": sp.sample_interior(inst, 16, 0),
        "boundary": sp.sample_boundary(inst, 8, 1),
        "initial": sp.sample_initial(inst, 8, 2),
        "data": sp.sample_data(inst, 8, 3),
    }
    out = tr.compute_loss(spec, inst, params, sets, cfg_weights)
    expected = ((2.0 * out.pde + 0.5 * out.ic) + 3.0 * out.bc) + 1.0 * out.data
    assert out.total == pytest.approx(expected, rel=1e-15)


def test_tape_total_matches_plain_total():
    spec = net.MlpSpec((2, 6, 1))
    params = net.init(spec, net.InitScheme("xavier"), 2)
    inst = pr.Burgers()
    sets = {"interior": sp.sample_interior(inst, 10, 0),
            "initial": sp.sample_initial(inst, 6, 1)}
    tape = ad.GradTape(params)
    on_tape = tr.compute_loss(spec, inst, tape, sets)
    plain = tr.compute_loss(spec, inst, params, sets)
    assert float(on_tape.total_var.value) == plain.total


@pytest.mark.parametrize("instance, sets_spec", [
    (pr.Poisson1D(), dict(n_interior=6, n_boundary=2, n_data=4)),
    (pr.Poisson2D(((0.4, 0.6, 1.0),)), dict(n_interior=6, n_boundary=4)),
    (pr.Burgers(), dict(n_interior=6, n_boundary=4, n_initial=4)),
    (pr.Schrodinger(), dict(n_interior=6, n_boundary=4, n_initial=4)),
])
def test_loss_gradient_matches_finite_differences_per_family(instance, sets_spec):
    out_width = 2 if isinstance(instance, pr.Schrodinger) else 1
    spec = net.MlpSpec((len(pr.input_names(instance)), 5, 5, out_width))
    params = net.init(spec, net.InitScheme("xavier"), 4)
    cfg = tr.TrainConfig(iterations=0, sample_seed=1, **sets_spec)
    sets = tr.assemble_pointsets(instance, cfg)

    def loss(tape):
        return tr.compute_loss(spec, instance, tape, sets).total_var

    assert ad.check_gradient(loss, params, 1e-5) < 1e-4


def test_inverse_loss_gradient_includes_nu_slot():
    inst = pr.BurgersInverse()
    spec = net.MlpSpec((2, 5, 5, 1))
    params = net.init(spec, net.InitScheme("xavier"), 3, extra_slots={"nu": tr.NU_INIT})
    data = sp.sample_data(pr.Burgers(inst.nu_true), 12, seed=5)
    sets = {"data": data, "interior": sp.PointSet(data.points, "interior")}

    def loss(tape):
        return tr.compute_loss(spec, inst, tape, sets).total_var

    assert ad.check_gradient(loss, params, 1e-5) < 1e-4


def test_nonfinite_term_is_reported_by_name():
    spec = net.MlpSpec((1, 3, 1))
    params = net.init(spec, net.InitScheme("xavier"), 0)
    huge = sp.PointSet(np.array([[1.0]]), "data", np.array([1e300]))
    with pytest.raises(NumericError, match="data"):
        tr.compute_loss(spec, None, params, {"data": huge})


def test_loss_invariant_under_point_permutation():
    spec = net.MlpSpec((2, 6, 1))
    params = net.init(spec, net.InitScheme("xavier"), 1)
    inst = pr.Burgers()
    interior = sp.sample_interior(inst, 64, 0)
    shuffled = sp.PointSet(interior.points[::-1].copy(), "interior")
    a = tr.compute_loss(spec, inst, params, {"interior": interior}).total
    b = tr.compute_loss(spec, inst, params, {"interior": shuffled}).total
    assert a == pytest.approx(b, rel=1e-12)


# -- optimizer steps --------------------------------------------------------------


def test_zero_gradient_leaves_params_unchanged():
    params = net.init(net.MlpSpec((1, 3, 1)), net.InitScheme("xavier"), 0)
    g = np.zeros_like(params.flat)
    for kind in ("sgd", "adam"):
        opt = tr.make_optimizer(kind, 0.1, params.flat.size)
        updated, _ = tr.step(opt, params, g)
        assert np.array_equal(updated.flat, params.flat)


def test_sgd_step_formula():
    params = net.ParamVector(np.array([1.0, 1.0]), (1, 1))  # w=1, b=1
    opt = tr.make_optimizer("sgd", 0.1, 2)
    updated, state = tr.step(opt, params, np.array([2.0, 2.0]))
    assert np.allclose(updated.flat, [0.8, 0.8])
    assert state.t == 1


def test_adam_first_step_displacement_is_learning_rate():
    params = net.ParamVector(np.array([1.0, -2.0]), (1, 1))
    opt = tr.make_optimizer("adam", 1e-3, 2)
    g = np.array([0.5, -4.0])
    updated, state = tr.step(opt, params, g)
    expected = 1e-3 * g / (np.abs(g) + 1e-8)
    assert np.allclose(params.flat - updated.flat, expected)
    assert state.t == 1


def test_adam_zero_learning_rate_is_identity():
    params = net.init(net.MlpSpec((1, 4, 1)), net.InitScheme("xavier"), 0)
    opt = tr.make_optimizer("adam", 0.0, params.flat.size)
    g = np.random.default_rng(0).normal(size=params.flat.size)
    updated, opt = tr.step(opt, params, g)
    assert np.array_equal(updated.flat, params.flat)


def test_step_rejects_length_mismatch():
    params = net.init(net.MlpSpec((1, 4, 1)), net.InitScheme("xavier"), 0)
    opt = tr.make_optimizer("sgd", 0.1, params.flat.size)
    with pytest.raises(ConfigurationError):
        tr.step(opt, params, np.zeros(3))


# -- metrics ----------------------------------------------------------------------


def test_metrics_trivial_cases():
    ref = np.array([0.6, -0.8])  # mean-zero-ish, unit L2 norm
    assert tr.metrics(ref, ref) == (0.0, 0.0)
    mae, _ = tr.metrics(ref + 1.0, ref)
    assert mae == pytest.approx(1.0)
    _, rel = tr.metrics(2.0 * ref, ref)
    assert rel == pytest.approx(1.0)


def test_metrics_zero_reference_is_an_error():
    with pytest.raises(NumericError):
        tr.metrics(np.ones(3), np.zeros(3))
    with pytest.raises(ConfigurationError):
        tr.metrics(np.ones(3), np.ones(4))


# -- solve loops -------------------------------------------------------------------


def small_poisson_config(iterations, **kw):
    base = dict(iterations=iterations, n_interior=20, n_boundary=2, n_data=5,
                eval_interval=10, eval_grid=(101,), learning_rate=1e-3)
    base.update(kw)
    return tr.TrainConfig(**base)


def test_zero_iteration_solve_returns_init_and_single_row():
    spec = net.MlpSpec((1, 8, 1))
    params = net.init(spec, net.InitScheme("xavier"), 0)
    out, history = tr.solve(spec, pr.Poisson1D(), params, small_poisson_config(0))
    assert np.array_equal(out.flat, params.flat)
    assert len(history.rows) == 1 and history.rows[0].iteration == 0


def test_solve_is_bit_reproducible():
    spec = net.MlpSpec((1, 8, 1))
    params = net.init(spec, net.InitScheme("xavier"), 7)
    cfg = small_poisson_config(25)
    _, h1 = tr.solve(spec, pr.Poisson1D(), params, cfg)
    _, h2 = tr.solve(spec, pr.Poisson1D(), params, cfg)
    assert [r.__dict__ for r in h1.rows] == [r.__dict__ for r in h2.rows]


def test_solve_records_on_the_interval_and_at_the_end():
    spec = net.MlpSpec((1, 8, 1))
    params = net.init(spec, net.InitScheme("xavier"), 0)
    _, history = tr.solve(spec, pr.Poisson1D(), params, small_poisson_config(25))
    assert [r.iteration for r in history.rows] == [0, 10, 20, 25]


def test_solve_reduces_the_loss_on_a_short_run():
    spec = net.MlpSpec((1, 10, 10, 1))
    params = net.init(spec, net.InitScheme("xavier"), 1)
    cfg = small_poisson_config(200, n_interior=50, n_data=20)
    _, history = tr.solve(spec, pr.Poisson1D(), params, cfg)
    assert history.final.loss_total < history.rows[0].loss_total


def test_inverse_zero_iterations_reports_initial_slot():
    inst = pr.BurgersInverse()
    spec = net.MlpSpec((2, 6, 1))
    params = net.init(spec, net.InitScheme("xavier"), 0, extra_slots={"nu": tr.NU_INIT})
    data = sp.sample_data(pr.Burgers(inst.nu_true), 16, seed=0)
    cfg = tr.TrainConfig(iterations=0, eval_grid=(32, 10))
    _, history = tr.solve_inverse(spec, inst, params, data, cfg)
    assert history.final.nu_estimate == pytest.approx(tr.NU_INIT)


def test_inverse_consistent_state_does_not_drift():
    # Zero network + zero labels: every term and gradient vanishes exactly,
    # so the viscosity slot must stay put over many iterations.
    inst = pr.BurgersInverse()
    spec = net.MlpSpec((2, 6, 1))
    params = zero_params(spec, extras=("nu",))
    params.extra_view("nu")[...] = tr.NU_INIT
    pts = sp.sample_interior(pr.Burgers(), 32, 0).points
    data = sp.PointSet(pts, "data", np.zeros(len(pts)))
    cfg = tr.TrainConfig(iterations=100, eval_grid=(32, 10), eval_interval=50)
    out, history = tr.solve_inverse(spec, inst, params, data, cfg)
    assert out.extra("nu") == tr.NU_INIT
    assert abs(history.final.nu_estimate - tr.NU_INIT) / tr.NU_INIT < 0.01


def test_inverse_requires_slot_and_data():
    inst = pr.BurgersInverse()
    spec = net.MlpSpec((2, 6, 1))
    no_slot = net.init(spec, net.InitScheme("xavier"), 0)
    data = sp.sample_data(pr.Burgers(), 8, seed=0)
    cfg = tr.TrainConfig(iterations=1)
    with pytest.raises(ConfigurationError):
        tr.solve_inverse(spec, inst, no_slot, data, cfg)
    with_slot = net.init(spec, net.InitScheme("xavier"), 0, extra_slots={"nu": tr.NU_INIT})
    with pytest.raises(ConfigurationError):
        tr.solve_inverse(spec, inst, with_slot, None, cfg)


def test_training_abort_preserves_partial_history():
    spec = net.MlpSpec((1, 6, 1))
    params = net.init(spec, net.InitScheme("xavier"), 0)
    # An absurd SGD learning rate reliably blows the run up.
    cfg = small_poisson_config(400, optimizer="sgd", learning_rate=1e18, eval_interval=1)
    with pytest.raises(tr.TrainingAborted) as err:
        tr.solve(spec, pr.Poisson1D(), params, cfg)
    assert len(err.value.history.rows) >= 1


# -- history CSV --------------------------------------------------------------------


def test_history_csv_roundtrip_and_column_order(tmp_path):
    history = tr.RunHistory()
    history.append(tr.HistoryRow(0, 1.0, 0.0, 2.0, 0.5, 3.5, 0.9, 0.8, None))
    history.append(tr.HistoryRow(10, 0.1, 0.0, 0.2, 0.05, 0.35, 0.09, 0.08, 0.0123))
    path = tmp_path / "history.csv"
    history.to_csv(path)
    first = path.read_text().splitlines()[0]
    assert first == "iteration,loss_pde,loss_ic,loss_bc,loss_data,loss_total,mae,rel_l2,nu_estimate"
    back = tr.RunHistory.from_csv(path)
    assert back.rows[0].nu_estimate is None
    assert back.rows[1].nu_estimate == 0.0123
    assert back.final.iteration == 10


def test_history_requires_increasing_iterations():
    history = tr.RunHistory()
    history.append(tr.HistoryRow(5, *[0.0] * 7))
    with pytest.raises(ConfigurationError):
        history.append(tr.HistoryRow(5, *[0.0] * 7))
