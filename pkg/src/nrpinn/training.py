"""Composite residual loss, optimizers, and the forward/inverse solve loops."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import network, problems, sampler
from .errors import ConfigurationError, NumericError

# Midpoint of the admissible viscosity interval: the inverse solve starts
# here so the data, not the initialization, pulls the estimate.
NU_INIT = 0.05 / np.pi

HISTORY_COLUMNS = ("iteration", "loss_pde", "loss_ic", "loss_bc", "loss_data",
                   "loss_total", "mae", "rel_l2", "nu_estimate")


def fmt(x: float) -> str:
    """Serialize floats at full precision (17 significant digits)."""
    return f"{x:.17g}"


@dataclass(frozen=True)
class LossWeights:
    w_pde: float = 1.0
    w_ic: float = 1.0
    w_bc: float = 1.0
    w_data: float = 1.0

    def __post_init__(self):
        if min(self.w_pde, self.w_ic, self.w_bc, self.w_data) < 0:
            raise ConfigurationError("loss weights must be nonnegative")


@dataclass
class LossBreakdown:
    """Per-term mean squared residuals plus the weighted total.

    ``total`` folds the present terms left to right in (pde, ic, bc, data)
    order; ``total_var`` is the same scalar on the tape when the loss was
    built from a GradTape, for backprop.
    """

    pde: float = 0.0
    ic: float = 0.0
    bc: float = 0.0
    data: float = 0.0
    total: float = 0.0
    total_var: ad.Var | None = field(default=None, repr=False)


def _mean_sq(components) -> object:
    acc = None
    for c in components:
        sq = c * c
        acc = sq if acc is None else acc + sq
    return ad.mean(acc)


def _as_float(term) -> float:
    return float(term.value) if isinstance(term, ad.Var) else float(term)


def compute_loss(spec: network.MlpSpec, instance, source, pointsets,
                 weights: LossWeights = LossWeights()) -> LossBreakdown:
    """Weighted mean-squared losses over the supplied point sets.

    ``source`` is a ParamVector for plain evaluation or a GradTape for a
    parameter-differentiable result. ``pointsets`` maps roles (interior,
    boundary, initial, data) to PointSets; absent roles contribute zero.
    ``instance`` may be None for purely data-driven losses.
    """
    terms: dict[str, object] = {}

    interior = pointsets.get("interior")
    if interior is not None and len(interior) > 0:
        if instance is None:
            raise ConfigurationError("residual term needs a PDE instance")
        tracked, second = problems.derivative_dims(instance)
        jet = ad.eval_jet(spec, source, interior.points, tracked, second_order=second)
        nu = None
        if isinstance(instance, problems.BurgersInverse):
            nu = source.extra("nu")
        res = problems.residual(instance, jet, interior.points, nu=nu)
        terms["pde"] = _mean_sq(res)

    boundary = pointsets.get("boundary")
    if boundary is not None and len(boundary) > 0:
        if isinstance(instance, problems.Schrodinger):
            terms["bc"] = _periodic_mismatch(spec, source, boundary)
        else:
            jet = ad.eval_jet(spec, source, boundary.points)
            terms["bc"] = _mean_sq([_out_col(jet.value, 0) - boundary.values])

    initial = pointsets.get("initial")
    if initial is not None and len(initial) > 0:
        jet = ad.eval_jet(spec, source, initial.points)
        if isinstance(instance, problems.Schrodinger):
            terms["ic"] = _mean_sq([_out_col(jet.value, 0) - initial.values[:, 0],
                                    _out_col(jet.value, 1) - initial.values[:, 1]])
        else:
            terms["ic"] = _mean_sq([_out_col(jet.value, 0) - initial.values])

    data = pointsets.get("data")
    if data is not None and len(data) > 0:
        jet = ad.eval_jet(spec, source, data.points)
        terms["data"] = _mean_sq([_out_col(jet.value, 0) - data.values])

    out = LossBreakdown()
    total_var = None
    total = 0.0
    for name, w in (("pde", weights.w_pde), ("ic", weights.w_ic),
                    ("bc", weights.w_bc), ("data", weights.w_data)):
        term = terms.get(name)
        if term is None:
            continue
        value = _as_float(term)
        if not np.isfinite(value):
            raise NumericError(f"{name} loss term is not finite: {value}")
        setattr(out, name, value)
        total = total + w * value
        if isinstance(term, ad.Var):
            total_var = w * term if total_var is None else total_var + w * term
    out.total = total
    out.total_var = total_var
    return out


def _out_col(value, j):
    return value.col(j) if isinstance(value, ad.Var) else value[:, j]


def _periodic_mismatch(spec, source, boundary: sampler.PointSet):
    """Value and x-slope mismatch across matched periodic pairs."""
    m = len(boundary) // 2
    left = ad.eval_jet(spec, source, boundary.points[:m], (1,), second_order=())
    right = ad.eval_jet(spec, source, boundary.points[m:], (1,), second_order=())
    diffs = []
    for j in range(2):
        diffs.append(_out_col(left.value, j) - _out_col(right.value, j))
        diffs.append(_out_col(left.d1[1], j) - _out_col(right.d1[1], j))
    return _mean_sq(diffs)


# -- optimizers ----------------------------------------------------------------


@dataclass
class OptimizerState:
    kind: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0


def make_optimizer(kind: str, learning_rate: float, n_params: int) -> OptimizerState:
    if kind not in ("sgd", "adam"):
        raise ConfigurationError(f"unknown optimizer {kind!r}")
    state = OptimizerState(kind, learning_rate)
    if kind == "adam":
        state.m = np.zeros(n_params)
        state.v = np.zeros(n_params)
    return state


def step(state: OptimizerState, params: network.ParamVector,
         grads: np.ndarray) -> tuple[network.ParamVector, OptimizerState]:
    """One optimizer update; returns fresh parameter and state objects."""
    if grads.shape != params.flat.shape:
        raise ConfigurationError("gradient and parameter lengths disagree")
    t = state.t + 1
    if state.kind == "sgd":
        flat = params.flat - state.learning_rate * grads
        new_state = replace(state, t=t)
    else:
        m = state.beta1 * state.m + (1.0 - state.beta1) * grads
        v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        flat = params.flat - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        new_state = replace(state, m=m, v=v, t=t)
    return params.with_flat(flat), new_state


# -- metrics and history --------------------------------------------------------


def metrics(pred: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
    """(mean absolute error, relative L2 error) between equal-length grids."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if pred.shape != ref.shape:
        raise ConfigurationError("prediction and reference grids differ in length")
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0.0:
        raise NumericError("relative L2 is undefined for a zero reference")
    diff = pred - ref
    return float(np.abs(diff).mean()), float(np.linalg.norm(diff) / ref_norm)


@dataclass
class HistoryRow:
    iteration: int
    loss_pde: float
    loss_ic: float
    loss_bc: float
    loss_data: float
    loss_total: float
    mae: float
    rel_l2: float
    nu_estimate: float | None = None


@dataclass
class RunHistory:
    rows: list[HistoryRow] = field(default_factory=list)

    def append(self, row: HistoryRow) -> None:
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ConfigurationError("history iterations must be strictly increasing")
        self.rows.append(row)

    @property
    def final(self) -> HistoryRow:
        return self.rows[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(HISTORY_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    r.iteration, fmt(r.loss_pde), fmt(r.loss_ic), fmt(r.loss_bc),
                    fmt(r.loss_data), fmt(r.loss_total), fmt(r.mae), fmt(r.rel_l2),
                    "" if r.nu_estimate is None else fmt(r.nu_estimate),
                ])

    @classmethod
    def from_csv(cls, path) -> "RunHistory":
        history = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != HISTORY_COLUMNS:
                raise ConfigurationError(f"unexpected history columns {header}")
            for row in reader:
                history.append(HistoryRow(
                    int(row[0]), *[float(v) for v in row[1:8]],
                    None if row[8] == "" else float(row[8])))
        return history


# -- solve loops ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    iterations: int
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    n_interior: int = 0
    n_boundary: int = 0
    n_initial: int = 0
    n_data: int = 0
    sample_seed: int = 0
    noise_pct: float = 0.0
    noise_seed: int = 0
    eval_interval: int = 100
    weights: LossWeights = field(default_factory=LossWeights)
    eval_grid: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigurationError("iterations must be nonnegative")
        if self.eval_interval < 1:
            raise ConfigurationError("eval_interval must be positive")
        if min(self.n_interior, self.n_boundary, self.n_initial, self.n_data) < 0:
            raise ConfigurationError("point counts must be nonnegative")


class TrainingAborted(NumericError):
    """A solve hit non-finite numbers; carries the partial history."""

    def __init__(self, message, params, history):
        super().__init__(message)
        self.params = params
        self.history = history


@dataclass(frozen=True)
class EvalGrid:
    points: np.ndarray          # (n, d) in network input order
    ref: np.ndarray             # (n,) reference values
    shape: tuple[int, ...]
    names: tuple[str, ...]


DEFAULT_EVAL_GRIDS = {
    "poisson1d": (1001,),
    "poisson2d": (256,),
    "burgers": (256, 100),
    "burgers_inverse": (256, 100),
    "schrodinger": (256, 201),
}


def evaluation_grid(instance, eval_grid=None) -> EvalGrid:
    """The fixed grid a run is scored on, with its reference values."""
    family = problems.family_name(instance)
    shape = tuple(eval_grid) if eval_grid else DEFAULT_EVAL_GRIDS[family]
    if family == "poisson1d":
        x = np.linspace(-10.0, 10.0, shape[0])[:, None]
        return EvalGrid(x, problems.exact_solution(instance, x), shape, ("x",))
    if family == "poisson2d":
        grid = problems.oracle_poisson2d_fd(instance.sources, shape[0])
        gx, gy = np.meshgrid(grid.x, grid.y, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        return EvalGrid(pts, grid.u.ravel(), (shape[0], shape[0]), ("x", "y"))
    if family in ("burgers", "burgers_inverse"):
        nx, nt = shape
        x = np.linspace(-1.0, 1.0, nx)
        t = np.linspace(0.0, 1.0, nt)
        gx, gt = np.meshgrid(x, t, indexing="ij")
        pts = np.column_stack([gt.ravel(), gx.ravel()])
        nu = instance.nu if isinstance(instance, problems.Burgers) else instance.nu_true
        ref = problems.oracle_burgers_cole_hopf(gx.ravel(), gt.ravel(), nu)
        return EvalGrid(pts, ref, (nx, nt), ("t", "x"))
    nx, nt = shape
    grid = problems.oracle_schrodinger_spectral(instance.lam, nx=nx, nt_out=nt)
    ggt, ggx = np.meshgrid(grid.t, grid.x, indexing="ij")
    pts = np.column_stack([ggt.ravel(), ggx.ravel()])
    return EvalGrid(pts, grid.habs.ravel(), (nt, nx), ("t", "x"))


def predict(spec: network.MlpSpec, instance, params: network.ParamVector,
            points: np.ndarray) -> np.ndarray:
    """Network prediction of the scored quantity (|h| for Schrodinger)."""
    out = network.forward(spec, params, points)
    if isinstance(instance, problems.Schrodinger):
        return np.sqrt(out[:, 0] ** 2 + out[:, 1] ** 2)
    return out[:, 0]


def assemble_pointsets(instance, cfg: TrainConfig) -> dict[str, sampler.PointSet]:
    """Draw the four training sets once, with seeds derived from sample_seed."""
    sets = {}
    if cfg.n_interior:
        sets["interior"] = sampler.sample_interior(instance, cfg.n_interior, cfg.sample_seed)
    if cfg.n_boundary:
        sets["boundary"] = sampler.sample_boundary(instance, cfg.n_boundary, cfg.sample_seed + 1)
    if cfg.n_initial:
        sets["initial"] = sampler.sample_initial(instance, cfg.n_initial, cfg.sample_seed + 2)
    if cfg.n_data:
        data = sampler.sample_data(instance, cfg.n_data, cfg.sample_seed + 3)
        if cfg.noise_pct > 0.0:
            data = sampler.add_noise(data, cfg.noise_pct, cfg.noise_seed)
        sets["data"] = data
    return sets


def solve(spec: network.MlpSpec, instance, init_params: network.ParamVector,
          cfg: TrainConfig) -> tuple[network.ParamVector, RunHistory]:
    """Full-batch training on the composite loss, evaluated against the
    family's reference on a fixed grid every eval_interval iterations."""
    pointsets = assemble_pointsets(instance, cfg)
    return _run_loop(spec, instance, init_params, pointsets, cfg, track_nu=False)


def solve_inverse(spec: network.MlpSpec, instance: problems.BurgersInverse,
                  init_params: network.ParamVector, data: sampler.PointSet,
                  cfg: TrainConfig) -> tuple[network.ParamVector, RunHistory]:
    """Joint fit of network weights and the viscosity slot to observed data.

    The loss is the PDE residual (with the trainable coefficient) plus the
    data misfit. Residual points come from n_interior; with n_interior = 0
    the residual is evaluated at the data locations themselves.
    """
    if not isinstance(instance, problems.BurgersInverse):
        raise ConfigurationError("inverse solving is defined for the Burgers family")
    if "nu" not in init_params.extra_names:
        raise ConfigurationError("inverse solve needs a 'nu' slot in the parameters")
    if data is None or len(data) == 0:
        raise ConfigurationError("inverse solve needs a nonempty data set")
    pointsets = {"data": data}
    if cfg.n_interior:
        pointsets["interior"] = sampler.sample_interior(instance, cfg.n_interior,
                                                        cfg.sample_seed)
    else:
        pointsets["interior"] = sampler.PointSet(data.points, "interior")
    return _run_loop(spec, instance, init_params, pointsets, cfg, track_nu=True)


def _run_loop(spec, instance, init_params, pointsets, cfg, track_nu):
    grid = evaluation_grid(instance, cfg.eval_grid)
    params = init_params.copy()
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate, params.flat.size)
    history = RunHistory()
    nu_warned = False

    def record(iteration, breakdown):
        nonlocal nu_warned
        mae, rel = metrics(predict(spec, instance, params, grid.points), grid.ref)
        nu_est = None
        if track_nu:
            nu_est = params.extra("nu")
            if not nu_warned and not 0.0 <= nu_est <= problems.NU_MAX:
                warnings.warn(f"viscosity estimate {nu_est:.6g} left [0, 0.1/pi]")
                nu_warned = True
        history.append(HistoryRow(iteration, breakdown.pde, breakdown.ic,
                                  breakdown.bc, breakdown.data, breakdown.total,
                                  mae, rel, nu_est))

    try:
        for it in range(cfg.iterations):
            tape = ad.GradTape(params)
            breakdown = compute_loss(spec, instance, tape, pointsets, cfg.weights)
            if it % cfg.eval_interval == 0:
                record(it, breakdown)
            grads = tape.gradient(breakdown.total_var)
            params, opt = step(opt, params, grads)
        final = compute_loss(spec, instance, params, pointsets, cfg.weights)
        record(cfg.iterations, final)
    except NumericError as exc:
        raise TrainingAborted(str(exc), params, history) from exc
    return params, history
