"""Meta-learning task distributions over the PDE families.

A task is either a labeled solution sample (zero-order information) or a
concrete PDE with its training point sets (high-order information).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import problems, sampler
from .errors import ConfigurationError, UnsupportedProblemError

INFO_KINDS = ("zero_order", "high_order")
FAMILIES = ("poisson1d", "poisson2d", "burgers", "schrodinger")

# The labeled Burgers pool uses strictly viscous coefficients so the
# quadrature reference exists; the governing-equation pool spans the full
# coefficient interval.
BURGERS_NU_ZERO_ORDER = (0.005 / np.pi, 0.1 / np.pi)
BURGERS_NU_HIGH_ORDER = (0.0, 0.1 / np.pi)


@dataclass(frozen=True)
class TaskDistribution:
    info_kind: str
    family: str
    nu_low: float | None = None        # burgers coefficient range override
    nu_high: float | None = None
    oracle_grid_n: int = 129           # labeled 2-D tasks solve on this grid

    def __post_init__(self):
        if self.info_kind not in INFO_KINDS:
            raise ConfigurationError(f"unknown info kind {self.info_kind!r}")
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.family == "schrodinger" and self.info_kind == "zero_order":
            raise UnsupportedProblemError(
                "no labeled task pool for the Schrodinger family")

    def nu_range(self) -> tuple[float, float]:
        default = (BURGERS_NU_ZERO_ORDER if self.info_kind == "zero_order"
                   else BURGERS_NU_HIGH_ORDER)
        lo = default[0] if self.nu_low is None else self.nu_low
        hi = default[1] if self.nu_high is None else self.nu_high
        return lo, hi


@dataclass(frozen=True)
class TaskBudget:
    n_data: int = 0
    n_interior: int = 0
    n_boundary: int = 0
    n_initial: int = 0


@dataclass(frozen=True)
class LabeledTask:
    data: sampler.PointSet


@dataclass(frozen=True)
class PdeTask:
    instance: problems.PdeInstance
    interior: sampler.PointSet
    boundary: sampler.PointSet
    initial: sampler.PointSet | None = None


Task = Union[LabeledTask, PdeTask]


def sample_task(dist: TaskDistribution, budget: TaskBudget, seed) -> Task:
    """Draw one task; deterministic for a fixed (distribution, budget, seed)."""
    rng = np.random.default_rng(seed)
    if dist.info_kind == "zero_order":
        return _sample_zero_order(dist, budget, rng)
    return _sample_high_order(dist, budget, rng)


def _child_seeds(rng, n):
    return rng.integers(0, 2 ** 63 - 1, size=n)


def _sample_zero_order(dist, budget, rng) -> LabeledTask:
    if budget.n_data <= 0:
        raise ConfigurationError("labeled tasks need n_data > 0")

    if dist.family == "poisson1d":
        zeta = rng.uniform(0.0, 2.0, size=3)
        eta = rng.uniform(0.0, 2.0, size=3)
        x = rng.uniform(-10.0, 10.0, size=(budget.n_data, 1))
        labels = (zeta[0] * np.sin(eta[0] * x[:, 0])
                  + zeta[1] * np.cos(eta[1] * x[:, 0])
                  - zeta[2] * x[:, 0] + eta[2])
        return LabeledTask(sampler.PointSet(x, "data", labels))

    if dist.family == "poisson2d":
        instance = _draw_poisson2d(rng)
        pts = rng.uniform(0.0, 1.0, size=(budget.n_data, 2))
        grid = problems.oracle_poisson2d_fd(instance.sources, dist.oracle_grid_n)
        from scipy.interpolate import RegularGridInterpolator
        labels = RegularGridInterpolator((grid.x, grid.y), grid.u)(pts)
        return LabeledTask(sampler.PointSet(pts, "data", labels))

    # burgers
    lo, hi = dist.nu_range()
    nu = rng.uniform(lo, hi)
    t = rng.uniform(0.0, 1.0, size=budget.n_data)
    x = rng.uniform(-1.0, 1.0, size=budget.n_data)
    labels = problems.oracle_burgers_cole_hopf(x, t, nu)
    return LabeledTask(sampler.PointSet(np.column_stack([t, x]), "data", labels))


def _sample_high_order(dist, budget, rng) -> PdeTask:
    if budget.n_interior <= 0:
        raise ConfigurationError("governing-equation tasks need n_interior > 0")

    if dist.family == "poisson1d":
        instance = problems.Poisson1D(rng.uniform(0.0, 1.0), rng.uniform(0.0, 2.0))
    elif dist.family == "poisson2d":
        instance = _draw_poisson2d(rng)
    elif dist.family == "burgers":
        lo, hi = dist.nu_range()
        instance = problems.Burgers(rng.uniform(lo, hi))
    else:
        instance = problems.Schrodinger(rng.uniform(0.0, 1.0))

    s_int, s_bnd, s_ini = _child_seeds(rng, 3)
    interior = sampler.sample_interior(instance, budget.n_interior, s_int)
    boundary = sampler.sample_boundary(instance, budget.n_boundary, s_bnd)
    initial = None
    if dist.family in ("burgers", "schrodinger"):
        initial = sampler.sample_initial(instance, budget.n_initial, s_ini)
    return PdeTask(instance, interior, boundary, initial)


def _draw_poisson2d(rng) -> problems.Poisson2D:
    m = int(rng.choice((1, 5, 10)))
    a = rng.uniform(0.1, 0.9, size=m)
    b = rng.uniform(0.1, 0.9, size=m)
    c = rng.uniform(0.8, 1.2, size=m)
    return problems.Poisson2D(tuple(zip(a, b, c)))
