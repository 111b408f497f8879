"""Collocation, boundary, initial and labeled data point generation.

All sampling is uniform and seed-deterministic. Points use each family's
input ordering (see problems.input_names).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import problems
from .errors import ConfigurationError

ROLES = ("interior", "boundary", "initial", "data")


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray                 # (n, d)
    role: str
    values: np.ndarray | None = None   # (n,) or (n, k) labels

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(f"unknown point role {self.role!r}")
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ConfigurationError("points must be a 2-D array")
        object.__setattr__(self, "points", pts)
        if self.values is not None:
            vals = np.asarray(self.values, dtype=np.float64)
            if len(vals) != len(pts):
                raise ConfigurationError("labels and points disagree in length")
            if not np.all(np.isfinite(vals)):
                raise ConfigurationError("labels must be finite")
            object.__setattr__(self, "values", vals)
        elif self.role == "data":
            raise ConfigurationError("data point sets always carry labels")

    def __len__(self) -> int:
        return len(self.points)


def _empty(instance, role) -> PointSet:
    d = len(problems.input_names(instance))
    values = np.zeros(0) if role == "data" else None
    return PointSet(np.zeros((0, d)), role, values)


def sample_interior(instance, n: int, seed) -> PointSet:
    """n i.i.d. uniform points over the family's full domain box."""
    if n < 0:
        raise ConfigurationError("point count must be nonnegative")
    if n == 0:
        return _empty(instance, "interior")
    rng = np.random.default_rng(seed)
    box = problems.domain(instance)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(n, len(box)))
    return PointSet(pts, "interior")


def sample_boundary(instance, n: int, seed) -> PointSet:
    """Points on the family's boundary faces, labeled where values are
    prescribed.

    1-D Poisson has exactly two boundary points, so any positive n yields
    both endpoints. Schrodinger points come in matched periodic pairs:
    row i and row i + n//2 share the same time at x = -5 and x = +5, and
    carry no labels.
    """
    if n < 0:
        raise ConfigurationError("point count must be nonnegative")
    if n == 0:
        return _empty(instance, "boundary")
    rng = np.random.default_rng(seed)

    if isinstance(instance, problems.Poisson1D):
        pts = np.array([[-10.0], [10.0]])
        return PointSet(pts, "boundary", problems.boundary_values(instance, pts))

    if isinstance(instance, problems.Poisson2D):
        edge = rng.integers(0, 4, size=n)
        pos = rng.uniform(0.0, 1.0, size=n)
        x = np.where(edge == 0, 0.0, np.where(edge == 1, 1.0, pos))
        y = np.where(edge == 2, 0.0, np.where(edge == 3, 1.0, pos))
        pts = np.column_stack([x, y])
        return PointSet(pts, "boundary", problems.boundary_values(instance, pts))

    if isinstance(instance, (problems.Burgers, problems.BurgersInverse)):
        t = rng.uniform(0.0, 1.0, size=n)
        side = np.where(rng.integers(0, 2, size=n) == 0, -1.0, 1.0)
        pts = np.column_stack([t, side])
        return PointSet(pts, "boundary", problems.boundary_values(instance, pts))

    # Schrodinger: n//2 periodic pairs
    pairs = n // 2
    if pairs == 0:
        return _empty(instance, "boundary")
    t = rng.uniform(0.0, np.pi / 2, size=pairs)
    pts = np.concatenate([np.column_stack([t, np.full(pairs, -5.0)]),
                          np.column_stack([t, np.full(pairs, 5.0)])])
    return PointSet(pts, "boundary")


def sample_initial(instance, n: int, seed) -> PointSet:
    """Labeled points on the t = 0 face of time-dependent families."""
    if n < 0:
        raise ConfigurationError("point count must be nonnegative")
    if isinstance(instance, (problems.Poisson1D, problems.Poisson2D)):
        if n > 0:
            raise ConfigurationError(
                f"{problems.family_name(instance)} has no initial condition")
        return _empty(instance, "initial")
    if n == 0:
        return _empty(instance, "initial")
    rng = np.random.default_rng(seed)
    lo, hi = problems.domain(instance)[1]
    x = rng.uniform(lo, hi, size=n)
    pts = np.column_stack([np.zeros(n), x])
    return PointSet(pts, "initial", problems.initial_values(instance, pts))


def sample_data(instance, n: int, seed) -> PointSet:
    """Interior points labeled with the family's reference solution."""
    if n < 0:
        raise ConfigurationError("point count must be nonnegative")
    if isinstance(instance, problems.Schrodinger):
        raise ConfigurationError(
            "no labeled data for the Schrodinger family (reference gives |h| only)")
    if n == 0:
        return _empty(instance, "data")
    interior = sample_interior(instance, n, seed)
    values = problems.exact_solution(instance, interior.points)
    return PointSet(interior.points, "data", values)


def add_noise(pointset: PointSet, pct: float, seed) -> PointSet:
    """Perturb labels by pct of their standard deviation, Gaussian i.i.d."""
    if pct < 0:
        raise ConfigurationError("noise fraction must be nonnegative")
    if pointset.values is None:
        raise ConfigurationError("cannot add noise to an unlabeled point set")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(pointset.values.shape)
    noisy = pointset.values + pct * pointset.values.std() * eps
    return PointSet(pointset.points, pointset.role, noisy)


def write_pointset(path, pointset: PointSet, names=None) -> None:
    d = pointset.points.shape[1]
    names = list(names) if names is not None else [f"x{i}" for i in range(d)]
    vals = pointset.values
    if vals is not None and vals.ndim == 1:
        vals = vals[:, None]
    value_cols = [] if vals is None else (
        ["value"] if vals.shape[1] == 1 else [f"value{i}" for i in range(vals.shape[1])])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["role"] + value_cols)
        for i in range(len(pointset)):
            row = [f"{v:.17g}" for v in pointset.points[i]] + [pointset.role]
            if vals is not None:
                row += [f"{v:.17g}" for v in vals[i]]
            writer.writerow(row)


def read_pointset(path) -> PointSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    role_idx = header.index("role")
    n_vals = len(header) - role_idx - 1
    pts, vals, role = [], [], "interior"
    for row in rows[1:]:
        pts.append([float(v) for v in row[:role_idx]])
        role = row[role_idx]
        if n_vals:
            vals.append([float(v) for v in row[role_idx + 1:]])
    points = np.asarray(pts) if pts else np.zeros((0, role_idx))
    values = None
    if n_vals:
        values = np.asarray(vals) if vals else np.zeros((0, n_vals))
        if values.shape[1] == 1:
            values = values[:, 0]
    return PointSet(points, role, values)
