"""PDE families: residual operators, reference solutions, numerical oracles.

Input conventions: 1-D Poisson takes (x), 2-D Poisson (x, y), Burgers and
Schrodinger (t, x). Networks for the Schrodinger family output two columns,
the real and imaginary parts of h.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import cg

from .errors import ConfigurationError, NumericError, UnsupportedProblemError

NU_MAX = 0.1 / np.pi


@dataclass(frozen=True)
class Poisson1D:
    """u_xx = -alpha^2 sin(alpha x) - beta^2 cos(beta x) on (-10, 10).

    Exact solution sin(alpha x) + cos(beta x) - 0.1 x; its endpoint values
    are the Dirichlet data. The headline case is alpha=0.7, beta=1.5.
    """

    alpha: float = 0.7
    beta: float = 1.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha={self.alpha} outside [0, 1]")
        if not 0.0 <= self.beta <= 2.0:
            raise ConfigurationError(f"beta={self.beta} outside [0, 2]")


@dataclass(frozen=True)
class Poisson2D:
    """-Lap u = sum of Gaussian heat sources on the unit square, u = 0 on the edge."""

    sources: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "sources",
                           tuple(tuple(float(v) for v in s) for s in self.sources))
        for a, b, c in self.sources:
            if not (0.1 <= a <= 0.9 and 0.1 <= b <= 0.9):
                raise ConfigurationError(f"source center ({a}, {b}) outside [0.1, 0.9]^2")
            if not 0.8 <= c <= 1.2:
                raise ConfigurationError(f"source strength {c} outside [0.8, 1.2]")


# The eight-source layout used as the 2-D target problem.
POISSON2D_TARGET_SOURCES = (
    (0.15, 0.34, 0.84), (0.18, 0.31, 1.07), (0.20, 0.65, 1.12),
    (0.31, 0.86, 0.83), (0.43, 0.65, 1.12), (0.56, 0.38, 1.11),
    (0.70, 0.64, 0.99), (0.80, 0.12, 0.91),
)


@dataclass(frozen=True)
class Burgers:
    """u_t + u u_x = nu u_xx on [-1,1], u(0,x) = -sin(pi x), u(t,+-1) = 0."""

    nu: float = 0.01 / np.pi

    def __post_init__(self):
        if not 0.0 <= self.nu <= NU_MAX:
            raise ConfigurationError(f"nu={self.nu} outside [0, 0.1/pi]")


@dataclass(frozen=True)
class BurgersInverse:
    """Burgers dynamics with unknown viscosity; nu_true only labels the data."""

    nu_true: float = 0.01 / np.pi

    def __post_init__(self):
        if not 0.0 < self.nu_true <= NU_MAX:
            raise ConfigurationError(f"nu_true={self.nu_true} outside (0, 0.1/pi]")


@dataclass(frozen=True)
class Schrodinger:
    """i h_t + lam h_xx + |h|^2 h = 0, periodic on [-5,5], h(0,x) = 2 sech x."""

    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lam={self.lam} outside [0, 1]")


PdeInstance = Union[Poisson1D, Poisson2D, Burgers, BurgersInverse, Schrodinger]

FAMILY_NAMES = {
    Poisson1D: "poisson1d",
    Poisson2D: "poisson2d",
    Burgers: "burgers",
    BurgersInverse: "burgers_inverse",
    Schrodinger: "schrodinger",
}


def family_name(instance: PdeInstance) -> str:
    return FAMILY_NAMES[type(instance)]


def input_names(instance: PdeInstance) -> tuple[str, ...]:
    if isinstance(instance, Poisson1D):
        return ("x",)
    if isinstance(instance, Poisson2D):
        return ("x", "y")
    return ("t", "x")


def domain(instance: PdeInstance) -> np.ndarray:
    """Per-input (low, high) bounds, ordered like input_names."""
    if isinstance(instance, Poisson1D):
        return np.array([[-10.0, 10.0]])
    if isinstance(instance, Poisson2D):
        return np.array([[0.0, 1.0], [0.0, 1.0]])
    if isinstance(instance, (Burgers, BurgersInverse)):
        return np.array([[0.0, 1.0], [-1.0, 1.0]])
    return np.array([[0.0, np.pi / 2], [-5.0, 5.0]])


def n_outputs(instance: PdeInstance) -> int:
    return 2 if isinstance(instance, Schrodinger) else 1


def derivative_dims(instance: PdeInstance) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(tracked input dims, dims that also need second derivatives)."""
    if isinstance(instance, Poisson1D):
        return (0,), (0,)
    if isinstance(instance, Poisson2D):
        return (0, 1), (0, 1)
    return (0, 1), (1,)


def _consumed_dims(instance: PdeInstance) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(d1 dims, d2 dims) the residual actually reads."""
    if isinstance(instance, Poisson1D):
        return (), (0,)
    if isinstance(instance, Poisson2D):
        return (), (0, 1)
    if isinstance(instance, (Burgers, BurgersInverse)):
        return (0, 1), (1,)
    return (0,), (1,)


def poisson2d_source(sources, x, y):
    total = np.zeros(np.broadcast(x, y).shape)
    for a, b, c in sources:
        total += c * np.exp(-((x - a) ** 2 + (y - b) ** 2) / 0.01)
    return total


def residual(instance: PdeInstance, jet, points: np.ndarray, *, nu=None):
    """Pointwise equation misfit, one entry per residual component.

    ``jet`` must carry the derivatives listed by ``derivative_dims``. For the
    inverse family pass the trainable viscosity through ``nu``; it defaults
    to the instance coefficient.
    """
    points = np.asarray(points, dtype=np.float64)
    need_d1, need_d2 = _consumed_dims(instance)
    if any(k not in jet.d1 for k in need_d1) or any(k not in jet.d2 for k in need_d2):
        raise ConfigurationError(
            f"jet tracks d1={sorted(jet.d1)} d2={sorted(jet.d2)}, "
            f"family needs d1={need_d1} d2={need_d2}")

    if isinstance(instance, Poisson1D):
        x = points[:, 0]
        a, b = instance.alpha, instance.beta
        u_xx = _col(jet.d2[0], 0)
        return (u_xx + a * a * np.sin(a * x) + b * b * np.cos(b * x),)

    if isinstance(instance, Poisson2D):
        x, y = points[:, 0], points[:, 1]
        u_xx = _col(jet.d2[0], 0)
        u_yy = _col(jet.d2[1], 0)
        return (-1.0 * (u_xx + u_yy) - poisson2d_source(instance.sources, x, y),)

    if isinstance(instance, (Burgers, BurgersInverse)):
        if nu is None:
            nu = instance.nu if isinstance(instance, Burgers) else instance.nu_true
        u = _col(jet.value, 0)
        u_t = _col(jet.d1[0], 0)
        u_x = _col(jet.d1[1], 0)
        u_xx = _col(jet.d2[1], 0)
        return (u_t + u * u_x - nu * u_xx,)

    lam = instance.lam
    u, v = _col(jet.value, 0), _col(jet.value, 1)
    u_t, v_t = _col(jet.d1[0], 0), _col(jet.d1[0], 1)
    u_xx, v_xx = _col(jet.d2[1], 0), _col(jet.d2[1], 1)
    mag = u * u + v * v
    return (-1.0 * v_t + lam * u_xx + mag * u,
            u_t + lam * v_xx + mag * v)


def _col(coeff, j):
    return coeff.col(j) if hasattr(coeff, "col") else coeff[:, j]


def boundary_values(instance: PdeInstance, points: np.ndarray):
    """Dirichlet labels on the boundary, or None where the condition is periodic."""
    if isinstance(instance, Poisson1D):
        return exact_solution(instance, points)
    if isinstance(instance, Poisson2D):
        return np.zeros(len(points))
    if isinstance(instance, (Burgers, BurgersInverse)):
        return np.zeros(len(points))
    return None


def initial_values(instance: PdeInstance, points: np.ndarray):
    points = np.asarray(points, dtype=np.float64)
    if isinstance(instance, (Burgers, BurgersInverse)):
        return -np.sin(np.pi * points[:, 1])
    if isinstance(instance, Schrodinger):
        x = points[:, 1]
        return np.column_stack([2.0 / np.cosh(x), np.zeros_like(x)])
    raise ConfigurationError(f"{family_name(instance)} has no initial condition")


def exact_solution(instance: PdeInstance, points: np.ndarray) -> np.ndarray:
    """Reference solution values at the given points.

    Closed form for 1-D Poisson, quadrature for Burgers, grid oracles
    (interpolated) for 2-D Poisson and Schrodinger (|h|).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if isinstance(instance, Poisson1D):
        x = points[:, 0]
        return np.sin(instance.alpha * x) + np.cos(instance.beta * x) - 0.1 * x
    if isinstance(instance, (Burgers, BurgersInverse)):
        nu = instance.nu if isinstance(instance, Burgers) else instance.nu_true
        return oracle_burgers_cole_hopf(points[:, 1], points[:, 0], nu)
    if isinstance(instance, Poisson2D):
        grid = oracle_poisson2d_fd(instance.sources, 257)
        interp = RegularGridInterpolator((grid.x, grid.y), grid.u)
        return interp(points)
    if isinstance(instance, Schrodinger):
        grid = oracle_schrodinger_spectral(instance.lam)
        return grid.interpolate_abs(points[:, 0], points[:, 1])
    raise UnsupportedProblemError(f"no reference solution for {instance!r}")


# -- Burgers: Cole-Hopf quadrature ------------------------------------------


def oracle_burgers_cole_hopf(x, t, nu: float, n_nodes: int = 100) -> np.ndarray:
    """Viscous Burgers solution for the -sin(pi x) start, via the heat-kernel
    quotient evaluated with Gauss-Hermite quadrature.

    Rows with t = 0 return -sin(pi x) directly. The shared exponential is
    rescaled by its per-point maximum before the quotient, which keeps the
    quadrature finite for small nu.
    """
    if nu <= 0.0:
        raise UnsupportedProblemError("inviscid Burgers reference is not provided")
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    x, t = np.broadcast_arrays(x, t)
    if np.any(t < 0):
        raise ConfigurationError("time must be nonnegative")
    out = np.empty(x.shape)
    at_zero = t == 0.0
    out[at_zero] = -np.sin(np.pi * x[at_zero])

    xs, ts = x[~at_zero].ravel(), t[~at_zero].ravel()
    if xs.size:
        z, w = np.polynomial.hermite.hermgauss(n_nodes)
        vals = np.empty(xs.size)
        block = 8192
        for lo in range(0, xs.size, block):
            xb = xs[lo:lo + block, None]
            cb = 2.0 * np.sqrt(nu * ts[lo:lo + block, None])
            arg = np.pi * (xb - cb * z[None, :])
            expo = -np.cos(arg) / (2.0 * np.pi * nu)
            expo -= expo.max(axis=1, keepdims=True)
            weights = w[None, :] * np.exp(expo)
            vals[lo:lo + block] = -(weights * np.sin(arg)).sum(axis=1) / weights.sum(axis=1)
        out[~at_zero] = vals.reshape(out[~at_zero].shape)
    return out


# -- 2-D Poisson: five-point finite differences ------------------------------


@dataclass(frozen=True)
class Poisson2DGrid:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray  # u[i, j] = u(x[i], y[j])


@lru_cache(maxsize=16)
def _poisson2d_solve(sources: tuple, grid_n: int) -> Poisson2DGrid:
    xs = np.linspace(0.0, 1.0, grid_n)
    h = xs[1] - xs[0]
    m = grid_n - 2
    gx, gy = np.meshgrid(xs[1:-1], xs[1:-1], indexing="ij")
    b = poisson2d_source(sources, gx, gy).ravel()

    main = 2.0 * np.ones(m) / h ** 2
    off = -np.ones(m - 1) / h ** 2
    t1d = sparse.diags([off, main, off], (-1, 0, 1), format="csr")
    eye = sparse.identity(m, format="csr")
    lap = sparse.kron(t1d, eye) + sparse.kron(eye, t1d)

    if np.all(b == 0.0):
        interior = np.zeros(m * m)
    else:
        interior, info = cg(lap, b, rtol=1e-12, atol=0.0, maxiter=50_000)
        if info != 0:
            raise NumericError(f"Poisson solve did not converge (cg info={info})")
        resid = np.linalg.norm(b - lap @ interior)
        if resid > 1e-10 * max(1.0, np.linalg.norm(b)):
            raise NumericError(f"Poisson solve residual {resid:.3e} above tolerance")

    u = np.zeros((grid_n, grid_n))
    u[1:-1, 1:-1] = interior.reshape(m, m)
    return Poisson2DGrid(xs, xs.copy(), u)


def oracle_poisson2d_fd(sources, grid_n: int) -> Poisson2DGrid:
    """Solve -Lap u = f with zero Dirichlet data on a grid_n x grid_n grid."""
    if grid_n < 16:
        raise ConfigurationError("grid_n must be at least 16")
    sources = tuple(tuple(float(v) for v in s) for s in sources)
    return _poisson2d_solve(sources, int(grid_n))


# -- Schrodinger: split-step Fourier ------------------------------------------


@dataclass(frozen=True)
class SchrodingerGrid:
    x: np.ndarray        # nx periodic nodes, right endpoint excluded
    t: np.ndarray        # nt snapshot times
    h: np.ndarray        # complex field, shape (nt, nx)

    @property
    def habs(self) -> np.ndarray:
        return np.abs(self.h)

    def interpolate_abs(self, t, x) -> np.ndarray:
        """|h| at arbitrary (t, x), bilinear with periodic wrap in x."""
        xs = np.concatenate([self.x, [self.x[0] + 10.0]])
        vals = np.concatenate([self.habs, self.habs[:, :1]], axis=1)
        interp = RegularGridInterpolator((self.t, xs), vals)
        x = np.mod(np.asarray(x) + 5.0, 10.0) - 5.0
        return interp(np.column_stack([np.asarray(t), x]))

    def mass(self) -> np.ndarray:
        """Integral of |h|^2 dx per snapshot (rectangle rule, exact on the
        periodic grid)."""
        dx = 10.0 / self.x.size
        return (self.habs ** 2).sum(axis=1) * dx


@lru_cache(maxsize=8)
def _schrodinger_solve(lam: float, nx: int, nt_out: int, t_final: float) -> SchrodingerGrid:
    x = -5.0 + 10.0 * np.arange(nx) / nx
    k = 2.0 * np.pi * np.fft.fftfreq(nx, d=10.0 / nx)
    h0 = (2.0 / np.cosh(x)).astype(np.complex128)

    def run(steps_per_snap: int) -> np.ndarray:
        dt = t_final / ((nt_out - 1) * steps_per_snap)
        kick = np.exp(-1j * lam * k * k * dt)
        snaps = np.empty((nt_out, nx), dtype=np.complex128)
        snaps[0] = h0
        h = h0.copy()
        for j in range(1, nt_out):
            for _ in range(steps_per_snap):
                h = h * np.exp(0.5j * dt * np.abs(h) ** 2)
                h = np.fft.ifft(kick * np.fft.fft(h))
                h = h * np.exp(0.5j * dt * np.abs(h) ** 2)
            snaps[j] = h
        return snaps

    steps = 16
    snaps = run(steps)
    for _ in range(10):
        finer = run(steps * 2)
        if np.abs(finer[-1] - snaps[-1]).max() < 1e-8:
            snaps = finer
            break
        steps *= 2
        snaps = finer
    else:
        raise NumericError("time step refinement did not converge")

    t = np.linspace(0.0, t_final, nt_out)
    grid = SchrodingerGrid(x, t, snaps)
    mass = grid.mass()
    drift = np.abs(mass - mass[0]).max() / mass[0]
    if drift > 1e-6:
        raise NumericError(f"instability detected: mass drift {drift:.3e}")
    return grid


def oracle_schrodinger_spectral(lam: float, nx: int = 256, nt_out: int = 201,
                                t_final: float = np.pi / 2) -> SchrodingerGrid:
    """Integrate the cubic Schrodinger start 2 sech(x) with Strang-split
    spectral steps; the step count is refined until halving it moves the
    final field by less than 1e-8 in max norm."""
    return _schrodinger_solve(float(lam), int(nx), int(nt_out), float(t_final))
