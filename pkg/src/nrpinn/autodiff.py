"""Differentiation engine: reverse-mode tape plus second-order input jets.

Residual losses need two kinds of derivatives at once: derivatives of the
network output with respect to selected *inputs* (first order for u_t, u_x,
pure second order for u_xx, u_yy), and gradients of any scalar built from
those with respect to every *parameter*. We get both by propagating
second-order Taylor jets through the network in forward mode while each jet
coefficient is a node on a reverse-mode tape over float64 numpy arrays.

Only pure second derivatives exist here: ``Jet2.d2`` is keyed by a single
input dimension, so mixed input derivatives (u_xt and friends) cannot be
requested. All arithmetic is 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import ConfigurationError, NumericError
from . import network

Arrayish = Union["Var", np.ndarray, float]


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Var:
    """One node of the reverse-mode tape, wrapping a float64 array.

    Values are never mutated after construction; ``backward`` accumulates
    gradients with a fixed topological reduction order, so repeated runs on
    identical inputs are bit-reproducible.
    """

    __slots__ = ("value", "grad", "_parents", "_vjp")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, value, _parents=(), _vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        return _binary(
            self, other, _value(self) + _value(other),
            lambda g: _unbroadcast(g, self.value.shape),
            (lambda g: _unbroadcast(g, other.value.shape))
            if isinstance(other, Var) else None,
        )

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return _binary(
            self, other, _value(self) - _value(other),
            lambda g: _unbroadcast(g, self.value.shape),
            (lambda g: _unbroadcast(-g, other.value.shape))
            if isinstance(other, Var) else None,
        )

    def __rsub__(self, other):
        return _binary(
            self, other, _value(other) - self.value,
            lambda g: _unbroadcast(-g, self.value.shape),
            None,
        )

    def __mul__(self, other):
        av, bv = self.value, _value(other)
        return _binary(
            self, other, av * bv,
            lambda g: _unbroadcast(g * bv, av.shape),
            (lambda g: _unbroadcast(g * av, bv.shape))
            if isinstance(other, Var) else None,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        av, bv = self.value, _value(other)
        out = av / bv
        return _binary(
            self, other, out,
            lambda g: _unbroadcast(g / bv, av.shape),
            (lambda g: _unbroadcast(-g * out / bv, bv.shape))
            if isinstance(other, Var) else None,
        )

    def __rtruediv__(self, other):
        av = _value(other)
        out = av / self.value
        return _binary(
            self, other, out,
            lambda g: _unbroadcast(-g * out / self.value, self.value.shape),
            None,
        )

    def __pow__(self, p):
        if isinstance(p, Var):
            raise TypeError("exponent must be a plain number")
        v = self.value
        return Var(v ** p, (self,), lambda g: (g * p * v ** (p - 1),))

    # -- shape ops --------------------------------------------------------

    def col(self, j: int) -> "Var":
        """Select column j of a 2-D value as a 1-D node."""
        v = self.value[:, j]

        def vjp(g):
            z = np.zeros(self.value.shape)
            z[:, j] = g
            return (z,)

        return Var(v, (self,), vjp)

    def sum(self) -> "Var":
        n = self.value.shape
        return Var(self.value.sum(), (self,), lambda g: (np.broadcast_to(g, n).copy(),))

    def mean(self) -> "Var":
        n = self.value.size
        shape = self.value.shape
        return Var(
            self.value.mean(), (self,),
            lambda g: (np.broadcast_to(g / n, shape).copy(),),
        )

    # -- elementwise transcendentals ---------------------------------------

    def tanh(self) -> "Var":
        t = np.tanh(self.value)
        return Var(t, (self,), lambda g: (g * (1.0 - t * t),))

    def sin(self) -> "Var":
        c = np.cos(self.value)
        return Var(np.sin(self.value), (self,), lambda g: (g * c,))

    def cos(self) -> "Var":
        s = np.sin(self.value)
        return Var(np.cos(self.value), (self,), lambda g: (g * -s,))

    def exp(self) -> "Var":
        e = np.exp(self.value)
        return Var(e, (self,), lambda g: (g * e,))

    def sech(self) -> "Var":
        s = 1.0 / np.cosh(self.value)
        t = np.tanh(self.value)
        return Var(s, (self,), lambda g: (g * (-s * t),))


def _value(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _binary(a, b, value, da, db):
    parents = []
    vjps = []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(da)
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(db)
    if not parents:
        return Var(value)

    def vjp(g):
        return tuple(f(g) for f in vjps)

    return Var(value, tuple(parents), vjp)


def linear(x: Arrayish, w: Arrayish, b: Arrayish | None = None):
    """Affine map ``x @ w.T (+ b)`` with x:(n,i), w:(o,i), b:(o,).

    Returns a plain array when every operand is constant, so evaluation
    without a tape stays pure numpy.
    """
    xv, wv = _value(x), _value(w)
    out = xv @ wv.T
    if b is not None:
        out = out + _value(b)
    parents = []
    vjps = []
    if isinstance(x, Var):
        parents.append(x)
        vjps.append(lambda g: g @ wv)
    if isinstance(w, Var):
        parents.append(w)
        vjps.append(lambda g: g.T @ xv)
    if b is not None and isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g: g.sum(axis=0))
    if not parents:
        return out

    def vjp(g):
        return tuple(f(g) for f in vjps)

    return Var(out, tuple(parents), vjp)


def backward(root: Var) -> None:
    """Accumulate d(root)/d(node) into ``grad`` over the whole tape."""
    topo: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    root.grad = np.ones_like(root.value)
    for node in reversed(topo):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            # 0-d numpy arithmetic yields scalars; normalize so in-place
            # accumulation always has an array target
            g = np.asarray(g)
            if parent.grad is None:
                parent.grad = g if g.flags.writeable else g.copy()
            else:
                np.add(parent.grad, g, out=parent.grad)


# -- dispatch helpers so jet code works on Vars and plain arrays alike ----


def tanh(x: Arrayish):
    return x.tanh() if isinstance(x, Var) else np.tanh(x)


def sin(x: Arrayish):
    return x.sin() if isinstance(x, Var) else np.sin(x)


def cos(x: Arrayish):
    return x.cos() if isinstance(x, Var) else np.cos(x)


def exp(x: Arrayish):
    return x.exp() if isinstance(x, Var) else np.exp(x)


def sech(x: Arrayish):
    return x.sech() if isinstance(x, Var) else 1.0 / np.cosh(x)


def mean(x: Arrayish):
    return x.mean() if isinstance(x, Var) else np.mean(x)


# -- second-order jets -----------------------------------------------------


@dataclass
class Jet2:
    """Taylor data of a quantity: value, first and pure second derivatives.

    ``d1``/``d2`` are keyed by input dimension. Coefficients are numpy
    arrays, or tape nodes when the computation must stay differentiable in
    the parameters.
    """

    value: Arrayish
    d1: dict = field(default_factory=dict)
    d2: dict = field(default_factory=dict)

    @classmethod
    def seed(cls, value, dim: int):
        """The identity jet of input coordinate ``dim``: d1 = 1, d2 = 0."""
        v = np.asarray(value, dtype=np.float64)
        return cls(v, {dim: np.ones_like(v)}, {dim: np.zeros_like(v)})

    @classmethod
    def constant(cls, value, dims=()):
        v = np.asarray(value, dtype=np.float64)
        return cls(v, {k: np.zeros_like(v) for k in dims},
                   {k: np.zeros_like(v) for k in dims})

    def _dims(self, other: "Jet2"):
        if set(self.d1) != set(other.d1) or set(self.d2) != set(other.d2):
            raise ConfigurationError("jets track different dimensions")
        return self.d1.keys(), self.d2.keys()

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, dict(self.d1), dict(self.d2))
        d1s, d2s = self._dims(other)
        return Jet2(self.value + other.value,
                    {k: self.d1[k] + other.d1[k] for k in d1s},
                    {k: self.d2[k] + other.d2[k] for k in d2s})

    __radd__ = __add__

    def __sub__(self, other):
        return self + (other * -1.0 if isinstance(other, Jet2) else -other)

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value * other,
                        {k: d * other for k, d in self.d1.items()},
                        {k: d * other for k, d in self.d2.items()})
        d1s, d2s = self._dims(other)
        f, g = self, other
        return Jet2(
            f.value * g.value,
            {k: f.d1[k] * g.value + f.value * g.d1[k] for k in d1s},
            {k: f.d2[k] * g.value + 2.0 * f.d1[k] * g.d1[k] + f.value * g.d2[k]
             for k in d2s},
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / other)
        d1s, d2s = self._dims(other)
        q = self.value / other.value
        d1 = {k: (self.d1[k] - q * other.d1[k]) / other.value for k in d1s}
        d2 = {k: (self.d2[k] - 2.0 * d1[k] * other.d1[k] - q * other.d2[k])
              / other.value for k in d2s}
        return Jet2(q, d1, d2)

    def __rtruediv__(self, other):
        const = Jet2(np.asarray(other, dtype=np.float64),
                     {k: 0.0 * d for k, d in self.d1.items()},
                     {k: 0.0 * d for k, d in self.d2.items()})
        return const.__truediv__(self)

    def __pow__(self, p):
        v = self.value
        return self._chain(v ** p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def _chain(self, f0, f1, f2):
        """Unary chain rule given sigma(v), sigma'(v), sigma''(v)."""
        d1 = {k: f1 * d for k, d in self.d1.items()}
        d2 = {k: f2 * self.d1[k] * self.d1[k] + f1 * dd
              for k, dd in self.d2.items()}
        return Jet2(f0, d1, d2)

    def tanh(self):
        t = tanh(self.value)
        sp = 1.0 - t * t
        return self._chain(t, sp, -2.0 * t * sp)

    def sin(self):
        s, c = sin(self.value), cos(self.value)
        return self._chain(s, c, -1.0 * s)

    def cos(self):
        s, c = sin(self.value), cos(self.value)
        return self._chain(c, -1.0 * s, -1.0 * c)

    def exp(self):
        e = exp(self.value)
        return self._chain(e, e, e)

    def sech(self):
        s = sech(self.value)
        t = tanh(self.value)
        return self._chain(s, -1.0 * s * t, s * (t * t - s * s))


class GradTape:
    """Parameter leaves for one differentiable evaluation.

    Leaves alias the parameter storage (no copies), so the vector must not
    be mutated while the tape is in use; optimizer steps always build fresh
    vectors, which keeps this safe.
    """

    def __init__(self, params: "network.ParamVector"):
        self.params = params
        self.weights = [Var(params.weight(i)) for i in range(params.n_layers)]
        self.biases = [Var(params.bias(i)) for i in range(params.n_layers)]
        self.extras = {name: Var(params.extra_view(name))
                       for name in params.extra_names}

    def extra(self, name: str) -> Var:
        if name not in self.extras:
            raise ConfigurationError(f"parameter vector has no extra slot {name!r}")
        return self.extras[name]

    def gradient(self, loss: Var) -> np.ndarray:
        """Flat d(loss)/d(theta), ordered exactly like ``params.flat``."""
        if loss.value.ndim != 0:
            raise ConfigurationError("gradient target must be a scalar")
        if not np.isfinite(loss.value):
            raise NumericError(f"loss is not finite: {float(loss.value)}")
        backward(loss)
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(np.zeros(w.value.size) if w.grad is None else w.grad.ravel())
            parts.append(np.zeros(b.value.size) if b.grad is None else b.grad.ravel())
        for name in self.params.extra_names:
            g = self.extras[name].grad
            parts.append(np.zeros(1) if g is None else np.asarray(g).reshape(1))
        return np.concatenate(parts) if parts else np.zeros(0)


def grad_params(loss: Var, tape: GradTape) -> np.ndarray:
    """Gradient of a tape scalar with respect to every parameter."""
    return tape.gradient(loss)


def eval_jet(spec: "network.MlpSpec", params, x, tracked_dims=(), *,
             second_order=None) -> Jet2:
    """Run the network, carrying first/second derivatives in ``tracked_dims``.

    ``params`` may be a ParamVector (plain-array jets, cheap, for
    evaluation and finite-difference oracles) or a GradTape (jet
    coefficients become tape nodes, differentiable in the parameters).
    ``second_order`` restricts which tracked dimensions carry second
    derivatives; by default all of them do.
    """
    if isinstance(params, GradTape):
        tape = params
        pv = tape.params
        ws: list = tape.weights
        bs: list = tape.biases
        slope = tape.extras.get("a")
    else:
        tape = None
        pv = params
        ws = [pv.weight(i) for i in range(pv.n_layers)]
        bs = [pv.bias(i) for i in range(pv.n_layers)]
        slope = pv.extra("a") if "a" in pv.extra_names else None

    if tuple(pv.widths) != tuple(spec.layer_widths):
        raise ConfigurationError(
            f"parameter layout {pv.widths} does not match network widths "
            f"{spec.layer_widths}")

    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    d = spec.layer_widths[0]
    if x.shape[1] != d:
        raise ConfigurationError(f"input has width {x.shape[1]}, expected {d}")
    tracked = tuple(tracked_dims)
    if any(k < 0 or k >= d for k in tracked):
        raise ConfigurationError(f"tracked dims {tracked} outside input range 0..{d-1}")
    second = tuple(tracked if second_order is None else second_order)
    if any(k not in tracked for k in second):
        raise ConfigurationError("second_order must be a subset of tracked_dims")

    n = x.shape[0]
    d1 = {}
    for k in tracked:
        e = np.zeros((n, d))
        e[:, k] = 1.0
        d1[k] = e
    jet = Jet2(x, d1, {k: np.zeros((n, d)) for k in second})

    act = {"tanh": Jet2.tanh, "sin": Jet2.sin}[spec.activation]
    if spec.adaptive_slope and slope is None:
        raise ConfigurationError("adaptive network needs an 'a' slot in the parameters")

    n_layers = len(ws)
    for i in range(n_layers):
        w, b = ws[i], bs[i]
        jet = Jet2(linear(jet.value, w, b),
                   {k: linear(v, w) for k, v in jet.d1.items()},
                   {k: linear(v, w) for k, v in jet.d2.items()})
        if i < n_layers - 1:
            if spec.adaptive_slope:
                jet = jet * (float(spec.slope_scale) * slope)
            jet = act(jet)
    return jet


def check_gradient(f: Callable[[GradTape], Var], params: "network.ParamVector",
                   step: float) -> float:
    """Max relative gap between tape gradients and central differences.

    The discrepancy for coordinate i is |analytic - numeric| / max(1, |numeric|).
    """
    if step <= 0:
        raise ConfigurationError("step must be positive")
    tape = GradTape(params)
    analytic = tape.gradient(f(tape))

    def value_at(flat: np.ndarray) -> float:
        p = params.with_flat(flat)
        out = float(f(GradTape(p)).value)
        if not np.isfinite(out):
            raise NumericError("objective is not finite during finite differencing")
        return out

    worst = 0.0
    base = params.flat
    for i in range(base.size):
        hi = base.copy()
        hi[i] += step
        lo = base.copy()
        lo[i] -= step
        numeric = (value_at(hi) - value_at(lo)) / (2.0 * step)
        gap = abs(analytic[i] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, gap)
    return worst
