"""Multi-layer perceptron: layout, classical initializations, checkpoints.

Everything here is plain numpy. The ``forward`` pass is the fast,
non-differentiable evaluation path; training goes through
``autodiff.eval_jet``, which produces identical values on the same
parameters.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

ACTIVATIONS = ("tanh", "sin")

_MAGIC = b"NRPK1\n"


@dataclass(frozen=True)
class MlpSpec:
    """Network shape: widths, hidden activation, optional trainable slope.

    With ``adaptive_slope`` the hidden activation becomes
    sigma(slope_scale * a * z) for a single shared trainable scalar a.
    """

    layer_widths: tuple[int, ...]
    activation: str = "tanh"
    adaptive_slope: bool = False
    slope_scale: int = 10

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2:
            raise ConfigurationError("network needs at least input and output layers")
        if any(w < 1 for w in self.layer_widths):
            raise ConfigurationError("all layer widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.slope_scale < 1:
            raise ConfigurationError("slope_scale must be a positive integer")

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1


@dataclass
class ParamVector:
    """All trainable scalars in one flat float64 vector.

    Layout is [W0, b0, W1, b1, ..., extras], with W_l stored row-major in
    shape (out, in). ``extra_names`` appends named scalars at the end (the
    adaptive slope "a", the trainable viscosity "nu"). Weight/bias accessors
    return reshaped views of the same storage.
    """

    flat: np.ndarray
    widths: tuple[int, ...]
    extra_names: tuple[str, ...] = ()
    _offsets: list = field(init=False, repr=False)

    def __post_init__(self):
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        self.widths = tuple(int(w) for w in self.widths)
        self.extra_names = tuple(self.extra_names)
        offsets = []
        pos = 0
        for i in range(len(self.widths) - 1):
            rows, cols = self.widths[i + 1], self.widths[i]
            offsets.append((pos, rows, cols))
            pos += rows * cols + rows
        self._offsets = offsets
        expected = pos + len(self.extra_names)
        if self.flat.size != expected:
            raise ConfigurationError(
                f"flat vector has {self.flat.size} entries, layout needs {expected}")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def weight(self, i: int) -> np.ndarray:
        pos, rows, cols = self._offsets[i]
        return self.flat[pos:pos + rows * cols].reshape(rows, cols)

    def bias(self, i: int) -> np.ndarray:
        pos, rows, cols = self._offsets[i]
        start = pos + rows * cols
        return self.flat[start:start + rows]

    def _extra_index(self, name: str) -> int:
        try:
            k = self.extra_names.index(name)
        except ValueError:
            raise ConfigurationError(f"no extra slot named {name!r}") from None
        return self.flat.size - len(self.extra_names) + k

    def extra(self, name: str) -> float:
        return float(self.flat[self._extra_index(name)])

    def extra_view(self, name: str) -> np.ndarray:
        i = self._extra_index(name)
        return self.flat[i:i + 1].reshape(())

    def copy(self) -> "ParamVector":
        return ParamVector(self.flat.copy(), self.widths, self.extra_names)

    def with_flat(self, flat: np.ndarray) -> "ParamVector":
        return ParamVector(flat, self.widths, self.extra_names)

    def with_extra_slots(self, slots: dict[str, float]) -> "ParamVector":
        """Append any missing named scalars, keeping existing values."""
        missing = [(n, v) for n, v in slots.items() if n not in self.extra_names]
        if not missing:
            return self.copy()
        flat = np.concatenate([self.flat, np.array([v for _, v in missing])])
        return ParamVector(flat, self.widths, self.extra_names + tuple(n for n, _ in missing))


def flatten(params: ParamVector) -> np.ndarray:
    return params.flat.copy()


def unflatten(flat: np.ndarray, widths, extra_names=()) -> ParamVector:
    return ParamVector(np.asarray(flat, dtype=np.float64).copy(), tuple(widths),
                       tuple(extra_names))


@dataclass(frozen=True)
class InitScheme:
    """How to fill a fresh parameter vector.

    kinds: xavier | uniform(low, high) | normal(0, sigma) | random |
    nrpinn_checkpoint(path).
    """

    kind: str
    low: float = 0.0
    high: float = 0.0
    sigma: float = 0.0
    path: str = ""

    def __post_init__(self):
        if self.kind not in ("xavier", "uniform", "normal", "random", "nrpinn_checkpoint"):
            raise ConfigurationError(f"unknown init scheme {self.kind!r}")
        if self.kind == "uniform" and not self.low < self.high:
            raise ConfigurationError("uniform bounds need low < high")
        if self.kind == "normal" and not self.sigma > 0:
            raise ConfigurationError("normal scheme needs sigma > 0")
        if self.kind == "nrpinn_checkpoint" and not self.path:
            raise ConfigurationError("checkpoint scheme needs a path")


def parse_scheme(text: str) -> InitScheme:
    """Parse tokens like ``xavier``, ``uniform(-0.01,0.01)``, ``normal(0,0.1)``,
    ``random``, ``nrpinn_checkpoint(runs/meta/checkpoint.npk)``."""
    text = text.strip()
    if "(" not in text:
        return InitScheme(kind=text)
    head, _, rest = text.partition("(")
    args = rest.rstrip(")").strip()
    head = head.strip()
    if head == "uniform":
        lo, hi = (float(a) for a in args.split(","))
        return InitScheme(kind="uniform", low=lo, high=hi)
    if head == "normal":
        mu, sigma = (float(a) for a in args.split(","))
        if mu != 0.0:
            raise ConfigurationError("normal initialization is zero-mean")
        return InitScheme(kind="normal", sigma=sigma)
    if head in ("nrpinn_checkpoint", "checkpoint"):
        return InitScheme(kind="nrpinn_checkpoint", path=args)
    raise ConfigurationError(f"cannot parse init scheme {text!r}")


def scheme_token(scheme: InitScheme) -> str:
    if scheme.kind == "uniform":
        return f"uniform({scheme.low:g},{scheme.high:g})"
    if scheme.kind == "normal":
        return f"normal(0,{scheme.sigma:g})"
    if scheme.kind == "nrpinn_checkpoint":
        return f"nrpinn_checkpoint({scheme.path})"
    return scheme.kind


def init(spec: MlpSpec, scheme: InitScheme, seed: int,
         extra_slots: dict[str, float] | None = None) -> ParamVector:
    """Draw a parameter vector; deterministic for a fixed (spec, scheme, seed).

    Xavier draws each weight from U(+-sqrt(6/(fan_in+fan_out))) with zero
    biases. "random" uses the per-layer fan-in bound U(+-1/sqrt(fan_in)) on
    weights and biases. The adaptive slope slot starts at 1; extra slots are
    appended with the caller's values (a checkpoint keeps slots it already has).
    """
    extra_slots = dict(extra_slots or {})
    if scheme.kind == "nrpinn_checkpoint":
        loaded_spec, params = load_checkpoint(scheme.path)
        if tuple(loaded_spec.layer_widths) != tuple(spec.layer_widths):
            raise ConfigurationError(
                f"checkpoint widths {loaded_spec.layer_widths} do not match "
                f"requested {spec.layer_widths}")
        if loaded_spec.activation != spec.activation:
            raise ConfigurationError("checkpoint was trained with a different activation")
        if spec.adaptive_slope:
            extra_slots = {"a": 1.0, **extra_slots}
        return params.with_extra_slots(extra_slots)

    rng = np.random.default_rng(seed)
    parts = []
    widths = spec.layer_widths
    for i in range(spec.n_layers):
        fan_in, fan_out = widths[i], widths[i + 1]
        shape_w, shape_b = (fan_out, fan_in), (fan_out,)
        if scheme.kind == "xavier":
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-bound, bound, shape_w)
            b = np.zeros(shape_b)
        elif scheme.kind == "uniform":
            w = rng.uniform(scheme.low, scheme.high, shape_w)
            b = rng.uniform(scheme.low, scheme.high, shape_b)
        elif scheme.kind == "normal":
            w = rng.normal(0.0, scheme.sigma, shape_w)
            b = rng.normal(0.0, scheme.sigma, shape_b)
        else:  # random
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, shape_w)
            b = rng.uniform(-bound, bound, shape_b)
        parts.append(w.ravel())
        parts.append(b)

    names = []
    values = []
    if spec.adaptive_slope:
        names.append("a")
        values.append(extra_slots.pop("a", 1.0))
    for name, value in extra_slots.items():
        names.append(name)
        values.append(value)
    if values:
        parts.append(np.asarray(values, dtype=np.float64))
    return ParamVector(np.concatenate(parts), widths, tuple(names))


def forward(spec: MlpSpec, params: ParamVector, x) -> np.ndarray:
    """Plain evaluation, shape (n, out_width). Accepts (n, d) or (d,) input."""
    if tuple(params.widths) != tuple(spec.layer_widths):
        raise ConfigurationError(
            f"parameter layout {params.widths} does not match network widths "
            f"{spec.layer_widths}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != spec.layer_widths[0]:
        raise ConfigurationError(
            f"input has width {x.shape[1]}, expected {spec.layer_widths[0]}")
    act = np.tanh if spec.activation == "tanh" else np.sin
    scale = 1.0
    if spec.adaptive_slope:
        scale = spec.slope_scale * params.extra("a")
    h = x
    for i in range(spec.n_layers):
        h = h @ params.weight(i).T + params.bias(i)
        if i < spec.n_layers - 1:
            h = act(scale * h)
    return h


def save_checkpoint(path, spec: MlpSpec, params: ParamVector) -> None:
    """Write the documented binary layout: magic, JSON header, float64 payload."""
    header = json.dumps({
        "widths": list(spec.layer_widths),
        "activation": spec.activation,
        "adaptive_slope": spec.adaptive_slope,
        "slope_scale": spec.slope_scale,
        "extra_names": list(params.extra_names),
        "count": int(params.flat.size),
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(params.flat.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[MlpSpec, ParamVector]:
    try:
        with open(path, "rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise IOError(f"{path}: not a parameter checkpoint")
            (header_len,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(header_len).decode("utf-8"))
            payload = fh.read(8 * header["count"])
    except (struct.error, json.JSONDecodeError, KeyError) as exc:
        raise IOError(f"{path}: corrupt checkpoint ({exc})") from exc
    flat = np.frombuffer(payload, dtype="<f8")
    if flat.size != header["count"]:
        raise IOError(f"{path}: truncated checkpoint payload")
    spec = MlpSpec(tuple(header["widths"]), header["activation"],
                   header["adaptive_slope"], header["slope_scale"])
    params = ParamVector(flat.copy(), tuple(header["widths"]),
                         tuple(header["extra_names"]))
    return spec, params
