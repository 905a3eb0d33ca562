"""Softmax classifiers over a single flat parameter vector.

Two architectures: a linear map and a small fully-connected net (ReLU or
tanh).  All parameters live in one flat float64 vector with a fixed,
documented layout, so optimizers and finite-difference checks treat
every architecture identically and checkpoints stay portable.

Layout: layers in order from input to output; within a layer, the weight
matrix (row-major, shape ``out x in``) followed by the bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidArchitecture, NonFiniteInput
from .seeding import substream
from .transition import SimplexVector

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class Architecture:
    """Descriptor of the map from features to logits."""

    kind: str  # "linear" | "mlp"
    hidden: tuple[int, ...] = ()
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.kind == "linear":
            if self.hidden:
                raise InvalidArchitecture("linear architecture takes no hidden sizes")
        elif self.kind == "mlp":
            if not self.hidden:
                raise InvalidArchitecture("mlp needs at least one hidden size; use linear")
            if any(h < 1 for h in self.hidden):
                raise InvalidArchitecture(f"hidden sizes must be >= 1, got {self.hidden}")
        else:
            raise InvalidArchitecture(f"unknown architecture kind {self.kind!r}")
        if self.activation not in _ACTIVATIONS:
            raise InvalidArchitecture(
                f"activation must be one of {_ACTIVATIONS}, got {self.activation!r}"
            )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hidden": list(self.hidden), "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(
            kind=d["kind"],
            hidden=tuple(d.get("hidden", ())),
            activation=d.get("activation", "relu"),
        )


def layer_dims(arch: Architecture, input_dim: int, n_classes: int) -> list[tuple[int, int]]:
    """(fan_in, fan_out) for each layer, input to output."""
    sizes = [input_dim, *arch.hidden, n_classes]
    return [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]


def layout(arch: Architecture, input_dim: int, n_classes: int) -> list[tuple[str, tuple[int, ...], slice]]:
    """Deterministic map from named parameter blocks to flat slices.

    The layout is a pure function of the architecture descriptor, which
    keeps serialized checkpoints portable.
    """
    slots: list[tuple[str, tuple[int, ...], slice]] = []
    pos = 0
    for li, (fan_in, fan_out) in enumerate(layer_dims(arch, input_dim, n_classes)):
        slots.append((f"w{li}", (fan_out, fan_in), slice(pos, pos + fan_out * fan_in)))
        pos += fan_out * fan_in
        slots.append((f"b{li}", (fan_out,), slice(pos, pos + fan_out)))
        pos += fan_out
    return slots


def param_count(arch: Architecture, input_dim: int, n_classes: int) -> int:
    return sum(fo * (fi + 1) for fi, fo in layer_dims(arch, input_dim, n_classes))


class ClassifierParams:
    """Immutable parameter bundle: architecture plus the flat vector."""

    __slots__ = ("arch", "input_dim", "n_classes", "flat")

    def __init__(self, arch: Architecture, input_dim: int, n_classes: int, flat):
        vec = np.array(flat, dtype=float)
        expected = param_count(arch, input_dim, n_classes)
        if vec.ndim != 1 or vec.size != expected:
            raise DimensionMismatch(
                f"flat vector has {vec.size} entries, architecture needs {expected}"
            )
        vec.setflags(write=False)
        object.__setattr__(self, "arch", arch)
        object.__setattr__(self, "input_dim", int(input_dim))
        object.__setattr__(self, "n_classes", int(n_classes))
        object.__setattr__(self, "flat", vec)

    def __setattr__(self, name, value):
        raise AttributeError("ClassifierParams is immutable; use with_flat")

    def view(self, name: str) -> np.ndarray:
        """Read-only reshaped view of one named block (e.g. "w0", "b1")."""
        for slot_name, shape, sl in layout(self.arch, self.input_dim, self.n_classes):
            if slot_name == name:
                return self.flat[sl].reshape(shape)
        raise KeyError(name)

    def with_flat(self, flat) -> "ClassifierParams":
        return ClassifierParams(self.arch, self.input_dim, self.n_classes, flat)

    @property
    def n_params(self) -> int:
        return self.flat.size

    def to_dict(self) -> dict:
        return {
            "architecture": self.arch.to_dict(),
            "input_dim": self.input_dim,
            "n_classes": self.n_classes,
            "flat": [float(v) for v in self.flat],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierParams":
        return cls(
            Architecture.from_dict(d["architecture"]),
            int(d["input_dim"]),
            int(d["n_classes"]),
            d["flat"],
        )


def init(arch: Architecture, input_dim: int, n_classes: int, seed: int) -> ClassifierParams:
    """Fresh parameters: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights,
    zero biases.  Deterministic given the seed."""
    if input_dim < 1:
        raise InvalidArchitecture(f"input_dim must be >= 1, got {input_dim}")
    if n_classes < 2:
        raise InvalidArchitecture(f"n_classes must be >= 2, got {n_classes}")
    rng = substream(seed, "model-init")
    flat = np.zeros(param_count(arch, input_dim, n_classes))
    for name, shape, sl in layout(arch, input_dim, n_classes):
        if name.startswith("w"):
            bound = 1.0 / np.sqrt(shape[1])
            flat[sl] = rng.uniform(-bound, bound, size=shape).ravel()
    return ClassifierParams(arch, input_dim, n_classes, flat)


def _activate(pre: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(pre, 0.0)
    return np.tanh(pre)


def _activate_grad(pre: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        # Subgradient at exactly 0 fixed to 0 for determinism.
        return (pre > 0.0).astype(float)
    t = np.tanh(pre)
    return 1.0 - t * t


def _forward_batch(params: ClassifierParams, x: np.ndarray):
    """Batched logits plus the cache needed for the backward pass."""
    weights = []
    biases = []
    n_layers = len(layer_dims(params.arch, params.input_dim, params.n_classes))
    for li in range(n_layers):
        weights.append(params.view(f"w{li}"))
        biases.append(params.view(f"b{li}"))
    inputs = [x]
    preacts = []
    h = x
    for li in range(n_layers):
        pre = h @ weights[li].T + biases[li]
        if li < n_layers - 1:
            preacts.append(pre)
            h = _activate(pre, params.arch.activation)
            inputs.append(h)
    logits = pre
    cache = {"inputs": inputs, "preacts": preacts, "weights": weights}
    return logits, cache


def _backward_batch(params: ClassifierParams, cache: dict, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``sum_n upstream[n] . logits[n]`` w.r.t. the flat vector."""
    weights = cache["weights"]
    inputs = cache["inputs"]
    preacts = cache["preacts"]
    n_layers = len(weights)
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    g = upstream
    for li in range(n_layers - 1, -1, -1):
        grads_w[li] = g.T @ inputs[li]
        grads_b[li] = g.sum(axis=0)
        if li > 0:
            g = (g @ weights[li]) * _activate_grad(
                preacts[li - 1], params.arch.activation
            )
    flat = np.zeros(params.n_params)
    for name, shape, sl in layout(params.arch, params.input_dim, params.n_classes):
        li = int(name[1:])
        flat[sl] = (grads_w[li] if name.startswith("w") else grads_b[li]).ravel()
    return flat


def _check_features(params: ClassifierParams, x: np.ndarray) -> None:
    if x.shape[-1] != params.input_dim:
        raise DimensionMismatch(
            f"feature dimension {x.shape[-1]} != model input_dim {params.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("features contain NaN or infinity")


def forward_logits_batch(params: ClassifierParams, x) -> np.ndarray:
    """Logits for a batch of feature rows, shape (n, n_classes)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected 2-D feature matrix, got shape {x.shape}")
    _check_features(params, x)
    logits, _ = _forward_batch(params, x)
    return logits


def forward_logits(params: ClassifierParams, x) -> np.ndarray:
    """Logits for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected 1-D feature vector, got shape {x.shape}")
    _check_features(params, x)
    logits, _ = _forward_batch(params, x[None, :])
    return logits[0]


def softmax(logits: np.ndarray) -> np.ndarray:
    """Rows normalized to probabilities via max subtraction; safe for
    logits of magnitude well past 1e4."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def predict_proba(params: ClassifierParams, x) -> SimplexVector:
    """Class probabilities for a single feature vector."""
    return SimplexVector(softmax(forward_logits(params, x)))


def predict_proba_batch(params: ClassifierParams, x) -> np.ndarray:
    return softmax(forward_logits_batch(params, x))


def backward(params: ClassifierParams, x, upstream_grad_wrt_logits) -> np.ndarray:
    """Gradient of ``upstream . logits(x)`` w.r.t. the flat parameters."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected 1-D feature vector, got shape {x.shape}")
    _check_features(params, x)
    up = np.asarray(upstream_grad_wrt_logits, dtype=float)
    if up.shape != (params.n_classes,):
        raise DimensionMismatch(
            f"upstream gradient has shape {up.shape}, expected ({params.n_classes},)"
        )
    _, cache = _forward_batch(params, x[None, :])
    return _backward_batch(params, cache, up[None, :])
