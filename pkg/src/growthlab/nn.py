"""Feedforward networks with hand-written backpropagation.

Row-vector convention: a layer maps ``h -> act(h @ W + b)`` with ``W`` of
shape ``(n_in, n_out)``. Inputs are 2-D ``(batch, n_in)``; 1-D inputs are
treated as a batch of one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HIDDEN_ACTIVATIONS = ("tanh", "relu", "identity")
OUTPUT_ACTIVATIONS = ("identity", "tanh", "squash")


def logistic(u):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(u, dtype=float)))


def actor_squash(u, a_lo: float = 0.001, a_hi: float = 0.999):
    """Map a raw output onto ``[a_lo, a_hi]`` through a logistic curve."""
    return a_lo + (a_hi - a_lo) * logistic(u)


def squash_inverse(a: float, a_lo: float = 0.001, a_hi: float = 0.999) -> float:
    p = (a - a_lo) / (a_hi - a_lo)
    return float(np.log(p) - np.log1p(-p))


def _activate(name: str, h: np.ndarray, bounds) -> np.ndarray:
    if name == "tanh":
        return np.tanh(h)
    if name == "relu":
        return np.maximum(h, 0.0)
    if name == "identity":
        return h
    if name == "squash":
        return actor_squash(h, *bounds)
    raise ValueError(f"unknown activation {name!r}")


def _activation_grad(name: str, h: np.ndarray, out: np.ndarray, bounds) -> np.ndarray:
    """Derivative of the activation at pre-activation ``h`` (given its output)."""
    if name == "tanh":
        return 1.0 - out * out
    if name == "relu":
        return (h > 0.0).astype(float)
    if name == "identity":
        return np.ones_like(h)
    if name == "squash":
        lo, hi = bounds
        p = logistic(h)
        return (hi - lo) * p * (1.0 - p)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class MlpParams:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    squash_bounds: tuple[float, float] = (0.001, 0.999)

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and bias vector per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ValueError(f"layer {i}: got W{w.shape}, b{b.shape}, expected W{expected}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        self.squash_bounds = (float(self.squash_bounds[0]), float(self.squash_bounds[1]))

    @property
    def arrays(self) -> list[np.ndarray]:
        """Parameters in checkpoint order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
            self.squash_bounds,
        )

    def with_arrays(self, arrays: list[np.ndarray]) -> "MlpParams":
        return MlpParams(
            self.layer_sizes,
            list(arrays[0::2]),
            list(arrays[1::2]),
            self.hidden_activation,
            self.output_activation,
            self.squash_bounds,
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays)))

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            [g * factor for g in self.weights],
            [g * factor for g in self.biases],
            self.inputs,
        )


def init(
    layer_sizes,
    rng: np.random.Generator,
    hidden_activation: str = "tanh",
    output_activation: str = "identity",
    squash_bounds: tuple[float, float] = (0.001, 0.999),
) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("a network needs at least two layers")
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return MlpParams(sizes, weights, biases, hidden_activation, output_activation, squash_bounds)


def _as_batch(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"input shape {x.shape} incompatible with input width {params.layer_sizes[0]}")
    return x


def _forward_cache(params: MlpParams, x: np.ndarray):
    pre, post = [], [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        act = params.output_activation if i == last else params.hidden_activation
        h = _activate(act, z, params.squash_bounds)
        pre.append(z)
        post.append(h)
    return pre, post


def forward(params: MlpParams, x) -> np.ndarray:
    """Output activations, shape ``(batch, n_out)``."""
    h = _as_batch(params, x)
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        act = params.output_activation if i == last else params.hidden_activation
        h = _activate(act, h @ w + b, params.squash_bounds)
    return h


def backward(params: MlpParams, x, upstream) -> Gradients:
    """Reverse-mode gradients of ``sum(upstream * forward(params, x))``.

    Parameter gradients are summed over the batch; ``inputs`` holds the
    per-sample gradient with respect to ``x``.
    """
    x = _as_batch(params, x)
    pre, post = _forward_cache(params, x)
    delta = np.asarray(upstream, dtype=float).reshape(post[-1].shape)
    n = len(params.weights)
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in range(n - 1, -1, -1):
        act = params.output_activation if i == n - 1 else params.hidden_activation
        delta = delta * _activation_grad(act, pre[i], post[i + 1], params.squash_bounds)
        gw[i] = post[i].T @ delta
        gb[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i].T
    return Gradients(gw, gb, delta)


def sgd_update(params: MlpParams, grads: Gradients, eta: float) -> MlpParams:
    """Plain gradient descent: every parameter ``p`` becomes ``p - eta * g``."""
    _check_congruent(params, grads)
    return params.with_arrays([p - eta * g for p, g in zip(params.arrays, grads.arrays)])


def clip_by_global_norm(grads: Gradients, max_norm: float | None) -> Gradients:
    if max_norm is None or max_norm <= 0.0:
        return grads
    norm = grads.global_norm()
    if norm > max_norm:
        return grads.scaled(max_norm / norm)
    return grads


def _check_congruent(params: MlpParams, grads: Gradients) -> None:
    for p, g in zip(params.arrays, grads.arrays):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")


class Adam:
    """Adaptive-moment variant of the update; state lives on the instance."""

    def __init__(self, eta: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.eta = eta
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def update(self, params: MlpParams, grads: Gradients) -> MlpParams:
        _check_congruent(params, grads)
        g = grads.arrays
        if self.m is None:
            self.m = [np.zeros_like(a) for a in g]
            self.v = [np.zeros_like(a) for a in g]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        new = []
        for i, (p, gi) in enumerate(zip(params.arrays, g)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * gi
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * gi * gi
            step = self.eta * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
            new.append(p - step)
        return params.with_arrays(new)


class Sgd:
    def __init__(self, eta: float):
        self.eta = eta

    def update(self, params: MlpParams, grads: Gradients) -> MlpParams:
        return sgd_update(params, grads, self.eta)


def make_optimizer(name: str, eta: float):
    if name == "sgd":
        return Sgd(eta)
    if name == "adam":
        return Adam(eta)
    raise ValueError(f"unknown optimizer {name!r}")


# Checkpoint layout: magic line, one JSON header line, then float64 little-endian
# parameters in W0, b0, W1, b1, ... order (row-major).
_MAGIC = b"GROWTHLAB-MLP 1\n"


def save_checkpoint(path, params: MlpParams, s_ref: float) -> None:
    header = {
        "layer_sizes": list(params.layer_sizes),
        "hidden_activation": params.hidden_activation,
        "output_activation": params.output_activation,
        "squash_bounds": list(params.squash_bounds),
        "s_ref": s_ref,
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for a in params.arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[MlpParams, float]:
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise ValueError(f"{path}: not a network checkpoint")
    rest = raw[len(_MAGIC):]
    nl = rest.index(b"\n")
    header = json.loads(rest[:nl])
    payload = rest[nl + 1:]
    sizes = header["layer_sizes"]
    arrays, offset = [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        for shape in ((n_in, n_out), (n_out,)):
            count = int(np.prod(shape))
            nbytes = 8 * count
            if offset + nbytes > len(payload):
                raise ValueError(f"{path}: truncated checkpoint")
            arrays.append(np.frombuffer(payload, dtype="<f8", count=count, offset=offset).astype(float).reshape(shape))
            offset += nbytes
    if offset != len(payload):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    params = MlpParams(
        tuple(sizes),
        arrays[0::2],
        arrays[1::2],
        header["hidden_activation"],
        header["output_activation"],
        tuple(header["squash_bounds"]),
    )
    return params, float(header["s_ref"])
