"""
Dense float64 building blocks for the two-layer fully-connected networks.

Everything here works on plain ``numpy`` arrays of dtype float64. A network
is ``input @ w1 + b1 -> leaky ReLU -> @ w2 + b2``; output heads (sigmoid,
softmax) live with the caller so the same kernel serves both the generator
and the discriminator.

The leaky ReLU derivative at exactly zero is taken from the positive branch
(derivative 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import NumericError, ShapeError

PARAM_NAMES = ("w1", "b1", "w2", "b2")
BCE_EPS = 1e-12


def _as_matrix(x, name="input"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {x.shape}")
    return x


@dataclass
class MlpParams:
    """Weights of a ``in_dim -> hidden_dim -> out_dim`` network."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    negative_slope: float

    def __post_init__(self):
        self.w1 = _as_matrix(self.w1, "w1")
        self.w2 = _as_matrix(self.w2, "w2")
        self.b1 = np.asarray(self.b1, dtype=np.float64).reshape(-1)
        self.b2 = np.asarray(self.b2, dtype=np.float64).reshape(-1)
        if not 0.0 < self.negative_slope <= 1.0:
            raise ValueError(f"negative_slope must be in (0, 1], got {self.negative_slope}")
        in_dim, hidden = self.w1.shape
        if self.b1.shape[0] != hidden:
            raise ShapeError(f"b1 has {self.b1.shape[0]} entries, w1 has {hidden} columns")
        if self.w2.shape[0] != hidden:
            raise ShapeError(f"w2 has {self.w2.shape[0]} rows, hidden width is {hidden}")
        if self.b2.shape[0] != self.w2.shape[1]:
            raise ShapeError(f"b2 has {self.b2.shape[0]} entries, w2 has {self.w2.shape[1]} columns")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(), self.negative_slope
        )

    def with_tensors(self, tensors: dict[str, np.ndarray]) -> "MlpParams":
        return MlpParams(negative_slope=self.negative_slope, **tensors)


class Gradients(NamedTuple):
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    input: np.ndarray

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}


class ForwardCache(NamedTuple):
    input: np.ndarray
    hidden_pre: np.ndarray
    hidden_post: np.ndarray
    output_pre: np.ndarray


@dataclass
class AdamState:
    """First/second moment estimates for one :class:`MlpParams`."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams, lr=1e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        m = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        v = {k: np.zeros_like(x) for k, x in params.tensors().items()}
        return cls(m=m, v=v, t=0, lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)


def leaky_relu(x, negative_slope):
    """Elementwise ``x if x >= 0 else negative_slope * x``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0, x, negative_slope * x)
    return out if out.ndim else float(out)


def leaky_relu_grad(x, negative_slope):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 1.0, negative_slope)


def sigmoid(x):
    """Logistic function, evaluated without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=np.float64)
    # exp of a non-positive number never overflows
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return out if out.ndim else float(out)


def softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def forward_mlp(params: MlpParams, x) -> ForwardCache:
    """Run the network and keep every intermediate needed for backprop."""
    x = _as_matrix(x)
    if x.shape[1] != params.in_dim:
        raise ShapeError(
            f"input has {x.shape[1]} columns but the network expects in_dim={params.in_dim}"
        )
    hidden_pre = x @ params.w1 + params.b1
    hidden_post = np.where(hidden_pre >= 0, hidden_pre, params.negative_slope * hidden_pre)
    output_pre = hidden_post @ params.w2 + params.b2
    return ForwardCache(x, hidden_pre, hidden_post, output_pre)


def backward_mlp(params: MlpParams, cache: ForwardCache, output_grad) -> Gradients:
    """Gradients of a scalar loss w.r.t. every parameter and the input.

    ``output_grad`` is ``dLoss/d output_pre`` with the same shape as
    ``cache.output_pre``.
    """
    output_grad = _as_matrix(output_grad, "output_grad")
    if output_grad.shape != cache.output_pre.shape:
        raise ShapeError(
            f"output_grad shape {output_grad.shape} does not match output shape "
            f"{cache.output_pre.shape}"
        )
    d_w2 = cache.hidden_post.T @ output_grad
    d_b2 = output_grad.sum(axis=0)
    d_hidden_post = output_grad @ params.w2.T
    d_hidden_pre = d_hidden_post * leaky_relu_grad(cache.hidden_pre, params.negative_slope)
    d_w1 = cache.input.T @ d_hidden_pre
    d_b1 = d_hidden_pre.sum(axis=0)
    d_input = d_hidden_pre @ params.w1.T
    return Gradients(d_w1, d_b1, d_w2, d_b2, d_input)


def bce_loss(predictions, targets) -> float:
    """Mean binary cross-entropy; probabilities are clamped to ``[1e-12, 1-1e-12]``."""
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.size == 0 or y.size == 0:
        raise ValueError("bce_loss needs at least one prediction")
    if p.shape != y.shape:
        raise ShapeError(f"{p.size} predictions vs {y.size} targets")
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bce_logit_grad(logits, targets) -> np.ndarray:
    """``d mean_bce(sigmoid(logits)) / d logits``, same shape as ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(logits.shape)
    return (sigmoid(logits) - y) / logits.size


def adam_step(params: MlpParams, grads, state: AdamState) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update. Returns new params and state; inputs are untouched."""
    g = grads.tensors() if hasattr(grads, "tensors") else dict(grads)
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = {}, {}, {}
    for name, theta in params.tensors().items():
        grad = np.asarray(g[name], dtype=np.float64)
        if grad.shape != theta.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, parameter {theta.shape}")
        m = b1 * state.m[name] + (1.0 - b1) * grad
        v = b2 * state.v[name] + (1.0 - b2) * grad * grad
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_p[name] = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        new_m[name], new_v[name] = m, v
    new_state = AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.epsilon)
    return params.with_tensors(new_p), new_state


@dataclass
class GradCheckResult:
    passed: bool
    worst_relative_error: float
    worst_location: tuple = field(default=())


def relative_error(a, n):
    return np.abs(a - n) / np.maximum(1e-12, np.abs(a) + np.abs(n))


def gradient_check(
    params: MlpParams,
    loss_fn: Callable[[MlpParams], float],
    analytic: dict[str, np.ndarray] | Gradients,
    tolerance: float = 1e-5,
    h: float = 1e-5,
) -> GradCheckResult:
    """Compare ``analytic`` gradients of ``loss_fn`` against central differences.

    Every entry of every parameter tensor is perturbed by ``±h``.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    analytic = analytic.tensors() if hasattr(analytic, "tensors") else analytic
    worst, where = 0.0, ()
    for name, theta in params.tensors().items():
        for idx in np.ndindex(theta.shape):
            tensors = {k: v.copy() for k, v in params.tensors().items()}
            tensors[name][idx] = theta[idx] + h
            up = loss_fn(params.with_tensors(tensors))
            tensors[name][idx] = theta[idx] - h
            down = loss_fn(params.with_tensors(tensors))
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NumericError(f"non-finite loss while perturbing {name}{list(idx)}")
            numeric = (up - down) / (2.0 * h)
            err = float(relative_error(float(analytic[name][idx]), numeric))
            if err > worst:
                worst, where = err, (name, idx)
    return GradCheckResult(worst <= tolerance, worst, where)
