"""Asymmetric loss on probabilities, with its analytic gradient.

Per element, for a positive label::

    L = (1 - p) ** gamma_pos * -log(max(p, clip_eps))

and for a negative label, with the shifted probability ``pm = max(p - margin, 0)``::

    L = pm ** gamma_neg * -log(max(1 - pm, clip_eps))

The loss is the (optionally class-weighted) mean over elements. At the kinks
introduced by ``max`` the gradient is the left limit, i.e. the clamped
branch is used when ``p == clip_eps`` or ``p == margin``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch


@dataclass(frozen=True)
class AslParams:
    gamma_pos: float = 0.0
    gamma_neg: float = 4.0
    margin: float = 0.05
    clip_eps: float = 1e-8

    def __post_init__(self):
        if not (self.gamma_pos >= 0 and self.gamma_neg >= 0):
            raise ValueError("focusing exponents must be non-negative")
        if not 0 <= self.margin < 1:
            raise ValueError(f"margin must lie in [0, 1), got {self.margin}")
        if not 0 < self.clip_eps <= 1e-2:
            raise ValueError(f"clip_eps must lie in (0, 1e-2], got {self.clip_eps}")


def _inputs(p, y, class_weights):
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.size} probabilities but {y.size} labels")
    if class_weights is None:
        w = np.ones_like(p)
    else:
        w = np.broadcast_to(np.asarray(class_weights, dtype=np.float64), p.shape)
    return p, y.astype(bool), w


def _pow_deriv(x, gamma):
    """d/dx x**gamma, taken as 0 when gamma == 0 and guarded at x == 0."""
    if gamma == 0:
        return np.zeros_like(x)
    d = gamma * np.power(x, gamma - 1.0)
    return np.where(x > 0, d, 0.0 if gamma > 1 else (1.0 if gamma == 1 else np.inf))


def elementwise_loss(p, y, params: AslParams = AslParams()) -> np.ndarray:
    p, y, _ = _inputs(p, y, None)
    eps = params.clip_eps
    pos_loss = np.power(1.0 - p, params.gamma_pos) * -np.log(np.maximum(p, eps))
    pm = np.maximum(p - params.margin, 0.0)
    neg_loss = np.power(pm, params.gamma_neg) * -np.log(np.maximum(1.0 - pm, eps))
    return np.where(y, pos_loss, neg_loss)


def asl_forward(p, y, params: AslParams = AslParams(), class_weights=None) -> float:
    """Mean asymmetric loss in nats.

    ``class_weights`` (broadcast against ``p``) scales each element's loss
    before averaging; rare classes can be up-weighted this way.
    """
    p, y, w = _inputs(p, y, class_weights)
    if p.size == 0:
        return 0.0
    return float(np.mean(w * elementwise_loss(p, y, params)))


def asl_gradient(p, y, params: AslParams = AslParams(), class_weights=None) -> np.ndarray:
    """Gradient of :func:`asl_forward` with respect to ``p``."""
    p, y, w = _inputs(p, y, class_weights)
    if p.size == 0:
        return np.zeros_like(p)
    with np.errstate(invalid="ignore", divide="ignore"):
        grad = _gradient(p, y, params)
    return w * grad / p.size


def _gradient(p, y, params):
    eps = params.clip_eps

    # positives: d/dp [(1-p)^g * -log(max(p, eps))]
    q = 1.0 - p
    log_term = -np.log(np.maximum(p, eps))
    dlog = np.where(p > eps, -1.0 / np.where(p > eps, p, 1.0), 0.0)
    g_pos = -_pow_deriv(q, params.gamma_pos) * log_term + np.power(q, params.gamma_pos) * dlog

    # negatives: pm = max(p - m, 0); d/dp [pm^g * -log(max(1 - pm, eps))]
    pm = np.maximum(p - params.margin, 0.0)
    r = 1.0 - pm
    log_neg = -np.log(np.maximum(r, eps))
    dlog_neg = np.where(r > eps, 1.0 / np.where(r > eps, r, 1.0), 0.0)
    inner = _pow_deriv(pm, params.gamma_neg) * log_neg + np.power(pm, params.gamma_neg) * dlog_neg
    g_neg = np.where(p - params.margin > 0, inner, 0.0)

    return np.where(y, g_pos, g_neg)


def binary_cross_entropy(p, y) -> float:
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    return float(np.mean(np.where(y, -np.log(p), -np.log1p(-p))))


@dataclass(frozen=True)
class GradientCheck:
    n: int
    max_rel_error: float
    forward_mean: float
    bce_mean: float


def central_difference(f, p, h=1e-6) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    grad = np.empty_like(p)
    for j in range(p.size):
        up = p.copy()
        dn = p.copy()
        up.flat[j] += h
        dn.flat[j] -= h
        grad.flat[j] = (f(up) - f(dn)) / (up.flat[j] - dn.flat[j])
    return grad


def relative_error(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.abs(a), np.abs(b))
    diff = np.abs(a - b)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, diff / scale, 0.0)


def draw_point(rng: np.random.Generator, params: AslParams, lo=0.05, hi=0.95, gap=0.01):
    """One random (p, y) with p kept ``gap`` away from the margin kink."""
    y = int(rng.integers(0, 2))
    while True:
        p = float(rng.uniform(lo, hi))
        if y == 1 or abs(p - params.margin) >= gap:
            return p, y


def draw_params(rng: np.random.Generator) -> AslParams:
    return AslParams(
        gamma_pos=float(rng.uniform(0.0, 4.0)),
        gamma_neg=float(rng.uniform(0.0, 6.0)),
        margin=float(rng.uniform(0.0, 0.2)),
    )


def gradient_check(n: int = 1000, seed: int = 0, params: AslParams | None = None, h: float = 1e-6) -> GradientCheck:
    """Compare the analytic gradient with central differences on random points.

    Each draw is a single (p, y) pair; when ``params`` is None the loss
    parameters are drawn at random too. Points are kept inside (0.05, 0.95)
    and away from the margin kink, where the loss is smooth.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    ps = np.empty(n)
    ys = np.empty(n, dtype=np.int64)
    losses = np.empty(n)
    for i in range(n):
        prm = params if params is not None else draw_params(rng)
        p, y = draw_point(rng, prm)
        ps[i], ys[i] = p, y
        yv = np.array([y])
        analytic = asl_gradient(np.array([p]), yv, prm)
        numeric = central_difference(lambda v: asl_forward(v, yv, prm), np.array([p]), h)
        worst = max(worst, float(relative_error(analytic, numeric).max()))
        losses[i] = asl_forward(np.array([p]), yv, prm)
    return GradientCheck(n, worst, float(losses.mean()), binary_cross_entropy(ps, ys))
