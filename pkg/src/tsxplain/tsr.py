"""Temporal saliency rescaling.

A base saliency map is computed for the query. Each timestep is then masked
across all channels and the L1 change of the base map gives the timestep's
relevance. For timesteps passing the ``alpha`` gate, each single cell is
masked in turn to get per-channel relevance. The product of both, divided by
its global maximum, is the attribution in ``[0, 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import FeatureAttribution
from .core import Attribution, BadParams, ShapeMismatch, validate_series
from .models import GradientUnavailable

BASE_METHODS = ("occlusion", "gradient", "grad-input")
BASELINES = ("zero", "channel-mean")


@dataclass
class TsrParams:
    base_method: str = "occlusion"
    alpha: float = 0.0
    baseline: str = "zero"
    seed: int = 0

    def __post_init__(self):
        if self.base_method not in BASE_METHODS:
            raise BadParams(f"base_method must be one of {BASE_METHODS}")
        if not 0.0 <= self.alpha <= 1.0:
            raise BadParams("alpha must lie in [0, 1]")
        if isinstance(self.baseline, str) and self.baseline not in BASELINES:
            raise BadParams(f"baseline must be one of {BASELINES} or a (D, T) array")


def baseline_values(x, baseline) -> np.ndarray:
    """Full ``(D, T)`` matrix of replacement values."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(baseline, str):
        if baseline == "zero":
            return np.zeros_like(x)
        if baseline == "channel-mean":
            return np.repeat(x.mean(axis=1, keepdims=True), x.shape[1], axis=1)
        raise BadParams(f"unknown baseline {baseline!r}")
    b = np.asarray(baseline, dtype=np.float64)
    if b.shape != x.shape:
        raise ShapeMismatch(reason=f"baseline shape {b.shape} != {x.shape}")
    return b


def _occlusion_many(X, c, model, base):
    """Occlusion maps for a stack ``X`` of shape (m, D, T)."""
    m, D, T = X.shape
    cells = D * T
    batch = np.repeat(X[:, None], cells + 1, axis=1)  # (m, cells + 1, D, T)
    flat = batch.reshape(m, cells + 1, cells)
    idx = np.arange(cells)
    flat[:, idx + 1, idx] = base.reshape(-1)[idx]
    p = model.predict_batch(batch.reshape(-1, D, T))[:, c].reshape(m, cells + 1)
    return (p[:, :1] - p[:, 1:]).reshape(m, D, T)


def _saliency_many(X, c, model, method, base):
    if method == "occlusion":
        return _occlusion_many(X, c, model, base)
    if not model.has_gradient:
        raise GradientUnavailable(f"base method {method!r} needs a model with gradients")
    G = np.stack([model.grad(x, c) for x in X])
    return G if method == "gradient" else G * X


def base_saliency(x, c: int, model, method: str = "occlusion", baseline="zero") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    base = baseline_values(x, baseline)
    return _saliency_many(x[None], c, model, method, base)[0]


def time_relevance(x, c: int, model, method: str = "occlusion", baseline="zero") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    D, T = x.shape
    base = baseline_values(x, baseline)
    masked = np.repeat(x[None], T + 1, axis=0)
    for t in range(T):
        masked[t + 1, :, t] = base[:, t]
    maps = _saliency_many(masked, c, model, method, base)
    return np.abs(maps[1:] - maps[:1]).sum(axis=(1, 2))


def feature_relevance(x, c: int, model, method: str = "occlusion", baseline="zero", t: int = 0) -> np.ndarray:
    return _feature_relevance_many(x, c, model, method, baseline, [t])[:, 0]


def _feature_relevance_many(x, c, model, method, baseline, timesteps):
    """Per-channel relevance for several timesteps at once; shape (D, len(timesteps))."""
    x = np.asarray(x, dtype=np.float64)
    D, _ = x.shape
    base = baseline_values(x, baseline)
    timesteps = list(timesteps)
    masked = np.repeat(x[None], 1 + D * len(timesteps), axis=0)
    k = 1
    for t in timesteps:
        for d in range(D):
            masked[k, d, t] = base[d, t]
            k += 1
    maps = _saliency_many(masked, c, model, method, base)
    deltas = np.abs(maps[1:] - maps[:1]).sum(axis=(1, 2))
    return deltas.reshape(len(timesteps), D).T


def explain(x, c: Optional[int], model, params: Optional[TsrParams] = None) -> Attribution:
    params = params or TsrParams()
    x = validate_series(x)
    D, T = x.shape
    if c is None:
        c = model.predict_one(x)
    if not 0 <= c < model.n_classes:
        raise BadParams(f"class {c} is not a class of this model")
    delta = time_relevance(x, c, model, params.base_method, params.baseline)
    theta = params.alpha * delta.max()
    keep = np.flatnonzero(delta >= theta)
    phi = np.zeros((D, T))
    if len(keep):
        phi[:, keep] = _feature_relevance_many(x, c, model, params.base_method, params.baseline, keep)
    raw = delta[None, :] * phi
    top = raw.max()
    scores = raw / top if top > 0 else np.zeros_like(raw)
    return Attribution(np.clip(scores, 0.0, 1.0), "unit",
                       info={"time_relevance": delta.tolist(), "class": int(c)})


class TSR(FeatureAttribution):
    method = "tsr"

    def __init__(self, model, base_method="occlusion", alpha=0.0, baseline="zero", seed=0):
        super().__init__(model, TsrParams(base_method, alpha, baseline, seed))

    def explain(self, x, class_of_interest: Optional[int] = None) -> Attribution:
        return explain(x, class_of_interest, self.model, self.params)
