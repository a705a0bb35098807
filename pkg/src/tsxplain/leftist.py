"""Segment-level local surrogate attribution for univariate series.

The series is cut into ``n_segments`` contiguous, non-overlapping pieces.
Random on/off masks over the pieces are turned into perturbed series, scored
by the black box, and a kernel-weighted ridge regression of the class
probability on the masks gives one weight per segment.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import FeatureAttribution
from .core import (
    Attribution,
    BadParams,
    ExplanationError,
    LabeledDataset,
    ShapeMismatch,
    validate_series,
)

TRANSFORMS = ("uniform", "mean", "background")


class TooManySegments(ExplanationError, ValueError):
    pass


class MissingBackground(ExplanationError):
    pass


class SingularSystem(ExplanationError):
    pass


class MultivariateUnsupported(ExplanationError):
    pass


@dataclass
class LeftistParams:
    n_segments: int = 10
    n_samples: int = 1000
    transform: str = "uniform"
    kernel_width: float = 0.25
    ridge_lambda: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.n_segments < 2:
            raise BadParams("n_segments must be >= 2")
        if self.n_samples < self.n_segments:
            raise BadParams("n_samples must be >= n_segments")
        if not self.kernel_width > 0:
            raise BadParams("kernel_width must be positive")
        if self.ridge_lambda < 0:
            raise BadParams("ridge_lambda must be nonnegative")
        if self.transform not in TRANSFORMS:
            raise BadParams(f"transform must be one of {TRANSFORMS}")


def segment(T: int, n_segments: int) -> list:
    """Split ``[0, T)`` into ``n_segments`` intervals whose lengths differ by at most one.

    >>> segment(10, 3)
    [(0, 4), (4, 7), (7, 10)]
    """
    if n_segments > T:
        raise TooManySegments(f"cannot cut {T} timesteps into {n_segments} segments")
    if n_segments < 1:
        raise BadParams("n_segments must be >= 1")
    size, extra = divmod(T, n_segments)
    out, start = [], 0
    for k in range(n_segments):
        end = start + size + (1 if k < extra else 0)
        out.append((start, end))
        start = end
    return out


def sample_masks(n_samples: int, n_segments: int, rng) -> np.ndarray:
    masks = rng.integers(0, 2, size=(n_samples, n_segments))
    masks[0] = 1
    empty = np.flatnonzero(masks[1:].sum(axis=1) == 0) + 1
    while len(empty):
        masks[empty] = rng.integers(0, 2, size=(len(empty), n_segments))
        empty = empty[masks[empty].sum(axis=1) == 0]
    return masks


def apply_transform(query, mask, spec, transform: str, background=None) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    if len(mask) != len(spec):
        raise ShapeMismatch(reason="mask length must equal the number of segments")
    if transform == "background":
        if background is None:
            raise MissingBackground("the background transform needs a background series")
        background = np.asarray(background, dtype=np.float64)
        if background.shape != query.shape:
            raise ShapeMismatch(reason=f"background shape {background.shape} != {query.shape}")
    elif transform not in TRANSFORMS:
        raise BadParams(f"unknown transform {transform!r}")
    out = query.copy()
    for keep, (lo, hi) in zip(mask, spec):
        if keep:
            continue
        if transform == "uniform":
            out[:, lo:hi] = 0.0
        elif transform == "mean":
            out[:, lo:hi] = query[:, lo:hi].mean(axis=1, keepdims=True)
        else:
            out[:, lo:hi] = background[:, lo:hi]
    return out


def kernel_weights(masks, kernel_width: float) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.float64)
    dist = 1.0 - masks.mean(axis=1)  # fraction of segments switched off
    return np.exp(-(dist ** 2) / kernel_width ** 2)


def fit_weights(masks, probs, kernel_width: float, ridge_lambda: float):
    """Weighted ridge fit of ``probs`` on ``masks``; returns ``(weights, intercept)``.

    The intercept is not penalised. ``kernel_width=inf`` weights every
    sample equally.
    """
    Z = np.asarray(masks, dtype=np.float64)
    y = np.asarray(probs, dtype=np.float64)
    n, k = Z.shape
    if len(y) != n or n < k:
        raise BadParams("need as many probabilities as masks, and at least one mask per segment")
    pi = kernel_weights(Z, kernel_width)
    A = np.hstack([Z, np.ones((n, 1))])
    AtW = A.T * pi
    lhs = AtW @ A
    lhs[np.arange(k), np.arange(k)] += ridge_lambda
    rhs = AtW @ y
    if ridge_lambda == 0 and np.linalg.matrix_rank(lhs) < k + 1:
        raise SingularSystem("design is rank deficient; use ridge_lambda > 0")
    try:
        coef = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        raise SingularSystem("normal equations are singular") from None
    return coef[:k], float(coef[k])


def weighted_r2(masks, probs, weights, intercept, kernel_width: float) -> float:
    Z = np.asarray(masks, dtype=np.float64)
    y = np.asarray(probs, dtype=np.float64)
    pi = kernel_weights(Z, kernel_width)
    resid = y - Z @ weights - intercept
    ybar = np.sum(pi * y) / np.sum(pi)
    ss_tot = np.sum(pi * (y - ybar) ** 2)
    ss_res = np.sum(pi * resid ** 2)
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return float(1.0 - ss_res / ss_tot)


def background_series(ds: LabeledDataset) -> np.ndarray:
    """Pointwise mean of the reference instances."""
    return ds.X.mean(axis=0)


def explain(query, model, class_of_interest: Optional[int] = None,
            params: Optional[LeftistParams] = None, ds: Optional[LabeledDataset] = None) -> Attribution:
    params = params or LeftistParams()
    query = validate_series(query)
    D, T = query.shape
    if D != 1:
        raise MultivariateUnsupported(f"segment surrogate handles univariate series only, got D={D}")
    if class_of_interest is None:
        class_of_interest = model.predict_one(query)
    if not 0 <= class_of_interest < model.n_classes:
        raise BadParams(f"class {class_of_interest} is not a class of this model")
    background = None
    if params.transform == "background":
        if ds is None:
            raise MissingBackground("the background transform needs a reference dataset")
        background = background_series(ds)

    spec = segment(T, params.n_segments)
    rng = np.random.default_rng(params.seed)
    masks = sample_masks(params.n_samples, params.n_segments, rng)
    batch = np.stack([apply_transform(query, m, spec, params.transform, background) for m in masks])
    probs = model.predict_batch(batch)[:, class_of_interest]
    w, b = fit_weights(masks, probs, params.kernel_width, params.ridge_lambda)
    r2 = weighted_r2(masks, probs, w, b, params.kernel_width)

    scale = max(1.0, float(np.max(np.abs(w))))
    w = w / scale
    scores = np.zeros((1, T))
    segments = []
    for weight, (lo, hi) in zip(w, spec):
        scores[:, lo:hi] = weight
        segments.append((lo, hi, float(weight)))
    return Attribution(
        scores, "signed", segments,
        info={"intercept": b, "r2": r2, "scale": scale, "class": int(class_of_interest)},
    )


class Leftist(FeatureAttribution):
    method = "leftist"

    def __init__(self, model, reference: Optional[LabeledDataset] = None, n_segments=10, n_samples=1000,
                 transform="uniform", kernel_width=0.25, ridge_lambda=1e-3, seed=0):
        super().__init__(model, LeftistParams(n_segments, n_samples, transform, kernel_width, ridge_lambda, seed))
        self.reference = reference

    def explain(self, x, class_of_interest: Optional[int] = None) -> Attribution:
        return explain(x, self.model, class_of_interest, self.params, self.reference)
