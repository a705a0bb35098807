"""Native-guide counterfactuals.

The native guide is the nearest unlike neighbour (NUN): the reference
instance closest to the query whose *predicted* class differs from the
query's. Three ways of turning it into a counterfactual are offered:

* ``plain``: the NUN itself;
* ``barycenter``: the first point on the segment query -> NUN, scanned on a
  uniform grid of ``max_steps`` mixing weights, that flips the prediction;
* ``saliency``: copy the NUN into a window around the most salient timestep,
  widening it until the prediction flips.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import InstanceBased
from .core import (
    Attribution,
    BadParams,
    CounterfactualResult,
    ExplanationError,
    LabeledDataset,
    validate_series,
)

VARIANTS = ("plain", "barycenter", "saliency")


class NoUnlikeNeighbor(ExplanationError):
    pass


class BadSaliencyShape(ExplanationError):
    pass


@dataclass
class NunCfParams:
    variant: str = "plain"
    metric: str = "euclidean"
    max_steps: int = 100
    saliency_method: Optional[str] = "occlusion"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise BadParams(f"variant must be one of {VARIANTS}")
        if self.metric != "euclidean":
            raise BadParams(f"unsupported metric {self.metric!r}")
        if self.max_steps < 1:
            raise BadParams("max_steps must be >= 1")


def _sq_dist(query, X):
    diff = X - query[None]
    return np.einsum("ndt,ndt->n", diff, diff)


def find_nun(query, ds: LabeledDataset, model, query_pred: Optional[int] = None):
    """Return ``(nun, predicted class of nun, dataset index)``."""
    query = validate_series(query)
    if query_pred is None:
        query_pred = model.predict_one(query)
    preds = model.predict(ds.X)
    unlike = np.flatnonzero(preds != query_pred)
    if len(unlike) == 0:
        raise NoUnlikeNeighbor(f"every reference instance is predicted as class {query_pred}")
    d = _sq_dist(query, ds.X[unlike])
    best = unlike[int(np.argmin(d))]  # argmin keeps the first, i.e. lowest index
    return ds.X[best].copy(), int(preds[best]), int(best)


def explain_plain(query, ds, model, params: Optional[NunCfParams] = None) -> CounterfactualResult:
    query = validate_series(query)
    nun, label, idx = find_nun(query, ds, model)
    return CounterfactualResult.from_diff(query, nun, label, nun_index=idx)


def explain_barycenter(query, ds, model, params: Optional[NunCfParams] = None) -> CounterfactualResult:
    params = params or NunCfParams(variant="barycenter")
    query = validate_series(query)
    query_pred = model.predict_one(query)
    nun, nun_label, idx = find_nun(query, ds, model, query_pred)
    steps = params.max_steps
    lambdas = np.arange(1, steps + 1) / steps
    candidates = (1 - lambdas)[:, None, None] * query[None] + lambdas[:, None, None] * nun[None]
    candidates[-1] = nun  # lambda = 1 is the NUN exactly
    preds = model.predict(candidates)
    first = int(np.flatnonzero(preds != query_pred)[0])
    return CounterfactualResult.from_diff(
        query, candidates[first], int(preds[first]), nun_index=idx, weight=float(lambdas[first])
    )


def explain_saliency_guided(query, ds, model, params: Optional[NunCfParams], saliency: Attribution) -> CounterfactualResult:
    query = validate_series(query)
    if saliency.range_kind != "unit" or saliency.scores.shape != query.shape:
        raise BadSaliencyShape(
            f"need a unit-range attribution of shape {query.shape}, "
            f"got {saliency.range_kind} {saliency.scores.shape}"
        )
    query_pred = model.predict_one(query)
    nun, _, idx = find_nun(query, ds, model, query_pred)
    T = query.shape[1]
    centre = int(np.argmax(saliency.scores.sum(axis=0)))

    windows = []
    radius = 0
    while True:
        lo, hi = max(0, centre - radius), min(T, centre + radius + 1)
        windows.append((lo, hi))
        if lo == 0 and hi == T:
            break
        radius += 1
    candidates = np.repeat(query[None], len(windows), axis=0)
    for i, (lo, hi) in enumerate(windows):
        candidates[i, :, lo:hi] = nun[:, lo:hi]
    preds = model.predict(candidates)
    flipped = np.flatnonzero(preds != query_pred)
    first = int(flipped[0]) if len(flipped) else len(windows) - 1
    return CounterfactualResult.from_diff(
        query, candidates[first], int(preds[first]), nun_index=idx, window=windows[first]
    )


class NativeGuide(InstanceBased):
    """Native-guide counterfactual explainer.

    ``saliency_provider`` is any callable ``(x, class_id) -> Attribution``
    with unit range; it is only used by the ``saliency`` variant. When left
    out, an occlusion-based TSR explainer on the same model is used.
    """

    method = "nun-cf"

    def __init__(self, model, reference: LabeledDataset, variant="plain", max_steps=100,
                 metric="euclidean", saliency_method="occlusion", saliency_provider=None):
        super().__init__(model, NunCfParams(variant, metric, max_steps, saliency_method))
        self.reference = reference
        self.saliency_provider = saliency_provider

    def _saliency(self, x) -> Attribution:
        if self.saliency_provider is not None:
            return self.saliency_provider(x, self.model.predict_one(x))
        from .tsr import TSR

        return TSR(self.model, base_method=self.params.saliency_method).explain(x)

    def explain(self, x) -> CounterfactualResult:
        x = validate_series(x)
        variant = self.params.variant
        if variant == "plain":
            return explain_plain(x, self.reference, self.model, self.params)
        if variant == "barycenter":
            return explain_barycenter(x, self.reference, self.model, self.params)
        # check the NUN exists before paying for the saliency map
        find_nun(x, self.reference, self.model)
        return explain_saliency_guided(x, self.reference, self.model, self.params, self._saliency(x))
