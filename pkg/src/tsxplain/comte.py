"""Channel-swap counterfactuals for multivariate series.

Whole channels of the query are replaced by the matching channels of a
distractor (a reference instance predicted as the target class). Random-
restart hill climbing over the swap mask looks for the smallest set of
channels that moves the prediction to the target.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import InstanceBased
from .core import (
    BadParams,
    CounterfactualResult,
    ExplanationError,
    LabeledDataset,
    ShapeMismatch,
    validate_series,
)


class NoDistractor(ExplanationError):
    pass


class SearchFailed(ExplanationError):
    pass


@dataclass
class ComteParams:
    n_distractors: int = 3
    restarts: int = 5
    max_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        if min(self.n_distractors, self.restarts, self.max_iters) < 1:
            raise BadParams("n_distractors, restarts and max_iters must be >= 1")
        if self.seed < 0:
            raise BadParams("seed must be a nonnegative integer")


def runner_up(probs) -> int:
    """Second most probable class; ties resolved towards the lower class id."""
    order = np.argsort(-np.asarray(probs), kind="stable")
    return int(order[1])


def select_distractors(query, target: int, ds: LabeledDataset, model, n: int):
    query = validate_series(query)
    preds = model.predict(ds.X)
    cand = np.flatnonzero(preds == target)
    if len(cand) == 0:
        raise NoDistractor(f"no reference instance is predicted as class {target}")
    diff = ds.X[cand] - query[None]
    d = np.einsum("ndt,ndt->n", diff, diff)
    order = np.argsort(d, kind="stable")[:n]
    return [ds.X[i].copy() for i in cand[order]]


def apply_swap(query, distractor, state) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    distractor = np.asarray(distractor, dtype=np.float64)
    state = np.asarray(state, dtype=bool)
    if query.shape != distractor.shape or state.shape != (query.shape[0],):
        raise ShapeMismatch(reason="query, distractor and swap mask must agree on shape")
    return np.where(state[:, None], distractor, query)


def _rank(state):
    """Order on swap masks: fewer channels first, then lower channel indices."""
    return int(state.sum()), tuple(np.flatnonzero(state))


def _neighbours(state):
    """All Hamming-1 moves as ``(new_state, is_removal, channel)``."""
    for d in range(len(state)):
        nxt = state.copy()
        nxt[d] = not nxt[d]
        yield nxt, bool(state[d]), d


def hill_climb(query, distractor, target: int, model, params: ComteParams, rng) -> Optional[np.ndarray]:
    """Smallest valid swap mask found over ``params.restarts`` restarts, or None.

    Equally small masks are ranked by their lowest channel indices.

    A state is valid when the swapped series is predicted as ``target``.
    While the current state is invalid and no neighbour is valid, the climber
    adds the channel that raises the target probability most; the full swap
    reproduces the distractor, so this always makes progress.
    """
    query = np.asarray(query, dtype=np.float64)
    D = query.shape[0]
    best = None
    for _ in range(params.restarts):
        state = rng.integers(0, 2, size=D).astype(bool)
        for _ in range(params.max_iters):
            moves = list(_neighbours(state))
            batch = np.stack([apply_swap(query, distractor, s) for s, _, _ in moves]
                             + [apply_swap(query, distractor, state)])
            probs = model.predict_batch(batch)
            preds = np.argmax(probs, axis=1)
            current_valid = preds[-1] == target
            valid = [i for i in range(D) if preds[i] == target]
            if valid:
                # same order as the final choice: fewest swaps, then lowest channels
                pick = min(valid, key=lambda i: _rank(moves[i][0]))
                if current_valid and moves[pick][0].sum() >= state.sum():
                    break
                state = moves[pick][0]
            elif current_valid:
                break
            else:
                adds = [i for i in range(D) if not moves[i][1]]
                if not adds:
                    break
                pick = max(adds, key=lambda i: (probs[i, target], -i))
                state = moves[pick][0]
        if model.predict_one(apply_swap(query, distractor, state)) == target:
            if best is None or _rank(state) < _rank(best):
                best = state.copy()
    return best


def explain(query, model, ds: LabeledDataset, target: Optional[int] = None,
            params: Optional[ComteParams] = None) -> CounterfactualResult:
    params = params or ComteParams()
    query = validate_series(query)
    probs = model.predict_batch(query)[0]
    pred = int(np.argmax(probs))
    if target is None:
        if model.n_classes < 2:
            raise NoDistractor("single-class model has no alternative target")
        target = runner_up(probs)
    if not 0 <= target < model.n_classes:
        raise BadParams(f"target {target} is not a class of this model")
    if target == pred:
        raise BadParams(f"target {target} is already the predicted class")
    distractors = select_distractors(query, target, ds, model, params.n_distractors)

    best = None
    for j, distractor in enumerate(distractors):
        for r in range(params.restarts):
            # one independent stream per (distractor, restart)
            rng = np.random.default_rng([params.seed, j, r])
            one = ComteParams(params.n_distractors, 1, params.max_iters, params.seed)
            state = hill_climb(query, distractor, target, model, one, rng)
            if state is not None and (best is None or _rank(state) < _rank(best[0])):
                best = (state, j)
    if best is None:
        raise SearchFailed("no channel swap reached the target class")
    state, j = best
    cf = apply_swap(query, distractors[j], state)
    return CounterfactualResult.from_diff(
        query, cf, model.predict_one(cf), swapped=state.tolist(), distractor=j
    )


class CoMTE(InstanceBased):
    method = "comte"

    def __init__(self, model, reference: LabeledDataset, n_distractors=3, restarts=5, max_iters=100, seed=0):
        super().__init__(model, ComteParams(n_distractors, restarts, max_iters, seed))
        self.reference = reference

    def explain(self, x, target: Optional[int] = None) -> CounterfactualResult:
        return explain(x, self.model, self.reference, target, self.params)
