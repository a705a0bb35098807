"""Shared types, validation, dataset I/O and synthetic data.

Series are plain float64 arrays laid out channels-first, shape ``(D, T)``.
Datasets keep a stacked ``(n, D, T)`` array next to an integer label vector.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

CHANGE_TOL = 1e-12
RANGE_KINDS = ("signed", "unit")


class TsxError(Exception):
    """Base class for every error raised by this package.

    ``code`` is a stable machine-readable name (the class name by default).
    """

    def __init__(self, message: str = "", **info):
        super().__init__(message or self.__class__.__name__)
        self.info = info

    @property
    def code(self) -> str:
        return type(self).__name__


class DataError(TsxError):
    pass


class NonFiniteValue(DataError):
    def __init__(self, d: int, t: int):
        super().__init__(f"non-finite value at channel {d}, timestep {t}", d=d, t=t)
        self.d, self.t = d, t


class TooShort(DataError):
    def __init__(self, t: int):
        super().__init__(f"series length {t} < 2", t=t)
        self.t = t


class ParseError(DataError):
    def __init__(self, line: int, reason: str = ""):
        super().__init__(f"line {line}: {reason or 'cannot parse'}", line=line)
        self.line = line


class ShapeMismatch(DataError):
    def __init__(self, index: int = -1, reason: str = ""):
        super().__init__(reason or f"shape mismatch at index {index}", index=index)
        self.index = index


class LabelOutOfRange(DataError):
    def __init__(self, index: int, label: int):
        super().__init__(f"label {label} out of range at index {index}", index=index)
        self.index = index


class BadParams(TsxError, ValueError):
    pass


class ModelError(TsxError):
    pass


class ExplanationError(TsxError):
    pass


class RangeViolation(ExplanationError):
    pass


# --------------------------------------------------------------------------
# series


def validate_series(raw) -> np.ndarray:
    """Return a read-only float64 ``(D, T)`` copy of ``raw``.

    A 1-d input is treated as a single channel.
    """
    try:
        arr = np.array(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ShapeMismatch(reason=f"not a rectangular real matrix: {exc}") from None
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ShapeMismatch(reason=f"expected a (D, T) matrix, got shape {arr.shape}")
    bad = np.argwhere(~np.isfinite(arr))
    if len(bad):
        d, t = bad[0]
        raise NonFiniteValue(int(d), int(t))
    if arr.shape[1] < 2:
        raise TooShort(arr.shape[1])
    arr.setflags(write=False)
    return arr


def znormalize(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    mean = s.mean(axis=1, keepdims=True)
    std = s.std(axis=1, keepdims=True)  # population std
    flat = std[:, 0] < 1e-12
    std[flat] = 1.0
    out = (s - mean) / std
    out[flat] = 0.0
    return out


def changed_mask(query: np.ndarray, cf: np.ndarray, tol: float = CHANGE_TOL) -> np.ndarray:
    return np.abs(np.asarray(cf) - np.asarray(query)) > tol


# --------------------------------------------------------------------------
# explanation types


@dataclass(frozen=True)
class Attribution:
    scores: np.ndarray
    range_kind: str
    segments: Optional[list] = None  # [(start, end, score), ...]
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.range_kind not in RANGE_KINDS:
            raise BadParams(f"unknown range kind {self.range_kind!r}")
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ShapeMismatch(reason="attribution scores must be (D, T)")
        object.__setattr__(self, "scores", scores)
        self.check_range()

    def check_range(self, tol: float = 1e-12):
        s = self.scores
        if not np.all(np.isfinite(s)):
            raise RangeViolation("non-finite attribution score")
        lo = -1.0 if self.range_kind == "signed" else 0.0
        if s.min() < lo - tol or s.max() > 1.0 + tol:
            raise RangeViolation(
                f"{self.range_kind} attribution outside [{lo}, 1]: "
                f"[{s.min():.6g}, {s.max():.6g}]"
            )

    @property
    def shape(self):
        return self.scores.shape


@dataclass(frozen=True)
class CounterfactualResult:
    """Counterfactual series, its predicted label, and what changed."""

    cf: np.ndarray
    label: int
    changed_channels: np.ndarray
    changed_cells: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_diff(cls, query, cf, label: int, **info) -> "CounterfactualResult":
        cf = np.array(cf, dtype=np.float64)
        if cf.shape != np.shape(query):
            raise ShapeMismatch(reason=f"cf shape {cf.shape} != query shape {np.shape(query)}")
        cells = changed_mask(query, cf)
        return cls(cf, int(label), cells.any(axis=1), cells, info)


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray  # (n, D, T)
    y: np.ndarray  # (n,)
    n_classes: int

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y)
        if X.ndim != 3 or len(X) == 0:
            raise ShapeMismatch(reason="dataset must be a nonempty (n, D, T) stack")
        if len(y) != len(X):
            raise ShapeMismatch(reason=f"{len(X)} series but {len(y)} labels")
        if X.shape[2] < 2:
            raise TooShort(X.shape[2])
        bad = np.argwhere(~np.isfinite(X))
        if len(bad):
            raise NonFiniteValue(int(bad[0][1]), int(bad[0][2]))
        y = y.astype(np.int64)
        for i, label in enumerate(y):
            if not 0 <= label < self.n_classes:
                raise LabelOutOfRange(i, int(label))
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_instances(cls, instances: Sequence, n_classes: Optional[int] = None):
        """Build from ``(series, label)`` pairs, checking every shape."""
        series, labels = [], []
        for i, (s, label) in enumerate(instances):
            s = validate_series(s)
            if series and s.shape != series[0].shape:
                raise ShapeMismatch(i, f"instance {i} has shape {s.shape}, expected {series[0].shape}")
            series.append(s)
            labels.append(int(label))
        if not series:
            raise ShapeMismatch(reason="dataset is empty")
        for i, label in enumerate(labels):
            if label < 0:
                raise LabelOutOfRange(i, label)
        if n_classes is None:
            n_classes = max(labels) + 1
        return cls(np.stack(series), np.array(labels), n_classes)

    def __len__(self):
        return len(self.X)

    @property
    def shape(self):
        return self.X.shape[1:]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx], self.n_classes)


def train_test_split(ds: LabeledDataset, n_test: int):
    """Deterministic split: the last ``n_test`` instances become the test set."""
    if not 0 < n_test < len(ds):
        raise BadParams(f"n_test must be in (0, {len(ds)})")
    cut = len(ds) - n_test
    return ds.subset(slice(0, cut)), ds.subset(slice(cut, None))


FORMATS = ("csv_uni", "jsonl_multi")


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv_uni"
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl_multi"
    raise BadParams(f"cannot infer dataset format from {path!r}")


def _parse_label(tok, lineno):
    try:
        label = int(tok)
    except (TypeError, ValueError):
        raise ParseError(lineno, f"bad label {tok!r}") from None
    if isinstance(tok, float) or isinstance(tok, bool):
        raise ParseError(lineno, f"bad label {tok!r}")
    return label


def load_dataset(path, format: Optional[str] = None, n_classes: Optional[int] = None) -> LabeledDataset:
    format = format or infer_format(path)
    if format not in FORMATS:
        raise BadParams(f"unknown format {format!r}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if format == "csv_uni":
            parts = line.split(",")
            label = _parse_label(parts[0].strip(), lineno)
            try:
                values = [float(v) for v in parts[1:]]
            except ValueError:
                raise ParseError(lineno, "bad number") from None
            series = [values]
        else:
            try:
                obj = json.loads(line)
                label = _parse_label(obj["label"], lineno)
                series = obj["channels"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ParseError(lineno, "expected {\"label\": int, \"channels\": [[...]]}") from None
            if (
                not isinstance(series, list)
                or not series
                or not all(isinstance(ch, list) for ch in series)
                or len({len(ch) for ch in series}) != 1
            ):
                raise ParseError(lineno, "channels must be a nonempty rectangular list of lists")
            try:
                series = [[float(v) for v in ch] for ch in series]
            except (TypeError, ValueError):
                raise ParseError(lineno, "bad number") from None
        rows.append((lineno, label, series))

    if not rows:
        raise ParseError(1, "empty dataset")
    expected = None
    instances = []
    for i, (lineno, label, series) in enumerate(rows):
        shape = (len(series), len(series[0]))
        if expected is None:
            expected = shape
        elif shape != expected:
            raise ShapeMismatch(i, f"instance {i} (line {lineno}) has shape {shape}, expected {expected}")
        if label < 0 or (n_classes is not None and label >= n_classes):
            raise LabelOutOfRange(i, label)
        instances.append((series, label))
    return LabeledDataset.from_instances(instances, n_classes)


def save_dataset(ds: LabeledDataset, path, format: Optional[str] = None) -> None:
    format = format or infer_format(path)
    out = []
    if format == "csv_uni":
        if ds.shape[0] != 1:
            raise ShapeMismatch(reason="csv_uni holds univariate data only")
        for x, label in zip(ds.X, ds.y):
            out.append(",".join([str(int(label))] + [repr(float(v)) for v in x[0]]))
    elif format == "jsonl_multi":
        for x, label in zip(ds.X, ds.y):
            out.append(json.dumps({"label": int(label), "channels": x.tolist()}))
    else:
        raise BadParams(f"unknown format {format!r}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# synthetic data

BUMP_AMPLITUDE = 2.0


def bump_window(t: int) -> tuple:
    """Timestep range that can carry signal in the synthetic data.

    Bump centres fall in ``[0.2t, 0.4t]``; the window extends by one bump
    width (``t/10``) on each side.
    """
    width = t / 10
    return max(0, int(np.floor(0.2 * t - width))), min(t, int(np.ceil(0.4 * t + width)))


def _bump(rng, t):
    centre = rng.uniform(0.2 * t, 0.4 * t)
    width = t / 10  # Gaussian standard deviation
    return BUMP_AMPLITUDE * np.exp(-0.5 * ((np.arange(t) - centre) / width) ** 2)


def make_synthetic(kind: str, n: int, d: int = 1, t: int = 50, seed: int = 0) -> LabeledDataset:
    """Generate a balanced two-class dataset.

    ``bump_uni``: class 1 carries an additive Gaussian bump over unit noise,
    class 0 is noise only. ``channel_multi``: the same construction on
    channel 0 while channels ``1..d-1`` are label-independent noise.
    """
    if n < 4 or t < 20:
        raise BadParams("need n >= 4 and t >= 20")
    if kind == "bump_uni":
        if d != 1:
            raise BadParams("bump_uni is univariate (d=1)")
    elif kind == "channel_multi":
        if d < 2:
            raise BadParams("channel_multi needs d >= 2")
    else:
        raise BadParams(f"unknown synthetic kind {kind!r}")

    rng = np.random.default_rng(seed)
    labels = np.array([0] * (n // 2) + [1] * (n - n // 2))
    labels = rng.permutation(labels)
    X = rng.standard_normal((n, d, t))
    for i in np.flatnonzero(labels == 1):
        X[i, 0] += _bump(rng, t)
    return LabeledDataset(X, labels, 2)
