"""Black-box model contract, reference classifiers and the stdio adapter."""
from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import sys
import threading
from pathlib import Path

import numpy as np

from .core import BadParams, LabeledDataset, ModelError, ShapeMismatch

PROB_TOL = 1e-6
DEFAULT_TIMEOUT = 30.0


class BadK(ModelError, ValueError):
    pass


class GradientUnavailable(ModelError):
    pass


class SpawnError(ModelError):
    pass


class ProtocolError(ModelError):
    def __init__(self, message: str = "", line: str | None = None):
        super().__init__(message, line=line)
        self.line = line


class ModelTimeout(ModelError):
    def __init__(self, seconds: float):
        super().__init__(f"model did not answer within {seconds:g} s", seconds=seconds)
        self.seconds = seconds


def as_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ShapeMismatch(reason=f"expected a batch of (D, T) series, got shape {X.shape}")
    return X


def check_probs(P, n_rows: int, n_classes: int) -> np.ndarray:
    """Validate a ``(n_rows, n_classes)`` probability matrix; raise ValueError otherwise."""
    P = np.asarray(P, dtype=np.float64)
    if P.shape != (n_rows, n_classes):
        raise ValueError(f"expected probabilities of shape {(n_rows, n_classes)}, got {P.shape}")
    if not np.all(np.isfinite(P)) or P.min() < -PROB_TOL or P.max() > 1 + PROB_TOL:
        raise ValueError("probabilities must lie in [0, 1]")
    if n_rows and np.abs(P.sum(axis=1) - 1).max() > PROB_TOL:
        raise ValueError("probabilities must sum to 1")
    return P


class ModelHandle:
    """Scoring interface every explainer talks to.

    Subclasses implement :meth:`predict_batch`; gradient-capable models set
    ``has_gradient`` and override :meth:`grad`.
    """

    has_gradient = False
    parallel_safe = True

    def __init__(self, n_classes: int):
        self.n_classes = int(n_classes)

    def predict_batch(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        """Predicted class per series; probability ties go to the lower class id."""
        return np.argmax(self.predict_batch(X), axis=1)

    def predict_one(self, x) -> int:
        return int(self.predict(as_batch(x))[0])

    def grad(self, x, c: int) -> np.ndarray:
        raise GradientUnavailable(f"{type(self).__name__} has no analytic gradient")


# --------------------------------------------------------------------------
# k-nearest neighbours


class KnnModel(ModelHandle):
    def __init__(self, X, y, k: int, n_classes: int):
        super().__init__(n_classes)
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y)
        self.k = k

    def _sq_dists(self, Q, chunk_elems=1 << 22):
        flat = self.X.reshape(len(self.X), -1)
        Qf = Q.reshape(len(Q), -1)
        step = max(1, chunk_elems // max(1, flat.size))
        out = np.empty((len(Q), len(flat)))
        for i in range(0, len(Q), step):
            diff = Qf[i:i + step, None, :] - flat[None, :, :]
            out[i:i + step] = np.einsum("qnf,qnf->qn", diff, diff)
        return out

    def predict_batch(self, X) -> np.ndarray:
        Q = as_batch(X)
        if Q.shape[1:] != self.X.shape[1:]:
            raise ShapeMismatch(reason=f"query shape {Q.shape[1:]} != training shape {self.X.shape[1:]}")
        nearest = np.argsort(self._sq_dists(Q), axis=1, kind="stable")[:, : self.k]
        votes = self.y[nearest]
        P = np.zeros((len(Q), self.n_classes))
        for c in range(self.n_classes):
            P[:, c] = (votes == c).sum(axis=1)
        return P / self.k


def knn_fit(ds: LabeledDataset, k: int = 1, metric: str = "euclidean") -> KnnModel:
    if metric != "euclidean":
        raise BadParams(f"unsupported metric {metric!r}")
    if not 1 <= k <= len(ds):
        raise BadK(f"k must be in [1, {len(ds)}], got {k}")
    return KnnModel(ds.X, ds.y, k, ds.n_classes)


# --------------------------------------------------------------------------
# linear softmax


def softmax(Z):
    Z = Z - Z.max(axis=-1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=-1, keepdims=True)


class LinearSoftmaxModel(ModelHandle):
    has_gradient = True

    def __init__(self, weights, bias):
        weights = np.array(weights, dtype=np.float64)
        bias = np.array(bias, dtype=np.float64)
        if weights.ndim != 3 or bias.shape != (weights.shape[0],):
            raise ShapeMismatch(reason="weights must be (C, D, T) and bias (C,)")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise BadParams("non-finite model parameters")
        super().__init__(weights.shape[0])
        self.weights = weights
        self.bias = bias

    def logits(self, X) -> np.ndarray:
        return np.einsum("ndt,cdt->nc", as_batch(X), self.weights) + self.bias

    def predict_batch(self, X) -> np.ndarray:
        return softmax(self.logits(X))

    def grad(self, x, c: int) -> np.ndarray:
        """d p_c / d x, shape (D, T)."""
        p = self.predict_batch(x)[0]
        return p[c] * (self.weights[c] - np.einsum("c,cdt->dt", p, self.weights))

    def to_json(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LinearSoftmaxModel":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(obj["weights"], obj["bias"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ModelError(f"cannot load linear model from {path}: {exc}") from None


def linear_fit(ds: LabeledDataset, epochs: int = 300, lr: float = 0.5, seed: int = 0) -> LinearSoftmaxModel:
    """Full-batch gradient descent on mean softmax cross-entropy.

    Parameters start at zero, so training uses no randomness; ``seed`` is
    recorded on the model only.
    """
    n, D, T = ds.X.shape
    C = ds.n_classes
    W = np.zeros((C, D, T))
    b = np.zeros(C)
    onehot = np.eye(C)[ds.y]
    for _ in range(epochs):
        P = softmax(np.einsum("ndt,cdt->nc", ds.X, W) + b)
        G = (P - onehot) / n
        W -= lr * np.einsum("nc,ndt->cdt", G, ds.X)
        b -= lr * G.sum(axis=0)
    model = LinearSoftmaxModel(W, b)
    model.seed = seed
    return model


# --------------------------------------------------------------------------
# stdio protocol


def encode_request(req_id: int, batch) -> str:
    return json.dumps({"id": int(req_id), "op": "predict", "instances": as_batch(batch).tolist()})


def decode_request(line: str) -> tuple:
    """Parse a request line into ``(id, op, batch or None)``."""
    obj = json.loads(line)
    op = obj["op"]
    batch = np.asarray(obj["instances"], dtype=np.float64) if op == "predict" else None
    return int(obj["id"]), op, batch


def encode_response(req_id: int, probs) -> str:
    return json.dumps({"id": int(req_id), "probs": np.asarray(probs, dtype=np.float64).tolist()})


def decode_response(line: str, req_id: int, n_rows: int, n_classes: int) -> np.ndarray:
    try:
        obj = json.loads(line)
        if not isinstance(obj, dict):
            raise ValueError("response is not an object")
        if obj.get("id") != req_id:
            raise ValueError(f"expected id {req_id}, got {obj.get('id')!r}")
        return check_probs(obj["probs"], n_rows, n_classes)
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"bad response: {exc}", line=line) from None


def serve_stdio(model: ModelHandle, d: int, t: int, stdin=None, stdout=None) -> None:
    """Answer protocol requests for ``model`` until stdin closes."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        req_id, op, batch = decode_request(line)
        if op == "info":
            reply = json.dumps({"id": req_id, "n_classes": model.n_classes, "d": d, "t": t})
        else:
            reply = encode_response(req_id, model.predict_batch(batch) if len(batch) else np.zeros((0, model.n_classes)))
        stdout.write(reply + "\n")
        stdout.flush()


class StdioModel(ModelHandle):
    """Model living in a child process, spoken to over line-delimited JSON."""

    parallel_safe = False

    def __init__(self, command, n_classes: int, timeout: float | None = None):
        super().__init__(n_classes)
        if timeout is None:
            timeout = float(os.environ.get("TSX_TIMEOUT", DEFAULT_TIMEOUT))
        self.command = command
        self.timeout = timeout
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
            )
        except OSError as exc:
            raise SpawnError(f"cannot start {command!r}: {exc}") from None
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._next_id = 0
        self._lock = threading.Lock()
        try:
            info = self._call(json.dumps({"id": 0, "op": "info"}))
            if not isinstance(info, dict) or info.get("id") != 0 or "n_classes" not in info:
                raise ProtocolError("bad info response", line=json.dumps(info))
            if info["n_classes"] != self.n_classes:
                raise ProtocolError(
                    f"model reports {info['n_classes']} classes, expected {self.n_classes}"
                )
            self.d, self.t = info.get("d"), info.get("t")
        except Exception:
            self.close()
            raise
        self._next_id = 1

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _readline(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._proc.kill()
            self._proc.wait()
            raise ModelTimeout(self.timeout) from None
        if line is None:
            raise ProtocolError("model process closed its output")
        return line

    def _send(self, request: str) -> None:
        if self._proc.poll() is not None:
            raise ProtocolError("model process has exited")
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"cannot write to model: {exc}") from None

    def _call(self, request: str):
        self._send(request)
        line = self._readline()
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError("response is not JSON", line=line) from None

    def predict_batch(self, X) -> np.ndarray:
        X = as_batch(X)
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            self._send(encode_request(req_id, X))
            return decode_response(self._readline(), req_id, len(X), self.n_classes)

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None or proc.poll() is not None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=1.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        self.close()


def stdio_model(command, n_classes: int, timeout: float | None = None) -> StdioModel:
    return StdioModel(command, n_classes, timeout)
