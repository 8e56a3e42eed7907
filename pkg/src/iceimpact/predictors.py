"""Batch-prediction handles: builtin reference models and an external-process bridge.

Every handle exposes ``predict(rows) -> (k,) float64`` plus ``kind``,
``output_kind`` and a string-valued ``metadata`` map.  Predictions are
deterministic: identical input matrices give bit-identical outputs.  Any
object with a compatible ``predict`` can be used by the metrics engine.
"""

import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .trees import DecisionTree

REGRESSION = "regression-score"
PROBABILITY = "probability"


class RankDeficiencyError(ValueError):
    """Raised when the least-squares design matrix is rank deficient."""


class ExternalPredictorError(RuntimeError):
    """Base class for failures of the child-process prediction bridge."""

    def __init__(self, message: str, batch_index: int | None = None):
        super().__init__(message)
        self.batch_index = batch_index


class ExternalChildFailure(ExternalPredictorError):
    """Child process exited abnormally or its pipe broke mid-batch."""


class MalformedResponse(ExternalPredictorError):
    """Child sent a line that does not parse as a single finite real."""


class PredictionCountMismatch(ExternalPredictorError):
    """Child closed its output before sending one line per input row."""


class BatchTimeout(ExternalPredictorError):
    """Child did not answer a batch within the configured timeout."""


def _as_matrix(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.ndim != 2:
        raise ValueError("prediction input must be a 2-D matrix")
    return rows


def _check_width(rows: np.ndarray, expected: int):
    if rows.shape[1] != expected:
        raise ValueError(
            f"prediction input has {rows.shape[1]} columns, model expects {expected}")


@dataclass
class FittedLinearModel:
    """Ordinary least squares fit; prediction is intercept + rows @ coefficients."""

    intercept: float
    coefficients: np.ndarray
    metadata: dict = field(default_factory=dict)
    kind: str = "builtin-ols"
    output_kind: str = REGRESSION

    def predict(self, rows) -> np.ndarray:
        rows = _as_matrix(rows)
        if rows.shape[0] == 0:
            return np.empty(0)
        _check_width(rows, self.coefficients.size)
        return self.intercept + rows @ self.coefficients


def fit_ols(dataset: Dataset, ridge_fallback: bool = True) -> FittedLinearModel:
    """Least-squares fit of the dataset target via the normal equations.

    A singular Gram matrix either raises RankDeficiencyError or, when
    ``ridge_fallback`` is on (the default), is regularized with a 1e-8
    ridge term recorded in the model metadata.
    """
    if dataset.target is None:
        raise ValueError("fit_ols requires a dataset with a target column")
    X = dataset.rows
    y = dataset.target
    n, p = X.shape
    design = np.column_stack([np.ones(n), X])
    gram = design.T @ design
    rhs = design.T @ y
    metadata = {"model": "ols"}
    if np.linalg.matrix_rank(design) < p + 1:
        if not ridge_fallback:
            raise RankDeficiencyError(
                f"design matrix is rank deficient (n={n}, p={p}); "
                "enable ridge_fallback or add rows")
        gram = gram + 1e-8 * np.eye(p + 1)
        metadata["ridge"] = "1e-8"
    beta = np.linalg.solve(gram, rhs)
    return FittedLinearModel(intercept=float(beta[0]), coefficients=beta[1:],
                             metadata=metadata)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogisticModel:
    """Logistic regression trained by full-batch gradient descent.

    Features are standardized internally; ``weights`` live in the
    standardized space (also reported in metadata).
    """

    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    metadata: dict = field(default_factory=dict)
    kind: str = "builtin-logistic"
    output_kind: str = PROBABILITY

    def predict(self, rows) -> np.ndarray:
        rows = _as_matrix(rows)
        if rows.shape[0] == 0:
            return np.empty(0)
        _check_width(rows, self.weights.size)
        z = ((rows - self.mean) / self.scale) @ self.weights + self.bias
        return _sigmoid(z)


def fit_logistic(dataset: Dataset, epochs: int = 500, learning_rate: float = 0.1,
                 seed: int = 0) -> LogisticModel:
    """Gradient-descent logistic fit for a binary {0, 1} target."""
    if dataset.target is None:
        raise ValueError("fit_logistic requires a dataset with a target column")
    y = dataset.target
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("fit_logistic requires a binary target with values in {0, 1}")
    X = dataset.rows
    n, p = X.shape
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    Xs = (X - mean) / scale

    w = np.zeros(p)
    b = 0.0
    for _ in range(epochs):
        err = _sigmoid(Xs @ w + b) - y
        w -= learning_rate * (Xs.T @ err) / n
        b -= learning_rate * err.mean()

    metadata = {
        "model": "logistic",
        "epochs": str(epochs),
        "learning_rate": repr(float(learning_rate)),
        "seed": str(seed),
        "standardized_coefficients": ",".join(repr(float(v)) for v in w),
        "standardized_intercept": repr(float(b)),
    }
    return LogisticModel(weights=w, bias=float(b), mean=mean, scale=scale,
                         metadata=metadata)


@dataclass
class ForestModel:
    """Bagged CART forest; classification output is a leaf-frequency probability."""

    trees: list
    classification: bool
    n_features: int
    impurity_importances: np.ndarray
    feature_names: list
    metadata: dict = field(default_factory=dict)
    kind: str = "builtin-forest"

    @property
    def output_kind(self) -> str:
        return PROBABILITY if self.classification else REGRESSION

    def predict(self, rows) -> np.ndarray:
        rows = _as_matrix(rows)
        if rows.shape[0] == 0:
            return np.empty(0)
        _check_width(rows, self.n_features)
        acc = np.zeros(rows.shape[0])
        for tree in self.trees:
            acc += tree.predict(rows)
        return acc / len(self.trees)


def fit_forest(dataset: Dataset, n_trees: int = 100, max_depth: int = 8,
               min_leaf: int = 2, seed: int = 0) -> ForestModel:
    """Fit a bagged forest with sqrt(p) feature subsampling per split.

    Targets whose values all lie in {0, 1} are treated as classification
    (Gini splits); anything else uses variance reduction.  Per-feature
    impurity-decrease totals are recorded for the comparison metrics.
    """
    if dataset.target is None:
        raise ValueError("fit_forest requires a dataset with a target column")
    X = dataset.rows
    y = dataset.target
    n, p = X.shape
    classification = bool(np.all(np.isin(y, (0.0, 1.0))))

    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    importances = np.zeros(p)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        tree = DecisionTree(max_depth=max_depth, min_leaf=min_leaf,
                            classification=classification)
        tree.fit(X[boot], y[boot], rng)
        trees.append(tree)
        importances += tree.impurity_decrease
    importances /= n_trees

    metadata = {
        "model": "forest",
        "n_trees": str(n_trees),
        "max_depth": str(max_depth),
        "min_leaf": str(min_leaf),
        "seed": str(seed),
        "task": "classification" if classification else "regression",
    }
    return ForestModel(trees=trees, classification=classification, n_features=p,
                       impurity_importances=importances,
                       feature_names=dataset.feature_names(), metadata=metadata)


def _format_row(row: np.ndarray) -> str:
    return ",".join(format(float(v), ".17g") for v in row)


class ExternalPredictor:
    """Bridge to a child process speaking the line-based batch protocol.

    For every batch the engine writes ``BATCH <k> <p>`` then k CSV rows of
    p reals (17 significant digits) and flushes; the child must reply with
    exactly k lines, one decimal real each.  Closing stdin tells the child
    to exit.  Batches are serialized through a lock: one in flight per
    child process.
    """

    kind = "external"

    def __init__(self, command, output_kind: str = REGRESSION,
                 timeout: float = 60.0):
        self.command = list(command)
        self.output_kind = output_kind
        self.timeout = timeout
        self.metadata = {"model": "external", "command": " ".join(self.command)}
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue | None = None
        self._lock = threading.Lock()
        self._batch_index = 0

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True)
        except OSError as exc:
            raise ExternalChildFailure(
                f"cannot start external predictor {self.command!r}: {exc}") from exc
        self._lines = queue.Queue()

        def _pump(stream, sink):
            for line in stream:
                sink.put(line)
            sink.put(None)  # EOF sentinel

        t = threading.Thread(target=_pump, args=(self._proc.stdout, self._lines),
                             daemon=True)
        t.start()

    def _fail(self, exc_cls, message):
        batch = self._batch_index
        self.close(kill=True)
        raise exc_cls(f"batch {batch}: {message}", batch_index=batch)

    def predict(self, rows) -> np.ndarray:
        rows = _as_matrix(rows)
        k, p = rows.shape
        if k == 0:
            return np.empty(0)
        with self._lock:
            if self._proc is None:
                self._start()
            payload = "".join(
                [f"BATCH {k} {p}\n"] + [_format_row(rows[i]) + "\n" for i in range(k)])
            try:
                self._proc.stdin.write(payload)
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                code = self._proc.wait()
                self._fail(ExternalChildFailure,
                           f"child exited with code {code} while receiving rows")

            deadline = time.monotonic() + self.timeout
            out = np.empty(k)
            for i in range(k):
                try:
                    line = self._lines.get(timeout=max(0.0, deadline - time.monotonic()))
                except queue.Empty:
                    self._fail(BatchTimeout,
                               f"only {i}/{k} responses within {self.timeout}s")
                if line is None:  # child closed stdout
                    code = self._proc.wait()
                    if code != 0:
                        self._fail(ExternalChildFailure,
                                   f"child exited with code {code} after {i}/{k} predictions")
                    self._fail(PredictionCountMismatch,
                               f"child sent {i} predictions, expected {k}")
                try:
                    out[i] = float(line)
                except ValueError:
                    self._fail(MalformedResponse,
                               f"cannot parse response line {line.strip()!r} as a real")
            self._batch_index += 1
            return out

    def close(self, kill: bool = False):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin and not proc.stdin.closed:
                proc.stdin.close()
        except OSError:
            pass
        if kill:
            proc.kill()
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def __del__(self):
        try:
            self.close(kill=True)
        except Exception:
            pass


def external_predictor(command, output_kind: str = REGRESSION,
                       timeout: float = 60.0) -> ExternalPredictor:
    """Wrap an argv list as a batch-protocol prediction handle."""
    if not command:
        raise ValueError("external predictor command must be a nonempty argv list")
    return ExternalPredictor(command, output_kind=output_kind, timeout=timeout)


def predict(handle, rows) -> np.ndarray:
    """Predict a (k, p) matrix with any handle; returns k finite reals."""
    rows = _as_matrix(rows)
    if rows.shape[0] == 0:
        return np.empty(0)
    out = np.asarray(handle.predict(rows), dtype=np.float64)
    if out.shape != (rows.shape[0],):
        raise ValueError(
            f"predictor returned shape {out.shape}, expected ({rows.shape[0]},)")
    if not np.all(np.isfinite(out)):
        raise ValueError("predictor returned non-finite values")
    return out
