"""Tabular data loading, validation, and per-feature statistics."""

import csv
from dataclasses import dataclass, field

import numpy as np

KIND_CONTINUOUS = "continuous"
KIND_CATEGORICAL = "categorical-ordinal"
KIND_BINARY = "binary"

_KINDS = (KIND_CONTINUOUS, KIND_CATEGORICAL, KIND_BINARY)


@dataclass(frozen=True, eq=False)
class FeatureMeta:
    """Per-column statistics needed by every downstream metric.

    std_dev is the sample standard deviation (n-1 denominator); it is 0
    exactly when the column holds a single distinct value.  unique_values
    is strictly increasing.
    """

    name: str
    kind: str
    std_dev: float
    unique_values: np.ndarray
    missing_count: int = 0


@dataclass(eq=False)
class Dataset:
    """Immutable-after-load feature matrix plus per-feature metadata.

    rows is an (n, p) float64 array with no missing values remaining;
    row_ids are the stable 0-based row indices used everywhere a subset
    of observations is referenced.
    """

    rows: np.ndarray
    features: list[FeatureMeta]
    target_name: str | None = None
    target: np.ndarray | None = None
    row_ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.row_ids is None:
            self.row_ids = np.arange(self.rows.shape[0])
        self.rows.setflags(write=False)
        if self.target is not None:
            self.target.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def feature_index(self, name: str) -> int:
        for j, f in enumerate(self.features):
            if f.name == name:
                return j
        raise KeyError(f"unknown feature {name!r}")


def _sample_std(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def infer_kind(values: np.ndarray, n_rows: int) -> str:
    """Guess a feature kind from its distinct values.

    Exactly {0, 1} is binary; at most max(10, sqrt(n)) distinct integral
    values is categorical-ordinal; anything else is continuous.
    """
    uniq = np.unique(values)
    if uniq.size == 2 and uniq[0] == 0.0 and uniq[1] == 1.0:
        return KIND_BINARY
    limit = max(10.0, np.sqrt(n_rows))
    if uniq.size <= limit and np.all(uniq == np.round(uniq)):
        return KIND_CATEGORICAL
    return KIND_CONTINUOUS


def _feature_meta(name: str, column: np.ndarray, missing: int, kind: str | None) -> FeatureMeta:
    resolved = kind if kind is not None else infer_kind(column, column.size)
    if resolved not in _KINDS:
        raise ValueError(f"unknown feature kind {resolved!r} for {name!r}")
    return FeatureMeta(
        name=name,
        kind=resolved,
        std_dev=_sample_std(column),
        unique_values=np.unique(column),
        missing_count=missing,
    )


def from_arrays(rows, feature_names=None, target=None, target_name="target",
                kinds=None) -> Dataset:
    """Build a Dataset from in-memory arrays (no missing values allowed)."""
    rows = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-D matrix")
    n, p = rows.shape
    if n < 1 or p < 1:
        raise ValueError("dataset must have at least one row and one feature")
    if not np.all(np.isfinite(rows)):
        raise ValueError("rows contain non-finite values")
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(p)]
    if len(feature_names) != p:
        raise ValueError("feature_names length does not match column count")
    kinds = kinds or {}
    features = [
        _feature_meta(name, rows[:, j], 0, kinds.get(name))
        for j, name in enumerate(feature_names)
    ]
    tgt = None
    if target is not None:
        tgt = np.asarray(target, dtype=np.float64)
        if tgt.shape != (n,):
            raise ValueError("target length does not match row count")
    return Dataset(rows=rows, features=features,
                   target_name=target_name if tgt is not None else None,
                   target=tgt)


def load_csv(path, target: str, missing_marker: str = "?",
             impute: str = "mean", kinds=None) -> Dataset:
    """Load a numeric CSV with a header row into a Dataset.

    Cells equal to ``missing_marker`` are either replaced by the column
    mean (computed over the non-missing entries) or their whole row is
    dropped, per ``impute`` ("mean" or "drop-row").  Feature statistics
    are computed after imputation.  ``kinds`` optionally overrides the
    inferred kind per feature name.
    """
    if impute not in ("mean", "drop-row"):
        raise ValueError(f"impute must be 'mean' or 'drop-row', got {impute!r}")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if target not in header:
            raise ValueError(f"{path}: target column {target!r} not found in header")
        raw_rows = []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ValueError(
                    f"{path}: line {line_no} has {len(record)} cells, expected {len(header)}")
            raw_rows.append((line_no, record))

    if not raw_rows:
        raise ValueError(f"{path}: no data rows")

    n_cols = len(header)
    values = np.empty((len(raw_rows), n_cols))
    missing = np.zeros((len(raw_rows), n_cols), dtype=bool)
    for i, (line_no, record) in enumerate(raw_rows):
        for j, cell in enumerate(record):
            cell = cell.strip()
            if cell == missing_marker:
                missing[i, j] = True
                values[i, j] = np.nan
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: line {line_no}, column {header[j]!r}: "
                    f"cannot parse cell {cell!r} as a number") from None

    if impute == "drop-row":
        keep = ~missing.any(axis=1)
        values = values[keep]
        missing = missing[keep]
        if values.shape[0] == 0:
            raise ValueError(f"{path}: no rows left after dropping rows with missing values")
    else:
        for j in range(n_cols):
            col_missing = missing[:, j]
            if not col_missing.any():
                continue
            present = values[~col_missing, j]
            if present.size == 0:
                raise ValueError(
                    f"{path}: column {header[j]!r} has no non-missing values to average")
            values[col_missing, j] = present.mean()

    target_idx = header.index(target)
    feature_cols = [j for j in range(n_cols) if j != target_idx]
    rows = np.ascontiguousarray(values[:, feature_cols])
    kinds = kinds or {}
    features = [
        _feature_meta(header[j], rows[:, k], int(missing[:, j].sum()), kinds.get(header[j]))
        for k, j in enumerate(feature_cols)
    ]
    return Dataset(
        rows=rows,
        features=features,
        target_name=target,
        target=np.ascontiguousarray(values[:, target_idx]),
    )


def save_csv(dataset: Dataset, path) -> None:
    """Write a Dataset back out; reloading the file recovers it exactly.

    Values are serialized with repr, the shortest decimal string that
    round-trips the underlying float64.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = dataset.feature_names()
        if dataset.target is not None:
            header = header + [dataset.target_name]
        writer.writerow(header)
        for i in range(dataset.n_rows):
            cells = [repr(float(v)) for v in dataset.rows[i]]
            if dataset.target is not None:
                cells.append(repr(float(dataset.target[i])))
            writer.writerow(cells)


def feature_std(dataset: Dataset, feature: int) -> float:
    """Sample standard deviation of one feature column; 0 if constant."""
    return _sample_std(dataset.rows[:, feature])


def sample_rows(dataset: Dataset, feature: int, per_quantile: int,
                quantiles: int = 10, seed: int = 0) -> np.ndarray:
    """Pick a representative row subset spread across the feature's range.

    Continuous features are partitioned into ``quantiles`` equal-probability
    bins and up to ``per_quantile`` rows are drawn uniformly without
    replacement from each; categorical and binary features are sampled per
    distinct value instead.  Deterministic for a fixed seed.  Returns all
    row ids (sorted) when the dataset is no larger than the requested total.
    """
    if per_quantile < 1:
        raise ValueError("per_quantile must be >= 1")
    if quantiles < 1:
        raise ValueError("quantiles must be >= 1")
    meta = dataset.features[feature]
    x = dataset.rows[:, feature]
    n = dataset.n_rows

    if meta.kind == KIND_CONTINUOUS:
        edges = np.quantile(x, np.linspace(0.0, 1.0, quantiles + 1))
        bin_of = np.searchsorted(edges[1:-1], x, side="right")
        n_bins = quantiles
    else:
        uniq = meta.unique_values
        bin_of = np.searchsorted(uniq, x)
        n_bins = uniq.size

    if n <= per_quantile * n_bins:
        return dataset.row_ids.copy()

    rng = np.random.default_rng(seed)
    chosen = []
    for b in range(n_bins):
        members = dataset.row_ids[bin_of == b]
        if members.size == 0:
            continue
        take = min(per_quantile, members.size)
        chosen.append(rng.choice(members, size=take, replace=False))
    return np.sort(np.concatenate(chosen))


@dataclass(frozen=True)
class SamplingConfig:
    """Row-sampling knobs shared by plot export and the CLI."""

    per_quantile: int = 5
    quantiles: int = 10
    seed: int = 0
