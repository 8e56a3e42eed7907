"""Classical importance metrics and the machinery to compare them with impact.

Permutation importance and forest impurity importance answer "what does the
model's performance rely on"; the impact metrics answer "what moves the
model's predictions".  This module computes both, puts every metric on a
common normalized scale, and correlates them.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .impact import analyze_features
from .predictors import PROBABILITY, predict

SCORES = ("accuracy", "auc", "r2")


@dataclass
class MetricVector:
    """One named per-feature metric; normalized vectors sum to 100."""

    metric_name: str
    values: dict
    normalized: bool = False


def normalize(values, metric_name: str | None = None) -> MetricVector:
    """Make values positive and rescale them to sum to 100."""
    if isinstance(values, MetricVector):
        metric_name = metric_name or values.metric_name
        values = values.values
    names = list(values.keys())
    raw = np.abs(np.array([float(values[k]) for k in names]))
    total = raw.sum()
    if total == 0.0:
        raise ValueError(f"cannot normalize the all-zero metric {metric_name!r}")
    scaled = raw * (100.0 / total)
    return MetricVector(metric_name=metric_name or "metric",
                        values=dict(zip(names, (float(v) for v in scaled))),
                        normalized=True)


def pearson(v1: MetricVector, v2: MetricVector) -> float:
    """Pearson correlation between two metric vectors over shared features."""
    if set(v1.values) != set(v2.values):
        raise ValueError("metric vectors cover different feature sets")
    names = list(v1.values.keys())
    if len(names) < 2:
        raise ValueError("pearson needs at least two features")
    a = np.array([v1.values[k] for k in names])
    b = np.array([v2.values[k] for k in names])
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0.0:
        raise ValueError("pearson undefined for a zero-variance metric vector")
    return float((a * b).sum() / denom)


def _rankdata(x: np.ndarray) -> np.ndarray:
    # average ranks with tie handling
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    sorted_x = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def score_predictions(score: str, y: np.ndarray, preds: np.ndarray) -> float:
    """Scoring rules shared by permutation importance: accuracy, auc, r2."""
    if score == "accuracy":
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("accuracy requires a binary {0, 1} target")
        return float(np.mean((preds >= 0.5) == (y == 1.0)))
    if score == "auc":
        if not np.all(np.isin(y, (0.0, 1.0))) or len(np.unique(y)) < 2:
            raise ValueError("auc requires a binary target with both classes present")
        ranks = _rankdata(preds)
        n_pos = int((y == 1.0).sum())
        n_neg = y.size - n_pos
        rank_sum = ranks[y == 1.0].sum()
        return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
    if score == "r2":
        ss_tot = float(((y - y.mean()) ** 2).sum())
        if ss_tot == 0.0:
            raise ValueError("r2 undefined for a constant target")
        ss_res = float(((y - preds) ** 2).sum())
        return 1.0 - ss_res / ss_tot
    raise ValueError(f"unknown score {score!r}; expected one of {SCORES}")


def default_score(handle) -> str:
    return "accuracy" if getattr(handle, "output_kind", None) == PROBABILITY else "r2"


def permutation_importance(dataset: Dataset, handle, score: str = "accuracy",
                           repeats: int = 5, seed: int = 0) -> MetricVector:
    """Mean score drop when one column is shuffled, per feature.

    For each feature and repeat, the column is permuted with a seeded
    generator (features in column order, repeats innermost) and the drop
    from the baseline score is averaged.  Deterministic for a fixed seed.
    """
    if dataset.target is None:
        raise ValueError("permutation importance requires a dataset with a target")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    y = dataset.target
    baseline = score_predictions(score, y, predict(handle, dataset.rows))

    rng = np.random.default_rng(seed)
    values = {}
    for j, meta in enumerate(dataset.features):
        drops = np.empty(repeats)
        for r in range(repeats):
            perm = rng.permutation(dataset.n_rows)
            shuffled = dataset.rows.copy()
            shuffled[:, j] = shuffled[perm, j]
            drops[r] = baseline - score_predictions(score, y, predict(handle, shuffled))
        values[meta.name] = float(drops.mean())
    return MetricVector(metric_name=f"permutation[{score}]", values=values)


def impurity_importance(handle) -> MetricVector:
    """Per-feature impurity decrease recorded while fitting a builtin forest.

    Normalized to sum to 100; features never selected for a split get 0.
    """
    if getattr(handle, "kind", None) != "builtin-forest":
        raise ValueError("impurity importance is only defined for builtin-forest handles")
    values = dict(zip(handle.feature_names,
                      (float(v) for v in handle.impurity_importances)))
    return normalize(values, metric_name="impurity")


@dataclass
class ImpactReport:
    """Everything needed to print a per-feature impact-vs-importance table."""

    impacts: list                       # FeatureImpactResult per feature
    metrics: dict = field(default_factory=dict)      # name -> raw MetricVector
    normalized: dict = field(default_factory=dict)   # name -> normalized MetricVector
    correlations: dict = field(default_factory=dict)  # name -> {name -> r}
    differences: dict = field(default_factory=dict)   # name -> ranked diff rows
    metadata: dict = field(default_factory=dict)


def _impact_vectors(impacts: list, lambdas) -> dict:
    vectors = {"fi": MetricVector("fi", {r.name: r.fi for r in impacts})}
    for lam in lambdas:
        key = f"idfi:{lam:g}"
        vectors[key] = MetricVector(key, {r.name: r.idfi[lam] for r in impacts})
    return vectors


def report(dataset: Dataset, handle, metrics=("fi", "permutation"),
           lambdas=(0.75,), score: str | None = None, repeats: int = 5,
           seed: int = 0, features=None, jobs: int = 1) -> ImpactReport:
    """Compute impact metrics plus requested comparison importances.

    ``metrics`` tokens: "fi", "idfi:<lambda>", "permutation" (alias
    "perm"), "impurity".  "fi" is always included since the difference
    tables are relative to it.  Normalized copies, pairwise Pearson
    correlations, and FI-minus-importance rankings are attached.
    """
    if not metrics:
        raise ValueError("metrics list must be nonempty")
    requested = []
    lambdas = list(lambdas)
    for token in metrics:
        token = "permutation" if token == "perm" else token
        if token.startswith("idfi:"):
            lam = float(token.split(":", 1)[1])
            if lam not in lambdas:
                lambdas.append(lam)
            token = f"idfi:{lam:g}"
        elif token not in ("fi", "permutation", "impurity"):
            raise ValueError(f"unknown metric token {token!r}")
        if token not in requested:
            requested.append(token)
    if "fi" not in requested:
        requested.insert(0, "fi")

    impacts = analyze_features(dataset, handle, lambdas=lambdas,
                               features=features, jobs=jobs)
    vectors = _impact_vectors(impacts, lambdas)

    if "permutation" in requested:
        sc = score or default_score(handle)
        vectors["permutation"] = permutation_importance(
            dataset, handle, score=sc, repeats=repeats, seed=seed)
    if "impurity" in requested:
        vectors["impurity"] = impurity_importance(handle)

    selected = {name: vectors[name] for name in requested}
    if features is not None:
        wanted = {r.name for r in impacts}
        for name, vec in selected.items():
            selected[name] = MetricVector(
                vec.metric_name,
                {k: v for k, v in vec.values.items() if k in wanted},
                vec.normalized)

    normalized = {name: normalize(vec) for name, vec in selected.items()}
    correlations = {
        a: {b: pearson(normalized[a], normalized[b]) for b in requested}
        for a in requested
    }

    fi_norm = normalized["fi"].values
    differences = {}
    for name in requested:
        if name == "fi" or name.startswith("idfi:"):
            continue
        other = normalized[name].values
        rows = [
            {"feature": feat, "fi": fi_norm[feat], name: other[feat],
             "difference": fi_norm[feat] - other[feat]}
            for feat in fi_norm
        ]
        rows.sort(key=lambda r: -r["difference"])
        differences[name] = rows

    metadata = {
        "sigma_source": "interrogation-dataset",
        "lambdas": list(lambdas),
        "score": score or default_score(handle),
        "permutation_repeats": repeats,
        "permutation_seed": seed,
        "model": dict(getattr(handle, "metadata", {}) or {}),
        "notes": [
            "tree-shap importance is not implemented and omitted",
            "importances computed in-package; externally fitted reference "
            "models are not reproduced",
        ],
    }
    return ImpactReport(impacts=impacts, metrics=selected, normalized=normalized,
                        correlations=correlations, differences=differences,
                        metadata=metadata)
