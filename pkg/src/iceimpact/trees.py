"""CART regression/classification trees for the bagged forest predictor."""

import numpy as np


def gini_impurity(y: np.ndarray) -> float:
    """Binary Gini impurity 1 - p0^2 - p1^2."""
    if y.size == 0:
        return 0.0
    p = float(y.mean())
    return 2.0 * p * (1.0 - p)


def variance_impurity(y: np.ndarray) -> float:
    if y.size == 0:
        return 0.0
    return float(np.var(y))


class DecisionTree:
    """A single CART tree with per-split feature subsampling.

    Nodes are stored flat: ``feature[i] < 0`` marks node ``i`` as a leaf
    whose prediction is ``value[i]``.  Leaf values are the mean target of
    the training samples reaching the node, which for {0, 1} targets is
    the class-1 frequency.  ``impurity_decrease`` accumulates, per feature,
    the split impurity reduction weighted by the fraction of training
    samples reaching the split node.
    """

    kind = "builtin-tree"

    def __init__(self, max_depth: int = 8, min_leaf: int = 2,
                 classification: bool = True, max_features: int | None = None):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.classification = classification
        self.max_features = max_features
        self.feature: np.ndarray | None = None
        self.threshold: np.ndarray | None = None
        self.left: np.ndarray | None = None
        self.right: np.ndarray | None = None
        self.value: np.ndarray | None = None
        self.impurity_decrease: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        n, p = X.shape
        self._nodes = []  # (feature, threshold, left, right, value)
        self.impurity_decrease = np.zeros(p)
        self._impurity = gini_impurity if self.classification else variance_impurity
        k = self.max_features if self.max_features is not None else max(1, int(np.sqrt(p)))
        self._k = min(k, p)
        self._n_total = n
        self._grow(X, y, np.arange(n), depth=0, rng=rng)
        nodes = self._nodes
        self.feature = np.array([nd[0] for nd in nodes], dtype=np.intp)
        self.threshold = np.array([nd[1] for nd in nodes])
        self.left = np.array([nd[2] for nd in nodes], dtype=np.intp)
        self.right = np.array([nd[3] for nd in nodes], dtype=np.intp)
        self.value = np.array([nd[4] for nd in nodes])
        del self._nodes
        return self

    def _grow(self, X, y, idx, depth, rng) -> int:
        node_id = len(self._nodes)
        self._nodes.append([-1, 0.0, -1, -1, float(y[idx].mean())])

        if depth >= self.max_depth or idx.size < 2 * self.min_leaf:
            return node_id
        parent_imp = self._impurity(y[idx])
        if parent_imp <= 0.0:
            return node_id

        split = self._best_split(X, y, idx, parent_imp, rng)
        if split is None:
            return node_id
        feat, thr, decrease = split
        self.impurity_decrease[feat] += (idx.size / self._n_total) * decrease

        go_left = X[idx, feat] <= thr
        left_id = self._grow(X, y, idx[go_left], depth + 1, rng)
        right_id = self._grow(X, y, idx[~go_left], depth + 1, rng)
        self._nodes[node_id][0] = feat
        self._nodes[node_id][1] = thr
        self._nodes[node_id][2] = left_id
        self._nodes[node_id][3] = right_id
        return node_id

    def _best_split(self, X, y, idx, parent_imp, rng):
        n = idx.size
        candidates = rng.choice(X.shape[1], size=self._k, replace=False)
        best = None
        for feat in candidates:
            x = X[idx, feat]
            order = np.argsort(x, kind="stable")
            xs = x[order]
            ys = y[idx[order]]
            # valid cut positions: between distinct consecutive values,
            # with min_leaf samples on both sides
            cuts = np.nonzero(xs[:-1] < xs[1:])[0]
            cuts = cuts[(cuts + 1 >= self.min_leaf) & (n - cuts - 1 >= self.min_leaf)]
            if cuts.size == 0:
                continue
            n_left = cuts + 1.0
            n_right = n - n_left
            csum = np.cumsum(ys)
            sum_left = csum[cuts]
            sum_right = csum[-1] - sum_left
            if self.classification:
                p_l = sum_left / n_left
                p_r = sum_right / n_right
                imp_left = 2.0 * p_l * (1.0 - p_l)
                imp_right = 2.0 * p_r * (1.0 - p_r)
            else:
                csum2 = np.cumsum(ys * ys)
                sq_left = csum2[cuts]
                sq_right = csum2[-1] - sq_left
                # clip: cancellation can push the variance a hair below 0
                imp_left = np.maximum(sq_left / n_left - (sum_left / n_left) ** 2, 0.0)
                imp_right = np.maximum(sq_right / n_right - (sum_right / n_right) ** 2, 0.0)
            decrease = parent_imp - (n_left / n) * imp_left - (n_right / n) * imp_right
            pos = int(np.argmax(decrease))
            if decrease[pos] <= 1e-15:
                continue
            if best is None or decrease[pos] > best[2]:
                cut = cuts[pos]
                thr = 0.5 * (xs[cut] + xs[cut + 1])
                best = (int(feat), float(thr), float(decrease[pos]))
        return best

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            active = np.nonzero(self.feature[node] >= 0)[0]
            if active.size == 0:
                break
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]
