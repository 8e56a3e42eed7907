"""Phantom-observation grids: sweep one feature over its observed values.

For each selected observation, copies are made with the at-issue feature
replaced by every distinct value the feature takes in the data, and the
model is asked to predict all of them.  The resulting per-observation
prediction curves are the raw material for every impact metric and plot.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .predictors import predict


@dataclass
class PhantomGrid:
    """Per-observation prediction curves for one swept feature.

    ``grid_values`` is strictly increasing; ``predictions[i, k]`` is the
    model output for observation ``row_ids[i]`` with the at-issue feature
    set to ``grid_values[k]``.  Each observation's own value appears in
    the grid, so one phantom per curve is the untouched row.
    """

    feature: int
    grid_values: np.ndarray   # (n_grid,)
    row_ids: np.ndarray       # (n_obs,)
    real_values: np.ndarray   # (n_obs,)
    predictions: np.ndarray   # (n_obs, n_grid)

    @property
    def n_obs(self) -> int:
        return self.row_ids.size

    @property
    def n_grid(self) -> int:
        return self.grid_values.size


def build_grid(dataset: Dataset, handle, feature: int, row_ids=None,
               chunk_size: int = 256) -> PhantomGrid:
    """Predict all phantom observations for one feature.

    Builds n_obs * n_grid phantom rows (all other columns copied verbatim)
    and predicts them in chunks of at most ``chunk_size`` observations per
    batch to bound memory.  ``row_ids=None`` uses every row.
    """
    if not 0 <= feature < dataset.n_features:
        raise IndexError(f"feature index {feature} out of range")
    if row_ids is None:
        row_ids = dataset.row_ids
    row_ids = np.asarray(row_ids, dtype=np.intp)
    if row_ids.size == 0:
        raise ValueError("row_ids must be nonempty")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")

    grid = dataset.features[feature].unique_values
    m = grid.size
    preds = np.empty((row_ids.size, m))
    try:
        for start in range(0, row_ids.size, chunk_size):
            ids = row_ids[start:start + chunk_size]
            base = dataset.rows[ids]                # fancy indexing copies
            phantoms = np.repeat(base, m, axis=0)
            phantoms[:, feature] = np.tile(grid, ids.size)
            preds[start:start + ids.size] = predict(handle, phantoms).reshape(ids.size, m)
    except Exception as exc:
        exc.feature_index = feature
        raise

    return PhantomGrid(
        feature=feature,
        grid_values=grid,
        row_ids=row_ids.copy(),
        real_values=dataset.rows[row_ids, feature].copy(),
        predictions=preds,
    )
