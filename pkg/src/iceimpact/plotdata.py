"""Plot-ready ICE and centered-ICE curve data, rendering left to the caller.

Each curve follows one observation as the at-issue feature sweeps over its
observed values.  Points within half a standard deviation of the
observation's real value are flagged so a frontend can draw those
stretches solid and the extrapolated remainder dotted.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, SamplingConfig, sample_rows
from .phantom import build_grid


@dataclass
class Curve:
    """One observation's sweep: x grid values, predicted y, half-sigma flags."""

    row_id: int
    real_value: float
    x: np.ndarray
    y: np.ndarray
    in_half_sigma: np.ndarray


@dataclass
class CurveSet:
    """All exported curves for one feature; centered curves start at y = 0."""

    feature: str
    centered: bool
    curves: list


def _resolve_feature(dataset: Dataset, feature) -> int:
    if isinstance(feature, str):
        return dataset.feature_index(feature)
    if not 0 <= feature < dataset.n_features:
        raise IndexError(f"feature index {feature} out of range")
    return int(feature)


def ice_curves(dataset: Dataset, handle, feature,
               sampling: SamplingConfig | None = None) -> CurveSet:
    """Export per-observation prediction curves for one feature.

    Rows are subsampled across the feature's quantiles (or distinct
    values) by default, since full-population curve sets overcrowd plots;
    pass a SamplingConfig to adjust.  ``feature`` may be an index or name.
    """
    idx = _resolve_feature(dataset, feature)
    cfg = sampling or SamplingConfig()
    ids = sample_rows(dataset, idx, cfg.per_quantile, cfg.quantiles, cfg.seed)
    grid = build_grid(dataset, handle, idx, row_ids=ids)
    half_sigma = dataset.features[idx].std_dev / 2.0

    curves = []
    for i in range(grid.n_obs):
        real = float(grid.real_values[i])
        curves.append(Curve(
            row_id=int(grid.row_ids[i]),
            real_value=real,
            x=grid.grid_values.copy(),
            y=grid.predictions[i].copy(),
            in_half_sigma=np.abs(grid.grid_values - real) <= half_sigma,
        ))
    return CurveSet(feature=dataset.features[idx].name, centered=False,
                    curves=curves)


def c_ice_curves(dataset: Dataset, handle, feature,
                 sampling: SamplingConfig | None = None) -> CurveSet:
    """ICE curves shifted so each starts at 0 at the minimum grid value.

    The lines then show the change in prediction along the sweep rather
    than its level, which makes divergent shapes easy to compare.
    """
    cs = ice_curves(dataset, handle, feature, sampling=sampling)
    for curve in cs.curves:
        curve.y = curve.y - curve.y[0]
    cs.centered = True
    return cs


CSV_HEADER = ["feature", "row_id", "grid_x", "y_hat", "in_half_sigma", "centered"]


def curves_to_csv(cs: CurveSet) -> str:
    """Long-form CSV, one row per curve point."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    centered = "true" if cs.centered else "false"
    for curve in cs.curves:
        for k in range(curve.x.size):
            writer.writerow([
                cs.feature,
                curve.row_id,
                format(float(curve.x[k]), ".17g"),
                format(float(curve.y[k]), ".17g"),
                "true" if curve.in_half_sigma[k] else "false",
                centered,
            ])
    return buf.getvalue()


def curves_to_dict(cs: CurveSet) -> dict:
    """JSON-ready structure mirroring the CurveSet layout."""
    return {
        "feature": cs.feature,
        "centered": cs.centered,
        "curves": [
            {
                "row_id": curve.row_id,
                "real_value": float(curve.real_value),
                "points": [
                    {
                        "x": float(curve.x[k]),
                        "y": float(curve.y[k]),
                        "in_half_sigma": bool(curve.in_half_sigma[k]),
                    }
                    for k in range(curve.x.size)
                ],
            }
            for curve in cs.curves
        ],
    }
