"""Feature-impact metrics computed from phantom-grid prediction curves.

All metrics reduce the same ingredients: the finite-difference slope of
each curve between consecutive grid values (one "segment derivative" per
observation and grid gap), scaled by the feature's standard deviation so
features of different units are comparable.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .phantom import PhantomGrid, build_grid


def _validate_lambda(lam: float):
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must be in (0, 1], got {lam!r}")


@dataclass
class SegmentDerivatives:
    """Per-curve finite differences plus the data for likelihood weights.

    ``derivatives[i, k]`` is the slope of observation i's curve over grid
    segment k; denominators are strictly positive because the grid is
    strictly increasing.  ``endpoint_distance[i, k]`` is the distance from
    the segment's right-endpoint grid value to the observation's real
    feature value, which drives the in-distribution weight.
    """

    derivatives: np.ndarray         # (n_obs, n_grid - 1)
    endpoint_distance: np.ndarray   # (n_obs, n_grid - 1)

    def likelihood_weights(self, sigma: float, lam: float) -> np.ndarray:
        """Weight lambda ** (distance / sigma), in (0, 1]; 1 at distance 0."""
        _validate_lambda(lam)
        if sigma == 0.0:
            return np.ones_like(self.endpoint_distance)
        return lam ** (self.endpoint_distance / sigma)


def segment_derivatives(grid: PhantomGrid) -> SegmentDerivatives:
    """Finite-difference slopes between consecutive phantom predictions."""
    g = grid.grid_values
    gaps = g[1:] - g[:-1]
    d = (grid.predictions[:, 1:] - grid.predictions[:, :-1]) / gaps
    dist = np.abs(g[1:][np.newaxis, :] - grid.real_values[:, np.newaxis])
    return SegmentDerivatives(derivatives=d, endpoint_distance=dist)


def likelihood(real_value: float, phantom_value: float, sigma: float,
               lam: float) -> float:
    """Exponential-decay weight for a phantom value's distance from reality.

    lambda ** (|phantom - real| / sigma); lambda controls how quickly the
    weight decays per standard deviation of displacement.  sigma = 0 is
    defined as weight 1.
    """
    _validate_lambda(lam)
    if sigma == 0.0:
        return 1.0
    return float(lam ** (abs(phantom_value - real_value) / sigma))


def _weighted_impact(d: np.ndarray, weights: np.ndarray, sigma: float,
                     signed: bool = False) -> float:
    vals = d if signed else np.abs(d)
    return float(sigma * (weights * vals).sum() / weights.sum())


def feature_impact(grid: PhantomGrid, sigma: float) -> float:
    """Mean absolute segment derivative, scaled by sigma.

    Equals sigma * |b| for a linear predictor with slope b, so the value
    reads like the coefficient the feature would have after standardizing
    it to unit standard deviation.  A single-valued grid gives 0.
    """
    seg = segment_derivatives(grid)
    if seg.derivatives.size == 0:
        return 0.0
    return _weighted_impact(seg.derivatives, np.ones_like(seg.derivatives), sigma)


def feature_impact_directional(grid: PhantomGrid, sigma: float) -> float:
    """Signed variant: mean segment derivative without the absolute value."""
    seg = segment_derivatives(grid)
    if seg.derivatives.size == 0:
        return 0.0
    return _weighted_impact(seg.derivatives, np.ones_like(seg.derivatives), sigma,
                            signed=True)


def in_distribution_impact(grid: PhantomGrid, sigma: float, lam: float) -> float:
    """Feature impact with segments downweighted by phantom likelihood.

    Each segment is weighted by the likelihood of its right-endpoint
    phantom; the weighted mean is normalized by the weight total, so
    lam = 1 reproduces feature_impact bit for bit.
    """
    _validate_lambda(lam)
    seg = segment_derivatives(grid)
    if seg.derivatives.size == 0:
        return 0.0
    weights = seg.likelihood_weights(sigma, lam)
    return _weighted_impact(seg.derivatives, weights, sigma)


def _heterogeneity(seg: SegmentDerivatives, sigma: float) -> float:
    n_obs, n_seg = seg.derivatives.shape
    if n_seg == 0 or n_obs < 2:
        return 0.0
    sds = np.std(seg.derivatives, axis=0, ddof=1)
    return float(sigma * sds.sum() / n_seg)


def heterogeneity(grid: PhantomGrid, sigma: float) -> float:
    """Spread of segment derivatives across observations.

    Sample standard deviation over observations at each fixed segment,
    averaged over segments and scaled by sigma.  Zero for additive models,
    where every observation's curve has the same shape.
    """
    return _heterogeneity(segment_derivatives(grid), sigma)


def _non_linearity(seg: SegmentDerivatives, sigma: float) -> float:
    n_obs, n_seg = seg.derivatives.shape
    if n_seg < 2:
        return 0.0
    sds = np.std(seg.derivatives, axis=1, ddof=1)
    return float(sigma * sds.sum() / n_obs)


def non_linearity(grid: PhantomGrid, sigma: float) -> float:
    """Spread of segment derivatives along each observation's own curve.

    Sample standard deviation over segments within one observation,
    averaged over observations and scaled by sigma.  Zero for linear
    predictors; needs at least three grid values to be nonzero.
    """
    return _non_linearity(segment_derivatives(grid), sigma)


@dataclass
class FeatureImpactResult:
    """All impact metrics for one feature from a single phantom grid."""

    feature: int
    name: str
    fi: float
    fi_directional: float
    idfi: dict
    heterogeneity: float
    non_linearity: float
    n_obs: int
    n_grid: int


def analyze_feature(dataset: Dataset, handle, feature: int,
                    lambdas=(0.75,), row_ids=None,
                    chunk_size: int = 256) -> FeatureImpactResult:
    """Build one phantom grid and derive every metric from it.

    sigma is the feature's sample standard deviation over this dataset
    (the interrogation set).  ``lambdas`` selects which in-distribution
    decay rates to evaluate; all metrics default to the full population.
    """
    lambdas = list(lambdas)
    for lam in lambdas:
        _validate_lambda(lam)
    meta = dataset.features[feature]
    sigma = meta.std_dev
    grid = build_grid(dataset, handle, feature, row_ids=row_ids,
                      chunk_size=chunk_size)
    seg = segment_derivatives(grid)

    if seg.derivatives.size == 0:
        fi = fi_dir = 0.0
        idfi = {lam: 0.0 for lam in lambdas}
        he = nl = 0.0
    else:
        ones = np.ones_like(seg.derivatives)
        fi = _weighted_impact(seg.derivatives, ones, sigma)
        fi_dir = _weighted_impact(seg.derivatives, ones, sigma, signed=True)
        idfi = {
            lam: _weighted_impact(seg.derivatives,
                                  seg.likelihood_weights(sigma, lam), sigma)
            for lam in lambdas
        }
        he = _heterogeneity(seg, sigma)
        nl = _non_linearity(seg, sigma)

    return FeatureImpactResult(
        feature=feature,
        name=meta.name,
        fi=fi,
        fi_directional=fi_dir,
        idfi=idfi,
        heterogeneity=he,
        non_linearity=nl,
        n_obs=grid.n_obs,
        n_grid=grid.n_grid,
    )


def analyze_features(dataset: Dataset, handle, lambdas=(0.75,), features=None,
                     jobs: int = 1, chunk_size: int = 256) -> list:
    """analyze_feature over several features, optionally with a thread pool.

    Results come back in feature order regardless of scheduling, so output
    is deterministic.  Keep jobs at 1 for external handles, which serialize
    batches through a single child process anyway.
    """
    indices = list(range(dataset.n_features) if features is None else features)
    if jobs > 1 and len(indices) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(
                lambda j: analyze_feature(dataset, handle, j, lambdas=lambdas,
                                          chunk_size=chunk_size),
                indices))
    return [analyze_feature(dataset, handle, j, lambdas=lambdas,
                            chunk_size=chunk_size) for j in indices]
