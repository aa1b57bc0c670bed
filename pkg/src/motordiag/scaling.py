"""Training-cost estimates and saturating power-law loss fits.

The cost model is C = 6 N D for N parameters and D processed samples (given
directly or as batch size times gradient steps). Loss curves follow
L(x) = L_inf + (x0 / x)^alpha: an irreducible floor plus a reducible term
that decays as the scale variable x grows. The fitter is agnostic to whether
x measures parameters, data, or compute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

GRID_LEVELS = 64
ALPHA_GRID = np.logspace(-2.0, 1.0, GRID_LEVELS)
_PENALTY = 1e300


@dataclass(frozen=True)
class ScalingFit:
    """Fitted parameters of L(x) = L_inf + (x0/x)^alpha plus the fit residual."""

    l_inf: float
    x0: float
    alpha: float
    rss: float
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.alpha <= 0 or self.x0 <= 0 or self.l_inf < 0:
            raise ValueError("fit parameters out of range")


def compute_cost(
    n_params: float,
    data_volume: float | None = None,
    *,
    batch_size: float | None = None,
    steps: float | None = None,
) -> float:
    """Total training cost 6 * N * D.

    The data volume D may be given directly or as ``batch_size * steps``.
    """
    if n_params <= 0:
        raise ValueError(f"parameter count must be positive, got {n_params}")
    if data_volume is None:
        if batch_size is None or steps is None:
            raise ValueError("provide data_volume or both batch_size and steps")
        if batch_size <= 0 or steps <= 0:
            raise ValueError("batch size and steps must be positive")
        data_volume = batch_size * steps
    if data_volume <= 0:
        raise ValueError(f"data volume must be positive, got {data_volume}")
    return 6.0 * n_params * data_volume


def _residual_sum(x: np.ndarray, losses: np.ndarray, l_inf: float, x0: float, alpha: float) -> float:
    residual = losses - l_inf - (x0 / x) ** alpha
    return float(residual @ residual)


def fit_scaling_law(points: list[tuple[float, float]]) -> ScalingFit:
    """Least-squares fit of the saturating power law to (x, loss) pairs.

    The objective is non-convex, so the search is seeded by a coarse grid:
    64 floor levels over [0, min(L)) crossed with 64 log-spaced exponents in
    [1e-2, 10], solving x0 in closed form per cell by log-linear regression of
    log(L - L_inf) on log x. A Nelder-Mead refinement then polishes the best
    cell (grid-order ties keep the first cell).
    """
    if len(points) < 4:
        raise ValueError(f"need at least 4 points, got {len(points)}")
    x = np.asarray([p[0] for p in points], dtype=np.float64)
    losses = np.asarray([p[1] for p in points], dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("scale values must be positive")
    if np.any(losses <= 0):
        raise ValueError("loss values must be positive")
    if np.unique(x).size != x.size:
        raise ValueError("scale values must be distinct")

    log_x = np.log(x)
    min_loss = float(losses.min())
    floor_grid = np.linspace(0.0, min_loss, GRID_LEVELS, endpoint=False)

    # Vectorized grid: rows are floor levels, columns are exponents.
    log_excess = np.log(losses[None, :] - floor_grid[:, None])  # (levels, npts)
    log_x0 = (log_excess[:, None, :] + ALPHA_GRID[None, :, None] * log_x[None, None, :]).mean(
        axis=-1
    ) / ALPHA_GRID[None, :]
    predicted = floor_grid[:, None, None] + np.exp(
        ALPHA_GRID[None, :, None] * (log_x0[:, :, None] - log_x[None, None, :])
    )
    rss_grid = ((losses[None, None, :] - predicted) ** 2).sum(axis=-1)
    flat_best = int(np.argmin(rss_grid))
    level_idx, alpha_idx = divmod(flat_best, GRID_LEVELS)
    start = np.array(
        [floor_grid[level_idx], log_x0[level_idx, alpha_idx], np.log(ALPHA_GRID[alpha_idx])]
    )

    def objective(params: np.ndarray) -> float:
        l_inf, log_scale, log_alpha = params
        if not 0.0 <= l_inf < min_loss:
            return _PENALTY
        if abs(log_scale) > 700 or abs(log_alpha) > 20:
            return _PENALTY
        return _residual_sum(x, losses, l_inf, np.exp(log_scale), np.exp(log_alpha))

    result = minimize(
        objective,
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000, "maxfev": 40000},
    )
    candidates = [start, result.x] if np.all(np.isfinite(result.x)) else [start]
    best = min(candidates, key=objective)
    l_inf, x0, alpha = float(best[0]), float(np.exp(best[1])), float(np.exp(best[2]))
    return ScalingFit(
        l_inf=l_inf,
        x0=x0,
        alpha=alpha,
        rss=_residual_sum(x, losses, l_inf, x0, alpha),
        points=tuple((float(a), float(b)) for a, b in points),
    )


def predict_loss(fit: ScalingFit, x: float) -> float:
    """Evaluate the fitted curve at scale x."""
    if x <= 0:
        raise ValueError(f"scale must be positive, got {x}")
    return fit.l_inf + (fit.x0 / x) ** fit.alpha
