"""Per-pixel multi-scale likelihood-ratio statistic T(s) = -2 log Lambda.

Three observation models are supported on the same machinery:

* Binomial counts with a per-cell trials map; cell-level proportions are
  shrunk as (Y+1)/(N+2) before any median is taken.
* Poisson counts with unit exposure per cell.
* Normal observations with known (or robustly estimated) sigma.

The null parameter is the grid-wide median; alternative estimates per
scale come from the annulus D_r \\ D_{r-1} of the window ladder
(median of adjusted proportions for Binomial, pooled mean otherwise),
clipped below by the null estimate so the alternative can only be an
elevation. Scale weights are increment cardinalities, so a radius-0
first scale contributes with weight 1. The chi-square(M) reference law
for T is recorded as metadata only; thresholding happens elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateDataError,
    InternalInvariantError,
    InvalidInputError,
)
from .grid import Grid, ScaleLadder, aggregate_scales, validate_trials

FAMILIES = ("binomial", "poisson", "normal")

# MAD-to-sigma factor for the Normal family (1/Phi^{-1}(3/4))
MAD_SCALE = 1.4826


@dataclass(frozen=True)
class ModelSpec:
    """Observation model: family plus its family-specific parameters."""

    family: str
    trials: Grid | None = None
    sigma: float | None = None

    def __post_init__(self):
        family = self.family.lower()
        object.__setattr__(self, "family", family)
        if family not in FAMILIES:
            raise ConfigurationError(f"unknown model family {self.family!r}")
        if (family == "binomial") != (self.trials is not None):
            raise ConfigurationError("trials map is required for Binomial and forbidden otherwise")
        if self.sigma is not None:
            if family != "normal":
                raise ConfigurationError("sigma only applies to the Normal family")
            if not (self.sigma > 0):
                raise ConfigurationError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class EstimateSet:
    """Null and per-scale parameter estimates at one pixel."""

    null_estimate: float
    scale_estimates: np.ndarray
    sigma_used: float | None = None

    def __post_init__(self):
        est = np.asarray(self.scale_estimates, dtype=float)
        object.__setattr__(self, "scale_estimates", est)
        if not np.all(np.isfinite(est)) or not np.isfinite(self.null_estimate):
            raise InternalInvariantError("estimates must be finite")
        if np.any(est < self.null_estimate):
            raise InternalInvariantError("scale estimates must be clipped at the null estimate")


@dataclass(frozen=True)
class StatField:
    """Grid-shaped field of T(s) values for a fitted model and ladder."""

    values: np.ndarray
    model: ModelSpec
    ladder: ScaleLadder

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise InternalInvariantError("statistic field contains non-finite entries")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def chi2_df(self) -> int:
        """Degrees of freedom of the nominal chi-square reference (unused for thresholding)."""
        return self.ladder.scale_count


def adjusted_proportions(counts: Grid, trials: Grid) -> np.ndarray:
    """Shrunk per-cell proportions (Y+1)/(N+2), always strictly inside (0, 1)."""
    validate_trials(counts, trials)
    return (counts.values + 1.0) / (trials.values + 2.0)


def robust_sigma(values: np.ndarray) -> float:
    """MAD-based scale estimate, resistant to a localized signal region."""
    v = np.asarray(values, dtype=float)
    return MAD_SCALE * float(np.median(np.abs(v - np.median(v))))


def estimate_null(grid: Grid, model: ModelSpec) -> float:
    """Grid-wide null parameter: the median cell value (adjusted for Binomial)."""
    if model.family == "binomial":
        return float(np.median(adjusted_proportions(grid, model.trials)))
    return float(np.median(grid.values))


def estimate_scales(
    grid: Grid,
    model: ModelSpec,
    ladder: ScaleLadder,
    null_estimate: float,
    pixel: tuple[int, int],
) -> np.ndarray:
    """Per-scale alternative estimates at one pixel, clipped below by the null.

    Reference implementation by direct annulus enumeration; the field
    routines below must agree with it exactly.
    """
    i, j = pixel
    if not (0 <= i < grid.rows and 0 <= j < grid.cols):
        raise InvalidInputError(f"pixel {pixel} outside {grid.rows}x{grid.cols} grid")
    if model.family == "binomial":
        cellvals = adjusted_proportions(grid, model.trials)
    else:
        cellvals = np.asarray(grid.values, dtype=float)
    out = np.empty(ladder.scale_count)
    for r in range(ladder.scale_count):
        vals = [
            cellvals[i + di, j + dj]
            for di, dj in ladder.annulus_offsets(r)
            if 0 <= i + di < grid.rows and 0 <= j + dj < grid.cols
        ]
        if not vals:
            raise InternalInvariantError(f"annulus {r} empty at pixel {pixel} after clipping")
        center = np.median(vals) if model.family == "binomial" else np.mean(vals)
        out[r] = max(float(center), null_estimate)
    return out


def estimate_set(grid: Grid, model: ModelSpec, ladder: ScaleLadder, pixel) -> EstimateSet:
    null = estimate_null(grid, model)
    scales = estimate_scales(grid, model, ladder, null, pixel)
    sigma = None
    if model.family == "normal":
        sigma = model.sigma if model.sigma is not None else robust_sigma(grid.values)
    return EstimateSet(null_estimate=null, scale_estimates=scales, sigma_used=sigma)


def _shifted_stack(field: np.ndarray, offsets) -> np.ndarray:
    """Stack of copies of `field` shifted by each offset, NaN outside the grid.

    stack[k, i, j] = field[i + di_k, j + dj_k] where defined.
    """
    rows, cols = field.shape
    stack = np.full((len(offsets), rows, cols), np.nan)
    for k, (di, dj) in enumerate(offsets):
        i0, i1 = max(0, -di), min(rows, rows - di)
        j0, j1 = max(0, -dj), min(cols, cols - dj)
        if i0 < i1 and j0 < j1:
            stack[k, i0:i1, j0:j1] = field[i0 + di : i1 + di, j0 + dj : j1 + dj]
    return stack


def _annulus_median_fields(cellvals: np.ndarray, ladder: ScaleLadder) -> np.ndarray:
    """Clipped-annulus median of `cellvals` around every pixel, per scale."""
    fields = np.empty((ladder.scale_count,) + cellvals.shape)
    for r in range(ladder.scale_count):
        stack = _shifted_stack(cellvals, ladder.annulus_offsets(r))
        if np.any(np.isnan(stack).all(axis=0)):
            raise InternalInvariantError(f"annulus {r} clips to empty somewhere on the grid")
        fields[r] = np.nanmedian(stack, axis=0)
    return fields


def _increments(stacked: np.ndarray) -> np.ndarray:
    """Differences along the scale axis with an implicit zero at scale 0."""
    out = stacked.astype(np.float64)
    out[1:] -= stacked[:-1]
    return out


def stat_binomial(grid: Grid, trials: Grid, ladder: ScaleLadder) -> StatField:
    """T(s) under the Binomial model."""
    model = ModelSpec("binomial", trials=trials)
    padj = adjusted_proportions(grid, trials)
    p0 = float(np.median(padj))
    x, m, n = aggregate_scales(grid, ladder, trials=trials)
    if np.any(m[0] == 0) or np.any(np.diff(m, axis=0) == 0):
        raise InternalInvariantError("a ladder annulus clips to empty on this grid")
    p_r = np.maximum(_annulus_median_fields(padj, ladder), p0)
    dx = _increments(x)
    dn = _increments(n)
    # medians of (Y+1)/(N+2) lie strictly inside (0,1), so all logs are finite
    terms = dx * (np.log(p0) - np.log(p_r)) + (dn - dx) * (np.log1p(-p0) - np.log1p(-p_r))
    return StatField(values=-2.0 * terms.sum(axis=0), model=model, ladder=ladder)


def stat_poisson(grid: Grid, ladder: ScaleLadder, count_offset: bool = False) -> StatField:
    """T(s) under the Poisson model.

    `count_offset` adds 0.5 to every cell before estimation, a documented
    escape hatch for grids whose median count is 0 (off by default).
    """
    if not grid.is_integer() or np.any(grid.values < 0):
        raise InvalidInputError("Poisson model needs nonnegative integer counts")
    y = grid.values + 0.5 if count_offset else np.asarray(grid.values, dtype=float)
    lam0 = float(np.median(y))
    if lam0 == 0.0:
        raise DegenerateDataError(
            "null rate estimate is 0 (median count is 0); pass count_offset=True "
            "to add the +0.5 continuity offset"
        )
    x, m = aggregate_scales(Grid(y) if count_offset else grid, ladder)
    if np.any(m[0] == 0) or np.any(np.diff(m, axis=0) == 0):
        raise InternalInvariantError("a ladder annulus clips to empty on this grid")
    dx = _increments(x)
    dm = _increments(m)
    lam_r = np.maximum(dx / dm, lam0)
    terms = dx * (np.log(lam0) - np.log(lam_r)) + dm * (lam_r - lam0)
    return StatField(values=-2.0 * terms.sum(axis=0), model=ModelSpec("poisson"), ladder=ladder)


def stat_normal(grid: Grid, ladder: ScaleLadder, sigma: float | None = None) -> StatField:
    """T(s) under the Normal model with known or MAD-estimated sigma."""
    model = ModelSpec("normal", sigma=sigma)
    y = np.asarray(grid.values, dtype=float)
    mu0 = float(np.median(y))
    sig = sigma if sigma is not None else robust_sigma(y)
    if sig == 0.0:
        raise DegenerateDataError("robust sigma estimate is 0; supply sigma explicitly")
    x, m = aggregate_scales(grid, ladder)
    if np.any(m[0] == 0) or np.any(np.diff(m, axis=0) == 0):
        raise InternalInvariantError("a ladder annulus clips to empty on this grid")
    dx = _increments(x)
    dm = _increments(m)
    mu_r = np.maximum(dx / dm, mu0)
    terms = 2.0 * dx * (mu_r - mu0) + dm * (mu0 * mu0 - mu_r * mu_r)
    return StatField(values=terms.sum(axis=0) / (sig * sig), model=model, ladder=ladder)


def stat_field(
    grid: Grid,
    model: ModelSpec,
    ladder: ScaleLadder,
    count_offset: bool = False,
) -> StatField:
    """Dispatch to the family-specific statistic."""
    if model.family == "binomial":
        return stat_binomial(grid, model.trials, ladder)
    if model.family == "poisson":
        return stat_poisson(grid, ladder, count_offset=count_offset)
    return stat_normal(grid, ladder, sigma=model.sigma)
