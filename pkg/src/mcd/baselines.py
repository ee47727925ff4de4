"""Comparison methods: per-pixel tests with FDR control, and a circular scan.

Two alternatives to the multiscale detector, for benchmarking:

* single-scale testing — an exact one-sided p-value per pixel against a
  global null rate, with the rejection cutoff chosen by Storey's direct
  false-discovery-rate estimate;
* a circular scan statistic — the maximum likelihood-ratio over circles
  of varying center and radius, calibrated by Monte Carlo replication
  under the fitted null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.special import xlogy

from .errors import ConfigurationError, InternalInvariantError, InvalidInputError
from .grid import Grid, WindowSpec, build_sat, window_sum_field
from .stats import ModelSpec, estimate_null, robust_sigma


@dataclass(frozen=True)
class PValueField:
    """Per-pixel one-sided (upper tail) p-values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all((v >= 0.0) & (v <= 1.0)):
            raise InternalInvariantError("p-values must lie in [0, 1]")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FdrResult:
    """Storey FDR decision: mask = {p <= gamma}."""

    mask: np.ndarray
    gamma: float
    pi0_hat: float
    alpha: float

    @property
    def rejected_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ScanCluster:
    """One reported scan zone: a circle with its evidence."""

    center: tuple[int, int]
    radius: int
    mask: np.ndarray
    llr: float
    p_value: float

    @property
    def cell_count(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ScanResult:
    """Ranked disjoint clusters plus the significance-filtered mask."""

    clusters: tuple[ScanCluster, ...]
    mask: np.ndarray
    mc_reps: int
    cluster_alpha: float

    def __post_init__(self):
        llrs = [c.llr for c in self.clusters]
        if any(a < b for a, b in zip(llrs, llrs[1:])):
            raise InternalInvariantError("cluster LLRs must be nonincreasing")
        claimed = np.zeros_like(self.mask, dtype=bool)
        for c in self.clusters:
            if (claimed & c.mask).any():
                raise InternalInvariantError("reported clusters must be disjoint")
            claimed |= c.mask

    @property
    def max_llr(self) -> float:
        return self.clusters[0].llr if self.clusters else 0.0


def pixel_pvalues(
    grid: Grid,
    model: ModelSpec,
    null_param: float | None = None,
    approx: bool = False,
) -> PValueField:
    """One-sided upper-tail p-value of each pixel against a global null.

    Binomial: P(X >= y | N, p0) exactly; Poisson: P(X >= y | lam0)
    exactly; Normal: 1 - Phi((y - mu0)/sigma). `null_param` defaults to
    the same null estimate the statistic uses (median-based for
    Binomial/Normal, pooled mean for Poisson). `approx=True` switches
    the two count families to a continuity-corrected normal tail, for
    cross-checking against the exact computation.
    """
    if null_param is None:
        null_param = estimate_null(grid, model)
    null_param = float(null_param)
    y = grid.values
    if model.family == "binomial":
        if not 0.0 < null_param < 1.0:
            raise ConfigurationError(f"binomial null rate must be in (0,1), got {null_param}")
        n = model.trials.values
        if approx:
            mu = n * null_param
            sd = np.sqrt(n * null_param * (1.0 - null_param))
            p = sps.norm.sf((y - 0.5 - mu) / sd)
        else:
            p = sps.binom.sf(y - 1, n, null_param)
    elif model.family == "poisson":
        if not null_param > 0.0:
            raise ConfigurationError(f"poisson null rate must be positive, got {null_param}")
        if approx:
            p = sps.norm.sf((y - 0.5 - null_param) / np.sqrt(null_param))
        else:
            p = sps.poisson.sf(y - 1, null_param)
    else:
        if not np.isfinite(null_param):
            raise ConfigurationError(f"normal null mean must be finite, got {null_param}")
        sigma = model.sigma if model.sigma is not None else robust_sigma(grid)
        p = sps.norm.sf((y - null_param) / sigma)
    return PValueField(values=np.clip(p, 0.0, 1.0))


def storey_fdr(pvals: PValueField, alpha: float, lam: float = 0.5) -> FdrResult:
    """Rejection cutoff with estimated false discovery rate <= alpha.

    pi0 is estimated from the p-value mass above `lam` and clipped to
    (0, 1] (lower clip: the value corresponding to a single p-value
    above lam, so an empty upper tail does not zero the estimate). The
    cutoff gamma is the largest observed p-value whose estimated FDR
    pi0 * gamma * m / #{p <= gamma} stays within alpha; if none
    qualifies, gamma = 0 and nothing is rejected.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must be in (0,1), got {alpha}")
    if not 0.0 < lam < 1.0:
        raise ConfigurationError(f"lambda must be in (0,1), got {lam}")
    p = pvals.values
    m = p.size
    floor = 1.0 / ((1.0 - lam) * m)
    pi0 = (p > lam).sum() / ((1.0 - lam) * m)
    pi0 = float(min(1.0, max(pi0, floor)))
    flat = np.sort(p.ravel())
    ranks = np.searchsorted(flat, flat, side="right")  # #{p <= p_(i)} with ties
    ok = pi0 * flat * m / ranks <= alpha
    gamma = float(flat[ok][-1]) if ok.any() else 0.0
    return FdrResult(mask=p <= gamma if gamma > 0.0 else np.zeros_like(p, dtype=bool),
                     gamma=gamma, pi0_hat=pi0, alpha=float(alpha))


def _zone_llrs(family, y_in, e_in, y_tot, e_tot, sigma):
    """Vectorized one-sided log likelihood ratios for circular zones.

    `e_in`/`e_tot` is the zone/total exposure: trials for Binomial, cell
    count for Poisson/Normal. Zones with no rate excess score 0.
    """
    y_out = y_tot - y_in
    e_out = e_tot - e_in
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "binomial":
            p_in = y_in / e_in
            p_out = np.where(e_out > 0, y_out / np.maximum(e_out, 1), 0.0)
            p_all = y_tot / e_tot
            ll_alt = (xlogy(y_in, p_in) + xlogy(e_in - y_in, 1.0 - p_in)
                      + xlogy(y_out, p_out) + xlogy(e_out - y_out, 1.0 - p_out))
            ll_null = xlogy(y_tot, p_all) + xlogy(e_tot - y_tot, 1.0 - p_all)
            llr = np.where(p_in > p_out, ll_alt - ll_null, 0.0)
        elif family == "poisson":
            expected_in = y_tot * e_in / e_tot
            expected_out = y_tot - expected_in
            llr = xlogy(y_in, y_in / expected_in) + xlogy(y_out, y_out / expected_out)
            llr = np.where(y_in > expected_in, llr, 0.0)
        else:
            mean_in = y_in / e_in
            mean_out = np.where(e_out > 0, y_out / np.maximum(e_out, 1), 0.0)
            mean_all = y_tot / e_tot
            bss = e_in * (mean_in - mean_all) ** 2 + e_out * (mean_out - mean_all) ** 2
            llr = np.where(mean_in > mean_all, bss / (2.0 * sigma**2), 0.0)
    return np.where(np.isfinite(llr), llr, 0.0)


def _max_llr(family, values, exposures_by_radius, totals, sigma, allowed):
    """Maximum zone LLR of one data field across all centers and radii."""
    sat = build_sat(Grid(values))
    y_tot, e_tot = totals
    best = 0.0
    for window, e_in in exposures_by_radius:
        y_in, _ = window_sum_field(sat, window)
        llr = _zone_llrs(family, y_in.astype(np.float64), e_in, y_tot, e_tot, sigma)
        llr = np.where(allowed[window.radius], llr, 0.0)
        m = float(llr.max())
        if m > best:
            best = m
    return best


def circular_scan(
    grid: Grid,
    model: ModelSpec,
    radii=None,
    mc_reps: int = 99,
    cluster_alpha: float = 0.05,
    seed: int = 0,
) -> ScanResult:
    """Circle-zone scan with Monte Carlo calibration of the max LLR.

    Evaluates every grid cell as a center with every radius in `radii`
    (circles clipped at the grid edge, zones capped at half the total
    exposure), ranks zones by likelihood ratio, and assigns p-values by
    regenerating the grid `mc_reps` times under the fitted null:
    p = (1 + #{replicate max >= zone LLR}) / (mc_reps + 1). Clusters are
    reported greedily in LLR order, skipping zones that overlap an
    already-reported cluster, stopping once significance is lost; the
    mask is the union of clusters with p <= cluster_alpha.
    """
    if mc_reps < 19:
        raise ConfigurationError(f"mc_reps must be >= 19 for usable p-values, got {mc_reps}")
    if radii is None:
        radii = range(1, 21)
    radii = sorted({int(r) for r in radii})
    if not radii:
        raise ConfigurationError("radii must be nonempty")
    if radii[0] < 1:
        raise ConfigurationError(f"radii must be >= 1, got {radii[0]}")
    if not 0.0 < cluster_alpha < 1.0:
        raise ConfigurationError(f"cluster_alpha must be in (0,1), got {cluster_alpha}")

    y = grid.values.astype(np.float64)
    rows, cols = grid.shape
    family = model.family
    sigma = None
    if family == "binomial":
        exposure = model.trials.values.astype(np.float64)
        y_tot = float(y.sum())
        e_tot = float(exposure.sum())
        p_pooled = y_tot / e_tot
    elif family == "poisson":
        exposure = np.ones((rows, cols))
        y_tot = float(y.sum())
        e_tot = float(rows * cols)
        lam0 = y_tot / e_tot
    else:
        exposure = np.ones((rows, cols))
        y_tot = float(y.sum())
        e_tot = float(rows * cols)
        mu0 = y_tot / e_tot
        sigma = model.sigma if model.sigma is not None else robust_sigma(grid)

    # per-radius zone exposures and the half-exposure eligibility cap;
    # these depend only on the trials map, not the replicate data
    exposure_sat = build_sat(Grid(exposure))
    exposures_by_radius = []
    allowed = {}
    for r in radii:
        window = WindowSpec("circle", r)
        e_in, _ = window_sum_field(exposure_sat, window)
        e_in = e_in.astype(np.float64)
        exposures_by_radius.append((window, e_in))
        allowed[r] = e_in <= 0.5 * e_tot
    if not any(a.any() for a in allowed.values()):
        raise ConfigurationError("every zone exceeds half the total exposure; reduce radii")

    # observed zone LLRs, kept per radius for the greedy cluster pass
    obs_sat = build_sat(Grid(y))
    obs_llrs = np.zeros((len(radii), rows, cols))
    for k, (window, e_in) in enumerate(exposures_by_radius):
        y_in, _ = window_sum_field(obs_sat, window)
        llr = _zone_llrs(family, y_in.astype(np.float64), e_in, y_tot, e_tot, sigma)
        obs_llrs[k] = np.where(allowed[window.radius], llr, 0.0)

    # Monte Carlo distribution of the max LLR under the fitted null;
    # each replicate gets its own deterministic stream
    totals = (y_tot, e_tot)
    rep_max = np.empty(mc_reps)
    for rep in range(mc_reps):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        if family == "binomial":
            sim = rng.binomial(model.trials.values, p_pooled).astype(np.float64)
            sim_tot = (float(sim.sum()), e_tot)
        elif family == "poisson":
            sim = rng.poisson(lam0, size=(rows, cols)).astype(np.float64)
            sim_tot = (float(sim.sum()), e_tot)
        else:
            sim = rng.normal(mu0, sigma, size=(rows, cols))
            sim_tot = (float(sim.sum()), e_tot)
        rep_max[rep] = _max_llr(family, sim, exposures_by_radius, sim_tot, sigma, allowed)

    def zone_pvalue(llr: float) -> float:
        return float((1 + (rep_max >= llr).sum()) / (mc_reps + 1))

    def zone_mask(center, radius) -> np.ndarray:
        mask = np.zeros((rows, cols), dtype=bool)
        for di, hw in WindowSpec("circle", radius).row_halfwidths():
            i = center[0] + di
            if 0 <= i < rows:
                mask[i, max(0, center[1] - hw) : center[1] + hw + 1] = True
        return mask

    order = np.argsort(obs_llrs.ravel())[::-1]
    claimed = np.zeros((rows, cols), dtype=bool)
    clusters: list[ScanCluster] = []
    for flat in order:
        k, i, j = np.unravel_index(flat, obs_llrs.shape)
        llr = float(obs_llrs[k, i, j])
        if llr <= 0.0:
            break
        mask = zone_mask((int(i), int(j)), radii[k])
        if (claimed & mask).any():
            continue
        p = zone_pvalue(llr)
        if clusters and p > cluster_alpha:
            break
        clusters.append(ScanCluster(center=(int(i), int(j)), radius=radii[k],
                                    mask=mask, llr=llr, p_value=p))
        claimed |= mask
        if p > cluster_alpha:
            break
    detection = np.zeros((rows, cols), dtype=bool)
    for c in clusters:
        if c.p_value <= cluster_alpha:
            detection |= c.mask
    return ScanResult(clusters=tuple(clusters), mask=detection,
                      mc_reps=mc_reps, cluster_alpha=float(cluster_alpha))
