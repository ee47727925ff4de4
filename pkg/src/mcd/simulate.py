"""Seeded simulation experiments, metrics, ROC curves, and theorem checks.

Every output is a pure function of the configuration and seed: replicate
r draws from a generator keyed by (seed, r), and summaries are ordered
reductions over replicates, so execution order cannot change results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import circular_scan, pixel_pvalues, storey_fdr
from .errors import (
    ConfigurationError,
    InvalidInputError,
    NoSignalError,
    UndefinedMetricError,
)
from .grid import Grid, ScaleLadder, WindowSpec
from .shapes import boundary_partition, boundary_type_counts, gen_shape
from .stats import FAMILIES, ModelSpec, stat_field
from .threshold import neighborhood_variability, run_detection

METHODS = ("mcd", "fdr", "scan")


@dataclass(frozen=True)
class SimConfig:
    """One simulation setting: grid, model, signal, methods, seed."""

    dims: tuple[int, int] = (100, 100)
    family: str = "binomial"
    shape: str = "lshape"
    null_param: float = 0.2
    alt_param: float = 0.25
    trials: int = 100
    sigma: float = 1.0
    replicates: int = 100
    seed: int = 0
    methods: tuple[str, ...] = ("mcd",)
    ladder: ScaleLadder | None = None
    threshold_count: int = 100
    min_belt_count: int | None = None
    fdr_alpha: float = 0.6
    fdr_lambda: float = 0.5
    scan_radii: tuple[int, ...] = tuple(range(1, 21))
    scan_reps: int = 99
    cluster_alpha: float = 0.05
    shape_mask: np.ndarray | None = None
    disc_radius: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if not self.alt_param > self.null_param:
            raise ConfigurationError(
                f"alternative parameter must exceed the null ({self.alt_param} <= {self.null_param})"
            )
        if self.family == "binomial" and not (0.0 < self.null_param < self.alt_param < 1.0):
            raise ConfigurationError("binomial rates must satisfy 0 < p0 < p1 < 1")
        if self.family == "binomial" and self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.replicates < 1:
            raise ConfigurationError(f"replicates must be >= 1, got {self.replicates}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}; expected subset of {METHODS}")

    def truth_mask(self) -> np.ndarray:
        return gen_shape(self.shape, self.dims, mask=self.shape_mask, radius=self.disc_radius)

    def model(self) -> ModelSpec:
        if self.family == "binomial":
            return ModelSpec("binomial", trials=Grid(np.full(self.dims, self.trials)))
        if self.family == "normal":
            return ModelSpec("normal", sigma=self.sigma)
        return ModelSpec("poisson")


@dataclass(frozen=True)
class Metrics:
    sensitivity: float
    specificity: float

    def __post_init__(self):
        for v in (self.sensitivity, self.specificity):
            if not 0.0 <= v <= 1.0:
                raise UndefinedMetricError(f"metric outside [0,1]: {v}")


@dataclass(frozen=True)
class MethodSummary:
    """Replicate-aggregated performance of one method."""

    sens_mean: float
    sens_std: float
    spec_mean: float
    spec_std: float
    prob_map: np.ndarray
    sensitivities: np.ndarray
    specificities: np.ndarray


@dataclass(frozen=True)
class ExperimentSummary:
    config: SimConfig
    truth: np.ndarray
    methods: dict[str, MethodSummary]


@dataclass(frozen=True)
class TheoremReport:
    """Monte Carlo record of one theorem check."""

    n_noise: int
    n_boundary: int
    n_signal: int
    replicates: int
    successes: np.ndarray  # per-replicate indicator
    ave_stat: tuple[float, float, float] | None = None  # (noise, boundary, signal)
    ave_var_boundary: float | None = None
    ave_var_rest: float | None = None
    vtilde_boundary: float | None = None
    vtilde_expected: float | None = None

    def __post_init__(self):
        if self.n_noise + self.n_boundary + self.n_signal <= 0:
            raise ConfigurationError("empty pixel partition")

    @property
    def p_boundary(self) -> float:
        total = self.n_noise + self.n_boundary + self.n_signal
        return self.n_boundary / total

    @property
    def success_rate(self) -> float:
        return float(self.successes.mean())


def simulate_grid(config: SimConfig, replicate_index: int):
    """Data grid and truth mask for one replicate; keyed by (seed, index)."""
    truth = config.truth_mask()
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, replicate_index)))
    if config.family == "binomial":
        probs = np.where(truth, config.alt_param, config.null_param)
        values = rng.binomial(config.trials, probs)
    elif config.family == "poisson":
        lam = np.where(truth, config.alt_param, config.null_param)
        values = rng.poisson(lam)
    else:
        mean = np.where(truth, config.alt_param, config.null_param)
        values = rng.normal(mean, config.sigma)
    return Grid(values), truth


def sensitivity_specificity(detected: np.ndarray, truth: np.ndarray) -> Metrics:
    """Fraction of signal cells found and noise cells left alone."""
    detected = np.asarray(detected, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if detected.shape != truth.shape:
        raise InvalidInputError(f"shape mismatch: {detected.shape} vs {truth.shape}")
    n_signal = int(truth.sum())
    n_noise = truth.size - n_signal
    if n_signal == 0 or n_noise == 0:
        raise UndefinedMetricError("truth mask must contain both signal and noise cells")
    sens = float((detected & truth).sum() / n_signal)
    spec = float((~detected & ~truth).sum() / n_noise)
    return Metrics(sensitivity=sens, specificity=spec)


def _detect_one(config: SimConfig, method: str, grid: Grid, model: ModelSpec,
                replicate_index: int) -> np.ndarray:
    if method == "mcd":
        try:
            return run_detection(
                grid, model,
                ladder=config.ladder,
                threshold_count=config.threshold_count,
                min_belt_count=config.min_belt_count,
            ).mask
        except NoSignalError:
            return np.zeros(config.dims, dtype=bool)
    if method == "fdr":
        pvals = pixel_pvalues(grid, model)
        return storey_fdr(pvals, alpha=config.fdr_alpha, lam=config.fdr_lambda).mask
    scan_seed = int(np.random.SeedSequence((config.seed, replicate_index)).generate_state(1)[0])
    return circular_scan(
        grid, model,
        radii=config.scan_radii,
        mc_reps=config.scan_reps,
        cluster_alpha=config.cluster_alpha,
        seed=scan_seed,
    ).mask


def run_experiment(config: SimConfig) -> ExperimentSummary:
    """Replicated detection with per-method metric summaries and maps."""
    if config.replicates < 2:
        raise ConfigurationError("run_experiment needs at least 2 replicates")
    truth = config.truth_mask()
    model = config.model()
    sens = {m: [] for m in config.methods}
    spec = {m: [] for m in config.methods}
    counts = {m: np.zeros(config.dims, dtype=np.int64) for m in config.methods}
    for rep in range(config.replicates):
        grid, _ = simulate_grid(config, rep)
        for method in config.methods:
            try:
                mask = _detect_one(config, method, grid, model, rep)
            except Exception as exc:
                raise type(exc)(f"replicate {rep}, method {method}: {exc}") from exc
            metrics = sensitivity_specificity(mask, truth)
            sens[method].append(metrics.sensitivity)
            spec[method].append(metrics.specificity)
            counts[method] += mask
    summaries = {}
    for method in config.methods:
        s = np.asarray(sens[method])
        p = np.asarray(spec[method])
        summaries[method] = MethodSummary(
            sens_mean=float(s.mean()), sens_std=float(s.std(ddof=1)),
            spec_mean=float(p.mean()), spec_std=float(p.std(ddof=1)),
            prob_map=counts[method] / config.replicates,
            sensitivities=s, specificities=p,
        )
    return ExperimentSummary(config=config, truth=truth, methods=summaries)


def roc_curve(stat, truth: np.ndarray, points: int = 101) -> np.ndarray:
    """(1 - specificity, sensitivity) pairs over a threshold sweep.

    Thresholds run over [min T, max T]; the fixed endpoints (0,0) and
    (1,1) are appended so the curve spans the unit square. Rows are
    sorted by false-positive rate.
    """
    if points < 2:
        raise InvalidInputError(f"points must be >= 2, got {points}")
    t_vals = np.asarray(stat.values if hasattr(stat, "values") else stat, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    n_signal = int(truth.sum())
    n_noise = truth.size - n_signal
    if n_signal == 0 or n_noise == 0:
        raise UndefinedMetricError("truth mask must contain both signal and noise cells")
    thresholds = np.linspace(t_vals.min(), t_vals.max(), points)
    pairs = [(0.0, 0.0), (1.0, 1.0)]
    for t in thresholds:
        mask = t_vals > t
        pairs.append((float((mask & ~truth).sum() / n_noise), float((mask & truth).sum() / n_signal)))
    pts = np.array(sorted(pairs))
    return pts


def auc(points: np.ndarray) -> float:
    """Trapezoidal area under an ROC point list."""
    pts = np.asarray(points, dtype=float)
    return float(np.trapezoid(pts[:, 1], pts[:, 0]))


def _theorem_setting(delta, dims, shape, mask, radius):
    # delta = 0 is allowed: the checks then measure the chance-level
    # baseline (the theorems' hypotheses exclude it, the machinery does not)
    if delta < 0:
        raise ConfigurationError(f"delta must be nonnegative, got {delta}")
    truth = gen_shape(shape, dims, mask=mask, radius=radius)
    noise_in, boundary, signal_in = boundary_partition(truth)
    if not boundary.any() or not noise_in.any() or not signal_in.any():
        raise ConfigurationError("degenerate partition: need noise, boundary, and signal cells")
    ladder = ScaleLadder((WindowSpec("square", 0), WindowSpec("circle", 1)))
    return truth, noise_in, boundary, signal_in, ladder


def theorem1_check(delta: float, dims=(100, 100), shape: str = "disc", seed: int = 0,
                   reps: int = 200, mask=None, radius=None) -> TheoremReport:
    """Ordering of class-average statistics: noise < boundary < signal.

    Normal data, unit noise, the cross-shaped two-scale ladder. Reports
    the fraction of replicates where the strict ordering holds.
    """
    truth, noise_in, boundary, signal_in, ladder = _theorem_setting(delta, dims, shape, mask, radius)
    model = ModelSpec("normal", sigma=1.0)
    successes = np.zeros(reps, dtype=bool)
    aves = np.zeros((reps, 3))
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        values = rng.normal(truth * delta, 1.0)
        t = stat_field(Grid(values), model, ladder).values
        aves[rep] = (t[noise_in].mean(), t[boundary].mean(), t[signal_in].mean())
        successes[rep] = aves[rep, 0] < aves[rep, 1] < aves[rep, 2]
    mean_aves = aves.mean(axis=0)
    return TheoremReport(
        n_noise=int(noise_in.sum()), n_boundary=int(boundary.sum()), n_signal=int(signal_in.sum()),
        replicates=reps, successes=successes,
        ave_stat=(float(mean_aves[0]), float(mean_aves[1]), float(mean_aves[2])),
    )


def theorem2_check(delta: float, dims=(100, 100), shape: str = "disc", seed: int = 0,
                   reps: int = 200, mask=None, radius=None) -> TheoremReport:
    """Boundary variability dominance, plus the noncentrality identity.

    Success indicator per replicate: mean V over boundary cells exceeds
    mean V elsewhere. Also accumulates the empirical mean of the scaled
    variability Vtilde = 4V over boundary cells and its closed-form
    expectation 4 + mean_k(k delta^2 - k^2 delta^2 / 5) over the shape's
    boundary-type mix.
    """
    truth, noise_in, boundary, signal_in, _ = _theorem_setting(delta, dims, shape, mask, radius)
    model = ModelSpec("normal", sigma=1.0)
    successes = np.zeros(reps, dtype=bool)
    ave_b = np.zeros(reps)
    ave_rest = np.zeros(reps)
    vtilde = np.zeros(reps)
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        values = rng.normal(truth * delta, 1.0)
        v = neighborhood_variability(Grid(values), model).values
        ave_b[rep] = v[boundary].mean()
        ave_rest[rep] = v[~boundary].mean()
        vtilde[rep] = 4.0 * ave_b[rep]
        successes[rep] = ave_b[rep] > ave_rest[rep]
    type_counts = boundary_type_counts(truth)
    n_b = sum(type_counts.values())
    c_bar = sum(cnt * (k * delta**2 - k**2 * delta**2 / 5.0) for k, cnt in type_counts.items()) / n_b
    return TheoremReport(
        n_noise=int(noise_in.sum()), n_boundary=int(boundary.sum()), n_signal=int(signal_in.sum()),
        replicates=reps, successes=successes,
        ave_var_boundary=float(ave_b.mean()), ave_var_rest=float(ave_rest.mean()),
        vtilde_boundary=float(vtilde.mean()), vtilde_expected=float(4.0 + c_bar),
    )
