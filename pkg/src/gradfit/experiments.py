"""Ensemble, scaling-sweep and probe-state comparison runs."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .chain import (
    ChainGeometry,
    DiagonalGenerator,
    FieldProfile,
    InvalidInputError,
    ProbeParams,
    gauge_fix,
    ghz_state,
    gradient_generator,
    linear_field,
    noon_state,
    w_state,
)
from .estimator import (
    GradientEstimate,
    TrialConfig,
    crb_from_information,
    crb_gradient,
    estimate_gradient_single_a,
    expected_counts,
    lslf_coefficients,
    lslf_fit,
    mle_fields_cascade,
    sample_counts,
    trial_seed,
)
from .fisher import fi_matrix_numeric, optimal_state_qfi_bound, qfi_pure_diagonal
from .measurement import FieldModel, cascade_basis, fourier_basis

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class EnsembleStats:
    repeats: int
    mean_g: float
    std_g: float
    bias: float
    crb: float
    fi_crb: float
    ratio_to_crb: float
    ratio_to_fi_crb: float
    target_g: float = float("nan")
    failures: int = 0
    valid: bool = True
    g_hats: tuple = field(default=(), repr=False)

    def row(self) -> dict:
        out = asdict(self)
        out.pop("g_hats")
        return out


@dataclass(frozen=True)
class ScalingReport:
    rows: tuple
    slope: float
    intercept: float
    slope_ci: float
    crb_slope: float

    def __post_init__(self):
        ns = [r["n"] for r in self.rows]
        if ns != sorted(ns):
            raise InvalidInputError("scaling rows must be sorted by N")


@dataclass(frozen=True)
class StateComparison:
    n: int
    qfi_w: float
    qfi_ghz: float
    qfi_noon: float | None
    lagrange_bound: float
    sigma_mean_field: float
    sigma_half_difference: float | None
    shots: int = 1

    def row(self) -> dict:
        return asdict(self)


def _one_trial(config: TrialConfig, index: int) -> GradientEstimate:
    if config.basis not in ("cascade", "b"):
        raise InvalidInputError("multi-parameter estimation is only defined for the cascade basis")
    field = gauge_fix(config.true_field)
    model = FieldModel(cascade_basis(config.geometry.n_atoms), config.params)
    rng = np.random.default_rng(trial_seed(config.seed, index))
    counts = sample_counts(model(field), config.shots, rng)
    return mle_fields_cascade(counts, config.geometry, config.params, config.prior_sign)


def _trial_batch(args):
    config, indices = args
    return [_one_trial(config, i) for i in indices]


def run_trials(config: TrialConfig, repeats: int, workers: int = 1) -> list[GradientEstimate]:
    """Per-trial estimates, in trial order regardless of ``workers``."""
    if workers <= 1:
        return [_one_trial(config, i) for i in range(repeats)]
    chunks = [list(c) for c in np.array_split(np.arange(repeats), workers) if len(c)]
    with ProcessPoolExecutor(workers) as pool:
        parts = pool.map(_trial_batch, [(config, c) for c in chunks])
    return [est for part in parts for est in part]


def fi_bound(config: TrialConfig) -> float:
    """Gradient bound from the numerically computed cascade Fisher matrix at the true field."""
    field = gauge_fix(config.true_field)
    model = FieldModel(cascade_basis(config.geometry.n_atoms), config.params)
    info = fi_matrix_numeric(model, field, params=config.params)
    if info.singular:
        return float("inf")
    return crb_from_information(info.entries, lslf_coefficients(config.geometry), config.shots)


def run_ensemble(config: TrialConfig, repeats: int, workers: int = 1) -> EnsembleStats:
    """Repeat sample -> MLE -> LSLF and compare the spread of the fitted gradient to the bounds."""
    if repeats < 2:
        raise InvalidInputError("need at least 2 repeats")
    return summarize_ensemble(config, run_trials(config, repeats, workers))


def summarize_ensemble(config: TrialConfig, estimates: Sequence[GradientEstimate]) -> EnsembleStats:
    """Ensemble statistics over the converged trials in ``estimates``."""
    repeats = len(estimates)
    if repeats < 2:
        raise InvalidInputError("need at least 2 repeats")
    ok = [e.g_hat for e in estimates if e.converged]
    failures = repeats - len(ok)
    valid = failures <= MAX_FAILURE_RATE * repeats and len(ok) >= 2
    if failures:
        log.warning("%d of %d trials did not converge", failures, repeats)
    g = np.array(ok) if len(ok) >= 2 else np.array([e.g_hat for e in estimates])
    target, _ = lslf_fit(config.geometry, gauge_fix(config.true_field))
    geo = config.geometry
    crb = crb_gradient(geo.n_atoms, config.params, geo.spacing, config.shots)
    fic = fi_bound(config)
    std = float(g.std(ddof=1))
    return EnsembleStats(
        repeats=repeats,
        mean_g=float(g.mean()),
        std_g=std,
        bias=float(g.mean() - target),
        crb=crb,
        fi_crb=fic,
        ratio_to_crb=std / crb,
        ratio_to_fi_crb=std / fic,
        target_g=target,
        failures=failures,
        valid=valid,
        g_hats=tuple(float(x) for x in g),
    )


def default_gradient_rule(params: ProbeParams, spacing: float = 1.0, phase_span: float = 0.4) -> Callable[[int], float]:
    """``G(N)`` with ``gamma t a G N = phase_span``, keeping every N in the same local regime."""
    return lambda n: phase_span / (n * params.gt * spacing)


def _loglog_fit(ns, ys):
    fit = stats.linregress(np.log(ns), np.log(ys))
    dof = len(ns) - 2
    half = float(stats.t.ppf(0.975, dof) * fit.stderr) if dof > 0 else float("inf")
    return float(fit.slope), float(fit.intercept), half


def sweep_scaling(
    n_list: Sequence[int],
    shots: int,
    gradient_rule: Callable[[int], float] | None = None,
    seed: int = 0,
    repeats: int = 200,
    params: ProbeParams = ProbeParams(),
    spacing: float = 1.0,
    analytic_only: bool = False,
    workers: int = 1,
) -> ScalingReport:
    """Empirical spread and CRB against N, with log-log slopes.

    Row ``i`` uses master seed stream ``(seed, i)`` for its ensemble.
    """
    ns = sorted(int(n) for n in n_list)
    if len(set(ns)) < 3:
        raise InvalidInputError("need at least 3 distinct N values")
    rule = gradient_rule or default_gradient_rule(params, spacing)
    rows = []
    for i, n in enumerate(ns):
        crb = crb_gradient(n, params, spacing, shots)
        row = {"n": n, "shots": shots, "gradient": rule(n), "std_g": float("nan"), "crb": crb}
        if not analytic_only:
            geo = ChainGeometry(n, spacing)
            row_seed = int(trial_seed(seed, i).generate_state(1, np.uint32)[0])
            config = TrialConfig(geo, params, linear_field(geo, 0.0, rule(n)), "cascade", shots, row_seed)
            ens = run_ensemble(config, repeats, workers)
            if not ens.valid:
                raise RuntimeError(f"ensemble at N={n} failed ({ens.failures} non-converged trials)")
            row.update(std_g=ens.std_g, fi_crb=ens.fi_crb, mean_g=ens.mean_g)
        rows.append(row)
    crb_slope, *_ = _loglog_fit(ns, [r["crb"] for r in rows])
    if analytic_only:
        slope, intercept, ci = _loglog_fit(ns, [r["crb"] for r in rows])
    else:
        slope, intercept, ci = _loglog_fit(ns, [r["std_g"] for r in rows])
    return ScalingReport(tuple(rows), slope, intercept, ci, crb_slope)


def compare_states(n: int, params: ProbeParams = ProbeParams(), spacing: float = 1.0, shots: int = 1) -> StateComparison:
    """QFI about ``G`` for W, GHZ and NOON probes, plus the per-parameter bounds GHZ and NOON really reach.

    GHZ picks up the phase of the mean field and NOON that of the half-chain
    field difference; their bounds on those quantities scale as ``1/N``.
    """
    if n < 2:
        raise InvalidInputError("need N >= 2")
    gen = gradient_generator(n, params, spacing)
    qfi_w = float(qfi_pure_diagonal(w_state(n), [gen]).entries[0, 0])
    qfi_ghz = float(qfi_pure_diagonal(ghz_state(n), [gen]).entries[0, 0])
    qfi_noon = float(qfi_pure_diagonal(noon_state(n), [gen]).entries[0, 0]) if n % 2 == 0 else None

    # B_j = mean for all j, and B_j = -/+ diff/2 on the left/right half
    mean_gen = DiagonalGenerator(np.full(n, params.gt))
    f_mean = float(qfi_pure_diagonal(ghz_state(n), [mean_gen]).entries[0, 0])
    sigma_mean = 1.0 / np.sqrt(shots * f_mean)
    if n % 2 == 0:
        half = np.where(np.arange(n) < n // 2, -0.5, 0.5) * params.gt
        f_diff = float(qfi_pure_diagonal(noon_state(n), [DiagonalGenerator(half)]).entries[0, 0])
        sigma_diff = 1.0 / np.sqrt(shots * f_diff)
    else:
        sigma_diff = None
    return StateComparison(n, qfi_w, qfi_ghz, qfi_noon, optimal_state_qfi_bound(gen), sigma_mean, sigma_diff, shots)


def sigma_mean_field_bound(n: int, params: ProbeParams, shots: int) -> float:
    return 1.0 / (2 * abs(params.gt) * np.sqrt(shots * n * n))


def sigma_half_difference_bound(n: int, params: ProbeParams, shots: int) -> float:
    return 1.0 / (abs(params.gt) * np.sqrt(shots * n * n))


@dataclass(frozen=True)
class NonlinearReport:
    field: tuple
    base_gradient: float
    quadratic_coeff: float
    projected_slope: float
    noiseless_fit: float
    single_a_fit: float
    single_a_bias: float
    ensemble: EnsembleStats | None = None

    def row(self) -> dict:
        out = asdict(self)
        out.pop("ensemble")
        out.pop("field")
        if self.ensemble is not None:
            out.update({f"ensemble_{k}": v for k, v in self.ensemble.row().items()})
        return out


def nonlinear_field_demo(
    geometry: ChainGeometry,
    params: ProbeParams,
    base_gradient: float,
    quadratic_coeff: float,
    shots: int | None = None,
    seed: int = 0,
    repeats: int = 0,
) -> NonlinearReport:
    """Fit ``B_j = G x_j + q x_j^2`` (``x_j = (j-1) a``) with the multi-parameter scheme.

    The fitted gradient estimates the least-squares slope of the true field,
    not ``G``. The single-parameter Fourier estimator, which assumes a
    strictly linear field, is run on the same field for contrast.
    """
    x = geometry.offsets
    field = FieldProfile(base_gradient * x + quadratic_coeff * x**2, gauge_fixed=True)
    n = geometry.n_atoms
    projected = float(lslf_coefficients(geometry) @ field.values)

    dist_b = FieldModel(cascade_basis(n), params)(field)
    noiseless = mle_fields_cascade(expected_counts(dist_b, shots or 1.0), geometry, params)

    dist_a = FieldModel(fourier_basis(n), params)(field)
    single_a = estimate_gradient_single_a(expected_counts(dist_a, shots or 1.0), n, params, geometry.spacing)

    ensemble = None
    if shots and repeats >= 2:
        config = TrialConfig(geometry, params, field, "cascade", int(shots), seed)
        ensemble = run_ensemble(config, repeats)
    return NonlinearReport(
        tuple(field.values), base_gradient, quadratic_coeff, projected,
        noiseless.g_hat, single_a.g_hat, single_a.g_hat - projected, ensemble,
    )
