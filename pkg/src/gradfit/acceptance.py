"""Exit criteria for the package, runnable from pytest or ``gradfit verify``.

Each ``criterion_*`` function returns a list of :class:`Check` results; a
criterion passes when all of its checks do.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .chain import ChainGeometry, FieldProfile, ProbeParams, evolve, field_generator, ghz_state, gradient_generator, linear_field, noon_state, w_state
from .estimator import (
    TrialConfig,
    crb_from_information,
    crb_gradient,
    expected_counts,
    lslf_coefficients,
    lslf_fit,
    mle_fields_cascade,
)
from .experiments import (
    compare_states,
    nonlinear_field_demo,
    run_ensemble,
    sigma_half_difference_bound,
    sigma_mean_field_bound,
    sweep_scaling,
)
from .fisher import (
    fi_matrix_a_linear,
    fi_matrix_numeric,
    fi_single_numeric,
    optimal_state_qfi_bound,
    qfi_matrix_w,
    qfi_matrix_w_inverse,
    qfi_pure_diagonal,
    qfi_single_w,
    variance_max_brute_force,
)
from .measurement import (
    FieldModel,
    cascade_basis,
    fourier_basis,
    outcome_distribution,
    prob_a_linear,
    prob_b_linear,
)

UNIT = ProbeParams()


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self, criterion: int) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] C{criterion} {self.name}: {self.detail}"


def _within(value, lo, hi):
    return lo <= value <= hi


def criterion_1() -> list[Check]:
    """General-formula QFI on the W state against the closed form and its inverse."""
    t0 = time.perf_counter()
    worst_rel, worst_inv = 0.0, 0.0
    params = UNIT
    for n in range(2, 41):
        gens = [field_generator(n, m, params) for m in range(2, n + 1)]
        got = qfi_pure_diagonal(w_state(n), gens).entries
        want = qfi_matrix_w(n, params).entries
        worst_rel = max(worst_rel, float(np.max(np.abs(got - want) / np.abs(want))))
        prod = want @ qfi_matrix_w_inverse(n, params)
        worst_inv = max(worst_inv, float(np.abs(prod - np.eye(n - 1)).max()))
    elapsed = time.perf_counter() - t0
    return [
        Check("QFI entrywise", worst_rel <= 1e-10, f"max rel err {worst_rel:.2e} (tol 1e-10), N=2..40"),
        Check("QFI x inverse = I", worst_inv <= 1e-12, f"max abs err {worst_inv:.2e} (tol 1e-12)"),
        Check("runtime", elapsed < 1.0, f"{elapsed:.3f} s (limit 1 s)"),
    ]


def criterion_2() -> list[Check]:
    """Cascade-basis numeric FI near zero field reproduces the W-state QFI."""
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(3, 13):
        field = linear_field(ChainGeometry(n), 0.0, 1e-3)
        f = fi_matrix_numeric(FieldModel(cascade_basis(n), UNIT), field, params=UNIT).entries
        q = qfi_matrix_w(n, UNIT).entries
        worst = max(worst, float(np.max(np.abs(f - q) / np.abs(q))))
    elapsed = time.perf_counter() - t0
    return [
        Check("FI^b = QFI", worst <= 1e-2, f"max rel err {worst:.2e} (tol 1e-2), N=3..12"),
        Check("runtime", elapsed < 10.0, f"{elapsed:.3f} s (limit 10 s)"),
    ]


def criterion_3() -> list[Check]:
    """Fourier-basis numeric FI on a linear field is the singular closed form."""
    worst, worst_ratio = 0.0, 0.0
    for n in range(3, 13):
        for g in (0.1, 0.3, 0.7):
            field = linear_field(ChainGeometry(n), 0.0, g)
            f = fi_matrix_numeric(FieldModel(fourier_basis(n), UNIT), field, params=UNIT)
            worst = max(worst, float(np.abs(f.entries - fi_matrix_a_linear(n, UNIT).entries).max()))
            worst_ratio = max(worst_ratio, f.condition_ratio)
    return [
        Check("FI^a closed form", worst <= 1e-6, f"max abs err {worst:.2e} (tol 1e-6), N=3..12, G in 0.1/0.3/0.7"),
        Check("FI^a singular", worst_ratio < 1e-8, f"max sv ratio {worst_ratio:.2e} (< 1e-8)"),
    ]


def criterion_4() -> list[Check]:
    """Scalar FI of both linear-field distributions equals the single-parameter QFI."""
    worst_a = 0.0
    for n in range(2, 101):
        q = qfi_single_w(n, UNIT, 1.0)
        for g in (0.1, 0.3, 0.7):
            # peak widths shrink like 1/N; the step follows
            f = fi_single_numeric(lambda x: prob_a_linear(n, UNIT, 1.0, x), g, step=1e-4 / n)
            worst_a = max(worst_a, abs(f / q - 1))
    worst_b = 0.0
    for n in range(2, 101):
        f = fi_single_numeric(lambda x: prob_b_linear(n, UNIT, 1.0, x), 1e-3)
        worst_b = max(worst_b, abs(f / qfi_single_w(n, UNIT, 1.0) - 1))
    return [
        Check("F^a = QFI", worst_a <= 1e-6, f"max rel err {worst_a:.2e} (tol 1e-6), N=2..100"),
        Check("F^b ~ QFI", worst_b <= 1e-2, f"max rel err {worst_b:.2e} (tol 1e-2), N=2..100, theta=1e-3"),
    ]


def criterion_5() -> list[Check]:
    """Closed-form gradient bound against the LSLF contraction of the inverse QFI."""
    worst = 0.0
    for n in range(2, 51):
        c = lslf_coefficients(ChainGeometry(n))
        form = np.sqrt(c[1:] @ (qfi_matrix_w_inverse(n, UNIT) / 1) @ c[1:])
        worst = max(worst, abs(form / crb_gradient(n, UNIT, 1.0, 1) - 1))
    value = crb_gradient(3, UNIT, 1.0, 1)
    return [
        Check("closed form = c^T[nu F_Q]^-1 c", worst <= 1e-12, f"max rel err {worst:.2e} (tol 1e-12), N=2..50"),
        Check("N=3 value", abs(value - 0.306186) <= 1e-6, f"{value:.7f} vs 0.306186 +/- 1e-6"),
    ]


def criterion_6(repeats: int = 200, seed: int = 2024) -> list[Check]:
    """Monte Carlo spread of the fitted gradient against both bounds."""
    t0 = time.perf_counter()
    geo = ChainGeometry(8)
    config = TrialConfig(geo, UNIT, linear_field(geo, 0.0, 0.05), "cascade", 10**5, seed)
    stats = run_ensemble(config, repeats)
    elapsed = time.perf_counter() - t0
    crb_ok = abs(stats.crb / 3.45e-4 - 1) <= 1e-3
    return [
        Check("ensemble valid", stats.valid, f"{stats.failures} non-converged of {repeats}"),
        Check("std / FI bound", _within(stats.ratio_to_fi_crb, 0.9, 1.2), f"{stats.ratio_to_fi_crb:.4f} in [0.9, 1.2] (std {stats.std_g:.4e}, bound {stats.fi_crb:.4e})"),
        Check("closed-form CRB", crb_ok, f"{stats.crb:.6e} vs 3.45e-4 (rel 1e-3)"),
        Check("std / CRB", _within(stats.ratio_to_crb, 0.9, 1.4), f"{stats.ratio_to_crb:.4f} in [0.9, 1.4]"),
        Check("runtime", elapsed < 300.0, f"{elapsed:.2f} s (limit 300 s)"),
    ]


def criterion_7(repeats: int = 200, seed: int = 7) -> list[Check]:
    """Log-log slope of the bound and of the empirical spread against N."""
    analytic = sweep_scaling([8, 16, 32, 64], 10**5, analytic_only=True)
    empirical = sweep_scaling([4, 8, 16, 32], 10**5, seed=seed, repeats=repeats)
    return [
        Check("analytic slope", _within(analytic.slope, -1.02, -0.98), f"{analytic.slope:.4f} in [-1.02, -0.98]"),
        Check("empirical slope", _within(empirical.slope, -1.15, -0.85), f"{empirical.slope:.4f} in [-1.15, -0.85] (95% CI +/- {empirical.slope_ci:.3f})"),
    ]


def criterion_8() -> list[Check]:
    """GHZ/NOON QFI, the optimal-state bound and the reinterpreted per-parameter bounds."""
    params, a, nu = ProbeParams(1.3, 0.7), 0.9, 11
    gta = params.gt * a
    ghz_err = noon_err = lag_err = sig_err = 0.0
    for n in range(2, 21):
        cmp_ = compare_states(n, params, a, nu)
        ghz_err = max(ghz_err, abs(cmp_.qfi_ghz / (n**2 * (n - 1) ** 2 * gta**2) - 1))
        lag_err = max(lag_err, abs(cmp_.qfi_ghz / cmp_.lagrange_bound - 1))
        if n % 2 == 0:
            noon_err = max(noon_err, abs(cmp_.qfi_noon / (n**4 * gta**2 / 4) - 1))
            sig_err = max(sig_err, abs(cmp_.sigma_half_difference / sigma_half_difference_bound(n, params, nu) - 1))
        sig_err = max(sig_err, abs(cmp_.sigma_mean_field / sigma_mean_field_bound(n, params, nu) - 1))
    simplex_err = 0.0
    for n in (2, 3, 4):
        vals = [gradient_generator(n, UNIT, 1.0).eigenvalue(format(i, f"0{n}b")) for i in range(2**n)]
        f_max = (max(vals) - min(vals)) ** 2 / 4
        simplex_err = max(simplex_err, abs(variance_max_brute_force(vals) - f_max))
        # optimal_state_qfi_bound is 4 f_max in QFI units
        simplex_err = max(simplex_err, abs(optimal_state_qfi_bound(gradient_generator(n, UNIT, 1.0)) / 4 - f_max))
    closed = sigma_mean_field_bound(10, UNIT, 1)
    return [
        Check("GHZ QFI", ghz_err <= 1e-12, f"max rel err {ghz_err:.1e}, N=2..20"),
        Check("NOON QFI", noon_err <= 1e-12, f"max rel err {noon_err:.1e}, even N<=20"),
        Check("simplex oracle f_max", simplex_err <= 1e-6, f"max abs err {simplex_err:.1e} (tol 1e-6), N<=4"),
        Check("GHZ = Lagrange bound", lag_err <= 1e-12, f"max rel err {lag_err:.1e}"),
        Check("sigma bounds", sig_err <= 1e-12 and closed == 1 / 20, f"generator-derived vs closed form max rel err {sig_err:.1e}; sigma_mean(N=10) = {closed}"),
    ]


def criterion_9(samples: int = 200, seed: int = 99) -> list[Check]:
    """Symmetry and structure properties of the two outcome distributions."""
    rng = np.random.default_rng(seed)

    def dist(basis, b):
        return outcome_distribution(evolve(w_state(len(b)), FieldProfile(b), UNIT), basis).probs

    reflect = tri = neg_a = neg_b = 0.0
    for _ in range(samples):
        n = int(rng.integers(3, 21))
        fa, fb = fourier_basis(n), cascade_basis(n)
        b = rng.normal(scale=1.5, size=n)
        reflect = max(reflect, np.abs(dist(fa, b) - dist(fa, -b[::-1])).max())
        j = int(rng.integers(2, n))
        b2 = b.copy()
        b2[j] += rng.normal(scale=2.0)
        tri = max(tri, np.abs(dist(fb, b)[1:j] - dist(fb, b2)[1:j]).max(initial=0.0))
        neg_a = max(neg_a, np.abs(dist(fa, b) - dist(fa, -b)).max())
        neg_b = max(neg_b, np.abs(dist(fb, b) - dist(fb, -b)).max())

    closed = 0.0
    g_values = [0.013, 0.3, 0.9, -1.7, 5.1, 0.0, np.pi, np.pi / 3, 2 * np.pi / 5, np.pi / 7 + 1e-10, 1e-7]
    for n in (2, 3, 5, 7, 10, 33, 64):
        for g in g_values:
            field = linear_field(ChainGeometry(n), 0.0, g)
            closed = max(closed, np.abs(prob_a_linear(n, UNIT, 1.0, g).probs - dist(fourier_basis(n), field.values)).max())
            closed = max(closed, np.abs(prob_b_linear(n, UNIT, 1.0, g).probs - dist(cascade_basis(n), field.values)).max())
    return [
        Check("basis a reflection-negation", reflect <= 1e-12, f"max diff {reflect:.1e}"),
        Check("basis b triangular (xi>=1)", tri <= 1e-12, f"max diff {tri:.1e}"),
        Check("basis a global negation", neg_a <= 1e-12, f"max diff {neg_a:.1e} (outcomes xi and N-xi swap under B -> -B)"),
        Check("basis b global negation", neg_b <= 1e-12, f"max diff {neg_b:.1e}"),
        Check("closed forms vs projection", closed <= 1e-12, f"max diff {closed:.1e} incl. removable singularities"),
    ]


def criterion_10() -> list[Check]:
    """LSLF identities, noiseless recovery and the quadratic-field projection."""
    ident = 0.0
    for n in range(2, 65):
        geo = ChainGeometry(n, 0.37, -1.2)
        c = lslf_coefficients(geo)
        ident = max(ident, abs(c.sum()), abs(c @ geo.positions - 1))
    recover = 0.0
    for n in (3, 5, 8, 12):
        geo = ChainGeometry(n)
        g = 0.4 / n
        field = linear_field(geo, 0.0, g)
        est = mle_fields_cascade(expected_counts(FieldModel(cascade_basis(n), UNIT)(field)), geo, UNIT)
        recover = max(recover, abs(est.g_hat / g - 1), abs(lslf_fit(geo, field)[0] / g - 1))
    demo = nonlinear_field_demo(ChainGeometry(5), UNIT, 0.02, 0.005)
    proj_ok = abs(demo.projected_slope - 0.04) <= 1e-12
    fit_err = abs(demo.noiseless_fit - demo.projected_slope)
    return [
        Check("sum c = 0, sum c x = 1", ident <= 1e-12, f"max err {ident:.1e}"),
        Check("noiseless linear recovery", recover <= 1e-6, f"max rel err {recover:.1e}"),
        Check("quadratic demo", proj_ok and fit_err <= 1e-8, f"sum c_i B_i = {demo.projected_slope:.12f} (0.04), fitted {demo.noiseless_fit:.12f}"),
    ]


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(selected=None, echo=print) -> bool:
    ok = True
    for key in selected or CRITERIA:
        for check in CRITERIA[key]():
            echo(check.line(key))
            ok &= check.passed
    return ok
