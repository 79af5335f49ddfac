"""Sampling, maximum-likelihood field recovery and gradient fitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .chain import ChainGeometry, FieldProfile, InvalidInputError, ProbeParams
from .fisher import fisher_from_jacobian
from .measurement import (
    FieldModel,
    LinearFieldModel,
    OutcomeDistribution,
    cascade_basis,
    fourier_basis,
)

log = logging.getLogger(__name__)

GRAD_TOL = 1e-10
MAX_ITER = 500


@dataclass(frozen=True)
class OutcomeCounts:
    """Observed outcome tallies.

    Counts may be fractional, which lets exact probabilities stand in for an
    infinite sample.
    """

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=float)
        if c.ndim != 1 or (c < 0).any():
            raise InvalidInputError("counts must be a nonnegative 1-d vector")
        if not c.sum() > 0:
            raise InvalidInputError("counts are empty")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.total

    def __len__(self):
        return len(self.counts)


@dataclass(frozen=True)
class TrialConfig:
    geometry: ChainGeometry
    params: ProbeParams
    true_field: FieldProfile
    basis: str = "cascade"
    shots: int = 100_000
    seed: int = 0
    prior_sign: int = 1

    def __post_init__(self):
        if self.shots < 1:
            raise InvalidInputError("shots must be >= 1")
        if len(self.true_field) != self.geometry.n_atoms:
            raise InvalidInputError("true field length does not match geometry")
        if self.prior_sign not in (1, -1):
            raise InvalidInputError("prior_sign must be +1 or -1")


@dataclass(frozen=True)
class GradientEstimate:
    g_hat: float
    intercept: float
    field_estimates: np.ndarray
    log_likelihood: float
    converged: bool
    branch: int = 1
    iterations: int = 0
    grad_norm: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)


def trial_seed(master_seed: int, *index: int) -> np.random.SeedSequence:
    """Independent stream for trial ``index`` of run ``master_seed``.

    Streams depend only on ``(master_seed, index)``, never on execution order.
    """
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in index))


def sample_counts(dist: OutcomeDistribution | np.ndarray, shots: int, seed) -> OutcomeCounts:
    """Multinomial draw of ``shots`` outcomes from ``dist``."""
    if shots < 1:
        raise InvalidInputError("shots must be >= 1")
    p = dist.probs if isinstance(dist, OutcomeDistribution) else OutcomeDistribution(dist).probs
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return OutcomeCounts(rng.multinomial(int(shots), p / p.sum()))


def log_likelihood(counts, probs) -> float:
    """``sum n ln p`` with zero-count outcomes dropped, even where ``p = 0``."""
    n = counts.counts if isinstance(counts, OutcomeCounts) else np.asarray(counts, dtype=float)
    seen = n > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(n[seen] * np.log(probs[seen])))


# -- least-squares linear fitting --------------------------------------------


def lslf_coefficients(geometry: ChainGeometry) -> np.ndarray:
    n, a = geometry.n_atoms, geometry.spacing
    i = np.arange(1, n + 1)
    return 6.0 * (2 * i - n - 1) / (a * (n - 1) * n * (n + 1))


def lslf_fit(geometry: ChainGeometry, field_estimates) -> tuple[float, float]:
    """Return ``(gradient, intercept)`` of the least-squares line through the estimates."""
    b = np.asarray(field_estimates.values if isinstance(field_estimates, FieldProfile) else field_estimates, float)
    if len(b) != geometry.n_atoms:
        raise InvalidInputError("field estimates do not match geometry")
    g = float(lslf_coefficients(geometry) @ b)
    return g, float(b.mean() - g * geometry.positions.mean())


def crb_gradient(n: int, params: ProbeParams, spacing: float, shots: int) -> float:
    """Quantum Cramer-Rao bound on the fitted gradient, W-state probe."""
    if n < 2 or shots < 1:
        raise InvalidInputError("need N >= 2 and shots >= 1")
    return float(np.sqrt(3.0 / (shots * (n * n - 1))) / (2 * abs(params.gt) * spacing))


def crb_from_information(information: np.ndarray, coefficients: np.ndarray, shots: int) -> float:
    """``sqrt(c^T [nu F]^-1 c)`` with ``c`` restricted to ``B_2 .. B_N``."""
    c = np.asarray(coefficients, float)
    if len(c) == len(information) + 1:
        c = c[1:]
    return float(np.sqrt(c @ np.linalg.solve(shots * np.asarray(information), c)))


# -- multi-parameter MLE on cascade-basis counts -----------------------------


def _sequential_inversion(freq: np.ndarray, n: int, gt: float, sign: int) -> np.ndarray:
    """Invert ``p_k`` one outcome at a time to get a starting field.

    ``p_k = k/(N(k+1)) |M_k - e^{i phi_{k+1}}|^2`` with ``M_k = r e^{i psi}`` the
    mean of the first ``k`` phase factors, so ``phi_{k+1} = psi -/+ arccos(.)``.
    The two roots are interchanged by reflecting ``B_{k+1}`` about the running
    mean, which leaves ``p_k`` unchanged; ``sign`` picks ``B_{k+1}`` above
    (``+1``) or below (``-1``) it.
    """
    phases = np.zeros(n)
    for k in range(1, n):
        mean = np.exp(1j * phases[:k]).mean()
        r, psi = abs(mean), np.angle(mean)
        target = n * (k + 1) / k * freq[k]
        cos_arg = np.clip((r * r + 1 - target) / (2 * max(r, 1e-300)), -1.0, 1.0)
        # phi = -2 gamma t B, so B above the mean means phi below psi
        phases[k] = psi - sign * np.sign(gt) * np.arccos(cos_arg)
    return -phases / (2 * gt)


def _newton_ascent(model: FieldModel, counts: np.ndarray, start: np.ndarray, gtol: float, max_iter: int):
    """Damped Newton ascent on the per-shot log-likelihood.

    Falls back to Fisher scoring whenever the Hessian is not negative definite.
    """
    nu = counts.sum()
    freq = counts / nu
    seen = freq > 0

    def objective(x):
        return log_likelihood(freq, model.probs(x))

    x = start.copy()
    value = objective(x)
    grad = np.zeros_like(x)
    it = 0
    for it in range(1, max_iter + 1):
        p, dp, d2p = model.hessian(x)
        ratio = np.where(seen, freq / np.where(seen, p, 1.0), 0.0)
        grad = dp.T @ ratio
        if np.linalg.norm(grad) <= gtol:
            return x, value, grad, True, it - 1
        w = np.where(seen, ratio / np.where(seen, p, 1.0), 0.0)
        hess = np.einsum("k,kmn->mn", ratio, d2p) - (dp * w[:, None]).T @ dp
        try:
            np.linalg.cholesky(-hess)
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            info = fisher_from_jacobian(p, dp)
            info += 1e-12 * max(np.trace(info), 1e-300) * np.eye(len(x))
            step = np.linalg.solve(info, grad)
        t = 1.0
        while t > 1e-12:
            trial = x + t * step
            trial_value = objective(trial)
            if trial_value >= value - 1e-15 * abs(value):
                break
            t *= 0.5
        else:
            break
        x, value = trial, trial_value
    p, dp = model.jacobian(x)
    ratio = np.where(seen, freq / np.where(seen, p, 1.0), 0.0)
    grad = dp.T @ ratio
    return x, value, grad, bool(np.linalg.norm(grad) <= gtol), it


def mle_fields_cascade(
    counts: OutcomeCounts,
    geometry: ChainGeometry,
    params: ProbeParams,
    prior_sign: int = 1,
    gtol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> GradientEstimate:
    """Maximum-likelihood field profile from cascade-basis counts, then its LSLF gradient.

    The cascade distribution is invariant under ``B -> -B``, and each ``p_k``
    is invariant under reflecting ``B_{k+1}`` about the mean of ``B_1..B_k``.
    Both ambiguities are settled by ``prior_sign``: the recovered field is
    taken to rise (``+1``) or fall (``-1``) relative to its running mean, the
    local regime of a gradient with that sign.
    """
    n = geometry.n_atoms
    if len(counts) != n:
        raise InvalidInputError(f"expected {n} outcome counts, got {len(counts)}")
    if prior_sign not in (1, -1):
        raise InvalidInputError("prior_sign must be +1 or -1")
    nu = counts.total
    if not counts.counts[1:].any():
        b = np.zeros(n)
        g, c0 = lslf_fit(geometry, b)
        return GradientEstimate(g, c0, b, 0.0, True, prior_sign)

    model = FieldModel(cascade_basis(n), params)
    start = _sequential_inversion(counts.frequencies, n, params.gt, prior_sign)[1:]
    x, value, grad, ok, iters = _newton_ascent(model, counts.counts, start, gtol, max_iter)
    if not ok:
        log.warning("cascade MLE did not converge after %d iterations (|grad| = %.3g)", iters, np.linalg.norm(grad))
    b = np.concatenate([[0.0], x])
    g, c0 = lslf_fit(geometry, b)
    log.debug("cascade MLE branch %+d: G = %.6g after %d iterations", prior_sign, g, iters)
    return GradientEstimate(
        g, c0, b, value * nu, ok, prior_sign, iters, float(np.linalg.norm(grad)) * nu
    )


# -- single-parameter estimators under the linear-field assumption ------------


def _scalar_mle(model: LinearFieldModel, counts: np.ndarray, lo: float, hi: float, points: int = 401):
    """Maximize ``sum n ln p(G)`` on ``[lo, hi]``: grid search, then a root of the score."""
    freq = counts / counts.sum()
    seen = freq > 0

    def value(g):
        return log_likelihood(freq, model.probs(g))

    def score(g):
        p, dp = model.jacobian(g)
        return float(np.sum(np.where(seen, freq * dp / np.where(seen, p, 1.0), 0.0)))

    grid = np.linspace(lo, hi, points)
    vals = np.array([value(g) for g in grid])
    i = int(np.argmax(vals))
    best_g, best_v = grid[i], vals[i]
    for a, b in ((grid[max(i - 1, 0)], grid[i]), (grid[i], grid[min(i + 1, points - 1)])):
        if a == b:
            continue
        sa, sb = score(a), score(b)
        if sa > 0 > sb:
            root = brentq(score, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            v = value(root)
            if v >= best_v:
                best_g, best_v = root, v
    return best_g, best_v, abs(score(best_g))


def fourier_peak_initializer(xi: int, n: int, params: ProbeParams, spacing: float) -> float:
    """Centre ``(1 - xi/N) pi / (gamma t a)`` of the outcome-``xi`` peak inside ``(0, pi/(gamma t a)]``."""
    return (1.0 - xi / n) * np.pi / abs(params.gt * spacing)


def estimate_gradient_single_a(counts: OutcomeCounts, n: int, params: ProbeParams, spacing: float = 1.0) -> GradientEstimate:
    """MLE of ``G`` from Fourier-basis counts, restricted to ``0 < G < pi/(gamma t a)``.

    The modal outcome fixes which peak of ``p(xi|G)`` the data sit on; the
    likelihood is then maximized within one peak width of it.
    """
    if len(counts) != n:
        raise InvalidInputError(f"expected {n} outcome counts, got {len(counts)}")
    period = np.pi / abs(params.gt * spacing)
    width = period / n
    xi = int(np.argmax(counts.counts))
    centre = fourier_peak_initializer(xi, n, params, spacing)
    brackets = [(max(centre - width, 0.0), min(centre + width, period))]
    if xi == 0:
        brackets.insert(0, (0.0, width))
    model = LinearFieldModel(fourier_basis(n), params, spacing)
    best = None
    for lo, hi in brackets:
        g, v, s = _scalar_mle(model, counts.counts, lo, hi)
        if best is None or v > best[1]:
            best = (g, v, s)
    g, v, s = best
    geometry = ChainGeometry(n, spacing)
    b = g * geometry.offsets
    return GradientEstimate(g, 0.0, b, v * counts.total, s <= GRAD_TOL, 1, extra={"modal_outcome": xi, "initializer": centre})


def estimate_gradient_single_b(
    counts: OutcomeCounts, n: int, params: ProbeParams, spacing: float = 1.0, prior_sign: int = 1
) -> GradientEstimate:
    """MLE of ``G`` from cascade-basis counts in the local regime ``|gamma t a G| < pi/N``.

    ``p(G) = p(-G)``, so the sign of the estimate is the prior sign.
    """
    if len(counts) != n:
        raise InvalidInputError(f"expected {n} outcome counts, got {len(counts)}")
    geometry = ChainGeometry(n, spacing)
    if not counts.counts[1:].any():
        return GradientEstimate(0.0, 0.0, np.zeros(n), 0.0, True, prior_sign)
    gta = abs(params.gt * spacing)
    model = LinearFieldModel(cascade_basis(n), params, spacing)
    # moment start: sum_{xi>=1} p_xi ~ (N^2-1) theta^2 / 3
    theta0 = np.sqrt(3 * (1 - counts.frequencies[0]) / (n * n - 1))
    hi = np.pi / (n * gta)
    g, v, s = _scalar_mle(model, counts.counts, 1e-6 * hi, hi)
    g *= prior_sign
    return GradientEstimate(
        g, 0.0, g * geometry.offsets, v * counts.total, s <= GRAD_TOL, prior_sign,
        extra={"initializer": prior_sign * theta0 / gta},
    )


def expected_counts(dist: OutcomeDistribution | Sequence[float], shots: float = 1.0) -> OutcomeCounts:
    """Exact probabilities scaled to ``shots`` fractional counts."""
    p = dist.probs if isinstance(dist, OutcomeDistribution) else np.asarray(dist, float)
    return OutcomeCounts(shots * p)
