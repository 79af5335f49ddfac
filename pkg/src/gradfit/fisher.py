"""Classical and quantum Fisher information for the W-state probe.

Numeric Fisher matrices use central finite differences on outcome
probabilities. Closed forms are returned as-is; their validity domain (linear
field, or the zero-field limit) is stated on each function and never switched
on automatically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .chain import (
    DiagonalGenerator,
    FieldProfile,
    InvalidInputError,
    ProbeParams,
    SingleExcitationState,
    SparseDiagonalState,
)
from .measurement import OutcomeDistribution

DEFAULT_STEP = 1e-4
PROB_FLOOR = 1e-12
SINGULAR_RTOL = 1e-8


@dataclass(frozen=True)
class FisherMatrix:
    """Information matrix over ``B_2 .. B_N`` (or any parameter list)."""

    entries: np.ndarray
    gamma: float = 1.0
    time: float = 1.0

    def __post_init__(self):
        f = np.array(self.entries, dtype=float)
        if f.ndim == 0:
            f = f.reshape(1, 1)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise InvalidInputError(f"Fisher matrix must be square, got shape {f.shape}")
        scale = max(np.abs(f).max(initial=0.0), 1.0)
        if np.abs(f - f.T).max(initial=0.0) > 1e-12 * scale:
            raise InvalidInputError("Fisher matrix is not symmetric")
        if len(f) and np.linalg.eigvalsh(f).min() < -1e-10 * np.linalg.norm(f):
            raise InvalidInputError("Fisher matrix is not positive semidefinite")
        f.setflags(write=False)
        object.__setattr__(self, "entries", f)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    @property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    @property
    def condition_ratio(self) -> float:
        """Smallest over largest singular value."""
        sv = self.singular_values
        return float(sv.min() / sv.max()) if sv.max() > 0 else 0.0

    @property
    def singular(self) -> bool:
        return self.condition_ratio < SINGULAR_RTOL

    def inverse(self) -> np.ndarray:
        if self.singular:
            raise np.linalg.LinAlgError("Fisher matrix is singular")
        return np.linalg.inv(self.entries)


def _floor(p):
    return np.maximum(p, PROB_FLOOR)


def fisher_from_jacobian(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    """``sum_xi dp[xi, m] dp[xi, n] / p[xi]`` with the small-probability floor."""
    w = dp / _floor(p)[:, None]
    f = w.T @ dp
    return 0.5 * (f + f.T)


def _probs(dist) -> np.ndarray:
    return dist.probs if isinstance(dist, OutcomeDistribution) else np.asarray(dist, dtype=float)


def fi_matrix_numeric(
    model: Callable[[FieldProfile], OutcomeDistribution],
    field: FieldProfile,
    step: float = DEFAULT_STEP,
    params: ProbeParams | None = None,
) -> FisherMatrix:
    """Fisher matrix over ``B_2 .. B_N`` by central differences of ``model``.

    Points where some outcome has ``p -> 0`` with finite ``(dp)^2 / p`` should
    be handled by the caller evaluating at a nearby offset field.
    """
    if not field.gauge_fixed:
        raise InvalidInputError("fi_matrix_numeric needs a gauge-fixed field")
    if not step > 0:
        raise InvalidInputError("step must be positive")
    base = field.values
    p = _probs(model(field))
    dp = np.empty((len(p), len(base) - 1))
    for m in range(1, len(base)):
        up, down = base.copy(), base.copy()
        up[m] += step
        down[m] -= step
        dp[:, m - 1] = (
            _probs(model(FieldProfile(up, gauge_fixed=True)))
            - _probs(model(FieldProfile(down, gauge_fixed=True)))
        ) / (2 * step)
    gamma, time = (params.gamma, params.time) if params else (1.0, 1.0)
    return FisherMatrix(fisher_from_jacobian(p, dp), gamma, time)


def fi_single_numeric(model: Callable[[float], OutcomeDistribution], g: float, step: float = DEFAULT_STEP) -> float:
    """Scalar Fisher information about ``G`` by central differences."""
    if not step > 0:
        raise InvalidInputError("step must be positive")
    p = _probs(model(g))
    dp = (_probs(model(g + step)) - _probs(model(g - step))) / (2 * step)
    return float(np.sum(dp * dp / _floor(p)))


def _kron(n):
    m = np.arange(2, n + 1)
    return m, np.eye(n - 1)


def fi_matrix_a_linear(n: int, params: ProbeParams) -> FisherMatrix:
    """Fourier-basis Fisher matrix on a linear field.

    ``(8 gamma^2 t^2 / N) (delta_mn - delta_{m+n, N+1})`` for ``m, n = 2..N``.
    Singular for every ``N >= 3``; check ``.singular``.
    """
    if n < 2:
        raise InvalidInputError("need N >= 2")
    m, eye = _kron(n)
    anti = (m[:, None] + m[None, :] == n + 1).astype(float)
    return FisherMatrix(8 * params.gt**2 / n * (eye - anti), params.gamma, params.time)


def qfi_matrix_w(n: int, params: ProbeParams) -> FisherMatrix:
    """W-state QFI over ``B_2 .. B_N``: ``(16 gamma^2 t^2 / N^2)(N delta_mn - 1)``."""
    if n < 2:
        raise InvalidInputError("need N >= 2")
    _, eye = _kron(n)
    return FisherMatrix(16 * params.gt**2 / n**2 * (n * eye - 1.0), params.gamma, params.time)


def qfi_matrix_w_inverse(n: int, params: ProbeParams) -> np.ndarray:
    if n < 2:
        raise InvalidInputError("need N >= 2")
    _, eye = _kron(n)
    return n / (16 * params.gt**2) * (eye + 1.0)


def fi_matrix_b_origin(n: int, params: ProbeParams) -> FisherMatrix:
    """Cascade-basis Fisher matrix in the limit ``B -> 0``; equals the W-state QFI."""
    return qfi_matrix_w(n, params)


def qfi_pure_diagonal(
    state: SparseDiagonalState | SingleExcitationState,
    gens: Sequence[DiagonalGenerator],
) -> FisherMatrix:
    """QFI of a pure state under commuting diagonal generators.

    ``[F]_mn = 2 <h_m h_n + h_n h_m> - 4 <h_m><h_n>``, summed over the
    state's support only.
    """
    terms = state.terms() if isinstance(state, SingleExcitationState) else state.terms
    weights = np.array([abs(c) ** 2 for _, c in terms])
    if abs(weights.sum() - 1.0) > 1e-12:
        raise InvalidInputError("state is not normalized")
    h = np.array([[gen.eigenvalue(bits) for bits, _ in terms] for gen in gens])
    mean = h @ weights
    second = (h * weights) @ h.T
    f = 4.0 * (second - np.outer(mean, mean))
    return FisherMatrix(0.5 * (f + f.T))


def qfi_single_w(n: int, params: ProbeParams, spacing: float = 1.0) -> float:
    """``(2 gamma t a)^2 (N^2 - 1) / 3``."""
    return (2 * params.gt * spacing) ** 2 * (n * n - 1) / 3


def optimal_state_qfi_bound(gen: DiagonalGenerator) -> float:
    """Largest QFI any pure state reaches under ``gen``.

    The variance of a diagonal observable over a probability vector peaks at
    half weight on each extreme eigenvalue, so the bound is
    ``(h_max - h_min)^2``.
    """
    lo, hi = gen.extreme_eigenvalues
    return float((hi - lo) ** 2)


def variance_max_brute_force(values: Sequence[float], resolution: int = 40, seed: int = 0) -> float:
    """Maximize ``sum w a^2 - (sum w a)^2`` over the probability simplex.

    Independent check of :func:`optimal_state_qfi_bound`: a lattice search
    over supports of size up to three plus random interior points, then
    constrained local refinement from the best candidates.
    """
    from itertools import combinations

    from scipy.optimize import minimize

    a = np.unique(np.asarray(values, dtype=float))
    k = len(a)
    if k < 2:
        return 0.0

    def f(w):
        return float(w @ a**2 - (w @ a) ** 2)

    candidates = []
    grid = np.linspace(0.0, 1.0, resolution + 1)
    for size in (1, 2, 3):
        for idx in combinations(range(k), size):
            for u in grid:
                for v in grid if size == 3 else [0.0]:
                    parts = [u, 1 - u] if size == 2 else [u, v, 1 - u - v] if size == 3 else [1.0]
                    if min(parts) < 0:
                        continue
                    w = np.zeros(k)
                    w[list(idx)] = parts[:size]
                    candidates.append(w)
    rng = np.random.default_rng(seed)
    candidates.extend(rng.dirichlet(np.ones(k), size=200))
    candidates.sort(key=f, reverse=True)

    best = f(candidates[0])
    cons = ({"type": "eq", "fun": lambda w: w.sum() - 1.0, "jac": lambda w: np.ones_like(w)},)
    for w0 in candidates[:5]:
        res = minimize(
            lambda w: -f(w),
            w0,
            jac=lambda w: -(a**2 - 2 * (w @ a) * a),
            bounds=[(0.0, 1.0)] * k,
            constraints=cons,
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 500},
        )
        w = np.clip(res.x, 0.0, None)
        w /= w.sum()
        best = max(best, f(w))
    return best
