"""Projective measurements on the single-excitation subspace.

Two constructions are provided: the discrete-Fourier basis (``"fourier"``,
basis a) and the cascade basis (``"cascade"``, basis b). Row 0 of both is the
W state. Outcome probabilities come either from direct projection
(:func:`outcome_distribution`) or from the closed forms valid for a strictly
linear field (:func:`prob_a_linear`, :func:`prob_b_linear`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import (
    DimensionError,
    FieldProfile,
    InvalidInputError,
    ProbeParams,
    SingleExcitationState,
)

ORTHO_TOL = 1e-12
# |sin| below this switches a sin-ratio to its analytic limit
SINGULAR_TOL = 1e-9


@dataclass(frozen=True)
class ProjectiveBasis:
    """Row ``xi`` holds the components of ``|Pi_xi>`` on ``{|w_j>}``."""

    rows: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        rows = np.array(self.rows, dtype=complex)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise DimensionError(f"basis must be a square matrix, got shape {rows.shape}")
        gram = rows @ rows.conj().T
        err = np.abs(gram - np.eye(len(rows))).max()
        if err > ORTHO_TOL * len(rows):
            raise InvalidInputError(f"basis rows are not orthonormal (max error {err:.3g})")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return len(self.rows)

    def projector(self, xi: int) -> np.ndarray:
        v = self.rows[xi]
        return np.outer(v, v.conj())

    def coherence_operator(self) -> np.ndarray:
        """``(N-1) E(0) - sum_{xi >= 1} E(xi)``."""
        n = self.n
        op = (n - 1) * self.projector(0)
        for xi in range(1, n):
            op = op - self.projector(xi)
        return op


@dataclass(frozen=True)
class OutcomeDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1:
            raise DimensionError("probabilities must be a 1-d vector")
        if (p < -1e-15).any() or abs(p.sum() - 1.0) > 1e-12 * max(1, len(p)):
            raise InvalidInputError("not a probability vector")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return len(self.probs)


def _check_n(n: int) -> int:
    if int(n) != n or n < 2:
        raise InvalidInputError(f"basis needs N >= 2, got {n}")
    return int(n)


def fourier_basis(n: int) -> ProjectiveBasis:
    n = _check_n(n)
    k = np.arange(n)
    # reduce k*j mod n before forming the phase so entries stay exact-ish for large n
    rows = np.exp(2j * np.pi * (np.outer(k, k) % n) / n) / np.sqrt(n)
    return ProjectiveBasis(rows, "fourier")


def cascade_basis(n: int) -> ProjectiveBasis:
    n = _check_n(n)
    rows = np.zeros((n, n))
    rows[0] = 1 / np.sqrt(n)
    for k in range(1, n):
        rows[k, :k] = 1.0 / k
        rows[k, k] = -1.0
        rows[k] *= np.sqrt(k / (k + 1))
    return ProjectiveBasis(rows, "cascade")


def make_basis(label: str, n: int) -> ProjectiveBasis:
    """Basis by name; ``"a"``/``"b"`` are accepted as aliases."""
    key = {"a": "fourier", "b": "cascade"}.get(label, label)
    if key == "fourier":
        return fourier_basis(n)
    if key == "cascade":
        return cascade_basis(n)
    raise InvalidInputError(f"unknown basis {label!r}")


def outcome_distribution(state: SingleExcitationState, basis: ProjectiveBasis) -> OutcomeDistribution:
    if len(state) != basis.n:
        raise DimensionError(f"state has {len(state)} sites, basis has {basis.n}")
    overlaps = basis.rows.conj() @ state.amps
    return OutcomeDistribution(np.abs(overlaps) ** 2)


def _reduce(theta):
    """Split ``theta = y + m*pi`` with ``|y| <= pi/2``."""
    m = np.round(theta / np.pi)
    return theta - m * np.pi, m.astype(int)


def _dirichlet_ratio(y, k):
    """``sin(k y) / (k sin y)`` for reduced ``y``, with the limit 1 at ``y = 0``."""
    y = np.asarray(y, dtype=float)
    k = np.asarray(k, dtype=float)
    s = np.sin(y)
    singular = np.abs(s) < SINGULAR_TOL
    safe = np.where(singular, 1.0, s)
    return np.where(singular, 1.0, np.sin(k * y) / (k * safe))


def prob_a_linear(n: int, params: ProbeParams, spacing: float, gradient: float) -> OutcomeDistribution:
    """Fourier-basis distribution for the field ``B_j = (j-1) a G``.

    ``p(xi) = sin^2(N x) / (N^2 sin^2 x)`` with ``x = gamma t a G + xi pi / N``.
    """
    n = _check_n(n)
    xi = np.arange(n)
    x = params.gt * spacing * gradient + xi * np.pi / n
    y, _ = _reduce(x)
    return OutcomeDistribution(_dirichlet_ratio(y, n) ** 2)


def prob_b_linear(n: int, params: ProbeParams, spacing: float, gradient: float) -> OutcomeDistribution:
    """Cascade-basis distribution for the field ``B_j = (j-1) a G``."""
    n = _check_n(n)
    theta = params.gt * spacing * gradient
    y, m = _reduce(np.float64(theta))
    p = np.empty(n)
    p[0] = float(_dirichlet_ratio(y, n)) ** 2
    xi = np.arange(1, n)
    # sin(xi*theta) / (xi*sin(theta)) picks up (-1)^(m*(xi-1)) under the reduction
    d = _dirichlet_ratio(y, xi) * np.where((m * (xi - 1)) % 2, -1.0, 1.0)
    # 1 - 2 cos((xi+1) theta) D + D^2, rearranged to avoid cancellation at small theta
    bracket = (1.0 - d) ** 2 + 4.0 * d * np.sin((xi + 1) * theta / 2) ** 2
    p[1:] = xi / (n * (xi + 1.0)) * bracket
    return OutcomeDistribution(p)


def prob_b_small_angle(n: int, params: ProbeParams, spacing: float, gradient: float) -> np.ndarray:
    """Leading small-angle form of :func:`prob_b_linear`.

    Returns a plain array; it is normalized only to ``O(theta^4)``.
    """
    n = _check_n(n)
    theta = params.gt * spacing * gradient
    xi = np.arange(n)
    p = xi * (1.0 + xi) * theta**2 / n
    p[0] = 1.0 - (n * n - 1) * theta**2 / 3
    return p


class FieldModel:
    """Outcome probabilities of an evolved W state and their field derivatives.

    Parameters are the gauge-fixed field values ``B_2 .. B_N``; ``B_1 = 0``.
    Derivatives are analytic, from the overlaps
    ``A_xi = sum_j conj(U_xi,j) exp(-2i gamma t B_j) / sqrt(N)``.
    """

    def __init__(self, basis: ProjectiveBasis, params: ProbeParams):
        self.basis = basis
        self.params = params
        self.n = basis.n
        self._uc = basis.rows.conj() / np.sqrt(self.n)

    def _full(self, b_rest):
        b = np.zeros(self.n)
        b[1:] = b_rest
        return b

    def overlaps(self, b_rest):
        b = self._full(b_rest)
        z = np.exp(-2j * self.params.gt * b)
        return self._uc * z, self._uc @ z

    def probs(self, b_rest) -> np.ndarray:
        _, amp = self.overlaps(b_rest)
        return np.abs(amp) ** 2

    def jacobian(self, b_rest) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(p, dp)`` with ``dp[xi, m] = d p_xi / d B_{m+2}``."""
        terms, amp = self.overlaps(b_rest)
        damp = -2j * self.params.gt * terms[:, 1:]
        dp = 2.0 * np.real(amp.conj()[:, None] * damp)
        return np.abs(amp) ** 2, dp

    def hessian(self, b_rest) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(p, dp, d2p)`` with ``d2p[xi, m, l]``."""
        terms, amp = self.overlaps(b_rest)
        c = -2j * self.params.gt
        damp = c * terms[:, 1:]
        dp = 2.0 * np.real(amp.conj()[:, None] * damp)
        d2p = 2.0 * np.real(damp.conj()[:, :, None] * damp[:, None, :])
        diag = 2.0 * np.real(amp.conj()[:, None] * (c * c) * terms[:, 1:])
        idx = np.arange(self.n - 1)
        d2p[:, idx, idx] += diag
        return np.abs(amp) ** 2, dp, d2p

    def distribution(self, field: FieldProfile) -> OutcomeDistribution:
        if len(field) != self.n:
            raise DimensionError("field length does not match basis")
        if not field.gauge_fixed:
            raise InvalidInputError("field model expects a gauge-fixed field")
        return OutcomeDistribution(self.probs(field.values[1:]))

    __call__ = distribution


class LinearFieldModel:
    """Outcome probabilities as a function of the gradient ``G`` alone."""

    def __init__(self, basis: ProjectiveBasis, params: ProbeParams, spacing: float = 1.0):
        self.basis = basis
        self.params = params
        self.spacing = spacing
        n = basis.n
        self._uc = basis.rows.conj() / np.sqrt(n)
        self._phase_rate = -2.0 * params.gt * spacing * np.arange(n)

    def jacobian(self, g: float) -> tuple[np.ndarray, np.ndarray]:
        terms = self._uc * np.exp(1j * self._phase_rate * g)
        amp = terms.sum(axis=1)
        damp = (terms * (1j * self._phase_rate)).sum(axis=1)
        return np.abs(amp) ** 2, 2.0 * np.real(amp.conj() * damp)

    def probs(self, g: float) -> np.ndarray:
        return self.jacobian(g)[0]

    def __call__(self, g: float) -> OutcomeDistribution:
        return OutcomeDistribution(self.probs(g))
