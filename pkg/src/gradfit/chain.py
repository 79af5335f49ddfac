"""Spin-chain geometry, field profiles and probe states.

All W-state dynamics stay inside the single-excitation subspace spanned by
``|w_j> = |1>_j prod_{j' != j} |0>_{j'}``, so a state is just ``N`` complex
amplitudes. GHZ/NOON-type probes are kept as sparse lists of computational
basis terms instead of dense ``2**N`` vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class DimensionError(ValueError):
    """Raised when array lengths do not agree."""


@dataclass(frozen=True)
class ChainGeometry:
    """``n_atoms`` equally spaced probes at ``x1 + (j-1) * spacing``."""

    n_atoms: int
    spacing: float = 1.0
    x1: float = 0.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 2:
            raise InvalidInputError(f"need at least 2 atoms, got {self.n_atoms}")
        if not self.spacing > 0:
            raise InvalidInputError(f"spacing must be positive, got {self.spacing}")

    def position(self, j: int) -> float:
        """Position of atom ``j`` (1-based)."""
        return self.x1 + (j - 1) * self.spacing

    @property
    def positions(self) -> np.ndarray:
        return self.x1 + self.spacing * np.arange(self.n_atoms)

    @property
    def offsets(self) -> np.ndarray:
        """``(j-1) * spacing``, the positions relative to atom 1."""
        return self.spacing * np.arange(self.n_atoms)


@dataclass(frozen=True)
class ProbeParams:
    gamma: float = 1.0
    time: float = 1.0

    def __post_init__(self):
        gt = self.gamma * self.time
        if not np.isfinite(gt) or gt == 0:
            raise InvalidInputError("gamma * time must be finite and nonzero")
        if not self.time > 0:
            raise InvalidInputError("evolution time must be positive")

    @property
    def gt(self) -> float:
        return self.gamma * self.time


@dataclass(frozen=True)
class FieldProfile:
    values: np.ndarray
    gauge_fixed: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1:
            raise DimensionError("field values must be a 1-d vector")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.gauge_fixed and vals[0] != 0.0:
            raise InvalidInputError("gauge-fixed field must have B_1 == 0")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SingleExcitationState:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim != 1:
            raise DimensionError("amplitudes must be a 1-d vector")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL * max(1, len(amps)):
            raise InvalidInputError(f"state is not normalized (|c|^2 = {norm2!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    def __len__(self):
        return len(self.amps)

    def terms(self) -> list[tuple[str, complex]]:
        """The state written as (bitstring, amplitude) pairs."""
        n = len(self.amps)
        return [("0" * j + "1" + "0" * (n - j - 1), complex(c)) for j, c in enumerate(self.amps)]


@dataclass(frozen=True)
class SparseDiagonalState:
    """Pure state given by its nonzero computational-basis terms.

    Site 1 is the leftmost character of each bitstring.
    """

    terms: tuple[tuple[str, complex], ...]

    def __post_init__(self):
        terms = tuple((str(s), complex(c)) for s, c in self.terms)
        if not terms:
            raise InvalidInputError("state needs at least one term")
        strings = [s for s, _ in terms]
        if len(set(strings)) != len(strings):
            raise InvalidInputError("bitstrings must be distinct")
        n = len(strings[0])
        if any(len(s) != n or set(s) - {"0", "1"} for s in strings):
            raise InvalidInputError("bitstrings must be equal-length strings of 0/1")
        norm2 = sum(abs(c) ** 2 for _, c in terms)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvalidInputError(f"state is not normalized (|c|^2 = {norm2!r})")
        object.__setattr__(self, "terms", terms)

    @property
    def n_sites(self) -> int:
        return len(self.terms[0][0])

    def as_dict(self) -> dict[str, complex]:
        return dict(self.terms)


@dataclass(frozen=True)
class DiagonalGenerator:
    """Diagonal operator ``sum_j g_j sigma_z^j + offset``.

    On bitstring ``s`` the eigenvalue is ``sum_j g_j (-1)**s_j + offset``.
    """

    site_weights: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        g = np.array(self.site_weights, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "site_weights", g)

    def eigenvalue(self, bits: str) -> float:
        signs = np.array([1.0 if b == "0" else -1.0 for b in bits])
        if len(signs) != len(self.site_weights):
            raise DimensionError("bitstring length does not match generator")
        return float(signs @ self.site_weights) + self.offset

    @property
    def extreme_eigenvalues(self) -> tuple[float, float]:
        spread = float(np.abs(self.site_weights).sum())
        return self.offset - spread, self.offset + spread


def field_generator(n: int, site: int, params: ProbeParams) -> DiagonalGenerator:
    """Generator of the phase imprinted by the local field at ``site`` (1-based)."""
    g = np.zeros(n)
    g[site - 1] = params.gt
    return DiagonalGenerator(g)


def gradient_generator(n: int, params: ProbeParams, spacing: float = 1.0) -> DiagonalGenerator:
    """Generator for a strictly linear field, ``g_j = gamma t a (j-1)``."""
    return DiagonalGenerator(params.gt * spacing * np.arange(n))


def w_state(geometry: ChainGeometry | int) -> SingleExcitationState:
    n = geometry.n_atoms if isinstance(geometry, ChainGeometry) else int(geometry)
    if n < 2:
        raise InvalidInputError(f"W state needs N >= 2, got {n}")
    return SingleExcitationState(np.full(n, 1 / np.sqrt(n)))


def evolve(state: SingleExcitationState, field: FieldProfile, params: ProbeParams) -> SingleExcitationState:
    """Imprint ``exp(-2i gamma t B_j)`` on amplitude ``j``."""
    if len(field) != len(state):
        raise DimensionError(f"field has {len(field)} sites, state has {len(state)}")
    return SingleExcitationState(state.amps * np.exp(-2j * params.gt * field.values))


def linear_field(geometry: ChainGeometry, b1: float, gradient: float) -> FieldProfile:
    values = b1 + gradient * geometry.offsets
    return FieldProfile(values, gauge_fixed=(b1 == 0))


def gauge_fix(field: FieldProfile) -> FieldProfile:
    if field.gauge_fixed:
        return field
    return FieldProfile(field.values - field.values[0], gauge_fixed=True)


def ghz_state(n: int) -> SparseDiagonalState:
    if n < 1:
        raise InvalidInputError("GHZ state needs n >= 1")
    amp = 1 / np.sqrt(2)
    return SparseDiagonalState((("0" * n, amp), ("1" * n, amp)))


def noon_state(n: int) -> SparseDiagonalState:
    if n < 2 or n % 2:
        raise InvalidInputError(f"NOON state needs an even n, got {n}")
    half = n // 2
    amp = 1 / np.sqrt(2)
    return SparseDiagonalState((("0" * half + "1" * half, amp), ("1" * half + "0" * half, amp)))


def mean_field(field: FieldProfile | Sequence[float]) -> float:
    values = _values(field)
    return float(np.mean(values))


def half_difference_field(field: FieldProfile | Sequence[float]) -> float:
    """Mean field of the right half minus that of the left half, over N/2."""
    values = _values(field)
    n = len(values)
    if n % 2:
        raise InvalidInputError(f"half-difference needs an even number of sites, got {n}")
    half = n // 2
    return float((values[half:].sum() - values[:half].sum()) / half)


def _values(field) -> np.ndarray:
    if isinstance(field, FieldProfile):
        return field.values
    return np.asarray(field, dtype=float)
