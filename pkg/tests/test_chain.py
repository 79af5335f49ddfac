import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradfit.chain import (
    ChainGeometry,
    DimensionError,
    FieldProfile,
    InvalidInputError,
    ProbeParams,
    SingleExcitationState,
    gauge_fix,
    ghz_state,
    half_difference_field,
    linear_field,
    mean_field,
    noon_state,
    evolve,
    w_state,
)
from gradfit.measurement import cascade_basis, fourier_basis, outcome_distribution

UNIT = ProbeParams()


def test_geometry_positions():
    geo = ChainGeometry(4, spacing=0.5, x1=2.0)
    np.testing.assert_allclose(geo.positions, [2.0, 2.5, 3.0, 3.5])
    assert geo.position(3) == 3.0
    assert np.all(np.diff(geo.positions) > 0)


@pytest.mark.parametrize("bad", [dict(n_atoms=1), dict(n_atoms=3, spacing=0.0)])
def test_geometry_rejects(bad):
    with pytest.raises(InvalidInputError):
        ChainGeometry(**bad)


def test_probe_params_rejects_zero():
    with pytest.raises(InvalidInputError):
        ProbeParams(gamma=0.0)


@pytest.mark.parametrize("n", [2, 3, 4, 9])
def test_w_state(n):
    amps = w_state(ChainGeometry(n)).amps
    np.testing.assert_allclose(amps, np.full(n, 1 / np.sqrt(n)), atol=1e-15)
    assert abs(np.linalg.norm(amps) - 1) < 1e-12


def test_w_state_rejects_single_atom():
    with pytest.raises(InvalidInputError):
        w_state(1)


def test_evolve_zero_field_is_identity():
    w = w_state(5)
    out = evolve(w, FieldProfile(np.zeros(5)), UNIT)
    np.testing.assert_array_equal(out.amps, w.amps)


def test_evolve_half_pi_flips_sign():
    out = evolve(w_state(2), FieldProfile([0.0, np.pi / 2]), UNIT)
    np.testing.assert_allclose(out.amps, [1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-12)


def test_evolve_length_mismatch():
    with pytest.raises(DimensionError):
        evolve(w_state(3), FieldProfile(np.zeros(4)), UNIT)


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return SingleExcitationState(v / np.linalg.norm(v))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_evolve_unitary_and_composes(n, seed):
    rng = np.random.default_rng(seed)
    state = random_state(rng, n)
    field = FieldProfile(rng.normal(scale=3.0, size=n))
    t1, t2 = rng.uniform(0.1, 2.0, size=2)
    out = evolve(state, field, ProbeParams(1.3, t1))
    assert abs(np.linalg.norm(out.amps) - 1) < 1e-12
    twice = evolve(out, field, ProbeParams(1.3, t2))
    once = evolve(state, field, ProbeParams(1.3, t1 + t2))
    np.testing.assert_allclose(twice.amps, once.amps, atol=1e-12)


@pytest.mark.parametrize(
    "geo, b1, g, expected",
    [
        (ChainGeometry(3), 0.0, 0.0, [0, 0, 0]),
        (ChainGeometry(3, 1.0), 0.0, 2.0, [0, 2, 4]),
        (ChainGeometry(4, 0.5), 1.0, 2.0, [1, 2, 3, 4]),
    ],
)
def test_linear_field(geo, b1, g, expected):
    field = linear_field(geo, b1, g)
    np.testing.assert_allclose(field.values, expected)
    assert field.gauge_fixed == (b1 == 0)


def test_gauge_fix():
    fixed = gauge_fix(FieldProfile([5.0, 6.0, 7.0]))
    np.testing.assert_array_equal(fixed.values, [0.0, 1.0, 2.0])
    assert fixed.gauge_fixed
    assert gauge_fix(fixed) is fixed


def test_gauge_fixed_flag_checked():
    with pytest.raises(InvalidInputError):
        FieldProfile([1.0, 2.0], gauge_fixed=True)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**32 - 1), st.sampled_from(["fourier", "cascade"]))
def test_gauge_fix_keeps_distribution(n, seed, label):
    rng = np.random.default_rng(seed)
    basis = fourier_basis(n) if label == "fourier" else cascade_basis(n)
    field = FieldProfile(rng.normal(scale=2.0, size=n))
    p_raw = outcome_distribution(evolve(w_state(n), field, UNIT), basis).probs
    p_fix = outcome_distribution(evolve(w_state(n), gauge_fix(field), UNIT), basis).probs
    np.testing.assert_allclose(p_raw, p_fix, atol=1e-12)
    shifted = FieldProfile(field.values + rng.normal())
    p_shift = outcome_distribution(evolve(w_state(n), shifted, UNIT), basis).probs
    np.testing.assert_allclose(p_raw, p_shift, atol=1e-12)


def test_ghz_and_noon():
    assert ghz_state(2).as_dict() == pytest.approx({"00": 2**-0.5, "11": 2**-0.5})
    noon = noon_state(4).as_dict()
    assert set(noon) == {"0011", "1100"}
    assert all(abs(c - 2**-0.5) < 1e-15 for c in noon.values())
    with pytest.raises(InvalidInputError):
        noon_state(3)


def test_mean_and_half_difference():
    assert mean_field([0.0, 1.0, 2.0]) == 1.0
    assert half_difference_field([0.0, 0.0, 2.0, 2.0]) == 2.0
    with pytest.raises(InvalidInputError):
        half_difference_field([0.0, 1.0, 2.0])


@pytest.mark.parametrize("a, g", [(1.0, 1.0), (0.5, 3.0), (2.0, -0.1)])
def test_half_difference_of_linear_field(a, g):
    geo = ChainGeometry(4, a)
    assert half_difference_field(linear_field(geo, 0.0, g)) == pytest.approx(2 * a * g, rel=1e-14)
