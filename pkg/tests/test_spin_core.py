from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fe3sim import spin_core as sc
from fe3sim.spin_core import ModelParameters, SpinQuantum

import oracles

REF = ModelParameters()
JK = 12.56 * 1.4387769


@pytest.mark.parametrize("two_s", [1, 2, 3, 5, 7])
def test_local_operator_algebra(two_s):
    ops = sc.build_local_spin_operators(SpinQuantum(two_s))
    s = two_s / 2
    comm = ops.sx @ ops.sy - ops.sy @ ops.sx
    assert np.abs(comm - 1j * ops.sz).max() < 1e-12
    assert np.allclose(ops.s_plus, ops.sx + 1j * ops.sy, atol=1e-14)
    for m in (ops.sx, ops.sy, ops.sz):
        assert np.abs(m - m.conj().T).max() == 0
    assert np.allclose(np.diag(ops.sz).real, s - np.arange(two_s + 1))
    # <m-1|S-|m> = sqrt(s(s+1) - m(m-1))
    for i in range(two_s):
        m = s - i
        assert ops.s_minus[i + 1, i] == pytest.approx(np.sqrt(s * (s + 1) - m * (m - 1)))


def test_spin_half_is_pauli_over_two():
    ops = sc.build_local_spin_operators(SpinQuantum(1))
    assert np.allclose(ops.sz, np.diag([0.5, -0.5]))
    assert np.allclose(ops.s_plus, [[0, 1], [0, 0]])


def test_spin_five_halves_traces():
    ops = sc.build_local_spin_operators()
    assert np.allclose(np.diag(ops.sz).real, [2.5, 1.5, 0.5, -0.5, -1.5, -2.5])
    # sum of m^2 over m = +-1/2, +-3/2, +-5/2
    assert np.trace(ops.sx @ ops.sx).real == pytest.approx(17.5, abs=1e-12)
    assert np.trace(ops.sz @ ops.sz).real == pytest.approx(17.5, abs=1e-12)


def test_invalid_spin_quantum():
    with pytest.raises(ValueError):
        SpinQuantum(0)


def test_embedding():
    ops = sc.build_local_spin_operators()
    e1 = sc.embed_at_site(ops.sz, 1)
    assert np.count_nonzero(e1 - np.diag(np.diag(e1))) == 0
    assert np.allclose(np.diag(e1)[:36], 2.5)
    assert np.array_equal(sc.embed_at_site(np.eye(6), 2), np.eye(216))
    assert np.trace(e1 @ sc.embed_at_site(ops.sz, 2)) == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        sc.embed_at_site(np.eye(5)[:, :4], 1)
    with pytest.raises(ValueError):
        sc.embed_at_site(ops.sz, 4)


def test_zero_field_extremes():
    w = sc.diagonalize(sc.build_hamiltonian_z(REF)).eigenvalues
    assert w[0] == pytest.approx(-51 / 4 * JK, abs=1e-8)
    assert w[0] == pytest.approx(-230.405732766, abs=1e-6)
    assert w[-1] == pytest.approx(75 / 4 * JK, abs=1e-8)


def test_pure_zeeman_spectrum():
    p = ModelParameters(j_coupling=0.0, b_z=1.0)
    w = sc.diagonalize(sc.build_hamiltonian_z(p)).eigenvalues
    levels = sorted(set(np.round(w / (2 * 0.67171381), 9)))
    assert np.allclose(levels, np.arange(-7.5, 7.6, 1.0))


@pytest.mark.parametrize("b_z", [0.0, 7.3, 55.0])
def test_hamiltonian_symmetries(b_z):
    h = sc.build_hamiltonian_z(REF.replace(b_z=b_z))
    _, _, stz, s2 = sc.total_spin_operators()
    scale = np.abs(h).max()
    assert sc.hermiticity_error(h) < 1e-10
    assert np.abs(h @ stz - stz @ h).max() <= 1e-9 * scale
    assert np.abs(h @ s2 - s2 @ h).max() <= 1e-9 * scale


def test_local_field_hamiltonian():
    assert np.array_equal(sc.build_hamiltonian_local_x(REF), sc.build_hamiltonian_z(REF))
    h = sc.build_hamiltonian_local_x(REF.replace(b_x=1.0))
    stz = sc.total_spin_operators()[2]
    assert np.abs(h @ stz - stz @ h).max() > 0.1
    d0 = np.zeros(216)
    d0[-1] = 1
    assert (d0 @ h @ d0).real == pytest.approx(75 / 4 * JK, abs=1e-9)


def test_kambe_values():
    assert sc.kambe_energy(7.5, 7.5, REF) == pytest.approx(75 / 4 * JK)
    assert sc.kambe_energy(4.5, 0.5, REF) == pytest.approx(-3 / 4 * JK)
    # at g muB B = 3/2 J the S_T = 1/2 and 3/2 lowest levels are degenerate
    b = 1.5 * JK / (2 * 0.67171381)
    p = REF.replace(b_z=b)
    assert sc.kambe_energy(0.5, 0.5, p) == pytest.approx(sc.kambe_energy(1.5, 1.5, p), abs=1e-10)
    for bad in [(8.5, 0.5), (1.0, 0.0), (1.5, 2.5), (2.5, 1.0)]:
        with pytest.raises(ValueError):
            sc.kambe_energy(*bad, REF)


def test_diagonalize_trivial():
    assert np.allclose(sc.diagonalize(np.eye(216)).eigenvalues, 1)
    assert np.allclose(sc.diagonalize(np.diag([3.0, 1.0, 2.0])).eigenvalues, [1, 2, 3])
    with pytest.raises(ValueError):
        sc.diagonalize(np.array([[0, 1], [0, 0]], dtype=float))


def test_spectral_invariants():
    h = sc.build_hamiltonian_local_x(REF.replace(b_x=3.0))
    d = sc.diagonalize(h)
    assert np.all(np.diff(d.eigenvalues) >= 0)
    assert np.abs(d.reconstruct() - h).max() <= 1e-8 * np.abs(h).max()
    v = d.eigenvectors
    assert np.abs(v.conj().T @ v - np.eye(216)).max() < 1e-10


def test_eight_distinct_levels_match_closed_form():
    w = sc.diagonalize(sc.build_hamiltonian_z(REF)).eigenvalues
    distinct = [w[0]]
    for x in w[1:]:
        if x - distinct[-1] > 1e-6:
            distinct.append(x)
    expected = sorted(sc.kambe_energy(s, s, REF) for s in sc.ALLOWED_TOTAL_SPINS)
    assert len(distinct) == 8
    assert np.allclose(distinct, expected, atol=1e-8, rtol=0)


def test_sector_census_matches_coupling_oracle():
    d = sc.diagonalize(sc.build_hamiltonian_z(REF))
    report = sc.sector_analysis(d, REF)
    oracle = {float(k): v for k, v in oracles.coupled_multiplicities().items()}
    assert report.multiplicities() == oracle
    assert report.multiplicities()[2.5] == 6
    assert report.multiplicities()[0.5] == 2
    assert report.multiplicities()[1.5] == 4
    assert report.total_states() == 216


def test_coupling_oracle_self_consistent():
    mult = oracles.coupled_multiplicities()
    assert sum((2 * s + 1) * m for s, m in mult.items()) == 216
    assert mult[Fraction(3, 2)] == 4


def test_sector_analysis_rejects_unit_errors():
    d = sc.diagonalize(sc.build_hamiltonian_z(REF))
    with pytest.raises(sc.SpectralError):
        sc.sector_analysis(d, REF.replace(j_coupling=12.0))
    with pytest.raises(ValueError):
        sc.sector_analysis(d, REF.replace(b_z=1.0))


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.0, max_value=130.0))
def test_every_eigenvalue_has_a_closed_form_partner(b_z):
    p = REF.replace(b_z=b_z)
    d = sc.diagonalize(sc.build_hamiltonian_z(p))
    labels = sc.match_kambe(d.eigenvalues, p, tol=1e-6)
    assert len(labels) == 216


def test_level_crossing_fields():
    # mu_B = 0.4668645 cm^-1/T route, independent of the Kelvin constants
    assert sc.level_crossing_field(0.5, REF) == pytest.approx(20.177160610841046, abs=1e-4)
    assert sc.level_crossing_field(6.5, REF) == pytest.approx(100.88580305420524, abs=1e-3)
    fields = [sc.level_crossing_field(s, REF) for s in sc.ALLOWED_TOTAL_SPINS[:-1]]
    assert np.all(np.diff(fields) > 0)
    assert sc.level_crossing_field(2.5, REF.replace(j_coupling=0.0)) == 0.0
    with pytest.raises(ValueError):
        sc.level_crossing_field(7.5, REF)


def test_numerical_ground_state_crossings():
    crossings = sc.ground_state_crossings(REF, b_max=110.0, resolution=1e-4)
    assert [m for m, _ in crossings] == list(sc.ALLOWED_TOTAL_SPINS[:-1])
    for m, b in crossings:
        assert b == pytest.approx(sc.level_crossing_field(m, REF), abs=1e-3)
