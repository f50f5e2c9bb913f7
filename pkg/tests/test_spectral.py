import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pairtunnel.model import ModelParams, build_full_hamiltonian
from pairtunnel.spectral import (
    band_structure_full,
    bloch_eigenproblem,
    bloch_matrix,
    dispersion_exact,
    dispersion_two_state,
    group_velocity,
    hopping_integrals,
    kappa_grid,
    lower_band,
    one_state_hopping,
    pair_bound_state,
    truncation_admixture,
    wannier_states,
)


def test_two_state_dispersion_values():
    p = ModelParams(U0=-5, U1=-1)
    assert dispersion_two_state(p, 0.0, -1) == pytest.approx(-5 + 2 - math.sqrt(6), abs=1e-12)
    assert dispersion_two_state(p, 0.0, -1) == pytest.approx(-5.4495, abs=1e-4)
    assert dispersion_two_state(p, math.pi, -1) == pytest.approx(p.U0, abs=1e-12)
    assert dispersion_two_state(p, math.pi, +1) == pytest.approx(p.U0 + p.delta, abs=1e-12)


def test_bandwidth_at_delta_two():
    p = ModelParams(U0=-4, U1=-2)
    E = dispersion_two_state(p, np.array([0.0, math.pi]), -1)
    assert E[1] - E[0] == pytest.approx(math.sqrt(3) - 1, abs=1e-12)
    assert one_state_hopping(p) == pytest.approx((math.sqrt(3) - 1) / 2, abs=1e-12)


def test_exact_dispersion_values():
    p = ModelParams(U0=-2, U1=0)
    assert dispersion_exact(p, 0.0) == pytest.approx(-2.8284, abs=1e-4)
    for U0 in (-1.5, -3.0, -7.0):
        assert dispersion_exact(p.with_(U0=U0), math.pi) == pytest.approx(-abs(U0), abs=1e-12)


def test_exact_band_matches_diagonalization():
    p = ModelParams(U0=-2, U1=0, num_sites=11, boundary="periodic")
    w = np.linalg.eigvalsh(build_full_hamiltonian(p).H.toarray())
    k = 2 * np.pi * np.arange(11) / 11
    assert np.max(np.abs(w[:11] - np.sort(dispersion_exact(p, k)))) < 1e-2
    # bound band lies below the two-particle continuum
    assert w[10] < w[11]


def test_bound_state_chain_reproduces_exact_band():
    p = ModelParams(U0=-3, U1=0)
    for K in (0.0, 0.7, 2.0):
        E, f = pair_bound_state(p, K)
        assert E == pytest.approx(dispersion_exact(p, K), abs=1e-12)
        assert np.sum(np.abs(f) ** 2) == pytest.approx(1, abs=1e-12)


def test_bloch_solution_basics():
    p = ModelParams(U0=-4, U1=-2)
    k = np.linspace(-math.pi, math.pi, 41)
    sol = bloch_eigenproblem(p, k)
    assert np.all(sol.E_minus <= sol.E_plus)
    for E, C, M in ((sol.E_minus, sol.C_minus, None), (sol.E_plus, sol.C_plus, None)):
        assert np.allclose(np.linalg.norm(C, axis=-1), 1, atol=1e-14)
        assert np.all(C[:, 1].imag == 0) and np.all(C[:, 1].real >= 0)
    M = bloch_matrix(p, k)
    resid = np.einsum("kij,kj->ki", M, sol.C_minus) - sol.E_minus[:, None] * sol.C_minus
    assert np.max(np.abs(resid)) < 1e-12
    w = np.linalg.eigvalsh(M)
    assert np.max(np.abs(w[:, 0] - sol.E_minus)) < 1e-12
    assert np.max(np.abs(w[:, 1] - sol.E_plus)) < 1e-12


def test_bloch_at_zone_edge():
    sol = bloch_eigenproblem(ModelParams(U0=-4, U1=-2), math.pi)
    assert np.allclose(sol.C_minus, [0, 1], atol=1e-12)
    assert np.allclose(np.abs(sol.C_plus), [1, 0], atol=1e-12)


def test_bloch_degenerate_gap():
    sol = bloch_eigenproblem(ModelParams(U0=-1, U1=-1), 0.0)
    assert sol.E_minus == pytest.approx(-1 - math.sqrt(2), abs=1e-12)
    assert sol.E_plus == pytest.approx(-1 + math.sqrt(2), abs=1e-12)


def test_bloch_vector_continuity():
    p = ModelParams(U0=-4, U1=-2)
    k = kappa_grid(512)
    C = bloch_eigenproblem(p, k).C_minus
    step = np.linalg.norm(np.diff(C, axis=0), axis=1)
    # a branch flip would show up as an O(1) jump
    assert step.max() < 5 * (2 * math.pi / 512)


def test_three_state_lower_band_satisfies_block():
    p = ModelParams(U0=-4, U1=-2)
    k = np.linspace(-3, 3, 13)
    E, C = lower_band(p, k, "three-state")
    M = bloch_matrix(p, k, 3)
    assert np.max(np.abs(np.einsum("kij,kj->ki", M, C) - E[:, None] * C)) < 1e-12
    assert np.all(np.linalg.eigvalsh(M)[:, 0] == pytest.approx(E, abs=1e-12))


def test_admixture_small_for_strong_binding():
    p = ModelParams(U0=-2, U1=0)
    a = truncation_admixture(p, np.array([0.0, math.pi / 2, math.pi]))
    assert np.all(a >= 0)
    assert np.all(a < 0.06)


def test_full_band_structure_and_gauge():
    p = ModelParams(U0=-2, U1=0, num_sites=11, boundary="periodic")
    th = np.linspace(0, 2 * math.pi / 11, 9)
    S = band_structure_full(p, th)
    assert S.shape == (9, 66)
    S2 = band_structure_full(p, th + 2 * math.pi / 11)
    assert np.max(np.abs(S - S2)) < 1e-10
    assert S[:, 0].min() == pytest.approx(-math.sqrt(p.U0**2 + 4 * p.J**2), abs=1e-2)
    with pytest.raises(ValueError):
        band_structure_full(p.with_(boundary="open"), th)
    with pytest.raises(ValueError):
        band_structure_full(p, [])


def test_wannier_amplitudes():
    W = wannier_states(ModelParams(U0=-4, U1=0))
    assert W.at(0)[1] == pytest.approx(0.975, abs=5e-3)
    assert W.at(-1)[0] == pytest.approx(0.157, abs=5e-3)
    assert W.at(0)[0] == pytest.approx(0.157, abs=5e-3)
    assert np.sum(np.abs(W.amplitudes) ** 2) == pytest.approx(1, abs=1e-12)
    assert np.all(np.isreal(W.amplitudes))


def test_wannier_mirror_symmetry_and_translation():
    W = wannier_states(ModelParams(U0=-3, U1=-1))
    for n in range(1, 6):
        assert W.at(n)[1] == pytest.approx(W.at(-n)[1], abs=1e-8)
        assert W.at(n)[0] == pytest.approx(W.at(-n - 1)[0], abs=1e-8)
    S = W.shifted(5)
    assert S.center == W.center + 5
    assert np.array_equal(S.offsets, W.offsets + 5)
    assert np.array_equal(S.amplitudes, W.amplitudes)


def test_wannier_decay_at_large_gap():
    W = wannier_states(ModelParams(U0=-8, U1=0))
    onsite = np.abs([W.at(n)[1] for n in range(0, 5)])
    assert np.all(onsite[1:] < 0.1 * onsite[:-1])


def test_wannier_warns_on_aliasing():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        wannier_states(ModelParams(U0=-0.01, U1=0), kappa_resolution=16)
    assert rec


def test_hopping_integral_methods_agree():
    p = ModelParams(U0=-4, U1=-2)
    a = hopping_integrals(p, "fitted-from-band", m_max=6)
    b = hopping_integrals(p, "wannier-matrix-elements", m_max=6)
    assert np.allclose(a.values, b.values, atol=1e-10)
    band = dispersion_two_state(p, kappa_grid(512), -1)
    assert a.values[0] == pytest.approx(-band.mean(), abs=1e-12)
    assert a.values[1] == pytest.approx(0.36603, rel=0.15)
    with pytest.raises(ValueError):
        hopping_integrals(p, "guess")


def test_hopping_hierarchy_at_large_gap():
    p = ModelParams(U0=-40, U1=0)
    I = hopping_integrals(p).values
    assert abs(I[2] / I[1]) < 0.05
    # second order in J/Delta: the band is -(J^2/Delta) cos(kappa) + const
    assert I[1] == pytest.approx(1 / 40, rel=0.05)
    tail = np.abs(I[1:])
    assert np.all(tail[1:] < tail[:-1])


def test_group_velocity():
    p = ModelParams(U0=-2, U1=0)
    assert group_velocity(p, 0.0, "exact") == pytest.approx(0, abs=1e-8)
    assert group_velocity(p, math.pi, "exact") == pytest.approx(0, abs=1e-8)
    k = np.linspace(0.1, 3.0, 15)
    assert np.all(group_velocity(p, k, "exact") > 0)
    # d/dk of -sqrt(U0^2 + 4 J^2 cos^2(k/2)) by hand
    c = np.cos(k / 2)
    ref = 2 * c * np.sin(k / 2) / np.sqrt(p.U0**2 + 4 * c**2)
    assert np.allclose(group_velocity(p, k, "exact"), ref, rtol=1e-6)
    q = ModelParams(U0=-4, U1=-2)
    assert group_velocity(q, math.pi / 2, "two-state") == pytest.approx(math.sqrt(2) / 4, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    kappa=st.floats(-20, 20),
    U0=st.floats(-8, -0.2),
    gap=st.floats(0, 6),
)
def test_property_lower_band_even_periodic(kappa, U0, gap):
    p = ModelParams(U0=U0, U1=U0 + gap)
    E = dispersion_two_state(p, kappa, -1)
    assert dispersion_two_state(p, -kappa, -1) == pytest.approx(E, abs=1e-12)
    assert dispersion_two_state(p, kappa + 2 * math.pi, -1) == pytest.approx(E, abs=1e-11)
    sol = bloch_eigenproblem(p, kappa)
    assert sol.E_minus == pytest.approx(E, abs=1e-12)
    assert sol.E_plus == pytest.approx(dispersion_two_state(p, kappa, +1), abs=1e-12)
