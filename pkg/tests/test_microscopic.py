import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macrosync.microscopic import (
    closer_to_zero,
    driven_steady_state,
    exact_two_oscillator_steady_state,
    husimi_q,
    perturbative_two_oscillator_steady_state,
    phase_distribution,
    relative_phase_distribution,
    rotate_both,
    spin_coherent,
    sync_bitmap,
)
from macrosync.model import ModelParams
from macrosync.quantum import SP, SY, SZ, embed, random_density

angles = st.floats(0, np.pi), st.floats(0, 2 * np.pi)


def wigner_coherent(theta, phi):
    # d^1_{m,1}(theta) with the exp(-i phi m) phase; basis order m = -1, 0, 1
    return np.array(
        [
            np.exp(1j * phi) * np.sin(theta / 2) ** 2,
            np.sin(theta) / np.sqrt(2),
            np.exp(-1j * phi) * np.cos(theta / 2) ** 2,
        ]
    )


@given(*angles)
def test_coherent_state_matches_wigner_d(theta, phi):
    psi = spin_coherent(theta, phi)
    assert abs(np.vdot(wigner_coherent(theta, phi), psi)) == pytest.approx(1.0, abs=1e-12)


@given(*angles)
def test_coherent_state_points_along_its_angles(theta, phi):
    psi = spin_coherent(theta, phi)
    sx = 0.5 * (SP + SP.conj().T)
    vec = [np.vdot(psi, op @ psi).real for op in (sx, SY, SZ)]
    assert np.allclose(vec, [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], atol=1e-12)


def test_husimi_normalization_against_dense_midpoint_rule(rng):
    rho = random_density(3, rng)
    n = 600
    th = (np.arange(n) + 0.5) * np.pi / n
    ph = (np.arange(n) + 0.5) * 2 * np.pi / n
    q = husimi_q(rho, th[:, None], ph[None, :])
    total = np.sum(q * np.sin(th)[:, None]) * (np.pi / n) * (2 * np.pi / n)
    assert total == pytest.approx(1.0, abs=1e-5)


def test_phase_distribution_normalization_and_uniform_state(rng):
    s = phase_distribution(random_density(3, rng))
    assert s.total_probability() == pytest.approx(1.0, abs=1e-12)
    flat = phase_distribution(np.diag([0.2, 0.5, 0.3]).astype(complex))
    assert np.max(np.abs(flat.values)) < 1e-12
    with pytest.raises(ValueError):
        phase_distribution(np.eye(3) / 3, n_theta=16)


def test_driven_oscillator_peaks():
    base = ModelParams(gamma_plus=1.0, Omega=0.1)
    s = phase_distribution(driven_steady_state(base))
    assert s.value_at(0.0) == pytest.approx(s.value_at(np.pi), abs=1e-12)
    assert s.value_at(np.pi / 2) < s.value_at(0.0)
    neg = phase_distribution(driven_steady_state(base.with_(K=-0.2))).peak()[0]
    pos = phase_distribution(driven_steady_state(base.with_(K=0.2))).peak()[0]
    assert closer_to_zero(neg) and not closer_to_zero(pos)


def test_relative_phase_invariant_under_common_rotation(rng):
    rho = random_density(9, rng)
    a = relative_phase_distribution(rho)
    b = relative_phase_distribution(rotate_both(rho, 0.77))
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_relative_phase_shifts_with_single_site_rotation(rng):
    rho = random_density(9, rng)
    k = 5
    alpha = 2 * np.pi * k / 128
    u = embed(np.diag(np.exp(-1j * alpha * np.array([-1.0, 0.0, 1.0]))), 0)
    a = relative_phase_distribution(rho)
    b = relative_phase_distribution(u @ rho @ u.conj().T)
    assert np.allclose(np.roll(a.values, k), b.values, atol=1e-12)
    assert a.total_probability() == pytest.approx(1.0)
    assert a.metadata["raw_normalization"] == pytest.approx(1.0, abs=1e-6)


def test_perturbative_state_error_is_second_order():
    p = ModelParams(delta=1.3, K=-0.6, gamma_plus=0.5)
    errs = []
    for v in (1e-2, 1e-3):
        q = p.with_(V_AB=v)
        errs.append(np.linalg.norm(exact_two_oscillator_steady_state(q) - perturbative_two_oscillator_steady_state(q)))
    assert 80 < errs[0] / errs[1] < 125


def test_bitmap_rule():
    phis = np.array([0.1, 3.0, 6.2, 1.0, 2.0])
    assert list(closer_to_zero(phis)) == [True, False, True, True, False]
    bits = sync_bitmap([1e-2, 1e-2, 1e-3, 1e-2, 1e-2], phis, 5e-3)
    assert list(bits) == [True, False, False, True, False]
