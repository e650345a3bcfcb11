import numpy as np
import pytest

from macrosync.dynamics import state_from_vector
from macrosync.model import MeanFieldState, ModelParams, meanfield_rhs, unsynchronized_state
from macrosync.quantum import vectorize
from macrosync.stability import critical_coupling, linearized_generator, spectral_abscissa


def flat_rhs(p, y):
    da, db = meanfield_rhs(p, state_from_vector(y))
    return np.concatenate([vectorize(da), vectorize(db)])


@pytest.mark.parametrize(
    "p",
    [
        ModelParams(V=0.9, gamma_plus=0.5),
        ModelParams(delta=1.2, K=-0.7, V=1.0, V_AB=0.6, gamma_plus=0.3),
        ModelParams(delta=-2.0, K=3.0, V=0.4, V_AB=1.5, gamma_plus=1.0),
    ],
)
def test_jacobian_against_finite_differences(p):
    rho = vectorize(unsynchronized_state())
    y0 = np.concatenate([rho, rho]).astype(complex)
    jac = linearized_generator(p)
    h = 1e-6
    fd = np.empty((18, 18), dtype=complex)
    for k in range(18):
        e = np.zeros(18, dtype=complex)
        e[k] = h
        fd[:, k] = (flat_rhs(p, y0 + e) - flat_rhs(p, y0 - e)) / (2 * h)
    assert np.max(np.abs(jac - fd)) < 1e-5


@pytest.mark.parametrize("gp", [0.3, 0.5, 1.0, 2.0])
def test_uncoupled_abscissa_is_slowest_coherence_decay(gp):
    # slowest decay among rho_01 (gamma_plus/2) and rho_21 (gamma_minus/2)
    rep = spectral_abscissa(ModelParams(delta=0.4, K=0.3, gamma_plus=gp))
    assert rep.spectral_abscissa == pytest.approx(-0.5 * min(gp, 1.0), abs=1e-10)
    assert not rep.unstable


def test_neutral_modes_are_excluded():
    w = np.linalg.eigvals(linearized_generator(ModelParams(V=1.0, gamma_plus=0.5)))
    assert np.sum(np.abs(w) < 1e-10) == 2
    assert spectral_abscissa(ModelParams(gamma_plus=0.5)).spectral_abscissa < 0


def test_critical_coupling_brackets_the_sign_change():
    p = ModelParams(gamma_plus=0.5)
    vc = critical_coupling(p)
    assert vc is not None
    assert spectral_abscissa(p.with_(V=vc * (1 - 1e-3))).spectral_abscissa <= 0
    assert spectral_abscissa(p.with_(V=vc * (1 + 1e-3))).spectral_abscissa > 0


def test_critical_coupling_absent_under_blockade():
    assert critical_coupling(ModelParams(gamma_plus=1.0)) is None
    with pytest.raises(ValueError):
        critical_coupling(ModelParams(), v_max=0.0)


def test_unstable_mode_grows_in_time():
    from macrosync.dynamics import IntegratorConfig, default_pair, integrate

    p = ModelParams(V=1.0, gamma_plus=0.5)
    assert spectral_abscissa(p).unstable
    traj = integrate(p, MeanFieldState(*default_pair(1e-4)), IntegratorConfig(60.0, 61))
    assert abs(traj.amps_a[-1]) > 100 * abs(traj.amps_a[20])
