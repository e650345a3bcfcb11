"""Steady-state phase preferences of one driven oscillator and of two coupled
oscillators, read off from spin-coherent-state Husimi functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import (
    ModelParams,
    driven_liouvillian,
    exchange_liouvillian,
    two_oscillator_liouvillian,
    uncoupled_two_oscillator_liouvillian,
)
from .quantum import (
    SY,
    SZ,
    DegenerateSteadyStateError,
    devectorize,
    ket,
    normalize_density,
    steady_state_nullspace,
    tensor,
    trace_row,
    vectorize,
)

DRIVE_STRENGTH = 0.1
BITMAP_THRESHOLD = 5e-3
UNIFORM_DENSITY = 1.0 / (2.0 * np.pi)
# S^z eigenvalue of each basis level |0>, |1>, |2>
_M = np.real(np.diag(SZ))


@lru_cache(maxsize=1)
def _sy_eig() -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(SY)


def spin_coherent(theta, phi) -> np.ndarray:
    """|theta, phi> = exp(-i phi S^z) exp(-i theta S^y) |2>.

    Broadcasts over array-valued angles; the last axis holds the three
    components.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    w, u = _sy_eig()
    top = ket(2)
    # exp(-i theta S^y)|2> = U exp(-i theta w) U^+ |2>
    coeff = u.conj().T @ top
    rot = np.einsum("ij,...j->...i", u, np.exp(-1j * theta[..., None] * w) * coeff)
    return np.exp(-1j * phi[..., None] * _M) * rot


def _theta_amplitudes(theta: np.ndarray) -> np.ndarray:
    # exp(-i theta S^y) is real orthogonal, so these are real
    return spin_coherent(theta, np.zeros_like(theta)).real


def husimi_q(rho: np.ndarray, theta, phi):
    """Q(theta, phi) = 3/(4 pi) <theta, phi| rho |theta, phi>."""
    psi = spin_coherent(theta, phi)
    val = np.einsum("...i,ij,...j->...", psi.conj(), rho, psi).real
    return 3.0 / (4.0 * np.pi) * val


def theta_quadrature(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, pi]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * np.pi * (x + 1.0), 0.5 * np.pi * w


def phase_grid(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True)
class PhaseDistribution:
    """s(phi) on a uniform grid over [0, 2 pi), uniform density subtracted."""

    phis: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def total_probability(self) -> float:
        dphi = 2.0 * np.pi / self.phis.size
        return float(np.sum(self.values + UNIFORM_DENSITY) * dphi)

    def peak(self) -> tuple[float, float]:
        """(phi_max, s_max) at the grid maximum; ties go to the smaller phi."""
        k = int(np.argmax(self.values))
        return float(self.phis[k]), float(self.values[k])

    def value_at(self, phi: float) -> float:
        k = int(np.argmin(np.abs(np.angle(np.exp(1j * (self.phis - phi))))))
        return float(self.values[k])


def phase_distribution(rho: np.ndarray, n_theta: int = 64, n_phi: int = 128) -> PhaseDistribution:
    """s(phi) = int_0^pi sin(theta) Q(theta, phi) d theta - 1/(2 pi)."""
    if n_theta < 64 or n_phi < 128:
        raise ValueError("need at least 64 theta nodes and 128 phi points")
    theta, w = theta_quadrature(n_theta)
    phis = phase_grid(n_phi)
    q = husimi_q(rho, theta[None, :], phis[:, None])
    marginal = q @ (w * np.sin(theta))
    return PhaseDistribution(phis, marginal - UNIFORM_DENSITY, {"n_theta": n_theta, "n_phi": n_phi})


def driven_steady_state(p: ModelParams) -> np.ndarray:
    """Steady state of a single oscillator under the resonant external drive."""
    return steady_state_nullspace(driven_liouvillian(p))


def exact_two_oscillator_steady_state(p: ModelParams) -> np.ndarray:
    return steady_state_nullspace(two_oscillator_liouvillian(p))


def unperturbed_two_oscillator_state() -> np.ndarray:
    psi = np.kron(ket(1), ket(1))
    return np.outer(psi, psi.conj())


def perturbative_two_oscillator_steady_state(p: ModelParams) -> np.ndarray:
    """Steady state to first order in V_AB around |1,1><1,1|.

    Solves L0 rho1 = -V_AB Lx rho0 together with Tr rho1 = 0, where L0 is the
    uncoupled Liouvillian and Lx the unit-strength exchange coupling.  The
    extra trace row removes the kernel of L0 and makes the least-squares
    solution unique.
    """
    l0 = uncoupled_two_oscillator_liouvillian(p)
    s = np.linalg.svd(l0, compute_uv=False)
    kernel_dim = int(np.sum(s <= 1e-9 * max(1.0, s[0])))
    if kernel_dim != 1:
        raise DegenerateSteadyStateError(kernel_dim, s)
    rho0 = unperturbed_two_oscillator_state()
    if p.V_AB == 0:
        return rho0
    source = -p.V_AB * (exchange_liouvillian() @ vectorize(rho0))
    a = np.vstack([l0, trace_row(9)[None, :]])
    b = np.concatenate([source, [0.0]])
    rho1, *_ = np.linalg.lstsq(a, b, rcond=None)
    return normalize_density(rho0 + devectorize(rho1))


def relative_phase_distribution(
    rho: np.ndarray, n_phi_ab: int = 128, n_theta: int = 48, n_phi_b: int = 96
) -> PhaseDistribution:
    """s(phi_AB) for a two-oscillator state.

    Integrates Q(theta_A, theta_B, phi_AB + phi_B, phi_B) sin(theta_A) sin(theta_B)
    over theta_A, theta_B (Gauss-Legendre) and phi_B (trapezoid), rescales the
    result to unit total probability and subtracts 1/(2 pi).
    """
    if n_phi_ab < 128 or n_theta < 48 or n_phi_b < 96:
        raise ValueError("quadrature counts below (48, 48, 96) / 128")
    theta, w = theta_quadrature(n_theta)
    amps = _theta_amplitudes(theta)  # (n_theta, 3)
    # theta integrals factor: W[a, c] = sum_k w_k sin(theta_k) c_a(theta_k) c_c(theta_k)
    weights = np.einsum("k,ka,kc->ac", w * np.sin(theta), amps, amps)
    r4 = rho.reshape(3, 3, 3, 3)  # [a, b, c, d] for <a b| rho |c d>
    core = np.einsum("abcd,ac,bd->abcd", r4, weights, weights)
    dm = _M[:, None] - _M[None, :]  # m_a - m_c
    phi_ab = phase_grid(n_phi_ab)
    phi_b = phase_grid(n_phi_b)
    phase_a = np.exp(1j * (phi_ab[:, None, None, None] + phi_b[None, :, None, None]) * dm)
    phase_b = np.exp(1j * phi_b[:, None, None] * dm)
    total = np.einsum("abcd,xyac,ybd->x", core, phase_a, phase_b) * (2.0 * np.pi / n_phi_b)
    density = 9.0 / (16.0 * np.pi**2) * total.real
    norm = float(np.sum(density) * 2.0 * np.pi / n_phi_ab)
    values = density / norm - UNIFORM_DENSITY
    meta = {
        "n_phi_ab": n_phi_ab,
        "n_theta": n_theta,
        "n_phi_b": n_phi_b,
        "raw_normalization": norm,
        "normalization": "reduced distribution rescaled to unit integral before subtracting 1/(2 pi)",
    }
    return PhaseDistribution(phi_ab, values, meta)


@dataclass(frozen=True)
class MicroscopicCell:
    max_value: float
    argmax_phase: float


def microscopic_cell(p: ModelParams, n_phi_ab: int = 128) -> MicroscopicCell:
    rho = perturbative_two_oscillator_steady_state(p)
    phi, val = relative_phase_distribution(rho, n_phi_ab=n_phi_ab).peak()
    return MicroscopicCell(val, phi)


def closer_to_zero(phi) -> np.ndarray:
    """True where phi (mod 2 pi) is strictly closer to 0 than to pi."""
    phi = np.mod(np.asarray(phi, dtype=float), 2.0 * np.pi)
    d0 = np.minimum(phi, 2.0 * np.pi - phi)
    dpi = np.abs(phi - np.pi)
    return d0 < dpi


def sync_bitmap(max_values, argmax_phases, threshold: float = BITMAP_THRESHOLD) -> np.ndarray:
    """Cells whose peak exceeds ``threshold`` at a phase closer to 0 than to pi."""
    max_values = np.asarray(max_values, dtype=float)
    return (max_values > threshold) & closer_to_zero(argmax_phases)


def rotate_both(rho: np.ndarray, alpha: float) -> np.ndarray:
    """Conjugate a two-oscillator state by exp(-i alpha S^z) on both sites."""
    u1 = np.diag(np.exp(-1j * alpha * _M))
    u = tensor(u1, u1)
    return u @ rho @ u.conj().T
