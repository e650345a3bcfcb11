"""Physical model: the two-group network, its mean-field reduction and the
few-body special cases used for the microscopic analysis.

Rates and frequencies are measured in units of the loss rate gamma_minus.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from .quantum import (
    DIM,
    SM,
    SP,
    SZ,
    commutator,
    dissipator,
    embed,
    ketbra,
    liouvillian,
    tensor,
)

P2 = ketbra(2, 2)
GAIN_OP = ketbra(1, 0)  # |1><0|, rate gamma_plus
LOSS_OP = ketbra(1, 2)  # |1><2|, rate gamma_minus


class GroupLabel(enum.Enum):
    A = "A"
    B = "B"

    @property
    def sign(self) -> int:
        return 1 if self is GroupLabel.A else -1

    @property
    def other(self) -> "GroupLabel":
        return GroupLabel.B if self is GroupLabel.A else GroupLabel.A


@dataclass(frozen=True)
class ModelParams:
    delta: float = 0.0
    K: float = 0.0
    V: float = 0.0
    V_AB: float = 0.0
    gamma_plus: float = 0.5
    gamma_minus: float = 1.0
    Omega: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                raise ValueError(f"parameter {name} must be finite, got {value}")
        if self.gamma_plus < 0:
            raise ValueError("gamma_plus must be >= 0")
        if self.gamma_minus <= 0:
            raise ValueError("gamma_minus must be > 0")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def gamma_sum(self) -> float:
        return self.gamma_plus + self.gamma_minus

    def jumps(self) -> list[tuple[float, np.ndarray]]:
        return [(self.gamma_plus, GAIN_OP), (self.gamma_minus, LOSS_OP)]


class MeanFieldState(NamedTuple):
    rho_a: np.ndarray
    rho_b: np.ndarray


def bare_hamiltonian(p: ModelParams, group: GroupLabel = GroupLabel.A) -> np.ndarray:
    return group.sign * 0.5 * p.delta * SZ + p.K * P2


def group_hamiltonian(
    p: ModelParams, group: GroupLabel, m_own: complex, m_other: complex
) -> np.ndarray:
    """Effective single-oscillator Hamiltonian of one group.

    ``m_own`` and ``m_other`` are the mean values <S^-> of the oscillator's own
    group and of the other group.
    """
    field = p.V * m_own + p.V_AB * m_other
    return bare_hamiltonian(p, group) + field * SP + np.conj(field) * SM


def local_dissipation(p: ModelParams, rho: np.ndarray) -> np.ndarray:
    return p.gamma_plus * dissipator(GAIN_OP, rho) + p.gamma_minus * dissipator(LOSS_OP, rho)


def _field_pair(rho: np.ndarray) -> tuple[complex, complex]:
    # (Tr rho S^-, Tr rho S^+); conjugate to each other for Hermitian rho
    return complex(np.sum(rho * SM.T)), complex(np.sum(rho * SP.T))


def _group_rhs(p: ModelParams, group: GroupLabel, rho, own, other) -> np.ndarray:
    c = p.V * own[0] + p.V_AB * other[0]
    d = p.V * own[1] + p.V_AB * other[1]
    h = bare_hamiltonian(p, group) + c * SP + d * SM
    return -1j * commutator(h, rho) + local_dissipation(p, rho)


def meanfield_rhs(p: ModelParams, state: MeanFieldState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of (rho_A, rho_B) under the coupled mean-field equations.

    The h.c. partner of each mean field is evaluated as Tr(rho S^+) instead of
    conj(Tr(rho S^-)).  Both agree on Hermitian states; the former keeps the
    right-hand side a polynomial in the matrix entries, so its Jacobian is
    complex-linear on the full 9+9 entry space.
    """
    rho_a, rho_b = state
    fa = _field_pair(rho_a)
    fb = _field_pair(rho_b)
    return (
        _group_rhs(p, GroupLabel.A, rho_a, fa, fb),
        _group_rhs(p, GroupLabel.B, rho_b, fb, fa),
    )


def single_site_liouvillian(p: ModelParams, group: GroupLabel = GroupLabel.A) -> np.ndarray:
    """Uncoupled 9x9 Liouvillian of one oscillator of ``group``."""
    return liouvillian(bare_hamiltonian(p, group), p.jumps())


def driven_hamiltonian(p: ModelParams) -> np.ndarray:
    return p.K * P2 + p.Omega * (SP + SM)


def driven_liouvillian(p: ModelParams) -> np.ndarray:
    """Liouvillian of one oscillator resonantly driven with strength Omega."""
    return liouvillian(driven_hamiltonian(p), p.jumps())


def two_oscillator_hamiltonian(p: ModelParams, coupling: bool = True) -> np.ndarray:
    sz_a, sz_b = embed(SZ, 0), embed(SZ, 1)
    h = 0.5 * p.delta * (sz_a - sz_b) + p.K * (embed(P2, 0) + embed(P2, 1))
    if coupling:
        h = h + p.V_AB * exchange_operator()
    return h


def exchange_operator() -> np.ndarray:
    """S^+_A S^-_B + S^+_B S^-_A on the 9-dimensional product space."""
    return tensor(SP, SM) + tensor(SM, SP)


def two_oscillator_jumps(p: ModelParams) -> list[tuple[float, np.ndarray]]:
    jumps = []
    for site in (0, 1):
        jumps.append((p.gamma_plus, embed(GAIN_OP, site)))
        jumps.append((p.gamma_minus, embed(LOSS_OP, site)))
    return jumps


def two_oscillator_liouvillian(p: ModelParams) -> np.ndarray:
    """81x81 Liouvillian of one oscillator from each group coupled by V_AB."""
    return liouvillian(two_oscillator_hamiltonian(p), two_oscillator_jumps(p))


def uncoupled_two_oscillator_liouvillian(p: ModelParams) -> np.ndarray:
    return liouvillian(two_oscillator_hamiltonian(p, coupling=False), two_oscillator_jumps(p))


def exchange_liouvillian() -> np.ndarray:
    """Superoperator of rho -> -i[S^+_A S^-_B + h.c., rho] (unit coupling)."""
    return liouvillian(exchange_operator())


def unsynchronized_state() -> np.ndarray:
    return ketbra(1, 1, DIM)
