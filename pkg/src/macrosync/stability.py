"""Linear stability of the unsynchronized fixed point rho_A = rho_B = |1><1|."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import GroupLabel, ModelParams, single_site_liouvillian, unsynchronized_state
from .quantum import SM, SP, commutator_superop, vectorize

NEUTRAL_EIG_TOL = 1e-10
SCAN_POINTS = 64
BISECTION_RTOL = 1e-4


class NeutralModeError(RuntimeError):
    """A near-zero mode overlaps only partially with the trace functionals."""


@dataclass(frozen=True)
class StabilityReport:
    spectral_abscissa: float
    leading_eigenvalue: complex
    unstable: bool


def _coupling_block() -> np.ndarray:
    # d/dt vec(drho) from the mean-field term -i[S^+ Tr(drho S^-) + S^- Tr(drho S^+), |1><1|]
    rho0 = vectorize(unsynchronized_state())
    u_p = commutator_superop(SP) @ rho0
    u_m = commutator_superop(SM) @ rho0
    w_m = vectorize(SM.T)
    w_p = vectorize(SP.T)
    return np.outer(u_p, w_m) + np.outer(u_m, w_p)


def linearized_generator(p: ModelParams) -> np.ndarray:
    """Jacobian of the mean-field flow at the unsynchronized fixed point.

    Acts on the stacked column-vectorized deviations (drho_A, drho_B) as an
    18x18 complex matrix.
    """
    c = _coupling_block()
    l0a = single_site_liouvillian(p, GroupLabel.A)
    l0b = single_site_liouvillian(p, GroupLabel.B)
    return np.block([[l0a + p.V * c, p.V_AB * c], [p.V_AB * c, l0b + p.V * c]])


def _trace_functionals() -> np.ndarray:
    t = vectorize(np.eye(3)) / np.sqrt(3.0)
    z = np.zeros(9)
    return np.stack([np.concatenate([t, z]), np.concatenate([z, t])]).astype(complex)


def spectral_abscissa(p: ModelParams) -> StabilityReport:
    """Largest real part of the linearization, neutral trace modes excluded.

    A mode is neutral when its eigenvalue is below 1e-10 in magnitude and its
    left eigenvector lies (overlap > 0.99) in the span of the two trace
    functionals.
    """
    w, vl = scipy.linalg.eig(linearized_generator(p), left=True, right=False)
    basis = _trace_functionals()
    keep = np.ones(w.size, dtype=bool)
    for k in np.flatnonzero(np.abs(w) <= NEUTRAL_EIG_TOL):
        v = vl[:, k] / np.linalg.norm(vl[:, k])
        overlap = float(np.linalg.norm(basis.conj() @ v))
        if overlap > 0.99:
            keep[k] = False
        elif overlap > 0.5:
            raise NeutralModeError(
                f"near-zero eigenvalue {w[k]:.3e} has ambiguous trace overlap {overlap:.3f}"
            )
    w = w[keep]
    k = int(np.argmax(w.real))
    abscissa = float(w[k].real)
    return StabilityReport(abscissa, complex(w[k]), abscissa > 0)


def critical_coupling(p: ModelParams, v_max: float | None = None) -> float | None:
    """Smallest intra-group coupling V at which the fixed point turns unstable.

    Scans ``SCAN_POINTS`` values of V in (0, v_max], then bisects the first
    stable-to-unstable crossing to a relative width of 1e-4.  Returns None when
    no crossing exists up to ``v_max`` (default 20 (gamma_minus + gamma_plus)).
    """
    if v_max is None:
        v_max = 20.0 * p.gamma_sum
    if not v_max > 0:
        raise ValueError("v_max must be positive")

    def unstable(v: float) -> bool:
        return spectral_abscissa(p.with_(V=v)).unstable

    grid = v_max * np.arange(1, SCAN_POINTS + 1) / SCAN_POINTS
    flags = np.array([unstable(v) for v in grid])
    if not flags.any():
        return None
    crossings = int(np.sum(flags[1:] != flags[:-1])) + int(flags[0])
    if crossings > 1:
        warnings.warn(
            f"non-monotonic stability pattern ({crossings} crossings); reporting the first",
            RuntimeWarning,
            stacklevel=2,
        )
    first = int(np.argmax(flags))
    lo = 0.0 if first == 0 else float(grid[first - 1])
    hi = float(grid[first])
    if unstable(lo):
        return lo
    while hi - lo > BISECTION_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
