"""Second-order cumulant equations for a single group of N oscillators.

Moments are expectation values of products of matrix units E_k = |a><b|
(k = 3a + b) on distinct sites:

    first[k]     = <E_k>                 (one site)
    second[k, l] = <E_k (x) E_l>         (two distinct sites, symmetric in k, l)

Permutation symmetry makes every site and every pair of sites equivalent.
The equations of motion d<O>/dt = <L^+(O)> are generated from the structure
constants of the matrix units.  Sums over partner sites collapse into the
multiplicities (N - 1) and (N - 2).  Three-site moments that appear in the
second-order equations are closed by dropping the third cumulant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import IntegratorConfig, StiffnessError
from .model import GroupLabel, ModelParams, bare_hamiltonian
from .quantum import SM, SP, dag, ketbra

N_OPS = 9
BASIS = [ketbra(a, b) for a in range(3) for b in range(3)]


def coefficients(op: np.ndarray) -> np.ndarray:
    """Expansion coefficients of a 3x3 operator in the matrix units."""
    return np.asarray(op, dtype=complex).reshape(N_OPS)


def left_mult_table(op: np.ndarray) -> np.ndarray:
    """T[k, l] with op E_k = sum_l T[k, l] E_l."""
    return np.array([coefficients(op @ e) for e in BASIS])


def right_mult_table(op: np.ndarray) -> np.ndarray:
    """T[k, l] with E_k op = sum_l T[k, l] E_l."""
    return np.array([coefficients(e @ op) for e in BASIS])


def adjoint_local_table(h: np.ndarray, jumps: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """A[k, l] with L^+(E_k) = i[h, E_k] + sum g (J^+ E_k J - {J^+ J, E_k}/2) = sum_l A[k, l] E_l."""
    rows = []
    for e in BASIS:
        out = 1j * (h @ e - e @ h)
        for rate, j in jumps:
            jd = dag(j)
            out = out + rate * (jd @ e @ j - 0.5 * (jd @ j @ e + e @ jd @ j))
        rows.append(coefficients(out))
    return np.array(rows)


def _multiplicities(n: float) -> tuple[float, float, float]:
    """Prefactors (1/N, (N-1)/N, (N-2)/N) of the pair coupling V/N."""
    if math.isinf(n):
        return 0.0, 1.0, 1.0
    return 1.0 / n, (n - 1.0) / n, (n - 2.0) / n


@dataclass(frozen=True)
class MomentState:
    first: np.ndarray  # (9,) complex
    second: np.ndarray  # (9, 9) complex

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.first, self.second.reshape(-1)])

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "MomentState":
        return cls(y[:N_OPS].copy(), y[N_OPS:].reshape(N_OPS, N_OPS).copy())

    @classmethod
    def product(cls, rho: np.ndarray) -> "MomentState":
        """Uncorrelated state with every site in ``rho``."""
        first = np.array([np.trace(rho @ e) for e in BASIS])
        return cls(first, np.outer(first, first))

    def density_matrix(self) -> np.ndarray:
        """Single-site reduced state: rho[b, a] = <|a><b|>."""
        return self.first.reshape(3, 3).T.copy()

    def amplitude(self) -> complex:
        """<S^+> = sqrt(2) (<|2><1|> + <|1><0|>)."""
        return complex(np.sqrt(2.0) * (self.first[3 * 2 + 1] + self.first[3 * 1 + 0]))

    def population_sum(self) -> float:
        return float(np.real(self.first[0] + self.first[4] + self.first[8]))

    def second_cumulant(self) -> np.ndarray:
        return self.second - np.outer(self.first, self.first)


@dataclass(frozen=True)
class CumulantSystem:
    """Generated moment equations for ``n`` identical all-to-all coupled oscillators."""

    n: float
    coupling: float
    local: np.ndarray  # A[k, l]
    comm_p: np.ndarray  # [S^+, E_k] coefficients
    comm_m: np.ndarray  # [S^-, E_k] coefficients
    left_p: np.ndarray
    left_m: np.ndarray
    right_p: np.ndarray
    right_m: np.ndarray
    sp: np.ndarray  # coefficients of S^+
    sm: np.ndarray  # coefficients of S^-
    closure: bool = True

    def rhs(self, y: np.ndarray) -> np.ndarray:
        first = y[:N_OPS]
        second = y[N_OPS:].reshape(N_OPS, N_OPS)
        inv_n, f1, f2 = _multiplicities(self.n)
        g = self.coupling
        a = self.local

        # <E_l (x) S^-> and <E_l (x) S^+>
        m2_m = second @ self.sm
        m2_p = second @ self.sp
        d_first = first @ a.T
        d_first = d_first + 1j * g * f1 * (self.comm_p @ m2_m + self.comm_m @ m2_p)

        d_second = a @ second + second @ a.T
        if inv_n:
            # exchange term of the pair itself, exact on two sites
            pair = (
                self.left_p @ second @ self.left_m.T
                - self.right_p @ second @ self.right_m.T
                + self.left_m @ second @ self.left_p.T
                - self.right_m @ second @ self.right_p.T
            )
            d_second = d_second + 1j * g * inv_n * pair
        if f2 and self.closure:
            t_m = self._three_site(first, second, self.sm, m2_m)
            t_p = self._three_site(first, second, self.sp, m2_p)
            # [S^+, E_k] on site 1 with S^- on the third site, and the mirror terms
            three = self.comm_p @ t_m + self.comm_m @ t_p
            d_second = d_second + 1j * g * f2 * (three + three.T)
        return np.concatenate([d_first, d_second.reshape(-1)])

    @staticmethod
    def _three_site(first, second, z, m2_z) -> np.ndarray:
        """<E_p (x) E_q (x) Z> with the third cumulant dropped."""
        mean_z = first @ z
        return (
            second * mean_z
            + np.outer(m2_z, first)
            + np.outer(first, m2_z)
            - 2.0 * np.outer(first, first) * mean_z
        )


def derive_equations(p: ModelParams, n: float, closure: bool = True) -> CumulantSystem:
    """Build the second-order moment equations of one group (V_AB ignored).

    ``n`` may be ``math.inf`` for the mean-field limit.
    """
    if not (math.isinf(n) or n >= 2):
        raise ValueError("need N >= 2")
    h = bare_hamiltonian(p, GroupLabel.A)
    lp, lm = left_mult_table(SP), left_mult_table(SM)
    rp, rm = right_mult_table(SP), right_mult_table(SM)
    return CumulantSystem(
        n=float(n),
        coupling=float(p.V),
        local=adjoint_local_table(h, p.jumps()),
        comm_p=lp - rp,
        comm_m=lm - rm,
        left_p=lp,
        left_m=lm,
        right_p=rp,
        right_m=rm,
        sp=coefficients(SP),
        sm=coefficients(SM),
        closure=closure,
    )


@dataclass(frozen=True)
class CumulantTrajectory:
    times: np.ndarray
    states: list[MomentState]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([s.amplitude() for s in self.states])

    @property
    def abs_amplitudes(self) -> np.ndarray:
        return np.abs(self.amplitudes)


def integrate_cumulant(
    system: CumulantSystem, init: MomentState, cfg: IntegratorConfig
) -> CumulantTrajectory:
    """Integrate the moment equations (scipy's Dormand-Prince 5(4))."""
    times = cfg.sample_times()
    sol = solve_ivp(
        lambda t, y: system.rhs(y),
        (0.0, cfg.t_final),
        init.to_vector().astype(complex),
        method="RK45",
        t_eval=times,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
    )
    if sol.status != 0:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise StiffnessError(sol.message, reached)
    return CumulantTrajectory(times, [MomentState.from_vector(y) for y in sol.y.T])


def lifetime(times: np.ndarray, series: np.ndarray, hold: int = 10) -> float | None:
    """First time |series| drops below |series[0]|/e and stays there for ``hold`` samples.

    The crossing is linearly interpolated between the bracketing samples.
    Returns None when the series never settles below the threshold.
    """
    series = np.abs(np.asarray(series))
    if not series[0] > 0:
        raise ValueError("series must start at a positive amplitude")
    level = series[0] / np.e
    below = series < level
    n = series.size
    for k in range(1, n):
        if below[k] and not below[k - 1]:
            if k + hold > n or not below[k:k + hold].all():
                continue
            t0, t1 = times[k - 1], times[k]
            s0, s1 = series[k - 1], series[k]
            return float(t0 + (s0 - level) / (s0 - s1) * (t1 - t0))
    return None
