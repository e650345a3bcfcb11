"""Time integration of the mean-field equations and the order parameter."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _dopri
from .model import GroupLabel, MeanFieldState, ModelParams, single_site_liouvillian
from .quantum import SM, SP, commutator_superop, devectorize, ketbra, vectorize

MAX_AMPLITUDE = np.sqrt(2.0)
POSITIVITY_TOL = 1e-6


class StiffnessError(RuntimeError):
    def __init__(self, message: str, t_reached: float):
        self.t_reached = t_reached
        super().__init__(f"{message} (reached t = {t_reached:.6g})")


class DiagnosticsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    t_final: float = 5000.0
    n_samples: int = 5000
    rel_tol: float = 1e-9
    abs_tol: float = 1e-9
    max_step: float = 0.1

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        for name in ("rel_tol", "abs_tol"):
            tol = getattr(self, name)
            if not 0 < tol <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {tol}")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_samples)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    amps_a: np.ndarray
    amps_b: np.ndarray
    states_a: np.ndarray | None = None
    states_b: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def amps(self, group: GroupLabel) -> np.ndarray:
        return self.amps_a if group is GroupLabel.A else self.amps_b

    def states(self, group: GroupLabel) -> np.ndarray:
        s = self.states_a if group is GroupLabel.A else self.states_b
        if s is None:
            raise ValueError("trajectory was recorded without full states")
        return s

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def default_initial(
    kind: Literal["perturbed", "uniform"] = "perturbed", coherence: complex = 0.1
) -> np.ndarray:
    """I/3, optionally plus ``coherence`` on |1><2| (and its conjugate on |2><1|)."""
    rho = np.eye(3, dtype=complex) / 3
    if kind == "uniform":
        return rho
    if kind != "perturbed":
        raise ValueError(f"unknown initial state kind {kind!r}")
    return rho + coherence * ketbra(1, 2) + np.conj(coherence) * ketbra(2, 1)


def default_pair(coherence: complex = 0.1) -> MeanFieldState:
    """Two-group protocol: group A perturbed, group B uniform."""
    return MeanFieldState(default_initial("perturbed", coherence), default_initial("uniform"))


def amplitude(rho: np.ndarray) -> np.ndarray:
    """<S^+> = Tr(rho S^+) for a single state or a stack of states."""
    return np.einsum("...ij,ji->...", rho, SP)


_WM = vectorize(SM.T).copy()
_WP = vectorize(SP.T).copy()


def _coo_pattern(*mats: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shared sparsity pattern of several 9x9 matrices and their values on it."""
    mask = np.zeros(mats[0].shape, dtype=bool)
    for m in mats:
        mask |= m != 0
    rows, cols = np.nonzero(mask)
    vals = np.array([m[rows, cols] for m in mats], dtype=np.complex128)
    return rows.astype(np.int64), cols.astype(np.int64), vals


_CROW, _CCOL, _CVALS = _coo_pattern(commutator_superop(SP), commutator_superop(SM))


def integrate(
    p: ModelParams,
    init: MeanFieldState,
    cfg: IntegratorConfig = IntegratorConfig(),
    keep_states: bool = False,
) -> Trajectory:
    """Integrate the mean-field equations with adaptive Dormand-Prince steps.

    The state is reported at ``cfg.n_samples`` uniformly spaced times in
    ``[0, cfg.t_final]``.
    """
    times = cfg.sample_times()
    y0 = np.concatenate([vectorize(init.rho_a), vectorize(init.rho_b)]).astype(np.complex128)
    lrow, lcol, lval = _coo_pattern(
        single_site_liouvillian(p, GroupLabel.A), single_site_liouvillian(p, GroupLabel.B)
    )
    samples, status, t_reached, n_acc, n_rej = _dopri.integrate_meanfield(
        y0, times, lrow, lcol, lval, _CROW, _CCOL, _CVALS[0], _CVALS[1], _WM, _WP,
        float(p.V), float(p.V_AB), cfg.rel_tol, cfg.abs_tol, cfg.max_step,
    )
    if status == _dopri.STATUS_STEP_UNDERFLOW:
        raise StiffnessError("step size underflow", t_reached)
    if status == _dopri.STATUS_NONFINITE:
        raise StiffnessError("non-finite state", t_reached)

    states = samples.reshape(len(times), 2, 3, 3).transpose(0, 1, 3, 2)
    states_a = np.ascontiguousarray(states[:, 0])
    states_b = np.ascontiguousarray(states[:, 1])
    diag = _state_diagnostics(states_a, states_b)
    diag.update(n_accepted=int(n_acc), n_rejected=int(n_rej))
    if diag["min_eigenvalue"] < -POSITIVITY_TOL:
        warnings.warn(
            f"density matrix eigenvalue {diag['min_eigenvalue']:.3e} below "
            f"-{POSITIVITY_TOL:g}; tighten the tolerances",
            DiagnosticsWarning,
            stacklevel=2,
        )
    return Trajectory(
        times=times,
        amps_a=amplitude(states_a),
        amps_b=amplitude(states_b),
        states_a=states_a if keep_states else None,
        states_b=states_b if keep_states else None,
        diagnostics=diag,
    )


def _state_diagnostics(*stacks: np.ndarray) -> dict:
    trace_err = 0.0
    herm_err = 0.0
    min_eig = np.inf
    for s in stacks:
        trace_err = max(trace_err, float(np.max(np.abs(np.trace(s, axis1=1, axis2=2) - 1))))
        sh = s.conj().transpose(0, 2, 1)
        herm_err = max(herm_err, float(np.max(np.abs(s - sh))))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (s + sh)).min()))
    return {"max_trace_error": trace_err, "max_hermiticity_error": herm_err, "min_eigenvalue": min_eig}


def _window(n: int, window_fraction: float | None, last_n: int | None) -> slice:
    if last_n is not None:
        count = int(last_n)
    else:
        if window_fraction is None or not 0 < window_fraction <= 1:
            raise ValueError("window_fraction must lie in (0, 1]")
        count = int(round(window_fraction * n))
    if count < 1:
        raise ValueError("averaging window is empty")
    return slice(max(0, n - count), n)


def order_parameter(
    traj: Trajectory,
    group: GroupLabel = GroupLabel.A,
    window_fraction: float | None = 0.5,
    last_n: int | None = None,
) -> float:
    """Time average of |<S^+>| over the trailing part of the trajectory."""
    amps = traj.amps(group)
    return float(np.mean(np.abs(amps[_window(amps.size, window_fraction, last_n)])))


def coherence_02(traj: Trajectory, group: GroupLabel = GroupLabel.A) -> np.ndarray:
    """<|0><2|>(t) = Tr(rho |0><2|) = rho[2, 0] per sample."""
    return traj.states(group)[:, 2, 0].copy()


def swap_groups(state: MeanFieldState) -> MeanFieldState:
    """Exchange the groups; combined with delta -> -delta this is an exact relabeling."""
    return MeanFieldState(state.rho_b, state.rho_a)


def state_from_vector(y: np.ndarray) -> MeanFieldState:
    return MeanFieldState(devectorize(y[:9]), devectorize(y[9:]))
