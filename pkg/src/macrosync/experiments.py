"""Figure-reproducing sweeps: defaults, cell functions, assembly and output.

Every experiment turns its resolved configuration into a list of
independent cells, evaluates them with :func:`macrosync.sweep.run_cells`
and assembles the results into CSV tables.  All quantities are in units of
gamma_minus.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .config import ExperimentConfig, format_value
from .cumulant import MomentState, derive_equations, integrate_cumulant, lifetime
from .dynamics import (
    IntegratorConfig,
    default_initial,
    default_pair,
    integrate,
    order_parameter,
)
from .heatmap import heatmap_svg
from .microscopic import (
    BITMAP_THRESHOLD,
    DRIVE_STRENGTH,
    driven_steady_state,
    microscopic_cell,
    phase_distribution,
    sync_bitmap,
)
from .model import GroupLabel, MeanFieldState, ModelParams
from .spectral import locking_cell, spectrum
from .stability import critical_coupling, spectral_abscissa
from .sweep import CellResult, run_cells

CSV_FORMAT = "%.12e"
UNIT = "gamma_minus"
TIME_UNIT = "1/gamma_minus"
DIMLESS = "1"


# ---------------------------------------------------------------- tables


@dataclass
class Table:
    columns: list[str]
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.size == 0:
            self.rows = np.zeros((0, len(self.columns)))
        if self.rows.shape[1] != len(self.columns):
            raise ValueError(f"{self.rows.shape[1]} values per row but {len(self.columns)} columns")

    def column(self, name: str) -> np.ndarray:
        names = [c.split(" (")[0] for c in self.columns]
        return self.rows[:, names.index(name)]

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join(CSV_FORMAT % v for v in r))
        return "\n".join(lines) + "\n"


def col(name: str, unit: str = DIMLESS) -> str:
    return f"{name} ({unit})"


@dataclass(frozen=True)
class MapSpec:
    """A long-format table that is also rendered as a heatmap."""

    table: str
    x: str
    y: str
    value: str
    scale: str = "gray"


@dataclass
class ResultBundle:
    experiment: str
    config: ExperimentConfig
    tables: dict[str, Table]
    maps: list[MapSpec] = field(default_factory=list)
    n_cells: int = 0
    failures: list[tuple[str, int, str, str]] = field(default_factory=list)
    diagnostics: dict[str, float] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def failure_fraction(self) -> float:
        return len(self.failures) / self.n_cells if self.n_cells else 0.0


class _Collector:
    """Runs cell batches and accumulates failures and diagnostics."""

    def __init__(self, workers: int):
        self.workers = workers
        self.n_cells = 0
        self.failures: list[tuple[str, int, str, str]] = []
        self.diag = {"max_trace_error": 0.0, "max_hermiticity_error": 0.0, "min_eigenvalue": math.inf}
        self.warnings: list[str] = []

    def run(self, stage: str, func: Callable, tasks: list) -> list[Any]:
        results: list[CellResult] = run_cells(func, tasks, self.workers)
        self.n_cells += len(results)
        values = []
        for r in results:
            if not r.ok:
                self.failures.append((stage, r.index, r.error_code, r.error_message.splitlines()[0]))
                values.append(None)
                continue
            self.warnings.extend(f"{stage}[{r.index}]: {w}" for w in r.warnings)
            d = r.value.get("diagnostics") if isinstance(r.value, dict) else None
            if d:
                self.diag["max_trace_error"] = max(self.diag["max_trace_error"], d["max_trace_error"])
                self.diag["max_hermiticity_error"] = max(
                    self.diag["max_hermiticity_error"], d["max_hermiticity_error"]
                )
                self.diag["min_eigenvalue"] = min(self.diag["min_eigenvalue"], d["min_eigenvalue"])
            values.append(r.value)
        return values

    def diagnostics(self) -> dict[str, float]:
        return {k: v for k, v in self.diag.items() if math.isfinite(v)}


# ---------------------------------------------------------------- helpers


def _params(cfg: ExperimentConfig, **over) -> ModelParams:
    m = cfg.section("model")
    m.update(over)
    return ModelParams(**m)


def _integrator(cfg: ExperimentConfig) -> dict:
    return cfg.section("integrator")


def axis(cfg: ExperimentConfig, name: str, section: str = "grid") -> np.ndarray:
    s = cfg.section(section)
    return np.linspace(s[f"{name}_min"], s[f"{name}_max"], s[f"{name}_points"])


def _nan(v):
    return float("nan") if v is None else float(v)


def _order_kwargs(a: dict) -> dict:
    last_n = a.get("order_last_n", 0)
    return {"window_fraction": a.get("order_fraction", 0.5), "last_n": last_n if last_n > 0 else None}


# ---------------------------------------------------------------- cell functions


def cell_trace(task: dict) -> dict:
    """Full <S^+> time series of both groups."""
    p = ModelParams(**task["params"])
    init = MeanFieldState(*task["init"])
    traj = integrate(p, init, IntegratorConfig(**task["integrator"]))
    return {
        "times": traj.times,
        "amps_a": traj.amps_a,
        "amps_b": traj.amps_b,
        "diagnostics": traj.diagnostics,
    }


def cell_order(task: dict) -> dict:
    """Single-group order parameter and time-averaged coherence magnitudes."""
    p = ModelParams(**task["params"])
    rho = default_initial("perturbed", task.get("coherence", 0.1))
    traj = integrate(p, MeanFieldState(rho, rho), IntegratorConfig(**task["integrator"]), keep_states=True)
    kw = _order_kwargs(task["analysis"])
    order = order_parameter(traj, GroupLabel.A, **kw)
    states = traj.states(GroupLabel.A)
    n = states.shape[0]
    last = kw["last_n"] if kw["last_n"] else int(round(kw["window_fraction"] * n))
    window = states[n - last:]
    coh = {f"coh_{a}{b}": float(np.mean(np.abs(window[:, a, b]))) for a, b in ((0, 1), (1, 2), (0, 2))}
    return {"order": order, **coh, "diagnostics": traj.diagnostics}


def cell_locking(task: dict) -> dict:
    """Two-group run: dominant frequencies, order parameters, relative phase, optional spectra."""
    p = ModelParams(**task["params"])
    traj = integrate(p, default_pair(task.get("coherence", 0.1)), IntegratorConfig(**task["integrator"]))
    a = task["analysis"]
    kw = _order_kwargs(a)
    cell = locking_cell(
        traj,
        spectrum_fraction=a["spectrum_fraction"],
        order_last_n=kw["last_n"],
        order_fraction=kw["window_fraction"],
    )
    out = {
        "omega_a": _nan(cell.omega_a),
        "omega_b": _nan(cell.omega_b),
        "order_a": cell.order_a,
        "order_b": cell.order_b,
        "relative_phase": cell.relative_phase,
        "difference": cell.frequency_difference,
        "bin_width": cell.bin_width,
        "diagnostics": traj.diagnostics,
    }
    wmax = task.get("omega_max")
    if wmax:
        sa = spectrum(traj, GroupLabel.A, a["spectrum_fraction"])
        sb = spectrum(traj, GroupLabel.B, a["spectrum_fraction"])
        keep = np.abs(sa.freqs) <= wmax
        out["spectrum"] = (sa.freqs[keep], sa.mags[keep], sb.mags[keep])
    return out


def cell_critical(task: dict) -> dict:
    p = ModelParams(**task["params"])
    vc = critical_coupling(p, task.get("v_max"))
    return {"v_c": _nan(vc)}


def cell_abscissa(task: dict) -> dict:
    return {"abscissa": spectral_abscissa(ModelParams(**task["params"])).spectral_abscissa}


def cell_driven(task: dict) -> dict:
    p = ModelParams(**task["params"])
    s = phase_distribution(driven_steady_state(p), task["n_theta"], task["n_phi"])
    return {"phis": s.phis, "values": s.values, "total": s.total_probability()}


def cell_micro(task: dict) -> dict:
    c = microscopic_cell(ModelParams(**task["params"]), task["n_phi_ab"])
    return {"max": c.max_value, "argmax": c.argmax_phase}


def cell_cumulant(task: dict) -> dict:
    p = ModelParams(**task["params"])
    sys = derive_equations(p, task["n"])
    init = MomentState.product(default_initial("perturbed", task.get("coherence", 0.1)))
    tr = integrate_cumulant(sys, init, IntegratorConfig(**task["integrator"]))
    amps = tr.abs_amplitudes
    return {
        "times": tr.times,
        "abs_amps": amps,
        "lifetime": _nan(lifetime(tr.times, amps, task.get("hold", 10))),
        "reference": float(amps[0]),
        "max_population_error": float(max(abs(s.population_sum() - 1.0) for s in tr.states)),
    }


# ---------------------------------------------------------------- defaults

_MODEL = {
    "delta": 0.0,
    "K": 0.0,
    "V": 0.0,
    "V_AB": 0.0,
    "gamma_plus": 0.5,
    "gamma_minus": 1.0,
    "Omega": 0.0,
}


def _model(**kw) -> dict:
    d = dict(_MODEL)
    d.update(kw)
    return d


def _integ(t_final: float, n_samples: int, rel_tol=1e-9, abs_tol=1e-9, max_step=0.1) -> dict:
    return {
        "t_final": float(t_final),
        "n_samples": int(n_samples),
        "rel_tol": rel_tol,
        "abs_tol": abs_tol,
        "max_step": max_step,
    }


def _grid(**axes: tuple[float, float, int]) -> dict:
    g = {}
    for name, (lo, hi, n) in axes.items():
        g[f"{name}_min"] = float(lo)
        g[f"{name}_max"] = float(hi)
        g[f"{name}_points"] = int(n)
    return g


DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "fig2a": {
        "model": _model(gamma_plus=0.5),
        "integrator": _integ(100.0, 2001),
        "grid": {"v_over_gsum_values": (0.2, 0.6)},
        "analysis": {"coherence_re": 0.1, "coherence_im": 0.2},
    },
    "fig2b": {
        "model": _model(gamma_plus=0.5),
        "integrator": _integ(5000.0, 5000),
        "grid": _grid(v_over_gsum=(0.0, 1.0, 320)),
        "analysis": {"order_fraction": 0.5, "order_last_n": 0},
    },
    "fig2c": {
        "model": _model(),
        "integrator": _integ(10000.0, 10000),
        "grid": {**_grid(v_over_gsum=(0.0, 1.0, 255), gamma_ratio=(0.1, 2.0, 255)), "k_over_gsum_values": (0.0, -0.1, 0.1)},
        "analysis": {"order_fraction": 0.5, "order_last_n": 1000},
    },
    "fig2d": {
        "model": _model(Omega=DRIVE_STRENGTH),
        "grid": {"k_over_gsum_values": (-0.1, 0.0, 0.1), "gamma_ratio_values": (1.0, 0.5)},
        "analysis": {"n_theta": 64, "n_phi": 128},
    },
    "fig3": {
        "model": _model(V=1.0, V_AB=0.5, gamma_plus=0.5),
        "integrator": _integ(1000.0, 10000),
        "grid": _grid(delta=(-2.0, 2.0, 255), v_ab=(0.0, 1.0, 255)),
        "analysis": {"spectrum_fraction": 0.5, "order_fraction": 0.5, "order_last_n": 0, "omega_max": 5.0},
    },
    "figS2": {
        "model": _model(V=1.0, gamma_plus=0.5),
        "integrator": _integ(1000.0, 10000),
        "grid": {**_grid(delta=(-2.0, 2.0, 255)), "v_ab_values": (0.25, 0.5, 1.0)},
        "analysis": {"spectrum_fraction": 0.5, "order_fraction": 0.5, "order_last_n": 0, "omega_max": 5.0},
    },
    "fig4": {
        "model": _model(V=1.0, V_AB=1.0, gamma_plus=0.5),
        "integrator": _integ(500.0, 10000),
        "grid": _grid(delta=(-16.0, 16.0, 255), K=(-16.0, 16.0, 255)),
        "analysis": {"spectrum_fraction": 0.5, "order_fraction": 0.5, "order_last_n": 1000},
    },
    "figS3": {
        "model": _model(V=1.0, V_AB=1.0, gamma_plus=0.5),
        "integrator": _integ(1000.0, 10000),
        "grid": {**_grid(delta=(-16.0, 16.0, 255)), "k_values": (-10.0, 0.0, 10.0)},
        "analysis": {"spectrum_fraction": 0.5, "order_fraction": 0.5, "order_last_n": 1000, "omega_max": 20.0},
    },
    "figS1": {
        "model": _model(V_AB=0.05, gamma_plus=0.5),
        "grid": _grid(delta=(-16.0, 16.0, 255), K=(-16.0, 16.0, 255)),
        "analysis": {"threshold": BITMAP_THRESHOLD, "n_phi_ab": 128},
    },
    "figS4": {
        "model": _model(gamma_plus=0.5),
        "integrator": _integ(400.0, 401, rel_tol=1e-8, abs_tol=1e-10, max_step=0.5),
        "grid": {
            "n_values": (100.0, 250.0, 500.0, 1000.0, 2000.0),
            "v_values": (0.75, 1.0, 1.25, 1.5),
            "trace_n_values": (100.0, 500.0, 1000.0, 2000.0, math.inf),
            "trace_v": 1.0,
        },
        "analysis": {"hold": 10},
    },
    "custom": {
        "model": _model(),
        "integrator": _integ(100.0, 1001),
        "analysis": {
            "spectrum_fraction": 0.5,
            "order_fraction": 0.5,
            "order_last_n": 0,
            "init_a": "perturbed",
            "init_b": "uniform",
            "coherence": 0.1,
        },
    },
}

EXPERIMENT_IDS = tuple(DEFAULTS)


# ---------------------------------------------------------------- experiments


def _run_fig2a(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    a = cfg.section("analysis")
    rho = default_initial("perturbed", complex(a["coherence_re"], a["coherence_im"]))
    base = _params(cfg)
    ratios = cfg.get("grid", "v_over_gsum_values")
    tasks = [
        {"params": vars_(base.with_(V=r * base.gamma_sum)), "init": (rho, rho), "integrator": _integrator(cfg)}
        for r in ratios
    ]
    res = c.run("trace", cell_trace, tasks)
    times = IntegratorConfig(**_integrator(cfg)).sample_times()
    cols = [col("t", TIME_UNIT)]
    data = [times]
    for r, v in zip(ratios, res):
        amps = v["amps_a"] if v else np.full(times.size, np.nan)
        cols += [col(f"re_amp_v{r:g}"), col(f"im_amp_v{r:g}")]
        data += [np.real(amps), np.imag(amps)]
    return _bundle(cfg, {"fig2a_traces": Table(cols, np.column_stack(data))})


def vars_(p: ModelParams) -> dict:
    return {k: getattr(p, k) for k in _MODEL}


def _run_fig2b(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    base = _params(cfg)
    ratios = axis(cfg, "v_over_gsum")
    tasks = [
        {
            "params": vars_(base.with_(V=r * base.gamma_sum)),
            "integrator": _integrator(cfg),
            "analysis": cfg.section("analysis"),
        }
        for r in ratios
    ]
    res = c.run("order", cell_order, tasks)
    keys = ["order", "coh_01", "coh_12", "coh_02"]
    rows = [[r, r * base.gamma_sum] + [(v[k] if v else np.nan) for k in keys] for r, v in zip(ratios, res)]
    cols = [col("v_over_gsum"), col("V", UNIT)] + [col(k) for k in keys]
    return _bundle(cfg, {"fig2b_order": Table(cols, rows)})


def _run_fig2c(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    base = _params(cfg)
    ratios = axis(cfg, "v_over_gsum")
    gammas = axis(cfg, "gamma_ratio")
    tasks, index = [], []
    for g in gammas:
        pg = base.with_(gamma_plus=g * base.gamma_minus)
        for r in ratios:
            tasks.append(
                {
                    "params": vars_(pg.with_(V=r * pg.gamma_sum)),
                    "integrator": _integrator(cfg),
                    "analysis": cfg.section("analysis"),
                }
            )
            index.append((r, g))
    res = c.run("order", cell_order, tasks)
    rows = [[r, g, v["order"] if v else np.nan] for (r, g), v in zip(index, res)]
    tables = {"fig2c_map": Table([col("v_over_gsum"), col("gamma_ratio"), col("order")], rows)}

    kvals = cfg.get("grid", "k_over_gsum_values")
    crit_tasks = []
    for g in gammas:
        pg = base.with_(gamma_plus=g * base.gamma_minus)
        for k in kvals:
            crit_tasks.append({"params": vars_(pg.with_(K=k * pg.gamma_sum))})
    crit = c.run("critical", cell_critical, crit_tasks)
    rows = []
    for i, g in enumerate(gammas):
        gsum = (1.0 + g) * base.gamma_minus
        row = [g]
        for j in range(len(kvals)):
            v = crit[i * len(kvals) + j]
            row.append(v["v_c"] / gsum if v else np.nan)
        rows.append(row)
    cols = [col("gamma_ratio")] + [col(f"vc_over_gsum_k{k:g}") for k in kvals]
    tables["fig2c_critical"] = Table(cols, rows)
    return _bundle(cfg, tables, [MapSpec("fig2c_map", "v_over_gsum", "gamma_ratio", "order")])


def _run_fig2d(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    base = _params(cfg)
    a = cfg.section("analysis")
    combos = [(g, k) for g in cfg.get("grid", "gamma_ratio_values") for k in cfg.get("grid", "k_over_gsum_values")]
    tasks = []
    for g, k in combos:
        pg = base.with_(gamma_plus=g * base.gamma_minus)
        tasks.append({"params": vars_(pg.with_(K=k * pg.gamma_sum)), "n_theta": a["n_theta"], "n_phi": a["n_phi"]})
    res = c.run("driven", cell_driven, tasks)
    phis = 2.0 * np.pi * np.arange(a["n_phi"]) / a["n_phi"]
    cols, data = [col("phi", "rad")], [phis]
    for (g, k), v in zip(combos, res):
        cols.append(col(f"s_g{g:g}_k{k:g}", "1/rad"))
        data.append(v["values"] if v else np.full(phis.size, np.nan))
    return _bundle(cfg, {"fig2d_phase": Table(cols, np.column_stack(data))})


_LOCK_KEYS = ["difference", "omega_a", "omega_b", "order_a", "order_b", "relative_phase"]
_LOCK_COLS = [
    col("difference", UNIT),
    col("omega_a", UNIT),
    col("omega_b", UNIT),
    col("order_a"),
    col("order_b"),
    col("relative_phase", "rad"),
]


def _lock_tasks(cfg: ExperimentConfig, params: list[ModelParams], omega_max: float | None) -> list[dict]:
    a = cfg.section("analysis")
    return [
        {
            "params": vars_(p),
            "integrator": _integrator(cfg),
            "analysis": a,
            "omega_max": omega_max,
        }
        for p in params
    ]


def _lock_rows(index: list[tuple], res: list) -> list[list[float]]:
    return [list(ix) + [(v[k] if v else np.nan) for k in _LOCK_KEYS] for ix, v in zip(index, res)]


def _spectra_rows(index: list[tuple], res: list) -> list[list[float]]:
    rows = []
    for ix, v in zip(index, res):
        if not v:
            continue
        freqs, pa, pb = v["spectrum"]
        for w, x, y in zip(freqs, pa, pb):
            rows.append(list(ix) + [w, x, y])
    return rows


def _spectral_line(cfg: ExperimentConfig, c: _Collector, stage: str, column: str, values, override) -> dict:
    """Spectra and frequency difference versus delta for each value of one extra parameter."""
    base = _params(cfg)
    deltas = axis(cfg, "delta")
    wmax = cfg.get("analysis", "omega_max")
    index, params = [], []
    for val in values:
        for d in deltas:
            index.append((val, d))
            params.append(base.with_(delta=d, **{override: val}))
    res = c.run(stage, cell_locking, _lock_tasks(cfg, params, wmax))
    unit = UNIT
    head = [col(column, unit), col("delta", UNIT)]
    return {
        f"{stage}_difference": Table(head + _LOCK_COLS, _lock_rows(index, res)),
        f"{stage}_spectra": Table(head + [col("omega", UNIT), col("P_A"), col("P_B")], _spectra_rows(index, res)),
    }


def _run_fig3(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    base = _params(cfg)
    tables = _spectral_line(cfg, c, "fig3", "v_ab", [base.V_AB], "V_AB")
    deltas = axis(cfg, "delta")
    vabs = axis(cfg, "v_ab")
    index = [(d, v) for v in vabs for d in deltas]
    params = [base.with_(delta=d, V_AB=v) for d, v in index]
    res = c.run("fig3_map", cell_locking, _lock_tasks(cfg, params, None))
    tables["fig3_map"] = Table([col("delta", UNIT), col("v_ab", UNIT)] + _LOCK_COLS, _lock_rows(index, res))
    return _bundle(cfg, tables, [MapSpec("fig3_map", "delta", "v_ab", "difference", "diverging")])


def _run_figS2(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    tables = _spectral_line(cfg, c, "figS2", "v_ab", cfg.get("grid", "v_ab_values"), "V_AB")
    return _bundle(cfg, tables)


def _run_figS3(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    tables = _spectral_line(cfg, c, "figS3", "K", cfg.get("grid", "k_values"), "K")
    return _bundle(cfg, tables)


def _run_fig4(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    base = _params(cfg)
    deltas = axis(cfg, "delta")
    ks = axis(cfg, "K")
    index = [(d, k) for k in ks for d in deltas]
    params = [base.with_(delta=d, K=k) for d, k in index]
    res = c.run("fig4", cell_locking, _lock_tasks(cfg, params, None))
    table = Table([col("delta", UNIT), col("K", UNIT)] + _LOCK_COLS, _lock_rows(index, res))
    maps = [
        MapSpec("fig4_map", "delta", "K", "difference", "diverging"),
        MapSpec("fig4_map", "delta", "K", "order_a"),
        MapSpec("fig4_map", "delta", "K", "relative_phase", "diverging"),
    ]
    return _bundle(cfg, {"fig4_map": table}, maps)


def _run_figS1(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    base = _params(cfg)
    a = cfg.section("analysis")
    deltas = axis(cfg, "delta")
    ks = axis(cfg, "K")
    index = [(d, k) for k in ks for d in deltas]
    tasks = [{"params": vars_(base.with_(delta=d, K=k)), "n_phi_ab": a["n_phi_ab"]} for d, k in index]
    res = c.run("figS1", cell_micro, tasks)
    mx = np.array([v["max"] if v else np.nan for v in res])
    arg = np.array([v["argmax"] if v else np.nan for v in res])
    bits = sync_bitmap(np.nan_to_num(mx, nan=-np.inf), arg, a["threshold"]).astype(float)
    bits[np.isnan(mx)] = np.nan
    rows = np.column_stack([np.array(index), mx, arg, bits])
    table = Table([col("delta", UNIT), col("K", UNIT), col("max", "1/rad"), col("argmax", "rad"), col("bitmap")], rows)
    maps = [
        MapSpec("figS1_map", "delta", "K", "max"),
        MapSpec("figS1_map", "delta", "K", "argmax"),
        MapSpec("figS1_map", "delta", "K", "bitmap"),
    ]
    notes = {
        "phase_distribution_normalization": (
            "reduced relative-phase distribution rescaled to unit integral before subtracting 1/(2 pi)"
        ),
        "steady_state": "first order in V_AB around |1,1><1,1|",
    }
    return _bundle(cfg, {"figS1_map": table}, maps, notes)


def _run_figS4(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    base = _params(cfg)
    g = cfg.section("grid")
    hold = cfg.get("analysis", "hold")
    integ = _integrator(cfg)

    def task(n, v):
        return {"params": vars_(base.with_(V=v)), "n": n, "integrator": integ, "hold": hold}

    trace_ns = list(g["trace_n_values"])
    trace_res = c.run("figS4_traces", cell_cumulant, [task(n, g["trace_v"]) for n in trace_ns] + [task(2, 0.0)])
    times = IntegratorConfig(**integ).sample_times()
    cols, data = [col("t", TIME_UNIT)], [times]
    for n, v in zip(trace_ns + ["uncoupled"], trace_res):
        name = "uncoupled" if n == "uncoupled" else ("inf" if math.isinf(n) else f"{n:g}")
        cols.append(col(f"abs_amp_n{name}"))
        data.append(v["abs_amps"] if v else np.full(times.size, np.nan))

    pairs = [(n, v) for v in (0.0,) + tuple(g["v_values"]) for n in g["n_values"]]
    res = c.run("figS4_lifetimes", cell_cumulant, [task(n, v) for n, v in pairs])
    rows = [[n, v, r["lifetime"] if r else np.nan] for (n, v), r in zip(pairs, res)]
    refs = {float(r["reference"]) for r in res if r}
    worst = max((r["max_population_error"] for r in res + trace_res if r), default=0.0)
    notes = {
        "lifetime_reference": "initial amplitude |<S^+>(0)| = " + ", ".join(format_value(x) for x in sorted(refs)),
        "lifetime_rule": f"first 1/e crossing that stays below for {hold} samples, linear interpolation",
        "max_population_error": format_value(worst),
    }
    tables = {
        "figS4_traces": Table(cols, np.column_stack(data)),
        "figS4_lifetimes": Table([col("N"), col("V", UNIT), col("lifetime", TIME_UNIT)], rows),
    }
    return _bundle(cfg, tables, notes=notes)


def _run_custom(cfg: ExperimentConfig, c: _Collector) -> ResultBundle:
    p = _params(cfg)
    a = cfg.section("analysis")
    init = (default_initial(a["init_a"], a["coherence"]), default_initial(a["init_b"], a["coherence"]))
    integ = _integrator(cfg)
    (tr,) = c.run("custom", cell_locking_custom, [{"params": vars_(p), "init": init, "integrator": integ, "analysis": a}])
    times = IntegratorConfig(**integ).sample_times()
    if tr:
        data = [times, tr["amps_a"].real, tr["amps_a"].imag, tr["amps_b"].real, tr["amps_b"].imag]
    else:
        data = [times] + [np.full(times.size, np.nan)] * 4
    cols = [col("t", TIME_UNIT), col("re_amp_a"), col("im_amp_a"), col("re_amp_b"), col("im_amp_b")]
    summary = [[(tr[k] if tr else np.nan) for k in _LOCK_KEYS + ["abscissa"]]]
    tables = {
        "custom_trace": Table(cols, np.column_stack(data)),
        "custom_summary": Table(_LOCK_COLS + [col("spectral_abscissa", UNIT)], summary),
    }
    return _bundle(cfg, tables)


def cell_locking_custom(task: dict) -> dict:
    p = ModelParams(**task["params"])
    traj = integrate(p, MeanFieldState(*task["init"]), IntegratorConfig(**task["integrator"]))
    a = task["analysis"]
    kw = _order_kwargs(a)
    cell = locking_cell(traj, a["spectrum_fraction"], kw["last_n"], kw["window_fraction"])
    return {
        "omega_a": _nan(cell.omega_a),
        "omega_b": _nan(cell.omega_b),
        "order_a": cell.order_a,
        "order_b": cell.order_b,
        "relative_phase": cell.relative_phase,
        "difference": cell.frequency_difference,
        "abscissa": spectral_abscissa(p).spectral_abscissa,
        "amps_a": traj.amps_a,
        "amps_b": traj.amps_b,
        "diagnostics": traj.diagnostics,
    }


_RUNNERS = {
    "fig2a": _run_fig2a,
    "fig2b": _run_fig2b,
    "fig2c": _run_fig2c,
    "fig2d": _run_fig2d,
    "fig3": _run_fig3,
    "fig4": _run_fig4,
    "figS1": _run_figS1,
    "figS2": _run_figS2,
    "figS3": _run_figS3,
    "figS4": _run_figS4,
    "custom": _run_custom,
}


def _bundle(cfg, tables, maps=(), notes=None) -> ResultBundle:
    return ResultBundle(cfg.experiment, cfg, tables, list(maps), notes=dict(notes or {}))


def run(cfg: ExperimentConfig) -> ResultBundle:
    """Execute the sweep named by ``cfg.experiment``."""
    if cfg.experiment not in _RUNNERS:
        raise KeyError(f"unknown experiment {cfg.experiment!r}")
    start = time.perf_counter()
    collector = _Collector(cfg.workers)
    with np.errstate(all="ignore"):
        bundle = _RUNNERS[cfg.experiment](cfg, collector)
    bundle.n_cells = collector.n_cells
    bundle.failures = collector.failures
    bundle.diagnostics = collector.diagnostics()
    if collector.warnings:
        bundle.notes["diagnostic_warnings"] = str(len(collector.warnings))
    bundle.wall_time = time.perf_counter() - start
    return bundle


# ---------------------------------------------------------------- output


def metadata_text(bundle: ResultBundle) -> str:
    lines = [bundle.config.to_ini().rstrip("\n"), "", "[meta]"]
    meta = {
        "version": __version__,
        "wall_time_seconds": f"{bundle.wall_time:.3f}",
        "workers": str(bundle.config.workers),
        "resolution_scale_applied": format_value(bundle.config.resolution_scale),
        "n_cells": str(bundle.n_cells),
        "n_failed": str(len(bundle.failures)),
        "failure_fraction": format_value(bundle.failure_fraction),
        "units": "all rates, energies and frequencies in gamma_minus, times in 1/gamma_minus",
    }
    meta.update({f"diagnostics_{k}": format_value(float(v)) for k, v in bundle.diagnostics.items()})
    meta.update({f"note_{k}": v for k, v in sorted(bundle.notes.items())})
    for k, (stage, idx, code, msg) in enumerate(bundle.failures):
        meta[f"failure_{k}"] = f"{stage}[{idx}] {code}: {msg}".replace("\n", " ")
    lines += [f"{k} = {v}" for k, v in meta.items()]
    return "\n".join(lines) + "\n"


def write_bundle(bundle: ResultBundle, out_dir: str | Path | None = None) -> list[Path]:
    """Write every table as CSV, render map SVGs and write metadata.ini."""
    out = Path(out_dir if out_dir is not None else bundle.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in bundle.tables.items():
        path = out / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table.to_csv())
        written.append(path)
    from .heatmap import grid_from_long

    for spec in bundle.maps:
        t = bundle.tables[spec.table]
        names = [c.split(" (")[0] for c in t.columns]
        rows = t.rows.tolist()
        xs, ys, m = grid_from_long(rows, names.index(spec.x), names.index(spec.y), names.index(spec.value))
        path = out / f"{spec.table}_{spec.value}.svg"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(heatmap_svg(m, xs, ys, spec.x, spec.y, spec.scale))
        written.append(path)
    path = out / "metadata.ini"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(metadata_text(bundle))
    written.append(path)
    return written
