"""Scenario execution: figure reproductions, sweeps and the cutoff convergence gate."""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from ..measurement import (
    cavity_field,
    dispersive_feasibility,
    fit_scaling,
    snr,
)
from ..models import HamiltonianKind, ModelParams, classify_regime, measured_basis, readout_frame
from ..observables import default_extent, qnd_fidelity, qubit_bloch_series, reduce, wigner
from ..quantum import DensityMatrix, HilbertSpace, fock_ket, qubit_ket
from ..solver import IntegratorConfig, Liouvillian, evolve
from .config import SWEEP_SCENARIOS, RunConfig, manifest_hash, render_manifest
from .export import SweepResult, emit_plot_data, write_table

SHORT_WINDOW = (0.02, 0.2)  # kappa tau
LONG_WINDOW = (5.0, 20.0)
MAX_ROWS = 4001


class ConvergenceError(RuntimeError):
    """A figure of merit moved by more than the tolerance when the cutoff was raised."""

    def __init__(self, message: str, report: RunReport | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ConvergenceRow:
    name: str
    value: float
    value_enlarged: float
    relative_change: float
    passed: bool


@dataclass
class RunReport:
    files: list[Path] = field(default_factory=list)
    manifest_sha256: str = ""
    breaches: list[str] = field(default_factory=list)
    convergence: list[ConvergenceRow] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(r.passed for r in self.convergence)

    @property
    def ok(self) -> bool:
        return self.converged and not self.breaches


def _header(cfg: RunConfig) -> list[str]:
    return [f"manifest_sha256 = {manifest_hash(cfg)}", f"scenario = {cfg.scenario}"]


def kind_params(kind: HamiltonianKind, p: ModelParams) -> ModelParams:
    """Dispersive readout distinguishes the real quadrature; other kinds keep the phase."""
    if kind is HamiltonianKind.DispersiveDriven:
        return p.replace(homodyne_phase=0.0)
    return p


def _vacuum_product(label: str, space: HilbertSpace) -> DensityMatrix:
    return DensityMatrix.product(qubit_ket(label), fock_ket(0, space.fock_cutoff), space)


def _stride(n: int) -> int:
    return max(1, math.ceil((n - 1) / (MAX_ROWS - 1)))


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- convergence gate --------------------------------------------------------------------


def compare_figures(base: dict[str, float], enlarged: dict[str, float], tol: float,
                    ) -> list[ConvergenceRow]:
    rows = []
    for name, a in base.items():
        b = enlarged.get(name, math.nan)
        if math.isnan(a) and math.isnan(b):
            continue
        scale = max(abs(a), abs(b))
        rel = abs(a - b) / scale if scale > 1e-12 else 0.0
        if math.isnan(rel):
            rel = math.inf
        rows.append(ConvergenceRow(name, a, b, rel, rel <= tol))
    return rows


def convergence_gate(cfg: RunConfig, evaluate: Callable[[int], dict[str, float]],
                     base: dict[str, float] | None = None) -> list[ConvergenceRow]:
    """Re-run ``evaluate`` at ``N + extra`` and compare every figure of merit."""
    if not cfg.convergence.enabled:
        return []
    n = cfg.fock_cutoff
    base = base if base is not None else evaluate(n)
    return compare_figures(base, evaluate(n + cfg.convergence.extra), cfg.convergence.tol)


# -- sweeps ------------------------------------------------------------------------------


def _column(quantity: str, kind: HamiltonianKind, m: float) -> str:
    return f"{quantity}:{kind.value}:tau={m:g}/kappa"


def point_values(cfg: RunConfig, delta_h: float, cutoff: int | None = None,
                 ) -> tuple[dict[str, float], str]:
    """All sweep columns at one ``delta_h``; failures become NaN plus an error text."""
    space = HilbertSpace(cutoff or cfg.fock_cutoff)
    base = cfg.params.replace(delta_h=float(delta_h))
    ms = np.array(cfg.sweep.taus, float)
    taus = ms * cfg.time_unit
    values: dict[str, float] = {}
    errors = []
    for kind in cfg.kinds:
        p = kind_params(kind, base)
        for q in cfg.sweep.quantities:
            cols = [_column(q, kind, m) for m in ms]
            try:
                if q == "qnd":
                    prep = _vacuum_product(measured_basis(kind)[0], space)
                    traj = evolve(kind, p, prep, float(taus.max()), cfg.integrator,
                                  checkpoints=taus, store_states=False)
                    out = [qnd_fidelity(traj, measured_basis(kind)[0], tau=t,
                                        to_rotating=True).minimum for t in taus]
                else:
                    res = snr(p, kind, taus, cfg.integrator, space, noise=cfg.noise,
                              outer_points=cfg.outer_points)
                    out = list(res.snr)
            except Exception as exc:  # isolated per point, reported in the error column
                out = [math.nan] * len(cols)
                errors.append(f"{kind.value}/{q}: {type(exc).__name__}: {exc}")
            values.update(zip(cols, (float(v) for v in out)))
    return values, "; ".join(errors)


def _point_job(args):
    cfg, dh, cutoff = args
    return point_values(cfg, dh, cutoff)


def _regime_label(p: ModelParams) -> str:
    try:
        r = classify_regime(p)
    except ValueError:
        return "outside"
    return r.regime.value + ("+resonant" if r.resonant else "")


def sweep_axis(cfg: RunConfig) -> np.ndarray:
    sw = cfg.sweep
    return np.linspace(sw.delta_h_min, sw.delta_h_max, sw.points)


def sweep_delta_h(cfg: RunConfig, axis=None, cutoff: int | None = None) -> SweepResult:
    """Evaluate every requested kind and quantity along the ``delta_h`` axis."""
    axis = sweep_axis(cfg) if axis is None else np.asarray(axis, float)
    if len(axis) == 0:
        raise ValueError("empty sweep axis")
    results = _map(_point_job, [(cfg, float(x), cutoff) for x in axis], cfg.workers)
    names = list(results[0][0])
    columns = {n: np.array([r[0][n] for r in results]) for n in names}
    p = cfg.params
    notes = (
        f"boundary_low = {p.j_tilde!r}",
        f"boundary_high = {p.omega_c - p.j_tilde!r}",
    )
    regimes = tuple(_regime_label(p.replace(delta_h=float(x))) for x in axis)
    return SweepResult(axis, columns, tuple(r[1] for r in results), regimes, notes)


def _breaches(errors) -> list[str]:
    return [e for e in errors if "InvariantBreach" in e]


def _run_sweep(cfg: RunConfig, out: Path, report: RunReport):
    result = sweep_delta_h(cfg)
    report.files += emit_plot_data(result, out / cfg.scenario, cfg.format, _header(cfg))
    report.breaches += _breaches(result.errors)
    last = float(result.axis[-1])
    report.convergence = convergence_gate(
        cfg, lambda n: point_values(cfg, last, n)[0], result.row(len(result.axis) - 1)
    )


# -- trajectory scenarios ----------------------------------------------------------------


def _common_cfg(cfg: RunConfig, kinds, space: HilbertSpace) -> IntegratorConfig:
    """Integrator settings giving every kind the same (finest) grid."""
    dt = min(Liouvillian(k, kind_params(k, cfg.params), space).dt(cfg.integrator) for k in kinds)
    return replace(cfg.integrator, dt_max=dt)


def _rotate_cavity(rho_c: np.ndarray, theta: float) -> np.ndarray:
    n = np.arange(rho_c.shape[0])
    phase = np.exp(1j * theta * (n[:, None] - n[None, :]))
    return rho_c * phase


def _fig1_figures(cfg: RunConfig, n: int, keep: dict | None = None) -> dict[str, float]:
    space = HilbertSpace(n)
    icfg = _common_cfg(cfg, cfg.kinds, space)
    labels = measured_basis(cfg.kinds[0])
    rhos = [_vacuum_product(s, space) for s in labels]
    figures = {}
    for kind in cfg.kinds:
        traj = evolve(kind, kind_params(kind, cfg.params), rhos, cfg.final_time, icfg,
                      max_stored=1)
        field_ = cavity_field(traj)
        for j, s in enumerate(labels):
            figures[f"im_a_final:{kind.value}:{s}"] = float(field_[-1, j].imag)
        if keep is not None:
            keep[kind] = (traj, field_)
    return figures


def _run_fig1(cfg: RunConfig, out: Path, report: RunReport):
    keep: dict = {}
    figures = _fig1_figures(cfg, cfg.fock_cutoff, keep)
    labels = measured_basis(cfg.kinds[0])
    first = keep[cfg.kinds[0]][0]
    times = first.times
    names, cols = ["t"], []
    tags = ["full", "rwa"] + [f"k{i}" for i in range(2, len(cfg.kinds))]
    for tag, kind in zip(tags, cfg.kinds):
        field_ = keep[kind][1]
        for j, s in enumerate(labels):
            names.append(f"im_a_{tag}_{s}")
            cols.append(field_[:, j].imag)
    stride = _stride(len(times))
    rows = [[times[i], *(c[i] for c in cols)] for i in range(0, len(times), stride)]
    if (len(times) - 1) % stride:
        rows.append([times[-1], *(c[-1] for c in cols)])
    header = _header(cfg) + [f"kinds = {', '.join(k.value for k in cfg.kinds)}"]
    report.files.append(write_table(out / "im_a_vs_t.csv", names, rows, header))
    # Wigner functions of the full model at the final time, in the readout frame
    traj = first
    extent = cfg.wigner_extent or default_extent(cfg.params.j_r, cfg.params.kappa)
    theta = (readout_frame(traj.kind, traj.params).cavity - traj.frame.cavity) * traj.times[-1]
    for j, s in enumerate(labels):
        rho = DensityMatrix(traj.states[-1][j], traj.space, check=False)
        rc = _rotate_cavity(reduce(rho, "cavity").matrix, theta)
        grid = wigner(rc, (-extent, extent), (-extent, extent), cfg.wigner_points,
                      cfg.wigner_points)
        report.files.append(grid.save(out / f"wigner_{s}.dat"))
    report.convergence = convergence_gate(cfg, lambda n: _fig1_figures(cfg, n), figures)


def rabi_period(times: np.ndarray, signal: np.ndarray) -> float:
    """Period of the dominant slow oscillation by a least-squares cosine fit."""
    y = signal - signal.mean()
    uniform = np.interp(np.linspace(times[0], times[-1], 4096), times, y)
    spec = np.abs(np.fft.rfft(uniform * np.hanning(len(uniform))))
    freqs = np.fft.rfftfreq(len(uniform), (times[-1] - times[0]) / (len(uniform) - 1))
    k = int(np.argmax(spec[1:]) + 1)
    w0 = 2 * math.pi * freqs[k]
    a0 = float(np.max(np.abs(y))) or 1.0

    def model(t, amp, w, ph, off):
        return amp * np.cos(w * t + ph) + off

    popt, _ = curve_fit(model, times, signal, p0=[a0, w0, 0.0, float(signal.mean())],
                        maxfev=20000)
    return float(2 * math.pi / abs(popt[1]))


def _rabi_run(cfg: RunConfig, n: int, keep: dict | None = None) -> dict[str, float]:
    space = HilbertSpace(n)
    rho = _vacuum_product(cfg.qubit, space)
    figures = {}
    for kind in cfg.kinds:
        traj = evolve(kind, cfg.params, rho, cfg.final_time, cfg.integrator, store_states=False)
        sz = np.real(traj["sz"])
        figures[f"period:{kind.value}"] = rabi_period(traj.times, sz)
        if keep is not None:
            keep[kind] = traj
    return figures


def _run_rabi(cfg: RunConfig, out: Path, report: RunReport):
    keep: dict = {}
    figures = _rabi_run(cfg, cfg.fock_cutoff, keep)
    header = _header(cfg)
    expected = 2 * math.pi / cfg.params.j_r if cfg.params.j_r > 0 else math.inf
    for kind, traj in keep.items():
        stride = _stride(len(traj.times))
        rows = [[traj.times[i], float(np.real(traj["sz"][i])), float(np.real(traj["n"][i]))]
                for i in range(0, len(traj.times), stride)]
        report.files.append(write_table(out / f"rabi_{kind.value}.csv", ["t", "sz", "n"], rows,
                                        header))
    rows = []
    for kind in cfg.kinds:
        period = figures[f"period:{kind.value}"]
        rows.append([kind.value, period, expected, abs(period - expected) / expected])
    report.files.append(write_table(out / "rabi_periods.csv",
                                    ["kind", "period", "expected_2pi_over_j_r", "relative_deviation"],
                                    rows, header))
    report.convergence = convergence_gate(cfg, lambda n: _rabi_run(cfg, n), figures)


def dispersive_params(cfg: RunConfig) -> ModelParams:
    """Drive amplitude defaults to ``kappa / 4`` (cavity amplitude near 1/2)."""
    p = cfg.params
    return p if p.drive_E else p.replace(drive_E=p.kappa / 4)


def dispersive_taus(cfg: RunConfig) -> np.ndarray:
    ms = np.array(cfg.snr_taus) if cfg.snr_taus else np.geomspace(0.02, 20.0, 61)
    return ms * cfg.time_unit


def _dispersive_run(cfg: RunConfig, n: int, keep: dict | None = None) -> dict[str, float]:
    space = HilbertSpace(n)
    p = dispersive_params(cfg)
    taus = dispersive_taus(cfg)
    figures = {}
    for kind in cfg.kinds:
        res = snr(kind_params(kind, p), kind, taus, cfg.integrator, space, noise=cfg.noise,
                  outer_points=cfg.outer_points)
        figures[f"snr_final:{kind.value}"] = float(res.snr[-1])
        if keep is not None:
            keep[kind] = res
    return figures


def _run_dispersive(cfg: RunConfig, out: Path, report: RunReport):
    keep: dict = {}
    figures = _dispersive_run(cfg, cfg.fock_cutoff, keep)
    header = _header(cfg)
    p = dispersive_params(cfg)
    taus = dispersive_taus(cfg)
    names = ["tau", "kappa_tau", *(f"snr_{k.value}" for k in cfg.kinds)]
    rows = [[t, t * p.kappa, *(keep[k].snr[i] for k in cfg.kinds)] for i, t in enumerate(taus)]
    report.files.append(write_table(out / "dispersive_snr.csv", names, rows, header))
    fits = []
    for kind in cfg.kinds:
        for lo, hi in (SHORT_WINDOW, LONG_WINDOW):
            try:
                f = fit_scaling(keep[kind], (lo / p.kappa, hi / p.kappa))
                fits.append([kind.value, lo, hi, f.slope, f.residual])
            except ValueError:
                fits.append([kind.value, lo, hi, math.nan, math.nan])
    report.files.append(write_table(out / "dispersive_fits.csv",
                                    ["kind", "kappa_tau_lo", "kappa_tau_hi", "slope", "residual"],
                                    fits, header))
    feas = dispersive_feasibility(p)
    report.files.append(write_table(
        out / "feasibility.csv",
        ["chi", "critical_drive_ratio", "required_drive_ratio", "feasible", "drive_E"],
        [[feas.chi, feas.critical_drive_ratio, feas.required_drive_ratio,
          "true" if feas.feasible else "false", p.drive_E]],
        header,
    ))
    report.convergence = convergence_gate(cfg, lambda n: _dispersive_run(cfg, n), figures)


def _custom_run(cfg: RunConfig, n: int, keep: dict | None = None) -> dict[str, float]:
    space = HilbertSpace(n)
    rho = _vacuum_product(cfg.qubit, space)
    figures = {}
    for kind in cfg.kinds:
        p = kind_params(kind, cfg.params)
        traj = evolve(kind, p, rho, cfg.final_time, cfg.integrator, store_states=False)
        a = cavity_field(traj)
        fid = qnd_fidelity(traj, cfg.qubit, to_rotating=True)
        figures[f"qnd_min:{kind.value}"] = fid.minimum
        figures[f"re_a_final:{kind.value}"] = float(a[-1].real)
        figures[f"im_a_final:{kind.value}"] = float(a[-1].imag)
        figures[f"n_final:{kind.value}"] = float(np.real(traj["n"][-1]))
        if keep is not None:
            keep[kind] = (traj, a)
    return figures


def _run_custom(cfg: RunConfig, out: Path, report: RunReport):
    keep: dict = {}
    figures = _custom_run(cfg, cfg.fock_cutoff, keep)
    header = _header(cfg)
    for kind, (traj, a) in keep.items():
        bloch = qubit_bloch_series(traj, to_rotating=True)
        n = np.real(traj["n"])
        stride = _stride(len(traj.times))
        rows = [[traj.times[i], a[i].real, a[i].imag, n[i], *bloch[i]]
                for i in range(0, len(traj.times), stride)]
        report.files.append(write_table(out / f"trajectory_{kind.value}.csv",
                                        ["t", "re_a", "im_a", "n", "sx", "sy", "sz"], rows, header))
    rows = [[k.value, *(figures[f"{q}:{k.value}"]
                        for q in ("qnd_min", "re_a_final", "im_a_final", "n_final"))]
            for k in cfg.kinds]
    report.files.append(write_table(out / "custom_summary.csv",
                                    ["kind", "qnd_min", "re_a_final", "im_a_final", "n_final"],
                                    rows, header))
    report.convergence = convergence_gate(cfg, lambda n: _custom_run(cfg, n), figures)


RUNNERS = {
    "fig1_trajectory": _run_fig1,
    "transverse_rabi": _run_rabi,
    "dispersive_compare": _run_dispersive,
    "custom": _run_custom,
    **{s: _run_sweep for s in SWEEP_SCENARIOS},
}


def run_scenario(cfg: RunConfig, output_dir=None) -> RunReport:
    """Execute ``cfg`` and write its manifest, data files and convergence table.

    Raises :class:`ConvergenceError` (after writing every file) when the cutoff
    gate fails. Invariant breaches at sweep points are recorded in the error
    column and in ``RunReport.breaches``.
    """
    out = Path(output_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(manifest_sha256=manifest_hash(cfg))
    manifest = out / "manifest.txt"
    manifest.write_text(render_manifest(cfg), encoding="utf-8")
    report.files.append(manifest)
    RUNNERS[cfg.scenario](cfg, out, report)
    rows = [[r.name, r.value, r.value_enlarged, r.relative_change, "pass" if r.passed else "FAIL"]
            for r in report.convergence]
    header = _header(cfg) + [
        f"cutoff {cfg.fock_cutoff} vs {cfg.fock_cutoff + cfg.convergence.extra}, "
        f"relative tolerance {cfg.convergence.tol!r}"
    ]
    report.files.append(write_table(out / "convergence.csv",
                                    ["figure", "value", "value_enlarged", "relative_change", "status"],
                                    rows, header))
    if not report.converged:
        worst = max(report.convergence, key=lambda r: r.relative_change)
        raise ConvergenceError(
            f"cutoff convergence gate failed: {worst.name} changed by "
            f"{worst.relative_change:.3g} relative (tolerance {cfg.convergence.tol:g})",
            report,
        )
    return report


__all__ = [
    "ConvergenceError",
    "ConvergenceRow",
    "RunReport",
    "compare_figures",
    "convergence_gate",
    "point_values",
    "rabi_period",
    "run_scenario",
    "sweep_delta_h",
]
