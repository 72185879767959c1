"""Homodyne readout statistics: integrated signal, noise variance and SNR.

The measured quadrature is ``Y = exp(-i phi) a + exp(i phi) a^dag`` in the
readout frame of the model. With output field ``sqrt(kappa) a`` and a
detector current scaled by ``sqrt(kappa)``

    M(tau)    = kappa int_0^tau <Y> dt
    dM(tau)^2 = 2 kappa^2 int_0^tau dt int_t^tau dt' Tr[Y P(t'<-t) S(t)] + kappa tau - M^2

where ``S = exp(-i phi) a rho + exp(i phi) rho a^dag`` is the regression
source and ``P`` the time-ordered Lindblad propagator. A coherent cavity
state gives exactly ``dM^2 = kappa tau``.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .models import HamiltonianKind, ModelParams, measured_basis, readout_frame, state_frame
from .quantum import TRACE_TOL, DensityMatrix, HilbertSpace, destroy, qubit_ket
from .solver import (
    IntegratorConfig,
    InvariantBreach,
    Liouvillian,
    Trajectory,
    evolve,
    integrate,
    propagate_matrix,
    time_grid,
)

SIMPSON_TOL = 1e-3
NOISE_METHODS = ("regression", "double_integral", "coherent")
CSV_COLUMNS = ("tau", "M_plus", "M_minus", "var_plus", "var_minus", "snr")


class GridError(ValueError):
    """The stored time grid is too coarse for the quadrature rule."""


def snr_from(mean_plus, mean_minus, var_plus, var_minus) -> np.ndarray:
    """``|M+ - M-| / sqrt(dM+^2 + dM-^2)``, defined as 0 where the noise vanishes."""
    num = np.abs(np.asarray(mean_plus) - np.asarray(mean_minus))
    den = np.sqrt(np.asarray(var_plus) + np.asarray(var_minus))
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass(frozen=True, eq=False)
class HomodyneResult:
    tau_grid: np.ndarray
    mean_plus: np.ndarray
    mean_minus: np.ndarray
    var_plus: np.ndarray
    var_minus: np.ndarray
    snr: np.ndarray
    preparations: tuple[str, str] = ("plus", "minus")

    def recomputed_snr(self) -> np.ndarray:
        return snr_from(self.mean_plus, self.mean_minus, self.var_plus, self.var_minus)

    def to_csv(self, path, header: Sequence[str] = ()) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in zip(self.tau_grid, self.mean_plus, self.mean_minus,
                           self.var_plus, self.var_minus, self.snr):
                w.writerow([repr(float(v)) for v in row])
        return path

    @classmethod
    def from_csv(cls, path) -> HomodyneResult:
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
                 if ln and not ln.startswith("#")]
        rows = list(csv.reader(lines))
        if tuple(rows[0]) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {rows[0]}")
        data = np.array(rows[1:], float).reshape(-1, len(CSV_COLUMNS))
        return cls(*(data[:, i].copy() for i in range(len(CSV_COLUMNS))))


# -- quadrature bookkeeping -----------------------------------------------------------


def _phase(kind, p: ModelParams):
    """Phase ``phi_eff(t)`` of the readout quadrature written in the state frame."""
    shift = readout_frame(kind, p).cavity - state_frame(kind, p).cavity
    return lambda t: p.homodyne_phase - shift * np.asarray(t)


def _cumulative(times: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Cumulative Simpson integral along axis 0 with a step-doubling error check."""
    fine = cumulative_simpson(f, x=times, axis=0, initial=0)
    if len(times) >= 5 and len(times) % 2 == 1:
        coarse = cumulative_simpson(f[::2], x=times[::2], axis=0, initial=0)
        err = np.max(np.abs(fine[::2] - coarse)) / 15
        scale = np.max(np.abs(fine))
        if scale > 0 and err > SIMPSON_TOL * scale:
            raise GridError(
                f"Simpson error estimate {err / scale:.3g} exceeds {SIMPSON_TOL:g} relative; "
                "refine the integration grid"
            )
    return fine


def cavity_field(traj: Trajectory, p: ModelParams | None = None) -> np.ndarray:
    """``<a>(t)`` expressed in the readout frame of the trajectory's model."""
    p = p or traj.params
    shift = readout_frame(traj.kind, p).cavity - traj.frame.cavity
    rot = np.exp(1j * shift * traj.times)
    a = np.asarray(traj["a"])
    return a * (rot[:, None] if a.ndim == 2 else rot)


def quadrature_series(traj: Trajectory, p: ModelParams | None = None) -> np.ndarray:
    """``<Y>(t)`` in the readout frame on every stored time point."""
    p = p or traj.params
    return 2 * np.real(np.exp(-1j * p.homodyne_phase) * cavity_field(traj, p))


def mean_signal(traj: Trajectory, p: ModelParams | None = None) -> np.ndarray:
    """Integrated homodyne signal ``M(t)`` on the trajectory grid.

    Raises :class:`GridError` when the step-doubling Simpson estimate exceeds
    ``1e-3`` of the signal scale.
    """
    p = p or traj.params
    return p.kappa * _cumulative(traj.times, quadrature_series(traj, p))


def _indices(times: np.ndarray, taus: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(times, taus - 1e-12 * max(1.0, float(times[-1])))
    if np.any(np.abs(times[np.minimum(idx, len(times) - 1)] - taus) > 1e-9 * max(1.0, times[-1])):
        raise ValueError("requested times are not points of the integration grid")
    return idx


# -- noise ----------------------------------------------------------------------------


def _regression_run(kind, p: ModelParams, rhos: Sequence[DensityMatrix], taus: np.ndarray,
                    cfg: IntegratorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Means and variances at ``taus`` for every preparation in one forward pass.

    The inner regression integral is carried by the accumulator
    ``W(t') = int_0^t' P(t'<-t) S(t) dt``, which obeys ``W' = L W + S``.
    """
    space = rhos[0].space
    gen = Liouvillian(kind, p, space)
    dt = gen.dt(cfg)
    times = time_grid(0.0, float(taus.max()), dt, taus)
    a = gen.kernel.a
    ad = gen.kernel.adag
    a_flat = a.T.ravel()
    phase = _phase(kind, p)
    b = len(rhos)

    def rhs(t, y):
        out = gen(t, y)
        e = np.exp(-1j * phase(t))
        rho = y[:b]
        out[b:] += e * (a @ rho) + np.conj(e) * (rho @ ad)
        return out

    tr_a = np.empty((len(times), 2 * b), complex)

    def observer(i, t, y):
        tr = np.trace(y[:b], axis1=-2, axis2=-1)
        if np.any(np.abs(tr - 1) >= TRACE_TOL):
            raise InvariantBreach("trace drifted during noise accumulation", t)
        tr_a[i] = y.reshape(2 * b, -1) @ a_flat

    y0 = np.concatenate([np.array([r.matrix for r in rhos]), np.zeros((b, *a.shape), complex)])
    integrate(rhs, y0, times, cfg, dt, observer)
    quad = 2 * np.real(np.exp(-1j * phase(times))[:, None] * tr_a)
    mean = p.kappa * _cumulative(times, quad[:, :b])
    inner = cumulative_simpson(quad[:, b:], x=times, axis=0, initial=0)
    idx = _indices(times, taus)
    m = mean[idx]
    var = 2 * p.kappa**2 * inner[idx] + p.kappa * taus[:, None] - m**2
    return m, var


def _double_integral(kind, p: ModelParams, rho0: DensityMatrix, tau: float,
                     cfg: IntegratorConfig, outer_points: int) -> float:
    """One noise value by explicit propagation from every point of a uniform outer grid."""
    if outer_points < 3:
        raise ValueError("outer_points must be >= 3 for Simpson weights")
    outer = np.linspace(0.0, tau, outer_points)
    traj = evolve(kind, p, rho0, tau, cfg, checkpoints=outer, max_stored=1)
    mean = mean_signal(traj, p)[-1]
    stored = {round(float(t), 12): k for k, t in enumerate(traj.state_times)}
    space = rho0.space
    a = np.kron(np.eye(2), destroy(space.fock_cutoff))
    a_flat = a.T.ravel()
    phase = _phase(kind, p)
    inner = np.zeros(outer_points)
    for j, t in enumerate(outer[:-1]):
        rho = traj.states[stored[round(float(t), 12)]]
        e = np.exp(-1j * phase(t))
        source = e * (a @ rho) + np.conj(e) * (rho @ a.conj().T)
        ts: list[float] = []
        gs: list[float] = []

        def record(i, s, y, ts=ts, gs=gs):
            ts.append(s)
            gs.append(2 * np.real(np.exp(-1j * phase(s)) * (y.ravel() @ a_flat)))

        try:
            propagate_matrix(kind, p, source, float(t), tau, cfg, observer=record)
        except (InvariantBreach, FloatingPointError) as exc:
            raise RuntimeError(f"propagation failed for (t, t') = ({t:.6g}, {tau:.6g}): {exc}") from exc
        inner[j] = simpson(np.array(gs), x=np.array(ts))
    return float(2 * p.kappa**2 * simpson(inner, x=outer) + p.kappa * tau - mean**2)


def noise_variance(kind, p: ModelParams, rho0: DensityMatrix, tau, *,
                   method: str = "double_integral", outer_points: int = 200,
                   cfg: IntegratorConfig | None = None):
    """Homodyne noise ``dM(tau)^2`` by the quantum regression theorem.

    ``method="double_integral"`` propagates the regression source from each
    point of a uniform outer grid (Simpson weights over ``outer_points``).
    ``method="regression"`` integrates the equivalent accumulator equation and
    returns every requested ``tau`` from one pass. Accepts a scalar or an
    array of ``tau`` and returns the same shape.
    """
    cfg = cfg or IntegratorConfig()
    taus = np.atleast_1d(np.asarray(tau, float))
    if np.any(taus <= 0):
        raise ValueError("tau must be > 0")
    if method == "regression":
        order = np.argsort(taus)
        _, var = _regression_run(kind, p, [rho0], taus[order], cfg)
        out = np.empty_like(taus)
        out[order] = var[:, 0]
    elif method == "double_integral":
        out = np.array([_double_integral(kind, p, rho0, t, cfg, outer_points) for t in taus])
    else:
        raise ValueError(f"method must be 'regression' or 'double_integral', got {method!r}")
    return float(out[0]) if np.ndim(tau) == 0 else out


def preparations(kind, space: HilbertSpace) -> list[DensityMatrix]:
    """Qubit eigenstates of the measured observable, cavity in vacuum."""
    vac = np.zeros(space.fock_cutoff, complex)
    vac[0] = 1
    return [DensityMatrix.product(qubit_ket(s), vac, space) for s in measured_basis(kind)]


def snr(p: ModelParams, kind, tau_grid, cfg: IntegratorConfig | None = None,
        space: HilbertSpace | None = None, *, noise: str = "regression",
        outer_points: int = 200) -> HomodyneResult:
    """Signal, noise and SNR for both preparations on ``tau_grid``.

    ``noise="coherent"`` substitutes ``kappa tau`` for both variances.
    ``noise="regression"`` and ``noise="double_integral"`` evaluate the
    regression theorem (see :func:`noise_variance`).
    """
    kind = HamiltonianKind.parse(kind)
    cfg = cfg or IntegratorConfig()
    space = space or HilbertSpace()
    taus = np.asarray(tau_grid, float)
    if taus.ndim != 1 or len(taus) == 0 or np.any(np.diff(taus) <= 0) or taus[0] < 0:
        raise ValueError("tau_grid must be a nonempty, strictly increasing, nonnegative series")
    if noise not in NOISE_METHODS:
        raise ValueError(f"noise must be one of {NOISE_METHODS}, got {noise!r}")
    rhos = preparations(kind, space)
    positive = taus[taus > 0]
    means = np.zeros((len(taus), 2))
    var = np.zeros((len(taus), 2))
    sel = taus > 0
    if len(positive):
        if noise == "regression":
            means[sel], var[sel] = _regression_run(kind, p, rhos, positive, cfg)
        else:
            traj = evolve(kind, p, rhos, float(positive[-1]), cfg, checkpoints=positive,
                          store_states=False)
            means[sel] = mean_signal(traj, p)[_indices(traj.times, positive)]
            if noise == "coherent":
                var[sel] = p.kappa * positive[:, None]
            else:
                for k, rho in enumerate(rhos):
                    var[sel, k] = [_double_integral(kind, p, rho, t, cfg, outer_points)
                                   for t in positive]
    return HomodyneResult(
        tau_grid=taus,
        mean_plus=means[:, 0],
        mean_minus=means[:, 1],
        var_plus=var[:, 0],
        var_minus=var[:, 1],
        snr=snr_from(means[:, 0], means[:, 1], var[:, 0], var[:, 1]),
        preparations=measured_basis(kind),
    )


# -- scaling and dispersive comparison ------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    window: tuple[float, float]
    slope: float
    residual: float


def fit_scaling(result: HomodyneResult, window: tuple[float, float]) -> ScalingFit:
    """Least-squares slope of ``log SNR`` against ``log tau`` inside ``window``."""
    lo, hi = window
    taus = result.tau_grid
    slack = 1e-9 * abs(taus[-1])
    if not (taus[0] - slack <= lo < hi <= taus[-1] + slack):
        raise ValueError(f"window {window} not inside the tau grid [{taus[0]}, {taus[-1]}]")
    mask = (taus >= lo - slack) & (taus <= hi + slack)
    if mask.sum() < 8:
        raise ValueError(f"window holds {int(mask.sum())} points, at least 8 required")
    s = result.snr[mask]
    if np.any(s <= 0):
        raise ValueError("SNR must be positive inside the fit window")
    x, y = np.log(taus[mask]), np.log(s)
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(x)) if len(res) else 0.0
    return ScalingFit((float(lo), float(hi)), float(coef[0]), rms)


@dataclass(frozen=True)
class DispersiveFeasibility:
    chi: float
    critical_drive_ratio: float
    required_drive_ratio: float
    feasible: bool


def dispersive_feasibility(p: ModelParams) -> DispersiveFeasibility:
    """Drive needed for a visible dispersive signal against the critical-photon limit.

    A signal needs ``(E / kappa) chi > kappa / 2`` while the dispersive
    expansion needs ``E / kappa < Delta / (sqrt(8) J_r)``.
    """
    detuning = p.omega_c - p.delta_h
    if detuning == 0:
        raise ValueError("qubit-cavity detuning omega_c - delta_h is zero")
    chi = p.j_r**2 / detuning
    critical = abs(detuning) / (math.sqrt(8) * p.j_r) if p.j_r > 0 else math.inf
    required = p.kappa / (2 * abs(chi)) if chi != 0 else math.inf
    return DispersiveFeasibility(chi, critical, required, bool(required < critical))


__all__ = [
    "DispersiveFeasibility",
    "GridError",
    "HomodyneResult",
    "ScalingFit",
    "dispersive_feasibility",
    "fit_scaling",
    "cavity_field",
    "mean_signal",
    "noise_variance",
    "preparations",
    "quadrature_series",
    "snr",
    "snr_from",
]
