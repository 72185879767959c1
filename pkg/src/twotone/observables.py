"""Reduced states, QND overlap and the cavity Wigner function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import readout_frame
from .quantum import DensityMatrix, FactorSpace, HilbertSpace, destroy, partial_trace, qubit_ket
from .solver import Trajectory


class FrameError(ValueError):
    """A trajectory is not expressed in the frame an observable is defined in."""


class TruncationError(ValueError):
    """The cavity state has weight too close to the Fock cutoff."""


def reduce(rho: DensityMatrix, subsystem: str) -> DensityMatrix:
    if not isinstance(rho.space, HilbertSpace):
        raise ValueError("reduce expects a state on the full qubit x cavity space")
    m = partial_trace(rho.matrix, rho.space, keep=subsystem)
    return DensityMatrix(m, FactorSpace(subsystem, m.shape[0]))


def _bloch(state) -> np.ndarray:
    psi = qubit_ket(state) if isinstance(state, str) else np.asarray(state, complex)
    psi = psi / np.linalg.norm(psi)
    pauli = [
        np.array([[0, 1], [1, 0]]),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]]),
    ]
    return np.array([np.real(psi.conj() @ s @ psi) for s in pauli])


@dataclass(frozen=True, eq=False)
class FidelityReport:
    times: np.ndarray
    overlaps: np.ndarray
    minimum: float
    argmin_time: float


def qubit_bloch_series(traj: Trajectory, index: int | None = None, to_rotating: bool = False,
                       ) -> np.ndarray:
    """Qubit Bloch vectors ``(T, 3)`` in the readout frame of the trajectory's model."""
    if traj.frame is None:
        raise FrameError("trajectory carries no frame tag")
    sx, sy, sz = (np.asarray(traj[k]) for k in ("sx", "sy", "sz"))
    if sx.ndim == 2:
        if index is None:
            raise ValueError("trajectory holds several preparations; pass index")
        sx, sy, sz = sx[:, index], sy[:, index], sz[:, index]
    target = readout_frame(traj.kind, traj.params)
    mismatch = target.qubit - traj.frame.qubit
    if mismatch != 0:
        if not to_rotating:
            raise FrameError(
                f"trajectory qubit frame rotates at {traj.frame.qubit:g}, readout frame at "
                f"{target.qubit:g}; pass to_rotating=True to rotate the states"
            )
        # <sigma_minus> picks up exp(i theta) under exp(i theta sigma_z / 2)
        c = (sx - 1j * sy) * np.exp(1j * mismatch * traj.times)
        sx, sy = c.real, -c.imag
    return np.stack([sx.real, sy.real, sz.real], axis=1)


def qnd_fidelity(traj: Trajectory, target="plus", *, index: int | None = None,
                 tau: float | None = None, to_rotating: bool = False) -> FidelityReport:
    """Overlap ``<psi| rho_qubit(t) |psi>`` with the initial qubit state and its minimum.

    The overlap is evaluated on every integration step in the readout frame.
    Lab-frame trajectories are rejected unless ``to_rotating`` is set.
    """
    bloch = qubit_bloch_series(traj, index=index, to_rotating=to_rotating)
    overlaps = 0.5 * (1 + bloch @ _bloch(target))
    times = traj.times
    if tau is not None:
        mask = times <= tau * (1 + 1e-12)
        times, overlaps = times[mask], overlaps[mask]
    i = int(np.argmin(overlaps))
    return FidelityReport(times, overlaps, float(overlaps[i]), float(times[i]))


# -- Wigner function ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """``W(x + i p)`` sampled on a rectangular grid (rows: x, columns: p)."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    @property
    def p_range(self) -> tuple[float, float]:
        return float(self.p[0]), float(self.p[-1])

    def normalization(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(self.values.sum() * dx * dp)

    def x_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * (self.p[1] - self.p[0])

    def peak(self) -> tuple[float, float, float]:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.x[i]), float(self.p[j]), float(self.values[i, j])

    def save(self, path) -> Path:
        path = Path(path)
        header = "\n".join(
            [
                "wigner W(alpha) = (2/pi) Tr[rho D(alpha) Parity D(alpha)^dag], alpha = x + i p",
                f"x_range {float(self.x[0])!r} {float(self.x[-1])!r}",
                f"p_range {float(self.p[0])!r} {float(self.p[-1])!r}",
                f"dims {len(self.x)} {len(self.p)}",
            ]
        )
        np.savetxt(path, self.values, header=header, fmt="%.12e")
        return path

    @classmethod
    def load(cls, path) -> WignerGrid:
        lines = Path(path).read_text().splitlines()[:4]
        fields = {ln[2:].split()[0]: ln[2:].split()[1:] for ln in lines[1:]}
        nx, npts = (int(v) for v in fields["dims"])
        x = np.linspace(float(fields["x_range"][0]), float(fields["x_range"][1]), nx)
        p = np.linspace(float(fields["p_range"][0]), float(fields["p_range"][1]), npts)
        values = np.loadtxt(path, ndmin=2).reshape(nx, npts)
        return cls(x, p, values)


def _cavity_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        if isinstance(rho.space, HilbertSpace):
            return partial_trace(rho.matrix, rho.space, keep="cavity")
        return np.asarray(rho.matrix)
    return np.asarray(rho, complex)


def check_cutoff(rho_cavity: np.ndarray, tol: float = 1e-3):
    top = float(np.real(np.trace(rho_cavity[-2:, -2:])))
    if top > tol:
        raise TruncationError(
            f"population {top:.3g} in the top two Fock levels exceeds {tol:g}; raise the cutoff"
        )


def default_extent(j_r: float, kappa: float) -> float:
    return j_r / kappa + 3 if kappa > 0 else 3.0


def wigner(rho_cavity, x_range=(-4.0, 4.0), p_range=(-4.0, 4.0), nx: int = 81,
           np_: int = 81) -> WignerGrid:
    """Displaced-parity Wigner function of a cavity state.

    Accepts a cavity density matrix (array or reduced :class:`DensityMatrix`)
    or a full qubit x cavity state, which is reduced first. Displacements are
    exponentiated on a padded ladder large enough for the grid extent, so only
    the state itself is limited by the cutoff.
    """
    rho = _cavity_matrix(rho_cavity)
    check_cutoff(rho)
    n = rho.shape[0]
    x = np.linspace(*x_range, nx)
    p = np.linspace(*p_range, np_)
    reach = math.sqrt(n - 1) + 2 * max(abs(v) for v in (*x_range, *p_range))
    size = n + int(reach**2 + 10 * reach + 10)
    a = destroy(size)
    # D(a) Parity D(a)^dag = D(2a) Parity and D(2x + 2ip) = exp(4ixp) D(2x) D(2ip);
    # both real-axis generators are diagonalized once on the padded ladder
    lam, u = np.linalg.eigh(-1j * (a.conj().T - a))
    mu, v = np.linalg.eigh(a.conj().T + a)
    dx = np.einsum("bm,xm,km->xbk", u[:n], np.exp(2j * np.outer(x, lam)), u.conj())
    dp = np.einsum("km,ym,am->yka", v, np.exp(2j * np.outer(p, mu)), v[:n].conj())
    rho_par = (-1.0) ** np.arange(n)[:, None] * rho
    e = dp @ rho_par  # (np, size, n): sum_a D(2ip)_{k a} (-1)^a rho_{a b}
    w = dx.reshape(nx, -1) @ e.transpose(0, 2, 1).reshape(np_, -1).T
    values = (2 / np.pi) * np.real(np.exp(4j * np.outer(x, p)) * w)
    return WignerGrid(x, p, values)


def quadrature_distribution(rho_cavity, x: np.ndarray) -> np.ndarray:
    """Probability density of the quadrature ``(a + a^dag)/2`` at the points ``x``."""
    rho = _cavity_matrix(rho_cavity)
    n = rho.shape[0]
    q = math.sqrt(2) * np.asarray(x, float)
    # normalized Hermite functions by the stable three-term recursion
    psi = np.zeros((n, q.size))
    psi[0] = np.pi**-0.25 * np.exp(-q**2 / 2)
    if n > 1:
        psi[1] = math.sqrt(2) * q * psi[0]
    for k in range(2, n):
        psi[k] = math.sqrt(2 / k) * q * psi[k - 1] - math.sqrt((k - 1) / k) * psi[k - 2]
    dens = np.einsum("ix,ij,jx->x", psi, rho, psi)
    return math.sqrt(2) * np.real(dens)
