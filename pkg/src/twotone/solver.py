"""Time-dependent Lindblad integration and propagation of arbitrary matrices."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45

from .models import Frame, FourierHamiltonian, HamiltonianKind, ModelParams, generator, state_frame
from .quantum import (
    POSITIVITY_TOL,
    TRACE_TOL,
    DensityMatrix,
    HilbertSpace,
    LindbladKernel,
    Operator,
    build_operator,
    state_violation,
)

METHODS = ("rk4_fixed", "rk45_adaptive")


class IntegratorError(ValueError):
    """The requested step size does not resolve the fastest frequency."""


class InvariantBreach(RuntimeError):
    """A propagated state left the physical region."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t = {t:.9g}")
        self.t = t


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4_fixed"
    dt_max: float | None = None
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    oscillation_resolution: int = 40

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.dt_max is not None and not self.dt_max > 0:
            raise ValueError(f"dt_max must be > 0, got {self.dt_max}")
        if self.oscillation_resolution < 1:
            raise ValueError("oscillation_resolution must be >= 1")


def fastest_frequency(gen: FourierHamiltonian, kappa: float) -> float:
    """Largest angular frequency the generator produces.

    The maximum of the modulation frequencies, the spectral spread of the
    static part and the largest loss rate ``kappa (N - 1)``.
    """
    w = max(gen.max_frequency, gen.static_spread(), kappa * (gen.space.fock_cutoff - 1))
    return w if w > 0 else 1.0


def step_bound(gen: FourierHamiltonian, kappa: float, cfg: IntegratorConfig) -> float:
    return 2 * math.pi / fastest_frequency(gen, kappa) / cfg.oscillation_resolution


def resolved_dt(gen: FourierHamiltonian, kappa: float, cfg: IntegratorConfig) -> float:
    bound = step_bound(gen, kappa, cfg)
    if cfg.dt_max is None:
        return bound
    if cfg.dt_max > bound * (1 + 1e-12):
        raise IntegratorError(
            f"dt_max = {cfg.dt_max:.6g} exceeds the resolution bound {bound:.6g} "
            f"({cfg.oscillation_resolution} steps per period of the fastest frequency "
            f"{fastest_frequency(gen, kappa):.6g})"
        )
    return cfg.dt_max


def time_grid(t0: float, t1: float, dt: float, checkpoints: Sequence[float] = ()) -> np.ndarray:
    """Uniform substeps of at most ``dt`` that hit every checkpoint exactly.

    Each checkpoint interval is split into an even number of steps so that
    composite Simpson rules apply piecewise.
    """
    if t1 < t0:
        raise ValueError(f"t_to = {t1} precedes t_from = {t0}")
    knots = sorted({float(t0), float(t1), *(float(c) for c in checkpoints if t0 < c < t1)})
    pieces = [np.array([t0], float)]
    for lo, hi in zip(knots[:-1], knots[1:]):
        m = max(2, math.ceil((hi - lo) / dt - 1e-9))
        m += m % 2
        pieces.append(np.linspace(lo, hi, m + 1)[1:])
    return np.concatenate(pieces)


Observer = Callable[[int, float, np.ndarray], None]


def _rk4(rhs, y, times, observer: Observer):
    observer(0, times[0], y)
    for i in range(1, len(times)):
        t, h = times[i - 1], times[i] - times[i - 1]
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + (h / 2) * k1)
        k3 = rhs(t + h / 2, y + (h / 2) * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        observer(i, times[i], y)
    return y


def _rk45(rhs, y, times, observer: Observer, cfg: IntegratorConfig, dt_max: float):
    shape = y.shape
    observer(0, times[0], y)
    if len(times) == 1:
        return y
    solver = RK45(
        lambda t, v: rhs(t, v.reshape(shape)).ravel(),
        times[0],
        y.ravel(),
        times[-1],
        max_step=dt_max,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
    )
    i = 1
    while i < len(times):
        if solver.status != "running":
            raise RuntimeError(f"adaptive integrator stopped: {solver.status}")
        solver.step()
        dense = solver.dense_output()
        while i < len(times) and times[i] <= solver.t + 1e-12 * max(1.0, abs(solver.t)):
            y = solver.y if i == len(times) - 1 else dense(times[i])
            y = np.asarray(y).reshape(shape)
            observer(i, times[i], y)
            i += 1
    return y


def integrate(rhs, y0: np.ndarray, times: np.ndarray, cfg: IntegratorConfig, dt_max: float,
              observer: Observer | None = None) -> np.ndarray:
    """Advance ``y' = rhs(t, y)`` across ``times``, calling ``observer`` at every grid point."""
    observer = observer or (lambda i, t, y: None)
    y0 = np.array(y0, dtype=complex)
    if cfg.method == "rk4_fixed":
        return _rk4(rhs, y0, times, observer)
    return _rk45(rhs, y0, times, observer, cfg, dt_max)


class Liouvillian:
    """Time-dependent generator ``rho -> -i[H(t), rho] + kappa D[a] rho``."""

    def __init__(self, kind, p: ModelParams, space: HilbertSpace):
        self.kind = HamiltonianKind.parse(kind)
        self.params = p
        self.space = space
        self.hamiltonian = generator(self.kind, p, space)
        self.kernel = LindbladKernel(space, p.kappa)

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.kernel.apply(self.hamiltonian.at(t), y)

    def dt(self, cfg: IntegratorConfig) -> float:
        return resolved_dt(self.hamiltonian, self.params.kappa, cfg)


STANDARD_OBSERVABLES = {
    "a": "annihilation",
    "n": "number",
    "sx": "pauli_x",
    "sy": "pauli_y",
    "sz": "pauli_z",
}


def standard_observables(space: HilbertSpace) -> dict[str, np.ndarray]:
    return {name: build_operator(op, space).matrix for name, op in STANDARD_OBSERVABLES.items()}


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States and expectation values on the integration grid.

    ``observables`` are sampled at every point of ``times``; ``states`` (when
    stored) at ``state_times``, a subset of ``times``. Each state array has a
    leading axis over the preparations that were evolved together.
    """

    times: np.ndarray
    observables: dict[str, np.ndarray]
    kind: HamiltonianKind
    params: ModelParams
    space: HilbertSpace
    frame: Frame
    state_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    states: np.ndarray | None = None

    def state(self, index: int = -1) -> DensityMatrix:
        if self.states is None:
            raise ValueError("trajectory was recorded without states")
        return DensityMatrix(self.states[index], self.space, check=False)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.observables[name]


def _check_step(t, y, positivity: bool):
    tr = np.trace(y, axis1=-2, axis2=-1)
    if np.any(np.abs(tr - 1) >= TRACE_TOL):
        raise InvariantBreach(f"trace drifted to {tr.ravel()[np.argmax(np.abs(tr - 1))]:.12g}", t)
    if positivity:
        for m in y.reshape(-1, *y.shape[-2:]):
            problem = state_violation(m, check_positivity=True)
            if problem:
                raise InvariantBreach(problem, t)


def evolve(
    kind,
    p: ModelParams,
    rho0: DensityMatrix | Sequence[DensityMatrix],
    t_final: float,
    cfg: IntegratorConfig | None = None,
    *,
    t_start: float = 0.0,
    checkpoints: Sequence[float] = (),
    observables: dict[str, np.ndarray] | None = None,
    store_states: bool = True,
    max_stored: int = 1000,
    check_invariants: bool = True,
) -> Trajectory:
    """Integrate the master equation for one state or several stacked states.

    With a sequence of initial states the returned observables gain a leading
    axis over the preparations (after the time axis). Positivity is checked on
    every stored state; the trace on every step.
    """
    cfg = cfg or IntegratorConfig()
    single = isinstance(rho0, DensityMatrix)
    rhos = [rho0] if single else list(rho0)
    space = rhos[0].space
    if any(r.space != space for r in rhos):
        raise ValueError("all initial states must share one Hilbert space")
    if t_final < t_start:
        raise ValueError(f"t_final = {t_final} precedes t_start = {t_start}")
    gen = Liouvillian(kind, p, space)
    dt = gen.dt(cfg)
    times = time_grid(t_start, t_final, dt, checkpoints)
    obs = dict(standard_observables(space))
    obs.update(observables or {})
    names = list(obs)
    # Tr(O rho) = sum_ij O_ji rho_ij, one GEMM over all observables
    obs_flat = np.array([obs[k].T.ravel() for k in names]).T.copy()
    d2 = space.dim**2
    values = np.empty((len(times), len(names), len(rhos)), complex)
    stride = max(1, math.ceil((len(times) - 1) / max(1, max_stored)))
    keep = set(range(0, len(times), stride)) | {len(times) - 1} | {
        int(i) for i in np.searchsorted(times, list(checkpoints)) if i < len(times)
    }
    kept_idx: list[int] = []
    kept: list[np.ndarray] = []

    def observer(i, t, y):
        values[i] = (y.reshape(-1, d2) @ obs_flat).T
        stored = store_states and i in keep
        if check_invariants:
            _check_step(t, y, positivity=stored or i == len(times) - 1)
        if stored:
            kept_idx.append(i)
            kept.append(y.copy())

    y0 = np.array([r.matrix for r in rhos])
    integrate(gen, y0, times, cfg, dt, observer)
    series = {k: (values[:, j, 0] if single else values[:, j, :]) for j, k in enumerate(names)}
    states = None
    if store_states:
        states = np.array(kept)
        if single:
            states = states[:, 0]
    return Trajectory(
        times=times,
        observables=series,
        kind=gen.kind,
        params=p,
        space=space,
        frame=state_frame(gen.kind, p),
        state_times=times[kept_idx] if store_states else np.zeros(0),
        states=states,
    )


def propagate_matrix(
    kind,
    p: ModelParams,
    B: np.ndarray | Operator,
    t_from: float,
    t_to: float,
    cfg: IntegratorConfig | None = None,
    *,
    checkpoints: Sequence[float] = (),
    observer: Observer | None = None,
) -> np.ndarray:
    """Apply the time-ordered generator over ``[t_from, t_to]`` to any matrix ``B``."""
    cfg = cfg or IntegratorConfig()
    m = B.matrix if isinstance(B, Operator) else np.asarray(B, complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2] or m.shape[-1] % 2:
        raise ValueError(f"B must be square with even dimension, got shape {m.shape}")
    space = HilbertSpace(m.shape[-1] // 2)
    gen = Liouvillian(kind, p, space)
    dt = gen.dt(cfg)
    times = time_grid(t_from, t_to, dt, checkpoints)
    return integrate(gen, m, times, cfg, dt, observer)


def refinement_change(kind, p: ModelParams, rho0: DensityMatrix, t_final: float,
                      cfg: IntegratorConfig | None = None) -> float:
    """Relative Frobenius change of the final state when the step is halved."""
    cfg = cfg or IntegratorConfig()
    gen = Liouvillian(kind, p, rho0.space)
    dt = gen.dt(cfg)
    finals = []
    for h in (dt, dt / 2):
        times = time_grid(0.0, t_final, h)
        finals.append(integrate(gen, rho0.matrix, times, cfg, h))
    return float(np.linalg.norm(finals[1] - finals[0]) / np.linalg.norm(finals[1]))


__all__ = [
    "IntegratorConfig",
    "IntegratorError",
    "InvariantBreach",
    "Liouvillian",
    "Trajectory",
    "evolve",
    "fastest_frequency",
    "integrate",
    "propagate_matrix",
    "refinement_change",
    "resolved_dt",
    "step_bound",
    "time_grid",
    "POSITIVITY_TOL",
]
