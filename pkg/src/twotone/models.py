"""Parameter records and the catalog of qubit-cavity Hamiltonians.

Every Hamiltonian is represented as a finite Fourier series

    H(t) = H_static + sum_k [exp(i w_k t) C_k + exp(-i w_k t) C_k^dag]

(:class:`FourierHamiltonian`), which covers the lab-frame, rotating-frame and
effective models alike and gives the integrator the fastest frequency for free.
All frequencies are angular and in one consistent (arbitrary) unit.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .quantum import HilbertSpace, Operator, destroy


class RegimeError(ValueError):
    """Parameters fall outside the validity window of an effective model."""


class HamiltonianKind(enum.Enum):
    LabTwoTone = "LabTwoTone"
    RotTwoToneExact = "RotTwoToneExact"
    RotEffH0 = "RotEffH0"
    RwaDeltaBranch = "RwaDeltaBranch"
    RwaCavityMinusDeltaBranch = "RwaCavityMinusDeltaBranch"
    RwaCavityBranch = "RwaCavityBranch"
    VanVleck = "VanVleck"
    VanVleckFrame0 = "VanVleckFrame0"
    LabSingleTone = "LabSingleTone"
    RotSingleToneRwa = "RotSingleToneRwa"
    DispersiveDriven = "DispersiveDriven"

    @classmethod
    def parse(cls, value) -> HamiltonianKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip())
        except ValueError:
            raise ValueError(
                f"unknown Hamiltonian kind {value!r}; choose from {[k.value for k in cls]}"
            ) from None


@dataclass(frozen=True)
class ModelParams:
    """Rates and frequencies of the qubit-cavity system.

    ``omega_d`` is the single-tone modulation frequency and defaults to the
    cavity frequency. ``drive_E`` is the resonant drive amplitude of the
    dispersive comparison model.
    """

    omega_c: float
    delta_h: float
    j_r: float
    kappa: float
    j0: float = 0.0
    omega_d: float | None = None
    drive_E: float = 0.0
    homodyne_phase: float = math.pi / 2

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.j_r < 0:
            raise ValueError(f"j_r must be >= 0, got {self.j_r}")
        if self.delta_h < 0:
            raise ValueError(f"delta_h must be >= 0, got {self.delta_h}")

    @property
    def j_tilde(self) -> float:
        return self.j_r / 8

    @property
    def drive_frequency(self) -> float:
        return self.omega_c if self.omega_d is None else self.omega_d

    @property
    def chi(self) -> float:
        """Dispersive shift ``J_r^2 / (omega_c - delta_h)``."""
        detuning = self.omega_c - self.delta_h
        if detuning == 0:
            raise ZeroDivisionError("dispersive shift undefined at omega_c == delta_h")
        return self.j_r**2 / detuning

    def replace(self, **changes) -> ModelParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class CouplingPhysical:
    e_v_r: float
    v_h: float
    omega_0: float
    omega_l: float


def coupling_j_r(phys: CouplingPhysical) -> float:
    """Exchange-mediated spin-photon coupling ``eV_r / sinh(x)`` (hbar = 1)."""
    if not phys.omega_0 > 0:
        raise ValueError(f"omega_0 must be > 0, got {phys.omega_0}")
    w0sq, wlsq = phys.omega_0**2, phys.omega_l**2
    x = 16 * phys.v_h * (w0sq + 2 * wlsq) / (w0sq * math.sqrt(w0sq + wlsq))
    if not x > 0:
        raise ValueError(f"sinh argument must be > 0 for a finite coupling, got {x}")
    return phys.e_v_r / math.sinh(x)


@dataclass(frozen=True)
class Frame:
    """Rotating frame ``U = exp(i(cavity a^dag a + qubit sigma_z / 2) t)``."""

    cavity: float = 0.0
    qubit: float = 0.0


LAB = Frame()


class _Ops:
    """Composite-space matrices used to assemble Hamiltonians."""

    def __init__(self, space: HilbertSpace):
        n = space.fock_cutoff
        eye_c = np.eye(n)
        a = destroy(n)
        q = {
            "sx": np.array([[0, 1], [1, 0]], complex),
            "sz": np.array([[1, 0], [0, -1]], complex),
            "sp": np.array([[0, 1], [0, 0]], complex),
            "sm": np.array([[0, 0], [1, 0]], complex),
        }
        for name, m in q.items():
            setattr(self, name, np.kron(m, eye_c))
        self.a = np.kron(np.eye(2), a)
        self.ad = self.a.conj().T
        self.n = self.ad @ self.a
        self.x = self.a + self.ad
        # exact restriction of (a + a^dag)^2, free of the top-level truncation artifact
        self.x2 = self.a @ self.a + self.ad @ self.ad + 2 * self.n + np.eye(space.dim)
        self.eye = np.eye(space.dim, dtype=complex)


@dataclass(frozen=True, eq=False)
class FourierHamiltonian:
    static: np.ndarray
    frequencies: np.ndarray
    components: np.ndarray
    space: HilbertSpace

    def __post_init__(self):
        d = self.space.dim
        object.__setattr__(self, "_flat", self.components.reshape(len(self.frequencies), d * d))

    def at(self, t: float) -> np.ndarray:
        if not len(self.frequencies):
            return self.static
        m = (np.exp(1j * self.frequencies * t) @ self._flat).reshape(self.static.shape)
        return self.static + m + m.conj().T

    @property
    def max_frequency(self) -> float:
        return float(np.max(np.abs(self.frequencies), initial=0.0))

    def static_spread(self) -> float:
        ev = np.linalg.eigvalsh(self.static)
        return float(ev[-1] - ev[0])


def _fourier(static, terms, space) -> FourierHamiltonian:
    if terms:
        freqs = np.array([w for w, _ in terms], dtype=float)
        comps = np.array([c for _, c in terms], dtype=complex)
    else:
        freqs = np.zeros(0)
        comps = np.zeros((0, space.dim, space.dim), complex)
    return FourierHamiltonian(np.asarray(static, complex), freqs, comps, space)


def vanvleck_components(p: ModelParams, space: HilbertSpace) -> dict[tuple[int, int], Operator]:
    """Sidebands of the exact two-tone rotating-frame Hamiltonian.

    Key ``(n, k)`` multiplies ``exp(2i(n delta_h + k omega_c) t)``. The static
    part ``(J_r/4) sigma_x (a + a^dag)`` is given by :func:`effective_h0`; the
    ``(0, 0)`` entry is zero.
    """
    o = _Ops(space)
    g = p.j_r / 4
    half = {
        (1, 0): g * o.sp @ o.x,
        (0, 1): g * o.sx @ o.ad,
        (1, 1): g * o.sp @ o.ad,
        (-1, 1): g * o.sm @ o.ad,
    }
    out = {(0, 0): Operator(np.zeros((space.dim, space.dim)), space)}
    for (n, k), m in half.items():
        out[(n, k)] = Operator(m, space)
        out[(-n, -k)] = Operator(m.conj().T, space)
    return out


def effective_h0(p: ModelParams, space: HilbertSpace) -> Operator:
    o = _Ops(space)
    return Operator(p.j_r / 4 * o.sx @ o.x, space)


def _check_vanvleck_window(p: ModelParams):
    lo, hi = p.j_tilde, p.omega_c - p.j_tilde
    if not (lo < p.delta_h < hi) or p.delta_h == p.omega_c:
        raise RegimeError(
            f"Van Vleck Hamiltonian requires {lo:g} < delta_h < {hi:g} "
            f"(J_r/8 < delta_h < omega_c - J_r/8); got delta_h = {p.delta_h:g}"
        )


def vanvleck_effective(
    p: ModelParams, space: HilbertSpace, frame0: bool = False, method: str = "closed"
) -> Operator:
    """Lowest-order Van Vleck Hamiltonian of the two-tone scheme.

    ``method="closed"`` evaluates the closed form; ``method="commutator"``
    assembles ``H0 - 1/2 sum [H_{-n,-k}, H_{n,k}] / (2 n delta_h + 2 k omega_c)``
    from the sidebands on a one-level-larger ladder, restricts it back and drops
    the c-number energy shift the sum also produces. ``frame0`` adds the
    correction for undoing the t=0 frame kick (closed form only).
    """
    _check_vanvleck_window(p)
    o = _Ops(space)
    g2 = (p.j_r / 4) ** 2
    dh, wc = p.delta_h, p.omega_c
    lorentz = dh / (wc**2 - dh**2)
    h0 = p.j_r / 4 * o.sx @ o.x
    if method == "closed":
        bracket = o.x2 / (2 * dh) - lorentz * (o.n + 0.5 * o.eye)
        if frame0:
            bracket = bracket - o.x / dh + lorentz * (o.eye + o.x2)
        return Operator(h0 + g2 * bracket @ o.sz, space)
    if method != "commutator":
        raise ValueError(f"method must be 'closed' or 'commutator', got {method!r}")
    if frame0:
        raise ValueError("frame0 correction is only available in closed form")
    big = space.enlarged(1)
    comps = vanvleck_components(p, big)
    acc = np.zeros((big.dim, big.dim), complex)
    for (n, k), h in comps.items():
        if (n, k) == (0, 0):
            continue
        hm = comps[(-n, -k)].matrix
        acc -= 0.5 * (hm @ h.matrix - h.matrix @ hm) / (2 * n * dh + 2 * k * wc)
    nb, nc = big.fock_cutoff, space.fock_cutoff
    keep = np.r_[0:nc, nb : nb + nc]
    corr = acc[np.ix_(keep, keep)]
    corr -= np.trace(corr) / space.dim * np.eye(space.dim)
    return Operator(h0 + corr, space)


def generator(kind, p: ModelParams, space: HilbertSpace) -> FourierHamiltonian:
    """Fourier representation of the Hamiltonian selected by ``kind``."""
    kind = HamiltonianKind.parse(kind)
    o = _Ops(space)
    K = HamiltonianKind
    g = p.j_r / 4
    h0 = g * o.sx @ o.x
    wc, dh = p.omega_c, p.delta_h
    if kind is K.LabTwoTone:
        static = wc * o.n + dh / 2 * o.sz + p.j0 / 2 * o.sx
        coupling = g * o.sx @ o.x
        return _fourier(static, [(wc + dh, coupling), (wc - dh, coupling)], space)
    if kind is K.RotTwoToneExact:
        comps = vanvleck_components(p, space)
        terms = [
            (2 * (n * dh + k * wc), comps[(n, k)].matrix)
            for n, k in [(1, 0), (0, 1), (1, 1), (-1, 1)]
        ]
        if p.j0:
            terms.append((dh, p.j0 / 2 * o.sp))
        return _fourier(h0, terms, space)
    if kind is K.RotEffH0:
        return _fourier(h0, [], space)
    if kind is K.RwaDeltaBranch:
        return _fourier(h0, [(2 * dh, 2 * p.j_tilde * o.x @ o.sp)], space)
    if kind is K.RwaCavityMinusDeltaBranch:
        return _fourier(h0, [(2 * (wc - dh), 2 * p.j_tilde * o.sm @ o.ad)], space)
    if kind is K.RwaCavityBranch:
        exchange = o.sm @ o.ad + o.sp @ o.a
        return _fourier(h0 + 2 * p.j_tilde * exchange, [], space)
    if kind in (K.VanVleck, K.VanVleckFrame0):
        h = vanvleck_effective(p, space, frame0=kind is K.VanVleckFrame0)
        return _fourier(h.matrix, [], space)
    if kind is K.LabSingleTone:
        static = p.j0 / 2 * o.sx + dh / 2 * o.sz + wc * o.n
        return _fourier(static, [(p.drive_frequency, p.j_r / 2 * o.sx @ o.x)], space)
    if kind is K.RotSingleToneRwa:
        static = dh / 2 * o.sz + (wc - p.drive_frequency) * o.n + p.j_r / 2 * o.sx @ o.x
        return _fourier(static, [], space)
    if kind is K.DispersiveDriven:
        return _fourier(p.chi * o.sz @ o.n + p.drive_E * o.x, [], space)
    raise ValueError(f"unhandled Hamiltonian kind {kind}")  # pragma: no cover


def hamiltonian_at(kind, p: ModelParams, t: float, space: HilbertSpace) -> Operator:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return Operator(generator(kind, p, space).at(t), space)


def state_frame(kind, p: ModelParams) -> Frame:
    """Frame in which states evolved under ``kind`` are expressed."""
    K = HamiltonianKind
    kind = HamiltonianKind.parse(kind)
    if kind in (K.LabTwoTone, K.LabSingleTone):
        return LAB
    if kind is K.RotSingleToneRwa:
        return Frame(cavity=p.drive_frequency, qubit=0.0)
    return Frame(cavity=p.omega_c, qubit=p.delta_h)


def readout_frame(kind, p: ModelParams) -> Frame:
    """Rotating frame in which the QND overlap and homodyne quadrature are defined."""
    kind = HamiltonianKind.parse(kind)
    if kind in (HamiltonianKind.LabSingleTone, HamiltonianKind.RotSingleToneRwa):
        return Frame(cavity=p.drive_frequency, qubit=p.delta_h)
    return Frame(cavity=p.omega_c, qubit=p.delta_h)


def measured_basis(kind) -> tuple[str, str]:
    """Qubit preparations distinguished by the readout of ``kind``."""
    if HamiltonianKind.parse(kind) is HamiltonianKind.DispersiveDriven:
        return ("up", "down")
    return ("plus", "minus")


# -- regime classification -----------------------------------------------------------


class Regime(enum.Enum):
    DegenerateZero = "DegenerateZero"
    AdiabaticLow = "AdiabaticLow"
    BoundaryLow = "BoundaryLow"
    HighFrequency = "HighFrequency"
    BoundaryHigh = "BoundaryHigh"
    AdiabaticHigh = "AdiabaticHigh"


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    error_order: str
    resonant: bool
    resonances: tuple[tuple[int, int, int, int], ...] = ()


def floquet_resonances(
    p: ModelParams, index_bound: int = 2, fraction: float = 0.1
) -> list[tuple[int, int, int, int]]:
    """Index vectors with |n1 dh + n2 wc + n3 (wc + dh) + n4 (wc - dh)| < fraction * J_r/4.

    Only vectors whose entries pairwise differ by at most one are considered.
    """
    dh, wc = p.delta_h, p.omega_c
    basis = np.array([dh, wc, wc + dh, wc - dh])
    threshold = fraction * p.j_r / 4
    hits = []
    for base in range(-index_bound, index_bound):
        for bits in itertools.product((0, 1), repeat=4):
            n = tuple(base + b for b in bits)
            if not any(n) or max(abs(x) for x in n) > index_bound:
                continue
            if n in hits:
                continue
            if abs(np.dot(n, basis)) < threshold:
                hits.append(n)
    return hits


def classify_regime(p: ModelParams, index_bound: int = 2, fraction: float = 0.1) -> RegimeReport:
    dh, wc, jt = p.delta_h, p.omega_c, p.j_tilde
    if not 0 <= dh <= wc:
        raise ValueError(f"delta_h must lie in [0, omega_c] = [0, {wc:g}], got {dh:g}")
    if dh == 0:
        regime, err = Regime.DegenerateZero, "O(J~^2/omega_c)"
    elif dh < jt:
        regime, err = Regime.AdiabaticLow, "O(delta_h)"
    elif dh == jt:
        regime, err = Regime.BoundaryLow, "uncontrolled"
    elif dh < wc - jt:
        regime = Regime.HighFrequency
        err = "O(J~^2/delta_h)" if dh <= wc / 2 else "O(J~^2/(omega_c-delta_h))"
    elif dh == wc - jt:
        regime, err = Regime.BoundaryHigh, "uncontrolled"
    elif dh < wc:
        regime, err = Regime.AdiabaticHigh, "O(omega_c-delta_h)+O(J~)"
    else:
        regime, err = Regime.AdiabaticHigh, "O(J~^2/omega_c)+O(J~)"
    res = floquet_resonances(p, index_bound, fraction)
    return RegimeReport(regime, err, bool(res), tuple(res))
