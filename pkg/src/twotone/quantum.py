"""Operator algebra on the qubit x truncated-Fock space and the Lindblad generator.

The composite space is always ordered qubit first, cavity second, so a qubit
operator ``q`` acts as ``kron(q, I_N)`` and a cavity operator ``c`` as
``kron(I_2, c)``. The qubit basis is ``(|up>, |down>)`` with
``sigma_z = diag(1, -1)`` and ``sigma_plus = |up><down|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = -1e-7

OPERATOR_KINDS = (
    "annihilation",
    "creation",
    "number",
    "identity",
    "pauli_x",
    "pauli_y",
    "pauli_z",
    "sigma_plus",
    "sigma_minus",
    "quadrature",
)

_PAULI = {
    "pauli_x": np.array([[0, 1], [1, 0]], dtype=complex),
    "pauli_y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "pauli_z": np.array([[1, 0], [0, -1]], dtype=complex),
    "sigma_plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "sigma_minus": np.array([[0, 0], [1, 0]], dtype=complex),
}


class DimensionError(ValueError):
    """Operands live on incompatible Hilbert spaces."""


class InvalidStateError(ValueError):
    """A matrix violates the density-matrix invariants."""


@dataclass(frozen=True)
class HilbertSpace:
    """Qubit tensor a cavity truncated to ``fock_cutoff`` levels."""

    fock_cutoff: int = 15

    def __post_init__(self):
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ValueError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff}")

    @property
    def dim(self) -> int:
        return 2 * self.fock_cutoff

    def enlarged(self, extra: int) -> HilbertSpace:
        return HilbertSpace(self.fock_cutoff + extra)


@dataclass(frozen=True)
class FactorSpace:
    """One tensor factor of a :class:`HilbertSpace` (used for reduced states)."""

    name: str
    dim: int


def _frozen(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Operator:
    """A dense operator on a :class:`HilbertSpace`."""

    matrix: np.ndarray
    space: HilbertSpace

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionError(f"matrix shape {m.shape} does not match dim {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    def _check(self, other: Operator):
        if other.space != self.space:
            raise DimensionError(f"space mismatch: {self.space} vs {other.space}")

    def __add__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(self.matrix + other.matrix, self.space)

    def __sub__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(self.matrix - other.matrix, self.space)

    def __mul__(self, scalar) -> Operator:
        return Operator(scalar * self.matrix, self.space)

    __rmul__ = __mul__

    def __neg__(self) -> Operator:
        return Operator(-self.matrix, self.space)

    def __matmul__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(self.matrix @ other.matrix, self.space)

    def dag(self) -> Operator:
        return Operator(self.matrix.conj().T, self.space)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) < tol)


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated state: hermitian, unit trace, positive semidefinite.

    Pass ``check=False`` to skip the eigenvalue test for states already
    known to be valid (for example freshly built product states).
    """

    matrix: np.ndarray
    space: HilbertSpace | FactorSpace
    check: bool = True

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = self.space.dim
        if m.shape != (d, d):
            raise DimensionError(f"matrix shape {m.shape} does not match dim {d}")
        object.__setattr__(self, "matrix", m)
        if self.check:
            problem = state_violation(m)
            if problem:
                raise InvalidStateError(problem)

    @classmethod
    def from_ket(cls, ket, space: HilbertSpace) -> DensityMatrix:
        psi = np.asarray(ket, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), space)

    @classmethod
    def product(cls, qubit, cavity, space: HilbertSpace) -> DensityMatrix:
        """Tensor product of a qubit and a cavity state (kets or density matrices)."""
        q = _as_dm(qubit, 2)
        c = _as_dm(cavity, space.fock_cutoff)
        return cls(np.kron(q, c), space)


def _as_dm(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        if x.size != dim:
            raise DimensionError(f"ket of size {x.size}, expected {dim}")
        x = x / np.linalg.norm(x)
        return np.outer(x, x.conj())
    if x.shape != (dim, dim):
        raise DimensionError(f"matrix of shape {x.shape}, expected {(dim, dim)}")
    return x


def state_violation(m: np.ndarray, check_positivity: bool = True) -> str | None:
    """Return a description of the first broken density-matrix invariant, or None."""
    herm = np.max(np.abs(m - m.conj().T), initial=0.0)
    if herm >= HERMITICITY_TOL:
        return f"not hermitian (max |rho - rho^dag| = {herm:.3g})"
    tr = np.trace(m)
    if abs(tr - 1) >= TRACE_TOL:
        return f"trace {tr.real:.12g}{tr.imag:+.3g}j differs from 1"
    if check_positivity:
        lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lam <= POSITIVITY_TOL:
            return f"negative eigenvalue {lam:.3g}"
    return None


# -- single-factor building blocks -------------------------------------------------


def destroy(n: int) -> np.ndarray:
    """Truncated annihilation operator, ``a|k> = sqrt(k)|k-1>``."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def qubit_ket(label: str) -> np.ndarray:
    """Kets ``up``/``down`` (sigma_z) and ``plus``/``minus`` (sigma_x)."""
    s = 1 / np.sqrt(2)
    kets = {
        "up": [1, 0],
        "down": [0, 1],
        "plus": [s, s],
        "minus": [s, -s],
    }
    try:
        return np.array(kets[label], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown qubit state {label!r}; choose from {sorted(kets)}") from None


def fock_ket(n: int, cutoff: int) -> np.ndarray:
    if not 0 <= n < cutoff:
        raise ValueError(f"Fock level {n} outside 0..{cutoff - 1}")
    v = np.zeros(cutoff, dtype=complex)
    v[n] = 1
    return v


def coherent_ket(alpha: complex, cutoff: int) -> np.ndarray:
    """Coherent state with analytic Fock amplitudes, renormalized on the ladder."""
    n = np.arange(cutoff)
    logfact = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logfact) * np.power(complex(alpha), n)
    return amp / np.linalg.norm(amp)


# -- composite operators -----------------------------------------------------------


def build_operator(kind: str, space: HilbertSpace, phi: float = 0.0) -> Operator:
    """Tensor-extended operator named by ``kind``.

    ``quadrature`` is ``exp(-i phi) a + exp(i phi) a^dag``; ``phi`` is ignored
    for every other kind.
    """
    n = space.fock_cutoff
    if kind in _PAULI:
        return Operator(np.kron(_PAULI[kind], np.eye(n)), space)
    a = destroy(n)
    cavity = {
        "annihilation": a,
        "creation": a.conj().T,
        "number": a.conj().T @ a,
        "identity": np.eye(n),
    }
    if kind == "quadrature":
        m = np.exp(-1j * phi) * a + np.exp(1j * phi) * a.conj().T
    elif kind in cavity:
        m = cavity[kind]
    else:
        raise ValueError(f"unknown operator kind {kind!r}; choose from {OPERATOR_KINDS}")
    return Operator(np.kron(np.eye(2), m), space)


def expectation(op: Operator, rho: DensityMatrix) -> complex:
    if op.space != rho.space:
        raise DimensionError(f"space mismatch: {op.space} vs {rho.space}")
    # Tr(A B) = sum_ij A_ij B_ji
    return complex(np.sum(op.matrix * rho.matrix.T))


class LindbladKernel:
    """Precomputed cavity-loss generator acting on (possibly stacked) matrices.

    ``apply(H, rho)`` returns ``-i[H, rho] + kappa (a rho a^dag - {a^dag a, rho}/2)``
    and broadcasts over leading axes of ``rho``. The argument is an arbitrary
    matrix, not necessarily a state.
    """

    def __init__(self, space: HilbertSpace, kappa: float):
        if kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {kappa}")
        self.space = space
        self.kappa = float(kappa)
        n = space.fock_cutoff
        self.a = np.kron(np.eye(2), destroy(n))
        self.adag = self.a.conj().T.copy()
        number = np.tile(np.arange(n, dtype=float), 2)
        self._half_n_sum = 0.5 * self.kappa * (number[:, None] + number[None, :])
        # a rho a^dag moves the (n+1, m+1) cavity block to (n, m) with weight sqrt((n+1)(m+1))
        root = np.sqrt(np.arange(1, n, dtype=float))
        self._jump_weight = self.kappa * np.outer(root, root)[None, :, None, :]

    def _jump(self, rho: np.ndarray) -> np.ndarray:
        n = self.space.fock_cutoff
        lead = rho.shape[:-2]
        r = rho.reshape(-1, 2, n, 2, n)
        out = np.zeros_like(r)
        out[:, :, :-1, :, :-1] = self._jump_weight * r[:, :, 1:, :, 1:]
        return out.reshape(*lead, 2 * n, 2 * n)

    def dissipator(self, rho: np.ndarray) -> np.ndarray:
        if self.kappa == 0:
            return np.zeros_like(rho)
        return self._jump(rho) - self._half_n_sum * rho

    def apply(self, h: np.ndarray, rho: np.ndarray) -> np.ndarray:
        out = h @ rho
        out -= rho @ h
        out *= -1j
        if self.kappa:
            out += self._jump(rho)
            out -= self._half_n_sum * rho
        return out


def lindblad_rhs(H: Operator, rho: DensityMatrix | Operator, kappa: float) -> np.ndarray:
    """Right-hand side of the cavity-loss master equation for one matrix."""
    if H.space != rho.space:
        raise DimensionError(f"space mismatch: {H.space} vs {rho.space}")
    return LindbladKernel(H.space, kappa).apply(H.matrix, rho.matrix)


def partial_trace(m: np.ndarray, space: HilbertSpace, keep: str) -> np.ndarray:
    n = space.fock_cutoff
    t = np.asarray(m).reshape(2, n, 2, n)
    if keep == "qubit":
        return np.einsum("ikjk->ij", t)
    if keep == "cavity":
        return np.einsum("kikj->ij", t)
    raise ValueError(f"keep must be 'qubit' or 'cavity', got {keep!r}")
