import math

import numpy as np
import pytest

from twotone.models import HamiltonianKind, ModelParams
from twotone.quantum import DensityMatrix, HilbertSpace, fock_ket, qubit_ket
from twotone.solver import IntegratorConfig, Liouvillian, integrate, time_grid

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Register the outcome of an acceptance criterion for the terminal summary."""

    def _record(criterion: str, passed: bool, detail: str):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s[1:])):
        passed, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name} {'PASS' if passed else 'FAIL'}  {detail}")


def random_state(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


def product(label: str, space: HilbertSpace, n: int = 0) -> DensityMatrix:
    return DensityMatrix.product(qubit_ket(label), fock_ket(n, space.fock_cutoff), space)


def rk4_order(m_values=(20, 40, 80), reference=1280, t_final=5.0) -> list[float]:
    """Observed convergence order of the fixed-step integrator."""
    p = ModelParams(omega_c=1.0, delta_h=0.3, j_r=0.2, kappa=0.1)
    space = HilbertSpace(6)
    gen = Liouvillian(HamiltonianKind.RotTwoToneExact, p, space)
    cfg = IntegratorConfig(oscillation_resolution=4)
    rho0 = product("plus", space).matrix

    def final(m):
        h = t_final / m
        return integrate(gen, rho0, time_grid(0.0, t_final, h), cfg, h)

    ref = final(reference)
    errs = [np.linalg.norm(final(m) - ref) for m in m_values]
    return [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
