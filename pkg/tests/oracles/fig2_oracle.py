"""Independent oracle for the two-tone figures at omega_c = 5000, J_r = 50, kappa = 25.

Builds the rotating-frame Hamiltonian directly from its closed trigonometric
form, the Lindblad superoperator by Kronecker products (column stacking) and
integrates with scipy's DOP853 at tight tolerances. Nothing is imported from
the package. Run as a script; the printed values are frozen into the tests.
"""

import numpy as np
from scipy.integrate import solve_ivp

WC, JR, KAPPA = 5000.0, 50.0, 25.0
N = 10


def ops(n):
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    sp = np.array([[0, 1], [0, 0]])
    return np.kron(np.eye(2), a), np.kron(sp, np.eye(n)), np.kron(np.array([[0, 1], [1, 0]]), np.eye(n))


A, SP, SX = ops(N)
D = 2 * N
I = np.eye(D)


def hamiltonian(t, dh):
    qubit = np.exp(1j * dh * t) * SP
    qubit = qubit + qubit.conj().T
    cav = np.exp(1j * WC * t) * A.conj().T
    cav = cav + cav.conj().T
    return JR * np.cos(WC * t) * np.cos(dh * t) * qubit @ cav


def dissipator():
    ad_a = A.conj().T @ A
    return KAPPA * (np.kron(A.conj(), A) - 0.5 * np.kron(I, ad_a) - 0.5 * np.kron(ad_a.T, I))


DISS = dissipator()


def rhs_factory(dh):
    def rhs(t, v):
        h = hamiltonian(t, dh)
        rho = v.reshape(D, D, order="F")
        out = -1j * (h @ rho - rho @ h)
        return out.ravel(order="F") + DISS @ v

    return rhs


def run(dh, t_final, qubit, t_eval):
    psi_q = np.array([1, qubit]) / np.sqrt(2)
    vac = np.zeros(N)
    vac[0] = 1
    psi = np.kron(psi_q, vac)
    rho0 = np.outer(psi, psi.conj())
    sol = solve_ivp(rhs_factory(dh), (0, t_final), rho0.ravel(order="F").astype(complex),
                    method="DOP853", rtol=1e-10, atol=1e-12, t_eval=t_eval)
    return sol.t, [y.reshape(D, D, order="F") for y in sol.y.T]


def qnd_minimum(dh):
    tau = 2 / KAPPA
    t_eval = np.linspace(0, tau, 4001)
    _, states = run(dh, tau, +1, t_eval)
    return min(0.5 * (1 + np.real(np.trace(SX @ r))) for r in states)


def averaged_im_a(dh, t_final):
    period = 2 * np.pi / WC
    t_eval = np.linspace(t_final - period, t_final, 401)
    t, states = run(dh, t_final, +1, t_eval)
    vals = np.array([np.trace(A @ r) for r in states])
    return np.trapezoid(vals.imag, t) / period


if __name__ == "__main__":
    print("qnd_min(delta_h = omega_c/2) =", repr(qnd_minimum(WC / 2)))
    print("qnd_min(delta_h = 250) =", repr(qnd_minimum(250.0)))
    print("period-averaged Im<a>(16/kappa), delta_h = omega_c/2 =", repr(averaged_im_a(WC / 2, 16 / KAPPA)))
