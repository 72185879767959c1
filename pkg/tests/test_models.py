import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twotone.models import (
    LAB,
    CouplingPhysical,
    Frame,
    HamiltonianKind,
    ModelParams,
    Regime,
    RegimeError,
    classify_regime,
    coupling_j_r,
    floquet_resonances,
    generator,
    hamiltonian_at,
    measured_basis,
    readout_frame,
    state_frame,
    vanvleck_components,
    vanvleck_effective,
)
from twotone.quantum import HilbertSpace

K = HamiltonianKind
N = 6
SPACE = HilbertSpace(N)


def ops(n=N):
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    q = {
        "sx": np.array([[0, 1], [1, 0]]),
        "sz": np.array([[1, 0], [0, -1]]),
        "sp": np.array([[0, 1], [0, 0]]),
        "sm": np.array([[0, 0], [1, 0]]),
    }
    o = {k: np.kron(v, np.eye(n)) for k, v in q.items()}
    o["a"] = np.kron(np.eye(2), a)
    o["ad"] = o["a"].conj().T
    o["n"] = o["ad"] @ o["a"]
    o["x"] = o["a"] + o["ad"]
    o["I"] = np.eye(2 * n)
    return o


O = ops()
P = ModelParams(omega_c=1.0, delta_h=0.37, j_r=0.05, kappa=0.02, j0=0.011, omega_d=0.93,
                drive_E=0.07)


def closed_form(kind: K, p: ModelParams, t: float) -> np.ndarray:
    """Hamiltonians written directly from their defining expressions."""
    wc, dh, jr = p.omega_c, p.delta_h, p.j_r
    jt = jr / 8
    h0 = jr / 4 * O["sx"] @ O["x"]
    if kind is K.LabTwoTone:
        return (wc * O["n"] + dh / 2 * O["sz"] + p.j0 / 2 * O["sx"]
                + jr * math.cos(wc * t) * math.cos(dh * t) * O["sx"] @ O["x"])
    if kind is K.RotTwoToneExact:
        q = np.exp(1j * dh * t) * O["sp"] + np.exp(-1j * dh * t) * O["sm"]
        c = np.exp(1j * wc * t) * O["ad"] + np.exp(-1j * wc * t) * O["a"]
        # the static J0 term survives the frame change as a rotating sigma_x
        return jr * math.cos(wc * t) * math.cos(dh * t) * q @ c + p.j0 / 2 * q
    if kind is K.RotEffH0:
        return h0
    if kind is K.RwaDeltaBranch:
        m = np.exp(2j * dh * t) * O["x"] @ O["sp"]
        return h0 + 2 * jt * (m + m.conj().T)
    if kind is K.RwaCavityMinusDeltaBranch:
        m = np.exp(2j * (wc - dh) * t) * O["sm"] @ O["ad"]
        return h0 + 2 * jt * (m + m.conj().T)
    if kind is K.RwaCavityBranch:
        return h0 + 2 * jt * (O["sm"] @ O["ad"] + O["sp"] @ O["a"])
    if kind is K.LabSingleTone:
        return (p.j0 / 2 * O["sx"] + dh / 2 * O["sz"] + wc * O["n"]
                + jr * math.cos(p.omega_d * t) * O["sx"] @ O["x"])
    if kind is K.RotSingleToneRwa:
        return dh / 2 * O["sz"] + (wc - p.omega_d) * O["n"] + jr / 2 * O["sx"] @ O["x"]
    if kind is K.DispersiveDriven:
        return jr**2 / (wc - dh) * O["sz"] @ O["n"] + p.drive_E * O["x"]
    raise AssertionError(kind)


DIRECT_KINDS = [k for k in K if k not in (K.VanVleck, K.VanVleckFrame0)]


# -- parameters and coupling ------------------------------------------------------------


def test_model_params_invariants():
    with pytest.raises(ValueError):
        ModelParams(omega_c=0, delta_h=0, j_r=0, kappa=0)
    for field in ("kappa", "j_r", "delta_h"):
        kw = {"omega_c": 1.0, "delta_h": 0.1, "j_r": 0.1, "kappa": 0.1, field: -0.1}
        with pytest.raises(ValueError, match=field):
            ModelParams(**kw)
    p = ModelParams(omega_c=1.0, delta_h=0.1, j_r=0.37, kappa=0.1)
    assert p.j_tilde == 0.37 / 8
    assert p.homodyne_phase == pytest.approx(math.pi / 2)
    assert p.drive_frequency == 1.0


def test_kind_parsing():
    assert HamiltonianKind.parse("VanVleck") is K.VanVleck
    with pytest.raises(ValueError, match="unknown Hamiltonian kind"):
        HamiltonianKind.parse("Jaynes")


def _physical_for_x(x: float, e_v_r: float = 1.0) -> CouplingPhysical:
    # omega_l = 0 and omega_0 = 1 reduce the sinh argument to 16 v_h
    return CouplingPhysical(e_v_r=e_v_r, v_h=x / 16, omega_0=1.0, omega_l=0.0)


def test_coupling_unit_sinh():
    assert coupling_j_r(_physical_for_x(math.log(1 + math.sqrt(2)), 2.5)) == pytest.approx(2.5)


def test_coupling_monotone_decreasing():
    assert coupling_j_r(_physical_for_x(1.2)) < coupling_j_r(_physical_for_x(0.7))


def test_coupling_large_argument_asymptote():
    got = coupling_j_r(_physical_for_x(10.0, 3.0))
    assert got == pytest.approx(2 * 3.0 * math.exp(-10), rel=1e-4)


def test_coupling_general_argument():
    phys = CouplingPhysical(e_v_r=1.0, v_h=0.01, omega_0=2.0, omega_l=1.5)
    x = 16 * 0.01 * (4 + 2 * 2.25) / (4 * math.sqrt(4 + 2.25))
    assert coupling_j_r(phys) == pytest.approx(1 / math.sinh(x), rel=1e-14)


@pytest.mark.parametrize("v_h", [0.0, -0.1])
def test_coupling_domain_error(v_h):
    with pytest.raises(ValueError, match="sinh argument"):
        coupling_j_r(CouplingPhysical(e_v_r=1.0, v_h=v_h, omega_0=1.0, omega_l=0.3))


# -- Hamiltonian catalog ----------------------------------------------------------------


def test_lab_two_tone_coupling_at_zero_time():
    h = hamiltonian_at(K.LabTwoTone, P, 0.0, SPACE).matrix
    static = P.omega_c * O["n"] + P.delta_h / 2 * O["sz"] + P.j0 / 2 * O["sx"]
    np.testing.assert_allclose(h - static, P.j_r * O["sx"] @ O["x"], atol=1e-15)


def test_rot_eff_h0_is_time_independent():
    for t in (0.0, 1.3, 77.0):
        np.testing.assert_allclose(hamiltonian_at(K.RotEffH0, P, t, SPACE).matrix,
                                   P.j_r / 4 * O["sx"] @ O["x"], atol=1e-15)


@pytest.mark.parametrize("kind", DIRECT_KINDS, ids=lambda k: k.value)
def test_catalog_matches_defining_expressions(kind):
    rng = np.random.default_rng(11)
    for t in rng.uniform(0, 50, 5):
        np.testing.assert_allclose(hamiltonian_at(kind, P, t, SPACE).matrix,
                                   closed_form(kind, P, t), atol=1e-12)


def test_rot_two_tone_period_average_is_h0():
    base = ModelParams(omega_c=1.0, delta_h=0.5, j_r=0.05, kappa=0.0)
    dists = []
    for jr in (0.05, 0.025):
        p = base.replace(j_r=jr)
        gen = generator(K.RotTwoToneExact, p, SPACE)
        ts = np.linspace(0, 2 * math.pi, 4001)
        avg = np.trapezoid([gen.at(t) for t in ts], ts, axis=0) / (2 * math.pi)
        dists.append(np.linalg.norm(avg - jr / 4 * O["sx"] @ O["x"]) / jr)
    assert max(dists) < 1e-10


@settings(max_examples=40, deadline=None)
@given(t=st.floats(0, 1e3), dh=st.floats(0.05, 0.9), jr=st.floats(0.0, 0.2),
       kind=st.sampled_from(list(K)))
def test_every_hamiltonian_is_hermitian(t, dh, jr, kind):
    p = ModelParams(omega_c=1.0, delta_h=dh, j_r=jr, kappa=0.01, j0=0.01, drive_E=0.1)
    try:
        h = hamiltonian_at(kind, p, t, SPACE).matrix
    except RegimeError:
        return
    np.testing.assert_allclose(h, h.conj().T, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0, 1e3), jr=st.floats(0.0, 0.3))
def test_qnd_point_commutes_with_sigma_x(t, jr):
    p = ModelParams(omega_c=1.0, delta_h=0.0, j_r=jr, kappa=0.0)
    h = hamiltonian_at(K.RotTwoToneExact, p, t, SPACE).matrix
    np.testing.assert_allclose(h @ O["sx"] - O["sx"] @ h, 0, atol=1e-12)


def test_hamiltonian_errors():
    with pytest.raises(ValueError):
        hamiltonian_at(K.RotEffH0, P, -1.0, SPACE)
    with pytest.raises(RegimeError):
        hamiltonian_at(K.VanVleck, P.replace(delta_h=0.001), 0.0, SPACE)


def test_frames_and_bases():
    p = P
    assert state_frame(K.LabTwoTone, p) is LAB
    assert state_frame(K.RotTwoToneExact, p) == Frame(p.omega_c, p.delta_h)
    assert state_frame(K.RotSingleToneRwa, p) == Frame(p.omega_d, 0.0)
    assert readout_frame(K.LabSingleTone, p) == Frame(p.omega_d, p.delta_h)
    assert measured_basis(K.DispersiveDriven) == ("up", "down")
    assert measured_basis(K.RotEffH0) == ("plus", "minus")


# -- Van Vleck --------------------------------------------------------------------------


def test_vanvleck_components_entries():
    comps = vanvleck_components(P, SPACE)
    g = P.j_r / 4
    np.testing.assert_array_equal(comps[(0, 0)].matrix, 0)
    np.testing.assert_allclose(comps[(1, 1)].matrix, g * O["sp"] @ O["ad"])
    np.testing.assert_allclose(comps[(1, 0)].matrix, g * O["x"] @ O["sp"])
    np.testing.assert_allclose(comps[(0, 1)].matrix, g * O["sx"] @ O["ad"])
    np.testing.assert_allclose(comps[(-1, 1)].matrix, g * O["sm"] @ O["ad"])
    assert len(comps) == 9
    for (n, k), h in comps.items():
        np.testing.assert_array_equal(comps[(-n, -k)].matrix, h.matrix.conj().T)


def test_vanvleck_components_resum_rot_two_tone():
    rng = np.random.default_rng(5)
    p = P.replace(j0=0.0)
    comps = vanvleck_components(p, SPACE)
    h0 = p.j_r / 4 * O["sx"] @ O["x"]
    for t in rng.uniform(0, 40, 5):
        total = h0 + sum(
            np.exp(2j * (n * p.delta_h + k * p.omega_c) * t) * h.matrix
            for (n, k), h in comps.items()
        )
        np.testing.assert_allclose(total, closed_form(K.RotTwoToneExact, p, t), atol=1e-12)


def _vv_closed(p: ModelParams, n: int, frame0: bool = False) -> np.ndarray:
    o = ops(n)
    x2 = o["x"] @ o["x"]
    x2[n - 1, n - 1] += n  # restore the truncated top entry of (a + a^dag)^2
    x2[2 * n - 1, 2 * n - 1] += n
    g2 = (p.j_r / 4) ** 2
    lor = p.delta_h / (p.omega_c**2 - p.delta_h**2)
    br = x2 / (2 * p.delta_h) - lor * (o["n"] + o["I"] / 2)
    if frame0:
        br = br - o["x"] / p.delta_h + lor * (o["I"] + x2)
    return p.j_r / 4 * o["sx"] @ o["x"] + g2 * br @ o["sz"]


def test_vanvleck_closed_form_expression():
    space = HilbertSpace(8)
    for frame0 in (False, True):
        np.testing.assert_allclose(vanvleck_effective(P, space, frame0=frame0).matrix,
                                   _vv_closed(P, 8, frame0), atol=1e-14)


def test_vanvleck_commutator_sum_matches_closed_form():
    space = HilbertSpace(8)
    p = P.replace(delta_h=0.4)
    diff = (vanvleck_effective(p, space, method="commutator").matrix
            - vanvleck_effective(p, space).matrix)
    assert np.abs(diff).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(frac=st.floats(0.01, 0.99), jr=st.floats(0.01, 0.3))
def test_vanvleck_constructions_agree_in_window(frac, jr):
    jt = jr / 8
    dh = jt + frac * (1.0 - 2 * jt)
    p = ModelParams(omega_c=1.0, delta_h=dh, j_r=jr, kappa=0.0)
    space = HilbertSpace(5)
    diff = (vanvleck_effective(p, space, method="commutator").matrix
            - vanvleck_effective(p, space).matrix)
    assert np.linalg.norm(diff) < 1e-12 * max(1.0, (jr / 4) ** 2 / min(dh, 1 - dh))


def test_vanvleck_number_coefficient_at_half_cavity():
    p = ModelParams(omega_c=1.0, delta_h=0.5, j_r=0.08, kappa=0.0)
    space = HilbertSpace(8)
    o = ops(8)
    h = vanvleck_effective(p, space).matrix - p.j_r / 4 * o["sx"] @ o["x"]
    x2 = o["x"] @ o["x"]
    x2[7, 7] += 8
    x2[15, 15] += 8
    h = h - (p.j_r / 4) ** 2 * x2 / (2 * p.delta_h) @ o["sz"]
    target = (o["n"] + o["I"] / 2) @ o["sz"]
    coef = np.vdot(target, h).real / np.vdot(target, target).real
    assert coef == pytest.approx(-((p.j_r / 4) ** 2) * 2 / (3 * p.omega_c), rel=1e-12)
    np.testing.assert_allclose(h, coef * target, atol=1e-15)


@pytest.mark.parametrize("dh", [0.005, 0.01, 0.995, 1.0])
def test_vanvleck_outside_window(dh):
    p = ModelParams(omega_c=1.0, delta_h=dh, j_r=0.08, kappa=0.0)
    with pytest.raises(RegimeError, match="0.01 < delta_h < 0.99"):
        vanvleck_effective(p, SPACE)


def test_vanvleck_frame0_commutator_route_rejected():
    with pytest.raises(ValueError):
        vanvleck_effective(P, SPACE, frame0=True, method="commutator")


# -- regimes ----------------------------------------------------------------------------


def test_regime_examples():
    wc = 1.0
    p = ModelParams(omega_c=wc, delta_h=0.0, j_r=0.05, kappa=0.025)
    assert classify_regime(p).regime is Regime.DegenerateZero
    r = classify_regime(p.replace(delta_h=wc / 2))
    assert r.regime is Regime.HighFrequency and r.error_order == "O(J~^2/delta_h)"
    assert classify_regime(p.replace(delta_h=p.j_tilde)).regime is Regime.BoundaryLow
    assert classify_regime(p.replace(delta_h=wc - p.j_tilde)).regime is Regime.BoundaryHigh
    assert classify_regime(p.replace(delta_h=p.j_tilde / 2)).regime is Regime.AdiabaticLow
    assert classify_regime(p.replace(delta_h=wc - p.j_tilde / 2)).regime is Regime.AdiabaticHigh
    assert classify_regime(p.replace(delta_h=0.8)).error_order == "O(J~^2/(omega_c-delta_h))"
    with pytest.raises(ValueError):
        classify_regime(p.replace(delta_h=1.2))


@settings(max_examples=80, deadline=None)
@given(dh=st.floats(0.0, 1.0))
def test_regime_piecewise_constant(dh):
    p = ModelParams(omega_c=1.0, delta_h=dh, j_r=0.4, kappa=0.0)
    jt = p.j_tilde
    r = classify_regime(p).regime
    if dh == 0:
        expected = Regime.DegenerateZero
    elif dh < jt:
        expected = Regime.AdiabaticLow
    elif dh == jt:
        expected = Regime.BoundaryLow
    elif dh < 1 - jt:
        expected = Regime.HighFrequency
    elif dh == 1 - jt:
        expected = Regime.BoundaryHigh
    else:
        expected = Regime.AdiabaticHigh
    assert r is expected


def test_floquet_resonance_condition():
    # with neighbouring indices the combination can only vanish at an end of the range
    p = ModelParams(omega_c=1.0, delta_h=0.0, j_r=0.05, kappa=0.0)
    assert (1, 0, 0, 0) in floquet_resonances(p)
    assert classify_regime(p).resonant
    top = floquet_resonances(p.replace(delta_h=1.0))
    assert top and all(abs(np.dot(n, [1, 1, 2, 0])) < 0.1 * p.j_r / 4 for n in top)
    for dh in (0.25, 0.5, 1 / math.pi):
        assert not floquet_resonances(p.replace(delta_h=dh))
