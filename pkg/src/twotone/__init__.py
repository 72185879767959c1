"""Two-tone modulated longitudinal qubit readout: Lindblad simulation and readout figures of merit."""

from .measurement import (
    DispersiveFeasibility,
    HomodyneResult,
    ScalingFit,
    dispersive_feasibility,
    fit_scaling,
    mean_signal,
    noise_variance,
    snr,
)
from .models import (
    CouplingPhysical,
    HamiltonianKind,
    ModelParams,
    Regime,
    RegimeError,
    RegimeReport,
    classify_regime,
    coupling_j_r,
    hamiltonian_at,
    vanvleck_components,
    vanvleck_effective,
)
from .observables import FidelityReport, FrameError, WignerGrid, qnd_fidelity, reduce, wigner
from .quantum import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    build_operator,
    expectation,
    lindblad_rhs,
)
from .solver import IntegratorConfig, Trajectory, evolve, propagate_matrix

__version__ = "0.1.0"

__all__ = [
    "CouplingPhysical",
    "DensityMatrix",
    "DispersiveFeasibility",
    "FidelityReport",
    "FrameError",
    "HamiltonianKind",
    "HilbertSpace",
    "HomodyneResult",
    "IntegratorConfig",
    "ModelParams",
    "Operator",
    "Regime",
    "RegimeError",
    "RegimeReport",
    "ScalingFit",
    "Trajectory",
    "WignerGrid",
    "build_operator",
    "classify_regime",
    "coupling_j_r",
    "dispersive_feasibility",
    "evolve",
    "expectation",
    "fit_scaling",
    "hamiltonian_at",
    "lindblad_rhs",
    "mean_signal",
    "noise_variance",
    "propagate_matrix",
    "qnd_fidelity",
    "reduce",
    "snr",
    "vanvleck_components",
    "vanvleck_effective",
    "wigner",
]
