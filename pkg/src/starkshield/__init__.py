"""Simulation toolkit for continuous two-drive coherence protection of a
qubit embedded in a three-level emitter under classical dephasing noise."""

__version__ = "0.1.0"

from .emitter import (
    EmitterConfig,
    HamiltonianSpec,
    ProbeConfig,
    bessel_j0,
    hamiltonian_at,
    protection_ratio,
    stark_shift_exact,
    stark_shift_linear,
)
from .noise import (
    NoiseTrace,
    OUParams,
    RTNParams,
    StaticParams,
    derive_seed,
    estimate_autocorrelation,
    generate_ou_trace,
    generate_rtn_trace,
    static_trace,
)
from .propagator import (
    StepControl,
    convergence_probe,
    evolve_lindblad,
    evolve_pure,
)

__all__ = [
    "EmitterConfig",
    "HamiltonianSpec",
    "NoiseTrace",
    "OUParams",
    "ProbeConfig",
    "RTNParams",
    "StaticParams",
    "StepControl",
    "bessel_j0",
    "convergence_probe",
    "derive_seed",
    "estimate_autocorrelation",
    "evolve_lindblad",
    "evolve_pure",
    "generate_ou_trace",
    "generate_rtn_trace",
    "hamiltonian_at",
    "protection_ratio",
    "stark_shift_exact",
    "stark_shift_linear",
    "static_trace",
]
