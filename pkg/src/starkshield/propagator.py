"""Fixed-step RK4 propagation of one noise realization.

Pure states follow i psi' = H(t) psi; density matrices follow the GKSL
equation with dissipator D[|1><2|] at rate gamma.  Steps are locked to
the drive period and never straddle a noise-grid cell or pulse edge.
The step size is additionally capped so the unitarity (trace) drift
stays within a fixed budget; norm and trace are monitored, never fixed
up behind the caller's back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .emitter import SQRT2, HamiltonianSpec
from .errors import HorizonError, InvalidArgument

# Target worst-case norm loss per evolution from the RK4 stability factor
# |R(-i*lam*h)|^2 ~ 1 - (lam*h)^6/72; the conservative spectral-radius
# estimate leaves an order of magnitude of real headroom on this budget.
_NORM_BUDGET = 1e-6

_NO_PULSES = (
    np.empty(0, dtype=np.float64),
    np.empty(0, dtype=np.float64),
    np.empty(0, dtype=np.int64),
    np.empty(0, dtype=np.float64),
)


@dataclass(frozen=True)
class StepControl:
    """Integrator knobs: drive-period resolution, hard step cap, test tolerance."""

    steps_per_drive_period: int = 40
    max_step: float | None = None
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.steps_per_drive_period < 8:
            raise InvalidArgument("steps_per_drive_period must be >= 8")
        if self.max_step is not None and not (self.max_step > 0.0):
            raise InvalidArgument("max_step must be > 0 when given")


DEFAULT_CONTROL = StepControl()


@dataclass(frozen=True)
class EvolutionResult:
    """Sampled states plus integrator diagnostics."""

    states: np.ndarray
    final: np.ndarray
    drift: float  # max |norm-1| (pure) or |trace-1| (Lindblad) at segment ends
    n_steps: int
    step: float
    straddles: int


def check_pure_state(psi: np.ndarray, tol: float = 1e-6) -> None:
    psi = np.asarray(psi)
    if psi.shape != (3,):
        raise InvalidArgument("pure state must be a length-3 complex vector")
    nrm = float(np.linalg.norm(psi))
    if abs(nrm - 1.0) > tol:
        raise InvalidArgument(f"pure state norm {nrm} deviates from 1 beyond {tol}")


def check_density_matrix(rho: np.ndarray, trace_tol: float = 1e-8, eig_tol: float = 1e-8) -> None:
    rho = np.asarray(rho)
    if rho.shape != (3, 3):
        raise InvalidArgument("density matrix must be 3x3")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise InvalidArgument("density matrix must be Hermitian")
    if abs(np.trace(rho).real - 1.0) > trace_tol:
        raise InvalidArgument("density matrix trace deviates from 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise InvalidArgument("density matrix has a negative eigenvalue")


def _pulse_arrays(gate):
    if gate is None:
        return _NO_PULSES
    return gate.pulse_arrays()


def effective_step(
    spec: HamiltonianSpec,
    t0: float,
    t1: float,
    ctl: StepControl,
    gate=None,
    occupies_level3: bool = True,
) -> float:
    """Step target from the drive-resolution rule and the norm budget."""
    em = spec.emitter
    values = spec.noise.values
    d_max = float(np.max(np.abs(values)))
    d_rms = float(np.sqrt(np.mean(values * values)))
    d_eff = min(d_max, 1.8 * d_rms) if d_max > 0 else 0.0
    drive_on = em.protection_on and em.omega_drive > 0.0
    pulse_rabi = 0.0
    if gate is not None:
        _, _, _, rabis = gate.pulse_arrays()
        if rabis.size:
            pulse_rabi = float(np.max(rabis))
    # fastest oscillation in H(t) to resolve
    w_osc = 0.0
    if drive_on:
        w_osc = max(w_osc, em.delta_drive)
    if em.probe is not None and em.probe.g > 0.0:
        w_osc = max(w_osc, abs(em.probe.delta_omega) + em.probe.g)
    h_osc = 2.0 * math.pi / (ctl.steps_per_drive_period * w_osc) if w_osc > 0.0 else math.inf
    # spectral radius estimate for the norm budget; level 3 only counts
    # if it is coupled or populated
    lam = d_eff + em.gamma
    if drive_on or occupies_level3:
        lam += (em.s + 1.0) * d_eff
    if drive_on:
        lam += SQRT2 * em.omega_drive
    if em.probe is not None:
        lam += em.probe.g
    lam += 2.0 * pulse_rabi
    horizon = max(t1 - t0, 1e-30)
    h_norm = (144.0 * _NORM_BUDGET / (horizon * lam**6)) ** 0.2 if lam > 0.0 else math.inf
    h = min(h_osc, h_norm, t1 - t0 if t1 > t0 else math.inf)
    if ctl.max_step is not None:
        h = min(h, ctl.max_step)
    if not math.isfinite(h):
        h = spec.noise.dt
    return h


def _build_edges(spec: HamiltonianSpec, t0: float, t1: float, sample_times, gate):
    ndt = spec.noise.dt
    parts = [np.array([t0, t1])]
    k_lo = int(math.floor(t0 / ndt)) + 1
    k_hi = int(math.ceil(t1 / ndt)) - 1
    if k_hi >= k_lo:
        parts.append(np.arange(k_lo, k_hi + 1, dtype=np.float64) * ndt)
    if sample_times is not None and len(sample_times):
        parts.append(np.asarray(sample_times, dtype=np.float64))
    if gate is not None:
        p0, pf, _, _ = gate.pulse_arrays()
        for arr in (p0, pf):
            inside = arr[(arr > t0) & (arr < t1)]
            if inside.size:
                parts.append(inside)
    edges = np.unique(np.concatenate(parts))
    edges = edges[(edges >= t0) & (edges <= t1)]
    samp_idx = np.full(edges.shape[0], -1, dtype=np.int64)
    if sample_times is not None and len(sample_times):
        pos = np.searchsorted(edges, sample_times)
        if np.any(pos >= edges.size) or np.any(edges[pos] != sample_times):
            raise InvalidArgument("sample times must lie in [t0, t1]")
        samp_idx[pos] = np.arange(len(sample_times))
    return edges, samp_idx


def _validate_and_prepare(spec, t0, t1, sample_times):
    if t1 < t0:
        raise InvalidArgument(f"t1={t1} must be >= t0={t0}")
    if t0 < -1e-15 or t1 > spec.horizon * (1 + 1e-12):
        raise HorizonError(f"[{t0}, {t1}] exceeds noise horizon {spec.horizon}")
    if sample_times is None:
        st = np.empty(0, dtype=np.float64)
    else:
        st = np.asarray(sample_times, dtype=np.float64)
        if st.size and (np.any(np.diff(st) <= 0)):
            raise InvalidArgument("sample times must be strictly increasing")
        if st.size and (st[0] < t0 - 1e-15 or st[-1] > t1 * (1 + 1e-12) + 1e-300):
            raise HorizonError("sample times must lie within [t0, t1]")
    return st


def evolve_pure(
    state: np.ndarray,
    spec: HamiltonianSpec,
    t0: float,
    t1: float,
    ctl: StepControl = DEFAULT_CONTROL,
    sample_times=None,
    gate=None,
) -> EvolutionResult:
    """RK4 evolution of a 3-level pure state; norm is monitored, not reset."""
    st = _validate_and_prepare(spec, t0, t1, sample_times)
    psi = np.asarray(state, dtype=np.complex128).copy()
    if psi.shape != (3,):
        raise InvalidArgument("pure state must be a length-3 complex vector")
    occ3 = bool(abs(psi[2]) > 1e-12)
    h = effective_step(spec, t0, t1, ctl, gate=gate, occupies_level3=occ3)
    edges, samp_idx = _build_edges(spec, t0, t1, st, gate)
    out = np.empty((st.size, 3), dtype=np.complex128)
    em = spec.emitter
    probe_on = em.probe is not None and em.probe.g > 0.0
    p0, pf, pk, pr = _pulse_arrays(gate)
    drift, nsteps, straddles = _kernels.evolve_pure_kernel(
        psi,
        edges,
        samp_idx,
        out,
        spec.noise.values,
        spec.noise.dt,
        em.s,
        em.protection_on and em.omega_drive > 0.0,
        em.omega_drive,
        em.delta_drive,
        probe_on,
        em.probe.g if probe_on else 0.0,
        em.probe.delta_omega if probe_on else 0.0,
        p0,
        pf,
        pk,
        pr,
        h,
    )
    return EvolutionResult(out, psi, float(drift), int(nsteps), h, int(straddles))


def evolve_lindblad(
    rho: np.ndarray,
    spec: HamiltonianSpec,
    t0: float,
    t1: float,
    ctl: StepControl = DEFAULT_CONTROL,
    sample_times=None,
    gate=None,
) -> EvolutionResult:
    """RK4 on the GKSL generator; Hermitian part kept after every step."""
    st = _validate_and_prepare(spec, t0, t1, sample_times)
    r = np.asarray(rho, dtype=np.complex128).copy()
    if r.shape != (3, 3):
        raise InvalidArgument("density matrix must be 3x3")
    occ3 = bool(abs(r[2, 2]) > 1e-12)
    h = effective_step(spec, t0, t1, ctl, gate=gate, occupies_level3=occ3)
    edges, samp_idx = _build_edges(spec, t0, t1, st, gate)
    out = np.empty((st.size, 3, 3), dtype=np.complex128)
    em = spec.emitter
    probe_on = em.probe is not None and em.probe.g > 0.0
    p0, pf, pk, pr = _pulse_arrays(gate)
    drift, nsteps, straddles = _kernels.evolve_lindblad_kernel(
        r,
        edges,
        samp_idx,
        out,
        spec.noise.values,
        spec.noise.dt,
        em.s,
        em.gamma,
        em.protection_on and em.omega_drive > 0.0,
        em.omega_drive,
        em.delta_drive,
        probe_on,
        em.probe.g if probe_on else 0.0,
        em.probe.delta_omega if probe_on else 0.0,
        p0,
        pf,
        pk,
        pr,
        h,
    )
    return EvolutionResult(out, r, float(drift), int(nsteps), h, int(straddles))


def ramsey_signal_from_states(states: np.ndarray) -> np.ndarray:
    """Paper-normalized Ramsey readout: (1 + 2 Re rho_12)/2, leakage kept."""
    return 0.5 * (1.0 + 2.0 * np.real(states[:, 0] * np.conj(states[:, 1])))


def convergence_probe(
    spec: HamiltonianSpec,
    state: np.ndarray,
    t1: float,
    ctl: StepControl = DEFAULT_CONTROL,
) -> tuple[float, float, float]:
    """Richardson order check on the Ramsey observable at t1.

    Runs the evolution at the control's step, at half, and at quarter
    step; returns (value at h, value at h/2, estimated order).
    """
    vals = []
    h0 = effective_step(spec, 0.0, t1, ctl)
    for k in range(3):
        sub = StepControl(
            steps_per_drive_period=ctl.steps_per_drive_period,
            max_step=h0 / (2.0**k),
            tolerance=ctl.tolerance,
        )
        res = evolve_pure(state, spec, 0.0, t1, sub, sample_times=np.array([t1]))
        vals.append(float(ramsey_signal_from_states(res.states)[0]))
    d1 = abs(vals[0] - vals[1])
    d2 = abs(vals[1] - vals[2])
    if d2 == 0.0:
        order = math.inf if d1 == 0.0 else 0.0
    else:
        order = math.log2(d1 / d2)
    return vals[0], vals[1], order
