"""Three-level emitter model in the doubly-rotating frame.

Levels |1>,|2>,|3> map to indices 0,1,2.  The qubit is {|1>,|2>}; |3> is
the auxiliary level whose noise shift is -s times (and opposite to) the
qubit level's.  The two drives of amplitude Omega detuned by +/-Delta
combine to sqrt(2)*Omega*cos(Delta t) on the 2<->3 transition, and the
weak probe acts on 1<->2 in RWA with amplitude g/2 and phase exp(-i dw t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HorizonError, InvalidArgument, SingularityError
from .noise import NoiseTrace

SQRT2 = math.sqrt(2.0)

# First zero of J0, frozen to double precision.
J0_FIRST_ZERO = 2.404825557695773


@dataclass(frozen=True)
class ProbeConfig:
    """Weak transversal probe: amplitude g, detuning dw = omega_p - omega_2."""

    g: float
    delta_omega: float

    def __post_init__(self):
        if not (self.g >= 0.0) or not np.isfinite(self.g):
            raise InvalidArgument(f"probe amplitude g must be >= 0, got {self.g}")


@dataclass(frozen=True)
class EmitterConfig:
    """Emitter and drive parameters.

    s: sensitivity of the auxiliary level (>= 1)
    delta_drive: drive detuning Delta (> 0 when protection is on)
    omega_drive: drive amplitude Omega (>= 0)
    gamma: qubit energy relaxation rate (>= 0, used by the Lindblad solver)
    """

    s: float
    delta_drive: float = 0.0
    omega_drive: float = 0.0
    gamma: float = 0.0
    protection_on: bool = False
    probe: ProbeConfig | None = None

    def __post_init__(self):
        if not (self.s >= 1.0):
            raise InvalidArgument(f"sensitivity s must be >= 1, got {self.s}")
        if self.protection_on and not (self.delta_drive > 0.0):
            raise InvalidArgument("delta_drive must be > 0 when protection is on")
        if not (self.omega_drive >= 0.0):
            raise InvalidArgument(f"omega_drive must be >= 0, got {self.omega_drive}")
        if not (self.gamma >= 0.0):
            raise InvalidArgument(f"gamma must be >= 0, got {self.gamma}")

    def with_protection_ratio(self) -> "EmitterConfig":
        """Copy with Omega set from the protection condition at this (s, Delta)."""
        omega = protection_ratio(self.s) * self.delta_drive
        return EmitterConfig(
            s=self.s,
            delta_drive=self.delta_drive,
            omega_drive=omega,
            gamma=self.gamma,
            protection_on=True,
            probe=self.probe,
        )


@dataclass(frozen=True)
class HamiltonianSpec:
    """Emitter + one noise realization; evaluable at any t in the trace horizon."""

    emitter: EmitterConfig
    noise: NoiseTrace

    @property
    def horizon(self) -> float:
        return self.noise.horizon


def hamiltonian_at(spec: HamiltonianSpec, t: float, gate=None) -> np.ndarray:
    """Dense 3x3 Hermitian H(t) in the doubly-rotating frame.

    Reference implementation; the integrator kernels inline the same
    expressions and are cross-checked against this function in the tests.
    """
    if t < -1e-15 or t > spec.horizon * (1 + 1e-12):
        raise HorizonError(f"t={t} outside noise horizon [0, {spec.horizon}]")
    em = spec.emitter
    d = spec.noise.value_at(t)
    h = np.zeros((3, 3), dtype=np.complex128)
    h[1, 1] = -d
    h[2, 2] = em.s * d
    if em.protection_on and em.omega_drive > 0.0:
        c = SQRT2 * em.omega_drive * math.cos(em.delta_drive * t)
        h[1, 2] += c
        h[2, 1] += c
    if em.probe is not None and em.probe.g > 0.0:
        p = 0.5 * em.probe.g * np.exp(-1j * em.probe.delta_omega * t)
        h[0, 1] += p
        h[1, 0] += np.conj(p)
    if gate is not None:
        h += gate.pulse_hamiltonian(t)
    return h


# ---------------------------------------------------------------------------
# Zeroth-order Bessel function (Cephes-style rational approximations).
# Absolute accuracy ~4e-16 peак on [0, 30]; the tests check 1e-12 against
# an independent power-series oracle and scipy.

_DR1 = 5.78318596294678452118e0
_DR2 = 3.04712623436620863991e1

_RP = (
    -4.79443220978201773821e9,
    1.95617491946556577543e12,
    -2.49248344360967716204e14,
    9.70862251047306323952e15,
)
_RQ = (
    4.99563147152651017219e2,
    1.73785401676374683123e5,
    4.84409658339962045305e7,
    1.11855537045356834862e10,
    2.11277520115489217587e12,
    3.10518229857422583814e14,
    3.18121955943204943306e16,
    1.71086294081043136091e18,
)
_PP = (
    7.96936729297347051624e-4,
    8.28352392107440799803e-2,
    1.23953371646414299388e0,
    5.44725003058768775090e0,
    8.74716500199817011941e0,
    5.30324038235394892183e0,
    9.99999999999999997821e-1,
)
_PQ = (
    9.24408810558863637013e-4,
    8.56288474354474431428e-2,
    1.25352743901058953537e0,
    5.47097740330417105182e0,
    8.76190883237069594232e0,
    5.30605288235394617618e0,
    1.00000000000000000218e0,
)
_QP = (
    -1.13663838898469149931e-2,
    -1.28252718670509318512e0,
    -1.95539544257735972385e1,
    -9.32060152123768231369e1,
    -1.77681167980488050595e2,
    -1.47077505154951170175e2,
    -5.14105326766599330220e1,
    -6.05014350600728481186e0,
)
_QQ = (
    6.43178256118178023184e1,
    8.56430025976980587198e2,
    3.88240183605401609683e3,
    7.24046774195652478189e3,
    5.93072701187316984827e3,
    2.06209331660327847417e3,
    2.42005740240291393179e2,
)
_SQ2OPI = 7.9788456080286535587989e-1
_PIO4 = 0.78539816339744830962


def _polevl(x: float, coef) -> float:
    ans = coef[0]
    for c in coef[1:]:
        ans = ans * x + c
    return ans


def _p1evl(x: float, coef) -> float:
    ans = x + coef[0]
    for c in coef[1:]:
        ans = ans * x + c
    return ans


def bessel_j0(x: float) -> float:
    """J0(x) for finite real x."""
    x = float(x)
    if not math.isfinite(x):
        raise InvalidArgument(f"bessel_j0 requires finite x, got {x}")
    x = abs(x)
    if x < 1e-5:
        return 1.0 - x * x / 4.0
    if x <= 5.0:
        z = x * x
        return (z - _DR1) * (z - _DR2) * _polevl(z, _RP) / _p1evl(z, _RQ)
    w = 5.0 / x
    q = 25.0 / (x * x)
    p = _polevl(q, _PP) / _polevl(q, _PQ)
    qq = _polevl(q, _QP) / _p1evl(q, _QQ)
    xn = x - _PIO4
    return _SQ2OPI * (p * math.cos(xn) - w * qq * math.sin(xn)) / math.sqrt(x)


def protection_ratio(s: float) -> float:
    """Drive ratio Omega/Delta that cancels the noise-induced qubit shift.

    Smallest positive r with J0(2*sqrt(2)*r) = (s-1)/(s+1).  The rhs lies
    in [0, 1) and J0 decreases monotonically from 1 to 0 on (0, j_{0,1}],
    so bisection on that bracket finds the unique root.
    """
    if not (s >= 1.0) or not np.isfinite(s):
        raise InvalidArgument(f"sensitivity s must be >= 1, got {s}")
    rhs = (s - 1.0) / (s + 1.0)
    lo, hi = 0.0, J0_FIRST_ZERO + 1e-9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bessel_j0(mid) - rhs > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    x = 0.5 * (lo + hi)
    return x / (2.0 * SQRT2)


def stark_shift_linear(omega: float, delta: float, s: float, dv: float) -> float:
    """Linearized two-drive Stark shift of level |2>: (Omega/Delta)^2 * s * delta."""
    if delta == 0.0:
        raise InvalidArgument("drive detuning Delta must be nonzero")
    return (omega / delta) ** 2 * s * dv


def stark_shift_exact(omega: float, delta: float, s: float, dv: float) -> float:
    """Two-term Stark shift before expansion: Omega^2 s d / (Delta^2 - s^2 d^2)."""
    sd = s * dv
    denom = (delta - sd) * (delta + sd)
    if denom == 0.0:
        raise SingularityError("Stark shift singular at |s*delta| == Delta")
    return omega * omega * sd / denom
