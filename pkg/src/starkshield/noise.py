"""Classical noise generators for the stochastic qubit frequency term.

Two processes drive the dephasing term delta(t): an Ornstein-Uhlenbeck
process (Gaussian, correlation b^2 exp(-t/tau)) generated with the exact
discrete update, and random telegraph noise (two-valued +/-xi, Poisson
jumps at rate chi) generated event-driven and sampled onto the grid.
Traces are immutable and fully determined by (params, dt, n_steps, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidArgument

_MASK64 = (1 << 64) - 1

OU = "ou"
RTN = "rtn"
STATIC = "static"


def derive_seed(master_seed: int, *indices: int) -> int:
    """Stable 64-bit sub-seed for (master_seed, indices).

    Built on SeedSequence so trajectory-level parallelism stays
    reproducible no matter how work is scheduled or batched.
    """
    ss = np.random.SeedSequence([int(master_seed) & _MASK64, *[int(i) & _MASK64 for i in indices]])
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed token."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


@dataclass(frozen=True)
class OUParams:
    """Ornstein-Uhlenbeck noise: strength b (angular frequency), correlation time tau."""

    b: float
    tau: float

    def __post_init__(self):
        if not (self.b >= 0.0) or not np.isfinite(self.b):
            raise InvalidArgument(f"OU strength b must be >= 0, got {self.b}")
        if not (self.tau > 0.0) or not np.isfinite(self.tau):
            raise InvalidArgument(f"OU correlation time tau must be > 0, got {self.tau}")


@dataclass(frozen=True)
class RTNParams:
    """Random telegraph noise: jump amplitude xi, jump rate chi."""

    xi: float
    chi: float

    def __post_init__(self):
        if not (self.xi > 0.0) or not np.isfinite(self.xi):
            raise InvalidArgument(f"RTN amplitude xi must be > 0, got {self.xi}")
        if not (self.chi >= 0.0) or not np.isfinite(self.chi):
            raise InvalidArgument(f"RTN jump rate chi must be >= 0, got {self.chi}")


@dataclass(frozen=True)
class StaticParams:
    """Degenerate constant-offset 'noise' (the static inhomogeneity limit)."""

    delta: float


@dataclass(frozen=True)
class NoiseTrace:
    """A sampled stochastic path delta(t_k) on a uniform grid.

    values[k] is the value held on [k*dt, (k+1)*dt); the horizon is
    n_steps * dt.  Consumers treat the path as piecewise constant.
    """

    kind: str
    dt: float
    values: np.ndarray
    seed: int | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (OU, RTN, STATIC):
            raise InvalidArgument(f"unknown trace kind {self.kind!r}")
        if not (self.dt > 0.0) or not np.isfinite(self.dt):
            raise InvalidArgument(f"grid spacing dt must be > 0, got {self.dt}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise InvalidArgument("trace values must be a non-empty 1-D array")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.kind == STATIC and values.size > 1 and np.any(values != values[0]):
            raise InvalidArgument("STATIC trace must hold a single constant value")

    @property
    def n_steps(self) -> int:
        return int(self.values.size)

    @property
    def horizon(self) -> float:
        return self.values.size * self.dt

    def value_at(self, t: float) -> float:
        """Sample-and-hold lookup; accepts t == horizon (clamps to last cell)."""
        from .errors import HorizonError

        if t < -1e-12 * self.dt or t > self.horizon * (1 + 1e-12) + 1e-300:
            raise HorizonError(f"t={t} outside trace horizon [0, {self.horizon}]")
        k = min(int(t / self.dt), self.values.size - 1)
        return float(self.values[k])


def default_ou_dt(params: OUParams, horizon: float) -> float:
    """Default grid spacing: resolve tau while bounding trace length."""
    return min(params.tau / 200.0, horizon / 2000.0)


def default_rtn_dt(params: RTNParams, horizon: float) -> float:
    if params.chi > 0.0:
        return min(1.0 / (50.0 * params.chi), horizon / 2000.0)
    return horizon / 2000.0


def generate_ou_trace(params: OUParams, dt: float, n_steps: int, seed: int) -> NoiseTrace:
    """Exact-update OU path with stationary initialization.

    delta_0 ~ N(0, b^2) and delta_{k+1} = mu*delta_k + b*sqrt(1-mu^2)*n_k
    with mu = exp(-dt/tau).  The update is exact for any dt, so the
    marginal law of every sample is the stationary N(0, b^2).
    """
    if not (dt > 0.0) or not np.isfinite(dt):
        raise InvalidArgument(f"dt must be > 0, got {dt}")
    if n_steps < 1:
        raise InvalidArgument(f"n_steps must be >= 1, got {n_steps}")
    rng = make_rng(seed)
    mu = np.exp(-dt / params.tau)
    normals = rng.standard_normal(n_steps)
    # AR(1) recursion via an IIR filter: y[k] = x[k] + mu*y[k-1] with
    # x[0] the stationary draw and x[k>0] the innovation term.
    x = np.empty(n_steps)
    x[0] = params.b * normals[0]
    if n_steps > 1:
        x[1:] = params.b * np.sqrt(1.0 - mu * mu) * normals[1:]
    values = lfilter([1.0], [1.0, -mu], x)
    return NoiseTrace(kind=OU, dt=dt, values=values, seed=int(seed), meta={"b": params.b, "tau": params.tau})


def generate_rtn_trace(params: RTNParams, dt: float, n_steps: int, seed: int) -> NoiseTrace:
    """Event-driven telegraph path sampled onto the grid.

    Jump times are exponential waiting times at rate chi, drawn until the
    horizon n_steps*dt is covered, so the jump statistics do not depend on
    the grid.  values[k] is the state just after the last jump <= t_k.
    """
    if not (dt > 0.0) or not np.isfinite(dt):
        raise InvalidArgument(f"dt must be > 0, got {dt}")
    if n_steps < 1:
        raise InvalidArgument(f"n_steps must be >= 1, got {n_steps}")
    rng = make_rng(seed)
    horizon = n_steps * dt
    start = params.xi if rng.integers(0, 2) == 1 else -params.xi
    jump_times: list[np.ndarray] = []
    t_acc = 0.0
    if params.chi > 0.0:
        mean_wait = 1.0 / params.chi
        expected = max(8, int(params.chi * horizon * 1.25) + 8)
        while t_acc <= horizon:
            waits = rng.exponential(mean_wait, size=expected)
            times = t_acc + np.cumsum(waits)
            jump_times.append(times)
            t_acc = times[-1]
    jumps = np.concatenate(jump_times) if jump_times else np.empty(0)
    jumps = jumps[jumps <= horizon]
    grid = np.arange(n_steps) * dt
    counts = np.searchsorted(jumps, grid, side="right")
    values = start * np.where(counts % 2 == 0, 1.0, -1.0)
    return NoiseTrace(
        kind=RTN,
        dt=dt,
        values=values,
        seed=int(seed),
        meta={"xi": params.xi, "chi": params.chi, "n_jumps": int(jumps.size)},
    )


def static_trace(delta: float, dt: float, n_steps: int) -> NoiseTrace:
    """Constant-offset trace for the static-inhomogeneity limit and oracle tests."""
    if not (dt > 0.0) or not np.isfinite(dt):
        raise InvalidArgument(f"dt must be > 0, got {dt}")
    if n_steps < 1:
        raise InvalidArgument(f"n_steps must be >= 1, got {n_steps}")
    return NoiseTrace(kind=STATIC, dt=dt, values=np.full(n_steps, float(delta)), seed=None)


def estimate_autocorrelation(
    traces: Iterable[NoiseTrace], lags: Iterable[float]
) -> dict[float, tuple[float, float]]:
    """Unbiased ensemble estimate of <delta(t+lag) delta(t)> with standard error.

    Each trace contributes the average over all valid start points; the
    estimate and its standard error are then taken across traces.
    """
    traces = list(traces)
    if not traces:
        raise InvalidArgument("need at least one trace")
    dt = traces[0].dt
    n = traces[0].n_steps
    for tr in traces:
        if abs(tr.dt - dt) > 1e-12 * dt or tr.n_steps != n:
            raise InvalidArgument("all traces must share the same grid")
    result: dict[float, tuple[float, float]] = {}
    for lag in lags:
        m = lag / dt
        k = int(round(m))
        if abs(m - k) > 1e-6 or k < 0 or k >= n:
            raise InvalidArgument(f"lag {lag} is not a grid multiple within the trace length")
        per_trace = np.empty(len(traces))
        for i, tr in enumerate(traces):
            v = tr.values
            per_trace[i] = np.dot(v[: n - k], v[k:]) / (n - k)
        est = float(per_trace.mean())
        stderr = float(per_trace.std(ddof=1) / np.sqrt(len(traces))) if len(traces) > 1 else 0.0
        result[float(lag)] = (est, stderr)
    return result


def write_trace_csv(trace: NoiseTrace, path) -> None:
    """Export as CSV with header `t,delta`, 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("t,delta\n")
        for k in range(trace.n_steps):
            fh.write(f"{k * trace.dt:.17g},{trace.values[k]:.17g}\n")
