"""Configuration parsing, experiment dispatch, and CSV/JSON emission.

Config files are YAML (key-value with nested sections); command-line
--set key=value overrides use dotted paths into the same structure.
All quantities are dimensionless multiples of the experiment's base
unit: the bath correlation time tau for noise/Ramsey/QPT runs, 1/gamma
for spectroscopy.  Outputs are written with 17 significant digits so
repeated runs are byte-identical for a fixed (config, seed).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np
import yaml

from . import __version__
from .emitter import EmitterConfig, ProbeConfig, protection_ratio
from .errors import ConfigError, InvalidArgument
from .experiments import (
    EnsembleSignal,
    RamseyConfig,
    SpectroscopyConfig,
    coherence_gain,
    fit_t2,
    gain_sweep,
    probe_response_map,
    ramsey_ensemble,
    ripple_amplitude,
)
from .noise import (
    OUParams,
    RTNParams,
    StaticParams,
    default_ou_dt,
    default_rtn_dt,
    derive_seed,
    estimate_autocorrelation,
    generate_ou_trace,
    generate_rtn_trace,
)
from .tomography import (
    DEFAULT_RABI_OVER_XI,
    TomographyConfig,
    hadamard_gate,
    qpt_experiment,
    x_pi_gate,
)

EXPERIMENTS = (
    "noise-validate",
    "ramsey",
    "gain-sweep",
    "spectroscopy",
    "qpt",
    "protection-table",
)

# section key in the config file for each experiment kind
_SECTION = {k: k.replace("-", "_") for k in EXPERIMENTS}

# schema: section -> key -> (type, default); REQUIRED means no default
REQUIRED = object()

_SCHEMAS: dict[str, dict[str, tuple]] = {
    "noise_validate": {
        "kind": (str, "ou"),
        "b": (float, 19.0),
        "tau": (float, 1.0),
        "xi": (float, 4.0),
        "chi": (float, 1.0),
        "horizon": (float, 33.3),
        "n_traces": (int, 10_000),
        "dt": (float, None),
        "lags": (list, None),
    },
    "ramsey": {
        "s": (float, REQUIRED),
        "delta": (float, REQUIRED),
        "omega": (float, None),
        "protection": (bool, True),
        "noise_kind": (str, "ou"),
        "b": (float, 19.0),
        "tau": (float, 1.0),
        "xi": (float, 4.0),
        "chi": (float, 1.0),
        "static_delta": (float, 0.0),
        "horizon": (float, 33.3),
        "n_trajectories": (int, 10_000),
        "n_sample_times": (int, 400),
    },
    "gain_sweep": {
        "s_values": (list, REQUIRED),
        "delta_values": ((list, dict), REQUIRED),
        "b": (float, 19.0),
        "tau": (float, 1.0),
        "horizon": (float, 33.3),
        "n_trajectories": (int, 10_000),
        "n_sample_times": (int, 400),
    },
    "spectroscopy": {
        "s": (float, 40.0),
        "delta": (float, 0.0),
        "xi": (float, 4.0),
        "g": (float, 0.1),
        "gamma": (float, 1.0),
        "t_final": (float, 15.0),
        "delta_omega_values": (list, None),
        "chi_values": (list, None),
        "n_realizations": (int, 100),
    },
    "qpt": {
        "gate": (str, "xpi"),
        "xi": (float, 8.0),
        "chi": (float, 1.0),
        "s": (float, 80.0),
        "delta": (float, 4000.0),
        "rabi": (float, None),
        "shots": (int, 10_000),
        "n_realizations": (int, 100),
        "exact": (bool, False),
    },
    "protection_table": {
        "s_values": (list, None),
    },
}

_TOP_KEYS = {"experiment", "seed", "threads"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved run description: experiment kind, parameters, seed, threads."""

    experiment: str
    params: dict
    master_seed: int
    threads: int

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.master_seed,
            "threads": self.threads,
            _SECTION[self.experiment]: dict(self.params),
        }


def _type_name(tp) -> str:
    if isinstance(tp, tuple):
        return " or ".join(t.__name__ for t in tp)
    return tp.__name__


def _coerce(key: str, value, tp):
    if isinstance(tp, tuple):
        if isinstance(value, tp):
            return value
        raise ConfigError(f"key {key!r} must be {_type_name(tp)}, got {type(value).__name__}")
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key {key!r} must be a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key {key!r} must be an integer, got {value!r}")
        return int(value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"key {key!r} must be true/false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"key {key!r} must be a string, got {value!r}")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigError(f"key {key!r} must be a list, got {value!r}")
        return value
    raise ConfigError(f"unsupported schema type for {key!r}")


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
    return key.strip(), value


def _apply_override(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {dotted!r} crosses a non-section key")
    node[parts[-1]] = value


def parse_config(source, overrides: list[str] | None = None, seed=None, threads=None) -> RunConfig:
    """Build a RunConfig from a YAML file path or a dict, plus overrides.

    Unknown keys, missing required keys, and out-of-domain values raise
    ConfigError naming the offending key.
    """
    if isinstance(source, dict):
        tree = json.loads(json.dumps(source))  # deep copy, plain types
    else:
        with open(source) as fh:
            tree = yaml.safe_load(fh)
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    for text in overrides or []:
        key, value = _parse_override(text)
        _apply_override(tree, key, value)
    experiment = tree.get("experiment")
    if experiment is None:
        raise ConfigError("missing required key 'experiment'")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    section = _SECTION[experiment]
    unknown_top = set(tree) - _TOP_KEYS - {section}
    if unknown_top:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown_top)}")
    raw = tree.get(section, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    schema = _SCHEMAS[section]
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"unknown keys in section {section!r}: {sorted(unknown)}")
    params: dict = {}
    missing = []
    for key, (tp, default) in schema.items():
        if key in raw and raw[key] is not None:
            params[key] = _coerce(f"{section}.{key}", raw[key], tp)
        elif default is REQUIRED:
            missing.append(key)
        else:
            params[key] = default
    if missing:
        raise ConfigError(f"missing required keys in section {section!r}: {missing}")
    if seed is None:
        seed = tree.get("seed", 0)
    if threads is None:
        threads = tree.get("threads", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if isinstance(threads, bool) or not isinstance(threads, int) or threads < 0:
        raise ConfigError("threads must be a non-negative integer (0 = auto)")
    _validate_domains(experiment, params)
    _resolve(experiment, params)
    return RunConfig(experiment=experiment, params=params, master_seed=seed, threads=threads)


def _require_positive(section: str, params: dict, keys) -> None:
    for k in keys:
        v = params.get(k)
        if v is not None and not (v > 0):
            raise ConfigError(f"key {section}.{k} must be > 0, got {v}")


def _validate_domains(experiment: str, p: dict) -> None:
    sec = _SECTION[experiment]
    if experiment == "noise-validate":
        if p["kind"] not in ("ou", "rtn"):
            raise ConfigError("noise_validate.kind must be 'ou' or 'rtn'")
        _require_positive(sec, p, ["b", "tau", "xi", "horizon", "n_traces", "dt"])
        if p["chi"] < 0:
            raise ConfigError("noise_validate.chi must be >= 0")
    elif experiment == "ramsey":
        if p["noise_kind"] not in ("ou", "rtn", "static"):
            raise ConfigError("ramsey.noise_kind must be 'ou', 'rtn' or 'static'")
        _require_positive(sec, p, ["s", "delta", "b", "tau", "xi", "horizon", "n_trajectories"])
    elif experiment == "gain-sweep":
        _require_positive(sec, p, ["b", "tau", "horizon", "n_trajectories"])
    elif experiment == "spectroscopy":
        _require_positive(sec, p, ["s", "xi", "g", "gamma", "t_final", "n_realizations"])
        if p["delta"] < 0:
            raise ConfigError("spectroscopy.delta must be >= 0 (0 disables correction)")
    elif experiment == "qpt":
        if p["gate"] not in ("xpi", "hadamard"):
            raise ConfigError("qpt.gate must be 'xpi' or 'hadamard'")
        _require_positive(sec, p, ["xi", "chi", "s", "delta", "shots", "n_realizations", "rabi"])


def _resolve(experiment: str, p: dict) -> None:
    """Fill documented defaults that depend on other keys."""
    if experiment == "ramsey" and p["omega"] is None:
        p["omega"] = protection_ratio(p["s"]) * p["delta"] if p["protection"] else 0.0
    if experiment == "qpt" and p["rabi"] is None:
        p["rabi"] = DEFAULT_RABI_OVER_XI * p["xi"]
    if experiment == "spectroscopy":
        if p["delta_omega_values"] is None:
            p["delta_omega_values"] = [float(x) for x in np.linspace(-6.0, 6.0, 13) * p["gamma"]]
        if p["chi_values"] is None:
            p["chi_values"] = [
                float(x) for x in np.geomspace(0.1 * p["xi"], 10.0 * p["xi"], 7)
            ]
    if experiment == "protection-table" and p["s_values"] is None:
        p["s_values"] = [2.0, 10.0, 20.0, 40.0, 80.0, 1e3, 1e6]


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: str, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_signal_csv(path: str, sig: EnsembleSignal) -> None:
    _write_csv(
        path,
        "t,mean,stderr",
        zip(sig.times, sig.mean, sig.std_error),
    )


def _write_chi_csv(path: str, chi: np.ndarray) -> None:
    rows = []
    for i in range(4):
        for j in range(4):
            rows.append((i, j, chi[i, j].real, chi[i, j].imag))
    _write_csv(path, "i,j,re,im", rows)


def _atomic_json(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def protection_table(s_values) -> list[tuple]:
    """Rows (s, rhs, ratio, asymptote, residual) for the condition solver."""
    from .emitter import SQRT2, bessel_j0

    rows = []
    for s in s_values:
        if not (s >= 1.0):
            raise InvalidArgument(f"s values must be >= 1, got {s}")
        rhs = (s - 1.0) / (s + 1.0)
        r = protection_ratio(s)
        residual = abs(bessel_j0(2.0 * SQRT2 * r) - rhs)
        rows.append((s, rhs, r, 1.0 / math.sqrt(s + 1.0), residual))
    return rows


def _run_noise_validate(cfg: RunConfig, out_dir: str) -> dict:
    p = cfg.params
    horizon = p["horizon"]
    if p["kind"] == "ou":
        params = OUParams(p["b"], p["tau"])
        dt = p["dt"] or default_ou_dt(params, horizon)
        n = int(math.ceil(horizon / dt - 1e-9))
        traces = [
            generate_ou_trace(params, dt, n, derive_seed(cfg.master_seed, i))
            for i in range(p["n_traces"])
        ]
        lags = p["lags"] or [0.0, p["tau"] / 4.0, p["tau"] / 2.0, p["tau"]]
        lags = [round(l / dt) * dt for l in lags]
        theory = {l: p["b"] ** 2 * math.exp(-l / p["tau"]) for l in lags}
        summary: dict = {}
    else:
        params = RTNParams(p["xi"], p["chi"])
        dt = p["dt"] or default_rtn_dt(params, horizon)
        n = int(math.ceil(horizon / dt - 1e-9))
        traces = [
            generate_rtn_trace(params, dt, n, derive_seed(cfg.master_seed, i))
            for i in range(p["n_traces"])
        ]
        lags = p["lags"] or [0.0, 1.0 / (8 * p["chi"]), 1.0 / (4 * p["chi"]), 1.0 / (2 * p["chi"])]
        lags = [round(l / dt) * dt for l in lags]
        theory = {l: p["xi"] ** 2 * math.exp(-2.0 * p["chi"] * l) for l in lags}
        counts = np.array([tr.meta["n_jumps"] for tr in traces], dtype=float)
        summary = {
            "mean_jump_count": float(counts.mean()),
            "jump_count_variance": float(counts.var(ddof=1)) if counts.size > 1 else 0.0,
            "expected_jump_count": p["chi"] * n * dt,
        }
    est = estimate_autocorrelation(traces, lags)
    rows = [(l, est[l][0], est[l][1], theory[l]) for l in lags]
    _write_csv(os.path.join(out_dir, "noise_stats.csv"), "lag,estimate,stderr,theory", rows)
    summary["n_traces"] = p["n_traces"]
    return summary


def _ramsey_noise_params(p: dict):
    if p["noise_kind"] == "ou":
        return OUParams(p["b"], p["tau"])
    if p["noise_kind"] == "rtn":
        return RTNParams(p["xi"], p["chi"])
    return StaticParams(p["static_delta"])


def _run_ramsey(cfg: RunConfig, out_dir: str) -> dict:
    p = cfg.params
    emitter = EmitterConfig(
        s=p["s"],
        delta_drive=p["delta"],
        omega_drive=p["omega"],
        protection_on=p["protection"],
    )
    rc = RamseyConfig(
        emitter=emitter,
        noise=_ramsey_noise_params(p),
        horizon=p["horizon"],
        n_trajectories=p["n_trajectories"],
        n_sample_times=p["n_sample_times"],
        master_seed=cfg.master_seed,
    )
    sig = ramsey_ensemble(rc)
    _write_signal_csv(os.path.join(out_dir, "signal.csv"), sig)
    summary: dict = {"ripple_amplitude": sig.ripple_amplitude}
    try:
        fit = fit_t2(sig)
        summary["t2"] = fit.t2
        summary["fit_valid"] = fit.valid
        if fit.valid and p["noise_kind"] == "ou":
            summary["gain_slow"] = coherence_gain(fit, p["b"], p["tau"])
    except Exception as exc:  # fit can fail legitimately on flat signals
        summary["fit_error"] = str(exc)
    return summary


def _run_gain_sweep(cfg: RunConfig, out_dir: str) -> dict:
    p = cfg.params
    delta_values = p["delta_values"]
    if isinstance(delta_values, dict):
        delta_values = {float(k): v for k, v in delta_values.items()}
    base = RamseyConfig(
        emitter=EmitterConfig(s=2.0, delta_drive=1.0, omega_drive=0.0, protection_on=False),
        noise=OUParams(p["b"], p["tau"]),
        horizon=p["horizon"],
        n_trajectories=p["n_trajectories"],
        n_sample_times=p["n_sample_times"],
        master_seed=cfg.master_seed,
    )
    rows = gain_sweep(p["s_values"], delta_values, base)
    _write_csv(
        os.path.join(out_dir, "gain_table.csv"),
        "s,delta,omega,t2,gain,ripple,stderr",
        [(r.s, r.delta, r.omega, r.t2, r.gain, r.ripple, r.stderr) for r in rows],
    )
    return {"rows": len(rows), "fit_failures": sum(1 for r in rows if not r.valid)}


def _run_spectroscopy(cfg: RunConfig, out_dir: str) -> dict:
    p = cfg.params
    corrected = p["delta"] > 0.0
    emitter = EmitterConfig(
        s=p["s"],
        delta_drive=p["delta"] if corrected else 0.0,
        omega_drive=protection_ratio(p["s"]) * p["delta"] if corrected else 0.0,
        gamma=p["gamma"],
        protection_on=corrected,
        probe=ProbeConfig(g=p["g"], delta_omega=0.0),
    )
    sc = SpectroscopyConfig(
        emitter=emitter,
        noise=RTNParams(p["xi"], 1.0),
        delta_omega_values=np.asarray(p["delta_omega_values"], dtype=float),
        chi_values=np.asarray(p["chi_values"], dtype=float),
        evolve_time=p["t_final"],
        n_realizations=p["n_realizations"],
        master_seed=cfg.master_seed,
    )
    smap = probe_response_map(sc)
    rows = []
    for ic, chi in enumerate(smap.chi):
        for iw, dw in enumerate(smap.delta_omega):
            rows.append((dw, chi, smap.excitation[ic, iw], smap.std_error[ic, iw]))
    _write_csv(
        os.path.join(out_dir, "map.csv"), "delta_omega,chi,excitation,stderr", rows
    )
    return {
        "corrected": corrected,
        "max_excitation": float(smap.excitation.max()),
        "grid": [int(smap.chi.size), int(smap.delta_omega.size)],
    }


def _run_qpt(cfg: RunConfig, out_dir: str) -> dict:
    p = cfg.params
    gate = x_pi_gate(p["rabi"]) if p["gate"] == "xpi" else hadamard_gate(p["rabi"])
    emitter = EmitterConfig(
        s=p["s"],
        delta_drive=p["delta"],
        omega_drive=protection_ratio(p["s"]) * p["delta"],
        protection_on=True,
    )
    tc = TomographyConfig(
        gate=gate,
        noise=RTNParams(p["xi"], p["chi"]),
        emitter=emitter,
        shots=p["shots"],
        exact_expectations=p["exact"],
        n_realizations=p["n_realizations"],
        master_seed=cfg.master_seed,
    )
    res = qpt_experiment(tc)
    _write_chi_csv(os.path.join(out_dir, "chi_ideal.csv"), res.chi_ideal)
    _write_chi_csv(os.path.join(out_dir, "chi_noisy.csv"), res.chi_noisy)
    _write_chi_csv(os.path.join(out_dir, "chi_protected.csv"), res.chi_protected)
    summary = {
        "gate": p["gate"],
        "fidelity_ideal": res.fidelity_ideal,
        "fidelity_noisy": res.fidelity_noisy,
        "fidelity_protected": res.fidelity_protected,
    }
    _atomic_json(
        os.path.join(out_dir, "qpt_summary.json"),
        {**summary, "parameters": dict(p), "seed": cfg.master_seed},
    )
    return summary


def _run_protection_table(cfg: RunConfig, out_dir: str) -> dict:
    rows = protection_table(cfg.params["s_values"])
    _write_csv(
        os.path.join(out_dir, "protection_table.csv"),
        "s,rhs,ratio,asymptote,residual",
        rows,
    )
    return {"rows": len(rows), "max_residual": max(r[4] for r in rows)}


_RUNNERS = {
    "noise-validate": _run_noise_validate,
    "ramsey": _run_ramsey,
    "gain-sweep": _run_gain_sweep,
    "spectroscopy": _run_spectroscopy,
    "qpt": _run_qpt,
    "protection-table": _run_protection_table,
}


def run(cfg: RunConfig, out_dir: str) -> dict:
    """Dispatch the experiment, write CSVs plus manifest.json; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    if cfg.threads > 0:
        try:
            import numba

            numba.set_num_threads(cfg.threads)
        except Exception:
            pass
    started = time.time()
    try:
        summary = _RUNNERS[cfg.experiment](cfg, out_dir)
    except Exception:
        marker = os.path.join(out_dir, "PARTIAL")
        with open(marker, "w") as fh:
            fh.write("run failed; outputs in this directory may be incomplete\n")
        raise
    manifest = {
        "tool": "starkshield",
        "version": __version__,
        "experiment": cfg.experiment,
        "seed": cfg.master_seed,
        "threads": cfg.threads,
        "duration_s": round(time.time() - started, 3),
        "config": cfg.echo(),
        "summary": summary,
    }
    _atomic_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="starkshield",
        description="Coherence-protection simulator: noise validation, Ramsey/FID, "
        "gain sweeps, weak-probe spectroscopy, and process tomography.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (dotted path), repeatable",
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (0 = auto)")
    args = parser.parse_args(argv)
    try:
        source = args.config if args.config else {"experiment": args.experiment}
        cfg = parse_config(source, args.overrides, seed=args.seed, threads=args.threads)
        if cfg.experiment != args.experiment:
            raise ConfigError(
                f"config file declares experiment {cfg.experiment!r}, "
                f"command line says {args.experiment!r}"
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg, args.out)
    except Exception as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(manifest["summary"], sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
