"""Command-line front end: figure/number reproduction pipelines.

Every command writes CSV/JSON artifacts plus a resolved_config.json into its
output directory; identical configs and seeds give byte-identical outputs.
Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, dde, experiment as ex, io_formats as io, spectral as sp, states
from .errors import ConfigError, ContractViolationError, InsufficientDataError

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

KNOWN_CONFIG_KEYS = {
    "gamma",
    "tau_seconds",
    "mu_per_second",
    "duration_seconds",
    "samples_per_tau",
    "seed",
    "seeds",
    "pair_rate_per_second",
    "coincidence_window_seconds",
    "beta_policy",
    "beta_fixed_rad",
    "detector_efficiency",
    "accidental_rate_per_second",
    "out_dir",
}


def load_run_config(path: Path) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - KNOWN_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _resolve_tau(args) -> float:
    has_tau = getattr(args, "tau_seconds", None) is not None
    has_len = getattr(args, "length_m", None) is not None
    if has_tau and has_len:
        raise ConfigError("give either --tau-seconds or --length-m, not both")
    if has_len:
        return args.length_m / ex.SPEED_OF_LIGHT
    return args.tau_seconds if has_tau else 1.0


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(out: Path, resolved: dict) -> None:
    io.write_json(out / "resolved_config.json", {"version": __version__, **resolved})


def cmd_step(args) -> int:
    out = _out_dir(args)
    traj = dde.step_trajectory(args.gamma, args.t_end, args.samples_per_tau)
    resp = dde.measure_step_response(traj)
    tau = _resolve_tau(args)
    if tau != 1.0:
        traj = replace(traj, t0=traj.t0 * tau, dt=traj.dt * tau)
    io.write_trajectory_csv(out / "trajectory.csv", traj)
    io.write_json(
        out / "step_response.json",
        {
            "gamma": args.gamma,
            "tau_seconds": tau,
            "decay_time_tau": resp.decay_time,
            "period_tau": resp.period,
            "diverged": resp.diverged,
        },
    )
    _write_resolved(
        out,
        {
            "command": "step",
            "gamma": args.gamma,
            "t_end_tau": args.t_end,
            "samples_per_tau": args.samples_per_tau,
            "tau_seconds": tau,
        },
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    gammas = np.linspace(args.gamma_min, args.gamma_max, args.steps)
    rows = dde.gamma_sweep(gammas, args.t_end)
    with (out / "sweep.csv").open("w") as fh:
        fh.write("gamma,decay_time_tau,period_tau,diverged\n")
        for r in rows:
            fh.write(
                f"{r.gamma!r},{r.decay_time_tau!r},{r.period_tau!r},{int(r.diverged)}\n"
            )
    _write_resolved(
        out,
        {
            "command": "sweep",
            "gamma_min": args.gamma_min,
            "gamma_max": args.gamma_max,
            "steps": args.steps,
            "t_end_tau": args.t_end,
        },
    )
    return EXIT_OK


def _experiment_config(args, seed: int) -> ex.ExperimentConfig:
    tau = _resolve_tau(args)
    mu = args.mu_tau / tau if args.mu_tau is not None else (args.mu or 0.0)
    duration = args.duration_tau * tau if args.duration_tau is not None else args.duration
    if duration is None:
        raise ConfigError("duration required (--duration-tau or --duration-seconds)")
    window = args.window_tau * tau if args.window_tau is not None else None
    return ex.ExperimentConfig(
        gamma=args.gamma,
        tau=tau,
        mu=mu,
        duration=duration,
        seed=seed,
        samples_per_tau=args.samples_per_tau,
        pair_rate=(args.pair_rate_tau / tau if args.pair_rate_tau is not None else None),
        coincidence_window=window,
        beta_policy=args.beta_policy,
        beta_fixed=args.beta_fixed,
        detector_efficiency=args.efficiency,
        accidental_rate=(args.accidental_rate_tau / tau if args.accidental_rate_tau else 0.0),
    )


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    seeds = list(range(args.seed, args.seed + args.seeds))
    s_values = []
    for seed in seeds:
        cfg = _experiment_config(args, seed)
        cfg.validate()
        traj = ex.simulate_rho_d(cfg)
        s = ex.s_chsh_ideal(traj)
        s_values.append(s)
        sub = out / f"seed_{seed}" if len(seeds) > 1 else out
        sub.mkdir(parents=True, exist_ok=True)
        io.write_trajectory_csv(sub / "trajectory.csv", traj, extras=True)
        payload = {
            "seed": seed,
            "s_chsh_ideal": s,
            "diverged": traj.diverged,
        }
        if cfg.pair_rate is not None:
            tags = ex.generate_time_tags(cfg, traj)
            io.write_tags_csv(sub / "tags.csv", tags, meta={"config": _cfg_dict(cfg)})
            counts = ex.count_coincidences(tags, cfg.window)
            try:
                est = ex.s_chsh_from_counts(counts)
                payload["s_chsh_counts"] = est.value
                payload["s_chsh_counts_stderr"] = est.stderr
            except InsufficientDataError:
                payload["s_chsh_counts"] = None
        io.write_json(sub / "schsh.json", payload)
    io.write_json(
        out / "summary.json",
        {
            "seeds": seeds,
            "s_chsh_ideal": s_values,
            "s_chsh_ideal_mean": float(np.mean(s_values)),
            "s_chsh_ideal_std": float(np.std(s_values, ddof=1)) if len(s_values) > 1 else 0.0,
        },
    )
    _write_resolved(out, {"command": "simulate", **_cfg_dict(_experiment_config(args, args.seed))})
    return EXIT_OK


def _cfg_dict(cfg: ex.ExperimentConfig) -> dict:
    return {
        "gamma": cfg.gamma,
        "tau_seconds": cfg.tau,
        "mu_per_second": cfg.mu,
        "duration_seconds": cfg.duration,
        "seed": cfg.seed,
        "samples_per_tau": cfg.samples_per_tau,
        "pair_rate_per_second": cfg.pair_rate,
        "coincidence_window_seconds": cfg.window,
        "beta_policy": cfg.beta_policy,
        "beta_fixed_rad": cfg.beta_fixed,
        "detector_efficiency": cfg.detector_efficiency,
        "accidental_rate_per_second": cfg.accidental_rate,
    }


def cmd_spectrum(args) -> int:
    out = _out_dir(args)
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"input not found: {path}")
    tau = _resolve_tau(args)
    with path.open() as fh:
        header = fh.readline().strip()
    if header.startswith("t_seconds"):
        tags = io.read_tags_csv(path)
        window = args.window_tau * tau if args.window_tau is not None else tau / 100.0
        pairs = ex.pair_coincidences(tags, window)
        series = sp.correlation_series(
            pairs, args.bin_width_tau * tau, 0.0, float(tags.t[-1])
        )
        spectrum = sp.welch_spectrum(series, args.welch_segments)
        peak = sp.detect_peak(spectrum, args.min_prominence, smooth_bins=1)
    else:
        traj = io.read_trajectory_csv(path)
        series = sp.bin_trajectory(traj, args.bin_width_tau * tau, signal=args.signal)
        spectrum = sp.power_spectrum(series)
        peak = sp.detect_peak(spectrum, args.min_prominence)
    io.write_spectrum_csv(out / "spectrum.csv", spectrum, tau_seconds=tau)
    io.write_json(
        out / "peak.json",
        {
            "input": str(path),
            "tau_seconds": tau,
            "background": spectrum.background,
            "peak": None
            if peak is None
            else {
                "frequency_per_tau": peak.frequency * tau,
                "frequency_hz": peak.frequency,
                "power": peak.power,
                "prominence": peak.prominence,
            },
        },
    )
    _write_resolved(
        out,
        {
            "command": "spectrum",
            "input": str(path),
            "bin_width_tau": args.bin_width_tau,
            "signal": args.signal,
            "min_prominence": args.min_prominence,
            "tau_seconds": tau,
        },
    )
    return EXIT_OK


def cmd_chsh(args) -> int:
    out = _out_dir(args)
    tags = io.read_tags_csv(Path(args.tags))
    counts = ex.count_coincidences(tags, args.window)
    est = ex.s_chsh_from_counts(counts)
    blocks = {}
    for i, alpha in enumerate(("0", "pi/4")):
        for j, beta in enumerate(("pi/8", "3pi/8")):
            cell = counts.counts[i, j]
            blocks[f"alpha={alpha},beta={beta}"] = {
                "n_pp": int(cell[0, 0]),
                "n_pm": int(cell[0, 1]),
                "n_mp": int(cell[1, 0]),
                "n_mm": int(cell[1, 1]),
                "correlation": float(est.correlations[i, j]),
            }
    io.write_json(
        out / "chsh.json",
        {
            "s_chsh": est.value,
            "stderr": est.stderr,
            "total_coincidences": counts.total,
            "accidental_estimate": counts.accidental_estimate,
            "cells": blocks,
        },
    )
    _write_resolved(out, {"command": "chsh", "tags": str(args.tags), "window_seconds": args.window})
    return EXIT_OK


def cmd_feasibility(args) -> int:
    report = ex.feasibility(args.length_m, args.pair_rate, args.required_pairs_per_tau)
    payload = asdict(report)
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        out = _out_dir(args)
        (out / "feasibility.json").write_text(text + "\n")
        _write_resolved(out, {"command": "feasibility", "length_m": args.length_m,
                              "pair_rate_per_second": args.pair_rate})
    print(text)
    return EXIT_OK


def cmd_concurrence(args) -> int:
    if args.epsilon is not None:
        rho = states.rho_epsilon(args.epsilon)
        label = {"epsilon": args.epsilon}
    elif args.rho_d is not None and args.rho_a is not None:
        rho = states.RotInvariantState(args.rho_d, args.rho_a).expand()
        label = {"rho_d": args.rho_d, "rho_a": args.rho_a}
    else:
        raise ConfigError("give --epsilon or both --rho-d and --rho-a")
    conc = states.concurrence(rho)
    pos = states.is_positive(rho)
    payload = {
        **label,
        "concurrence": conc.value,
        "reliable": conc.reliable,
        "positive": pos.is_positive,
        "min_eigenvalue": pos.min_eigenvalue,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    """Re-run the bundled golden checks (fast subset of the acceptance suite)."""
    golden = json.loads(
        (Path(__file__).parent / "data" / "golden.json").read_text()
    )
    failures = []

    def check(name: str, value: float, expected: float, tol: float):
        ok = abs(value - expected) <= tol
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.6g} (expect {expected:.6g} +/- {tol:g})")
        if not ok:
            failures.append(name)

    r = dde.step_response(1.0)
    check("step.gamma1.period_tau", r.period, golden["step_gamma1"]["period_tau"], 0.01)
    check("step.gamma1.decay_tau", r.decay_time, golden["step_gamma1"]["decay_time_tau"], 0.01)

    c = states.concurrence(states.rho_epsilon(0.05)).value
    check("concurrence.eps_0.05", c, 0.70, 1e-10)
    check(
        "concurrence.scrt",
        states.concurrence(states.RotInvariantState(0.375, 0.125)).value,
        0.0,
        1e-10,
    )

    rep = ex.feasibility(5000.0, 3.0e5)
    check("feasibility.5km.pairs_per_tau", rep.pairs_per_tau, golden["feasibility_5km"], 0.01)

    cfg = ex.ExperimentConfig(gamma=0.9, tau=1.0, mu=0.2, duration=2000.0, seed=0)
    s = ex.s_chsh_ideal(ex.simulate_rho_d(cfg))
    check("schsh.fig5.seed0", s, golden["schsh_fig5_seed0"], 1e-9)

    if failures:
        print(f"{len(failures)} golden check(s) failed")
        return EXIT_RUNTIME
    print("all golden checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="eprb-delay",
        description="Delayed-relaxation EPRB simulation and analysis",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_tau(q):
        q.add_argument("--tau-seconds", type=float, default=None)
        q.add_argument("--length-m", type=float, default=None,
                       help="station separation; tau = L / c (exclusive with --tau-seconds)")

    q = sub.add_parser("step", help="single setting-change response (ringing)")
    q.add_argument("--gamma", type=float, required=True)
    q.add_argument("--t-end", type=float, default=60.0, help="in units of tau")
    q.add_argument("--samples-per-tau", type=int, default=100)
    add_tau(q)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_step)

    q = sub.add_parser("sweep", help="decay time / period versus gamma")
    q.add_argument("--gamma-min", type=float, default=0.1)
    q.add_argument("--gamma-max", type=float, default=1.55)
    q.add_argument("--steps", type=int, default=30)
    q.add_argument("--t-end", type=float, default=60.0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("simulate", help="stochastic-settings experiment run")
    q.add_argument("--config", type=Path, default=None)
    q.add_argument("--gamma", type=float, default=None)
    q.add_argument("--mu-tau", type=float, default=None, help="coin-toss rate times tau")
    q.add_argument("--mu", type=float, default=None, help="coin-toss rate per second")
    q.add_argument("--duration-tau", type=float, default=None)
    q.add_argument("--duration", dest="duration", type=float, default=None,
                   help="duration in seconds")
    q.add_argument("--samples-per-tau", type=int, default=100)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    q.add_argument("--pair-rate-tau", type=float, default=None, help="pairs per tau")
    q.add_argument("--window-tau", type=float, default=None)
    q.add_argument("--beta-policy", choices=["random_per_pair", "fixed"],
                   default="random_per_pair")
    q.add_argument("--beta-fixed", type=float, default=ex.BETA_VALUES[0])
    q.add_argument("--efficiency", type=float, default=1.0)
    q.add_argument("--accidental-rate-tau", type=float, default=0.0)
    add_tau(q)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("spectrum", help="power spectrum of a trajectory or tag file")
    q.add_argument("--input", required=True)
    q.add_argument("--bin-width-tau", type=float, default=0.1)
    q.add_argument("--signal", choices=["deviation", "rho_d", "rho_no_gap"],
                   default="deviation")
    q.add_argument("--min-prominence", type=float, default=sp.DEFAULT_PROMINENCE)
    q.add_argument("--welch-segments", type=int, default=8)
    q.add_argument("--window-tau", type=float, default=None)
    add_tau(q)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_spectrum)

    q = sub.add_parser("chsh", help="coincidence counting and CHSH estimate")
    q.add_argument("--tags", required=True)
    q.add_argument("--window", type=float, required=True, help="seconds")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_chsh)

    q = sub.add_parser("feasibility", help="station-separation rate arithmetic")
    q.add_argument("--length-m", type=float, required=True)
    q.add_argument("--pair-rate", type=float, required=True)
    q.add_argument("--required-pairs-per-tau", type=float, default=5.0)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_feasibility)

    q = sub.add_parser("concurrence", help="entanglement of the near-Bell family")
    q.add_argument("--epsilon", type=float, default=None)
    q.add_argument("--rho-d", type=float, default=None)
    q.add_argument("--rho-a", type=float, default=None)
    q.set_defaults(func=cmd_concurrence)

    q = sub.add_parser("verify", help="re-run bundled golden checks")
    q.set_defaults(func=cmd_verify)

    return p


def _merge_config_file(args) -> None:
    if getattr(args, "config", None):
        data = load_run_config(args.config)
        mapping = {
            "gamma": "gamma",
            "tau_seconds": "tau_seconds",
            "mu_per_second": "mu",
            "duration_seconds": "duration",
            "samples_per_tau": "samples_per_tau",
            "seed": "seed",
            "detector_efficiency": "efficiency",
            "beta_policy": "beta_policy",
            "beta_fixed_rad": "beta_fixed",
        }
        for key, attr in mapping.items():
            if key in data and getattr(args, attr, None) in (None, parser_default(attr)):
                setattr(args, attr, data[key])
        if "pair_rate_per_second" in data and args.pair_rate_tau is None:
            tau = data.get("tau_seconds", 1.0)
            args.pair_rate_tau = data["pair_rate_per_second"] * tau
        if "coincidence_window_seconds" in data and args.window_tau is None:
            tau = data.get("tau_seconds", 1.0)
            args.window_tau = data["coincidence_window_seconds"] / tau


_PARSER_DEFAULTS = {
    "efficiency": 1.0,
    "beta_policy": "random_per_pair",
    "beta_fixed": ex.BETA_VALUES[0],
    "samples_per_tau": 100,
    "seed": 0,
}


def parser_default(attr: str):
    return _PARSER_DEFAULTS.get(attr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config_file(args)
        if getattr(args, "gamma", "unused") is None:
            raise ConfigError("gamma required (flag or config file)")
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractViolationError, InsufficientDataError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(err, InsufficientDataError) else EXIT_RUNTIME
    except FileNotFoundError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # noqa: BLE001 -- CLI boundary
        print(f"runtime failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
