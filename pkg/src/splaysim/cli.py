"""Command-line front end.

Exit codes: 0 success, 1 failed assertion or runtime diagnostic (Zeno
guard, reset leaving the box, failed validation), 2 usage or
configuration error.  Numbers are printed with 12 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, experiments
from .model import InvalidPhaseResponseError, validate_prc
from .prc import prc_from_spec
from .sim import (
    Perturbation,
    SimConfig,
    ZenoViolationError,
    read_trajectory_csv,
    run,
    write_events_csv,
    write_trajectory_csv,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

CONFIG_SCHEMA = "simconfig/1"
OUT_ENV = "SPLAYSIM_OUT"
DEFAULT_OUT = "splaysim_out"

_CONFIG_KEYS = {
    "schema", "n", "omega", "prc", "x0", "horizon", "max_jumps", "firing_tol",
    "min_dwell", "stop_v_threshold", "stop_splay_tol", "policy", "seed",
    "sample_dt", "perturbation",
}
_PERTURBATION_KEYS = {"kind", "amplitude", "frequency", "offsets"}


class ConfigError(ValueError):
    pass


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _load_config(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    tag = data.get("schema")
    if tag != CONFIG_SCHEMA:
        raise ConfigError(f"{path}: schema must be {CONFIG_SCHEMA!r}, got {tag!r}")
    for key in data:
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
    pert = data.get("perturbation")
    if pert is not None:
        if not isinstance(pert, dict):
            raise ConfigError(f"{path}: perturbation must be an object")
        for key in pert:
            if key not in _PERTURBATION_KEYS:
                raise ConfigError(f"{path}: unknown perturbation key {key!r}")
    return data


def _parse_x0(text: str) -> np.ndarray:
    try:
        return np.asarray([float(p) for p in text.split(",")])
    except ValueError:
        raise ConfigError(f"could not parse phase vector {text!r}") from None


def _build_perturbation(data: dict | None, args, n: int) -> Perturbation:
    kind = None
    amplitude = frequency = None
    offsets = None
    if data:
        kind = data.get("kind")
        amplitude = data.get("amplitude")
        frequency = data.get("frequency")
        offsets = data.get("offsets")
    if args.perturb_amplitude is not None:
        amplitude = args.perturb_amplitude
        kind = kind or "sinusoidal"
    if args.perturb_frequency is not None:
        frequency = args.perturb_frequency
    if args.perturb_offsets is not None:
        offsets = [float(p) for p in args.perturb_offsets.split(",")]
    if kind in (None, "none"):
        return Perturbation.none()
    if kind != "sinusoidal":
        raise ConfigError(f"unknown perturbation kind {kind!r}")
    if amplitude is None:
        raise ConfigError("sinusoidal perturbation needs an amplitude")
    if frequency is None:
        frequency = 0.5
    if offsets is None:
        offsets = [2.0 * np.pi * k / n for k in range(n)]
    if len(offsets) != n:
        raise ConfigError(f"perturbation has {len(offsets)} offsets for n={n}")
    return Perturbation.sinusoidal(float(amplitude), float(frequency), offsets)


def _build_sim_config(args) -> SimConfig:
    data = _load_config(args.config) if args.config else {}
    config_dir = Path(args.config).parent if args.config else Path.cwd()

    x0 = args.x0 if args.x0 is not None else data.get("x0")
    if x0 is None:
        raise ConfigError("a start state is required (config key 'x0' or flag --x0)")
    x0 = _parse_x0(x0) if isinstance(x0, str) else np.asarray(x0, dtype=float)

    n = args.n if args.n is not None else data.get("n")
    n = int(n) if n is not None else x0.size

    prc_spec = args.prc if args.prc is not None else data.get("prc")
    if prc_spec is None:
        raise ConfigError("a response function is required (config key 'prc' or flag --prc)")
    if prc_spec.startswith("table:"):
        rel = prc_spec[len("table:"):]
        prc_spec = f"table:{(config_dir / rel)}" if not Path(rel).is_absolute() else prc_spec
    try:
        prc = prc_from_spec(prc_spec, n)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from None

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return data.get(key, default)

    pert = _build_perturbation(data.get("perturbation"), args, n)
    try:
        return SimConfig(
            prc=prc,
            x0=x0,
            n=n,
            omega=float(pick(args.omega, "omega", 1.0)),
            perturbation=pert,
            horizon=float(pick(args.horizon, "horizon", 80.0)),
            max_jumps=int(pick(args.max_jumps, "max_jumps", 100_000)),
            firing_tol=float(pick(args.firing_tol, "firing_tol", 1e-9)),
            min_dwell=float(pick(args.min_dwell, "min_dwell", 1e-9)),
            stop_v_threshold=pick(args.stop_v, "stop_v_threshold", 1e-6),
            stop_splay_tol=pick(None, "stop_splay_tol", None),
            policy=pick(args.policy, "policy", "all-zero"),
            seed=pick(args.seed, "seed", 0),
            sample_dt=float(pick(args.sample_dt, "sample_dt", 0.01)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


def cmd_simulate(args) -> int:
    try:
        config = _build_sim_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    try:
        arc = run(config)
    except ZenoViolationError as exc:
        print(f"zeno violation: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except InvalidPhaseResponseError as exc:
        print(f"invalid response function: {exc}", file=sys.stderr)
        return EXIT_FAIL
    traj = out / "trajectory.csv"
    events = out / "events.csv"
    write_trajectory_csv(arc, traj)
    write_events_csv(arc, events)
    final_t, final_j = arc.final_time
    print(f"stop reason: {arc.stop_reason}")
    print(f"final hybrid time: t={_fmt(final_t)} j={final_j}")
    print(f"jumps: {arc.jumps}")
    print(f"terminal V: {_fmt(analysis.lyapunov(arc.final_state))}")
    dwell = arc.min_dwell_after_first()
    if not np.isnan(dwell):
        print(f"min dwell after first jump: {_fmt(dwell)}")
    print(f"trajectory: {traj}")
    print(f"events: {events}")
    return EXIT_OK


def cmd_validate_prc(args) -> int:
    try:
        prc = prc_from_spec(args.prc, args.n)
        report = validate_prc(prc.func, args.n, grid=args.grid,
                              lipschitz=args.lipschitz)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_experiment(args) -> int:
    runner = experiments.EXPERIMENTS.get(args.name)
    if runner is None:
        print(f"config error: unknown experiment {args.name!r}; "
              f"choose from {', '.join(sorted(experiments.EXPERIMENTS))}",
              file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args) / args.name
    kwargs = {}
    if args.name == "corpus":
        if args.samples is not None:
            kwargs["geometry_samples"] = args.samples
            kwargs["oracle_samples"] = min(args.samples, 10_000)
        if args.runs is not None:
            kwargs["runs"] = args.runs
        if args.seed is not None:
            kwargs["seed"] = args.seed
    report = runner(out, **kwargs)
    for line in report.lines():
        print(line)
    print(f"summary: {out / 'summary.json'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_closeness(args) -> int:
    try:
        arc1 = read_trajectory_csv(args.first)
        arc2 = read_trajectory_csv(args.second)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = analysis.closeness(arc1, arc2, args.tau)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"tau: {_fmt(report.tau)}")
    print(f"eps_star: {_fmt(report.eps_star)}")
    print(f"witness: t={_fmt(report.witness_t)} j={report.witness_j} "
          f"({report.witness_direction})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splaysim",
        description="Simulate and analyse pulse-coupled oscillator networks "
                    "that desynchronise into the splay state.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one network and write CSVs")
    sim.add_argument("config", nargs="?", help=f"JSON config ({CONFIG_SCHEMA}); "
                     "inline flags override its values")
    sim.add_argument("--n", type=int, help="network size (default: length of x0)")
    sim.add_argument("--omega", type=float, help="nominal rate (default 1.0)")
    sim.add_argument("--prc", help="response selector: paper | linear:<c> | "
                     "table:<path> | broken:<name>")
    sim.add_argument("--x0", help="comma-separated start phases in [0, 2*pi]")
    sim.add_argument("--horizon", type=float, help="flow-time horizon (default 80)")
    sim.add_argument("--max-jumps", type=int, dest="max_jumps")
    sim.add_argument("--firing-tol", type=float, dest="firing_tol")
    sim.add_argument("--min-dwell", type=float, dest="min_dwell")
    sim.add_argument("--stop-v", type=float, dest="stop_v",
                     help="stop once V stays below this for a full revolution")
    sim.add_argument("--policy", choices=("all-zero", "enumerate"),
                     help="resolution of simultaneous firings")
    sim.add_argument("--seed", type=int, help="seed for set-valued jump choices")
    sim.add_argument("--sample-dt", type=float, dest="sample_dt")
    sim.add_argument("--perturb-amplitude", type=float, dest="perturb_amplitude")
    sim.add_argument("--perturb-frequency", type=float, dest="perturb_frequency")
    sim.add_argument("--perturb-offsets", dest="perturb_offsets",
                     help="comma-separated phase offsets, one per oscillator")
    sim.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    sim.set_defaults(func=cmd_simulate)

    val = sub.add_parser("validate-prc", help="check a response function")
    val.add_argument("--prc", required=True)
    val.add_argument("--n", type=int, required=True)
    val.add_argument("--grid", type=int, default=100_000)
    val.add_argument("--lipschitz", type=float, default=10.0)
    val.set_defaults(func=cmd_validate_prc)

    exp = sub.add_parser("experiment", help="run a shipped study")
    exp.add_argument("name", help=", ".join(sorted(experiments.EXPERIMENTS)))
    exp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    exp.add_argument("--samples", type=int, help="corpus only: geometry sample count")
    exp.add_argument("--runs", type=int, help="corpus only: convergence run count")
    exp.add_argument("--seed", type=int, help="corpus only: master seed")
    exp.set_defaults(func=cmd_experiment)

    clo = sub.add_parser("closeness", help="compare two trajectory CSVs")
    clo.add_argument("first")
    clo.add_argument("second")
    clo.add_argument("--tau", type=float, required=True,
                     help="hybrid time bound t + j <= tau")
    clo.set_defaults(func=cmd_closeness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
