"""Command-line experiment runner.

Four subcommands write plain CSV files: `trajectory` (one realization of
each method against the shared-path fine reference), `converge` (strong
RMS errors over a step-size ladder plus the fitted slope), `ergodicity`
(long-chain histogram and Kolmogorov-Smirnov distances) and
`reject-rate` (mean one-step rejection probability per step size plus
its slope).  Named experiments carry the full parameter sets; a
key = value config file and the flags --seed/--realizations/--threads/
--out override them in that order.

Floating-point columns use 17 significant digits.  Each file starts with
one `#` provenance line holding the resolved configuration; everything
below it is byte-stable for a fixed seed, regardless of --threads.

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import numpy as np

from ._kernels import backend_name
from .harness import (ConvergenceStudyConfig, StudyAbort, ergodicity_study,
                      rejection_rate_study, strong_error_study, trajectory_study)
from .models import (InertialModel, ModelError, PhaseState, make_polynomial_model,
                     make_quartic_model, make_zero_model)


class ConfigError(ValueError):
    """Unusable experiment configuration; maps to exit code 2."""


def _float_list(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad number list {raw!r}") from exc
    if not values:
        raise ConfigError("empty number list")
    return values


def _str_list(raw: str) -> tuple[str, ...]:
    values = tuple(part.strip() for part in raw.split(",") if part.strip())
    if not values:
        raise ConfigError("empty name list")
    return values


_COERCERS = {
    "experiment": str,
    "kind": str,
    "method": str,
    "methods": _str_list,
    "coeffs": _float_list,
    "beta": float,
    "gamma": float,
    "mass": float,
    "horizon": float,
    "h": float,
    "h_list": _float_list,
    "h_fine": float,
    "realizations": int,
    "n_steps": int,
    "ratio": int,
    "bins": int,
    "burn_fraction": float,
    "x0": float,
    "q0": float,
    "p0": float,
    "init": str,
    "energy_bound": float,
    "seed": int,
    "threads": int,
    "out": str,
}

_OVERDAMPED_H = tuple(2.0 ** -k for k in range(4, 10))
_INERTIAL_H = tuple(2.0 ** -k for k in range(2, 7))

# Named experiments.  Realization and step counts are desk scale; use
# --realizations (or a config file) to approach publication ensembles.
PRESETS = {
    "fig1": {
        "command": "trajectory", "kind": "quartic", "beta": 1.0,
        "methods": ("ula", "mala"), "h": 0.3125, "x0": 4.0,
        "n_steps": 10_000, "ratio": 64,
    },
    "fig2": {
        "command": "trajectory", "kind": "quartic", "beta": 0.01,
        "methods": ("mala",), "h": 0.3125, "x0": 4.0,
        "n_steps": 100_000, "ratio": 64,
    },
    "zero": {
        "command": "trajectory", "kind": "zero", "beta": 1.0,
        "methods": ("mala",), "h": 0.25, "x0": 0.0,
        "n_steps": 64, "ratio": 64,
    },
    "fig3": {
        "command": "converge", "kind": "quartic", "beta": 1.0,
        "method": "mala", "horizon": 1.0, "h_list": _OVERDAMPED_H,
        "h_fine": 2.0 ** -15, "realizations": 10_000, "init": "equilibrium",
    },
    "fig4": {
        "command": "converge", "kind": "quartic", "beta": 1.0,
        "method": "malta", "horizon": 1.0, "h_list": _OVERDAMPED_H,
        "h_fine": 2.0 ** -15, "realizations": 10_000, "init": "fixed",
        "x0": 0.1,
    },
    "fig5": {
        "command": "converge", "kind": "quartic", "beta": 1.0, "gamma": 1.0,
        "mass": 1.0, "method": "magla", "horizon": 1.0, "h_list": _INERTIAL_H,
        "h_fine": 2.0 ** -12, "realizations": 10_000, "init": "fixed",
        "q0": 0.1, "p0": 0.0,
    },
    "erg-mala": {
        "command": "ergodicity", "kind": "quartic", "beta": 1.0,
        "method": "mala", "h": 0.1, "n_steps": 1_000_000, "x0": 0.0,
        "bins": 256, "burn_fraction": 0.1,
    },
    "erg-magla": {
        "command": "ergodicity", "kind": "quartic", "beta": 1.0, "gamma": 1.0,
        "mass": 1.0, "method": "magla", "h": 0.25, "n_steps": 1_000_000,
        "q0": 0.0, "p0": 0.0, "bins": 256, "burn_fraction": 0.1,
    },
    "erg-ula": {
        "command": "ergodicity", "kind": "quartic", "beta": 1.0,
        "method": "ula", "h": 0.3125, "n_steps": 1_000_000, "x0": 4.0,
        "bins": 256, "burn_fraction": 0.1,
    },
    "rr-mala": {
        "command": "reject-rate", "kind": "quartic", "beta": 1.0,
        "method": "mala", "h_list": tuple(2.0 ** -k for k in range(3, 8)),
        "n_steps": 16_384, "realizations": 64, "init": "equilibrium",
    },
    "rr-magla": {
        "command": "reject-rate", "kind": "quartic", "beta": 1.0, "gamma": 1.0,
        "mass": 1.0, "method": "magla",
        "h_list": tuple(2.0 ** -k for k in range(2, 6)),
        "n_steps": 16_384, "realizations": 64, "init": "equilibrium",
    },
}

_DEFAULT_EXPERIMENT = {
    "trajectory": "fig1",
    "converge": "fig3",
    "ergodicity": "erg-mala",
    "reject-rate": "rr-mala",
}

_INERTIAL_TAGS = ("gla", "magla")


def _coerce(key: str, raw) -> object:
    if key not in _COERCERS:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw
    try:
        return _COERCERS[key](raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def read_config_file(path: str) -> dict:
    """Parse a plain `key = value` file; `#` starts a comment."""
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                body = line.split("#", 1)[0].strip()
                if not body:
                    continue
                if "=" not in body:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, _, raw = body.partition("=")
                entries[key.strip()] = _coerce(key.strip(), raw.strip())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return entries


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge preset, config file and flags (in increasing precedence)."""
    file_entries = read_config_file(args.config) if args.config else {}
    name = args.experiment or file_entries.get("experiment") \
        or _DEFAULT_EXPERIMENT[command]
    if name not in PRESETS:
        raise ConfigError(f"unknown experiment {name!r}; choose from "
                          + ", ".join(sorted(PRESETS)))
    preset = PRESETS[name]
    if preset["command"] != command:
        raise ConfigError(f"experiment {name!r} belongs to the "
                          f"{preset['command']} command")
    config = {k: v for k, v in preset.items() if k != "command"}
    config["experiment"] = name
    config.setdefault("seed", 1)
    config.setdefault("threads", os.cpu_count() or 1)
    config.update((k, v) for k, v in file_entries.items() if k != "experiment")
    for key in ("seed", "realizations", "threads"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            config[key] = value
    config["out"] = args.out or config.get("out") or f"{name}.csv"
    if config.get("threads", 1) < 1:
        raise ConfigError("threads must be >= 1")
    return config


def _require(config: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in config]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")


def build_model(config: dict):
    """Potential (plus inertial wrapper when the method needs momenta)."""
    _require(config, "kind", "beta")
    kind = config["kind"]
    beta = config["beta"]
    if kind == "quartic":
        base = make_quartic_model(beta)
    elif kind == "zero":
        base = make_zero_model(beta)
    elif kind == "polynomial":
        _require(config, "coeffs")
        base = make_polynomial_model(config["coeffs"], beta)
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    method = config.get("method")
    tags = config.get("methods", (method,) if method else ())
    if any(tag in _INERTIAL_TAGS for tag in tags):
        _require(config, "gamma", "mass")
        return InertialModel(base, config["gamma"],
                             np.full(base.dimension, config["mass"]))
    return base


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _provenance(command: str, config: dict) -> str:
    parts = [f"metrolangevin {command}", f"backend={backend_name()}"]
    for key in sorted(config):
        value = config[key]
        if isinstance(value, tuple):
            rendered = ",".join(_fmt(v) if isinstance(v, float) else str(v)
                                for v in value)
        elif isinstance(value, float):
            rendered = _fmt(value)
        else:
            rendered = str(value)
        parts.append(f"{key}={rendered}")
    return "# " + " ".join(parts)


def _write_csv(path: str, header_comment: str, column_names, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_comment + "\n")
        fh.write(",".join(column_names) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _initial_state(config: dict, inertial: bool):
    if inertial:
        _require(config, "q0", "p0")
        return PhaseState(np.array([config["q0"]]), np.array([config["p0"]]))
    _require(config, "x0")
    return np.array([config["x0"]])


def cmd_trajectory(config: dict) -> int:
    _require(config, "methods", "h", "n_steps")
    model = build_model(config)
    table = trajectory_study(model, config["methods"], config["h"],
                             config["n_steps"], _initial_state(config, False),
                             config["seed"], ratio=config.get("ratio", 64))
    names = ["step", "time", "reference"]
    for m, acc in zip(table.methods, table.accepted):
        names.append(m)
        if acc is not None:
            names.append(f"{m}_accepted")

    def rows():
        for k in range(table.times.size):
            row = [str(k), _fmt(table.times[k]), _fmt(table.reference[k])]
            for m, vals, acc, blow in zip(table.methods, table.values,
                                          table.accepted, table.blowup_steps):
                alive = blow is None or k <= blow
                row.append(_fmt(vals[k]) if alive else "blowup")
                if acc is not None:
                    if k == 0:
                        row.append("")
                    elif blow is None or k - 1 < acc.shape[0]:
                        row.append(_fmt(bool(acc[k - 1])))
                    else:
                        row.append("blowup")
            yield row

    _write_csv(config["out"], _provenance("trajectory", config), names, rows())
    blown = [f"{m} blew up at step {b}" for m, b
             in zip(table.methods, table.blowup_steps) if b is not None]
    print(f"wrote {config['out']}" + (f" ({'; '.join(blown)})" if blown else ""))
    return 0


def cmd_converge(config: dict) -> int:
    _require(config, "method", "horizon", "h_list", "realizations", "init")
    model = build_model(config)
    inertial = isinstance(model, InertialModel)
    h_list = config["h_list"]
    x0 = None
    if config["init"] == "fixed":
        x0 = _initial_state(config, inertial)
    study = ConvergenceStudyConfig(
        model=model, method=config["method"], horizon=config["horizon"],
        h_values=h_list, h_fine=config.get("h_fine", min(h_list) / 64.0),
        n_realizations=config["realizations"], init=config["init"], x0=x0,
        initial_energy_bound=config.get("energy_bound"),
        master_seed=config["seed"])
    try:
        report = strong_error_study(study, threads=config["threads"])
    except StudyAbort as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 3
    rows = [[_fmt(h), _fmt(r), _fmt(s)]
            for h, r, s in zip(report.h_values, report.rms, report.stderr)]
    rows.append(["slope", _fmt(report.slope), _fmt(report.half_width)])
    _write_csv(config["out"], _provenance("converge", config),
               ["h", "rms", "stderr"], rows)
    print(f"wrote {config['out']}: slope={report.slope:.4f} "
          f"+- {report.half_width:.4f} over {report.n_realizations} kept "
          f"realizations ({report.discarded} discarded)")
    return 0


def cmd_ergodicity(config: dict) -> int:
    _require(config, "method", "h", "n_steps")
    model = build_model(config)
    inertial = isinstance(model, InertialModel)
    try:
        report = ergodicity_study(model, config["method"], config["h"],
                                  config["n_steps"],
                                  _initial_state(config, inertial),
                                  config["seed"], bins=config.get("bins", 256),
                                  burn_fraction=config.get("burn_fraction", 0.1))
    except StudyAbort as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 3
    n_kept = report.n_steps - report.burn
    rows = [["position", _fmt(lo), _fmt(hi), str(int(c))]
            for lo, hi, c in zip(report.position_edges[:-1],
                                 report.position_edges[1:],
                                 report.position_counts)]
    if report.momentum_counts is not None:
        rows += [["momentum", _fmt(lo), _fmt(hi), str(int(c))]
                 for lo, hi, c in zip(report.momentum_edges[:-1],
                                      report.momentum_edges[1:],
                                      report.momentum_counts)]
    rows.append(["ks", "position", _fmt(report.ks_position), str(n_kept)])
    if report.ks_momentum is not None:
        rows.append(["ks", "momentum", _fmt(report.ks_momentum), str(n_kept)])
    _write_csv(config["out"], _provenance("ergodicity", config),
               ["quantity", "lower", "upper", "count"], rows)
    summary = f"ks_position={report.ks_position:.5f}"
    if report.ks_momentum is not None:
        summary += f" ks_momentum={report.ks_momentum:.5f}"
    print(f"wrote {config['out']}: {summary}")
    return 0


def cmd_reject_rate(config: dict) -> int:
    _require(config, "method", "h_list", "n_steps", "realizations", "init")
    model = build_model(config)
    inertial = isinstance(model, InertialModel)
    x0 = None
    if config["init"] == "fixed":
        x0 = _initial_state(config, inertial)
    try:
        report = rejection_rate_study(
            model, config["method"], config["h_list"], config["n_steps"],
            init=config["init"], x0=x0, n_realizations=config["realizations"],
            master_seed=config["seed"], threads=config["threads"])
    except StudyAbort as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 3
    rows = [[_fmt(h), _fmt(m), _fmt(s)]
            for h, m, s in zip(report.h_values, report.mean_rejection,
                               report.stderr)]
    rows.append(["slope", _fmt(report.slope), _fmt(report.half_width)])
    _write_csv(config["out"], _provenance("reject-rate", config),
               ["h", "rejection", "stderr"], rows)
    print(f"wrote {config['out']}: slope={report.slope:.4f} "
          f"+- {report.half_width:.4f}")
    return 0


COMMANDS = {
    "trajectory": cmd_trajectory,
    "converge": cmd_converge,
    "ergodicity": cmd_ergodicity,
    "reject-rate": cmd_reject_rate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metrolangevin",
        description="Metropolis-adjusted Langevin integrators: experiment runner.")
    sub = parser.add_subparsers(dest="command", required=True)
    help_lines = {
        "trajectory": "single realization of each method vs the fine reference",
        "converge": "strong RMS error over a step-size ladder, with slope",
        "ergodicity": "long-chain histogram and KS distance to the target",
        "reject-rate": "mean rejection probability per step size, with slope",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=help_lines[name])
        p.add_argument("--experiment", help="named experiment preset")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--realizations", type=int, help="ensemble size")
        p.add_argument("--threads", type=int, help="worker thread cap")
        p.add_argument("--out", help="output CSV path")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = resolve_config(args.command, args)
        return COMMANDS[args.command](config)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StudyAbort as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 3


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
