"""Command-line front end.

Subcommands::

    equilibrium   symmetric equilibrium of one game instance
    sweep         grid scan over one or two parameters
    simulate      integrate the coupled population/resource dynamics
    limits        large-M limits plus a finite-M table
    verify        run every verification oracle

Exit codes: 0 success, 1 verification failure, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from .dynamics import (
    DEFAULT_GREEDY_POLICY,
    GreedyPopulation,
    RateParams,
    classify_multi,
    integrate,
    multi_population_field,
)
from .equilibrium import GameInstance, equilibrium_table, limits, symmetric_equilibrium
from .exceptions import DimensionMismatchError, DomainError, NonFiniteStateError
from .game import GreedyPolicy, MATRIX_KEYS, POLICY_KEYS, policy_from_config
from .oracles import DEFAULT_SEED, run_all

__all__ = ["main", "build_parser", "parse_axis", "sweep_rows", "format_number", "EXIT_OK",
           "EXIT_VERIFY_FAILED", "EXIT_INVALID", "EXIT_NUMERIC"]

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_NUMERIC = 3

# Defaults for the instance flags: the reference family used throughout the docs.
INSTANCE_DEFAULTS = {
    "M": 1,
    "dSP0": 2.0,
    "dRT0": 0.8,
    "dTR1": 2.1,
    "dPS1": 2.0,
    "alpha": 0.4,
    "theta": 1.0,
}
SIMULATE_DEFAULTS = {"eps": 1.0, "dt": 0.01, "t_end": 2000.0, "record_every": 100, "greedy": "", "x0": ""}
SWEEP_PARAMETERS = ("dSP0", "dRT0", "dTR1", "dPS1", "alpha", "theta", "M")
LIMIT_MS = (1, 2, 5, 10, 100, 1000)
RESULT_COLUMNS = ("regime", "alpha_star", "abar_star", "R_star", "utility_star")


class UsageError(ValueError):
    """Invalid command-line or config input."""


def format_number(value) -> str:
    """CSV cell text: integers verbatim, floats with 9 significant digits, ``None`` empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "{:.9g}".format(float(value))


def _json_value(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# argument handling


def _add_common(parser: argparse.ArgumentParser, top_level: bool) -> None:
    default = (lambda value: value) if top_level else (lambda value: argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=default(DEFAULT_SEED), help="random seed (default 42)")
    parser.add_argument("--out", default=default(None), help="output file (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=default("csv"), help="output format")
    parser.add_argument("--config", default=default(None), help="flat key=value file; flags override it")


def _add_instance(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("game instance")
    group.add_argument("--M", type=int, default=None, help="number of greedy agents (default 1)")
    for key in POLICY_KEYS:
        group.add_argument(f"--{key}", type=float, default=None,
                           help=f"payoff difference (default {INSTANCE_DEFAULTS[key]})")
    group.add_argument("--alpha", type=float, default=None, help="responsible degradation rate (default 0.4)")
    group.add_argument("--theta", type=float, default=None, help="resource restoration rate (default 1.0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedback-commons",
        description="Feedback-evolving commons games: equilibria, sweeps, dynamics and verification.",
    )
    _add_common(parser, top_level=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", help="symmetric equilibrium of one instance")
    _add_common(p, top_level=False)
    _add_instance(p)

    p = sub.add_parser("sweep", help="grid scan over one or two parameters")
    _add_common(p, top_level=False)
    _add_instance(p)
    p.add_argument("--axis1", default=None, help="name:min:max:steps")
    p.add_argument("--axis2", default=None, help="name:min:max:steps (optional)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default 1)")

    p = sub.add_parser("simulate", help="integrate the population/resource dynamics")
    _add_common(p, top_level=False)
    _add_instance(p)
    p.add_argument("--eps", type=float, default=None, help="resource timescale (default 1.0)")
    p.add_argument("--dt", type=float, default=None, help="RK4 step (default 0.01)")
    p.add_argument("--t-end", dest="t_end", type=float, default=None, help="final time (default 2000)")
    p.add_argument("--record-every", dest="record_every", type=int, default=None,
                   help="store every k-th step (default 100)")
    p.add_argument("--steady-tol", dest="steady_tol", type=float, default=None,
                   help="stop once every derivative is below this (default: run to t-end)")
    p.add_argument("--greedy", action="append", default=None,
                   help="greedy population alpha_i,theta_i[,dSP0i,dRT0i,dTR1i,dPS1i]; repeatable")
    p.add_argument("--x0", default=None, help="initial state x,x1..xM,n (default 0.5 everywhere)")

    p = sub.add_parser("limits", help="large-M limits and finite-M table")
    _add_common(p, top_level=False)
    _add_instance(p)

    p = sub.add_parser("verify", help="run every verification oracle")
    _add_common(p, top_level=False)
    p.add_argument("--quick", action="store_true", help="smaller instance counts, same tolerances")
    return parser


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` and ``;`` start comments; dashes in keys become underscores."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[config]\n" + fh.read(), source=path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc
    return {key.replace("-", "_"): value.strip() for key, value in parser["config"].items()}


def _settings(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults, config file and explicit flags (in increasing priority)."""
    config = read_config(args.config) if args.config else {}
    merged = dict(defaults)
    merged.update(config)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    # matrix-entry configs replace the default differences entirely
    if all(key in config for key in MATRIX_KEYS) and not any(
        key in config or getattr(args, key, None) is not None for key in POLICY_KEYS
    ):
        for key in POLICY_KEYS:
            merged.pop(key, None)
        merged.update({key: config[key] for key in MATRIX_KEYS})
    return merged


def _to_float(settings: dict, key: str) -> float:
    try:
        return float(settings[key])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{key} must be a number, got {settings[key]!r}") from exc


def _to_int(settings: dict, key: str) -> int:
    value = settings[key]
    try:
        number = float(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{key} must be an integer, got {value!r}") from exc
    if not number.is_integer():
        raise UsageError(f"{key} must be an integer, got {value!r}")
    return int(number)


def _game_from(settings: dict) -> GameInstance:
    policy = policy_from_config(settings)
    return GameInstance(_to_int(settings, "M"), policy, _to_float(settings, "alpha"), _to_float(settings, "theta"))


# ---------------------------------------------------------------------------
# output


@contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc
    with fh:
        yield fh


def _write_csv(fh, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])


def _write_json(fh, payload) -> None:
    fh.write(json.dumps(payload, indent=2, default=_json_value))
    fh.write("\n")


# ---------------------------------------------------------------------------
# equilibrium


def cmd_equilibrium(args: argparse.Namespace) -> int:
    game = _game_from(_settings(args, INSTANCE_DEFAULTS))
    record = symmetric_equilibrium(game).as_record(game)
    with _output(args.out) as fh:
        if args.format == "json":
            _write_json(fh, record)
        else:
            _write_csv(fh, list(record), [list(record.values())])
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def parse_axis(text: str) -> tuple[str, np.ndarray]:
    """Parse ``name:min:max:steps`` into the parameter name and its grid values."""
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError(f"axis must be name:min:max:steps, got {text!r}")
    name, lo, hi, steps = parts
    if name not in SWEEP_PARAMETERS:
        raise UsageError(f"axis parameter must be one of {', '.join(SWEEP_PARAMETERS)}, got {name!r}")
    try:
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise UsageError(f"bad axis bounds in {text!r}") from exc
    if steps < 2:
        raise UsageError(f"axis needs at least 2 steps, got {steps}")
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise UsageError(f"axis bounds must be finite, got {text!r}")
    values = np.linspace(lo, hi, steps)
    if name == "M":
        values = np.round(values)
        if lo < 1 or not (float(lo).is_integer() and float(hi).is_integer()):
            raise UsageError(f"M axis needs positive integer bounds, got {text!r}")
        values = np.unique(values.astype(int))
    return name, values


def _evaluate_cell(cell: tuple[dict, tuple]) -> list:
    settings, axis_values = cell
    try:
        game = _game_from(settings)
    except (DomainError, UsageError, ValueError):
        return [*axis_values, "invalid", None, None, None, None]
    eq = symmetric_equilibrium(game)
    return [*axis_values, eq.regime.value, eq.alpha_star, eq.abar_star, eq.R_star, eq.utility_star]


def sweep_rows(base: dict, axes: Sequence[tuple[str, np.ndarray]], jobs: int = 1) -> list[list]:
    """One row per grid cell, axis1-major, with the equilibrium columns appended.

    Cells whose instance is invalid get ``regime="invalid"`` and empty numerics.
    Rows come back in grid order whatever the completion order of workers.
    """
    names = [name for name, _ in axes]
    grids = np.meshgrid(*[values for _, values in axes], indexing="ij")
    cells = []
    for idx in np.ndindex(grids[0].shape):
        point = tuple(_json_value(grid[idx]) for grid in grids)
        settings = dict(base)
        settings.update(zip(names, point))
        cells.append((settings, point))
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    return [_evaluate_cell(cell) for cell in cells]


def cmd_sweep(args: argparse.Namespace) -> int:
    settings = _settings(args, {**INSTANCE_DEFAULTS, "axis1": None, "axis2": None, "jobs": 1})
    if not settings["axis1"]:
        raise UsageError("sweep needs --axis1 name:min:max:steps")
    axes = [parse_axis(settings["axis1"])]
    if settings["axis2"]:
        axes.append(parse_axis(settings["axis2"]))
        if axes[0][0] == axes[1][0]:
            raise UsageError(f"axes must name distinct parameters, both are {axes[0][0]!r}")
    jobs = _to_int(settings, "jobs")
    if jobs < 1:
        raise UsageError(f"jobs must be at least 1, got {jobs}")
    base = {key: settings[key] for key in settings if key not in ("axis1", "axis2", "jobs")}
    rows = sweep_rows(base, axes, jobs)
    header = [name for name, _ in axes] + list(RESULT_COLUMNS)
    with _output(args.out) as fh:
        if args.format == "json":
            _write_json(fh, [dict(zip(header, row)) for row in rows])
        else:
            _write_csv(fh, header, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from exc


def parse_greedy(entries: Sequence[str]) -> tuple[GreedyPopulation, ...]:
    """Greedy entries ``alpha_i,theta_i[,dSP0i,dRT0i,dTR1i,dPS1i]``."""
    populations = []
    for entry in entries:
        values = _parse_floats(entry, "greedy entry")
        if len(values) == 2:
            policy = DEFAULT_GREEDY_POLICY
        elif len(values) == 6:
            policy = GreedyPolicy(*values[2:])
        else:
            raise UsageError(f"greedy entry needs 2 or 6 numbers, got {entry!r}")
        populations.append(GreedyPopulation(values[0], values[1], policy))
    return tuple(populations)


def _greedy_entries(value) -> list[str]:
    if isinstance(value, list):
        return value
    return [part for part in str(value).split(";") if part.strip()]


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = _settings(args, {**INSTANCE_DEFAULTS, **SIMULATE_DEFAULTS, "steady_tol": None})
    policy = policy_from_config(settings)
    greedy = parse_greedy(_greedy_entries(settings["greedy"]))
    rates = RateParams(_to_float(settings, "alpha"), _to_float(settings, "theta"), _to_float(settings, "eps"), greedy)
    dim = rates.M + 2
    if settings["x0"]:
        y0 = np.array(_parse_floats(str(settings["x0"]), "x0"))
        if y0.size != dim:
            raise DimensionMismatchError(f"x0 needs {dim} values (x, x1..x{rates.M}, n), got {y0.size}")
    else:
        y0 = np.full(dim, 0.5)
    record_every = _to_int(settings, "record_every")
    steady_tol = None if settings["steady_tol"] in (None, "") else _to_float(settings, "steady_tol")
    traj = integrate(
        multi_population_field(rates, policy), y0, _to_float(settings, "t_end"), _to_float(settings, "dt"),
        steady_tol=steady_tol, record_every=record_every,
    )
    outcome = classify_multi(rates, policy)
    header = ["t", "x", *[f"x{i + 1}" for i in range(rates.M)], "n"]
    prediction = {"outcome": outcome.label, **{k: v for k, v in vars(outcome).items()}}
    final = {"t": float(traj.times[-1]), **dict(zip(header[1:], map(float, traj.final)))}
    with _output(args.out) as fh:
        if args.format == "json":
            _write_json(fh, {
                "columns": header,
                "rows": [[float(t), *map(float, s)] for t, s in zip(traj.times, traj.states)],
                "final": final,
                "stop_reason": traj.stop_reason,
                "prediction": prediction,
            })
        else:
            _write_csv(fh, header, ([t, *s] for t, s in zip(traj.times, traj.states)))
            fh.write("# final " + " ".join(f"{k}={format_number(v)}" for k, v in final.items())
                     + f" stop={traj.stop_reason}\n")
            fh.write("# prediction " + " ".join(f"{k}={format_number(v)}" for k, v in prediction.items()) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# limits and verify


def cmd_limits(args: argparse.Namespace) -> int:
    game = _game_from(_settings(args, INSTANCE_DEFAULTS))
    abar_inf, R_inf = limits(game)
    table = [
        [M, eq.alpha_star, eq.regime.value, eq.abar_star, eq.R_star, eq.utility_star]
        for M, eq in equilibrium_table(game, LIMIT_MS)
    ]
    header = ["M", "alpha_star", "regime", "abar_star", "R_star", "utility_star"]
    with _output(args.out) as fh:
        if args.format == "json":
            _write_json(fh, {
                "abar_inf": abar_inf,
                "R_inf": R_inf,
                "table": [dict(zip(header, row)) for row in table],
            })
        else:
            fh.write(f"# abar_inf={format_number(abar_inf)} R_inf={format_number(R_inf)}\n")
            _write_csv(fh, header, table + [["inf", None, None, abar_inf, R_inf, None]])
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    reports = run_all(seed=args.seed, quick=args.quick)
    with _output(args.out) as fh:
        for report in reports:
            fh.write(report.to_json() + "\n")
    return EXIT_OK if all(report.passed for report in reports) else EXIT_VERIFY_FAILED


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "limits": cmd_limits,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (NonFiniteStateError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
