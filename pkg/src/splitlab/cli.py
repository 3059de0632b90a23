"""Command-line front end: config parsing, study execution, CSV output.

Config files are flat ``key = value`` lines; ``#`` starts a comment;
booleans are ``true``/``false``; lists are comma-separated.  Command-line
flags with the same names override file values.  Exit status: 0 success,
1 validation error, 2 solver failure.

CSV conventions: every numeric is written with 17 significant digits
(round-trip exact for doubles); absent bound entries print as ``inf``.
Study files carry the row header
``scheme,dt,err_l2,err_linf,bound_classical,bound_alt15,bound_alt1,bound_effective,status``
followed by fitted-slope rows under the second header
``scheme,slope,window_lo,window_hi``.  For Strang schemes the
bound_classical/bound_alt15 columns carry the Strang classical and
regularized bounds.  Snapshots are two-column ``x,u`` files named
``snap_t<time>.csv`` with the time printed to 6 decimals.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analysis import (BoundSet, ErrorStudyReport, evaluate_bounds,
                       front_location, global_error_study, lie_bracket_field,
                       local_error_study, wave_speed_estimate)
from .flows import ConvergenceError, FlowTolerances, coupled_flow
from .grid import GridField, build_grid
from .kpp import WaveParameters, derivative_sup_norms, kpp_wave_profile, \
    zeldovich_model
from .splitting import SchemeId, _integer_step_count, evolve

__all__ = ["StudyConfig", "ConfigError", "parse_config", "run_cli", "main"]

_MODES = ("local", "global", "simulate", "bounds", "wave-speed", "bracket")


class ConfigError(ValueError):
    """Invalid configuration: unknown key, type mismatch, or constraint."""


@dataclass(frozen=True)
class StudyConfig:
    """Fully validated and resolved study configuration."""

    k: float
    D: float
    x0: float
    x_min: float
    x_max: float
    n_points: int
    schemes: tuple[SchemeId, ...]
    dt_list: tuple[float, ...]
    dt: Optional[float]
    t_final: float
    tol_split: float
    tol_ref: float
    snapshot_every: float
    level: float
    mode: str
    output_path: Optional[str]


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t == "true":
        return True
    if t == "false":
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _parse_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {text!r}")
    return v


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _parse_schemes(text: str) -> tuple[SchemeId, ...]:
    out: list[SchemeId] = []
    for item in str(text).split(","):
        s = SchemeId.parse(item)
        if s not in out:
            out.append(s)
    if not out:
        raise ValueError("scheme list is empty")
    return tuple(out)


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(_parse_float(item) for item in str(text).split(","))


def _parse_mode(text: str) -> str:
    t = text.strip()
    if t not in _MODES:
        raise ValueError(f"expected one of {', '.join(_MODES)}; got {text!r}")
    return t


_KEY_PARSERS = {
    "k": _parse_float,
    "D": _parse_float,
    "kD_unit": _parse_bool,
    "x0": _parse_float,
    "x_min": _parse_float,
    "x_max": _parse_float,
    "n_points": _parse_int,
    "schemes": _parse_schemes,
    "dt_min": _parse_float,
    "dt_max": _parse_float,
    "count": _parse_int,
    "dt_list": _parse_float_list,
    "dt": _parse_float,
    "t_final": _parse_float,
    "tol_split": _parse_float,
    "tol_ref": _parse_float,
    "snapshot_every": _parse_float,
    "level": _parse_float,
    "mode": _parse_mode,
    "output_path": str,
}


def parse_config_text(text: str) -> dict:
    """Raw key/value pairs from config text, typed but unresolved."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEY_PARSERS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        try:
            raw[key] = _KEY_PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: key '{key}': {exc}") from None
    return raw


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"key '{key}': {message}")


def resolve_config(raw: dict) -> StudyConfig:
    """Apply defaults, derive D under kD_unit, and validate constraints."""
    k = float(raw.get("k", 1.0))
    _require(math.isfinite(k) and k > 0, "k", "must be positive")
    kd_unit = bool(raw.get("kD_unit", False))
    if kd_unit:
        _require("D" not in raw, "D", "must not be set together with kD_unit")
        D = 1.0 / k
    else:
        D = float(raw.get("D", 1.0))
    _require(math.isfinite(D) and D > 0, "D", "must be positive")

    x_min = float(raw.get("x_min", -70.0))
    x_max = float(raw.get("x_max", 70.0))
    _require(x_max > x_min, "x_max", "must exceed x_min")
    n_points = int(raw.get("n_points", 5001))
    _require(n_points >= 3, "n_points", "must be at least 3")
    x0 = float(raw.get("x0", 0.0))

    schemes = raw.get("schemes",
                      (SchemeId.L1, SchemeId.L2, SchemeId.S1, SchemeId.S2))

    tol_split = float(raw.get("tol_split", 1e-10))
    tol_ref = float(raw.get("tol_ref", 1e-12))
    for name, value in (("tol_split", tol_split), ("tol_ref", tol_ref)):
        _require(0.0 < value < 1.0, name, "must lie in (0, 1)")

    if "dt_list" in raw:
        for name in ("dt_min", "dt_max", "count"):
            _require(name not in raw, name, "must not be set together with dt_list")
        dt_list = tuple(sorted(float(v) for v in raw["dt_list"]))
    else:
        dt_min = float(raw.get("dt_min", 1e-3 / k))
        dt_max = float(raw.get("dt_max", 10.0 / k))
        count = int(raw.get("count", 13))
        _require(dt_min > 0, "dt_min", "must be positive")
        _require(dt_max > dt_min, "dt_max", "must exceed dt_min")
        _require(count >= 1, "count", "must be positive")
        if count == 1:
            dt_list = (dt_min,)
        else:
            dt_list = tuple(np.exp(np.linspace(math.log(dt_min),
                                               math.log(dt_max), count)))
    _require(all(v > 0 for v in dt_list), "dt_list", "entries must be positive")

    default_t_final = 45.0 if (k == 1.0 and D == 1.0) else 100.0 / k
    t_final = float(raw.get("t_final", default_t_final))
    _require(math.isfinite(t_final) and t_final >= 0, "t_final",
             "must be >= 0")

    dt = raw.get("dt")
    if dt is not None:
        _require(float(dt) > 0, "dt", "must be positive")
        dt = float(dt)

    snapshot_every = float(raw.get("snapshot_every", t_final / 9.0 or 1.0))
    _require(snapshot_every > 0, "snapshot_every", "must be positive")
    level = float(raw.get("level", 0.5))
    _require(math.isfinite(level), "level", "must be finite")

    mode = raw.get("mode", "local")
    output_path = raw.get("output_path")

    return StudyConfig(k=k, D=D, x0=x0, x_min=x_min, x_max=x_max,
                       n_points=n_points, schemes=tuple(schemes),
                       dt_list=dt_list, dt=dt, t_final=t_final,
                       tol_split=tol_split, tol_ref=tol_ref,
                       snapshot_every=snapshot_every, level=level,
                       mode=mode, output_path=output_path)


def parse_config(text: str) -> StudyConfig:
    """Parse and fully validate a config file; empty text gives defaults."""
    return resolve_config(parse_config_text(text))


# --------------------------------------------------------------------------
# CSV helpers
# --------------------------------------------------------------------------

def _num(x: float) -> str:
    return f"{x:.17g}"


def _emit(lines: list[str], output_path: Optional[str]) -> None:
    payload = "\n".join(lines) + "\n"
    if output_path is None or output_path == "-":
        sys.stdout.write(payload)
    else:
        with open(output_path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(payload)


_STUDY_HEADER = ("scheme,dt,err_l2,err_linf,bound_classical,bound_alt15,"
                 "bound_alt1,bound_effective,status")
_SLOPE_HEADER = "scheme,slope,window_lo,window_hi"


def _bound_columns(scheme: SchemeId, bounds: Optional[BoundSet]) -> tuple[float, float, float, float]:
    if bounds is None:
        return math.inf, math.inf, math.inf, math.inf
    if scheme in (SchemeId.S1, SchemeId.S2):
        return (bounds.strang_classical, bounds.strang_alt, math.inf,
                bounds.effective)
    return bounds.classical, bounds.alt_15, bounds.alt_1, bounds.effective


def _study_csv(reports: Sequence[ErrorStudyReport]) -> list[str]:
    lines = [_STUDY_HEADER]
    for report in reports:
        for row in report.rows:
            b_cl, b_15, b_1, b_eff = _bound_columns(report.scheme, row.bounds)
            err_l2 = row.err_l2 if row.valid else math.nan
            err_linf = row.err_linf if row.valid else math.nan
            lines.append(",".join([
                report.scheme.value, _num(row.dt), _num(err_l2), _num(err_linf),
                _num(b_cl), _num(b_15), _num(b_1), _num(b_eff),
                row.status.replace(",", ";"),
            ]))
    lines.append(_SLOPE_HEADER)
    for report in reports:
        for (lo, hi), slope in report.fitted_slopes:
            lines.append(",".join([report.scheme.value, _num(slope),
                                   _num(lo), _num(hi)]))
    return lines


# --------------------------------------------------------------------------
# subcommand runners
# --------------------------------------------------------------------------

def _problem(cfg: StudyConfig):
    grid = build_grid(cfg.x_min, cfg.x_max, cfg.n_points)
    params = WaveParameters(k=cfg.k, D=cfg.D, x0=cfg.x0)
    u0 = kpp_wave_profile(grid, params)
    model = zeldovich_model(cfg.k)
    return u0, model


def _tols(cfg: StudyConfig) -> tuple[FlowTolerances, FlowTolerances]:
    return (FlowTolerances(abs_tol=cfg.tol_split, rel_tol=cfg.tol_split),
            FlowTolerances(abs_tol=cfg.tol_ref, rel_tol=cfg.tol_ref))


def _run_local(cfg: StudyConfig) -> int:
    u0, model = _problem(cfg)
    tol_split, tol_ref = _tols(cfg)
    reports = local_error_study(u0, cfg.dt_list, cfg.schemes, model, cfg.D,
                                tol_split, tol_ref)
    _emit(_study_csv(reports), cfg.output_path)
    return 0


def _run_global(cfg: StudyConfig) -> int:
    u0, model = _problem(cfg)
    tol_split, tol_ref = _tols(cfg)
    reports = [global_error_study(u0, cfg.dt_list, scheme, cfg.t_final,
                                  model, cfg.D, tol_split, tol_ref)
               for scheme in cfg.schemes]
    _emit(_study_csv(reports), cfg.output_path)
    return 0


def _snapshot_lines(u: GridField) -> list[str]:
    x = u.grid.nodes()
    lines = ["x,u"]
    lines.extend(f"{_num(xi)},{_num(ui)}" for xi, ui in zip(x, u.values))
    return lines


def _run_simulate(cfg: StudyConfig) -> int:
    if cfg.dt is None:
        raise ConfigError("key 'dt': required for simulate")
    if len(cfg.schemes) != 1:
        raise ConfigError("key 'schemes': simulate needs exactly one scheme")
    u0, model = _problem(cfg)
    tol_split, _ = _tols(cfg)
    every = _integer_step_count(cfg.snapshot_every, cfg.dt)
    _integer_step_count(cfg.t_final, cfg.snapshot_every)
    snapshots: list[tuple[float, GridField]] = [(0.0, u0)]

    def observer(step: int, t: float, u: GridField) -> None:
        if step % every == 0:
            snapshots.append((t, u))

    evolve(u0, cfg.t_final, cfg.dt, cfg.schemes[0], model, cfg.D,
           tol_split, observer=observer)
    out_dir = cfg.output_path or "."
    os.makedirs(out_dir, exist_ok=True)
    for t, u in snapshots:
        path = os.path.join(out_dir, f"snap_t{t:.6f}.csv")
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(_snapshot_lines(u)) + "\n")
    return 0


def _run_bounds(cfg: StudyConfig) -> int:
    u0, model = _problem(cfg)
    sup = derivative_sup_norms(model, max(float(np.max(np.abs(u0.values))), 1.0))
    lines = ["scheme,dt,classical,alt_15,alt_1,strang_classical,strang_alt,effective"]
    for scheme in cfg.schemes:
        for dt in cfg.dt_list:
            b = evaluate_bounds(scheme, dt, model, cfg.D, u0, sup_norms=sup)
            lines.append(",".join([
                scheme.value, _num(dt), _num(b.classical), _num(b.alt_15),
                _num(b.alt_1), _num(b.strang_classical), _num(b.strang_alt),
                _num(b.effective)]))
    _emit(lines, cfg.output_path)
    return 0


def _run_wave_speed(cfg: StudyConfig) -> int:
    u0, model = _problem(cfg)
    _, tol_ref = _tols(cfg)
    n_snap = _integer_step_count(cfg.t_final, cfg.snapshot_every)
    snapshots = [(0.0, u0)]
    u = u0
    for i in range(1, n_snap + 1):
        u = coupled_flow(u, cfg.snapshot_every, model, cfg.D, tol_ref)
        snapshots.append((i * cfg.snapshot_every, u))
    speed = wave_speed_estimate(snapshots, cfg.level)
    lines = ["t,front_location"]
    for t, snap in snapshots:
        lines.append(f"{_num(t)},{_num(front_location(snap, cfg.level))}")
    lines.append("level,speed")
    lines.append(f"{_num(cfg.level)},{_num(speed)}")
    _emit(lines, cfg.output_path)
    return 0


def _run_bracket(cfg: StudyConfig) -> int:
    u0, model = _problem(cfg)
    bracket = lie_bracket_field(model, u0, cfg.D)
    x = u0.grid.nodes()
    lines = ["x,value"]
    lines.extend(f"{_num(xi)},{_num(vi)}" for xi, vi in zip(x, bracket.values))
    _emit(lines, cfg.output_path)
    return 0


_RUNNERS = {
    "local": _run_local,
    "global": _run_global,
    "simulate": _run_simulate,
    "bounds": _run_bounds,
    "wave-speed": _run_wave_speed,
    "bracket": _run_bracket,
}

_SUBCOMMANDS = {
    "local-error": "local",
    "global-error": "global",
    "simulate": "simulate",
    "bounds": "bounds",
    "wave-speed": "wave-speed",
    "bracket": "bracket",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitlab",
        description="Operator-splitting error laboratory for 1D "
                    "reaction-diffusion problems")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                metavar="{" + ",".join(_SUBCOMMANDS) + "}")
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="config file of key = value lines")
        p.add_argument("--k", type=str, default=None)
        p.add_argument("--diffusion", type=str, default=None,
                       help="diffusion coefficient D")
        p.add_argument("--kd-unit", action="store_const", const="true",
                       default=None, help="derive D as 1/k")
        p.add_argument("--x0", type=str, default=None)
        p.add_argument("--x-min", type=str, default=None)
        p.add_argument("--x-max", type=str, default=None)
        p.add_argument("--n-points", type=str, default=None)
        p.add_argument("--schemes", type=str, default=None)
        p.add_argument("--dt-min", type=str, default=None)
        p.add_argument("--dt-max", type=str, default=None)
        p.add_argument("--count", type=str, default=None)
        p.add_argument("--dt-list", type=str, default=None)
        p.add_argument("--dt", type=str, default=None)
        p.add_argument("--t-final", type=str, default=None)
        p.add_argument("--tol-split", type=str, default=None)
        p.add_argument("--tol-ref", type=str, default=None)
        p.add_argument("--snapshot-every", type=str, default=None)
        p.add_argument("--level", type=str, default=None)
        p.add_argument("--scheme", type=str, default=None,
                       help="alias for --schemes with a single entry")
        p.add_argument("--output", type=str, default=None,
                       help="output path (default: standard output)")
    return parser


_FLAG_TO_KEY = {
    "k": "k", "diffusion": "D", "kd_unit": "kD_unit", "x0": "x0",
    "x_min": "x_min", "x_max": "x_max", "n_points": "n_points",
    "schemes": "schemes", "dt_min": "dt_min", "dt_max": "dt_max",
    "count": "count", "dt_list": "dt_list", "dt": "dt",
    "t_final": "t_final", "tol_split": "tol_split", "tol_ref": "tol_ref",
    "snapshot_every": "snapshot_every", "level": "level",
    "output": "output_path",
}


def run_cli(argv: Sequence[str]) -> int:
    """Execute one subcommand; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1

    try:
        raw: dict = {}
        if args.config is not None:
            try:
                with open(args.config, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from None
            raw = parse_config_text(text)
        for flag, key in _FLAG_TO_KEY.items():
            value = getattr(args, flag, None)
            if value is None:
                continue
            try:
                raw[key] = _KEY_PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"flag --{flag.replace('_', '-')}: {exc}") \
                    from None
        if args.scheme is not None:
            raw["schemes"] = _parse_schemes(args.scheme)
        raw["mode"] = _SUBCOMMANDS[args.subcommand]
        cfg = resolve_config(raw)
    except (ConfigError, ValueError) as exc:
        print(f"splitlab: {exc}", file=sys.stderr)
        return 1

    try:
        return _RUNNERS[cfg.mode](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"splitlab: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"splitlab: solver failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
