"""Batch command-line front end.

Parses a flat key=value config (plus command-line overrides), dispatches one
of the solve/limits/evaluate/sweep commands, and writes machine-readable
CSV or JSON tables.  Exit codes: 0 on success, 1 on configuration problems
(bad flags, unknown density specs, malformed tables), 2 when the requested
uncertainty radii are infeasible, 3 when the solver fails to converge.

Density spec grammar (for the nominal0/nominal1 config keys):

    gaussian(mu,sigma)
    mixture(w1*gaussian(mu1,s1)+w2*gaussian(mu2,s2)+...)
    shift(<spec>,A)
    table(path.csv)      # CSV with header "y,value", strictly increasing y
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys

import numpy as np

from . import density, evaluation, limits
from .density import QuadratureGrid
from .divergence import DivergenceSpec
from .lfd_solver import (
    InfeasibleEpsError,
    NonConvergenceError,
    RobustSolution,
    solve_symmetric,
    solve_thresholds,
)

__all__ = ["ConfigError", "parse_density", "load_config", "run", "main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_NONCONVERGENCE = 3

COMMANDS = ("solve", "solve-symmetric", "limits", "surface", "evaluate",
            "sweep-alpha", "sweep-snr")

_KNOWN_KEYS = {
    "command", "nominal0", "nominal1", "alpha", "rho", "eps0", "eps1", "eps",
    "grid", "mc", "out", "format", "n", "alphas", "amplitudes", "snr_db", "a",
}


class ConfigError(ValueError):
    """Configuration problem: unknown key, bad value, unparseable spec."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; 2 is reserved for
    # infeasible radii, so configuration problems exit 1 instead
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# density spec grammar


def _split_top(s: str, sep: str) -> list[str]:
    """Split on sep at parenthesis depth zero."""
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ConfigError(f"unbalanced parentheses in density spec: {s!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ConfigError(f"unbalanced parentheses in density spec: {s!r}")
    parts.append("".join(cur))
    return parts


def _number(tok: str, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"expected a number for {what}, got {tok!r}") from None


def parse_density(spec: str) -> density.DensityModel:
    """Parse one density spec string (grammar in the module docstring)."""
    s = spec.strip()
    if not (s.endswith(")") and "(" in s):
        raise ConfigError(f"unknown density spec: {spec!r}")
    head, body = s.split("(", 1)
    head, body = head.strip(), body[:-1]
    if head == "gaussian":
        args = _split_top(body, ",")
        if len(args) != 2:
            raise ConfigError(f"gaussian takes (mu, sigma), got {spec!r}")
        mu, sigma = (_number(a, "gaussian parameter") for a in args)
        if sigma <= 0.0:
            raise ConfigError(f"gaussian needs sigma > 0, got {sigma}")
        return density.gaussian(mu, sigma)
    if head == "mixture":
        comps = []
        for term in _split_top(body, "+"):
            term = term.strip()
            if "*" not in term:
                raise ConfigError(f"mixture term must look like w*gaussian(mu,s): {term!r}")
            w_tok, g_tok = term.split("*", 1)
            w = _number(w_tok.strip(), "mixture weight")
            comp = parse_density(g_tok)
            if not isinstance(comp, density.Gaussian):
                raise ConfigError(f"mixture components must be gaussians: {term!r}")
            comps.append((w, comp.mean, comp.stddev))
        return density.gaussian_mixture(comps)
    if head == "shift":
        args = _split_top(body, ",")
        if len(args) < 2:
            raise ConfigError(f"shift takes (<spec>, A), got {spec!r}")
        shift_amount = _number(args[-1], "shift amount")
        return density.shifted(parse_density(",".join(args[:-1])), shift_amount)
    if head == "table":
        path = body.strip()
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None or [h.strip() for h in header] != ["y", "value"]:
                    raise ConfigError(f"table {path!r} must have header 'y,value'")
                rows = [(float(r[0]), float(r[1])) for r in reader if r]
        except OSError as exc:
            raise ConfigError(f"cannot read table {path!r}: {exc}") from None
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"malformed table {path!r}: {exc}") from None
        if len(rows) < 3:
            raise ConfigError(f"table {path!r} needs at least 3 rows")
        ys = np.array([r[0] for r in rows])
        vs = np.array([r[1] for r in rows])
        if not np.all(np.diff(ys) > 0.0):
            raise ConfigError(f"table {path!r} must have strictly increasing y")
        return density.tabulated(ys, vs)
    raise ConfigError(f"unknown density spec: {spec!r}")


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str) -> dict[str, str]:
    """Read a flat key=value config file; '#' starts a comment."""
    out: dict[str, str] = {}
    try:
        with open(path) as fh:
            for ln, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    return out


def _check_keys(cfg: dict[str, str]) -> None:
    unknown = sorted(set(cfg) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _need(cfg: dict[str, str], key: str) -> str:
    if key not in cfg:
        raise ConfigError(f"missing required config key {key!r}")
    return cfg[key]


def _get_float(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    return _number(cfg[key], key)


def _parse_grid(text: str) -> QuadratureGrid:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be min:max:n, got {text!r}")
    lo, hi = _number(parts[0], "grid min"), _number(parts[1], "grid max")
    try:
        n = int(parts[2])
    except ValueError:
        raise ConfigError(f"grid point count must be an integer, got {parts[2]!r}") from None
    if n < 3:
        raise ConfigError(f"grid needs at least 3 points, got {n}")
    if not hi > lo:
        raise ConfigError(f"empty grid range [{lo}, {hi}]")
    return density.make_grid(lo, hi, n)


def _parse_mc(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"mc must be n:seed, got {text!r}")
    try:
        n, seed = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"mc must be two integers n:seed, got {text!r}") from None
    if n < 1000:
        raise ConfigError(f"mc sample count must be at least 1000, got {n}")
    return n, seed


def _parse_list(text: str, what: str) -> list[float]:
    vals = [t for t in (p.strip() for p in text.split(",")) if t]
    if not vals:
        raise ConfigError(f"{what} list is empty")
    return [_number(v, what) for v in vals]


def _nominals(cfg):
    return parse_density(_need(cfg, "nominal0")), parse_density(_need(cfg, "nominal1"))


def _grid_or_default(cfg, models) -> QuadratureGrid:
    if "grid" in cfg:
        return _parse_grid(cfg["grid"])
    return density.grid_for(*models, n=4001)


# ---------------------------------------------------------------------------
# output writers


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _json_cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return None if math.isnan(v) else v


def _write_table(cfg, meta: dict, names: list[str], rows: list[tuple]) -> None:
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    out = cfg.get("out", "-")
    if fmt == "csv":
        lines = [f"# {k}={_fmt(v)}" for k, v in meta.items()]
        lines.append(",".join(names))
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "meta": {k: _json_cell(v) for k, v in meta.items()},
            "columns": {name: [_json_cell(v) for v in col]
                        for name, col in zip(names, zip(*rows) if rows else [[] for _ in names])},
        }
        text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _solution_table(cfg, spec: DivergenceSpec, sol: RobustSolution) -> None:
    pts = sol.grid.points
    l = density.ratio_values(sol.f0_values, sol.f1_values)
    from .lfd_solver import partition

    region = partition(l, spec.rho, sol.thresholds)
    meta = {
        "alpha": spec.alpha, "rho": spec.rho, "eps0": spec.eps0, "eps1": spec.eps1,
        "l_l": sol.thresholds.l_l, "l_u": sol.thresholds.l_u, "k": sol.k, "z": sol.z,
        "residual_norm": sol.residual_norm,
        "achieved_eps0": sol.achieved_eps0, "achieved_eps1": sol.achieved_eps1,
    }
    names = ["y", "f0", "f1", "l", "g0_hat", "g1_hat", "delta_hat", "l_hat", "region"]
    cols = [pts, sol.f0_values, sol.f1_values, l, sol.g0_hat.values,
            sol.g1_hat.values, sol.delta_hat.values, sol.l_hat.values, region]
    rows = list(zip(*cols))
    _write_table(cfg, meta, names, rows)


# ---------------------------------------------------------------------------
# command handlers


def _cmd_solve(cfg) -> int:
    nominals = _nominals(cfg)
    spec = DivergenceSpec(alpha=_get_float(cfg, "alpha"), rho=_get_float(cfg, "rho", 1.0),
                          eps0=_get_float(cfg, "eps0"), eps1=_get_float(cfg, "eps1"))
    grid = _grid_or_default(cfg, nominals)
    sol = solve_thresholds(spec, nominals, grid)
    _solution_table(cfg, spec, sol)
    return EXIT_OK


def _cmd_solve_symmetric(cfg) -> int:
    nominals = _nominals(cfg)
    eps = _get_float(cfg, "eps")
    alpha = _get_float(cfg, "alpha")
    rho = _get_float(cfg, "rho", 1.0)
    grid = _grid_or_default(cfg, nominals)
    sol = solve_symmetric(eps, alpha, rho, nominals, grid)
    spec = DivergenceSpec(alpha=alpha, rho=rho, eps0=eps, eps1=eps)
    _solution_table(cfg, spec, sol)
    return EXIT_OK


def _cmd_limits(cfg) -> int:
    alpha = _get_float(cfg, "alpha")
    rho = _get_float(cfg, "rho", 1.0)
    has0, has1 = "eps0" in cfg, "eps1" in cfg
    if has0 == has1:
        raise ConfigError("limits needs exactly one of eps0/eps1 (the fixed radius)")
    idx = 0 if has0 else 1
    val = _get_float(cfg, "eps0" if has0 else "eps1")
    hell = abs(alpha - 0.5) < 1e-12 and abs(rho - 1.0) < 1e-12
    if "nominal0" in cfg or "nominal1" in cfg:
        nominals = _nominals(cfg)
        grid = _grid_or_default(cfg, nominals)
        other, lam0, lam1 = limits.max_eps_general(nominals, alpha, rho, grid, (idx, val))
        mode = "general"
    elif hell:
        a = _get_float(cfg, "a", 0.0)
        other = limits._hellinger_other(a, val)
        lam0 = lam1 = math.nan
        mode = "closed-form"
    else:
        raise ConfigError("limits needs nominal0/nominal1 unless alpha=0.5 and rho=1")
    e0, e1 = (val, other) if idx == 0 else (other, val)
    meta = {"alpha": alpha, "rho": rho, "mode": mode}
    _write_table(cfg, meta, ["eps0", "eps1", "lambda0", "lambda1"],
                 [(e0, e1, lam0, lam1)])
    return EXIT_OK


def _cmd_surface(cfg) -> int:
    alpha = _get_float(cfg, "alpha")
    rho = _get_float(cfg, "rho", 1.0)
    n = int(_get_float(cfg, "n", 33))
    nominals = None
    grid = None
    if "nominal0" in cfg or "nominal1" in cfg:
        nominals = _nominals(cfg)
        grid = _grid_or_default(cfg, nominals)
    a = _get_float(cfg, "a", math.nan)
    report = limits.eps_surface(alpha, n, nominals=nominals, rho=rho, grid=grid,
                                a=None if math.isnan(a) else a)
    meta = {"alpha": report.alpha, "rho": report.rho, "mode": report.mode,
            "lambda0": report.lambda0, "lambda1": report.lambda1}
    rows = [(e0, e1, report.a_value, True) for (e0, e1) in report.pairs]
    _write_table(cfg, meta, ["eps0", "eps1", "a", "feasible"], rows)
    return EXIT_OK


def _cmd_evaluate(cfg) -> int:
    nominals = _nominals(cfg)
    spec = DivergenceSpec(alpha=_get_float(cfg, "alpha"), rho=_get_float(cfg, "rho", 1.0),
                          eps0=_get_float(cfg, "eps0"), eps1=_get_float(cfg, "eps1"))
    grid = _grid_or_default(cfg, nominals)
    sol = solve_thresholds(spec, nominals, grid)
    lrt = evaluation.lrt_rule(nominals, spec.rho)
    rows = []

    def add(rule_name, dens_name, rep):
        rows.append((rule_name, dens_name, rep.method, rep.p_false_alarm,
                     rep.p_miss, rep.p_error,
                     math.nan if rep.hw_false_alarm is None else rep.hw_false_alarm,
                     math.nan if rep.hw_miss is None else rep.hw_miss))

    add("robust", "lfd", evaluation.error_probs(
        sol.delta_hat, sol.g0_hat, sol.g1_hat, spec.rho, sol.grid))
    add("robust", "nominal", evaluation.error_probs(
        sol.delta_hat, nominals[0], nominals[1], spec.rho, sol.grid))
    add("lrt", "nominal", evaluation.lrt_errors(nominals, spec.rho, sol.grid))
    if "mc" in cfg:
        n, seed = _parse_mc(cfg["mc"])
        add("robust", "lfd", evaluation.monte_carlo_errors(
            sol.delta_hat, sol.g0_hat, sol.g1_hat, spec.rho, n, seed))
        add("robust", "nominal", evaluation.monte_carlo_errors(
            sol.delta_hat, nominals[0], nominals[1], spec.rho, n, seed + 1))
        add("lrt", "nominal", evaluation.monte_carlo_errors(
            lrt, nominals[0], nominals[1], spec.rho, n, seed + 2))
    meta = {"alpha": spec.alpha, "rho": spec.rho, "eps0": spec.eps0, "eps1": spec.eps1,
            "l_l": sol.thresholds.l_l, "l_u": sol.thresholds.l_u}
    _write_table(cfg, meta, ["rule", "densities", "method", "p_fa", "p_miss",
                             "p_error", "hw_fa", "hw_miss"], rows)
    return EXIT_OK


def _cmd_sweep_alpha(cfg) -> int:
    nominals = _nominals(cfg)
    alphas = _parse_list(_need(cfg, "alphas"), "alphas")
    spec = DivergenceSpec(alpha=alphas[0], rho=_get_float(cfg, "rho", 1.0),
                          eps0=_get_float(cfg, "eps0"), eps1=_get_float(cfg, "eps1"))
    grid = _grid_or_default(cfg, nominals)
    rows = evaluation.alpha_sweep(spec, alphas, nominals, grid)
    meta = {"rho": spec.rho, "eps0": spec.eps0, "eps1": spec.eps1}
    _write_table(cfg, meta, ["alpha", "l_l", "l_u", "residual"],
                 [(r.alpha, r.l_l, r.l_u, r.residual_norm) for r in rows])
    return EXIT_OK


def _cmd_sweep_snr(cfg) -> int:
    noise = parse_density(_need(cfg, "nominal0"))
    if "amplitudes" in cfg:
        amps = _parse_list(cfg["amplitudes"], "amplitudes")
    elif "snr_db" in cfg:
        amps = evaluation.amplitudes_from_snr(
            _parse_list(cfg["snr_db"], "snr_db"), noise)
    else:
        raise ConfigError("sweep-snr needs amplitudes or snr_db")
    spec = DivergenceSpec(alpha=_get_float(cfg, "alpha", 0.5),
                          rho=_get_float(cfg, "rho", 1.0),
                          eps0=_get_float(cfg, "eps0", 0.0),
                          eps1=_get_float(cfg, "eps1", 0.0))
    grid = _parse_grid(cfg["grid"]) if "grid" in cfg else None
    n, seed = (0, 0)
    if "mc" in cfg:
        n, seed = _parse_mc(cfg["mc"])
    rows = evaluation.snr_sweep(noise, amps, spec, grid, n,
                                **({"seed": seed} if n else {}))
    meta = {"alpha": spec.alpha, "rho": spec.rho}
    _write_table(cfg, meta, ["snr_db", "test", "eps0", "eps1", "p_fa", "p_miss"],
                 [(r.snr_db, r.test, r.eps0, r.eps1, r.p_false_alarm, r.p_miss)
                  for r in rows])
    return EXIT_OK


_HANDLERS = {
    "solve": _cmd_solve,
    "solve-symmetric": _cmd_solve_symmetric,
    "limits": _cmd_limits,
    "surface": _cmd_surface,
    "evaluate": _cmd_evaluate,
    "sweep-alpha": _cmd_sweep_alpha,
    "sweep-snr": _cmd_sweep_snr,
}


def run(cfg: dict[str, str]) -> int:
    """Dispatch one parsed configuration; returns the process exit code."""
    try:
        _check_keys(cfg)
        command = _need(cfg, "command")
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
        return _HANDLERS[command](cfg)
    except InfeasibleEpsError as exc:
        print(f"infeasible radii: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except limits.NoBoundaryPointError as exc:
        print(f"infeasible radii: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NonConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    """Entry point: merge --config file with command-line overrides."""
    p = _Parser(prog="robustlrt", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--alpha")
    p.add_argument("--rho")
    p.add_argument("--eps0")
    p.add_argument("--eps1")
    p.add_argument("--grid", help="min:max:n")
    p.add_argument("--mc", help="n:seed")
    p.add_argument("--out", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"))
    args = p.parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config else {}
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for key in ("command", "alpha", "rho", "eps0", "eps1", "grid", "mc",
                "out", "format"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
