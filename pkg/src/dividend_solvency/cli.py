"""Command-line front end.

Subcommands ``policy``, ``value``, ``ruin``, ``bstar`` and ``capital`` share
one set of model flags.  Tables go out as CSV with ``#`` metadata lines first;
``policy`` prints a readable report unless ``--format csv`` is given.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 unattainable
constraint.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .errors import (
    ConfigError, DividendSolverError, DomainError, GridError, NoBracket, NoConvergence, Unattainable, ValidationError,
)
from .hjb import solve_hjb
from .model import ModelParams, validate
from .ruin import DEFAULT_NY, solve_survival_pde
from .simulate import SimConfig, default_dt, estimate_ruin_prob, estimate_value, value_horizon
from .solvency import capital_curve, decide_policy, epsilon_of_b

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_UNATTAINABLE = 0, 2, 3, 4

DEFAULTS = dict(mu=2.0, lam=6.0, sigma2=50.0, c=0.05, T=50.0, epsilon=0.1)
DEFAULT_PATHS = 10_000
DEFAULT_SEED = 12345

_SUBSTITUTION = "caption lambda=0.4 violates lambda > mu; using lambda=2.4 (transaction cost 0.4)"

PRESETS = {
    "fig1": dict(command="value", mu=2.0, lam=6.0, c=0.05, b=100.0, sweep="sigma2=50,100", x_grid="0:100:2"),
    "fig2": dict(command="value", sigma2=50.0, lam=6.0, c=0.05, b=100.0, sweep="mu=1,2", x_grid="0:100:2"),
    "fig3": dict(command="ruin", sigma2=50.0, mu=2.0, lam=2.4, c=0.05, b=100.0, T=500.0, x_grid="0:100:5",
                 note=_SUBSTITUTION),
    "fig4": dict(command="capital", sigma2=50.0, mu=2.0, lam=2.4, c=0.05, b=100.0, T=500.0,
                 eps_grid="0.05:0.95:0.05", note=_SUBSTITUTION),
    "fig5": dict(command="bstar", sigma2=50.0, mu=2.0, lam=2.4, c=0.05, T=500.0, eps_grid="0.05:0.95:0.05",
                 note=_SUBSTITUTION),
    "fig6": dict(command="bstar", sigma2=50.0, mu=2.0, lam=2.4, c=0.05, T=500.0, b_grid="30:150:10",
                 note=_SUBSTITUTION),
}

SWEEPABLE = {"mu": "mu", "lambda": "lam", "sigma2": "sigma2", "sigma": "sigma", "c": "c"}


def fmt(x) -> str:
    return format(float(x), ".17g")


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop included when hit) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if not (step > 0 and stop >= start):
                raise ConfigError(f"grid {text!r} needs step > 0 and stop >= start")
            n = math.floor((stop - start) / step * (1 + 1e-12) + 1e-9)
            return start + step * np.arange(n + 1)
        values = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc
    if not values.size or not np.all(np.isfinite(values)):
        raise ConfigError(f"grid {text!r} is empty or not finite")
    return values


def parse_sweep(text: str):
    name, _, values = text.partition("=")
    name = name.strip()
    if name not in SWEEPABLE or not values:
        raise ConfigError(f"sweep must look like NAME=v1,v2 with NAME in {sorted(SWEEPABLE)}, got {text!r}")
    return name, parse_grid(values)


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    b: float | None
    x_grid: np.ndarray | None
    eps_grid: np.ndarray | None
    b_grid: np.ndarray | None
    sweep: tuple | None
    method: str
    dt: float | None
    paths: int
    seed: int
    workers: int
    ny: int
    nt: int | None
    out: str | None
    fmt: str
    preset: str | None
    notes: list = field(default_factory=list)

    def sim_config(self, params, horizon):
        dt = self.dt if self.dt is not None else min(default_dt(params), horizon)
        return SimConfig(dt=dt, n_paths=self.paths, seed=self.seed, horizon=horizon, workers=self.workers)


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--mu", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    vol = g.add_mutually_exclusive_group()
    vol.add_argument("--sigma2", type=float)
    vol.add_argument("--sigma", type=float)
    g.add_argument("--c", type=float)
    g.add_argument("--T", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--b", type=float, help="dividend barrier (default: b0)")
    r = p.add_argument_group("run")
    r.add_argument("--x-grid", dest="x_grid", help="start:stop:step or v1,v2,...")
    r.add_argument("--eps-grid", dest="eps_grid")
    r.add_argument("--b-grid", dest="b_grid")
    r.add_argument("--sweep", help="NAME=v1,v2 for the value table (NAME: mu, lambda, sigma2, sigma, c)")
    r.add_argument("--method", choices=("pde", "mc", "both"), default="pde")
    r.add_argument("--dt", type=float)
    r.add_argument("--paths", type=int, default=DEFAULT_PATHS)
    r.add_argument("--seed", type=int, default=DEFAULT_SEED)
    r.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo (output does not depend on it)")
    r.add_argument("--ny", type=int, default=DEFAULT_NY)
    r.add_argument("--nt", type=int)
    r.add_argument("--out", help="output file (default: stdout)")
    r.add_argument("--format", dest="fmt", choices=("csv", "human"))
    r.add_argument("--preset", choices=sorted(PRESETS))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dividend-solvency",
        description="Optimal dividends with proportional reinsurance under a solvency constraint.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "policy": "decide the barrier and report the value function",
        "value": "value function g(x) on an x-grid, optionally swept over one parameter",
        "ruin": "ruin probability psi(T, x) on an x-grid",
        "bstar": "barrier b(epsilon) and risk level epsilon(b)",
        "capital": "risk-based capital x(epsilon) at a barrier",
    }
    for name, text in helps.items():
        _model_flags(sub.add_parser(name, help=text, description=text))
    return parser


def resolve(ns) -> RunConfig:
    merged = dict(DEFAULTS)
    notes = []
    extra = {}
    if ns.preset:
        preset = dict(PRESETS[ns.preset])
        if preset.pop("command") != ns.command:
            raise ConfigError(f"preset {ns.preset} belongs to the {PRESETS[ns.preset]['command']!r} command")
        if "note" in preset:
            notes.append(preset.pop("note"))
        for key in ("mu", "lam", "sigma2", "c", "T", "epsilon"):
            if key in preset:
                merged[key] = preset.pop(key)
        extra = preset
    for key in ("mu", "lam", "c", "T", "epsilon"):
        if getattr(ns, key) is not None:
            merged[key] = getattr(ns, key)
    if ns.sigma is not None:
        sigma = ns.sigma
    else:
        s2 = ns.sigma2 if ns.sigma2 is not None else merged["sigma2"]
        if not s2 > 0:
            raise ValidationError(f"sigma2 must be > 0, got {s2!r}")
        sigma = math.sqrt(s2)
    params = validate(ModelParams(merged["mu"], merged["lam"], sigma, merged["c"], merged["T"], merged["epsilon"]))

    def pick(name):
        value = getattr(ns, name)
        return value if value is not None else extra.get(name)

    x_grid, eps_grid, b_grid, sweep = pick("x_grid"), pick("eps_grid"), pick("b_grid"), pick("sweep")
    b = ns.b if ns.b is not None else extra.get("b")
    if b is not None and not (b > 0 and math.isfinite(b)):
        raise ValidationError(f"barrier must be positive, got {b!r}")
    if ns.paths < 1 or ns.workers < 1:
        raise ConfigError("--paths and --workers must be >= 1")
    if ns.ny < 3 or (ns.nt is not None and ns.nt < 3):
        raise GridError("--ny and --nt must be >= 3")
    if ns.dt is not None and not ns.dt > 0:
        raise ConfigError("--dt must be > 0")
    if ns.method != "pde" and ns.command in ("policy", "bstar", "capital"):
        raise ConfigError(f"{ns.command} only supports --method pde")
    if sweep is not None and ns.command != "value":
        raise ConfigError("--sweep is only available for the value command")
    fmt_ = ns.fmt or ("human" if ns.command == "policy" else "csv")
    if fmt_ == "human" and ns.command != "policy":
        raise ConfigError("--format human is only available for the policy command")
    return RunConfig(
        command=ns.command, params=params, b=b,
        x_grid=parse_grid(x_grid) if x_grid else None,
        eps_grid=parse_grid(eps_grid) if eps_grid else None,
        b_grid=parse_grid(b_grid) if b_grid else None,
        sweep=parse_sweep(sweep) if sweep else None,
        method=ns.method, dt=ns.dt, paths=ns.paths, seed=ns.seed, workers=ns.workers,
        ny=ns.ny, nt=ns.nt, out=ns.out, fmt=fmt_, preset=ns.preset, notes=notes,
    )


def _metadata(cfg: RunConfig, extra=()):
    p = cfg.params
    lines = [
        f"# dividend-solvency {__version__} command={cfg.command}",
        f"# mu={fmt(p.mu)} lambda={fmt(p.lam)} sigma={fmt(p.sigma)} c={fmt(p.c)} T={fmt(p.T)} "
        f"epsilon={fmt(p.epsilon)}",
        f"# method={cfg.method} seed={cfg.seed} paths={cfg.paths} "
        f"dt={'auto' if cfg.dt is None else fmt(cfg.dt)} ny={cfg.ny} nt={'auto' if cfg.nt is None else cfg.nt}",
    ]
    if cfg.preset:
        lines.append(f"# preset={cfg.preset}")
    lines += [f"# note: {n}" for n in cfg.notes]
    lines += [f"# {e}" for e in extra]
    return lines


def _table(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return lines


def _barrier(params, b):
    sol = solve_hjb(params, b)
    return sol, sol.b


def cmd_policy(cfg: RunConfig):
    d = decide_policy(cfg.params, ny=cfg.ny, nt=cfg.nt)
    xs = cfg.x_grid if cfg.x_grid is not None else np.linspace(0.0, d.chosen_barrier, 11)
    if np.any(xs < 0):
        raise DomainError("x-grid must be nonnegative")
    values, controls = np.atleast_1d(d.value_at(xs)), np.atleast_1d(d.control_at(xs))
    facts = [
        ("regime", str(d.regime)),
        ("b0", fmt(d.b0)),
        ("chosen_barrier", fmt(d.chosen_barrier)),
        ("constrained", "yes" if d.constrained else "no"),
        ("attained_ruin_prob", fmt(d.attained_ruin_prob)),
        ("epsilon", fmt(cfg.params.epsilon)),
    ]
    if cfg.fmt == "csv":
        return _metadata(cfg, [f"{k}={v}" for k, v in facts]) + _table(
            ["x", "value", "retention"], zip(xs, values, controls))
    width = max(len(k) for k, _ in facts)
    lines = [f"{k.replace('_', ' '):<{width}}  {v}" for k, v in facts]
    lines.append("")
    lines.append(f"{'x':>24}  {'V(x)':>24}  {'A*(x)':>24}")
    lines += [f"{fmt(x):>24}  {fmt(v):>24}  {fmt(a):>24}" for x, v, a in zip(xs, values, controls)]
    return lines


def _sweep_sets(cfg):
    if cfg.sweep is None:
        return [("g", cfg.params)]
    name, values = cfg.sweep
    out = []
    for v in values:
        if name == "sigma2":
            if not v > 0:
                raise ValidationError(f"sigma2 must be > 0, got {v!r}")
            p = replace(cfg.params, sigma=math.sqrt(v))
        else:
            p = replace(cfg.params, **{SWEEPABLE[name]: float(v)})
        out.append((f"g_{name}={fmt(v)}", validate(p)))
    return out


def cmd_value(cfg: RunConfig):
    rows_cols, header, extra = [], [], []
    xs = cfg.x_grid
    for label, params in _sweep_sets(cfg):
        sol, b = _barrier(params, cfg.b)
        if xs is None:
            xs = np.linspace(0.0, b, 21)
        if np.any(xs < 0):
            raise DomainError("x-grid must be nonnegative")
        extra.append(f"{label}: b={fmt(b)} b0={fmt(sol.b0)} regime={sol.regime}")
        exact = np.atleast_1d(sol.value(xs))
        if cfg.method in ("pde", "both"):
            header.append(label)
            rows_cols.append(exact)
        if cfg.method in ("mc", "both"):
            sim = cfg.sim_config(params, value_horizon(params, b))
            est = np.array([estimate_value(params, sol.control_function(), b, float(x), sim) for x in xs])
            header += [f"{label}_mc", f"{label}_mc_se"]
            rows_cols += [est[:, 0], est[:, 1]]
            if cfg.method == "both":
                header.append(f"{label}_diff")
                rows_cols.append(est[:, 0] - exact)
    rows = zip(xs, *rows_cols)
    return _metadata(cfg, extra) + _table(["x"] + header, rows)


def cmd_ruin(cfg: RunConfig):
    params = cfg.params
    sol, b = _barrier(params, cfg.b)
    xs = cfg.x_grid if cfg.x_grid is not None else np.linspace(0.0, b, 21)
    if np.any(xs < 0) or np.any(xs > b * (1 + 1e-12)):
        raise DomainError(f"x-grid must lie in [0, b] = [0, {fmt(b)}]")
    header, cols = [], []
    if cfg.method in ("pde", "both"):
        field_ = solve_survival_pde(params, sol.control_function(), b, params.T, cfg.ny, cfg.nt)
        psi = np.atleast_1d(field_.ruin(xs))
        header.append("psi_pde")
        cols.append(psi)
    if cfg.method in ("mc", "both"):
        sim = cfg.sim_config(params, params.T)
        est = np.array([estimate_ruin_prob(params, sol.control_function(), b, float(x), sim) for x in xs])
        header += ["psi_mc", "psi_mc_se"]
        cols += [est[:, 0], est[:, 1]]
        if cfg.method == "both":
            header.append("diff")
            cols.append(est[:, 0] - psi)
    extra = [f"b={fmt(b)} b0={fmt(sol.b0)} regime={sol.regime}"]
    return _metadata(cfg, extra) + _table(["x"] + header, zip(xs, *cols))


def cmd_bstar(cfg: RunConfig):
    params = cfg.params
    if cfg.eps_grid is None and cfg.b_grid is None:
        raise ConfigError("bstar needs --eps-grid and/or --b-grid")
    b0 = solve_hjb(params).b0
    lines = _metadata(cfg, [f"b0={fmt(b0)}"])
    if cfg.eps_grid is not None:
        rows = []
        for eps in cfg.eps_grid:
            d = decide_policy(replace(params, epsilon=float(eps)), ny=cfg.ny, nt=cfg.nt)
            rows.append((eps, d.chosen_barrier, "1" if d.constrained else "0", d.attained_ruin_prob))
        lines += ["# table=b_of_epsilon"] + _table(["epsilon", "b_star", "constrained", "ruin_prob"], rows)
    if cfg.b_grid is not None:
        if np.any(cfg.b_grid < b0 * (1 - 1e-12)):
            raise DomainError(f"b-grid must lie at or above b0 = {fmt(b0)}")
        rows = [(b, epsilon_of_b(params, float(b), cfg.ny, cfg.nt)) for b in cfg.b_grid]
        lines += ["# table=epsilon_of_b"] + _table(["b", "epsilon"], rows)
    return lines


def cmd_capital(cfg: RunConfig):
    params = cfg.params
    if cfg.eps_grid is None:
        raise ConfigError("capital needs --eps-grid")
    sol, b = _barrier(params, cfg.b)
    xs = capital_curve(params, b, cfg.eps_grid, cfg.ny, cfg.nt)
    extra = [f"b={fmt(b)} b0={fmt(sol.b0)} regime={sol.regime}"]
    return _metadata(cfg, extra) + _table(["epsilon", "x"], zip(cfg.eps_grid, xs))


COMMANDS = {"policy": cmd_policy, "value": cmd_value, "ruin": cmd_ruin, "bstar": cmd_bstar, "capital": cmd_capital}


def _exit_code(exc):
    if isinstance(exc, (NoBracket, Unattainable)):
        return EXIT_UNATTAINABLE
    if isinstance(exc, NoConvergence):
        return EXIT_SOLVER
    if isinstance(exc, (ValidationError, DomainError, ConfigError, GridError)):
        return EXIT_INVALID
    return EXIT_SOLVER


def main(argv=None):
    ns = build_parser().parse_args(argv)
    try:
        cfg = resolve(ns)
        lines = COMMANDS[cfg.command](cfg)
    except DividendSolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    text = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out = sys.stdout
        if isinstance(out, io.TextIOWrapper):
            out.reconfigure(newline="\n")
        out.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
