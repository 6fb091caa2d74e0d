"""``weakmeas`` command-line interface.

Every subcommand writes its data files plus ``provenance.json`` into the
``--out`` directory. Warnings go to stderr, a one-line summary to stdout.

Exit codes: 0 success, 1 validation error, 2 failed check, 3 resource refusal.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, io
from ._backend import get_backend
from .ak_simulator import (
    DEFAULT_MEMORY_BUDGET,
    AKConfig,
    MemoryBudgetError,
    collapsed_state,
    default_tri_grids,
    evolve_shift,
    initial_tri_state,
    lambda_from_widths,
    post_state_closed_form,
    post_state_strong_closed_form,
    readout,
    readout_distribution,
    short_time_state,
    short_time_tri_state,
    to_detector_momentum,
    tri_state_distance,
    tri_state_fidelity,
    trotter_oracle,
)
from .gabor_space import PhaseGrid, gabor_forward, gabor_inverse, gabor_norm, project_G
from .kraus_measure import (
    JointDistribution,
    Strong,
    Weak,
    distribution_moments,
    joint_distribution,
    outcome_grid,
    predicted_moments,
    sample_outcomes,
    strong_kraus_apply,
    weak_kraus_apply,
)
from .phase_grid import (
    DIMENSIONLESS,
    UnitSystem,
    WaveFunction,
    convert_units,
    make_grid,
    moment,
    resample,
    variance,
)
from .quantum_state import PhasePoint, coherent_state, fidelity, make_test_state
from .verify import SUITES, apply_overrides, run_suite

EXIT_OK, EXIT_INVALID, EXIT_CHECK_FAILED, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    """Bad command line or config file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--grid-min", type=float, default=None, help="position grid lower end")
    g.add_argument("--grid-max", type=float, default=None, help="position grid upper end")
    g.add_argument("--grid-n", type=int, default=None, help="position grid size (minimum per axis for ak)")
    g.add_argument("--b", type=float, default=None, help="squeezing parameter b")
    g.add_argument("--lambda", dest="lam", type=float, default=None, help="weakness lambda")
    g.add_argument("--tau", type=float, default=None, help="dimensionless coupling time K t")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".", help="output directory (created if missing)")
    g.add_argument("--config", default=None, help="JSON file with the same keys as the flags")


def _phase_grid_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("phase grid")
    g.add_argument("--xm-min", "--a1-min", dest="a1_min", type=float, default=None)
    g.add_argument("--xm-max", "--a1-max", dest="a1_max", type=float, default=None)
    g.add_argument("--pm-min", "--a2-min", dest="a2_min", type=float, default=None)
    g.add_argument("--pm-max", "--a2-max", dest="a2_max", type=float, default=None)
    g.add_argument("--pgrid-n", type=int, default=96, help="phase-grid nodes per axis")


def _state_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state", required=True, help="state CSV written by 'weakmeas state'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weakmeas", description="Simultaneous weak measurement of position and momentum.")
    parser.add_argument("--version", action="version", version=f"weakmeas {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("state", help="build a test state")
    _common(p)
    p.add_argument("--kind", choices=("coherent", "gaussian", "two_peak", "hermite1"), default="gaussian")
    p.add_argument("--units", choices=("dimensionless", "dimensioned"), default="dimensionless")
    p.add_argument("--a1", type=float, default=0.0, help="coherent-state position label")
    p.add_argument("--a2", type=float, default=0.0, help="coherent-state momentum label")
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--sep", type=float, default=4.0)

    p = sub.add_parser("measure", help="apply one strong or weak Kraus operator")
    _common(p)
    _state_input(p)
    p.add_argument("--mode", choices=("strong", "weak"), default="weak")
    p.add_argument("--xm", type=float, required=True)
    p.add_argument("--pm", type=float, required=True)

    for name, text in (("dist", "outcome density on a phase grid"), ("sample", "draw outcomes")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _state_input(p)
        _phase_grid_flags(p)
        p.add_argument("--mode", choices=("strong", "weak"), default="weak")
        if name == "sample":
            p.add_argument("--count", type=int, default=1000)

    p = sub.add_parser("ak", help="run the two-detector protocol")
    _common(p)
    _state_input(p)
    p.add_argument("--b1", type=float, default=None, help="detector-1 width")
    p.add_argument("--b2", type=float, default=None, help="detector-2 width")
    p.add_argument("--K", dest="K", type=float, default=1.0, help="coupling constant")
    p.add_argument("--oracle", "--steps", dest="steps", type=int, default=None, help="split-step oracle steps")
    p.add_argument("--short-time", action="store_true", help="compare with the short-time formula")
    p.add_argument("--n-sigma", type=float, default=8.0, help="box half-width in standard deviations")
    p.add_argument("--memory-budget", type=float, default=DEFAULT_MEMORY_BUDGET / 2**20, help="MiB")
    p.add_argument("--xm", type=float, default=None, help="readout point (defaults to the mean)")
    p.add_argument("--pm", type=float, default=None)

    p = sub.add_parser("gabor", help="Gabor transform export")
    _common(p)
    _state_input(p)
    _phase_grid_flags(p)
    p.add_argument("--action", choices=("forward", "inverse", "project"), default="forward")
    p.add_argument("--husimi", action="store_true", help="write |F|^2 instead of re, im")

    p = sub.add_parser("verify", help="run the verification battery")
    _common(p)
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--tol", action="append", default=[], metavar="CHECK=VALUE", help="override a tolerance")
    return parser


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _subparser(parser: argparse.ArgumentParser, command: str | None):
    """The subparser for ``command``, or the name-to-subparser map when ``command`` is None."""
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices if command is None else action.choices[command]
    raise UsageError(f"unknown command {command!r}")


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # first pass only locates the command and the config file
    required = []
    for sub in _subparser(parser, None).values():
        for action in sub._actions:
            if action.required:
                required.append(action)
                action.required = False
    args = parser.parse_args(argv)
    for action in required:
        action.required = True
    if not args.config:
        return parser.parse_args(argv)
    path = Path(args.config)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    sub = _subparser(parser, args.command)
    by_key = {}
    for action in sub._actions:
        for opt in action.option_strings:
            by_key[opt.lstrip("-")] = action
            by_key[opt.lstrip("-").replace("-", "_")] = action
        by_key.setdefault(action.dest, action)
    defaults: dict[str, Any] = {}
    for key, value in cfg.items():
        action = by_key.get(key)
        if action is None or action.dest in ("help", "config"):
            raise UsageError(f"config key {key!r} is not an option of '{args.command}'")
        if value is not None and action.type is not None and not isinstance(value, list):
            try:
                value = action.type(value)
            except (TypeError, ValueError):
                raise UsageError(f"config key {key!r}: cannot convert {value!r}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
        defaults[action.dest] = value
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def _positive(name: str, value) -> None:
    if value is not None:
        _require(math.isfinite(value) and value > 0, f"--{name} must be positive, got {value}")


def validate(args: argparse.Namespace) -> None:
    """Module preconditions checked before any computation."""
    for name in ("b", "lam", "tau"):
        _positive({"lam": "lambda"}.get(name, name), getattr(args, name, None))
    if args.grid_n is not None:
        _require(args.grid_n >= 16, f"--grid-n must be at least 16, got {args.grid_n}")
    if args.grid_min is not None and args.grid_max is not None:
        _require(args.grid_max > args.grid_min, "--grid-max must exceed --grid-min")
    cmd = args.command
    if cmd == "state":
        _positive("width", args.width)
        _require(args.kind != "coherent" or args.units == "dimensionless", "coherent states are dimensionless")
    if cmd in ("dist", "sample", "gabor"):
        _require(args.pgrid_n >= 16, f"--pgrid-n must be at least 16, got {args.pgrid_n}")
        for lo, hi in (("a1_min", "a1_max"), ("a2_min", "a2_max")):
            a, b = getattr(args, lo), getattr(args, hi)
            _require((a is None) == (b is None), f"give both --{lo.replace('_', '-')} and --{hi.replace('_', '-')}")
            _require(a is None or b > a, f"--{hi.replace('_', '-')} must exceed --{lo.replace('_', '-')}")
    if cmd in ("measure", "dist", "sample"):
        _require(args.mode != "weak" or args.lam is not None, "weak mode needs --lambda")
    if cmd == "sample":
        _require(args.count > 0, f"--count must be positive, got {args.count}")
    if cmd == "ak":
        for name in ("b1", "b2", "K", "n_sigma", "memory_budget"):
            _positive(name.replace("_", "-"), getattr(args, name))
        _require(args.steps is None or args.steps > 0, "--oracle must be positive")
        _require((args.xm is None) == (args.pm is None), "give both --xm and --pm")
        _require(args.lam is None or (args.b1 is None and args.b2 is None), "give --lambda or --b1/--b2, not both")
    if cmd == "verify":
        parse_tolerances(args.tol)


def parse_tolerances(items) -> dict[str, float]:
    if isinstance(items, dict):
        return {str(k): float(v) for k, v in items.items()}
    out = {}
    for item in items:
        name, sep, value = str(item).rpartition("=")
        if not sep or not name:
            raise ValueError(f"--tol expects CHECK=VALUE, got {item!r}")
        out[name] = float(value)
    return out


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


class Run:
    """Output directory, collected warnings and the provenance record of one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.caught: list[warnings.WarningMessage] = []

    @property
    def warnings(self) -> list[str]:
        return [f"{w.category.__name__}: {w.message}" for w in self.caught]

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(str(p))
        return p

    def provenance(self, extra: dict | None = None) -> None:
        config = {k: v for k, v in vars(self.args).items() if k != "config"}
        record = {
            "tool": "weakmeas",
            "version": __version__,
            "command": self.args.command,
            "config": config,
            "config_file": self.args.config,
            "backend": get_backend(),
            "numpy": np.__version__,
            "python": platform.python_version(),
            "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "outputs": self.files,
            "warnings": self.warnings,
        }
        if extra:
            record.update(extra)
        io.write_json(record, self.out / "provenance.json")


def _load_state(args) -> WaveFunction:
    psi = io.read_wavefunction(args.state)
    norm = psi.norm
    _require(norm > 0, f"{args.state}: state has zero norm")
    return psi.normalized()


def _state_b(psi: WaveFunction, args) -> float:
    """``b`` of a dimensioned state, cross-checked against ``--b``."""
    if psi.units.is_dimensionless:
        return 1.0 if args.b is None else args.b
    if args.b is not None and not math.isclose(args.b, psi.units.b, rel_tol=1e-12):
        raise ValueError(f"--b {args.b} differs from the state's b = {psi.units.b}")
    return psi.units.b


def _mode(args, b: float):
    return Strong(b) if args.mode == "strong" else Weak(b, args.lam)


def _moments_dict(m) -> dict:
    return {"mean_x": m.mean_x, "mean_p": m.mean_p, "var_x": m.var_x, "var_p": m.var_p}


def _phase_grid(args, fallback: Callable[[], PhaseGrid]) -> PhaseGrid:
    if args.a1_min is None and args.a2_min is None:
        return fallback()
    auto = fallback()
    a1 = (args.a1_min, args.a1_max) if args.a1_min is not None else (auto.a1_min, auto.a1_max)
    a2 = (args.a2_min, args.a2_max) if args.a2_min is not None else (auto.a2_min, auto.a2_max)
    return PhaseGrid(a1[0], a1[1], args.pgrid_n, a2[0], a2[1], args.pgrid_n)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_state(args, run: Run) -> int:
    units = DIMENSIONLESS if args.units == "dimensionless" else UnitSystem.dimensioned(args.b or 1.0)
    grid = make_grid(
        -8.0 if args.grid_min is None else args.grid_min,
        8.0 if args.grid_max is None else args.grid_max,
        512 if args.grid_n is None else args.grid_n,
    )
    if args.kind == "coherent":
        psi = coherent_state(PhasePoint(args.a1, args.a2), grid)
    else:
        psi = make_test_state(
            args.kind, grid, units, center=args.center, width=args.width, momentum=args.momentum, sep=args.sep
        )
    path = run.path("state.csv")
    io.write_wavefunction(psi, path)
    run.files.append(str(io.sidecar_path(path)))
    print(f"state {args.kind}: n={grid.n} norm={psi.norm:.12f} -> {path}")
    return EXIT_OK


def cmd_measure(args, run: Run) -> int:
    psi = _load_state(args)
    b = _state_b(psi, args)
    dimensioned = not psi.units.is_dimensionless
    work = convert_units(psi, DIMENSIONLESS) if dimensioned else psi
    alpha = PhasePoint(args.xm / math.sqrt(2 * b), args.pm * math.sqrt(b / 2)) if dimensioned else PhasePoint(
        args.xm, args.pm
    )
    record: dict[str, Any] = {"mode": args.mode, "xm": args.xm, "pm": args.pm, "lambda": args.lam}
    if args.mode == "strong":
        outcome = strong_kraus_apply(work, alpha)
    else:
        outcome = weak_kraus_apply(work, alpha, args.lam)
        strong = strong_kraus_apply(work, alpha)
        record["fidelity_to_strong"] = fidelity(outcome.post_state, strong.post_state)
    record["fidelity_to_input"] = fidelity(outcome.post_state, work)
    # density per d alpha1 d alpha2, or per dxbar dpbar (= 2 d alpha1 d alpha2)
    record["prob_density"] = outcome.density / 2.0 if dimensioned else outcome.density
    record["units"] = psi.units.kind
    post = convert_units(outcome.post_state, psi.units) if dimensioned else outcome.post_state
    path = run.path("post_state.csv")
    io.write_wavefunction(post, path)
    run.files.append(str(io.sidecar_path(path)))
    io.write_json(record, run.path("measurement.json"))
    print(f"measure {args.mode}: prob_density={record['prob_density']:.6g} -> {path}")
    return EXIT_OK


def _distribution(args, run: Run) -> tuple[JointDistribution, dict]:
    psi = _load_state(args)
    b = _state_b(psi, args)
    mode = _mode(args, b)
    pgrid = _phase_grid(args, lambda: outcome_grid(psi, mode, n=args.pgrid_n))
    dist = joint_distribution(psi, mode, pgrid)
    report = {
        "mode": args.mode,
        "units": psi.units.kind,
        "b": b,
        "lambda": args.lam,
        "mass": dist.mass,
        "measured": _moments_dict(distribution_moments(dist)),
        "predicted": _moments_dict(predicted_moments(psi, mode)),
        "state_var_x": variance(psi, "X"),
        "state_var_p": variance(psi, "P"),
    }
    report["excess_var_x"] = report["measured"]["var_x"] - report["state_var_x"]
    report["excess_var_p"] = report["measured"]["var_p"] - report["state_var_p"]
    return dist, report


def cmd_dist(args, run: Run) -> int:
    dist, report = _distribution(args, run)
    path = io.write_distribution(dist, run.path("distribution.csv"))
    report["warnings"] = run.warnings
    io.write_json(report, run.path("distribution_report.json"))
    m = report["measured"]
    print(f"dist {args.mode}: mass={dist.mass:.6f} var_x={m['var_x']:.6g} var_p={m['var_p']:.6g} -> {path}")
    return EXIT_OK


def cmd_sample(args, run: Run) -> int:
    dist, report = _distribution(args, run)
    samples = sample_outcomes(dist, args.count, args.seed)
    path = io.write_samples(samples, run.path("samples.csv"))
    report.update(
        count=args.count,
        seed=args.seed,
        sample_mean=samples.mean(axis=0).tolist(),
        sample_var=samples.var(axis=0, ddof=1).tolist() if args.count > 1 else None,
        warnings=run.warnings,
    )
    io.write_json(report, run.path("sample_report.json"))
    print(f"sample {args.mode}: {args.count} outcomes, mass={dist.mass:.6f} -> {path}")
    return EXIT_OK


def _ak_config(args, b: float) -> AKConfig:
    tau = 1.0 if args.tau is None else args.tau
    t = tau / args.K
    if args.lam is not None:
        cfg = AKConfig.from_lambda(b, args.lam, tau)
        return AKConfig(args.K, t, b, cfg.b1, cfg.b2)
    if args.b1 is None and args.b2 is None:
        return AKConfig(args.K, t, b, b, b)
    b1 = args.b1 if args.b1 is not None else b * b / args.b2
    b2 = args.b2 if args.b2 is not None else b * b / args.b1
    if not (math.isclose(b1, b) and math.isclose(b2, b)):
        lambda_from_widths(b, b1, b2)
    return AKConfig(args.K, t, b, b1, b2)


def cmd_ak(args, run: Run) -> int:
    psi = _load_state(args)
    _require(not psi.units.is_dimensionless, "the protocol needs a dimensioned state (state --units dimensioned)")
    b = _state_b(psi, args)
    cfg = _ak_config(args, b)
    center = moment(psi, "X", 1)
    sigma = math.sqrt(max(variance(psi, "X"), 1e-300))
    grids = default_tri_grids(center, sigma, cfg, n=args.grid_n or 64, n_sigma=args.n_sigma)
    budget = int(args.memory_budget * 2**20)
    grids.check_budget(budget)
    psi_x = resample(psi, grids.x)
    lost = abs(1.0 - psi_x.norm)
    if lost > 1e-6:
        warnings.warn(f"state loses {lost:.2e} of its norm on the protocol grid", UserWarning)
    psi_x = psi_x.normalized()
    phi0 = initial_tri_state(psi_x, cfg.b1, cfg.b2, grids, budget)
    exact = evolve_shift(phi0, cfg)
    report: dict[str, Any] = {
        "b": b,
        "b1": cfg.b1,
        "b2": cfg.b2,
        "K": cfg.K,
        "t": cfg.t,
        "tau": cfg.tau,
        "grid_shape": list(grids.shape),
        "grids": {
            name: {"min": g.x_min, "max": g.x_max, "n": g.n}
            for name, g in (("x", grids.x), ("x1", grids.x1), ("x2", grids.x2))
        },
    }
    if args.steps:
        split = trotter_oracle(phi0, cfg, args.steps)
        report["oracle"] = {
            "steps": args.steps,
            "fidelity": tri_state_fidelity(split, exact),
            "distance": tri_state_distance(split, exact),
        }
        del split
    phi = to_detector_momentum(exact)
    del exact
    dist = readout_distribution(phi)
    report["mass"] = dist.mass
    report["measured"] = _moments_dict(distribution_moments(dist))

    # readout point snapped to the nearest detector node
    xm = report["measured"]["mean_x"] if args.xm is None else args.xm
    pm = report["measured"]["mean_p"] if args.pm is None else args.pm
    if args.xm is None:
        xm = float(dist.pgrid.a1[np.argmin(np.abs(dist.pgrid.a1 - xm))])
        pm = float(dist.pgrid.a2[np.argmin(np.abs(dist.pgrid.a2 - pm))])
    post, density = readout(phi, xm, pm)
    report["readout"] = {"xm": xm, "pm": pm, "density": density}

    equiv: dict[str, Any] = {}
    unit_tau = math.isclose(cfg.tau, 1.0, rel_tol=1e-12)
    strong = math.isclose(cfg.b1, b, rel_tol=1e-12) and math.isclose(cfg.b2, b, rel_tol=1e-12)
    if unit_tau and strong:
        ref = joint_distribution(psi_x, Strong(b), dist.pgrid)
        equiv["path"] = "strong"
        equiv["distribution_tv"] = 0.5 * float(np.abs(dist.density - ref.density).sum()) * dist.pgrid.cell_area
        equiv["fidelity_closed_form"] = fidelity(post, post_state_strong_closed_form(psi_x, xm, pm, b))
        equiv["fidelity_collapsed"] = fidelity(post, collapsed_state(xm, pm, b, grids.x))
    elif unit_tau:
        lam = lambda_from_widths(b, cfg.b1, cfg.b2)
        ref = joint_distribution(psi_x, Weak(b, lam), dist.pgrid)
        equiv["path"] = "weak"
        equiv["lambda"] = lam
        equiv["distribution_tv"] = 0.5 * float(np.abs(dist.density - ref.density).sum()) * dist.pgrid.cell_area
        equiv["fidelity_closed_form"] = fidelity(post, post_state_closed_form(psi_x, xm, pm, cfg.b1, cfg.b2, b))
        alpha = PhasePoint(xm / math.sqrt(2.0 * b), pm * math.sqrt(b / 2.0))
        kraus = weak_kraus_apply(convert_units(psi_x, DIMENSIONLESS), alpha, lam)
        equiv["fidelity_kraus"] = fidelity(convert_units(post, DIMENSIONLESS), kraus.post_state)
    if args.short_time:
        _require(strong, "--short-time needs b1 = b2 = b")
        approx = short_time_tri_state(psi_x, cfg.tau, b, grids)
        equiv["short_time"] = {
            "distance": tri_state_distance(approx, phi),
            "tau_squared_over_2": 0.5 * cfg.tau**2,
            "fidelity_at_readout": fidelity(post, short_time_state(psi_x, xm, pm, cfg.tau, b)),
        }
    report["equivalence"] = equiv
    report["warnings"] = run.warnings

    path = io.write_distribution(dist, run.path("ak_distribution.csv"))
    io.write_wavefunction(post.normalized(), run.path("ak_readout_state.csv"))
    run.files.append(str(io.sidecar_path(run.out / "ak_readout_state.csv")))
    io.write_json(report, run.path("ak_report.json"))
    line = f"ak tau={cfg.tau:g} grid={'x'.join(map(str, grids.shape))}: mass={dist.mass:.6f}"
    if "oracle" in report:
        line += f" oracle_fidelity={report['oracle']['fidelity']:.9f}"
    print(f"{line} -> {path}")
    return EXIT_OK


def cmd_gabor(args, run: Run) -> int:
    psi = _load_state(args)
    work = convert_units(psi, DIMENSIONLESS)
    pgrid = _phase_grid(args, lambda: PhaseGrid.square(6.0, args.pgrid_n))
    field = gabor_forward(work, pgrid)
    report: dict[str, Any] = {"action": args.action, "field_norm": gabor_norm(field)}
    if args.action == "forward":
        path = io.write_gabor_field(field, run.path("gabor.csv"), husimi=args.husimi)
    elif args.action == "inverse":
        back = gabor_inverse(field, work.grid)
        report["roundtrip_fidelity"] = fidelity(back, work)
        diff = back.amplitudes - work.amplitudes
        report["roundtrip_l2_error"] = float(np.sqrt(np.sum(np.abs(diff) ** 2) * work.grid.dx))
        out = convert_units(back, psi.units) if not psi.units.is_dimensionless else back
        path = run.path("inverse_state.csv")
        io.write_wavefunction(out, path)
        run.files.append(str(io.sidecar_path(path)))
    else:
        proj = project_G(field)
        report["projection_error"] = gabor_norm(proj - field) / gabor_norm(field)
        path = io.write_gabor_field(proj, run.path("projected.csv"), husimi=args.husimi)
    report["warnings"] = run.warnings
    io.write_json(report, run.path("gabor_report.json"))
    print(f"gabor {args.action}: field_norm={report['field_norm']:.9f} -> {path}")
    return EXIT_OK


def cmd_verify(args, run: Run) -> int:
    overrides = parse_tolerances(args.tol)
    results = apply_overrides(run_suite(args.suite, lam=args.lam, b=1.0 if args.b is None else args.b), overrides)
    lines = [r.to_json() for r in results]
    for line in lines:
        print(json.dumps(line, sort_keys=True))
    failed = [r.check_name for r in results if not r.passed]
    io.write_json({"suite": args.suite, "checks": lines, "failed": failed}, run.path("verify_report.json"))
    if failed:
        print(f"verify: {len(failed)} of {len(results)} checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace, Run], int]] = {
    "state": cmd_state,
    "measure": cmd_measure,
    "dist": cmd_dist,
    "sample": cmd_sample,
    "ak": cmd_ak,
    "gabor": cmd_gabor,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        validate(args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    run = Run(args)
    code = EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        run.caught = caught
        try:
            code = COMMANDS[args.command](args, run)
        except MemoryBudgetError as exc:
            print(f"error: refused: {exc}", file=sys.stderr)
            code = EXIT_RESOURCE
        except (ValueError, FileNotFoundError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_INVALID
    for message in run.warnings:
        print(f"warning: {message}", file=sys.stderr)
    run.provenance({"exit_code": code})
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
