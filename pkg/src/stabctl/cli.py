"""``stabctl`` command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .assumptions import audit
from .augmented import AugSystem, ControlMode, rhs_1d
from .classifier import PANELS, Tag, Targets, classify, count_regions, sweep, sweep_1d
from .config import ConfigError, RunConfig, parse_config, render_config
from .equilibria import (EqKind, all_equilibria, equilibria_1d, find_trivial_equilibria,
                         write_equilibria_csv)
from .integrator import Termination, integrate
from .limit_cycle import NoCycleFound, find_cycle
from .oned import (audit_1d, polylines_intersect, saddles_1d, trace_separatrix,
                   write_polyline_csv)

ENV_OUTPUT_DIR = "STABCTL_OUTPUT_DIR"
# seeds that reach the stable (forward) and unstable (backward) BvP cycles
STABLE_SEED = (2.0, 0.0)
UNSTABLE_SEED = (1.0, -0.33)


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(v) -> str:
    return f"{float(v):.9g}"


def fmt_vec(v) -> str:
    return " ".join(fmt(c) for c in np.ravel(v))


def fmt_complex(z) -> str:
    z = complex(z)
    return f"{z.real:.9g}{z.imag:+.9g}i"


# configuration -------------------------------------------------------------

def _override_lines(args) -> dict:
    out = {}
    if args.model is not None:
        out["model"] = args.model
    if args.rho is not None:
        out["rho"] = repr(args.rho)
    if args.mode is not None:
        out["mode"] = args.mode
    for item in args.param or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--param expects KEY=VALUE, got '{item}'")
        out[key.strip()] = value.strip()
    return out


def load_config(args) -> RunConfig:
    text = ""
    if args.config is not None:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    base = parse_config(text)
    over = _override_lines(args)
    if not over:
        return base
    if "model" in over and over["model"] != base.model:
        base = RunConfig(model=over["model"], rho=base.rho, mode=base.mode,
                         integration=base.integration, thresholds=base.thresholds,
                         output_dir=base.output_dir)
    lines = {}
    for line in render_config(base).splitlines():
        k, _, v = line.partition(" = ")
        lines[k] = v
    lines.update(over)
    try:
        return parse_config("\n".join(f"{k} = {v}" for k, v in lines.items()))
    except ConfigError as exc:
        raise ConfigError(f"command line: {str(exc).split(': ', 1)[-1]}") from None


def output_dir(args, cfg: RunConfig) -> Path:
    d = args.output_dir or os.environ.get(ENV_OUTPUT_DIR) or cfg.output_dir
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _planar(cfg: RunConfig):
    if cfg.is_1d:
        raise UsageError(f"model '{cfg.model}' is one-dimensional; use 'stabctl oned'")
    field = cfg.build_field()
    return field, AugSystem(field, cfg.rho, cfg.mode)


def _fixed_point(field):
    roots = find_trivial_equilibria(field)
    if not roots:
        raise NumericalFailure("no planar equilibrium found")
    return roots[0].z


def _cycle(field, seed, direction, center, n_samples):
    try:
        return find_cycle(field, seed, direction, center=center, n_samples=n_samples)
    except NoCycleFound as exc:
        raise NumericalFailure(f"{direction} cycle from seed {fmt_vec(seed)}: {exc}") from None


# subcommands ---------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig) -> int:
    out = output_dir(args, cfg)
    spec = cfg.integration
    if args.t_max is not None:
        import dataclasses
        spec = dataclasses.replace(spec, t_max=args.t_max)
    if cfg.is_1d:
        field = cfg.build_field()
        s0 = np.array([args.x0, args.q1])
        traj = integrate(lambda s: rhs_1d(field, cfg.rho, s), s0, spec)
        traj.to_csv(out / "trajectory.csv", header=("t", "x", "q"))
        print(f"termination: {traj.termination.value}")
        print(f"final: {fmt_vec(traj.final)}")
        print(f"wrote {out / 'trajectory.csv'}")
        return 2 if traj.termination is Termination.STIFFNESS_FAILURE else 0

    field, sysm = _planar(cfg)
    s0 = np.array([args.x0, args.y0, args.q1, args.q2])
    traj = integrate(sysm, s0, spec)
    traj.to_csv(out / "trajectory.csv")
    zs = _fixed_point(field)
    s = traj.final
    print(f"termination: {traj.termination.value}")
    print(f"t_final: {fmt(traj.times[-1])}")
    print(f"final: {fmt_vec(s)}")
    print(f"distance: {fmt(np.hypot(*(s[:2] - zs)) + np.hypot(*s[2:]))}  (|z - z*| + |q|)")
    # the cycle is only extracted when the cheap checks leave the outcome open
    targets = Targets(zs)
    res = classify(sysm, s0, None, targets, cfg.thresholds)
    if res.tag is Tag.UNDETERMINED and cfg.model == "bvp" and not args.no_cycle:
        gamma_s = _cycle(field, STABLE_SEED, "forward", zs, 500)
        res = classify(sysm, s0, gamma_s, targets, cfg.thresholds)
    print(f"outcome: {res.tag.name}" + (f" at t={fmt(res.t_decided)}" if res.tag else ""))
    print(f"wrote {out / 'trajectory.csv'}")
    return 2 if traj.termination is Termination.STIFFNESS_FAILURE else 0


def cmd_classify(args, cfg: RunConfig) -> int:
    field, sysm = _planar(cfg)
    if args.panel is not None:
        x0, y0 = PANELS[args.panel]
        label = args.panel
    elif args.x0 is not None and args.y0 is not None:
        x0, y0 = args.x0, args.y0
        label = "custom"
    else:
        raise UsageError("classify needs --panel or both --x0 and --y0")
    out = output_dir(args, cfg)
    zs = _fixed_point(field)
    gamma_s = _cycle(field, args.cycle_seed, "forward", zs, args.samples)
    gamma_u = None
    if args.unstable_seed is not None:
        gamma_u = _cycle(field, args.unstable_seed, "backward", zs, args.samples)
    n = args.resolution
    cmap = sweep(sysm, x0, y0, gamma_s, Targets(zs, gamma_u), tuple(args.q1_range),
                 tuple(args.q2_range), (n, n), cfg.thresholds, args.jobs)
    stem = out / f"map_{label}"
    cmap.to_csv(stem.with_suffix(".csv"))
    cmap.to_pgm(stem.with_suffix(".pgm"))
    print(f"base point: {fmt(x0)} {fmt(y0)}")
    for k, v in cmap.counts().items():
        print(f"{k}: {v}")
    print(f"undetermined fraction: {fmt(cmap.undetermined_fraction)}")
    print("regions: " + ", ".join(f"{k}={v}" for k, v in count_regions(cmap).items()))
    print(f"wrote {stem}.csv {stem}.pgm")
    return 0


def cmd_fixed_points(args, cfg: RunConfig) -> int:
    out = output_dir(args, cfg)
    if cfg.is_1d:
        return _print_1d_equilibria(cfg.build_field(), cfg.rho)
    field, sysm = _planar(cfg)
    reports = all_equilibria(sysm)
    if not reports:
        raise NumericalFailure("no equilibria found")
    for r in reports:
        print(f"{r.kind.value}: z = {fmt_vec(r.z)}  q = {fmt_vec(r.q)}")
        print("  eigenvalues: " + ", ".join(fmt_complex(e) for e in r.eigenvalues))
        print(f"  stable_dim = {r.stable_dim}  unstable_dim = {r.unstable_dim}")
        if r.kind is EqKind.TRIVIAL:
            w = np.linalg.eigvals(field.DF(r.z))
            print("  D_F eigenvalues: " + ", ".join(fmt_complex(e) for e in w))
        else:
            print(f"  Lambda(0) = {fmt(r.lambda0)}  a3_satisfied = {r.a3_satisfied}")
    path = out / "equilibria.csv"
    write_equilibria_csv(path, reports)
    print(f"wrote {path}")
    return 0


def cmd_check_assumptions(args, cfg: RunConfig) -> int:
    if cfg.is_1d:
        print(audit_1d(cfg.build_field(), cfg.rho).render())
        return 0
    field, sysm = _planar(cfg)
    zs = _fixed_point(field)
    gamma_s = _cycle(field, args.cycle_seed, "forward", zs, args.samples)
    kx0, kx1, ky0, ky1 = args.k_box
    print(audit(sysm, gamma_s, k_box=((kx0, kx1), (ky0, ky1))).render())
    return 0


def cmd_limit_cycle(args, cfg: RunConfig) -> int:
    field, _ = _planar(cfg)
    out = output_dir(args, cfg)
    zs = _fixed_point(field)
    seed = args.seed
    if seed is None:
        seed = STABLE_SEED if args.direction == "forward" else UNSTABLE_SEED
    orbit = _cycle(field, seed, args.direction, zs, args.samples)
    pts = orbit.points
    path = out / f"cycle_{orbit.stability.value}.csv"
    orbit.to_csv(path)
    print(f"stability: {orbit.stability.value}")
    print(f"period: {fmt(orbit.period)}")
    print(f"orientation: {orbit.orientation}")
    print(f"x range: {fmt(pts[:, 0].min())} {fmt(pts[:, 0].max())}")
    print(f"y range: {fmt(pts[:, 1].min())} {fmt(pts[:, 1].max())}")
    print(f"wrote {path}")
    return 0


def _oned_field(args, cfg: RunConfig):
    if cfg.is_1d:
        return cfg.build_field()
    if args.model is not None:
        raise UsageError(f"model '{cfg.model}' is planar; oned needs a one-dimensional model")
    return RunConfig(model="double-well-1d", rho=cfg.rho).build_field()


def _print_1d_equilibria(field, rho) -> int:
    for e in equilibria_1d(field, rho):
        label = "saddle" if e.is_saddle else ("stable" if e.stable else "unstable")
        flag = "  degenerate" if e.degenerate else ""
        print(f"{e.kind.value}: x = {fmt(e.x)}  q = {fmt(e.q)}  {label}  eigenvalues: "
              + ", ".join(fmt_complex(w) for w in e.eigenvalues) + flag)
    return 0


def cmd_oned(args, cfg: RunConfig) -> int:
    field = _oned_field(args, cfg)
    rho = cfg.rho
    if args.action == "audit":
        print(audit_1d(field, rho).render())
        return _print_1d_equilibria(field, rho)
    out = output_dir(args, cfg)
    if args.action == "sweep":
        n1, n2 = args.resolution
        cmap = sweep_1d(field, rho, tuple(args.x_range), tuple(args.q_range), (n1, n2),
                        cfg.thresholds, args.jobs)
        stem = out / "oned_map"
        cmap.to_csv(stem.with_suffix(".csv"))
        cmap.to_pgm(stem.with_suffix(".pgm"))
        for k, v in cmap.counts().items():
            print(f"{k}: {v}")
        regions = count_regions(cmap)
        print("regions: " + ", ".join(f"{k}={v}" for k, v in regions.items()))
        print(f"total regions: {sum(regions.values())}")
        print(f"saddles: {len(saddles_1d(field, rho))}")
        print(f"wrote {stem}.csv {stem}.pgm")
        return 0
    saddles = saddles_1d(field, rho)
    if not saddles:
        raise NumericalFailure("no saddle equilibria")
    curves = []
    for k, s in enumerate(saddles):
        branches = trace_separatrix(field, rho, s, arc_budget=args.arc_budget)
        path = out / f"separatrix_{k}.csv"
        write_polyline_csv(path, branches)
        curves.append(branches)
        ends = "; ".join(fmt_vec(b[-1]) for b in branches)
        print(f"saddle {k}: x = {fmt(s.x)}  q = {fmt(s.q)}  branch ends: {ends}")
        print(f"wrote {path}")
    flat = [(k, b) for k, bs in enumerate(curves) for b in bs]
    crossings = sum(polylines_intersect(a, b, skip_shared_start=(i == j))
                    for n, (i, a) in enumerate(flat) for j, b in flat[n + 1:])
    print(f"crossings: {crossings}")
    return 0


# parser --------------------------------------------------------------------

def _pair(p, name, default, help_):
    p.add_argument(name, nargs=2, type=float, default=default, metavar=("LO", "HI"), help=help_)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--model", help="bvp, circle, double-well-1d, triple-well-1d, polynomial-1d")
    common.add_argument("--rho", type=float, help="discount rate (positive)")
    common.add_argument("--mode", choices=[m.value for m in ControlMode])
    common.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="model parameter, e.g. c=3.0 (repeatable)")
    common.add_argument("--output-dir", help=f"overrides config and ${ENV_OUTPUT_DIR}")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes for sweeps (default: all cores)")
    common.add_argument("--seedless", action="store_true",
                        help="deterministic run; every code path already is")

    parser = _Parser(prog="stabctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="integrate one trajectory")
    for name in ("--x0", "--y0", "--q1", "--q2"):
        p.add_argument(name, type=float, default=0.0)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--no-cycle", action="store_true", help="skip cycle extraction for the outcome")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("classify", parents=[common], help="classify a (q1, q2) grid")
    p.add_argument("--panel", choices=sorted(PANELS))
    p.add_argument("--x0", type=float)
    p.add_argument("--y0", type=float)
    p.add_argument("--resolution", type=int, default=101)
    _pair(p, "--q1-range", [-5.0, 5.0], "q1 extent")
    _pair(p, "--q2-range", [-5.0, 5.0], "q2 extent")
    p.add_argument("--cycle-seed", nargs=2, type=float, default=list(STABLE_SEED))
    p.add_argument("--unstable-seed", nargs=2, type=float, default=list(UNSTABLE_SEED))
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fixed-points", parents=[common], help="equilibria and eigenvalues")
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("check-assumptions", parents=[common], help="audit the assumptions")
    p.add_argument("--k-box", nargs=4, type=float, default=[-3.0, 3.0, -2.0, 2.0],
                   metavar=("X0", "X1", "Y0", "Y1"))
    p.add_argument("--cycle-seed", nargs=2, type=float, default=list(STABLE_SEED))
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(func=cmd_check_assumptions)

    p = sub.add_parser("limit-cycle", parents=[common], help="extract a periodic orbit")
    p.add_argument("--seed", nargs=2, type=float, default=None)
    p.add_argument("--direction", choices=("forward", "backward"), default="forward")
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(func=cmd_limit_cycle)

    p = sub.add_parser("oned", help="one-dimensional system")
    osub = p.add_subparsers(dest="action", parser_class=_Parser)
    q = osub.add_parser("audit", parents=[common])
    q.set_defaults(func=cmd_oned)
    q = osub.add_parser("sweep", parents=[common])
    _pair(q, "--x-range", [-3.0, 3.0], "x extent")
    _pair(q, "--q-range", [-4.0, 4.0], "q extent")
    q.add_argument("--resolution", nargs=2, type=int, default=[201, 201], metavar=("NX", "NQ"))
    q.set_defaults(func=cmd_oned)
    q = osub.add_parser("separatrix", parents=[common])
    q.add_argument("--arc-budget", type=float, default=30.0)
    q.set_defaults(func=cmd_oned)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            print("stabctl: error: a subcommand is required", file=sys.stderr)
            return 1
        cfg = load_config(args)
        return args.func(args, cfg)
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    except (UsageError, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (NumericalFailure, NoCycleFound, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"stabctl: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
