"""Command-line entry point: sweep, insert, probe-field, knot.

All commands emit CSV (one header line, `.` decimals, UTF-8) and are
deterministic for a fixed seed regardless of worker count.  Exit codes:
0 success, 1 run failure, 2 invalid arguments.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

import numpy as np

from . import knots
from .errors import KnotFieldError
from .field import FieldParams, field as eval_field
from .geometry import Loop, load_loop, make_circle, make_double, make_folded
from .insertion import InsertionParams, run_insertion
from .perturb import WaveSpec, deform_wave, linear_translation, move_loop
from .sweep import (CSV_HEADER, SweepConfig, default_workers, format_row,
                    format_summary, run_sweep, summarize)


def _parse_vec3(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.replace(",", " ").split()]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 3 numbers, got {text!r}")
    return tuple(parts)


def _read_config_file(path: str) -> dict[str, str]:
    """key=value config lines; `#` starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = body.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _loop_from_args(args) -> Loop:
    if args.loop_file:
        loop = load_loop(args.loop_file)
    elif args.loop == "circle":
        loop = make_circle(args.radius, args.step)
    elif args.loop == "folded":
        loop = make_folded(args.radius, args.step, args.fold_angle)
    elif args.loop == "double":
        loop = make_double(args.radius, args.step, args.pitch)
    else:
        raise KnotFieldError(f"unknown loop kind {args.loop!r}")
    if args.reverse_loop:
        loop = loop.reversed()
    return loop


def _add_loop_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--loop", choices=["circle", "folded", "double"], default="circle")
    parser.add_argument("--loop-file", help="plain-text loop file (x y z per line)")
    parser.add_argument("--radius", type=float, default=1.0)
    parser.add_argument("--step", type=float, default=0.1, help="angular step (radians)")
    parser.add_argument("--fold-angle", type=float, default=np.pi / 2)
    parser.add_argument("--pitch", type=float, default=0.2)
    parser.add_argument("--reverse-loop", action="store_true",
                        help="flip orientation (insert from the other side)")


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def cmd_sweep(args) -> int:
    overrides = _read_config_file(args.config) if args.config else {}

    def pick(name, cast, default):
        if getattr(args, name.replace("-", "_"), None) is not None:
            return getattr(args, name.replace("-", "_"))
        if name in overrides:
            return cast(overrides[name])
        return default

    sigmas = pick("sigmas", lambda s: tuple(float(x) for x in s.split()),
                  SweepConfig.sigmas)
    if isinstance(sigmas, list):
        sigmas = tuple(sigmas)
    kinds = pick("noise-kinds", lambda s: tuple(s.split()), SweepConfig.noise_kinds)
    if isinstance(kinds, list):
        kinds = tuple(kinds)
    combos = args.alpha_beta
    if combos is None and "alpha-beta" in overrides:
        combos = [tuple(float(x) for x in pair.split(":"))
                  for pair in overrides["alpha-beta"].split()]
    if combos is None:
        combos = list(SweepConfig.combos)
    config = SweepConfig(
        sigmas=tuple(sigmas),
        noise_kinds=tuple(kinds),
        combos=tuple(tuple(c) for c in combos),
        trials=int(pick("trials", int, 1000)),
        gamma=float(pick("gamma", float, 0.01)),
        start=tuple(pick("start", _parse_vec3, SweepConfig.start)),
        master_seed=int(pick("seed", int, 0)),
        workers=int(pick("workers", int, default_workers())),
    )
    rows = run_sweep(config)
    out, close = _open_out(args.out)
    try:
        out.write(CSV_HEADER + "\n")
        for row in rows:
            out.write(format_row(row) + "\n")
    finally:
        if close:
            out.close()
    summary = summarize(rows, config)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_summary(summary))
    else:
        sys.stderr.write(format_summary(summary))
    return 0


def cmd_insert(args) -> int:
    loop = _loop_from_args(args)
    params = InsertionParams(
        field=FieldParams(gamma=args.gamma, alpha=args.alpha, beta=args.beta),
        max_iters=args.max_iters,
        stop_persistence=args.k,
        planar_mode=args.planar,
    )
    outcome = run_insertion(np.array(args.start, dtype=float), loop, params)
    if args.dump:
        with open(args.dump, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iter,x,y,z,flux\n")
            for i, (p, f) in enumerate(zip(outcome.trajectory.positions,
                                           outcome.trajectory.flux)):
                fh.write(f"{i},{p[0]:.10g},{p[1]:.10g},{p[2]:.10g},{f:.10g}\n")
    print(f"termination={outcome.termination} success={int(outcome.success)} "
          f"quality={outcome.quality:.6g} delay={outcome.delay} "
          f"stop_point={outcome.stop_point[0]:.6g},{outcome.stop_point[1]:.6g},"
          f"{outcome.stop_point[2]:.6g} iters={len(outcome.trajectory) - 1}")
    return 1 if outcome.termination == "error" else 0


def cmd_probe_field(args) -> int:
    loop = _loop_from_args(args)
    params = FieldParams(scale_c=args.scale)
    lo = np.array(args.grid_min, dtype=float)
    hi = np.array(args.grid_max, dtype=float)
    counts = [int(n) for n in args.grid.split(",")] if args.grid else [11, 11, 11]
    if len(counts) != 3:
        raise KnotFieldError("--grid expects nx,ny,nz")
    axes = [np.linspace(lo[d], hi[d], counts[d]) for d in range(3)]
    out, close = _open_out(args.out)
    try:
        out.write("x,y,z,Bx,By,Bz,Bnorm\n")
        for x in axes[0]:
            for y in axes[1]:
                for z in axes[2]:
                    p = np.array([x, y, z])
                    try:
                        b = eval_field(loop, p, params)
                        bn = float(np.linalg.norm(b))
                        out.write(f"{x:.10g},{y:.10g},{z:.10g},"
                                  f"{b[0]:.10g},{b[1]:.10g},{b[2]:.10g},{bn:.10g}\n")
                    except KnotFieldError:
                        # singular sample: flagged with nan field values
                        out.write(f"{x:.10g},{y:.10g},{z:.10g},nan,nan,nan,nan\n")
    finally:
        if close:
            out.close()
    return 0


def _anchor_provider_from_args(args, seed: int) -> Optional[knots.AnchorProvider]:
    scale = args.loop_segments
    step = 0.1 / scale
    radius = args.anchor_radius
    nominal = make_circle(radius, step, center=(0.9, 0.0, 0.5), normal=(1.0, 0.0, 0.0))
    rng = np.random.default_rng(seed + 7919)
    if args.wave_ratio and args.wave_ratio > 0:
        spec = WaveSpec(amplitude=args.wave_ratio * radius,
                        direction=args.wave_direction,
                        spatial_frequency=2,
                        base_frequency=rng.uniform(0.5, 1.5),
                        chirp_rate=rng.uniform(0.0, 0.002))
        dt = 0.05   # seconds of wave time per tick
        return lambda t: deform_wave(nominal, spec, t * dt)
    if args.loop_speed and args.loop_speed > 0:
        angle = rng.uniform(0.0, 2.0 * np.pi)
        velocity = args.loop_speed * np.array([np.cos(angle), np.sin(angle), 0.0])
        spec = linear_translation(velocity)
        return lambda t: move_loop(nominal, spec, float(t))
    return lambda t: nominal


def cmd_knot(args) -> int:
    if args.program_file:
        with open(args.program_file, "r", encoding="utf-8") as fh:
            program = knots.parse_program(fh.read())
    else:
        program = knots.knot_program(args.program)
    provider = _anchor_provider_from_args(args, args.seed)
    result = knots.run_program(program, seed=args.seed, anchor_provider=provider,
                               anchor_radius=args.anchor_radius)
    if args.log:
        with open(args.log, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("tick,active_step,status,base_x,base_y,heading,"
                     "arm1_x,arm1_y,arm1_z,arm2_x,arm2_y,arm2_z\n")
            for row in result.log:
                fh.write(f"{row.tick},{row.active_step},{row.status},"
                         f"{row.base_x:.10g},{row.base_y:.10g},{row.heading:.10g},"
                         f"{row.arm1[0]:.10g},{row.arm1[1]:.10g},{row.arm1[2]:.10g},"
                         f"{row.arm2[0]:.10g},{row.arm2[1]:.10g},{row.arm2[2]:.10g}\n")
    link = result.link_check if result.link_check is not None else "nan"
    print(f"program={program.name} completed={int(result.completed)} "
          f"insertions={result.insertion_count} twists={result.twist_count} "
          f"link_check={link} ticks={result.ticks}")
    if not result.completed:
        sys.stderr.write(f"failed at step: {result.failure_step}\n")
        for row in result.log[-20:]:
            sys.stderr.write(f"tick {row.tick}: {row.active_step} [{row.status}]\n")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knotfield",
        description="Virtual-magnetic-field rope insertion and knot tying simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="noise-robustness sweep (CSV rows + summary)")
    p.add_argument("--sigmas", type=float, nargs="+", default=None)
    p.add_argument("--noise-kinds", nargs="+", choices=["isotropic", "cylindrical"],
                   default=None)
    p.add_argument("--alpha-beta", type=lambda s: tuple(float(x) for x in s.split(":")),
                   nargs="+", default=None, metavar="A:B")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--start", type=_parse_vec3, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None,
                   help=f"default: ${default_workers()} or env KNOTFIELD_WORKERS")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", help="rows CSV path (default stdout)")
    p.add_argument("--summary", help="summary CSV path (default stderr)")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("insert", help="single guided insertion run")
    _add_loop_args(p)
    p.add_argument("--start", type=_parse_vec3, default=(0.0, 0.0, -2.0))
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--planar", action="store_true", help="use the alpha/beta planar offset")
    p.add_argument("--k", type=int, default=1, help="stop persistence")
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--dump", help="trajectory CSV path (iter,x,y,z,flux)")
    p.set_defaults(fn=cmd_insert)

    p = sub.add_parser("probe-field", help="sample the field on a regular grid")
    _add_loop_args(p)
    p.add_argument("--grid", default="11,11,11", help="nx,ny,nz")
    p.add_argument("--grid-min", type=_parse_vec3, default=(-2.0, -2.0, -2.0))
    p.add_argument("--grid-max", type=_parse_vec3, default=(2.0, 2.0, 2.0))
    p.add_argument("--scale", type=float, default=1.0, help="field constant")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(fn=cmd_probe_field)

    p = sub.add_parser("knot", help="run a knot program in the kinematic simulator")
    p.add_argument("program", nargs="?", default="3_1",
                   choices=sorted(knots.PROGRAMS), help="program name")
    p.add_argument("--program-file", help="plain-text step file (step N per line)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--anchor-radius", type=float, default=0.25)
    p.add_argument("--wave-ratio", type=float, default=0.0,
                   help="anchor wave amplitude / radius")
    p.add_argument("--wave-direction", choices=["parallel", "perpendicular"],
                   default="perpendicular")
    p.add_argument("--loop-speed", type=float, default=0.0,
                   help="anchor translation speed (m/tick)")
    p.add_argument("--loop-segments", type=int, default=1,
                   help="anchor discretization multiplier (e.g. 4 for 4x)")
    p.add_argument("--log", help="run log CSV path")
    p.set_defaults(fn=cmd_knot)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except KnotFieldError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
