"""Command-line entry points.

Exit codes: 0 success, 1 domain error (printed to stderr), 2 usage error.
Data goes to stdout, diagnostics to stderr.

The environment variable ``PHKIT_CALIBRATION`` overrides the default
calibration file for every subcommand that loads one.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .calibration import fit_calibration, parse_table
from .chemistry import equilibrium_ph, mix, solution_from_dict, solution_to_dict, stock_reservoirs
from .controller import ControllerConfig, run_to_setpoint, trace_to_dict
from .errors import PhkitError, UnreachableSetpointError
from .fluidics import gradiator_profile, ticker_arrival_times
from .materials import (
    CALIB_FORMAT_VERSION,
    calibration_to_dict,
    load_calibration,
    save_calibration,
)
from .scene import frame_to_csv, frame_to_png, load_scenario, render_frame, step


def _default_calibration_path() -> str | None:
    return os.environ.get("PHKIT_CALIBRATION") or None


def _load_calib(path: str | None):
    return load_calibration(path or _default_calibration_path())


def _read_solution(path: str):
    with open(path) as fh:
        return solution_from_dict(json.load(fh))


def _calibration_hash(calib) -> str:
    payload = json.dumps(calibration_to_dict(calib), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


# --------------------------------------------------------------------------
# subcommand handlers


def _cmd_ph(args) -> int:
    solution = _read_solution(args.solution)
    print(f"{equilibrium_ph(solution).value:.4f}")
    return 0


def _cmd_mix(args) -> int:
    a = _read_solution(args.solution_a)
    b = _read_solution(args.solution_b)
    mixed = mix(a, a.volume, b, b.volume)
    print(f"{equilibrium_ph(mixed).value:.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps(solution_to_dict(mixed), indent=2) + "\n")
    return 0


def _cmd_mixto(args) -> int:
    acid, base = stock_reservoirs()
    config = ControllerConfig(
        setpoint=args.target,
        tolerance=args.tolerance,
        sensor_noise_sigma=args.sigma,
        rng_seed=args.seed,
    )
    trace = run_to_setpoint(config, acid, base)
    print("iteration,ratio,true_ph,measured_ph")
    for i, (ratio, true_ph, measured) in enumerate(trace.iterations):
        print(f"{i},{ratio:.6f},{true_ph:.4f},{measured:.4f}")
    print(f"# converged={trace.converged}", file=sys.stderr)
    return 0 if trace.converged else 1


def _cmd_simulate(args) -> int:
    calib = _load_calib(args.calibration)
    scene = load_scenario(args.scenario, calib=calib)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_frames = round(args.until / args.dt)
    if abs(n_frames * args.dt - args.until) > 1e-9 * max(args.until, 1.0):
        raise PhkitError("--until must be an integer multiple of --dt")
    for i in range(n_frames):
        scene = step(scene, args.dt)
        frame = render_frame(scene)
        (out_dir / f"frame_{i:06d}.csv").write_text(frame_to_csv(frame))
    manifest = {
        "scenario": scene.name,
        "seed": args.seed,
        "until": args.until,
        "dt": args.dt,
        "frames": n_frames,
        "package_version": __version__,
        "calibration_format_version": CALIB_FORMAT_VERSION,
        "calibration_sha256": _calibration_hash(calib),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {n_frames} frames to {out_dir}", file=sys.stderr)
    return 0


def _cmd_fit(args) -> int:
    table = parse_table(Path(args.infile).read_text(), args.kind)
    initial = _load_calib(args.calibration)
    fitted, report = fit_calibration([table], initial)
    save_calibration(fitted, args.out)
    print(json.dumps(report, indent=2, default=float))
    return 0


def _cmd_ticker(args) -> int:
    calib = _load_calib(args.calibration)
    scene = load_scenario(args.scenario, calib=calib)
    if not scene.channels:
        raise PhkitError("scenario has no channels")
    # apply pending local events so the channel has its boundary feed attached
    horizon = max((e.time for e in scene.events), default=0.0) + 1e-9
    if horizon > 0:
        scene = step(scene, horizon)
    channel = scene.channels[0].channel
    if args.markers:
        markers = [float(v) for v in args.markers.split(",")]
    else:
        markers = [i / (channel.n_cells - 1) for i in range(0, channel.n_cells, 4)]
    times = ticker_arrival_times(channel, markers, (args.ph_low, args.ph_high))
    print("position_frac,arrival_s")
    for x, t in zip(markers, times):
        print(f"{x!r},{t!r}")
    return 0


def _cmd_gradiator(args) -> int:
    calib = _load_calib(args.calibration)
    scene = load_scenario(args.scenario, calib=calib)
    if not scene.channels:
        raise PhkitError("scenario has no channels")
    channel = scene.channels[0].channel
    if channel.left is None or channel.right is None:
        raise PhkitError("gradiator needs a channel with both ends held at fixed solutions")
    profile = gradiator_profile(channel, channel.left, channel.right)
    print("position_frac,ph")
    for x, ph in zip(profile.positions, profile.ph_values):
        print(f"{x!r},{ph!r}")
    return 0


def _cmd_export(args) -> int:
    calib = _load_calib(args.calibration)
    scene = load_scenario(args.scenario, calib=calib)
    if args.time > 0:
        scene = step(scene, args.time)
    frame = render_frame(scene)
    if args.format == "csv":
        Path(args.out).write_text(frame_to_csv(frame))
    else:
        frame_to_png(frame, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    calib = _load_calib(args.calibration)
    app = create_app(args.scenario, calib=calib)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phkit", description="pH-reactive material toolkit")
    parser.add_argument("--version", action="version", version=f"phkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_calib(p):
        p.add_argument("--calibration", help="calibration file (default: built-in synthetic set)")

    p = sub.add_parser("ph", help="equilibrium pH of a solution file")
    p.add_argument("solution")
    p.set_defaults(func=_cmd_ph)

    p = sub.add_parser("mix", help="pH after mixing two solution files")
    p.add_argument("solution_a")
    p.add_argument("solution_b")
    p.add_argument("--out", help="write the mixed solution to this file")
    p.set_defaults(func=_cmd_mix)

    p = sub.add_parser("mixto", help="run the closed-loop mixer to a target pH")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--tolerance", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=0.05, help="sensor noise std dev")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_mixto)

    p = sub.add_parser("simulate", help="run a scenario and write a frame series")
    p.add_argument("scenario")
    p.add_argument("--until", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--out", default="frames")
    p.add_argument("--seed", type=int, default=0)
    add_calib(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit calibration parameters to a measurement table")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kind", choices=("color", "odor", "shape"), required=True)
    p.add_argument("--out", required=True)
    add_calib(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("ticker", help="arrival-time table for a channel scenario")
    p.add_argument("scenario")
    p.add_argument("--markers", help="comma-separated positions in metres")
    p.add_argument(
        "--ph-low", type=float, default=6.0,
        help="resting-band lower edge; arrival = pH first leaves [low, high]",
    )
    p.add_argument("--ph-high", type=float, default=8.0)
    add_calib(p)
    p.set_defaults(func=_cmd_ticker)

    p = sub.add_parser("gradiator", help="steady pH profile for a two-reservoir channel")
    p.add_argument("scenario")
    add_calib(p)
    p.set_defaults(func=_cmd_gradiator)

    p = sub.add_parser("export", help="render one frame of a scenario")
    p.add_argument("scenario")
    p.add_argument("--time", type=float, default=0.0)
    p.add_argument("--format", choices=("csv", "png"), default="csv")
    p.add_argument("--out", required=True)
    add_calib(p)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve", help="serve a scenario over HTTP on localhost")
    p.add_argument("scenario")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8777)
    add_calib(p)
    p.set_defaults(func=_cmd_serve)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UnreachableSetpointError as exc:
        print(
            f"error: target pH {exc.target} is outside the achievable range "
            f"[{exc.ph_min:.4f}, {exc.ph_max:.4f}]",
            file=sys.stderr,
        )
        return 1
    except PhkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
