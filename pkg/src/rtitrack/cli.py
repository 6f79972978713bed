"""``rtitrack`` command line: simulate, calibrate, track, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
``RTI_LOG_LEVEL`` sets log verbosity (default WARNING); ``RTI_CACHE_DIR``
is the default projection cache directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calibration import CalibrationIncomplete, CalibrationProfile, ProfileMismatch, calibrate
from .config import load_config, save_config
from .geometry import projection_for
from .metrics import evaluate
from .pipeline import Pipeline
from .simulator import PRESETS, Simulation, load_scenario, scripted_paths
from .traceio import (
    FormatError,
    TrackLogWriter,
    read_frames,
    read_timing,
    read_track_log,
    read_truth,
    timing_path_for,
    write_image,
    write_trace,
    write_truth,
)

log = logging.getLogger("rtitrack")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input; maps to exit code 2."""


def _projection(config, cache_dir):
    im = config.imaging
    return projection_for(
        config.geometry(), config.grid(), excess=im.excess_path, sigma_x=im.sigma_x,
        sigma_n=im.sigma_n, delta_c=im.delta_c, cache_dir=cache_dir,
    )


def _load_config(path):
    try:
        return load_config(path)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"config {path}: {exc}") from None


def cmd_simulate(args) -> int:
    if (args.preset is None) == (args.scenario is None):
        raise UsageError("give either a preset name or --scenario FILE")
    try:
        if args.scenario:
            scenario = load_scenario(args.scenario)
            if args.seed is not None:
                scenario = scenario.with_seed(args.seed)
        else:
            scenario = scripted_paths(args.preset, args.seed or 0)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    if args.bidirectional:
        scenario = replace(scenario, bidirectional=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = Simulation(scenario)
    cfg = scenario.config
    save_config(cfg, out / "config.yaml")
    g, ch = sim.geometry, cfg.channels
    n_cal = write_trace(out / "calibration.trace", sim.calibration_frames(), g, ch, scenario.bidirectional)
    n_run = write_trace(out / "trace.trace", sim.frames(), g, ch, scenario.bidirectional)
    write_truth(out / "truth.csv", sim.truth())
    print(f"scenario {scenario.name} seed {scenario.seed}: {scenario.n_frames} frames, "
          f"{len(scenario.targets)} targets; {n_cal} calibration and {n_run} trace records -> {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = _load_config(args.config)
    g = config.geometry()
    try:
        frames = list(read_frames(args.trace, g, config.channels))
    except FormatError as exc:
        raise UsageError(str(exc)) from None
    if not frames:
        raise UsageError(f"{args.trace}: no records")
    seen = np.zeros(len(config.channels), dtype=bool)
    for f in frames:
        seen |= ~np.all(np.isnan(f.rss), axis=0)
    if not seen.all():
        absent = [c for c, s in zip(config.channels, seen) if not s]
        raise UsageError(f"{args.trace}: no records at all on channel(s) {absent}")
    im = config.imaging
    try:
        profile = calibrate(
            frames, _projection(config, args.cache_dir), config.grid(), config.channels,
            sigma_g=im.sigma_g, r_g=im.kernel_radius, tx_power=config.tx_power,
            geometry_hash=config.geometry_hash(),
        )
    except CalibrationIncomplete as exc:
        links = g.links
        print("missing (tx, rx, channel):", file=sys.stderr)
        for l, c in exc.missing:
            print(f"  {links[l][0]} {links[l][1]} {c}", file=sys.stderr)
        raise UsageError(f"calibration coverage incomplete: {len(exc.missing)} (link, channel) pairs") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    profile.save(args.out)
    fade = profile.fade
    print(f"profile -> {args.out}  ({profile.n_frames} frames, empty baseline {profile.empty_baseline:.5f})")
    print("tx  rx  max-fade[dB]  best-channel")
    best = np.asarray(config.channels)[np.argmax(fade, axis=1)]
    for (a, b), f, c in zip(g.links, fade.max(axis=1), best):
        print(f"{a:>2}  {b:>2}  {f:12.1f}  {c}")
    print(f"fade level over links: mean {fade.max(axis=1).mean():.2f} dB, "
          f"min {fade.max(axis=1).min():.2f} dB, max {fade.max():.2f} dB")
    return EXIT_OK


def cmd_track(args) -> int:
    config = _load_config(args.config)
    if args.assoc:
        config = config.with_tracking(assoc=args.assoc)
    try:
        profile = CalibrationProfile.load(args.profile, expected_hash=config.geometry_hash())
    except ProfileMismatch as exc:
        raise UsageError(f"refusing to track: {exc}") from None
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"profile {args.profile}: {exc}") from None
    pipe = Pipeline(config, _projection(config, args.cache_dir), profile)
    meta = {"assoc": config.tracking.assoc, "geometry_hash": config.geometry_hash()}
    times = []
    dump = open(args.dump_images, "wb") if args.dump_images else None
    try:
        with TrackLogWriter(args.out, meta, timing_path_for(args.out)) as writer:
            for frame in read_frames(args.trace, config.geometry(), config.channels):
                result = pipe.process(frame)
                writer.write(result)
                times.append(result.proc_ms)
                if dump:
                    write_image(dump, result.frame, pipe.last_image.intensities)
    except FormatError as exc:
        raise UsageError(str(exc)) from None
    finally:
        if dump:
            dump.close()
    if times:
        print(f"{len(times)} frames -> {args.out}")
        print(f"max[T_p] {max(times):.2f} ms   E[T_p] {np.mean(times):.2f} ms")
    else:
        print(f"0 frames -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        tlog = read_track_log(args.log)
        frames, truth = read_truth(args.truth)
    except (OSError, FormatError) as exc:
        raise UsageError(str(exc)) from None
    if tlog.frames != list(frames):
        have = set(tlog.frames)
        both = [k for k in frames if k in have]
        span = f"{both[0]}..{both[-1]} ({len(both)} frames)" if both else "none"
        lf = f"{tlog.frames[0]}..{tlog.frames[-1]}" if tlog.frames else "empty"
        raise UsageError(f"frame ranges differ: log {lf} ({len(tlog.frames)} frames), truth "
                         f"{frames.start}..{frames.stop - 1} ({len(frames)} frames); overlap {span}")
    if not len(frames):
        raise UsageError("no frames to evaluate")
    ospa_g, q = (1.0, 2.5, 5.0), 2.0
    if args.config:
        m = _load_config(args.config).metrics
        ospa_g, q = m.ospa_g, m.q
    report = evaluate(truth, tlog.confirmed_positions(), ospa_g=ospa_g, q=q)
    timing = {}
    tpath = timing_path_for(args.log)
    if tpath.exists():
        ms = list(read_timing(tpath).values())
        if ms:
            timing = {"max_Tp_ms": float(np.max(ms)), "mean_Tp_ms": float(np.mean(ms))}
    print(report.table())
    for k, v in timing.items():
        print(f"{k:<22} {v:.2f}")
    if args.report:
        # timing is not reproducible, so it stays out of the report proper
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        if timing:
            Path(str(args.report) + ".timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtitrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    cache = dict(default=os.environ.get("RTI_CACHE_DIR"), help="projection operator cache directory")

    s = sub.add_parser("simulate", help="write a synthetic trace, calibration trace and ground truth")
    s.add_argument("preset", nargs="?", help=f"one of: {', '.join(PRESETS)}")
    s.add_argument("--scenario", help="YAML scenario file instead of a preset")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--bidirectional", action="store_true", help="write both link directions")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="build a calibration profile from an empty-area trace")
    c.add_argument("trace")
    c.add_argument("--config", required=True)
    c.add_argument("-o", "--out", required=True, help="profile file (JSON)")
    c.add_argument("--cache-dir", **cache)
    c.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("track", help="run the tracker over a trace")
    t.add_argument("trace")
    t.add_argument("--config", required=True)
    t.add_argument("--profile", required=True)
    t.add_argument("--assoc", choices=("gnn", "snn"))
    t.add_argument("--dump-images", metavar="FILE", help="binary dump of denoised images")
    t.add_argument("-o", "--out", required=True, help="track log (JSON lines)")
    t.add_argument("--cache-dir", **cache)
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score a track log against ground truth")
    e.add_argument("log")
    e.add_argument("truth")
    e.add_argument("--config", help="for the OSPA cut-offs and q")
    e.add_argument("--report", help="machine-readable JSON report")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    level = os.environ.get("RTI_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rtitrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level report
        log.debug("failure", exc_info=True)
        print(f"rtitrack {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
