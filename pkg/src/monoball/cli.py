"""Command-line entry points: track, simulate, eval, sweep.

Exit codes: 0 success, 2 unusable input (parse/config errors), 3 tracking
could not continue (beam extinct and reseeding failed).  Set MONOBALL_LOG
to a logging level name (e.g. DEBUG) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time

from . import streams
from .beam import BallTracker, BeamExtinct, EmptyFrame
from .evaluate import DEFAULT_EVENT_WINDOW, evaluate_records, measure_throughput_latency
from .simulate import ConfigInvalid, simulate, replay_to_stream
from .streams import ConfigError, ParseError

logger = logging.getLogger("monoball")

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_LOST_TRACK = 3


def _setup_logging():
    level = os.environ.get("MONOBALL_LOG", "WARNING").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load(args) -> tuple:
    params, sim_config = streams.load_config(getattr(args, "config", None))
    updates = {}
    if getattr(args, "lag", None) is not None:
        updates["lag"] = args.lag
    if getattr(args, "beam", None) is not None:
        updates["beam_width"] = args.beam
    if updates:
        params = dataclasses.replace(params, **updates)
    if getattr(args, "seed", None) is not None:
        sim_config = dataclasses.replace(sim_config, seed=args.seed)
    return params, sim_config


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def cmd_track(args) -> int:
    params, _ = _load(args)
    in_fh = sys.stdin if args.input == "-" else open(args.input, "r", encoding="utf-8")
    out_fh, close_out = _open_out(args.output)
    tracker = BallTracker(params)
    try:
        for obs in streams.read_frames(in_fh):
            for rec in tracker.step(obs):
                out_fh.write(streams.record_to_line(rec) + "\n")
        for rec in tracker.flush(mark_final=False):
            out_fh.write(streams.record_to_line(rec) + "\n")
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (BeamExtinct, EmptyFrame) as exc:
        print(f"error: lost track: {exc}", file=sys.stderr)
        return EXIT_LOST_TRACK
    finally:
        if in_fh is not sys.stdin:
            in_fh.close()
        if close_out:
            out_fh.close()
        else:
            out_fh.flush()
    if tracker.discontinuities:
        logger.warning("track had %d discontinuities", len(tracker.discontinuities))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        params, sim_config = _load(args)
        if args.frames is not None:
            sim_config = dataclasses.replace(sim_config, duration=args.frames)
        gt, obs = simulate(sim_config)
    except (ConfigError, ConfigInvalid, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    stream_text, gt_text = replay_to_stream(gt, obs)
    out_fh, close_out = _open_out(args.output)
    out_fh.write(stream_text)
    if close_out:
        out_fh.close()
    gt_path = args.gt_output or ((args.output or "match") + ".gt.jsonl")
    with open(gt_path, "w", encoding="utf-8") as fh:
        fh.write(gt_text)
    logger.info("simulated %d frames, %d kicks, %d out-of-play events",
                len(gt.frames), len(gt.kick_events), len(gt.oop_events))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        with open(args.pred, "r", encoding="utf-8") as fh:
            pred = streams.read_records(fh)
        with open(args.gt, "r", encoding="utf-8") as fh:
            gt = streams.read_ground_truth(fh)
        report = evaluate_records(pred, gt, window=args.window)
    except (ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    print(report.as_text())
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        lags = [int(v) for v in args.lags.split(",") if v.strip()]
    except ValueError:
        print(f"error: bad --lags {args.lags!r}", file=sys.stderr)
        return EXIT_BAD_INPUT
    params, _ = _load(args)
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            frames = list(streams.read_frames(fh))
        with open(args.gt, "r", encoding="utf-8") as fh:
            gt = streams.read_ground_truth(fh)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    rows = []
    for lag in lags:
        p = dataclasses.replace(params, lag=lag)
        try:
            result = measure_throughput_latency(frames, p)
        except (BeamExtinct, EmptyFrame) as exc:
            print(f"error: lost track at lag {lag}: {exc}", file=sys.stderr)
            return EXIT_LOST_TRACK
        report = evaluate_records(result.records, gt, window=args.window)
        report.throughput_fps = result.throughput_fps
        report.latency_frames = result.latency_frames
        rows.append((lag, report))

    thresholds = sorted(rows[0][1].accuracy_at)
    header = ["lag", "latency"] + [f"acc@{d:g}" for d in thresholds] + ["f1_kick", "f1_oop", "fps"]
    print("  ".join(f"{h:>8}" for h in header))
    for lag, rep in rows:
        cells = [f"{lag:>8}", f"{rep.latency_frames:>8}"]
        cells += [f"{rep.accuracy_at[d]:>8.3f}" for d in thresholds]
        cells += [f"{rep.f1_kick:>8.3f}", f"{rep.f1_oop:>8.3f}", f"{rep.throughput_fps:>8.1f}"]
        print("  ".join(cells))

    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for lag, rep in rows:
                vals = [str(lag), str(rep.latency_frames)]
                vals += [repr(rep.accuracy_at[d]) for d in thresholds]
                vals += [repr(rep.f1_kick), repr(rep.f1_oop), f"{rep.throughput_fps:.3f}"]
                fh.write(",".join(vals) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="monoball",
                                 description="3D ball tracking from a single calibrated camera")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track a frame stream, write trajectory records")
    p.add_argument("input", help="frame stream path, or - for stdin")
    p.add_argument("--config", default=None)
    p.add_argument("--lag", type=int, default=None, help="soft window, frames")
    p.add_argument("--beam", type=int, default=None, help="beam width K")
    p.add_argument("--output", default=None, help="trajectory output path (default stdout)")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("simulate", help="generate a synthetic match stream + ground truth")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--frames", type=int, default=None, help="override clip length")
    p.add_argument("--output", default=None, help="frame stream output path")
    p.add_argument("--gt-output", default=None, help="ground-truth sidecar path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="score a trajectory against ground truth")
    p.add_argument("pred", help="trajectory records path")
    p.add_argument("gt", help="ground-truth sidecar path")
    p.add_argument("--window", type=int, default=DEFAULT_EVENT_WINDOW,
                   help="event tolerance, frames")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run track+eval across several lag settings")
    p.add_argument("input", help="frame stream path")
    p.add_argument("gt", help="ground-truth sidecar path")
    p.add_argument("--lags", default="1,10,25,50")
    p.add_argument("--config", default=None)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--window", type=int, default=DEFAULT_EVENT_WINDOW)
    p.add_argument("--csv", default=None, help="write a plot-ready CSV here")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConfigInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
