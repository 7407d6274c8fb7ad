"""Tracking metrics: thresholded position accuracy, event F1, throughput, latency."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .beam import BallTracker, TrajectoryRecord
from .simulate import GroundTruth
from .state import FrameObservations, Mode, ModelParams

DEFAULT_THRESHOLDS = (0.5, 1.0, 2.0, 4.0, 8.0)  # meters
DEFAULT_EVENT_WINDOW = 12  # frames


class RangeMismatch(ValueError):
    pass


@dataclass
class EvalReport:
    accuracy_at: dict[float, float]
    f1_kick: float
    f1_oop: float
    throughput_fps: float = 0.0
    latency_frames: int = 0

    def as_text(self) -> str:
        lines = [f"accuracy@{d:g} = {v:.4f}" for d, v in sorted(self.accuracy_at.items())]
        lines.append(f"f1_kick = {self.f1_kick:.4f}")
        lines.append(f"f1_oop = {self.f1_oop:.4f}")
        if self.throughput_fps:
            lines.append(f"throughput_fps = {self.throughput_fps:.1f}")
            lines.append(f"latency_frames = {self.latency_frames}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            **{f"accuracy@{d:g}": v for d, v in sorted(self.accuracy_at.items())},
            "f1_kick": self.f1_kick,
            "f1_oop": self.f1_oop,
            "throughput_fps": self.throughput_fps,
            "latency_frames": self.latency_frames,
        }


def accuracy_at(pred: list[TrajectoryRecord], gt: GroundTruth, d: float) -> float:
    """Fraction of frames with positional error <= d.

    Frames without a prediction count as errors; frames where the ball is
    out of play are excluded (no meaningful position is defined there).
    """
    if len(gt.frames) == 0:
        raise RangeMismatch("empty ground truth")
    lo, hi = int(gt.frames[0]), int(gt.frames[-1])
    if pred:
        frames = [r.frame for r in pred]
        if min(frames) != lo or max(frames) != hi:
            raise RangeMismatch(
                f"prediction frames [{min(frames)}, {max(frames)}] vs truth [{lo}, {hi}]"
            )
    by_frame = {r.frame: r for r in pred}
    total = 0
    hit = 0
    for i, f in enumerate(gt.frames):
        if Mode(int(gt.modes[i])) == Mode.OUT:
            continue
        total += 1
        rec = by_frame.get(int(f))
        if rec is None:
            continue
        err = float(np.linalg.norm(rec.position - gt.positions[i]))
        if err <= d:
            hit += 1
    return hit / total if total else 1.0


def event_f1(pred_events: list[int], gt_events: list[int], window: int = DEFAULT_EVENT_WINDOW) -> float:
    """F1 of one-to-one greedy matching within +/- window frames."""
    if window < 0:
        raise ValueError("window must be nonnegative")
    if not pred_events and not gt_events:
        return 1.0
    if not pred_events or not gt_events:
        return 0.0
    gt_sorted = sorted(gt_events)
    used = [False] * len(gt_sorted)
    tp = 0
    for p in sorted(pred_events):
        for i, g in enumerate(gt_sorted):
            if not used[i] and abs(p - g) <= window:
                used[i] = True
                tp += 1
                break
    precision = tp / len(pred_events)
    recall = tp / len(gt_events)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def extract_pred_events(pred: list[TrajectoryRecord]) -> tuple[list[int], list[int]]:
    """(kick frames, out-of-play frames) from mode boundaries of a trajectory."""
    ordered = sorted(pred, key=lambda r: r.frame)
    kicks: list[int] = []
    oops: list[int] = []
    for a, b in zip(ordered, ordered[1:]):
        if a.mode == Mode.POSSESSION and b.mode == Mode.WAITING:
            kicks.append(b.frame)
        if a.mode != Mode.OUT and b.mode == Mode.OUT:
            oops.append(b.frame)
    return kicks, oops


def evaluate_records(
    pred: list[TrajectoryRecord],
    gt: GroundTruth,
    thresholds=DEFAULT_THRESHOLDS,
    window: int = DEFAULT_EVENT_WINDOW,
) -> EvalReport:
    kicks, oops = extract_pred_events(pred)
    return EvalReport(
        accuracy_at={d: accuracy_at(pred, gt, d) for d in thresholds},
        f1_kick=event_f1(kicks, gt.kick_events, window),
        f1_oop=event_f1(oops, gt.oop_events, window),
    )


@dataclass
class ThroughputResult:
    throughput_fps: float
    latency_frames: int
    mean_wall_latency_s: float
    records: list[TrajectoryRecord] = field(repr=False, default_factory=list)


def measure_throughput_latency(
    frames: list[FrameObservations],
    params: ModelParams,
    clock=time.perf_counter,
) -> ThroughputResult:
    """Run the tracker over a clip and measure frames/second.

    The structural latency of the fixed-lag extractor is lag + 1 frames:
    the estimate for frame t is emitted while frame t + lag is processed.
    Wall-clock latency per finalized frame is also measured against an
    arrival clock that assumes frames arrive at the configured rate.
    """
    tracker = BallTracker(params)
    t0 = clock()
    waits = []
    n = 0
    for obs in frames:
        out = tracker.step(obs)
        now = clock()
        n += 1
        for rec in out:
            arrival = t0 + (rec.frame - frames[0].frame + 1) / params.fps
            waits.append(max(0.0, now - arrival))
    elapsed = clock() - t0
    records = list(tracker.committed)
    records.extend(tracker.flush(mark_final=False))
    return ThroughputResult(
        throughput_fps=n / elapsed if elapsed > 0 else float("inf"),
        latency_frames=params.lag + 1,
        mean_wall_latency_s=float(np.mean(waits)) if waits else 0.0,
        records=records,
    )
