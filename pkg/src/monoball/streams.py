"""Line-delimited stream formats and the flat config file.

Frame stream: one JSON object per line with keys frame, detections
([[u, v], ...] pixels), players ([[x, y], ...] meters) and calib
({"K": [9 row-major], "R": [9], "T": [3]}).  Calibration may be omitted
on a frame, meaning "unchanged since the last frame"; the first frame
must carry it.  Frame indices must increase by exactly one.

Trajectory stream: one whitespace-separated record per line:
    frame x y z mode log_weight final|soft

Ground-truth sidecar: one JSON line {"type": "events", ...} followed by
{"type": "frame", ...} lines.

Config file: `key = value` lines with dotted keys, # comments allowed;
unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from typing import Iterable, Iterator, TextIO

import numpy as np

from .beam import TrajectoryRecord
from .dynamics import PhysicsParams
from .geometry import CameraCalibration, PitchGeometry
from .simulate import GroundTruth, SimConfig, default_camera
from .state import (
    LETTER_MODES,
    MODE_LETTERS,
    ALLOWED_EDGES,
    Mode,
    ModelParams,
    TransitionMatrix,
    FrameObservations,
    default_params,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# --------------------------------------------------------------------------
# frame streams
# --------------------------------------------------------------------------

def _calib_to_json(calib: CameraCalibration) -> dict:
    return {
        "K": [float(v) for v in calib.intrinsics.ravel()],
        "R": [float(v) for v in calib.rotation.ravel()],
        "T": [float(v) for v in calib.translation],
    }


def _calib_from_json(d: dict) -> CameraCalibration:
    return CameraCalibration(
        intrinsics=np.array(d["K"], dtype=np.float64).reshape(3, 3),
        rotation=np.array(d["R"], dtype=np.float64).reshape(3, 3),
        translation=np.array(d["T"], dtype=np.float64).reshape(3),
    )


def frame_to_line(obs: FrameObservations, with_calib: bool) -> str:
    rec = {
        "frame": obs.frame,
        "detections": [[float(u), float(v)] for u, v in obs.detections],
        "players": [[float(x), float(y)] for x, y in obs.players],
    }
    if with_calib:
        rec["calib"] = _calib_to_json(obs.calib)
    return json.dumps(rec, separators=(",", ":"))


def dump_frames(frames: Iterable[FrameObservations]) -> str:
    """Serialize frames, repeating the calibration only when it changes."""
    lines = []
    last: CameraCalibration | None = None
    for obs in frames:
        same = last is not None and (
            np.array_equal(last.intrinsics, obs.calib.intrinsics)
            and np.array_equal(last.rotation, obs.calib.rotation)
            and np.array_equal(last.translation, obs.calib.translation)
        )
        lines.append(frame_to_line(obs, with_calib=not same))
        last = obs.calib
    return "\n".join(lines) + ("\n" if lines else "")


def read_frames(fh: TextIO) -> Iterator[FrameObservations]:
    """Parse a frame stream incrementally; raises ParseError with the line number."""
    calib: CameraCalibration | None = None
    last_frame: int | None = None
    for ln, raw in enumerate(fh, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON ({exc.msg})", ln) from exc
        try:
            frame = int(rec["frame"])
            dets = np.array(rec.get("detections", []), dtype=np.float64).reshape(-1, 2)
            players = np.array(rec.get("players", []), dtype=np.float64).reshape(-1, 2)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad frame record ({exc})", ln) from exc
        if "calib" in rec:
            try:
                calib = _calib_from_json(rec["calib"])
            except Exception as exc:
                raise ParseError(f"bad calibration ({exc})", ln) from exc
        if calib is None:
            raise ParseError("first frame must carry calibration", ln)
        if last_frame is not None and frame != last_frame + 1:
            raise ParseError(f"frame indices must increase by 1 (got {frame} after {last_frame})", ln)
        last_frame = frame
        yield FrameObservations(frame=frame, detections=dets, players=players, calib=calib)


# --------------------------------------------------------------------------
# trajectory records
# --------------------------------------------------------------------------

def record_to_line(rec: TrajectoryRecord) -> str:
    x, y, z = rec.position
    flag = "final" if rec.finalized else "soft"
    return f"{rec.frame} {x!r} {y!r} {z!r} {MODE_LETTERS[rec.mode]} {rec.log_weight!r} {flag}"


def read_records(fh: TextIO) -> list[TrajectoryRecord]:
    out = []
    for ln, raw in enumerate(fh, start=1):
        raw = raw.strip()
        if not raw:
            continue
        parts = raw.split()
        if len(parts) != 7 or parts[4] not in LETTER_MODES or parts[6] not in ("final", "soft"):
            raise ParseError("bad trajectory record", ln)
        try:
            out.append(
                TrajectoryRecord(
                    frame=int(parts[0]),
                    position=np.array([float(parts[1]), float(parts[2]), float(parts[3])]),
                    mode=LETTER_MODES[parts[4]],
                    log_weight=float(parts[5]),
                    finalized=parts[6] == "final",
                )
            )
        except ValueError as exc:
            raise ParseError(f"bad trajectory record ({exc})", ln) from exc
    return out


# --------------------------------------------------------------------------
# ground-truth sidecar
# --------------------------------------------------------------------------

def dump_ground_truth(gt: GroundTruth) -> str:
    lines = [
        json.dumps(
            {"type": "events", "kick": list(map(int, gt.kick_events)),
             "oop": list(map(int, gt.oop_events))},
            separators=(",", ":"),
        )
    ]
    for i, f in enumerate(gt.frames):
        lines.append(
            json.dumps(
                {
                    "type": "frame",
                    "frame": int(f),
                    "position": [float(v) for v in gt.positions[i]],
                    "mode": MODE_LETTERS[Mode(int(gt.modes[i]))],
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"


def read_ground_truth(fh: TextIO) -> GroundTruth:
    kicks: list[int] = []
    oops: list[int] = []
    frames: list[int] = []
    positions: list[list[float]] = []
    modes: list[int] = []
    for ln, raw in enumerate(fh, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON ({exc.msg})", ln) from exc
        kind = rec.get("type")
        if kind == "events":
            kicks = [int(v) for v in rec.get("kick", [])]
            oops = [int(v) for v in rec.get("oop", [])]
        elif kind == "frame":
            frames.append(int(rec["frame"]))
            positions.append([float(v) for v in rec["position"]])
            modes.append(int(LETTER_MODES[rec["mode"]]))
        else:
            raise ParseError(f"unknown record type {kind!r}", ln)
    return GroundTruth(
        frames=np.array(frames, dtype=np.int64),
        positions=np.array(positions, dtype=np.float64).reshape(-1, 3),
        modes=np.array(modes, dtype=np.int64),
        kick_events=kicks,
        oop_events=oops,
        unoccluded=np.zeros(len(frames), dtype=bool),
    )


# --------------------------------------------------------------------------
# config file
# --------------------------------------------------------------------------

_EDGE_KEYS = {
    f"transition.{MODE_LETTERS[a]}_{MODE_LETTERS[b]}".lower(): (a, b) for a, b in ALLOWED_EDGES
}

_FLOAT_RANGES = {
    # key: (min, max, min_exclusive)
    "possession_threshold": (0.0, math.inf, True),
    "sigma_v": (0.0, math.inf, False),
    "sigma_g": (0.0, math.inf, True),
    "logp_invisible": (-math.inf, 0.0, False),
    "ray_step": (0.0, math.inf, True),
    "fps": (0.0, math.inf, True),
    "max_kick_speed": (0.0, math.inf, True),
    "logp_unclaimed": (-math.inf, 0.0, False),
    "physics.gravity": (0.0, math.inf, True),
    "physics.restitution": (0.0, 1.0, False),
    "physics.ground_friction": (0.0, 1.0, False),
    "physics.ball_radius": (0.0, math.inf, False),
    "pitch.length": (0.0, math.inf, True),
    "pitch.width": (0.0, math.inf, True),
    "sim.occlusion_prob": (0.0, 1.0, False),
    "sim.pixel_noise_sigma": (0.0, math.inf, False),
    "sim.kick_rate": (0.0, math.inf, False),
    "sim.possession_dwell": (-math.inf, math.inf, False),
    "sim.out_of_play_prob": (0.0, 1.0, False),
    "sim.false_positive_rate": (0.0, math.inf, False),
    "sim.occlusion_radius_px": (0.0, math.inf, False),
    "sim.player_speed": (0.0, math.inf, True),
    "sim.camera_height": (0.0, math.inf, True),
    "sim.camera_setback": (0.0, math.inf, False),
    "sim.camera_focal": (0.0, math.inf, True),
    "sim.image_width": (0.0, math.inf, True),
    "sim.image_height": (0.0, math.inf, True),
}

_INT_RANGES = {
    "beam_width": (1, None),
    "lag": (0, None),
    "sim.seed": (None, None),
    "sim.duration": (1, None),
    "sim.n_players": (1, None),
}

KNOWN_KEYS = set(_FLOAT_RANGES) | set(_INT_RANGES) | set(_EDGE_KEYS)


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        try:
            num = float(val)
        except ValueError as exc:
            raise ConfigError(f"line {ln}: bad number {val!r} for {key}") from exc
        if key in _INT_RANGES:
            if num != int(num):
                raise ConfigError(f"line {ln}: {key} must be an integer")
            lo, hi = _INT_RANGES[key]
            if (lo is not None and num < lo) or (hi is not None and num > hi):
                raise ConfigError(f"line {ln}: {key}={val} out of range")
        elif key in _FLOAT_RANGES:
            lo, hi, lo_ex = _FLOAT_RANGES[key]
            if num < lo or num > hi or (lo_ex and num == lo):
                raise ConfigError(f"line {ln}: {key}={val} out of range")
        else:  # transition probability
            if not 0.0 <= num <= 1.0:
                raise ConfigError(f"line {ln}: {key}={val} is not a probability")
        values[key] = num
    return values


def build_params(values: dict[str, float], base: ModelParams | None = None) -> ModelParams:
    params = base or default_params()
    edge_probs = {edge: math.exp(params.transition.logp[edge]) for edge in ALLOWED_EDGES}
    edited = False
    for key, edge in _EDGE_KEYS.items():
        if key in values:
            edge_probs[edge] = values[key]
            edited = True
    transition = TransitionMatrix.from_probs(edge_probs) if edited else params.transition

    physics = PhysicsParams(
        gravity=values.get("physics.gravity", params.physics.gravity),
        restitution=values.get("physics.restitution", params.physics.restitution),
        ground_friction=values.get("physics.ground_friction", params.physics.ground_friction),
        ball_radius=values.get("physics.ball_radius", params.physics.ball_radius),
    )
    pitch = PitchGeometry(
        length=values.get("pitch.length", params.pitch.length),
        width=values.get("pitch.width", params.pitch.width),
    )
    return ModelParams(
        transition=transition,
        possession_threshold=values.get("possession_threshold", params.possession_threshold),
        sigma_v=values.get("sigma_v", params.sigma_v),
        sigma_g=values.get("sigma_g", params.sigma_g),
        logp_invisible=values.get("logp_invisible", params.logp_invisible),
        ray_step=values.get("ray_step", params.ray_step),
        beam_width=int(values.get("beam_width", params.beam_width)),
        lag=int(values.get("lag", params.lag)),
        fps=values.get("fps", params.fps),
        max_kick_speed=values.get("max_kick_speed", params.max_kick_speed),
        logp_unclaimed=values.get("logp_unclaimed", params.logp_unclaimed),
        physics=physics,
        pitch=pitch,
    )


def build_sim_config(values: dict[str, float], params: ModelParams) -> SimConfig:
    image_size = (
        values.get("sim.image_width", 1920.0),
        values.get("sim.image_height", 1080.0),
    )
    calib = default_camera(
        pitch=params.pitch,
        image_size=image_size,
        height=values.get("sim.camera_height", 18.0),
        setback=values.get("sim.camera_setback", 18.0),
        focal=values.get("sim.camera_focal", 700.0),
    )
    return SimConfig(
        seed=int(values.get("sim.seed", 0)),
        duration=int(values.get("sim.duration", 2500)),
        fps=values.get("fps", params.fps),
        calib=calib,
        pitch=params.pitch,
        n_players=int(values.get("sim.n_players", 22)),
        occlusion_prob=values.get("sim.occlusion_prob", 0.0),
        pixel_noise_sigma=values.get("sim.pixel_noise_sigma", 0.0),
        kick_rate=values.get("sim.kick_rate", 20.0),
        possession_dwell=values.get("sim.possession_dwell", 50.0),
        out_of_play_prob=values.get("sim.out_of_play_prob", 0.1),
        false_positive_rate=values.get("sim.false_positive_rate", 0.0),
        image_size=image_size,
        occlusion_radius_px=values.get("sim.occlusion_radius_px", 12.0),
        player_speed=values.get("sim.player_speed", 2.5),
        physics=params.physics,
        possession_threshold=params.possession_threshold,
    )


def load_config(path: str | None) -> tuple[ModelParams, SimConfig]:
    values: dict[str, float] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values = parse_config_text(fh.read())
    params = build_params(values)
    return params, build_sim_config(values, params)
