"""Synthetic match generator: ground-truth ball motion plus rendered observations.

The generated match alternates possession spells (ball glued to a player),
kicks into ballistic flight with bounces, captures by the nearest player,
and occasional out-of-play spells with a throw-in recovery.  Observations
are exact pinhole projections of the ball corrupted by optional pixel
noise, i.i.d. dropout, geometric occlusion by player silhouettes, and
uniform false positives.  Everything is a deterministic function of the
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import KinematicState, PhysicsParams, extrapolate
from .geometry import CameraCalibration, PitchGeometry, look_at_calibration, project_many
from .state import FrameObservations, Mode

PLAYER_HEIGHT = 1.8  # meters, occlusion silhouette height
MIN_FLIGHT_FRAMES = 5  # a kicked ball cannot be re-captured sooner
CHASE_SPEED = 6.5  # m/s, pursuit speed toward a loose ball
CAPTURE_FRACTION = 0.75  # capture radius as a fraction of the possession threshold


class ConfigInvalid(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


def default_camera(pitch: PitchGeometry | None = None,
                   image_size: tuple[float, float] = (1920.0, 1080.0),
                   height: float = 18.0,
                   setback: float = 18.0,
                   focal: float = 700.0) -> CameraCalibration:
    """Broadcast-style camera behind a touchline, covering the whole pitch."""
    pitch = pitch or PitchGeometry()
    pos = (0.0, -(pitch.width / 2 + setback), height)
    return look_at_calibration(pos, (0.0, 0.0, 0.0), focal, image_size)


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    duration: int = 2500  # frames
    fps: float = 25.0
    calib: CameraCalibration = field(default_factory=default_camera)
    pitch: PitchGeometry = field(default_factory=PitchGeometry)
    n_players: int = 22
    occlusion_prob: float = 0.0  # i.i.d. detection dropout per airborne frame
    pixel_noise_sigma: float = 0.0  # pixels
    kick_rate: float = 20.0  # expected kicks per minute; used when possession_dwell <= 0
    possession_dwell: float = 50.0  # mean possession length, frames
    out_of_play_prob: float = 0.1  # chance a kick is aimed beyond the boundary
    false_positive_rate: float = 0.0  # expected spurious detections per frame
    image_size: tuple[float, float] = (1920.0, 1080.0)
    occlusion_radius_px: float = 12.0  # silhouette half-width for geometric occlusion
    player_speed: float = 2.5  # m/s, ordinary movement
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    possession_threshold: float = 1.5  # must match the filter's threshold to stay trackable

    def __post_init__(self):
        for name in ("occlusion_prob", "out_of_play_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigInvalid(f"{name} must be in [0, 1], got {v}")
        if self.duration < 1:
            raise ConfigInvalid("duration must be >= 1")
        if self.fps <= 0:
            raise ConfigInvalid("fps must be positive")
        if self.n_players < 1:
            raise ConfigInvalid("need at least one player")
        if self.pixel_noise_sigma < 0 or self.false_positive_rate < 0:
            raise ConfigInvalid("noise rates must be nonnegative")
        if self.kick_rate < 0:
            raise ConfigInvalid("kick_rate must be nonnegative")


@dataclass
class GroundTruth:
    """Per-frame truth plus event stamps; frames are 1-based and contiguous."""

    frames: np.ndarray  # (T,)
    positions: np.ndarray  # (T, 3)
    modes: np.ndarray  # (T,) Mode values
    kick_events: list[int]
    oop_events: list[int]
    # frames where a detection would be emitted were it not for the i.i.d.
    # dropout; the denominator for occlusion-rate checks
    unoccluded: np.ndarray  # (T,) bool

    def mode_at(self, frame: int) -> Mode:
        return Mode(int(self.modes[frame - int(self.frames[0])]))


def _point_segment_dist2(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared distances from pixel p to 2D segments a[i]->b[i]."""
    ab = b - a
    denom = (ab * ab).sum(axis=1)
    t = np.zeros(len(a))
    nz = denom > 0
    t[nz] = ((p - a[nz]) * ab[nz]).sum(axis=1) / denom[nz]
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, None] * ab
    d = p - closest
    return (d * d).sum(axis=1)


class _MatchState:
    POSSESSED, FLIGHT, OUT = range(3)


def simulate(config: SimConfig) -> tuple[GroundTruth, list[FrameObservations]]:
    """Generate a match; returns ground truth and per-frame observations."""
    rng = np.random.default_rng(config.seed)
    pitch = config.pitch
    phys = config.physics
    dt = 1.0 / config.fps
    br = phys.ball_radius
    capture_radius = CAPTURE_FRACTION * config.possession_threshold
    half_l, half_w = pitch.length / 2, pitch.width / 2
    margin = 1.0
    img_w, img_h = config.image_size
    dwell_mean = config.possession_dwell
    if dwell_mean <= 0:
        # fall back to the kick-rate target: one cycle per 60/kick_rate seconds,
        # roughly one second of which is flight
        dwell_mean = max(2.0, 60.0 / max(config.kick_rate, 1e-6) * config.fps - config.fps)

    players = np.stack(
        [
            rng.uniform(-half_l + 2, half_l - 2, config.n_players),
            rng.uniform(-half_w + 2, half_w - 2, config.n_players),
        ],
        axis=1,
    )
    pvel = np.zeros_like(players)

    def draw_dwell() -> int:
        return max(2, int(round(rng.exponential(dwell_mean))))

    phase = _MatchState.POSSESSED
    owner = int(rng.integers(config.n_players))
    # kickoff: the first owner is on the centre spot and everyone else is
    # outside the centre circle, as in a real restart
    players[owner] = (0.0, 0.0)
    for i in range(config.n_players):
        if i == owner:
            continue
        r = math.hypot(players[i, 0], players[i, 1])
        if r < 9.15:
            scale = (9.15 + rng.uniform(0.5, 4.0)) / max(r, 1e-6)
            players[i] = np.clip(
                players[i] * scale,
                [-half_l + 0.5, -half_w + 0.5],
                [half_l - 0.5, half_w - 0.5],
            )
    # the kickoff comes early so the match starts with an identifiable ball
    dwell = int(rng.integers(3, max(4, int(0.5 * config.fps))))
    kin: KinematicState | None = None
    flight_frames = 0
    seen_since_kick = False
    rest_pos: np.ndarray | None = None
    thrower = -1

    positions = np.zeros((config.duration, 3))
    modes = np.zeros(config.duration, dtype=np.int64)
    unoccluded = np.zeros(config.duration, dtype=bool)
    kicks: list[int] = []
    oops: list[int] = []
    observations: list[FrameObservations] = []
    prev_mode: Mode | None = None

    for t in range(1, config.duration + 1):
        # --- players: bounded random walk, pursuit overrides ---
        pvel = 0.85 * pvel + rng.normal(0.0, config.player_speed * 0.6, players.shape)
        speed = np.sqrt((pvel * pvel).sum(axis=1))
        fast = speed > config.player_speed
        pvel[fast] *= (config.player_speed / speed[fast])[:, None]
        chase_target = None
        if phase == _MatchState.FLIGHT and flight_frames > 10 and kin.position[2] < 2.0:
            chase_target = kin.position[:2]
        elif phase == _MatchState.OUT:
            chase_target = rest_pos[:2]
        if chase_target is not None:
            ci = thrower if phase == _MatchState.OUT else int(
                np.argmin(((players - chase_target) ** 2).sum(axis=1))
            )
            d = chase_target - players[ci]
            n = math.hypot(d[0], d[1])
            if n > 1e-9:
                pvel[ci] = d / n * CHASE_SPEED
        players = players + pvel * dt
        np.clip(players[:, 0], -half_l + 0.5, half_l - 0.5, out=players[:, 0])
        np.clip(players[:, 1], -half_w + 0.5, half_w - 0.5, out=players[:, 1])

        # --- ball ---
        start_flight = False
        was_flight = phase == _MatchState.FLIGHT
        if phase == _MatchState.POSSESSED:
            pos = np.array([players[owner, 0], players[owner, 1], br])
            mode = Mode.POSSESSION
            dwell -= 1
            if dwell <= 0:
                start_flight = True
        elif phase == _MatchState.FLIGHT:
            kin = extrapolate(kin, dt, phys)
            flight_frames += 1
            pos = kin.position.copy()
            mode = Mode.JUMPING  # provisional; refined below
        else:
            pos = rest_pos.copy()
            mode = Mode.OUT

        # --- visibility of an airborne ball ---
        detectable = False
        if phase == _MatchState.FLIGHT:
            entities = np.concatenate([pos[None, :],
                                       np.concatenate([players, np.zeros((len(players), 1))], axis=1),
                                       np.concatenate([players, np.full((len(players), 1), PLAYER_HEIGHT)], axis=1)])
            px, ok = project_many(entities, config.calib)
            ball_px = px[0]
            in_image = bool(ok[0]) and 0 <= ball_px[0] < img_w and 0 <= ball_px[1] < img_h
            geo_occluded = False
            if in_image and config.occlusion_radius_px > 0:
                feet = px[1 : 1 + len(players)]
                heads = px[1 + len(players) :]
                both = ok[1 : 1 + len(players)] & ok[1 + len(players) :]
                if both.any():
                    d2 = _point_segment_dist2(ball_px, feet[both], heads[both])
                    geo_occluded = bool((d2 < config.occlusion_radius_px ** 2).any())
            # the frame on which the ball leaves the foot is never cleanly
            # detected (it is still blurred into the kicker's silhouette)
            visible_possible = in_image and not geo_occluded and flight_frames >= 2
            unoccluded[t - 1] = visible_possible
            if visible_possible:
                detectable = config.occlusion_prob <= 0 or rng.random() >= config.occlusion_prob

            # mode labeling: the first flight frame is always the buffer state;
            # afterwards the ball stays buffered until its first detection
            if flight_frames == 1:
                mode = Mode.WAITING
            elif not seen_since_kick:
                if detectable:
                    seen_since_kick = True
                    mode = Mode.JUMPING
                else:
                    mode = Mode.WAITING

            # leaving the pitch (never on the first flight frame, so the
            # buffer state always exists between possession and flight)
            if flight_frames >= 2 and not pitch.contains(pos[0], pos[1]):
                mode = Mode.JUMPING  # the crossing frame is airborne, out-of-play starts next
                rest_pos = np.array(
                    [
                        float(np.clip(pos[0], -half_l - margin, half_l + margin)),
                        float(np.clip(pos[1], -half_w - margin, half_w + margin)),
                        br,
                    ]
                )
                thrower = int(np.argmin(((players - rest_pos[None, :2]) ** 2).sum(axis=1)))
                phase = _MatchState.OUT
            elif flight_frames >= MIN_FLIGHT_FRAMES:
                d2p = (players[:, 0] - pos[0]) ** 2 + (players[:, 1] - pos[1]) ** 2 + (br - pos[2]) ** 2
                ci = int(np.argmin(d2p))
                if d2p[ci] < capture_radius ** 2:
                    mode = Mode.JUMPING  # arrival frame is airborne even if unseen
                    phase = _MatchState.POSSESSED
                    owner = ci
                    dwell = draw_dwell()
        elif phase == _MatchState.OUT:
            d = players[thrower] - rest_pos[:2]
            if d[0] * d[0] + d[1] * d[1] < capture_radius ** 2:
                phase = _MatchState.POSSESSED
                owner = thrower
                dwell = draw_dwell()
                # ball stays out this frame; possession resumes next frame

        if start_flight:
            kicker_xy = players[owner].copy()
            speed = rng.uniform(8.0, 30.0)
            elev = math.radians(rng.uniform(10.0, 45.0))
            if rng.random() < config.out_of_play_prob:
                side = rng.integers(4)
                tx = rng.uniform(-half_l, half_l)
                ty = rng.uniform(-half_w, half_w)
                extra = rng.uniform(3.0, 10.0)
                if side == 0:
                    tx = half_l + extra
                elif side == 1:
                    tx = -half_l - extra
                elif side == 2:
                    ty = half_w + extra
                else:
                    ty = -half_w - extra
                target = np.array([tx, ty])
            else:
                target = np.array(
                    [rng.uniform(-half_l + 3, half_l - 3), rng.uniform(-half_w + 3, half_w - 3)]
                )
            d = target - kicker_xy
            n = math.hypot(d[0], d[1])
            d = d / n if n > 1e-9 else np.array([1.0, 0.0])
            v = np.array(
                [speed * math.cos(elev) * d[0], speed * math.cos(elev) * d[1], speed * math.sin(elev)]
            )
            kin = KinematicState(np.array([kicker_xy[0], kicker_xy[1], br]), v)
            phase = _MatchState.FLIGHT
            flight_frames = 0
            seen_since_kick = False

        positions[t - 1] = pos
        modes[t - 1] = int(mode)
        if mode == Mode.WAITING and prev_mode == Mode.POSSESSION:
            kicks.append(t)
        if mode == Mode.OUT and prev_mode != Mode.OUT:
            oops.append(t)
        prev_mode = mode

        # --- observations ---
        dets: list[np.ndarray] = []
        if was_flight and detectable:
            ball_uv = ball_px.copy()
            if config.pixel_noise_sigma > 0:
                ball_uv = ball_uv + rng.normal(0.0, config.pixel_noise_sigma, 2)
            dets.append(ball_uv)
        if config.false_positive_rate > 0:
            for _ in range(rng.poisson(config.false_positive_rate)):
                dets.append(np.array([rng.uniform(0, img_w), rng.uniform(0, img_h)]))
        observations.append(
            FrameObservations(
                frame=t,
                detections=np.array(dets).reshape(-1, 2),
                players=players.copy(),
                calib=config.calib,
            )
        )

    gt = GroundTruth(
        frames=np.arange(1, config.duration + 1),
        positions=positions,
        modes=modes,
        kick_events=kicks,
        oop_events=oops,
        unoccluded=unoccluded,
    )
    return gt, observations


def replay_to_stream(gt: GroundTruth, obs: list[FrameObservations]) -> tuple[str, str]:
    """Serialize a simulated match to (frame stream text, ground-truth sidecar text)."""
    if len(gt.frames) != len(obs):
        raise LengthMismatch(f"{len(gt.frames)} truth frames vs {len(obs)} observation frames")
    from . import streams

    return streams.dump_frames(obs), streams.dump_ground_truth(gt)
