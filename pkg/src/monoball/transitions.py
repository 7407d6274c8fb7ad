"""Candidate generation: all scored descendants of a hypothesis for the next frame.

Each transition family contributes a log-weight increment composed of the
mode-transition term, a motion term and an observation term:

  inherit (OUT->OUT, WAITING->WAITING, JUMPING->OUT, POSSESSION->WAITING):
      position copied, increment is the transition term alone.
  any->POSSESSION: one candidate per player within the possession distance
      threshold; outside the threshold the candidate is impossible and is
      not emitted.
  JUMPING->JUMPING: one undetected child via ballistic extrapolation with
      a fixed per-frame penalty, plus one detected child per ray position,
      scored by an isotropic Gaussian around the extrapolated position.
  WAITING->JUMPING: one child per ray position, velocity recovered from
      the free-flight equation between the kicker and the ray position;
      no motion/observation term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import KinematicState, extrapolate, kick_velocity, propagate_variance
from .geometry import NoGroundIntersection, DegenerateDirection, backproject_ray, discretize_ray
from .state import (
    ALLOWED_EDGES,
    NEG_INF,
    FrameObservations,
    Hypothesis,
    Mode,
    ModelParams,
    transition_logp,
)

# Underflow floor for a single Gaussian log term (IEEE-double exp underflow).
GAUSS_LOG_FLOOR = -745.0

# Variance floor guarding the Gaussian evaluation against a zero variance.
VARIANCE_FLOOR = 1e-12


class IllegalEdge(ValueError):
    pass


@dataclass(frozen=True)
class ScoredCandidate:
    hypothesis: Hypothesis
    delta_logl: float


@dataclass(frozen=True)
class RayGrid:
    """Discretized viewing ray of one detection: points[j] = ground_hit + j*step*up_axis."""

    points: np.ndarray  # (n, 3), ground-first
    ground_hit: np.ndarray  # (3,)
    up_axis: np.ndarray  # (3,), unit vector from ground toward the camera
    step: float


def gen_ray_grids(obs: FrameObservations, params: ModelParams) -> list[RayGrid]:
    """One grid per detection; detections whose rays miss the ground are skipped."""
    grids = []
    for u in obs.detections:
        try:
            ray = backproject_ray(u, obs.calib)
            pts = discretize_ray(ray, params.ray_step)
        except (NoGroundIntersection, DegenerateDirection):
            continue
        hit = pts[0]
        grids.append(
            RayGrid(points=pts, ground_hit=hit, up_axis=-ray.direction, step=params.ray_step)
        )
    return grids


def gen_ray_positions(obs: FrameObservations, params: ModelParams) -> np.ndarray:
    """Union of candidate ball positions over all detections, as an (n, 3) array."""
    grids = gen_ray_grids(obs, params)
    if not grids:
        return np.zeros((0, 3))
    return np.concatenate([g.points for g in grids], axis=0)


def gauss_logpdf(x: np.ndarray, mean: np.ndarray, variance: float) -> float:
    """Isotropic 3D Gaussian log-density, clamped at the underflow floor."""
    var = max(variance, VARIANCE_FLOOR)
    dx = x[0] - mean[0]
    dy = x[1] - mean[1]
    dz = x[2] - mean[2]
    d2 = dx * dx + dy * dy + dz * dz
    return max(GAUSS_LOG_FLOOR, -1.5 * math.log(2.0 * math.pi * var) - 0.5 * d2 / var)


def gauss_logpdf_batch(x: np.ndarray, mean: np.ndarray, variance: np.ndarray) -> np.ndarray:
    """Row-wise gauss_logpdf over (n, 3) arrays; bit-identical to the scalar form."""
    var = np.maximum(variance, VARIANCE_FLOOR)
    dx = x[:, 0] - mean[:, 0]
    dy = x[:, 1] - mean[:, 1]
    dz = x[:, 2] - mean[:, 2]
    d2 = dx * dx + dy * dy + dz * dz
    return np.maximum(GAUSS_LOG_FLOOR, -1.5 * np.log(2.0 * np.pi * var) - 0.5 * d2 / var)


def gen_inherit(h: Hypothesis, to: Mode, params: ModelParams) -> ScoredCandidate:
    """Position-copying transition; the increment is the transition term alone."""
    edge = (h.mode, to)
    if edge not in {
        (Mode.OUT, Mode.OUT),
        (Mode.WAITING, Mode.WAITING),
        (Mode.JUMPING, Mode.OUT),
        (Mode.POSSESSION, Mode.WAITING),
    }:
        raise IllegalEdge(f"{h.mode.name}->{to.name} is not an inherit edge")
    if edge == (Mode.JUMPING, Mode.OUT) and params.pitch.contains(
        float(h.position[0]), float(h.position[1])
    ):
        raise IllegalEdge("airborne ball inside the pitch cannot go out")
    dl = transition_logp(params.transition, h.mode, to)
    if to == Mode.WAITING:
        if h.mode == Mode.POSSESSION:
            kick_frame = h.frame
            kicker = np.array([h.position[0], h.position[1]])
        else:
            kick_frame = h.kick_frame
            kicker = h.kicker_position
        child = Hypothesis(
            frame=h.frame + 1,
            position=h.position,
            mode=Mode.WAITING,
            log_weight=h.log_weight + dl,
            kick_frame=kick_frame,
            kicker_position=kicker,
        )
    else:
        child = Hypothesis(
            frame=h.frame + 1, position=h.position, mode=to, log_weight=h.log_weight + dl
        )
    return ScoredCandidate(hypothesis=child, delta_logl=dl)


def gen_possession(
    h: Hypothesis, obs: FrameObservations, params: ModelParams
) -> list[ScoredCandidate]:
    """One possession candidate per player within the distance threshold.

    The gate is the 3D Euclidean distance, except from the out-of-play
    mode where only the pitch-plane distance counts: a ball that left the
    field at altitude re-enters wherever it crossed, not below that point.
    """
    if (h.mode, Mode.POSSESSION) not in ALLOWED_EDGES:
        raise IllegalEdge(f"{h.mode.name}->POSSESSION")
    dl = transition_logp(params.transition, h.mode, Mode.POSSESSION)
    if dl == NEG_INF:
        return []
    thr2 = params.possession_threshold * params.possession_threshold
    br = params.physics.ball_radius
    out = []
    for idx, g in enumerate(obs.players):
        dx = g[0] - h.position[0]
        dy = g[1] - h.position[1]
        dz = 0.0 if h.mode == Mode.OUT else br - h.position[2]
        if dx * dx + dy * dy + dz * dz < thr2:
            child = Hypothesis(
                frame=h.frame + 1,
                position=np.array([g[0], g[1], br]),
                mode=Mode.POSSESSION,
                log_weight=h.log_weight + dl,
                player_index=idx,
            )
            out.append(ScoredCandidate(hypothesis=child, delta_logl=dl))
    return out


def gen_jump_from_jump(
    h: Hypothesis,
    obs: FrameObservations,
    ray_positions: np.ndarray,
    params: ModelParams,
) -> list[ScoredCandidate]:
    """Airborne continuation: one undetected child plus one child per ray position."""
    if h.mode != Mode.JUMPING:
        raise IllegalEdge(f"{h.mode.name}->JUMPING continuation needs an airborne parent")
    base = transition_logp(params.transition, Mode.JUMPING, Mode.JUMPING)
    if base == NEG_INF:
        return []
    dt = params.dt
    nxt = extrapolate(KinematicState(h.position, h.velocity), dt, params.physics)
    var = propagate_variance(h.variance, dt, params.sigma_v)
    out = []
    dl_inv = base + params.logp_invisible
    if dl_inv > NEG_INF:
        out.append(
            ScoredCandidate(
                hypothesis=Hypothesis(
                    frame=h.frame + 1,
                    position=nxt.position,
                    mode=Mode.JUMPING,
                    log_weight=h.log_weight + dl_inv,
                    velocity=nxt.velocity,
                    variance=var,
                    visible=False,
                ),
                delta_logl=dl_inv,
            )
        )
    for r in ray_positions:
        dl = base + gauss_logpdf(r, nxt.position, var)
        out.append(
            ScoredCandidate(
                hypothesis=Hypothesis(
                    frame=h.frame + 1,
                    position=r,
                    mode=Mode.JUMPING,
                    log_weight=h.log_weight + dl,
                    velocity=nxt.velocity,
                    variance=0.0,
                    visible=True,
                ),
                delta_logl=dl,
            )
        )
    return out


def gen_jump_from_wait(
    h: Hypothesis,
    obs: FrameObservations,
    ray_positions: np.ndarray,
    params: ModelParams,
    t_now: int,
) -> list[ScoredCandidate]:
    """First re-detection after a kick: one flight hypothesis per ray position.

    The launch velocity is recovered from the free-flight equation between
    the kicker and the candidate position over the undetected interval; the
    increment carries the transition term only.
    """
    if h.mode != Mode.WAITING:
        raise IllegalEdge(f"{h.mode.name} cannot start a flight")
    base = transition_logp(params.transition, Mode.WAITING, Mode.JUMPING)
    if base == NEG_INF or len(ray_positions) == 0:
        return []
    # A kick observed on its own frame still needs one frame of flight.
    flight = max(t_now - h.kick_frame, 1) / params.fps
    origin = np.array(
        [h.kicker_position[0], h.kicker_position[1], params.physics.ball_radius]
    )
    cap2 = params.max_kick_speed * params.max_kick_speed
    out = []
    for r in ray_positions:
        v = kick_velocity(origin, r, flight, params.physics)
        speed2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
        # a launch the kicker could not have produced is impossible, not unlikely
        if speed2 > cap2:
            continue
        dl = base
        out.append(
            ScoredCandidate(
                hypothesis=Hypothesis(
                    frame=h.frame + 1,
                    position=r,
                    mode=Mode.JUMPING,
                    log_weight=h.log_weight + dl,
                    velocity=v,
                    variance=params.sigma_g,
                    visible=True,
                ),
                delta_logl=dl,
            )
        )
    return out


def generate_all(
    h: Hypothesis,
    obs: FrameObservations,
    ray_positions: np.ndarray,
    params: ModelParams,
) -> list[ScoredCandidate]:
    """Every legal descendant of h for frame h.frame + 1."""
    out: list[ScoredCandidate] = []
    if h.mode == Mode.JUMPING:
        out.extend(gen_jump_from_jump(h, obs, ray_positions, params))
        out.extend(gen_possession(h, obs, params))
        if not params.pitch.contains(float(h.position[0]), float(h.position[1])):
            _try_inherit(out, h, Mode.OUT, params)
    elif h.mode == Mode.POSSESSION:
        out.extend(gen_possession(h, obs, params))
        _try_inherit(out, h, Mode.WAITING, params)
    elif h.mode == Mode.WAITING:
        _try_inherit(out, h, Mode.WAITING, params)
        out.extend(gen_jump_from_wait(h, obs, ray_positions, params, t_now=h.frame + 1))
    else:
        _try_inherit(out, h, Mode.OUT, params)
        out.extend(gen_possession(h, obs, params))
    return out


def _try_inherit(out: list[ScoredCandidate], h: Hypothesis, to: Mode, params: ModelParams):
    if transition_logp(params.transition, h.mode, to) > NEG_INF:
        out.append(gen_inherit(h, to, params))
