#!/usr/bin/env python3
"""Diagnose where the beam loses the true trajectory.

Builds a "shadow" hypothesis chain that follows the simulated ground truth
through the filter's own transition scoring, then steps the real filter in
parallel and reports every frame where the shadow's log-weight falls below
the retained beam's floor (i.e. the truth could not have survived pruning),
along with the beam composition at that moment.

Usage: python scripts/diag_shadow.py [seed] [duration]
"""

import collections
import math
import sys

import numpy as np

from monoball.beam import BallTracker, init_beam, step
from monoball.dynamics import KinematicState, extrapolate, kick_velocity, propagate_variance
from monoball.geometry import PitchGeometry
from monoball.simulate import SimConfig, default_camera, simulate
from monoball.state import Mode, TransitionMatrix, default_params, transition_logp
from monoball.transitions import gauss_logpdf, gen_ray_grids


def shadow_trace(gt, obs, params):
    """Score the ground-truth-following chain under the filter's model."""
    tl = params.transition
    br = params.physics.ball_radius
    dt = params.dt
    logw = 0.0
    mode = None
    vel = None
    var = None
    kick_frame = None
    kicker = None
    pos = None
    rows = []
    for i, o in enumerate(obs):
        gt_mode = Mode(int(gt.modes[i]))
        gt_pos = gt.positions[i]
        grids = gen_ray_grids(o, params)
        pts = np.concatenate([g.points for g in grids], axis=0) if grids else np.zeros((0, 3))
        if i == 0:
            mode = gt_mode
            pos = gt_pos.copy()
            rows.append((o.frame, 0.0, ""))
            continue
        note = ""
        if gt_mode == Mode.POSSESSION:
            if mode in (Mode.JUMPING, Mode.OUT, Mode.POSSESSION):
                logw += transition_logp(tl, mode, Mode.POSSESSION)
            else:
                note = f"illegal {mode.name}->P"
                logw += -50.0
            pos = gt_pos.copy()
            vel = var = None
        elif gt_mode == Mode.WAITING:
            if mode == Mode.POSSESSION:
                logw += transition_logp(tl, mode, Mode.WAITING)
                kick_frame = o.frame - 1
                kicker = pos[:2].copy()
            elif mode == Mode.WAITING:
                logw += transition_logp(tl, mode, Mode.WAITING)
            else:
                note = f"illegal {mode.name}->W"
                logw += -50.0
        elif gt_mode == Mode.JUMPING:
            if mode == Mode.WAITING:
                # first detection after the kick
                if len(pts) == 0:
                    note = "no rays at W->J"
                    logw += -50.0
                    pos = gt_pos.copy()
                else:
                    j = int(np.argmin(np.linalg.norm(pts - gt_pos[None, :], axis=1)))
                    r = pts[j]
                    flight = max(o.frame - kick_frame, 1) / params.fps
                    origin = np.array([kicker[0], kicker[1], br])
                    v = kick_velocity(origin, r, flight, params.physics)
                    sp = math.sqrt(float(v @ v))
                    if sp > params.max_kick_speed:
                        note = f"kick speed {sp:.1f} over cap"
                        logw += -50.0
                    else:
                        logw += transition_logp(tl, Mode.WAITING, Mode.JUMPING)
                    pos, vel, var = r, v, params.sigma_g
            elif mode == Mode.JUMPING:
                nxt = extrapolate(KinematicState(pos, vel), dt, params.physics)
                var2 = propagate_variance(var, dt, params.sigma_v)
                visible = len(o.detections) > 0 and len(pts) > 0
                if visible:
                    j = int(np.argmin(np.linalg.norm(pts - gt_pos[None, :], axis=1)))
                    r = pts[j]
                    if float(np.linalg.norm(r - gt_pos)) > 0.5:
                        visible = False  # detections exist but none near the truth
                if visible:
                    logw += transition_logp(tl, Mode.JUMPING, Mode.JUMPING) + gauss_logpdf(
                        r, nxt.position, var2
                    )
                    pos, vel, var = r, nxt.velocity, 0.0
                else:
                    logw += transition_logp(tl, Mode.JUMPING, Mode.JUMPING) + params.logp_invisible
                    pos, vel, var = nxt.position, nxt.velocity, var2
            else:
                note = f"illegal {mode.name}->J"
                logw += -50.0
                pos = gt_pos.copy()
                vel, var = np.zeros(3), params.sigma_g
        else:  # OUT
            if mode in (Mode.JUMPING, Mode.OUT):
                logw += transition_logp(tl, mode, Mode.OUT)
            else:
                note = f"illegal {mode.name}->O"
                logw += -50.0
            vel = var = None
        mode = gt_mode
        rows.append((o.frame, logw, note))
    return rows


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    duration = int(sys.argv[2]) if len(sys.argv) > 2 else 1000
    cam = default_camera(PitchGeometry(), height=22.0, setback=26.0, focal=600.0)
    cfg = SimConfig(seed=seed, duration=duration, n_players=22, occlusion_prob=0.0,
                    pixel_noise_sigma=0.0, calib=cam)
    gt, obs = simulate(cfg)
    tm = TransitionMatrix.with_self_loops(
        {Mode.JUMPING: 0.95, Mode.POSSESSION: 0.95, Mode.WAITING: 0.6, Mode.OUT: 0.85}
    )
    params = default_params(beam_width=1000, lag=50, transition=tm,
                            max_kick_speed=40.0, sigma_v=0.02)
    shadow = shadow_trace(gt, obs, params)

    beam = init_beam(obs[0], params)
    lost_runs = 0
    was_lost = False
    for i in range(1, len(obs)):
        beam = step(beam, obs[i], params)
        frame, slw, note = shadow[i]
        floor = float(beam.logw[-1])
        top = float(beam.logw[0])
        margin = slw - floor
        lost = margin < 0 and len(beam) >= params.beam_width
        if note or (lost and not was_lost):
            comp = collections.Counter(Mode(int(m)).name[0] for m in beam.mode)
            gt_mode = Mode(int(gt.modes[i])).name[0]
            print(f"f={frame} gt={gt_mode} shadow={slw:.2f} top={top:.2f} floor={floor:.2f} "
                  f"margin={margin:+.2f} beam={dict(comp)} {note}")
            if lost and not was_lost:
                lost_runs += 1
        was_lost = lost
    print(f"\nshadow-below-floor episodes: {lost_runs}")


if __name__ == "__main__":
    main()
