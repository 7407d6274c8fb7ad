#!/usr/bin/env python3
"""Audit every kick of a simulated match: how deep the first detection came,
whether a hypothesis near the true ball (position and velocity) survived the
frames after re-detection, and when the argmax chain recovered.

Usage: python scripts/diag_kicks.py SEED [duration] [sigma_g]
"""

import sys

import numpy as np

from monoball.beam import init_beam, step
from monoball.geometry import PitchGeometry
from monoball.simulate import SimConfig, default_camera, simulate
from monoball.state import Mode, TransitionMatrix, default_params


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    duration = int(sys.argv[2]) if len(sys.argv) > 2 else 1000
    sigma_g = float(sys.argv[3]) if len(sys.argv) > 3 else 0.1
    cam = default_camera(PitchGeometry(), height=22.0, setback=26.0, focal=600.0)
    cfg = SimConfig(seed=seed, duration=duration, n_players=22, occlusion_prob=0.0,
                    pixel_noise_sigma=0.0, calib=cam)
    gt, obs = simulate(cfg)
    tm = TransitionMatrix.with_self_loops(
        {Mode.JUMPING: 0.95, Mode.POSSESSION: 0.95, Mode.WAITING: 0.6, Mode.OUT: 0.85}
    )
    params = default_params(beam_width=1000, lag=50, transition=tm,
                            max_kick_speed=40.0, sigma_v=0.02, sigma_g=sigma_g)

    # per-kick bookkeeping
    kicks = gt.kick_events  # first waiting frame per kick
    true_vel = np.gradient(gt.positions, 1.0 / cfg.fps, axis=0)

    beam = init_beam(obs[0], params)
    report = {k: [] for k in kicks}
    for i in range(1, len(obs)):
        beam = step(beam, obs[i], params)
        f = obs[i].frame
        for k in kicks:
            if k <= f <= k + 10:
                gt_mode = Mode(int(gt.modes[i]))
                tp = gt.positions[i]
                tv = true_vel[i]
                jmask = (beam.mode == int(Mode.JUMPING)) & beam.visible
                entry = None
                if jmask.any():
                    idx = np.nonzero(jmask)[0]
                    dpos = np.linalg.norm(beam.pos[idx] - tp[None, :], axis=1)
                    near = idx[dpos < 0.25]
                    if len(near):
                        dvel = np.linalg.norm(beam.vel[near] - tv[None, :], axis=1)
                        b = int(near[int(np.argmin(dvel))])
                        entry = (float(dvel.min()), float(beam.logw[b]),
                                 float(beam.logw[b] - beam.logw[-1]))
                report[k].append((f, gt_mode.name[0], len(obs[i].detections), entry))

    for k in kicks:
        print(f"kick @ {k}:")
        for f, gm, nd, entry in report[k]:
            if entry is None:
                print(f"  f={f} gt={gm} nd={nd}  no J within 0.25m")
            else:
                dv, w, margin = entry
                print(f"  f={f} gt={gm} nd={nd}  bestJ dvel={dv:5.2f} logw={w:9.2f} floor+{margin:6.2f}")


if __name__ == "__main__":
    main()
