#!/usr/bin/env python3
"""Grid-search filter constants on short synthetic matches.

Scores each configuration by mean Accuracy@0.5 and kick F1 over a few
seeds.  Meant for offline calibration of the tracking config shipped in
configs/tracking.cfg.
"""

import itertools
import math
import sys
import time

from monoball.beam import BallTracker
from monoball.evaluate import evaluate_records
from monoball.geometry import PitchGeometry
from monoball.simulate import SimConfig, default_camera, simulate
from monoball.state import Mode, TransitionMatrix, default_params


def run(params, obs):
    tracker = BallTracker(params)
    recs = []
    for o in obs:
        recs.extend(tracker.step(o))
    recs.extend(tracker.flush(True))
    return recs


def main():
    seeds = (1, 3, 7)
    duration = int(sys.argv[1]) if len(sys.argv) > 1 else 800
    cam = default_camera(PitchGeometry(), height=22.0, setback=26.0, focal=600.0)
    matches = {}
    for s in seeds:
        cfg = SimConfig(seed=s, duration=duration, n_players=22,
                        occlusion_prob=0.0, pixel_noise_sigma=0.0, calib=cam)
        matches[s] = simulate(cfg)

    grid = itertools.product(
        (0.6, 0.7),          # waiting self-loop
        (0.85, 0.9),         # out self-loop
        (0.1, 0.25),         # sigma_g
        (0.0, -2.0),         # logp_unclaimed
    )
    results = []
    for ww, oo, sg, uu in grid:
        tm = TransitionMatrix.with_self_loops(
            {Mode.JUMPING: 0.95, Mode.POSSESSION: 0.95, Mode.WAITING: ww, Mode.OUT: oo}
        )
        params = default_params(beam_width=1000, lag=50, transition=tm,
                                max_kick_speed=40.0, sigma_v=0.02, sigma_g=sg,
                                logp_unclaimed=uu)
        accs, f1s = [], []
        t0 = time.perf_counter()
        for s in seeds:
            gt, obs = matches[s]
            rep = evaluate_records(run(params, obs), gt)
            accs.append(rep.accuracy_at[0.5])
            f1s.append(rep.f1_kick)
        el = time.perf_counter() - t0
        line = (f"ww={ww} oo={oo} sg={sg} uu={uu}: "
                f"acc={[round(a, 3) for a in accs]} mean={sum(accs)/len(accs):.3f} "
                f"f1={[round(f, 2) for f in f1s]} ({el:.0f}s)")
        print(line, flush=True)
        results.append((sum(accs) / len(accs), line))
    results.sort(reverse=True)
    print("\n=== best ===")
    for _, line in results[:5]:
        print(line)


if __name__ == "__main__":
    main()
