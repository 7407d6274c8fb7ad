"""Recursive beam filter with fixed-lag trajectory extraction.

Each frame: every retained hypothesis generates scored descendants, the
merged candidate pool is deduplicated (identical full states keep the
higher weight), sorted by a deterministic total order, and truncated to
the beam width K.  The best chain's prefix older than `lag` frames is
committed and never revised afterwards.

Two step implementations produce the same result:

  * an object path that walks plain Hypothesis objects through the
    per-transition generators (clear, used for small pools and as the
    reference in tests);
  * a stream path that treats the per-parent scores along each viewing
    ray as a unimodal sequence and lazily merges all such sequences with
    a heap, so only O(K) of the millions of potential ray candidates are
    ever materialized.  This is what makes K=1000 real-time on a CPU.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .dynamics import extrapolate_batch, kick_velocity
from .state import (
    NEG_INF,
    FrameObservations,
    Hypothesis,
    Mode,
    ModelParams,
    transition_logp,
)
from .transitions import (
    RayGrid,
    gauss_logpdf,
    gauss_logpdf_batch,
    gen_ray_grids,
    generate_all,
)

logger = logging.getLogger(__name__)

# Above this many potential ray candidates the lazy stream path takes over.
OBJECT_PATH_MAX = 20_000


class EmptyFrame(ValueError):
    """A frame yielded zero seed hypotheses."""


class BeamExtinct(RuntimeError):
    """Every candidate of a step scored -inf / no candidate could be generated."""


@dataclass(frozen=True)
class TrajectoryRecord:
    frame: int
    position: np.ndarray
    mode: Mode
    log_weight: float
    finalized: bool

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        p.setflags(write=False)
        object.__setattr__(self, "position", p)


@dataclass
class Beam:
    """Hypotheses of one frame as parallel arrays, sorted best-first.

    parent[i] indexes into the previous frame's beam (-1 for seeds);
    `prev` links the ancestor beams that are still inside the lag window.
    """

    frame: int
    pos: np.ndarray  # (n, 3)
    vel: np.ndarray  # (n, 3), zeros outside JUMPING
    var: np.ndarray  # (n,)
    mode: np.ndarray  # (n,) int
    visible: np.ndarray  # (n,) bool
    player: np.ndarray  # (n,) int, -1 outside POSSESSION
    kick_frame: np.ndarray  # (n,) int, -1 outside WAITING
    kicker: np.ndarray  # (n, 2)
    logw: np.ndarray  # (n,)
    parent: np.ndarray  # (n,) int
    prev: Optional["Beam"] = None

    def __len__(self) -> int:
        return len(self.logw)

    def hypothesis(self, i: int, parent: Optional[Hypothesis] = None) -> Hypothesis:
        m = Mode(int(self.mode[i]))
        kw = {}
        if m == Mode.JUMPING:
            kw = dict(
                velocity=self.vel[i].copy(),
                variance=float(self.var[i]),
                visible=bool(self.visible[i]),
            )
        elif m == Mode.POSSESSION:
            kw = dict(player_index=int(self.player[i]))
        elif m == Mode.WAITING:
            kw = dict(kick_frame=int(self.kick_frame[i]), kicker_position=self.kicker[i].copy())
        return Hypothesis(
            frame=self.frame,
            position=self.pos[i].copy(),
            mode=m,
            log_weight=float(self.logw[i]),
            parent=parent,
            **kw,
        )

    def hypotheses(self) -> list[Hypothesis]:
        return [self.hypothesis(i) for i in range(len(self))]

    def best_chain(self) -> list[Hypothesis]:
        """The top hypothesis and its ancestors (inside the retained window), oldest first."""
        nodes = []
        beam, idx = self, 0
        while beam is not None and idx >= 0:
            nodes.append((beam, idx))
            idx = int(beam.parent[idx])
            beam = beam.prev
        out: list[Hypothesis] = []
        link: Optional[Hypothesis] = None
        for beam, idx in reversed(nodes):
            link = beam.hypothesis(idx, parent=link)
            out.append(link)
        return out


# --------------------------------------------------------------------------
# candidate rows: one flat tuple per candidate, shared by all step paths
# --------------------------------------------------------------------------
# row = (parent_idx, mode, px, py, pz, vx, vy, vz, var, visible, player,
#        kick_frame, kicker_x, kicker_y, logw)

_Z3 = (0.0, 0.0, 0.0)


def _row_from_hypothesis(h: Hypothesis, parent_idx: int) -> tuple:
    px, py, pz = (float(v) for v in h.position)
    if h.mode == Mode.JUMPING:
        vx, vy, vz = (float(v) for v in h.velocity)
        return (parent_idx, int(h.mode), px, py, pz, vx, vy, vz, float(h.variance),
                bool(h.visible), -1, -1, 0.0, 0.0, h.log_weight)
    if h.mode == Mode.POSSESSION:
        return (parent_idx, int(h.mode), px, py, pz, *_Z3, 0.0, False,
                int(h.player_index), -1, 0.0, 0.0, h.log_weight)
    if h.mode == Mode.WAITING:
        kx, ky = (float(v) for v in h.kicker_position)
        return (parent_idx, int(h.mode), px, py, pz, *_Z3, 0.0, False,
                -1, int(h.kick_frame), kx, ky, h.log_weight)
    return (parent_idx, int(h.mode), px, py, pz, *_Z3, 0.0, False,
            -1, -1, 0.0, 0.0, h.log_weight)


def _row_key(row: tuple) -> tuple:
    """Sort key matching Hypothesis.sort_key(): weight desc, mode, position, latents."""
    mode = row[1]
    if mode == Mode.JUMPING:
        state = (mode, row[2], row[3], row[4], row[9], row[5], row[6], row[7], row[8])
    elif mode == Mode.POSSESSION:
        state = (mode, row[2], row[3], row[4], row[10])
    elif mode == Mode.WAITING:
        state = (mode, row[2], row[3], row[4], row[11], row[12], row[13])
    else:
        state = (mode, row[2], row[3], row[4])
    return (-row[14],) + state


def _dedup_key(key: tuple) -> tuple:
    """Candidate identity for merging duplicates, keeping the best weight.

    The identity is the full latent state (position, velocity, variance,
    kick bookkeeping), not just (mode, position): two hypotheses at the
    same spot with different velocities have different futures, and at
    kick re-acquisition the candidate carrying the true launch velocity
    routinely has a lower prefix weight than a fresher reinterpretation
    at the same ray point, so collapsing them loses the ball.
    """
    return key[1:]


def _assemble(frame: int, rows: list[tuple], prev: Optional[Beam]) -> Beam:
    n = len(rows)
    pos = np.array([(r[2], r[3], r[4]) for r in rows], dtype=np.float64).reshape(n, 3)
    vel = np.array([(r[5], r[6], r[7]) for r in rows], dtype=np.float64).reshape(n, 3)
    var = np.array([r[8] for r in rows], dtype=np.float64)
    mode = np.array([r[1] for r in rows], dtype=np.int64)
    visible = np.array([r[9] for r in rows], dtype=bool)
    player = np.array([r[10] for r in rows], dtype=np.int64)
    kickf = np.array([r[11] for r in rows], dtype=np.int64)
    kicker = np.array([(r[12], r[13]) for r in rows], dtype=np.float64).reshape(n, 2)
    logw = np.array([r[14] for r in rows], dtype=np.float64)
    parent = np.array([r[0] for r in rows], dtype=np.int64)
    return Beam(
        frame=frame, pos=pos, vel=vel, var=var, mode=mode, visible=visible,
        player=player, kick_frame=kickf, kicker=kicker, logw=logw, parent=parent,
        prev=prev,
    )


def _select_rows(keyed: Iterable[tuple[tuple, tuple]], k: int) -> list[tuple]:
    """Keep the best k rows from (key, row) pairs already sorted ascending by key,
    dropping rows whose candidate identity was already taken with a better weight."""
    seen: set[tuple] = set()
    out: list[tuple] = []
    for key, row in keyed:
        state = _dedup_key(key)
        if state in seen:
            continue
        seen.add(state)
        out.append(row)
        if len(out) >= k:
            break
    return out


# --------------------------------------------------------------------------
# initialization
# --------------------------------------------------------------------------

def init_beam(obs: FrameObservations, params: ModelParams) -> Beam:
    """Seed a beam from first-frame observations.

    One airborne hypothesis per ray position (zero velocity, kick-grade
    variance), one possession hypothesis per player, and a single
    out-of-play hypothesis at the pitch centre when the frame is empty.
    """
    br = params.physics.ball_radius
    rows: list[tuple] = []
    grids = gen_ray_grids(obs, params)
    for g in grids:
        for p in g.points:
            rows.append((-1, int(Mode.JUMPING), float(p[0]), float(p[1]), float(p[2]),
                         0.0, 0.0, 0.0, params.sigma_g, True, -1, -1, 0.0, 0.0, 0.0))
    for idx, g in enumerate(obs.players):
        rows.append((-1, int(Mode.POSSESSION), float(g[0]), float(g[1]), br,
                     *_Z3, 0.0, False, idx, -1, 0.0, 0.0, 0.0))
    if len(obs.detections) == 0 and len(obs.players) == 0:
        rows.append((-1, int(Mode.OUT), 0.0, 0.0, br,
                     *_Z3, 0.0, False, -1, -1, 0.0, 0.0, 0.0))
    if not rows:
        raise EmptyFrame(f"frame {obs.frame} yielded zero seed hypotheses")
    keyed = sorted(((_row_key(r), r) for r in rows), key=lambda kr: kr[0])
    return _assemble(obs.frame, _select_rows(keyed, params.beam_width), prev=None)


# --------------------------------------------------------------------------
# step: object path
# --------------------------------------------------------------------------

def _step_object(beam: Beam, obs: FrameObservations, params: ModelParams,
                 grids: list[RayGrid]) -> list[tuple]:
    ray_positions = (
        np.concatenate([g.points for g in grids], axis=0) if grids else np.zeros((0, 3))
    )
    unclaimed = params.logp_unclaimed if len(obs.detections) else 0.0
    keyed: list[tuple[tuple, tuple]] = []
    for i in range(len(beam)):
        h = beam.hypothesis(i)
        for cand in generate_all(h, obs, ray_positions, params):
            row = _row_from_hypothesis(cand.hypothesis, i)
            if unclaimed != 0.0 and not (row[1] == Mode.JUMPING and row[9]):
                row = row[:14] + (row[14] + unclaimed,)
            keyed.append((_row_key(row), row))
    keyed.sort(key=lambda kr: kr[0])
    return _select_rows(keyed, params.beam_width)


# --------------------------------------------------------------------------
# step: stream path
# --------------------------------------------------------------------------

def _step_stream(beam: Beam, obs: FrameObservations, params: ModelParams,
                 grids: list[RayGrid]) -> list[tuple]:
    tl = params.transition.logp
    dt = params.dt
    br = params.physics.ball_radius
    fps = params.fps
    modes = beam.mode
    logw = beam.logw
    frame_next = beam.frame + 1

    jidx = np.nonzero(modes == int(Mode.JUMPING))[0]
    pidx = np.nonzero(modes == int(Mode.POSSESSION))[0]
    widx = np.nonzero(modes == int(Mode.WAITING))[0]
    oidx = np.nonzero(modes == int(Mode.OUT))[0]
    unclaimed = params.logp_unclaimed if len(obs.detections) else 0.0

    explicit: list[tuple[tuple, tuple]] = []

    # ---- airborne parents: extrapolation feeds both child families ----
    base_jj = float(tl[Mode.JUMPING, Mode.JUMPING])
    mu = vel2 = var2 = None
    if len(jidx) and base_jj > NEG_INF:
        mu, vel2 = extrapolate_batch(beam.pos[jidx], beam.vel[jidx], dt, params.physics)
        var2 = beam.var[jidx] + dt * params.sigma_v
        if params.logp_invisible > NEG_INF:
            w_inv = (logw[jidx] + (base_jj + params.logp_invisible)) + unclaimed
            for n, i in enumerate(jidx):
                row = (int(i), int(Mode.JUMPING),
                       float(mu[n, 0]), float(mu[n, 1]), float(mu[n, 2]),
                       float(vel2[n, 0]), float(vel2[n, 1]), float(vel2[n, 2]),
                       float(var2[n]), False, -1, -1, 0.0, 0.0, float(w_inv[n]))
                explicit.append((_row_key(row), row))

    # ---- transitions into possession: best parent per player ----
    if len(obs.players) and len(beam):
        to_p = tl[modes, int(Mode.POSSESSION)]
        src = np.nonzero(to_p > NEG_INF)[0]
        if len(src):
            targets = np.concatenate(
                [obs.players, np.full((len(obs.players), 1), br)], axis=1
            )
            dx = beam.pos[src, 0][:, None] - targets[None, :, 0]
            dy = beam.pos[src, 1][:, None] - targets[None, :, 1]
            dz = beam.pos[src, 2][:, None] - targets[None, :, 2]
            dz[modes[src] == int(Mode.OUT)] = 0.0  # out-of-play gate is horizontal
            d2 = dx * dx + dy * dy + dz * dz
            thr2 = params.possession_threshold * params.possession_threshold
            score = np.where(d2 < thr2, logw[src][:, None] + to_p[src][:, None], NEG_INF)
            best = np.argmax(score, axis=0)
            for p_i in range(len(obs.players)):
                s = float(score[best[p_i], p_i])
                if s > NEG_INF:
                    row = (int(src[best[p_i]]), int(Mode.POSSESSION),
                           float(obs.players[p_i, 0]), float(obs.players[p_i, 1]), br,
                           *_Z3, 0.0, False, p_i, -1, 0.0, 0.0, s + unclaimed)
                    explicit.append((_row_key(row), row))

    # ---- inherit edges ----
    base_pw = float(tl[Mode.POSSESSION, Mode.WAITING])
    if base_pw > NEG_INF:
        for i in pidx:
            row = (int(i), int(Mode.WAITING),
                   float(beam.pos[i, 0]), float(beam.pos[i, 1]), float(beam.pos[i, 2]),
                   *_Z3, 0.0, False, -1, beam.frame,
                   float(beam.pos[i, 0]), float(beam.pos[i, 1]),
                   (float(logw[i]) + base_pw) + unclaimed)
            explicit.append((_row_key(row), row))
    base_ww = float(tl[Mode.WAITING, Mode.WAITING])
    if base_ww > NEG_INF:
        for i in widx:
            row = (int(i), int(Mode.WAITING),
                   float(beam.pos[i, 0]), float(beam.pos[i, 1]), float(beam.pos[i, 2]),
                   *_Z3, 0.0, False, -1, int(beam.kick_frame[i]),
                   float(beam.kicker[i, 0]), float(beam.kicker[i, 1]),
                   (float(logw[i]) + base_ww) + unclaimed)
            explicit.append((_row_key(row), row))
    base_oo = float(tl[Mode.OUT, Mode.OUT])
    if base_oo > NEG_INF:
        for i in oidx:
            row = (int(i), int(Mode.OUT),
                   float(beam.pos[i, 0]), float(beam.pos[i, 1]), float(beam.pos[i, 2]),
                   *_Z3, 0.0, False, -1, -1, 0.0, 0.0,
                   (float(logw[i]) + base_oo) + unclaimed)
            explicit.append((_row_key(row), row))
    base_jo = float(tl[Mode.JUMPING, Mode.OUT])
    if len(jidx) and base_jo > NEG_INF:
        half_l, half_w = params.pitch.length / 2, params.pitch.width / 2
        outside = (np.abs(beam.pos[jidx, 0]) > half_l) | (np.abs(beam.pos[jidx, 1]) > half_w)
        for i in jidx[outside]:
            row = (int(i), int(Mode.OUT),
                   float(beam.pos[i, 0]), float(beam.pos[i, 1]), float(beam.pos[i, 2]),
                   *_Z3, 0.0, False, -1, -1, 0.0, 0.0,
                   (float(logw[i]) + base_jo) + unclaimed)
            explicit.append((_row_key(row), row))

    explicit.sort(key=lambda kr: kr[0])

    # ---- detected airborne children: lazy best-first merge over ray grids ----
    # Per (parent, ray) the score against the grid index j is unimodal, so each
    # pair becomes a stream explored outward from its peak; a heap merges the
    # stream heads with the explicit candidates and stops after beam_width picks.
    heap: list[tuple] = []
    base_wjump = float(tl[Mode.WAITING, Mode.JUMPING])
    cap2 = params.max_kick_speed * params.max_kick_speed
    w_origin = w_flight = None
    if len(widx) and base_wjump > NEG_INF and grids:
        w_origin = np.concatenate(
            [beam.kicker[widx], np.full((len(widx), 1), br)], axis=1
        )
        w_flight = np.maximum(frame_next - beam.kick_frame[widx], 1) / fps

    def jump_entry(n: int, d: int, j: int, side: int):
        """Heap entry for the detected child of airborne parent n at grid point j."""
        g = grids[d]
        pt = g.points[j]
        score = float(logw[jidx[n]]) + (base_jj + gauss_logpdf(pt, mu[n], float(var2[n])))
        key = (-score, int(Mode.JUMPING), float(pt[0]), float(pt[1]), float(pt[2]),
               True, float(vel2[n, 0]), float(vel2[n, 1]), float(vel2[n, 2]), 0.0)
        return (key, 0, n, d, j, side)

    def wait_entry(n: int, d: int, j: int, side: int, j_lo: int, j_hi: int):
        """Heap entry for the kick child of waiting parent n at grid point j.

        Kick children share one score per parent, so each stream is emitted
        in lexicographic position order (the global tie-break); within the
        producibility interval that order is a straight index walk.
        Over-cap points at the interval margins are skipped in place.
        """
        g = grids[d]
        while j_lo <= j <= j_hi:
            pt = g.points[j]
            v = kick_velocity(w_origin[n], pt, float(w_flight[n]), params.physics)
            speed2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
            if speed2 <= cap2:
                score = float(logw[widx[n]]) + base_wjump
                key = (-score, int(Mode.JUMPING), float(pt[0]), float(pt[1]), float(pt[2]),
                       True, float(v[0]), float(v[1]), float(v[2]), params.sigma_g)
                return (key, 1, n, d, j, side, j_lo, j_hi)
            j += side
        return None

    if grids and mu is not None:
        for d, g in enumerate(grids):
            rel = mu - g.ground_hit
            s = rel @ g.up_axis
            npts = len(g.points)
            j_lo = np.clip(np.floor(s / g.step), 0, npts - 1).astype(np.int64)
            j_hi = np.minimum(j_lo + 1, npts - 1)
            sc_lo = gauss_logpdf_batch(g.points[j_lo], mu, var2)
            sc_hi = gauss_logpdf_batch(g.points[j_hi], mu, var2)
            seed = np.where(sc_hi > sc_lo, j_hi, j_lo)
            for n in range(len(jidx)):
                heap.append(jump_entry(n, d, int(seed[n]), 2))  # side 2: seed, expands both ways
    if w_origin is not None:
        g_half = 0.5 * params.physics.gravity
        for d, g in enumerate(grids):
            npts = len(g.points)
            # launch speed along the grid is a quadratic in the ray coordinate:
            # its minimum seeds the stream, the cap bounds the walk
            a = (g.ground_hit[None, :] - w_origin) / w_flight[:, None]
            a[:, 2] += g_half * w_flight
            b = g.up_axis[None, :] / w_flight[:, None]
            qa = (b * b).sum(axis=1)
            qb = 2.0 * (a * b).sum(axis=1)
            qc = (a * a).sum(axis=1) - cap2
            disc = qb * qb - 4.0 * qa * qc
            feasible = disc >= 0.0
            sq = np.sqrt(np.maximum(disc, 0.0))
            x_lo = (-qb - sq) / (2.0 * qa)
            x_hi = (-qb + sq) / (2.0 * qa)
            lo = np.maximum(np.ceil(x_lo / g.step - 1e-9).astype(np.int64) - 1, 0)
            hi = np.minimum(np.floor(x_hi / g.step + 1e-9).astype(np.int64) + 1, npts - 1)
            feasible &= lo <= hi
            # streams emit in lexicographic position order: ascending grid
            # index iff the up-axis is lexicographically positive
            ux, uy = float(g.up_axis[0]), float(g.up_axis[1])
            ascending = ux > 0 or (ux == 0 and (uy > 0 or uy == 0))
            for n in np.nonzero(feasible)[0]:
                n = int(n)
                jl, jh = int(lo[n]), int(hi[n])
                start = jl if ascending else jh
                entry = wait_entry(n, d, start, 1 if ascending else -1, jl, jh)
                if entry is not None:
                    heap.append(entry)
    heapq.heapify(heap)

    k_limit = params.beam_width
    seen: set[tuple] = set()
    rows: list[tuple] = []
    e_ptr = 0

    def emit(key: tuple, row: tuple) -> bool:
        state = _dedup_key(key)
        if state in seen:
            return False
        seen.add(state)
        rows.append(row)
        return True

    while len(rows) < k_limit and (heap or e_ptr < len(explicit)):
        use_heap = bool(heap) and (
            e_ptr >= len(explicit) or heap[0][0] <= explicit[e_ptr][0]
        )
        if not use_heap:
            key, row = explicit[e_ptr]
            e_ptr += 1
            emit(key, row)
            continue
        entry = heapq.heappop(heap)
        key, kind, n, d = entry[0], entry[1], entry[2], entry[3]
        g = grids[d]
        if kind == 0:
            pos_idx, side = entry[4], entry[5]
            i = int(jidx[n])
            row = (i, int(Mode.JUMPING), key[2], key[3], key[4],
                   key[6], key[7], key[8], 0.0, True, -1, -1, 0.0, 0.0, -key[0])
            emit(key, row)
            npts = len(g.points)
            if side == 2:  # seed: open both directions
                if pos_idx + 1 < npts:
                    heapq.heappush(heap, jump_entry(n, d, pos_idx + 1, +1))
                if pos_idx - 1 >= 0:
                    heapq.heappush(heap, jump_entry(n, d, pos_idx - 1, -1))
            else:
                nxt = pos_idx + side
                if 0 <= nxt < npts:
                    heapq.heappush(heap, jump_entry(n, d, nxt, side))
        else:
            pos_idx, side, jl, jh = entry[4], entry[5], entry[6], entry[7]
            i = int(widx[n])
            row = (i, int(Mode.JUMPING), key[2], key[3], key[4],
                   key[6], key[7], key[8], params.sigma_g, True, -1, -1, 0.0, 0.0, -key[0])
            emit(key, row)
            nxt = wait_entry(n, d, pos_idx + side, side, jl, jh)
            if nxt is not None:
                heapq.heappush(heap, nxt)
    return rows


def step(
    beam: Beam,
    obs: FrameObservations,
    params: ModelParams,
    force_path: Optional[str] = None,
) -> Beam:
    """Advance the beam by one frame; raises BeamExtinct when nothing survives."""
    if obs.frame != beam.frame + 1:
        raise ValueError(f"expected frame {beam.frame + 1}, got {obs.frame}")
    grids = gen_ray_grids(obs, params)
    total_pts = sum(len(g.points) for g in grids)
    n_ray_parents = int(np.count_nonzero(beam.mode == int(Mode.JUMPING))
                        + np.count_nonzero(beam.mode == int(Mode.WAITING)))
    path = force_path or (
        "object" if (len(beam) + n_ray_parents * total_pts) <= OBJECT_PATH_MAX else "stream"
    )
    rows = (_step_object if path == "object" else _step_stream)(beam, obs, params, grids)
    if not rows:
        raise BeamExtinct(f"no viable candidate at frame {obs.frame}")
    return _assemble(obs.frame, rows, prev=beam)


# --------------------------------------------------------------------------
# fixed-lag tracking
# --------------------------------------------------------------------------

class BallTracker:
    """Stateful wrapper: step the beam, commit records `lag` frames behind.

    Committed records are append-only; the most recent `lag` frames stay
    soft and may be revised until they leave the window.  A beam
    extinction is recovered by reseeding from the current frame, flushing
    the soft window first (logged as a discontinuity).
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.beam: Optional[Beam] = None
        self.committed: list[TrajectoryRecord] = []
        self.discontinuities: list[int] = []
        self._first_frame: Optional[int] = None

    def _walk(self, depth: int) -> list[tuple[Beam, int]]:
        """(beam, index) pairs from the current best hypothesis back `depth` steps."""
        out = []
        beam, idx = self.beam, 0
        while beam is not None and idx >= 0 and len(out) <= depth:
            out.append((beam, idx))
            idx = int(beam.parent[idx])
            beam = beam.prev
        return out

    @staticmethod
    def _record(beam: Beam, idx: int, finalized: bool) -> TrajectoryRecord:
        return TrajectoryRecord(
            frame=beam.frame,
            position=beam.pos[idx].copy(),
            mode=Mode(int(beam.mode[idx])),
            log_weight=float(beam.logw[idx]),
            finalized=finalized,
        )

    def step(self, obs: FrameObservations) -> list[TrajectoryRecord]:
        """Process one frame; returns the records finalized by this frame."""
        if self.beam is None:
            self.beam = init_beam(obs, self.params)
            self._first_frame = obs.frame
        else:
            try:
                self.beam = step(self.beam, obs, self.params)
            except BeamExtinct:
                logger.warning("beam extinct at frame %d; reseeding", obs.frame)
                self._flush_soft(mark_final=True)
                self.discontinuities.append(obs.frame)
                try:
                    self.beam = init_beam(obs, self.params)
                except EmptyFrame as exc:
                    raise BeamExtinct(
                        f"beam extinct at frame {obs.frame} and reseeding failed: {exc}"
                    ) from exc
        new: list[TrajectoryRecord] = []
        lag = self.params.lag
        target = self.beam.frame - lag
        if target >= self._first_frame and (
            not self.committed or self.committed[-1].frame < target
        ):
            walk = self._walk(lag)
            beam, idx = walk[-1]
            if beam.frame == target:
                rec = self._record(beam, idx, finalized=True)
                self.committed.append(rec)
                new.append(rec)
            if beam.prev is not None:
                beam.prev = None  # drop ancestry outside the lag window
        return new

    def _flush_soft(self, mark_final: bool) -> list[TrajectoryRecord]:
        if self.beam is None:
            return []
        last = self.committed[-1].frame if self.committed else self._first_frame - 1
        walk = self._walk(self.beam.frame - (last + 1))
        out = []
        for beam, idx in reversed(walk):
            if beam.frame > last:
                rec = self._record(beam, idx, finalized=mark_final)
                out.append(rec)
                if mark_final:
                    self.committed.append(rec)
        return out

    def extract(self) -> tuple[list[TrajectoryRecord], list[TrajectoryRecord]]:
        """(finalized records so far, current soft window)."""
        if self.beam is None:
            return list(self.committed), []
        last = self.committed[-1].frame if self.committed else self._first_frame - 1
        walk = self._walk(self.beam.frame - (last + 1))
        soft = [
            self._record(beam, idx, finalized=False)
            for beam, idx in reversed(walk)
            if beam.frame > last
        ]
        return list(self.committed), soft

    def flush(self, mark_final: bool = True) -> list[TrajectoryRecord]:
        """End of stream: emit the remaining soft window."""
        return self._flush_soft(mark_final=mark_final)


def run_offline(
    frames: list[FrameObservations], params: ModelParams
) -> list[TrajectoryRecord]:
    """Track a whole clip and return one record per frame."""
    if not frames:
        raise ValueError("no frames to process")
    tracker = BallTracker(params)
    out: list[TrajectoryRecord] = []
    for obs in frames:
        try:
            out.extend(tracker.step(obs))
        except (EmptyFrame, BeamExtinct) as exc:
            raise type(exc)(f"frame {obs.frame}: {exc}") from exc
    out.extend(tracker.flush(mark_final=True))
    return out
