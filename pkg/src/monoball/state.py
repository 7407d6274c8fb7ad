"""Hybrid discrete/continuous hypothesis state.

A hypothesis carries the ball position plus a discrete mode with
mode-specific latents:

  JUMPING    airborne, gravity-only motion; latents: velocity, position
             variance, and whether the frame had a supporting detection.
  POSSESSION ball at a player's feet; latent: index into the frame's
             player list.
  WAITING    kicked but not re-detected yet; latents: the kick frame and
             the kicker's pitch coordinates.
  OUT        ball out of the pitch; no extra latents.

The mode order JUMPING < POSSESSION < WAITING < OUT is part of the
deterministic tie-break used throughout the filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterator, Optional

import numpy as np

from .dynamics import PhysicsParams
from .geometry import CameraCalibration, PitchGeometry

NEG_INF = float("-inf")


class Mode(IntEnum):
    JUMPING = 0
    POSSESSION = 1
    WAITING = 2
    OUT = 3


MODE_LETTERS = {
    Mode.JUMPING: "J",
    Mode.POSSESSION: "P",
    Mode.WAITING: "W",
    Mode.OUT: "O",
}
LETTER_MODES = {v: k for k, v in MODE_LETTERS.items()}

# Directed mode edges the filter may follow (self-loops plus the cycle
# JUMPING->OUT->POSSESSION->WAITING->JUMPING and the shortcut JUMPING->POSSESSION).
ALLOWED_EDGES = frozenset(
    {
        (Mode.JUMPING, Mode.JUMPING),
        (Mode.JUMPING, Mode.OUT),
        (Mode.JUMPING, Mode.POSSESSION),
        (Mode.OUT, Mode.OUT),
        (Mode.OUT, Mode.POSSESSION),
        (Mode.POSSESSION, Mode.POSSESSION),
        (Mode.POSSESSION, Mode.WAITING),
        (Mode.WAITING, Mode.WAITING),
        (Mode.WAITING, Mode.JUMPING),
    }
)


@dataclass(frozen=True)
class TransitionMatrix:
    """4x4 table of log transition probabilities between modes.

    Disallowed edges are -inf; each row's allowed entries must
    exponentiate and sum to 1.
    """

    logp: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.logp, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError("transition table must be 4x4")
        for a in Mode:
            for b in Mode:
                if (a, b) not in ALLOWED_EDGES and m[a, b] != NEG_INF:
                    raise ValueError(f"edge {a.name}->{b.name} must have probability 0")
        rows = np.exp(m).sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-9):
            raise ValueError(f"transition rows must sum to 1, got {rows}")
        m.setflags(write=False)
        object.__setattr__(self, "logp", m)

    @classmethod
    def from_probs(cls, probs: dict[tuple[Mode, Mode], float]) -> "TransitionMatrix":
        m = np.full((4, 4), NEG_INF)
        for (a, b), p in probs.items():
            if p < 0:
                raise ValueError("probabilities must be nonnegative")
            if p > 0:
                m[a, b] = math.log(p)
        return cls(logp=m)

    @classmethod
    def with_self_loop(cls, self_loop: float = 0.95) -> "TransitionMatrix":
        """Self-loop probability on every mode, remaining mass split over its exits."""
        return cls.with_self_loops({m: self_loop for m in Mode})

    @classmethod
    def with_self_loops(cls, loops: dict[Mode, float]) -> "TransitionMatrix":
        """Per-mode self-loop probabilities, remaining mass split over each mode's exits."""
        exits = {
            Mode.JUMPING: [Mode.OUT, Mode.POSSESSION],
            Mode.POSSESSION: [Mode.WAITING],
            Mode.WAITING: [Mode.JUMPING],
            Mode.OUT: [Mode.POSSESSION],
        }
        probs: dict[tuple[Mode, Mode], float] = {}
        for a, outs in exits.items():
            probs[(a, a)] = loops[a]
            for b in outs:
                probs[(a, b)] = (1.0 - loops[a]) / len(outs)
        return cls.from_probs(probs)


def tracking_transitions() -> TransitionMatrix:
    """Transition table tuned for live tracking.

    The waiting-state self-loop is lower than the others so that fresh
    kick hypotheses outrank stale ones instead of tying with them; with a
    finite beam, exact ties between kick generations would otherwise make
    the retained subset arbitrary.
    """
    return TransitionMatrix.with_self_loops(
        {Mode.JUMPING: 0.95, Mode.POSSESSION: 0.95, Mode.WAITING: 0.90, Mode.OUT: 0.95}
    )


def transition_logp(matrix: TransitionMatrix, mode_from: Mode, mode_to: Mode) -> float:
    return float(matrix.logp[mode_from, mode_to])


@dataclass(frozen=True)
class ModelParams:
    """All tuned constants of the filter, overridable via the config file."""

    transition: TransitionMatrix
    possession_threshold: float = 1.5  # meters
    sigma_v: float = 0.5  # position-variance growth, m^2/s
    sigma_g: float = 0.25  # variance assigned to a fresh kick hypothesis, m^2
    logp_invisible: float = math.log(0.2)  # per-frame penalty for an undetected airborne ball
    ray_step: float = 0.03  # meters between candidate positions along a viewing ray
    beam_width: int = 1000
    lag: int = 50  # frames kept soft before an estimate is finalized
    fps: float = 25.0
    max_kick_speed: float = 45.0  # m/s; kick hypotheses needing more are impossible
    # penalty per frame for hypotheses that leave an observed detection
    # unexplained (the ball is claimed hidden while the detector fired);
    # 0 disables the term, which then matches the bare transition scoring
    logp_unclaimed: float = 0.0
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    pitch: PitchGeometry = field(default_factory=PitchGeometry)

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.lag < 0:
            raise ValueError("lag must be >= 0")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.possession_threshold <= 0:
            raise ValueError("possession_threshold must be positive")
        if self.sigma_g <= 0:
            raise ValueError("sigma_g must be positive")
        if self.sigma_v < 0:
            raise ValueError("sigma_v must be nonnegative")
        if self.ray_step <= 0:
            raise ValueError("ray_step must be positive")
        if self.max_kick_speed <= 0:
            raise ValueError("max_kick_speed must be positive")
        if self.logp_unclaimed > 0:
            raise ValueError("logp_unclaimed is a penalty and cannot be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.fps


def default_params(**overrides) -> ModelParams:
    return replace(ModelParams(transition=TransitionMatrix.with_self_loop(0.95)), **overrides) \
        if overrides else ModelParams(transition=TransitionMatrix.with_self_loop(0.95))


@dataclass(frozen=True)
class FrameObservations:
    """Per-frame inputs: ball detections (pixels), player positions (meters), calibration."""

    frame: int
    detections: np.ndarray  # (n, 2) pixels
    players: np.ndarray  # (m, 2) meters on the pitch plane
    calib: CameraCalibration

    def __post_init__(self):
        d = np.asarray(self.detections, dtype=np.float64).reshape(-1, 2)
        p = np.asarray(self.players, dtype=np.float64).reshape(-1, 2)
        d.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "detections", d)
        object.__setattr__(self, "players", p)


@dataclass(frozen=True)
class Hypothesis:
    """One beam entry: position, mode latents, accumulated log-weight, parent link."""

    frame: int
    position: np.ndarray
    mode: Mode
    log_weight: float
    velocity: Optional[np.ndarray] = None  # JUMPING
    variance: Optional[float] = None  # JUMPING
    visible: Optional[bool] = None  # JUMPING
    player_index: Optional[int] = None  # POSSESSION
    kick_frame: Optional[int] = None  # WAITING
    kicker_position: Optional[np.ndarray] = None  # WAITING
    parent: Optional["Hypothesis"] = None

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        p.setflags(write=False)
        object.__setattr__(self, "position", p)
        if self.mode == Mode.JUMPING:
            if self.velocity is None or self.variance is None or self.visible is None:
                raise ValueError("airborne hypotheses need velocity, variance and visibility")
            if self.variance < 0:
                raise ValueError("variance must be nonnegative")
            v = np.asarray(self.velocity, dtype=np.float64).reshape(3)
            v.setflags(write=False)
            object.__setattr__(self, "velocity", v)
        elif self.velocity is not None or self.variance is not None or self.visible is not None:
            raise ValueError(f"{self.mode.name} does not carry flight latents")
        if self.mode == Mode.POSSESSION:
            if self.player_index is None:
                raise ValueError("possession hypotheses need a player index")
        elif self.player_index is not None:
            raise ValueError(f"{self.mode.name} does not carry a player index")
        if self.mode == Mode.WAITING:
            if self.kick_frame is None or self.kicker_position is None:
                raise ValueError("waiting hypotheses need kick frame and kicker position")
            if self.kick_frame > self.frame:
                raise ValueError("kick frame cannot be in the future")
            k = np.asarray(self.kicker_position, dtype=np.float64).reshape(2)
            k.setflags(write=False)
            object.__setattr__(self, "kicker_position", k)
        elif self.kick_frame is not None or self.kicker_position is not None:
            raise ValueError(f"{self.mode.name} does not carry kick latents")

    def state_key(self) -> tuple:
        """Full latent state as a hashable tuple; equal keys mean interchangeable futures."""
        px, py, pz = self.position
        if self.mode == Mode.JUMPING:
            vx, vy, vz = self.velocity
            return (int(self.mode), px, py, pz, bool(self.visible), vx, vy, vz, self.variance)
        if self.mode == Mode.POSSESSION:
            return (int(self.mode), px, py, pz, self.player_index)
        if self.mode == Mode.WAITING:
            kx, ky = self.kicker_position
            return (int(self.mode), px, py, pz, self.kick_frame, kx, ky)
        return (int(self.mode), px, py, pz)

    def sort_key(self) -> tuple:
        """Total order: log-weight descending, then mode, then position, then latents."""
        return (-self.log_weight,) + self.state_key()

    def chain(self) -> Iterator["Hypothesis"]:
        """This hypothesis and its ancestors, newest first."""
        node: Optional[Hypothesis] = self
        while node is not None:
            yield node
            node = node.parent


def chain_edges_legal(hyps: list[Hypothesis]) -> bool:
    """True when consecutive modes of a frame-ordered chain only use allowed edges."""
    return all(
        (a.mode, b.mode) in ALLOWED_EDGES for a, b in zip(hyps, hyps[1:])
    )
