"""Ballistic ball motion: gravity-only flight with ground bounces.

Flight is integrated in closed form.  A bounce is an instantaneous event at
z = ball_radius: the vertical speed is reflected and scaled by the
restitution coefficient, the horizontal speed is scaled by the ground
friction factor.  Once the rebound speed falls below REST_SPEED the ball is
treated as rolling (z pinned at ball_radius, vertical velocity zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Rebound speeds below this (m/s) end the bounce cascade; avoids the Zeno
# accumulation of infinitely many vanishing bounces inside one step.
REST_SPEED = 1e-3


class NonPositiveDt(ValueError):
    pass


class NonPositiveFlightTime(ValueError):
    pass


class NegativeInput(ValueError):
    pass


@dataclass(frozen=True)
class KinematicState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        v = np.asarray(self.velocity, dtype=np.float64).reshape(3)
        p.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)


@dataclass(frozen=True)
class PhysicsParams:
    gravity: float = 9.81
    restitution: float = 0.7
    ground_friction: float = 0.85
    ball_radius: float = 0.11

    def __post_init__(self):
        if self.gravity <= 0:
            raise ValueError("gravity must be positive")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must be in [0, 1]")
        if not 0.0 <= self.ground_friction <= 1.0:
            raise ValueError("ground_friction must be in [0, 1]")
        if self.ball_radius < 0:
            raise ValueError("ball_radius must be nonnegative")


def _free_flight(px, py, pz, vx, vy, vz, t, g):
    return (
        px + vx * t,
        py + vy * t,
        pz + vz * t - 0.5 * g * t * t,
        vx,
        vy,
        vz - g * t,
    )


def _impact_time(pz, vz, g, floor):
    """Smallest t > 0 with pz + vz*t - g*t^2/2 == floor, or None."""
    # 0.5*g*t^2 - vz*t + (floor - pz) = 0
    disc = vz * vz - 2.0 * g * (floor - pz)
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    t = (vz + root) / g  # larger root: downward crossing
    if t <= 0.0:
        return None
    return t


def _extrapolate_scalar(px, py, pz, vx, vy, vz, dt, g, floor, restitution, friction):
    remaining = dt
    if pz < floor:
        pz = floor
    rolling = pz <= floor and vz <= 0.0 and abs(vz) < REST_SPEED
    while remaining > 0.0:
        if rolling:
            px += vx * remaining
            py += vy * remaining
            pz = floor
            vz = 0.0
            break
        if pz <= floor and vz <= 0.0:
            # already at the floor moving down: bounce immediately
            vz = -restitution * vz
            vx *= friction
            vy *= friction
            pz = floor
            if vz < REST_SPEED:
                rolling = True
                vz = 0.0
            continue
        t_hit = _impact_time(pz, vz, g, floor)
        if t_hit is None or t_hit >= remaining:
            px, py, pz, vx, vy, vz = _free_flight(px, py, pz, vx, vy, vz, remaining, g)
            break
        px += vx * t_hit
        py += vy * t_hit
        pz = floor
        vz = vz - g * t_hit
        remaining -= t_hit
        vz = -restitution * vz
        vx *= friction
        vy *= friction
        if vz < REST_SPEED:
            rolling = True
            vz = 0.0
    return px, py, pz, vx, vy, vz


def extrapolate(
    state: KinematicState, dt: float, phys: PhysicsParams, bounce: bool = True
) -> KinematicState:
    """Advance a ballistic state by dt seconds.

    With bounce=True the step is split exactly at each ground impact;
    with bounce=False the free-flight closed form is applied regardless
    of ground contact (used to verify kick-velocity inversion).
    """
    if dt <= 0:
        raise NonPositiveDt(f"dt = {dt}")
    g = phys.gravity
    px, py, pz = (float(v) for v in state.position)
    vx, vy, vz = (float(v) for v in state.velocity)
    if not bounce:
        px, py, pz, vx, vy, vz = _free_flight(px, py, pz, vx, vy, vz, dt, g)
    else:
        px, py, pz, vx, vy, vz = _extrapolate_scalar(
            px, py, pz, vx, vy, vz, dt, g, phys.ball_radius,
            phys.restitution, phys.ground_friction,
        )
    return KinematicState((px, py, pz), (vx, vy, vz))


def extrapolate_batch(
    pos: np.ndarray, vel: np.ndarray, dt: float, phys: PhysicsParams
) -> tuple[np.ndarray, np.ndarray]:
    """Bounce-aware extrapolation of (n, 3) position/velocity arrays.

    Bit-identical to calling extrapolate row by row: airborne rows use the
    same free-flight expressions vectorized, rows touching the ground fall
    back to the scalar bounce loop.
    """
    if dt <= 0:
        raise NonPositiveDt(f"dt = {dt}")
    g = phys.gravity
    floor = phys.ball_radius
    px = pos[:, 0] + vel[:, 0] * dt
    py = pos[:, 1] + vel[:, 1] * dt
    pz = pos[:, 2] + vel[:, 2] * dt - 0.5 * g * dt * dt
    vz = vel[:, 2] - g * dt
    new_pos = np.stack([px, py, pz], axis=1)
    new_vel = np.stack([vel[:, 0], vel[:, 1], vz], axis=1)
    touch = np.nonzero((pz < floor) | (pos[:, 2] <= floor))[0]
    for i in touch:
        out = _extrapolate_scalar(
            float(pos[i, 0]), float(pos[i, 1]), float(pos[i, 2]),
            float(vel[i, 0]), float(vel[i, 1]), float(vel[i, 2]),
            dt, g, floor, phys.restitution, phys.ground_friction,
        )
        new_pos[i] = out[:3]
        new_vel[i] = out[3:]
    return new_pos, new_vel


def kick_velocity(x_start, x_end, flight_time: float, phys: PhysicsParams) -> np.ndarray:
    """The unique bounce-free launch velocity joining x_start to x_end in flight_time."""
    if flight_time <= 0:
        raise NonPositiveFlightTime(f"flight_time = {flight_time}")
    a = np.asarray(x_start, dtype=np.float64).reshape(3)
    b = np.asarray(x_end, dtype=np.float64).reshape(3)
    v = (b - a) / flight_time
    v[2] += 0.5 * phys.gravity * flight_time
    return v


def propagate_variance(sigma: float, dt: float, sigma_v: float) -> float:
    """Grow an isotropic position variance by dt worth of process noise."""
    if sigma < 0 or sigma_v < 0:
        raise NegativeInput(f"sigma = {sigma}, sigma_v = {sigma_v}")
    if dt <= 0:
        raise NonPositiveDt(f"dt = {dt}")
    return sigma + dt * sigma_v
