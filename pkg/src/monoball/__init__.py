"""monoball: real-time 3D football trajectory reconstruction from one camera."""

from .beam import BallTracker, Beam, BeamExtinct, EmptyFrame, TrajectoryRecord, init_beam, run_offline, step
from .dynamics import KinematicState, PhysicsParams, extrapolate, kick_velocity, propagate_variance
from .geometry import (
    CameraCalibration,
    PitchGeometry,
    Ray,
    backproject_ray,
    camera_center,
    discretize_ray,
    look_at_calibration,
    project,
)
from .state import FrameObservations, Hypothesis, Mode, ModelParams, TransitionMatrix, default_params

__version__ = "0.1.0"
