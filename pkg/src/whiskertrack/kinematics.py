"""Planar rigid-body math and the contact-point process model.

The tracked state is the contact point expressed in the moving whisker base
frame {B}. Under the static-contact assumption (the contact point does not
move in the world frame {S}), motion of the base induces an apparent drift of
the contact point in {B}. All functions here are pure and operate on small
value types, so they are safe to share across threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = (theta + math.pi) % TWO_PI - math.pi
    if w == -math.pi:
        w = math.pi
    return w


def rot2(theta: float) -> np.ndarray:
    """2x2 rotation matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose2:
    """Pose of the base frame {B} in the spatial frame {S}; theta in (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def rotation(self) -> np.ndarray:
        return rot2(self.theta)


@dataclass(frozen=True)
class BodyTwist:
    """Linear and angular velocity of {B} relative to {S}, viewed in {B}."""

    vx: float
    vy: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.vx) and math.isfinite(self.vy) and math.isfinite(self.omega)):
            raise ValueError("twist components must be finite")

    @property
    def linear(self) -> np.ndarray:
        return np.array([self.vx, self.vy])


@dataclass(frozen=True)
class ContactState:
    """Position of the contact point relative to the {B} origin, in {B} (meters)."""

    px: float
    py: float

    @property
    def array(self) -> np.ndarray:
        return np.array([self.px, self.py])


def clamp_to_workspace(state: ContactState, arc_length: float) -> ContactState:
    """Clamp a contact state to the soft reachable bound ||p|| <= 1.2 * arc length.

    Out-of-bound states are radially projected back and a warning is issued;
    in-bound states are returned unchanged.
    """
    bound = 1.2 * arc_length
    r = math.hypot(state.px, state.py)
    if r <= bound:
        return state
    warnings.warn(
        f"contact state {state} outside reachable bound {bound:.4f} m; clamped",
        stacklevel=2,
    )
    scale = bound / r
    return ContactState(state.px * scale, state.py * scale)


def planar_cross(omega: float, p) -> np.ndarray:
    """Planar cross product omega x p = (-omega*py, omega*px)."""
    px, py = (p.px, p.py) if isinstance(p, ContactState) else (p[0], p[1])
    return np.array([-omega * py, omega * px])


def contact_velocity_in_body(twist: BodyTwist, p) -> np.ndarray:
    """Velocity of a world-fixed contact point as seen in {B}: -(v + omega x p)."""
    return -(twist.linear + planar_cross(twist.omega, p))


def propagate(state: ContactState, twist: BodyTwist, dt: float) -> ContactState:
    """One explicit Euler step of the contact-point drift in {B}."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    v = contact_velocity_in_body(twist, state)
    return ContactState(state.px + dt * v[0], state.py + dt * v[1])


def propagate_array(p: np.ndarray, twist: BodyTwist, dt: float) -> np.ndarray:
    """Vectorized propagate over an (..., 2) array of contact points."""
    p = np.asarray(p, dtype=float)
    vx = -(twist.vx - twist.omega * p[..., 1])
    vy = -(twist.vy + twist.omega * p[..., 0])
    return np.stack([p[..., 0] + dt * vx, p[..., 1] + dt * vy], axis=-1)


def process_jacobian(twist: BodyTwist, dt: float) -> np.ndarray:
    """Jacobian of propagate with respect to the state: I + dt*omega*[[0,1],[-1,0]]."""
    w = dt * twist.omega
    return np.array([[1.0, w], [-w, 1.0]])


def twist_from_pose_pair(prev: Pose2, next: Pose2, dt: float) -> BodyTwist:
    """Finite-difference body twist from two consecutive poses.

    The world-frame displacement is rotated into prev's body frame and divided
    by dt; omega is the shortest signed angle difference over dt.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    d_world = next.translation - prev.translation
    v = rot2(-prev.theta) @ d_world / dt
    omega = wrap_angle(next.theta - prev.theta) / dt
    return BodyTwist(v[0], v[1], omega)


def world_point(base: Pose2, state: ContactState) -> np.ndarray:
    """Map a contact state from {B} into the spatial frame {S}."""
    return base.rotation @ state.array + base.translation


def body_point(base: Pose2, point_world) -> np.ndarray:
    """Map a world point into the base frame {B} (inverse of world_point)."""
    p = np.asarray(point_world, dtype=float)
    return rot2(-base.theta) @ (p - base.translation)
