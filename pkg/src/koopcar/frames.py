"""Planar rigid-frame changes and angle helpers.

States carry poses in a global frame; training and control move them into
local frames anchored near the data. Body-frame velocities (vx, vy, r) are
invariant under these changes, so only the pose triplet (x, y, psi) is
touched.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap angles (scalar or array) to the half-open interval (-pi, pi]."""
    r = np.fmod(a, TWO_PI)
    r = np.where(r > math.pi, r - TWO_PI, r)
    r = np.where(r <= -math.pi, r + TWO_PI, r)
    if np.isscalar(a):
        return float(r)
    return r


def to_local(poses: np.ndarray, origin) -> np.ndarray:
    """Express poses (..., 3) in the frame anchored at origin = (x0, y0, psi0).

    x' = cos(psi0) (x - x0) + sin(psi0) (y - y0)
    y' = -sin(psi0) (x - x0) + cos(psi0) (y - y0)
    psi' = wrap(psi - psi0)
    """
    poses = np.asarray(poses, dtype=float)
    x0, y0, psi0 = float(origin[0]), float(origin[1]), float(origin[2])
    c, s = math.cos(psi0), math.sin(psi0)
    dx = poses[..., 0] - x0
    dy = poses[..., 1] - y0
    out = np.empty_like(poses)
    out[..., 0] = c * dx + s * dy
    out[..., 1] = -s * dx + c * dy
    out[..., 2] = wrap_angle(poses[..., 2] - psi0)
    return out


def to_global(poses: np.ndarray, origin) -> np.ndarray:
    """Inverse of to_local: map local poses (..., 3) back to the global frame."""
    poses = np.asarray(poses, dtype=float)
    x0, y0, psi0 = float(origin[0]), float(origin[1]), float(origin[2])
    c, s = math.cos(psi0), math.sin(psi0)
    out = np.empty_like(poses)
    out[..., 0] = x0 + c * poses[..., 0] - s * poses[..., 1]
    out[..., 1] = y0 + s * poses[..., 0] + c * poses[..., 1]
    out[..., 2] = wrap_angle(poses[..., 2] + psi0)
    return out


def states_to_local(states: np.ndarray, origin) -> np.ndarray:
    """Apply to_local to the pose columns of full states (..., 6)."""
    states = np.asarray(states, dtype=float)
    out = states.copy()
    out[..., :3] = to_local(states[..., :3], origin)
    return out


def states_to_global(states: np.ndarray, origin) -> np.ndarray:
    """Apply to_global to the pose columns of full states (..., 6)."""
    states = np.asarray(states, dtype=float)
    out = states.copy()
    out[..., :3] = to_global(states[..., :3], origin)
    return out


def sample_origin(pose, ranges, rng: np.random.Generator) -> np.ndarray:
    """Draw a random frame origin around a pose.

    ranges = (d_x, d_y, d_psi): each origin component is the pose component
    plus an independent uniform offset in [-d, d]. Zero ranges return the
    pose itself.
    """
    d = np.asarray(ranges, dtype=float)
    if np.any(d < 0.0):
        raise ValueError("offset ranges must be non-negative")
    off = rng.uniform(-d, d)
    return np.asarray(pose, dtype=float)[:3] + off
