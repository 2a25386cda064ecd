"""Channel normalization for states and controls.

Velocity channels map fixed physical ranges onto [-2, 2]; pose channels map
symmetric fitted bounds onto [-2, 2]; the steering channel maps its physical
limit onto [-1, 1]. The engine channel is piecewise: positive raw values
(throttle) map onto (0, 1] and negative raw values (brake, stored as a
negative number) map onto [-1, 0). The raw engine scales are configurable;
the protocol default is a 0.2 throttle opening and a 10 MPa brake pressure,
while datasets recorded by the built-in simulator use unit scales because
its engine command is already a signed fraction.

State column order everywhere: x, y, psi, vx, vy, r. Control order: swa,
engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

VX_RANGE = (0.0, 27.0)
VY_RANGE = (-1.7, 1.7)
R_RANGE = (-1.2, 1.2)
SWA_MAX = 7.85
POSE_TARGET = 2.0
VEL_TARGET = 2.0


def _affine(v, lo, hi, target):
    # [lo, hi] -> [-target, target]
    return (v - lo) / (hi - lo) * (2.0 * target) - target


def _affine_inv(n, lo, hi, target):
    return (n + target) / (2.0 * target) * (hi - lo) + lo


@dataclass
class NormalizationMeta:
    """Per-channel scaling applied before lifting and undone after decoding."""

    pose_xy_bound: float = 20.0
    pose_psi_bound: float = 1.0
    vx_range: tuple = VX_RANGE
    vy_range: tuple = VY_RANGE
    r_range: tuple = R_RANGE
    swa_max: float = SWA_MAX
    throttle_max: float = 0.2
    brake_max: float = 10.0

    def __post_init__(self):
        if self.pose_xy_bound <= 0 or self.pose_psi_bound <= 0:
            raise DataError("pose bounds must be positive")
        if self.throttle_max <= 0 or self.brake_max <= 0:
            raise DataError("engine scales must be positive")

    # -- states ---------------------------------------------------------

    def normalize_states(self, states: np.ndarray) -> np.ndarray:
        s = np.asarray(states, dtype=float)
        out = np.empty_like(s)
        out[..., 0] = s[..., 0] / self.pose_xy_bound * POSE_TARGET
        out[..., 1] = s[..., 1] / self.pose_xy_bound * POSE_TARGET
        out[..., 2] = s[..., 2] / self.pose_psi_bound * POSE_TARGET
        out[..., 3] = _affine(s[..., 3], *self.vx_range, VEL_TARGET)
        out[..., 4] = _affine(s[..., 4], *self.vy_range, VEL_TARGET)
        out[..., 5] = _affine(s[..., 5], *self.r_range, VEL_TARGET)
        return out

    def denormalize_states(self, states: np.ndarray) -> np.ndarray:
        s = np.asarray(states, dtype=float)
        out = np.empty_like(s)
        out[..., 0] = s[..., 0] * self.pose_xy_bound / POSE_TARGET
        out[..., 1] = s[..., 1] * self.pose_xy_bound / POSE_TARGET
        out[..., 2] = s[..., 2] * self.pose_psi_bound / POSE_TARGET
        out[..., 3] = _affine_inv(s[..., 3], *self.vx_range, VEL_TARGET)
        out[..., 4] = _affine_inv(s[..., 4], *self.vy_range, VEL_TARGET)
        out[..., 5] = _affine_inv(s[..., 5], *self.r_range, VEL_TARGET)
        return out

    # -- controls -------------------------------------------------------

    def normalize_controls(self, controls: np.ndarray) -> np.ndarray:
        u = np.asarray(controls, dtype=float)
        out = np.empty_like(u)
        out[..., 0] = u[..., 0] / self.swa_max
        eng = u[..., 1]
        out[..., 1] = np.where(eng > 0.0, eng / self.throttle_max, eng / self.brake_max)
        return out

    def denormalize_controls(self, controls: np.ndarray) -> np.ndarray:
        u = np.asarray(controls, dtype=float)
        out = np.empty_like(u)
        out[..., 0] = u[..., 0] * self.swa_max
        eng = u[..., 1]
        out[..., 1] = np.where(eng > 0.0, eng * self.throttle_max, eng * self.brake_max)
        return out

    # -- rows -----------------------------------------------------------

    def normalize_row(self, row: np.ndarray) -> np.ndarray:
        """Normalize one or more 8-wide rows laid out as state(6) + control(2)."""
        row = np.asarray(row, dtype=float)
        out = np.empty_like(row)
        out[..., :6] = self.normalize_states(row[..., :6])
        out[..., 6:] = self.normalize_controls(row[..., 6:])
        return out

    def denormalize_row(self, row: np.ndarray) -> np.ndarray:
        row = np.asarray(row, dtype=float)
        out = np.empty_like(row)
        out[..., :6] = self.denormalize_states(row[..., :6])
        out[..., 6:] = self.denormalize_controls(row[..., 6:])
        return out

    # -- diagnostics ----------------------------------------------------

    def range_report(self, states: np.ndarray, controls: np.ndarray) -> dict:
        """Count samples outside the configured physical ranges per channel.

        Out-of-range values still pass through the affine maps unclamped;
        this report only flags them.
        """
        s = np.asarray(states, dtype=float)
        u = np.asarray(controls, dtype=float)
        report = {
            "x": int(np.sum(np.abs(s[..., 0]) > self.pose_xy_bound)),
            "y": int(np.sum(np.abs(s[..., 1]) > self.pose_xy_bound)),
            "psi": int(np.sum(np.abs(s[..., 2]) > self.pose_psi_bound)),
            "vx": int(np.sum((s[..., 3] < self.vx_range[0]) | (s[..., 3] > self.vx_range[1]))),
            "vy": int(np.sum((s[..., 4] < self.vy_range[0]) | (s[..., 4] > self.vy_range[1]))),
            "r": int(np.sum((s[..., 5] < self.r_range[0]) | (s[..., 5] > self.r_range[1]))),
            "swa": int(np.sum(np.abs(u[..., 0]) > self.swa_max)),
            "engine": int(np.sum((u[..., 1] > self.throttle_max) | (u[..., 1] < -self.brake_max))),
        }
        return report

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "pose_xy_bound": self.pose_xy_bound,
            "pose_psi_bound": self.pose_psi_bound,
            "vx_range": list(self.vx_range),
            "vy_range": list(self.vy_range),
            "r_range": list(self.r_range),
            "swa_max": self.swa_max,
            "throttle_max": self.throttle_max,
            "brake_max": self.brake_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationMeta":
        return cls(
            pose_xy_bound=float(d["pose_xy_bound"]),
            pose_psi_bound=float(d["pose_psi_bound"]),
            vx_range=tuple(d["vx_range"]),
            vy_range=tuple(d["vy_range"]),
            r_range=tuple(d["r_range"]),
            swa_max=float(d["swa_max"]),
            throttle_max=float(d["throttle_max"]),
            brake_max=float(d["brake_max"]),
        )
