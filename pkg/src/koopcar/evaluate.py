"""Open-loop prediction metrics, tracking metrics, and reference generation.

Prediction quality is measured the way the model is used: anchor a local
frame at a window start, lift once, roll the latent model forward under the
recorded controls, decode, and compare in the global frame. Windows never
overlap so each sample is counted once.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import plant as plant_mod
from .data import Episode
from .errors import DataError
from .frames import states_to_global, states_to_local, wrap_angle
from .koopman import LatentModel
from .mpc import TrackingLog

STATE_NAMES = ("x", "y", "psi", "vx", "vy", "r")
REPORT_FORMAT_VERSION = 1


def predict_window(model: LatentModel, episode: Episode, start: int,
                   horizon: int) -> np.ndarray:
    """Predict the `horizon` states after sample `start` (global frame).

    `start` anchors the local frame and must leave frames-1 history rows
    before it and `horizon` recorded samples after it.
    """
    c = model.frames
    if start < c - 1 or start + horizon >= len(episode):
        raise DataError("prediction window out of episode bounds")
    meta = model.meta
    origin = episode.states[start, :3]
    raw = episode.states[start - c + 1: start + 1]
    local = meta.normalize_states(states_to_local(raw, origin))
    phi0 = model.lift(local.reshape(-1))
    u = meta.normalize_controls(episode.controls[start: start + horizon])
    latents = model.latent_rollout(phi0, u)
    pred_local = meta.denormalize_states(model.decode(latents))
    return states_to_global(pred_local, origin)


def rmse_prediction(model: LatentModel, episodes, horizon: int = 120) -> dict:
    """Pooled per-dimension RMSE over non-overlapping windows of all episodes.

    Yaw errors are wrapped to (-pi, pi] before squaring. Episodes shorter
    than one window are skipped; raises DataError when nothing fits.
    """
    if isinstance(episodes, Episode):
        episodes = [episodes]
    if len(episodes) == 0:
        raise DataError("no episodes to evaluate")
    c = model.frames
    sq = np.zeros(6)
    count = 0
    n_windows = 0
    for ep in episodes:
        for start in range(c - 1, len(ep) - horizon, horizon):
            pred = predict_window(model, ep, start, horizon)
            err = pred - ep.states[start + 1: start + 1 + horizon]
            err[:, 2] = wrap_angle(err[:, 2])
            sq += (err ** 2).sum(axis=0)
            count += horizon
            n_windows += 1
    if n_windows == 0:
        raise DataError(f"no episode admits a {horizon}-step window")
    rmse = np.sqrt(sq / count)
    out = {name: float(v) for name, v in zip(STATE_NAMES, rmse)}
    out["n_windows"] = n_windows
    return out


def tracking_errors(log: TrackingLog, chunk: int = 2000) -> dict:
    """Point-to-point and lateral path errors plus solver statistics.

    Point-to-point compares positions at equal timestamps; lateral is the
    distance to the nearest reference point regardless of timing, so it can
    only be smaller. The all-pairs distance runs in chunks to bound memory.
    """
    if len(log) == 0:
        raise DataError("empty tracking log")
    p2p = np.hypot(log.state[:, 0] - log.ref[:, 0],
                   log.state[:, 1] - log.ref[:, 1])
    refs = log.ref[:, :2]
    pos = log.state[:, :2]
    lateral = np.empty(len(pos))
    for i in range(0, len(pos), chunk):
        block = pos[i: i + chunk]
        d = np.hypot(block[:, None, 0] - refs[None, :, 0],
                     block[:, None, 1] - refs[None, :, 1])
        lateral[i: i + chunk] = d.min(axis=1)
    return {
        "p2p_mean": float(p2p.mean()),
        "p2p_max": float(p2p.max()),
        "lateral_mean": float(lateral.mean()),
        "lateral_max": float(lateral.max()),
        "solve_ms_mean": float(log.solve_ms.mean()),
        "solve_ms_max": float(log.solve_ms.max()),
        "eps_max": float(log.eps.max()),
        "n_steps": int(len(log)),
        "diverged": bool(log.diverged),
    }


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class PredictionReport:
    rmse: dict
    horizon: int
    n_episodes: int
    checkpoint_sha256: str
    dataset_sha256: str
    format_version: int = REPORT_FORMAT_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


@dataclass
class TrackingReport:
    errors: dict
    controller: dict
    checkpoint_sha256: str
    reference_sha256: str
    format_version: int = REPORT_FORMAT_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


REFERENCE_PATTERNS = ("straight", "circle", "lane-change", "weave")


def make_reference(pattern: str, n_steps: int, v_ref: float = 7.0,
                   params: plant_mod.VehicleParams | None = None,
                   radius: float = 40.0, amplitude: float = 0.8,
                   period_s: float = 4.0, k_speed: float = 0.5) -> Episode:
    """Dynamically feasible reference: the plant driven by a steering schedule.

    The trajectory is an actual closed-loop plant run (proportional speed
    hold toward v_ref, scheduled steering wheel angle), so a controller with
    a perfect model could follow it exactly. Patterns:

    straight     zero steering
    circle       constant steering for `radius` (1 s ramp-in)
    lane-change  one sine period of steering, then straight
    weave        continuous sinusoidal steering
    """
    if pattern not in REFERENCE_PATTERNS:
        raise DataError(f"unknown reference pattern: {pattern!r}")
    if n_steps < 2:
        raise DataError("reference needs at least 2 steps")
    if params is None:
        params = plant_mod.VehicleParams()
    wheelbase = params.lf + params.lr
    t = np.arange(n_steps) * params.dt
    if pattern == "straight":
        swa = np.zeros(n_steps)
    elif pattern == "circle":
        target = math.atan(wheelbase / radius) * params.steer_ratio
        swa = target * np.clip(t / 1.0, 0.0, 1.0)
    elif pattern == "lane-change":
        swa = np.where(t < period_s,
                       amplitude * np.sin(2.0 * np.pi * t / period_s), 0.0)
    else:
        swa = amplitude * np.sin(2.0 * np.pi * t / period_s)
    swa = np.clip(swa, -plant_mod.SWA_LIMIT, plant_mod.SWA_LIMIT)

    state = np.array([0.0, 0.0, 0.0, v_ref, 0.0, 0.0])
    states = np.empty((n_steps, 6))
    controls = np.empty((n_steps, 2))
    for k in range(n_steps):
        engine = min(max(k_speed * (v_ref - state[3]), -1.0), 1.0)
        controls[k] = (swa[k], engine)
        states[k] = state
        if k < n_steps - 1:
            state = plant_mod.step(state, controls[k], params)
    return Episode(t=t, states=states, controls=controls)
