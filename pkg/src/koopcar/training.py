"""Training pipeline: windows, frame randomization, losses, optimizer loop.

Batches are (p+1)-step state windows with their p controls, sampled inside
single episodes, re-expressed in a random local frame anchored near the
window start, then normalized. The loss combines per-step reconstruction,
latent rollout consistency, multi-step reconstruction through the rollout,
and an l2 penalty:

    L = a1 * (1/p) sum_i ||s_i - dec(lift(s_i))||^2
      + a2 * (1/p) sum_i ||lift(s_i) - rollout_i||^2
      + a3 *       sum_i ||s_i - dec(rollout_i)||^2
      + a4 * (sum of squared parameters),  i = 1..p,

averaged over the batch. Gradients are hand-derived through the whole graph
(encoder, projection, concatenation, spectrum-built transition, rollout,
decoder).
"""

from __future__ import annotations

import configparser
import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import DataError, TrainingDiverged
from .frames import sample_origin, states_to_local, wrap_angle
from .koopman import LatentModel, build_transition, transition_grad
from .nn import Adam
from .normalize import NormalizationMeta


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 256
    latent_dim: int = 22
    horizon: int = 50          # p, rollout length
    alpha_rec: float = 1.0
    alpha_lat: float = 1.0
    alpha_multi: float = 1.0
    alpha_l2: float = 1e-6
    d_x: float = 2.0           # m, frame origin offset range
    d_y: float = 2.0           # m
    d_psi: float = math.radians(20.0)
    frames: int = 1            # c, stacked frames per encoder input
    epochs: int = 40
    steps_per_epoch: int = 250
    seed: int = 0
    lift_mode: str = "concat"

    def __post_init__(self):
        if self.horizon < 1 or self.batch_size < 1 or self.frames < 1:
            raise DataError("horizon, batch_size and frames must be positive")
        if self.epochs < 0 or self.steps_per_epoch < 1:
            raise DataError("bad epoch configuration")


_INI_LAYOUT = {
    "model": ("latent_dim", "frames", "lift_mode"),
    "train": ("lr", "batch_size", "horizon", "alpha_rec", "alpha_lat",
              "alpha_multi", "alpha_l2", "epochs", "steps_per_epoch", "seed"),
    "augment": ("d_x", "d_y", "d_psi_deg"),
}


def save_train_config(cfg: TrainConfig, path) -> None:
    parser = configparser.ConfigParser()
    for section, keys in _INI_LAYOUT.items():
        parser[section] = {}
        for key in keys:
            if key == "d_psi_deg":
                parser[section][key] = repr(math.degrees(cfg.d_psi))
            elif key == "lift_mode":
                parser[section][key] = cfg.lift_mode
            else:
                parser[section][key] = repr(getattr(cfg, key))
    with open(path, "w") as fh:
        parser.write(fh)


def load_train_config(path) -> TrainConfig:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise DataError(f"malformed config {path}: {exc}") from exc
    known = {k for keys in _INI_LAYOUT.values() for k in keys}
    kwargs = {}
    for section in parser.sections():
        if section not in _INI_LAYOUT:
            raise DataError(f"unknown config section [{section}] in {path}")
        for key, raw in parser[section].items():
            if key not in known:
                raise DataError(f"unknown config key {key!r} in {path}")
            if key == "lift_mode":
                kwargs[key] = raw.strip().strip("'\"")
            elif key == "d_psi_deg":
                kwargs["d_psi"] = math.radians(float(raw))
            elif key in ("latent_dim", "frames", "batch_size", "horizon",
                         "epochs", "steps_per_epoch", "seed"):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
    try:
        return TrainConfig(**kwargs)
    except TypeError as exc:
        raise DataError(f"bad config {path}: {exc}") from exc


@dataclass
class SequenceBatch:
    states: np.ndarray     # (B, p+1, m) normalized, local frame
    controls: np.ndarray   # (B, p, n) normalized
    enc_in: np.ndarray     # (B, p+1, m*c) stacked trailing frames


@dataclass
class LossBreakdown:
    total: float
    rec: float
    lat: float
    multi: float
    l2: float


def fit_meta(dataset: Dataset, cfg: TrainConfig) -> NormalizationMeta:
    """Fit pose normalization bounds from the training split.

    The bound is analytic: the largest in-window planar displacement (yaw
    change) any anchor can see, plus the worst-case random origin offset,
    padded 10%. It covers every random frame draw by construction. Engine
    scales are unit because simulator episodes store the signed fraction.
    """
    train_eps = dataset.split("train")
    if not train_eps:
        raise DataError("dataset has no training episodes")
    span_lo = -(cfg.frames - 1)
    span_hi = cfg.horizon
    max_disp = 0.0
    max_dyaw = 0.0
    for ep in train_eps:
        pos = ep.states[:, :2]
        yaw = ep.states[:, 2]
        T = len(ep)
        for off in range(span_lo, span_hi + 1):
            if off == 0 or T <= abs(off):
                continue
            if off > 0:
                d = pos[off:] - pos[:-off]
                dy = wrap_angle(yaw[off:] - yaw[:-off])
            else:
                d = pos[:off] - pos[-off:]
                dy = wrap_angle(yaw[:off] - yaw[-off:])
            max_disp = max(max_disp, float(np.max(np.hypot(d[:, 0], d[:, 1]))))
            max_dyaw = max(max_dyaw, float(np.max(np.abs(dy))))
    xy_bound = (max_disp + math.hypot(cfg.d_x, cfg.d_y)) * 1.1
    psi_bound = (max_dyaw + cfg.d_psi) * 1.1
    return NormalizationMeta(pose_xy_bound=max(xy_bound, 1e-6),
                             pose_psi_bound=max(psi_bound, 1e-6),
                             throttle_max=1.0, brake_max=1.0)


class WindowSampler:
    """Uniform sampler over all eligible (p+1)-step windows of the train split."""

    def __init__(self, episodes, horizon: int, frames: int):
        self.horizon = horizon
        self.frames = frames
        self.episodes = []
        counts = []
        for ep in episodes:
            count = len(ep) - horizon - frames + 1
            if count < 1:
                warnings.warn(
                    f"episode with {len(ep)} rows is shorter than one "
                    f"window (p={horizon}, c={frames}); skipped")
                continue
            self.episodes.append(ep)
            counts.append(count)
        if not self.episodes:
            raise DataError("no episode is long enough for the configured window")
        self.counts = np.array(counts)
        self.weights = self.counts / self.counts.sum()

    def sample(self, cfg: TrainConfig, meta: NormalizationMeta,
               rng: np.random.Generator) -> SequenceBatch:
        p, c = self.horizon, self.frames
        B = cfg.batch_size
        m = 6
        states = np.empty((B, p + 1, m))
        controls = np.empty((B, p, 2))
        enc_in = np.empty((B, p + 1, m * c))
        ranges = (cfg.d_x, cfg.d_y, cfg.d_psi)
        eis = rng.choice(len(self.episodes), size=B, p=self.weights)
        for b in range(B):
            ei = eis[b]
            ep = self.episodes[ei]
            k0 = int(rng.integers(self.counts[ei])) + c - 1
            raw = ep.states[k0 - c + 1: k0 + p + 1]
            origin = sample_origin(ep.states[k0, :3], ranges, rng)
            local = meta.normalize_states(states_to_local(raw, origin))
            states[b] = local[c - 1:]
            controls[b] = meta.normalize_controls(ep.controls[k0: k0 + p])
            if c == 1:
                enc_in[b] = local
            else:
                for i in range(p + 1):
                    enc_in[b, i] = local[i: i + c].reshape(-1)
        return SequenceBatch(states=states, controls=controls, enc_in=enc_in)


def build_eval_windows(episodes, cfg: TrainConfig, meta: NormalizationMeta,
                       max_windows: int = 256) -> SequenceBatch:
    """Deterministic evenly spaced windows with exact-anchor frames (no jitter)."""
    p, c = cfg.horizon, cfg.frames
    picks = []
    for ep in episodes:
        count = len(ep) - p - c + 1
        if count < 1:
            continue
        picks.extend((ep, k) for k in range(0, count, max(1, (p + 1) // 2)))
    if not picks:
        raise DataError("no evaluation window fits the configured horizon")
    if len(picks) > max_windows:
        idx = np.linspace(0, len(picks) - 1, max_windows).astype(int)
        picks = [picks[i] for i in idx]
    B = len(picks)
    states = np.empty((B, p + 1, 6))
    controls = np.empty((B, p, 2))
    enc_in = np.empty((B, p + 1, 6 * c))
    for b, (ep, start) in enumerate(picks):
        k0 = start + c - 1
        raw = ep.states[k0 - c + 1: k0 + p + 1]
        origin = ep.states[k0, :3]
        local = meta.normalize_states(states_to_local(raw, origin))
        states[b] = local[c - 1:]
        controls[b] = meta.normalize_controls(ep.controls[k0: k0 + p])
        if c == 1:
            enc_in[b] = local
        else:
            for i in range(p + 1):
                enc_in[b, i] = local[i: i + c].reshape(-1)
    return SequenceBatch(states=states, controls=controls, enc_in=enc_in)


# -- loss graph ----------------------------------------------------------


def _forward(model: LatentModel, batch: SequenceBatch, cfg: TrainConfig):
    B, p1, m = batch.states.shape
    p = p1 - 1
    K = model.latent_dim

    enc_flat = batch.enc_in.reshape(B * p1, -1)
    enc_out, enc_cache = model.encoder.forward_cached(enc_flat)
    if model.lift_mode == "concat":
        tail = enc_out @ model.proj_W + model.proj_b
        phi_enc = np.concatenate([batch.states.reshape(B * p1, m), tail], axis=1)
    else:
        phi_enc = enc_out
    phi_enc = phi_enc.reshape(B, p1, K)

    A = build_transition(model.spectrum)
    phi_hat = np.empty((B, p, K))
    cur = phi_enc[:, 0]
    for i in range(p):
        cur = cur @ A.T + batch.controls[:, i] @ model.B.T
        phi_hat[:, i] = cur

    dec_r_in = phi_enc[:, 1:].reshape(B * p, K)
    dec_r_out, dec_r_cache = model.decoder.forward_cached(dec_r_in)
    dec_mr_in = phi_hat.reshape(B * p, K)
    dec_mr_out, dec_mr_cache = model.decoder.forward_cached(dec_mr_in)

    targets = batch.states[:, 1:].reshape(B * p, m)
    res_r = dec_r_out - targets
    res_l = phi_enc[:, 1:] - phi_hat
    res_mr = dec_mr_out - targets

    l2 = 0.0
    for _, param in model.named_params():
        l2 += float(np.sum(param * param))

    loss_rec = float(np.sum(res_r * res_r)) / (B * p)
    loss_lat = float(np.sum(res_l * res_l)) / (B * p)
    loss_multi = float(np.sum(res_mr * res_mr)) / B
    total = (cfg.alpha_rec * loss_rec + cfg.alpha_lat * loss_lat
             + cfg.alpha_multi * loss_multi + cfg.alpha_l2 * l2)
    breakdown = LossBreakdown(total=total, rec=loss_rec, lat=loss_lat,
                              multi=loss_multi, l2=l2)
    ctx = dict(B=B, p=p, m=m, K=K, A=A, enc_out=enc_out, enc_cache=enc_cache,
               phi_enc=phi_enc, phi_hat=phi_hat, dec_r_cache=dec_r_cache,
               dec_mr_cache=dec_mr_cache, res_r=res_r, res_l=res_l,
               res_mr=res_mr)
    return breakdown, ctx


def loss_forward(model: LatentModel, batch: SequenceBatch,
                 cfg: TrainConfig) -> LossBreakdown:
    breakdown, _ = _forward(model, batch, cfg)
    return breakdown


def loss_and_grads(model: LatentModel, batch: SequenceBatch, cfg: TrainConfig):
    """Loss breakdown plus gradients for every trainable parameter (by name)."""
    breakdown, ctx = _forward(model, batch, cfg)
    B, p, m, K = ctx["B"], ctx["p"], ctx["m"], ctx["K"]
    A = ctx["A"]
    phi_enc, phi_hat = ctx["phi_enc"], ctx["phi_hat"]

    d_dec_r = (2.0 * cfg.alpha_rec / (B * p)) * ctx["res_r"]
    d_dec_mr = (2.0 * cfg.alpha_multi / B) * ctx["res_mr"]
    dphi_r, dec_dWs_r, dec_dbs_r = model.decoder.backward(ctx["dec_r_cache"], d_dec_r)
    dphi_mr, dec_dWs_mr, dec_dbs_mr = model.decoder.backward(ctx["dec_mr_cache"], d_dec_mr)

    d_lat = (2.0 * cfg.alpha_lat / (B * p)) * ctx["res_l"]
    dphi_enc = np.zeros((B, p + 1, K))
    dphi_enc[:, 1:] = d_lat + dphi_r.reshape(B, p, K)
    dphi_hat = dphi_mr.reshape(B, p, K) - d_lat

    dA = np.zeros((K, K))
    dB = np.zeros((K, model.n))
    g = np.zeros((B, K))
    for i in range(p, 0, -1):
        g = g + dphi_hat[:, i - 1]
        prev = phi_enc[:, 0] if i == 1 else phi_hat[:, i - 2]
        dA += g.T @ prev
        dB += g.T @ batch.controls[:, i - 1]
        g = g @ A
    dphi_enc[:, 0] += g

    dphi_enc_flat = dphi_enc.reshape(B * (p + 1), K)
    grads = {}
    if model.lift_mode == "concat":
        dtail = dphi_enc_flat[:, m:]
        grads["proj_W"] = ctx["enc_out"].T @ dtail
        grads["proj_b"] = dtail.sum(axis=0)
        denc = dtail @ model.proj_W.T
    else:
        denc = dphi_enc_flat
    _, enc_dWs, enc_dbs = model.encoder.backward(ctx["enc_cache"], denc)

    for i in range(model.encoder.n_layers):
        grads[f"enc_W{i}"] = enc_dWs[i]
        grads[f"enc_b{i}"] = enc_dbs[i]
    for i in range(model.decoder.n_layers):
        grads[f"dec_W{i}"] = dec_dWs_r[i] + dec_dWs_mr[i]
        grads[f"dec_b{i}"] = dec_dbs_r[i] + dec_dbs_mr[i]

    d_re, d_im, d_reals = transition_grad(model.spectrum, dA)
    grads["spec_re"] = d_re
    grads["spec_im"] = d_im
    grads["spec_reals"] = d_reals
    grads["B"] = dB

    for name, param in model.named_params():
        grads[name] = grads[name] + 2.0 * cfg.alpha_l2 * param

    return breakdown, grads


# -- training loop -------------------------------------------------------

LOG_HEADER = ["epoch", "L", "L_r", "L_l", "L_mr", "l2", "val_L", "spectral_radius"]


def write_log(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in LOG_HEADER})


def train(dataset: Dataset, cfg: TrainConfig, log_path=None, progress=False):
    """Fit a latent model on the dataset's train split.

    Returns (model, log_rows). The model carries the parameters of the best
    validation epoch; log rows hold the epoch-mean training losses, the
    validation loss and the spectral radius. Raises TrainingDiverged (after
    writing the log) if validation loss becomes non-finite or grows a
    thousandfold.
    """
    meta = fit_meta(dataset, cfg)
    model = LatentModel.create(m=6, n=2, latent_dim=cfg.latent_dim,
                               frames=cfg.frames, lift_mode=cfg.lift_mode,
                               seed=cfg.seed, meta=meta, dt=dataset.dt)
    sampler = WindowSampler(dataset.split("train"), cfg.horizon, cfg.frames)
    val_eps = dataset.split("val") or dataset.split("train")
    val_batch = build_eval_windows(val_eps, cfg, meta)
    rng = np.random.default_rng([cfg.seed, 0x5eed])

    named = model.named_params()
    opt = Adam([arr for _, arr in named], cfg.lr)
    order = [name for name, _ in named]

    rows = []
    best_val = math.inf
    best_params = None
    val_0 = None
    try:
        for epoch in range(1, cfg.epochs + 1):
            acc = np.zeros(5)
            for _ in range(cfg.steps_per_epoch):
                batch = sampler.sample(cfg, meta, rng)
                breakdown, grads = loss_and_grads(model, batch, cfg)
                opt.step([grads[name] for name in order])
                acc += [breakdown.total, breakdown.rec, breakdown.lat,
                        breakdown.multi, breakdown.l2]
            acc /= cfg.steps_per_epoch
            val_loss = loss_forward(model, val_batch, cfg).total
            radius = model.spectrum.spectral_radius()
            rows.append({
                "epoch": epoch, "L": acc[0], "L_r": acc[1], "L_l": acc[2],
                "L_mr": acc[3], "l2": acc[4], "val_L": val_loss,
                "spectral_radius": radius,
            })
            if progress:
                print(f"epoch {epoch:4d}  L {acc[0]:.6f}  val_L {val_loss:.6f}  "
                      f"radius {radius:.4f}", flush=True)
            if val_0 is None:
                val_0 = val_loss
            if not math.isfinite(val_loss) or val_loss > 1e3 * max(val_0, 1e-12):
                raise TrainingDiverged(
                    f"validation loss {val_loss} at epoch {epoch} "
                    f"(initial {val_0})")
            if val_loss < best_val:
                best_val = val_loss
                best_params = [arr.copy() for _, arr in named]
    finally:
        if log_path is not None:
            write_log(rows, log_path)

    if best_params is not None:
        for (_, arr), saved in zip(named, best_params):
            arr[:] = saved
    return model, rows
