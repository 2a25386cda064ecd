"""Lifted linear latent model with an eigenvalue-parameterized transition.

The latent transition matrix A is never a free parameter: it is rebuilt on
demand from a spectrum of conjugate pairs (re_j +/- i*im_j) stored as 2x2
rotation-scaling blocks [[re, im], [-im, re]] plus real eigenvalues on the
trailing diagonal. K latent dimensions hold floor(K/2) pairs and K mod 2
reals.

Two lift modes:
  concat        phi(s) = [s; proj(enc(window))], physical state embedded in
                the leading block, encoder tail linearly projected to K - m
  encoder-only  phi(s) = enc(window), width K, no physical embedding
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LiftModeError
from .nn import Mlp, glorot_uniform
from .normalize import NormalizationMeta

LIFT_MODES = ("concat", "encoder-only")


def allocate_eigenvalues(latent_dim: int):
    """Split K latent dimensions into (n_pairs, n_reals) = (K // 2, K % 2)."""
    if latent_dim < 1:
        raise ValueError("latent dimension must be positive")
    return latent_dim // 2, latent_dim % 2


@dataclass
class EigenSpectrum:
    pair_re: np.ndarray   # (n_pairs,)
    pair_im: np.ndarray   # (n_pairs,)
    reals: np.ndarray     # (n_reals,)

    def __post_init__(self):
        self.pair_re = np.asarray(self.pair_re, dtype=float).reshape(-1)
        self.pair_im = np.asarray(self.pair_im, dtype=float).reshape(-1)
        self.reals = np.asarray(self.reals, dtype=float).reshape(-1)
        if len(self.pair_re) != len(self.pair_im):
            raise ValueError("pair_re and pair_im lengths differ")

    @property
    def latent_dim(self) -> int:
        return 2 * len(self.pair_re) + len(self.reals)

    def eigenvalues(self) -> np.ndarray:
        """Complex eigenvalue multiset {re_j +/- i im_j} U {r_k}."""
        pairs = self.pair_re + 1j * self.pair_im
        return np.concatenate([pairs, np.conj(pairs), self.reals.astype(complex)])

    def spectral_radius(self) -> float:
        mags = np.hypot(self.pair_re, self.pair_im)
        if len(self.reals):
            return float(max(mags.max() if len(mags) else 0.0, np.abs(self.reals).max()))
        return float(mags.max()) if len(mags) else 0.0

    @classmethod
    def init_random(cls, latent_dim: int, rng: np.random.Generator) -> "EigenSpectrum":
        """Near-unit, lightly damped spectrum: |pairs| < 1, reals in [0.9, 0.99]."""
        n_pairs, n_reals = allocate_eigenvalues(latent_dim)
        return cls(
            pair_re=rng.uniform(0.85, 0.99, n_pairs),
            pair_im=rng.uniform(-0.1, 0.1, n_pairs),
            reals=rng.uniform(0.9, 0.99, n_reals),
        )


def build_transition(spectrum: EigenSpectrum) -> np.ndarray:
    """Assemble the block-diagonal K x K transition matrix from a spectrum."""
    K = spectrum.latent_dim
    A = np.zeros((K, K))
    for j in range(len(spectrum.pair_re)):
        c, p = spectrum.pair_re[j], spectrum.pair_im[j]
        A[2 * j, 2 * j] = c
        A[2 * j, 2 * j + 1] = p
        A[2 * j + 1, 2 * j] = -p
        A[2 * j + 1, 2 * j + 1] = c
    off = 2 * len(spectrum.pair_re)
    for k in range(len(spectrum.reals)):
        A[off + k, off + k] = spectrum.reals[k]
    return A


def transition_grad(spectrum: EigenSpectrum, dA: np.ndarray):
    """Map a gradient w.r.t. A back onto the spectrum parameters."""
    n_pairs = len(spectrum.pair_re)
    d_re = np.empty(n_pairs)
    d_im = np.empty(n_pairs)
    for j in range(n_pairs):
        d_re[j] = dA[2 * j, 2 * j] + dA[2 * j + 1, 2 * j + 1]
        d_im[j] = dA[2 * j, 2 * j + 1] - dA[2 * j + 1, 2 * j]
    off = 2 * n_pairs
    d_reals = np.array([dA[off + k, off + k] for k in range(len(spectrum.reals))])
    return d_re, d_im, d_reals


DEFAULT_ENCODER_HIDDEN = (64, 128)
DEFAULT_DECODER_HIDDEN = (128, 64, 64)


@dataclass
class LatentModel:
    """Encoder + spectrum-parameterized linear latent dynamics + decoder."""

    m: int                      # physical state width
    n: int                      # control width
    latent_dim: int             # K
    frames: int                 # c, encoder input = m * c stacked frames
    lift_mode: str
    encoder: Mlp
    decoder: Mlp
    spectrum: EigenSpectrum
    B: np.ndarray               # (K, n)
    proj_W: np.ndarray | None = None   # (K, K - m), concat mode only
    proj_b: np.ndarray | None = None   # (K - m,)
    meta: NormalizationMeta = field(default_factory=NormalizationMeta)
    dt: float = 0.01

    def __post_init__(self):
        if self.lift_mode not in LIFT_MODES:
            raise LiftModeError(f"unknown lift mode {self.lift_mode!r}")
        if self.encoder.widths[0] != self.m * self.frames:
            raise ValueError("encoder input width must be m * frames")
        if self.encoder.widths[-1] != self.latent_dim:
            raise ValueError("encoder output width must be the latent dimension")
        if self.decoder.widths[0] != self.latent_dim or self.decoder.widths[-1] != self.m:
            raise ValueError("decoder must map latent_dim -> m")
        if self.spectrum.latent_dim != self.latent_dim:
            raise ValueError("spectrum size does not match the latent dimension")
        self.B = np.asarray(self.B, dtype=float).reshape(self.latent_dim, self.n)
        if self.lift_mode == "concat":
            if self.latent_dim <= self.m:
                raise LiftModeError("concat mode needs latent_dim > m")
            if self.proj_W is None or self.proj_b is None:
                raise ValueError("concat mode needs the projection parameters")
            self.proj_W = np.asarray(self.proj_W, dtype=float)
            self.proj_b = np.asarray(self.proj_b, dtype=float)
            if self.proj_W.shape != (self.latent_dim, self.latent_dim - self.m):
                raise ValueError("projection must map K -> K - m")

    # -- construction ----------------------------------------------------

    @classmethod
    def create(cls, m: int = 6, n: int = 2, latent_dim: int = 22, frames: int = 1,
               lift_mode: str = "concat", seed: int = 0,
               encoder_hidden=DEFAULT_ENCODER_HIDDEN,
               decoder_hidden=DEFAULT_DECODER_HIDDEN,
               meta: NormalizationMeta | None = None,
               dt: float = 0.01) -> "LatentModel":
        if lift_mode not in LIFT_MODES:
            raise LiftModeError(f"unknown lift mode: {lift_mode!r}")
        if lift_mode == "concat" and latent_dim <= m:
            raise LiftModeError("concat mode needs latent_dim > m")
        rng = np.random.default_rng(seed)
        enc_widths = [m * frames, *encoder_hidden, latent_dim, latent_dim]
        dec_widths = [latent_dim, *decoder_hidden, m]
        encoder = Mlp(enc_widths, rng)
        decoder = Mlp(dec_widths, rng)
        spectrum = EigenSpectrum.init_random(latent_dim, rng)
        B = rng.uniform(-0.01, 0.01, size=(latent_dim, n))
        proj_W = proj_b = None
        if lift_mode == "concat":
            proj_W = glorot_uniform(latent_dim, latent_dim - m, rng)
            proj_b = np.zeros(latent_dim - m)
        if meta is None:
            meta = NormalizationMeta()
        return cls(m=m, n=n, latent_dim=latent_dim, frames=frames,
                   lift_mode=lift_mode, encoder=encoder, decoder=decoder,
                   spectrum=spectrum, B=B, proj_W=proj_W, proj_b=proj_b,
                   meta=meta, dt=dt)

    # -- inference -------------------------------------------------------

    def lift(self, window: np.ndarray) -> np.ndarray:
        """Lift normalized state windows (..., m * frames) to latents (..., K).

        The current frame is the trailing m columns of the window.
        """
        window = np.asarray(window, dtype=float)
        single = window.ndim == 1
        w2 = np.atleast_2d(window)
        if w2.shape[-1] != self.m * self.frames:
            raise ValueError("window width must be m * frames")
        e = self.encoder.forward(w2)
        if self.lift_mode == "encoder-only":
            out = e
        else:
            tail = e @ self.proj_W + self.proj_b
            out = np.concatenate([w2[:, -self.m:], tail], axis=-1)
        return out[0] if single else out

    def transition(self) -> np.ndarray:
        return build_transition(self.spectrum)

    def latent_step(self, phi: np.ndarray, u: np.ndarray) -> np.ndarray:
        """phi_next = A phi + B u for row-stacked latents."""
        A = self.transition()
        phi = np.asarray(phi, dtype=float)
        u = np.asarray(u, dtype=float)
        single = phi.ndim == 1
        out = np.atleast_2d(phi) @ A.T + np.atleast_2d(u) @ self.B.T
        return out[0] if single else out

    def latent_rollout(self, phi0: np.ndarray, controls: np.ndarray) -> np.ndarray:
        """Iterate the latent dynamics over (..., p, n) controls.

        Returns (..., p, K): latents after 1..p steps (phi0 not included).
        """
        A = self.transition()
        phi0 = np.asarray(phi0, dtype=float)
        controls = np.asarray(controls, dtype=float)
        single = phi0.ndim == 1
        phi = np.atleast_2d(phi0)
        U = controls.reshape((1,) + controls.shape) if controls.ndim == 2 else controls
        p = U.shape[1]
        out = np.empty((phi.shape[0], p, self.latent_dim))
        cur = phi
        for i in range(p):
            cur = cur @ A.T + U[:, i] @ self.B.T
            out[:, i] = cur
        return out[0] if single else out

    def decode(self, phi: np.ndarray) -> np.ndarray:
        """Map latents (..., K) back to normalized physical states (..., m)."""
        phi = np.asarray(phi, dtype=float)
        lead = phi.shape[:-1]
        flat = phi.reshape(-1, self.latent_dim)
        out = self.decoder.forward(flat)
        return out.reshape(*lead, self.m)

    def extract_subsystem(self):
        """Leading physically-interpretable block (A_sub, B_sub).

        Returns the m x m / m x n principal blocks, widened to m + 1 when a
        conjugate block straddles the boundary so no block is cut in half.
        """
        if self.lift_mode != "concat":
            raise LiftModeError("subsystem extraction needs the concat lift mode")
        cut = self.m
        n_pairs = len(self.spectrum.pair_re)
        if cut < 2 * n_pairs and cut % 2 == 1:
            cut += 1  # keep the straddling 2x2 block whole
        A = self.transition()
        return A[:cut, :cut].copy(), self.B[:cut, :].copy()

    # -- parameters ------------------------------------------------------

    def named_params(self):
        """Trainable (name, array) pairs in a fixed order."""
        out = []
        for i, W in enumerate(self.encoder.weights):
            out.append((f"enc_W{i}", W))
        for i, b in enumerate(self.encoder.biases):
            out.append((f"enc_b{i}", b))
        if self.lift_mode == "concat":
            out.append(("proj_W", self.proj_W))
            out.append(("proj_b", self.proj_b))
        for i, W in enumerate(self.decoder.weights):
            out.append((f"dec_W{i}", W))
        for i, b in enumerate(self.decoder.biases):
            out.append((f"dec_b{i}", b))
        out.append(("spec_re", self.spectrum.pair_re))
        out.append(("spec_im", self.spectrum.pair_im))
        out.append(("spec_reals", self.spectrum.reals))
        out.append(("B", self.B))
        return out

    def params(self):
        return [p for _, p in self.named_params()]
