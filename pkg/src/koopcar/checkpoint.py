"""Versioned JSON checkpoints: architecture, parameters, normalization."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .koopman import EigenSpectrum, LatentModel
from .nn import Mlp
from .normalize import NormalizationMeta

FORMAT_VERSION = 1


def _mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "widths": list(mlp.widths),
        "activation": ["tanh"] * (mlp.n_layers - 1) + ["linear"],
        "weights": [W.reshape(-1).tolist() for W in mlp.weights],  # row-major
        "biases": [b.tolist() for b in mlp.biases],
    }


def _mlp_from_dict(d: dict) -> Mlp:
    widths = [int(w) for w in d["widths"]]
    mlp = Mlp(widths)
    expected = ["tanh"] * (mlp.n_layers - 1) + ["linear"]
    if d.get("activation") != expected:
        raise DataError("unsupported activation tags in checkpoint")
    try:
        weights = [np.array(w, dtype=float).reshape(a, b)
                   for w, a, b in zip(d["weights"], widths[:-1], widths[1:])]
        biases = [np.array(b, dtype=float).reshape(w)
                  for b, w in zip(d["biases"], widths[1:])]
    except ValueError as exc:
        raise DataError(f"parameter shapes do not match widths: {exc}") from exc
    mlp.set_params(weights + biases)
    return mlp


def save_checkpoint(model: LatentModel, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "m": model.m,
        "n": model.n,
        "latent_dim": model.latent_dim,
        "frames": model.frames,
        "lift_mode": model.lift_mode,
        "dt": model.dt,
        "encoder": _mlp_to_dict(model.encoder),
        "decoder": _mlp_to_dict(model.decoder),
        "spectrum": {
            "pair_re": model.spectrum.pair_re.tolist(),
            "pair_im": model.spectrum.pair_im.tolist(),
            "reals": model.spectrum.reals.tolist(),
        },
        "B": model.B.reshape(-1).tolist(),
        "normalization": model.meta.to_dict(),
    }
    if model.lift_mode == "concat":
        doc["projection"] = {
            "W": model.proj_W.reshape(-1).tolist(),
            "b": model.proj_b.tolist(),
        }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> LatentModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed checkpoint {path}: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format_version in {path}")
    try:
        m, n = int(doc["m"]), int(doc["n"])
        K = int(doc["latent_dim"])
        lift_mode = doc["lift_mode"]
        spectrum = EigenSpectrum(
            pair_re=np.array(doc["spectrum"]["pair_re"], dtype=float),
            pair_im=np.array(doc["spectrum"]["pair_im"], dtype=float),
            reals=np.array(doc["spectrum"]["reals"], dtype=float),
        )
        proj_W = proj_b = None
        if lift_mode == "concat":
            proj_W = np.array(doc["projection"]["W"], dtype=float).reshape(K, K - m)
            proj_b = np.array(doc["projection"]["b"], dtype=float)
        return LatentModel(
            m=m, n=n, latent_dim=K, frames=int(doc["frames"]),
            lift_mode=lift_mode,
            encoder=_mlp_from_dict(doc["encoder"]),
            decoder=_mlp_from_dict(doc["decoder"]),
            spectrum=spectrum,
            B=np.array(doc["B"], dtype=float).reshape(K, n),
            proj_W=proj_W, proj_b=proj_b,
            meta=NormalizationMeta.from_dict(doc["normalization"]),
            dt=float(doc["dt"]),
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed checkpoint {path}: {exc}") from exc
