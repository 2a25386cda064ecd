"""Episode storage: CSV files plus a JSON manifest with split markers.

Episode CSV schema (one row per sample):
    t,x,y,psi,vx,vy,r,swa,engine
Row k holds the state at t_k and the control applied over [t_k, t_k + dt),
so state k+1 follows from (state k, control k).

Reference CSV schema (for tracking): t,x,y,psi,vx,vy,r. An episode CSV is
also accepted wherever a reference is expected (control columns ignored).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plant
from .errors import DataError

EPISODE_HEADER = "t,x,y,psi,vx,vy,r,swa,engine"
REFERENCE_HEADER = "t,x,y,psi,vx,vy,r"
MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


@dataclass
class Episode:
    t: np.ndarray         # (T,)
    states: np.ndarray    # (T, 6)
    controls: np.ndarray  # (T, 2)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 6)
        self.controls = np.asarray(self.controls, dtype=float).reshape(-1, 2)
        if not (len(self.t) == len(self.states) == len(self.controls)):
            raise DataError("episode arrays must share a length")

    def __len__(self) -> int:
        return len(self.t)

    def save_csv(self, path) -> None:
        rows = np.column_stack([self.t, self.states, self.controls])
        np.savetxt(path, rows, fmt="%.17g", delimiter=",",
                   header=EPISODE_HEADER, comments="")

    @classmethod
    def load_csv(cls, path) -> "Episode":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"episode file not found: {path}")
        with open(path) as fh:
            header = fh.readline().strip()
        if header != EPISODE_HEADER:
            raise DataError(f"bad episode header in {path}: {header!r}")
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if rows.shape[1] != 9:
            raise DataError(f"expected 9 columns in {path}, got {rows.shape[1]}")
        return cls(t=rows[:, 0], states=rows[:, 1:7], controls=rows[:, 7:9])


@dataclass
class Dataset:
    episodes: list = field(default_factory=list)
    splits: list = field(default_factory=list)   # "train" | "val" | "test" per episode
    dt: float = 0.01
    seed: int = 0

    def split(self, name: str) -> list:
        return [ep for ep, s in zip(self.episodes, self.splits) if s == name]

    def __len__(self) -> int:
        return len(self.episodes)


def assign_splits(n: int, fractions=(0.75, 0.125, 0.125)) -> list:
    """Contiguous train/val/test assignment; 40 episodes -> 30/5/5."""
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    out = ["train"] * n_train + ["val"] * n_val + ["test"] * (n - n_train - n_val)
    return out


def collect_episodes(n_episodes: int = 40, seed: int = 0,
                     params: plant.VehicleParams | None = None,
                     length_range=(1000, 4000)) -> Dataset:
    """Drive the simulator with random excitation into a split dataset.

    Episode lengths are uniform over length_range (inclusive) and every
    episode starts at rest at the global origin; distinct seeds give
    distinct data, the same seed reproduces it exactly.
    """
    if params is None:
        params = plant.VehicleParams()
    if n_episodes < 1:
        raise DataError("need at least one episode")
    rng = np.random.default_rng(seed)
    episodes = []
    for _ in range(n_episodes):
        length = int(rng.integers(length_range[0], length_range[1] + 1))
        ep_seed = int(rng.integers(0, 2**31))
        controls = plant.excite(length, ep_seed, params)
        traj = plant.rollout(np.zeros(6), controls, params)
        episodes.append(Episode(
            t=np.arange(length) * params.dt,
            states=traj[:length],
            controls=controls,
        ))
    return Dataset(episodes=episodes, splits=assign_splits(n_episodes),
                   dt=params.dt, seed=seed)


def save_dataset(dataset: Dataset, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (ep, split) in enumerate(zip(dataset.episodes, dataset.splits)):
        name = f"ep_{i:03d}.csv"
        ep.save_csv(out_dir / name)
        entries.append({"file": name, "rows": len(ep), "split": split})
    manifest = {
        "format_version": FORMAT_VERSION,
        "dt": dataset.dt,
        "seed": dataset.seed,
        "episodes": entries,
    }
    with open(out_dir / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(in_dir) -> Dataset:
    in_dir = Path(in_dir)
    manifest_path = in_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest {manifest_path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported manifest format_version in {manifest_path}")
    episodes, splits = [], []
    for entry in manifest["episodes"]:
        ep = Episode.load_csv(in_dir / entry["file"])
        if len(ep) != entry["rows"]:
            raise DataError(f"row count mismatch for {entry['file']}")
        if entry["split"] not in ("train", "val", "test"):
            raise DataError(f"unknown split {entry['split']!r} for {entry['file']}")
        episodes.append(ep)
        splits.append(entry["split"])
    return Dataset(episodes=episodes, splits=splits,
                   dt=float(manifest["dt"]), seed=int(manifest.get("seed", 0)))


def save_reference(path, t: np.ndarray, states: np.ndarray) -> None:
    rows = np.column_stack([t, states])
    np.savetxt(path, rows, fmt="%.17g", delimiter=",",
               header=REFERENCE_HEADER, comments="")


def load_reference(path):
    """Load a reference trajectory; accepts reference or episode CSVs.

    Returns (t, states) with states (T, 6).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"reference file not found: {path}")
    with open(path) as fh:
        header = fh.readline().strip()
    if header not in (REFERENCE_HEADER, EPISODE_HEADER):
        raise DataError(f"bad reference header in {path}: {header!r}")
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[0] == 0:
        raise DataError(f"empty reference file: {path}")
    return rows[:, 0], rows[:, 1:7]
