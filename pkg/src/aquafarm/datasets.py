"""Build labeled datasets out of episode logs.

Frames come from the batch preprocessing pipeline; targets come from the
synthetic label sources (ideal setpoints, metabolic feed curve, ground
truth disease flag). Disease labels need the simulator's truth, so frames
are joined back to the logged states by tick index.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Iterable, Sequence

from . import jsonio
from .ml.labels import frame_targets
from .preprocess import Dataset, build_frames, split

DEFAULT_RATIOS = (0.7, 0.15, 0.15)

# Features every episode-trained model sees: raw channels plus the
# reactive 5-frame statistics (hourly windows stay available to operators
# but add little for these targets).
EPISODE_FEATURES = [
    "level", "temp", "humidity", "ph", "behavior",
    "level_mean_5", "temp_mean_5", "humidity_mean_5", "ph_mean_5", "behavior_mean_5",
    "level_slope_5", "temp_slope_5", "humidity_slope_5", "ph_slope_5", "behavior_slope_5",
    "level_delta", "temp_delta", "humidity_delta", "ph_delta", "behavior_delta",
]


def dataset_from_episode_docs(docs: Sequence[dict], grid_dt_s: float,
                              noise_sigma=None) -> Dataset:
    """One episode's tick documents -> unlabeled-to-labeled frame dataset."""
    readings = [jsonio.reading_from_dict(r) for doc in docs for r in doc["readings"]]
    frames = build_frames(readings, grid_dt_s, noise_sigma=noise_sigma)
    truth_by_tick = {}
    for doc in docs:
        state = doc["state"]
        tick = int(state["time_s"] // grid_dt_s)
        truth_by_tick[tick] = (bool(state["diseased"]), int(state["fish_count"]))
    targets: dict[str, list[float]] = {}
    kept = []
    for frame in frames:
        truth = truth_by_tick.get(frame.tick_index)
        if truth is None:
            continue
        kept.append(frame)
        for name, value in frame_targets(frame, *truth).items():
            targets.setdefault(name, []).append(value)
    return Dataset(frames=kept, targets=targets)


def concat_datasets(parts: Iterable[Dataset]) -> Dataset:
    frames = []
    targets: dict[str, list[float]] = {}
    for part in parts:
        frames.extend(part.frames)
        for name, values in part.targets.items():
            targets.setdefault(name, []).extend(values)
    return Dataset(frames=frames, targets=targets)


def build_dataset(episode_paths: Sequence[str | Path], grid_dt_s: float = 60.0,
                  ratios: tuple[float, float, float] = DEFAULT_RATIOS,
                  noise_sigma=None) -> Dataset:
    """Episodes -> frames + targets -> chronological split, per episode.

    Splitting happens inside each episode so all three splits see both
    early (healthy) and late (possibly diseased) regimes.
    """
    parts = []
    for path in episode_paths:
        docs = jsonio.read_episode_lines(path)
        ds = dataset_from_episode_docs(docs, grid_dt_s, noise_sigma)
        parts.append(split(ds, ratios))
    merged = concat_datasets(parts)
    merged.split_tags = [tag for part in parts for tag in part.split_tags]
    return merged


def dataset_hash(path: str | Path) -> str:
    """Content hash binding a trained bundle to its dataset file."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
