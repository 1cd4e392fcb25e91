"""Turn raw, faulty, asynchronous sensor readings into clean synchronized
feature frames and chronological train/val/test datasets.

Stages, in order: bucket readings onto a fixed grid (last reading per
channel wins), fill gaps (linear interior interpolation, edge fill),
flag and repair outliers (rolling median / MAD), then attach engineered
features (rolling means, first differences, least-squares trend slopes).

Every repaired value keeps a flag, so no information about data quality
is lost downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import median
from typing import Iterable, Optional, Sequence

import numpy as np

from .plant import CHANNELS, Channel, SensorReading

OUTLIER_WINDOW = 9
OUTLIER_K = 3.5
MAD_TO_SIGMA = 1.4826       # Gaussian consistency factor for the MAD
ABS_FLOOR_MIN = 0.5         # per-channel fallback threshold floor, channel units
DEFAULT_FEATURE_WINDOWS = (5, 60)   # 60 frames = hourly at the 60 s tick

# Neutral per-channel values used only when a live loop starts with a
# missing reading and has no history to carry forward.
CHANNEL_DEFAULTS = {
    Channel.LEVEL: 50.0,
    Channel.TEMP: 26.0,
    Channel.HUMIDITY: 55.0,
    Channel.PH: 7.2,
    Channel.BEHAVIOR: 0.8,
}


class PipelineError(ValueError):
    """Raised when input violates a preprocessing contract."""


@dataclass
class RawFrame:
    """One grid bucket of synchronized readings; None marks a missing channel."""

    tick_index: int
    timestamp_s: float
    values: dict[Channel, Optional[float]]


@dataclass
class FeatureFrame:
    """Fully imputed, repaired, feature-engineered snapshot of one tick."""

    tick_index: int
    timestamp_s: float
    values: dict[Channel, float]
    was_missing: dict[Channel, bool]
    was_outlier: dict[Channel, bool]
    engineered: dict[str, float] = field(default_factory=dict)

    def feature(self, name: str) -> float:
        """Look up a feature by name: raw channel names or engineered keys."""
        for ch in CHANNELS:
            if name == ch.value:
                return self.values[ch]
        try:
            return self.engineered[name]
        except KeyError:
            raise PipelineError(f"frame has no feature {name!r}") from None


@dataclass
class Dataset:
    """Chronologically ordered frames with per-frame targets and split tags."""

    frames: list[FeatureFrame]
    targets: dict[str, list[float]]
    split_tags: list[str] = field(default_factory=list)

    def indices(self, tag: str) -> list[int]:
        return [i for i, t in enumerate(self.split_tags) if t == tag]


def synchronize(readings: Iterable[SensorReading], grid_dt_s: float) -> list[RawFrame]:
    """Assign readings to buckets of floor(timestamp / grid_dt).

    Within a bucket the latest reading per channel wins; channels with no
    reading in a bucket are marked missing. The grid spans the first to the
    last occupied bucket.
    """
    if grid_dt_s <= 0:
        raise PipelineError("grid_dt_s must be > 0")
    latest: dict[tuple[int, Channel], SensorReading] = {}
    for r in readings:
        if r.timestamp_s < 0:
            raise PipelineError(f"negative timestamp {r.timestamp_s}")
        bucket = int(math.floor(r.timestamp_s / grid_dt_s))
        key = (bucket, r.channel)
        prev = latest.get(key)
        if prev is None or r.timestamp_s >= prev.timestamp_s:
            latest[key] = r
    if not latest:
        return []
    buckets = {b for b, _ in latest}
    frames = []
    for b in range(min(buckets), max(buckets) + 1):
        values: dict[Channel, Optional[float]] = {}
        for ch in CHANNELS:
            r = latest.get((b, ch))
            values[ch] = None if r is None or r.value is None else float(r.value)
        frames.append(RawFrame(b, b * grid_dt_s, values))
    return frames


def impute(series: Sequence[Optional[float]]) -> tuple[list[float], list[bool]]:
    """Fill gaps in an ordered series.

    Interior gaps are linearly interpolated between the nearest present
    neighbors; leading gaps are back-filled, trailing gaps carried forward.
    Returns (values, was_missing flags). An all-missing series is an error.
    """
    n = len(series)
    if n == 0:
        raise PipelineError("empty series")
    present = [i for i, v in enumerate(series) if v is not None]
    if not present:
        raise PipelineError("all-missing series cannot be imputed")
    out = [0.0] * n
    flags = [v is None for v in series]
    first, last = present[0], present[-1]
    for i in range(n):
        if series[i] is not None:
            out[i] = float(series[i])
    for i in range(first):
        out[i] = float(series[first])
    for i in range(last + 1, n):
        out[i] = float(series[last])
    for a, b in zip(present, present[1:]):
        if b - a > 1:
            va, vb = float(series[a]), float(series[b])
            for i in range(a + 1, b):
                out[i] = va + (vb - va) * (i - a) / (b - a)
    return out, flags


def _window_bounds(i: int, n: int, window: int) -> tuple[int, int]:
    half = window // 2
    return max(0, i - half), min(n, i + half + 1)


def detect_outliers(series: Sequence[float], window: int = OUTLIER_WINDOW,
                    k: float = OUTLIER_K, abs_floor: float = ABS_FLOOR_MIN,
                    ) -> tuple[list[float], list[bool]]:
    """Flag points far from the rolling median and repair them.

    A point is an outlier when |x - median| > max(k * 1.4826 * MAD,
    abs_floor) over a centered window (truncated at the edges). The
    absolute floor bounds the threshold from below so a short window with
    a tiny (or zero) MAD cannot flag ordinary sensor noise; it is sized
    from the known noise sigma. Flagged points are replaced by the rolling
    median. Returns (repaired values, was_outlier flags).
    """
    if window < 3:
        raise PipelineError("window must be >= 3")
    if k <= 0:
        raise PipelineError("k must be > 0")
    n = len(series)
    if window > n:
        raise PipelineError(f"window {window} larger than series length {n}")
    values = [float(v) for v in series]
    out = list(values)
    flags = [False] * n
    for i in range(n):
        lo, hi = _window_bounds(i, n, window)
        win = values[lo:hi]
        med = median(win)
        mad = median(abs(v - med) for v in win)
        if abs(values[i] - med) > max(k * MAD_TO_SIGMA * mad, abs_floor):
            out[i] = med
            flags[i] = True
    return out, flags


def _slope(values: Sequence[float]) -> float:
    """Least-squares slope per tick over equally spaced points."""
    m = len(values)
    if m < 2:
        return 0.0
    t = np.arange(m, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    t_bar = t.mean()
    denom = float(((t - t_bar) ** 2).sum())
    return float(((t - t_bar) * (y - y.mean())).sum() / denom)


def engineer_features(frames: list[FeatureFrame],
                      windows: Sequence[int] = DEFAULT_FEATURE_WINDOWS) -> list[FeatureFrame]:
    """Attach rolling means, deltas and trend slopes to each frame, in place.

    For channel c and window w the names are deterministic: "c_mean_w",
    "c_delta" and "c_slope_w". Windows truncate at the start of the series.
    """
    if not windows:
        raise PipelineError("windows must be nonempty")
    history: dict[Channel, list[float]] = {ch: [] for ch in CHANNELS}
    for frame in frames:
        for ch in CHANNELS:
            history[ch].append(frame.values[ch])
            series = history[ch]
            prev = series[-2] if len(series) > 1 else series[-1]
            frame.engineered[f"{ch.value}_delta"] = series[-1] - prev
            for w in windows:
                tail = series[-w:]
                frame.engineered[f"{ch.value}_mean_{w}"] = float(np.mean(tail))
                frame.engineered[f"{ch.value}_slope_{w}"] = _slope(tail)
    return frames


def build_frames(readings: Iterable[SensorReading], grid_dt_s: float,
                 window: int = OUTLIER_WINDOW, k: float = OUTLIER_K,
                 noise_sigma: Optional[dict] = None,
                 feature_windows: Sequence[int] = DEFAULT_FEATURE_WINDOWS,
                 ) -> list[FeatureFrame]:
    """Full batch pipeline: synchronize -> impute -> repair -> engineer."""
    raw = synchronize(readings, grid_dt_s)
    if not raw:
        return []
    per_channel: dict[Channel, tuple[list[float], list[bool], list[bool]]] = {}
    for ch in CHANNELS:
        series = [f.values[ch] for f in raw]
        filled, miss = impute(series)
        floor = abs_floor_for(ch, noise_sigma)
        if len(filled) >= window:
            repaired, outl = detect_outliers(filled, window, k, floor)
        else:
            repaired, outl = filled, [False] * len(filled)
        per_channel[ch] = (repaired, miss, outl)
    frames = []
    for i, rf in enumerate(raw):
        frames.append(FeatureFrame(
            tick_index=rf.tick_index,
            timestamp_s=rf.timestamp_s,
            values={ch: per_channel[ch][0][i] for ch in CHANNELS},
            was_missing={ch: per_channel[ch][1][i] for ch in CHANNELS},
            was_outlier={ch: per_channel[ch][2][i] for ch in CHANNELS},
        ))
    return engineer_features(frames, feature_windows)


def abs_floor_for(channel: Channel, noise_sigma: Optional[dict] = None) -> float:
    """MAD=0 fallback threshold: 3x the sensor noise, floored at 0.5 units."""
    sigma = 0.0 if noise_sigma is None else float(noise_sigma.get(channel, 0.0))
    return max(3.0 * sigma, ABS_FLOOR_MIN)


def split(ds: Dataset, ratios: tuple[float, float, float]) -> Dataset:
    """Tag frames chronologically as train/val/test.

    n_train = floor(N * r_train), n_val = floor(N * r_val), remainder to
    test; order is preserved so no test frame predates a train frame.
    """
    r_train, r_val, r_test = ratios
    if min(ratios) <= 0:
        raise PipelineError("split ratios must be positive")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise PipelineError("split ratios must sum to 1")
    n = len(ds.frames)
    if n < 3:
        raise PipelineError("need at least 3 frames to split")
    n_train = int(math.floor(n * r_train))
    n_val = int(math.floor(n * r_val))
    tags = (["train"] * n_train + ["val"] * n_val + ["test"] * (n - n_train - n_val))
    return Dataset(frames=ds.frames, targets=ds.targets, split_tags=tags)


def frame_vector(frame: FeatureFrame, feature_names: Sequence[str]) -> np.ndarray:
    """Assemble the model input vector for a frame, in schema order."""
    return np.array([frame.feature(name) for name in feature_names], dtype=np.float64)


class OnlinePipeline:
    """Causal, tick-at-a-time variant of the batch pipeline for the live loop.

    Missing readings are carried forward from the last clean value (or a
    neutral default when there is no history yet); outliers are checked
    against a trailing window. Because the batch feature windows are
    trailing too, online features match the batch pipeline on the same
    cleaned series.
    """

    def __init__(self, window: int = OUTLIER_WINDOW, k: float = OUTLIER_K,
                 noise_sigma: Optional[dict] = None,
                 feature_windows: Sequence[int] = DEFAULT_FEATURE_WINDOWS,
                 history_len: int = 128):
        self.window = window
        self.k = k
        self.feature_windows = tuple(feature_windows)
        self.history_len = max(history_len, max(self.feature_windows) + 1, window + 1)
        self.floors = {ch: abs_floor_for(ch, noise_sigma) for ch in CHANNELS}
        # clean history feeds the engineered features; raw history is the
        # outlier reference, so the filter cannot feed its own repairs back
        # into the reference window and wedge itself after a real actuator
        # ramp (a genuine level shift is accepted once it fills the window).
        self.history: dict[Channel, list[float]] = {ch: [] for ch in CHANNELS}
        self.raw_history: dict[Channel, list[float]] = {ch: [] for ch in CHANNELS}
        self.stale_ticks: dict[Channel, int] = {ch: 0 for ch in CHANNELS}
        self.tick_index = 0

    def push(self, readings: list[SensorReading]) -> FeatureFrame:
        by_channel: dict[Channel, SensorReading] = {}
        for r in readings:
            prev = by_channel.get(r.channel)
            if prev is None or r.timestamp_s >= prev.timestamp_s:
                by_channel[r.channel] = r
        timestamp = max((r.timestamp_s for r in readings), default=float(self.tick_index))

        values: dict[Channel, float] = {}
        missing: dict[Channel, bool] = {}
        outlier: dict[Channel, bool] = {}
        for ch in CHANNELS:
            r = by_channel.get(ch)
            hist = self.history[ch]
            raw_hist = self.raw_history[ch]
            if r is None or r.value is None:
                missing[ch] = True
                self.stale_ticks[ch] += 1
                value = raw_value = hist[-1] if hist else CHANNEL_DEFAULTS[ch]
                outlier[ch] = False
            else:
                missing[ch] = False
                self.stale_ticks[ch] = 0
                raw_value = float(r.value)
                value, outlier[ch] = self._check_outlier(ch, raw_value)
            values[ch] = value
            hist.append(value)
            raw_hist.append(raw_value)
            if len(hist) > self.history_len:
                del hist[0]
            if len(raw_hist) > self.history_len:
                del raw_hist[0]

        frame = FeatureFrame(self.tick_index, timestamp, values, missing, outlier)
        for ch in CHANNELS:
            series = self.history[ch]
            prev = series[-2] if len(series) > 1 else series[-1]
            frame.engineered[f"{ch.value}_delta"] = series[-1] - prev
            for w in self.feature_windows:
                tail = series[-w:]
                frame.engineered[f"{ch.value}_mean_{w}"] = float(np.mean(tail))
                frame.engineered[f"{ch.value}_slope_{w}"] = _slope(tail)
        self.tick_index += 1
        return frame

    def _check_outlier(self, ch: Channel, value: float) -> tuple[float, bool]:
        win = self.raw_history[ch][-(self.window - 1):] + [value]
        if len(win) < 3:
            return value, False
        med = median(win)
        mad = median(abs(v - med) for v in win)
        if abs(value - med) > max(self.k * MAD_TO_SIGMA * mad, self.floors[ch]):
            return med, True
        return value, False
