"""One place that turns raw readings into a vetted decision.

Owns the causal preprocessing state and the optional model bundle; both
the bounded episode runner and the live service drive their loops through
this object, so the decision path in tests and in production is the same
code.
"""

from __future__ import annotations

from typing import Callable, Optional

from .control import ControlConfig, ControlDecision, tick
from .ml.bundle import ModelBundle, ml_propose
from .plant import SensorConfig, SensorReading
from .preprocess import FeatureFrame, OnlinePipeline


class FarmController:
    def __init__(self, sensor_cfg: SensorConfig, bundle: Optional[ModelBundle] = None,
                 max_feed_g: float = 50.0):
        self.pipeline = OnlinePipeline(noise_sigma=sensor_cfg.noise_sigma)
        self.bundle = bundle
        self.max_feed_g = max_feed_g

    def decide_frame(self, frame: FeatureFrame, cfg: ControlConfig,
                     mode: str = "rule_only",
                     overrides: Optional[dict[str, bool]] = None) -> ControlDecision:
        proposal = None
        if self.bundle is not None:
            # even in rule_only mode the disease warning must pass through
            proposal = ml_propose(self.bundle, frame)
        return tick(frame, cfg, overrides=overrides, ml=proposal, mode=mode,
                    sensor_health=dict(self.pipeline.stale_ticks),
                    max_feed_g=self.max_feed_g)

    def decide(self, readings: list[SensorReading], cfg: ControlConfig,
               mode: str = "rule_only",
               overrides: Optional[dict[str, bool]] = None,
               ) -> tuple[FeatureFrame, ControlDecision]:
        frame = self.pipeline.push(readings)
        return frame, self.decide_frame(frame, cfg, mode, overrides)


def episode_callback(cfg: ControlConfig, sensor_cfg: SensorConfig,
                     bundle: Optional[ModelBundle] = None,
                     mode: str = "rule_only", max_feed_g: float = 50.0,
                     ) -> Callable[[int, list[SensorReading]], ControlDecision]:
    """Adapter for run_episode's (tick_index, readings) controller shape."""
    controller = FarmController(sensor_cfg, bundle, max_feed_g)

    def callback(_tick_index: int, readings: list[SensorReading]) -> ControlDecision:
        return controller.decide(readings, cfg, mode)[1]

    return callback
