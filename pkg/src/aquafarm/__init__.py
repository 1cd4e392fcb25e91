"""Closed-loop environmental control for a simulated fish farm.

Subsystems: a deterministic plant simulator (`plant`), a sensor cleanup
pipeline (`preprocess`), the rule controller with safety vetting
(`control`), four from-scratch learners (`ml`), a telemetry/override
HTTP service (`service`), and the `aquafarm` CLI (`cli`).
"""

__version__ = "0.1.0"
