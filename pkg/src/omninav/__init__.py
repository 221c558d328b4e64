"""Navigation toolkit and deterministic 2D simulator for a three-omni-wheel
social robot: corrected holonomic motion control, laser scan merging, Monte
Carlo localization, constrained navigation, point-cloud map extraction, and
an HTTP-orchestrated multi-station tour mission."""

__version__ = "0.1.0"
