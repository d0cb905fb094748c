"""Two-lane road geometry in the Frenet frame.

Curvature is piecewise constant in the path coordinate s and
right-continuous at segment breakpoints. The lane centers sit at
-w_lane/2 (right lane) and +w_lane/2 (left lane) relative to the road
centerline.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import backend
from .errors import ConfigError, RoadRangeError

Lane = str  # "right" | "left"


@dataclass(frozen=True)
class RoadProfile:
    """Piecewise-constant curvature profile plus lane width.

    segments: ordered (s_start, s_end, curvature) triples, contiguous
    and covering the simulated range. Immutable after construction and
    safe to share between concurrently solving agents.
    """

    segments: tuple
    lane_width: float

    def __post_init__(self):
        if self.lane_width <= 0.0:
            raise ConfigError("road lane_width must be positive")
        if not self.segments:
            raise ConfigError("road needs at least one segment")
        segs = tuple((float(a), float(b), float(k)) for a, b, k in self.segments)
        object.__setattr__(self, "segments", segs)
        prev_end = None
        for lo, hi, kap in segs:
            if hi <= lo:
                raise ConfigError(f"road segment ({lo}, {hi}) is empty")
            if prev_end is not None and abs(lo - prev_end) > 1e-9:
                raise ConfigError(
                    f"road segments not contiguous at s={prev_end}")
            prev_end = hi
            if abs(kap) * self.lane_width >= 1.0:
                raise ConfigError(
                    f"curvature {kap} violates 1 - dy*kappa > 0 for "
                    f"|dy| <= lane_width")

    @cached_property
    def _arrays(self):
        lo = np.array([s[0] for s in self.segments])
        hi = np.array([s[1] for s in self.segments])
        k = np.array([s[2] for s in self.segments])
        return lo, hi, k

    @property
    def s_min(self) -> float:
        return self.segments[0][0]

    @property
    def s_max(self) -> float:
        return self.segments[-1][1]

    @property
    def max_abs_curvature(self) -> float:
        return max(abs(s[2]) for s in self.segments)

    def curvature_at(self, s: float) -> float:
        """Curvature of the segment containing s (right-continuous)."""
        if s < self.s_min or s > self.s_max:
            raise RoadRangeError(
                f"s={s} outside covered range [{self.s_min}, {self.s_max}]")
        lo, hi, k = self._arrays
        return backend.curvature_value(float(s), lo, hi, k)

    def lane_center(self, lane: Lane) -> float:
        """Lateral offset of a lane center from the road centerline."""
        if lane == "right":
            return -0.5 * self.lane_width
        if lane == "left":
            return 0.5 * self.lane_width
        raise ValueError(f"unknown lane {lane!r}")
