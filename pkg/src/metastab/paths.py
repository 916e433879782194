"""Piecewise-constant trajectories.

A path is stored as its visited states and the jump times between them:
``times[0] = 0`` and state ``states[k]`` is occupied on
``[times[k], times[k+1])``.  Simulated paths carry float times; derived paths
(traces, projections) carry exact :class:`fractions.Fraction` times so that
time-change bookkeeping holds without rounding.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Hashable, Optional

STOP_REASONS = ("hit-target", "horizon", "absorbed")


@dataclass(frozen=True)
class PathSample:
    states: tuple
    times: tuple
    stop_reason: str
    end_state: Optional[Hashable] = None
    dropped_prefix: Real = 0
    seed: Optional[int] = None
    stream: Optional[int] = None

    def __post_init__(self):
        if len(self.times) != len(self.states) + 1:
            raise ValueError("times must have one more entry than states")
        if self.stop_reason not in STOP_REASONS:
            raise ValueError(f"unknown stop reason {self.stop_reason!r}")

    @property
    def start(self):
        return self.states[0]

    @property
    def horizon(self):
        return self.times[-1]

    @property
    def segments(self):
        return [(s, float(self.times[k + 1] - self.times[k]))
                for k, s in enumerate(self.states)]

    def exact_segments(self):
        t = [Fraction(x) for x in self.times]
        return [(s, t[k + 1] - t[k]) for k, s in enumerate(self.states)]

    def hitting_time(self, A):
        """First time the path is in ``A`` (0 when it starts there), or None."""
        A = set(A)
        for k, s in enumerate(self.states):
            if s in A:
                return self.times[k]
        if self.end_state is not None and self.end_state in A:
            return self.times[-1]
        return None

    def occupation(self, A, until=None):
        """Time spent in ``A`` up to ``until`` (default: whole path), as a float."""
        A = set(A)
        parts = []
        for k, s in enumerate(self.states):
            lo, hi = self.times[k], self.times[k + 1]
            if until is not None:
                if lo >= until:
                    break
                hi = min(hi, until)
            if s in A:
                parts.append(float(hi) - float(lo))
        return math.fsum(parts)

    def exact_occupation(self, A):
        A = set(A)
        return sum((d for s, d in self.exact_segments() if s in A), Fraction(0))


@dataclass(frozen=True)
class ProjectedPath:
    """Metastate-labelled path; ``variant`` is ``"trace"`` or ``"last-visit"``."""

    labels: tuple
    times: tuple
    variant: str
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def segments(self):
        return [(x, self.times[k + 1] - self.times[k]) for k, x in enumerate(self.labels)]

    @property
    def duration(self):
        return self.times[-1] - self.times[0]
