"""Energy and clock-frequency indicators computed from telemetry samples."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

from .model import TelemetrySample


def _span(telemetry: Sequence[TelemetrySample]) -> float:
    if len(telemetry) < 2:
        raise ValueError("need at least two telemetry samples")
    span = telemetry[-1].t - telemetry[0].t
    if not span > 0:
        raise ValueError("telemetry spans zero time")
    return span


def energy(telemetry: Sequence[TelemetrySample]) -> tuple[float, float]:
    """Return ``(total_kj, rate_w)`` from the cumulative energy counter."""
    span = _span(telemetry)
    for i in range(1, len(telemetry)):
        if telemetry[i].energy_j < telemetry[i - 1].energy_j:
            raise ValueError(f"energy counter decreased at sample {i}")
    total_j = telemetry[-1].energy_j - telemetry[0].energy_j
    return total_j / 1000.0, total_j / span


def energy_from_power(telemetry: Sequence[TelemetrySample]) -> float:
    """Trapezoidal integral of power over time, in kJ."""
    _span(telemetry)
    parts = ((b.t - a.t) * (a.power_w + b.power_w) / 2.0
             for a, b in zip(telemetry, telemetry[1:]))
    return math.fsum(parts) / 1000.0


def delta_cf(telemetry: Sequence[TelemetrySample]) -> float:
    """Peak SM clock minus mean SM clock over the run, in MHz."""
    if not telemetry:
        raise ValueError("need at least one telemetry sample")
    clocks = [s.sm_clock_mhz for s in telemetry]
    peak = max(clocks)
    # exact mean of (peak - sample); a non-constant clock never rounds to zero
    d = sum((Fraction(peak) - Fraction(c) for c in clocks), Fraction(0)) / len(clocks)
    return float(d) or (math.ulp(0.0) if d else 0.0)
