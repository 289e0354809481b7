"""Roofline placement, bound classification and efficiency bands."""

from __future__ import annotations

import math
import warnings
from typing import Sequence

from .model import Bound, HardwareSpec, RooflinePoint, StressWarning

DEFAULT_BANDS = (60.0, 10.0)  # High >= 60%, Moderate >= 10%, Low below


def ridge_point(hw: HardwareSpec) -> float:
    """Arithmetic intensity (FLOP/byte) where the bandwidth roof meets peak compute."""
    if hw.peak_bandwidth_gbps <= 0:
        raise ValueError("peak bandwidth must be positive")
    return hw.peak_gflops / hw.peak_bandwidth_gbps


def attainable(ai: float, hw: HardwareSpec) -> float:
    if math.isinf(ai):
        return hw.peak_gflops
    return min(hw.peak_gflops, hw.peak_bandwidth_gbps * ai)


def place(ai: float, throughput: float, hw: HardwareSpec) -> RooflinePoint:
    if ai < 0 or throughput < 0:
        raise ValueError("arithmetic intensity and throughput must be non-negative")
    roof = attainable(ai, hw)
    if roof > 0:
        efficiency = 100.0 * throughput / roof
    else:
        efficiency = 0.0 if throughput == 0 else math.inf
    above = throughput > roof
    if above:
        warnings.warn(f"throughput {throughput:.6g} GFLOP/s exceeds attainable {roof:.6g} GFLOP/s "
                      f"at {ai:.6g} FLOP/byte", StressWarning, stacklevel=2)
    bound = Bound.COMPUTE if ai >= ridge_point(hw) else Bound.MEMORY
    return RooflinePoint(ai, throughput, roof, efficiency, bound, above)


def cluster(points: Sequence[tuple[str, RooflinePoint]],
            bands: tuple[float, float] = DEFAULT_BANDS) -> list[str]:
    """Label each point High / Moderate / Low by efficiency against its roof."""
    if not points:
        raise ValueError("need at least one roofline point")
    high, moderate = bands
    labels = []
    for _, p in points:
        if p.efficiency_pct >= high:
            labels.append("High")
        elif p.efficiency_pct >= moderate:
            labels.append("Moderate")
        else:
            labels.append("Low")
    return labels
