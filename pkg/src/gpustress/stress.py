"""Fuse counter and telemetry indicators into radar profiles and a stress ranking.

The composite index is a toolkit-defined scalar (weighted mean of the
normalized radar axes); it is not a published quantity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from . import counters, roofline, telemetry, thermal
from .model import (AXES, INVERTED_AXES, PC_AXES, AxisProfile, HardwareSpec, MetricSet,
                    RooflinePoint, StressProfile, StressWarning, ThermalFit, WorkloadTrace,
                    validate_trace)

DEGENERATE_VALUE = 0.5


class AxisError(ValueError):
    """A sub-computation failed; ``axis`` names the metric it was feeding."""

    def __init__(self, axis: str, cause: Exception):
        super().__init__(f"{axis}: {cause}")
        self.axis = axis
        self.cause = cause


@dataclass(frozen=True)
class Analysis:
    workload_name: str
    category: str
    metrics: MetricSet
    thermal_fit: Optional[ThermalFit]
    roofline: Optional[RooflinePoint]
    warnings: tuple[str, ...] = ()
    absent_axes: tuple[str, ...] = ()


def _tagged(axis, fn, *args):
    try:
        return fn(*args)
    except ValueError as exc:
        raise AxisError(axis, exc) from exc


def analyze_trace(trace: WorkloadTrace, hw: HardwareSpec) -> Analysis:
    """Run every counter, thermal, telemetry and roofline computation on one trace."""
    errors = [f for f in validate_trace(trace) if f.severity == "error"]
    if errors:
        raise ValueError("invalid trace: " + "; ".join(str(e) for e in errors))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StressWarning)
        values: dict[str, Optional[float]] = {}
        absent: list[str] = []
        point = None
        if trace.kernels:
            agg = counters.aggregate(trace.kernels)
            values["sm_busy_rate_pct"] = _tagged("sm_busy_rate", counters.sm_busy_rate, agg, hw)
            values["aii_pct"] = _tagged("aii", counters.aii, agg, hw)
            values["s_act_pct"] = counters.s_act(agg.total_stalls)
            thr = _tagged("throughput", counters.throughput_gflops, agg, hw)
            ai = counters.arithmetic_intensity(agg, hw)
            values["throughput_gflops"] = thr
            values["arithmetic_intensity"] = ai
            if math.isfinite(ai):
                point = roofline.place(ai, thr, hw)
        else:
            absent.extend(PC_AXES)
            warnings.warn("no kernel counters: telemetry-only analysis, PC axes absent",
                          StressWarning)

        fit = _tagged("t_inf", thermal.fit_exponential, trace.telemetry)
        values["t_inf_c"] = thermal.steady_state_temp(trace.telemetry, fit)
        values["t_r_s"] = fit.t_r_s
        if "no_transient" in fit.flags:
            warnings.warn("flat temperature series: no thermal transient", StressWarning)
        total_kj, rate_w = _tagged("energy", telemetry.energy, trace.telemetry)
        values["energy_kj"] = total_kj
        values["energy_rate_w"] = rate_w
        values["delta_cf_mhz"] = telemetry.delta_cf(trace.telemetry)
    notes = tuple(dict.fromkeys(str(w.message) for w in caught))
    return Analysis(trace.workload_name, trace.category, MetricSet(**values), fit, point,
                    notes, tuple(absent))


def build_metric_set(trace: WorkloadTrace, hw: HardwareSpec) -> MetricSet:
    return analyze_trace(trace, hw).metrics


def _available(sets, axis, energy_mode):
    present = [s.axis_value(axis, energy_mode) is not None for _, s in sets]
    if all(present):
        return True
    if not any(present):
        return False
    missing = [name for (name, _), ok in zip(sets, present) if not ok]
    raise ValueError(f"mismatched axis availability for {axis!r}: absent in {', '.join(missing)}")


def normalize_axes(sets: Sequence[tuple[str, MetricSet]], energy_mode: str = "total",
                   axes: Sequence[str] = AXES) -> StressProfile:
    """Min-max normalize each axis over the compared set, oriented so 1 = most stress.

    Axes absent from every workload are dropped and flagged; an axis with no
    spread is pinned to 0.5 for everyone.
    """
    if len(sets) < 2:
        raise ValueError("normalization needs at least two workloads")
    names = [n for n, _ in sets]
    if len(set(names)) != len(names):
        raise ValueError("workload names must be unique")
    flags = []
    used = []
    columns: dict[str, list[float]] = {}
    for axis in axes:
        if not _available(sets, axis, energy_mode):
            flags.append(f"axis {axis} unavailable for all workloads; excluded")
            continue
        raw = [float(s.axis_value(axis, energy_mode)) for _, s in sets]
        lo, hi = min(raw), max(raw)
        if hi == lo:
            flags.append(f"axis {axis} has no spread; pinned to {DEGENERATE_VALUE}")
            warnings.warn(f"degenerate axis {axis}", StressWarning, stacklevel=2)
            norm = [DEGENERATE_VALUE] * len(raw)
        else:
            norm = [(v - lo) / (hi - lo) for v in raw]
            if axis in INVERTED_AXES:
                norm = [1.0 - x for x in norm]
        columns[axis] = norm
        used.append(axis)
    profiles = tuple(AxisProfile(name, {a: columns[a][i] for a in used})
                     for i, name in enumerate(names))
    return StressProfile(profiles, tuple(used), tuple(flags))


def composite_index(axes: Mapping[str, float], weights: Optional[Mapping[str, float]] = None
                    ) -> float:
    """Weighted mean of normalized axes; equal weights over all seven by default."""
    if weights is None:
        weights = {a: 1.0 for a in AXES}
    active = {a: w for a, w in weights.items() if w}
    if any(w < 0 for w in active.values()):
        raise ValueError("axis weights must be non-negative")
    if not active:
        raise ValueError("at least one axis needs a positive weight")
    missing = [a for a in active if a not in axes]
    if missing:
        raise ValueError(f"missing axis: {', '.join(missing)}")
    total = math.fsum(active.values())
    return math.fsum(w * axes[a] for a, w in active.items()) / total


def rank(profiles: Sequence[AxisProfile]) -> list[tuple[str, float]]:
    """Highest composite first; ties resolved alphabetically."""
    return sorted(((p.name, p.composite_index) for p in profiles), key=lambda x: (-x[1], x[0]))


def compare(sets: Sequence[tuple[str, MetricSet]], weights: Optional[Mapping[str, float]] = None,
            energy_mode: str = "total") -> StressProfile:
    """Normalize, fuse, and rank a set of workloads.

    Axes that no workload reports are removed from the weighting (and
    flagged) so the index is taken over the axes that exist.
    """
    profile = normalize_axes(sets, energy_mode)
    weights = dict(weights) if weights is not None else {a: 1.0 for a in AXES}
    unknown = sorted(set(weights) - set(AXES))
    if unknown:
        raise ValueError(f"unknown axis in weights: {', '.join(unknown)}")
    effective = {a: w for a, w in weights.items() if a in profile.axes}
    flags = list(profile.flags)
    dropped = [a for a, w in weights.items() if w and a not in profile.axes]
    if dropped:
        flags.append(f"composite index taken over {len(effective)} axes "
                     f"(excluded: {', '.join(dropped)})")
    scored = [AxisProfile(p.name, p.normalized_axes, composite_index(p.normalized_axes, effective))
              for p in profile.profiles]
    order = {name: i + 1 for i, (name, _) in enumerate(rank(scored))}
    ranked = tuple(AxisProfile(p.name, p.normalized_axes, p.composite_index, order[p.name])
                   for p in scored)
    return StressProfile(ranked, profile.axes, tuple(flags), effective)
