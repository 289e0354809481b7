"""Performance-counter metrics and roofline inputs.

Every ratio is evaluated in exact rational arithmetic and rounded to float
once, so a metric is the correctly rounded value of its formula. This makes
the metrics exactly invariant under integer scaling of the counters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .model import (HardwareSpec, InstructionClass, KernelCounters, StallCounters,
                    StressWarning)


@dataclass(frozen=True)
class CounterAggregate:
    total_executed_by_class: Mapping[InstructionClass, int]
    total_issued: int
    total_active_cycles: int
    total_elapsed_cycles: int
    total_dram_bytes: int
    total_stalls: StallCounters
    total_duration_s: float

    @property
    def total_executed(self) -> int:
        return sum(self.total_executed_by_class.values())


def aggregate(kernels: Iterable[KernelCounters]) -> CounterAggregate:
    """Sum per-invocation counter deltas over a trace."""
    kernels = list(kernels)
    if not kernels:
        raise ValueError("cannot aggregate an empty kernel list")
    executed = {c: 0 for c in InstructionClass}
    stalls = StallCounters()
    issued = active = elapsed = dram = 0
    duration = Fraction(0)
    for k in kernels:
        for c, v in k.executed_by_class.items():
            executed[c] += v
        issued += k.issued_instructions
        active += k.active_cycles
        elapsed += k.elapsed_cycles
        dram += k.dram_bytes
        stalls = stalls + k.stalls
        duration += Fraction(k.duration_s)
    return CounterAggregate(executed, issued, active, elapsed, dram, stalls, float(duration))


def _q(x) -> Fraction:
    return Fraction(x)


def _clamp_pct(value: Fraction, metric: str) -> float:
    pct = float(value)
    if pct > 100.0:
        warnings.warn(f"{metric} of {pct:.6g}% exceeds 100%; clamped (check peak rates)",
                      StressWarning, stacklevel=3)
        return 100.0
    if pct < 0.0:
        return 0.0
    return pct


def _require_active(agg: CounterAggregate) -> None:
    if agg.total_active_cycles <= 0:
        raise ValueError("zero active cycles")


def sm_busy_rate(agg: CounterAggregate, hw: HardwareSpec) -> float:
    """Executed arithmetic instructions per active cycle per SM, as % of peak IPC."""
    _require_active(agg)
    ipc = _q(agg.total_executed) / _q(hw.warp_size) / _q(agg.total_active_cycles)
    return _clamp_pct(ipc / _q(hw.peak_ipc_per_sm) * 100, "SM busy rate")


def aii(agg: CounterAggregate, hw: HardwareSpec) -> float:
    """Active issued instructions: issue rate per subpartition-cycle, as % of peak."""
    _require_active(agg)
    per_sub = _q(agg.total_issued) / (_q(agg.total_active_cycles) * _q(hw.subpartitions_per_sm))
    return _clamp_pct(per_sub / _q(hw.peak_issue_per_subpartition) * 100, "AII")


def s_act(stalls: StallCounters) -> float:
    """Share of stalls caused by device activity (memory, scheduler, throttle)."""
    total = stalls.total()
    if total <= 0:
        warnings.warn("no stall samples; S_act reported as 0%", StressWarning, stacklevel=2)
        return 0.0
    return _clamp_pct(Fraction(stalls.activity(), total) * 100, "S_act")


def _flops_exact(agg: CounterAggregate, hw: HardwareSpec) -> Fraction:
    return sum((_q(n) * _q(hw.warp_size) * _q(hw.flop_weights[c])
                for c, n in agg.total_executed_by_class.items()), Fraction(0))


def total_flops(agg: CounterAggregate, hw: HardwareSpec) -> float:
    return float(_flops_exact(agg, hw))


def throughput_gflops(agg: CounterAggregate, hw: HardwareSpec) -> float:
    if not agg.total_duration_s > 0:
        raise ValueError("zero kernel duration")
    return float(_flops_exact(agg, hw) / _q(agg.total_duration_s) / 10**9)


def arithmetic_intensity(agg: CounterAggregate, hw: HardwareSpec) -> float:
    """FLOPs per DRAM byte; ``inf`` (with a warning) when there is no memory traffic."""
    flops = _flops_exact(agg, hw)
    if agg.total_dram_bytes <= 0:
        if flops == 0:
            return 0.0
        warnings.warn("no memory traffic; arithmetic intensity is infinite",
                      StressWarning, stacklevel=2)
        return math.inf
    return float(flops / agg.total_dram_bytes)
