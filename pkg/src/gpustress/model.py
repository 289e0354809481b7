"""Domain types shared by every analysis stage.

All types are frozen dataclasses. Hardware descriptions reject bad values on
construction; traces are allowed to carry invariant violations so that
:func:`validate_trace` can report them with a field path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np


class StressWarning(UserWarning):
    """Non-fatal analysis condition (clamped percent, degenerate axis, ...)."""


class InstructionClass(str, Enum):
    """Throughput-group instruction classes counted per SM."""

    ALU = "alu"
    FP16 = "fp16"
    FP64 = "fp64"
    DMMA = "dmma"
    HMMA = "hmma"
    IMMA = "imma"
    XU = "xu"


DEFAULT_FLOP_WEIGHTS = MappingProxyType({
    InstructionClass.ALU: 1.0,
    InstructionClass.FP16: 2.0,
    InstructionClass.FP64: 1.0,
    InstructionClass.XU: 1.0,
    InstructionClass.HMMA: 64.0,
    InstructionClass.IMMA: 64.0,
    InstructionClass.DMMA: 64.0,
})


def _freeze_classes(values: Mapping, kind=float) -> Mapping[InstructionClass, float]:
    return MappingProxyType({InstructionClass(k): kind(v) for k, v in values.items()})


@dataclass(frozen=True)
class HardwareSpec:
    """Device ceilings and the peak rates used to normalize counter metrics."""

    name: str
    peak_gflops: float
    peak_bandwidth_gbps: float
    warp_size: int = 32
    num_sms: int = 24
    subpartitions_per_sm: int = 4
    peak_ipc_per_sm: float = 1.0
    peak_issue_per_subpartition: float = 1.0
    flop_weights: Mapping[InstructionClass, float] = DEFAULT_FLOP_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, "flop_weights", _freeze_classes(self.flop_weights))
        for name in ("peak_gflops", "peak_bandwidth_gbps", "warp_size", "num_sms",
                     "subpartitions_per_sm", "peak_ipc_per_sm",
                     "peak_issue_per_subpartition"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"HardwareSpec.{name} must be a positive number, got {value!r}")
        missing = [c.value for c in InstructionClass if c not in self.flop_weights]
        if missing:
            raise ValueError(f"HardwareSpec.flop_weights missing classes: {', '.join(missing)}")
        for cls, w in self.flop_weights.items():
            if not (math.isfinite(w) and w > 0):
                raise ValueError(f"flop weight for {cls.value} must be positive, got {w!r}")

    @property
    def ridge_point(self) -> float:
        return self.peak_gflops / self.peak_bandwidth_gbps

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "peak_gflops": self.peak_gflops,
            "peak_bandwidth_gbps": self.peak_bandwidth_gbps,
            "warp_size": self.warp_size,
            "num_sms": self.num_sms,
            "subpartitions_per_sm": self.subpartitions_per_sm,
            "peak_ipc_per_sm": self.peak_ipc_per_sm,
            "peak_issue_per_subpartition": self.peak_issue_per_subpartition,
            "flop_weights": {c.value: w for c, w in self.flop_weights.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "HardwareSpec":
        data = dict(data)
        allowed = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ValueError(f"unknown hardware fields: {', '.join(unknown)}")
        if "flop_weights" in data:
            weights = dict(DEFAULT_FLOP_WEIGHTS)
            weights.update({InstructionClass(k): v for k, v in data["flop_weights"].items()})
            data["flop_weights"] = weights
        return cls(**data)


# Reference device from the case study: RTX 4060 laptop GPU ceilings.
RTX4060 = HardwareSpec(name="rtx4060-laptop", peak_gflops=6450.0, peak_bandwidth_gbps=25.22)


@dataclass(frozen=True)
class StallCounters:
    """Warp stall samples by reason.

    ``scheduler`` is the "scheduler stall" counter; it is the quantity written
    as S_cont in the activity-stall ratio.
    """

    memory: int = 0
    scheduler: int = 0
    throttle: int = 0
    other: int = 0

    def total(self) -> int:
        return self.memory + self.scheduler + self.throttle + self.other

    def activity(self) -> int:
        return self.memory + self.scheduler + self.throttle

    def __add__(self, rhs: "StallCounters") -> "StallCounters":
        return StallCounters(self.memory + rhs.memory, self.scheduler + rhs.scheduler,
                             self.throttle + rhs.throttle, self.other + rhs.other)


@dataclass(frozen=True)
class KernelCounters:
    """Counter deltas for a single kernel invocation (not cumulative)."""

    kernel_name: str
    invocation_index: int
    executed_by_class: Mapping[InstructionClass, int]
    issued_instructions: int
    active_cycles: int
    elapsed_cycles: int
    dram_bytes: int
    stalls: StallCounters
    duration_s: float

    def __post_init__(self):
        executed = {c: 0 for c in InstructionClass}
        executed.update({InstructionClass(k): v for k, v in self.executed_by_class.items()})
        object.__setattr__(self, "executed_by_class", MappingProxyType(executed))

    @property
    def executed_total(self) -> int:
        return sum(self.executed_by_class.values())


@dataclass(frozen=True)
class TelemetrySample:
    t: float
    temp_c: float
    power_w: float
    energy_j: float
    sm_clock_mhz: float


@dataclass(frozen=True)
class WorkloadTrace:
    """One recorded workload run.

    ``ambient_c`` defaults to the first telemetry temperature when left unset.
    """

    workload_name: str
    category: str
    telemetry: tuple[TelemetrySample, ...]
    kernels: tuple[KernelCounters, ...] = ()
    ambient_c: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "telemetry", tuple(self.telemetry))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if self.ambient_c is None and self.telemetry:
            object.__setattr__(self, "ambient_c", self.telemetry[0].temp_c)

    @property
    def span_s(self) -> float:
        if not self.telemetry:
            return 0.0
        return self.telemetry[-1].t - self.telemetry[0].t


@dataclass(frozen=True)
class ThermalFit:
    """Fitted lumped-capacitance response ``T(t) = T_inf + (T0 - T_inf) exp(-t/tau)``.

    ``t`` is measured from the first sample. ``steady_window`` is in trace time.
    """

    t_inf_c: float
    t0_c: float
    tau_s: float
    t_r_s: float
    rmse_c: float
    steady_window: tuple[float, float]
    converged: bool = True
    iterations: int = 0
    flags: tuple[str, ...] = ()

    def predict(self, t):
        return self.t_inf_c + (self.t0_c - self.t_inf_c) * np.exp(-np.asarray(t) / self.tau_s)


class Bound(str, Enum):
    COMPUTE = "ComputeBound"
    MEMORY = "MemoryBound"


@dataclass(frozen=True)
class RooflinePoint:
    arithmetic_intensity: float
    throughput_gflops: float
    attainable_gflops: float
    efficiency_pct: float
    bound: Bound
    above_ceiling: bool = False


# Radar axis names in plotting order, mapped to the MetricSet fields they read.
AXES = ("sm_busy_rate", "aii", "s_act", "t_inf", "t_r", "energy", "delta_cf")
INVERTED_AXES = frozenset({"t_r", "s_act"})
PC_AXES = ("sm_busy_rate", "aii", "s_act")

AXIS_FIELDS = MappingProxyType({
    "sm_busy_rate": "sm_busy_rate_pct",
    "aii": "aii_pct",
    "s_act": "s_act_pct",
    "t_inf": "t_inf_c",
    "t_r": "t_r_s",
    "energy": "energy_kj",
    "delta_cf": "delta_cf_mhz",
})


@dataclass(frozen=True)
class MetricSet:
    """Per-workload stress indicators; ``None`` marks an axis that is absent."""

    sm_busy_rate_pct: Optional[float] = None
    aii_pct: Optional[float] = None
    s_act_pct: Optional[float] = None
    t_inf_c: Optional[float] = None
    t_r_s: Optional[float] = None
    energy_kj: Optional[float] = None
    energy_rate_w: Optional[float] = None
    delta_cf_mhz: Optional[float] = None
    throughput_gflops: Optional[float] = None
    arithmetic_intensity: Optional[float] = None

    def axis_value(self, axis: str, energy_mode: str = "total") -> Optional[float]:
        if axis == "energy" and energy_mode == "rate":
            return self.energy_rate_w
        return getattr(self, AXIS_FIELDS[axis])

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricSet":
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValueError(f"unknown metric names: {', '.join(unknown)}")
        return cls(**{k: (None if v is None else float(v)) for k, v in data.items()})


@dataclass(frozen=True)
class AxisProfile:
    """Normalized radar axes and fused index for one workload."""

    name: str
    normalized_axes: Mapping[str, float]
    composite_index: Optional[float] = None
    rank: Optional[int] = None


@dataclass(frozen=True)
class StressProfile:
    """Normalized comparison of a set of workloads."""

    profiles: tuple[AxisProfile, ...]
    axes: tuple[str, ...]
    flags: tuple[str, ...] = ()
    weights: Mapping[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> AxisProfile:
        for p in self.profiles:
            if p.name == name:
                return p
        raise KeyError(name)

    def names(self) -> list[str]:
        return [p.name for p in self.profiles]


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    path: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.path}: {self.message}"


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate_trace(trace: WorkloadTrace) -> list[Finding]:
    """Check every trace invariant; an empty list means the trace is valid."""
    findings: list[Finding] = []

    def err(path, msg):
        findings.append(Finding("error", path, msg))

    tel = trace.telemetry
    if not tel:
        err("telemetry", "empty telemetry")
    for i, s in enumerate(tel):
        for name in ("t", "temp_c", "power_w", "energy_j", "sm_clock_mhz"):
            if not _finite(getattr(s, name)):
                err(f"telemetry[{i}].{name}", f"non-finite value {getattr(s, name)!r}")
        if _finite(s.t) and s.t < 0:
            err(f"telemetry[{i}].t", "negative time")
        if _finite(s.power_w) and s.power_w < 0:
            err(f"telemetry[{i}].power_w", "negative power")
        if _finite(s.sm_clock_mhz) and s.sm_clock_mhz < 0:
            err(f"telemetry[{i}].sm_clock_mhz", "negative clock")
        if i > 0:
            prev = tel[i - 1]
            if not s.t > prev.t:
                err(f"telemetry[{i}].t", f"time not strictly increasing at sample {i}")
            if s.energy_j < prev.energy_j:
                err(f"telemetry[{i}].energy_j", f"energy counter decreased at sample {i}")
    if len(tel) == 1:
        err("telemetry", "telemetry time span is zero")

    if trace.ambient_c is not None and not _finite(trace.ambient_c):
        err("ambient_c", "non-finite ambient temperature")

    if not trace.kernels:
        findings.append(Finding("warning", "kernels", "no kernel counters: telemetry-only analysis"))
    for i, k in enumerate(trace.kernels):
        p = f"kernels[{i}]"
        counts = dict(issued_instructions=k.issued_instructions, active_cycles=k.active_cycles,
                      elapsed_cycles=k.elapsed_cycles, dram_bytes=k.dram_bytes,
                      invocation_index=k.invocation_index)
        counts.update({f"executed_by_class.{c.value}": v for c, v in k.executed_by_class.items()})
        counts.update({f"stalls.{n}": getattr(k.stalls, n)
                       for n in ("memory", "scheduler", "throttle", "other")})
        for name, v in counts.items():
            if not _finite(v) or v < 0:
                err(f"{p}.{name}", f"count must be >= 0, got {v!r}")
        if _finite(k.active_cycles) and _finite(k.elapsed_cycles) and k.active_cycles > k.elapsed_cycles:
            err(f"{p}.active_cycles", "active_cycles exceeds elapsed_cycles")
        if not (_finite(k.duration_s) and k.duration_s > 0):
            err(f"{p}.duration_s", f"duration must be > 0, got {k.duration_s!r}")
    return findings
