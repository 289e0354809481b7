"""Synthetic workload traces from an intensity profile.

The generator couples three pieces, stepped at 1 s:

* power ``P = p_idle + (p_max - p_idle) * utilization * CF / CF_max``
* a single-node thermal model ``dT/dt = (P * R_th + T_amb - T) / tau``
  integrated with explicit Euler, starting from the idle equilibrium
* a one-way DVFS governor: whenever the die is above ``throttle_temp_c``
  the SM clock drops by ``throttle_step_mhz`` (never below ``cf_min_mhz``)

The energy counter is the cumulative trapezoidal integral of the reported
power samples, so counter delta and power integral agree exactly. Gaussian
noise is added to the reported temperature only.

Local truncation error of Euler at 1 s is bounded by ``|dT| / (2 tau^2)``
per step; for a 25 degC transient with tau = 60 s the trajectory stays within
0.08 degC of the analytic exponential.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Mapping

import numpy as np

from .model import (HardwareSpec, InstructionClass, KernelCounters, RTX4060, StallCounters,
                    TelemetrySample, WorkloadTrace)

STALL_REASONS = ("memory", "scheduler", "throttle", "other")
STALLS_PER_ACTIVE_CYCLE = 1 / 16  # sampled stall reasons per active SM cycle


@dataclass(frozen=True)
class SynthProfile:
    name: str
    utilization: float
    instruction_mix: Mapping[str, float]
    issue_rate: float
    stall_mix: Mapping[str, float]
    dram_intensity: float
    p_idle_w: float
    p_max_w: float
    tau_s: float
    r_th_c_per_w: float
    t_amb_c: float
    cf_max_mhz: float
    throttle_temp_c: float
    throttle_step_mhz: float
    duration_s: int = 300
    noise_temp_c: float = 0.0
    seed: int = 0
    cf_min_mhz: float = 210.0
    active_fraction: float = 1.0
    category: str = "synthetic"

    def __post_init__(self):
        mix = {InstructionClass(k).value: float(v) for k, v in self.instruction_mix.items()}
        object.__setattr__(self, "instruction_mix", mix)
        object.__setattr__(self, "stall_mix", {k: float(v) for k, v in self.stall_mix.items()})

    def validate(self) -> None:
        def frac(name, v):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{self.name}: {name} must be in [0, 1], got {v}")

        frac("utilization", self.utilization)
        frac("issue_rate", self.issue_rate)
        if not 0.0 < self.active_fraction <= 1.0:
            raise ValueError(f"{self.name}: active_fraction must be in (0, 1]")
        for k, v in self.instruction_mix.items():
            frac(f"instruction_mix[{k}]", v)
        if abs(math.fsum(self.instruction_mix.values()) - 1.0) > 1e-9:
            raise ValueError(f"{self.name}: instruction_mix must sum to 1")
        unknown = set(self.stall_mix) - set(STALL_REASONS)
        if unknown:
            raise ValueError(f"{self.name}: unknown stall reasons {sorted(unknown)}")
        for k, v in self.stall_mix.items():
            frac(f"stall_mix[{k}]", v)
        if abs(math.fsum(self.stall_mix.values()) - 1.0) > 1e-9:
            raise ValueError(f"{self.name}: stall_mix must sum to 1")
        if self.dram_intensity < 0:
            raise ValueError(f"{self.name}: dram_intensity must be >= 0")
        if not 0 <= self.p_idle_w <= self.p_max_w:
            raise ValueError(f"{self.name}: need 0 <= p_idle_w <= p_max_w")
        if self.tau_s < 1.0:
            raise ValueError(f"{self.name}: tau_s must be >= 1 s for a stable 1 s Euler step")
        if self.r_th_c_per_w <= 0 or self.cf_max_mhz <= 0 or self.throttle_step_mhz < 0:
            raise ValueError(f"{self.name}: r_th, cf_max must be > 0 and throttle step >= 0")
        if not 0 <= self.cf_min_mhz <= self.cf_max_mhz:
            raise ValueError(f"{self.name}: need 0 <= cf_min_mhz <= cf_max_mhz")
        if int(self.duration_s) != self.duration_s or self.duration_s < 1:
            raise ValueError(f"{self.name}: duration_s must be a positive whole number of seconds")
        if self.noise_temp_c < 0:
            raise ValueError(f"{self.name}: noise_temp_c must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["throttle_temp_c"]):
            d["throttle_temp_c"] = None
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthProfile":
        data = dict(data)
        unknown = sorted(set(data) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValueError(f"unknown profile fields: {', '.join(unknown)}")
        if data.get("throttle_temp_c") is None:
            data["throttle_temp_c"] = math.inf
        return cls(**data)


@dataclass
class Simulation:
    """Per-second state arrays; ``len(t) == duration_s + 1``."""

    t: np.ndarray
    temp_latent: np.ndarray
    temp_reported: np.ndarray
    power_w: np.ndarray
    energy_j: np.ndarray
    clock_mhz: np.ndarray


def _power(p: SynthProfile, clock):
    return p.p_idle_w + (p.p_max_w - p.p_idle_w) * p.utilization * (clock / p.cf_max_mhz)


def simulate(p: SynthProfile) -> Simulation:
    """Integrate the power / thermal / governor loop."""
    p.validate()
    n = int(p.duration_s)
    temp = np.empty(n + 1)
    clock = np.empty(n + 1)
    power = np.empty(n + 1)
    energy = np.empty(n + 1)
    T = p.t_amb_c + p.p_idle_w * p.r_th_c_per_w
    cf = p.cf_max_mhz
    P = _power(p, cf)
    e = 0.0
    for i in range(n + 1):
        temp[i], clock[i], power[i], energy[i] = T, cf, P, e
        if i == n:
            break
        T = T + (P * p.r_th_c_per_w + p.t_amb_c - T) / p.tau_s
        if T > p.throttle_temp_c:
            cf = max(cf - p.throttle_step_mhz, p.cf_min_mhz)
        P_next = _power(p, cf)
        e += (P + P_next) / 2.0
        P = P_next
    rng = np.random.default_rng(p.seed)
    noise = rng.normal(0.0, p.noise_temp_c, n + 1) if p.noise_temp_c > 0 else np.zeros(n + 1)
    return Simulation(np.arange(n + 1, dtype=float), temp, temp + noise, power, energy, clock)


def _split(total: int, weights: Mapping[str, float], keys) -> dict[str, int]:
    """Largest-remainder split of an integer total; the parts sum to ``total`` exactly."""
    norm = math.fsum(weights.get(k, 0.0) for k in keys)
    raw = {k: total * weights.get(k, 0.0) / norm for k in keys}
    parts = {k: min(int(math.floor(v)), total) for k, v in raw.items()}
    rest = total - sum(parts.values())
    order = sorted(keys, key=lambda k: (-(raw[k] - parts[k]), keys.index(k)))
    for k in order[:max(rest, 0)]:
        parts[k] += 1
    for k in reversed(order):
        if rest >= 0:
            break
        take = min(parts[k], -rest)
        parts[k] -= take
        rest += take
    return parts


def kernel_counters(p: SynthProfile, clock_mhz: float, index: int,
                    hw: HardwareSpec = RTX4060) -> KernelCounters:
    """Counters for one 1 s kernel interval at a given SM clock."""
    elapsed = int(round(clock_mhz * 1e6))
    active = int(round(p.active_fraction * elapsed))
    executed_total = int(round(p.utilization * active * hw.warp_size * hw.peak_ipc_per_sm))
    classes = [c.value for c in InstructionClass]
    executed = _split(executed_total, p.instruction_mix, classes)
    issued = int(round(p.issue_rate * active * hw.subpartitions_per_sm
                       * hw.peak_issue_per_subpartition))
    flops = sum(executed[c.value] * hw.warp_size * hw.flop_weights[c] for c in InstructionClass)
    stalls = _split(int(round(active * STALLS_PER_ACTIVE_CYCLE)), p.stall_mix, list(STALL_REASONS))
    return KernelCounters(
        kernel_name=f"{p.name}_kernel",
        invocation_index=index,
        executed_by_class={InstructionClass(k): v for k, v in executed.items()},
        issued_instructions=issued,
        active_cycles=active,
        elapsed_cycles=elapsed,
        dram_bytes=int(round(flops * p.dram_intensity)),
        stalls=StallCounters(stalls["memory"], stalls["scheduler"], stalls["throttle"],
                             stalls["other"]),
        duration_s=1.0,
    )


def generate(profile: SynthProfile, hw: HardwareSpec = RTX4060) -> WorkloadTrace:
    """Deterministic trace for a profile: 1 Hz telemetry plus one kernel per second."""
    sim = simulate(profile)
    telemetry = tuple(
        TelemetrySample(float(t), float(temp), float(pw), float(ej), float(cf))
        for t, temp, pw, ej, cf in zip(sim.t, sim.temp_reported, sim.power_w, sim.energy_j,
                                       sim.clock_mhz))
    kernels = tuple(kernel_counters(profile, float(sim.clock_mhz[i]), i, hw)
                    for i in range(int(profile.duration_s)))
    return WorkloadTrace(profile.name, profile.category, telemetry, kernels,
                         ambient_c=float(sim.temp_reported[0]))


def _presets_path():
    return resources.files("gpustress") / "data" / "presets.json"


def presets() -> list[SynthProfile]:
    """The ten calibrated workload presets (values produced by ``gpustress.calibrate``)."""
    data = json.loads(_presets_path().read_text())
    return [SynthProfile.from_dict(d) for d in data["presets"]]


def preset(name: str) -> SynthProfile:
    for p in presets():
        if p.name == name:
            return p
    raise KeyError(f"unknown preset {name!r}; available: {', '.join(p.name for p in presets())}")
