"""Trace bundle and reference fixture loaders.

A trace bundle is a directory holding::

    manifest.json     workload metadata
    telemetry.csv     t_s,temp_c,power_w,energy_j,sm_clock_mhz   (1 Hz samples)
    counters.csv      one row per kernel invocation (optional)

Counter rows are per-invocation deltas, never running totals. Telemetry
columns may carry an alternative unit suffix (``t_ms``, ``power_mw``,
``energy_mj``, ``temp_k``, ``sm_clock_ghz`` ...); values are converted to the
canonical units on load. Any column the schema does not know is rejected.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping, Optional, Sequence

from .model import (AXIS_FIELDS, HardwareSpec, InstructionClass, KernelCounters,
                    MetricSet, RTX4060, StallCounters, TelemetrySample, WorkloadTrace,
                    validate_trace)

TRACE_SCHEMA = "gpustress.trace/1"
TELEMETRY_COLUMNS = ("t_s", "temp_c", "power_w", "energy_j", "sm_clock_mhz")
COUNTER_COLUMNS = ("kernel", "invocation", "alu", "fp16", "fp64", "dmma", "hmma", "imma", "xu",
                   "issued", "active_cycles", "elapsed_cycles", "dram_bytes", "stall_mem",
                   "stall_sched", "stall_throttle", "stall_other", "duration_s")

# quantity prefix -> {unit suffix: converter to canonical}
_UNITS = {
    "t": ("t_s", {"s": lambda v: v, "ms": lambda v: v / 1e3}),
    "temp": ("temp_c", {"c": lambda v: v, "k": lambda v: v - 273.15,
                        "f": lambda v: (v - 32.0) * 5.0 / 9.0}),
    "power": ("power_w", {"w": lambda v: v, "mw": lambda v: v / 1e3}),
    "energy": ("energy_j", {"j": lambda v: v, "mj": lambda v: v / 1e3, "kj": lambda v: v * 1e3}),
    "sm_clock": ("sm_clock_mhz", {"mhz": lambda v: v, "ghz": lambda v: v * 1e3,
                                  "khz": lambda v: v / 1e3, "hz": lambda v: v / 1e6}),
}


class TraceFormatError(ValueError):
    """Malformed trace or fixture content; ``row`` is 1-based, header is row 1."""

    def __init__(self, message: str, path: Optional[str] = None, row: Optional[int] = None,
                 column: Optional[str] = None):
        where = []
        if path:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.path, self.row, self.column = path, row, column


def _resolve_telemetry_header(header: Sequence[str], path) -> list[tuple[str, callable]]:
    seen: dict[str, str] = {}
    plan = []
    for col in header:
        col_key = col.strip().lower()
        for prefix in sorted(_UNITS, key=len, reverse=True):
            if col_key.startswith(prefix + "_"):
                canonical, units = _UNITS[prefix]
                unit = col_key[len(prefix) + 1:]
                if unit not in units:
                    raise TraceFormatError(f"unit mismatch: unsupported unit {unit!r} for {prefix}",
                                           path, 1, col)
                if canonical in seen:
                    raise TraceFormatError(f"duplicate quantity (also {seen[canonical]!r})", path, 1, col)
                seen[canonical] = col
                plan.append((canonical, units[unit]))
                break
        else:
            raise TraceFormatError("unknown column", path, 1, col)
    missing = [c for c in TELEMETRY_COLUMNS if c not in seen]
    if missing:
        raise TraceFormatError(f"missing columns: {', '.join(missing)}", path, 1)
    return plan


def _parse_float(text: str, path, row, col) -> float:
    try:
        value = float(text)
    except ValueError:
        raise TraceFormatError(f"not a number: {text!r}", path, row, col) from None
    if not math.isfinite(value):
        raise TraceFormatError(f"non-finite value: {text!r}", path, row, col)
    return value


def _parse_int(text: str, path, row, col) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    value = _parse_float(text, path, row, col)
    if not value.is_integer():
        raise TraceFormatError(f"expected an integer count: {text!r}", path, row, col)
    return int(value)


def read_telemetry_csv(stream: IO[str], path=None) -> tuple[TelemetrySample, ...]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise TraceFormatError("empty telemetry", path)
    plan = _resolve_telemetry_header(header, path)
    samples = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(plan):
            raise TraceFormatError(f"expected {len(plan)} fields, got {len(row)}", path, row_no)
        values = {}
        for (canonical, convert), text, col in zip(plan, row, header):
            values[canonical] = convert(_parse_float(text, path, row_no, col))
        samples.append(TelemetrySample(values["t_s"], values["temp_c"], values["power_w"],
                                       values["energy_j"], values["sm_clock_mhz"]))
    if not samples:
        raise TraceFormatError("empty telemetry", path)
    return tuple(samples)


def read_counters_csv(stream: IO[str], path=None) -> tuple[KernelCounters, ...]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return ()
    header = [h.strip().lower() for h in header]
    unknown = [h for h in header if h not in COUNTER_COLUMNS]
    if unknown:
        raise TraceFormatError("unknown column", path, 1, unknown[0])
    missing = [c for c in COUNTER_COLUMNS if c not in header]
    if missing:
        raise TraceFormatError(f"missing columns: {', '.join(missing)}", path, 1)
    kernels = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TraceFormatError(f"expected {len(header)} fields, got {len(row)}", path, row_no)
        rec = dict(zip(header, row))
        ints = {c: _parse_int(rec[c], path, row_no, c) for c in COUNTER_COLUMNS[1:-1]}
        kernels.append(KernelCounters(
            kernel_name=rec["kernel"],
            invocation_index=ints["invocation"],
            executed_by_class={c: ints[c.value] for c in InstructionClass},
            issued_instructions=ints["issued"],
            active_cycles=ints["active_cycles"],
            elapsed_cycles=ints["elapsed_cycles"],
            dram_bytes=ints["dram_bytes"],
            stalls=StallCounters(ints["stall_mem"], ints["stall_sched"],
                                 ints["stall_throttle"], ints["stall_other"]),
            duration_s=_parse_float(rec["duration_s"], path, row_no, "duration_s"),
        ))
    return tuple(kernels)


def write_telemetry_csv(stream: IO[str], samples: Iterable[TelemetrySample]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(TELEMETRY_COLUMNS)
    for s in samples:
        w.writerow([repr(float(s.t)), repr(float(s.temp_c)), repr(float(s.power_w)),
                    repr(float(s.energy_j)), repr(float(s.sm_clock_mhz))])


def write_counters_csv(stream: IO[str], kernels: Iterable[KernelCounters]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(COUNTER_COLUMNS)
    for k in kernels:
        st = k.stalls
        w.writerow([k.kernel_name, k.invocation_index,
                    *(k.executed_by_class[c] for c in InstructionClass),
                    k.issued_instructions, k.active_cycles, k.elapsed_cycles, k.dram_bytes,
                    st.memory, st.scheduler, st.throttle, st.other, repr(float(k.duration_s))])


@dataclass(frozen=True)
class TraceBundle:
    manifest: Mapping
    telemetry_path: Path
    counters_path: Optional[Path]

    @classmethod
    def from_dir(cls, directory) -> "TraceBundle":
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if manifest_path.exists():
            try:
                manifest = json.loads(manifest_path.read_text())
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"invalid JSON ({exc.msg})", manifest_path, exc.lineno) from None
        else:
            manifest = {"workload_name": directory.name, "category": "unknown"}
        tel = directory / manifest.get("telemetry", "telemetry.csv")
        counters_name = manifest.get("counters", "counters.csv")
        counters = directory / counters_name if counters_name else None
        if not tel.exists():
            raise FileNotFoundError(f"telemetry file not found: {tel}")
        if counters is not None and not counters.exists():
            counters = None
        return cls(manifest, tel, counters)


_MANIFEST_KEYS = {"schema", "workload_name", "category", "ambient_c", "hardware", "telemetry",
                  "counters", "generator"}


def load_trace(bundle: TraceBundle) -> WorkloadTrace:
    """Parse a bundle into a trace; raises TraceFormatError on any invariant violation."""
    unknown = sorted(set(bundle.manifest) - _MANIFEST_KEYS)
    if unknown:
        raise TraceFormatError(f"unknown manifest keys: {', '.join(unknown)}", "manifest.json")
    with open(bundle.telemetry_path, newline="") as f:
        telemetry = read_telemetry_csv(f, bundle.telemetry_path)
    kernels: tuple[KernelCounters, ...] = ()
    if bundle.counters_path is not None:
        with open(bundle.counters_path, newline="") as f:
            kernels = read_counters_csv(f, bundle.counters_path)
    m = bundle.manifest
    trace = WorkloadTrace(
        workload_name=m.get("workload_name", bundle.telemetry_path.parent.name),
        category=m.get("category", "unknown"),
        telemetry=telemetry,
        kernels=kernels,
        ambient_c=m.get("ambient_c"),
    )
    errors = [f for f in validate_trace(trace) if f.severity == "error"]
    if errors:
        raise TraceFormatError("; ".join(str(e) for e in errors), bundle.telemetry_path.parent)
    return trace


def load_trace_dir(directory) -> WorkloadTrace:
    return load_trace(TraceBundle.from_dir(directory))


def trace_files(trace: WorkloadTrace, generator: Optional[Mapping] = None) -> dict[str, str]:
    """Serialize a trace into ``{filename: text}`` using the bundle schema."""
    tel, cnt = io.StringIO(), io.StringIO()
    write_telemetry_csv(tel, trace.telemetry)
    write_counters_csv(cnt, trace.kernels)
    manifest = {
        "schema": TRACE_SCHEMA,
        "workload_name": trace.workload_name,
        "category": trace.category,
        "ambient_c": trace.ambient_c,
        "telemetry": "telemetry.csv",
        "counters": "counters.csv",
    }
    if generator is not None:
        manifest["generator"] = dict(generator)
    return {
        "manifest.json": json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        "telemetry.csv": tel.getvalue(),
        "counters.csv": cnt.getvalue(),
    }


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    with open(tmp, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def write_trace(trace: WorkloadTrace, directory, generator: Optional[Mapping] = None) -> Path:
    directory = Path(directory)
    for name, text in trace_files(trace, generator).items():
        atomic_write_text(directory / name, text)
    return directory


BUILTIN_HARDWARE = {"rtx4060": RTX4060, "rtx4060-laptop": RTX4060}


def load_hardware(source) -> HardwareSpec:
    """Load a HardwareSpec from a JSON file path or a built-in name."""
    if isinstance(source, HardwareSpec):
        return source
    key = str(source)
    if key in BUILTIN_HARDWARE:
        return BUILTIN_HARDWARE[key]
    path = Path(key)
    if not path.exists():
        raise FileNotFoundError(f"hardware file not found: {path}")
    try:
        return HardwareSpec.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise TraceFormatError(str(exc), path) from None


# -- reference fixture ------------------------------------------------------

REFERENCE_WORKLOADS = ("gpu-burn", "lenet5", "mnasnet", "mobilenetv2", "resnet18",
                       "backprop", "gaussian", "hotspot", "needleman-wunsch", "streamcluster")
_REPORTED_FIELDS = tuple(AXIS_FIELDS.values())


@dataclass(frozen=True)
class Reported:
    """A published value: exact point, closed range, or one-sided bound."""

    value: Optional[float] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    source: str = "workload"

    @classmethod
    def parse(cls, raw, source: str, where: str) -> "Reported":
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return cls(value=raw, source=source)
        if isinstance(raw, Mapping) and len(raw) == 1:
            (kind, v), = raw.items()
            if kind == "range" and len(v) == 2 and v[0] <= v[1]:
                return cls(lo=v[0], hi=v[1], source=source)
            if kind == "min":
                return cls(lo=v, source=source)
            if kind == "max":
                return cls(hi=v, source=source)
        raise TraceFormatError(f"bad reported value {raw!r}", where)

    @property
    def is_point(self) -> bool:
        return self.value is not None

    def point(self) -> float:
        """Point estimate: the value, else the range midpoint, else the one-sided bound."""
        if self.value is not None:
            return float(self.value)
        if self.lo is not None and self.hi is not None:
            return (self.lo + self.hi) / 2.0
        return float(self.lo if self.lo is not None else self.hi)

    def contains(self, x: float, abs_tol: float = 0.0, rel_tol: float = 0.0) -> bool:
        def slack(ref):
            return max(abs_tol, rel_tol * abs(ref))
        if self.value is not None:
            return abs(x - self.value) <= slack(self.value)
        if self.lo is not None and x < self.lo - slack(self.lo):
            return False
        if self.hi is not None and x > self.hi + slack(self.hi):
            return False
        return True

    def describe(self) -> str:
        if self.value is not None:
            return f"{self.value}"
        if self.lo is not None and self.hi is not None:
            return f"[{self.lo}, {self.hi}]"
        return f">= {self.lo}" if self.lo is not None else f"<= {self.hi}"


@dataclass(frozen=True)
class ReferenceEntry:
    name: str
    display_name: str
    category: str
    group: Optional[str]
    reported: Mapping[str, Reported]
    roofline: Optional[tuple[float, float]]

    def metric_set(self) -> MetricSet:
        """Point estimates for every reported axis; unreported axes stay ``None``."""
        values = {f: r.point() for f, r in self.reported.items()}
        ai, thr = self.roofline if self.roofline else (None, None)
        return MetricSet(arithmetic_intensity=ai, throughput_gflops=thr, **values)

    def estimated_fields(self) -> list[str]:
        return sorted(f for f, r in self.reported.items() if not r.is_point)


@dataclass(frozen=True)
class ReferenceDataset:
    entries: Mapping[str, ReferenceEntry]
    hardware: HardwareSpec
    observations: tuple = ()
    raw: Mapping = field(default_factory=dict, compare=False, repr=False)

    def __getitem__(self, name: str) -> ReferenceEntry:
        return self.entries[name]

    def __iter__(self):
        return iter(self.entries.values())

    def __len__(self):
        return len(self.entries)

    def names(self) -> list[str]:
        return list(self.entries)


def default_reference_path() -> Path:
    return Path(str(resources.files("gpustress") / "data" / "paper_reference.json"))


def _check_metric_keys(metrics: Mapping, where: str) -> None:
    unknown = sorted(set(metrics) - set(_REPORTED_FIELDS))
    if unknown:
        raise TraceFormatError(f"unknown axis name: {', '.join(unknown)}", where)


def load_reference(path=None) -> ReferenceDataset:
    path = Path(path) if path is not None else default_reference_path()
    if not path.exists():
        raise FileNotFoundError(f"reference file not found: {path}")
    raw = json.loads(path.read_text())
    workloads = raw.get("workloads", {})
    missing = [w for w in REFERENCE_WORKLOADS if w not in workloads]
    if missing:
        raise TraceFormatError(f"missing workload: {', '.join(missing)}", path)
    extra = sorted(set(workloads) - set(REFERENCE_WORKLOADS))
    if extra:
        raise TraceFormatError(f"unexpected workload: {', '.join(extra)}", path)

    group_of: dict[str, str] = {}
    group_metrics: dict[str, Mapping] = {}
    for gname, g in raw.get("groups", {}).items():
        _check_metric_keys(g.get("metrics", {}), f"{path}: group {gname}")
        group_metrics[gname] = g.get("metrics", {})
        for member in g.get("members", []):
            group_of[member] = gname

    entries = {}
    for name in REFERENCE_WORKLOADS:
        w = workloads[name]
        metrics = w.get("metrics", {})
        _check_metric_keys(metrics, f"{path}: workload {name}")
        group = group_of.get(name)
        reported = {}
        for f in _REPORTED_FIELDS:
            if f in metrics:
                reported[f] = Reported.parse(metrics[f], "workload", f"{path}: {name}.{f}")
            elif group and f in group_metrics[group]:
                reported[f] = Reported.parse(group_metrics[group][f], f"group:{group}",
                                             f"{path}: {group}.{f}")
        roof = w.get("roofline")
        roofline = (roof["arithmetic_intensity"], roof["throughput_gflops"]) if roof else None
        entries[name] = ReferenceEntry(name, w.get("display_name", name), w.get("category", ""),
                                       group, reported, roofline)
    hw = HardwareSpec.from_dict(raw["hardware"]) if "hardware" in raw else RTX4060
    return ReferenceDataset(entries, hw, tuple(raw.get("observations", ())), raw)
