"""``gpustress`` command line: analyze, compare, synth, fit, roofline.

Exit codes: 0 success, 2 input or validation error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import traceback
import warnings
from dataclasses import replace
from pathlib import Path

from . import report, roofline, thermal
from .ingest import default_reference_path, load_hardware, load_reference, load_trace_dir, write_trace
from .model import AXES, RTX4060, HardwareSpec, StressWarning
from .stress import analyze_trace, compare
from .synthgen import SynthProfile, generate, preset

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


class UsageError(ValueError):
    pass


def _hw(args):
    return load_hardware(args.hw)


def cmd_analyze(args) -> int:
    hw = _hw(args)
    dirs = [Path(d) for d in args.trace_dirs]
    many = len(dirs) > 1
    out = Path(args.output) if args.output else None
    for d in dirs:
        trace = load_trace_dir(d)
        a = analyze_trace(trace, hw)
        for w in a.warnings:
            print(f"warning: {a.workload_name}: {w}", file=sys.stderr)
        text = report.dumps(report.analysis_document(a, hw))
        if out is None:
            sys.stdout.write(text)
        else:
            report.write(out / f"{a.workload_name}.json" if many else out, text)
    return EXIT_OK


def _weights(spec):
    if spec is None:
        return None
    p = Path(spec)
    data = json.loads(p.read_text()) if p.exists() else json.loads(spec)
    if not isinstance(data, dict):
        raise UsageError("--weights must be a JSON object mapping axis names to weights")
    return {str(k): float(v) for k, v in data.items()}


def _reference_path(arg):
    # a bare fixture name falls back to the bundled copy
    p = Path(arg)
    if not p.exists() and p.name == default_reference_path().name and len(p.parts) == 1:
        return default_reference_path()
    return p


def _load_compare_inputs(args):
    """-> (sets, roofline points, per-workload extras, hardware)"""
    if args.reference is not None:
        if args.reports:
            raise UsageError("give either report files or --reference, not both")
        ref = load_reference(_reference_path(args.reference))
        sets = [(e.name, e.metric_set()) for e in ref]
        extra = {e.name: {"display_name": e.display_name, "category": e.category,
                          "estimated_fields": e.estimated_fields()} for e in ref}
        return sets, report.reference_roofline(ref), extra, ref.hardware
    if len(args.reports) < 2:
        raise UsageError("compare needs at least two reports (or --reference)")
    hw = load_hardware(args.hw) if args.hw else None
    sets, pts, extra = [], [], {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StressWarning)
        for path in args.reports:
            name, metrics, doc = report.read_analysis(path)
            seen = sum(1 for n, _ in sets if n == name or n.startswith(f"{name}#"))
            if seen:
                name = f"{name}#{seen + 1}"  # same workload given twice
            sets.append((name, metrics))
            extra[name] = {"category": doc.get("category"), "source": Path(path).name}
            doc_hw = HardwareSpec.from_dict(doc["hardware"]) if doc.get("hardware") else None
            use = hw or doc_hw
            ai, thr = metrics.arithmetic_intensity, metrics.throughput_gflops
            if ai is not None and thr is not None and use is not None:
                pts.append((name, roofline.place(ai, thr, use)))
                hw = hw or use
    return sets, pts, extra, hw or RTX4060


def cmd_compare(args) -> int:
    sets, pts, extra, hw = _load_compare_inputs(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StressWarning)  # surfaced below as flags
        profile = compare(sets, _weights(args.weights), args.energy_axis)
    for flag in profile.flags:
        print(f"note: {flag}", file=sys.stderr)
    doc = report.comparison_document(profile, sets, pts, extra, args.energy_axis)
    if args.output:
        out = Path(args.output)
        report.write(out, report.dumps(doc))
        report.write(Path(args.csv) if args.csv else out.with_suffix(".csv"),
                     report.comparison_csv(profile))
    elif args.csv:
        report.write(args.csv, report.comparison_csv(profile))
    if args.plot or args.roofline_plot:
        from . import plotting
        if args.plot:
            plotting.write_radar(profile, args.plot)
        if args.roofline_plot:
            plotting.write_roofline(pts, hw, args.roofline_plot)
    for p in sorted(profile.profiles, key=lambda p: p.rank):
        print(f"{p.rank:3d}  {p.name:20s} {report.sig(p.composite_index)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if bool(args.preset) == bool(args.profile):
        raise UsageError("give exactly one of PRESET or --profile")
    if args.profile:
        profile = SynthProfile.from_dict(json.loads(Path(args.profile).read_text()))
    else:
        try:
            profile = preset(args.preset)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if args.seed is not None:
        profile = replace(profile, seed=args.seed)
    hw = _hw(args)
    trace = generate(profile, hw)
    write_trace(trace, args.output, generator=profile.to_dict())
    print(f"wrote {len(trace.telemetry)} telemetry samples and {len(trace.kernels)} kernels "
          f"to {args.output}")
    return EXIT_OK


def cmd_fit(args) -> int:
    trace = load_trace_dir(args.trace_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StressWarning)
        fit = thermal.fit_exponential(trace.telemetry)
        t_inf = thermal.steady_state_temp(trace.telemetry, fit)
    for w in dict.fromkeys(str(c.message) for c in caught):
        print(f"warning: {w}", file=sys.stderr)
    print(f"T_inf_c    {t_inf:.6g}")
    print(f"tau_s      {fit.tau_s:.6g}")
    print(f"t_r_s      {fit.t_r_s:.6g}")
    print(f"rmse_c     {fit.rmse_c:.6g}")
    print(f"fit_t_inf  {fit.t_inf_c:.6g}")
    print(f"converged  {str(fit.converged).lower()}  iterations {fit.iterations}")
    if fit.flags:
        print(f"flags      {','.join(fit.flags)}")
    return EXIT_OK


def cmd_roofline(args) -> int:
    hw = _hw(args)
    pts = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StressWarning)
        for path in args.reports:
            name, m, _ = report.read_analysis(path)
            if m.arithmetic_intensity is None or m.throughput_gflops is None:
                print(f"warning: {name}: no counter data, skipped", file=sys.stderr)
                continue
            pts.append((name, roofline.place(m.arithmetic_intensity, m.throughput_gflops, hw)))
    rows = report.roofline_rows(pts)
    if args.output:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.ROOFLINE_HEADER)
        w.writerows(rows)
        report.write(args.output, buf.getvalue())
    if args.plot:
        from . import plotting
        plotting.write_roofline(pts, hw, args.plot)
    print(f"ridge point {report.sig(hw.ridge_point)} FLOP/byte")
    widths = [max(len(str(r[i])) for r in [report.ROOFLINE_HEADER, *rows])
              for i in range(len(report.ROOFLINE_HEADER))]
    for r in [report.ROOFLINE_HEADER, *rows]:
        print("  ".join(str(v).ljust(n) for v, n in zip(r, widths)).rstrip())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpustress", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyze trace bundles into JSON reports")
    a.add_argument("trace_dirs", nargs="+", metavar="DIR")
    a.add_argument("--hw", default="rtx4060", help="hardware JSON path or built-in name")
    a.add_argument("-o", "--output", help="report file (one DIR) or directory (several)")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", help="normalize, fuse and rank reports")
    c.add_argument("reports", nargs="*", metavar="REPORT")
    c.add_argument("--reference", nargs="?", const=str(default_reference_path()),
                   metavar="PATH", help="compare the published reference fixture")
    c.add_argument("--hw", help="hardware for roofline placement (default: from reports)")
    c.add_argument("-o", "--output", help="comparison JSON; CSV is written next to it")
    c.add_argument("--csv", help="CSV path (default: OUTPUT with .csv suffix)")
    c.add_argument("--plot", metavar="SVG", help="radar chart")
    c.add_argument("--roofline-plot", metavar="SVG", help="roofline chart")
    c.add_argument("--weights", help="JSON object or file of per-axis weights "
                                     f"(axes: {', '.join(AXES)})")
    c.add_argument("--energy-axis", choices=("total", "rate"), default="total")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("synth", help="generate a synthetic trace bundle")
    s.add_argument("preset", nargs="?")
    s.add_argument("--profile", help="SynthProfile JSON")
    s.add_argument("-o", "--output", required=True, metavar="DIR")
    s.add_argument("--seed", type=int)
    s.add_argument("--hw", default="rtx4060")
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("fit", help="fit the thermal exponential of a trace")
    f.add_argument("trace_dir", metavar="DIR")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("roofline", help="place reports on the roofline")
    r.add_argument("reports", nargs="+", metavar="REPORT")
    r.add_argument("--hw", default="rtx4060")
    r.add_argument("-o", "--output", help="CSV table")
    r.add_argument("--plot", metavar="SVG")
    r.set_defaults(func=cmd_roofline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
