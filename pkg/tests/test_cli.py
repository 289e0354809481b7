import json
import math
import os
import xml.etree.ElementTree as ET

import pytest

from gpustress import cli, report, thermal
from gpustress.ingest import load_trace_dir
from gpustress.model import AXES, AXIS_FIELDS, RTX4060, validate_trace

HW = os.path.join(os.path.dirname(__file__), os.pardir, "hw", "rtx4060.json")
SVG = "{http://www.w3.org/2000/svg}"


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("traces")
    for name in ("gpu-burn", "hotspot", "needleman-wunsch"):
        assert run("synth", name, "-o", root / name) == 0
    return root


@pytest.fixture(scope="module")
def reports(bundles, tmp_path_factory):
    out = tmp_path_factory.mktemp("reports")
    assert run("analyze", bundles / "gpu-burn", bundles / "hotspot",
               bundles / "needleman-wunsch", "--hw", HW, "-o", out) == 0
    return out


def test_synth_writes_a_valid_bundle(bundles):
    trace = load_trace_dir(bundles / "gpu-burn")
    assert [f for f in validate_trace(trace) if f.severity == "error"] == []
    assert len(trace.telemetry) == 301 and len(trace.kernels) == 300


def test_analyze_populates_seven_axes(bundles, tmp_path):
    out = tmp_path / "gb.json"
    assert run("analyze", bundles / "gpu-burn", "--hw", HW, "-o", out) == 0
    doc = json.loads(out.read_text())
    assert doc["workload"] == "gpu-burn"
    for axis in AXES:
        assert doc["metrics"][AXIS_FIELDS[axis]] is not None
    assert doc["thermal_fit"]["t_r_s"] > 0
    assert doc["roofline"]["bound"] == "MemoryBound"
    assert isinstance(doc["warnings"], list)


def test_missing_hw_file_exits_2_naming_path(bundles, tmp_path, capsys):
    assert run("analyze", bundles / "gpu-burn", "--hw", tmp_path / "nope.json") == 2
    assert "nope.json" in capsys.readouterr().err


def test_telemetry_only_dir(bundles, tmp_path, capsys):
    d = tmp_path / "tel"
    d.mkdir()
    for name in ("manifest.json", "telemetry.csv"):
        (d / name).write_text((bundles / "hotspot" / name).read_text())
    out = tmp_path / "t.json"
    assert run("analyze", d, "-o", out) == 0
    doc = json.loads(out.read_text())
    assert [doc["metrics"][k] for k in ("sm_busy_rate_pct", "aii_pct", "s_act_pct")] == [None] * 3
    assert doc["roofline"] is None
    assert any("telemetry-only" in w for w in doc["warnings"])
    assert "telemetry-only" in capsys.readouterr().err


def test_invalid_trace_exits_2(tmp_path, capsys):
    d = tmp_path / "bad"
    d.mkdir()
    (d / "telemetry.csv").write_text("t_s,temp_c,power_w,energy_j,sm_clock_mhz\n0,1,NaN,0,0\n")
    assert run("analyze", d) == 2
    assert "row 2" in capsys.readouterr().err


def test_report_float_format_and_key_order(reports):
    text = (reports / "gpu-burn.json").read_text()
    doc = json.loads(text)
    assert text == json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def floats(x):
        if isinstance(x, float):
            yield x
        elif isinstance(x, dict):
            for v in x.values():
                yield from floats(v)
        elif isinstance(x, list):
            for v in x:
                yield from floats(v)
    for f in floats(doc):
        assert f == float(f"{f:.6g}")


def test_sig_handles_non_finite():
    assert report.sig({"a": math.inf, "b": [1.23456789, None], "c": True}) == \
        {"a": None, "b": [1.23457, None], "c": True}


def test_analyze_and_compare_are_byte_identical(bundles, tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        assert run("analyze", bundles / "gpu-burn", bundles / "hotspot", "-o", d) == 0
        assert run("compare", d / "gpu-burn.json", d / "hotspot.json", "-o", d / "cmp.json",
                   "--plot", d / "radar.svg") == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]


def test_compare_reports_and_plots(reports, tmp_path):
    names = ["gpu-burn", "hotspot", "needleman-wunsch"]
    out = tmp_path / "cmp.json"
    assert run("compare", *(reports / f"{n}.json" for n in names), "-o", out,
               "--plot", tmp_path / "radar.svg", "--roofline-plot", tmp_path / "roof.svg") == 0
    doc = json.loads(out.read_text())
    assert doc["ranking"][0][0] == "gpu-burn"
    assert set(doc["radar"]["polygons"]) == set(names)
    assert "toolkit-defined" in doc["note"]
    csv_lines = (tmp_path / "cmp.csv").read_text().splitlines()
    assert csv_lines[0].startswith("workload,rank,composite_index") and len(csv_lines) == 4
    radar = ET.parse(tmp_path / "radar.svg").getroot()
    groups = [g.get("id") for g in radar.iter(f"{SVG}g") if (g.get("id") or "").startswith("radar-")
              and not g.get("id").startswith("radar-fill-")]
    assert sorted(groups) == sorted(f"radar-{n}" for n in names)
    roof = ET.parse(tmp_path / "roof.svg").getroot()
    assert sum(1 for g in roof.iter(f"{SVG}g")
               if (g.get("id") or "").startswith("roofline-")) == len(names)


def test_compare_reference(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run("compare", "--reference", "paper_reference.json", "-o", "ref.json") == 0
    doc = json.loads((tmp_path / "ref.json").read_text())
    assert doc["workloads"][0]["name"] == "gpu-burn" and doc["workloads"][0]["rank"] == 1
    assert "t_r" not in doc["axes"]
    assert len(doc["roofline"]) == 9
    assert "excluded: t_r" in capsys.readouterr().err


def test_two_identical_reports_are_degenerate(reports, tmp_path):
    out = tmp_path / "same.json"
    r = reports / "hotspot.json"
    assert run("compare", r, r, "-o", out) == 0
    doc = json.loads(out.read_text())
    assert all(v == 0.5 for w in doc["workloads"] for v in w["normalized_axes"].values())
    assert sum("no spread" in f for f in doc["flags"]) == len(doc["axes"])


def test_compare_input_errors(reports, bundles, tmp_path, capsys):
    assert run("compare", reports / "hotspot.json") == 2
    d = tmp_path / "tel"
    d.mkdir()
    for name in ("manifest.json", "telemetry.csv"):
        (d / name).write_text((bundles / "gpu-burn" / name).read_text())
    assert run("analyze", d, "-o", tmp_path / "t.json") == 0
    capsys.readouterr()
    assert run("compare", reports / "hotspot.json", tmp_path / "t.json") == 2
    assert "mismatched axis availability" in capsys.readouterr().err


def test_fit_prints_thermal_oracle(bundles, capsys):
    assert run("fit", bundles / "hotspot") == 0
    lines = dict(line.split(None, 1) for line in capsys.readouterr().out.splitlines())
    tel = load_trace_dir(bundles / "hotspot").telemetry
    f = thermal.fit_exponential(tel)
    assert float(lines["tau_s"]) == pytest.approx(f.tau_s, rel=1e-5)
    assert float(lines["t_r_s"]) == pytest.approx(f.t_r_s, rel=1e-5)
    assert float(lines["rmse_c"]) == pytest.approx(f.rmse_c, rel=1e-5)
    assert float(lines["T_inf_c"]) == pytest.approx(thermal.steady_state_temp(tel, f), rel=1e-5)


def test_roofline_table(reports, tmp_path, capsys):
    out = tmp_path / "roof.csv"
    assert run("roofline", *sorted(reports.glob("*.json")), "--hw", HW, "-o", out) == 0
    text = capsys.readouterr().out
    assert "efficiency_pct" in text and "MemoryBound" in text
    rows = {r.split(",")[0]: r.split(",") for r in out.read_text().splitlines()[1:]}
    assert float(rows["gpu-burn"][4]) == pytest.approx(87.9, abs=0.05)
    assert float(rows["hotspot"][3]) == pytest.approx(59.0, abs=0.05)


def test_synth_errors(tmp_path):
    assert run("synth", "doom", "-o", tmp_path / "x") == 2
    assert run("synth", "-o", tmp_path / "x") == 2


def test_internal_error_exits_3(monkeypatch, bundles, capsys):
    def boom(*_):
        raise RuntimeError("bug")
    monkeypatch.setattr(cli, "analyze_trace", boom)
    assert run("analyze", bundles / "gpu-burn") == 3
    assert "RuntimeError" in capsys.readouterr().err


def test_synth_profile_file_and_seed(tmp_path):
    from gpustress.synthgen import preset
    p = tmp_path / "profile.json"
    p.write_text(json.dumps(preset("lenet5").to_dict()))
    assert run("synth", "--profile", p, "-o", tmp_path / "a", "--seed", 9) == 0
    assert run("synth", "--profile", p, "-o", tmp_path / "b", "--seed", 9) == 0
    for name in ("manifest.json", "telemetry.csv", "counters.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert RTX4060.name == "rtx4060-laptop"
