"""End-to-end exercises for the cimeval command line."""

import hashlib
import json
from pathlib import Path

import pytest

from cimeval import __version__
from cimeval.cli import main

from conftest import fixture_path, read_fixture

ARCH = fixture_path("arch_crossbar.yaml")
WORKLOAD = fixture_path("workload_tiny.yaml")
MAPPING = fixture_path("mapping_tiny.yaml")
CONV_WORKLOAD = fixture_path("workload_conv.yaml")

# M=8/K=16 gives a mapping space well past the sampling budget, so a
# budget of 200 feeds the worker pool at least 64 indices.
FC_TEXT = """\
layers:
  - name: big
    dims: {M: 8, K: 16}
    projections: {Inputs: [K], Weights: [K, M], Outputs: [M]}
    bits: {Inputs: 1, Weights: 1, Outputs: 8}
    pmf: {Inputs: {two_point: [0, 1, 0.25]}, Weights: {delta: 1}}
"""

DELTA_TEXT = """\
layers:
  - name: sure
    dims: {M: 2, K: 2}
    projections: {Inputs: [K], Weights: [K, M], Outputs: [M]}
    bits: {Inputs: 1, Weights: 1, Outputs: 8}
    pmf: {Inputs: {delta: 1}, Weights: {delta: 1}}
"""

PADDED_MAPPING = """\
nodes:
  buffer:
    - {dim: M, bound: 2}
  cell:
    - {dim: M, bound: 2, kind: spatialX}
    - {dim: K, bound: 2, kind: spatialY}
"""


def test_evaluate_report_contents(tmp_path):
    out = tmp_path / "report.json"
    rc = main(
        [
            "evaluate",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--mapping", MAPPING,
            "--out", str(out),
        ]
    )
    assert rc == 0
    text = out.read_text(encoding="utf-8")
    report = json.loads(text)
    assert report["command"] == "evaluate"
    assert report["version"] == __version__
    assert report["layer"] == "tiny"
    assert report["metrics"]["energy_j"] == pytest.approx(5.82e-12, rel=1e-12)
    assert report["metrics"]["macs"] == 4
    assert report["metrics"]["cycles"] == 1
    assert report["counts"]["cell"]["all"]["compute"] == 4
    assert report["counts"]["dac"]["Inputs"]["convert"] == 2
    assert report["counts"]["buffer"]["Outputs"]["write"] == 1
    assert report["breakdown"]["adc"]["convert"]["count"] == 2
    assert report["breakdown"]["adc"]["convert"]["energy_j"] == pytest.approx(5.12e-12)
    assert report["mapping"] == {
        "cell": [
            {"dim": "M", "bound": 2, "kind": "spatialX"},
            {"dim": "K", "bound": 2, "kind": "spatialY"},
        ]
    }
    assert report["diagnostics"]["warnings"] == []
    assert report["energy_table_fingerprint"]
    for name, path in (("arch", ARCH), ("workload", WORKLOAD), ("mapping", MAPPING)):
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        assert report["inputs"][name] == {"path": path, "sha256": digest}
    # the emitted form is already canonical
    assert text == json.dumps(report, sort_keys=True, indent=2) + "\n"


def test_evaluate_reruns_are_byte_identical(tmp_path, capsys):
    argv = ["evaluate", "--arch", ARCH, "--workload", WORKLOAD, "--mapping", MAPPING]
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(argv) == 0
    assert capsys.readouterr().out == a.read_text(encoding="utf-8")


def test_evaluate_layer_selection_errors(capsys):
    rc = main(
        ["evaluate", "--arch", ARCH, "--workload", CONV_WORKLOAD, "--mapping", MAPPING]
    )
    assert rc == 2
    assert "needs --layer" in capsys.readouterr().err

    rc = main(
        [
            "evaluate",
            "--arch", ARCH,
            "--workload", CONV_WORKLOAD,
            "--layer", "nope",
            "--mapping", MAPPING,
        ]
    )
    assert rc == 2
    err = capsys.readouterr().err
    assert "no layer 'nope'" in err
    assert "conv3x3" in err


def test_evaluate_rejects_invalid_mapping(tmp_path, capsys):
    short = tmp_path / "short.yaml"
    short.write_text("nodes:\n  cell:\n    - {dim: M, bound: 2, kind: spatialX}\n")
    rc = main(
        ["evaluate", "--arch", ARCH, "--workload", WORKLOAD, "--mapping", str(short)]
    )
    assert rc == 2
    assert "invalid mapping" in capsys.readouterr().err


def test_missing_input_file_exits_two(tmp_path, capsys):
    rc = main(
        [
            "evaluate",
            "--arch", str(tmp_path / "ghost.yaml"),
            "--workload", WORKLOAD,
            "--mapping", MAPPING,
        ]
    )
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_broken_architecture_exits_two(tmp_path, capsys):
    base = read_fixture("arch_crossbar.yaml")
    head = base[: base.index("--- !Component\nname: cell")]
    bad = tmp_path / "bad.yaml"
    bad.write_text(head + "--- !Container\nname: grid\nspatial: {meshX: 2}\n")
    rc = main(
        ["evaluate", "--arch", str(bad), "--workload", WORKLOAD, "--mapping", MAPPING]
    )
    assert rc == 2
    assert "architecture validation failed" in capsys.readouterr().err

    rc = main(["validate", "--arch", str(bad)])
    assert rc == 2
    out = capsys.readouterr().out
    assert "error:" in out
    assert "innermost" in out


def test_validate_happy_paths(capsys):
    assert main(["validate", "--arch", ARCH]) == 0
    assert capsys.readouterr().out == "ok\n"

    rc = main(
        [
            "validate",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--mapping", MAPPING,
        ]
    )
    assert rc == 0
    assert capsys.readouterr().out == "ok\n"


def test_validate_mapping_needs_workload(capsys):
    rc = main(["validate", "--arch", ARCH, "--mapping", MAPPING])
    assert rc == 2
    assert "needs --workload" in capsys.readouterr().err


def test_validate_prints_padding_warning(tmp_path, capsys):
    padded = tmp_path / "padded.yaml"
    padded.write_text(PADDED_MAPPING)
    rc = main(
        [
            "validate",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--mapping", str(padded),
        ]
    )
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("warning: [tiny]")
    assert "padded" in lines[0]
    assert lines[-1] == "ok"


def test_search_exhausts_the_tiny_space(tmp_path):
    out = tmp_path / "search.json"
    rc = main(["search", "--arch", ARCH, "--workload", WORKLOAD, "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["command"] == "search"
    assert report["objective"] == "energy"
    assert report["budget"] == 1000
    assert report["seed"] == 0
    entry = report["layers"]["tiny"]
    assert entry["space_total"] == 49
    assert entry["evaluated"] == 49
    assert entry["valid"] == 47
    assert entry["metrics"]["energy_j"] == pytest.approx(5.82e-12, rel=1e-12)
    assert entry["energy_table_fingerprint"]
    assert report["totals"]["energy_j"] == pytest.approx(5.82e-12, rel=1e-12)
    assert report["totals"]["macs"] == 4
    assert report["totals"]["edp_js"] == pytest.approx(
        report["totals"]["energy_j"] * report["totals"]["latency_s"], rel=1e-12
    )


def test_search_dump_mapping_round_trips(tmp_path):
    dump = tmp_path / "best.yaml"
    out = tmp_path / "search.json"
    rc = main(
        [
            "search",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--out", str(out),
            "--dump-mapping", str(dump),
        ]
    )
    assert rc == 0
    best = json.loads(out.read_text(encoding="utf-8"))["layers"]["tiny"]

    ev_out = tmp_path / "eval.json"
    rc = main(
        [
            "evaluate",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--mapping", str(dump),
            "--out", str(ev_out),
        ]
    )
    assert rc == 0
    ev = json.loads(ev_out.read_text(encoding="utf-8"))
    assert ev["metrics"]["energy_j"] == pytest.approx(
        best["metrics"]["energy_j"], rel=1e-12
    )
    assert ev["mapping"] == best["best_mapping"]


def test_search_dump_mapping_needs_single_layer(capsys):
    rc = main(
        [
            "search",
            "--arch", ARCH,
            "--workload", CONV_WORKLOAD,
            "--dump-mapping", "unused.yaml",
        ]
    )
    assert rc == 2
    assert "--dump-mapping needs --layer" in capsys.readouterr().err


def test_search_worker_count_leaves_no_trace(tmp_path):
    wl = tmp_path / "fc.yaml"
    wl.write_text(FC_TEXT)
    argv = [
        "search",
        "--arch", ARCH,
        "--workload", str(wl),
        "--budget", "200",
        "--seed", "5",
    ]
    a = tmp_path / "j1.json"
    b = tmp_path / "j2.json"
    assert main(argv + ["--jobs", "1", "--out", str(a)]) == 0
    assert main(argv + ["--jobs", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_search_empty_space_exits_three(tmp_path, capsys):
    base = read_fixture("arch_crossbar.yaml")
    pinned = base.replace(
        "temporal_reuse: [Inputs, Outputs]\n",
        "temporal_reuse: [Inputs, Outputs]\nconstraints:\n  max_tile: {M: 1}\n",
    )
    arch = tmp_path / "pinned.yaml"
    arch.write_text(pinned)
    rc = main(["search", "--arch", str(arch), "--workload", WORKLOAD])
    assert rc == 3
    assert "no valid mapping for layer 'tiny'" in capsys.readouterr().err


def test_sweep_csv_schema_and_energies(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = main(
        [
            "sweep",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--param", "cell.t_read=10.0e-9,20.0e-9",
            "--out", str(out),
        ]
    )
    assert rc == 0
    text = out.read_text(encoding="utf-8")
    assert "\r" not in text
    lines = text.split("\n")
    columns = (
        "layer,cell.t_read,best_energy_j,energy_per_mac_j,cycles,utilization,area_m2"
    )
    assert lines[0] == "# cimeval-sweep-v1 " + columns
    assert lines[1] == columns
    assert lines[4] == ""
    slow = lines[2].split(",")
    fast = lines[3].split(",")
    assert slow[0] == fast[0] == "tiny"
    assert float(slow[1]) == pytest.approx(1e-8)
    assert float(fast[1]) == pytest.approx(2e-8)
    # doubling t_read doubles only the cell term: 4 * 0.125pJ -> 4 * 0.25pJ
    assert float(slow[2]) == pytest.approx(5.82e-12, rel=1e-12)
    assert float(fast[2]) == pytest.approx(6.32e-12, rel=1e-12)
    assert slow[4] == "1"


def test_sweep_zips_params_and_rejects_bad_specs(tmp_path, capsys):
    argv = ["sweep", "--arch", ARCH, "--workload", WORKLOAD]
    rc = main(
        argv
        + [
            "--param", "cell.t_read=10.0e-9,10.0e-9",
            "--param", "adc.resolution=8,8",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[1].split(",")[:3] == ["layer", "cell.t_read", "adc.resolution"]
    assert len(lines) == 4

    assert main(argv) == 2
    assert "at least one --param" in capsys.readouterr().err

    rc = main(argv + ["--param", "cell.t_read=1e-9,2e-9", "--param", "adc.resolution=8"])
    assert rc == 2
    assert "equal lengths" in capsys.readouterr().err

    assert main(argv + ["--param", "ghost.t_read=1e-9"]) == 2
    assert "unknown node 'ghost'" in capsys.readouterr().err

    assert main(argv + ["--param", "cell.t_read=soon"]) == 2
    assert "not a number" in capsys.readouterr().err


def test_oracle_compare_counts_match(capsys):
    rc = main(
        ["oracle-compare", "--arch", ARCH, "--workload", WORKLOAD, "--mapping", MAPPING]
    )
    assert rc == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[-1] == "verdict: match"
    assert lines[-2].startswith("energy: model=")
    assert all(line.startswith("ok") for line in lines[:-2])


def test_oracle_compare_energy_tolerance(tmp_path, capsys):
    # two sampled 1-bit inputs can never average to the pmf mean of 0.25,
    # so the relative energy gap stays far above 1e-6 for every seed
    out = tmp_path / "cmp.json"
    rc = main(
        [
            "oracle-compare",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--mapping", MAPPING,
            "--energy-tol", "1e-6",
            "--out", str(out),
        ]
    )
    assert rc == 4
    assert "verdict: mismatch" in capsys.readouterr().out
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["verdict"] == "mismatch"
    assert report["energy_relative_gap"] > 1e-6
    assert report["counts_model"] == report["counts_oracle"]

    sure = tmp_path / "sure.yaml"
    sure.write_text(DELTA_TEXT)
    rc = main(
        [
            "oracle-compare",
            "--arch", ARCH,
            "--workload", str(sure),
            "--mapping", MAPPING,
            "--energy-tol", "1e-9",
        ]
    )
    assert rc == 0
    assert "verdict: match" in capsys.readouterr().out


def test_oracle_compare_rejects_padded_mapping(tmp_path, capsys):
    padded = tmp_path / "padded.yaml"
    padded.write_text(PADDED_MAPPING)
    rc = main(
        [
            "oracle-compare",
            "--arch", ARCH,
            "--workload", WORKLOAD,
            "--mapping", str(padded),
        ]
    )
    assert rc == 2
    assert "exact tiling" in capsys.readouterr().err


def test_jobs_env_sets_the_default(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("CIM_MODEL_JOBS", "soon")
    rc = main(["search", "--arch", ARCH, "--workload", WORKLOAD])
    assert rc == 2
    assert "must be an integer" in capsys.readouterr().err

    monkeypatch.setenv("CIM_MODEL_JOBS", "2")
    out = tmp_path / "search.json"
    rc = main(["search", "--arch", ARCH, "--workload", WORKLOAD, "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text(encoding="utf-8"))["layers"]["tiny"]["valid"] == 47


def test_usage_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--arch", ARCH])
    assert exc.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == __version__
