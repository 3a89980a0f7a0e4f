"""End-to-end CLI runs: exit codes, artifacts, determinism."""

import json

import pytest

from mixlab.cli import main


def _write_config(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _run(capsys, experiment, cfg, *extra):
    code = main([experiment, "--config", cfg, *extra])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_passes_and_prints_reports(tmp_path, capsys):
    cfg = _write_config(
        tmp_path,
        "v.json",
        {
            "experiment": "verify",
            "model": {"kind": "block", "params": {"sizes": [2, 2], "bridge": 0.05}},
            "mu": {"kind": "random", "seed": 4},
            "out": str(tmp_path / "out"),
        },
    )
    code, out, _ = _run(capsys, "verify", cfg)
    assert code == 0
    assert "entropy_chain_rule" in out
    assert "[pass]" in out and "FAIL" not in out
    assert (tmp_path / "out" / "reports.jsonl").exists()
    header = json.loads((tmp_path / "out" / "reports.jsonl").read_text().splitlines()[0])
    assert "config_digest" in header["header"]


def test_rerun_is_byte_identical_and_seed_changes_digest(tmp_path, capsys):
    out1, out2, out3 = (str(tmp_path / d) for d in ("a", "b", "c"))
    cfg = _write_config(
        tmp_path,
        "e.json",
        {
            "experiment": "evolve",
            "model": {"kind": "block", "params": {"sizes": [2, 2], "bridge": 0.05}},
            "mu0": {"kind": "component", "index": 0},
            "times": {"stop": 2.0, "num": 17},
        },
    )
    assert _run(capsys, "evolve", cfg, "--out", out1)[0] == 0
    assert _run(capsys, "evolve", cfg, "--out", out2)[0] == 0
    for name in ("reports.jsonl", "trace.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b
    assert _run(capsys, "evolve", cfg, "--out", out3, "--seed", "9")[0] == 0
    head = lambda d: (tmp_path / d / "reports.jsonl").read_text().splitlines()[0]
    assert head("a") == head("b")
    assert json.loads(head("a"))["header"]["config_digest"] != json.loads(head("c"))[
        "header"
    ]["config_digest"]


def test_schema_rejections_exit_64(tmp_path, capsys):
    bad_key = _write_config(
        tmp_path,
        "k.json",
        {"experiment": "verify", "model": "two_point", "mu": {"kind": "stationary"}, "bogus": 1},
    )
    assert _run(capsys, "verify", bad_key)[0] == 64
    missing = str(tmp_path / "absent.json")
    assert main(["verify", "--config", missing]) == 64
    capsys.readouterr()
    notjson = tmp_path / "n.json"
    notjson.write_text("{")
    assert _run(capsys, "verify", str(notjson))[0] == 64
    wrong_exp = _write_config(
        tmp_path,
        "w.json",
        {"experiment": "evolve", "model": "two_point", "mu": {"kind": "stationary"}},
    )
    assert _run(capsys, "verify", wrong_exp)[0] == 64


def test_bad_model_parameters_exit_64(tmp_path, capsys):
    cfg = _write_config(
        tmp_path,
        "bad.json",
        {
            "experiment": "verify",
            "model": {"kind": "gaussian_grid", "params": {"means": [0.0], "weights": [-1.0]}},
            "mu": {"kind": "stationary"},
            "out": str(tmp_path / "out"),
        },
    )
    code, _, err = _run(capsys, "verify", cfg)
    assert code == 64
    assert "error" in err


def test_failing_user_constant_exits_2(tmp_path, capsys):
    cfg = _write_config(
        tmp_path,
        "c.json",
        {
            "experiment": "verify",
            "model": {"kind": "block", "params": {"sizes": [2, 2], "bridge": 0.05}},
            "mu": {"kind": "random", "seed": 1},
            "constants": {"C": {"value": 1e-9, "provenance": "user-supplied"}},
            "out": str(tmp_path / "out"),
        },
    )
    code, out, _ = _run(capsys, "verify", cfg)
    assert code == 2
    assert "FAIL" in out


def test_numeric_precondition_exits_65(tmp_path, capsys):
    cfg = _write_config(
        tmp_path,
        "d.json",
        {
            "experiment": "evolve",
            "model": {"kind": "two_point"},
            "mu0": {"kind": "point", "state": 0},
            "times": [0.0, 4.0, 8.0],
            "dissipation": True,
            "out": str(tmp_path / "out"),
        },
    )
    code, _, err = _run(capsys, "evolve", cfg)
    assert code == 65
    assert "refine the grid" in err


def test_model_indirection_via_file(tmp_path, capsys):
    model_doc = {"kind": "block", "params": {"sizes": [2, 2], "bridge": 0.05}}
    (tmp_path / "model.json").write_text(json.dumps(model_doc))
    cfg = _write_config(
        tmp_path,
        "m.json",
        {
            "experiment": "constants",
            "model": "model.json",
            "out": str(tmp_path / "out"),
        },
    )
    code, out, _ = _run(capsys, "constants", cfg)
    assert code == 0
    assert (tmp_path / "out" / "constants.json").exists()
    doc = json.loads((tmp_path / "out" / "constants.json").read_text())
    assert doc["parent_gap"] > 0


def test_bimodal_benchmark_via_cli(tmp_path, capsys):
    cfg = _write_config(
        tmp_path,
        "b.json",
        {
            "experiment": "bimodal",
            "separation": 2.0,
            "n": 201,
            "out": str(tmp_path / "out"),
        },
    )
    code, out, _ = _run(capsys, "bimodal", cfg)
    assert code == 0
    assert "two_mode_lsi_bound" in out
    values = json.loads((tmp_path / "out" / "values.json").read_text())
    assert values["separation"] == 2.0
    assert values["kl_hull"] <= 2.0 * values["fi"] + 1e-9
