import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from bn2o.cli import main
from bn2o.files import read_marginals, sha256_file
from bn2o.netgen import tiny_config

TINY = {k: v for k, v in tiny_config(0).to_dict().items() if k != "seed"}


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def tiny_net(tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    out = tmp_path / "net.json"
    assert run("gen-net", "--config", cfg, "--seed", 7, "--out", out) == 0
    return out


def test_gen_net_deterministic(tmp_path, tiny_net):
    again = tmp_path / "again.json"
    assert run("gen-net", "--config", tmp_path / "tiny.json", "--seed", 7, "--out", again) == 0
    assert tiny_net.read_bytes() == again.read_bytes()
    manifest = json.loads((tmp_path / "net.json.manifest.json").read_text())
    assert manifest["subcommand"] == "gen-net"
    assert manifest["seed"] == 7
    assert manifest["inputs"][str(tmp_path / "tiny.json")] == sha256_file(tmp_path / "tiny.json")
    for key in ("config", "version", "duration_s"):
        assert key in manifest


def test_gen_net_prints_stats(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(TINY))
    run("gen-net", "--config", cfg, "--seed", 1, "--out", tmp_path / "n.json")
    doc = json.loads(capsys.readouterr().out)
    assert doc["parentless_findings"] == 0


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run("gen-net", "--bogus")
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_seed_is_mandatory(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("gen-net", "--out", tmp_path / "x.json")
    assert exc.value.code == 2


def test_missing_model_is_usage_error(tmp_path, tiny_net):
    bench = tmp_path / "b.jsonl"
    run("gen-bench", "--net", tiny_net, "--p-plus", 0.5, "--p-minus", 1, "--cases", 3, "--seed", 1, "--out", bench)
    assert run("infer", "--method", "recog", "--net", tiny_net, "--cases", bench, "--out", tmp_path / "m") == 2


def test_data_error_exits_1(tmp_path, tiny_net):
    bench = tmp_path / "b.jsonl"
    assert run("gen-bench", "--net", tiny_net, "--p-plus", 0.5, "--p-minus", 0, "--cases", 3, "--seed", 1,
               "--out", bench) == 1
    assert run("stats", "--net", tmp_path / "missing.json") == 1


def test_entry_point_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bn2o", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "gen-bench" in proc.stdout


def test_small_pipeline_end_to_end(tmp_path, tiny_net):
    bench = tmp_path / "bench.jsonl"
    assert run("gen-bench", "--net", tiny_net, "--p-plus", 0.5, "--p-minus", 1.0, "--cases", 40,
               "--diseases", 2, "--seed", 3, "--out", bench) == 0
    lines = bench.read_text().splitlines()
    assert len(lines) == 40
    assert set(json.loads(lines[0])) == {"id", "d", "pos", "neg", "p_plus", "p_minus"}

    model = tmp_path / "lr.json"
    assert run("train", "--net", tiny_net, "--kind", "lr", "--samples", 20_000, "--seed", 2, "--out", model) == 0
    mlp = tmp_path / "mlp.json"
    assert run("train", "--net", tiny_net, "--kind", "mlp", "--init-from", model, "--hidden", 5,
               "--samples", 5000, "--seed", 2, "--out", mlp) == 0
    assert json.loads(mlp.read_text())["frozen_W"] is True

    outs = {}
    for method, extra in [("jj99", []), ("aisbn", ["--phase1", 2500, "--phase2", 5000, "--seed", 4]),
                          ("recog", ["--model", model]), ("prior", [])]:
        outs[method] = tmp_path / f"{method}.jsonl"
        assert run("infer", "--method", method, "--net", tiny_net, "--cases", bench, *extra,
                   "--out", outs[method]) == 0
    label, table = read_marginals(outs["jj99"])
    assert label == "jj99" and len(table) == 40
    first = json.loads(outs["jj99"].read_text().splitlines()[0])
    assert {"bound", "iterations"} <= set(first)

    outs["exact"] = tmp_path / "exact.jsonl"
    assert run("oracle", "--net", tiny_net, "--case-file", bench, "--mode", "enum", "--out", outs["exact"]) == 0
    qs = tmp_path / "qs.jsonl"
    assert run("oracle", "--net", tiny_net, "--case-file", bench, "--mode", "quickscore", "--out", qs) == 0

    curves = tmp_path / "curves.csv"
    per_case = tmp_path / "cases.jsonl"
    assert run("eval", "--net", tiny_net, "--cases", bench, "--marginals", *outs.values(), "--n", 20,
               "--per-case", per_case, "--out", curves) == 0
    rows = list(csv.DictReader(curves.open()))
    by_method = {}
    for r in rows:
        by_method.setdefault(r["method"], []).append(float(r["mean_cumulative_ratio"]))
    assert set(by_method) == {"jj99", "aisbn", "recog", "prior", "exact_enum"}
    assert all(np.all(np.diff(c) >= -1e-15) for c in by_method.values())
    assert np.all(np.array(by_method["exact_enum"]) >= np.array(by_method["prior"]))
    rec = json.loads(per_case.read_text().splitlines()[0])
    assert {"log_Z", "reference_score", "top1_score"} <= set(rec)
    assert (tmp_path / "curves.csv.manifest.json").exists()


def test_generating_commands_deterministic_with_threads(tmp_path, tiny_net, monkeypatch):
    def outputs(tag):
        bench = tmp_path / f"b{tag}.jsonl"
        run("gen-bench", "--net", tiny_net, "--p-plus", 0.5, "--p-minus", 0.5, "--cases", 20, "--seed", 5,
            "--out", bench)
        ais = tmp_path / f"a{tag}.jsonl"
        run("infer", "--method", "aisbn", "--net", tiny_net, "--cases", bench, "--phase1", 2500,
            "--phase2", 2500, "--seed", 6, "--out", ais)
        model = tmp_path / f"m{tag}.json"
        run("train", "--net", tiny_net, "--samples", 3000, "--seed", 8, "--out", model)
        return [p.read_bytes() for p in (bench, ais, model)]

    serial = outputs("s")
    monkeypatch.setenv("BN2O_THREADS", "4")
    assert outputs("p") == serial


def test_reproduce_full_scale_needs_confirmation(tmp_path, capsys):
    assert run("reproduce-grid", "--scale", "paper", "--seed", 1, "--out-dir", tmp_path) == 0
    echo = json.loads(capsys.readouterr().out)
    assert echo["cases"] == 1000
    assert echo["training_samples"] == 10_000_000
    assert not list(tmp_path.iterdir())
