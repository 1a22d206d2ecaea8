import json

import pytest

from distqec.cli import main


def test_floor_subcommand(capsys):
    assert main(["floor", "--pdropout", "1e-4", "--rounds", "32"]) == 0
    out = capsys.readouterr().out
    assert out.strip() == "3.195045e-03"


def test_build_code_and_lattice_export(tmp_path, capsys):
    assert main(["build-code", "--code", "toric", "--d", "4"]) == 0
    assert "[[32,2,4]]" in capsys.readouterr().out
    lat = str(tmp_path / "h22.json")
    assert main(["build-code", "--code", "honeycomb", "--a", "2", "--b", "2",
                 "--out", lat]) == 0
    doc = json.load(open(lat))
    assert doc["vertices"] == 8 and len(doc["edges"]) == 12


def test_partition_subcommand(tmp_path):
    out = str(tmp_path / "part.json")
    assert main(["partition", "--code", "toric", "--d", "6", "--nq", "48",
                 "--seed", "11", "--out", out]) == 0
    doc = json.load(open(out))
    assert len(doc["clusters"]) == 4
    assert doc["qpi"] == 7
    assert len(doc["cluster_of"]) == 144


def test_compile_sample_decode_pipeline(tmp_path, capsys):
    cir = str(tmp_path / "mem.cir")
    meta = str(tmp_path / "mem.json")
    assert main(["compile", "--code", "toric", "--d", "2", "--nq", "8",
                 "--p", "2e-3", "--pdropout", "1e-4", "--rounds", "4",
                 "--out", cir, "--meta", meta]) == 0
    side = json.load(open(meta))
    assert side["k"] == 2 and side["dropout_channels"] > 0
    binf = str(tmp_path / "out.bin")
    assert main(["sample", "--circuit", cir, "--shots", "2000",
                 "--seed", "3", "--out", binf]) == 0
    capsys.readouterr()
    assert main(["decode", "--circuit", cir, "--outcomes", binf]) == 0
    out = capsys.readouterr().out
    assert "shots=2000" in out and "P_L=" in out


def test_run_subcommand(tmp_path, capsys):
    cfg = {"code": "toric", "d": 2, "mode": "monolithic",
           "p_grid": [5e-3], "max_shots": 1000, "target_errors": 20,
           "batch": 500, "seed": 2}
    cfg_path = str(tmp_path / "cfg.json")
    json.dump(cfg, open(cfg_path, "w"))
    csv_path = str(tmp_path / "rows.csv")
    svg_path = str(tmp_path / "rows.svg")
    assert main(["run", "--config", cfg_path, "--csv", csv_path,
                 "--svg", svg_path]) == 0
    lines = open(csv_path).read().splitlines()
    assert lines[0].startswith("mode,code,")
    assert len(lines) == 2
    assert open(svg_path).read().startswith("<svg")
