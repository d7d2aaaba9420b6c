import json

import numpy as np
import pytest

from cochist.cli import main, read_release


@pytest.fixture(scope="module")
def tables(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--states", "2", "--counties", "3",
                 "--outliers", "5", "--seed", "1"]) == 0
    return out


def run_privatize(tables, out, *extra):
    return main(["privatize", "--tables", str(tables), "--out", str(out), "--seed", "3",
                 "--k-bound", "12000", "--kinds", "hc", *extra])


def test_synth_writes_tables(tables):
    for name in ("entities.csv", "groups.csv", "hierarchy.csv", "stats.json"):
        assert (tables / name).exists()
    stats = json.loads((tables / "stats.json").read_text())
    assert stats["groups"] > 0


def test_privatize_is_deterministic(tables, tmp_path):
    assert run_privatize(tables, tmp_path / "a") == 0
    assert run_privatize(tables, tmp_path / "b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_check_and_eval(tables, tmp_path, capsys):
    assert run_privatize(tables, tmp_path / "rel", "--write-truth", str(tmp_path / "truth")) == 0
    assert main(["check", str(tmp_path / "rel")]) == 0
    assert "0 violation(s)" in capsys.readouterr().out
    assert main(["eval", str(tmp_path / "truth"), str(tmp_path / "rel"),
                 "--out", str(tmp_path / "e.json")]) == 0
    summary = json.loads((tmp_path / "e.json").read_text())
    assert [lv["level"] for lv in summary["levels"]] == [0, 1, 2]
    assert main(["eval", str(tmp_path / "truth"), str(tmp_path / "truth")]) == 0


def test_check_flags_tampering(tables, tmp_path):
    assert run_privatize(tables, tmp_path / "rel") == 0
    tree, hists, manifest = read_release(tmp_path / "rel")
    leaf = next(e for e in manifest["nodes"] if not e["children"])
    path = tmp_path / "rel" / leaf["file"]
    lines = path.read_text().splitlines()
    lines[2] = str(int(lines[2]) + 1)
    path.write_text("\n".join(lines) + "\n")
    assert main(["check", str(tmp_path / "rel")]) == 1


def test_bench_two_levels(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("k: 2000\nsynth:\n  states: 3\n  counties_per_state: 0\n  outliers: 3\n"
                   "  outlier_max: 500\n  base_counts: [270, 340, 160, 130, 60, 25, 19]\n")
    code = main(["bench", "--config", str(cfg), "--trials", "10", "--epsilon", "1.0",
                 "--kinds", "hc,hc", "--algorithm", "top_down", "--out", str(tmp_path / "o")])
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert len(report["levels"]) == 2
    assert all(len(lv["trials"]) == 10 for lv in report["levels"])
    assert (tmp_path / "o" / "plotdata.csv").exists()


def test_bench_level_epsilons(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("k: 2000\ntrials: 1\nsynth:\n  states: 2\n  counties_per_state: 0\n"
                   "  base_counts: [270, 340, 160, 130, 60, 25, 19]\n  outliers: 0\n")
    assert main(["bench", "--config", str(cfg), "--levels-epsilon", "0.3,0.7"]) == 0


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["bench", "--kinds", "bogus"],
    ["bench", "--epsilon", "-1"],
    ["bench", "--k-bound", "many"],
])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_data_errors(tmp_path):
    assert main(["check", str(tmp_path / "missing")]) == 1
    (tmp_path / "t").mkdir()
    (tmp_path / "t" / "entities.csv").write_text("wrong\n")
    (tmp_path / "t" / "groups.csv").write_text("group_id,region_id\n")
    (tmp_path / "t" / "hierarchy.csv").write_text("region_id,level_0\nr,top\n")
    assert main(["privatize", "--tables", str(tmp_path / "t"), "--out", str(tmp_path / "o")]) == 1
