"""CLI behavior: exit codes, artifacts, determinism."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from sthl.cli import run

FIXTURES = Path(__file__).parent.parent / "fixtures"
LIVINGROOM = str(FIXTURES / "livingroom.sthl")
CONTRADICTION = str(FIXTURES / "contradiction.sthl")
BEDROOM = str(FIXTURES / "bedroom.sthl")


def test_parse_fixture_exits_zero(capsys):
    assert run(["parse", LIVINGROOM]) == 0


def test_parse_json_ast(capsys):
    assert run(["parse", LIVINGROOM, "--json-ast"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc[0]["stmt"] == "declare"


def test_parse_error_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.sthl"
    bad.write_text("assert missing > 1;")
    assert run(["parse", str(bad)]) == 1
    assert "missing" in capsys.readouterr().err


def test_missing_file_exits_one(capsys):
    assert run(["parse", "no_such_file.sthl"]) == 1


def test_fmt_prints_canonical_text(capsys):
    assert run(["fmt", LIVINGROOM]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "region room;"


def test_check_reports_counts(capsys):
    assert run(["check", BEDROOM]) == 0
    err = capsys.readouterr().err
    assert "3 objects" in err and "hidden" in err


def test_solve_writes_output_and_report(tmp_path, capsys):
    out = tmp_path / "solve.json"
    report = tmp_path / "report.txt"
    code = run(
        ["solve", BEDROOM, "--seed", "5", "--out", str(out), "--report", str(report)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["bestRatio"] == 1.0
    assert "# constraints" in report.read_text()


def test_solve_contradiction_is_not_an_error(tmp_path, capsys):
    out = tmp_path / "solve.json"
    assert run(["solve", CONTRADICTION, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["terminated"] == "iterationLimit"
    assert doc["report"]["bestRatio"] < 1.0


def test_invalid_k_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["solve", BEDROOM, "--k", "0", "--out", str(tmp_path / "s.json")])
    assert exc.value.code == 2


def test_unknown_subcommand_usage_error():
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2


def test_assets_decisions_stdout(capsys):
    assert run(["assets", BEDROOM, "--tau", "0.652"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l]
    assert len(lines) == 3
    for line in lines:
        fields = line.split("\t")
        assert fields[2] in ("retrieved", "generated")


def test_assets_tau_extremes(tmp_path, capsys):
    db = tmp_path / "index.tsv"
    db.write_text(
        "a1\tmodels/a1.glb\tthumbs/a1.png\ta simple wooden bed\n"
        "a2\tmodels/a2.glb\tthumbs/a2.png\tan oak nightstand\n"
    )
    assert run(["assets", BEDROOM, "--db", str(db), "--tau", "0.0"]) == 0
    low = capsys.readouterr().out
    assert all(l.split("\t")[2] == "retrieved" for l in low.splitlines() if l)
    assert run(["assets", BEDROOM, "--db", str(db), "--tau", "1.0"]) == 0
    high = capsys.readouterr().out
    assert all(l.split("\t")[2] == "generated" for l in high.splitlines() if l)


def test_export_from_solve_output(tmp_path, capsys):
    out = tmp_path / "solve.json"
    assert run(["solve", BEDROOM, "--seed", "2", "--out", str(out)]) == 0
    pkg_dir = tmp_path / "pkg"
    assert run(["export", str(out), "--out", str(pkg_dir)]) == 0
    assert (pkg_dir / "scene.json").exists()
    assert (pkg_dir / "metadata.sthl").exists()


def test_eval_reports_resemblance(capsys):
    assert run(["eval", "--gen", BEDROOM, "--gt", BEDROOM, "--tau", "0.7"]) == 0
    err = capsys.readouterr().err
    assert "overall: precision=1.0000" in err


def test_pipeline_end_to_end(tmp_path, capsys):
    out = tmp_path / "pkg"
    assert run(["pipeline", LIVINGROOM, "--seed", "9", "--out", str(out)]) == 0
    for name in ("scene.json", "manifest.tsv", "metadata.sthl", "report.txt"):
        assert (out / name).exists()


def test_pipeline_keep_intermediates(tmp_path):
    out = tmp_path / "pkg"
    assert run(
        ["pipeline", LIVINGROOM, "--seed", "9", "--out", str(out), "--keep-intermediates"]
    ) == 0
    assert (out / "constraints.txt").exists()
    assert (out / "decisions.tsv").exists()
    assert (out / "solve.json").exists()
    assert (out / "layout_iter0.json").exists()


def test_pipeline_deterministic_bytes(tmp_path):
    one = tmp_path / "one"
    two = tmp_path / "two"
    assert run(["pipeline", LIVINGROOM, "--seed", "4", "--out", str(one)]) == 0
    assert run(["pipeline", LIVINGROOM, "--seed", "4", "--out", str(two)]) == 0
    assert (one / "scene.json").read_bytes() == (two / "scene.json").read_bytes()
    assert (one / "report.txt").read_bytes() == (two / "report.txt").read_bytes()


def test_pipeline_from_text_refused(capsys):
    assert run(["pipeline", "--from-text", "a cozy cabin"]) == 2
    assert "language model" in capsys.readouterr().err


def test_seed_env_fallback(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STHL_SEED", "31")
    import importlib

    import sthl.cli as cli_module

    importlib.reload(cli_module)
    out = tmp_path / "pkg"
    assert cli_module.run(["pipeline", LIVINGROOM, "--out", str(out)]) == 0
    doc = json.loads((out / "scene.json").read_text())
    assert doc["solver"]["seed"] == 31
    monkeypatch.delenv("STHL_SEED")
    importlib.reload(cli_module)


def test_pipeline_with_database(tmp_path):
    db = tmp_path / "index.tsv"
    db.write_text(
        "a1\tmodels/bed.glb\tthumbs/bed.png\ta simple wooden bed\n"
        "a2\tmodels/stand.glb\tthumbs/stand.png\tan oak nightstand\n"
        "a3\tmodels/lamp.glb\tthumbs/lamp.png\ta brass reading lamp\n"
    )
    out = tmp_path / "pkg"
    assert run(
        ["pipeline", BEDROOM, "--seed", "3", "--out", str(out),
         "--db", str(db), "--tau", "0.0"]
    ) == 0
    manifest = (out / "manifest.tsv").read_text()
    assert "retrieved" in manifest
    assert "models/" in manifest


def test_read_package_bad_region_is_format_error(tmp_path):
    out = tmp_path / "pkg"
    assert run(["pipeline", BEDROOM, "--seed", "3", "--out", str(out)]) == 0
    import json as json_mod

    from sthl.errors import FormatError
    from sthl.export import read_package

    scene_path = out / "scene.json"
    doc = json_mod.loads(scene_path.read_text())
    doc["regions"][0]["vertices"] = [[0, 0], [1, 0]]
    scene_path.write_text(json_mod.dumps(doc, indent=2, sort_keys=True))
    with pytest.raises(FormatError, match="region"):
        read_package(out)
