import json
from pathlib import Path

import pytest

from hopflab import cli
from hopflab import config as cfgm

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_validate_bundled_configs():
    for path in sorted(CONFIGS.glob("*.toml")):
        assert run("validate", path) == 0, path


@pytest.mark.parametrize("text,needle", [
    ("task = 'nope'", "unknown task"),
    ("[operator]\npreset = 'laplacian'\ndim = 7", "operator.dim"),
    ("[grid]\nh = -1.0", "grid.h"),
    ("[mc]\nn_paths = 'many'", "mc.n_paths"),
    ("[domain]\nvariant = 'ball'\ncenter = [0.0]\nradius = 0.0", "empty"),
    ("[bogus]\nx = 1", "unknown section"),
    ("task = ", "malformed TOML"),
])
def test_bad_configs_exit_2_without_artifacts(tmp_path, capsys, text, needle):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    out = tmp_path / "out"
    assert run("run", cfg, "--output", out) == 2
    assert needle in capsys.readouterr().err
    assert not out.exists()


def test_run_eigen_writes_artifacts(tmp_path):
    out = tmp_path / "eig"
    assert run("run", CONFIGS / "eigen_1d.toml", "grid.h=0.02", "--output", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == "1.0" and summary["passed"]
    assert abs(summary["outcomes"][0]["values"]["lambda"] - 1.2337) < 0.01
    assert (out / "data" / "eigenfunction.csv").read_text().startswith("x,phi\n")
    svg = out / "figures" / "eigenfunction.svg"
    assert svg.exists()
    svg.unlink()
    assert run("run", CONFIGS / "eigen_1d.toml", "task=report", "--output", out) == 0
    assert svg.exists()


def test_output_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("HOPFLAB_OUTPUT", str(tmp_path))
    assert run("run", CONFIGS / "weak_max_2d.toml", "verify.seeds=[0,4]", "--no-plots") == 0
    lines = (tmp_path / "weak-max-2d" / "report.jsonl").read_text().splitlines()
    assert len(lines) == 5 and all(json.loads(l)["verdict"] == "PASS" for l in lines)


def test_failure_exit_code(tmp_path):
    # the two-point jump in 2D has no admissible barrier constants under the cap
    assert run("run", CONFIGS / "weak_max_2d.toml", "task=barrier", "--output", tmp_path / "b") == 1


def test_suite_presets(tmp_path, capsys):
    assert run("suite", "nope") == 2
    assert run("list-presets") == 0
    assert "paper-core" in capsys.readouterr().out
    assert run("suite", "smoke", "--output", tmp_path / "s", "--no-plots") == 0


def test_unknown_subcommand_is_config_error():
    assert run("frobnicate") == 2


def test_describe_lists_every_section():
    text = cfgm.describe()
    for section in cfgm.SCHEMA:
        if section:
            assert f"[{section}]" in text
