"""End-to-end driver checks: config validation, exit codes, artifacts."""

import json
import subprocess
import sys

import pytest

from fiberlab.cli import load_config, main
from fiberlab.errors import ConfigInvalid

BASE = """
[estimator]
kind = "ideal_source"
seed = 7

[run]
ladder = [4, 8, 16, 32]
samples = 3

[fibering]
kind = "identity"
"""

CROSSING = """
[estimator]
kind = "ideal_source"
seed = 11

[run]
ladder = [8, 16, 24, 32]
samples = 3

[fibering]
kind = "crossing"
c = "1/2"
c2 = "1/2"
"""


def _cfg(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# ------------------------------------------------------------ validation


def test_load_config_defaults(tmp_path):
    cfg = load_config(_cfg(tmp_path, BASE))
    assert cfg.ladder == (4, 8, 16, 32)
    assert cfg.seed == 7
    assert cfg.estimator().kind == "ideal_source"


def test_bad_toml_is_exit_one(tmp_path, capsys):
    path = _cfg(tmp_path, "[run\nladder = oops")
    assert main(["schematic", "--config", path]) == 1
    assert "config error" in capsys.readouterr().err


def test_unknown_estimator_names_field(tmp_path):
    with pytest.raises(ConfigInvalid) as err:
        load_config(_cfg(tmp_path, '[estimator]\nkind = "psychic"\nseed = 1\n'))
    assert "estimator.kind" in str(err.value)


def test_ideal_estimator_requires_seed(tmp_path):
    with pytest.raises(ConfigInvalid) as err:
        load_config(_cfg(tmp_path, '[estimator]\nkind = "ideal_source"\n'))
    assert "estimator.seed" in str(err.value)


@pytest.mark.parametrize(
    "ladder", ["[8, 4]", "[4, 4, 8, 16]", "[]", "[4, 8, 16, 64]", '["a"]']
)
def test_bad_ladders_name_the_field(tmp_path, ladder):
    text = BASE.replace("ladder = [4, 8, 16, 32]", f"ladder = {ladder}")
    with pytest.raises(ConfigInvalid) as err:
        load_config(_cfg(tmp_path, text))
    assert "run.ladder" in str(err.value)


def test_unknown_fibering_kind_is_exit_one(tmp_path, capsys):
    text = BASE.replace('kind = "identity"', 'kind = "moebius"')
    assert main(["compose", "--config", _cfg(tmp_path, text)]) == 1
    assert "fibering.kind" in capsys.readouterr().err


def test_family_subcommand_rejects_parametric_model(tmp_path, capsys):
    assert main(["gamma", "--config", _cfg(tmp_path, BASE)]) == 1
    assert "fibering.kind" in capsys.readouterr().err


# ----------------------------------------------------------- happy paths


def test_compose_writes_artifacts(tmp_path, monkeypatch):
    monkeypatch.delenv("FIBERLAB_OUT", raising=False)
    out = tmp_path / "out"
    code = main(["compose", "--config", _cfg(tmp_path, BASE), "--out", str(out)])
    assert code == 0
    assert (out / "compose.csv").exists()
    summary = json.loads((out / "compose_summary.json").read_text())
    assert all(c["pass"] for c in summary["claims"])
    manifest = json.loads((out / "manifest_compose.json").read_text())
    assert manifest["error"] is None
    assert manifest["seed"] == 7
    assert "compose.csv" in manifest["files"]
    assert len(manifest["config_sha256"]) == 64


def test_invert_claims_pass(tmp_path, monkeypatch):
    monkeypatch.delenv("FIBERLAB_OUT", raising=False)
    out = tmp_path / "out"
    text = BASE + '\n[invert]\nr = 8\nstrategy = "enumerate"\n'
    assert main(["invert", "--config", _cfg(tmp_path, text), "--out", str(out)]) == 0
    summary = json.loads((out / "invert_summary.json").read_text())
    assert all(c["pass"] for c in summary["claims"])


def test_env_var_overrides_out_flag(tmp_path, monkeypatch):
    env_dir = tmp_path / "env_out"
    monkeypatch.setenv("FIBERLAB_OUT", str(env_dir))
    flag_dir = tmp_path / "flag_out"
    text = BASE + "\n[schematic]\nn = 3\nc = 2.0\n"
    assert main(["schematic", "--config", _cfg(tmp_path, text),
                 "--out", str(flag_dir)]) == 0
    assert (env_dir / "schematic.csv").exists()
    assert not flag_dir.exists()


def test_schematic_floats_are_fixed_precision(tmp_path, monkeypatch):
    monkeypatch.delenv("FIBERLAB_OUT", raising=False)
    out = tmp_path / "out"
    text = BASE + "\n[schematic]\nn = 3\nc = 2.0\nr_min = 1\nr_max = 50\n"
    assert main(["schematic", "--config", _cfg(tmp_path, text), "--out", str(out)]) == 0
    lines = (out / "schematic.csv").read_text().splitlines()
    assert lines[0] == "r,benchmark,l_reg,l_adapt_mild,l_adapt_substantial"
    assert len(lines) == 51
    assert lines[-1].startswith("50,150.000000000000,161.344850683943,")
    for line in lines[1:]:
        cells = line.split(",")
        assert all("." in c and len(c.split(".")[1]) == 12 for c in cells[1:])


def test_gamma_runs_on_crossing(tmp_path, monkeypatch):
    monkeypatch.delenv("FIBERLAB_OUT", raising=False)
    out = tmp_path / "out"
    assert main(["gamma", "--config", _cfg(tmp_path, CROSSING), "--out", str(out)]) == 0
    summary = json.loads((out / "gamma_summary.json").read_text())
    assert all(c["pass"] for c in summary["claims"])
    assert 0.9 <= summary["gamma_slope"] <= 1.1


def test_full_chain_ends_in_report(tmp_path, monkeypatch):
    monkeypatch.delenv("FIBERLAB_OUT", raising=False)
    out = tmp_path / "out"
    cfg = _cfg(tmp_path, BASE + "\n[schematic]\nn = 3\nc = 2.0\n")
    assert main(["schematic", "--config", cfg, "--out", str(out)]) == 0
    assert main(["split-check", "--config", cfg, "--out", str(out)]) == 0
    assert main(["report", "--config", cfg, "--out", str(out)]) == 0
    text = (out / "report.md").read_text()
    assert "## schematic" in text and "## split_check" in text
    assert "FAIL" not in text


# ------------------------------------------------------------ exit two


def test_report_without_artifacts_is_exit_two(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("FIBERLAB_OUT", raising=False)
    out = tmp_path / "empty"
    assert main(["report", "--config", _cfg(tmp_path, BASE), "--out", str(out)]) == 2
    assert "MissingArtifacts" in capsys.readouterr().err
    manifest = json.loads((out / "manifest_report.json").read_text())
    assert manifest["error"].startswith("MissingArtifacts")


# -------------------------------------------------------- reproducibility


def test_reruns_are_byte_identical(tmp_path, monkeypatch):
    monkeypatch.delenv("FIBERLAB_OUT", raising=False)
    cfg = _cfg(tmp_path, CROSSING)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["gamma", "--config", cfg, "--out", str(out)]) == 0
        outs.append((out / "gamma.csv").read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    text = BASE + "\n[schematic]\nn = 2\nc = 1.0\nr_max = 5\n"
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "fiberlab", "schematic",
         "--config", _cfg(tmp_path, text), "--out", str(out)],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin"},
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "schematic_summary.json").exists()
