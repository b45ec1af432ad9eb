"""Config parsing, runner, verify, CLI, and bit-reproducibility."""

import json
from pathlib import Path

import numpy as np
import pytest

from giantstep.cli import main as cli_main
from giantstep.experiments.config import (ConfigError, build_target, load_config,
                                          parse_config, resolve_count)
from giantstep.experiments.runner import run_config, run_path, verify_manifest

SMALL_SINGLE_STEP = """
[experiment]
kind = "single-step"
output_dir = "{out}"
seeds = [0, 1]

[target]
kind = "polynomial"
expression = "z1 + z2"

[train]
d = 16
p = 8
n = "16*d"
T = 1
student = "He1"

[options]
acceptance = ["single-step-leap1"]
"""


def write_config(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(text.format(out=tmp_path / "out"))
    return path


def test_resolve_count():
    assert resolve_count(128, 64, "x") == 128
    assert resolve_count("4*d", 64, "x") == 256
    assert resolve_count("16*d^2", 8, "x") == 1024
    assert resolve_count("0.5*d", 64, "x") == 32
    with pytest.raises(ConfigError):
        resolve_count("d*d", 64, "x")


def test_parse_config_round_trip(tmp_path):
    cfg = load_config(write_config(tmp_path, SMALL_SINGLE_STEP))
    assert cfg.kind == "single-step"
    assert cfg.seeds == [0, 1]
    target = build_target(cfg.target, 16)
    assert target.num_index == 2


@pytest.mark.parametrize("mutation,field", [
    ('kind = "single-step"', "seeds"),          # drop seeds entirely
    ("seeds = []", "seeds"),
    ('kind = "unknown-kind"', "experiment.kind"),
    ('expression = "z1 + z2"', "target"),        # drop expression
])
def test_invalid_configs_are_diagnosed(tmp_path, mutation, field):
    if mutation.startswith("seeds = []"):
        text = SMALL_SINGLE_STEP.replace("seeds = [0, 1]", "seeds = []")
    elif "unknown-kind" in mutation:
        text = SMALL_SINGLE_STEP.replace('kind = "single-step"', 'kind = "unknown-kind"')
    elif mutation.startswith("expression"):
        text = SMALL_SINGLE_STEP.replace('expression = "z1 + z2"', "")
    else:
        text = SMALL_SINGLE_STEP.replace("seeds = [0, 1]", "")
    with pytest.raises(ConfigError):
        parse_config(text.format(out=tmp_path / "out"))


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[experiment]\nkind = 'nope'\n")
    assert cli_main(["run", str(bad)]) == 2
    assert cli_main(["verify", str(tmp_path / "missing.json")]) == 2
    assert cli_main(["staircase", "--target", "z1 + z2*z3"]) == 0
    assert cli_main(["staircase", "--target", "import os"]) == 2


def test_run_verify_and_tamper(tmp_path, capsys):
    manifest = run_path(write_config(tmp_path, SMALL_SINGLE_STEP))
    code, lines = verify_manifest(manifest)
    assert code == 0 and any("PASS" in line for line in lines)
    # tamper with a cosine column: the attached criterion must now fail
    csv_path = manifest.parent / "alignment_gradient.csv"
    rows = csv_path.read_text().splitlines()
    header = rows[0].split(",")
    col = header.index("cos_1")
    broken = [rows[0]]
    for row in rows[1:]:
        parts = row.split(",")
        parts[col] = "0.0"
        parts[header.index("cos_2")] = "1.0"
        broken.append(",".join(parts))
    csv_path.write_text("\n".join(broken) + "\n")
    code2, lines2 = verify_manifest(manifest)
    assert code2 == 1 and any("FAIL" in line for line in lines2)


def test_verify_reports_missing_files(tmp_path):
    manifest = run_path(write_config(tmp_path, SMALL_SINGLE_STEP))
    (manifest.parent / "alignment_gradient.csv").unlink()
    code, lines = verify_manifest(manifest)
    assert code == 2 and "missing" in lines[0]


def test_verify_no_criteria_notice(tmp_path):
    text = SMALL_SINGLE_STEP.replace('acceptance = ["single-step-leap1"]', "")
    manifest = run_path(write_config(tmp_path, text))
    code, lines = verify_manifest(manifest)
    assert code == 0 and "no criteria" in lines[0]


def test_bit_reproducible_reruns(tmp_path):
    cfg_path = write_config(tmp_path, SMALL_SINGLE_STEP)
    manifest1 = run_path(cfg_path)
    first = {f.name: f.read_bytes() for f in manifest1.parent.glob("*.csv")}
    manifest2 = run_path(cfg_path)
    second = {f.name: f.read_bytes() for f in manifest2.parent.glob("*.csv")}
    assert first and first == second


def test_manifest_echo_suffices_to_rerun(tmp_path):
    manifest = run_path(write_config(tmp_path, SMALL_SINGLE_STEP))
    with open(manifest) as fh:
        payload = json.load(fh)
    first = (manifest.parent / "alignment_gradient.csv").read_bytes()
    echo_path = tmp_path / "echo.toml"
    echo_dir = tmp_path / "echo-out"
    echo_path.write_text(payload["config_echo"].replace(str(tmp_path / "out"), str(echo_dir)))
    manifest2 = run_path(echo_path)
    assert (manifest2.parent / "alignment_gradient.csv").read_bytes() == first


def test_staircase_cli_json(tmp_path, capsys):
    assert cli_main(["staircase", "--target", "z1 + z1*z2", "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dims"][:3] == [0, 1, 2]
    assert payload["learnable"] is True


def test_multi_step_kind_smoke(tmp_path):
    text = """
[experiment]
kind = "multi-step"
output_dir = "{out}"
seeds = [0]

[target]
kind = "polynomial"
expression = "z1 + z1*z2"

[train]
d = 32
p = 16
n = "4*d"
T = 2
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 1.0
ridge_lambda = 1.0

[options]
n_test = 2000
"""
    manifest = run_path(write_config(tmp_path, text))
    with open(manifest) as fh:
        payload = json.load(fh)
    err_csv = manifest.parent / payload["files"]["errors"]
    rows = err_csv.read_text().splitlines()
    assert rows[0] == "seed,step,test_mse,test_mse_normalized"
    assert len(rows) == 3  # header + one row per step


def test_generalization_kind_smoke(tmp_path):
    text = """
[experiment]
kind = "generalization-sweep"
output_dir = "{out}"
seeds = [0]

[target]
kind = "polynomial"
expression = "z1"

[train]
d = 24
p = 16
n = "4*d"
T = 1
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 1.0
ridge_lambda = 0.1

[options]
methods = ["gd1", "rf", "kernel1"]
n_test = 2000
"""
    manifest = run_path(write_config(tmp_path, text))
    with open(manifest) as fh:
        payload = json.load(fh)
    rows = (manifest.parent / payload["files"]["generalization"]).read_text().splitlines()
    assert len(rows) == 4  # header + 3 methods
    methods = {row.split(",")[4] for row in rows[1:]}
    assert methods == {"gd1", "rf", "kernel1"}
