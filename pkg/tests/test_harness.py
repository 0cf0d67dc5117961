"""Experiment harness and CLI: configs, manifests, reproducibility."""

import json
from pathlib import Path

import pytest

from glasslab.cli import main, read_config_file
from glasslab.harness import ExperimentConfig, run_experiment
from glasslab.seeds import derive_seed


def make_config(**overrides):
    base = dict(command="exact", model="field", ns=(8,), beta=1.0, plots=False,
                out="unused")
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError, match="c\\+c'"):
        make_config(c=0.6, cprime=0.5).validate()
    with pytest.raises(ValueError, match="nonempty"):
        make_config(ns=()).validate()
    with pytest.raises(ValueError, match="increasing"):
        make_config(ns=(8, 8)).validate()
    with pytest.raises(ValueError, match="lambda0"):
        make_config(lambda0=0.9).validate()
    with pytest.raises(ValueError, match="ladder"):
        make_config(betas=(1.0, 0.5)).validate()
    with pytest.raises(ValueError, match="mode"):
        make_config(mode="guess").validate()
    make_config().validate()  # baseline is valid


def test_mode_selection():
    config = make_config(mode="auto", enumeration_limit=12)
    assert config.use_exact(10)
    assert not config.use_exact(14)
    assert make_config(mode="exact").use_exact(30)
    assert not make_config(mode="mc").use_exact(4)


def test_run_writes_manifest_with_hashes(tmp_path):
    config = make_config(out=str(tmp_path))
    manifest = run_experiment(config)
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["rng_id"] == "splitmix64-boxmuller-v1"
    assert data["seed_fn_id"] == "splitmix64-v1"
    assert data["per_sample_seeds"] == [derive_seed(0, 0)]
    assert data["all_passed"] is True
    assert data["created_at"]
    import hashlib

    for rel, digest in data["file_hashes"].items():
        payload = (tmp_path / rel).read_bytes()
        assert hashlib.sha256(payload).hexdigest() == digest
    assert manifest.config["command"] == "exact"


def test_rerun_is_byte_identical(tmp_path):
    config = dict(command="concentration", model="sk", ns=(8,), beta=1.0,
                  samples=3, seed=11, plots=False)
    a = run_experiment(ExperimentConfig(out=str(tmp_path / "a"), **config))
    b = run_experiment(ExperimentConfig(out=str(tmp_path / "b"), **config))
    assert a.file_hashes == b.file_hashes
    for rel in a.file_hashes:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_figures_rendered_alongside_csv(tmp_path):
    run_experiment(make_config(out=str(tmp_path), plots=True, model="sk"))
    assert (tmp_path / "histogram-8.csv").exists()
    assert (tmp_path / "histogram-8.png").exists()


def test_no_plots_skips_figures(tmp_path):
    run_experiment(make_config(out=str(tmp_path), plots=False, model="sk"))
    assert (tmp_path / "histogram-8.csv").exists()
    assert not list(tmp_path.glob("*.png"))


def test_unknown_command_rejected():
    with pytest.raises(ValueError, match="unknown command"):
        run_experiment(make_config(command="bogus"))


def test_sweep_names_files_by_metric(tmp_path):
    config = ExperimentConfig(command="sweep", model="sk", ns=(6, 8),
                              beta=1.0, samples=4, seed=2, plots=False,
                              out=str(tmp_path))
    manifest = run_experiment(config)
    names = set(manifest.file_hashes)
    assert {"epsilon-trend.csv", "free-energy-trend.csv", "l1-trend.csv",
            "gg-trend.csv", "trends.json"} <= names
    trends = json.loads((tmp_path / "trends.json").read_text())
    assert "epsilon_kendall_tau" in trends
    assert -1.0 <= trends["epsilon_kendall_tau"] <= 1.0


def test_cli_exact_exit_code(tmp_path):
    code = main(["exact", "--model", "field", "--n", "8", "--beta", "0.5",
                 "--no-plots", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "exact-8.json").exists()


def test_cli_invalid_config_exit_code(tmp_path):
    code = main(["concentration", "--n", "8", "--c", "0.9", "--cprime", "0.5",
                 "--no-plots", "--out", str(tmp_path)])
    assert code == 2


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model=field\nbeta=0.75\nsamples=2\n# a comment\nseed=5\n")
    out = tmp_path / "out"
    code = main(["concentration", "--n", "12", "--config", str(cfg),
                 "--no-plots", "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["beta"] == 0.75
    assert manifest["config"]["samples"] == 2
    assert manifest["config"]["seed"] == 5


def test_cli_flag_overrides_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("beta=0.75\nmodel=field\n")
    out = tmp_path / "out"
    main(["exact", "--n", "6", "--beta", "1.25", "--config", str(cfg),
          "--no-plots", "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["beta"] == 1.25


def test_config_file_parser_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("this is not a key value line\n")
    with pytest.raises(ValueError, match="key=value"):
        read_config_file(str(bad))


def test_cli_unknown_config_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("not_a_real_option=3\n")
    code = main(["exact", "--n", "4", "--config", str(cfg),
                 "--no-plots", "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_beta_ladder_parsing(tmp_path):
    out = tmp_path / "s"
    code = main(["sample", "--n", "6", "--betas", "0.5:1.0:0.5",
                 "--sweeps", "200", "--no-plots", "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["betas"] == [0.5, 1.0]
    assert (out / "thermo-6.json").exists()
    assert (out / "traces-6.csv").exists()


def test_cli_audit_exit_reflects_pass(tmp_path):
    code = main(["audit", "--kind", "moment", "--model", "sk", "--n", "8",
                 "--beta", "1.0", "--samples", "2", "--lambda0", "0.2",
                 "--seed", "1", "--no-plots", "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "moment-8.csv").read_text().strip().splitlines()
    assert rows[0].split(",")[-1] == "pass"
    assert all(line.endswith("True") for line in rows[1:])
