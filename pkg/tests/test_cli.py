import json
from unittest.mock import patch

import pandas as pd
import pytest
from typer.testing import CliRunner

from myoselect.application.experiment_service.experiment_service import ExperimentReport
from myoselect.cli import PLANS_FILE, app, resolve_seed, settings
from myoselect.errors import InvariantViolation

runner = CliRunner()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """Tiny synthetic signalset written through the CLI."""
    out = tmp_path_factory.mktemp("cli") / "clean"
    result = runner.invoke(
        app,
        ["synth", "--out", str(out), "--classes", "3", "--trials", "6", "--channels", "2", "--duration-ms", "256"]
        + ["--seed", "1"],
    )
    assert result.exit_code == 0, result.output
    return out


def test_synth_then_features(synth_dir, tmp_path):
    """
    Test that the feature export has a label column plus eight features per channel.
    """
    out = tmp_path / "features.csv"
    result = runner.invoke(app, ["features", str(synth_dir), "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert frame.shape == (18, 1 + 4 * 8)
    assert frame.columns[0] == "label"
    assert frame.columns[1] == "c0_A3_mav"


def test_features_without_approximation(synth_dir, tmp_path):
    """
    Test that dropping the approximation band leaves six features per channel.
    """
    out = tmp_path / "features.csv"
    result = runner.invoke(app, ["features", str(synth_dir), "--out", str(out), "--no-approximation"])
    assert result.exit_code == 0, result.output
    assert pd.read_csv(out).shape[1] == 1 + 4 * 6


def test_missing_out_is_a_usage_error(synth_dir):
    """
    Test that omitting --out exits with status 2.
    """
    assert runner.invoke(app, ["features", str(synth_dir)]).exit_code == 2


def test_missing_signalset_exits_with_error(tmp_path):
    """
    Test that a directory without a manifest exits with status 2.
    """
    result = runner.invoke(app, ["features", str(tmp_path), "--out", str(tmp_path / "f.csv")])
    assert result.exit_code == 2


def test_inject_writes_plans(synth_dir, tmp_path):
    """
    Test that injection writes the contaminated set and one plan per trial.
    """
    out = tmp_path / "dirty"
    result = runner.invoke(app, ["inject", str(synth_dir), "--out", str(out), "--snr", "3", "--seed", "2"])
    assert result.exit_code == 0, result.output
    lines = (out / PLANS_FILE).read_text(encoding="utf-8").splitlines()
    assert len(lines) == 18
    assert all(json.loads(line)["snr_db"] == 3.0 for line in lines)


def test_inject_with_fixed_kind_and_channels(synth_dir, tmp_path):
    """
    Test that --kind and --channels apply the same plan layout to every trial.
    """
    out = tmp_path / "dirty"
    result = runner.invoke(
        app, ["inject", str(synth_dir), "--out", str(out), "--kind", "gaussian", "--channels", "0,2", "--seed", "2"]
    )
    assert result.exit_code == 0, result.output
    records = [json.loads(line) for line in (out / PLANS_FILE).read_text(encoding="utf-8").splitlines()]
    assert {r["kind"] for r in records} == {"gaussian"}
    assert all(r["channels"] == [0, 2] for r in records)


def test_inject_channels_require_kind(synth_dir, tmp_path):
    """
    Test that --channels without --kind is a usage error.
    """
    result = runner.invoke(app, ["inject", str(synth_dir), "--out", str(tmp_path / "x"), "--channels", "0"])
    assert result.exit_code == 2


@pytest.mark.parametrize(
    "extra",
    [
        ["--methods", "B,SVM"],
        ["--k", "2,x"],
        ["--k", "0"],
        ["--k-grid", "tiny"],
        ["--snr", "0,abc"],
        ["--snr=-1,0"],
        ["--folds", "1"],
    ],
)
def test_evaluate_rejects_bad_arguments(synth_dir, tmp_path, extra):
    """
    Test that malformed evaluate arguments exit with status 2 before any training.
    """
    result = runner.invoke(app, ["evaluate", str(synth_dir), "--out", str(tmp_path / "run"), *extra])
    assert result.exit_code == 2
    assert not (tmp_path / "run").exists()


def test_resolve_seed_precedence():
    """
    Test that the flag wins over MYOSELECT_SEED, which wins over the default 0.
    """
    with patch.object(settings, "seed", 7):
        assert resolve_seed(3) == 3
        assert resolve_seed(None) == 7
    with patch.object(settings, "seed", None):
        assert resolve_seed(None) == 0


@pytest.mark.slow
def test_evaluate_then_report(synth_dir, tmp_path):
    """
    Test a small end-to-end evaluation followed by a report rebuild with another alpha.
    """
    run = tmp_path / "run"
    result = runner.invoke(
        app,
        ["evaluate", str(synth_dir), "--out", str(run), "--k", "1", "--k", "1,2", "--snr", "0,6"]
        + ["--methods", "Fu,DO", "--folds", "3", "--trees", "3", "--no-progress", "--seed", "4"],
    )
    assert result.exit_code == 0, result.output
    bac = pd.read_csv(run / "bac_raw.csv", dtype={"k_spec": str})
    assert len(bac) == 2 * 2 * 2 * 3
    assert set(bac["k_spec"]) == {"1", "1,2"}

    rebuilt = tmp_path / "rebuilt"
    result = runner.invoke(app, ["report", str(run), "--out", str(rebuilt), "--alpha", "0.1"])
    assert result.exit_code == 0, result.output
    assert (rebuilt / "pvalues_holm.csv").exists()
    assert (rebuilt / "boxplot_snr_6.dat").exists()
    assert (rebuilt / "ranks_by_snr.csv").read_bytes() == (run / "ranks_by_snr.csv").read_bytes()


def test_inject_rejects_negative_snr(synth_dir, tmp_path):
    """
    Test that a target below 0 dB is a usage error.
    """
    result = runner.invoke(app, ["inject", str(synth_dir), "--out", str(tmp_path / "x"), "--snr=-3"])
    assert result.exit_code == 2
    assert not (tmp_path / "x").exists()


EVALUATE_FLAGS = ["--k", "1,2", "--snr", "0", "--methods", "Or,Fu,DO", "--folds", "3", "--trees", "3"]
EVALUATE_FLAGS += ["--no-progress", "--seed", "4"]


@pytest.mark.slow
def test_evaluate_exits_one_on_invariant_violation(synth_dir, tmp_path):
    """
    Test that a failed hard invariant exits with status 1 after the report is written.
    """
    run = tmp_path / "run"
    violation = InvariantViolation("1 invariant checks failed (oracle_dominance Fu: 1)")
    with patch.object(ExperimentReport, "check_invariants", side_effect=violation):
        result = runner.invoke(app, ["evaluate", str(synth_dir), "--out", str(run), *EVALUATE_FLAGS])
    assert result.exit_code == 1
    assert (run / "invariants.csv").exists()


@pytest.mark.slow
def test_evaluate_output_does_not_depend_on_jobs(synth_dir, tmp_path):
    """
    Test that serial and parallel runs write byte-identical report directories.
    """
    outputs = {}
    for jobs in ("1", "2"):
        run = tmp_path / f"jobs{jobs}"
        result = runner.invoke(app, ["evaluate", str(synth_dir), "--out", str(run), "--jobs", jobs, *EVALUATE_FLAGS])
        assert result.exit_code == 0, result.output
        outputs[jobs] = {p.name: p.read_bytes() for p in sorted(run.iterdir())}
    assert outputs["1"].keys() == outputs["2"].keys()
    assert outputs["1"] == outputs["2"]
