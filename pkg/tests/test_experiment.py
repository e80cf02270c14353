from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from myoselect.application.experiment_service.experiment_service import (
    FULL_K_GRID,
    METHOD_ORDER,
    ExperimentConfig,
    Method,
    methods_from_names,
    run_experiment,
    sort_bac,
    stratified_folds,
)
from myoselect.domain.contamination.noise import inject_signalset
from myoselect.domain.contamination.planning import plan_random_contamination
from myoselect.domain.detection.detector_ensemble import DetectorConfig
from myoselect.domain.learners.forest import ForestConfig
from myoselect.domain.signalset.synthesis import synth_signalset
from myoselect.errors import InvariantViolation, SignalSetError


def test_method_parse_is_case_insensitive():
    """
    Test method lookup by value regardless of case and surrounding spaces.
    """
    assert Method.parse("fu") is Method.FU
    assert Method.parse(" do7 ") is Method.DO7
    assert methods_from_names(["B", "or"]) == (Method.B, Method.OR)
    with pytest.raises(ValueError, match="unknown method"):
        Method.parse("svm")


def test_config_canonicalizes_fields():
    """
    Test that SNR levels, k specs and methods are sorted and deduplicated.
    """
    config = ExperimentConfig(
        snr_levels=(10.0, 0.0, 0.0),
        k_specs=((3, 2), (2, 3), (7,)),
        methods=(Method.DO, Method.B),
    )
    assert config.snr_levels == (0.0, 10.0)
    assert config.k_specs == ((2, 3), (7,))
    assert config.k_labels() == ["2,3", "7"]
    assert config.methods == (Method.B, Method.DO)


@pytest.mark.parametrize(
    "overrides",
    [
        {"k_specs": ((0,),)},
        {"k_specs": ()},
        {"snr_levels": (float("nan"),)},
        {"snr_levels": (-1.0, 0.0)},
        {"methods": ()},
        {"folds": 1},
        {"alpha": 1.0},
    ],
)
def test_config_rejects_invalid_fields(overrides):
    """
    Test that invalid protocol settings fail validation.
    """
    with pytest.raises(ValidationError):
        ExperimentConfig(**overrides)


def test_desk_and_full_protocols():
    """
    Test the defaults of the desk and full protocols and the named K grid.
    """
    desk = ExperimentConfig.desk()
    assert (desk.folds, desk.repeats) == (10, 1)
    assert desk.k_specs == ((2, 3, 5),)
    assert ExperimentConfig.full().repeats == 4
    assert ExperimentConfig.full(repeats=2).repeats == 2
    grid = ExperimentConfig.k_grid_full()
    assert grid == FULL_K_GRID
    assert len(grid) == 11
    assert grid[:7] == tuple((k,) for k in range(1, 8))


def test_stratified_folds_partition_every_repeat(signalset):
    """
    Test that each repeat's test folds partition the trials and keep every class in every fold.
    """
    assignments = stratified_folds(signalset, folds=3, repeats=2, seed=1)
    assert len(assignments) == 2
    for folds in assignments:
        joined = np.sort(np.concatenate(folds))
        assert np.array_equal(joined, np.arange(len(signalset)))
        for test in folds:
            assert set(signalset.labels[test]) == {0, 1, 2}
    assert not all(np.array_equal(a, b) for a, b in zip(assignments[0], assignments[1], strict=True))
    again = stratified_folds(signalset, folds=3, repeats=2, seed=1)
    assert all(np.array_equal(a, b) for a, b in zip(assignments[1], again[1], strict=True))


def test_stratified_folds_need_enough_trials(signalset):
    """
    Test that asking for more folds than trials per class raises.
    """
    with pytest.raises(SignalSetError, match="fewer than 11 folds"):
        stratified_folds(signalset, folds=11, repeats=1, seed=0)


def test_run_experiment_rejects_contaminated_input(signalset, small_config):
    """
    Test that experiments refuse an already contaminated signalset.
    """
    plans = plan_random_contamination(len(signalset), signalset.channel_count, 0.0, seed=1)
    with pytest.raises(SignalSetError, match="clean"):
        run_experiment(inject_signalset(signalset, plans), small_config, progress=False)


def test_run_experiment_rejects_oversized_k(signalset, small_config):
    """
    Test that a k spec larger than the channel layout raises before any training.
    """
    config = small_config.model_copy(update={"k_specs": ((5,),)})
    with pytest.raises(SignalSetError, match="exceeds"):
        run_experiment(signalset, config, progress=False)


def test_run_experiment_bac_table(experiment_report, small_config):
    """
    Test the size, order and range of the long-form balanced accuracies.
    """
    bac = experiment_report.bac
    assert len(bac) == len(METHOD_ORDER) * 3 * 2 * 3
    assert bac["bac"].between(0.0, 1.0).all()
    assert list(dict.fromkeys(bac["method"])) == list(METHOD_ORDER)
    assert list(dict.fromkeys(bac["k_spec"])) == ["1", "2", "1,2"]
    pd.testing.assert_frame_equal(bac, sort_bac(bac.sample(frac=1.0, random_state=0), small_config.k_labels()))


def test_run_experiment_invariants_hold(experiment_report):
    """
    Test that the oracle dominates the fused and detector-driven votes, that every score is in range, and that
    any failure left can only be the oracle falling below a reference model outside the ensemble.
    """
    failed = experiment_report.failed_invariants
    assert set(failed["check"]) <= {"oracle_dominance"}
    assert set(failed["method"]) <= {"B", "EC", "DO7"}
    wide = experiment_report.bac.pivot_table(
        index=["k_spec", "snr_db", "repeat", "fold"], columns="method", values="bac"
    )
    assert (wide["Or"] >= wide["Fu"]).all()
    assert (wide["Or"] >= wide["DO"]).all()


def test_external_references_do_not_depend_on_k(experiment_report):
    """
    Test that B, EC and DO7 give the same score under every k spec of a cell.
    """
    bac = experiment_report.bac
    for method in ("B", "EC", "DO7"):
        spread = bac[bac["method"] == method].groupby(["snr_db", "repeat", "fold"])["bac"].nunique()
        assert (spread == 1).all()


def test_run_experiment_diagnostics(experiment_report, signalset):
    """
    Test the detector and member diagnostics of a run.
    """
    detectors = experiment_report.detectors
    assert len(detectors) == 3 * signalset.channel_count
    assert detectors["nu"].isin([0.1, 0.5]).all()
    members = experiment_report.members
    assert len(members) == (4 + 6 + 10) * 2 * 3
    assert set(members[members["k_spec"] == "1"]["channels"]) == {"0", "1", "2", "3"}


def test_run_experiment_rank_tables(experiment_report):
    """
    Test that rank tables cover the ensemble methods per k spec and every method per (k spec, SNR).
    """
    by_k = experiment_report.ranks_by_k
    assert set(by_k["method"]) == {"Or", "Fu", "DO"}
    by_snr = experiment_report.ranks_by_snr
    assert len(by_snr) == len(METHOD_ORDER) * 3 * 2
    sums = by_snr.groupby(["k_spec", "snr_db"])["avg_rank"].sum()
    n = len(METHOD_ORDER)
    assert np.allclose(sums.to_numpy(), n * (n + 1) / 2)


def test_mean_bac(experiment_report):
    """
    Test that mean_bac averages over folds.
    """
    means = experiment_report.mean_bac()
    assert len(means) == len(METHOD_ORDER) * 3 * 2
    bac = experiment_report.bac
    cell = bac[(bac["method"] == "Fu") & (bac["k_spec"] == "2") & (bac["snr_db"] == 0.0)]["bac"].mean()
    row = means[(means["method"] == "Fu") & (means["k_spec"] == "2") & (means["snr_db"] == 0.0)]
    assert row["bac"].iloc[0] == pytest.approx(cell)


@pytest.mark.slow
def test_run_experiment_is_parallel_invariant(signalset, small_config):
    """
    Test that running cells in parallel changes no result.
    """
    config = small_config.model_copy(update={"methods": (Method.FU, Method.DO), "snr_levels": (0.0,)})
    serial = run_experiment(signalset, config, jobs=1, progress=False)
    parallel = run_experiment(signalset, config, jobs=2, progress=False)
    pd.testing.assert_frame_equal(serial.bac, parallel.bac)
    pd.testing.assert_frame_equal(serial.pvalues, parallel.pvalues)


def test_every_dominance_check_is_hard(experiment_report):
    """
    Test that oracle dominance is checked as a hard invariant against every other method, and that the ledger
    agrees with the balanced accuracy table.
    """
    invariants = experiment_report.invariants
    assert invariants["hard"].all()
    dominance = invariants[invariants["check"] == "oracle_dominance"]
    assert set(dominance["method"]) == {"B", "EC", "Fu", "DO", "DO7"}
    keys = ["k_spec", "snr_db", "repeat", "fold"]
    wide = experiment_report.bac.pivot_table(index=keys, columns="method", values="bac")
    for row in dominance.itertuples():
        cell = wide.loc[(row.k_spec, row.snr_db, row.repeat, row.fold)]
        assert row.passed == bool(cell["Or"] >= cell[row.method])


def test_check_invariants_raises_on_hard_failure(experiment_report):
    """
    Test that a failed hard check raises with per-method counts while unchecked rows are ignored.
    """
    invariants = experiment_report.invariants.assign(passed=True)
    replace(experiment_report, invariants=invariants).check_invariants()
    replace(experiment_report, invariants=invariants.assign(hard=False, passed=False)).check_invariants()
    broken = invariants.copy()
    target = broken.index[(broken["check"] == "oracle_dominance") & (broken["method"] == "EC")][0]
    broken.loc[target, "passed"] = False
    with pytest.raises(InvariantViolation, match=r"1 invariant checks failed \(oracle_dominance EC: 1\)"):
        replace(experiment_report, invariants=broken).check_invariants()


@pytest.mark.slow
def test_detector_selection_wins_at_low_snr():
    """
    Test on five seeds that at SNR 0 detector-driven selection beats fusion and the all-channel forest on at
    least four, and that single-channel members always do worse than three-channel members.
    """
    config = ExperimentConfig(
        folds=5,
        snr_levels=(0.0, 10.0),
        k_specs=((1,), (3,), (2, 3, 5)),
        methods=(Method.B, Method.FU, Method.DO),
        forest=ForestConfig(trees=10),
        detector=DetectorConfig(nu_grid=(0.1, 0.2, 0.3, 0.5)),
    )
    wins = 0
    for seed in range(1, 6):
        signalset = synth_signalset(classes=8, trials_per_class=20, channel_count_L=4, duration_ms=512.0, seed=seed)
        report = run_experiment(signalset, config.model_copy(update={"master_seed": seed}), jobs=2, progress=False)
        means = report.mean_bac().set_index(["method", "k_spec", "snr_db"])["bac"]
        do, fu, b = (means[(m, "2,3,5", 0.0)] for m in ("DO", "Fu", "B"))
        wins += int(do > fu and do > b)
        per_k = report.bac.groupby(["method", "k_spec"])["bac"].mean()
        for method in ("Fu", "DO"):
            assert per_k[(method, "1")] < per_k[(method, "3")]
    assert wins >= 4
