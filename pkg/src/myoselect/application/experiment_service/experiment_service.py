import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from myoselect.domain.contamination.noise import inject_signalset
from myoselect.domain.contamination.planning import plan_random_contamination
from myoselect.domain.detection.detector_ensemble import DetectorConfig, detect_batch, train_detectors
from myoselect.domain.ensemble.ecoc import EcocConfig, predict_ecoc_batch, train_ecoc
from myoselect.domain.ensemble.move_ensemble import build_ensemble, member_predictions, vote_selected
from myoselect.domain.ensemble.references import (
    all_clean_mask,
    oracle_labels,
    predict_B_batch,
    predict_DO7_batch,
    train_default_models,
    train_full_model,
)
from myoselect.domain.ensemble.subsets import k_spec_label
from myoselect.domain.evaluation.analysis import BAC_COLUMNS, pvalue_table, ranks_by_k, ranks_by_snr
from myoselect.domain.evaluation.metrics import balanced_accuracy
from myoselect.domain.features.extraction import FeatureConfig, FeatureTable, extract_features
from myoselect.domain.learners.forest import ForestConfig
from myoselect.domain.learners.validation import stratified_kfold
from myoselect.domain.seeding import derive_seed
from myoselect.domain.signalset.models import SignalSet
from myoselect.errors import InvariantViolation, SignalSetError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.experiment_service")

SNR_LEVELS = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 10.0)
DEFAULT_K_SPECS = ((2, 3, 5),)
FULL_K_GRID = ((1,), (2,), (3,), (4,), (5,), (6,), (7,), (2, 3, 4), (3, 4, 5), (2, 3, 5), (2, 4, 5))

DETECTOR_COLUMNS = ["repeat", "fold", "channel", "modality", "nu", "tuning_bac"]
MEMBER_COLUMNS = ["k_spec", "snr_db", "repeat", "fold", "member", "channels", "bac"]
INVARIANT_COLUMNS = ["check", "method", "k_spec", "snr_db", "repeat", "fold", "hard", "passed", "detail"]


class Method(str, Enum):
    B = "B"
    EC = "EC"
    OR = "Or"
    FU = "Fu"
    DO = "DO"
    DO7 = "DO7"

    @classmethod
    def parse(cls, text: str) -> "Method":
        """Case-insensitive lookup by value."""
        for method in cls:
            if method.value.lower() == text.strip().lower():
                return method
        raise ValueError(f"unknown method '{text}'; expected one of {', '.join(m.value for m in cls)}")


METHOD_ORDER = tuple(m.value for m in Method)
ENSEMBLE_METHODS = frozenset({Method.OR, Method.FU, Method.DO})
DETECTOR_METHODS = frozenset({Method.DO, Method.DO7})


class ExperimentConfig(BaseModel):
    """
    Repeated cross-validation protocol.

    Attributes:
        folds (int): Stratified folds per repeat.
        repeats (int): Repetitions with distinct fold assignments.
        snr_levels (tuple[float, ...]): Test contamination levels in dB, all >= 0.
        k_specs (tuple[tuple[int, ...], ...]): Channel-subset sizes; a multi-value spec is a joint ensemble.
        methods (tuple[Method, ...]): Methods to evaluate.
        master_seed (int): Root of every derived seed.
        alpha (float): Significance level of the Holm-corrected tests.
        forest (ForestConfig): Base forest settings (the seed is derived per model).
        ecoc (EcocConfig): Output-code search settings.
        detector (DetectorConfig): One-class detector settings.
        features (FeatureConfig): Wavelet feature settings.
    """

    model_config = ConfigDict(frozen=True)

    folds: int = Field(10, ge=2)
    repeats: int = Field(1, ge=1)
    snr_levels: tuple[float, ...] = SNR_LEVELS
    k_specs: tuple[tuple[int, ...], ...] = DEFAULT_K_SPECS
    methods: tuple[Method, ...] = tuple(Method)
    master_seed: int = 0
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    forest: ForestConfig = ForestConfig()
    ecoc: EcocConfig = EcocConfig()
    detector: DetectorConfig = DetectorConfig()
    features: FeatureConfig = FeatureConfig()

    @field_validator("snr_levels")
    @classmethod
    def _finite_snr(cls, levels: tuple[float, ...]) -> tuple[float, ...]:
        if not levels or not all(math.isfinite(v) for v in levels):
            raise ValueError("snr levels must be finite and non-empty")
        if min(levels) < 0.0:
            raise ValueError(f"snr levels must be >= 0 dB, got {min(levels):g}")
        return tuple(sorted(set(levels)))

    @field_validator("k_specs")
    @classmethod
    def _canonical_k_specs(cls, specs: tuple[tuple[int, ...], ...]) -> tuple[tuple[int, ...], ...]:
        canonical = []
        for spec in specs:
            values = tuple(sorted(set(spec)))
            if not values or values[0] < 1:
                raise ValueError(f"invalid k spec {spec}")
            if values not in canonical:
                canonical.append(values)
        if not canonical:
            raise ValueError("at least one k spec is required")
        return tuple(canonical)

    @field_validator("methods")
    @classmethod
    def _ordered_methods(cls, methods: tuple[Method, ...]) -> tuple[Method, ...]:
        if not methods:
            raise ValueError("at least one method is required")
        return tuple(m for m in Method if m in set(methods))

    @classmethod
    def desk(cls, **overrides: Any) -> "ExperimentConfig":
        """Desk-scale protocol: 10 folds, 1 repeat."""
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides: Any) -> "ExperimentConfig":
        """Full protocol: 10 folds repeated 4 times."""
        return cls(**{"repeats": 4, **overrides})

    @staticmethod
    def k_grid_full() -> tuple[tuple[int, ...], ...]:
        """Single-K specs 1..7 plus the joint specs {2,3,4}, {3,4,5}, {2,3,5}, {2,4,5}."""
        return FULL_K_GRID

    def k_labels(self) -> list[str]:
        return [k_spec_label(k) for k in self.k_specs]


@dataclass
class CellResult:
    """Rows produced by one (repeat, fold) cell."""

    bac: list[dict] = field(default_factory=list)
    detectors: list[dict] = field(default_factory=list)
    members: list[dict] = field(default_factory=list)
    invariants: list[dict] = field(default_factory=list)


@dataclass
class ExperimentReport:
    """
    Results of a run.

    Attributes:
        config (ExperimentConfig): The resolved configuration.
        bac (pd.DataFrame): Long-form balanced accuracies (method, k_spec, snr_db, repeat, fold, bac).
        ranks_by_k (pd.DataFrame): Average ranks of k specs per method, overall and per SNR.
        ranks_by_snr (pd.DataFrame): Average ranks of methods per (k spec, SNR).
        pvalues (pd.DataFrame): Pairwise Wilcoxon tests with Holm-adjusted p-values.
        detectors (pd.DataFrame): Tuned nu and tuning balanced accuracy per cell and channel.
        members (pd.DataFrame): Balanced accuracy of every ensemble member per cell and SNR.
        invariants (pd.DataFrame): Run-time invariant checks.
    """

    config: ExperimentConfig
    bac: pd.DataFrame
    ranks_by_k: pd.DataFrame
    ranks_by_snr: pd.DataFrame
    pvalues: pd.DataFrame
    detectors: pd.DataFrame
    members: pd.DataFrame
    invariants: pd.DataFrame

    @property
    def failed_invariants(self) -> pd.DataFrame:
        """Hard checks that did not pass."""
        if self.invariants.empty:
            return self.invariants
        return self.invariants[self.invariants["hard"] & ~self.invariants["passed"]]

    def check_invariants(self) -> None:
        """
        Raises:
            InvariantViolation: If any hard check failed; the message names the first failure.
        """
        failures = self.failed_invariants
        if not failures.empty:
            first = failures.iloc[0]
            raise InvariantViolation(
                f"{len(failures)} invariant checks failed ({failure_summary(failures)}), "
                f"first: {first['check']} {first['method']} "
                f"k={first['k_spec']} snr={first['snr_db']:g} ({first['detail']})"
            )

    def mean_bac(self) -> pd.DataFrame:
        """Mean balanced accuracy per (method, k_spec, snr_db)."""
        return self.bac.groupby(["method", "k_spec", "snr_db"], sort=False, as_index=False)["bac"].mean()


def failure_summary(failures: pd.DataFrame) -> str:
    """Failure counts per (check, method), e.g. "oracle_dominance B: 2, oracle_dominance EC: 1"."""
    counts = failures.groupby(["check", "method"], sort=True).size()
    return ", ".join(f"{check} {method}: {count}" for (check, method), count in counts.items())


def stratified_folds(signalset: SignalSet, folds: int, repeats: int, seed: int) -> list[list[np.ndarray]]:
    """
    Test-fold assignments of every repeat.

    Args:
        signalset (SignalSet): Labeled trials.
        folds (int): Folds per repeat.
        repeats (int): Number of repeats; repeat r shuffles with the seed derived from (seed, "folds", r).
        seed (int): Master seed.

    Returns:
        list[list[np.ndarray]]: result[r][f] holds the ascending test indices of fold f of repeat r.

    Raises:
        SignalSetError: If a class has fewer trials than folds.
    """
    labels = signalset.labels
    counts = np.bincount(labels, minlength=signalset.class_count)
    if counts.min() < folds:
        small = int(np.argmin(counts))
        raise SignalSetError(f"class {small} has {counts[small]} trials, fewer than {folds} folds")
    return [
        [test for _, test in stratified_kfold(labels, folds, np.random.default_rng(derive_seed(seed, "folds", r)))]
        for r in range(repeats)
    ]


def _dominance_rows(scores: dict[Method, float], k_label: str, snr: float, repeat: int, fold: int) -> list[dict]:
    rows = []
    oracle = scores[Method.OR]
    for method, value in scores.items():
        if method is Method.OR:
            continue
        rows.append(
            {
                "check": "oracle_dominance",
                "method": method.value,
                "k_spec": k_label,
                "snr_db": snr,
                "repeat": repeat,
                "fold": fold,
                "hard": True,
                "passed": bool(oracle >= value),
                "detail": f"Or={oracle:.6f} {method.value}={value:.6f}",
            }
        )
    return rows


def run_cell(
    signalset: SignalSet,
    table: FeatureTable,
    test_idx: np.ndarray,
    repeat: int,
    fold: int,
    config: ExperimentConfig,
) -> CellResult:
    """
    Train every configured method on the clean training part of one cell and score it at every SNR level.

    Test trials are contaminated afresh per SNR level with plans seeded from (master, repeat, fold, snr).
    """
    result = CellResult()
    methods = set(config.methods)
    train_idx = np.setdiff1d(np.arange(len(table)), test_idx)
    train = table.take(train_idx)
    seed = derive_seed(config.master_seed, "cell", repeat, fold)
    logger.debug(f"Cell repeat={repeat} fold={fold}: {train_idx.size} train / {test_idx.size} test trials.")

    detector = None
    if methods & DETECTOR_METHODS:
        detector = train_detectors(train, derive_seed(seed, "detector"), config.detector)
        for ch, nu, bac in zip(table.channels, detector.nu_per_channel, detector.tuning_bac, strict=True):
            result.detectors.append(
                {
                    "repeat": repeat,
                    "fold": fold,
                    "channel": ch.id,
                    "modality": ch.modality.value,
                    "nu": nu,
                    "tuning_bac": bac,
                }
            )

    full_model = train_full_model(train, seed, config.forest) if methods & {Method.B, Method.DO7} else None
    default_models = (
        train_default_models(train, seed, config.forest, full_model=full_model) if Method.DO7 in methods else None
    )
    ecoc = (
        train_ecoc(train.full(), train.labels, train.class_count, derive_seed(seed, "ecoc"), config.ecoc)
        if Method.EC in methods
        else None
    )
    union = sorted({k for spec in config.k_specs for k in spec})
    ensemble = build_ensemble(train, union, seed, config.forest) if methods & ENSEMBLE_METHODS else None

    test_signals = signalset.subset(test_idx)
    for snr in config.snr_levels:
        plans = plan_random_contamination(
            len(test_signals),
            signalset.channel_count,
            snr,
            derive_seed(config.master_seed, "contamination", repeat, fold, snr),
        )
        dirty = extract_features(inject_signalset(test_signals, plans), config.features)
        values, labels = dirty.values, dirty.labels
        masks = detect_batch(detector, values) if detector is not None else None

        shared: dict[Method, float] = {}
        if Method.B in methods:
            shared[Method.B] = balanced_accuracy(labels, predict_B_batch(full_model, values))
        if Method.EC in methods:
            shared[Method.EC] = balanced_accuracy(labels, predict_ecoc_batch(ecoc, dirty.full()))
        if Method.DO7 in methods:
            shared[Method.DO7] = balanced_accuracy(labels, predict_DO7_batch(default_models, masks, values))

        union_predictions = member_predictions(ensemble, values) if ensemble is not None else None
        for spec in config.k_specs:
            k_label = k_spec_label(spec)
            scores = dict(shared)
            if ensemble is not None:
                rows = np.flatnonzero([len(m.subset) in spec for m in ensemble.members])
                sub = ensemble.restrict(spec)
                predictions = union_predictions[rows]
                oracle = balanced_accuracy(labels, oracle_labels(predictions, labels))
                if Method.FU in methods:
                    all_clean = [all_clean_mask(sub.channel_count)] * len(labels)
                    scores[Method.FU] = balanced_accuracy(labels, vote_selected(predictions, all_clean, sub))
                if Method.DO in methods:
                    scores[Method.DO] = balanced_accuracy(labels, vote_selected(predictions, masks, sub))
                scores[Method.OR] = oracle
                result.invariants += _dominance_rows(scores, k_label, snr, repeat, fold)
                for index, member in enumerate(sub.members):
                    result.members.append(
                        {
                            "k_spec": k_label,
                            "snr_db": snr,
                            "repeat": repeat,
                            "fold": fold,
                            "member": index,
                            "channels": member.subset.label(),
                            "bac": balanced_accuracy(labels, predictions[index]),
                        }
                    )
            for method in config.methods:
                value = scores[method]
                result.bac.append(
                    {
                        "method": method.value,
                        "k_spec": k_label,
                        "snr_db": snr,
                        "repeat": repeat,
                        "fold": fold,
                        "bac": value,
                    }
                )
                result.invariants.append(
                    {
                        "check": "bac_range",
                        "method": method.value,
                        "k_spec": k_label,
                        "snr_db": snr,
                        "repeat": repeat,
                        "fold": fold,
                        "hard": True,
                        "passed": bool(0.0 <= value <= 1.0),
                        "detail": f"bac={value:.6f}",
                    }
                )
    return result


def sort_bac(bac: pd.DataFrame, k_labels: Sequence[str]) -> pd.DataFrame:
    """Order rows by method (canonical order), k spec (config order), SNR, repeat and fold."""
    keys = bac.assign(
        _method=bac["method"].map({m: i for i, m in enumerate(METHOD_ORDER)}),
        _k=bac["k_spec"].map({k: i for i, k in enumerate(k_labels)}),
    )
    keys = keys.sort_values(["_method", "_k", "snr_db", "repeat", "fold"], kind="stable")
    return keys.drop(columns=["_method", "_k"]).reset_index(drop=True)


def _frame(rows: list[dict], columns: list[str], sort_by: list[str]) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=columns)
    return frame.sort_values(sort_by, kind="stable").reset_index(drop=True) if not frame.empty else frame


def summarize(
    config: ExperimentConfig,
    bac: pd.DataFrame,
    detectors: pd.DataFrame | None = None,
    members: pd.DataFrame | None = None,
    invariants: pd.DataFrame | None = None,
) -> ExperimentReport:
    """Build rank tables and pairwise tests from long-form balanced accuracies."""
    methods = [m.value for m in config.methods]
    k_labels = config.k_labels()
    return ExperimentReport(
        config=config,
        bac=bac,
        ranks_by_k=ranks_by_k(bac, k_labels),
        ranks_by_snr=ranks_by_snr(bac, methods, k_labels),
        pvalues=pvalue_table(bac, methods, k_labels, config.alpha),
        detectors=detectors if detectors is not None else pd.DataFrame(columns=DETECTOR_COLUMNS),
        members=members if members is not None else pd.DataFrame(columns=MEMBER_COLUMNS),
        invariants=invariants if invariants is not None else pd.DataFrame(columns=INVARIANT_COLUMNS),
    )


def run_experiment(
    signalset: SignalSet, config: ExperimentConfig, jobs: int = 1, progress: bool = True
) -> ExperimentReport:
    """
    Run the repeated cross-validation protocol.

    Training always uses clean trials. Each (repeat, fold) cell is independent given its derived seeds, so
    cells may run in parallel without changing any result.

    Args:
        signalset (SignalSet): Clean labeled trials.
        config (ExperimentConfig): Protocol.
        jobs (int): Cells processed in parallel.
        progress (bool): Show a progress bar.

    Returns:
        ExperimentReport: Balanced accuracies, rank tables, tests and diagnostics.

    Raises:
        SignalSetError: If the signalset is contaminated or a class has fewer trials than folds.
    """
    if signalset.contaminated:
        raise SignalSetError("experiments require a clean signalset")
    for spec in config.k_specs:
        if spec[-1] > signalset.channel_count:
            raise SignalSetError(f"k spec {spec} exceeds the {signalset.channel_count}-channel layout")

    logger.info(
        f"Starting experiment: {config.repeats}x{config.folds} folds, {len(config.snr_levels)} SNR levels, "
        f"k specs {config.k_labels()}, methods {[m.value for m in config.methods]}."
    )
    table = extract_features(signalset, config.features)
    assignments = stratified_folds(signalset, config.folds, config.repeats, config.master_seed)
    cells = [(r, f, test) for r, folds in enumerate(assignments) for f, test in enumerate(folds)]

    outputs = Parallel(n_jobs=jobs, return_as="generator")(
        delayed(run_cell)(signalset, table, test, r, f, config) for r, f, test in cells
    )
    results: list[CellResult] = list(tqdm(outputs, total=len(cells), desc="Experiment cells", disable=not progress))

    bac = pd.DataFrame([row for c in results for row in c.bac], columns=BAC_COLUMNS)
    detectors = _frame([row for c in results for row in c.detectors], DETECTOR_COLUMNS, ["repeat", "fold", "channel"])
    members = _frame(
        [row for c in results for row in c.members], MEMBER_COLUMNS, ["k_spec", "snr_db", "repeat", "fold", "member"]
    )
    invariants = _frame(
        [row for c in results for row in c.invariants],
        INVARIANT_COLUMNS,
        ["check", "method", "k_spec", "snr_db", "repeat", "fold"],
    )
    bac = sort_bac(bac, config.k_labels())

    report = summarize(config, bac, detectors, members, invariants)
    failures = report.failed_invariants
    if not failures.empty:
        logger.error(f"{len(failures)} hard invariant checks failed: {failure_summary(failures)}.")
    logger.info(f"Experiment finished: {len(bac)} balanced accuracy rows.")
    return report


def methods_from_names(names: Sequence[str]) -> tuple[Method, ...]:
    """Parse method names such as ["B", "fu", "DO7"]."""
    return tuple(Method.parse(n) for n in names)
