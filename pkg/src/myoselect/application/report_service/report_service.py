import json
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from myoselect.application.experiment_service.experiment_service import (
    ExperimentConfig,
    ExperimentReport,
    sort_bac,
    summarize,
)
from myoselect.domain.evaluation.analysis import BAC_COLUMNS, box_statistics
from myoselect.errors import SignalSetIOError, StatisticsError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.report_service")

FLOAT_FORMAT = "%.10g"
CONFIG_FILE = "config.json"
BAC_FILE = "bac_raw.csv"
RANKS_BY_K_FILE = "ranks_by_k.csv"
RANKS_BY_SNR_FILE = "ranks_by_snr.csv"
PVALUES_FILE = "pvalues_holm.csv"
DETECTORS_FILE = "detectors.csv"
MEMBERS_FILE = "members.csv"
INVARIANTS_FILE = "invariants.csv"


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)


def boxplot_file_name(snr: float) -> str:
    return f"boxplot_snr_{snr:g}.dat"


def boxplot_data(bac: pd.DataFrame, snr: float, method_order: list[str], k_order: list[str]) -> str:
    """
    Gnuplot-ready box statistics of one SNR level.

    One data block per k spec (blocks separated by two blank lines, addressable with `index`); rows hold
    x position, method, min, q1, median, q3, max and mean over the (repeat, fold) cells.
    """
    at_snr = bac[bac["snr_db"] == snr]
    blocks = []
    for k_spec in k_order:
        part = at_snr[at_snr["k_spec"] == k_spec]
        if part.empty:
            continue
        lines = [f"# snr_db={snr:g} k_spec={k_spec}", "# x method min q1 median q3 max mean"]
        for x, method in enumerate([m for m in method_order if m in set(part["method"])], start=1):
            stats = box_statistics(part.loc[part["method"] == method, "bac"].to_numpy())
            values = " ".join(FLOAT_FORMAT % stats[key] for key in ("min", "q1", "median", "q3", "max", "mean"))
            lines.append(f"{x} {method} {values}")
        blocks.append("\n".join(lines) + "\n")
    return "\n\n".join(blocks)


def write_analysis(report: ExperimentReport, out_dir: Path) -> list[Path]:
    """Write rank tables, p-values and boxplot data; returns the written paths."""
    written = []
    for frame, name in (
        (report.ranks_by_k, RANKS_BY_K_FILE),
        (report.ranks_by_snr, RANKS_BY_SNR_FILE),
        (report.pvalues, PVALUES_FILE),
    ):
        _write_csv(frame, out_dir / name)
        written.append(out_dir / name)
    methods = [m.value for m in report.config.methods]
    k_labels = report.config.k_labels()
    for snr in sorted(report.bac["snr_db"].unique()):
        path = out_dir / boxplot_file_name(float(snr))
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(boxplot_data(report.bac, float(snr), methods, k_labels))
        written.append(path)
    return written


def emit_report(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """
    Write every report file of a run.

    Files: config.json, bac_raw.csv, ranks_by_k.csv, ranks_by_snr.csv, pvalues_holm.csv, detectors.csv,
    members.csv, invariants.csv and one boxplot_snr_<v>.dat per SNR level. Re-emitting the same report gives
    byte-identical files.

    Args:
        report (ExperimentReport): Results of `run_experiment`.
        out_dir (str | Path): Report directory, created if missing.

    Returns:
        list[Path]: Written files.

    Raises:
        SignalSetIOError: If the directory or a file cannot be written.
    """
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / CONFIG_FILE).write_text(report.config.model_dump_json(indent=2) + "\n", encoding="utf-8")
        written = [root / CONFIG_FILE]
        for frame, name in (
            (report.bac, BAC_FILE),
            (report.detectors, DETECTORS_FILE),
            (report.members, MEMBERS_FILE),
            (report.invariants, INVARIANTS_FILE),
        ):
            _write_csv(frame, root / name)
            written.append(root / name)
        written += write_analysis(report, root)
    except OSError as e:
        logger.error(f"Error writing report to {root}: {e}")
        raise SignalSetIOError(f"cannot write report to {root}: {e}") from e
    logger.info(f"Report written to {root} ({len(written)} files).")
    return written


def load_bac(path: str | Path) -> pd.DataFrame:
    """
    Read a bac_raw.csv file.

    Raises:
        SignalSetIOError: If the file cannot be read.
        StatisticsError: If columns are missing or a balanced accuracy lies outside [0, 1].
    """
    source = Path(path)
    try:
        frame = pd.read_csv(source, dtype={"method": str, "k_spec": str})
    except OSError as e:
        raise SignalSetIOError(f"cannot read {source}: {e}") from e
    missing = [c for c in BAC_COLUMNS if c not in frame.columns]
    if missing:
        raise StatisticsError(f"{source}: missing columns {missing}")
    if frame["bac"].isna().any() or not frame["bac"].between(0.0, 1.0).all():
        raise StatisticsError(f"{source}: balanced accuracy outside [0, 1]")
    return frame[BAC_COLUMNS]


def load_config(path: str | Path) -> ExperimentConfig:
    """Read the config.json of a report directory."""
    source = Path(path)
    try:
        return ExperimentConfig.model_validate(json.loads(source.read_text(encoding="utf-8")))
    except OSError as e:
        raise SignalSetIOError(f"cannot read {source}: {e}") from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise StatisticsError(f"{source}: invalid experiment config: {e}") from e


def rebuild_report(run_dir: str | Path, alpha: float | None = None) -> ExperimentReport:
    """
    Recompute rank tables and tests from an existing run directory.

    Uses the directory's config.json when present; otherwise method and k spec order follow bac_raw.csv.

    Args:
        run_dir (str | Path): Directory holding bac_raw.csv.
        alpha (float | None): Significance level overriding the stored one.
    """
    root = Path(run_dir)
    bac = load_bac(root / BAC_FILE)
    if (root / CONFIG_FILE).exists():
        config = load_config(root / CONFIG_FILE)
    else:
        config = ExperimentConfig(
            methods=tuple(dict.fromkeys(bac["method"])),
            k_specs=tuple(tuple(int(k) for k in label.split(",")) for label in dict.fromkeys(bac["k_spec"])),
            snr_levels=tuple(sorted(bac["snr_db"].unique())),
        )
    if alpha is not None:
        config = config.model_copy(update={"alpha": alpha})
    logger.info(f"Rebuilding analysis from {root / BAC_FILE} ({len(bac)} rows, alpha={config.alpha}).")
    return summarize(config, sort_bac(bac, config.k_labels()))
