from pathlib import Path
from typing import Annotated

import pandas as pd
import typer
from pydantic import ValidationError

from myoselect.application.experiment_service.experiment_service import (
    METHOD_ORDER,
    SNR_LEVELS,
    ExperimentConfig,
    methods_from_names,
    run_experiment,
)
from myoselect.application.report_service.report_service import (
    FLOAT_FORMAT,
    emit_report,
    rebuild_report,
    write_analysis,
)
from myoselect.config import settings
from myoselect.domain.contamination.models import ContaminationPlan, NoiseKind
from myoselect.domain.contamination.noise import inject_signalset
from myoselect.domain.contamination.planning import plan_random_contamination
from myoselect.domain.ensemble.ecoc import EcocConfig
from myoselect.domain.ensemble.subsets import parse_k_spec
from myoselect.domain.features.extraction import FeatureConfig, extract_features
from myoselect.domain.learners.forest import DEFAULT_TREES, ForestConfig
from myoselect.domain.seeding import derive_seed
from myoselect.domain.signalset.synthesis import SynthConfig, synth_from_config
from myoselect.errors import InvariantViolation, MyoselectError
from myoselect.infrastructure.monitoring.logger import Logger
from myoselect.infrastructure.storage.plan_store import save_plans
from myoselect.infrastructure.storage.signalset_store import load_signalset, save_signalset

logger = Logger.get_logger("myoselect.cli")

PLANS_FILE = "plans.jsonl"
DEFAULT_SNR = ",".join(f"{v:g}" for v in SNR_LEVELS)
DEFAULT_METHODS = ",".join(METHOD_ORDER)

app = typer.Typer(
    name="myoselect",
    help="Contamination-aware EMG/MMG movement recognition: synthesis, injection, features and evaluation.",
    no_args_is_help=True,
    add_completion=False,
)

OutOption = Annotated[Path, typer.Option("--out", "-o", help="Output path.")]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Master seed (falls back to MYOSELECT_SEED).")]


@app.callback()
def main(verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log at DEBUG level.")] = False) -> None:
    if verbose:
        Logger.set_level("DEBUG")


def resolve_seed(seed: int | None) -> int:
    """Seed from the flag, else from MYOSELECT_SEED, else 0 with a warning."""
    if seed is not None:
        return seed
    if settings.seed is not None:
        return settings.seed
    logger.warning("No --seed and no MYOSELECT_SEED given; using seed 0.")
    return 0


def _split_floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated numbers, got {text!r}", param_hint=flag) from e


def _split_ints(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated integers, got {text!r}", param_hint=flag) from e


def _fail(e: Exception) -> typer.Exit:
    logger.error(str(e))
    typer.echo(f"Error: {e}", err=True)
    return typer.Exit(2)


@app.command()
def synth(
    out: OutOption,
    classes: Annotated[int, typer.Option(help="Movement classes M.")] = 8,
    trials: Annotated[int, typer.Option(help="Trials per class.")] = 40,
    channels: Annotated[int, typer.Option(help="Sensor pairs L (2L channels).")] = 4,
    duration_ms: Annotated[float, typer.Option(help="Trial length in milliseconds.")] = 1000.0,
    rate: Annotated[float, typer.Option(help="Sampling rate in Hz.")] = 1000.0,
    seed: SeedOption = None,
) -> None:
    """Generate a synthetic clean signalset directory."""
    try:
        config = SynthConfig(
            classes=classes,
            trials_per_class=trials,
            sensor_pairs=channels,
            duration_ms=duration_ms,
            rate_hz=rate,
            seed=resolve_seed(seed),
        )
    except ValidationError as e:
        raise typer.BadParameter(str(e)) from e
    try:
        signalset = synth_from_config(config)
        save_signalset(signalset, out)
    except MyoselectError as e:
        raise _fail(e) from e
    typer.echo(f"Wrote {len(signalset)} trials ({signalset.channel_count} channels) to {out}")


@app.command()
def inject(
    signalset_dir: Annotated[Path, typer.Argument(help="Clean signalset directory.")],
    out: OutOption,
    snr: Annotated[float, typer.Option(min=0.0, help="Target SNR in dB (>= 0).")] = 0.0,
    kind: Annotated[
        NoiseKind | None, typer.Option(case_sensitive=False, help="Noise kind for every trial; random if omitted.")
    ] = None,
    channels: Annotated[
        str | None, typer.Option(help="Comma-separated channel ids, with --kind; random if omitted.")
    ] = None,
    seed: SeedOption = None,
) -> None:
    """Contaminate every trial of a signalset and write it with its plans."""
    if channels is not None and kind is None:
        raise typer.BadParameter("--channels requires --kind", param_hint="--channels")
    master = resolve_seed(seed)
    try:
        signalset = load_signalset(signalset_dir)
        if kind is None:
            plans = plan_random_contamination(len(signalset), signalset.channel_count, snr, master)
        else:
            ids = _split_ints(channels, "--channels") if channels is not None else tuple(range(signalset.channel_count))
            plans = [
                ContaminationPlan(kind=kind, snr_db=snr, channel_ids=ids, seed=derive_seed(master, "plan", index))
                for index in range(len(signalset))
            ]
    except ValidationError as e:
        raise typer.BadParameter(str(e)) from e
    except MyoselectError as e:
        raise _fail(e) from e
    try:
        dirty = inject_signalset(signalset, plans)
        save_signalset(dirty, out)
        save_plans(plans, Path(out) / PLANS_FILE)
    except MyoselectError as e:
        raise _fail(e) from e
    typer.echo(f"Wrote {len(dirty)} contaminated trials and {PLANS_FILE} to {out}")


@app.command()
def features(
    signalset_dir: Annotated[Path, typer.Argument(help="Signalset directory.")],
    out: OutOption,
    no_approximation: Annotated[
        bool, typer.Option(help="Drop the approximation band (6 features per channel).")
    ] = False,
) -> None:
    """Export the wavelet feature matrix as CSV: label, then features in channel-ascending order."""
    try:
        signalset = load_signalset(signalset_dir)
        table = extract_features(signalset, FeatureConfig(include_approximation=not no_approximation))
    except MyoselectError as e:
        raise _fail(e) from e
    frame = pd.DataFrame(table.full(), columns=table.column_names())
    frame.insert(0, "label", table.labels)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    typer.echo(f"Wrote {len(frame)} rows x {frame.shape[1]} columns to {out}")


@app.command()
def evaluate(
    signalset_dir: Annotated[Path, typer.Argument(help="Clean signalset directory.")],
    out: OutOption,
    k: Annotated[
        list[str] | None, typer.Option("--k", help="K spec such as 7 or 2,3,5 (joint); repeatable.")
    ] = None,
    k_grid: Annotated[str | None, typer.Option(help="Named K grid; 'full' for 1..7 plus four joint specs.")] = None,
    snr: Annotated[str, typer.Option(help="Comma-separated SNR levels in dB.")] = DEFAULT_SNR,
    methods: Annotated[str, typer.Option(help="Comma-separated methods among B,EC,Or,Fu,DO,DO7.")] = DEFAULT_METHODS,
    folds: Annotated[int, typer.Option(help="Cross-validation folds.")] = 10,
    repeats: Annotated[int | None, typer.Option(help="Repetitions of the cross-validation.")] = None,
    full_scale: Annotated[bool, typer.Option(help="Repeat the cross-validation 4 times.")] = False,
    trees: Annotated[int, typer.Option(help="Trees per forest.")] = DEFAULT_TREES,
    alpha: Annotated[float, typer.Option(help="Significance level of the Holm-corrected tests.")] = 0.05,
    jobs: Annotated[int | None, typer.Option(help="Parallel cells (falls back to MYOSELECT_JOBS).")] = None,
    progress: Annotated[bool, typer.Option(help="Show a progress bar.")] = True,
    seed: SeedOption = None,
) -> None:
    """Run the repeated cross-validation experiment and write the report directory."""
    if k_grid is not None and k_grid != "full":
        raise typer.BadParameter(f"unknown grid {k_grid!r}; only 'full' is defined", param_hint="--k-grid")
    try:
        k_specs = ExperimentConfig.k_grid_full() if k_grid == "full" else ()
        k_specs += tuple(parse_k_spec(text) for text in k or [])
        method_list = methods_from_names([m for m in methods.split(",") if m.strip()])
    except (MyoselectError, ValueError) as e:
        raise typer.BadParameter(str(e)) from e
    overrides = {
        "folds": folds,
        "snr_levels": _split_floats(snr, "--snr"),
        "methods": method_list,
        "master_seed": resolve_seed(seed),
        "alpha": alpha,
    }
    if k_specs:
        overrides["k_specs"] = k_specs
    if repeats is not None:
        overrides["repeats"] = repeats
    try:
        overrides["forest"] = ForestConfig(trees=trees)
        overrides["ecoc"] = EcocConfig(trees=trees)
        config = ExperimentConfig.full(**overrides) if full_scale else ExperimentConfig.desk(**overrides)
    except ValidationError as e:
        raise typer.BadParameter(str(e)) from e

    try:
        signalset = load_signalset(signalset_dir)
        results = run_experiment(signalset, config, jobs=jobs if jobs is not None else settings.jobs, progress=progress)
        emit_report(results, out)
    except MyoselectError as e:
        raise _fail(e) from e
    try:
        results.check_invariants()
    except InvariantViolation as e:
        logger.error(str(e))
        typer.echo(f"{e}; see {Path(out) / 'invariants.csv'}", err=True)
        raise typer.Exit(1) from e
    typer.echo(f"Report written to {out}")


@app.command()
def report(
    run_dir: Annotated[Path, typer.Argument(help="Report directory holding bac_raw.csv.")],
    out: Annotated[Path | None, typer.Option("--out", "-o", help="Output directory; defaults to the run.")] = None,
    alpha: Annotated[float | None, typer.Option(help="Significance level overriding the stored one.")] = None,
) -> None:
    """Rebuild rank tables, p-values and boxplot data from an existing run."""
    if alpha is not None and not 0.0 < alpha < 1.0:
        raise typer.BadParameter("alpha must lie in (0, 1)", param_hint="--alpha")
    target = out if out is not None else run_dir
    try:
        rebuilt = rebuild_report(run_dir, alpha)
        target.mkdir(parents=True, exist_ok=True)
        written = write_analysis(rebuilt, target)
    except (MyoselectError, OSError) as e:
        raise _fail(e) from e
    typer.echo(f"Wrote {len(written)} files to {target}")


if __name__ == "__main__":
    app()
