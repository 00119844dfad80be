import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import click

DEFAULT_LOGS_DIRECTORY = Path("runs") / "log"


def setup_logger(logs_directory: Path) -> None:
    from fla_slt.common.logger import LoggerFactory

    if not LoggerFactory.is_instantiated():
        LoggerFactory(logs_directory, "FlaSlt", development_mode=False)


def peek_logs_directory(config_path: Optional[Path], out: Optional[Path]) -> Path:
    """Log location before the config is validated: ``<out>/log``, the file's ``logs_directory`` or the default."""
    if out is not None:
        return Path(out) / "log"
    if config_path is not None:
        try:
            with open(config_path, "r") as jf:
                return Path(json.load(jf).get("logs_directory", DEFAULT_LOGS_DIRECTORY))
        except (OSError, ValueError, AttributeError):
            # reported by the validation that follows
            pass
    return DEFAULT_LOGS_DIRECTORY


def setup_experiment(options: Dict[str, Any]) -> Any:
    from fla_slt.common.system import System
    from fla_slt.experiment.experiment_config import ExperimentConfig

    System.configure_threads()
    overrides: Dict[str, Any] = {"seed": options["seed"]}
    if options["out"] is not None:
        overrides["output_directory"] = str(options["out"])
        overrides["logs_directory"] = str(Path(options["out"]) / "log")
    return ExperimentConfig.load(options["config"], overrides)


def run_command(command: Callable[[], Any]) -> Any:
    from fla_slt.common.constants import ExitCodes
    from fla_slt.common.exceptions import (
        AblationError,
        CheckpointError,
        ConfigValidationError,
        CorpusError,
        DivergenceError,
        FeatureTapError,
        FreezeViolationError,
    )
    from fla_slt.common.logger import LoggerFactory

    log = LoggerFactory.get_logger(__name__)
    try:
        return command()
    except (ConfigValidationError, AblationError, FeatureTapError) as e:
        log.error(f"{ExitCodes.config_error.description}: {e}")
        sys.exit(ExitCodes.config_error.code)
    except DivergenceError as e:
        log.error(f"{ExitCodes.divergence.description} at step {e.step}: {e}")
        sys.exit(ExitCodes.divergence.code)
    except FreezeViolationError as e:
        log.error(f"{ExitCodes.divergence.description}: {e}")
        sys.exit(ExitCodes.divergence.code)
    except (CheckpointError, CorpusError, OSError) as e:
        log.error(f"{ExitCodes.io_error.description}: {e}")
        sys.exit(ExitCodes.io_error.code)


def experiment_options(function: Callable) -> Callable:
    function = click.option("--force", is_flag=True, help="Accept checkpoints written under another config hash")(
        function
    )
    function = click.option("--out", type=click.Path(path_type=Path), help="Output directory")(function)
    function = click.option("--seed", type=int, help="Master seed")(function)
    function = click.option(
        "--config",
        "config",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="Experiment JSON file, defaults to the packaged experiment.json",
    )(function)
    return function


def resume_option(function: Callable) -> Callable:
    return click.option(
        "--resume", type=click.Path(exists=True, file_okay=False, path_type=Path), help="Checkpoint to resume from"
    )(function)


@click.group()
def main() -> None:
    """Factorized gloss-free sign language translation"""


def _prepare(options: Dict[str, Any]) -> Any:
    setup_logger(peek_logs_directory(options["config"], options["out"]))
    return run_command(lambda: setup_experiment(options))


@main.command("gen-data")
@experiment_options
@click.option("--workers", type=int, default=1, show_default=True, help="Processes rendering videos")
def gen_data(workers: int, **options: Any) -> None:
    """Render the synthetic sign corpus and its vocabulary"""
    experiment = _prepare(options)
    from fla_slt.experiment.commands import cmd_gen_data

    directory = run_command(lambda: cmd_gen_data(experiment, workers))
    click.echo(str(directory))


@main.command("stage1")
@experiment_options
@resume_option
def stage1(resume: Optional[Path], **options: Any) -> None:
    """Visual initialing: visual encoder and Light-T trained together"""
    experiment = _prepare(options)
    from fla_slt.experiment.commands import cmd_stage1

    result = run_command(lambda: cmd_stage1(experiment, resume, options["force"]))
    click.echo(str(result.checkpoint))


@main.command("stage2")
@experiment_options
@resume_option
@click.option("--stage1-checkpoint", type=click.Path(path_type=Path), help="Defaults to <out>/stage1/best")
@click.option("--skip-initialing", is_flag=True, help="Fine-tune on a fresh visual encoder with frozen backbone")
def stage2(resume: Optional[Path], stage1_checkpoint: Optional[Path], skip_initialing: bool, **options: Any) -> None:
    """LLM fine-tuning on top of the stage-1 visual encoder"""
    experiment = _prepare(options)
    from fla_slt.experiment.commands import cmd_stage2

    result = run_command(
        lambda: cmd_stage2(experiment, stage1_checkpoint, skip_initialing, resume, options["force"])
    )
    click.echo(str(result.checkpoint))


@main.command("e2e")
@experiment_options
@resume_option
def e2e(resume: Optional[Path], **options: Any) -> None:
    """Joint end-to-end baseline with gradient-norm tracing"""
    experiment = _prepare(options)
    from fla_slt.experiment.commands import cmd_e2e

    result = run_command(lambda: cmd_e2e(experiment, resume, options["force"]))
    click.echo(str(result.checkpoint))


@main.command("eval")
@experiment_options
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--split", type=click.Choice(["train", "dev", "test"]), help="Defaults to evaluation.split")
def evaluate(checkpoint: Path, split: Optional[str], **options: Any) -> None:
    """Beam-search translation of a split, scored with BLEU-1..4 and ROUGE-L"""
    experiment = _prepare(options)
    from fla_slt.experiment.commands import cmd_eval

    report = run_command(lambda: cmd_eval(experiment, checkpoint, split, options["force"]))
    click.echo(json.dumps(report.metrics(), sort_keys=True))


@main.command("diagnose")
@experiment_options
@click.option("--trace", "trace_path", type=click.Path(path_type=Path), help="Defaults to <out>/e2e/trace.csv")
def diagnose(trace_path: Optional[Path], **options: Any) -> None:
    """Gradient dominance report and norm plot of a traced joint run"""
    experiment = _prepare(options)
    from fla_slt.common.constants import TRACE_FILE_NAME
    from fla_slt.experiment.commands import cmd_diagnose

    settings = experiment.config.diagnostics
    trace_path = trace_path or experiment.output_directory / "e2e" / TRACE_FILE_NAME
    report = run_command(
        lambda: cmd_diagnose(
            trace_path,
            experiment.output_directory / "diagnostics",
            settings.encoder_layer,
            settings.backend_layer,
            settings.get("smoothing"),
        )
    )
    click.echo(json.dumps(report.to_dict(), sort_keys=True))


@main.command("ablate")
@experiment_options
@click.option("--axis", help="Defaults to ablation.axis")
@click.option("--parallel", type=int, help="Settings run at once in separate processes, defaults to ablation.workers")
def ablate(axis: Optional[str], parallel: Optional[int], **options: Any) -> None:
    """One stage-2 model per setting of an ablation axis, summarized in summary.csv"""
    experiment = _prepare(options)
    from fla_slt.experiment.ablation import run_ablation

    summary = run_command(lambda: run_ablation(experiment, axis, parallel))
    click.echo(str(summary))


if __name__ == "__main__":
    main()
