"""`modescatter` command line: validate and run experiment configs."""
import json
from pathlib import Path
from typing import Optional

import typer

from Tools.ExperimentTools.config import validate_config
from Tools.ExperimentTools.experiments import run_experiment
from Utilities.errors import AUDIT_FAILURE_EXIT_CODE, ModeScatterError
from Utilities.logger import configure, get_logger

logger = get_logger('cli')

app = typer.Typer(add_completion=False, no_args_is_help=True,
                  help="Quasi-periodic grating and wave guide scattering experiments.")


def _fail(exc: ModeScatterError) -> None:
    typer.echo(json.dumps(exc.as_dict(), sort_keys=True, default=str), err=True)
    raise typer.Exit(code=exc.exit_code)


@app.command()
def validate(config: Path = typer.Argument(..., help="Experiment config JSON"),
             resolution_scale: Optional[float] = typer.Option(None, "--resolution-scale", help="Grid refinement factor"),
             log_level: Optional[str] = typer.Option(None, "--log-level")):
    """Check a config and print it with every default filled in."""
    configure(log_level)
    try:
        cfg = validate_config(config, resolution_scale=resolution_scale)
    except ModeScatterError as exc:
        _fail(exc)
    typer.echo(cfg.model_dump_json(indent=2))


@app.command()
def run(config: Path = typer.Argument(..., help="Experiment config JSON"),
        out: Optional[Path] = typer.Option(None, "--out", help="Run directory (default: config output_dir)"),
        threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads (default: MODESCATTER_THREADS)"),
        resolution_scale: Optional[float] = typer.Option(None, "--resolution-scale", help="Grid refinement factor"),
        log_level: Optional[str] = typer.Option(None, "--log-level")):
    """Run an experiment; exits 3 when an audit misses its tolerance."""
    configure(log_level)
    try:
        cfg = validate_config(config, resolution_scale=resolution_scale)
        manifest = run_experiment(cfg, out=out, threads=threads)
    except ModeScatterError as exc:
        _fail(exc)
    typer.echo(json.dumps(manifest, indent=2, sort_keys=True))
    if not manifest.get("passed", True):
        logger.warning("audits failed", extra={"out": str(out or cfg.output_dir)})
        raise typer.Exit(code=AUDIT_FAILURE_EXIT_CODE)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
