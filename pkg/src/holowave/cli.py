"""Command line: ``holowave run | render | validate``.

Exit codes: 0 every declared check passed, 1 some check failed, 2 the
configuration did not parse or validate, 3 a module raised an error.
"""

from __future__ import annotations

from pathlib import Path

import click

from .config import load_config, output_directory
from .errors import ConfigParse, HolowaveError, MissingReport, ValidationFailed
from .harness import EXIT_CONFIG, EXIT_MODULE, run_suites, write_error_summary
from .render import report_render


@click.group()
def main():
    """Singular Klein-Gordon solver and estimate-verification harness."""


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--output", "-o", default=None, help="Artifact directory (overrides the config).")
def run(config, output):
    """Run the suites declared in CONFIG."""
    fallback = Path(output) if output else Path("holowave_out")
    try:
        cfg = load_config(config)
    except (ConfigParse, ValidationFailed) as exc:
        write_error_summary(fallback, str(config), exc, EXIT_CONFIG)
        click.echo(f"{exc.code} {type(exc).__name__}: {exc}", err=True)
        raise SystemExit(EXIT_CONFIG)
    out = output_directory(cfg, output)
    try:
        code = run_suites(cfg, out)
    except HolowaveError as exc:
        code = write_error_summary(out, str(config), exc, EXIT_MODULE)
    click.echo(f"artifacts in {out} (exit {code})")
    raise SystemExit(code)


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
def validate(config):
    """Parse and validate CONFIG without running anything."""
    try:
        cfg = load_config(config)
    except (ConfigParse, ValidationFailed) as exc:
        click.echo(f"{exc.code} {type(exc).__name__}: {exc}", err=True)
        for key, val in sorted(exc.details.items()):
            click.echo(f"  {key} = {val}", err=True)
        raise SystemExit(EXIT_CONFIG)
    click.echo(f"ok: alpha = {cfg.params().alpha:.17g}, suites = {', '.join(cfg.suites)}")


@main.command()
@click.argument("directory", type=click.Path(file_okay=False))
def render(directory):
    """Render the CSV reports in DIRECTORY to SVG."""
    try:
        written = report_render(directory)
    except MissingReport as exc:
        click.echo(f"{exc.code} MissingReport: {exc}", err=True)
        raise SystemExit(EXIT_MODULE)
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
