"""Command-line interface: mlf <command> --scenario <name> [options]."""

from __future__ import annotations

import os
import sys

import click

from .config import ConfigError, resolve_config
from .geometry import DomainError
from .report import RunReport, emit_outputs
from .scenarios import CANONICAL_SCENARIOS


COMMANDS = (
    "verify-lemma", "transport", "monodromy", "thimble", "morse-smale",
    "probe-incompleteness", "heegaard-export", "double-check", "scan-delta",
    "adapted-gradient", "report-all",
)

LEMMAS = ("hnu", "cnu", "h0", "slope", "pf", "surgery", "sharp", "pw")


@click.command()
@click.argument("command", type=click.Choice(COMMANDS))
@click.argument("lemma", required=False,
                type=click.Choice(LEMMAS))
@click.option("--scenario", required=False, default="",
              help=f"scenario name; canonical ones: {', '.join(CANONICAL_SCENARIOS)}")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON config file (tolerance/sample overrides)")
@click.option("--seed", type=int, default=None, help="master seed")
@click.option("--out", "out_dir", default=None,
              help="output directory (default from MLF_OUT_DIR or ./mlf-out)")
def main(command, lemma, scenario, config_path, seed, out_dir):
    """Numerical laboratory for Lefschetz fibrations built from Morse data."""
    if command == "verify-lemma":
        if lemma is None:
            click.echo("verify-lemma needs one of: " + ", ".join(LEMMAS), err=True)
            sys.exit(2)
        command = f"verify-lemma {lemma}"
    elif lemma is not None:
        click.echo(f"unexpected extra argument: {lemma}", err=True)
        sys.exit(2)

    config_text = ""
    if config_path:
        with open(config_path) as fh:
            config_text = fh.read()
    if out_dir is None:
        out_dir = os.environ.get("MLF_OUT_DIR")

    try:
        cfg = resolve_config(command, scenario, config_text, seed=seed, out_dir=out_dir)
        from .commands import run_command
        from .scenarios import build_scenario
        build_scenario(cfg.scenario)      # reject unknown scenarios upfront
    except (ConfigError, KeyError) as e:
        click.echo(f"configuration error: {e}", err=True)
        sys.exit(2)

    try:
        records, tables, svgs = run_command(cfg)
    except DomainError as e:
        click.echo(f"domain error: {e}", err=True)
        sys.exit(1)

    report = RunReport(scenario=cfg.scenario, command=cfg.command, seed=cfg.seed,
                       records=records)
    for rec in records:
        click.echo(rec.line())
    paths = emit_outputs(report, cfg.out_dir, tables=tables, svgs=svgs)
    click.echo(f"wrote {len(paths)} artifact(s) to {cfg.out_dir}")
    sys.exit(0 if report.ok() else 1)


if __name__ == "__main__":
    main()
