"""Batch command-line interface.

One subcommand per pipeline stage plus ``run-all``.  Exit codes: 0 on
success, 2 for configuration errors, 3 for data errors, 4 for numerical
errors.
"""

from __future__ import annotations

import dataclasses
import sys

import click
import numpy as np

from .errors import PanelirfError
from .pipeline import (
    PipelineConfig,
    load_config,
    parse_window,
    run_all,
    run_estimate,
    run_identify,
    run_infer,
    run_simulate,
    run_symmetry,
)

_STAGES = {
    "identify": run_identify,
    "estimate": run_estimate,
    "infer": run_infer,
    "symmetry": run_symmetry,
    "simulate": run_simulate,
    "run-all": run_all,
}


def _apply_overrides(config: PipelineConfig, opts: dict) -> PipelineConfig:
    updates = {}
    if opts.get("seed") is not None:
        updates["seed"] = opts["seed"]
    if opts.get("criterion"):
        updates["criterion"] = opts["criterion"]
    if opts.get("window"):
        updates["window"] = parse_window(opts["window"])
    if opts.get("out"):
        updates["out_dir"] = opts["out"]
    if opts.get("penalty"):
        updates["penalty"] = opts["penalty"]
    if opts.get("cluster"):
        updates["cluster_by"] = opts["cluster"]
    return dataclasses.replace(config, **updates) if updates else config


def _run_stage(stage: str, config_path: str, opts: dict) -> None:
    try:
        config = _apply_overrides(load_config(config_path), opts)
        _STAGES[stage](config)
    except PanelirfError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except np.linalg.LinAlgError as exc:
        click.echo(f"numerical error: {exc}", err=True)
        sys.exit(4)
    click.echo(f"{stage}: done (outputs in {config.out_dir})")


def _stage_command(stage: str, help_text: str):
    @click.command(name=stage, help=help_text)
    @click.option("--config", "config_path", required=True, type=click.Path(), help="Pipeline config JSON.")
    @click.option("--seed", type=int, default=None, help="Override the configured seed.")
    @click.option("--criterion", type=click.Choice(["aic", "bic"]), default=None)
    @click.option("--window", type=str, default=None, help="Sample window YYYY-MM:YYYY-MM.")
    @click.option("--out", type=click.Path(), default=None, help="Output directory.")
    @click.option("--penalty", type=click.Choice(["paper", "coefficients"]), default=None)
    @click.option("--cluster", type=click.Choice(["country", "month"]), default=None)
    def command(config_path, **opts):
        _run_stage(stage, config_path, opts)

    return command


@click.group()
def main():
    """Local-projection impulse responses to identified policy shocks."""


for _stage, _help in (
    ("identify", "Estimate and identify shocks, or pass precomputed ones through."),
    ("estimate", "Lag selection, projection fits and IRF curves/figures."),
    ("infer", "Wald-test significance tables for the non-linear specifications."),
    ("symmetry", "Symmetry diagnostics and histograms of the shocks."),
    ("simulate", "Simulate the structural model and its oracle IRFs."),
    ("run-all", "identify, estimate, infer and symmetry in sequence."),
):
    main.add_command(_stage_command(_stage, _help))


if __name__ == "__main__":
    main()
