"""``wheel-lab`` command line: run the pipeline, render figures, or run one check block."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import WheelLabError
from .pipeline import BLOCKS, RunConfig, build_state, canonical_json, run_checks, run_pipeline
from .render import ALL_LAYERS, parse_layers, render


def _root(value):
    if value is None:
        return None
    return int(value) if value.lstrip("-").isdigit() else value


def _config(config, n, seed, gamma, xi, mode, root, out, checks=None) -> RunConfig:
    base = json.loads(Path(config).read_text()) if config else {}
    overrides = {"n": n, "seed": seed, "gamma": gamma, "xi": xi, "field_mode": mode, "root": _root(root), "out": out}
    base.update({k: v for k, v in overrides.items() if v is not None})
    if checks is not None:
        base["checks"] = checks
    return RunConfig.from_dict(base)


def _common(f):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON RunConfig file."),
        click.option("--n", type=int, help="Cells per side."),
        click.option("--seed", type=int),
        click.option("--gamma", type=float),
        click.option("--xi", type=float, help="LFPP exponent (default: gamma / d_gamma)."),
        click.option("--mode", type=click.Choice(["zero-boundary", "torus"])),
        click.option("--root", help="'wired-boundary', 'center' or a vertex id."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
def main():
    """Discrete geodesic trees and the space-filling loop they generate."""


@main.command()
@_common
@click.option("--out", type=click.Path(file_okay=False), default="wheel-lab-out", show_default=True)
def run(config, n, seed, gamma, xi, mode, root, out):
    """Run every enabled check and write report.json, exports and figures to OUT."""
    try:
        cfg = _config(config, n, seed, gamma, xi, mode, root, out)
        report = run_pipeline(cfg)
    except WheelLabError as exc:
        raise click.ClickException(f"[{exc.module}] {exc}") from exc
    for name, block in report.blocks.items():
        click.echo(f"{'PASS' if block['pass'] else 'FAIL'}  {name}")
    click.echo(f"report: {Path(out) / 'report.json'}")
    sys.exit(0 if report.passed else 1)


@main.command("render")
@_common
@click.option("--layers", default=",".join(ALL_LAYERS), show_default=True, help="Comma-separated layer names.")
@click.option("--out", type=click.Path(dir_okay=False), default="figure.svg", show_default=True)
def render_cmd(config, n, seed, gamma, xi, mode, root, layers, out):
    """Render the chosen layers to OUT (.svg) plus a PNG alongside."""
    try:
        chosen = parse_layers(layers)
        st = build_state(_config(config, n, seed, gamma, xi, mode, root, None))
        svg, png = render(st, chosen, out)
    except WheelLabError as exc:
        raise click.ClickException(f"[{exc.module}] {exc}") from exc
    click.echo(f"{svg}\n{png}")


@main.command()
@_common
@click.option("--only", "only", type=click.Choice(BLOCKS), multiple=True, required=True)
def check(config, n, seed, gamma, xi, mode, root, only):
    """Run selected check blocks and print them as JSON."""
    try:
        st = build_state(_config(config, n, seed, gamma, xi, mode, root, None))
        blocks, _ = run_checks(st, set(only))
    except WheelLabError as exc:
        raise click.ClickException(f"[{exc.module}] {exc}") from exc
    click.echo(canonical_json(blocks), nl=False)
    sys.exit(0 if all(b["pass"] for b in blocks.values()) else 1)


if __name__ == "__main__":
    main()
