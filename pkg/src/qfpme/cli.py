"""Command-line entry points for the solvers, samplers, and figure runs.

Exit codes: 0 on success, 2 on configuration/validation errors, 3 when a
solver fails to converge. Configuration precedence is file < QFPME_*
environment variables < command-line flags.
"""

from __future__ import annotations

import sys

import click

from .experiments import ConfigError, ExperimentConfig, run_experiment
from .spectral import SolverConvergenceError

_COMMON = [
    click.option("--config", "config_path", type=click.Path(exists=True),
                 default=None, help="INI-style key=value configuration file."),
    click.option("--seed", type=int, default=None, help="Master random seed."),
    click.option("--out", type=click.Path(), default=None,
                 help="Output directory for CSV/JSON artifacts."),
    click.option("--threads", type=int, default=1,
                 help="Worker threads for trajectory fan-out."),
]


def _with_common(fn):
    for option in reversed(_COMMON):
        fn = option(fn)
    return fn


def _execute(tag: str, config_path, seed, out, threads, extra=None):
    overrides = dict(extra or {})
    if seed is not None:
        overrides["master_seed"] = str(seed)
    if out is not None:
        overrides["out"] = out
    try:
        cfg = ExperimentConfig.from_file(config_path, tag, overrides)
        summary = run_experiment(cfg, threads=threads)
    except (ConfigError, ValueError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(2)
    except (SolverConvergenceError, RuntimeError) as exc:
        click.echo(f"solver error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"{tag}: wrote {', '.join(summary['diagnostics']['files'])} "
               f"in {summary['out']}")


@click.group()
def main():
    """Steady-state solvers and trajectory experiments for monitored qubits."""


@main.command()
@_with_common
@click.option("--model", default=None, help="two_level_bangbang or engine.")
def steady(config_path, seed, out, threads, model):
    """Spectral steady state and energetics."""
    _execute("steady", config_path, seed, out, threads, {"model": model})


@main.command()
@_with_common
@click.option("--model", default=None, help="two_level_bangbang or engine.")
def grid(config_path, seed, out, threads, model):
    """Finite-difference steady state and energetics."""
    _execute("grid", config_path, seed, out, threads, {"model": model})


@main.command()
@_with_common
@click.option("--model", default=None, help="two_level_bangbang or engine.")
def traj(config_path, seed, out, threads, model):
    """Sample and export a handful of trajectories."""
    _execute("traj", config_path, seed, out, threads, {"model": model})


@main.command()
@_with_common
@click.option("--model", default=None, help="two_level_bangbang or engine.")
def ft(config_path, seed, out, threads, model):
    """Fluctuation-theorem estimators at one parameter point."""
    _execute("ft", config_path, seed, out, threads, {"model": model})


@main.command()
@click.argument("tag", type=click.Choice(["fig2", "fig3", "fig4", "fig5", "fig6"]))
@_with_common
def figure(tag, config_path, seed, out, threads):
    """Regenerate the data set behind one of the bundled figures."""
    _execute(tag, config_path, seed, out, threads)


if __name__ == "__main__":
    main()
