"""Command-line front end: run, sweep, verify-chart, report."""
import json
import sys
from pathlib import Path

import click

from .config import ConfigError, load_scenario
from .initial_data import NotSupportedError
from .string_geometry import CuspError
from .tubular_chart import ChartError
from .wave_solver import BlowUpError

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_CONFIG = 3
EXIT_BLOWUP = 4


def _print_checks(report):
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        value = "nan" if c.value is None else f"{c.value:.6g}"
        click.echo(f"{status}  {c.name:<48} {value:>14}  (threshold {c.threshold})")


def _guard(fn):
    """Map pipeline failures onto the documented exit codes."""
    try:
        return fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (ChartError, CuspError, NotSupportedError) as exc:
        click.echo(f"{type(exc).__module__.split('.')[-1]}: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except BlowUpError as exc:
        click.echo(f"wave_solver: {exc}", err=True)
        sys.exit(EXIT_BLOWUP)


def _load(config):
    return _guard(lambda: load_scenario(config))


@click.group()
def main():
    """Defect concentration experiments for u_tt - lap u + eps^-2 f(u) = 0."""


@main.command()
@click.option("--config", "config", required=True, type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def run(config, out, threads, seed):
    """Run a scenario and write its report and artifacts."""
    from .pipeline import run_scenario
    scenario = _load(config)
    report = _guard(lambda: run_scenario(scenario, out, threads, seed))
    _print_checks(report)
    click.echo(f"report: {Path(out or scenario.output) / 'report.json'}")
    sys.exit(EXIT_OK if report.passed else EXIT_FAIL)


@main.command()
@click.option("--config", "config", required=True, type=click.Path(dir_okay=False))
@click.option("--param", "parameter", type=click.Choice(["eps", "h"]), default="eps",
              show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def sweep(config, parameter, out, threads, seed):
    """Convergence sweep over eps or h with a least-squares log-log slope."""
    from .pipeline import sweep as do_sweep
    scenario = _load(config)

    def go():
        try:
            return do_sweep(scenario, parameter, out, threads, seed)
        except ValueError as exc:
            raise ConfigError(str(exc), path=config) from None

    report, slope = _guard(go)
    _print_checks(report)
    click.echo(f"slope: {slope:.4f}")
    sys.exit(EXIT_OK if report.passed else EXIT_FAIL)


@main.command("verify-chart")
@click.option("--config", "config", required=True, type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=4000, show_default=True)
def verify_chart(config, out, threads, seed, samples):
    """Check the metric inequalities and minimality of the scenario's chart."""
    from .pipeline import verify_chart as do_verify
    scenario = _load(config)

    def go():
        try:
            return do_verify(scenario, out, seed, samples)
        except ValueError as exc:
            raise ConfigError(str(exc), path=config) from None

    report = _guard(go)
    _print_checks(report)
    sys.exit(EXIT_OK if report.passed else EXIT_FAIL)


@main.command()
@click.option("--out", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
              help="Also confirm the report belongs to this configuration.")
@click.option("--threads", type=int, default=1, hidden=True)
@click.option("--seed", type=int, default=None, hidden=True)
def report(out, config, threads, seed):
    """Summarize a finished run directory and re-check its manifest hashes."""
    from .pipeline import verify_manifest
    out = Path(out)
    names = [n for n in ("report.json", "sweep.json", "chart_report.json") if (out / n).exists()]
    if not names or not (out / "manifest.json").exists():
        click.echo(f"config error: {out} holds no run report", err=True)
        sys.exit(EXIT_CONFIG)
    body = json.loads((out / names[0]).read_text())
    if config is not None:
        scenario = _load(config)
        if scenario.content_hash() != body["config_hash"]:
            click.echo("config error: report was produced by a different configuration", err=True)
            sys.exit(EXIT_CONFIG)
    stale = verify_manifest(out)
    for c in body["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        value = "nan" if c["value"] is None else f"{c['value']:.6g}"
        click.echo(f"{status}  {c['name']:<48} {value:>14}  (threshold {c['threshold']})")
    for name in stale:
        click.echo(f"FAIL  manifest hash mismatch: {name}")
    passed = body["passed"] and not stale
    click.echo(f"{body['scenario']}: {'PASS' if passed else 'FAIL'}")
    sys.exit(EXIT_OK if passed else EXIT_FAIL)


if __name__ == "__main__":
    main()
