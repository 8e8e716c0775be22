"""
Command-line interface for spde-uniq-lab.
"""

import json
from pathlib import Path
from typing import Optional

import typer

from .config import OUTPUT_ENV, load_scenario
from .core import (
    apply_overrides,
    example_scenario,
    format_verdict,
    resolve_output_dir,
    run_compare,
    run_kolmogorov,
    run_simulate,
)
from .utils import (
    BlowUpError,
    InadmissibleError,
    StatisticalRejection,
    UniqLabError,
    create_error_response,
    create_success_response,
    setup_logging,
)

app = typer.Typer(help="Spectral simulation and verification toolkit for weak uniqueness of SPDEs")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_BLOWUP = 3
EXIT_REJECTED = 4


def exit_code_for(exc: Exception) -> int:
    """Process exit code of an error raised by a command."""
    if isinstance(exc, InadmissibleError):
        return EXIT_INADMISSIBLE
    if isinstance(exc, BlowUpError):
        return EXIT_BLOWUP
    if isinstance(exc, StatisticalRejection):
        return EXIT_REJECTED
    return EXIT_USAGE


def _fail(exc: Exception) -> None:
    code = exit_code_for(exc)
    typer.echo(f"Error: {exc}", err=True)
    raise typer.Exit(code)


SCENARIO_OPTION = typer.Option(..., "--scenario", "-s", help="Scenario file (JSON)")
LOG_LEVEL_OPTION = typer.Option("info", "--log-level", help="Log level")


@app.command()
def check(
    scenario: Path = SCENARIO_OPTION,
    as_json: bool = typer.Option(False, "--json", help="Print the verdict as JSON"),
    log_level: str = LOG_LEVEL_OPTION,
):
    """
    Classify a scenario and print the admissibility verdict.
    """
    setup_logging(log_level)
    try:
        file = load_scenario(scenario, allow_boundary=True)
        verdict = file.verdict()
    except (UniqLabError, ValueError) as exc:
        if as_json:
            typer.echo(json.dumps(create_error_response(str(exc), exit_code_for(exc)), indent=2))
            raise typer.Exit(exit_code_for(exc))
        _fail(exc)

    if as_json:
        payload = create_success_response(verdict.to_dict(), message=f"route {verdict.route.value}")
        typer.echo(json.dumps(payload, indent=2))
    else:
        typer.echo(format_verdict(verdict))


@app.command()
def simulate(
    scenario: Path = SCENARIO_OPTION,
    override_admissibility: bool = typer.Option(
        False, "--override-admissibility", help="Run inadmissible scenarios as exploratory"
    ),
    out: Optional[str] = typer.Option(None, "--out", envvar=OUTPUT_ENV, help="Output directory"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override run.seed"),
    paths: Optional[int] = typer.Option(None, "--paths", help="Override run.paths"),
    log_level: str = LOG_LEVEL_OPTION,
):
    """
    Simulate the Galerkin ensemble and write trajectory and summary CSVs.
    """
    setup_logging(log_level)
    try:
        file = apply_overrides(load_scenario(scenario), seed, paths)
        result = run_simulate(file, resolve_output_dir(file, out), override_admissibility)
    except (UniqLabError, ValueError) as exc:
        _fail(exc)

    if result.exploratory:
        typer.echo("Warning: exploratory run outside the admissible region", err=True)
    for name, path in result.files.items():
        typer.echo(f"{name}: {path}")


@app.command()
def kolmogorov(
    scenario: Path = SCENARIO_OPTION,
    override_admissibility: bool = typer.Option(
        False, "--override-admissibility", help="Run inadmissible scenarios as exploratory"
    ),
    out: Optional[str] = typer.Option(None, "--out", envvar=OUTPUT_ENV, help="Output directory"),
    log_level: str = LOG_LEVEL_OPTION,
):
    """
    Solve the projected Kolmogorov equation and write smoothing and solve reports.
    """
    setup_logging(log_level)
    try:
        file = load_scenario(scenario)
        result = run_kolmogorov(file, resolve_output_dir(file, out), override_admissibility)
    except (UniqLabError, ValueError) as exc:
        _fail(exc)

    details = result.details
    typer.echo(f"smoothing slope: {details['fitted_slope']:.4f} (expected {details['expected_slope']:.4f})")
    typer.echo(f"picard sweeps:   {details['sweeps']} (converged: {details['converged']})")
    for name, path in result.files.items():
        typer.echo(f"{name}: {path}")


@app.command()
def compare(
    scenario: Path = SCENARIO_OPTION,
    against: Optional[Path] = typer.Option(None, "--against", help="Second scenario (defaults to the first)"),
    override_admissibility: bool = typer.Option(
        False, "--override-admissibility", help="Run inadmissible scenarios as exploratory"
    ),
    out: Optional[str] = typer.Option(None, "--out", envvar=OUTPUT_ENV, help="Output directory"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override run.seed of both scenarios"),
    paths: Optional[int] = typer.Option(None, "--paths", help="Override run.paths of both scenarios"),
    log_level: str = LOG_LEVEL_OPTION,
):
    """
    Compare the laws of two discretizations of one equation.
    """
    setup_logging(log_level)
    try:
        file_a = apply_overrides(load_scenario(scenario), seed, paths)
        file_b = apply_overrides(load_scenario(against or scenario), seed, paths)
        result, report = run_compare(file_a, file_b, resolve_output_dir(file_a, out), override_admissibility)
    except (UniqLabError, ValueError) as exc:
        _fail(exc)

    typer.echo(f"max |z| = {report.max_abs_z:.4f} on '{report.worst_observable}' (threshold {report.threshold:.4f})")
    typer.echo(f"report: {result.files['report']}")


@app.command()
def init(
    directory: str = typer.Option("./scenarios", "--directory", help="Directory to create the example in"),
):
    """
    Write an example scenario file and a short README.
    """
    project_path = Path(directory)
    project_path.mkdir(parents=True, exist_ok=True)

    examples = {
        "heat_d1.json": json.dumps(example_scenario(), indent=2) + "\n",
        "README.md": """# Scenarios

`heat_d1.json` describes a one-dimensional heat equation with a bounded
perturbation and white noise. Try:

    spde-uniq-lab check --scenario heat_d1.json
    spde-uniq-lab simulate --scenario heat_d1.json --paths 500
    spde-uniq-lab kolmogorov --scenario heat_d1.json
    spde-uniq-lab compare --scenario heat_d1.json --paths 500

Exponents accept numbers or "p/q" strings. Outputs go to `--out`, else
$SPDE_UNIQ_LAB_OUT, else `outputs.directory`.
""",
    }

    for filename, content in examples.items():
        (project_path / filename).write_text(content, encoding="utf-8")

    typer.echo(f"Created example scenario in '{directory}'")
    for filename in examples:
        typer.echo(f"   - {filename}")


def main():
    """Main entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
