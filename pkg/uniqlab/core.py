"""
Command implementations: build a Galerkin scenario from a scenario file,
decide admissibility, run it and write CSV reports with manifests.
"""

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from .admissibility import Family, Verdict
from .config import OUTPUT_ENV, ScenarioFile, serialize_scenario
from .drifts import DriftSpec
from .galerkin import InitialSpec, Scenario, simulate_ensemble, summary_rows, trajectory_rows
from .kolmogorov import ProjectedProblem, RegularizerSpec, residual_strong, solve_mild, verify_smoothing
from .laws import REPORT_FIELDS, ComparisonReport, compare_laws
from .noise import NoiseSpec
from .observables import get_observable
from .spectral import build_spectrum
from .utils import (
    InadmissibleError,
    ScenarioError,
    StatisticalRejection,
    config_digest,
    create_manifest,
    write_csv,
    write_manifest,
)

SUMMARY_FIELDS = ["t", "mean_norm", "var_norm", "p05", "p95"]
SMOOTHING_FIELDS = ["t", "norm", "fitted_slope"]
SOLVE_FIELDS = ["sweep", "factor"]


@dataclass
class RunResult:
    """
    Files written by a command.

    Attributes:
        verdict: Admissibility verdict of the scenario
        exploratory: True when the run was forced outside the admissible region
        files: Written CSV files, keyed by report name
        details: Command specific values (slopes, sweep counts, ...)
    """

    verdict: Verdict
    exploratory: bool
    files: Dict[str, Path] = field(default_factory=dict)
    details: Dict[str, object] = field(default_factory=dict)


def apply_overrides(file: ScenarioFile, seed: Optional[int] = None, paths: Optional[int] = None) -> ScenarioFile:
    """Copy of the scenario with command-line seed and path overrides applied."""
    changes = {}
    if seed is not None:
        if seed < 0:
            raise ScenarioError(f"run.seed: must be nonnegative, got {seed}")
        changes["seed"] = seed
    if paths is not None:
        if paths < 1:
            raise ScenarioError(f"run.paths: must be at least 1, got {paths}")
        changes["paths"] = paths
    if not changes:
        return file
    return file.model_copy(update={"run": file.run.model_copy(update=changes)})


def resolve_output_dir(file: ScenarioFile, out: Optional[str] = None) -> Path:
    """`--out`, else the SPDE_UNIQ_LAB_OUT environment variable, else outputs.directory."""
    if out:
        return Path(out)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return Path(file.outputs.directory)


def admit(file: ScenarioFile, override: bool = False) -> Tuple[Verdict, bool]:
    """
    Classify a scenario and decide whether it may run.

    Returns:
        (verdict, exploratory)

    Raises:
        InadmissibleError: If the scenario is inadmissible and no override was given
    """
    verdict = file.verdict()
    if verdict.admissible:
        return verdict, False
    if not override:
        raise InadmissibleError(verdict)
    logging.warning(f"Admissibility overridden; results are exploratory ({', '.join(c.name for c in verdict.failed())})")
    return verdict, True


def _coefficients(file: ScenarioFile) -> Tuple[float, ...]:
    eq = file.equation
    if eq.coefficients:
        return tuple(eq.coefficients)
    if eq.family == Family.HEAT_POLYNOMIAL:
        if eq.p is None or eq.p.denominator != 1:
            raise ScenarioError(f"equation.coefficients: required for HeatPolynomial with non-integer p={eq.p}")
        return (0.0,) * int(eq.p) + (-1.0,)
    return ()


def build_drift_spec(file: ScenarioFile, verdict: Verdict) -> DriftSpec:
    """Drift description of a scenario; α and β come from the verdict where the family leaves them free."""
    eq = file.equation
    family = eq.family
    alpha = float(verdict.alpha) if family in (Family.HEAT_POLYNOMIAL, Family.NON_DIVERGENCE) else 0.0
    beta_families = (Family.HEAT_POLYNOMIAL, Family.DIVERGENCE_SUB, Family.DIVERGENCE_SUPER)
    beta = max(float(verdict.beta), 0.0) if family in beta_families else 0.0
    bound = eq.bound
    if eq.drift_bounded and bound is None:
        bound = 1.0
    return DriftSpec(
        family=family,
        alpha=alpha,
        beta=beta,
        nonlinearity=eq.nonlinearity,
        coefficients=_coefficients(file),
        bound=bound,
        burgers_sign=eq.burgers_sign,
        gradient_weight=eq.gradient_weight,
    )


def build_scenario(file: ScenarioFile, verdict: Optional[Verdict] = None, exploratory: bool = False) -> Scenario:
    """
    Assemble the Galerkin scenario described by a scenario file.

    Args:
        file: Validated scenario file
        verdict: Its admissibility verdict (classified when None)
        exploratory: Mark the scenario as run outside the admissible region

    Returns:
        Scenario: Ready to simulate

    Raises:
        ScenarioError: If the file cannot be turned into a consistent problem
    """
    if verdict is None:
        verdict = file.verdict()
    spectral, noise, initial, run = file.spectral, file.noise, file.initial, file.run
    try:
        spectrum = build_spectrum(
            spectral.dimension,
            boundary=spectral.boundary,
            lengths=spectral.lengths,
            cutoff=spectral.cutoff,
            power=spectral.power,
        )
        scenario = Scenario(
            spectrum=spectrum,
            noise=NoiseSpec(kind=noise.kind, exponent=float(noise.exponent), hs_shift=float(noise.hs_shift)),
            drift_spec=build_drift_spec(file, verdict),
            initial=InitialSpec(
                preset=initial.preset,
                coefficients=tuple(initial.coefficients or ()),
                smoothness=initial.smoothness if initial.smoothness is not None else 1.0,
            ),
            horizon=run.horizon,
            step=run.step,
            paths=run.paths,
            seed=run.seed,
            truncation=run.truncation,
            params=file.to_params(),
            exploratory=exploratory,
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    logging.info(f"Built scenario {file.equation.family.value} d={spectrum.dimension} n={spectrum.cutoff}")
    return scenario


def _manifest(file: ScenarioFile, scenario: Scenario, verdict: Verdict, exploratory: bool, extra: Dict) -> Dict:
    digest = config_digest(serialize_scenario(file))
    return create_manifest(digest, scenario.seed, scenario.spectrum.modes, verdict, exploratory, extra)


def format_verdict(verdict: Verdict) -> str:
    """Plain-text table of a verdict, as printed by `check`."""
    lines = [
        f"route:          {verdict.route.value}",
        f"admissible:     {'yes' if verdict.admissible else 'no'}",
        f"initial space:  {verdict.initial_space}",
        f"alpha, beta:    {verdict.alpha}, {verdict.beta}",
    ]
    if verdict.delta_interval is not None:
        lines.append(f"delta range:    {verdict.delta_interval}")
    if verdict.gamma_interval is not None:
        lines.append(f"gamma range:    {verdict.gamma_interval}")
    if verdict.max_delta_prime is not None:
        lines.append(f"delta' below:   {verdict.max_delta_prime}")
    if verdict.boundary_excluded:
        lines.append(verdict.boundary_message())
    width = max([len(c.name) for c in verdict.constraints] + [10])
    lines.append("")
    lines.append(f"{'constraint'.ljust(width)}  {'evaluated':<32} holds")
    for c in verdict.constraints:
        evaluated = f"{c.lhs} {c.op} {c.rhs}"
        lines.append(f"{c.name.ljust(width)}  {evaluated:<32} {'yes' if c.holds else 'NO'}")
    for note in verdict.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines)


def run_simulate(file: ScenarioFile, out_dir: Path, override: bool = False) -> RunResult:
    """
    Simulate the scenario's ensemble and write trajectory and summary CSVs.

    Raises:
        InadmissibleError: Inadmissible scenario without override
        BlowUpError: A path blew up
    """
    verdict, exploratory = admit(file, override)
    scenario = build_scenario(file, verdict, exploratory)
    keep = min(file.outputs.write_paths, scenario.paths)
    ensemble = simulate_ensemble(scenario, keep=keep)

    out_dir = Path(out_dir)
    result = RunResult(verdict=verdict, exploratory=exploratory)
    extra = {
        "command": "simulate",
        "paths": scenario.paths,
        "horizon": scenario.horizon,
        "step": scenario.step,
        "norm_exponent": ensemble.norm_exponent,
    }
    summary = write_csv(out_dir / file.outputs.summary, SUMMARY_FIELDS, summary_rows(ensemble))
    write_manifest(summary, _manifest(file, scenario, verdict, exploratory, extra))
    result.files["summary"] = summary

    name = Path(file.outputs.trajectory)
    for index in range(keep):
        target = name if keep == 1 else name.with_name(f"{name.stem}_{index}{name.suffix}")
        header, rows = trajectory_rows(ensemble.path(index))
        path = write_csv(out_dir / target, header, rows)
        write_manifest(path, _manifest(file, scenario, verdict, exploratory, dict(extra, path_index=index)))
        result.files[f"trajectory_{index}"] = path

    if ensemble.stopping:
        finite = [r.time for r in ensemble.stopping if r.time != float("inf")]
        result.details["stopped_paths"] = len(finite)
    logging.info(f"Wrote {len(result.files)} CSV file(s) to {out_dir}")
    return result


def run_kolmogorov(file: ScenarioFile, out_dir: Path, override: bool = False) -> RunResult:
    """
    Solve the projected Kolmogorov equation and measure the smoothing rate.

    Writes `smoothing.csv` (gradient norms of R_t v against t) and
    `solve.csv` (Picard contraction factors), each with a manifest.

    Raises:
        InadmissibleError: Inadmissible scenario without override
        ValueError: If λ does not exceed the contraction threshold
        ContractionError: If the Picard iteration stops contracting
    """
    verdict, exploratory = admit(file, override)
    scenario = build_scenario(file, verdict, exploratory)
    analysis = file.analysis
    regularizer = RegularizerSpec(analysis.epsilon) if analysis.epsilon > 0 else None
    problem = ProjectedProblem.from_scenario(
        scenario,
        analysis.projection,
        get_observable(analysis.observable),
        analysis.laplace_rate,
        regularizer=regularizer,
    )

    smoothing = verify_smoothing(problem)
    solution = solve_mild(problem, tol=analysis.tolerance, max_sweeps=analysis.max_sweeps)
    residual = residual_strong(problem, solution)

    out_dir = Path(out_dir)
    result = RunResult(verdict=verdict, exploratory=exploratory)
    details = {
        "command": "kolmogorov",
        "projection": problem.m,
        "lambda": problem.lam,
        "epsilon": analysis.epsilon,
        "expected_slope": smoothing.expected_slope,
        "fitted_slope": smoothing.fitted_slope,
        "sweeps": solution.sweeps,
        "converged": solution.converged,
        "lambda0": solution.lambda0,
        "time_horizon": solution.horizon,
        "residual_sup": residual.sup,
    }
    path = write_csv(out_dir / "smoothing.csv", SMOOTHING_FIELDS, smoothing.rows())
    write_manifest(path, _manifest(file, scenario, verdict, exploratory, details))
    result.files["smoothing"] = path
    rows = [{"sweep": i + 2, "factor": f} for i, f in enumerate(solution.factors)]
    path = write_csv(out_dir / "solve.csv", SOLVE_FIELDS, rows)
    write_manifest(path, _manifest(file, scenario, verdict, exploratory, details))
    result.files["solve"] = path
    result.details = details
    return result


def run_compare(
    file_a: ScenarioFile,
    file_b: ScenarioFile,
    out_dir: Path,
    override: bool = False,
) -> Tuple[RunResult, ComparisonReport]:
    """
    Compare the laws of two discretizations and write the report CSV.

    The report is written before a rejection is raised.

    Raises:
        InadmissibleError: Inadmissible scenario without override
        ScenarioError: If the two files describe different continuous equations
        StatisticalRejection: If equality of laws is rejected
    """
    verdict, exploratory = admit(file_a, override)
    scenario_a = build_scenario(file_a, verdict, exploratory)
    scenario_b = build_scenario(file_b, file_b.verdict(), exploratory)
    analysis = file_a.analysis
    try:
        report = compare_laws(scenario_a, scenario_b, lam=analysis.laplace_rate, level=analysis.level)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    out_dir = Path(out_dir)
    result = RunResult(verdict=verdict, exploratory=exploratory)
    extra = {
        "command": "compare",
        "threshold": report.threshold,
        "level": report.level,
        "settings_a": report.settings_a,
        "settings_b": report.settings_b,
        "config_digest_b": config_digest(serialize_scenario(file_b)),
        "passed": report.passed,
    }
    path = write_csv(out_dir / file_a.outputs.report, REPORT_FIELDS, report.csv_rows())
    write_manifest(path, _manifest(file_a, scenario_a, verdict, exploratory, extra))
    result.files["report"] = path
    result.details = {"passed": report.passed, "max_abs_z": report.max_abs_z}
    if not report.passed:
        raise StatisticalRejection(report)
    return result, report


def example_scenario() -> Dict:
    """The heat-equation scenario written by `init`."""
    return {
        "equation": {"family": "HeatPerturb", "coefficients": [0.0, -0.5], "bound": 1.0},
        "spectral": {"dimension": 1, "cutoff": 16},
        "noise": {"kind": "colored", "exponent": "0"},
        "initial": {"preset": "e1"},
        "run": {"horizon": 1.0, "paths": 2000, "seed": 0},
        "analysis": {"laplace_rate": 10.0, "projection": 1},
        "outputs": {"directory": "runs"},
    }

