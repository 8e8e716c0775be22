"""
Monte Carlo evidence for uniqueness in law.

Laplace functionals u(x) = ∫_0^∞ e^{-λs} E f(X(s)) ds are estimated from
Galerkin ensembles and compared across discretizations with a Bonferroni
corrected two-sample z-test. Closed-form Ornstein–Uhlenbeck laws serve as
oracles for the linear equation.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from .galerkin import InitialSpec, Scenario, iterate
from .kolmogorov import ProjectedProblem, solve_mild
from .noise import NoiseSpec, gains
from .observables import Observable, comparison_catalog
from .spectral import Spectrum
from .utils import StatisticalRejection


@dataclass(frozen=True)
class LaplaceEstimate:
    """
    Monte Carlo estimate of ∫_0^T e^{-λs} E f(X(s)) ds.

    Attributes:
        observable: Name of f
        value: Path average
        standard_error: Path-level standard error
        paths: Number of paths
        horizon: Truncation time T
        tail_bound: e^{-λT} sup|f| / λ, bound for the omitted ∫_T^∞
    """

    observable: str
    value: float
    standard_error: float
    paths: int
    horizon: float
    tail_bound: float


def horizon_for(lam: float, sup_f: float, target_se: float) -> float:
    """
    Horizon T = ln(sup|f|·10³ / (λ·SE)) / λ, putting the tail far below the Monte Carlo error.

    Raises:
        ValueError: If λ, sup|f| or the target are not positive
    """
    if lam <= 0 or sup_f <= 0 or target_se <= 0:
        raise ValueError(f"Invalid horizon inputs: lam={lam}, sup_f={sup_f}, target_se={target_se}")
    return max(math.log(sup_f * 1e3 / (lam * target_se)), 1.0) / lam


def _trapezoid_weights(lam: float, h: float) -> Tuple[float, float]:
    """Exact ∫ e^{-λs} against the linear interpolant on [0, h]: (left, right) weights."""
    z = lam * h
    left = (z + math.expm1(-z)) / (lam * z)
    right = (-math.expm1(-z) - z * math.exp(-z)) / (lam * z)
    return left, right


def laplace_functionals(
    scenario: Scenario,
    observables: Sequence[Observable],
    lam: float,
    paths: Optional[int] = None,
    horizon: Optional[float] = None,
    h: Optional[float] = None,
    seed: Optional[int] = None,
) -> Dict[str, LaplaceEstimate]:
    """
    Estimate the Laplace functional of every observable in one ensemble pass.

    The time integral uses the trapezoid rule with exact exponential
    weights, so f ≡ 1 is integrated exactly.

    Args:
        scenario: Galerkin problem
        observables: Bounded observables
        lam: λ > 0
        paths: Ensemble size (defaults to the scenario's)
        horizon: Truncation T (defaults to `horizon_for` at the Monte Carlo scale)
        h: Step size (defaults to the scenario's)
        seed: Base seed (defaults to the scenario's)

    Returns:
        Mapping from observable name to LaplaceEstimate

    Raises:
        ValueError: If λ ≤ 0
        BlowUpError: If a path blows up
    """
    if lam <= 0:
        raise ValueError(f"Invalid lambda: {lam} (must be positive)")
    paths = scenario.paths if paths is None else paths
    h = scenario.step if h is None else h
    sup_f = max(f.sup for f in observables)
    if horizon is None:
        horizon = horizon_for(lam, sup_f, sup_f / (lam * math.sqrt(paths)))
    horizon = h * math.ceil(horizon / h - 1e-9)
    left, right = _trapezoid_weights(lam, h)
    eigenvalues = scenario.spectrum.eigenvalues

    totals = {f.name: np.zeros(paths) for f in observables}
    previous = None
    for m, t, state in iterate(scenario, seed=seed, paths=paths, horizon=horizon, h=h):
        current = {f.name: f(state, eigenvalues=eigenvalues) for f in observables}
        if previous is not None:
            scale = math.exp(-lam * (t - h))
            for name in totals:
                totals[name] += scale * (left * previous[name] + right * current[name])
        previous = current

    result = {}
    for f in observables:
        values = totals[f.name]
        se = float(values.std(ddof=1) / math.sqrt(paths)) if paths > 1 else math.inf
        result[f.name] = LaplaceEstimate(
            observable=f.name,
            value=float(values.mean()),
            standard_error=se,
            paths=paths,
            horizon=horizon,
            tail_bound=math.exp(-lam * horizon) * f.sup / lam,
        )
    logging.info(f"Estimated {len(result)} Laplace functional(s) with {paths} paths, T={horizon:.4g}")
    return result


def laplace_functional(scenario: Scenario, f: Observable, lam: float, **kwargs) -> LaplaceEstimate:
    """Laplace functional of a single observable."""
    return laplace_functionals(scenario, [f], lam, **kwargs)[f.name]


@dataclass(frozen=True)
class ObservableComparison:
    """Per-observable row of a ComparisonReport."""

    observable: str
    est_a: float
    se_a: float
    est_b: float
    se_b: float
    z: float
    passed: bool


@dataclass
class ComparisonReport:
    """
    Two-sample comparison of Laplace functionals.

    Attributes:
        rows: One entry per observable
        threshold: Bonferroni-corrected two-sided z threshold
        level: Family-wise level
        settings_a: Discretization of configuration A (n, h, seed, paths)
        settings_b: Discretization of configuration B
    """

    rows: List[ObservableComparison]
    threshold: float
    level: float
    settings_a: Dict[str, float] = field(default_factory=dict)
    settings_b: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def max_abs_z(self) -> float:
        return max(abs(row.z) for row in self.rows)

    @property
    def worst_observable(self) -> str:
        return max(self.rows, key=lambda row: abs(row.z)).observable

    def csv_rows(self) -> List[Dict[str, object]]:
        return [dataclasses.asdict(row) | {"pass": row.passed} for row in self.rows]


REPORT_FIELDS = ["observable", "est_a", "se_a", "est_b", "se_b", "z", "pass"]


def _z_score(a: LaplaceEstimate, b: LaplaceEstimate) -> float:
    diff = a.value - b.value
    if diff == 0:
        return 0.0
    spread = math.sqrt(a.standard_error**2 + b.standard_error**2)
    return diff / spread if spread > 0 else math.copysign(math.inf, diff)


def _settings(scenario: Scenario, paths: int) -> Dict[str, float]:
    return {"n": scenario.spectrum.cutoff, "h": scenario.step, "seed": scenario.seed, "paths": paths}


def compare_laws(
    a: Scenario,
    b: Scenario,
    observables: Optional[Sequence[Observable]] = None,
    lam: float = 1.0,
    paths: Optional[int] = None,
    level: float = 0.01,
    horizon: Optional[float] = None,
    raise_on_reject: bool = False,
) -> ComparisonReport:
    """
    Test equality of the laws of two discretizations of one equation.

    Each scenario runs on its own seed. Every observable gets a two-sample
    z-test; the threshold is Bonferroni-corrected over the catalog.

    Args:
        a: Configuration A
        b: Configuration B (may differ in n, h and seed only)
        observables: Catalog (defaults to the eight comparison observables)
        lam: λ of the Laplace functional
        paths: Paths per configuration (defaults to each scenario's)
        level: Family-wise level
        horizon: Common truncation T
        raise_on_reject: Raise StatisticalRejection instead of returning a failing report

    Returns:
        ComparisonReport

    Raises:
        ValueError: If the scenarios differ in the continuous equation or level is not in (0, 1)
        StatisticalRejection: If requested and equality is rejected
    """
    if a.continuous_key() != b.continuous_key():
        raise ValueError("Invalid comparison: scenarios differ in continuous-equation parameters")
    if not 0 < level < 1:
        raise ValueError(f"Invalid level: {level} (must lie in (0, 1))")
    if observables is None:
        observables = comparison_catalog()
    paths_a = a.paths if paths is None else paths
    paths_b = b.paths if paths is None else paths
    if horizon is None:
        sup_f = max(f.sup for f in observables)
        horizon = horizon_for(lam, sup_f, sup_f / (lam * math.sqrt(min(paths_a, paths_b))))
    est_a = laplace_functionals(a, observables, lam, paths=paths_a, horizon=horizon)
    est_b = laplace_functionals(b, observables, lam, paths=paths_b, horizon=horizon)

    threshold = float(stats.norm.ppf(1.0 - level / (2.0 * len(observables))))
    rows = []
    for f in observables:
        ea, eb = est_a[f.name], est_b[f.name]
        z = _z_score(ea, eb)
        rows.append(
            ObservableComparison(
                observable=f.name,
                est_a=ea.value,
                se_a=ea.standard_error,
                est_b=eb.value,
                se_b=eb.standard_error,
                z=z,
                passed=abs(z) < threshold,
            )
        )
    report = ComparisonReport(
        rows=rows,
        threshold=threshold,
        level=level,
        settings_a=_settings(a, paths_a),
        settings_b=_settings(b, paths_b),
    )
    logging.info(f"Comparison {'passed' if report.passed else 'rejected'}: max |z| = {report.max_abs_z:.3f} (threshold {threshold:.3f})")
    if raise_on_reject and not report.passed:
        raise StatisticalRejection(report)
    return report


@dataclass(frozen=True)
class CalibrationReport:
    """Outcome of repeated null comparisons on disjoint seed blocks."""

    trials: int
    passes: int
    max_abs_z: Tuple[float, ...]

    @property
    def pass_fraction(self) -> float:
        return self.passes / self.trials


def null_calibration(
    scenario: Scenario,
    observables: Optional[Sequence[Observable]] = None,
    lam: float = 1.0,
    paths: Optional[int] = None,
    trials: int = 100,
    level: float = 0.01,
    base_seed: Optional[int] = None,
) -> CalibrationReport:
    """
    Run `compare_laws` on one configuration against itself with disjoint seeds.

    Trial i compares seeds base + 2i and base + 2i + 1.
    """
    if trials < 1:
        raise ValueError(f"Invalid trials: {trials} (must be at least 1)")
    base = scenario.seed if base_seed is None else base_seed
    passes = 0
    extremes = []
    for i in range(trials):
        a = scenario.with_run(seed=base + 2 * i)
        b = scenario.with_run(seed=base + 2 * i + 1)
        report = compare_laws(a, b, observables, lam, paths, level)
        passes += int(report.passed)
        extremes.append(report.max_abs_z)
    logging.info(f"Null calibration: {passes}/{trials} comparisons passed at level {level}")
    return CalibrationReport(trials=trials, passes=passes, max_abs_z=tuple(extremes))


def exact_linear_law(spectrum: Spectrum, noise: NoiseSpec, x: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-mode mean and variance of the linear equation (B = 0) at time t.

    mean_k = e^{-tλ_k} x_k, var_k = g_k² (1 - e^{-2tλ_k}) / (2λ_k); t = inf gives Q_∞.

    Raises:
        ValueError: If t is negative
    """
    if t < 0:
        raise ValueError(f"Invalid time: t must be nonnegative, got {t}")
    x = np.asarray(x, dtype=float)
    lam = spectrum.eigenvalues
    g2 = gains(spectrum, noise) ** 2
    if math.isinf(t):
        return np.zeros_like(x), g2 / (2.0 * lam)
    return np.exp(-t * lam) * x, g2 * -np.expm1(-2.0 * t * lam) / (2.0 * lam)


def exact_laplace_cosine(
    spectrum: Spectrum,
    noise: NoiseSpec,
    x: np.ndarray,
    lam: float,
    weights: Sequence[float] = (1.0,),
    horizon: float = math.inf,
) -> float:
    """
    Closed form of ∫_0^T e^{-λt} E cos(ℓ(X(t))) dt for B = 0 and ℓ(x) = Σ w_k x_k.

    E cos(ℓ(X(t))) = exp(-½ Σ w_k² q_k(t)) cos(Σ w_k e^{-tλ_k} x_k).
    """
    given = np.asarray(weights, dtype=float)[: spectrum.cutoff]
    w = np.zeros(spectrum.cutoff)
    w[: len(given)] = given
    x = np.asarray(x, dtype=float)

    def integrand(t: float) -> float:
        mean, var = exact_linear_law(spectrum, noise, x, t)
        return math.exp(-lam * t - 0.5 * float(np.sum(w**2 * var))) * math.cos(float(np.sum(w * mean)))

    return float(integrate.quad(integrand, 0.0, horizon, limit=200, epsabs=1e-12)[0])


@dataclass
class CrossCheckReport:
    """
    Kolmogorov solution against the Monte Carlo Laplace functional.

    Attributes:
        points: Test points, shape (m, K)
        pde: u(x) from the mild fixed point
        mc: Monte Carlo estimates
        standard_errors: Their standard errors
        tolerance: PDE tolerance
    """

    points: np.ndarray
    pde: np.ndarray
    mc: np.ndarray
    standard_errors: np.ndarray
    tolerance: float

    @property
    def discrepancy(self) -> np.ndarray:
        return np.abs(self.pde - self.mc)

    @property
    def agree(self) -> bool:
        return bool(np.all(self.discrepancy <= 3.0 * (self.standard_errors + self.tolerance)))


def kolmogorov_cross_check(
    scenario: Scenario,
    observable: Observable,
    lam: float,
    m: int = 1,
    points: Optional[np.ndarray] = None,
    paths: Optional[int] = None,
    tol: float = 1e-3,
    h: Optional[float] = None,
    solve_options: Optional[dict] = None,
) -> CrossCheckReport:
    """
    Compare the two sides of u(x) = ∫_0^∞ e^{-λs} E f(X^x(s)) ds on m modes.

    Args:
        scenario: Galerkin problem with a bounded (or zero) drift
        observable: f
        lam: λ
        m: Projection dimension, at most 3
        points: Starting points (m, K); defaults to five points on the first axis
        paths: Paths per starting point
        tol: PDE tolerance
        h: Simulation step
        solve_options: Extra keyword arguments for `solve_mild`

    Returns:
        CrossCheckReport

    Raises:
        ValueError: If m > 3 or the drift is unbounded
    """
    if not 1 <= m <= 3:
        raise ValueError(f"Invalid projection: m={m} (must be 1, 2 or 3)")
    projected = scenario.with_cutoff(m)
    if not projected.drift.is_zero and projected.drift.bound() is None:
        raise ValueError("Invalid scenario: the cross-check needs a bounded drift")
    problem = ProjectedProblem.from_scenario(scenario, m, observable, lam)
    solution = solve_mild(problem, tol=tol, **(solve_options or {}))
    if points is None:
        R = problem.radius() / 3.0
        points = np.zeros((m, 5))
        points[0] = np.linspace(-R, R, 5)
    points = np.asarray(points, dtype=float)

    mc, se = [], []
    for x in points.T:
        start = projected.with_run(initial=InitialSpec(preset=None, coefficients=tuple(x)))
        estimate = laplace_functional(start, observable, lam, paths=paths, h=h)
        mc.append(estimate.value)
        se.append(estimate.standard_error)
    report = CrossCheckReport(
        points=points,
        pde=np.atleast_1d(solution(points)),
        mc=np.asarray(mc),
        standard_errors=np.asarray(se),
        tolerance=tol,
    )
    logging.info(f"Cross-check max discrepancy {float(report.discrepancy.max()):.3e} ({'agree' if report.agree else 'disagree'})")
    return report
