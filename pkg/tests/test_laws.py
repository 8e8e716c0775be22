"""
Tests for Laplace functionals, law comparisons and the linear-law oracles.
"""

import math

import numpy as np
import pytest
from scipy import stats

from uniqlab.admissibility import Family
from uniqlab.drifts import DriftSpec
from uniqlab.galerkin import Scenario
from uniqlab.kolmogorov import ProjectedProblem, drift_bound, estimate_C_R, lambda0
from uniqlab.laws import (
    REPORT_FIELDS,
    compare_laws,
    exact_laplace_cosine,
    exact_linear_law,
    horizon_for,
    kolmogorov_cross_check,
    laplace_functional,
    laplace_functionals,
    null_calibration,
)
from uniqlab.noise import NoiseKind, NoiseSpec
from uniqlab.observables import ConstantOne, comparison_catalog, get_observable
from uniqlab.spectral import build_spectrum


def half_line(cutoff):
    return build_spectrum(1, lengths=[np.pi], cutoff=cutoff)


@pytest.fixture
def linear():
    return Scenario(half_line(4), NoiseSpec(), DriftSpec(), horizon=1.0, step=0.01, paths=200, seed=4)


def test_constant_observable_is_integrated_exactly(linear):
    """f ≡ 1 gives (1 - e^{-λT})/λ with zero spread."""
    estimate = laplace_functional(linear, ConstantOne(), 2.0, paths=20, horizon=1.0)
    assert estimate.horizon == pytest.approx(1.0)
    assert estimate.value == pytest.approx(-math.expm1(-2.0) / 2.0, abs=1e-12)
    assert estimate.standard_error <= 1e-12
    assert estimate.tail_bound == pytest.approx(math.exp(-2.0) / 2.0)


def test_horizon_is_aligned_to_the_grid(linear):
    """T is rounded up to a multiple of h."""
    estimate = laplace_functional(linear, ConstantOne(), 1.0, paths=2, horizon=0.255)
    assert estimate.horizon == pytest.approx(0.26)


def test_cosine_functional_matches_closed_form(linear):
    """The Monte Carlo estimate of the linear equation sits within a few SE of the exact value."""
    estimate = laplace_functional(linear, get_observable("cos-l1"), 1.0, paths=4000, horizon=6.0)
    exact = exact_laplace_cosine(linear.spectrum, linear.noise, linear.x0, 1.0, horizon=estimate.horizon)
    assert abs(estimate.value - exact) <= 4.0 * estimate.standard_error + 1e-3


def test_laplace_functionals_share_one_pass(linear):
    """Every observable of the catalog is estimated from the same ensemble."""
    estimates = laplace_functionals(linear, comparison_catalog(), 1.0, paths=50, horizon=2.0)
    assert sorted(estimates) == sorted(f.name for f in comparison_catalog())
    assert all(e.paths == 50 for e in estimates.values())
    with pytest.raises(ValueError, match="Invalid lambda"):
        laplace_functionals(linear, comparison_catalog(), 0.0)


def test_horizon_for():
    """T = ln(sup|f| 10³ / (λ SE)) / λ, at least 1/λ."""
    assert horizon_for(1.0, 1.0, 1e-2) == pytest.approx(math.log(1e5))
    assert horizon_for(2.0, 1.0, 1e3) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="Invalid horizon inputs"):
        horizon_for(0.0, 1.0, 1e-2)


def test_exact_linear_law(linear):
    """Mean e^{-tλ}x and variance q(t); t = ∞ gives the invariant law."""
    x = np.array([1.0, 0.0, 0.0, 0.0])
    mean, var = exact_linear_law(linear.spectrum, linear.noise, x, 0.5)
    lam = linear.spectrum.eigenvalues
    np.testing.assert_allclose(mean, np.exp(-0.5 * lam) * x)
    np.testing.assert_allclose(var, -np.expm1(-lam) / (2.0 * lam))
    mean, var = exact_linear_law(linear.spectrum, linear.noise, x, math.inf)
    np.testing.assert_array_equal(mean, np.zeros(4))
    np.testing.assert_allclose(var, 0.5 / lam)
    with pytest.raises(ValueError, match="Invalid time"):
        exact_linear_law(linear.spectrum, linear.noise, x, -1.0)


def test_identical_configurations_give_zero_z(linear):
    """One configuration on one seed compares equal to itself."""
    report = compare_laws(linear, linear, paths=100, horizon=2.0)
    assert report.passed
    assert report.max_abs_z == 0.0
    assert report.threshold == pytest.approx(stats.norm.ppf(1.0 - 0.01 / 16.0))
    assert report.settings_a == {"n": 4, "h": 0.01, "seed": 4, "paths": 100}


def test_decoupled_modes_agree_across_cutoffs():
    """Without drift, n = 16 and n = 64 share their first modes bitwise on one seed."""
    base = Scenario(half_line(16), NoiseSpec(), DriftSpec(), horizon=1.0, step=0.01, paths=100, seed=2)
    report = compare_laws(base, base.with_cutoff(64), horizon=2.0)
    assert report.passed
    assert report.max_abs_z == 0.0


def test_comparison_requires_the_same_equation(linear):
    """Scenarios that differ beyond n, h and seed are not comparable."""
    other = Scenario(linear.spectrum, NoiseSpec(NoiseKind.COLORED, 0.3), DriftSpec(), horizon=1.0, step=0.01)
    with pytest.raises(ValueError, match="Invalid comparison"):
        compare_laws(linear, other)
    with pytest.raises(ValueError, match="Invalid level"):
        compare_laws(linear, linear, level=1.5)


def test_report_rows(linear):
    """CSV rows carry estimates, standard errors, z and the verdict."""
    report = compare_laws(linear, linear.with_run(seed=5), paths=100, horizon=2.0)
    rows = report.csv_rows()
    assert len(rows) == 8
    assert set(REPORT_FIELDS) <= set(rows[0])
    assert report.worst_observable in {f.name for f in comparison_catalog()}


def test_kolmogorov_cross_check_linear(linear):
    """PDE and Monte Carlo agree on the Laplace functional of cos(x₁)."""
    report = kolmogorov_cross_check(linear, get_observable("cos-mode1"), 1.0, m=1, paths=2000)
    assert report.points.shape == (1, 5)
    assert report.agree


def test_cross_check_rejects_unbounded_drift():
    """The cross-check needs a bounded or zero drift and m ≤ 3."""
    spec = DriftSpec(family=Family.HEAT_POLYNOMIAL, coefficients=(0.0, 0.0, 0.0, -1.0))
    scenario = Scenario(half_line(4), NoiseSpec(), spec, horizon=1.0, step=0.01)
    with pytest.raises(ValueError, match="bounded drift"):
        kolmogorov_cross_check(scenario, ConstantOne(), 1.0)
    with pytest.raises(ValueError, match="Invalid projection"):
        kolmogorov_cross_check(scenario, ConstantOne(), 1.0, m=4)


@pytest.mark.slow
def test_kolmogorov_cross_check_clipped_cubic():
    """With a clipped cubic drift at λ = 3λ₀, PDE and Monte Carlo agree within 3(SE + tol) at five points."""
    spec = DriftSpec(coefficients=(0.0, 0.0, 0.0, -1.0), bound=1.0)
    scenario = Scenario(half_line(4), NoiseSpec(), spec, horizon=1.0, step=0.002, seed=11)
    f = get_observable("cos-mode1")
    problem = ProjectedProblem.from_scenario(scenario, 1, f, lam=1.0)
    C_R = estimate_C_R(problem)
    lam = 3.0 * lambda0(C_R, drift_bound(problem), problem.delta, problem.beta)
    report = kolmogorov_cross_check(scenario, f, lam, m=1, paths=4000, solve_options={"C_R": C_R})
    assert report.points.shape == (1, 5)
    assert np.all(report.discrepancy <= 3.0 * (report.standard_errors + report.tolerance))
    assert report.agree


@pytest.mark.slow
def test_null_calibration():
    """Disjoint seed blocks of one configuration pass in at least 95 of 100 trials."""
    scenario = Scenario(half_line(8), NoiseSpec(), DriftSpec(), horizon=1.0, step=0.01, seed=100)
    report = null_calibration(scenario, paths=500, trials=100)
    assert report.trials == 100
    assert report.pass_fraction >= 0.95


@pytest.mark.slow
def test_weak_uniqueness_evidence():
    """Heat equation with a clipped sine perturbation: (n=32, h) and (n=64, h/2) agree in law."""
    spec = DriftSpec(nonlinearity="sine", coefficients=(1.0,), bound=1.0)
    noise = NoiseSpec(NoiseKind.COLORED, 0.3)
    coarse = Scenario(build_spectrum(1, cutoff=32), noise, spec, horizon=1.0, step=1.0 / 256, seed=1)
    fine = coarse.with_cutoff(64).with_run(step=1.0 / 512, seed=2)
    report = compare_laws(coarse, fine, lam=4.0, paths=10000)
    assert report.passed
