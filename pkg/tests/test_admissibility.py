"""
Tests for the admissibility calculus and the family tables.
"""

import json
from fractions import Fraction

import pytest

from uniqlab.admissibility import (
    Family,
    Interval,
    Route,
    ScenarioParams,
    as_fraction,
    cahn_hilliard_delta_range,
    classify,
    heat_polynomial_params,
    nondivergence_ranges,
    supercritical_gamma_range,
)


def verdict_for(family, d, **kwargs):
    return classify(ScenarioParams(family=family, d=d, **kwargs))


@pytest.mark.parametrize(
    "family, d, kwargs, admissible, route, initial",
    [
        (Family.HEAT_PERTURB, 1, {"delta": 0}, True, Route.UNBOUNDED, "H"),
        (Family.HEAT_PERTURB, 1, {"delta": 0, "drift_bounded": True}, True, Route.BOUNDED, "H"),
        (Family.HEAT_PERTURB, 3, {"delta": "3/10"}, True, Route.UNBOUNDED, "H"),
        (Family.HEAT_PERTURB, 3, {"delta": "1/10"}, False, Route.REJECTED, "H"),
        (Family.HEAT_POLYNOMIAL, 1, {"p": 3, "delta": 0}, True, Route.UNBOUNDED, "H"),
        (Family.HEAT_POLYNOMIAL, 3, {"p": 3, "delta": "3/10"}, True, Route.UNBOUNDED, "V_{1/2}"),
        (Family.HEAT_POLYNOMIAL, 3, {"p": 4, "delta": "3/10"}, False, Route.REJECTED, "V_{1}"),
        (Family.DIVERGENCE_SUB, 1, {"beta": "1/4", "delta": "1/10"}, True, Route.UNBOUNDED, "H"),
        (Family.DIVERGENCE_SUB, 3, {"beta": "3/10", "delta": "3/10"}, False, Route.REJECTED, "H"),
        (
            Family.DIVERGENCE_SUPER,
            1,
            {"beta": "1/2", "gamma": "1/10", "drift_bounded": True},
            True,
            Route.ROUGH,
            "V_{-1/5}",
        ),
        (
            Family.DIVERGENCE_SUPER,
            1,
            {"beta": "3/5", "gamma": "1/20", "drift_bounded": True},
            False,
            Route.REJECTED,
            "V_{-1/10}",
        ),
        (
            Family.DIVERGENCE_SUPER,
            1,
            {"beta": "1/2", "gamma": "1/10"},
            False,
            Route.REJECTED,
            "V_{-1/5}",
        ),
        (Family.NON_DIVERGENCE, 1, {"alpha": "1/2", "delta": "3/10"}, True, Route.LIMITING, "V_{1}"),
        (Family.NON_DIVERGENCE, 2, {"alpha": "1/4", "delta": "1/5"}, False, Route.REJECTED, "V_{1/2}"),
        (Family.BURGERS, 1, {"delta": "3/10"}, True, Route.LIMITING, "H^1_0"),
        (Family.BURGERS, 2, {"delta": "3/10"}, False, Route.REJECTED, "H^1_0"),
        (Family.CAHN_HILLIARD, 2, {"delta": "3/10"}, True, Route.LIMITING, "D(A_N)"),
        (Family.CAHN_HILLIARD, 3, {"delta": "3/10"}, False, Route.REJECTED, "D(A_N)"),
    ],
)
def test_classify_golden_cases(family, d, kwargs, admissible, route, initial):
    """Verdicts of the family tables."""
    verdict = verdict_for(family, d, **kwargs)
    assert verdict.admissible is admissible
    assert verdict.route == route
    assert verdict.initial_space == initial
    assert (verdict.failed() == []) is admissible


@pytest.mark.parametrize(
    "family, d, kwargs, message",
    [
        (Family.HEAT_PERTURB, 3, {"delta": "1/4"}, "boundary excluded: δ must exceed 1/4"),
        (Family.HEAT_PERTURB, 2, {"delta": 0}, "boundary excluded: δ must exceed 0"),
        (Family.DIVERGENCE_SUB, 1, {"beta": "1/4", "delta": "1/4"}, "boundary excluded: δ must be below 1/4"),
        (Family.CAHN_HILLIARD, 3, {"delta": "3/8"}, "boundary excluded: δ must exceed 3/8"),
    ],
)
def test_open_endpoints_are_flagged(family, d, kwargs, message):
    """Parameters on an open endpoint are rejected and flagged as boundary cases."""
    verdict = verdict_for(family, d, **kwargs)
    assert not verdict.admissible
    assert verdict.boundary_excluded
    assert verdict.boundary_message() == message


def test_boundary_is_decided_exactly():
    """δ just above ¼ is admissible in d=3; comparisons are exact rationals."""
    verdict = verdict_for(Family.HEAT_PERTURB, 3, delta="0.25000000001")
    assert verdict.admissible
    assert not verdict.boundary_excluded
    assert not verdict_for(Family.HEAT_PERTURB, 3, delta=0.1).boundary_excluded


def test_heat_perturbation_intervals():
    """δ ranges of the heat equation with a perturbation, by dimension."""
    assert str(verdict_for(Family.HEAT_PERTURB, 1).delta_interval) == "[0, 1/2)"
    assert str(verdict_for(Family.HEAT_PERTURB, 2, delta="1/10").delta_interval) == "(0, 1/2)"
    assert str(verdict_for(Family.HEAT_PERTURB, 3, delta="3/10").delta_interval) == "(1/4, 1/2)"


def test_polynomial_growth_parameters():
    """r_opt = max{2, p-1, d(p-2)} and α_opt = (d/2)(½ - 1/r_opt)."""
    params = heat_polynomial_params(3, 3)
    assert params.r_opt == 3
    assert params.alpha_opt == Fraction(1, 4)
    assert str(params.delta_interval) == "(1/4, 1/2)"
    assert params.feasible
    params = heat_polynomial_params(2, 5)
    assert params.r_opt == 6
    assert params.alpha_opt == Fraction(1, 3)
    assert not heat_polynomial_params(3, 4).feasible
    with pytest.raises(ValueError, match="Invalid growth"):
        heat_polynomial_params(1, 1)


def test_polynomial_alpha_is_reported():
    """The verdict carries the optimal α of the polynomial drift."""
    verdict = verdict_for(Family.HEAT_POLYNOMIAL, 2, p=5, delta="2/5")
    assert verdict.admissible
    assert verdict.alpha == Fraction(1, 3)
    assert verdict.initial_space == "V_{2/3}"


@pytest.mark.parametrize(
    "d, p, alpha, beta",
    [
        (1, 3, Fraction(0), Fraction(1, 4)),
        (2, 3, Fraction(0), Fraction(1, 2)),
        (3, 3, Fraction(1, 4), Fraction(1, 4)),
        (2, 5, Fraction(1, 3), Fraction(1, 6)),
        (2, 2, Fraction(0), Fraction(0)),
    ],
)
def test_polynomial_beta_is_the_dual_sobolev_order(d, p, alpha, beta):
    """β_opt = (d/2)((p-1)/r_opt - ½) and α + β = d(p-2)/(2 r_opt)."""
    params = heat_polynomial_params(d, p)
    assert params.alpha_opt == alpha
    assert params.beta_opt == beta
    assert params.alpha_opt + params.beta_opt == Fraction(d * (p - 2)) / (2 * params.r_opt)
    verdict = verdict_for(Family.HEAT_POLYNOMIAL, d, p=p, delta="3/10")
    assert verdict.beta == beta
    assert verdict.alpha == alpha
    assert verdict.diagnostics["alpha_plus_beta_le_half"]


def test_polynomial_beta_is_fixed_by_the_growth():
    """A β other than β_opt contradicts the polynomial family."""
    with pytest.raises(ValueError, match="fixes beta=1/2"):
        verdict_for(Family.HEAT_POLYNOMIAL, 2, p=3, beta=0, delta="3/10")


def test_supercritical_gamma_range():
    """γ ∈ [0, β] ∩ (β - ½, ξ - α), empty when β is too large."""
    assert str(supercritical_gamma_range(0, "1/2", "1/4")) == "(0, 1/4)"
    assert str(supercritical_gamma_range(0, "3/5", "1/4")) == "(1/10, 1/4)"
    assert str(supercritical_gamma_range(0, "1/10", "1/4")) == "[0, 1/10]"
    assert supercritical_gamma_range(0, "4/5", "1/4") is None
    with pytest.raises(ValueError, match="Invalid alpha"):
        supercritical_gamma_range("1/4", "1/2", "1/4")


def test_cahn_hilliard_range():
    """δ ∈ (d/8, ½)."""
    assert str(cahn_hilliard_delta_range(1)) == "(1/8, 1/2)"
    assert str(cahn_hilliard_delta_range(3)) == "(3/8, 1/2)"
    with pytest.raises(ValueError, match="Invalid dimension"):
        cahn_hilliard_delta_range(4)


def test_nondivergence_ranges():
    """α-dependent δ bounds are evaluated at the given α."""
    [(alpha, delta)] = nondivergence_ranges(3, False, alpha=0.1)
    assert str(alpha) == "(0, 1/4)"
    assert str(delta) == "(7/20, 1/2)"
    assert len(nondivergence_ranges(1, False)) == 2
    assert nondivergence_ranges(2, False, alpha="3/4") == []
    [(alpha, delta)] = nondivergence_ranges(2, True)
    assert str(alpha) == "(0, 1)" and str(delta) == "[0, 1/2)"


def test_limiting_case_reports_delta_prime_bound():
    """In the limiting case any δ' below δ - ¼ works."""
    verdict = verdict_for(Family.BURGERS, 1, delta="3/10")
    assert verdict.max_delta_prime == Fraction(1, 20)
    assert verdict.alpha == Fraction(1, 2)
    rejected = verdict_for(Family.BURGERS, 1, delta="3/10", delta_prime="1/10")
    assert not rejected.admissible
    assert rejected.max_delta_prime is None
    accepted = verdict_for(Family.BURGERS, 1, delta="3/10", delta_prime="1/40")
    assert accepted.admissible


def test_notes_flag_ranges_wider_than_the_calculus():
    """α = ¼ in d=1 sits outside α < ξ_max and is noted."""
    verdict = verdict_for(Family.NON_DIVERGENCE, 1, alpha="1/4")
    assert verdict.admissible
    assert verdict.diagnostics["alpha_below_xi"] is False
    assert any("alpha_below_xi" in note for note in verdict.notes)


def test_diagnostics_use_effective_dimension():
    """Cahn–Hilliard is evaluated with d_eff = d/2."""
    verdict = verdict_for(Family.CAHN_HILLIARD, 2, delta="3/10")
    assert verdict.diagnostics["effective_dimension"] == 1
    assert verdict.diagnostics["hilbert_schmidt"]
    assert verdict.notes == []


@pytest.mark.parametrize(
    "family, kwargs, message",
    [
        (Family.HEAT_PERTURB, {"gamma": "1/10"}, "gamma is only meaningful"),
        (Family.BURGERS, {"p": 3}, "p is only meaningful"),
        (Family.BURGERS, {"alpha": "1/4"}, "fixes alpha"),
        (Family.HEAT_POLYNOMIAL, {}, "requires p"),
        (Family.DIVERGENCE_SUB, {}, "requires beta"),
        (Family.DIVERGENCE_SUPER, {"beta": "1/2", "gamma": 0, "delta": "1/10"}, "delta must be 0"),
    ],
)
def test_inconsistent_parameters_raise(family, kwargs, message):
    """Family/parameter mismatches are rejected."""
    with pytest.raises(ValueError, match=message):
        verdict_for(family, 1, **kwargs)


def test_scenario_params_validation():
    """Dimension and δ are checked on construction."""
    with pytest.raises(ValueError, match="Invalid dimension"):
        ScenarioParams(family=Family.HEAT_PERTURB, d=4)
    with pytest.raises(ValueError, match="Invalid delta"):
        ScenarioParams(family=Family.HEAT_PERTURB, d=1, delta=-0.1)
    params = ScenarioParams(family="CahnHilliard", d=2, delta="3/10")
    assert params.family == Family.CAHN_HILLIARD
    assert params.power == 2


def test_interval_membership():
    """Open and closed endpoints are honored."""
    interval = Interval.closed_open(0, "1/2")
    assert interval.contains(0)
    assert not interval.contains("1/2")
    assert interval.on_open_endpoint("1/2")
    assert Interval.point(1).contains(1)
    assert Interval.open(1, 1).is_empty
    assert as_fraction(0.3) == Fraction(3, 10)


def test_verdict_serializes_to_json():
    """Verdict dictionaries are JSON-ready."""
    payload = json.loads(json.dumps(verdict_for(Family.BURGERS, 1, delta="3/10").to_dict()))
    assert payload["route"] == "unbounded-limiting"
    assert payload["delta_interval"] == "(1/4, 1/2)"
    assert payload["max_delta_prime"] == "1/20"
