"""
Tests for scenario file parsing and validation.
"""

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uniqlab.admissibility import Family
from uniqlab.config import ScenarioFile, load_scenario, parse_scenario, serialize_scenario
from uniqlab.noise import NoiseKind
from uniqlab.spectral import Boundary
from uniqlab.utils import ScenarioError


def scenario_text(**sections):
    data = {"equation": {"family": "HeatPerturb"}}
    data.update(sections)
    return json.dumps(data, indent=2)


def test_minimal_scenario_gets_defaults():
    """Only the equation family is required."""
    scenario = parse_scenario(scenario_text())
    assert scenario.equation.family == Family.HEAT_PERTURB
    assert scenario.spectral.dimension == 1
    assert scenario.spectral.boundary == Boundary.DIRICHLET
    assert scenario.spectral.power == 1
    assert scenario.spectral.cutoff == 16
    assert scenario.noise.kind == NoiseKind.COLORED
    assert scenario.noise.exponent == 0
    assert scenario.initial.preset == "e1"
    assert scenario.run.step == pytest.approx(1.0 / 2048)
    assert scenario.run.paths == 10000
    assert scenario.analysis.observable == "cos-mode1"
    assert scenario.outputs.directory == "runs"


@pytest.mark.parametrize("value", ["3/10", 0.3, "0.3"])
def test_exponents_are_exact_fractions(value):
    """Numbers and "p/q" strings become exact rationals."""
    scenario = parse_scenario(scenario_text(noise={"exponent": value}))
    assert scenario.noise.exponent == Fraction(3, 10)


def test_open_endpoint_is_rejected_with_message():
    """δ = 1/4 in d = 3 sits on the excluded endpoint."""
    text = scenario_text(spectral={"dimension": 3}, noise={"exponent": "1/4"})
    with pytest.raises(ScenarioError, match="boundary excluded: δ must exceed 1/4"):
        parse_scenario(text)
    scenario = parse_scenario(text, allow_boundary=True)
    assert scenario.verdict().boundary_excluded


def test_unknown_key_is_named_with_its_position():
    """Unknown keys are rejected, naming the key and its line."""
    text = '{\n  "equation": {"family": "HeatPerturb"},\n  "noise": {\n    "delta_prime_typo": 0.1\n  }\n}'
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert "noise.delta_prime_typo" in str(info.value)
    assert info.value.line == 4
    assert info.value.column == 5


def test_malformed_json_reports_line_and_column():
    """JSON syntax errors carry their position."""
    text = '{\n  "equation": {"family": "HeatPerturb",}\n}'
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == 2
    assert info.value.column is not None


def test_top_level_must_be_an_object():
    """A JSON list is not a scenario."""
    with pytest.raises(ScenarioError, match="must be a JSON object"):
        parse_scenario("[1, 2]")


def test_serialization_parses_back_to_an_equal_scenario():
    """The canonical text round-trips and keeps fractions as "p/q"."""
    scenario = parse_scenario(scenario_text(noise={"exponent": "1/3"}, run={"seed": 5}))
    text = serialize_scenario(scenario)
    assert '"exponent": "1/3"' in text
    assert parse_scenario(text) == scenario
    assert serialize_scenario(parse_scenario(text)) == text


@settings(max_examples=40, deadline=None)
@given(
    exponent=st.fractions(min_value=0, max_value=Fraction(49, 100), max_denominator=1000),
    seed=st.integers(min_value=0, max_value=2**32),
)
def test_serialization_is_exact_for_any_rational(exponent, seed):
    """Any rational exponent survives serialize then parse unchanged."""
    scenario = parse_scenario(scenario_text(noise={"exponent": str(exponent)}, run={"seed": seed}))
    again = parse_scenario(serialize_scenario(scenario))
    assert again.noise.exponent == exponent
    assert again == scenario


def test_inline_rough_tail_preset():
    """ "rough-tail 0.75" sets the preset and its smoothness."""
    scenario = parse_scenario(scenario_text(initial={"preset": "rough-tail 0.75"}))
    assert scenario.initial.preset == "rough-tail"
    assert scenario.initial.smoothness == 0.75
    assert parse_scenario(scenario_text(initial={"preset": "rough-tail"})).initial.smoothness == 1.0


@pytest.mark.parametrize(
    "initial, message",
    [
        ({"preset": "e1", "coefficients": [1.0]}, "either a preset or coefficients"),
        ({"preset": "spiky"}, "unknown preset"),
        ({"preset": "rough-tail abc"}, "invalid preset smoothness"),
        ({"preset": "rough-tail 0.5", "smoothness": 0.75}, "conflicts"),
    ],
)
def test_invalid_initial_data(initial, message):
    """Initial data are checked."""
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(scenario_text(initial=initial))


def test_cahn_hilliard_defaults():
    """Cahn–Hilliard runs on A = Δ² with Neumann conditions."""
    text = json.dumps({"equation": {"family": "CahnHilliard"}, "spectral": {"dimension": 2}, "noise": {"exponent": "3/10"}})
    scenario = parse_scenario(text)
    assert scenario.spectral.boundary == Boundary.NEUMANN
    assert scenario.spectral.power == 2
    assert scenario.verdict().admissible


@pytest.mark.parametrize(
    "sections, message",
    [
        ({"equation": {"family": "CahnHilliard"}, "spectral": {"boundary": "dirichlet"}}, "needs boundary 'neumann'"),
        ({"spectral": {"power": 2}}, "reserved for CahnHilliard"),
        ({"spectral": {"dimension": 2, "lengths": [1.0]}}, "expected 2 lengths"),
        ({"spectral": {"dimension": 4}}, "spectral.dimension"),
        ({"run": {"horizon": 0.1, "step": 0.5}}, "exceeds horizon"),
        ({"analysis": {"observable": "nope"}}, "Invalid observable"),
        ({"analysis": {"level": 1.5}}, "analysis.level"),
        ({"noise": {"exponent": "-1/4"}}, "must be nonnegative"),
        ({"noise": {"exponent": "one"}}, "p/q"),
        ({"equation": {"family": "Burgers", "p": 3}}, "p is only meaningful"),
    ],
)
def test_invalid_scenarios(sections, message):
    """Structural and semantic violations raise ScenarioError."""
    data = {"equation": {"family": "HeatPerturb"}}
    data.update(sections)
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(json.dumps(data))


def test_rough_noise_sets_gamma():
    """Rough noise contributes γ = exponent and δ = 0."""
    text = json.dumps(
        {
            "equation": {"family": "DivergenceSuper", "beta": "1/2", "drift_bounded": True},
            "noise": {"kind": "rough", "exponent": "1/10"},
        }
    )
    params = parse_scenario(text).to_params()
    assert params.gamma == Fraction(1, 10)
    assert params.delta == 0
    assert params.drift_bounded


def test_rough_noise_must_agree_with_equation_gamma():
    """equation.gamma may repeat the rough exponent but not contradict it."""
    text = json.dumps(
        {
            "equation": {"family": "DivergenceSuper", "beta": "1/2", "gamma": "1/5", "drift_bounded": True},
            "noise": {"kind": "rough", "exponent": "1/10"},
        }
    )
    with pytest.raises(ScenarioError, match="differs from noise.exponent"):
        parse_scenario(text)


def test_hs_shift_becomes_delta_prime():
    """A positive hs_shift is passed on as δ'."""
    text = json.dumps({"equation": {"family": "Burgers"}, "noise": {"exponent": "3/10", "hs_shift": "1/40"}})
    params = parse_scenario(text).to_params()
    assert params.delta_prime == Fraction(1, 40)


def test_load_scenario(tmp_path):
    """Files are read from disk; unreadable paths raise ScenarioError."""
    path = tmp_path / "heat.json"
    path.write_text(scenario_text(), encoding="utf-8")
    assert isinstance(load_scenario(path), ScenarioFile)
    with pytest.raises(ScenarioError, match="cannot read scenario file"):
        load_scenario(tmp_path / "missing.json")
