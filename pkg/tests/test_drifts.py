"""
Tests for the pseudo-spectral drift operators.
"""

import numpy as np
import pytest

from uniqlab.admissibility import Family
from uniqlab.drifts import (
    DriftSpec,
    double_well_derivative,
    drift_eval,
    make_drift,
    radial_projection,
    truncate_drift,
)
from uniqlab.spectral import Boundary, build_spectrum, collocation_for, sobolev_norm


@pytest.fixture
def line():
    return build_spectrum(1, cutoff=8)


@pytest.fixture
def neumann_line():
    return build_spectrum(1, Boundary.NEUMANN, cutoff=8, power=2)


def unit(n, k, scale=1.0):
    a = np.zeros(n)
    a[k] = scale
    return a


def test_zero_nonlinearity_gives_zero_drift(line):
    """F ≡ 0 maps every state to zero."""
    spec = DriftSpec(family=Family.HEAT_PERTURB)
    out = drift_eval(spec, line, np.arange(8.0))
    np.testing.assert_array_equal(out, np.zeros(8))


def test_burgers_mode_product(line):
    """u = a e₁ gives ⟨u ∂ₓu, e₂⟩ = a²π/√2 and nothing else."""
    a = 0.7
    out = drift_eval(DriftSpec(family=Family.BURGERS), line, unit(8, 0, a))
    expected = unit(8, 1, a**2 * np.pi / np.sqrt(2.0))
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_burgers_sign_flips_convection(line):
    """burgers_sign = -1 negates u ∂ₓu."""
    x = unit(8, 0, 0.7)
    plus = drift_eval(DriftSpec(family=Family.BURGERS), line, x)
    minus = drift_eval(DriftSpec(family=Family.BURGERS, burgers_sign=-1), line, x)
    np.testing.assert_allclose(minus, -plus)


def test_cubic_nemytskii_coefficients(line):
    """F(r) = r³ on e₁: ⟨u³, e₁⟩ = 3/2 and ⟨u³, e₃⟩ = -1/2."""
    spec = DriftSpec(family=Family.HEAT_POLYNOMIAL, coefficients=(0.0, 0.0, 0.0, 1.0))
    out = drift_eval(spec, line, unit(8, 0))
    expected = np.zeros(8)
    expected[0], expected[2] = 1.5, -0.5
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_divergence_drift_scales_by_lambda_beta(line):
    """With F(r) = r the divergence drift is A^β."""
    spec = DriftSpec(family=Family.DIVERGENCE_SUB, beta=0.25, coefficients=(0.0, 1.0))
    x = np.linspace(0.1, 0.8, 8)
    np.testing.assert_allclose(drift_eval(spec, line, x), line.eigenvalues**0.25 * x, rtol=1e-10)


def test_nondivergence_drift_applies_a_alpha_inside(line):
    """With F(r) = r the non-divergence drift is A^α."""
    spec = DriftSpec(family=Family.NON_DIVERGENCE, alpha=0.25, coefficients=(0.0, 1.0))
    x = np.linspace(0.1, 0.8, 8)
    np.testing.assert_allclose(drift_eval(spec, line, x), line.eigenvalues**0.25 * x, rtol=1e-10)


def test_bounded_drift_respects_its_bound(line):
    """Clipping F at M bounds ‖B(x)‖_H by M√|O|."""
    spec = DriftSpec(family=Family.HEAT_PERTURB, coefficients=(0.0, 10.0), bound=0.5)
    drift = make_drift(spec, line)
    rng = np.random.default_rng(0)
    states = 5.0 * rng.standard_normal((8, 1000))
    norms = sobolev_norm(line, 0.0, drift(states))
    assert drift.bound() == pytest.approx(0.5)
    assert norms.max() <= drift.bound() + 1e-12


def test_sine_nonlinearity(line):
    """F(r) = Σ c_j sin((j+1) r) is bounded by Σ|c_j|."""
    spec = DriftSpec(family=Family.HEAT_PERTURB, nonlinearity="sine", coefficients=(0.5, 0.25))
    r = np.linspace(-3.0, 3.0, 7)
    np.testing.assert_allclose(spec.nonlinear(r), 0.5 * np.sin(r) + 0.25 * np.sin(2.0 * r))


def test_cahn_hilliard_is_laplacian_of_double_well(neumann_line):
    """F₁″|∇u|² + F₁′Δu equals Δ(u³ - u) mode by mode."""
    col = collocation_for(neumann_line)
    x = unit(8, 0, 0.4) + unit(8, 1, -0.2)
    out = drift_eval(DriftSpec(family=Family.CAHN_HILLIARD), neumann_line, x)
    expected = -neumann_line.laplacian * col.backward(double_well_derivative(col.forward(x)))
    np.testing.assert_allclose(out, expected, atol=1e-10)


def test_cahn_hilliard_linear_part(neumann_line):
    """Near zero the drift is -Δu = μ_k a_k."""
    x = unit(8, 2, 1e-4)
    out = drift_eval(DriftSpec(family=Family.CAHN_HILLIARD), neumann_line, x)
    assert out[2] == pytest.approx(neumann_line.laplacian[2] * 1e-4, rel=1e-6)


def test_cahn_hilliard_perturbation_takes_the_gradient(neumann_line):
    """F₂ adds w·clip(∂ₓu, ±M) on top of the double-well part."""
    col = collocation_for(neumann_line)
    x = unit(8, 1, 2.0)
    plain = drift_eval(DriftSpec(family=Family.CAHN_HILLIARD), neumann_line, x)
    spec = DriftSpec(family=Family.CAHN_HILLIARD, gradient_weight=0.5, bound=0.3)
    out = drift_eval(spec, neumann_line, x)
    ux = col.gradient(x)[0]
    assert np.abs(ux).max() > 0.3
    np.testing.assert_allclose(out - plain, 0.5 * col.backward(np.clip(ux, -0.3, 0.3)), atol=1e-10)


@pytest.mark.parametrize(
    "family, spectrum, message",
    [
        (Family.CAHN_HILLIARD, build_spectrum(1, cutoff=4), "Neumann"),
        (Family.BURGERS, build_spectrum(2, cutoff=4), "one-dimensional"),
        (Family.HEAT_PERTURB, build_spectrum(1, Boundary.NEUMANN, cutoff=4, power=2), "reserved for Cahn-Hilliard"),
    ],
)
def test_make_drift_rejects_mismatched_spectrum(family, spectrum, message):
    """Families only run on the spectra they are defined for."""
    with pytest.raises(ValueError, match=message):
        make_drift(DriftSpec(family=family), spectrum)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"nonlinearity": "cubic"}, "Invalid nonlinearity"),
        ({"bound": 0.0}, "Invalid bound"),
        ({"burgers_sign": 2}, "Invalid burgers_sign"),
        ({"family": Family.BURGERS, "alpha": 0.3}, "Invalid alpha"),
        ({"family": Family.HEAT_PERTURB, "beta": 0.2}, "Invalid beta"),
    ],
)
def test_drift_spec_validation(kwargs, message):
    """Invalid drift descriptions raise ValueError."""
    with pytest.raises(ValueError, match=message):
        DriftSpec(**kwargs)


def test_family_fixes_alpha():
    """Burgers and Cahn–Hilliard carry α = ½."""
    assert DriftSpec(family=Family.BURGERS).alpha == 0.5
    assert DriftSpec(family=Family.CAHN_HILLIARD).alpha == 0.5


def test_drift_eval_checks_length(line):
    """The mode vector must match the cutoff."""
    with pytest.raises(ValueError, match="Invalid mode vector"):
        drift_eval(DriftSpec(), line, np.ones(3))


def test_radial_projection(line):
    """Π_N is the identity inside the ball and lands on the sphere outside."""
    x = unit(8, 0, 0.1)
    np.testing.assert_array_equal(radial_projection(line, 0.25, 10.0, x), x)
    level = 2.0
    y = np.linspace(1.0, 2.0, 8)
    y = y * 2.0 * level / sobolev_norm(line, 0.25, y)
    assert sobolev_norm(line, 0.25, radial_projection(line, 0.25, level, y)) == pytest.approx(level)
    with pytest.raises(ValueError, match="Invalid truncation level"):
        radial_projection(line, 0.25, 0.0, y)


def test_truncated_drift(line):
    """B_N agrees with B inside the ball and is constant along rays outside it."""
    spec = DriftSpec(family=Family.HEAT_POLYNOMIAL, alpha=0.25, coefficients=(0.0, 0.0, 0.0, -1.0))
    drift = make_drift(spec, line)
    small = unit(8, 0, 0.01)
    np.testing.assert_allclose(truncate_drift(drift, 5.0, small), drift(small))
    big = np.linspace(1.0, 2.0, 8)
    np.testing.assert_allclose(truncate_drift(drift, 5.0, 10.0 * big), truncate_drift(drift, 5.0, 20.0 * big), rtol=1e-10, atol=1e-12)
    rng = np.random.default_rng(1)
    states = 100.0 * rng.standard_normal((8, 1000))
    assert np.all(np.isfinite(truncate_drift(drift, 5.0, states)))
