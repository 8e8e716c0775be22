"""
Drift operators B of the equation families, evaluated on Galerkin coefficients.

All nonlinear terms are computed pseudo-spectrally: coefficients are
transformed to the collocation grid, the nonlinearity is applied pointwise
and the result is projected back, so B_n = P_n B P_n by construction.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .admissibility import Family
from .spectral import Boundary, Spectrum, collocation_for, sobolev_norm

NONLINEARITIES = ("polynomial", "sine")


@dataclass(frozen=True)
class DriftSpec:
    """
    Drift description for one equation family.

    Attributes:
        family: Equation family
        alpha: α, order of A applied inside F (NonDivergence)
        beta: β, order of A applied outside F (divergence families), or the
            order of the dual space V_{-2β} a polynomial F(u) is measured in
        nonlinearity: "polynomial" (F(r) = Σ c_j r^j) or "sine" (F(r) = Σ c_j sin((j+1) r))
        coefficients: Coefficients c_j of F
        bound: Clip level M making F bounded, or None
        burgers_sign: Sign in front of u ∂ₓu
        gradient_weight: Weight w of the clipped gradient term, w·clip(∂ₓu) in the
            Burgers drift and w·Σ_i clip(∂_i u) inside the Cahn–Hilliard F₂
    """

    family: Family = Family.HEAT_PERTURB
    alpha: float = 0.0
    beta: float = 0.0
    nonlinearity: str = "polynomial"
    coefficients: Tuple[float, ...] = ()
    bound: Optional[float] = None
    burgers_sign: int = 1
    gradient_weight: float = 0.0

    def __post_init__(self):
        """Validate the drift description after initialization."""
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"Invalid nonlinearity: {self.nonlinearity} (must be one of {NONLINEARITIES})")
        if self.bound is not None and self.bound <= 0:
            raise ValueError(f"Invalid bound: {self.bound} (must be positive)")
        if self.burgers_sign not in (1, -1):
            raise ValueError(f"Invalid burgers_sign: {self.burgers_sign} (must be +1 or -1)")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"Invalid exponents: alpha={self.alpha}, beta={self.beta} (must be nonnegative)")

        fixed = {
            Family.HEAT_PERTURB: (0.0, 0.0),
            Family.HEAT_POLYNOMIAL: (None, None),
            Family.DIVERGENCE_SUB: (0.0, None),
            Family.DIVERGENCE_SUPER: (0.0, None),
            Family.NON_DIVERGENCE: (None, 0.0),
            Family.BURGERS: (0.5, 0.0),
            Family.CAHN_HILLIARD: (0.5, 0.0),
        }[self.family]
        for name, value in zip(("alpha", "beta"), fixed):
            if value is not None and getattr(self, name) not in (0.0, value):
                raise ValueError(f"Invalid {name}: {self.family.value} fixes {name}={value}, got {getattr(self, name)}")
        if fixed[0] is not None:
            object.__setattr__(self, "alpha", fixed[0])

    def nonlinear(self, r: np.ndarray) -> np.ndarray:
        """F(r), clipped to [-M, M] when a bound is set."""
        r = np.asarray(r, dtype=float)
        if self.nonlinearity == "polynomial":
            out = np.polynomial.polynomial.polyval(r, self.coefficients) if self.coefficients else np.zeros_like(r)
        else:
            out = np.zeros_like(r)
            for j, c in enumerate(self.coefficients):
                out = out + c * np.sin((j + 1) * r)
        if self.bound is not None:
            out = np.clip(out, -self.bound, self.bound)
        return out

    @property
    def has_nonlinearity(self) -> bool:
        return any(c != 0.0 for c in self.coefficients)


def double_well_derivative(r: np.ndarray) -> np.ndarray:
    """F₁(r) = r³ - r, derivative of the double-well potential ¼(r² - 1)²."""
    return r**3 - r


class Drift(ABC):
    """
    Abstract base class for Galerkin drifts.

    Subclasses implement `evaluate`, mapping coefficient arrays of shape
    (n,) or (n, paths) to the coefficients of P_n B(x) of the same shape.
    """

    def __init__(self, spec: DriftSpec, spectrum: Spectrum):
        self.spec = spec
        self.spectrum = spectrum
        self.collocation = collocation_for(spectrum)

    @abstractmethod
    def evaluate(self, a: np.ndarray) -> np.ndarray:
        """
        Evaluate the projected drift.

        Args:
            a: Galerkin coefficients, shape (n,) or (n, paths)

        Returns:
            np.ndarray: Drift coefficients with the same shape
        """

    def bound(self) -> Optional[float]:
        """
        Bound on sup_x ‖B(x)‖_{-2β}, or None when the drift is unbounded.

        Bounded variants clip F at M, so ‖P_n F(u)‖_H ≤ M √|O| by Bessel's
        inequality for the discrete product.
        """
        if self.spec.bound is None:
            return None
        return self.spec.bound * np.sqrt(self.spectrum.volume)

    @property
    def is_zero(self) -> bool:
        """True when B vanishes identically."""
        return not self.spec.has_nonlinearity

    def __call__(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if self.is_zero:
            return np.zeros_like(a)
        return self.evaluate(a)


def _scale_modes(values: np.ndarray, a: np.ndarray) -> np.ndarray:
    return values.reshape((-1,) + (1,) * (a.ndim - 1))


class NemytskiiDrift(Drift):
    """B(u) = F(u) for the heat equation with a perturbation or a polynomial drift."""

    def evaluate(self, a: np.ndarray) -> np.ndarray:
        col = self.collocation
        return col.backward(self.spec.nonlinear(col.forward(a)))


class DivergenceDrift(Drift):
    """⟨B(u), e_k⟩ = λ_k^β ⟨F(u), e_k⟩, i.e. B = A^β F(u)."""

    def evaluate(self, a: np.ndarray) -> np.ndarray:
        col = self.collocation
        coeff = col.backward(self.spec.nonlinear(col.forward(a)))
        return _scale_modes(self.spectrum.eigenvalues**self.spec.beta, coeff) * coeff


class NonDivergenceDrift(Drift):
    """B(u) = F(A^α u)."""

    def evaluate(self, a: np.ndarray) -> np.ndarray:
        col = self.collocation
        shifted = _scale_modes(self.spectrum.eigenvalues**self.spec.alpha, a) * a
        return col.backward(self.spec.nonlinear(col.forward(shifted)))


class BurgersDrift(Drift):
    """B(u) = ±u ∂ₓu + F(u) + w·clip(∂ₓu), the last two terms bounded."""

    def __init__(self, spec: DriftSpec, spectrum: Spectrum):
        if spectrum.dimension != 1:
            raise ValueError(f"Invalid dimension: Burgers drift is one-dimensional, got d={spectrum.dimension}")
        super().__init__(spec, spectrum)

    @property
    def is_zero(self) -> bool:
        return False

    def evaluate(self, a: np.ndarray) -> np.ndarray:
        col = self.collocation
        u = col.forward(a)
        ux = col.gradient(a)[0]
        values = self.spec.burgers_sign * u * ux
        if self.spec.has_nonlinearity:
            values = values + self.spec.nonlinear(u)
        if self.spec.gradient_weight:
            level = self.spec.bound if self.spec.bound is not None else 1.0
            values = values + self.spec.gradient_weight * np.clip(ux, -level, level)
        return col.backward(values)

    def bound(self) -> Optional[float]:
        return None


class CahnHilliardDrift(Drift):
    """
    B(u) = F₂(u, ∇u) + ΔF₁(u) = F₂ + F₁″(u)|∇u|² + F₁′(u)Δu with F₁(r) = r³ - r.

    F₂(u, ∇u) = F(u) + w·Σ_i clip(∂_i u, ±M) with F the family's clipped
    nonlinearity and M the bound (1 when unset). Second derivatives of u
    are not arguments of F₂.
    """

    def __init__(self, spec: DriftSpec, spectrum: Spectrum):
        if spectrum.boundary != Boundary.NEUMANN or spectrum.power != 2:
            raise ValueError("Invalid spectrum: Cahn-Hilliard drift needs Neumann boundary and A = Δ² (power 2)")
        super().__init__(spec, spectrum)

    @property
    def is_zero(self) -> bool:
        return False

    def evaluate(self, a: np.ndarray) -> np.ndarray:
        col = self.collocation
        u = col.forward(a)
        grad = col.gradient(a)
        grad_sq = np.sum(grad**2, axis=0)
        values = 6.0 * u * grad_sq + (3.0 * u**2 - 1.0) * col.laplacian(a)
        if self.spec.has_nonlinearity:
            values = values + self.spec.nonlinear(u)
        if self.spec.gradient_weight:
            level = self.spec.bound if self.spec.bound is not None else 1.0
            values = values + self.spec.gradient_weight * np.sum(np.clip(grad, -level, level), axis=0)
        return col.backward(values)

    def bound(self) -> Optional[float]:
        return None


_FAMILY_DRIFTS = {
    Family.HEAT_PERTURB: NemytskiiDrift,
    Family.HEAT_POLYNOMIAL: NemytskiiDrift,
    Family.DIVERGENCE_SUB: DivergenceDrift,
    Family.DIVERGENCE_SUPER: DivergenceDrift,
    Family.NON_DIVERGENCE: NonDivergenceDrift,
    Family.BURGERS: BurgersDrift,
    Family.CAHN_HILLIARD: CahnHilliardDrift,
}


def make_drift(spec: DriftSpec, spectrum: Spectrum) -> Drift:
    """
    Instantiate the drift class of a family on a spectrum.

    Raises:
        ValueError: If the spectrum does not fit the family
    """
    if spectrum.power == 2 and spec.family != Family.CAHN_HILLIARD:
        raise ValueError(f"Invalid spectrum: power 2 is reserved for Cahn-Hilliard, got {spec.family.value}")
    drift = _FAMILY_DRIFTS[spec.family](spec, spectrum)
    logging.debug(f"Created {drift.__class__.__name__} for {spec.family.value}")
    return drift


def drift_eval(spec: DriftSpec, spectrum: Spectrum, a: np.ndarray) -> np.ndarray:
    """Evaluate P_n B(a) for a one-off drift description."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] != spectrum.cutoff:
        raise ValueError(f"Invalid mode vector: length {a.shape[0]} does not match cutoff {spectrum.cutoff}")
    return make_drift(spec, spectrum)(a)


def radial_projection(spectrum: Spectrum, alpha: float, level: float, a: np.ndarray) -> np.ndarray:
    """Π_N a: a inside the V_{2α}-ball of radius N, else a·N/‖a‖_{2α}."""
    if level <= 0:
        raise ValueError(f"Invalid truncation level: {level} (must be positive)")
    a = np.asarray(a, dtype=float)
    norm = sobolev_norm(spectrum, alpha, a)
    scale = np.where(norm > level, level / np.where(norm > 0, norm, 1.0), 1.0)
    return a * scale


def truncate_drift(drift: Drift, level: float, a: np.ndarray) -> np.ndarray:
    """B_N(a) = B(Π_N a) with the radial projection in V_{2α}."""
    return drift(radial_projection(drift.spectrum, drift.spec.alpha, level, a))
