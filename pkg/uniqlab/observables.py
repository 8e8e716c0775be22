"""
Bounded continuous observables on Galerkin coefficients.

Observables act on coordinate arrays of shape (m, ...) (mode-major, extra
axes for paths or grid points). Coordinates beyond m are taken as zero, so
the same catalog serves full Galerkin states and low-dimensional projected
problems.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence

import numpy as np


def _coordinate(x: np.ndarray, index: int) -> np.ndarray:
    if index < x.shape[0]:
        return x[index]
    return np.zeros_like(x[0])


class Observable(ABC):
    """
    Abstract base class for bounded test functions.

    Attributes:
        name: Catalog name
        sup: Upper bound for |f|
    """

    name: str = "observable"
    sup: float = 1.0

    @abstractmethod
    def __call__(self, x: np.ndarray, eigenvalues: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Evaluate the observable.

        Args:
            x: Coordinates, shape (m, ...)
            eigenvalues: Eigenvalues λ_1..λ_m, used by norm functionals

        Returns:
            np.ndarray: Values with shape x.shape[1:]
        """

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.name!r})"


class ConstantOne(Observable):
    name = "one"

    def __call__(self, x, eigenvalues=None):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[1:])


class ClippedPolynomial(Observable):
    """clip(p(x_i), -level, level) for a polynomial p in one coordinate."""

    def __init__(self, index: int, coefficients: Sequence[float] = (0.0, 1.0, 0.5), level: float = 1.0, name: str = None):
        self.index = index
        self.coefficients = tuple(coefficients)
        self.sup = float(level)
        self.name = name or f"clipped-poly-x{index + 1}"

    def __call__(self, x, eigenvalues=None):
        x = np.asarray(x, dtype=float)
        values = np.polynomial.polynomial.polyval(_coordinate(x, self.index), self.coefficients)
        return np.clip(values, -self.sup, self.sup)


class CosineFunctional(Observable):
    """cos(ℓ(x)) for the linear functional ℓ(x) = Σ w_i x_i."""

    def __init__(self, weights: Sequence[float], name: str):
        self.weights = np.asarray(weights, dtype=float)
        self.name = name
        self.sup = 1.0

    def __call__(self, x, eigenvalues=None):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[1:])
        for i, w in enumerate(self.weights):
            total = total + w * _coordinate(x, i)
        return np.cos(total)


class ClippedSobolevNorm(Observable):
    """min(‖P_j x‖_{2s}, level) with weights λ_k^{2s}; unit weights without eigenvalues."""

    def __init__(self, s: float, modes: int = 8, level: float = 1.0, name: str = None):
        self.s = float(s)
        self.modes = modes
        self.sup = float(level)
        self.name = name or f"clipped-sobolev-{s:g}"

    def __call__(self, x, eigenvalues=None):
        x = np.asarray(x, dtype=float)
        j = min(self.modes, x.shape[0])
        head = x[:j]
        if eigenvalues is not None:
            weights = np.asarray(eigenvalues, dtype=float)[:j] ** (2.0 * self.s)
            head = head * np.sqrt(weights).reshape((-1,) + (1,) * (x.ndim - 1))
        return np.minimum(np.sqrt(np.sum(head**2, axis=0)), self.sup)


class ClippedSign(Observable):
    """clip(x_i / width, -1, 1): a continuous approximation of sign(x_i)."""

    def __init__(self, index: int = 0, width: float = 1e-4):
        if width <= 0:
            raise ValueError(f"Invalid width: {width} (must be positive)")
        self.index = index
        self.width = float(width)
        self.name = "clipped-sign" if index == 0 else f"clipped-sign-x{index + 1}"
        self.sup = 1.0

    def __call__(self, x, eigenvalues=None):
        x = np.asarray(x, dtype=float)
        return np.clip(_coordinate(x, self.index) / self.width, -1.0, 1.0)


class GaussianBump(Observable):
    """exp(-x_i² / (2 s²)), a smooth observable with derivative bounded by 1/(s√e)."""

    def __init__(self, index: int = 0, scale: float = 1.0):
        self.index = index
        self.scale = float(scale)
        self.name = "gaussian-bump" if index == 0 else f"gaussian-bump-x{index + 1}"
        self.sup = 1.0

    def __call__(self, x, eigenvalues=None):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * (_coordinate(x, self.index) / self.scale) ** 2)


def comparison_catalog() -> List[Observable]:
    """The eight observables used to compare laws."""
    return [
        ClippedPolynomial(0),
        ClippedPolynomial(1),
        ClippedPolynomial(2),
        CosineFunctional([1.0], "cos-l1"),
        CosineFunctional([1.0 / np.sqrt(2.0)] * 2, "cos-l2"),
        CosineFunctional([1.0 / np.sqrt(3.0)] * 3, "cos-l3"),
        ClippedSobolevNorm(0.0, name="clipped-norm-h"),
        ClippedSobolevNorm(0.25, name="clipped-norm-v"),
    ]


def catalog() -> Dict[str, Observable]:
    """Every named observable, including the single-purpose ones."""
    items = comparison_catalog() + [
        ConstantOne(),
        CosineFunctional([1.0], "cos-mode1"),
        ClippedSign(),
        GaussianBump(),
    ]
    return {item.name: item for item in items}


def get_observable(name: str) -> Observable:
    """
    Look up a catalog observable by name.

    Raises:
        ValueError: If the name is unknown
    """
    items = catalog()
    if name not in items:
        raise ValueError(f"Invalid observable: {name!r} (known: {', '.join(items)})")
    return items[name]
