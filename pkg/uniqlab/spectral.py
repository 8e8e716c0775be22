"""
Explicit eigen-decomposition of the Dirichlet/Neumann Laplacian on boxes.

Provides the truncated spectrum, fractional powers A^s, the Sobolev scale
V_{2s}, the semigroup S(t), spectral projections and a collocation grid
for pseudo-spectral evaluation of nonlinear terms.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np


class Boundary(str, Enum):
    """Boundary condition of the Laplacian."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Truncated eigen-decomposition of A = (-Δ)^p_A on a box.

    Attributes:
        dimension: Space dimension d (1, 2 or 3)
        boundary: Dirichlet, or Neumann restricted to zero-mean functions
        lengths: Side lengths L_i of the box
        cutoff: Number of retained modes n
        power: p_A, 1 for A = -Δ and 2 for A = Δ²
        eigenvalues: λ_k, nondecreasing, strictly positive
        modes: Multi-indices (n, d) matching the eigenvalues
        laplacian: Eigenvalues of -Δ itself (before raising to p_A)
    """

    dimension: int
    boundary: Boundary
    lengths: Tuple[float, ...]
    cutoff: int
    power: int
    eigenvalues: np.ndarray
    modes: np.ndarray
    laplacian: np.ndarray

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))


def _candidates(dimension: int, boundary: Boundary, bound: int) -> np.ndarray:
    start = 1 if boundary == Boundary.DIRICHLET else 0
    grid = np.array(list(itertools.product(range(start, bound + 1), repeat=dimension)), dtype=int)
    if boundary == Boundary.NEUMANN:
        # zero-mean subspace: drop the constant mode
        grid = grid[grid.sum(axis=1) > 0]
    return grid


def _base_eigenvalues(modes: np.ndarray, lengths: Sequence[float]) -> np.ndarray:
    scale = (np.pi / np.asarray(lengths, dtype=float)) ** 2
    return (modes.astype(float) ** 2 * scale).sum(axis=1)


def build_spectrum(
    dimension: int,
    boundary: Boundary = Boundary.DIRICHLET,
    lengths: Sequence[float] = None,
    cutoff: int = 16,
    power: int = 1,
) -> Spectrum:
    """
    Build the first `cutoff` eigenpairs of A on a box.

    Eigenvalues are Σ_i (π m_i / L_i)², raised to `power`, sorted ascending
    with ties broken by lexicographic multi-index.

    Args:
        dimension: Space dimension, 1 to 3
        boundary: Boundary condition
        lengths: Side lengths (defaults to the unit box)
        cutoff: Number of modes to keep
        power: Exponent p_A applied to the Laplacian eigenvalues

    Returns:
        Spectrum: The truncated spectrum

    Raises:
        ValueError: If dimension, cutoff, lengths or power are invalid
    """
    if dimension not in (1, 2, 3):
        raise ValueError(f"Invalid dimension: {dimension} (must be 1, 2 or 3)")
    if cutoff < 1:
        raise ValueError(f"Invalid cutoff: {cutoff} (must be at least 1)")
    if power not in (1, 2):
        raise ValueError(f"Invalid power: {power} (must be 1 or 2)")
    boundary = Boundary(boundary)
    if lengths is None:
        lengths = (1.0,) * dimension
    lengths = tuple(float(x) for x in lengths)
    if len(lengths) != dimension:
        raise ValueError(f"Invalid lengths: expected {dimension} values, got {len(lengths)}")
    if any(x <= 0 for x in lengths):
        raise ValueError(f"Invalid lengths: {lengths} (must be positive)")

    # Grow the index box until every eigenvalue below the n-th is enumerated.
    bound = max(1, int(np.ceil(cutoff ** (1.0 / dimension))) + 1)
    while True:
        modes = _candidates(dimension, boundary, bound)
        base = _base_eigenvalues(modes, lengths)
        if len(base) >= cutoff:
            threshold = np.sort(base)[cutoff - 1]
            # smallest eigenvalue with some index equal to bound + 1
            edge = min((np.pi * (bound + 1) / L) ** 2 for L in lengths)
            if edge > threshold:
                break
        bound *= 2

    key = np.round(base / base.max(), 12)
    order = np.lexsort(tuple(modes[:, i] for i in reversed(range(dimension))) + (key,))
    order = order[:cutoff]
    modes = modes[order]
    base = base[order]

    logging.debug(f"Built spectrum d={dimension} bc={boundary.value} n={cutoff} p_A={power}")
    return Spectrum(
        dimension=dimension,
        boundary=boundary,
        lengths=lengths,
        cutoff=cutoff,
        power=power,
        eigenvalues=base**power,
        modes=modes,
        laplacian=base,
    )


def effective_dimension(spec: Spectrum) -> float:
    """d / p_A, so that λ_k grows like k^{2/d_eff}."""
    return spec.dimension / spec.power


def _check_length(spec: Spectrum, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != spec.cutoff:
        raise ValueError(f"Invalid mode vector: length {x.shape[0]} does not match cutoff {spec.cutoff}")
    return x


def _column(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    # broadcast per-mode factors over trailing (path or grid) axes
    return values.reshape((-1,) + (1,) * (x.ndim - 1))


def frac_power_apply(spec: Spectrum, s: float, x: np.ndarray) -> np.ndarray:
    """Return A^s x, i.e. (λ_k^s a_k). Negative s maps into D(A^{-s})."""
    x = _check_length(spec, x)
    return _column(spec.eigenvalues ** float(s), x) * x


def semigroup_apply(spec: Spectrum, t: float, x: np.ndarray) -> np.ndarray:
    """
    Apply the analytic semigroup S(t) = e^{-tA}.

    Args:
        spec: Spectrum of A
        t: Nonnegative time
        x: Mode vector (n,) or batch (n, ...)

    Returns:
        The coefficients e^{-tλ_k} a_k

    Raises:
        ValueError: If t is negative
    """
    if t < 0:
        raise ValueError(f"Invalid time: t must be nonnegative, got {t}")
    x = _check_length(spec, x)
    return _column(np.exp(-float(t) * spec.eigenvalues), x) * x


def sobolev_norm(spec: Spectrum, s: float, x: np.ndarray) -> np.ndarray:
    """‖x‖_{2s} = (Σ λ_k^{2s} a_k²)^{1/2}, computed along the mode axis."""
    return np.sqrt(np.sum(frac_power_apply(spec, s, x) ** 2, axis=0))


def inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Mode inner product (x, y) in H."""
    return np.sum(np.asarray(x) * np.asarray(y), axis=0)


def project(x: np.ndarray, j: int) -> np.ndarray:
    """
    Orthogonal projection P_j onto the first j modes.

    Raises:
        ValueError: If j is outside 1..n
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if not 1 <= j <= n:
        raise ValueError(f"Invalid projection index: {j} (must be in 1..{n})")
    out = x.copy()
    out[j:] = 0.0
    return out


def _axis_functions(index: np.ndarray, x: np.ndarray, length: float, boundary: Boundary):
    """1-D eigenfunctions and their derivatives at points x, shape (len(x), len(index))."""
    k = np.pi * index[None, :] / length
    if boundary == Boundary.DIRICHLET:
        amp = np.sqrt(2.0 / length)
        return amp * np.sin(k * x[:, None]), amp * k * np.cos(k * x[:, None])
    amp = np.where(index == 0, np.sqrt(1.0 / length), np.sqrt(2.0 / length))[None, :]
    return amp * np.cos(k * x[:, None]), -amp * k * np.sin(k * x[:, None])


class Collocation:
    """
    Midpoint collocation grid matched to the eigenbasis of a Spectrum.

    Each axis i carries max(4·M_i, 8) midpoints, M_i the largest retained
    index on that axis, so products of up to four modes are resolved. The
    discrete basis is orthonormal, hence `backward(forward(a)) == a`.
    """

    def __init__(self, spec: Spectrum):
        self.spec = spec
        axes = []
        for i in range(spec.dimension):
            points = max(4 * int(spec.modes[:, i].max()), 8)
            L = spec.lengths[i]
            axes.append((np.arange(points) + 0.5) * L / points)
        self.axes = axes
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack([m.ravel() for m in mesh])
        self.weight = float(np.prod([L / len(ax) for L, ax in zip(spec.lengths, axes)]))

        G = self.points.shape[1]
        n = spec.cutoff
        basis = np.ones((G, n))
        grads = np.ones((spec.dimension, G, n))
        per_axis = []
        for i in range(spec.dimension):
            per_axis.append(_axis_functions(spec.modes[:, i], self.points[i], spec.lengths[i], spec.boundary))
        for i, (val, der) in enumerate(per_axis):
            basis *= val
            for j in range(spec.dimension):
                grads[j] *= der if i == j else val
        self.basis = basis
        self.gradient_basis = grads

    def forward(self, a: np.ndarray) -> np.ndarray:
        """Grid values Σ a_k e_k(x_j), shape (G, ...)."""
        return np.tensordot(self.basis, a, axes=(1, 0))

    def gradient(self, a: np.ndarray) -> np.ndarray:
        """Grid gradient of Σ a_k e_k, shape (d, G, ...)."""
        return np.tensordot(self.gradient_basis, a, axes=(2, 0))

    def laplacian(self, a: np.ndarray) -> np.ndarray:
        """Grid values of Δ(Σ a_k e_k) = -Σ μ_k a_k e_k."""
        return -self.forward(_column(self.spec.laplacian, a) * a)

    def backward(self, values: np.ndarray) -> np.ndarray:
        """Mode coefficients of grid values by the discrete L² product."""
        return self.weight * np.tensordot(self.basis, values, axes=(0, 0))


@lru_cache(maxsize=16)
def collocation_for(spec: Spectrum) -> Collocation:
    """Cached collocation grid for a spectrum (spectra compare by identity)."""
    return Collocation(spec)
