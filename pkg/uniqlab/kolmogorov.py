"""
Kolmogorov equation of the Galerkin problem projected on m ≤ 4 modes.

The Ornstein–Uhlenbeck semigroup R_t v(x) = E v(S(t)x + Q_t^{1/2} Z) is
evaluated by tensor Gauss–Hermite quadrature (Monte Carlo for m = 4). The
mild solution of λu + Lu = f + ⟨B, Du⟩ is the fixed point of

    𝒯_λ u = ∫_0^∞ e^{-λt} R_t[f + ⟨B, Du⟩] dt,

computed by Picard iteration on a tensor grid over [-R, R]^m with u
continued by constants outside the box.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import interpolate, special

from .drifts import Drift
from .noise import NoiseSpec, qt_diagonal
from .observables import ClippedSign, GaussianBump, Observable
from .spectral import Spectrum
from .utils import ContractionError, fit_loglog_slope

Evaluable = Callable[[np.ndarray], np.ndarray]

QUADRATURE_CAP = 4
GRID_POINTS = {1: 201, 2: 41, 3: 17, 4: 9}
HERMITE_ORDER = {1: 20, 2: 12, 3: 8}
BOX_WIDTH = 6.0
T_MIN = 1e-6
C_R_INFLATION = 1.5


@dataclass(frozen=True)
class RegularizerSpec:
    """
    Gaussian regularization with operator C = diag(c_k) and parameter ε.

    Attributes:
        epsilon: ε > 0
        operator: Eigenvalues c_k > 0 of C; None uses the eigenvalues λ_k of A
    """

    epsilon: float
    operator: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"Invalid epsilon: {self.epsilon} (must be positive)")
        if self.operator is not None:
            object.__setattr__(self, "operator", tuple(float(c) for c in self.operator))
            if any(c <= 0 for c in self.operator):
                raise ValueError(f"Invalid regularizer: eigenvalues {self.operator} must be positive")

    def factors(self, spectrum: Spectrum) -> Tuple[np.ndarray, np.ndarray]:
        """(T(ε) diagonal e^{-εc_k}, standard deviations of Y with variance ½(1 - e^{-2εc_k})/c_k)."""
        c = spectrum.eigenvalues if self.operator is None else np.asarray(self.operator)
        if len(c) != spectrum.cutoff:
            raise ValueError(f"Invalid regularizer: {len(c)} eigenvalues for {spectrum.cutoff} modes")
        return np.exp(-self.epsilon * c), np.sqrt(0.5 * -np.expm1(-2.0 * self.epsilon * c) / c)


@dataclass
class ProjectedProblem:
    """
    Kolmogorov problem on the first m modes.

    Attributes:
        spectrum: Spectrum with m modes
        noise: Noise covariance
        drift: Drift on the m-mode spectrum, or None for B = 0
        observable: Test function f
        lam: λ > 0
        regularizer: Gaussian regularization (B_ε, f_ε), or None
        ambient: Full Galerkin spectrum, used for per-mode smoothing studies
        grid_points: Points per axis of the solution grid
        order: Gauss–Hermite order per axis
        cap: Largest admissible m
    """

    spectrum: Spectrum
    noise: NoiseSpec
    drift: Optional[Drift]
    observable: Observable
    lam: float
    regularizer: Optional[RegularizerSpec] = None
    ambient: Optional[Spectrum] = None
    grid_points: Optional[int] = None
    order: Optional[int] = None
    cap: int = QUADRATURE_CAP

    def __post_init__(self):
        """Validate the projection size and fill grid defaults."""
        if self.m > self.cap:
            raise ValueError(f"Invalid projection: m={self.m} exceeds the quadrature cap {self.cap}")
        if self.lam <= 0:
            raise ValueError(f"Invalid lambda: {self.lam} (must be positive)")
        if self.drift is not None and self.drift.spectrum.cutoff != self.m:
            raise ValueError("Invalid drift: it must act on the projected spectrum")
        if self.grid_points is None:
            self.grid_points = GRID_POINTS[self.m]
        if self.order is None:
            self.order = HERMITE_ORDER.get(self.m)
        if self.ambient is None:
            self.ambient = self.spectrum

    @classmethod
    def from_scenario(cls, scenario, m: int, observable: Observable, lam: float, **kwargs) -> "ProjectedProblem":
        """Project a Galerkin scenario on its first m modes."""
        projected = scenario.with_cutoff(m)
        drift = None if projected.drift.is_zero else projected.drift
        return cls(
            spectrum=projected.spectrum,
            noise=scenario.noise,
            drift=drift,
            observable=observable,
            lam=lam,
            ambient=scenario.spectrum,
            **kwargs,
        )

    @property
    def m(self) -> int:
        return self.spectrum.cutoff

    @property
    def delta(self) -> float:
        return self.noise.frame_delta

    @property
    def beta(self) -> float:
        return self.drift.spec.beta if self.drift is not None else 0.0

    @property
    def has_drift(self) -> bool:
        return self.drift is not None and not self.drift.is_zero

    def radius(self) -> float:
        """Box half-width R = 6 max_k √q_k(∞)."""
        return BOX_WIDTH * float(np.sqrt(qt_diagonal(self.spectrum, self.noise, math.inf).variances.max()))

    def axes(self) -> List[np.ndarray]:
        R = self.radius()
        return [np.linspace(-R, R, self.grid_points) for _ in range(self.m)]

    def grid(self) -> np.ndarray:
        """Grid points as coordinates of shape (m, G)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh])

    def f(self, x: np.ndarray) -> np.ndarray:
        """f, or f_ε when regularized."""
        if self.regularizer is not None:
            return regularize_observable(self.spectrum, self._raw_f, self.regularizer, x, self.order)
        return self._raw_f(x)

    def b(self, x: np.ndarray) -> np.ndarray:
        """B, or B_ε when regularized."""
        if self.regularizer is not None:
            return regularize_drift(self.spectrum, self.drift, self.regularizer, x, self.order)
        return self.drift(x)

    def _raw_f(self, x: np.ndarray) -> np.ndarray:
        return self.observable(x, eigenvalues=self.spectrum.eigenvalues)


@dataclass(frozen=True)
class GaussianAverage:
    """Gaussian expectation with a 95% half-width (zero for deterministic rules)."""

    value: np.ndarray
    half_width: np.ndarray


@lru_cache(maxsize=32)
def _hermite_nodes(m: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Standard-normal tensor nodes (m, K) and weights (K,)."""
    locs, vals = np.polynomial.hermite.hermgauss(order)
    z = np.sqrt(2.0) * locs
    w = vals / np.sqrt(np.pi)
    mesh = np.meshgrid(*([z] * m), indexing="ij")
    weights = np.ones([order] * m)
    for axis in range(m):
        shape = [1] * m
        shape[axis] = order
        weights = weights * w.reshape(shape)
    return np.stack([g.ravel() for g in mesh]), weights.ravel()


@lru_cache(maxsize=4)
def _line_nodes(points: int = 4001, width: float = 8.0) -> Tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes on [-width, width] against the standard normal density."""
    z = np.linspace(-width, width, points)
    dz = z[1] - z[0]
    w = np.full(points, dz)
    w[[0, -1]] *= 0.5
    return z[None, :], w * np.exp(-0.5 * z**2) / np.sqrt(2.0 * np.pi)


def _nodes(m: int, rule: str, order: Optional[int], samples: int, seed: int) -> Tuple[np.ndarray, np.ndarray, bool]:
    if rule == "hermite":
        return (*_hermite_nodes(m, order or HERMITE_ORDER.get(m, 6)), False)
    if rule == "grid":
        if m != 1:
            raise ValueError(f"Invalid rule: the grid rule is one-dimensional, got m={m}")
        return (*_line_nodes(), False)
    if rule == "mc":
        rng = np.random.Generator(np.random.Philox(seed))
        return rng.standard_normal((m, samples)), np.full(samples, 1.0 / samples), True
    raise ValueError(f"Invalid rule: {rule!r} (must be 'hermite', 'grid' or 'mc')")


def _expect(v: Evaluable, mean: np.ndarray, sd: np.ndarray, z: np.ndarray, w: np.ndarray, mc: bool):
    """E v(mean + sd·Z) for mean of shape (m, G); returns (values (G,), half-widths (G,))."""
    m, G = mean.shape
    y = mean[:, :, None] + sd[:, None, None] * z[:, None, :]
    vals = np.asarray(v(y.reshape(m, -1)), dtype=float).reshape(G, -1)
    value = vals @ w
    if not mc:
        return value, np.zeros_like(value)
    spread = np.sqrt(np.maximum(vals**2 @ w - value**2, 0.0))
    return value, 1.96 * spread / np.sqrt(len(w))


def _as_points(problem_m: int, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = x[:, None] if single else x
    if points.shape[0] != problem_m:
        raise ValueError(f"Invalid point: expected {problem_m} coordinates, got {points.shape[0]}")
    return points, single


def ou_apply(
    problem: ProjectedProblem,
    v: Evaluable,
    t: float,
    x: np.ndarray,
    rule: Optional[str] = None,
    order: Optional[int] = None,
    samples: int = 20000,
    seed: int = 0,
) -> GaussianAverage:
    """
    Evaluate R_t v(x) = E v(e^{-tλ}x + √q(t) Z).

    Args:
        problem: Projected problem (fixes m, λ_k and q_k)
        v: Function of coordinates (m, N) returning (N,)
        t: Time, t ≥ 0 (t = 0 returns v(x))
        x: Point (m,) or points (m, G)
        rule: "hermite" (m ≤ 3), "grid" (m = 1, nonsmooth v) or "mc"; default by m
        order: Gauss–Hermite order per axis
        samples: Monte Carlo sample count
        seed: Monte Carlo seed

    Returns:
        GaussianAverage with values and half-widths

    Raises:
        ValueError: If t < 0, m exceeds the cap or the rule does not fit m
    """
    if t < 0:
        raise ValueError(f"Invalid time: t must be nonnegative, got {t}")
    points, single = _as_points(problem.m, x)
    if t == 0:
        value = np.asarray(v(points), dtype=float)
        result = GaussianAverage(value, np.zeros_like(value))
    else:
        if rule is None:
            rule = "hermite" if problem.m <= 3 else "mc"
        z, w, mc = _nodes(problem.m, rule, order or problem.order, samples, seed)
        decay = np.exp(-t * problem.spectrum.eigenvalues)
        sd = np.sqrt(qt_diagonal(problem.spectrum, problem.noise, t).variances)
        value, half = _expect(v, decay[:, None] * points, sd, z, w, mc)
        result = GaussianAverage(value, half)
    if single:
        return GaussianAverage(result.value[0], result.half_width[0])
    return result


def regularize_drift(
    spectrum: Spectrum,
    drift: Evaluable,
    reg: RegularizerSpec,
    x: np.ndarray,
    order: Optional[int] = None,
) -> np.ndarray:
    """
    B_ε(x) = E[T(ε) B(T(ε)x + Y)], Y ~ N(0, ½C^{-1}(I - T(2ε))).

    Args:
        spectrum: Spectrum of the projected problem
        drift: Vector field on coordinates (m, N) returning (m, N)
        reg: Regularizer
        x: Point (m,) or points (m, G)
        order: Gauss–Hermite order per axis

    Returns:
        np.ndarray: B_ε at the points, same shape as x
    """
    points, single = _as_points(spectrum.cutoff, x)
    m, G = points.shape
    decay, sd = reg.factors(spectrum)
    z, w = _hermite_nodes(m, order or HERMITE_ORDER.get(m, 6))
    y = decay[:, None, None] * points[:, :, None] + sd[:, None, None] * z[:, None, :]
    values = np.asarray(drift(y.reshape(m, -1)), dtype=float).reshape(m, G, -1)
    out = decay[:, None] * (values @ w)
    return out[:, 0] if single else out


def regularize_observable(
    spectrum: Spectrum,
    f: Evaluable,
    reg: RegularizerSpec,
    x: np.ndarray,
    order: Optional[int] = None,
) -> np.ndarray:
    """f_ε(x) = E f(T(ε)x + Y) with the same Gaussian as `regularize_drift`."""
    points, single = _as_points(spectrum.cutoff, x)
    decay, sd = reg.factors(spectrum)
    z, w = _hermite_nodes(points.shape[0], order or HERMITE_ORDER.get(points.shape[0], 6))
    value, _ = _expect(f, decay[:, None] * points, sd, z, w, False)
    return value[0] if single else value


def lambda0(C_R: float, drift_bound: float, delta: float, beta: float) -> float:
    """
    Contraction threshold λ₀ = (C_R Γ(½-δ-β) sup‖B‖_{-2β})^{1/(½-δ-β)}.

    Raises:
        ValueError: If δ + β ≥ ½ or an input is negative
    """
    a = 0.5 - delta - beta
    if a <= 0:
        raise ValueError(f"Invalid exponents: delta + beta = {delta + beta} must be below 1/2")
    if C_R < 0 or drift_bound < 0:
        raise ValueError("Invalid constants: C_R and the drift bound must be nonnegative")
    if drift_bound == 0:
        return 0.0
    return float((C_R * special.gamma(a) * drift_bound) ** (1.0 / a))


def _derivative_1d(v: Observable, decay: float, q: float, x: np.ndarray) -> np.ndarray:
    """d/dx E v(decay·x + √q Z) by Gaussian integration by parts, v single-coordinate."""
    z, w = _line_nodes(2001)
    sd = math.sqrt(q)
    y = decay * x[:, None] + sd * z
    vals = np.asarray(v(y.reshape(1, -1)), dtype=float).reshape(len(x), -1)
    return decay / sd * ((vals * z) @ w)


def _mode_gradient_sup(
    spectrum: Spectrum,
    noise: NoiseSpec,
    v: Observable,
    t: float,
    modes: Sequence[int],
    scan: np.ndarray,
    gamma: float = 0.0,
) -> float:
    """max over modes k and scan points x of λ_k^γ |∂_k R_t v_k(x)| for v_k(x) = v(x_k)."""
    q = qt_diagonal(spectrum, noise, t).variances
    lam = spectrum.eigenvalues
    best = 0.0
    for k in modes:
        d = _derivative_1d(v, math.exp(-t * lam[k]), float(q[k]), scan)
        best = max(best, float(lam[k] ** gamma * np.abs(d).max()))
    return best


def _scan_points(spectrum: Spectrum, noise: NoiseSpec) -> np.ndarray:
    spread = 3.0 * float(np.sqrt(qt_diagonal(spectrum, noise, math.inf).variances.max()))
    return np.union1d(np.linspace(-spread, spread, 25), [0.0])


def estimate_C_R(problem: ProjectedProblem, t_grid: Optional[np.ndarray] = None) -> float:
    """
    Empirical smoothing constant, inflated by 1.5.

    max over t, the modes of the problem and the catalog {clipped-sign,
    gaussian-bump} of t^{½+δ} sup_x ‖D R_t v‖ / sup|v|.
    """
    if t_grid is None:
        t_grid = np.logspace(-4, 0.5, 19)
    scan = _scan_points(problem.spectrum, problem.noise)
    catalog = [ClippedSign(), GaussianBump()]
    best = 0.0
    for t in t_grid:
        for v in catalog:
            sup = _mode_gradient_sup(problem.spectrum, problem.noise, v, float(t), range(problem.m), scan)
            best = max(best, t ** (0.5 + problem.delta) * sup / v.sup)
    value = C_R_INFLATION * best
    logging.info(f"Estimated C_R = {value:.6g} (inflation {C_R_INFLATION})")
    return value


def drift_bound(problem: ProjectedProblem) -> float:
    """sup ‖B‖_{-2β}: the drift's own bound, else the maximum over the grid box."""
    if not problem.has_drift:
        return 0.0
    bound = problem.drift.bound()
    if bound is not None:
        return float(bound)
    values = problem.drift(problem.grid())
    weights = problem.spectrum.eigenvalues[:, None] ** (-problem.beta)
    return float(np.sqrt(np.sum((weights * values) ** 2, axis=0)).max())


@dataclass
class KolmogorovSolution:
    """
    Grid representation of the mild solution u.

    Attributes:
        axes: Grid axes, one per mode
        values: u on the grid, shape (P,)*m
        gradient: Du on the grid, shape (m,) + (P,)*m
        factors: Contraction factor of every Picard sweep after the first
        sweeps: Number of sweeps performed
        converged: True when the last update was below tolerance
        horizon: Truncation T_λ of the time integral
        lambda0: Contraction threshold used for the check (0 for B = 0)
    """

    axes: List[np.ndarray]
    values: np.ndarray
    gradient: np.ndarray
    factors: List[float] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    horizon: float = 0.0
    lambda0: float = 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """u at points (m,) or (m, G), constant continuation outside the box."""
        points, single = _as_points(len(self.axes), x)
        out = _interpolate(self.axes, self.values, points)
        return out[0] if single else out

    def du(self, x: np.ndarray) -> np.ndarray:
        """Du at points, shape (m, G)."""
        points, single = _as_points(len(self.axes), x)
        out = np.stack([_interpolate(self.axes, g, points) for g in self.gradient])
        return out[:, 0] if single else out

    @property
    def c1_norm(self) -> float:
        """Grid sup of |u| plus grid sup of ‖Du‖."""
        return float(np.abs(self.values).max() + np.sqrt(np.sum(self.gradient**2, axis=0)).max())


def _clip_to_box(axes: List[np.ndarray], points: np.ndarray) -> np.ndarray:
    lo = np.array([ax[0] for ax in axes])[:, None]
    hi = np.array([ax[-1] for ax in axes])[:, None]
    return np.clip(points, lo, hi)


def _interpolate(axes: List[np.ndarray], values: np.ndarray, points: np.ndarray) -> np.ndarray:
    clipped = _clip_to_box(axes, points)
    if len(axes) == 1:
        return np.interp(clipped[0], axes[0], values)
    rule = interpolate.RegularGridInterpolator(tuple(axes), values, method="linear")
    return rule(clipped.T)


def _grid_gradient(axes: List[np.ndarray], values: np.ndarray) -> np.ndarray:
    if len(axes) == 1:
        return np.gradient(values, axes[0], edge_order=2)[None]
    return np.stack(np.gradient(values, *axes, edge_order=2))


class MildOperator:
    """
    The map 𝒯_λ on grid functions.

    The time integral is split at t_min = 1e-6: [0, t_min] contributes
    t_min times the integrand at t = 0, and [t_min, T_λ] is integrated by
    Gauss–Legendre in s = log t. The f-part is precomputed for the current
    horizon, with f evaluated exactly at the Gaussian nodes; B is evaluated
    exactly at the nodes and only Du is interpolated.
    """

    def __init__(self, problem: ProjectedProblem, time_nodes: int = 48):
        self.problem = problem
        self.axes = problem.axes()
        self.points = problem.grid()
        self.shape = (problem.grid_points,) * problem.m
        self.time_nodes = time_nodes
        self.f_sup = problem.observable.sup
        self.b_sup = drift_bound(problem)
        self.horizon = 0.0
        self._f_part = None
        self._b_at_points = problem.b(self.points) if problem.has_drift else None
        z, w, mc = _nodes(problem.m, "hermite" if problem.m <= 3 else "mc", problem.order, 4096, 0)
        self.z, self.w, self.mc = z, w, mc

    def horizon_for(self, tol: float, du_sup: float) -> float:
        """T_λ with e^{-λT}(sup|f| + sup‖B‖ sup‖Du‖)/λ ≤ tol/10, never decreasing."""
        lam = self.problem.lam
        total = self.f_sup + self.b_sup * du_sup
        T = math.log(max(10.0 * total / (lam * tol), math.e)) / lam
        return max(T, 10.0 * T_MIN, self.horizon)

    def _time_rule(self) -> Tuple[np.ndarray, np.ndarray]:
        s, w = np.polynomial.legendre.leggauss(self.time_nodes)
        lo, hi = math.log(T_MIN), math.log(self.horizon)
        s = 0.5 * (hi - lo) * s + 0.5 * (hi + lo)
        t = np.exp(s)
        return t, 0.5 * (hi - lo) * w * t * np.exp(-self.problem.lam * t)

    def _gaussian(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        decay = np.exp(-t * self.problem.spectrum.eigenvalues)
        sd = np.sqrt(qt_diagonal(self.problem.spectrum, self.problem.noise, t).variances)
        return decay, sd

    def set_horizon(self, horizon: float) -> None:
        if horizon <= self.horizon and self._f_part is not None:
            return
        self.horizon = horizon
        times, weights = self._time_rule()
        f = self.problem.f
        total = T_MIN * f(self.points)
        for t, wt in zip(times, weights):
            decay, sd = self._gaussian(t)
            value, _ = _expect(f, decay[:, None] * self.points, sd, self.z, self.w, self.mc)
            total = total + wt * value
        self._f_part = total
        logging.debug(f"Time integral truncated at T_lambda={horizon:.6g}")

    def apply(self, values: np.ndarray) -> np.ndarray:
        """One application of 𝒯_λ to grid values."""
        if self._f_part is None:
            raise RuntimeError("MildOperator.set_horizon must be called before apply")
        out = self._f_part.copy()
        if self._b_at_points is None:
            return out.reshape(self.shape)
        gradient = _grid_gradient(self.axes, values)
        m = self.problem.m

        def coupling(y: np.ndarray) -> np.ndarray:
            du = np.stack([_interpolate(self.axes, g, y) for g in gradient])
            return np.sum(self.problem.b(y) * du, axis=0)

        du_here = gradient.reshape(m, -1)
        out = out + T_MIN * np.sum(self._b_at_points * du_here, axis=0)
        times, weights = self._time_rule()
        for t, wt in zip(times, weights):
            decay, sd = self._gaussian(t)
            value, _ = _expect(coupling, decay[:, None] * self.points, sd, self.z, self.w, self.mc)
            out = out + wt * value
        return out.reshape(self.shape)


def _c1_distance(axes: List[np.ndarray], diff: np.ndarray) -> float:
    grad = _grid_gradient(axes, diff)
    return float(np.abs(diff).max() + np.sqrt(np.sum(grad**2, axis=0)).max())


def apply_T(problem: ProjectedProblem, values: np.ndarray, tol: float = 1e-3, horizon: Optional[float] = None) -> np.ndarray:
    """
    A single application of 𝒯_λ to grid values of u.

    Args:
        problem: Projected problem
        values: u on the problem's grid
        tol: Tolerance fixing the time-integral horizon
        horizon: Explicit horizon T_λ (overrides tol)

    Returns:
        np.ndarray: 𝒯_λ u on the grid
    """
    operator = MildOperator(problem)
    values = np.asarray(values, dtype=float).reshape(operator.shape)
    if horizon is None:
        du_sup = float(np.sqrt(np.sum(_grid_gradient(operator.axes, values) ** 2, axis=0)).max())
        horizon = operator.horizon_for(tol, du_sup)
    operator.set_horizon(horizon)
    return operator.apply(values)


def solve_mild(
    problem: ProjectedProblem,
    tol: float = 1e-3,
    max_sweeps: int = 200,
    initial: str = "zero",
    C_R: Optional[float] = None,
    enforce_threshold: bool = True,
) -> KolmogorovSolution:
    """
    Picard iteration u ← 𝒯_λ u for the mild Kolmogorov equation.

    Args:
        problem: Projected problem
        tol: Stop once a sweep changes u by at most tol/2 in grid sup
        max_sweeps: Sweep limit
        initial: "zero" or "f/lambda" starting point
        C_R: Smoothing constant for the threshold (estimated when None)
        enforce_threshold: Refuse λ ≤ λ₀

    Returns:
        KolmogorovSolution with grid values, gradients and contraction factors

    Raises:
        ValueError: If λ ≤ λ₀ while the threshold is enforced, or δ + β ≥ ½ for a nonzero drift
        ContractionError: If two consecutive sweeps fail to contract
    """
    if tol <= 0:
        raise ValueError(f"Invalid tolerance: {tol} (must be positive)")
    if initial not in ("zero", "f/lambda"):
        raise ValueError(f"Invalid initial: {initial!r} (must be 'zero' or 'f/lambda')")
    operator = MildOperator(problem)
    threshold = 0.0
    if problem.has_drift:
        if enforce_threshold or C_R is not None:
            if C_R is None:
                C_R = estimate_C_R(problem)
            threshold = lambda0(C_R, operator.b_sup, problem.delta, problem.beta)
        if enforce_threshold and problem.lam <= threshold:
            raise ValueError(f"Invalid lambda: {problem.lam:.6g} must exceed lambda0={threshold:.6g}")

    if initial == "zero":
        u = np.zeros(operator.shape)
    else:
        u = (problem.f(operator.points) / problem.lam).reshape(operator.shape)

    factors: List[float] = []
    previous = None
    converged = False
    sweeps = 0
    du_sup = 0.0
    for sweeps in range(1, max_sweeps + 1):
        operator.set_horizon(operator.horizon_for(tol, du_sup))
        new = operator.apply(u)
        diff = new - u
        change = float(np.abs(diff).max())
        distance = _c1_distance(operator.axes, diff)
        u = new
        du_sup = max(du_sup, float(np.sqrt(np.sum(_grid_gradient(operator.axes, u) ** 2, axis=0)).max()))
        if previous is not None and previous > 0:
            factors.append(distance / previous)
            logging.debug(f"Sweep {sweeps}: change {change:.3e}, factor {factors[-1]:.4f}")
            if len(factors) >= 2 and factors[-1] >= 1.0 and factors[-2] >= 1.0:
                raise ContractionError(factors)
        previous = distance
        if change <= 0.5 * tol:
            converged = True
            break

    if not converged:
        logging.warning(f"Picard iteration stopped after {sweeps} sweeps without reaching tol={tol}")
    else:
        logging.info(f"Picard iteration converged in {sweeps} sweeps (T_lambda={operator.horizon:.4g})")
    return KolmogorovSolution(
        axes=operator.axes,
        values=u,
        gradient=_grid_gradient(operator.axes, u),
        factors=factors,
        sweeps=sweeps,
        converged=converged,
        horizon=operator.horizon,
        lambda0=threshold,
    )


@dataclass
class ResidualReport:
    """Pointwise strong-form residuals at interior grid points."""

    points: np.ndarray
    values: np.ndarray
    spacing: float

    @property
    def sup(self) -> float:
        return float(np.abs(self.values).max())


def _second_derivatives(axes: List[np.ndarray], values: np.ndarray) -> np.ndarray:
    """∂²u/∂x_k² by central differences, shape (m,) + grid."""
    out = []
    for k, ax in enumerate(axes):
        h = ax[1] - ax[0]
        d2 = np.zeros_like(values)
        inner = [slice(None)] * values.ndim
        plus, minus = list(inner), list(inner)
        inner[k], plus[k], minus[k] = slice(1, -1), slice(2, None), slice(None, -2)
        d2[tuple(inner)] = (values[tuple(plus)] - 2.0 * values[tuple(inner)] + values[tuple(minus)]) / h**2
        out.append(d2)
    return np.stack(out)


def _interior_mask(axes: List[np.ndarray], fraction: float) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    R = axes[0][-1]
    mask = np.ones(mesh[0].shape, dtype=bool)
    for g in mesh:
        mask &= np.abs(g) <= fraction * R
    return mask


def residual_strong(problem: ProjectedProblem, solution: KolmogorovSolution, fraction: float = 0.5) -> ResidualReport:
    """
    λu - ½Σ g_k² ∂²_k u + Σ λ_k x_k ∂_k u - f - ⟨B, Du⟩ at interior grid points.

    With a regularizer on the problem, f and B are f_ε and B_ε. Points
    within `fraction` of the box half-width are used, away from the
    constant continuation.
    """
    axes = solution.axes
    m = len(axes)
    g2 = qt_diagonal(problem.spectrum, problem.noise, math.inf).variances * 2.0 * problem.spectrum.eigenvalues
    mask = _interior_mask(axes, fraction)
    d2 = _second_derivatives(axes, solution.values)
    points = np.stack([g[mask] for g in np.meshgrid(*axes, indexing="ij")])
    grad = np.stack([g[mask] for g in solution.gradient])
    lam_k = problem.spectrum.eigenvalues[:, None]
    residual = (
        problem.lam * solution.values[mask]
        - 0.5 * np.sum(g2[:, None] * np.stack([d[mask] for d in d2]), axis=0)
        + np.sum(lam_k * points * grad, axis=0)
        - problem.f(points)
    )
    if problem.has_drift:
        residual = residual - np.sum(problem.b(points) * grad, axis=0)
    spacing = float(axes[0][1] - axes[0][0])
    logging.debug(f"Residual sup {float(np.abs(residual).max()):.3e} on {points.shape[1]} points (m={m})")
    return ResidualReport(points=points, values=residual, spacing=spacing)


def trace_remainder(
    problem: ProjectedProblem,
    solution: KolmogorovSolution,
    j: int,
    fraction: float = 0.25,
) -> float:
    """
    Mean over interior grid points of |Σ_{k>j} g_k² ∂²_k u|.

    Raises:
        ValueError: If j is outside 0..m
    """
    m = len(solution.axes)
    if not 0 <= j <= m:
        raise ValueError(f"Invalid projection index: {j} (must be in 0..{m})")
    if j == m:
        return 0.0
    g2 = qt_diagonal(problem.spectrum, problem.noise, math.inf).variances * 2.0 * problem.spectrum.eigenvalues
    mask = _interior_mask(solution.axes, fraction)
    d2 = _second_derivatives(solution.axes, solution.values)
    tail = sum(g2[k] * d2[k][mask] for k in range(j, m))
    return float(np.mean(np.abs(tail)))


@dataclass
class SmoothingReport:
    """
    Measured gradient norms of R_t v against t.

    Attributes:
        times: t grid
        norms: sup over modes and scan points of λ_k^γ |D_k R_t v|
        fitted_slope: Least-squares log-log slope
        expected_slope: -(½ + δ + γ)
        observable: Name of v
    """

    times: np.ndarray
    norms: np.ndarray
    fitted_slope: float
    expected_slope: float
    observable: str

    def within(self, tolerance: float = 0.15) -> bool:
        return abs(self.fitted_slope - self.expected_slope) <= tolerance

    def rows(self) -> List[dict]:
        return [{"t": float(t), "norm": float(n), "fitted_slope": self.fitted_slope} for t, n in zip(self.times, self.norms)]


def verify_smoothing(
    problem: ProjectedProblem,
    observable: Optional[Observable] = None,
    t_grid: Optional[np.ndarray] = None,
    gamma: float = 0.0,
    modes: Optional[int] = None,
) -> SmoothingReport:
    """
    Measure the blow-up rate of ‖A^γ D(R_t v)‖ as t ↓ 0.

    The covariance is diagonal, so for v depending on one coordinate the
    gradient of R_t v lives in that mode. The norm at time t is the maximum
    over the modes of the ambient spectrum (and a scan of points) of
    λ_k^γ |∂_k R_t v(x)|, computed by Gaussian integration by parts on a
    dense line rule.

    Args:
        problem: Projected problem; its ambient spectrum supplies the modes
        observable: Single-coordinate v (default: clipped sign)
        t_grid: Times (default: logspace(-3, -1, 9))
        gamma: Fractional order γ ∈ [0, ½ - δ)
        modes: Number of ambient modes scanned (default: all)

    Returns:
        SmoothingReport with norms and fitted slope

    Raises:
        ValueError: If γ is outside [0, ½ - δ)
    """
    delta = problem.delta
    if not 0 <= gamma < 0.5 - delta:
        raise ValueError(f"Invalid gamma: {gamma} (must lie in [0, {0.5 - delta:g}))")
    if observable is None:
        observable = ClippedSign()
    if t_grid is None:
        t_grid = np.logspace(-3, -1, 9)
    spectrum = problem.ambient
    count = spectrum.cutoff if modes is None else min(modes, spectrum.cutoff)
    scan = _scan_points(spectrum, problem.noise)
    norms = np.array(
        [_mode_gradient_sup(spectrum, problem.noise, observable, float(t), range(count), scan, gamma) for t in t_grid]
    )
    slope = fit_loglog_slope(t_grid, norms)
    expected = -(0.5 + delta + gamma)
    logging.info(f"Smoothing slope {slope:.3f} for {observable.name} (reference {expected:.3f})")
    return SmoothingReport(
        times=np.asarray(t_grid, dtype=float),
        norms=norms,
        fitted_slope=slope,
        expected_slope=expected,
        observable=observable.name,
    )
