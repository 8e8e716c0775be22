"""
Covariance operators of the stochastic convolution in closed per-mode form.

G commutes with A, so G, Q = GG*, Q_t and Q_∞ are all diagonal in the
eigenbasis. This module evaluates them, certifies trace-class and
Hilbert–Schmidt properties by exponent tests with integral tail bounds,
and checks the time-integrability conditions on the noise together with
the gradient bounds of the Ornstein–Uhlenbeck semigroup.

Rough noise G = A^γ is analysed in the shifted space D(A^{-γ}), where it is
cylindrical; the criteria below then use a frame exponent of zero.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, optimize, special

from .spectral import Spectrum, effective_dimension, frac_power_apply, sobolev_norm
from .utils import fit_loglog_slope


class NoiseKind(str, Enum):
    """Colored noise G = A^{-δ} or rough noise G = A^{γ}."""

    COLORED = "colored"
    ROUGH = "rough"


@dataclass(frozen=True)
class NoiseSpec:
    """
    Diagonal noise covariance description.

    Attributes:
        kind: Colored or rough
        exponent: δ for colored noise, γ for rough noise (nonnegative)
        hs_shift: δ' for the ℒ²(H, D(A^{δ'})) check
    """

    kind: NoiseKind = NoiseKind.COLORED
    exponent: float = 0.0
    hs_shift: float = 0.0

    def __post_init__(self):
        """Validate the noise parameters after initialization."""
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.exponent < 0:
            raise ValueError(f"Invalid noise exponent: {self.exponent} (must be nonnegative)")
        if self.hs_shift < 0:
            raise ValueError(f"Invalid hs_shift: {self.hs_shift} (must be nonnegative)")

    @property
    def sigma(self) -> float:
        """Exponent s with G = A^{-s} on H (δ, or -γ for rough noise)."""
        return float(self.exponent) if self.kind == NoiseKind.COLORED else -float(self.exponent)

    @property
    def frame_delta(self) -> float:
        """Colored exponent in the space where the hypotheses are checked."""
        return float(self.exponent) if self.kind == NoiseKind.COLORED else 0.0


@dataclass(frozen=True)
class CovarianceDiag:
    """
    Per-mode variances q_k(t) of the stochastic convolution.

    Attributes:
        t: Time
        variances: q_k(t) = g_k²(1 - e^{-2tλ_k}) / (2λ_k)
        trace: Compensated partial sum Σ_{k≤n} q_k(t)
        tail_bound: Upper bound for Σ_{k>n} q_k(t) (inf when not certified)
        trace_class: Analytic trace-class flag
    """

    t: float
    variances: np.ndarray
    trace: float
    tail_bound: float
    trace_class: bool


def gains(spec: Spectrum, noise: NoiseSpec) -> np.ndarray:
    """Per-mode gains g_k of G on H."""
    return spec.eigenvalues ** (-noise.sigma)


def _frame_gains(spec: Spectrum, noise: NoiseSpec) -> np.ndarray:
    return spec.eigenvalues ** (-noise.frame_delta)


def _growth_constants(spec: Spectrum) -> Tuple[float, float, float]:
    """(c_low, c_high, c) with c_low k^c ≤ λ_k ≤ c_high k^c over the retained modes."""
    c = 2.0 / effective_dimension(spec)
    k = np.arange(1, spec.cutoff + 1, dtype=float)
    ratio = spec.eigenvalues / k**c
    return float(ratio.min()), float(ratio.max()), c


def _power_tail(coeff: float, exponent: float, n: int) -> float:
    """Σ_{k>n} coeff·k^{exponent} bounded by ∫_n^∞; inf when it diverges."""
    if exponent >= -1:
        return math.inf
    return coeff * n ** (exponent + 1) / (-(exponent + 1))


def _power_exp_tail(a: float, b: float, c: float, n: int) -> float:
    """∫_n^∞ k^a e^{-b k^c} dk via the upper incomplete gamma function."""
    s = (a + 1.0) / c
    if s <= 0:
        return math.inf
    return float(b ** (-s) * special.gamma(s) * special.gammaincc(s, b * n**c) / c)


def qt_diagonal(spec: Spectrum, noise: NoiseSpec, t: float) -> CovarianceDiag:
    """
    Closed-form diagonal of Q_t = ∫_0^t S(s) Q S(s) ds.

    Args:
        spec: Spectrum of A
        noise: Noise description
        t: Nonnegative time (np.inf gives Q_∞)

    Returns:
        CovarianceDiag with variances, compensated trace and tail bound

    Raises:
        ValueError: If t is negative
    """
    if t < 0:
        raise ValueError(f"Invalid time: t must be nonnegative, got {t}")
    lam = spec.eigenvalues
    g2 = gains(spec, noise) ** 2
    if math.isinf(t):
        variances = g2 / (2.0 * lam)
    else:
        variances = g2 * -np.expm1(-2.0 * t * lam) / (2.0 * lam)

    converges = check_trace_class(spec, noise)
    if t == 0:
        tail = 0.0
    else:
        c_low, _, c = _growth_constants(spec)
        # q_k ≤ g_k² / (2λ_k) = λ_k^{-(1 + 2σ)} / 2
        e = 1.0 + 2.0 * noise.sigma
        tail = _power_tail(0.5 * c_low ** (-e), -c * e, spec.cutoff) if converges else math.inf
    return CovarianceDiag(
        t=float(t),
        variances=variances,
        trace=math.fsum(variances),
        tail_bound=tail,
        trace_class=converges,
    )


def check_trace_class(spec: Spectrum, noise: NoiseSpec) -> bool:
    """Q_t is trace class for t > 0 iff Σ λ_k^{-(1+2σ)} converges, i.e. 2(1+2σ)/d_eff > 1."""
    return 2.0 * (1.0 + 2.0 * noise.sigma) / effective_dimension(spec) > 1.0


def q_infinity_trace(spec: Spectrum, noise: NoiseSpec) -> Tuple[float, bool]:
    """
    Trace of the stationary covariance Q_∞ = ½ A^{-1} Q.

    Returns:
        (partial sum plus certified tail, converges); the estimate is inf
        when the exponent test fails
    """
    diag = qt_diagonal(spec, noise, math.inf)
    if not diag.trace_class:
        return math.inf, False
    return diag.trace + diag.tail_bound, True


def xi_max(spec: Spectrum, noise: NoiseSpec, margin: float = 1e-6) -> Optional[float]:
    """Supremum of admissible ξ in the time-integrability condition, capped below ½."""
    value = noise.frame_delta + 0.5 - effective_dimension(spec) / 4.0
    if value <= 0:
        return None
    return min(value, 0.5) - margin


def theta_min(spec: Spectrum, noise: NoiseSpec) -> float:
    """Infimum of admissible ϑ in the ℒ⁴/ℒ² interpolation condition."""
    return effective_dimension(spec) / (2.0 * (1.0 + 2.0 * noise.frame_delta))


def check_cont_time(spec: Spectrum, noise: NoiseSpec, xi: float, T: float) -> Tuple[bool, float]:
    """
    Check ∫_0^T t^{-2ξ} ‖S(t)G‖²_{ℒ²} dt < ∞.

    Each mode integrates exactly to g_k² (2λ_k)^{2ξ-1} γ(1-2ξ, 2λ_k T); the
    tail over k > n is bounded by dropping the incomplete gamma factor.

    Args:
        spec: Spectrum of A
        noise: Noise description
        xi: Exponent ξ in (0, ½)
        T: Horizon

    Returns:
        (criterion holds, integral estimate)

    Raises:
        ValueError: If ξ is outside (0, ½) or T is not positive
    """
    if not 0 < xi < 0.5:
        raise ValueError(f"Invalid xi: {xi} (must lie in (0, 1/2))")
    if T <= 0:
        raise ValueError(f"Invalid horizon: {T} (must be positive)")
    lam = spec.eigenvalues
    g2 = _frame_gains(spec, noise) ** 2
    a = 1.0 - 2.0 * xi
    terms = g2 * (2.0 * lam) ** (-a) * special.gamma(a) * special.gammainc(a, 2.0 * lam * T)
    holds = xi < noise.frame_delta + 0.5 - effective_dimension(spec) / 4.0
    if not holds:
        return False, math.inf
    c_low, _, c = _growth_constants(spec)
    # g_k² λ_k^{-a} = λ_k^{-(a + 2δ)}
    e = a + 2.0 * noise.frame_delta
    tail = _power_tail(2.0 ** (-a) * special.gamma(a) * c_low ** (-e), -c * e, spec.cutoff)
    return True, math.fsum(terms) + tail


@dataclass(frozen=True)
class SchattenEstimate:
    """
    Truncated Schatten-norm series of the Ornstein–Uhlenbeck smoothing operators.

    Attributes:
        t: Time
        l4_fourth: ‖Q_t^{-1/2}S(t)G‖⁴_{ℒ⁴}, partial sum
        l2_squared: ‖Q_t^{-1/2}S(2t)Q‖²_{ℒ²}, partial sum
        l4_tail: Tail bound for the ℒ⁴ series
        l2_tail: Tail bound for the ℒ² series
        l4_ratio: ‖·‖²_{ℒ⁴}·t^{1+ε/2}, a lower estimate of C_ε
        l2_ratio: ‖·‖_{ℒ²}·t^{(1+σ)/2}, a lower estimate of C_σ
    """

    t: float
    l4_fourth: float
    l2_squared: float
    l4_tail: float
    l2_tail: float
    l4_ratio: float
    l2_ratio: float

    @property
    def l4_norm(self) -> float:
        return self.l4_fourth**0.25

    @property
    def l2_norm(self) -> float:
        return math.sqrt(self.l2_squared)


def _l4_terms(lam: np.ndarray, t: float) -> np.ndarray:
    return 4.0 * lam**2 * np.exp(-4.0 * t * lam) / np.expm1(-2.0 * t * lam) ** 2


def _l2_terms(lam: np.ndarray, g2: np.ndarray, t: float) -> np.ndarray:
    return 2.0 * lam * g2 * np.exp(-4.0 * t * lam) / -np.expm1(-2.0 * t * lam)


def l4_integrand(
    spec: Spectrum,
    noise: NoiseSpec,
    t: float,
    epsilon: Optional[float] = None,
    sigma: Optional[float] = None,
) -> SchattenEstimate:
    """
    Evaluate the ℒ⁴ and ℒ² series entering the noise integrability condition.

    Args:
        spec: Spectrum of A
        noise: Noise description
        t: Positive time
        epsilon: ε of the ℒ⁴ bound (defaults to d_eff/2 + 0.01)
        sigma: σ of the ℒ² bound (defaults to d_eff/2 - 2δ + 0.01)

    Returns:
        SchattenEstimate with partial sums, tail bounds and constant ratios

    Raises:
        ValueError: If t is not positive
    """
    if t <= 0:
        raise ValueError(f"Invalid time: t must be positive, got {t}")
    d_eff = effective_dimension(spec)
    delta = noise.frame_delta
    if epsilon is None:
        epsilon = d_eff / 2.0 + 0.01
    if sigma is None:
        sigma = d_eff / 2.0 - 2.0 * delta + 0.01
    lam = spec.eigenvalues
    l4 = math.fsum(_l4_terms(lam, t))
    l2 = math.fsum(_l2_terms(lam, _frame_gains(spec, noise) ** 2, t))

    c_low, c_high, c = _growth_constants(spec)
    n = spec.cutoff
    damp = -math.expm1(-2.0 * t * lam[-1])
    b = 4.0 * t * c_low
    l4_tail = 4.0 * c_high**2 * _power_exp_tail(2.0 * c, b, c, n) / damp**2
    c_l2 = c_high if delta <= 0.5 else c_low
    l2_tail = 2.0 * c_l2 ** (1.0 - 2.0 * delta) * _power_exp_tail(c * (1.0 - 2.0 * delta), b, c, n) / damp

    return SchattenEstimate(
        t=float(t),
        l4_fourth=l4,
        l2_squared=l2,
        l4_tail=l4_tail,
        l2_tail=l2_tail,
        l4_ratio=math.sqrt(l4) * t ** (1.0 + epsilon / 2.0),
        l2_ratio=math.sqrt(l2) * t ** (0.5 * (1.0 + sigma)),
    )


def l4_smoothing_slope(
    spec: Spectrum,
    noise: NoiseSpec,
    t_min: float = 1e-3,
    t_max: float = 1e-1,
    points: int = 25,
) -> float:
    """
    Fitted small-time power of ‖Q_t^{-1/2}S(t)G‖²_{ℒ⁴} on a log grid.

    The limiting value is -(1 + ε/2) at ε = d_eff/2. On a bounded box the
    boundary modes bend the curve upward in t, so the window has to sit well
    below λ_1^{-1} and above λ_n^{-1}.

    Raises:
        ValueError: If the window is empty or not positive
    """
    if not 0 < t_min < t_max:
        raise ValueError(f"Invalid window: [{t_min}, {t_max}] (need 0 < t_min < t_max)")
    if t_min * spec.eigenvalues[-1] < 5.0:
        logging.warning(f"Window starts at t={t_min:.3g}, where n={spec.cutoff} modes truncate the series")
    t_grid = np.logspace(math.log10(t_min), math.log10(t_max), points)
    norms = [math.sqrt(l4_integrand(spec, noise, t).l4_fourth) for t in t_grid]
    slope = fit_loglog_slope(t_grid, np.asarray(norms))
    logging.debug(f"L4 smoothing slope {slope:.4f} on [{t_min:.3g}, {t_max:.3g}]")
    return slope


def _l4_exponent(spec: Spectrum, noise: NoiseSpec, theta: float) -> float:
    """Small-time power κ of the L4 integrand, t^{-κ}, at the limiting ε and σ."""
    d_eff = effective_dimension(spec)
    delta = noise.frame_delta
    return (1.0 - theta) * (1.0 + d_eff / 4.0) + 0.5 * theta * (1.0 + d_eff / 2.0 - 2.0 * delta)


def check_L4(spec: Spectrum, noise: NoiseSpec, lam: float, theta: float) -> Tuple[bool, float]:
    """
    Check ∫_0^∞ e^{-λt} ‖Q_t^{-1/2}S(t)G‖^{2(1-ϑ)}_{ℒ⁴} ‖Q_t^{-1/2}S(2t)Q‖^{ϑ}_{ℒ²} dt < ∞.

    The truncated series are integrated by adaptive quadrature on [t_c, ∞),
    split at t = 1. On (0, t_c), where truncation would hide the
    singularity, the integrand is continued by the power law t^{-κ}.

    Args:
        spec: Spectrum of A
        noise: Noise description
        lam: Decay rate λ > 0
        theta: Interpolation exponent ϑ in (0, 1)

    Returns:
        (criterion holds, integral estimate)

    Raises:
        ValueError: If λ ≤ 0 or ϑ is outside (0, 1)
    """
    if lam <= 0:
        raise ValueError(f"Invalid lambda: {lam} (must be positive)")
    if not 0 < theta < 1:
        raise ValueError(f"Invalid theta: {theta} (must lie in (0, 1))")
    holds = theta > theta_min(spec, noise)
    kappa = _l4_exponent(spec, noise, theta)
    ev = spec.eigenvalues
    g2 = _frame_gains(spec, noise) ** 2

    def integrand(t: float) -> float:
        l4 = math.fsum(_l4_terms(ev, t))
        l2 = math.fsum(_l2_terms(ev, g2, t))
        return math.exp(-lam * t) * l4 ** ((1.0 - theta) / 2.0) * l2 ** (theta / 2.0)

    if not holds:
        return False, math.inf
    t_c = min(7.5 / ev[-1], 0.1)
    head = integrate.quad(lambda s: integrand(math.exp(s)) * math.exp(s), math.log(t_c), 0.0, limit=200)[0]
    tail = integrate.quad(integrand, 1.0, np.inf, limit=200)[0]
    singular = integrand(t_c) * t_c / (1.0 - kappa)
    return True, singular + head + tail


@dataclass(frozen=True)
class SmoothingConstant:
    """
    Gradient bound constant of the Ornstein–Uhlenbeck semigroup.

    Attributes:
        value: C_γ
        argmax: Maximizing r
        certified: True when every mode satisfied the bound on the t-grid
        worst_ratio: Largest observed (mode expression)/(C_γ t^{-(½+δ+γ)})
    """

    value: float
    argmax: float
    certified: bool
    worst_ratio: float


def _smoothing_profile(a: float):
    def profile(r: float) -> float:
        return r**a * math.exp(-r) / math.sqrt(-math.expm1(-2.0 * r))

    return profile


def smoothing_constant(
    spec: Spectrum,
    noise: NoiseSpec,
    gamma: float,
    t_grid: Optional[np.ndarray] = None,
) -> SmoothingConstant:
    """
    C_γ = √2 · max_{r ≥ 0} r^{½+δ+γ} e^{-r} / √(1 - e^{-2r}).

    The maximum is bracketed by a coarse log-grid scan over [1e-6, 50] and
    refined by golden-section search in log r. The bound
    sup_k λ_k^γ e^{-tλ_k} √2 λ_k^{½+δ} / √(1 - e^{-2tλ_k}) ≤ C_γ t^{-(½+δ+γ)}
    is then certified on a t-grid.

    Raises:
        ValueError: If γ is negative
    """
    if gamma < 0:
        raise ValueError(f"Invalid gamma: {gamma} (must be nonnegative)")
    a = 0.5 + noise.frame_delta + gamma
    profile = _smoothing_profile(a)
    lo, hi = math.log(1e-6), math.log(50.0)
    scan = np.linspace(lo, hi, 201)
    values = np.array([profile(math.exp(s)) for s in scan])
    i = int(values.argmax())
    if 0 < i < len(scan) - 1:
        res = optimize.minimize_scalar(
            lambda s: -profile(math.exp(s)),
            bracket=(scan[i - 1], scan[i], scan[i + 1]),
            method="golden",
        )
        s_best = float(res.x)
    else:
        s_best = float(scan[i])
    r_best = math.exp(s_best)
    value = math.sqrt(2.0) * profile(r_best)

    if t_grid is None:
        t_grid = np.logspace(-4, 0, 25)
    lam = spec.eigenvalues
    worst = 0.0
    for t in t_grid:
        modes = lam**gamma * np.exp(-t * lam) * math.sqrt(2.0) * lam ** (0.5 + noise.frame_delta)
        modes = modes / np.sqrt(-np.expm1(-2.0 * t * lam))
        worst = max(worst, float(modes.max() / (value * t ** (-a))))
    certified = worst <= 1.0 + 1e-10
    logging.debug(f"Smoothing constant C_{gamma}={value:.6g} at r={r_best:.4g}, worst ratio {worst:.6f}")
    return SmoothingConstant(value=value, argmax=r_best, certified=certified, worst_ratio=worst)


def check_hs(spec: Spectrum, noise: NoiseSpec, delta_prime: Optional[float] = None) -> bool:
    """
    G ∈ ℒ²(H, D(A^{δ'})) iff Σ λ_k^{-2(σ-δ')} converges, i.e. σ - δ' > d_eff/4.

    Raises:
        ValueError: If δ' is negative
    """
    if delta_prime is None:
        delta_prime = noise.hs_shift
    if delta_prime < 0:
        raise ValueError(f"Invalid delta_prime: {delta_prime} (must be nonnegative)")
    return noise.sigma - delta_prime > effective_dimension(spec) / 4.0


@dataclass(frozen=True)
class ShiftedSeries:
    """ℒ² and ℒ⁴ series computed directly on H and in the shifted basis ẽ_k = λ_k^γ e_k."""

    l2_direct: float
    l2_shifted: float
    l4_direct: float
    l4_shifted: float


def shifted_series(spec: Spectrum, noise: NoiseSpec, t: float) -> ShiftedSeries:
    """
    Evaluate the smoothing-operator Schatten series in the shifted space D(A^{-γ}).

    For every diagonal operator T, ‖T ẽ_k‖_{-2γ} = |τ_k| with ẽ_k = λ_k^γ e_k, so
    both frames must give the same sums.
    """
    if t <= 0:
        raise ValueError(f"Invalid time: t must be positive, got {t}")
    gamma = float(noise.exponent) if noise.kind == NoiseKind.ROUGH else 0.0
    lam = spec.eigenvalues
    l4_mult = _l4_terms(lam, t) ** 0.25
    l2_mult = np.sqrt(_l2_terms(lam, _frame_gains(spec, noise) ** 2, t))

    basis = frac_power_apply(spec, gamma, np.eye(spec.cutoff))
    images_l4 = l4_mult[:, None] * basis
    images_l2 = l2_mult[:, None] * basis
    l4_shift = sobolev_norm(spec, -gamma, images_l4) ** 4
    l2_shift = sobolev_norm(spec, -gamma, images_l2) ** 2
    return ShiftedSeries(
        l2_direct=math.fsum(l2_mult**2),
        l2_shifted=math.fsum(l2_shift),
        l4_direct=math.fsum(l4_mult**4),
        l4_shifted=math.fsum(l4_shift),
    )


@dataclass(frozen=True)
class HypothesisReport:
    """Summary of the covariance calculus for one (spectrum, noise) pair."""

    effective_dimension: float
    frame_delta: float
    hilbert_schmidt: bool
    hilbert_schmidt_shifted: bool
    trace_class: bool
    xi_max: Optional[float]
    theta_min: float
    l4_exponent: float
    l2_exponent: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def hypothesis_report(spec: Spectrum, noise: NoiseSpec) -> HypothesisReport:
    """Gather the Hilbert–Schmidt, trace-class and integrability criteria in one record."""
    d_eff = effective_dimension(spec)
    delta = noise.frame_delta
    return HypothesisReport(
        effective_dimension=d_eff,
        frame_delta=delta,
        hilbert_schmidt=check_hs(spec, noise, 0.0),
        hilbert_schmidt_shifted=check_hs(spec, noise, noise.hs_shift),
        trace_class=check_trace_class(spec, noise),
        xi_max=xi_max(spec, noise),
        theta_min=theta_min(spec, noise),
        l4_exponent=-(1.0 + d_eff / 4.0),
        l2_exponent=-0.5 * (1.0 + d_eff / 2.0 - 2.0 * delta),
    )
