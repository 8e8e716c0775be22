"""
Parameter calculus deciding which uniqueness result covers a scenario.

Given an equation family and its exponents, `classify` selects the route
(bounded drift, unbounded drift, the limiting Hilbert–Schmidt case, or the
rough-noise shift), evaluates the family's admissible ranges exactly on
rationals and reports the binding constraints.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple, Union

Number = Union[int, float, str, Fraction]

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)
XI_MARGIN = 1e-6


def as_fraction(value: Number) -> Fraction:
    """Exact rational from an int, "p/q" string, decimal string or float (via its repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


class Family(str, Enum):
    """Equation families with a known admissible parameter region."""

    HEAT_PERTURB = "HeatPerturb"
    HEAT_POLYNOMIAL = "HeatPolynomial"
    DIVERGENCE_SUB = "DivergenceSub"
    DIVERGENCE_SUPER = "DivergenceSuper"
    NON_DIVERGENCE = "NonDivergence"
    BURGERS = "Burgers"
    CAHN_HILLIARD = "CahnHilliard"


class Route(str, Enum):
    """Which uniqueness argument applies."""

    BOUNDED = "bounded-drift"
    UNBOUNDED = "unbounded-drift"
    LIMITING = "unbounded-limiting"
    ROUGH = "rough-noise"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Interval:
    """
    Real interval with open or closed endpoints.

    Attributes:
        lo: Lower endpoint
        hi: Upper endpoint
        lo_closed: Whether lo belongs to the interval
        hi_closed: Whether hi belongs to the interval
    """

    lo: Fraction
    hi: Fraction
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))

    @classmethod
    def open(cls, lo: Number, hi: Number) -> "Interval":
        return cls(as_fraction(lo), as_fraction(hi), False, False)

    @classmethod
    def closed_open(cls, lo: Number, hi: Number) -> "Interval":
        return cls(as_fraction(lo), as_fraction(hi), True, False)

    @classmethod
    def point(cls, x: Number) -> "Interval":
        return cls(as_fraction(x), as_fraction(x), True, True)

    @property
    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def contains(self, x: Number) -> bool:
        x = as_fraction(x)
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def on_open_endpoint(self, x: Number) -> bool:
        x = as_fraction(x)
        return (x == self.lo and not self.lo_closed) or (x == self.hi and not self.hi_closed)

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


def _hull(intervals: List[Interval]) -> Interval:
    lo = min(intervals, key=lambda i: (i.lo, not i.lo_closed))
    hi = max(intervals, key=lambda i: (i.hi, i.hi_closed))
    return Interval(lo.lo, hi.hi, lo.lo_closed, hi.hi_closed)


@dataclass(frozen=True)
class Constraint:
    """
    A named inequality evaluated at the scenario parameters.

    Attributes:
        name: Human readable name
        lhs: Evaluated left side
        op: One of "<", "<=", ">", ">=", "==", "in"
        rhs: Evaluated right side (a value or an Interval)
        holds: Whether the inequality holds
        symbol: Parameter symbol for membership constraints
        boundary: True when a failing membership sits exactly on an open endpoint
    """

    name: str
    lhs: Any
    op: str
    rhs: Any
    holds: bool
    symbol: str = ""
    boundary: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "lhs": str(self.lhs),
            "op": self.op,
            "rhs": str(self.rhs),
            "holds": self.holds,
        }


_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
}


def _compare(name: str, lhs: Any, op: str, rhs: Any) -> Constraint:
    return Constraint(name=name, lhs=lhs, op=op, rhs=rhs, holds=bool(_OPS[op](lhs, rhs)))


def _member(name: str, symbol: str, value: Fraction, interval: Interval) -> Constraint:
    holds = interval.contains(value)
    return Constraint(
        name=name,
        lhs=value,
        op="in",
        rhs=interval,
        holds=holds,
        symbol=symbol,
        boundary=(not holds) and interval.on_open_endpoint(value),
    )


@dataclass
class ScenarioParams:
    """
    Equation family with its exponents.

    Attributes:
        family: Equation family
        d: Space dimension (1-3)
        p: Polynomial growth (HeatPolynomial only)
        alpha: α; fixed by the family unless it is a free parameter
        beta: β; fixed by the family unless it is a free parameter
        delta: Colored-noise exponent δ
        gamma: Rough-noise exponent γ (DivergenceSuper only)
        drift_bounded: Whether the nonlinearity F is bounded
        delta_prime: Optional δ' for the Hilbert–Schmidt side condition
    """

    family: Family
    d: int
    p: Optional[Fraction] = None
    alpha: Optional[Fraction] = None
    beta: Optional[Fraction] = None
    delta: Fraction = Fraction(0)
    gamma: Optional[Fraction] = None
    drift_bounded: bool = False
    delta_prime: Optional[Fraction] = None

    def __post_init__(self):
        """Normalize numbers to exact rationals."""
        self.family = Family(self.family)
        self.d = int(self.d)
        if self.d not in (1, 2, 3):
            raise ValueError(f"Invalid dimension: {self.d} (must be 1, 2 or 3)")
        for name in ("p", "alpha", "beta", "gamma", "delta_prime"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, as_fraction(value))
        self.delta = as_fraction(self.delta)
        if self.delta < 0:
            raise ValueError(f"Invalid delta: {self.delta} (must be nonnegative)")

    @property
    def power(self) -> int:
        """p_A of the family's linear operator."""
        return 2 if self.family == Family.CAHN_HILLIARD else 1


@dataclass
class Verdict:
    """
    Outcome of `classify`.

    Attributes:
        admissible: Whether every binding constraint holds
        route: Selected argument, or Rejected
        constraints: Binding constraints with evaluated sides
        initial_space: Label of the required initial-datum space
        alpha: Effective α used by the route
        beta: Effective β used by the route
        delta_interval: Admissible δ-interval, when the family has one
        gamma_interval: Admissible γ-interval for the rough-noise route
        boundary_excluded: A failing constraint sits on an open endpoint
        max_delta_prime: Supremum of δ' in the limiting case
        notes: Remarks, e.g. where the published range is wider than the calculus
        diagnostics: Values of the covariance calculus (ξ_max, ϑ_min, ...)
    """

    admissible: bool
    route: Route
    constraints: List[Constraint]
    initial_space: str
    alpha: Fraction
    beta: Fraction
    delta_interval: Optional[Interval] = None
    gamma_interval: Optional[Interval] = None
    boundary_excluded: bool = False
    max_delta_prime: Optional[Fraction] = None
    notes: List[str] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def boundary_message(self) -> Optional[str]:
        """Message naming the open endpoint the parameters sit on, if any."""
        for c in self.constraints:
            if c.boundary and not c.holds:
                if c.lhs == c.rhs.lo:
                    return f"boundary excluded: {c.symbol} must exceed {c.rhs.lo}"
                return f"boundary excluded: {c.symbol} must be below {c.rhs.hi}"
        return None

    def failed(self) -> List[Constraint]:
        return [c for c in self.constraints if not c.holds]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "admissible": self.admissible,
            "route": self.route.value,
            "constraints": [c.to_dict() for c in self.constraints],
            "initial_space": self.initial_space,
            "alpha": str(self.alpha),
            "beta": str(self.beta),
            "delta_interval": str(self.delta_interval) if self.delta_interval else None,
            "gamma_interval": str(self.gamma_interval) if self.gamma_interval else None,
            "boundary_excluded": self.boundary_excluded,
            "max_delta_prime": str(self.max_delta_prime) if self.max_delta_prime is not None else None,
            "notes": list(self.notes),
            "diagnostics": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.diagnostics.items()},
        }


@dataclass(frozen=True)
class HeatPolynomialParams:
    """Optimal integrability exponent and the resulting α, β for polynomial drifts."""

    r_opt: Fraction
    alpha_opt: Fraction
    beta_opt: Fraction
    delta_interval: Interval
    feasible: bool


def heat_polynomial_params(d: int, p: Number) -> HeatPolynomialParams:
    """
    Optimal parameters for a heat equation with polynomial growth p.

    Args:
        d: Space dimension (1-3)
        p: Growth exponent, p ≥ 2

    Returns:
        r_opt = max{2, p-1, d(p-2)}, α_opt = (d/2)(½ - 1/r_opt),
        β_opt = (d/2)((p-1)/r_opt - ½) (so α + β = d(p-2)/(2 r_opt)), the δ-interval
        ([0,½) in d=1, (α_opt, ½) otherwise) and the feasibility flag

    Raises:
        ValueError: If p < 2 or d is outside 1-3
    """
    p = as_fraction(p)
    if p < 2:
        raise ValueError(f"Invalid growth: p={p} (must be at least 2)")
    if d not in (1, 2, 3):
        raise ValueError(f"Invalid dimension: {d} (must be 1, 2 or 3)")
    r_opt = max(Fraction(2), p - 1, d * (p - 2))
    alpha_opt = Fraction(d, 2) * (HALF - 1 / r_opt)
    beta_opt = Fraction(d, 2) * ((p - 1) / r_opt - HALF)
    feasible = d * (p - 2) <= 2 * (p - 1) and not (d == 3 and p >= 4)
    if d == 1:
        interval = Interval.closed_open(0, HALF)
    else:
        interval = Interval.open(alpha_opt, HALF)
    return HeatPolynomialParams(
        r_opt=r_opt, alpha_opt=alpha_opt, beta_opt=beta_opt, delta_interval=interval, feasible=feasible
    )


def supercritical_gamma_range(alpha: Number, beta: Number, xi: Number) -> Optional[Interval]:
    """
    The rough-noise range γ ∈ [0, β] ∩ (β - ½, ξ - α).

    Args:
        alpha: α, must be below ξ
        beta: β
        xi: Time-integrability exponent, used as an open upper bound

    Returns:
        The intersection interval, or None when it is empty

    Raises:
        ValueError: If α ≥ ξ
    """
    alpha, beta, xi = as_fraction(alpha), as_fraction(beta), as_fraction(xi)
    if alpha >= xi:
        raise ValueError(f"Invalid alpha: {alpha} (must be below xi={xi})")
    if beta - HALF >= 0:
        lo, lo_closed = beta - HALF, False
    else:
        lo, lo_closed = Fraction(0), True
    if beta < xi - alpha:
        hi, hi_closed = beta, True
    else:
        hi, hi_closed = xi - alpha, False
    interval = Interval(lo, hi, lo_closed, hi_closed)
    return None if interval.is_empty else interval


def cahn_hilliard_delta_range(d: int) -> Interval:
    """
    δ-range (d/8, ½) for the Cahn–Hilliard family.

    Raises:
        ValueError: If d is outside 1-3
    """
    if d not in (1, 2, 3):
        raise ValueError(f"Invalid dimension: {d} (Cahn-Hilliard is covered for d = 1, 2, 3)")
    return Interval.open(Fraction(d, 8), HALF)


def nondivergence_ranges(d: int, bounded: bool, alpha: Optional[Number] = None) -> List[Tuple[Interval, Interval]]:
    """
    Admissible (α-interval, δ-interval) pairs for F(A^α u) drifts.

    When α is given, only the pairs whose α-interval contains it are
    returned, with the δ-interval evaluated at that α. Without α, α-dependent
    δ bounds are evaluated at the infimum α = 0.

    Raises:
        ValueError: If d is outside 1-3
    """
    if d not in (1, 2, 3):
        raise ValueError(f"Invalid dimension: {d} (must be 1, 2 or 3)")
    a = as_fraction(alpha) if alpha is not None else Fraction(0)
    if bounded:
        pairs = [(Interval.open(0, 1), Interval.closed_open(0, HALF))]
    elif d == 1:
        pairs = [
            (Interval.open(0, HALF), Interval.closed_open(0, HALF)),
            (Interval.point(HALF), Interval.open(QUARTER, HALF)),
        ]
    elif d == 2:
        pairs = [(Interval.open(0, HALF), Interval.open(a, HALF))]
    else:
        pairs = [(Interval.open(0, QUARTER), Interval.open(a + QUARTER, HALF))]
    if alpha is None:
        return pairs
    return [(ai, di) for ai, di in pairs if ai.contains(a)]


def _v_label(s: Fraction) -> str:
    return "H" if s == 0 else f"V_{{{2 * s}}}"


def _fixed(params: ScenarioParams, name: str, value: Fraction) -> Fraction:
    given = getattr(params, name)
    if given is not None and given != value:
        raise ValueError(f"Invalid parameters: {params.family.value} fixes {name}={value}, got {given}")
    return value


def _required(params: ScenarioParams, name: str) -> Fraction:
    value = getattr(params, name)
    if value is None:
        raise ValueError(f"Invalid parameters: {params.family.value} requires {name}")
    return value


def _check_extras(params: ScenarioParams) -> None:
    if params.gamma is not None and params.family != Family.DIVERGENCE_SUPER:
        raise ValueError(f"Invalid parameters: gamma is only meaningful for DivergenceSuper, not {params.family.value}")
    if params.p is not None and params.family != Family.HEAT_POLYNOMIAL:
        raise ValueError(f"Invalid parameters: p is only meaningful for HeatPolynomial, not {params.family.value}")


def _calculus(params: ScenarioParams, alpha: Fraction, beta: Fraction, frame_delta: Fraction) -> Dict[str, Any]:
    """Exact evaluation of the covariance calculus for the effective exponents."""
    d_eff = Fraction(params.d, params.power)
    xi_sup = frame_delta + HALF - d_eff / 4
    xi_cap = min(xi_sup, HALF)
    return {
        "effective_dimension": d_eff,
        "xi_max": float(xi_cap) - XI_MARGIN if xi_sup > 0 else None,
        "theta_min": float(d_eff / (2 * (1 + 2 * frame_delta))),
        "trace_class": frame_delta > d_eff / 4 - HALF,
        "hilbert_schmidt": frame_delta > d_eff / 4,
        "alpha_plus_beta_le_half": alpha + beta <= HALF,
        "alpha_below_xi": xi_sup > 0 and alpha < xi_cap,
    }


def classify(params: ScenarioParams) -> Verdict:
    """
    Decide admissibility of a scenario and the route that covers it.

    Bounded drifts need only the covariance hypotheses; unbounded drifts
    additionally need α + β ≤ ½ and α < ξ; the limiting case (α, β) = (½, 0)
    needs G ∈ ℒ²(H, D(A^{δ'})) for some δ' > 0; super-critical divergence
    drifts go through the rough-noise shift with a γ-interval.

    Args:
        params: Scenario parameters

    Returns:
        Verdict with route, binding constraints and intervals

    Raises:
        ValueError: On inconsistent family/parameter combinations
    """
    _check_extras(params)
    family, d, delta = params.family, params.d, params.delta
    constraints: List[Constraint] = []
    notes: List[str] = []
    delta_interval: Optional[Interval] = None
    gamma_interval: Optional[Interval] = None
    max_dp: Optional[Fraction] = None
    frame_delta = delta
    route = Route.BOUNDED if params.drift_bounded else Route.UNBOUNDED
    initial = "H"

    if family == Family.HEAT_PERTURB:
        alpha, beta = _fixed(params, "alpha", Fraction(0)), _fixed(params, "beta", Fraction(0))
        delta_interval = {
            1: Interval.closed_open(0, HALF),
            2: Interval.open(0, HALF),
            3: Interval.open(QUARTER, HALF),
        }[d]
        constraints.append(_member("delta in admissible range", "δ", delta, delta_interval))

    elif family == Family.HEAT_POLYNOMIAL:
        p = _required(params, "p")
        hp = heat_polynomial_params(d, p)
        beta = _fixed(params, "beta", hp.beta_opt)
        alpha = _fixed(params, "alpha", hp.alpha_opt)
        constraints.append(_compare("growth integrability d(p-2) <= 2(p-1)", d * (p - 2), "<=", 2 * (p - 1)))
        if d == 3:
            constraints.append(_compare("growth below quartic in d=3", p, "<", Fraction(4)))
        delta_interval = hp.delta_interval
        constraints.append(_member("delta in admissible range", "δ", delta, delta_interval))
        route = Route.UNBOUNDED
        initial = _v_label(alpha)
        if params.drift_bounded:
            notes.append("polynomial drifts are treated as unbounded")

    elif family == Family.DIVERGENCE_SUB:
        alpha = _fixed(params, "alpha", Fraction(0))
        beta = _required(params, "beta")
        beta_interval = Interval.open(0, QUARTER if d == 3 else HALF)
        constraints.append(_member("beta in admissible range", "β", beta, beta_interval))
        delta_interval = {
            1: Interval.closed_open(0, HALF - beta),
            2: Interval.open(0, HALF - beta),
            3: Interval.open(QUARTER, HALF - beta),
        }[d]
        constraints.append(_member("delta in admissible range", "δ", delta, delta_interval))

    elif family == Family.DIVERGENCE_SUPER:
        alpha = _fixed(params, "alpha", Fraction(0))
        beta = _required(params, "beta")
        gamma = _required(params, "gamma")
        if delta != 0:
            raise ValueError("Invalid parameters: DivergenceSuper uses rough noise A^gamma; delta must be 0")
        frame_delta = Fraction(0)
        route = Route.ROUGH
        constraints.append(_compare("one space dimension", d, "==", 1))
        constraints.append(_member("beta in super-critical range", "β", beta, Interval.closed_open(HALF, Fraction(3, 4))))
        constraints.append(_compare("F bounded", params.drift_bounded, "==", True))
        if d == 1:
            # ξ ranges over (0, ¼) for cylindrical noise in d = 1
            gamma_interval = supercritical_gamma_range(alpha, beta, QUARTER)
            shown = gamma_interval if gamma_interval is not None else Interval.open(0, 0)
            constraints.append(_member("gamma in rough-noise range", "γ", gamma, shown))
        initial = f"V_{{{-2 * gamma}}}" if gamma else "H"

    elif family == Family.NON_DIVERGENCE:
        alpha = _required(params, "alpha")
        beta = _fixed(params, "beta", Fraction(0))
        pairs = nondivergence_ranges(d, params.drift_bounded, alpha)
        if pairs:
            alpha_interval, delta_interval = pairs[0]
        else:
            alpha_interval = _hull([a for a, _ in nondivergence_ranges(d, params.drift_bounded)])
        constraints.append(_member("alpha in admissible range", "α", alpha, alpha_interval))
        if delta_interval is not None:
            constraints.append(_member("delta in admissible range", "δ", delta, delta_interval))
        if params.drift_bounded:
            initial = "H"
        else:
            initial = _v_label(alpha)
            if alpha == HALF:
                route = Route.LIMITING
                max_dp = delta - QUARTER

    elif family == Family.BURGERS:
        alpha, beta = _fixed(params, "alpha", HALF), _fixed(params, "beta", Fraction(0))
        constraints.append(_compare("one space dimension", d, "==", 1))
        delta_interval = Interval.open(QUARTER, HALF)
        constraints.append(_member("delta in admissible range", "δ", delta, delta_interval))
        route = Route.LIMITING
        max_dp = delta - QUARTER
        initial = "H^1_0"

    else:
        alpha, beta = _fixed(params, "alpha", HALF), _fixed(params, "beta", Fraction(0))
        delta_interval = cahn_hilliard_delta_range(d)
        constraints.append(_member("delta in admissible range", "δ", delta, delta_interval))
        route = Route.LIMITING
        max_dp = delta - Fraction(d, 8)
        initial = "D(A_N)"

    if route == Route.LIMITING and params.delta_prime is not None and max_dp is not None:
        constraints.append(_member("delta_prime in Hilbert-Schmidt range", "δ'", params.delta_prime, Interval.open(0, max(max_dp, Fraction(0)))))

    diagnostics = _calculus(params, alpha, beta, frame_delta)
    admissible = all(c.holds for c in constraints)
    if admissible:
        mismatched = [k for k in ("trace_class",) if not diagnostics[k]]
        if route in (Route.UNBOUNDED, Route.LIMITING):
            mismatched += [k for k in ("alpha_plus_beta_le_half", "alpha_below_xi") if not diagnostics[k]]
            if route == Route.LIMITING and not diagnostics["hilbert_schmidt"]:
                mismatched.append("hilbert_schmidt")
        if route == Route.LIMITING:
            mismatched = [k for k in mismatched if k not in ("alpha_plus_beta_le_half", "alpha_below_xi")]
        if mismatched:
            notes.append("published range is wider than the covariance calculus for: " + ", ".join(mismatched))
    else:
        route = Route.REJECTED
        max_dp = None

    verdict = Verdict(
        admissible=admissible,
        route=route,
        constraints=constraints,
        initial_space=initial,
        alpha=alpha,
        beta=beta,
        delta_interval=delta_interval,
        gamma_interval=gamma_interval,
        boundary_excluded=any(c.boundary for c in constraints),
        max_delta_prime=max_dp if max_dp is not None and max_dp > 0 else None,
        notes=notes,
        diagnostics=diagnostics,
    )
    logging.info(f"Classified {family.value} d={d}: {verdict.route.value}")
    return verdict
