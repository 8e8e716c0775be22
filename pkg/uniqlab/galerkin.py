"""
Galerkin approximation of dX + AX dt = B(X) dt + G dW on the first n modes.

Time stepping is exponential Euler on the mild form: the linear part and the
Ornstein–Uhlenbeck increment are exact per mode, only the drift is frozen
over a step. Noise for step m is drawn from a Philox stream keyed by
(seed, m) in mode-major order, so any prefix of modes sees the same
increments at every resolution.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .admissibility import ScenarioParams
from .drifts import Drift, DriftSpec, make_drift, truncate_drift
from .noise import NoiseSpec, gains
from .spectral import Spectrum, build_spectrum, collocation_for, sobolev_norm
from .utils import BlowUpError

BLOWUP_NORM = 1e12
INITIAL_PRESETS = ("e1", "smooth-bump", "rough-tail")


def time_grid(horizon: float, h: float) -> Tuple[int, float]:
    """
    Number of steps and the step size that end exactly at the horizon.

    h is kept when it divides T (up to rounding), else shrunk to T / ceil(T / h).
    """
    ratio = horizon / h
    steps = max(1, math.ceil(ratio - 1e-9 * max(ratio, 1.0)))
    if abs(steps * h - horizon) <= 1e-9 * horizon:
        return steps, h
    return steps, horizon / steps


@dataclass(frozen=True)
class InitialSpec:
    """
    Initial datum: a named preset or explicit coefficients.

    Attributes:
        preset: "e1", "smooth-bump" or "rough-tail"; None when coefficients are given
        coefficients: Explicit mode coefficients (zero-padded or truncated to n)
        smoothness: s of "rough-tail s", a_k = k^{-1/2} λ_k^{-s/2}
    """

    preset: Optional[str] = "e1"
    coefficients: Tuple[float, ...] = ()
    smoothness: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.coefficients and self.preset is not None:
            raise ValueError("Invalid initial datum: give either a preset or coefficients, not both")
        if not self.coefficients and self.preset not in INITIAL_PRESETS:
            raise ValueError(f"Invalid initial preset: {self.preset!r} (must be one of {INITIAL_PRESETS})")
        if self.smoothness < 0:
            raise ValueError(f"Invalid smoothness: {self.smoothness} (must be nonnegative)")


def initial_state(spectrum: Spectrum, initial: InitialSpec) -> np.ndarray:
    """
    Coefficients P_n x of the initial datum.

    Args:
        spectrum: Spectrum with n modes
        initial: Initial datum description

    Returns:
        np.ndarray: Vector of length n
    """
    n = spectrum.cutoff
    x = np.zeros(n)
    if initial.coefficients:
        values = np.asarray(initial.coefficients[:n])
        x[: len(values)] = values
    elif initial.preset == "e1":
        x[0] = 1.0
    elif initial.preset == "rough-tail":
        k = np.arange(1, n + 1, dtype=float)
        x = k**-0.5 * spectrum.eigenvalues ** (-initial.smoothness / 2.0)
    else:
        col = collocation_for(spectrum)
        center = np.asarray(spectrum.lengths)[:, None] / 2.0
        width = 0.1 * min(spectrum.lengths)
        bump = np.exp(-np.sum((col.points - center) ** 2, axis=0) / (2.0 * width**2))
        x = col.backward(bump)
    return x


@dataclass
class Scenario:
    """
    A fully specified Galerkin problem.

    Attributes:
        spectrum: Truncated spectrum of A (fixes n)
        noise: Noise covariance
        drift_spec: Drift description
        initial: Initial datum
        horizon: Final time T
        step: Time step h
        paths: Default ensemble size
        seed: Base seed of the noise streams
        truncation: Level N of the truncated drift B_N, or None
        params: Admissibility parameters this scenario was built from
        exploratory: True when run outside the admissible region
    """

    spectrum: Spectrum
    noise: NoiseSpec
    drift_spec: DriftSpec
    initial: InitialSpec = field(default_factory=InitialSpec)
    horizon: float = 1.0
    step: Optional[float] = None
    paths: int = 10000
    seed: int = 0
    truncation: Optional[float] = None
    params: Optional[ScenarioParams] = None
    exploratory: bool = False

    def __post_init__(self):
        """Validate run settings and build the drift and initial state."""
        if self.horizon <= 0:
            raise ValueError(f"Invalid horizon: {self.horizon} (must be positive)")
        if self.step is None:
            self.step = self.horizon / 2048
        if not 0 < self.step <= self.horizon:
            raise ValueError(f"Invalid step: {self.step} (must lie in (0, horizon])")
        steps, aligned = time_grid(self.horizon, self.step)
        if aligned != self.step:
            logging.info(
                f"Step {self.step:.6g} does not divide T={self.horizon:.6g}; "
                f"using {aligned:.6g} ({steps} steps)"
            )
            self.step = aligned
        if self.paths < 1:
            raise ValueError(f"Invalid paths: {self.paths} (must be at least 1)")
        if self.truncation is not None and self.truncation <= 0:
            raise ValueError(f"Invalid truncation: {self.truncation} (must be positive)")
        self.drift: Drift = make_drift(self.drift_spec, self.spectrum)
        self.x0 = initial_state(self.spectrum, self.initial)

    @property
    def steps(self) -> int:
        return time_grid(self.horizon, self.step)[0]

    def with_cutoff(self, cutoff: int) -> "Scenario":
        """The same scenario on a spectrum with `cutoff` modes."""
        spec = self.spectrum
        spectrum = build_spectrum(spec.dimension, spec.boundary, spec.lengths, cutoff, spec.power)
        return dataclasses.replace(self, spectrum=spectrum)

    def with_run(self, **changes) -> "Scenario":
        """Copy with changed run settings (horizon, step, paths, seed, truncation)."""
        return dataclasses.replace(self, **changes)

    def continuous_key(self) -> Tuple:
        """Everything that defines the continuous equation, excluding n, h, paths and seed."""
        spec = self.spectrum
        return (
            self.drift_spec,
            self.noise,
            spec.dimension,
            spec.boundary,
            spec.lengths,
            spec.power,
            self.initial,
            self.truncation,
        )


def noise_block(seed: int, step_index: int, modes: int, paths: int) -> np.ndarray:
    """Standard normals for one time step, shape (modes, paths), from the (seed, step) stream."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(step_index,))))
    return rng.standard_normal((modes, paths))


@dataclass(frozen=True)
class StepCoefficients:
    """Per-mode factors of one exponential-Euler step of size h."""

    decay: np.ndarray
    drift_gain: np.ndarray
    noise_sd: np.ndarray

    @classmethod
    def build(cls, spectrum: Spectrum, noise: NoiseSpec, h: float) -> "StepCoefficients":
        if h <= 0:
            raise ValueError(f"Invalid step: {h} (must be positive)")
        lam = spectrum.eigenvalues
        g2 = gains(spectrum, noise) ** 2
        return cls(
            decay=np.exp(-h * lam),
            drift_gain=-np.expm1(-h * lam) / lam,
            noise_sd=np.sqrt(g2 * -np.expm1(-2.0 * h * lam) / (2.0 * lam)),
        )


def _column(values: np.ndarray, a: np.ndarray) -> np.ndarray:
    return values.reshape((-1,) + (1,) * (a.ndim - 1))


def _drift_term(drift: Drift, a: np.ndarray, truncation: Optional[float]) -> Optional[np.ndarray]:
    if drift.is_zero:
        return None
    if truncation is not None:
        return truncate_drift(drift, truncation, a)
    return drift(a)


def step(
    spectrum: Spectrum,
    noise: NoiseSpec,
    drift: Drift,
    a: np.ndarray,
    h: float,
    rng: Optional[np.random.Generator] = None,
    normals: Optional[np.ndarray] = None,
    truncation: Optional[float] = None,
    coefficients: Optional[StepCoefficients] = None,
) -> np.ndarray:
    """
    One exponential-Euler step of the mild form.

    a_k⁺ = e^{-hλ_k} a_k + (1 - e^{-hλ_k})/λ_k · B(a)_k + √(g_k²(1 - e^{-2hλ_k})/(2λ_k)) ξ_k

    Args:
        spectrum: Spectrum of A
        noise: Noise covariance
        drift: Drift operator
        a: State, shape (n,) or (n, paths)
        h: Step size
        rng: Generator for the normals ξ (ignored when `normals` is given)
        normals: Pre-drawn standard normals with the shape of `a`
        truncation: Level N for B_N, or None
        coefficients: Precomputed per-mode factors for this h

    Returns:
        np.ndarray: The state after one step

    Raises:
        ValueError: If h is not positive or the state is not finite
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("Invalid state: nonfinite coefficients")
    if coefficients is None:
        coefficients = StepCoefficients.build(spectrum, noise, h)
    out = _column(coefficients.decay, a) * a
    b = _drift_term(drift, a, truncation)
    if b is not None:
        out = out + _column(coefficients.drift_gain, a) * b
    if normals is None and rng is not None:
        normals = rng.standard_normal(a.shape)
    if normals is not None:
        out = out + _column(coefficients.noise_sd, a) * normals
    return out


def iterate(
    scenario: Scenario,
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    horizon: Optional[float] = None,
    h: Optional[float] = None,
    truncation: Optional[float] = None,
    on_blowup: str = "raise",
) -> Iterator[Tuple[int, float, np.ndarray]]:
    """
    Step an ensemble through the time grid, yielding (m, t_m, state).

    The state has shape (n, paths) and starts at P_n x in every column.
    Blown-up paths raise BlowUpError, or with on_blowup="record" are frozen
    at NaN and reported through the generator's return value.

    Raises:
        BlowUpError: If a path turns nonfinite or exceeds the blow-up norm
    """
    if on_blowup not in ("raise", "record"):
        raise ValueError(f"Invalid on_blowup: {on_blowup!r} (must be 'raise' or 'record')")
    seed = scenario.seed if seed is None else seed
    paths = scenario.paths if paths is None else paths
    horizon = scenario.horizon if horizon is None else horizon
    h = scenario.step if h is None else h
    truncation = scenario.truncation if truncation is None else truncation
    spectrum = scenario.spectrum
    steps, h = time_grid(horizon, h)
    coefficients = StepCoefficients.build(spectrum, scenario.noise, h)

    state = np.repeat(scenario.x0[:, None], paths, axis=1)
    alive = np.ones(paths, dtype=bool)
    blowups: List[Tuple[int, float]] = []
    yield 0, 0.0, state
    for m in range(steps):
        normals = noise_block(seed, m, spectrum.cutoff, paths)
        everyone = alive.all()
        new = step(
            spectrum,
            scenario.noise,
            scenario.drift,
            state if everyone else state[:, alive],
            h,
            normals=normals if everyone else normals[:, alive],
            truncation=truncation,
            coefficients=coefficients,
        )
        norms = np.sqrt(np.sum(new**2, axis=0))
        bad = ~np.isfinite(norms) | (norms > BLOWUP_NORM)
        if bad.any():
            index = int(np.flatnonzero(alive)[np.flatnonzero(bad)[0]])
            t_last = m * h
            if on_blowup == "raise":
                logging.error(f"Path {index} blew up after t={t_last:.6g}")
                raise BlowUpError(t_last, state[:, index].copy(), index)
            for j in np.flatnonzero(alive)[bad]:
                blowups.append((int(j), t_last))
            logging.warning(f"{int(bad.sum())} path(s) blew up after t={t_last:.6g}")
        if everyone and not bad.any():
            state = new
        else:
            dead = np.flatnonzero(alive)[bad]
            state = state.copy()
            state[:, alive] = new
            state[:, dead] = np.nan
            alive[dead] = False
        yield m + 1, horizon if m + 1 == steps else (m + 1) * h, state
    return blowups


@dataclass
class StoppingRecord:
    """τ_N = inf{t : ‖a(t)‖_{2α} > N}, +inf when the level is never exceeded."""

    level: float
    time: float = math.inf


@dataclass
class GalerkinPath:
    """
    One simulated path.

    Attributes:
        times: Grid t_0 = 0 < ... < t_M
        states: Coefficients, shape (M + 1, n)
        norms: ‖a(t_m)‖_{2s} along the path
        seed: Base seed of the run
        path_index: Column of the path in its ensemble
    """

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    seed: int
    path_index: int = 0


@dataclass
class Ensemble:
    """
    Result of an ensemble run.

    Attributes:
        times: Time grid
        terminal: States at T, shape (n, paths)
        norms: Norm paths, shape (M + 1, paths)
        trajectories: Full states of the first `keep` paths, shape (M + 1, n, keep)
        stopping: τ_N per path when a truncation level was set
        blowups: (path index, last finite time) of recorded blow-ups
        seed: Base seed
        norm_exponent: s of the recorded V_{2s} norm
    """

    times: np.ndarray
    terminal: np.ndarray
    norms: np.ndarray
    trajectories: Optional[np.ndarray]
    stopping: List[StoppingRecord]
    blowups: List[Tuple[int, float]]
    seed: int
    norm_exponent: float

    def path(self, index: int) -> GalerkinPath:
        """Stored trajectory of path `index` (must be below `keep`)."""
        if self.trajectories is None or index >= self.trajectories.shape[2]:
            raise ValueError(f"Invalid path index: {index} (trajectory not kept)")
        return GalerkinPath(
            times=self.times,
            states=self.trajectories[:, :, index],
            norms=self.norms[:, index],
            seed=self.seed,
            path_index=index,
        )


def _first_exceed(norms: np.ndarray, times: np.ndarray, level: float) -> np.ndarray:
    above = norms > level
    hit = above.any(axis=0)
    first = np.argmax(above, axis=0)
    return np.where(hit, times[first], math.inf)


def simulate_ensemble(
    scenario: Scenario,
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    horizon: Optional[float] = None,
    h: Optional[float] = None,
    truncation: Optional[float] = None,
    keep: int = 0,
    norm_exponent: Optional[float] = None,
    on_blowup: str = "raise",
) -> Ensemble:
    """
    Simulate an ensemble of independent Galerkin paths.

    Args:
        scenario: The problem
        seed: Base seed (defaults to the scenario's)
        paths: Ensemble size (defaults to the scenario's)
        horizon: Final time (defaults to the scenario's)
        h: Step size (defaults to the scenario's)
        truncation: Level N for B_N (defaults to the scenario's)
        keep: Number of full trajectories to store
        norm_exponent: s of the recorded ‖·‖_{2s} norm (defaults to α)
        on_blowup: "raise" or "record"

    Returns:
        Ensemble: Terminal states, norm paths and stopping records

    Raises:
        BlowUpError: If a path blows up and on_blowup is "raise"
    """
    seed = scenario.seed if seed is None else seed
    truncation = scenario.truncation if truncation is None else truncation
    alpha = scenario.drift_spec.alpha
    s = alpha if norm_exponent is None else norm_exponent
    spectrum = scenario.spectrum

    times: List[float] = []
    norm_rows: List[np.ndarray] = []
    alpha_rows: List[np.ndarray] = []
    kept: List[np.ndarray] = []
    state = None
    runner = iterate(scenario, seed, paths, horizon, h, truncation, on_blowup)
    blowups: List[Tuple[int, float]] = []
    while True:
        try:
            _, t, state = next(runner)
        except StopIteration as stop:
            blowups = stop.value or []
            break
        times.append(t)
        norm_rows.append(sobolev_norm(spectrum, s, state))
        if truncation is not None:
            alpha_rows.append(norm_rows[-1] if s == alpha else sobolev_norm(spectrum, alpha, state))
        if keep:
            kept.append(state[:, :keep].copy())

    grid = np.asarray(times)
    norms = np.vstack(norm_rows)
    stopping: List[StoppingRecord] = []
    if truncation is not None:
        taus = _first_exceed(np.vstack(alpha_rows), grid, truncation)
        stopping = [StoppingRecord(level=truncation, time=float(tau)) for tau in taus]
    logging.info(f"Simulated {norms.shape[1]} path(s), n={spectrum.cutoff}, T={grid[-1]:.6g}")
    if scenario.exploratory:
        logging.warning("Exploratory run outside the admissible region")
    return Ensemble(
        times=grid,
        terminal=state,
        norms=norms,
        trajectories=np.stack(kept) if keep else None,
        stopping=stopping,
        blowups=blowups,
        seed=seed,
        norm_exponent=s,
    )


def simulate_path(
    scenario: Scenario,
    seed: Optional[int] = None,
    horizon: Optional[float] = None,
    h: Optional[float] = None,
    truncation: Optional[float] = None,
) -> Tuple[GalerkinPath, Optional[StoppingRecord]]:
    """
    Simulate a single path and its stopping time τ_N.

    Returns:
        (path, stopping record or None when no truncation level is set)

    Raises:
        BlowUpError: If the path blows up before the horizon
    """
    ensemble = simulate_ensemble(scenario, seed, 1, horizon, h, truncation, keep=1)
    record = ensemble.stopping[0] if ensemble.stopping else None
    return ensemble.path(0), record


def stopping_time(path: GalerkinPath, spectrum: Spectrum, alpha: float, level: float) -> StoppingRecord:
    """First grid time with ‖a(t)‖_{2α} > N on a stored path."""
    if level <= 0:
        raise ValueError(f"Invalid level: {level} (must be positive)")
    norms = sobolev_norm(spectrum, alpha, path.states.T)
    tau = _first_exceed(norms[:, None], path.times, level)[0]
    return StoppingRecord(level=level, time=float(tau))


@dataclass
class CoupledRun:
    """
    Two resolutions driven by shared noise.

    Attributes:
        coarse: Cutoff n₁
        fine: Cutoff n₂
        sup_difference: sup_t ‖P_{n₁}X_{n₂} - X_{n₁}‖ per path
        coarse_norms: Norm paths at n₁, shape (M + 1, paths)
        fine_norms: Norm paths at n₂, shape (M + 1, paths)
        identical_prefix: True when the first n₁ modes agree bitwise at every grid time
    """

    coarse: int
    fine: int
    sup_difference: np.ndarray
    coarse_norms: np.ndarray
    fine_norms: np.ndarray
    identical_prefix: bool


def couple_resolutions(
    scenario: Scenario,
    coarse: int,
    fine: int,
    seed: Optional[int] = None,
    paths: Optional[int] = None,
    horizon: Optional[float] = None,
    h: Optional[float] = None,
    norm_exponent: float = 0.0,
) -> CoupledRun:
    """
    Run cutoffs n₁ < n₂ on identical noise and compare their shared modes.

    Raises:
        ValueError: If n₁ ≥ n₂ or the coarse modes are not a prefix of the fine ordering
    """
    if not 0 < coarse < fine:
        raise ValueError(f"Invalid resolutions: need 0 < n1 < n2, got {coarse}, {fine}")
    low = scenario.with_cutoff(coarse)
    high = scenario.with_cutoff(fine)
    if not np.array_equal(high.spectrum.modes[:coarse], low.spectrum.modes):
        raise ValueError("Invalid resolutions: coarse modes are not a prefix of the fine mode ordering")

    sup_diff = None
    identical = True
    low_norms, high_norms = [], []
    for (_, _, a), (_, _, b) in zip(
        iterate(low, seed, paths, horizon, h),
        iterate(high, seed, paths, horizon, h),
    ):
        diff = np.sqrt(np.sum((b[:coarse] - a) ** 2, axis=0))
        identical = identical and bool(np.array_equal(b[:coarse], a))
        sup_diff = diff if sup_diff is None else np.maximum(sup_diff, diff)
        low_norms.append(sobolev_norm(low.spectrum, norm_exponent, a))
        high_norms.append(sobolev_norm(high.spectrum, norm_exponent, b))
    logging.info(f"Coupled n={coarse} and n={fine}: median sup difference {float(np.median(sup_diff)):.4g}")
    return CoupledRun(
        coarse=coarse,
        fine=fine,
        sup_difference=sup_diff,
        coarse_norms=np.vstack(low_norms),
        fine_norms=np.vstack(high_norms),
        identical_prefix=identical,
    )


def summary_rows(ensemble: Ensemble) -> List[Dict[str, float]]:
    """Rows `t, mean_norm, var_norm, p05, p95` across paths, ignoring blown-up paths."""
    rows = []
    with np.errstate(all="ignore"):
        for t, norms in zip(ensemble.times, ensemble.norms):
            finite = norms[np.isfinite(norms)]
            if finite.size == 0:
                continue
            p05, p95 = np.percentile(finite, [5, 95])
            rows.append(
                {
                    "t": float(t),
                    "mean_norm": float(finite.mean()),
                    "var_norm": float(finite.var(ddof=1)) if finite.size > 1 else 0.0,
                    "p05": float(p05),
                    "p95": float(p95),
                }
            )
    return rows


def trajectory_rows(path: GalerkinPath) -> Tuple[List[str], List[Dict[str, float]]]:
    """Header and rows `t, a_1..a_n` for one stored path."""
    n = path.states.shape[1]
    header = ["t"] + [f"a_{k}" for k in range(1, n + 1)]
    rows = []
    for t, state in zip(path.times, path.states):
        row = {"t": float(t)}
        row.update({f"a_{k}": float(v) for k, v in enumerate(state, start=1)})
        rows.append(row)
    return header, rows
