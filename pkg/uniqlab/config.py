"""
Scenario file models for spde-uniq-lab.

Scenario files are JSON documents with the sections `equation`, `spectral`,
`noise`, `initial`, `run`, `analysis` and `outputs`. Unknown keys are
rejected. Exponents are held as exact fractions and accept either numbers
or "p/q" strings.
"""

import json
import re
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Sequence, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    PositiveFloat,
    ValidationError,
    field_validator,
    model_validator,
)

from .admissibility import Family, ScenarioParams, Verdict, as_fraction, classify
from .galerkin import INITIAL_PRESETS
from .noise import NoiseKind
from .observables import get_observable
from .spectral import Boundary
from .utils import ScenarioError

OUTPUT_ENV = "SPDE_UNIQ_LAB_OUT"


def _rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ValueError(f"expected a number or a 'p/q' string, got {value!r}")
    try:
        return as_fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"expected a number or a 'p/q' string, got {value!r}") from exc


Rational = Annotated[Fraction, PlainValidator(_rational), PlainSerializer(str, return_type=str)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


class EquationSection(_Section):
    """Equation family, exponents and the nonlinearity F."""

    family: Family
    p: Optional[Rational] = None
    alpha: Optional[Rational] = None
    beta: Optional[Rational] = None
    gamma: Optional[Rational] = None
    drift_bounded: bool = False
    nonlinearity: Literal["polynomial", "sine"] = "polynomial"
    coefficients: List[float] = Field(default_factory=list)
    bound: Optional[PositiveFloat] = None
    burgers_sign: Literal[1, -1] = 1
    gradient_weight: float = 0.0


class SpectralSection(_Section):
    """Domain, boundary condition and Galerkin cutoff."""

    dimension: Literal[1, 2, 3] = 1
    boundary: Optional[Boundary] = None
    lengths: Optional[List[PositiveFloat]] = None
    cutoff: int = Field(16, ge=1)
    power: Optional[Literal[1, 2]] = None


class NoiseSection(_Section):
    """Noise covariance G = A^{-δ} (colored) or A^{γ} (rough)."""

    kind: NoiseKind = NoiseKind.COLORED
    exponent: Rational = Fraction(0)
    hs_shift: Rational = Fraction(0)

    @field_validator("exponent", "hs_shift")
    @classmethod
    def _nonnegative(cls, value: Fraction) -> Fraction:
        if value < 0:
            raise ValueError(f"must be nonnegative, got {value}")
        return value


class InitialSection(_Section):
    """Initial datum: a preset such as "rough-tail 0.75" or explicit coefficients."""

    preset: Optional[str] = None
    smoothness: Optional[float] = Field(None, ge=0)
    coefficients: Optional[List[float]] = None

    @model_validator(mode="after")
    def _resolve_preset(self) -> "InitialSection":
        if self.preset is not None and " " in self.preset.strip():
            name, _, value = self.preset.strip().partition(" ")
            try:
                smoothness = float(value)
            except ValueError as exc:
                raise ValueError(f"invalid preset smoothness in {self.preset!r}") from exc
            if self.smoothness is not None and self.smoothness != smoothness:
                raise ValueError(f"preset {self.preset!r} conflicts with smoothness={self.smoothness}")
            self.preset, self.smoothness = name, smoothness
        if self.coefficients is not None:
            if self.preset is not None:
                raise ValueError("give either a preset or coefficients, not both")
            return self
        if self.preset is None:
            self.preset = "e1"
        if self.preset not in INITIAL_PRESETS:
            raise ValueError(f"unknown preset {self.preset!r} (known: {', '.join(INITIAL_PRESETS)})")
        if self.preset == "rough-tail" and self.smoothness is None:
            self.smoothness = 1.0
        return self


class RunSection(_Section):
    """Time horizon, step, ensemble size and seed."""

    horizon: PositiveFloat = 1.0
    step: Optional[PositiveFloat] = None
    paths: int = Field(10000, ge=1)
    seed: int = Field(0, ge=0)
    truncation: Optional[PositiveFloat] = None

    @model_validator(mode="after")
    def _default_step(self) -> "RunSection":
        if self.step is None:
            self.step = self.horizon / 2048
        if self.step > self.horizon:
            raise ValueError(f"step {self.step} exceeds horizon {self.horizon}")
        return self


class AnalysisSection(_Section):
    """Settings of the Kolmogorov solver and the law comparison."""

    laplace_rate: PositiveFloat = 1.0
    level: float = Field(0.01, gt=0, lt=1)
    projection: int = Field(1, ge=1, le=4)
    tolerance: PositiveFloat = 1e-3
    max_sweeps: int = Field(200, ge=1)
    observable: str = "cos-mode1"
    epsilon: float = Field(0.01, ge=0)

    @field_validator("observable")
    @classmethod
    def _known_observable(cls, value: str) -> str:
        get_observable(value)
        return value


class OutputsSection(_Section):
    """Output directory and report file names."""

    directory: str = "runs"
    trajectory: str = "trajectory.csv"
    summary: str = "summary.csv"
    report: str = "report.csv"
    write_paths: int = Field(1, ge=0)


class ScenarioFile(_Section):
    """
    A validated scenario file.

    Attributes:
        equation: Family and nonlinearity
        spectral: Domain and Galerkin cutoff
        noise: Noise covariance
        initial: Initial datum
        run: Run settings
        analysis: Solver and comparison settings
        outputs: Output locations
    """

    equation: EquationSection
    spectral: SpectralSection = Field(default_factory=SpectralSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    run: RunSection = Field(default_factory=RunSection)
    analysis: AnalysisSection = Field(default_factory=AnalysisSection)
    outputs: OutputsSection = Field(default_factory=OutputsSection)

    @model_validator(mode="after")
    def _spectral_defaults(self) -> "ScenarioFile":
        cahn_hilliard = self.equation.family == Family.CAHN_HILLIARD
        spectral = self.spectral
        if spectral.boundary is None:
            spectral.boundary = Boundary.NEUMANN if cahn_hilliard else Boundary.DIRICHLET
        if spectral.power is None:
            spectral.power = 2 if cahn_hilliard else 1
        if cahn_hilliard and (spectral.boundary != Boundary.NEUMANN or spectral.power != 2):
            raise ValueError("CahnHilliard needs boundary 'neumann' and power 2")
        if not cahn_hilliard and spectral.power == 2:
            raise ValueError("power 2 is reserved for CahnHilliard")
        if spectral.lengths is not None and len(spectral.lengths) != spectral.dimension:
            raise ValueError(f"expected {spectral.dimension} lengths, got {len(spectral.lengths)}")
        return self

    def to_params(self) -> ScenarioParams:
        """
        Admissibility parameters of the scenario.

        Rough noise contributes γ = exponent and δ = 0; colored noise
        contributes δ = exponent.

        Raises:
            ValueError: If equation.gamma disagrees with a rough noise exponent
        """
        eq, noise = self.equation, self.noise
        gamma = eq.gamma
        delta = noise.exponent
        if noise.kind == NoiseKind.ROUGH:
            if gamma is not None and gamma != noise.exponent:
                raise ValueError(f"Invalid gamma: equation.gamma={gamma} differs from noise.exponent={noise.exponent}")
            gamma, delta = noise.exponent, Fraction(0)
        return ScenarioParams(
            family=eq.family,
            d=self.spectral.dimension,
            p=eq.p,
            alpha=eq.alpha,
            beta=eq.beta,
            delta=delta,
            gamma=gamma,
            drift_bounded=eq.drift_bounded or eq.bound is not None,
            delta_prime=noise.hs_shift if noise.hs_shift > 0 else None,
        )

    def verdict(self) -> Verdict:
        """Admissibility verdict of the scenario."""
        return classify(self.to_params())


def _position(text: str, offset: int) -> Tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column


def _locate(text: str, loc: Sequence[Any]) -> Tuple[Optional[int], Optional[int]]:
    """Line and column of the innermost key of a validation error path that occurs in the text."""
    offset, found = 0, None
    for key in loc:
        if not isinstance(key, str):
            continue
        match = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, offset)
        if match is None:
            break
        offset = found = match.start()
    if found is None:
        return None, None
    return _position(text, found)


def parse_scenario(text: str, allow_boundary: bool = False) -> ScenarioFile:
    """
    Parse and validate a scenario document.

    Args:
        text: JSON text
        allow_boundary: Accept parameters sitting on an excluded open endpoint
            (used by `check`, which reports them instead)

    Returns:
        ScenarioFile: The validated scenario with defaults filled

    Raises:
        ScenarioError: On malformed text, unknown keys, invalid values or
            semantic violations
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object", 1, 1)

    try:
        scenario = ScenarioFile.model_validate(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        path = ".".join(str(part) for part in error["loc"])
        line, column = _locate(text, error["loc"])
        message = f"{path}: {error['msg']}" if path else error["msg"]
        raise ScenarioError(message, line, column) from exc

    try:
        verdict = scenario.verdict()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    if verdict.boundary_excluded and not allow_boundary:
        raise ScenarioError(verdict.boundary_message())
    return scenario


def load_scenario(path: Path, allow_boundary: bool = False) -> ScenarioFile:
    """Read and parse a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file '{path}': {exc.strerror}") from exc
    return parse_scenario(text, allow_boundary=allow_boundary)


def serialize_scenario(scenario: ScenarioFile) -> str:
    """
    Canonical JSON text of a scenario.

    Keys are sorted, unset optional values are omitted and fractions are
    written as "p/q" strings, so that parsing the text gives back an equal
    object. The config digest of a run is taken over this text.
    """
    data = scenario.model_dump(mode="json", exclude_none=True)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
