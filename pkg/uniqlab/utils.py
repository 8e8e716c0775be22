"""
Utility functions for the SPDE uniqueness lab: logging, errors, reports and CSV output.
"""

import csv
import hashlib
import json
import logging
import platform
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import scipy


def setup_logging(log_level: str = "info") -> None:
    """
    Setup logging configuration.

    Diagnostics go to stderr so that tables printed on stdout stay clean.

    Args:
        log_level: The logging level to use
    """
    level_map = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "error": logging.ERROR,
        "critical": logging.CRITICAL,
    }

    level = level_map.get(log_level.lower(), logging.INFO)

    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


class UniqLabError(Exception):
    """Base class for all errors raised by the toolkit."""


class ScenarioError(UniqLabError, ValueError):
    """
    A scenario file could not be parsed or violates a constraint.

    Attributes:
        line: 1-based line of the offending text, when known
        column: 1-based column of the offending text, when known
    """

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class InadmissibleError(UniqLabError):
    """The scenario lies outside every admissible region and no override was given."""

    def __init__(self, verdict: Any):
        self.verdict = verdict
        failed = [c.name for c in verdict.constraints if not c.holds]
        super().__init__(f"Scenario is inadmissible: {', '.join(failed) or verdict.route}")


class BlowUpError(UniqLabError):
    """
    A Galerkin path left every bounded set before the horizon.

    Attributes:
        time: grid time of the last finite state
        last_state: the last finite coefficient vector
        path_index: index of the offending path in its ensemble
    """

    def __init__(self, time: float, last_state: np.ndarray, path_index: int = 0):
        self.time = time
        self.last_state = last_state
        self.path_index = path_index
        super().__init__(f"Path {path_index} blew up after t={time:.6g}")


class ContractionError(UniqLabError):
    """Picard iteration for the Kolmogorov fixed point stopped contracting."""

    def __init__(self, factors: Sequence[float]):
        self.factors = list(factors)
        shown = ", ".join(f"{f:.4f}" for f in self.factors[-4:])
        super().__init__(f"Picard iteration is not contracting (last factors: {shown})")


class StatisticalRejection(UniqLabError):
    """A law comparison rejected equality at the configured level."""

    def __init__(self, report: Any):
        self.report = report
        super().__init__(
            f"Equality of laws rejected: largest |z| = {report.max_abs_z:.3f} "
            f"on '{report.worst_observable}' (threshold {report.threshold:.3f})"
        )


def create_error_response(message: str, code: int = 1, details: Dict[str, Any] = None) -> Dict[str, Any]:
    """
    Create a standardized error payload.

    Args:
        message: The error message
        code: Process exit code associated with the error
        details: Optional additional details

    Returns:
        Dict containing the error payload
    """
    response = {
        "error": True,
        "message": message,
        "exit_code": code,
    }

    if details:
        response["details"] = details

    return response


def create_success_response(data: Any = None, message: str = "Success") -> Dict[str, Any]:
    """
    Create a standardized success payload.

    Args:
        data: The payload data
        message: Success message

    Returns:
        Dict containing the success payload
    """
    response = {
        "success": True,
        "message": message,
    }

    if data is not None:
        response["data"] = data

    return response


def format_number(value: Any) -> str:
    """Render exact rationals as "p/q" and floats compactly."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and fractions into plain JSON values."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def config_digest(canonical_text: str) -> str:
    """Return the sha256 hex digest of a canonical scenario serialization."""
    return hashlib.sha256(canonical_text.encode("utf-8")).hexdigest()


def environment_versions() -> Dict[str, str]:
    """Versions of the interpreter and numeric stack, recorded in every manifest."""
    from . import __version__

    return {
        "uniqlab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def create_manifest(
    digest: str,
    seed: Optional[int],
    modes: Iterable[Sequence[int]],
    verdict: Any = None,
    exploratory: bool = False,
    extra: Dict[str, Any] = None,
) -> Dict[str, Any]:
    """
    Build the reproducibility manifest written beside each CSV.

    Args:
        digest: sha256 digest of the canonical scenario text
        seed: Base seed of the run (None for deterministic reports)
        modes: Multi-indices of the retained modes, in simulation order
        verdict: Admissibility verdict attached to the run
        exploratory: True when the run was forced outside the admissible region
        extra: Command specific fields

    Returns:
        Dict ready for JSON serialization
    """
    manifest = {
        "config_digest": digest,
        "seed": seed,
        "mode_ordering": [list(map(int, m)) for m in modes],
        "versions": environment_versions(),
        "exploratory": exploratory,
    }
    if verdict is not None:
        manifest["verdict"] = verdict.to_dict()
    if extra:
        manifest.update(to_jsonable(extra))
    return manifest


def write_csv(path: Path, fieldnames: List[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """
    Write rows to a CSV file with a header line.

    Args:
        path: Destination file
        fieldnames: Column names, in order
        rows: Mappings from column name to value

    Returns:
        The path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_number(v) for k, v in row.items()})
    return path


def write_manifest(csv_path: Path, manifest: Dict[str, Any]) -> Path:
    """Write `<name>.manifest.json` next to a CSV file."""
    csv_path = Path(csv_path)
    target = csv_path.with_name(csv_path.stem + ".manifest.json")
    target.write_text(json.dumps(to_jsonable(manifest), indent=2, sort_keys=True), encoding="utf-8")
    return target


def fit_loglog_slope(t: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(values) against log(t)."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (t > 0) & (values > 0) & np.isfinite(values)
    if mask.sum() < 2:
        raise ValueError("Invalid data: need at least two positive points for a log-log fit")
    slope, _ = np.polyfit(np.log(t[mask]), np.log(values[mask]), 1)
    return float(slope)
