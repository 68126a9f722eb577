"""Experiment reports and the statistics behind their verdicts."""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..common.config import EXPERIMENT_DEFAULTS


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def standard_error(samples) -> float:
    """Sample standard deviation over sqrt(n); zero for fewer than two samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / math.sqrt(samples.size))


def joint_standard_error(*errors: float) -> float:
    return float(math.sqrt(sum(e * e for e in errors)))


@dataclass
class ReportRow:
    """One sweep point of an experiment.

    Attributes:
        param: Sweep value or label (eps, alpha, matrix entry, time, ...).
        estimate (float): Point estimate.
        stderr (float): Standard error of the estimate.
        n (int): Number of unflagged samples behind the estimate.
        verdict (Optional[str]): Row-level verdict, if any.
        flagged_fraction (float): Fraction of flagged trajectories.
        extra (Dict[str, Any]): Additional named values.
    """

    param: Any
    estimate: float
    stderr: float
    n: int
    verdict: Optional[str] = None
    flagged_fraction: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        data = {
            "param": self.param,
            "estimate": _finite(self.estimate),
            "stderr": _finite(self.stderr),
            "n": int(self.n),
            "verdict": self.verdict,
            "flagged_fraction": float(self.flagged_fraction),
        }
        data.update({k: _finite(v) for k, v in self.extra.items()})
        return data


def _finite(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass
class ExperimentReport:
    """Ensemble statistics, named verdict checks and per-path records.

    The overall verdict is ``pass`` when every check holds, ``invalid`` when
    the flagged fraction reaches the limit, and ``fail`` otherwise.
    """

    command: str
    config: Dict[str, Any]
    rows: List[ReportRow] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)
    records: List[Dict[str, Any]] = field(default_factory=list)
    columns: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    flagged_fraction: float = 0.0
    wall_seconds: float = 0.0

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    @property
    def valid(self) -> bool:
        return self.flagged_fraction < EXPERIMENT_DEFAULTS["max_flagged_fraction"]

    @property
    def verdict(self) -> str:
        if not self.valid:
            return "invalid"
        return "pass" if all(self.checks.values()) else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def add_row(self, *args, **kwargs) -> ReportRow:
        row = ReportRow(*args, **kwargs)
        self.rows.append(row)
        return row

    def note_flagged(self, flagged) -> float:
        """Fold a flagged mask into the report and return its fraction."""
        fraction = float(np.mean(flagged)) if np.size(flagged) else 0.0
        self.flagged_fraction = max(self.flagged_fraction, fraction)
        return fraction

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "config": self.config,
            "rows": [row.to_dict() for row in self.rows],
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "verdict": self.verdict,
            "valid": self.valid,
            "flagged_fraction": self.flagged_fraction,
            "notes": self.notes,
            "wall_seconds": self.wall_seconds,
        }


def summarize(values, keep=None):
    """Mean, standard error and count of ``values`` restricted to ``keep``."""
    values = np.asarray(values, dtype=float)
    if keep is not None:
        values = values[np.asarray(keep, dtype=bool)]
    if values.size == 0:
        return math.nan, math.nan, 0
    return float(np.mean(values)), standard_error(values), int(values.size)


def position_columns(prefix: str, dim: int) -> List[str]:
    return [f"{prefix}{i + 1}" for i in range(dim)]
