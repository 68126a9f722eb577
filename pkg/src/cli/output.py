"""On-disk artifacts of a run: report.json, data.csv and config.echo.json."""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict

import numpy as np

from ..common.config import CSV_SCHEMA_VERSION, OUTPUT_FILES
from ..common.errors import ConfigError
from ..harness.report import ExperimentReport, canonical_json

logger = logging.getLogger(__name__)


def format_cell(value: Any) -> str:
    """CSV rendering: floats with 17 significant digits so they read back exactly."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def existing_hash(directory: Path):
    report = directory / OUTPUT_FILES["report"]
    if not report.is_file():
        return None
    try:
        with open(report, "r", encoding="utf-8") as f:
            return json.load(f).get("config_hash")
    except (OSError, json.JSONDecodeError):
        return None


def prepare_output_dir(directory, config_hash: str, force: bool = False) -> Path:
    """Create the output directory, refusing to mix runs of different configurations.

    Raises:
        ConfigError: If the directory holds a report with another config hash
            and ``force`` is not set.
    """
    directory = Path(directory)
    previous = existing_hash(directory)
    if previous is not None and previous != config_hash and not force:
        raise ConfigError(
            f"{directory} holds results of a different configuration ({previous[:12]}); use --force",
            "output_dir",
        )
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_csv(report: ExperimentReport, path: Path):
    columns = report.columns or sorted({key for record in report.records for key in record})
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for record in report.records:
            writer.writerow([format_cell(record.get(column)) for column in columns])


def write_outputs(report: ExperimentReport, directory, echo: Dict[str, Any]) -> Dict[str, Path]:
    """Write the three artifacts and return their paths."""
    directory = Path(directory)
    paths = {key: directory / name for key, name in OUTPUT_FILES.items()}

    data = report.to_dict()
    data["csv_schema"] = CSV_SCHEMA_VERSION
    data["columns"] = report.columns
    with open(paths["report"], "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")

    write_csv(report, paths["data"])

    with open(paths["config_echo"], "w", encoding="utf-8") as f:
        f.write(canonical_json(echo) + "\n")

    logger.info(f"Wrote {len(report.records)} records to {paths['data']}")
    return paths
