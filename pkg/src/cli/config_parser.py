"""Run configuration: JSON file, command-line flags and their precedence."""

import argparse
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..common.config import EXPERIMENT_DEFAULTS, OUTPUT_DIR, SIM_DEFAULTS
from ..common.errors import ConfigError
from ..drift.matrices import format_alpha, parse_alpha

logger = logging.getLogger(__name__)

COMMAND_NAMES = ("drift", "matrices", "simulate", "converge", "covariance", "regimes", "demo")
DEMO_SCENARIOS = ("vortex", "cellular", "turbophoresis", "divergence")

# Keys that never change results and are left out of the config hash
RUNTIME_KEYS = ("output_dir", "force", "workers", "chunk_size")


@dataclass
class RunConfig:
    """Effective configuration of one CLI invocation.

    Attributes:
        command (str): One of ``COMMAND_NAMES``.
        scenario (Optional[str]): Demo scenario.
        model (Optional[str]): Catalog model name; each command has a default.
        params (Dict[str, Any]): Model parameters.
        noise: ``identity`` or a dict with ``A`` and ``B`` literals.
        alpha (List[float]): One or more values in [0, inf].
        eps (List[float]): Correlation times, decreasing for sweeps.
        x (Optional[List[float]]): Evaluation point, initial position or
            frozen slow variable, depending on the command.
    """

    command: str
    scenario: Optional[str] = None
    model: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)
    noise: Any = None
    alpha: List[float] = field(default_factory=lambda: [SIM_DEFAULTS["alpha"]])
    eps: List[float] = field(default_factory=list)
    mu_rule: str = SIM_DEFAULTS["mu_rule"]
    mu: Optional[float] = None
    T: Optional[float] = None
    dt: Optional[float] = None
    n_paths: int = EXPERIMENT_DEFAULTS["n_paths"]
    seed: int = SIM_DEFAULTS["seed"]
    x: Optional[List[float]] = None
    eta: Optional[float] = None
    burn_in: Optional[float] = None
    delta: float = 0.2
    grid: int = 41
    output_dir: str = str(OUTPUT_DIR)
    force: bool = False
    workers: Optional[int] = None
    chunk_size: Optional[int] = None

    @property
    def single_alpha(self) -> float:
        if len(self.alpha) != 1:
            raise ConfigError(f"{self.command} takes a single alpha, got {len(self.alpha)}", "alpha")
        return self.alpha[0]

    def validate(self):
        """Check every numeric parameter before any computation starts.

        Raises:
            ConfigError: With the path of the first offending key.
        """
        if self.command not in COMMAND_NAMES:
            raise ConfigError(f"Unknown command: {self.command}", "command")
        if self.command == "demo" and self.scenario not in DEMO_SCENARIOS:
            raise ConfigError(f"demo needs one of {', '.join(DEMO_SCENARIOS)}", "scenario")
        if self.command != "demo" and self.scenario is not None:
            raise ConfigError(f"{self.command} takes no scenario", "scenario")
        self._coerce(float, ("T", "dt", "mu", "eta", "burn_in", "delta"))
        self._coerce(int, ("n_paths", "seed", "grid", "workers", "chunk_size"))
        self.alpha = [parse_alpha(a) for a in self.alpha]
        if not self.alpha:
            raise ConfigError("at least one alpha is required", "alpha")
        for i, eps in enumerate(self.eps):
            if not eps > 0.0:
                raise ConfigError(f"eps must be positive, got {eps}", f"eps[{i}]")
        for key in ("T", "dt", "mu", "eta", "delta"):
            value = getattr(self, key)
            if value is not None and not value > 0.0:
                raise ConfigError(f"{key} must be positive, got {value}", key)
        if self.burn_in is not None and self.burn_in < 0.0:
            raise ConfigError(f"burn-in must be nonnegative, got {self.burn_in}", "burn_in")
        if self.n_paths < 2:
            raise ConfigError(f"need at least 2 paths, got {self.n_paths}", "n_paths")
        if self.grid < 2:
            raise ConfigError(f"grid needs at least 2 points per axis, got {self.grid}", "grid")
        for key in ("workers", "chunk_size"):
            value = getattr(self, key)
            if value is not None and value < 1:
                raise ConfigError(f"{key} must be a positive integer, got {value}", key)
        return self

    def _coerce(self, kind, keys):
        for key in keys:
            value = getattr(self, key)
            if value is None:
                continue
            if isinstance(value, bool) or (kind is int and isinstance(value, float) and not value.is_integer()):
                raise ConfigError(f"expected {kind.__name__}, got {value!r}", key)
            try:
                setattr(self, key, kind(value))
            except (TypeError, ValueError):
                raise ConfigError(f"expected {kind.__name__}, got {value!r}", key) from None

    def to_dict(self) -> dict:
        """Result-relevant configuration, as echoed and hashed."""
        data = asdict(self)
        for key in RUNTIME_KEYS:
            data.pop(key)
        data["alpha"] = [format_alpha(a) for a in self.alpha]
        return data


class ArgumentParser(argparse.ArgumentParser):
    """argparse variant that raises ConfigError instead of exiting."""

    def error(self, message):
        raise ConfigError(message, "argv")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="inertial",
        allow_abbrev=False,
        description="Inertial-particle drift: frozen-system matrices, coupled simulation and experiments.",
    )
    parser.add_argument("command", choices=COMMAND_NAMES)
    parser.add_argument("scenario", nargs="?", default=None, help="demo scenario")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--model")
    parser.add_argument("--noise", help="'identity' or a JSON object with A and B")
    parser.add_argument("--alpha", help="value or comma list; 'inf' is accepted")
    parser.add_argument("--eps", help="value or comma list")
    parser.add_argument("--mu-rule", dest="mu_rule")
    parser.add_argument("--mu", type=float)
    parser.add_argument("--T", dest="T", type=float)
    parser.add_argument("--dt", type=float)
    parser.add_argument("--paths", dest="n_paths", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--x", help="comma list of coordinates")
    parser.add_argument("--eta", type=float)
    parser.add_argument("--burn-in", dest="burn_in", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--grid", type=int)
    parser.add_argument("--out", dest="output_dir")
    parser.add_argument("--force", action="store_true", default=None)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--chunk-size", dest="chunk_size", type=int)
    return parser


def parse_value(text: str):
    """JSON literal if possible (numbers, lists, objects), the raw string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_list(value, key: str) -> List[Any]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, (int, float)):
        return [value]
    raise ConfigError(f"expected a value or a list, got {value!r}", key)


def parse_floats(value, key: str) -> List[float]:
    items = parse_list(value, key)
    try:
        return [float(item) for item in items]
    except (TypeError, ValueError):
        raise ConfigError(f"expected numbers, got {value!r}", key) from None


def model_params(extra: Sequence[str]) -> Dict[str, Any]:
    """Turn leftover ``--key value`` pairs into model parameters."""
    params = {}
    tokens = list(extra)
    while tokens:
        flag = tokens.pop(0)
        if not flag.startswith("--") or len(flag) == 2:
            raise ConfigError(f"unexpected argument {flag!r}", "argv")
        key = flag[2:].replace("-", "_")
        if "=" in key:
            key, text = key.split("=", 1)
        elif tokens and not tokens[0].startswith("--"):
            text = tokens.pop(0)
        else:
            raise ConfigError(f"missing value for {flag}", f"model.params.{key}")
        params[key] = parse_value(text)
    return params


def read_config_file(path: str) -> Dict[str, Any]:
    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"config file not found: {path}", "config")
    try:
        with open(file, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}", "config") from e
    if not isinstance(data, dict):
        raise ConfigError("the configuration must be a JSON object", "config")
    return data


def _merge(values: Dict[str, Any], source: Dict[str, Any], origin: str):
    known = {f.name for f in fields(RunConfig)}
    for key, value in source.items():
        if key == "model" and isinstance(value, dict):
            unknown = set(value) - {"name", "params"}
            if unknown:
                raise ConfigError("unknown key", f"{origin}model.{sorted(unknown)[0]}")
            if "name" in value:
                values["model"] = value["name"]
            values.setdefault("params", {}).update(value.get("params") or {})
        elif key == "params":
            if not isinstance(value, dict):
                raise ConfigError("params must be an object", f"{origin}params")
            values.setdefault("params", {}).update(value)
        elif key in known:
            values[key] = value
        else:
            raise ConfigError("unknown key", f"{origin}{key}")


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Build the effective RunConfig; flags override file values.

    Raises:
        ConfigError: On unknown keys, unreadable files or invalid values.
    """
    args, extra = build_parser().parse_known_args(argv)

    values: Dict[str, Any] = {}
    if args.config:
        _merge(values, read_config_file(args.config), "")
        logger.debug(f"Loaded configuration from {args.config}")

    flags = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    if "noise" in flags:
        flags["noise"] = parse_value(flags["noise"])
    _merge(values, flags, "")
    if extra:
        values.setdefault("params", {}).update(model_params(extra))

    values["alpha"] = parse_list(values.get("alpha", [SIM_DEFAULTS["alpha"]]), "alpha")
    values["eps"] = parse_floats(values.get("eps"), "eps")
    if values.get("x") is not None:
        values["x"] = parse_floats(values["x"], "x")

    try:
        config = RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e), "config") from e
    return config.validate()
