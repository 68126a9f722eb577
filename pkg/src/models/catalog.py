import inspect
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from ..common.errors import ConfigError, InertialDriftError
from .base import CoefficientModel, FunctionalModel
from .noise import NoiseSpec
from .scalar import ConstantScalarModel, SineFrictionModel
from .turbulence import (
    CellularModel,
    PipeModel,
    RadialProfile,
    TranslationalModel,
    TurbulenceModel,
    VortexModel,
    as_coefficient_model,
)

logger = logging.getLogger(__name__)


@dataclass
class ModelBundle:
    """A named problem: coefficient model, OU driver and optional turbulence source."""

    name: str
    model: CoefficientModel
    noise: NoiseSpec
    turbulence: Optional[TurbulenceModel] = None
    params: Dict[str, Any] = field(default_factory=dict)


def _scalar(lam=2.0, sigma=1.0, b=0.0):
    return ConstantScalarModel(lam, sigma, b), NoiseSpec(1.0, 1.0), None


def _scalar_sine(base=2.0, amplitude=1.0, wavenumber=1.0, sigma=1.0):
    return SineFrictionModel(base, amplitude, wavenumber, sigma=sigma), NoiseSpec(1.0, 1.0), None


def _scalar_sine_xi(base=2.0, amplitude=1.0, wavenumber=1.0, xi=1.0):
    model = SineFrictionModel(base, amplitude, wavenumber, sigma=None, xi=xi, name="scalar-sine-xi")
    return model, NoiseSpec(1.0, 1.0), None


def _constant(gamma=((1.0,),), sigma=((1.0,),), b=None, A=None, B=None):
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d, n = sigma.shape
    sym = np.linalg.eigvalsh(0.5 * (gamma + gamma.T))
    model = FunctionalModel(
        b=np.zeros(d) if b is None else np.asarray(b, dtype=float),
        gamma=gamma,
        sigma=sigma,
        dim=d,
        noise_dim=n,
        gamma0=float(sym.min()),
        gamma1=float(sym.max()),
        name="constant",
    )
    noise = NoiseSpec(np.eye(n) if A is None else A, np.eye(n) if B is None else B)
    return model, noise, None


def _turbulent(turbulence: TurbulenceModel):
    return as_coefficient_model(turbulence), turbulence.noise_spec(), turbulence


def _vortex(profile="linear", c0=1.0, energy=1.0, cutoff_radius=None, length=1.0):
    radial = RadialProfile(profile, cutoff_radius, length)
    return _turbulent(VortexModel(radial, c0, energy))


def _cellular(k1=1.0, k2=1.0, lam=1.0, c0=1.0):
    return _turbulent(CellularModel(k1, k2, lam, c0))


def _pipe(peak=None, curvature=None, floor=None, smoothing=None, c0=1.0, mean_speed=0.0, noise_scale=1.0):
    return _turbulent(PipeModel(peak, curvature, floor, smoothing, c0, mean_speed, noise_scale))


def _translational(wavevectors=((1.0, 0.0), (0.0, 1.0)), lam=1.0, c0=1.0):
    return _turbulent(TranslationalModel(wavevectors, lam, c0))


MODEL_CATALOG: Dict[str, Callable] = {
    "scalar": _scalar,
    "scalar-sine": _scalar_sine,
    "scalar-sine-xi": _scalar_sine_xi,
    "constant": _constant,
    "vortex": _vortex,
    "cellular": _cellular,
    "pipe": _pipe,
    "translational": _translational,
}

# CLI spelling of parameters that clash with Python keywords
PARAM_ALIASES = {"lambda": "lam"}


def create_model(name: str, params: Optional[Dict[str, Any]] = None, noise=None) -> ModelBundle:
    """Create a catalog model by name.

    Args:
        name (str): Catalog name, e.g. ``scalar-sine`` or ``vortex``.
        params (Optional[Dict[str, Any]]): Builder parameters; ``lambda`` is
            accepted for the friction level.
        noise: Optional override of the OU driver, either a NoiseSpec, a dict
            with ``A`` and ``B`` literals, or the string ``identity``.

    Returns:
        ModelBundle: The assembled problem.

    Raises:
        ConfigError: If the name or a parameter is unknown, or the noise
            override does not fit the model.
    """
    builder = MODEL_CATALOG.get(name)
    if builder is None:
        raise ConfigError(f"Unknown model: {name}", "model.name")

    params = dict(params or {})
    kwargs = {PARAM_ALIASES.get(k, k): v for k, v in params.items()}
    accepted = inspect.signature(builder).parameters
    for key in kwargs:
        if key not in accepted:
            raise ConfigError(f"unknown parameter for model {name}", f"model.params.{key}")

    try:
        model, default_noise, turbulence = builder(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), "model.params") from e

    spec = _resolve_noise(noise, model.noise_dim) or default_noise
    if spec.n != model.noise_dim:
        raise ConfigError(
            f"noise dimension {spec.n} does not match model noise dimension {model.noise_dim}",
            "noise",
        )
    logger.debug(f"Created model {name} with params {params}")
    return ModelBundle(name, model, spec, turbulence, params)


def _resolve_noise(noise, n: int) -> Optional[NoiseSpec]:
    if noise is None or isinstance(noise, NoiseSpec):
        return noise
    if noise == "identity":
        return NoiseSpec.identity(n)
    if isinstance(noise, dict):
        unknown = set(noise) - {"A", "B"}
        if unknown:
            raise ConfigError("unknown noise key", f"noise.{sorted(unknown)[0]}")
        try:
            return NoiseSpec(noise.get("A", np.eye(n)), noise.get("B", np.eye(n)))
        except InertialDriftError as e:
            raise ConfigError(str(e), "noise") from e
    raise ConfigError(f"Unknown noise specification: {noise!r}", "noise")
