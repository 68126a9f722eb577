from .base import CoefficientModel, FunctionalModel
from .catalog import MODEL_CATALOG, ModelBundle, create_model
from .derivatives import DerivativeBundle, fd_derivatives
from .noise import NoiseSpec
from .scalar import (
    CallableScalarModel,
    ConstantScalarModel,
    ScalarFrictionModel,
    SineFrictionModel,
    TrigonometricScalarModel,
)
from .turbulence import (
    CellularModel,
    PipeModel,
    RadialProfile,
    TranslationalModel,
    TurbulenceModel,
    VortexModel,
    as_coefficient_model,
)

__all__ = [
    "CallableScalarModel",
    "CellularModel",
    "CoefficientModel",
    "ConstantScalarModel",
    "DerivativeBundle",
    "FunctionalModel",
    "MODEL_CATALOG",
    "ModelBundle",
    "NoiseSpec",
    "PipeModel",
    "RadialProfile",
    "ScalarFrictionModel",
    "SineFrictionModel",
    "TranslationalModel",
    "TrigonometricScalarModel",
    "TurbulenceModel",
    "VortexModel",
    "as_coefficient_model",
    "create_model",
    "fd_derivatives",
]
