"""Rough paths on sampled grids, flows of rough differential equations and
rough transport equations solved by characteristics."""

from .controlled import ControlledPath, integral_path, rough_integral
from .drivers import FbmSpec, IrregularitySpec, irregularity_norm, lift_fbm, sample_fbm, sample_fbm_batch
from .errors import DomainTooSmallError, FactorizationError, FlowBlowUpError, NumericalFailure
from .fields import (
    ConstantField,
    LinearField,
    SumField,
    TestFunction,
    TrigField,
    field_from_spec,
    mollify,
)
from .flows import inverse_flow, jacobian_determinant, solve_flow
from .grid import SampledPath, TimeGrid, TwoParamFunction, holder_seminorm
from .kernels import BACKEND
from .roughpath import RoughPath, lift_path, lift_smooth
from .transport import TransportProblem, duality_bound, duality_identity, sample_weak_solution, strong_solution

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConstantField",
    "ControlledPath",
    "DomainTooSmallError",
    "FactorizationError",
    "FbmSpec",
    "FlowBlowUpError",
    "IrregularitySpec",
    "LinearField",
    "NumericalFailure",
    "RoughPath",
    "SampledPath",
    "SumField",
    "TestFunction",
    "TimeGrid",
    "TransportProblem",
    "TrigField",
    "TwoParamFunction",
    "duality_bound",
    "duality_identity",
    "field_from_spec",
    "holder_seminorm",
    "integral_path",
    "inverse_flow",
    "irregularity_norm",
    "jacobian_determinant",
    "lift_fbm",
    "lift_path",
    "lift_smooth",
    "mollify",
    "rough_integral",
    "sample_fbm",
    "sample_fbm_batch",
    "sample_weak_solution",
    "solve_flow",
    "strong_solution",
]
