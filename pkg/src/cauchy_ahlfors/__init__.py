"""Cauchy-Ahlfors operator, Ahlfors Laplacian and TT decompositions on flat tori."""

__version__ = "0.1.0"

from .errors import (
    BandLimitError,
    DegenerateMetricError,
    InconsistentSystemError,
    InvalidArgumentError,
    SolverFailureError,
)
from .grid import (
    GridSpec,
    OneForm,
    ScalarField,
    SymTensor2,
    Tensor2,
    TwoForm,
    VectorField,
    integrate,
    partial_derivative,
    random_bandlimited_field,
)
from .tensor import FourierMode, Metric, MetricSpec, metric_from_spec
from .ahlfors import ahlfors_laplacian, cauchy_ahlfors_S, delta_star, div_sym
from .decomp import SolverConfig, decompose_traceless, verify_theorem1

__all__ = [
    "BandLimitError",
    "DegenerateMetricError",
    "InconsistentSystemError",
    "InvalidArgumentError",
    "SolverFailureError",
    "GridSpec",
    "OneForm",
    "ScalarField",
    "SymTensor2",
    "Tensor2",
    "TwoForm",
    "VectorField",
    "integrate",
    "partial_derivative",
    "random_bandlimited_field",
    "FourierMode",
    "Metric",
    "MetricSpec",
    "metric_from_spec",
    "ahlfors_laplacian",
    "cauchy_ahlfors_S",
    "delta_star",
    "div_sym",
    "SolverConfig",
    "decompose_traceless",
    "verify_theorem1",
]
