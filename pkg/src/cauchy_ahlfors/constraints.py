"""Vacuum constraint residuals and TT tooling for initial data (g, K).

Only the induced data on the hypersurface is represented; the ambient
spacetime never appears.  Sign bridge: ``div_g K = -div_sym(K)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .ahlfors import ahlfors_laplacian, div_sym, ext_d_scalar
from .decomp import Decomposition, SolverConfig, decompose_traceless
from .errors import InvalidArgumentError
from .grid import OneForm, ScalarField, SymTensor2
from .tensor import (
    FourierMode,
    l2_norm,
    pointwise_inner,
    trace_g,
    traceless_part,
)

__all__ = [
    "TensorSpec",
    "InitialData",
    "ConstraintReport",
    "KDecomposition",
    "hamiltonian_residual",
    "momentum_residual",
    "constraint_report",
    "decompose_K",
    "build_cmc_data",
    "tt_project",
    "validate_tt",
    "umbilicity_defect",
]

TT_TRACE_LIMIT = 1e-8
TT_DIVERGENCE_LIMIT = 1e-6
UMBILICITY_EPS = 1e-14


@dataclass(frozen=True)
class TensorSpec:
    """``trace * g + sum of cosine modes`` placed on entries (a, b) and (b, a)."""

    trace: float = 0.0
    modes: tuple = field(default_factory=tuple)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"trace", "modes"}
        if unknown:
            raise InvalidArgumentError(f"unknown tensor keys: {sorted(unknown)}")
        return cls(float(d.get("trace", 0.0)), tuple(FourierMode.from_dict(m) for m in d.get("modes", ())))

    def build(self, g):
        grid = g.grid
        n = grid.dimension
        full = self.trace * np.array(g.full)
        for mode in self.modes:
            if not (0 <= mode.a < n and 0 <= mode.b < n):
                raise InvalidArgumentError(f"mode entry ({mode.a}, {mode.b}) out of range")
            profile = mode.evaluate(grid)
            full[mode.a, mode.b] += profile
            if mode.a != mode.b:
                full[mode.b, mode.a] += profile
        return SymTensor2.from_full(grid, full)

    def to_dict(self):
        return {"trace": self.trace, "modes": [m.to_dict() for m in self.modes]}


class InitialData:
    """Metric and second fundamental form of a spacelike slice; H is cached."""

    def __init__(self, metric, K):
        if K.grid != metric.grid:
            raise InvalidArgumentError("K and metric live on different grids")
        self.metric = metric
        self.K = K
        self.H = trace_g(K, metric)


@dataclass
class ConstraintReport:
    hamiltonian: ScalarField
    momentum: OneForm
    hamiltonian_l2: float
    momentum_l2: float
    hamiltonian_sup: float
    momentum_sup: float
    cosmological_constant: float = 0.0

    def to_dict(self):
        return {
            "hamiltonian_l2": self.hamiltonian_l2,
            "momentum_l2": self.momentum_l2,
            "hamiltonian_sup": self.hamiltonian_sup,
            "momentum_sup": self.momentum_sup,
            "cosmological_constant": self.cosmological_constant,
        }


def hamiltonian_residual(data, cosmological_constant=0.0):
    """s - g(K, K) + H^2, minus 2*Lambda when a cosmological constant is given.

    The Lambda term is an extension beyond the vacuum case.
    """
    g = data.metric
    kk = pointwise_inner(data.K, data.K, g)
    values = g.scalar_curvature.data - kk.data + data.H.data**2
    if cosmological_constant:
        values = values - 2.0 * cosmological_constant
    return ScalarField(g.grid, values)


def momentum_residual(data):
    """div_g K - d H, evaluated as -div_sym(K) - dH."""
    return -div_sym(data.metric, data.K) - ext_d_scalar(data.H)


def constraint_report(data, cosmological_constant=0.0):
    g = data.metric
    ham = hamiltonian_residual(data, cosmological_constant)
    mom = momentum_residual(data)
    return ConstraintReport(
        hamiltonian=ham,
        momentum=mom,
        hamiltonian_l2=l2_norm(ham, g),
        momentum_l2=l2_norm(mom, g),
        hamiltonian_sup=ham.sup_norm(),
        momentum_sup=mom.sup_norm(),
        cosmological_constant=cosmological_constant,
    )


@dataclass
class KDecomposition:
    decomposition: Decomposition
    H: ScalarField
    theta_equation_residual: float
    theta_equation_threshold: float

    @property
    def passed(self):
        return self.theta_equation_residual <= self.theta_equation_threshold

    def to_dict(self):
        return {
            "diagnostics": self.decomposition.diagnostics,
            "mean_curvature_variation": float(np.ptp(self.H.data)),
            "theta_equation_residual": self.theta_equation_residual,
            "theta_equation_threshold": self.theta_equation_threshold,
            "theta_equation_passed": bool(self.passed),
        }


def decompose_K(data, config=None):
    """Split the traceless part of K and check Delta_A theta = delta K + (1/n) dH."""
    config = config or SolverConfig()
    g = data.metric
    n = g.dimension
    k0 = traceless_part(data.K, g)
    dec = decompose_traceless(g, k0, config, scale=l2_norm(data.K, g))
    lap = ahlfors_laplacian(g, dec.theta)
    target = div_sym(g, data.K) + (1.0 / n) * ext_d_scalar(data.H)
    residual = l2_norm(lap - target, g)
    return KDecomposition(
        decomposition=dec,
        H=data.H,
        theta_equation_residual=residual,
        theta_equation_threshold=10 * max(config.rel_tolerance * dec.rhs_norm, dec.absolute_floor),
    )


def validate_tt(g, phi):
    """Raise unless ``phi`` is trace free and divergence free to the TT limits."""
    trace = trace_g(phi, g).sup_norm()
    div = l2_norm(div_sym(g, phi), g)
    norm = l2_norm(phi, g)
    if trace > TT_TRACE_LIMIT:
        raise InvalidArgumentError(f"tensor is not trace free (sup |trace| = {trace:.3e})")
    if div > TT_DIVERGENCE_LIMIT * norm:
        raise InvalidArgumentError(
            f"tensor is not divergence free (||div|| = {div:.3e}, ||phi|| = {norm:.3e})"
        )
    return trace, div


def build_cmc_data(g, phi_tt, H0):
    """K = (H0/n) g + phi_tt, which satisfies the momentum constraint."""
    if not math.isfinite(H0):
        raise InvalidArgumentError("H0 must be finite")
    validate_tt(g, phi_tt)
    K = SymTensor2.from_full(g.grid, (H0 / g.dimension) * g.full) + phi_tt
    return InitialData(g, K)


def tt_project(g, phi, config=None):
    """Transverse-traceless part of an arbitrary symmetric tensor."""
    return decompose_traceless(g, traceless_part(phi, g), config, scale=l2_norm(phi, g)).phi_tt


def umbilicity_defect(data):
    """||K_0|| / max(||K||, eps); zero iff K is pure trace."""
    g = data.metric
    k0 = traceless_part(data.K, g)
    return l2_norm(k0, g) / max(l2_norm(data.K, g), UMBILICITY_EPS)
