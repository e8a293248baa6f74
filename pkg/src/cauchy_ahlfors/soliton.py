"""Almost Ricci solitons: residuals, fitting and the 2D integral identity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ahlfors import delta_oneform, ext_d_scalar
from .decomp import SolverConfig, decompose_traceless
from .errors import InvalidArgumentError
from .grid import OneForm, ScalarField, SymTensor2, VectorField, integrate
from .tensor import (
    covariant_derivative_oneform,
    flat,
    l2_norm,
    lie_derivative_metric,
    pointwise_inner,
    sharp,
    traceless_ricci,
)

__all__ = [
    "SolitonFit",
    "soliton_residual",
    "fit_almost_soliton",
    "integral_identity_2d",
    "DEVIATION_EPS",
]

DEVIATION_EPS = 1e-14


@dataclass
class SolitonFit:
    """Best almost-soliton representation ``Ric = 1/2 L_V g + lambda g + phi_tt``.

    ``vector_field`` is V = theta^#, so ``1/2 L_V g = delta_star(theta)``.
    """

    theta: OneForm
    vector_field: VectorField
    lambda_field: ScalarField
    phi_tt: SymTensor2
    deviation: float
    lambda_variation: float
    lie_s_integral: float
    cg_iterations: int

    def to_dict(self):
        return {
            "deviation": self.deviation,
            "lambda_variation": self.lambda_variation,
            "lambda_mean": float(np.mean(self.lambda_field.data)),
            "lie_s_integral": self.lie_s_integral,
            "theta_sup": self.theta.sup_norm(),
            "phi_tt_sup": self.phi_tt.sup_norm(),
            "cg_iterations": self.cg_iterations,
        }


def soliton_residual(g, V, lam):
    """Ric - 1/2 L_V g - lambda g."""
    if np.isscalar(lam):
        lam = ScalarField(g.grid, np.full(g.grid.shape, float(lam)))
    half_lie = 0.5 * lie_derivative_metric(g, V)
    return g.ricci - half_lie - SymTensor2.from_full(g.grid, g.full * lam.data)


def fit_almost_soliton(g, config=None):
    """Split the Ricci tensor into soliton part and TT remainder.

    ``deviation = ||phi_tt|| / max(||Ric||, DEVIATION_EPS)`` vanishes exactly
    when g carries an almost Ricci soliton structure.
    """
    config = config or SolverConfig()
    n = g.dimension
    ric_norm = l2_norm(g.ricci, g)
    # in 2D the traceless Ricci tensor is round-off noise; the scale lets the solver see that
    dec = decompose_traceless(g, traceless_ricci(g), config, scale=ric_norm)
    s = g.scalar_curvature
    lam = (s + delta_oneform(g, dec.theta)) / n
    xi = sharp(g, dec.theta)
    lie_s = ScalarField(g.grid, np.einsum("a...,a...->...", xi.data, ext_d_scalar(s).data))
    return SolitonFit(
        theta=dec.theta,
        vector_field=xi,
        lambda_field=lam,
        phi_tt=dec.phi_tt,
        deviation=dec.phi_tt_norm / max(ric_norm, DEVIATION_EPS),
        lambda_variation=float(np.ptp(lam.data)),
        lie_s_integral=integrate(lie_s, g.volume_density),
        cg_iterations=dec.cg_iterations,
    )


def integral_identity_2d(g, xi):
    """Both sides of  int s g(xi, xi) dvol = 2 <nabla xi, nabla xi>  on a surface.

    Returned as ``(lhs, rhs)``; equality is expected only for soliton data.
    """
    if g.dimension != 2:
        raise InvalidArgumentError("integral_identity_2d needs a two-dimensional metric")
    if not isinstance(xi, VectorField):
        raise InvalidArgumentError("xi must be a VectorField")
    s = g.scalar_curvature
    lhs = integrate(s * pointwise_inner(xi, xi, g), g.volume_density)
    nab = covariant_derivative_oneform(g, flat(g, xi))
    rhs = 2 * integrate(pointwise_inner(nab, nab, g), g.volume_density)
    return lhs, rhs
