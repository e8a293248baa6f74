"""Cauchy-Ahlfors operator, its adjoint and the Ahlfors Laplacian.

Sign conventions: every codifferential carries the minus sign that makes it
the formal L^2 adjoint of the corresponding first-order operator, i.e.

    <phi, delta_star theta> = <div_sym phi, theta>
    <d f, theta>            = <f, delta_oneform theta>
    <d theta, omega>        = <theta, codiff_twoform omega>

The codifferentials are evaluated in divergence form,
``-(1/sqrt g) d_a(sqrt g T^{a...})`` plus the remaining connection term, so
the identities above hold for the discrete rectangle-rule inner product to
round-off rather than only to truncation error.
"""
from __future__ import annotations

import numpy as np

from .grid import OneForm, ScalarField, SymTensor2, TwoForm, spectral_diff
from .tensor import (
    covariant_derivative_oneform,
    l2_norm,
    sharp,
    trace_g,
)

__all__ = [
    "TwoForm",
    "RICCI_SIGN",
    "delta_star",
    "div_sym",
    "delta_oneform",
    "ext_d_scalar",
    "ext_d_oneform",
    "codiff_twoform",
    "cauchy_ahlfors_S",
    "ahlfors_laplacian",
    "ricci_contraction",
    "weitzenboeck_rhs",
    "calibrate_ricci_sign",
]

# Sign of the Ricci term in the Weitzenboeck form of delta S.  Fixed by
# calibrate_ricci_sign on curved 3D metrics; see tests/test_ahlfors.py.
RICCI_SIGN = -1


def _lower(g, vec):
    return np.einsum("ab...,b...->a...", g.full, vec)


def _divergence(g, raised):
    """(1/sqrt g) d_a(sqrt g T^{a...}) for an array with the summed index first."""
    grid = g.grid
    rho = g.volume_density.data
    return sum(spectral_diff(rho * raised[a], a, grid) for a in range(grid.dimension)) / rho


def delta_star(g, theta):
    """Symmetrised covariant derivative 1/2 (nabla_a theta_b + nabla_b theta_a)."""
    return covariant_derivative_oneform(g, theta).symmetric_part()


def div_sym(g, phi):
    """Divergence of a symmetric 2-tensor, (delta phi)_a = -nabla^b phi_ba."""
    ginv = g.inverse_full
    up = np.einsum("ac...,bd...,cd...->ab...", ginv, ginv, phi.full())
    gam = g.christoffel.full()
    vec = -_divergence(g, up) - np.einsum("bad...,ad...->b...", gam, up)
    return OneForm(g.grid, _lower(g, vec))


def delta_oneform(g, theta):
    """Codifferential of a one-form, -nabla^a theta_a (equals -div theta^#)."""
    up = np.einsum("ab...,b...->a...", g.inverse_full, theta.data)
    return ScalarField(g.grid, -_divergence(g, up))


def ext_d_scalar(f):
    grid = f.grid
    return OneForm(grid, np.stack([spectral_diff(f.data, a, grid) for a in range(grid.dimension)]))


def ext_d_oneform(theta):
    """(d theta)_ab = d_a theta_b - d_b theta_a."""
    grid = theta.grid
    partial = np.stack([spectral_diff(theta.data, a, grid) for a in range(grid.dimension)])
    return TwoForm.from_full(grid, partial - np.swapaxes(partial, 0, 1))


def codiff_twoform(g, omega):
    """(delta omega)_b = -nabla^a omega_ab."""
    ginv = g.inverse_full
    up = np.einsum("ac...,bd...,cd...->ab...", ginv, ginv, omega.full())
    return OneForm(g.grid, _lower(g, -_divergence(g, up)))


def cauchy_ahlfors_S(g, theta):
    """S theta = delta_star theta + (1/n) (delta theta) g.

    The trace term uses delta theta = -g^ab nabla_a theta_b evaluated pointwise,
    so the output is trace free to round-off.
    """
    ds = delta_star(g, theta)
    tr = trace_g(ds, g)
    return SymTensor2.from_full(g.grid, ds.full() - g.full * (tr.data / g.dimension))


def ahlfors_laplacian(g, theta):
    """Delta_A theta = S^* S theta, with S^* the divergence on trace-free tensors."""
    return div_sym(g, cauchy_ahlfors_S(g, theta))


def ricci_contraction(g, theta):
    """Ric(theta^#, .) as a one-form."""
    xi = sharp(g, theta)
    return OneForm(g.grid, np.einsum("ab...,b...->a...", g.ricci.full(), xi.data))


def weitzenboeck_rhs(g, theta, ricci_sign=None):
    """1/2 delta d theta + sign * Ric(theta^#, .) + (n-1)/n d delta theta."""
    if ricci_sign is None:
        ricci_sign = RICCI_SIGN
    n = g.dimension
    rough = codiff_twoform(g, ext_d_oneform(theta))
    grad_div = ext_d_scalar(delta_oneform(g, theta))
    return 0.5 * rough + ricci_sign * ricci_contraction(g, theta) + ((n - 1) / n) * grad_div


def calibrate_ricci_sign(g, theta):
    """Compare both Ricci-term signs against the compositional Delta_A.

    Returns ``(sign, residuals)`` where ``residuals`` maps each candidate sign
    to ``||weitzenboeck_rhs - Delta_A theta|| / ||Delta_A theta||`` and
    ``sign`` is the candidate with the smaller residual.
    """
    lap = ahlfors_laplacian(g, theta)
    scale = l2_norm(lap, g)
    residuals = {}
    for sign in (1, -1):
        diff = weitzenboeck_rhs(g, theta, ricci_sign=sign) - lap
        residuals[sign] = l2_norm(diff, g) / scale
    best = min(residuals, key=residuals.get)
    return best, residuals


def conformal_killing_defect(g, theta):
    """||S theta|| / ||theta||, zero exactly for conformal Killing one-forms."""
    return l2_norm(cauchy_ahlfors_S(g, theta), g) / l2_norm(theta, g)


