"""Riemannian tensor calculus on the periodic grid.

Component arrays follow the storage convention of :mod:`cauchy_ahlfors.grid`.
Internally most formulas are evaluated on full ``(n, n, ...)`` arrays with
``einsum``; results are packed back into the symmetric storage types.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from .errors import DegenerateMetricError, InvalidArgumentError
from .grid import (
    OneForm,
    ScalarField,
    SymTensor2,
    Tensor2,
    TwoForm,
    VectorField,
    integrate,
    spectral_diff,
    sym_pairs,
)

__all__ = [
    "FourierMode",
    "MetricSpec",
    "Metric",
    "Christoffel",
    "metric_from_spec",
    "christoffel",
    "ricci",
    "scalar_curvature",
    "traceless_ricci",
    "covariant_derivative_oneform",
    "lie_derivative_metric",
    "metric_compatibility_defect",
    "sharp",
    "flat",
    "pointwise_inner",
    "l2_inner",
    "l2_norm",
    "trace_g",
    "traceless_part",
]


def _d(array, axis, grid):
    return spectral_diff(array, axis, grid)


@dataclass(frozen=True)
class FourierMode:
    """``amplitude * cos(k . x + phase)`` placed on tensor entry (a, b).

    For conformal factors and scalar profiles ``a``/``b`` are ignored.
    """

    amplitude: float
    wavevector: tuple
    phase: float = 0.0
    a: int = 0
    b: int = 0

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"amplitude", "wavevector", "phase", "a", "b"}
        if unknown:
            raise InvalidArgumentError(f"unknown mode keys: {sorted(unknown)}")
        return cls(
            amplitude=float(d["amplitude"]),
            wavevector=tuple(int(k) for k in d["wavevector"]),
            phase=float(d.get("phase", 0.0)),
            a=int(d.get("a", 0)),
            b=int(d.get("b", 0)),
        )

    def to_dict(self):
        return {
            "a": self.a,
            "b": self.b,
            "amplitude": self.amplitude,
            "wavevector": list(self.wavevector),
            "phase": self.phase,
        }

    def evaluate(self, grid):
        return self.amplitude * np.cos(grid.plane_wave_phase(self.wavevector) + self.phase)


def modes_profile(modes, grid):
    """Sum of the cosine modes as a raw array."""
    out = np.zeros(grid.shape)
    for mode in modes:
        out += mode.evaluate(grid)
    return out


@dataclass(frozen=True)
class MetricSpec:
    """Declarative test metric.

    ``kind`` is ``"flat"``, ``"conformal"`` (g = exp(2f) delta with f the sum
    of ``modes``) or ``"perturbation"`` (g_ab = delta_ab + sum of the modes
    placed on entry (a, b)).
    """

    kind: str = "flat"
    modes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("flat", "conformal", "perturbation"):
            raise InvalidArgumentError(f"unknown metric kind {self.kind!r}")
        object.__setattr__(self, "modes", tuple(self.modes))

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "modes"}
        if unknown:
            raise InvalidArgumentError(f"unknown metric keys: {sorted(unknown)}")
        return cls(d.get("kind", "flat"), tuple(FourierMode.from_dict(m) for m in d.get("modes", ())))

    def to_dict(self):
        return {"kind": self.kind, "modes": [m.to_dict() for m in self.modes]}


class Metric:
    """Positive definite metric with cached inverse and volume density.

    Positive definiteness is checked eagerly at every grid point.
    """

    def __init__(self, components):
        if not isinstance(components, SymTensor2):
            raise InvalidArgumentError("metric components must be a SymTensor2")
        self.components = components
        self.grid = components.grid
        g = components.full()
        gm = np.moveaxis(g, (0, 1), (-2, -1))
        eig = np.linalg.eigvalsh(gm)
        lowest = eig[..., 0]
        if not np.all(lowest > 0):
            idx = tuple(int(i) for i in np.unravel_index(int(np.argmin(lowest)), self.grid.shape))
            coords = tuple(float(c[idx]) for c in self.grid.coordinates)
            raise DegenerateMetricError(
                f"metric is not positive definite at grid point {idx} "
                f"(x = {coords}, smallest eigenvalue {lowest[idx]:.3e})",
                point=idx,
                coordinates=coords,
            )
        inv = np.linalg.inv(gm)
        inv = 0.5 * (inv + np.swapaxes(inv, -1, -2))
        self._full = g
        self._inv = np.moveaxis(inv, (-2, -1), (0, 1))
        self._full.setflags(write=False)
        self._inv.setflags(write=False)
        self.inverse = SymTensor2.from_full(self.grid, self._inv)
        self.volume_density = ScalarField(self.grid, np.sqrt(np.prod(eig, axis=-1)))

    @property
    def dimension(self):
        return self.grid.dimension

    @property
    def full(self):
        """Covariant components g_ab as an ``(n, n, ...)`` array."""
        return self._full

    @property
    def inverse_full(self):
        """Contravariant components g^ab as an ``(n, n, ...)`` array."""
        return self._inv

    @cached_property
    def christoffel(self):
        return _christoffel(self)

    @cached_property
    def ricci(self):
        return _ricci(self)

    @cached_property
    def scalar_curvature(self):
        return trace_g(self.ricci, self)

    def volume(self):
        return integrate(ScalarField(self.grid, np.ones(self.grid.shape)), self.volume_density)

    @classmethod
    def flat(cls, grid):
        n = grid.dimension
        eye = np.broadcast_to(np.eye(n).reshape((n, n) + (1,) * n), (n, n) + grid.shape)
        return cls(SymTensor2.from_full(grid, eye))

    def __repr__(self):
        return f"Metric(n={self.dimension}, grid={self.grid.resolution})"


def metric_from_spec(spec, grid):
    n = grid.dimension
    eye = np.eye(n).reshape((n, n) + (1,) * n) * np.ones(grid.shape)
    if spec.kind == "flat":
        return Metric(SymTensor2.from_full(grid, eye))
    if spec.kind == "conformal":
        f = modes_profile(spec.modes, grid)
        return Metric(SymTensor2.from_full(grid, eye * np.exp(2 * f)))
    g = eye.copy()
    for mode in spec.modes:
        a, b = mode.a, mode.b
        if not (0 <= a < n and 0 <= b < n):
            raise InvalidArgumentError(f"mode entry ({a}, {b}) out of range for n={n}")
        profile = mode.evaluate(grid)
        g[a, b] += profile
        if a != b:
            g[b, a] += profile
    return Metric(SymTensor2.from_full(grid, g))


class Christoffel:
    """Gamma^c_ab packed over the symmetric lower pair, shape ``(n, m, ...)``."""

    def __init__(self, grid, data):
        self.grid = grid
        self.data = np.asarray(data)
        self.data.setflags(write=False)

    @cached_property
    def _full(self):
        n = self.grid.dimension
        out = np.empty((n, n, n) + self.grid.shape)
        for i, (a, b) in enumerate(sym_pairs(n)):
            out[:, a, b] = self.data[:, i]
            out[:, b, a] = self.data[:, i]
        out.setflags(write=False)
        return out

    def full(self):
        """Gamma^c_ab as an ``(n, n, n, ...)`` array indexed [c, a, b]."""
        return self._full

    def sup_norm(self):
        return float(np.max(np.abs(self.data)))


def _christoffel(g):
    grid = g.grid
    n = grid.dimension
    gf = g.full
    # dg[d, a, b] = d_d g_ab
    dg = np.stack([_d(gf, d, grid) for d in range(n)])
    # lowered Gamma_{d,ab} = 1/2 (d_a g_bd + d_b g_ad - d_d g_ab)
    low = 0.5 * (
        np.einsum("abd...->dab...", dg)
        + np.einsum("bad...->dab...", dg)
        - dg
    )
    full = np.einsum("cd...,dab...->cab...", g.inverse_full, low)
    packed = np.stack([full[:, a, b] for a, b in sym_pairs(n)], axis=1)
    return Christoffel(grid, packed)


def christoffel(g):
    """Levi-Civita connection coefficients of ``g``."""
    return g.christoffel


def _ricci(g):
    grid = g.grid
    n = grid.dimension
    gam = g.christoffel.full()
    div = sum(_d(gam[c], c, grid) for c in range(n))
    trace = np.einsum("ccb...->b...", gam)
    grad_trace = np.stack([_d(trace, a, grid) for a in range(n)])
    ric = (
        div
        - grad_trace
        + np.einsum("d...,dab...->ab...", trace, gam)
        - np.einsum("cad...,dcb...->ab...", gam, gam)
    )
    return SymTensor2.from_full(grid, 0.5 * (ric + np.swapaxes(ric, 0, 1)))


def ricci(g):
    """Ricci tensor R_ab from Christoffel differentiation."""
    return g.ricci


def scalar_curvature(g, ric=None):
    if ric is None:
        return g.scalar_curvature
    return trace_g(ric, g)


def trace_g(phi, g):
    """g^ab phi_ab."""
    return ScalarField(g.grid, np.einsum("ab...,ab...->...", g.inverse_full, phi.full()))


def traceless_part(phi, g):
    """phi - (1/n) trace_g(phi) g."""
    tr = trace_g(phi, g)
    return SymTensor2.from_full(g.grid, phi.full() - g.full * (tr.data / g.dimension))


def traceless_ricci(g):
    return traceless_part(g.ricci, g)


def covariant_derivative_oneform(g, theta):
    """(nabla theta)_ab = d_a theta_b - Gamma^c_ab theta_c, first index is the derivative."""
    grid = g.grid
    n = grid.dimension
    partial = np.stack([_d(theta.data, a, grid) for a in range(n)])
    gam = g.christoffel.full()
    return Tensor2(grid, partial - np.einsum("cab...,c...->ab...", gam, theta.data))


def metric_compatibility_defect(g):
    """sup |nabla_c g_ab| over all components and grid points."""
    grid = g.grid
    gam = g.christoffel.full()
    worst = 0.0
    for c in range(grid.dimension):
        # nabla_c g_ab = d_c g_ab - Gamma^d_ca g_db - Gamma^d_cb g_ad
        nab = (
            _d(g.full, c, grid)
            - np.einsum("da...,db...->ab...", gam[:, c], g.full)
            - np.einsum("db...,ad...->ab...", gam[:, c], g.full)
        )
        worst = max(worst, float(np.max(np.abs(nab))))
    return worst


def lie_derivative_metric(g, xi):
    """L_xi g = nabla_a xi_b + nabla_b xi_a for a vector field ``xi``."""
    if not isinstance(xi, VectorField):
        raise InvalidArgumentError("lie_derivative_metric expects a VectorField")
    nab = covariant_derivative_oneform(g, flat(g, xi)).data
    return SymTensor2.from_full(g.grid, nab + np.swapaxes(nab, 0, 1))


def sharp(g, theta):
    """Raise the index of a one-form."""
    return VectorField(g.grid, np.einsum("ab...,b...->a...", g.inverse_full, theta.data))


def flat(g, xi):
    """Lower the index of a vector field."""
    return OneForm(g.grid, np.einsum("ab...,b...->a...", g.full, xi.data))


def pointwise_inner(phi, psi, g):
    """g(phi, psi) contracted on every index, as a scalar field.

    Two-forms use the form normalisation (sum over a < b), which makes the
    exterior derivative and the codifferential mutually adjoint.
    """
    if type(phi) is not type(psi):
        raise InvalidArgumentError(
            f"rank mismatch: {type(phi).__name__} vs {type(psi).__name__}"
        )
    if phi.grid != g.grid or psi.grid != g.grid:
        raise InvalidArgumentError("fields and metric live on different grids")
    ginv = g.inverse_full
    if isinstance(phi, ScalarField):
        val = phi.data * psi.data
    elif isinstance(phi, VectorField):
        val = np.einsum("ab...,a...,b...->...", g.full, phi.data, psi.data)
    elif isinstance(phi, OneForm):
        val = np.einsum("ab...,a...,b...->...", ginv, phi.data, psi.data)
    elif isinstance(phi, (SymTensor2, Tensor2, TwoForm)):
        raised = np.einsum("ac...,bd...,cd...->ab...", ginv, ginv, psi.full())
        val = np.einsum("ab...,ab...->...", phi.full(), raised)
        if isinstance(phi, TwoForm):
            val = 0.5 * val
    else:
        raise InvalidArgumentError(f"unsupported field type {type(phi).__name__}")
    return ScalarField(g.grid, val)


def l2_inner(phi, psi, g):
    """L^2 inner product: integral of g(phi, psi) against the volume density."""
    return integrate(pointwise_inner(phi, psi, g), g.volume_density)


def l2_norm(phi, g):
    return math.sqrt(max(l2_inner(phi, phi, g), 0.0))
