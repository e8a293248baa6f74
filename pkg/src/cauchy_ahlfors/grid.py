"""Uniform periodic grids on the n-torus and the fields that live on them.

Every field stores its samples in a numpy array whose trailing ``n`` axes are
the spatial grid axes (``indexing='ij'``) and whose leading axes, if any,
enumerate tensor components.  Derivatives are Fourier pseudo-spectral and
quadrature is the rectangle rule, which is spectrally accurate for smooth
periodic integrands.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from .errors import BandLimitError, DegenerateMetricError, InvalidArgumentError

__all__ = [
    "GridSpec",
    "ScalarField",
    "OneForm",
    "VectorField",
    "SymTensor2",
    "Tensor2",
    "TwoForm",
    "partial_derivative",
    "spectral_diff",
    "integrate",
    "random_bandlimited_field",
    "random_oneform",
    "random_symtensor",
    "sym_pairs",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on a box ``[0, L_1) x ... x [0, L_n)``."""

    dimension: int
    resolution: tuple
    periods: tuple = None

    def __post_init__(self):
        n = int(self.dimension)
        if n < 2:
            raise InvalidArgumentError(f"dimension must be >= 2, got {n}")
        res = self.resolution
        if np.isscalar(res):
            res = (int(res),) * n
        res = tuple(int(r) for r in res)
        if len(res) != n:
            raise InvalidArgumentError(f"need {n} resolutions, got {len(res)}")
        for r in res:
            if r < 8 or r % 2:
                raise InvalidArgumentError(f"resolution must be even and >= 8, got {r}")
        periods = self.periods
        if periods is None:
            periods = (2 * math.pi,) * n
        elif np.isscalar(periods):
            periods = (float(periods),) * n
        periods = tuple(float(p) for p in periods)
        if len(periods) != n or any(not (p > 0 and math.isfinite(p)) for p in periods):
            raise InvalidArgumentError(f"periods must be {n} positive numbers, got {periods}")
        object.__setattr__(self, "dimension", n)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "periods", periods)

    @property
    def shape(self):
        return self.resolution

    @property
    def size(self):
        return math.prod(self.resolution)

    @property
    def spacing(self):
        return tuple(L / N for L, N in zip(self.periods, self.resolution))

    @property
    def cell_volume(self):
        return math.prod(self.spacing)

    @property
    def volume(self):
        return math.prod(self.periods)

    @property
    def max_mode(self):
        """Largest per-axis integer mode admitted by the N/4 band limit."""
        return min(self.resolution) // 4

    @cached_property
    def coordinates(self):
        """Tuple of ``n`` coordinate arrays of full grid shape."""
        axes = [np.arange(N) * h for N, h in zip(self.resolution, self.spacing)]
        coords = np.meshgrid(*axes, indexing="ij")
        for c in coords:
            c.setflags(write=False)
        return tuple(coords)

    def angular_wavenumbers(self, axis):
        """rfft wavenumbers 2*pi*k/L along ``axis`` with the Nyquist entry zeroed."""
        N, L = self.resolution[axis], self.periods[axis]
        k = np.fft.rfftfreq(N, d=1.0 / N) * (2 * math.pi / L)
        k[-1] = 0.0
        return k

    def check_wavevector(self, wavevector):
        k = tuple(int(v) for v in wavevector)
        if len(k) != self.dimension:
            raise InvalidArgumentError(f"wavevector {k} has wrong length for n={self.dimension}")
        for ka, N in zip(k, self.resolution):
            if abs(ka) > N // 4:
                raise BandLimitError(
                    f"wavevector {k} exceeds the band limit N/4 on a grid of {self.resolution}"
                )
        return k

    def plane_wave_phase(self, wavevector):
        """k . x for integer wavevector ``k`` (in units of 2*pi/L_a)."""
        k = self.check_wavevector(wavevector)
        phase = np.zeros(self.shape)
        for ka, L, x in zip(k, self.periods, self.coordinates):
            if ka:
                phase = phase + (2 * math.pi * ka / L) * x
        return phase

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "resolution": list(self.resolution),
            "periods": list(self.periods),
        }


def sym_pairs(n):
    """Index pairs (a, b), a <= b, in packed storage order."""
    return list(zip(*(idx.tolist() for idx in np.triu_indices(n))))


def _antisym_pairs(n):
    return list(zip(*(idx.tolist() for idx in np.triu_indices(n, k=1))))


class _Field:
    """Immutable grid-sampled array with leading component axes."""

    __slots__ = ("grid", "data")

    def __init__(self, grid, data):
        data = np.array(data, dtype=float)
        expected = self._component_shape(grid.dimension) + grid.shape
        if data.shape != expected:
            raise InvalidArgumentError(
                f"{type(self).__name__} expects data of shape {expected}, got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidArgumentError(f"{type(self).__name__} contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "data", data)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @staticmethod
    def _component_shape(n):
        return ()

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(cls._component_shape(grid.dimension) + grid.shape))

    def _check_compatible(self, other):
        if type(other) is not type(self):
            raise InvalidArgumentError(
                f"cannot combine {type(self).__name__} with {type(other).__name__}"
            )
        if other.grid != self.grid:
            raise InvalidArgumentError("fields live on different grids")

    def __add__(self, other):
        self._check_compatible(other)
        return type(self)(self.grid, self.data + other.data)

    def __sub__(self, other):
        self._check_compatible(other)
        return type(self)(self.grid, self.data - other.data)

    def __neg__(self):
        return type(self)(self.grid, -self.data)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise InvalidArgumentError("fields live on different grids")
            return type(self)(self.grid, self.data * other.data)
        if np.isscalar(other):
            return type(self)(self.grid, self.data * float(other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return type(self)(self.grid, self.data / float(other))
        return NotImplemented

    def sup_norm(self):
        return float(np.max(np.abs(self.data)))

    def __repr__(self):
        return f"{type(self).__name__}(grid={self.grid.resolution}, sup={self.sup_norm():.3e})"


class ScalarField(_Field):
    __slots__ = ()

    @property
    def values(self):
        return self.data

    def __mul__(self, other):
        if isinstance(other, _Field) and not isinstance(other, ScalarField):
            return other * self
        return super().__mul__(other)


class OneForm(_Field):
    """Covariant components theta_a, stacked along the first axis."""

    __slots__ = ()

    @staticmethod
    def _component_shape(n):
        return (n,)

    @property
    def components(self):
        return tuple(ScalarField(self.grid, c) for c in self.data)

    @classmethod
    def from_components(cls, components):
        grid = components[0].grid
        return cls(grid, np.stack([c.data for c in components]))


class VectorField(OneForm):
    """Contravariant components xi^a; same storage as :class:`OneForm`."""

    __slots__ = ()


class Tensor2(_Field):
    """General covariant 2-tensor T_ab with full ``(n, n)`` storage."""

    __slots__ = ()

    @staticmethod
    def _component_shape(n):
        return (n, n)

    def full(self):
        return self.data

    def symmetric_part(self):
        return SymTensor2.from_full(self.grid, 0.5 * (self.data + np.swapaxes(self.data, 0, 1)))

    def antisymmetric_part(self):
        return TwoForm.from_full(self.grid, 0.5 * (self.data - np.swapaxes(self.data, 0, 1)))


class SymTensor2(_Field):
    """Symmetric covariant 2-tensor, packed as the upper triangle a <= b."""

    __slots__ = ()

    @staticmethod
    def _component_shape(n):
        return (n * (n + 1) // 2,)

    @classmethod
    def from_full(cls, grid, full):
        """Pack a full ``(n, n, ...)`` array; only entries with a <= b are read."""
        n = grid.dimension
        full = np.asarray(full)
        return cls(grid, np.stack([full[a, b] for a, b in sym_pairs(n)]))

    @classmethod
    def from_scalar(cls, f, metric_full):
        """f * g for a scalar field ``f`` and a full metric array."""
        return cls.from_full(f.grid, metric_full * f.data)

    def full(self):
        n = self.grid.dimension
        out = np.empty((n, n) + self.grid.shape)
        for i, (a, b) in enumerate(sym_pairs(n)):
            out[a, b] = self.data[i]
            out[b, a] = self.data[i]
        return out

    def component(self, a, b):
        a, b = min(a, b), max(a, b)
        return ScalarField(self.grid, self.data[sym_pairs(self.grid.dimension).index((a, b))])


class TwoForm(_Field):
    """Antisymmetric covariant 2-tensor, packed as the strict upper triangle a < b."""

    __slots__ = ()

    @staticmethod
    def _component_shape(n):
        return (n * (n - 1) // 2,)

    @classmethod
    def from_full(cls, grid, full):
        n = grid.dimension
        full = np.asarray(full)
        return cls(grid, np.stack([full[a, b] for a, b in _antisym_pairs(n)]))

    def full(self):
        n = self.grid.dimension
        out = np.zeros((n, n) + self.grid.shape)
        for i, (a, b) in enumerate(_antisym_pairs(n)):
            out[a, b] = self.data[i]
            out[b, a] = -self.data[i]
        return out


def spectral_diff(array, axis, grid):
    """Pseudo-spectral derivative of ``array`` along spatial ``axis``.

    ``array`` may carry leading component axes; the trailing ``n`` axes must
    match the grid shape.
    """
    n = grid.dimension
    if not 0 <= axis < n:
        raise InvalidArgumentError(f"axis {axis} out of range for dimension {n}")
    ax = array.ndim - n + axis
    N = grid.resolution[axis]
    k = grid.angular_wavenumbers(axis)
    shape = [1] * array.ndim
    shape[ax] = k.size
    spec = np.fft.rfft(array, axis=ax)
    spec *= 1j * k.reshape(shape)
    return np.fft.irfft(spec, n=N, axis=ax)


def partial_derivative(f, axis):
    """Spectral derivative of a scalar field along ``axis``."""
    return ScalarField(f.grid, spectral_diff(f.data, axis, f.grid))


def integrate(f, density=None):
    """Rectangle-rule integral of ``f * density`` over the torus."""
    grid = f.grid
    if density is None:
        weight = 1.0
    else:
        weight = density.data
        if np.any(weight <= 0):
            idx = np.unravel_index(int(np.argmin(weight)), grid.shape)
            raise DegenerateMetricError(
                f"quadrature density is not positive at grid point {idx}", point=idx
            )
    return float(grid.cell_volume * np.sum(f.data * weight))


def _bandlimited_array(grid, rng, max_mode):
    """Real zero-mean array with Fourier support |k_a| <= max_mode."""
    mask = np.ones(grid.shape, dtype=bool)
    for axis, N in enumerate(grid.resolution):
        k = np.abs(np.fft.fftfreq(N, d=1.0 / N))
        shape = [1] * grid.dimension
        shape[axis] = N
        mask = mask & (k <= max_mode).reshape(shape)
    coeffs = np.zeros(grid.shape, dtype=complex)
    count = int(mask.sum())
    coeffs[mask] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    coeffs.flat[0] = 0.0
    values = np.fft.ifftn(coeffs).real
    return values - values.mean()


def _check_band(grid, max_mode, amplitude):
    if int(max_mode) < 1:
        raise InvalidArgumentError(f"max_mode must be >= 1, got {max_mode}")
    if max_mode > grid.max_mode:
        raise BandLimitError(
            f"max_mode {max_mode} exceeds the band limit N/4 = {grid.max_mode} "
            f"for resolution {grid.resolution}"
        )
    if not amplitude > 0:
        raise InvalidArgumentError(f"amplitude must be positive, got {amplitude}")


def random_bandlimited_field(grid, seed, max_mode, amplitude):
    """Deterministic random zero-mean field with sup-norm ``amplitude``.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    _check_band(grid, max_mode, amplitude)
    rng = np.random.default_rng(seed)
    values = _bandlimited_array(grid, rng, int(max_mode))
    values *= amplitude / np.max(np.abs(values))
    return ScalarField(grid, values)


def random_oneform(grid, seed, max_mode, amplitude):
    """One-form whose components are independent band-limited fields."""
    comps = [
        random_bandlimited_field(grid, [seed, a], max_mode, amplitude).data
        for a in range(grid.dimension)
    ]
    return OneForm(grid, np.stack(comps))


def random_symtensor(grid, seed, max_mode, amplitude):
    """Symmetric tensor with independent band-limited packed components."""
    m = grid.dimension * (grid.dimension + 1) // 2
    comps = [random_bandlimited_field(grid, [seed, i], max_mode, amplitude).data for i in range(m)]
    return SymTensor2(grid, np.stack(comps))
