import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cauchy_ahlfors.errors import BandLimitError, DegenerateMetricError, InvalidArgumentError
from cauchy_ahlfors.grid import (
    GridSpec,
    OneForm,
    ScalarField,
    SymTensor2,
    integrate,
    partial_derivative,
    random_bandlimited_field,
    random_symtensor,
)


def field(grid, values):
    return ScalarField(grid, values)


class TestGridSpec:
    def test_defaults(self):
        grid = GridSpec(2, 16)
        assert grid.resolution == (16, 16)
        assert grid.periods == (2 * math.pi, 2 * math.pi)
        assert grid.size == 256
        assert grid.max_mode == 4

    @pytest.mark.parametrize(
        "args",
        [(1, (16,)), (2, (16, 15)), (2, (6, 16)), (2, (16,)), (2, (16, 16), (1.0, -1.0))],
    )
    def test_rejects_bad_specs(self, args):
        with pytest.raises(InvalidArgumentError):
            GridSpec(*args)

    def test_coordinates_span_half_open_box(self):
        grid = GridSpec(2, (8, 12), (1.0, 3.0))
        x, y = grid.coordinates
        assert x.shape == (8, 12)
        assert x.min() == 0 and np.isclose(x.max(), 1.0 - 1.0 / 8)
        assert np.isclose(y.max(), 3.0 - 3.0 / 12)


class TestPartialDerivative:
    def test_sine(self, grid2):
        x, _ = grid2.coordinates
        d = partial_derivative(field(grid2, np.sin(x)), 0)
        assert np.max(np.abs(d.values - np.cos(x))) < 1e-12

    def test_constant(self, grid2):
        d = partial_derivative(field(grid2, np.ones(grid2.shape)), 1)
        assert np.max(np.abs(d.values)) == 0.0

    def test_no_dependence(self, grid2):
        x, _ = grid2.coordinates
        d = partial_derivative(field(grid2, np.sin(x)), 1)
        assert np.max(np.abs(d.values)) < 1e-14

    def test_bad_axis(self, grid2):
        with pytest.raises(InvalidArgumentError):
            partial_derivative(field(grid2, np.ones(grid2.shape)), 2)

    def test_nyquist_mode_is_annihilated(self):
        grid = GridSpec(2, (8, 8))
        x, _ = grid.coordinates
        d = partial_derivative(field(grid, np.cos(4 * x)), 0)
        assert np.max(np.abs(d.values)) < 1e-13

    @settings(max_examples=30, deadline=None)
    @given(
        k1=st.integers(-7, 7),
        k2=st.integers(-5, 5),
        phase=st.floats(0, 2 * math.pi),
        L1=st.floats(0.5, 10.0),
    )
    def test_single_mode_property(self, k1, k2, phase, L1):
        grid = GridSpec(2, (16, 12), (L1, 2 * math.pi))
        x, y = grid.coordinates
        w1, w2 = 2 * math.pi * k1 / L1, k2
        f = np.cos(w1 * x + w2 * y + phase)
        d0 = partial_derivative(field(grid, f), 0).values
        d1 = partial_derivative(field(grid, f), 1).values
        exact0 = -w1 * np.sin(w1 * x + w2 * y + phase)
        exact1 = -w2 * np.sin(w1 * x + w2 * y + phase)
        scale = max(1.0, abs(w1))
        assert np.max(np.abs(d0 - exact0)) < 1e-11 * scale
        assert np.max(np.abs(d1 - exact1)) < 1e-11 * max(1.0, abs(w2))

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_mixed_partials_commute(self, seed, grid3):
        f = random_bandlimited_field(grid3, seed, 4, 1.0)
        a = partial_derivative(partial_derivative(f, 0), 2)
        b = partial_derivative(partial_derivative(f, 2), 0)
        assert np.max(np.abs(a.values - b.values)) < 1e-10

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10**6), axis=st.integers(0, 2))
    def test_derivative_integrates_to_zero(self, seed, axis, grid3):
        f = random_bandlimited_field(grid3, seed, 4, 1.0)
        assert abs(integrate(partial_derivative(f, axis))) < 1e-10


class TestIntegrate:
    def test_volume(self, grid2):
        one = field(grid2, np.ones(grid2.shape))
        assert integrate(one, one) == pytest.approx((2 * math.pi) ** 2, rel=1e-14)

    def test_pure_mode(self, grid2):
        x, _ = grid2.coordinates
        one = field(grid2, np.ones(grid2.shape))
        assert abs(integrate(field(grid2, np.sin(x)), one)) < 1e-12

    def test_sine_squared(self, grid2):
        x, _ = grid2.coordinates
        val = integrate(field(grid2, np.sin(x) ** 2))
        assert val == pytest.approx(0.5 * (2 * math.pi) ** 2, rel=1e-13)

    def test_nonpositive_density(self, grid2):
        density = np.ones(grid2.shape)
        density[3, 5] = 0.0
        with pytest.raises(DegenerateMetricError) as exc:
            integrate(field(grid2, np.ones(grid2.shape)), field(grid2, density))
        assert exc.value.point == (3, 5)


class TestRandomField:
    def test_deterministic(self, grid2):
        a = random_bandlimited_field(grid2, 11, 4, 1.0)
        b = random_bandlimited_field(grid2, 11, 4, 1.0)
        assert np.array_equal(a.values, b.values)
        c = random_bandlimited_field(grid2, 12, 4, 1.0)
        assert not np.array_equal(a.values, c.values)

    def test_amplitude_and_mean(self, grid2):
        f = random_bandlimited_field(grid2, 3, 5, 0.1)
        assert abs(np.max(np.abs(f.values)) - 0.1) < 1e-12
        assert abs(np.mean(f.values)) < 1e-12

    def test_band_support(self):
        grid = GridSpec(2, (16, 24))
        f = random_bandlimited_field(grid, 5, 3, 1.0)
        spec = np.abs(np.fft.fftn(f.values))
        k1 = np.abs(np.fft.fftfreq(16, 1 / 16))[:, None]
        k2 = np.abs(np.fft.fftfreq(24, 1 / 24))[None, :]
        outside = (k1 > 3) | (k2 > 3)
        assert spec[outside].max() < 1e-12 * spec.max()

    def test_band_limit_error(self, grid2):
        with pytest.raises(BandLimitError):
            random_bandlimited_field(grid2, 0, 9, 1.0)


class TestFieldTypes:
    def test_immutable(self, grid2):
        f = field(grid2, np.ones(grid2.shape))
        with pytest.raises(ValueError):
            f.values[0, 0] = 2.0
        with pytest.raises(AttributeError):
            f.data = None

    def test_shape_checked(self, grid2):
        with pytest.raises(InvalidArgumentError):
            OneForm(grid2, np.zeros((3,) + grid2.shape))

    def test_non_finite_rejected(self, grid2):
        bad = np.ones(grid2.shape)
        bad[0, 0] = np.nan
        with pytest.raises(InvalidArgumentError):
            field(grid2, bad)

    def test_symmetric_packing_roundtrip(self, grid3):
        phi = random_symtensor(grid3, 1, 2, 1.0)
        full = phi.full()
        assert np.array_equal(full, np.swapaxes(full, 0, 1))
        again = SymTensor2.from_full(grid3, full)
        assert np.array_equal(again.data, phi.data)
        assert phi.data.shape[0] == 6

    def test_arithmetic(self, grid2):
        x, _ = grid2.coordinates
        f = field(grid2, np.sin(x))
        theta = OneForm(grid2, np.stack([np.ones(grid2.shape), np.zeros(grid2.shape)]))
        prod = f * theta
        assert np.allclose(prod.data[0], np.sin(x))
        assert np.allclose((theta * f).data, prod.data)
        assert np.allclose((2 * theta - theta).data, theta.data)
        with pytest.raises(InvalidArgumentError):
            theta + f
