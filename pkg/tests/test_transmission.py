import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dinsat.errors import ShapeError
from dinsat.ode import SolverConfig
from dinsat.transmission import (
    LinearProfile,
    NonlinearProfile,
    invert_transmit,
    rhs_linear,
    rhs_nonlinear,
    softplus_inverse,
    transmit,
    transmittance_spectrum,
)
from dinsat.types import Spectrum

CFG = SolverConfig("rk4", 16)


def linear(alpha):
    return LinearProfile.from_alpha(np.asarray(alpha, float))


class TestLinearRhs:
    def test_zero_absorption_limit(self):
        profile = LinearProfile(np.full(3, -40.0))
        out = rhs_linear(np.array([1.0, 2.0, 3.0]), profile)
        assert np.max(np.abs(out)) < 1e-15

    def test_definition(self):
        out = rhs_linear(np.array([1.0, 1.0]), linear([1.0, 2.0]))
        np.testing.assert_allclose(out, [-1.0, -2.0], rtol=1e-8)

    def test_origin_fixed_point(self):
        out = rhs_linear(np.zeros(4), linear([0.3, 1.0, 2.0, 0.1]))
        np.testing.assert_allclose(out, np.zeros(4))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            rhs_linear(np.zeros(5), linear([1.0, 2.0]))

    def test_softplus_inverse_round_trip(self):
        alpha = np.array([1e-3, 0.5, 2.0, 8.0])
        np.testing.assert_allclose(linear(alpha).alpha, alpha, rtol=1e-9)


class TestNonlinearRhs:
    def test_zero_input_fixed_point(self):
        rng = np.random.default_rng(0)
        profile = NonlinearProfile.initialize(6, rng)
        np.testing.assert_allclose(rhs_nonlinear(np.zeros(6), profile), np.zeros(6))

    def test_sign_construction(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            profile = NonlinearProfile.initialize(8, rng)
            L = rng.uniform(0, 2, 8)
            assert np.all(rhs_nonlinear(L, profile) <= 0)

    def test_zero_params_half_decay(self):
        profile = NonlinearProfile(np.zeros(NonlinearProfile.initialize(4, np.random.default_rng(0)).params.size), 4)
        L = np.array([0.2, 0.4, 0.8, 1.6])
        np.testing.assert_allclose(rhs_nonlinear(L, profile), -0.5 * L, rtol=1e-12)


class TestTransmit:
    def test_linear_half(self):
        out = transmit(linear(np.full(5, np.log(2.0))), np.ones(5), CFG)
        np.testing.assert_allclose(out, 0.5, atol=1e-8)

    def test_zero_fixed_point(self):
        rng = np.random.default_rng(2)
        for model in (linear(rng.uniform(0, 3, 4)), NonlinearProfile.initialize(4, rng)):
            np.testing.assert_allclose(transmit(model, np.zeros(4), CFG), np.zeros(4))

    def test_zero_absorption_identity(self):
        profile = LinearProfile(np.full(3, -40.0))
        L = np.array([0.1, 0.5, 0.9])
        np.testing.assert_allclose(transmit(profile, L, CFG), L, atol=1e-12)

    def test_spectrum_wrapper_preserves_unit(self):
        out = transmit(linear([1.0, 1.0]), Spectrum(np.array([1.0, 2.0]), "radiance"), CFG)
        assert isinstance(out, Spectrum)
        assert out.unit == "radiance"


class TestInvertTransmit:
    def test_linear_doubling(self):
        out = invert_transmit(linear(np.full(4, np.log(2.0))), 0.5 * np.ones(4), CFG)
        np.testing.assert_allclose(out, 1.0, atol=1e-6)

    def test_linear_round_trip_tight(self):
        rng = np.random.default_rng(3)
        model = linear(rng.uniform(0, 5, 126))
        L = rng.uniform(0, 1, 126)
        back = invert_transmit(model, transmit(model, L, CFG), CFG)
        assert np.max(np.abs(back - L)) < 1e-9

    def test_nonlinear_round_trip(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            model = NonlinearProfile.initialize(126, rng)
            L = rng.uniform(0, 1, 126)
            back = invert_transmit(model, transmit(model, L, CFG), CFG)
            assert np.max(np.abs(back - L)) < 1e-4

    def test_output_dominates_input(self):
        rng = np.random.default_rng(5)
        model = linear(rng.uniform(0, 2, 8))
        L = rng.uniform(0, 1, 8)
        assert np.all(invert_transmit(model, L, CFG) >= L)


class TestTransmittanceSpectrum:
    def test_zero_absorption(self):
        profile = LinearProfile(np.full(3, -40.0))
        np.testing.assert_allclose(transmittance_spectrum(profile, CFG).values, 1.0, atol=1e-12)

    def test_unit_rate(self):
        out = transmittance_spectrum(linear(np.ones(6)), CFG)
        assert out.unit == "transmittance"
        np.testing.assert_allclose(out.values, np.exp(-1.0), atol=1e-7)

    def test_nonlinear_zero_init(self):
        n_params = NonlinearProfile.initialize(5, np.random.default_rng(0)).params.size
        profile = NonlinearProfile(np.zeros(n_params), 5)
        out = transmittance_spectrum(profile, CFG)
        np.testing.assert_allclose(out.values, np.exp(-0.5), atol=1e-2)
        assert np.all((out.values > 0) & (out.values <= 1))


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**31))
    def test_dissipativity(self, seed):
        rng = np.random.default_rng(seed)
        L = rng.uniform(0, 2, 12)
        lin = linear(rng.uniform(0.01, 5, 12))
        non = NonlinearProfile.initialize(12, rng)
        for model in (lin, non):
            out = transmit(model, L, CFG)
            assert np.all(out >= -1e-12)
            assert np.all(out <= L + 1e-12)

    def test_monotonicity_in_alpha(self):
        rng = np.random.default_rng(6)
        alpha = rng.uniform(0.1, 3, 10)
        bigger = alpha + rng.uniform(0, 2, 10)
        L = rng.uniform(0, 1, 10)
        assert np.all(transmit(linear(bigger), L, CFG) <= transmit(linear(alpha), L, CFG) + 1e-12)

    def test_linear_homogeneity(self):
        rng = np.random.default_rng(7)
        model = linear(rng.uniform(0, 3, 9))
        L = rng.uniform(0, 1, 9)
        for c in (0.0, 0.5, 3.0):
            np.testing.assert_allclose(
                transmit(model, c * L, CFG), c * transmit(model, L, CFG), rtol=1e-12, atol=1e-15
            )
