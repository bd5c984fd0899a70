import math
import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jnp_zeros, jvp

from qcmembrane.beltrami import ComputationalGrid, PlanarMap, invert_map
from qcmembrane.bounds import (
    ExtensionNormModel,
    bessel_first_derivative_zero,
    bessel_j0,
    bessel_j1,
    bessel_j1_prime,
    bound_corollary_D,
    bound_mu_norm,
    bound_theorem_A,
    bound_theorem_B,
    bound_theorem_C,
    disc_neumann_eigenvalue,
    extension_energy_ratio,
    reflect_extend,
)
from qcmembrane.errors import DomainError
from qcmembrane.fields import matrix_from_dilatation
from qcmembrane.geometry import distortion_radius_bound, unit_circle_targets

J11 = float(jnp_zeros(1, 1)[0])


def oracle_B(K):
    j = mpmath.besseljzero(1, 1, derivative=1)
    return float(64 * j**2 / (K * mpmath.e ** (2 * mpmath.pi * K)))


class TestBessel:
    def test_root_against_reference_value(self):
        assert abs(bessel_first_derivative_zero() - 1.84118) < 1e-5

    def test_root_against_scipy(self):
        assert bessel_first_derivative_zero() == pytest.approx(J11, abs=1e-13)

    def test_derivative_vanishes(self):
        assert abs(bessel_j1_prime(bessel_first_derivative_zero())) < 1e-10

    def test_bracket(self):
        assert bessel_j1_prime(1.5) > 0 > bessel_j1_prime(2.0)

    @pytest.mark.parametrize("x", [0.0, 0.1, 1.0, 3.7, 7.9])
    def test_series_against_scipy(self, x):
        assert bessel_j0(x) == pytest.approx(float(mpmath.besselj(0, x)), abs=1e-14)
        assert bessel_j1(x) == pytest.approx(float(mpmath.besselj(1, x)), abs=1e-14)
        if x > 0:
            assert bessel_j1_prime(x) == pytest.approx(jvp(1, x), abs=1e-13)

    def test_fast(self):
        bessel_first_derivative_zero.cache_clear()
        t0 = time.perf_counter()
        bessel_first_derivative_zero()
        assert time.perf_counter() - t0 < 0.1


class TestBoundA:
    def test_unit(self):
        assert bound_theorem_A(1, 1) == pytest.approx(0.84750, abs=2e-5)
        assert bound_theorem_A(1, 1) == pytest.approx(J11**2 / 4, rel=1e-13)

    def test_halves_with_K(self):
        assert bound_theorem_A(2, 1) == pytest.approx(0.42375, abs=1e-5)
        assert bound_theorem_A(2, 1) == pytest.approx(bound_theorem_A(1, 1) / 2, rel=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(K=st.floats(1, 20), R=st.floats(0.01, 100))
    def test_inverse_square(self, K, R):
        assert bound_theorem_A(K, 2 * R) == pytest.approx(bound_theorem_A(K, R) / 4, rel=1e-13)

    @pytest.mark.parametrize("K, R", [(0.5, 1), (1, 0), (1, -1)])
    def test_domain(self, K, R):
        with pytest.raises(DomainError):
            bound_theorem_A(K, R)


class TestBoundB:
    def test_K1(self):
        assert bound_theorem_B(1) == pytest.approx(0.40516, abs=1e-5)

    @pytest.mark.parametrize("K", [1.0, 1.5, 2.0, 3.0])
    def test_against_arbitrary_precision(self, K):
        assert bound_theorem_B(K) == pytest.approx(oracle_B(K), rel=1e-13)

    def test_K2_five_digits(self):
        assert float(f"{bound_theorem_B(2):.5g}") == 3.7830e-4

    @settings(max_examples=100, deadline=None)
    @given(a=st.floats(1, 10), b=st.floats(1, 10))
    def test_decreasing(self, a, b):
        lo, hi = sorted((a, b))
        assert bound_theorem_B(hi) <= bound_theorem_B(lo)

    @pytest.mark.parametrize("K", [1.0, 1.5, 2.0, 3.0])
    def test_identity_with_A(self, K):
        got = bound_theorem_A(K, distortion_radius_bound(K))
        assert abs(got - bound_theorem_B(K)) <= 1e-12 * bound_theorem_B(K)


class TestMuNorm:
    def test_zero(self):
        assert bound_mu_norm(1, 0) == pytest.approx(bound_theorem_B(1), rel=1e-15)

    def test_one_third(self):
        assert bound_mu_norm(2, 1 / 3) == pytest.approx(bound_theorem_B(2), rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(m=st.floats(0, 0.9))
    def test_at_least_B_when_K_is_K_A(self, m):
        # K >= K_A always; with K = K_A the mu-norm bound coincides with B
        K = (1 + m) / (1 - m)
        assert bound_mu_norm(K, m) >= bound_theorem_B(K) * (1 - 1e-12)
        assert bound_mu_norm(K + 1, m) >= bound_theorem_B(K + 1)

    def test_domain(self):
        with pytest.raises(DomainError):
            bound_mu_norm(2, 1.0)


class TestBoundCD:
    def test_C(self):
        assert bound_theorem_C(3.39, 2) == pytest.approx(0.8475, abs=1e-12)
        assert bound_theorem_C(3.39, 1) == 3.39

    @settings(max_examples=100, deadline=None)
    @given(K=st.floats(1, 20), R=st.floats(0.01, 100))
    def test_D_disc_equals_A(self, K, R):
        got = bound_corollary_D(disc_neumann_eigenvalue(R), K, 2.0)
        assert abs(got - bound_theorem_A(K, R)) <= 1e-12 * bound_theorem_A(K, R)

    def test_C_with_K_factor_equals_A(self):
        K, R = 2.5, 1.3
        assert bound_theorem_C(disc_neumann_eigenvalue(R), 2.0) / K == pytest.approx(bound_theorem_A(K, R), rel=1e-14)

    def test_D_passthrough(self):
        assert bound_corollary_D(3.0, 1.0, 1.0) == 3.0

    def test_D_square(self):
        assert bound_corollary_D(math.pi**2, 3.0, 2.0) == pytest.approx(math.pi**2 / 12, rel=1e-15)

    def test_domains(self):
        with pytest.raises(DomainError):
            bound_theorem_C(0.0)
        with pytest.raises(DomainError):
            bound_theorem_C(1.0, 0.5)
        with pytest.raises(DomainError):
            ExtensionNormModel(extension_norm=0.9)
        assert ExtensionNormModel().extension_norm == 2.0


class TestReflection:
    def test_identity_inversion(self):
        pm = PlanarMap.identity(ComputationalGrid(256, 4.0))
        v = reflect_extend(np.real, pm, np.array([2.0 + 0j, 0.5 + 0.1j]))
        assert v[0] == pytest.approx(0.5, abs=1e-12)
        assert v[1] == 0.5

    def test_identity_formula(self):
        pm = PlanarMap.identity(ComputationalGrid(256, 4.0))
        z = np.array([1.5 + 1j, -2 + 0.3j, 0.2 - 3j])
        np.testing.assert_allclose(reflect_extend(np.real, pm, z), np.real(z) / np.abs(z) ** 2, atol=1e-12)

    def test_boundary_continuity(self, solved):
        _, pm = solved("gaussian_bump")
        w = unit_circle_targets(256)
        inner = invert_map(pm, (1 - 1e-4) * w)
        outer = invert_map(pm, (1 + 1e-4) * w)

        def u(z):
            return np.real(z) + np.imag(z) ** 2

        jump = np.abs(reflect_extend(u, pm, outer) - u(inner))
        assert jump.max() < 1e-2

    @pytest.mark.parametrize("name", ["zero", "constant"])
    def test_energy_ratio_gate(self, solved, name):
        mu, pm = solved(name, **({"re": 1 / 3} if name == "constant" else {}))
        ratio = extension_energy_ratio(
            [np.real, np.imag, lambda z: np.real(z * z)], pm, matrix_from_dilatation(mu), n_samples=129
        )
        assert 1.0 < ratio <= 2.0**2 + 0.3
