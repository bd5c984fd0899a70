import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcmembrane.beltrami import (
    ComputationalGrid,
    PlanarMap,
    PlanarPoint,
    beurling_symbol,
    evaluate_map,
    inverse_dzbar_symbol,
    invert_map,
    jacobian_determinant,
    map_residual,
    solve_beltrami,
)
from qcmembrane.errors import (
    DomainError,
    InvalidDilatationError,
    NonConvergenceError,
    OutOfWindowError,
)
from qcmembrane.fields import DilatationField, make_preset
from qcmembrane.geometry import unit_circle_targets

SMALL = ComputationalGrid(256, 4.0)


def constant_field(c, support=10.0):
    return DilatationField(func=lambda x, y: np.full(np.shape(x), c, dtype=complex), support_radius=support)


def affine_deviation(pmap, c, radius):
    px, py = pmap.fd_derivatives()
    Z = pmap.grid.mesh()
    m = np.abs(Z) <= radius
    pz, pzb = 0.5 * (px - 1j * py)[m], 0.5 * (px + 1j * py)[m]
    return np.sqrt(np.sum(np.abs(pz - 1) ** 2 + np.abs(pzb - c) ** 2) / (m.sum() * (1 + abs(c) ** 2)))


class TestGrid:
    def test_spacing_and_coords(self):
        g = ComputationalGrid(64, 2.0)
        assert g.spacing == 2 * 2.0 / 64
        assert g.coords[0] == -2.0 and g.coords[32] == 0.0

    @pytest.mark.parametrize("n", [32, 100, 1000])
    def test_rejects_bad_n(self, n):
        with pytest.raises(DomainError):
            ComputationalGrid(n, 4.0)

    def test_support_must_fit(self):
        with pytest.raises(DomainError):
            ComputationalGrid(256, 3.0).check_support(2.0)


class TestMultipliers:
    def test_beurling_unit_modulus(self):
        S = beurling_symbol(SMALL)
        assert S[0, 0] == 0
        mod = np.abs(S)
        np.testing.assert_allclose(mod[mod > 0], 1.0, atol=1e-15)

    def test_beurling_maps_dzbar_to_dz_for_gaussian(self):
        # oracle: analytic derivatives of f = exp(-|z|^2): f_zbar = -z f, f_z = -zbar f
        g = ComputationalGrid(256, 6.0)
        Z = g.mesh()
        f = np.exp(-np.abs(Z) ** 2)
        Sf = np.fft.ifft2(beurling_symbol(g) * np.fft.fft2(-Z * f))
        np.testing.assert_allclose(Sf, -np.conj(Z) * f, atol=1e-10)

    def test_inverse_dzbar_recovers_gaussian(self):
        g = ComputationalGrid(256, 6.0)
        Z = g.mesh()
        f = np.exp(-np.abs(Z) ** 2)
        rec = np.fft.ifft2(inverse_dzbar_symbol(g) * np.fft.fft2(-Z * f))
        np.testing.assert_allclose(rec - rec.mean(), f - f.mean(), atol=1e-10)


class TestSolve:
    def test_zero_gives_identity(self):
        m = solve_beltrami(make_preset("zero"), SMALL)
        assert np.all(m.displacement == 0)
        assert m.residual_l2 == 0 and m.iterations == 0
        z = np.array([0.3 + 0.4j, -1.2 + 2j])
        np.testing.assert_array_equal(m(z), z)

    def test_constant_matches_affine(self, solved):
        mu, m = solved("constant", re=0.3)
        assert affine_deviation(m, 0.3, 1.0) < 1e-3
        assert map_residual(m, mu) < 1e-3

    def test_constant_complex_plateau_maps_affinely(self, solved):
        _, m = solved("constant", re=1 / 3)
        z = np.array([0.0, 0.5, 0.7j, -0.4 - 0.6j])
        w = m(z)
        # differences cancel the translation constant
        np.testing.assert_allclose(w - w[0], (z - z[0]) + (np.conj(z) - np.conj(z[0])) / 3, atol=1e-3)

    def test_radial_stretch_residual(self, solved):
        mu, m = solved("radial_stretch", k=2.0)
        assert map_residual(m, mu) < 1e-3

    def test_gaussian_residual(self, solved):
        mu, m = solved("gaussian_bump", amplitude=0.4, sigma=0.8)
        assert map_residual(m, mu) < 1e-4
        assert m.residual_l2 < 10 * m.tol

    def test_contraction_ratio(self, solved):
        mu, m = solved("gaussian_bump", amplitude=0.4, sigma=0.8)
        h = np.array(m.update_history)
        assert np.all(h[3:] / h[2:-1] <= mu.sup_norm + 0.05)

    def test_orientation_preserving(self, solved):
        _, m = solved("gaussian_bump", amplitude=0.4, sigma=0.8)
        assert jacobian_determinant(m).min() > 0

    def test_residual_drops_under_refinement(self):
        mu = make_preset("gaussian_bump", amplitude=0.4, sigma=0.8)
        coarse = map_residual(solve_beltrami(mu, ComputationalGrid(256, 4.0)), mu)
        fine = map_residual(solve_beltrami(mu, ComputationalGrid(512, 4.0)), mu)
        assert fine < coarse

    def test_nonconvergence(self):
        with pytest.raises(NonConvergenceError) as info:
            solve_beltrami(make_preset("gaussian_bump"), SMALL, max_iter=2)
        assert info.value.last_update > 0

    def test_rejects_sup_one(self):
        with pytest.raises(InvalidDilatationError):
            solve_beltrami(constant_field(1.0, support=1.0), SMALL)

    def test_rejects_support_too_large(self):
        with pytest.raises(DomainError):
            solve_beltrami(make_preset("zero", support=3.0), SMALL)

    def test_rejects_bad_pad(self):
        with pytest.raises(DomainError):
            solve_beltrami(make_preset("gaussian_bump"), SMALL, pad=3)

    def test_padding_reduces_image_error(self):
        mu = make_preset("constant", re=0.3)
        plain = solve_beltrami(mu, SMALL, pad=1)
        padded = solve_beltrami(mu, SMALL, pad=2)
        assert affine_deviation(padded, 0.3, 1.0) < affine_deviation(plain, 0.3, 1.0)


class TestEvaluate:
    def test_identity(self):
        m = PlanarMap.identity(SMALL)
        assert evaluate_map(m, PlanarPoint(0.3, 0.4)) == PlanarPoint(0.3, 0.4)

    def test_node_returns_sample(self):
        rng = np.random.default_rng(0)
        d = rng.normal(size=(256, 256)) + 1j * rng.normal(size=(256, 256))
        m = PlanarMap.from_displacement(SMALL, d)
        i, j = 100, 37
        z = SMALL.coords[j] + 1j * SMALL.coords[i]
        assert m(np.array([z]))[0] == pytest.approx(z + d[i, j], abs=1e-14)

    def test_cell_midpoint_is_corner_mean(self):
        Z = SMALL.mesh()
        d = (0.2 - 0.1j) * Z.real + (0.05 + 0.3j) * Z.imag
        m = PlanarMap.from_displacement(SMALL, d)
        i, j, h = 120, 130, SMALL.spacing
        z = Z[i, j] + 0.5 * h * (1 + 1j)
        mean = (d[i, j] + d[i, j + 1] + d[i + 1, j] + d[i + 1, j + 1]) / 4
        assert m(np.array([z]))[0] == pytest.approx(z + mean, abs=1e-14)

    def test_outside_window(self):
        with pytest.raises(OutOfWindowError):
            PlanarMap.identity(SMALL)(np.array([4.5 + 0j]))

    def test_padded_map_uses_user_window(self, solved):
        _, m = solved("constant", re=0.3)
        with pytest.raises(OutOfWindowError):
            m(np.array([4.5 + 0j]))


class TestInvert:
    def test_identity(self):
        m = PlanarMap.identity(SMALL)
        (p,) = invert_map(m, [PlanarPoint(0.3, 0.4)])
        assert p.x == pytest.approx(0.3, abs=1e-12) and p.y == pytest.approx(0.4, abs=1e-12)

    def test_constant_round_trip(self, solved):
        _, m = solved("constant", re=0.3)
        w = evaluate_map(m, PlanarPoint(0.5, 0.0))
        (p,) = invert_map(m, [w], tol=1e-10)
        assert abs(p.z - 0.5) < 1e-8

    @pytest.mark.parametrize("name", ["zero", "constant", "gaussian_bump", "radial_stretch"])
    def test_unit_circle_targets(self, solved, name):
        _, m = solved(name, **({"re": 0.3} if name == "constant" else {}))
        w = unit_circle_targets(256)
        z = invert_map(m, w, tol=1e-10)
        assert np.max(np.abs(m(z) - w)) < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(r=st.floats(0, 0.95), t=st.floats(0, 6.283))
    def test_random_targets(self, solved, r, t):
        _, m = solved("gaussian_bump", amplitude=0.4, sigma=0.8)
        w = np.array([r * np.exp(1j * t)])
        assert abs(m(invert_map(m, w))[0] - w[0]) < 1e-10


class TestResidual:
    def test_identity_zero_mu(self):
        assert map_residual(PlanarMap.identity(SMALL), make_preset("zero")) == 0

    def test_identity_constant_mu(self):
        assert map_residual(PlanarMap.identity(SMALL), constant_field(0.3)) == pytest.approx(0.3, abs=1e-14)
