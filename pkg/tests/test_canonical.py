"""Tests for the closed-form mode structure and coercivity operators.

Oracle notes
------------
* The first-resonance values at sigma = (1, -1/2) reduce to exact
  hyperbolic identities: with a = acosh(3/2)/2 one has sinh a = 1/2,
  cosh a = sqrt(5)/2, sinh 3a = 2, cosh 3a = sqrt(5), so the matching
  determinant vanishes identically and the kernel amplitude ratio is
  exactly -4.
* Root locations are cross-checked three ways: the package root
  finder, a plain in-test bisection on the determinant in ln(delta),
  and the closed-form resonance radii from the spectral layer.
* Probe floors and residual thresholds were calibrated by refinement
  studies; the frozen numbers sit a factor >= 3 from the observed
  values.
"""

import math

import numpy as np
import pytest

from cornres.canonical import (
    T_MINUS,
    T_PLUS,
    ModeData,
    coercivity_probe,
    mode_determinant,
    mode_determinant_root,
    kernel_coefficients,
    kernel_field_eval,
    kernel_residual_check,
    measure_reflection_norm,
    mode_exponent,
    t_minus_apply,
    t_plus_apply,
)
from cornres.errors import (
    DomainError,
    MeshKindError,
    NotResonantError,
    ParamError,
    RegimeError,
)
from cornres.mesh import (
    build_annulus_mesh,
    build_tcoercivity_mesh,
    suggested_n_t,
)
from cornres.spectral import Contrast, resonance_deltas

HALF = Contrast(1.0, -0.5)
SQRT3 = math.sqrt(3.0)


def bisect_determinant_root(contrast, n):
    """Independent oracle: bisection on mode_determinant in ln(delta)."""
    lo, hi = math.log(1e-12), math.log(0.999)
    f_lo = mode_determinant(contrast, math.exp(lo), n)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = mode_determinant(contrast, math.exp(mid), n)
        if f_mid == 0.0:
            return math.exp(mid)
        if (f_lo > 0) == (f_mid > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def det_scale(contrast, delta, n):
    nu = mode_exponent(delta, n)
    return abs(contrast.sigma_minus * math.sinh(3 * nu) * math.cosh(nu)) + abs(
        contrast.sigma_plus * math.sinh(nu) * math.cosh(3 * nu)
    )


class TestDeterminant:
    def test_exponent_definition_and_guards(self):
        assert mode_exponent(0.3, 2) == pytest.approx(
            2 * math.pi**2 / (4 * math.log(0.3)), rel=1e-15
        )
        for delta in (0.01, 0.3, 0.9):
            for n in (1, 2, 5):
                nu = mode_exponent(delta, n)
                assert nu < 0
                assert nu == pytest.approx(n * mode_exponent(delta, 1), rel=1e-12)
        with pytest.raises(ParamError):
            mode_exponent(0.0, 1)
        with pytest.raises(ParamError):
            mode_exponent(1.0, 1)
        with pytest.raises(ParamError):
            mode_exponent(0.3, 0)

    def test_vanishes_at_first_resonance_with_exact_hyperbolics(self):
        # frozen identities at sigma = (1, -1/2), a = acosh(3/2)/2
        a = math.acosh(1.5) / 2
        assert math.sinh(a) == pytest.approx(0.5, rel=1e-14)
        assert math.cosh(a) == pytest.approx(math.sqrt(1.25), rel=1e-14)
        assert math.sinh(3 * a) == pytest.approx(2.0, rel=1e-14)
        assert math.cosh(3 * a) == pytest.approx(math.sqrt(5.0), rel=1e-14)

        delta_1 = resonance_deltas(HALF, 1)[0]
        assert mode_exponent(delta_1, 1) == pytest.approx(-a, abs=1e-14)
        assert abs(mode_determinant(HALF, delta_1, 1)) <= 1e-10

    def test_positive_pair_reduces_to_sinh_4nu(self):
        for sigma in (1.0, 2.5):
            for delta in (0.05, 0.37, 0.8):
                for n in (1, 3):
                    nu = mode_exponent(delta, n)
                    value = mode_determinant((sigma, sigma), delta, n)
                    assert value == pytest.approx(
                        sigma * math.sinh(4 * nu), rel=1e-13
                    )
                    assert value != 0.0

    def test_zero_at_every_resonance_across_contrast_grid(self):
        for kappa in np.linspace(-0.95, -0.35, 7):
            contrast = Contrast(1.0, float(kappa))
            for n, delta_n in enumerate(resonance_deltas(contrast, 5), start=1):
                det = mode_determinant(contrast, delta_n, n)
                scale = max(1.0, det_scale(contrast, delta_n, n))
                assert abs(det) <= 1e-10 * scale, (kappa, n)

    def test_root_finder_against_bisection_and_closed_form(self):
        for contrast in (HALF, Contrast(2.0, -1.4)):
            closed = resonance_deltas(contrast, 4)
            for n in (1, 2, 4):
                root = mode_determinant_root(contrast, n)
                assert root == pytest.approx(closed[n - 1], rel=1e-10)
                assert root == pytest.approx(
                    bisect_determinant_root(contrast, n), rel=1e-10
                )

    def test_root_exponent_satisfies_cosh_identity(self):
        for kappa in (-0.9, -0.5, -0.4):
            contrast = Contrast(1.0, kappa)
            for n in (1, 3):
                nu = mode_exponent(mode_determinant_root(contrast, n), n)
                target = (1 - kappa) / (2 * (1 + kappa))
                assert math.cosh(2 * nu) == pytest.approx(target, rel=1e-10)

    def test_root_finder_rejects_noncritical_contrast(self):
        with pytest.raises(RegimeError):
            mode_determinant_root(Contrast(1.0, -2.0), 1)
        with pytest.raises(RegimeError):
            mode_determinant_root(Contrast(1.0, -0.2), 1)


class TestKernelMode:
    def test_mode_data_validation(self):
        mode = ModeData(n=2, nu=-0.7, u_plus_n=1.0, u_minus_n=-3.1)
        assert mode.n == 2
        with pytest.raises(ParamError):
            ModeData(n=0, nu=-0.7, u_plus_n=1.0, u_minus_n=1.0)
        with pytest.raises(ParamError):
            ModeData(n=1, nu=0.7, u_plus_n=1.0, u_minus_n=1.0)
        with pytest.raises(ParamError):
            ModeData(n=1, nu=-math.inf, u_plus_n=1.0, u_minus_n=1.0)

    def test_amplitudes_at_half_contrast(self):
        delta_1 = resonance_deltas(HALF, 1)[0]
        mode = kernel_coefficients(HALF, delta_1, 1)
        assert mode.u_plus_n == 1.0
        assert mode.u_minus_n == pytest.approx(-4.0, rel=1e-12)
        # flux balance: sigma+ cosh(3 nu) = u- sigma- cosh(nu)
        assert HALF.sigma_plus * math.cosh(3 * mode.nu) == pytest.approx(
            mode.u_minus_n * HALF.sigma_minus * math.cosh(mode.nu), rel=1e-12
        )

    def test_both_matching_relations_across_grid(self):
        for kappa in (-0.85, -0.5, -0.4):
            contrast = Contrast(1.0, kappa)
            for n, delta_n in enumerate(resonance_deltas(contrast, 3), start=1):
                mode = kernel_coefficients(contrast, delta_n, n)
                nu = mode.nu
                value_gap = mode.u_minus_n * math.sinh(nu) + mode.u_plus_n * math.sinh(
                    3 * nu
                )
                assert abs(value_gap) <= 1e-10 * abs(math.sinh(3 * nu))
                flux_gap = contrast.sigma_plus * mode.u_plus_n * math.cosh(
                    3 * nu
                ) - contrast.sigma_minus * mode.u_minus_n * math.cosh(nu)
                assert abs(flux_gap) <= 1e-10 * abs(
                    contrast.sigma_plus * math.cosh(3 * nu)
                )

    def test_rejects_delta_off_resonance(self):
        delta_1 = resonance_deltas(HALF, 1)[0]
        with pytest.raises(NotResonantError):
            kernel_coefficients(HALF, 1.05 * delta_1, 1)
        with pytest.raises(NotResonantError):
            kernel_coefficients(HALF, delta_1, 2)
        with pytest.raises(NotResonantError):
            kernel_coefficients(HALF, 0.5, 1)


class TestKernelField:
    def setup_method(self):
        self.delta = resonance_deltas(HALF, 1)[0]
        self.mode = kernel_coefficients(HALF, self.delta, 1)

    def test_vanishes_exactly_on_all_four_boundary_pieces(self):
        thetas = np.linspace(0.0, math.pi, 17)
        assert np.all(
            kernel_field_eval(np.full(17, self.delta), thetas, self.mode, self.delta)
            == 0.0
        )
        assert np.all(
            kernel_field_eval(np.ones(17), thetas, self.mode, self.delta) == 0.0
        )
        radii = np.linspace(self.delta, 1.0, 17)
        assert np.all(
            kernel_field_eval(radii, np.zeros(17), self.mode, self.delta) == 0.0
        )
        assert np.all(
            kernel_field_eval(radii, np.full(17, math.pi), self.mode, self.delta)
            == 0.0
        )

    def test_branch_continuity_at_interface_random_radii(self):
        rng = np.random.default_rng(11)
        radii = self.delta + (1 - self.delta) * rng.random(100)
        log_delta = math.log(self.delta)
        k = self.mode.n * math.pi
        radial = np.sin(k * (np.log(radii) - log_delta) / log_delta)
        plus = self.mode.u_plus_n * math.sinh(k * (math.pi / 4 - math.pi) / log_delta)
        minus = self.mode.u_minus_n * math.sinh(k * (math.pi / 4) / log_delta)
        gap = np.abs(plus - minus) * np.abs(radial)
        scale = max(abs(plus), abs(minus), 1.0)
        assert np.all(gap <= 1e-10 * scale)
        # the evaluator agrees with the one-sided limits
        at_interface = kernel_field_eval(
            radii, np.full(100, math.pi / 4), self.mode, self.delta
        )
        just_below = kernel_field_eval(
            radii, np.full(100, math.pi / 4 - 1e-11), self.mode, self.delta
        )
        assert np.allclose(at_interface, plus * radial, rtol=0, atol=1e-12 * scale)
        assert np.allclose(at_interface, just_below, rtol=0, atol=1e-9 * scale)

    def test_domain_errors_outside_sector(self):
        with pytest.raises(DomainError):
            kernel_field_eval(0.5 * self.delta, 1.0, self.mode, self.delta)
        with pytest.raises(DomainError):
            kernel_field_eval(1.01, 1.0, self.mode, self.delta)
        with pytest.raises(DomainError):
            kernel_field_eval(0.5, -0.01, self.mode, self.delta)
        with pytest.raises(DomainError):
            kernel_field_eval(0.5, math.pi + 0.01, self.mode, self.delta)

    def test_scalar_in_scalar_out(self):
        value = kernel_field_eval(0.3, 0.6, self.mode, self.delta)
        assert isinstance(value, float)
        arr = kernel_field_eval(np.array([0.3, 0.4]), np.array([0.6, 2.0]), self.mode, self.delta)
        assert arr.shape == (2,)
        assert arr[0] == pytest.approx(value)


class TestKernelResidual:
    def test_small_at_resonance_and_shrinks_under_refinement(self):
        delta_1 = resonance_deltas(HALF, 1)[0]
        coarse = kernel_residual_check(
            HALF, delta_1, 1, build_annulus_mesh(delta_1, 32, 32)
        )
        fine = kernel_residual_check(
            HALF, delta_1, 1, build_annulus_mesh(delta_1, 64, 64)
        )
        assert fine <= 1e-2
        assert coarse / fine >= 1.5

    def test_off_resonance_same_construction_is_an_order_worse(self):
        delta_1 = resonance_deltas(HALF, 1)[0]
        on = kernel_residual_check(
            HALF, delta_1, 1, build_annulus_mesh(delta_1, 64, 64)
        )
        delta_off = 0.5
        mesh_off = build_annulus_mesh(delta_off, suggested_n_t(delta_off, 64), 64)
        off = kernel_residual_check(
            HALF, delta_off, 1, mesh_off, check_resonant=False
        )
        assert off >= 10.0 * on

    def test_second_mode_at_its_own_radius(self):
        delta_2 = resonance_deltas(HALF, 2)[1]
        residual = kernel_residual_check(
            HALF, delta_2, 2, build_annulus_mesh(delta_2, 96, 48)
        )
        assert residual <= 1e-2

    def test_mesh_delta_mismatch_is_rejected(self):
        delta_1 = resonance_deltas(HALF, 1)[0]
        with pytest.raises(ParamError):
            kernel_residual_check(HALF, delta_1, 1, build_annulus_mesh(0.5, 8, 8))


def dyadic_vectors(mesh, count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield rng.integers(-(2**20), 2**20, size=mesh.n_vertices) / 2.0**20


class TestCoercivityOperators:
    def setup_method(self):
        self.m31 = build_tcoercivity_mesh(0.3, 6, 8)
        self.mup = build_tcoercivity_mesh(0.3, 6, 8, uniform_plus=True)

    def test_plus_operator_on_plus_supported_field(self):
        rng = np.random.default_rng(3)
        u = rng.standard_normal(self.m31.n_vertices)
        u[self.m31.side < 0] = 0.0
        v = t_plus_apply(u, self.m31)
        keep = self.m31.side >= 0
        minus = self.m31.side < 0
        assert np.array_equal(v[keep], u[keep])
        assert np.array_equal(v[minus], 2.0 * u[self.m31.reflection[minus]])

    def test_minus_operator_on_minus_supported_field(self):
        rng = np.random.default_rng(4)
        u = rng.standard_normal(self.mup.n_vertices)
        u[self.mup.side > 0] = 0.0
        v = t_minus_apply(u, self.mup)
        minus = self.mup.side < 0
        band = (self.mup.side > 0) & (self.mup.reflection >= 0)
        beyond = (self.mup.side > 0) & (self.mup.reflection < 0)
        assert np.array_equal(v[minus], -u[minus])
        assert np.array_equal(v[band], -2.0 * u[self.mup.reflection[band]])
        assert np.all(v[beyond] == 0.0)

    def test_involutions_are_exact_on_100_dyadic_vectors(self):
        for u in dyadic_vectors(self.m31, 100, seed=5):
            assert np.array_equal(t_plus_apply(t_plus_apply(u, self.m31), self.m31), u)
        for u in dyadic_vectors(self.mup, 100, seed=6):
            assert np.array_equal(
                t_minus_apply(t_minus_apply(u, self.mup), self.mup), u
            )

    def test_involutions_on_arbitrary_floats_to_rounding(self):
        rng = np.random.default_rng(7)
        u = rng.standard_normal(self.m31.n_vertices)
        v = t_plus_apply(t_plus_apply(u, self.m31), self.m31)
        assert np.abs(v - u).max() <= 1e-12

    def test_zero_field_maps_to_zero(self):
        zero = np.zeros(self.m31.n_vertices)
        assert np.all(t_plus_apply(zero, self.m31) == 0.0)
        zero = np.zeros(self.mup.n_vertices)
        assert np.all(t_minus_apply(zero, self.mup) == 0.0)

    def test_mesh_kind_and_variant_guards(self):
        plain = build_annulus_mesh(0.3, 6, 8)
        with pytest.raises(MeshKindError):
            t_plus_apply(np.zeros(plain.n_vertices), plain)
        with pytest.raises(MeshKindError):
            t_minus_apply(np.zeros(plain.n_vertices), plain)
        with pytest.raises(MeshKindError):
            t_plus_apply(np.zeros(self.mup.n_vertices), self.mup)
        with pytest.raises(MeshKindError):
            t_minus_apply(np.zeros(self.m31.n_vertices), self.m31)
        with pytest.raises(ParamError):
            t_plus_apply(np.zeros(3), self.m31)


class TestReflectionNorm:
    def test_angle_tripling_reflection_approaches_sqrt3_from_below(self):
        norms = []
        for n_minus in (4, 8, 16):
            n_theta = 4 * n_minus
            mesh = build_tcoercivity_mesh(0.3, suggested_n_t(0.3, n_theta), n_minus)
            norms.append(measure_reflection_norm(mesh))
        gaps = [SQRT3 - v for v in norms]
        assert all(v <= SQRT3 + 1e-9 for v in norms)
        assert norms[0] < norms[1] < norms[2]
        assert gaps[0] / gaps[1] >= 2.0 and gaps[1] / gaps[2] >= 2.0
        assert gaps[2] <= 0.02

    def test_euclidean_reflection_has_unit_norm(self):
        mesh = build_tcoercivity_mesh(
            0.3, suggested_n_t(0.3, 32), 8, uniform_plus=True
        )
        assert measure_reflection_norm(mesh) == pytest.approx(1.0, abs=1e-10)

    def test_requires_coercivity_mesh(self):
        with pytest.raises(MeshKindError):
            measure_reflection_norm(build_annulus_mesh(0.3, 6, 8))


def probe_mesh(delta, n_minus, uniform_plus=False):
    return build_tcoercivity_mesh(
        delta, suggested_n_t(delta, 4 * n_minus), n_minus, uniform_plus=uniform_plus
    )


class TestCoercivityProbe:
    def test_plus_regime_floor_is_delta_independent(self):
        # calibrated floor: observed minima 0.179-0.191 over this grid
        floors = []
        for delta in (0.1, 0.3, 0.5):
            value = coercivity_probe(
                Contrast(1.0, -0.2), probe_mesh(delta, 8), 200, T_PLUS
            )
            floors.append(value)
            assert value >= 0.05
        assert max(floors) / min(floors) <= 2.0

    def test_minus_regime_floor(self):
        value = coercivity_probe(
            Contrast(1.0, -2.0),
            probe_mesh(0.3, 8, uniform_plus=True),
            200,
            T_MINUS,
        )
        assert value >= 0.1

    def test_collapse_at_resonance_under_refinement(self):
        delta_1 = resonance_deltas(HALF, 1)[0]
        minima = [
            coercivity_probe(HALF, probe_mesh(delta_1, n_minus), 50, T_PLUS)
            for n_minus in (4, 8, 16)
        ]
        assert minima[0] > minima[1] > minima[2]
        assert minima[0] / minima[2] >= 10.0
        assert minima[2] <= 1e-3

    def test_regime_guards_reject_crossed_operator_only(self):
        with pytest.raises(RegimeError):
            coercivity_probe(Contrast(1.0, -2.0), probe_mesh(0.3, 4), 10, T_PLUS)
        with pytest.raises(RegimeError):
            coercivity_probe(
                Contrast(1.0, -0.2),
                probe_mesh(0.3, 4, uniform_plus=True),
                10,
                T_MINUS,
            )
        # inside the critical interval both operators may be probed
        inside = coercivity_probe(
            HALF, probe_mesh(0.3, 4, uniform_plus=True), 10, T_MINUS
        )
        assert inside > 0.0

    def test_parameter_validation(self):
        with pytest.raises(ParamError):
            coercivity_probe(Contrast(1.0, -0.2), probe_mesh(0.3, 4), 10, "sideways")
        with pytest.raises(ParamError):
            coercivity_probe(Contrast(1.0, -0.2), probe_mesh(0.3, 4), 0, T_PLUS)

    def test_probe_is_reproducible_for_a_seed(self):
        mesh = probe_mesh(0.3, 4)
        first = coercivity_probe(Contrast(1.0, -0.2), mesh, 25, T_PLUS, seed=9)
        second = coercivity_probe(Contrast(1.0, -0.2), mesh, 25, T_PLUS, seed=9)
        assert first == second
