"""Morse counts, the pairing criterion, classification, and instability."""

import numpy as np
import pytest
import scipy.linalg

from multibump.errors import (
    NoInstabilityDetected,
    NotFreelyNondegenerateError,
    PreconditionError,
)
from multibump.gluing import BumpConfig
from multibump.grid import Field, GridSpec, inner_l2, resolvent_solve
from multibump.model import Potential, hessian_form
from multibump.spectra import (
    SpectralReport,
    classify,
    constrained_morse_index,
    free_morse_index,
    instability_eigenvalue,
    linearized_matrix,
    spectrum_bottom,
    z_translate_check,
    z_vector,
)

class TestLinearizedMatrix:
    def test_reflectionless_well_spectrum(self, grid24, V1, f4, soliton24):
        # -dxx + 1 - 6 sech^2 has bound states at -3 and 0
        L = linearized_matrix(soliton24, 0.0, V1, f4)
        low = scipy.linalg.eigh(L, subset_by_index=(0, 1), eigvals_only=True)
        assert low[0] == pytest.approx(-3.0, abs=1e-6)
        assert low[1] == pytest.approx(0.0, abs=1e-6)

    def test_symmetric(self, grid24, vcos, f4, smooth_field):
        u = smooth_field(grid24, seed=3)
        L = linearized_matrix(u, 0.1, vcos, f4)
        assert np.max(np.abs(L - L.T)) < 1e-12

    def test_linear_hook_bottom(self, grid24, vcos, zero_f, smooth_field):
        u = smooth_field(grid24, seed=4)
        L = linearized_matrix(u, 0.3, vcos, zero_f)
        low = scipy.linalg.eigh(L, subset_by_index=(0, 0), eigvals_only=True)[0]
        assert low == pytest.approx(spectrum_bottom(vcos, grid24) - 0.3, abs=1e-8)

    def test_quadratic_form_matches_hessian(self, grid24, vcos, f4, smooth_field):
        u = smooth_field(grid24, seed=5)
        L = linearized_matrix(u, 0.2, vcos, f4)
        form = hessian_form(u, 0.2, vcos, f4)
        for seed in range(5):
            v = smooth_field(grid24, seed=600 + seed)
            quad_form = grid24.h * float(v.values @ L @ v.values)
            assert quad_form == pytest.approx(form(v, v), rel=1e-9, abs=1e-9)


class TestMorseCounts:
    def test_soliton_free_count(self, soliton24, V1, f4):
        L = linearized_matrix(soliton24, 0.0, V1, f4)
        count = free_morse_index(L)
        assert count.count == 1
        # the translation mode sits inside the zero threshold and is flagged
        assert count.provisional and len(count.near_zero) == 1

    def test_positive_operator_free_count(self, grid24, vcos, zero_f, smooth_field):
        u = smooth_field(grid24, seed=6)
        L = linearized_matrix(u, -0.5, vcos, zero_f)
        count = free_morse_index(L)
        assert count.count == 0 and not count.provisional

    def test_local_min_counts(self, ubar, vcos, f4):
        L = linearized_matrix(ubar.u, ubar.lam, vcos, f4)
        assert constrained_morse_index(L, ubar.u).count == 0
        assert free_morse_index(L).count == 1

    def test_glued_counts(self, glued_two, glued_three, vcos, f4):
        for n, point in ((2, glued_two[12].point), (3, glued_three.point)):
            L = linearized_matrix(point.u, point.lam, vcos, f4)
            assert constrained_morse_index(L, point.u).count == n - 1
            assert free_morse_index(L).count == n


class TestZVector:
    def test_exact_kernel_raises(self, soliton24, V1, f4):
        # constant potential: the translation mode is an exact kernel vector
        with pytest.raises(NotFreelyNondegenerateError):
            z_vector(soliton24, 0.0, V1, f4)

    def test_linear_hook_positive_pairing(self, grid24, vcos, zero_f, smooth_field):
        u = smooth_field(grid24, seed=7)
        z = z_vector(u, -0.5, vcos, zero_f)
        reference = resolvent_solve(u, vcos, -0.5)
        assert np.max(np.abs(z.values - reference.values)) < 1e-9
        assert inner_l2(z, u) > 0

    def test_sign_subcritical_bump(self, family_min_p4, vmin_well, f4):
        from multibump.semiclassical import scaled_potential

        member = family_min_p4.members[1]
        Veps = scaled_potential(vmin_well, member.eps)
        z = z_vector(member.point.u, 0.0, Veps, f4)
        assert inner_l2(z, member.point.u) < 0

    def test_sign_supercritical_bump(self, family_min_p8, vmin_well, f8):
        from multibump.semiclassical import scaled_potential

        member = family_min_p8.members[1]
        Veps = scaled_potential(vmin_well, member.eps)
        z = z_vector(member.point.u, 0.0, Veps, f8)
        assert inner_l2(z, member.point.u) > 0


class TestClassify:
    def test_local_min_fully_nondegenerate(self, ubar, vcos, f4):
        report = classify(ubar.u, ubar.lam, vcos, f4)
        assert report.classification == "fully_nondegenerate_neg"
        assert (report.m, report.m_f) == (0, 1)
        assert report.z_dot_u < 0
        # sign-definite wave
        assert ubar.u.values.min() > 0

    def test_two_bump_indices(self, glued_two, vcos, f4):
        report = classify(glued_two[16].point.u, glued_two[16].point.lam, vcos, f4)
        assert report.classification == "fully_nondegenerate_neg"
        assert (report.m, report.m_f) == (1, 2)

    def test_report_invariants_enforced(self):
        with pytest.raises(ValueError):
            SpectralReport(
                m=0, m_f=2, z_dot_u=-1.0, spectral_gap=1.0,
                classification="fully_nondegenerate_neg",
            )
        with pytest.raises(ValueError):
            SpectralReport(
                m=1, m_f=1, z_dot_u=-0.5, spectral_gap=1.0,
                classification="fully_nondegenerate_neg",
            )


class TestZTranslate:
    def test_single_bump_trivial(self, ubar, vcos, f4):
        report = z_translate_check(ubar, ubar, BumpConfig(1, (0,)), vcos, f4)
        assert report.window_error < 1e-8
        assert report.scalar_discrepancy < 1e-9

    def test_two_bump_locality(self, ubar, glued_two, vcos, f4):
        report = z_translate_check(
            ubar, glued_two[16].point, BumpConfig(2, (-8, 8)), vcos, f4
        )
        assert report.scalar_discrepancy < 0.05 * abs(report.scalar_expected)

    def test_discrepancy_decreases_with_separation(self, ubar, glued_two, vcos, f4):
        r8 = z_translate_check(ubar, glued_two[8].point, BumpConfig(2, (-4, 4)), vcos, f4)
        r16 = z_translate_check(ubar, glued_two[16].point, BumpConfig(2, (-8, 8)), vcos, f4)
        assert r16.scalar_discrepancy < r8.scalar_discrepancy
        assert r16.window_error < r8.window_error


class TestInstability:
    def test_supercritical_eigenvalue(self, phi_super, V1, f8):
        result = instability_eigenvalue(phi_super, V1, f8)
        assert result.rho > 0
        assert result.rho == pytest.approx(np.sqrt(-result.mu), abs=1e-12)
        assert abs(inner_l2(result.v, phi_super.u)) < 1e-10
        assert result.eigen_residual < 1e-8

    def test_subcritical_reports_no_instability(self, phi_sub, V1, f4):
        with pytest.raises(NoInstabilityDetected) as err:
            instability_eigenvalue(phi_sub, V1, f4)
        # the quotient minimum was computed and is not below -tau0
        assert err.value.mu is not None and err.value.mu > -1e-2

    def test_requires_positive_wave(self, phi_super, V1, f8):
        from multibump.stationary import ConstrainedCriticalPoint

        flipped = ConstrainedCriticalPoint(
            u=Field(phi_super.u.grid, -phi_super.u.values),
            lam=phi_super.lam, mass=phi_super.mass,
            l2_residual_norm=phi_super.l2_residual_norm,
            constraint_violation=phi_super.constraint_violation,
        )
        with pytest.raises(PreconditionError):
            instability_eigenvalue(flipped, V1, f8)

    def test_requires_multiplier_below_spectrum(self, phi_super, V1, f8):
        from multibump.stationary import ConstrainedCriticalPoint

        bad = ConstrainedCriticalPoint(
            u=phi_super.u, lam=2.0, mass=phi_super.mass,
            l2_residual_norm=phi_super.l2_residual_norm,
            constraint_violation=phi_super.constraint_violation,
        )
        with pytest.raises(PreconditionError):
            instability_eigenvalue(bad, V1, f8)


class TestSpectrumBottom:
    def test_constant(self, grid24):
        assert spectrum_bottom(Potential.const(0.7), grid24) == pytest.approx(
            0.7, abs=1e-10
        )

    def test_cosine_band_window(self, grid24, vcos):
        bottom = spectrum_bottom(vcos, grid24)
        assert 0.5 < bottom < 1.5

    def test_resolution_independence(self, vcos):
        values = [
            spectrum_bottom(vcos, GridSpec(16, M)) for M in (512, 1024, 2048)
        ]
        assert abs(values[1] - values[0]) < 1e-8
        assert abs(values[2] - values[1]) < 1e-8
