import numpy as np
import pytest

from weakflow import beam
from weakflow.beam import BeamModel, PolarizationSpinor
from weakflow.errors import DomainError

from _oracles import fresnel_propagate, zero_crossing_spacing


def default_model(**kw):
    return BeamModel.default(**kw)


class TestSpinor:
    def test_normalization_explicit(self):
        s = PolarizationSpinor(3.0, 4.0j)
        n = s.normalized()
        assert abs(n.norm() - 1.0) < 1e-15
        # the original is untouched
        assert s.zeta_x == 3.0

    def test_model_rejects_unnormalized_spinor(self):
        with pytest.raises(ValueError):
            BeamModel.default(polarization=PolarizationSpinor(1.0, 1.0))


class TestEnvelope:
    def test_single_slit_on_axis_is_inverse_q(self):
        m = default_model(slit_separation=0.0, amp_plus=1.0, amp_minus=0.0)
        for z in (0.0, 10.0, 133.0):
            q = z + m.q0
            assert abs(beam.envelope(m, 0.0, z) - 1.0 / q) <= 1e-15 * abs(1.0 / q)

    def test_symmetric_midplane_is_stagnation_line(self):
        m = default_model()
        d = beam.envelope_derivatives(m, 0.0, 50.0)
        # du/dx vanishes exactly by symmetry, so both the amplitude gradient
        # and the phase current Im[u* du/dx] vanish
        assert d["du_dx"] == 0.0
        assert np.imag(np.conj(d["u"]) * d["du_dx"]) == 0.0

    def test_parity_for_equal_amplitudes(self):
        m = default_model()
        xs = np.array([0.3, 1.7, 2.9, 5.1])
        z = 40.0
        left = beam.envelope(m, -xs, z)
        right = beam.envelope(m, xs, z)
        assert np.array_equal(left, right)

    @pytest.mark.parametrize("z_over_zr", [2.0, 8.0])
    def test_fringe_spacing_against_fft_fresnel(self, z_over_zr):
        # Fringe period from the interference cross term Re(u+ conj(u-)),
        # whose zero crossings are exactly envelope-free.  The far-field
        # formula 2 pi z/(k d) carries a (1 + zR^2/z^2) mid-field factor,
        # so the 2% formula check applies from z = 8 zR on; the FFT-oracle
        # agreement is asserted at every z.
        m = default_model()
        plus = default_model(amp_minus=0.0)
        minus = default_model(amp_plus=0.0)
        k = m.wavenumber
        d = m.slit_separation
        z = z_over_zr * m.rayleigh_range
        formula = 2.0 * np.pi * z / (k * d)

        xs0 = np.linspace(-60.0, 60.0, 16384, endpoint=False)
        x_fft, up = fresnel_propagate(beam.envelope(plus, xs0, 0.0), xs0, k, z)
        _, um = fresnel_propagate(beam.envelope(minus, xs0, 0.0), xs0, k, z)
        window = 3.0 * formula
        spacing_oracle = 2.0 * zero_crossing_spacing(
            x_fft, np.real(up * np.conj(um)), window)

        xs1 = np.linspace(-window, window, 40001)
        cross = np.real(beam.envelope(plus, xs1, z)
                        * np.conj(beam.envelope(minus, xs1, z)))
        spacing_model = 2.0 * zero_crossing_spacing(xs1, cross, window)

        assert abs(spacing_model - spacing_oracle) / spacing_oracle < 5e-3
        if z_over_zr >= 8.0:
            assert abs(spacing_model - formula) / formula < 0.02

    def test_analytic_dx_matches_finite_difference(self):
        m = default_model()
        h = 1e-4 * m.waist
        xs = np.linspace(-3.0, 3.0, 21) + 0.0137   # keep off the symmetry zero
        z = 70.0
        d = beam.envelope_derivatives(m, xs, z)
        fd = (beam.envelope(m, xs + h, z) - beam.envelope(m, xs - h, z)) / (2.0 * h)
        rel = np.abs(d["du_dx"] - fd) / np.abs(fd)
        assert rel.max() < 1e-6

    def test_paraxial_wave_equation_residual(self):
        m = default_model()
        xs = np.linspace(-5.0, 5.0, 41)
        for z in (0.0, 30.0, 133.0):
            for y in (0.0, 0.7):
                res = beam.paraxial_residual(m, xs, z, y)
                bound = 1e-8 * m.wavenumber ** 2 * np.abs(
                    beam.envelope_derivatives(m, xs, z, y)["u"])
                assert np.all(res < bound)

    def test_nonfinite_evaluation_raises_domain_error(self):
        m = default_model()
        with pytest.raises(DomainError):
            beam.envelope(m, np.nan, 10.0)

    def test_wavefront_curvature_flag(self):
        flat = default_model(slit_separation=0.0, amp_minus=0.0)
        curved = default_model(slit_separation=0.0, amp_minus=0.0,
                               wavefront_radius=500.0)
        # same beamlet width at the slit plane, different phase curvature
        def profile(model, x):
            return abs(beam.envelope(model, x, 0.0)) / abs(beam.envelope(model, 0.0, 0.0))
        assert abs(profile(curved, 1.0) - profile(flat, 1.0)) < 1e-12
        assert not np.isclose(np.angle(beam.envelope(curved, 1.5, 0.0))
                              - np.angle(beam.envelope(curved, 0.0, 0.0)),
                              np.angle(beam.envelope(flat, 1.5, 0.0))
                              - np.angle(beam.envelope(flat, 0.0, 0.0)))


class TestFields:
    def test_plane_wave_limit_e_equals_b(self):
        m = BeamModel(wavenumber=6.0, slit_separation=0.0, waist=1e4,
                      amp_plus=1.0, amp_minus=0.0)
        s = beam.fields_at(m, 0.0, 0.0, 5.0)
        e_norm = np.linalg.norm(s.E)
        b_norm = np.linalg.norm(s.B)
        assert abs(e_norm - b_norm) / e_norm < 1e-6

    def test_transversality_paraxial_bound(self):
        m = default_model()
        bound = 10.0 / (m.wavenumber * m.waist)
        for x, y, z in [(0.5, 0.0, 20.0), (2.0, 0.3, 60.0), (-1.2, -0.5, 100.0)]:
            s = beam.fields_at(m, x, y, z)
            e_perp = np.linalg.norm(s.E[:2])
            b_perp = np.linalg.norm(s.B[:2])
            assert abs(s.E[2]) <= bound * e_perp
            assert abs(s.B[2]) <= bound * b_perp

    def test_scaling_covariance(self):
        m = default_model()
        c = 2.5 - 1.5j
        m2 = default_model(amp_plus=m.amp_plus * c, amp_minus=m.amp_minus * c)
        s1 = beam.fields_at(m, 0.7, 0.2, 45.0)
        s2 = beam.fields_at(m2, 0.7, 0.2, 45.0)
        assert np.allclose(s2.E, c * s1.E, rtol=1e-13, atol=0.0)
        assert np.allclose(s2.B, c * s1.B, rtol=1e-13, atol=0.0)

    def test_vector_potential_matches_envelope_times_spinor(self):
        m = default_model(polarization=beam.DIAGONAL)
        x, y, z = 0.9, 0.0, 25.0
        s = beam.fields_at(m, x, y, z)
        u = beam.envelope(m, x, z) * np.exp(1j * m.wavenumber * z)
        assert np.allclose(s.A, u * np.array([m.polarization.zeta_x,
                                              m.polarization.zeta_y]))

    def test_b_is_curl_of_a_finite_difference(self):
        # central differences of A against the closed-form B
        m = default_model(polarization=beam.DIAGONAL)
        x, y, z = 0.8, 0.4, 33.0
        h = 1e-5

        def a_full(xx, yy, zz):
            s = beam.fields_at(m, xx, yy, zz)
            az = (1j / m.wavenumber) * (
                m.polarization.zeta_x * beam.envelope_derivatives(m, xx, zz, yy)["du_dx"]
                + m.polarization.zeta_y * beam.envelope_derivatives(m, xx, zz, yy)["du_dy"]
            ) * np.exp(1j * m.wavenumber * zz)
            return np.array([s.A[0], s.A[1], az])

        curl = np.empty(3, dtype=complex)
        d_ax = (a_full(x, y + h, z) - a_full(x, y - h, z)) / (2 * h)
        d_az = (a_full(x, y, z + h) - a_full(x, y, z - h)) / (2 * h)
        d_axx = (a_full(x + h, y, z) - a_full(x - h, y, z)) / (2 * h)
        curl[0] = d_ax[2] - d_az[1]
        curl[1] = d_az[0] - d_axx[2]
        curl[2] = d_axx[1] - d_ax[0]
        s = beam.fields_at(m, x, y, z)
        assert np.allclose(s.B, curl, rtol=2e-6, atol=1e-10)
