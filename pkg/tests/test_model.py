import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanofit.circlefit import fit_circle, fit_phase_response
from fanofit.errors import DegenerateNormalizationError, InvalidInputError, ModeError
from fanofit.model import (
    C_EFF_DEFAULT,
    INF,
    FanoBackground,
    MeasurementMode,
    ResonatorParams,
    apply_fano,
    background_period,
    background_phase,
    coupling_to_radius,
    kappa,
    leakage_db_to_linear,
    leakage_linear_to_db,
    loaded_q,
    normalize_fano,
    quality_from_radius,
    radius_to_coupling,
    reflection_response,
    transmission_response,
)

REFL = MeasurementMode.REFLECTION
NOTCH = MeasurementMode.NOTCH_TRANSMISSION


def _params(coupling, q_c=2e4, f_r=5e9, mode=REFL):
    return ResonatorParams(f_r, coupling * q_c, q_c, mode)


class TestReflection:
    def test_critical_coupling_at_resonance_is_zero(self):
        p = _params(1.0)
        assert abs(reflection_response(p, p.f_r)) < 1e-15

    def test_lossless_half_linewidth_detuning(self):
        p = ResonatorParams(5e9, INF, 1e4)
        # 1 - 2/(1 + i) = i
        assert reflection_response(p, p.f_r + p.kappa / 2) == pytest.approx(1j, abs=1e-12)

    def test_overcoupled_resonance_point(self):
        p = _params(3.0)
        assert reflection_response(p, p.f_r) == pytest.approx(-0.5 + 0j, abs=1e-12)

    def test_non_finite_frequency_rejected(self):
        with pytest.raises(InvalidInputError):
            reflection_response(_params(1.0), float("nan"))

    def test_vectorised_matches_scalar(self):
        p = _params(0.7)
        f = np.linspace(p.f_r - 3 * p.kappa, p.f_r + 3 * p.kappa, 7)
        vec = reflection_response(p, f)
        assert np.allclose(vec, [reflection_response(p, x) for x in f], rtol=0, atol=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(q_c=st.floats(1e2, 1e7), det=st.floats(-1e3, 1e3))
    def test_lossless_has_unit_magnitude(self, q_c, det):
        p = ResonatorParams(6e9, INF, q_c)
        assert abs(abs(reflection_response(p, p.f_r + det * p.kappa)) - 1.0) < 1e-12


class TestTransmission:
    def test_critical_notch_depth(self):
        p = _params(1.0, mode=NOTCH)
        assert transmission_response(p, p.f_r) == pytest.approx(0.5 + 0j, abs=1e-12)

    def test_lossless_notch_full_dip(self):
        p = ResonatorParams(5e9, INF, 1e4, NOTCH)
        assert abs(transmission_response(p, p.f_r)) < 1e-15

    def test_far_off_resonance_is_unity(self):
        p = _params(2.0, mode=NOTCH)
        assert transmission_response(p, p.f_r + 1e7 * p.kappa) == pytest.approx(1.0, abs=1e-6)

    def test_mode_mismatch(self):
        with pytest.raises(ModeError):
            transmission_response(_params(1.0), 5e9)


class TestFano:
    def test_no_leakage_is_identity(self):
        s = np.array([0.3 - 0.2j, -1.0, 1j])
        assert np.array_equal(apply_fano(s, FanoBackground(0.0, 1.3)), s)
        assert np.allclose(normalize_fano(s, FanoBackground(0.0, 1.3)), s, rtol=0, atol=0)

    def test_apply_examples(self):
        assert apply_fano(-1.0, FanoBackground(0.18, 0.0)) == pytest.approx(-0.64)
        assert apply_fano(1.0, FanoBackground(0.18, math.pi)) == pytest.approx(0.64)

    def test_off_resonant_point_is_fixed(self):
        for b in (0.05, 0.18, 0.45):
            for phi in np.linspace(0, 2 * math.pi, 9):
                assert normalize_fano(1.0, FanoBackground(b, phi)) == pytest.approx(1.0, abs=1e-15)

    def test_normalize_examples(self):
        assert normalize_fano(-1.0, FanoBackground(0.18, 0.0)) == pytest.approx(-0.64, abs=1e-12)
        # (-1 + i bt)/(1 + i bt) = rotation by 2 atan(bt) of -1
        got = normalize_fano(-1.0, FanoBackground(0.18, math.pi / 2))
        assert got.real == pytest.approx(-0.9081, abs=5e-5)
        assert got.imag == pytest.approx(0.4188, abs=5e-5)

    def test_pole_rejected(self):
        with pytest.raises(DegenerateNormalizationError):
            normalize_fano(0.5, FanoBackground(0.5, math.pi))

    def test_background_amplitude_range(self):
        with pytest.raises(InvalidInputError):
            FanoBackground(1.0)
        with pytest.raises(InvalidInputError):
            FanoBackground(-0.1)
        assert FanoBackground(0.18).b_tilde == pytest.approx(0.219512, abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(cx=st.floats(-2, 2), cy=st.floats(-2, 2), r=st.floats(0.05, 1.5),
           b=st.floats(0, 0.49), phi=st.floats(0, 2 * math.pi))
    def test_circles_map_to_circles(self, cx, cy, r, b, phi):
        pts = complex(cx, cy) + r * np.exp(1j * np.linspace(0, 2 * math.pi, 32, endpoint=False))
        fit = fit_circle(normalize_fano(pts, FanoBackground(b, phi)))
        assert fit.rms / fit.radius < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(coupling=st.floats(0.2, 50), b=st.floats(0, 0.45), phi=st.floats(0, 2 * math.pi),
           q_c=st.floats(1e3, 1e6))
    def test_linewidth_survives_normalization(self, coupling, b, phi, q_c):
        p = _params(coupling, q_c=q_c)
        f = np.linspace(p.f_r - 10 * p.kappa, p.f_r + 10 * p.kappa, 401)
        s = normalize_fano(apply_fano(reflection_response(p, f), FanoBackground(b, phi)),
                           FanoBackground(b, phi))
        center = fit_circle(s).center
        f_r, q_l = fit_phase_response(f, s - center)
        assert abs(f_r / q_l / p.kappa - 1) < 1e-6


class TestBackgroundPhase:
    def test_ten_centimetres_gives_about_one_turn_per_gigahertz(self):
        assert background_phase(0.10, 1e9) == pytest.approx(2 * math.pi, rel=0.05)

    def test_forty_centimetres_period(self):
        assert background_period(0.40) == pytest.approx(250e6, rel=0.05)

    def test_zero_length(self):
        assert np.all(background_phase(0.0, np.linspace(0, 5e9, 11)) == 0)
        assert background_period(0.0) == INF

    def test_exact_value_and_dielectric(self):
        assert background_phase(0.25, 3e8) == pytest.approx(2 * math.pi * 0.5 * 3e8 / C_EFF_DEFAULT)
        slow = background_phase(0.25, 3e8, eps_r=4.0)
        assert slow == pytest.approx(2 * math.pi * 0.5 * 3e8 * 2.0 / 299792458.0)

    def test_negative_length_rejected(self):
        with pytest.raises(InvalidInputError):
            background_phase(-0.1, 1e9)


class TestRadiusCoupling:
    @pytest.mark.parametrize("coupling,mode,radius", [
        (1.0, REFL, 0.5), (3.0, REFL, 0.75), (1.0, NOTCH, 0.25), (0.0, REFL, 0.0),
        (INF, REFL, 1.0), (INF, NOTCH, 0.5),
    ])
    def test_forward(self, coupling, mode, radius):
        assert coupling_to_radius(coupling, mode) == pytest.approx(radius, abs=1e-15)

    @pytest.mark.parametrize("radius,mode,coupling", [
        (0.5, REFL, 1.0), (1.2, REFL, INF), (1.0, REFL, INF), (0.25, NOTCH, 1.0), (0.6, NOTCH, INF),
    ])
    def test_inverse(self, radius, mode, coupling):
        assert radius_to_coupling(radius, mode) == coupling

    def test_negative_rejected(self):
        with pytest.raises(InvalidInputError):
            coupling_to_radius(-1.0)
        with pytest.raises(InvalidInputError):
            radius_to_coupling(-0.1)

    def test_monotone(self):
        k = np.logspace(-3, 6, 200)
        for mode in (REFL, NOTCH):
            r = coupling_to_radius(k, mode)
            assert np.all(np.diff(r) > 0)
            assert np.all(r < mode.radius_scale)

    @settings(max_examples=200, deadline=None)
    @given(k=st.floats(0, 1e3), notch=st.booleans())
    def test_round_trip_moderate_coupling(self, k, notch):
        mode = NOTCH if notch else REFL
        back = radius_to_coupling(coupling_to_radius(k, mode), mode)
        assert back == pytest.approx(k, rel=1e-12, abs=1e-300)

    @settings(max_examples=200, deadline=None)
    @given(k=st.floats(1e3, 1e6), notch=st.booleans())
    def test_round_trip_strong_coupling_within_conditioning(self, k, notch):
        # the radius k/(k+1) sits within 1/k of 1, so one rounding step in it
        # costs a relative error of about eps*(1+k) on the way back
        mode = NOTCH if notch else REFL
        back = radius_to_coupling(coupling_to_radius(k, mode), mode)
        assert abs(back / k - 1) <= 4 * np.finfo(float).eps * (1 + k)


class TestQualityFactors:
    def test_harmonic_sum(self):
        assert loaded_q(2e4, 2e4) == pytest.approx(1e4)
        assert loaded_q(INF, 3e4) == 3e4
        assert kappa(5e9, 1e4) == 5e5

    def test_loaded_q_of_measured_resonator(self):
        q_l = loaded_q(80e3, 211e3)
        assert q_l == pytest.approx(58.0e3, rel=2e-3)
        assert q_l == pytest.approx(5.003e9 / 0.09e6, rel=0.05)

    def test_params_derived_quantities(self):
        p = ResonatorParams(5e9, 6e4, 2e4)
        assert p.q_l <= min(p.q_i, p.q_c)
        assert p.kappa == pytest.approx(p.f_r / p.q_l)
        assert p.kappa_rad == pytest.approx(2 * math.pi * p.kappa)
        assert p.radius == pytest.approx(0.75)

    def test_invalid_params(self):
        with pytest.raises(InvalidInputError):
            ResonatorParams(-1.0, 1e4, 1e4)
        with pytest.raises(InvalidInputError):
            ResonatorParams(5e9, 0.0, 1e4)
        with pytest.raises(InvalidInputError):
            ResonatorParams(5e9, 1e4, INF)

    def test_quality_from_radius(self):
        assert quality_from_radius(0.5, 1e4) == (2e4, 2e4)
        assert quality_from_radius(1.2, 1e4) == (INF, 1e4)
        assert quality_from_radius(0.6, 1e4, NOTCH) == (INF, 1e4)
        q_i, q_c = quality_from_radius(0.25, 1e4, NOTCH)
        assert (q_i, q_c) == (pytest.approx(2e4), pytest.approx(2e4))

    def test_mode_aliases(self):
        assert MeasurementMode.parse("S11") is REFL
        assert MeasurementMode.parse("hanger") is NOTCH
        with pytest.raises(InvalidInputError):
            MeasurementMode.parse("bogus")


class TestDecibels:
    def test_examples(self):
        assert leakage_db_to_linear(-15) == pytest.approx(0.178, abs=5e-4)
        assert leakage_db_to_linear(-24) == pytest.approx(0.0631, abs=5e-5)
        assert leakage_db_to_linear(0.0) == 1.0

    def test_zero_db_is_not_a_valid_background(self):
        with pytest.raises(InvalidInputError):
            FanoBackground(leakage_db_to_linear(0.0))

    def test_positive_rejected(self):
        with pytest.raises(InvalidInputError):
            leakage_db_to_linear(3.0)

    def test_inverse(self):
        assert leakage_linear_to_db(leakage_db_to_linear(-17.5)) == pytest.approx(-17.5)
        assert leakage_linear_to_db(0.0) == -INF
