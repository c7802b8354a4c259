import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fanofit.errors import CalibrationError, DegenerateGeometryError, InvalidInputError
from fanofit.model import INF, loaded_q
from fanofit.synth import fano_center, synth_trajectory
from fanofit.trajectory import (
    DRIFT,
    LOW_ARC,
    NONSTATIONARY,
    CenterTrajectory,
    calibrate_leakage,
    calibrate_trajectory,
    fit_center_trajectory,
    trajectory_report,
)
from fanofit.uncertainty import center_circle

FULL32 = np.linspace(0, 2 * math.pi, 32, endpoint=False)


def _traj(centers, labels=None, q_l=1e4):
    centers = np.asarray(centers)
    labels = np.arange(centers.size, dtype=float) if labels is None else labels
    return CenterTrajectory(labels, centers, np.full(centers.size, q_l))


class TestCenterTrajectory:
    def test_too_few_points(self):
        with pytest.raises(InvalidInputError):
            _traj(np.ones(4) * 0.5)

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            CenterTrajectory(np.arange(5.0), np.ones(6, complex), np.ones(5))


class TestFit:
    def test_exact_trajectory(self):
        fit = fit_center_trajectory(synth_trajectory(0.0, 0.18, FULL32))
        assert fit.x_c == pytest.approx(-0.050625, abs=1e-9)
        assert fit.r_c == pytest.approx(0.230625, abs=1e-9)
        assert abs(fit.y_c) < 1e-9
        assert fit.inliers.all()
        assert 1.8 * math.pi < fit.arc_coverage <= 2 * math.pi

    def test_outliers_with_robust_fit(self):
        traj = synth_trajectory(0.0, 0.18, FULL32)
        m = traj.centers.copy()
        m[[3, 11, 20]] += np.array([0.2, -0.15j, 0.1 + 0.1j])
        fit = fit_center_trajectory(_traj(m), robust=True)
        assert fit.x_c == pytest.approx(-0.050625, abs=1e-3)
        assert fit.r_c == pytest.approx(0.230625, abs=1e-3)
        assert not fit.inliers[[3, 11, 20]].any()
        plain = fit_center_trajectory(_traj(m), robust=False)
        assert abs(plain.r_c - 0.230625) > abs(fit.r_c - 0.230625)

    def test_identical_points(self):
        with pytest.raises(DegenerateGeometryError):
            fit_center_trajectory(_traj(np.full(5, 0.3 + 0.1j)))

    def test_low_arc_warning(self):
        fit = fit_center_trajectory(synth_trajectory(0.3, 0.18, np.linspace(0, 0.5, 12)))
        assert LOW_ARC in fit.warnings
        wide = fit_center_trajectory(synth_trajectory(0.3, 0.18, np.linspace(0, 2.0, 12)))
        assert LOW_ARC not in wide.warnings


class TestCalibrate:
    def test_lossless_example(self):
        cal = calibrate_leakage(-0.050625, 0.230625, 1e4)
        assert cal.b == pytest.approx(0.18, abs=1e-12)
        assert cal.m_true == pytest.approx(0.0, abs=1e-12)
        assert cal.q_i == INF and cal.q_c == 1e4

    def test_no_fano(self):
        cal = calibrate_leakage(0.4, 0.0, 1e4)
        assert cal.b == 0.0 and cal.m_true == 0.4
        assert cal.q_i == pytest.approx(2.5e4)

    def test_infeasible(self):
        with pytest.raises(CalibrationError):
            calibrate_leakage(0.5, 0.6, 1e4)
        with pytest.raises(CalibrationError):
            calibrate_leakage(1.0, 0.1, 1e4)
        with pytest.raises(CalibrationError):
            calibrate_leakage(0.0, -0.1, 1e4)

    def test_recovers_weakly_overcoupled_sweep(self):
        q_i, q_c, b = 5.7e5, 5.7e5 / 30, 0.061
        q_l = loaded_q(q_i, q_c)
        x = 1 - q_l / q_c
        cal = calibrate_trajectory(synth_trajectory(x, b, np.linspace(0, math.pi, 33), q_l=q_l))
        assert cal.b == pytest.approx(b, rel=1e-9)
        assert cal.q_i == pytest.approx(q_i, rel=1e-6)
        assert cal.q_c == pytest.approx(q_c, rel=1e-9)

    def test_transmission_mode(self):
        cal = calibrate_leakage(*_xc_rc(0.75, 0.1), 1e4, mode="transmission")
        assert cal.q_i == pytest.approx(2e4) and cal.q_c == pytest.approx(2e4)

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(-1, 0.99), b=st.floats(0, 0.45))
    def test_round_trip(self, x, b):
        cal = calibrate_leakage(*_xc_rc(x, b), 1e4)
        assert abs(cal.m_true - x) < 1e-12
        assert abs(cal.b - b) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(0.99, 1.0, exclude_max=True), b=st.floats(0, 0.45))
    def test_round_trip_near_off_resonant_point(self, x, b):
        # x_c is within (1 - x) of 1, so storing it rounds 1 - x_c at the
        # relative level eps/(1 - x) before the inversion even starts
        x_c, r_c = _xc_rc(x, b)
        assume(x_c < 1.0)  # the collapsed case is covered below
        cal = calibrate_leakage(x_c, r_c, 1e4)
        tol = max(1e-12, 8 * np.finfo(float).eps / (1 - x))
        assert abs(cal.m_true - x) < 1e-12
        assert abs(cal.b - b) < tol

    def test_center_rounded_onto_off_resonant_point(self):
        x_c, r_c = _xc_rc(1 - 2 ** -53, 0.25)
        assert x_c == 1.0
        with pytest.raises(CalibrationError):
            calibrate_leakage(x_c, r_c, 1e4)

    def test_half_arc_noisy_recovery(self):
        errs_x, errs_b = [], []
        for seed in range(100):
            tr = synth_trajectory(0.5, 0.18, np.linspace(0, math.pi, 33), noise_sigma=0.005, seed=seed)
            cal = calibrate_trajectory(tr)
            errs_x.append(abs(cal.m_true / 0.5 - 1))
            errs_b.append(abs(cal.b / 0.18 - 1))
        assert np.median(errs_x) < 0.01 and np.median(errs_b) < 0.01

    def test_conditioning_at_half_coverage(self):
        errs = []
        for seed in range(100):
            tr = synth_trajectory(0.2, 0.18, np.linspace(0, math.pi, 40), noise_sigma=0.01, seed=seed)
            errs.append(abs(calibrate_trajectory(tr).b / 0.18 - 1))
        assert np.median(errs) <= 0.05

    def test_rotation_about_off_resonant_point(self):
        phis = np.linspace(0.2, 3.6, 25)
        base = synth_trajectory(0.3, 0.2, phis)
        rot = np.exp(0.7j)
        turned = CenterTrajectory(phis + 0.7, 1 + (base.centers - 1) * rot, base.q_l)
        a, b = calibrate_trajectory(base), calibrate_trajectory(turned)
        assert b.m_true == pytest.approx(a.m_true, abs=1e-10)
        assert b.b == pytest.approx(a.b, abs=1e-10)

    def test_median_loaded_q(self):
        tr = synth_trajectory(0.5, 0.1, FULL32, q_l=1e4)
        q = tr.q_l.copy()
        q[0] = 1e9
        cal = calibrate_trajectory(CenterTrajectory(tr.labels, tr.centers, q))
        assert cal.q_l_median == 1e4


def _xc_rc(x, b):
    cc = center_circle(x, b)
    return cc.x_c, cc.r_c


class TestReport:
    def test_constant_sweep(self):
        tr = synth_trajectory(0.3, 0.1, FULL32)
        rep = trajectory_report(tr, calibrate_trajectory(tr))
        assert max(abs(r) for r in rep["residuals"]) < 1e-9
        assert rep["flags"] == []

    def test_step_in_internal_loss(self):
        # 40 labels over a full turn; the loss rate changes after 60 % of the sweep
        phis = np.linspace(0, 2 * math.pi, 40, endpoint=False)
        x = np.where(np.arange(40) < 24, 0.3, 0.25)
        tr = CenterTrajectory(phis, fano_center(x, 0.1, phis), np.full(40, 1e4))
        rep = trajectory_report(tr, calibrate_trajectory(tr))
        assert NONSTATIONARY in rep["flags"]
        start, stop = rep["flagged_segments"][0]
        assert start >= phis[24] - 1e-12

    def test_drifting_leakage(self):
        phis = np.linspace(0, 1.5 * math.pi, 30)
        b = np.linspace(0.10, 0.16, 30)
        tr = CenterTrajectory(phis, fano_center(0.3, b, phis), np.full(30, 1e4))
        rep = trajectory_report(tr, calibrate_trajectory(tr))
        assert DRIFT in rep["flags"]
        assert rep["kendall_tau"] > 0.8

    def test_labels_sorted(self):
        tr = synth_trajectory(0.3, 0.1, FULL32)
        order = np.random.default_rng(1).permutation(32)
        shuffled = CenterTrajectory(tr.labels[order], tr.centers[order], tr.q_l[order])
        rep = trajectory_report(shuffled, calibrate_trajectory(shuffled))
        assert rep["labels"] == sorted(rep["labels"])
