"""Slope fitting, bound evaluation, bracket diagnostics, error studies,
and front-speed estimation."""

import math

import numpy as np
import pytest

from conftest import linear_model, smooth_field, zero_model
from splitlab.analysis import (BoundSet, ErrorStudyReport, StudyRow,
                               evaluate_bounds, fit_slope, front_location,
                               global_error_study, leading_term_check,
                               lie_bracket_field, local_error_study,
                               wave_speed_estimate)
from splitlab.flows import FlowTolerances
from splitlab.grid import GridField, build_grid, gradient_max
from splitlab.kpp import WaveParameters, kpp_wave_profile, zeldovich_model
from splitlab.splitting import SchemeId


def synthetic_report(dts, errs) -> ErrorStudyReport:
    rows = [StudyRow(dt, err, err, None) for dt, err in zip(dts, errs)]
    return ErrorStudyReport(SchemeId.L1, rows)


class TestFitSlope:
    def test_exact_square_law(self):
        dts = np.logspace(-3, -1, 7)
        report = synthetic_report(dts, 7.0 * dts**2)
        assert fit_slope(report, (1e-4, 1.0)) == pytest.approx(2.0, abs=1e-12)

    def test_cubic_with_noise(self):
        dts = np.logspace(-2, -1, 9)
        rng = np.random.default_rng(1)
        errs = dts**3 + 1e-12 * rng.uniform(0.5, 1.0, dts.size)
        report = synthetic_report(dts, errs)
        assert fit_slope(report, (0.0, 1.0)) == pytest.approx(3.0, abs=0.01)

    def test_window_restricts_rows(self):
        dts = np.array([1e-3, 1e-2, 1e-1, 1.0])
        report = synthetic_report(dts, dts**2)
        with pytest.raises(ValueError, match="3 valid rows"):
            fit_slope(report, (0.05, 1.0))

    def test_invalid_rows_excluded(self):
        dts = np.logspace(-3, -1, 5)
        rows = [StudyRow(dt, dt**2, dt**2, None) for dt in dts[:2]]
        rows += [StudyRow(dt, math.nan, math.nan, None, "failed: x")
                 for dt in dts[2:]]
        with pytest.raises(ValueError):
            fit_slope(ErrorStudyReport(SchemeId.S1, rows), (0.0, 1.0))


class TestEvaluateBounds:
    def setup_method(self):
        self.grid = build_grid(-70.0, 70.0, 5001)
        self.u0 = kpp_wave_profile(self.grid, WaveParameters(1.0, 1.0))
        self.model = zeldovich_model(1.0)

    def test_reference_classical_value(self):
        # (dt^2/2) e^(2*0.01*5) * 8 * (1/32) with the grid gradient
        b = evaluate_bounds(SchemeId.L1, 0.01, self.model, 1.0, self.u0)
        gm = gradient_max(self.u0)
        expected = (0.01**2 / 2) * math.exp(2 * 0.01 * 5.0) * 8.0 * gm**2
        assert b.classical == pytest.approx(expected, rel=1e-12)
        assert b.classical == pytest.approx(1.381e-5, rel=1e-3)

    def test_scheme_population(self):
        for scheme, populated in [
            (SchemeId.L1, ("classical", "alt_15")),
            (SchemeId.L2, ("classical", "alt_15", "alt_1")),
            (SchemeId.S1, ("strang_classical", "strang_alt")),
            (SchemeId.S2, ("strang_classical", "strang_alt")),
        ]:
            b = evaluate_bounds(scheme, 0.1, self.model, 1.0, self.u0)
            for name in ("classical", "alt_15", "alt_1", "strang_classical",
                         "strang_alt"):
                value = getattr(b, name)
                if name in populated:
                    assert np.isfinite(value) and value > 0
                else:
                    assert value == math.inf
            assert b.effective == min(getattr(b, n) for n in populated)

    def test_classical_wins_as_dt_vanishes(self):
        b = evaluate_bounds(SchemeId.L1, 1e-6, self.model, 1.0, self.u0)
        assert b.effective == b.classical
        assert b.classical < 1e-3 * b.alt_15

    def test_alternative_wins_at_large_dt(self):
        # L1's order-1.5 bound carries exp(kt||f'||) against the classical
        # exp(2kt||f'||), so it takes over once kt||f'|| is order one
        b = evaluate_bounds(SchemeId.L1, 2.0, self.model, 1.0, self.u0)
        assert b.alt_15 < 1e-3 * b.classical
        assert b.effective == b.alt_15

    def test_linear_reaction_zeroes_every_bound(self):
        model = linear_model(0.7, k=2.0)
        u0 = smooth_field(self.grid, [0.5, 0.2])
        for scheme in SchemeId:
            b = evaluate_bounds(scheme, 0.3, model, 1.0, u0)
            assert b.effective == 0.0

    def test_monotone_in_dt(self):
        for scheme in SchemeId:
            prev = None
            for dt in np.logspace(-4, 0.5, 12):
                b = evaluate_bounds(scheme, dt, self.model, 1.0, self.u0)
                vals = (b.classical, b.alt_15, b.alt_1, b.strang_classical,
                        b.strang_alt)
                if prev is not None:
                    assert all(v >= p for v, p in zip(vals, prev))
                prev = vals

    def test_stale_sup_norms_rejected(self):
        from splitlab.kpp import derivative_sup_norms
        sup = derivative_sup_norms(self.model, 1.0)
        big = GridField(self.grid, np.full(5001, 2.0))
        with pytest.raises(ValueError, match="kappa"):
            evaluate_bounds(SchemeId.L1, 0.1, self.model, 1.0, big,
                            sup_norms=sup)

    def test_dt_must_be_positive(self):
        with pytest.raises(ValueError):
            evaluate_bounds(SchemeId.L1, 0.0, self.model, 1.0, self.u0)


class TestLieBracketField:
    def test_constant_field(self, unit_grid):
        u = GridField(unit_grid, np.full(101, 0.4))
        out = lie_bracket_field(zeldovich_model(1.0), u, 1.0)
        assert np.max(np.abs(out.values)) == 0.0

    def test_linear_reaction(self, unit_grid):
        u = smooth_field(unit_grid, [0.5, -0.2])
        out = lie_bracket_field(linear_model(2.0), u, 1.0)
        assert np.max(np.abs(out.values)) == 0.0

    def test_peak_against_analytic_profile(self):
        # peak of |f''(u) u'(x)^2| along the logistic wave, with the
        # analytic derivative u' = -u(1-u)/sqrt(2)
        g = build_grid(-70.0, 70.0, 5001)
        u0 = kpp_wave_profile(g, WaveParameters(1.0, 1.0))
        out = lie_bracket_field(zeldovich_model(1.0), u0, 1.0)
        uu = np.linspace(0.0, 1.0, 400001)
        analytic_peak = np.max(np.abs((2.0 - 6.0 * uu)
                                      * (uu * (1.0 - uu)) ** 2 / 2.0))
        assert np.max(np.abs(out.values)) == pytest.approx(analytic_peak,
                                                           rel=1e-2)

    def test_kd_scaling(self):
        g = build_grid(-70.0, 70.0, 5001)
        u0 = kpp_wave_profile(g, WaveParameters(1.0, 1.0))
        one = lie_bracket_field(zeldovich_model(1.0), u0, 1.0).values
        scaled = lie_bracket_field(zeldovich_model(3.0), u0, 0.5).values
        assert scaled == pytest.approx(1.5 * one, rel=1e-12)


class TestLeadingTermCheck:
    def test_linear_reaction_vanishes(self, unit_grid):
        u0 = smooth_field(unit_grid, [0.3, 0.1], offset=0.2)
        tol = 1e-8
        out = leading_term_check(u0, [0.002, 0.004], linear_model(1.0), 1.0, tol)
        for _, dev in out:
            assert dev <= 10 * tol

    def test_zero_dt(self, unit_grid):
        u0 = smooth_field(unit_grid, [0.3], offset=0.2)
        out = leading_term_check(u0, [0.0], zeldovich_model(1.0), 1.0, 1e-8)
        assert out == [(0.0, 0.0)]

    def test_outside_asymptotic_regime_rejected(self, unit_grid):
        u0 = smooth_field(unit_grid, [0.3], offset=0.2)
        with pytest.raises(ValueError, match="asymptotic"):
            leading_term_check(u0, [0.1], zeldovich_model(1.0), 1.0, 1e-8)


class TestWaveSpeedEstimate:
    def test_exact_synthetic_translation(self):
        # shifts chosen as exact node multiples: interpolation bias cancels
        g = build_grid(-70.0, 70.0, 5001)
        c = 10.0 * g.dx
        snaps = [(float(i), kpp_wave_profile(g, WaveParameters(1, 1, x0=c * i)))
                 for i in range(6)]
        assert wave_speed_estimate(snaps, 0.5) == pytest.approx(c, abs=1e-10)

    def test_no_crossing_rejected(self, unit_grid):
        flat = GridField(unit_grid, np.zeros(101))
        with pytest.raises(ValueError, match="never crosses"):
            wave_speed_estimate([(0.0, flat), (1.0, flat)], 0.5)

    def test_multiple_crossings_rejected(self):
        g = build_grid(0.0, 1.0, 201)
        wiggle = GridField(g, 0.5 + 0.4 * np.sin(6 * np.pi * g.nodes()))
        with pytest.raises(ValueError, match="more than once"):
            wave_speed_estimate([(0.0, wiggle), (1.0, wiggle)], 0.5)

    def test_needs_two_snapshots(self, unit_grid):
        u = GridField(unit_grid, np.linspace(1, 0, 101))
        with pytest.raises(ValueError, match="2 snapshots"):
            wave_speed_estimate([(0.0, u)], 0.5)

    def test_front_location_interpolates(self):
        g = build_grid(0.0, 1.0, 11)
        u = GridField(g, 1.0 - g.nodes())
        assert front_location(u, 0.25) == pytest.approx(0.75, abs=1e-14)


class TestLocalErrorStudy:
    def setup_method(self):
        self.grid = build_grid(-20.0, 20.0, 401)
        self.u0 = kpp_wave_profile(self.grid, WaveParameters(2.0, 0.5))
        self.model = zeldovich_model(2.0)
        self.tol_split = FlowTolerances(abs_tol=1e-8, rel_tol=1e-8)
        self.tol_ref = FlowTolerances(abs_tol=1e-10, rel_tol=1e-10)

    def test_exact_splitting_for_zero_reaction(self):
        reports = local_error_study(self.u0, [0.01, 0.1], list(SchemeId),
                                    zero_model(), 1.0,
                                    self.tol_split, self.tol_ref)
        budget = 10 * (self.tol_split.abs_tol + self.tol_ref.abs_tol)
        for report in reports:
            for row in report.rows:
                assert row.valid
                assert row.err_linf <= budget

    def test_rows_sorted_with_bounds_and_domination(self):
        dts = [0.16, 0.01, 0.04]
        reports = local_error_study(self.u0, dts, [SchemeId.L1, SchemeId.S2],
                                    self.model, 0.5,
                                    self.tol_split, self.tol_ref)
        assert [r.scheme for r in reports] == [SchemeId.L1, SchemeId.S2]
        for report in reports:
            assert [row.dt for row in report.rows] == sorted(dts)
            for row in report.rows:
                assert row.valid
                assert row.err_l2 > 0
                assert row.bounds is not None
                assert row.err_linf <= row.bounds.effective

    def test_failed_rows_marked_not_raised(self):
        crippled = FlowTolerances(abs_tol=1e-8, rel_tol=1e-8, max_substeps=1)
        reports = local_error_study(self.u0, [0.5], [SchemeId.S1],
                                    self.model, 0.5, crippled, self.tol_ref)
        row = reports[0].rows[0]
        assert not row.valid
        assert "failed" in row.status
        assert math.isnan(row.err_l2)

    def test_tolerance_separation_enforced(self):
        with pytest.raises(ValueError, match="100x"):
            local_error_study(self.u0, [0.01], [SchemeId.L1], self.model,
                              0.5, 1e-8, 1e-9)

    def test_thread_count_does_not_change_results(self, monkeypatch):
        kwargs = dict(dt_list=[0.01, 0.02, 0.04], schemes=[SchemeId.L2],
                      model=self.model, D=0.5, tol_split=self.tol_split,
                      tol_ref=self.tol_ref)
        serial = local_error_study(self.u0, **kwargs)
        monkeypatch.setenv("SPLITLAB_THREADS", "3")
        threaded = local_error_study(self.u0, **kwargs)
        for a, b in zip(serial[0].rows, threaded[0].rows):
            assert a.err_l2 == b.err_l2 and a.err_linf == b.err_linf

    def test_bad_thread_setting_rejected(self, monkeypatch):
        monkeypatch.setenv("SPLITLAB_THREADS", "zero")
        with pytest.raises(ValueError, match="SPLITLAB_THREADS"):
            local_error_study(self.u0, [0.01], [SchemeId.L1], self.model,
                              0.5, self.tol_split, self.tol_ref)


class TestGlobalErrorStudy:
    def setup_method(self):
        self.grid = build_grid(-20.0, 20.0, 401)
        self.u0 = kpp_wave_profile(self.grid, WaveParameters(2.0, 0.5))
        self.model = zeldovich_model(2.0)
        self.tol_split = FlowTolerances(abs_tol=1e-8, rel_tol=1e-8)
        self.tol_ref = FlowTolerances(abs_tol=1e-10, rel_tol=1e-10)

    def test_single_step_matches_local_study(self):
        dt = 0.05
        local = local_error_study(self.u0, [dt], [SchemeId.S2], self.model,
                                  0.5, self.tol_split, self.tol_ref)[0]
        glob = global_error_study(self.u0, [dt], SchemeId.S2, dt, self.model,
                                  0.5, self.tol_split, self.tol_ref)
        assert glob.rows[0].err_l2 == local.rows[0].err_l2
        assert glob.rows[0].err_linf == local.rows[0].err_linf
        assert glob.t_eval == dt
        assert glob.rows[0].bounds is None

    def test_multi_step_rows(self):
        report = global_error_study(self.u0, [0.05, 0.1, 0.2], SchemeId.S2,
                                    0.4, self.model, 0.5,
                                    self.tol_split, self.tol_ref)
        assert all(row.valid for row in report.rows)
        assert [row.dt for row in report.rows] == [0.05, 0.1, 0.2]
        assert report.rows[0].err_l2 < report.rows[2].err_l2

    def test_non_divisor_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            global_error_study(self.u0, [0.3], SchemeId.S2, 1.0, self.model,
                               0.5, self.tol_split, self.tol_ref)
