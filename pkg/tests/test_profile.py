import math

import numpy as np
import pytest

from conelab import profile as P


class TestParams:
    def test_44(self):
        p = P.make_params(4, 4)
        assert p.N == 7
        assert p.gamma_plus == -2.0
        assert p.gamma_minus == -3.0
        assert p.Lam == 0.5
        assert p.lam == 1.0
        assert p.c0 == 5.25
        assert abs(p.stability_gap - 0.25) < 1e-15

    def test_35(self):
        p = P.make_params(3, 5)
        assert p.N == 7
        assert p.gamma_plus == -2.0 and p.gamma_minus == -3.0
        assert abs(p.c0 - 2.8) < 1e-14

    def test_pythagoras(self):
        for m, n in [(4, 4), (3, 5), (5, 3), (4, 5), (6, 7)]:
            p = P.make_params(m, n)
            assert abs(p.rho_m**2 + p.rho_n**2 - 1.0) < 1e-15
            assert p.gamma_plus < 0.0 and p.gamma_minus < p.gamma_plus
            # gamma^2 + (N-2) gamma + (N-1) = 0 for both roots
            for g in (p.gamma_plus, p.gamma_minus):
                assert abs(g * g + (p.N - 2) * g + (p.N - 1)) < 1e-12

    def test_rejects_low_dimensions(self):
        for m, n in [(3, 4), (4, 3), (2, 8), (8, 2)]:
            with pytest.raises(P.UnsupportedDimensionError):
                P.make_params(m, n)


class TestCurve:
    def test_initial_data(self, curve44):
        a, b, theta, k = curve44.eval(np.array([0.0]))
        assert a[0] == 1.0 and b[0] == 0.0
        assert abs(theta[0] - math.pi / 2) < 1e-15
        assert abs(k[0] + 0.75) < 1e-12          # k(0+) = -(m-1)/n

    def test_a_second_derivative_at_zero(self, curve44):
        # a''(0) = (m-1)/n from the launch series
        s = np.array([1e-4, 2e-4, 3e-4])
        a = curve44.eval(s)[0]
        app = (a[2] - 2 * a[1] + a[0]) / 1e-8
        assert abs(app - 0.75) < 1e-4

    def test_arclength_identity(self, curve44):
        (ct, st), _ = curve44.tangent_normal(curve44.s_grid)
        assert np.max(np.abs(ct**2 + st**2 - 1.0)) < 1e-13

    def test_cone_direction_limits(self, curve44):
        # a' -> rho_m = sqrt((m-1)/(N-1)) = 1/sqrt2 for (4,4); confirmed by
        # the exact-cone minimality check in TestMeanCurvature
        (ct, st), _ = curve44.tangent_normal(np.array([200.0]))
        p = curve44.params
        assert abs(ct[0] - p.rho_m) < 1e-3
        assert abs(st[0] - p.rho_n) < 1e-3

    def test_positivity_and_ray_transversality(self, curve44):
        c = curve44
        assert np.all(c.a > 0) and np.all(c.b > 0)
        (ct, st), _ = c.tangent_normal(c.s_grid)
        assert np.all(c.a * st - ct * c.b > 0)    # a b' - a' b > 0

    def test_validation(self):
        p = P.make_params(4, 4)
        with pytest.raises(ValueError):
            P.integrate_profile(p, s_max=5.0)
        with pytest.raises(ValueError):
            P.integrate_profile(p, tol=1e-3)


class TestMeanCurvature:
    def test_integrated_residual(self, curve44):
        assert P.mean_curvature_residual(curve44) < 1e-7

    def test_exact_cone(self):
        p = P.make_params(4, 4)
        s = np.arange(1.0, 50.0, 0.01)
        a, b = p.rho_m * s, p.rho_n * s
        _, H = P.mean_curvature_from_samples(p, s, a, b)
        assert np.max(np.abs(H)) < 1e-9

    def test_detector_sensitivity(self, curve44):
        p = curve44.params
        s = np.arange(curve44.s0, 50.0, 0.01)
        a, b, _ = curve44.dense_eval(s)
        _, H = P.mean_curvature_from_samples(p, s, a * (1.0 + 1e-3), b)
        assert np.max(np.abs(H)) > 1e-4


class TestCoefficients:
    def test_beta_at_zero(self, coefs44):
        assert abs(coefs44.beta_eval(np.array([1e-4]))[0] - 5.25) < 1e-3

    def test_beta_tail(self, coefs44):
        val = coefs44.beta_eval(np.array([100.0]))[0] * 100.0**2
        assert abs(val - 6.0) < 0.12              # N-1 = 6 within 2%

    def test_alpha_pole(self, coefs44):
        val = coefs44.alpha_eval(np.array([0.01]))[0] * 0.01
        assert abs(val - 3.0) < 1e-3               # n-1 = 3

    def test_alpha_tail(self, coefs44):
        val = coefs44.alpha_eval(np.array([150.0]))[0] * 150.0
        assert abs(val - 6.0) < 0.05

    def test_beta_monotone_decreasing(self, coefs44):
        assert np.all(np.diff(coefs44.beta) < 0.0)

    def test_even_extension_consistency(self, curve44, coefs44):
        # beta, k and alpha*s all have vanishing odd-order s -> 0 derivative:
        # symmetric difference of the series continuation is flat at 0
        s = np.array([1e-3, 2e-3])
        b1, b2 = coefs44.beta_eval(s)
        assert abs(b2 - b1) < 1e-4                # slope -> 0 at the axis
        k1 = curve44.eval(np.array([1e-3]))[3][0]
        k2 = curve44.eval(np.array([2e-3]))[3][0]
        assert abs(k2 - k1) < 1e-4


class TestConeFit:
    def test_sign_and_slope(self, curve44):
        fit = P.fit_cone_asymptotics(curve44, (50.0, 200.0))
        p = curve44.params
        d = p.rho_m * curve44.b - p.rho_n * curve44.a
        window = (curve44.s_grid >= 50.0) & (curve44.s_grid <= 200.0)
        sgn = np.sign(d[window])
        assert np.all(sgn == sgn[0])              # constant-sign deviation
        assert abs(fit.loglog_slope - (-2.0)) < 0.05

    def test_window_self_consistency(self, curve44):
        full = P.fit_cone_asymptotics(curve44, (50.0, 200.0))
        half = P.fit_cone_asymptotics(curve44, (100.0, 200.0))
        assert abs(half.c1 - full.c1) / abs(full.c1) < 0.05

    def test_residual_decreases_outward(self, curve44):
        inner = P.fit_cone_asymptotics(curve44, (50.0, 100.0))
        outer = P.fit_cone_asymptotics(curve44, (100.0, 200.0))
        assert outer.residual_norm < inner.residual_norm

    def test_bad_window(self, curve44):
        with pytest.raises(P.FitFailureError):
            P.fit_cone_asymptotics(curve44, (10.0, 20.0))


@pytest.mark.parametrize("m,n", [(4, 4), (3, 5), (5, 3), (4, 5)])
def test_dimension_sweep_invariants(m, n):
    p = P.make_params(m, n)
    curve = P.integrate_profile(p, s_max=120.0, tol=1e-9, n_samples=2500)
    coefs = P.coefficients(curve)
    (ct, st), _ = curve.tangent_normal(curve.s_grid)
    assert np.max(np.abs(ct**2 + st**2 - 1.0)) < 1e-8
    assert np.all(curve.a * st - ct * curve.b > 0)
    assert np.all(np.diff(coefs.beta) < 0.0)
    assert np.all(coefs.beta > 0.0)
    assert abs(coefs.beta_eval(np.array([1e-4]))[0] - p.c0) < 1e-2
    assert P.mean_curvature_residual(curve) < 1e-6


def test_csv_dump(curve44, coefs44, tmp_path):
    path = tmp_path / "profile.csv"
    P.dump_profile(curve44, coefs44, path)
    first = path.read_text().splitlines()[0]
    assert first == "s,a,b,theta,k,alpha,beta"
