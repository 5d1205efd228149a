import math

import numpy as np
import pytest

from conelab import jacobi as J
from conelab import profile as P

# frozen reference values for (m, n) = (4, 4), s_max = 200, tol = 1e-10
WRONSKIAN = -1.08376       # after v_minus normalization; drift is the invariant
C_PLUS = 0.81803           # u_plus ~ c_plus e^{t/2}
C_LAMBDA = 0.73622         # u_plus ~ c_lambda e^{t},  t -> -inf
ESTIMATE_RATIO = 0.52469   # ||q||_{inf,1} / ||f||_{inf,3} for the test forcing


class TestFrame:
    def test_alpha_tilde_limits(self, frame44):
        # n-2 at the axis, N-2 at the cone
        lo = frame44.alpha_tilde_eval(np.array([-8.0]))[0]
        hi = frame44.alpha_tilde_eval(np.array([5.0]))[0]
        assert abs(lo - 2.0) < 1e-6
        assert abs(hi - 5.0) < 0.05

    def test_potential_limits(self, frame44):
        # V -> -(n-2)^2/4 = -1 at -inf and -Lambda^2 = -1/4 at +inf
        assert abs(frame44.V_eval(np.array([-8.0]))[0] + 1.0) < 0.01
        assert abs(frame44.V_eval(np.array([5.0]))[0] + 0.25) < 0.02

    def test_integrating_factor_ode(self, frame44):
        # p solves 2 p' + alpha_tilde p = 0 above T0 (below, the quadrature
        # intentionally uses the smooth matched continuation of alpha_tilde)
        t = np.arange(-3.0, 4.0, 0.002)
        p = frame44.p_eval(t)
        h = 0.002
        dp = (-p[4:] + 8.0 * p[3:-1] - 8.0 * p[1:-3] + p[:-4]) / (12.0 * h)
        res = 2.0 * dp + frame44.alpha_tilde_eval(t[2:-2]) * p[2:-2]
        assert np.max(np.abs(res) / p[2:-2]) < 1e-8

    def test_p_normalized_at_zero(self, frame44):
        assert abs(frame44.p_eval(np.array([0.0]))[0] - 1.0) < 1e-14

    def test_grid_consistency(self, frame44):
        assert np.allclose(frame44.V, frame44.V_eval(frame44.t_grid),
                           rtol=0, atol=1e-12)
        assert np.all(frame44.p > 0.0)

    def test_t_range_validation(self, coefs44):
        with pytest.raises(ValueError):
            J.build_ef_frame(coefs44, t_range=(-20.0, 3.0))
        with pytest.raises(ValueError):
            J.build_ef_frame(coefs44, t_range=(0.0, math.log(200.0)))

    def test_round_trip(self, frame44):
        s = np.array([0.01, 1.0, 37.5, 150.0])
        assert np.max(np.abs(np.exp(np.log(s)) - s) / s) < 1e-12


class TestFieldPlus:
    def test_value_at_zero(self, curve44):
        v = J.jacobi_field_plus(curve44)
        # a b' - a' b -> a(0) sin(theta(0)) = 1 (spline continuation to 0)
        assert abs(v(0.0) - 1.0) < 1e-5
        assert np.all(v.y > 0.0)

    def test_ode_residual(self, pair44):
        s, res = J.field_residual(pair44, which="plus")
        assert np.max(np.abs(res)) < 1e-6
        # invariant bound |res| < 1e-4 (1+s)^{-2}
        assert np.max(np.abs(res) * (1.0 + s) ** 2) < 1e-4

    def test_tail_slope(self, pair44):
        # v_plus ~ s^{gamma_+} = s^{-2}
        v = pair44.v_plus
        slope = (math.log(v(190.0)) - math.log(v(120.0))) \
            / (math.log(190.0) - math.log(120.0))
        assert abs(slope - (-2.0)) < 0.05

    def test_u_plus_log_slopes(self, pair44):
        # d log(u_plus)/dt -> lambda = 1 at -inf and Lambda = 1/2 at +inf
        g = pair44.u_plus_grid
        for t0, target in [(-15.0, 1.0), (4.5, 0.5)]:
            slope = (math.log(g(t0 + 0.5)) - math.log(g(t0 - 0.5)))
            assert abs(slope - target) / target < 0.02

    def test_fitted_coefficients(self, pair44):
        assert abs(pair44.c_plus - C_PLUS) < 5e-3
        assert abs(pair44.c_lambda - C_LAMBDA) < 5e-3

    def test_eval_branches_match(self, pair44):
        # the tail continuation joins the grid branch continuously
        T = pair44.frame.t_grid[-1]
        lo = pair44.u_plus_eval(np.array([T - 1e-6]))[0]
        hi = pair44.u_plus_eval(np.array([T + 1e-6]))[0]
        assert abs(hi - lo) / lo < 5e-3


class TestFieldMinus:
    def test_normalization(self, pair44):
        # v_minus s^{n-2} -> 1 at the axis
        s = np.array([1e-6, 1e-5, 1e-4])
        vals = pair44.v_minus(s) * s**2
        assert np.max(np.abs(vals - 1.0)) < 1e-3

    def test_near_axis_slope(self, pair44):
        v = pair44.v_minus
        slope = (math.log(v(0.05)) - math.log(v(0.03))) \
            / (math.log(0.05) - math.log(0.03))
        assert abs(slope - (-2.0)) < 0.05

    def test_tail_slope(self, pair44):
        v = pair44.v_minus
        slope = (math.log(v(70.0)) - math.log(v(30.0))) \
            / (math.log(70.0) - math.log(30.0))
        assert abs(slope - (-3.0)) < 0.1

    def test_c2_reported(self, pair44):
        assert np.isfinite(pair44.c2) and pair44.c2 > 0.0

    def test_wronskian_constancy(self, pair44):
        W = pair44._wronskian_samples
        # drift over the middle 90% of the grid (spline edges excluded)
        k = W.size // 20
        core = W[k:-k]
        assert np.ptp(core) < 1e-6
        assert abs(pair44.wronskian - WRONSKIAN) < 1e-3
        assert pair44.wronskian < 0.0

    def test_ode_residual(self, pair44):
        s, res = J.field_residual(pair44, which="minus")
        assert np.max(np.abs(res) * (1.0 + s) ** 2) < 1e-4

    def test_positive_u_plus_required(self, frame44, pair44):
        t = pair44.u_plus_grid.x
        bad = J.SampledFunction(x=t, y=pair44.u_plus_grid.y - 1.0)
        with pytest.raises(J.NumericalFailureError):
            J.jacobi_field_minus(frame44, bad)


def forcing(s):
    return (s * s + 2.0) ** -1.5


@pytest.fixture(scope="module")
def sol44(pair44):
    return J.solve_jacobi(forcing, 1.0, pair44)


class TestSolve:
    def test_zero_forcing(self, pair44):
        sol = J.solve_jacobi(lambda s: np.zeros_like(s), 1.0, pair44)
        assert np.max(np.abs(sol.q)) == 0.0
        assert sol.estimate_ratio == 0.0

    def test_estimate_ratio(self, sol44):
        assert abs(sol44.norm_f - 1.0) < 1e-14
        assert abs(sol44.estimate_ratio - ESTIMATE_RATIO) < 5e-3

    def test_plugback_residual(self, sol44, pair44):
        ti, _, res_s = J.ef_ode_residual(pair44.frame, sol44.t, sol44.u,
                                         f_tilde=None)
        si = np.exp(ti)
        rel = (res_s - forcing(si)) * (si * si + 2.0) ** 1.5
        assert np.max(np.abs(rel)) < 1e-5

    def test_refinement_stability(self, pair44, sol44):
        for dt in (0.004, 0.001):
            other = J.solve_jacobi(forcing, 1.0, pair44, dt=dt)
            assert abs(other.estimate_ratio - sol44.estimate_ratio) \
                / sol44.estimate_ratio < 0.1

    def test_linearity(self, pair44, sol44):
        sol3 = J.solve_jacobi(lambda s: 3.0 * forcing(s), 1.0, pair44)
        qa = sol3.q_eval(np.array([0.5, 2.0, 40.0]))
        qb = sol44.q_eval(np.array([0.5, 2.0, 40.0]))
        assert np.max(np.abs(qa - 3.0 * qb) / np.abs(qa)) < 1e-12

    def test_axis_decay(self, sol44):
        # q ~ s^2 at the axis: halving s quarters q
        ratio = sol44.q_eval(np.array([0.04]))[0] / sol44.q_eval(np.array([0.02]))[0]
        assert abs(ratio - 4.0) < 0.05

    def test_rejects_bad_input(self, pair44):
        with pytest.raises(ValueError):
            J.solve_jacobi(forcing, 0.0, pair44)
        with pytest.raises(ValueError):
            J.solve_jacobi(lambda s: np.where(s > 1.0, np.inf, 1.0), 1.0, pair44)


class TestWeightedNorm:
    S = np.linspace(0.0, 100.0, 5001)

    def test_zero(self):
        spec = J.WeightedNorm("inf_mu", mu=2.0)
        assert J.weighted_norm(self.S, np.zeros_like(self.S), spec) == 0.0

    def test_unit_profile(self):
        # f = (s^2+2)^{-mu/2} has norm exactly 1
        for mu in (0.5, 1.0, 3.0):
            f = (self.S**2 + 2.0) ** (-mu / 2.0)
            spec = J.WeightedNorm("inf_mu", mu=mu)
            assert abs(J.weighted_norm(self.S, f, spec) - 1.0) < 1e-12

    def test_constant(self):
        spec = J.WeightedNorm("inf_mu", mu=2.0)
        val = J.weighted_norm(self.S, np.ones_like(self.S), spec)
        assert abs(val - (100.0**2 + 2.0)) < 1e-9

    def test_homogeneity(self, rng):
        f = rng.normal(size=self.S.size)
        spec = J.WeightedNorm("holder_mu", mu=1.0, holder_beta=0.5)
        n1 = J.weighted_norm(self.S, f, spec)
        n2 = J.weighted_norm(self.S, 2.5 * f, spec)
        assert abs(n2 - 2.5 * n1) < 1e-10 * n1

    def test_holder_exceeds_sup(self):
        f = np.sin(self.S)
        sup = J.weighted_norm(self.S, f, J.WeightedNorm("inf_mu", mu=1.0))
        hol = J.weighted_norm(self.S, f, J.WeightedNorm("holder_mu", mu=1.0))
        assert hol > sup

    def test_validation(self):
        with pytest.raises(ValueError):
            J.WeightedNorm("l2_mu", mu=1.0)
        with pytest.raises(ValueError):
            J.WeightedNorm("inf_mu", mu=-1.0)
        with pytest.raises(ValueError):
            J.WeightedNorm("holder_mu", mu=1.0, holder_beta=1.5)


@pytest.mark.parametrize("m,n", [(3, 5), (5, 4)])
def test_dimension_sweep(m, n):
    curve = P.integrate_profile(P.make_params(m, n), s_max=150.0, tol=5e-10)
    frame = J.build_ef_frame(P.coefficients(curve))
    pair = J.build_jacobi_pair(curve, frame)
    p_ = curve.params
    s, res = J.field_residual(pair, which="plus")
    assert np.max(np.abs(res) * (1.0 + s) ** 2) < 2e-4
    s, res = J.field_residual(pair, which="minus")
    assert np.max(np.abs(res) * (1.0 + s) ** 2) < 2e-4
    k = pair._wronskian_samples.size // 20
    assert np.ptp(pair._wronskian_samples[k:-k]) < 2e-6
    v = pair.v_minus
    slope = (math.log(v(0.05)) - math.log(v(0.03))) \
        / (math.log(0.05) - math.log(0.03))
    assert abs(slope + (p_.n - 2.0)) < 0.1
    sol = J.solve_jacobi(forcing, 1.0, pair)
    assert 0.0 < sol.estimate_ratio < 10.0
