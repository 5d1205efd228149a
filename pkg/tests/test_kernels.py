import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, simpson
from scipy.special import lambertw as scipy_lambertw

from conelab import kernels as K

SQRT2 = math.sqrt(2.0)

# frozen oracle values
W1 = 0.5671432904097838            # root of w e^w = 1 (Halley fixed point)
L2_VPRIME = 2.0 * SQRT2 / 3.0      # integral of sech^4(u)/sqrt2 dt, closed form
A_STAR = 12.0 * SQRT2              # 16/(2 sqrt2/3); numerator reduces to
                                   # 48*B(3,1) = 48/3 = 16 via x = e^{-2u}


class TestHeteroclinic:
    def test_at_zero(self):
        v, dv, ddv = K.heteroclinic_eval(0.0)
        assert v == 0.0
        assert abs(dv - 1.0 / SQRT2) < 1e-15
        assert ddv == 0.0

    def test_limits(self):
        v, dv, _ = K.heteroclinic_eval(20.0)
        # 1 - tanh(20/sqrt2) = 2 e^{-20 sqrt2} = 1.04e-12
        assert abs(v - 1.0) < 1.1e-12
        # dv(20) = sqrt2 e^{-20 sqrt2} (1 + o(1)) = 1.47e-12
        assert abs(dv) < 2e-12
        assert dv > 0.0

    def test_library_oracle(self):
        v, _, _ = K.heteroclinic_eval(SQRT2)
        assert abs(v - math.tanh(1.0)) < 1e-15

    def test_ode_identity_bulk(self, rng):
        t = rng.uniform(-30.0, 30.0, size=1_000_000)
        v, dv, ddv = K.heteroclinic_eval(t)
        assert np.max(np.abs(ddv + v - v**3)) < 1e-12
        assert np.all(dv > 0.0)

    def test_odd_symmetry(self, rng):
        t = rng.uniform(0.0, 30.0, size=1000)
        vp = K.heteroclinic_eval(t)[0]
        vm = K.heteroclinic_eval(-t)[0]
        assert np.max(np.abs(vp + vm)) == 0.0

    def test_strictly_increasing(self):
        # strict in exact arithmetic; sampled where tanh has not saturated
        t = np.linspace(-15, 15, 5001)
        v = K.heteroclinic_eval(t)[0]
        assert np.all(np.diff(v) > 0.0)


class TestLambertW:
    def test_trivial_points(self):
        assert K.lambert_w(0.0) == 0.0
        assert abs(K.lambert_w(math.e) - 1.0) < 1e-14

    def test_fixed_point_oracle(self):
        w = K.lambert_w(1.0)
        assert abs(w - W1) < 1e-13
        assert abs(w * math.exp(w) - 1.0) < 1e-14

    def test_scipy_oracle(self):
        z = np.array([0.5, 2.0, 10.0, 1e3, 1e6, 1e8])
        mine = K.lambert_w(z)
        ref = np.real(scipy_lambertw(z))
        assert np.max(np.abs(mine - ref) / (1.0 + np.abs(ref))) < 1e-13

    def test_identity_bulk(self, rng):
        z = rng.uniform(0.0, 1e8, size=10_000)
        w = K.lambert_w(z)
        assert np.all(np.abs(w * np.exp(w) - z) <= 1e-13 * np.maximum(1.0, z))
        assert np.all(w >= 0.0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            K.lambert_w(-0.1)

    def test_monotone(self):
        z = np.linspace(0.0, 100.0, 10_001)
        w = K.lambert_w(z)
        assert np.all(np.diff(w) > 0.0)

    def test_derivative_bound(self):
        # |W'(z)| <= C/(1+z) with one global C over [0, 1e6]
        z = np.concatenate([np.linspace(0.0, 10.0, 2000),
                            np.geomspace(10.0, 1e6, 2000)])
        h = 1e-4 * (1.0 + z)
        wp = (K.lambert_w(z + h) - K.lambert_w(np.maximum(z - h, 0.0))) / (
            h + np.minimum(z, h))
        assert np.max(np.abs(wp) * (1.0 + z)) < 1.5

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1e8, allow_nan=False))
    def test_identity_property(self, z):
        w = K.lambert_w(z)
        assert abs(w * math.exp(w) - z) <= 1e-13 * max(1.0, z)


class TestInteractionConstant:
    def test_values(self, interaction_constant):
        c = interaction_constant
        assert abs(c.l2_vprime_sq - L2_VPRIME) < 1e-10
        assert abs(c.a_star - A_STAR) < 1e-10
        assert c.a_star > 0.0

    def test_definition_consistency(self, interaction_constant):
        c = interaction_constant
        # two independent quadratures agree: a_star * ||v'||^2 = numerator
        num2, _ = quad(lambda t: 6.0 * (1.0 - math.tanh(t / SQRT2) ** 2)
                       * math.exp(-SQRT2 * t)
                       * K.heteroclinic_eval(t)[1], -30.0, 50.0, limit=200)
        assert abs(c.a_star * c.l2_vprime_sq - num2) < 1e-9
        assert abs(c.numerator - 16.0) < 1e-10

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            K.compute_a_star(1e-3)


class TestCorrectionKernels:
    def test_vanish_at_origin(self, correction_kernels):
        k = correction_kernels
        i0 = k.t.size // 2
        assert k.t[i0] == 0.0
        assert abs(k.psi0[i0]) < 1e-12
        assert abs(k.psi1[i0]) < 1e-12
        assert abs(k.psi2[i0]) < 1e-12

    def test_psi1_closed_form(self, correction_kernels):
        k = correction_kernels
        _, dv, _ = K.heteroclinic_eval(k.t)
        assert np.array_equal(k.psi1, k.t * dv / 2.0)

    def test_psi1_ode_residual_analytic(self, correction_kernels):
        # second derivative of t v'/2 differentiated in closed form:
        # psi1'' = v'' + t (3 v^2 - 1) v' / 2, so L[psi1] = v'' exactly
        k = correction_kernels
        v, dv, ddv = K.heteroclinic_eval(k.t)
        psi1_dd = ddv + k.t * (3.0 * v * v - 1.0) * dv / 2.0
        res = psi1_dd + (1.0 - 3.0 * v * v) * k.psi1 - ddv
        assert np.max(np.abs(res)) < 1e-10

    def test_ode_residuals_fd(self, correction_kernels):
        k = correction_kernels
        h = k.t[1] - k.t[0]
        v, dv, ddv = K.heteroclinic_eval(k.t)
        pot = 1.0 - 3.0 * v * v
        for psi, rhs in [(k.psi0, k.g0), (k.psi1, ddv), (k.psi2, k.t * dv)]:
            dd = K.fd_second_derivative(psi, h, order=4)
            res = dd + pot[2:-2] * psi[2:-2] - rhs[2:-2]
            assert np.max(np.abs(res)) < 1e-8

    def test_orthogonality(self, correction_kernels):
        k = correction_kernels
        dv = K.heteroclinic_eval(k.t)[1]
        for f in (k.g0, k.psi1, k.psi2):
            assert abs(simpson(f * dv, x=k.t)) < 1e-8

    def test_g0_stable_form(self, correction_kernels):
        k = correction_kernels
        # product form stays bounded far to the left where e^{-sqrt2 t} overflows
        g = k.g0_eval(np.array([-600.0, -100.0, 0.0, 100.0, 600.0]))
        assert np.all(np.isfinite(g))
        assert abs(g[0] - 24.0) < 1e-12

    def test_psi0_two_sided_bound(self, correction_kernels):
        # bounded on all of R; decays with rate at least rho=1 for t>0
        k = correction_kernels
        assert np.max(np.abs(k.psi0)) < 20.0
        pos = k.t > 0.5
        weighted = np.abs(k.psi0[pos]) * np.exp(k.t[pos])
        assert np.max(weighted) < 30.0
        assert weighted[-1] < 5e-2

    def test_psi2_odd(self, correction_kernels):
        k = correction_kernels
        assert np.max(np.abs(k.psi2 + k.psi2[::-1])) < 1e-9

    def test_interpolation_and_tails(self, correction_kernels):
        k = correction_kernels
        tq = np.array([-30.0, -1.234, 0.0, 2.5, 30.0])
        for f in (k.psi0_eval, k.psi1_eval, k.psi2_eval):
            vals = f(tq)
            assert np.all(np.isfinite(vals))
        assert abs(k.psi1_eval(2.5) - 2.5 * K.heteroclinic_eval(2.5)[1] / 2) < 1e-15

    def test_small_domain_rejected(self):
        with pytest.raises(ValueError):
            K.build_correction_kernels(T_ker=5.0)

    def test_csv_dump(self, correction_kernels, tmp_path):
        path = tmp_path / "kernels.csv"
        K.dump_kernels(correction_kernels, path, decimate=100)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,v,dv,psi0,psi1,psi2,g0"
        assert len(lines[1].split(",")) == 7
