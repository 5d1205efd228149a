"""Generating curve of the O(m) x O(n)-invariant minimal hypersurface.

The hypersurface is generated by a planar arc-length curve (a(s), b(s))
launched from (1, 0) whose zero-mean-curvature condition reads

    -a'' b' + b'' a' + (m-1) b'/a - (n-1) a'/b = 0,

equivalently, with a' = cos(theta), b' = sin(theta),

    theta' = (n-1) cos(theta)/b - (m-1) sin(theta)/a.

The curve approaches the ray of the minimal cone |x|^2 = ((m-1)/(n-1))|y|^2
at infinity, with a signed normal deviation ~ c1 s^{gamma_+}.  This module
integrates the curve, computes its principal curvatures and the geometric
coefficients alpha(s) (drift of the invariant Laplacian) and
beta(s) = |A|^2 (squared norm of the second fundamental form), and fits the
cone asymptotics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

__all__ = [
    "LawsonConeParams",
    "ProfileCurve",
    "GeometricCoefficients",
    "ConeAsymptoticFit",
    "UnsupportedDimensionError",
    "IntegrationFailureError",
    "FitFailureError",
    "make_params",
    "integrate_profile",
    "coefficients",
    "fit_cone_asymptotics",
    "mean_curvature_residual",
    "mean_curvature_from_samples",
    "dump_profile",
]


class UnsupportedDimensionError(ValueError):
    """Dimensions outside m, n >= 3 and m + n >= 8."""


class IntegrationFailureError(RuntimeError):
    """Curve integration lost positivity or underflowed; carries last valid s."""

    def __init__(self, message, last_s=None):
        super().__init__(message)
        self.last_s = last_s


class FitFailureError(RuntimeError):
    """Asymptotic fit was ill-conditioned."""


@dataclass(frozen=True)
class LawsonConeParams:
    m: int
    n: int
    N: int
    rho_m: float
    rho_n: float
    gamma_plus: float
    gamma_minus: float
    c0: float
    lam: float          # (n-2)/2, decay rate of the small-s Jacobi mode
    Lam: float          # sqrt(((N-2)/2)^2 - (N-1)), spectral gap at infinity
    stability_gap: float


def make_params(m: int, n: int) -> LawsonConeParams:
    """Derived constants for the cone with profile dimensions (m, n)."""
    if not (isinstance(m, (int, np.integer)) and isinstance(n, (int, np.integer))):
        raise UnsupportedDimensionError("m and n must be integers")
    if m < 3 or n < 3 or m + n < 8:
        raise UnsupportedDimensionError(
            f"unsupported dimensions (m, n) = ({m}, {n}): need m, n >= 3 and m + n >= 8")
    N = m + n - 1
    gap = ((N - 2) / 2.0) ** 2 - (N - 1)
    if gap <= 0.0:
        raise UnsupportedDimensionError(f"stability gap nonpositive for N = {N}")
    root = math.sqrt(gap)
    return LawsonConeParams(
        m=int(m), n=int(n), N=N,
        rho_m=math.sqrt((m - 1) / (N - 1)),
        rho_n=math.sqrt((n - 1) / (N - 1)),
        gamma_plus=-(N - 2) / 2.0 + root,
        gamma_minus=-(N - 2) / 2.0 - root,
        c0=N * (m - 1) / n,
        lam=(n - 2) / 2.0,
        Lam=root,
        stability_gap=gap,
    )


def _taylor_launch(params: LawsonConeParams, s):
    """Series of (a, b, theta) near s = 0 where the ODE has the b = 0 pole.

    a = 1 + kappa s^2/2 - (theta3 + kappa^3/6) s^4/4,  b = s - kappa^2 s^3/6,
    theta = pi/2 - kappa s + theta3 s^3,
    kappa = (m-1)/n, theta3 = kappa^2 n (kappa+1) / (2 (n+2)).
    """
    m, n = params.m, params.n
    kappa = (m - 1) / n
    theta3 = kappa * kappa * n * (kappa + 1.0) / (2.0 * (n + 2.0))
    s = np.asarray(s, dtype=float)
    a = 1.0 + kappa * s * s / 2.0 - (theta3 + kappa**3 / 6.0) * s**4 / 4.0
    b = s - kappa**2 * s**3 / 6.0
    theta = math.pi / 2.0 - kappa * s + theta3 * s**3
    return a, b, theta


@dataclass
class ProfileCurve:
    params: LawsonConeParams
    s0: float
    s_max: float
    tol: float
    s_grid: np.ndarray
    a: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    k: np.ndarray
    _sol: object = None

    def __post_init__(self):
        self._spl_a = CubicSpline(self.s_grid, self.a)
        self._spl_b = CubicSpline(self.s_grid, self.b)
        self._spl_theta = CubicSpline(self.s_grid, self.theta)
        self._spl_k = CubicSpline(self.s_grid, self.k)

    def eval(self, s):
        """Return (a, b, theta, k) at arbitrary s in [0, s_max] (series below s0).

        Accepts scalars or arrays; always returns 1-D arrays.
        """
        s = np.atleast_1d(np.asarray(s, dtype=float))
        a = np.empty(s.shape)
        b = np.empty(s.shape)
        theta = np.empty(s.shape)
        k = np.empty(s.shape)
        lo = s < self.s0
        hi = ~lo
        if np.any(lo):
            a[lo], b[lo], theta[lo] = _taylor_launch(self.params, s[lo])
            k[lo] = _curvature(self.params, a[lo], b[lo], theta[lo], s[lo])
        if np.any(hi):
            a[hi] = self._spl_a(s[hi])
            b[hi] = self._spl_b(s[hi])
            theta[hi] = self._spl_theta(s[hi])
            k[hi] = self._spl_k(s[hi])
        return a, b, theta, k

    def dense_eval(self, s):
        """(a, b, theta) from the integrator dense output (s >= s0 only)."""
        y = self._sol.sol(s)
        return y[0], y[1], y[2]

    def tangent_normal(self, s):
        """Unit tangent (a', b') = (cos theta, sin theta) and normal (-b', a')."""
        _, _, theta, _ = self.eval(s)
        ct, st = np.cos(theta), np.sin(theta)
        return (ct, st), (-st, ct)


def _curvature(params, a, b, theta, s):
    """k = theta' = (n-1) cos(theta)/b - (m-1) sin(theta)/a, with the s -> 0 limit."""
    m, n = params.m, params.n
    kappa = (m - 1) / n
    s = np.asarray(s, dtype=float)
    ct, st = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (n - 1) * ct / b - (m - 1) * st / a
    small = s < 1e-8
    if np.any(small):
        k = np.where(small, -kappa, k)
    return k


def integrate_profile(params: LawsonConeParams, s_max: float = 200.0,
                      tol: float = 1e-10, n_samples: int = 4000) -> ProfileCurve:
    """Integrate the arc-length system from a Taylor launch at s0 = 10 tol^{1/4}."""
    if s_max < 10.0:
        raise ValueError("s_max must be at least 10")
    if not (1e-13 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    m, n = params.m, params.n
    s0 = 10.0 * tol ** 0.25
    a0, b0, th0 = _taylor_launch(params, s0)

    def rhs(s, y):
        a, b, th = y
        ct, st = math.cos(th), math.sin(th)
        return (ct, st, (n - 1) * ct / b - (m - 1) * st / a)

    def positivity(s, y):
        return min(y[0], y[1])
    positivity.terminal = True
    positivity.direction = -1

    s_grid = np.geomspace(s0, s_max, n_samples)
    s_grid[0], s_grid[-1] = s0, s_max
    sol = solve_ivp(rhs, (s0, s_max), [float(a0), float(b0), float(th0)],
                    method="DOP853", rtol=max(tol * 1e-2, 1e-13),
                    atol=max(tol * 1e-4, 1e-15),
                    dense_output=True, t_eval=s_grid, events=positivity)
    if not sol.success or sol.t[-1] < s_max:
        raise IntegrationFailureError(
            f"profile integration stopped at s = {sol.t[-1]:.6g}: {sol.message}",
            last_s=float(sol.t[-1]))
    a, b, theta = sol.y
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise IntegrationFailureError("curve lost positivity", last_s=float(s_max))
    k = _curvature(params, a, b, theta, s_grid)
    return ProfileCurve(params=params, s0=s0, s_max=s_max, tol=tol,
                        s_grid=s_grid, a=a, b=b, theta=theta, k=k, _sol=sol)


@dataclass
class GeometricCoefficients:
    """alpha(s) and beta(s) = |A|^2 with series / tail continuations.

    alpha = (m-1) a'/a + (n-1) b'/b, beta = k^2 + (m-1)(b'/a)^2 + (n-1)(a'/b)^2.
    Near 0: alpha = (n-1)/s + A1 s, beta = c0 + B2 s^2.  Beyond s_max the
    leading decay (N-1)/s resp. (N-1)/s^2 is used with a continuity-matched
    correction.
    """

    params: LawsonConeParams
    curve: ProfileCurve
    s_grid: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    A1: float
    B2: float

    def __post_init__(self):
        self._spl_alpha = CubicSpline(self.s_grid, self.alpha)
        self._spl_beta = CubicSpline(self.s_grid, self.beta)
        p = self.params
        s_hi = self.s_grid[-1]
        self._alpha_tail_c = (self.alpha[-1] - (p.N - 1) / s_hi) * s_hi**2
        self._beta_tail_c = (self.beta[-1] - (p.N - 1) / s_hi**2) * s_hi**3
        self._s_hi = s_hi

    def alpha_eval(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        p = self.params
        out = np.empty(s.shape)
        lo = s < self.s_grid[0]
        hi = s > self._s_hi
        mid = ~(lo | hi)
        out[mid] = self._spl_alpha(s[mid])
        if np.any(lo):
            out[lo] = (p.n - 1) / s[lo] + self.A1 * s[lo]
        if np.any(hi):
            out[hi] = (p.N - 1) / s[hi] + self._alpha_tail_c / s[hi] ** 2
        return out

    def alpha_prime_eval(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        p = self.params
        out = np.empty(s.shape)
        lo = s < self.s_grid[0]
        hi = s > self._s_hi
        mid = ~(lo | hi)
        out[mid] = self._spl_alpha(s[mid], 1)
        if np.any(lo):
            out[lo] = -(p.n - 1) / s[lo] ** 2 + self.A1
        if np.any(hi):
            out[hi] = -(p.N - 1) / s[hi] ** 2 - 2.0 * self._alpha_tail_c / s[hi] ** 3
        return out

    def beta_eval(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        p = self.params
        out = np.empty(s.shape)
        lo = s < self.s_grid[0]
        hi = s > self._s_hi
        mid = ~(lo | hi)
        out[mid] = self._spl_beta(s[mid])
        if np.any(lo):
            out[lo] = p.c0 + self.B2 * s[lo] ** 2
        if np.any(hi):
            out[hi] = (p.N - 1) / s[hi] ** 2 + self._beta_tail_c / s[hi] ** 3
        return out


def coefficients(curve: ProfileCurve) -> GeometricCoefficients:
    p = curve.params
    m, n = p.m, p.n
    s = curve.s_grid
    ct, st = np.cos(curve.theta), np.sin(curve.theta)
    alpha = (m - 1) * ct / curve.a + (n - 1) * st / curve.b
    beta = curve.k**2 + (m - 1) * (st / curve.a) ** 2 + (n - 1) * (ct / curve.b) ** 2
    # series coefficients: alpha = (n-1)/s + A1 s with
    # A1 = kappa (m-1) - kappa^2 (n-1)/3; beta = c0 + B2 s^2 fitted near s0
    kappa = (m - 1) / n
    A1 = kappa * (m - 1) - kappa**2 * (n - 1) / 3.0
    head = s <= 4.0 * curve.s0
    B2 = float(np.polyfit(s[head] ** 2, beta[head] - p.c0, 1)[0]) \
        if np.count_nonzero(head) >= 3 else 0.0
    return GeometricCoefficients(params=p, curve=curve, s_grid=s,
                                 alpha=alpha, beta=beta, A1=A1, B2=B2)


@dataclass(frozen=True)
class ConeAsymptoticFit:
    c1: float
    fit_window: tuple
    residual_norm: float
    loglog_slope: float
    secondary_exponent: float


def fit_cone_asymptotics(curve: ProfileCurve, window=(50.0, 200.0)) -> ConeAsymptoticFit:
    """Least-squares fit of the signed normal deviation from the cone ray.

    The deviation d(s) = rho_m b - rho_n a behaves like -c1 s^{gamma_+}; the
    fit returns c1, the residual norm of the power-law model over the window,
    the empirical log-log slope of |d| and a secondary exponent from the
    two-term model d = -c1 s^{gamma_+} (1 + c' s^{-alpha}).
    """
    p = curve.params
    s_lo, s_hi = window
    if s_lo < curve.s_max / 4.0 - 1e-9 or s_hi > curve.s_max + 1e-9 or s_hi <= s_lo:
        raise FitFailureError("fit window must lie inside [s_max/4, s_max]")
    mask = (curve.s_grid >= s_lo) & (curve.s_grid <= s_hi)
    if np.count_nonzero(mask) < 8:
        raise FitFailureError("fit window contains too few samples")
    s = curve.s_grid[mask]
    d = p.rho_m * curve.b[mask] - p.rho_n * curve.a[mask]
    basis = s ** p.gamma_plus
    coef = float(np.dot(basis, d) / np.dot(basis, basis))
    resid = d - coef * basis
    c1 = -coef
    if abs(c1) < 1e-14:
        raise FitFailureError("deviation below noise floor; window too far out")
    slope = float(np.polyfit(np.log(s), np.log(np.abs(d)), 1)[0])
    # secondary exponent of the relative remainder
    rel = np.abs(resid / (coef * basis))
    good = rel > 1e-12
    sec = float(-np.polyfit(np.log(s[good]), np.log(rel[good]), 1)[0]) \
        if np.count_nonzero(good) > 8 else float("nan")
    return ConeAsymptoticFit(c1=c1, fit_window=(float(s_lo), float(s_hi)),
                             residual_norm=float(np.sqrt(np.mean(resid**2))),
                             loglog_slope=slope, secondary_exponent=sec)


def mean_curvature_residual(curve: ProfileCurve, h: float = 0.02,
                            order: int = 4, h_axis: float = 0.004,
                            split: float = 2.0) -> float:
    """Sup of |H| recomputed from dense samples by central finite differences.

    H = -a'' b' + b'' a' + (m-1) b'/a - (n-1) a'/b on [s0, s_max].  The
    a'/b term amplifies first-derivative stencil error by (n-1)/s near the
    axis, so the segment s < split is sampled with the finer step h_axis.
    """
    p = curve.params
    res = 0.0
    segments = [(curve.s0, min(split + (order + 1) * h_axis, curve.s_max),
                 h_axis),
                (min(split, curve.s_max - 10 * h), curve.s_max, h)]
    for lo, hi, step in segments:
        s = np.arange(lo, hi, step)
        a, b, _ = curve.dense_eval(s)
        _, H = mean_curvature_from_samples(p, s, a, b, order=order)
        res = max(res, float(np.max(np.abs(H))))
    return res


def mean_curvature_from_samples(params, s, a, b, order: int = 4):
    """FD mean curvature from raw (s, a, b) samples on a uniform grid."""
    h = s[1] - s[0]
    if order == 4:
        def d1(y):
            return (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)

        def d2(y):
            return (-y[:-4] + 16.0 * y[1:-3] - 30.0 * y[2:-2] + 16.0 * y[3:-1]
                    - y[4:]) / (12.0 * h * h)
        sl = slice(2, -2)
    elif order == 2:
        def d1(y):
            return (y[2:] - y[:-2]) / (2.0 * h)

        def d2(y):
            return (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h)
        sl = slice(1, -1)
    else:
        raise ValueError("order must be 2 or 4")
    ap, bp = d1(a), d1(b)
    app, bpp = d2(a), d2(b)
    si, ai, bi = s[sl], a[sl], b[sl]
    H = (-app * bp + bpp * ap + (params.m - 1) * bp / ai
         - (params.n - 1) * ap / bi)
    return si, H


def dump_profile(curve: ProfileCurve, coefs: GeometricCoefficients, path) -> None:
    """CSV dump with header s,a,b,theta,k,alpha,beta."""
    data = np.column_stack([curve.s_grid, curve.a, curve.b, curve.theta,
                            curve.k, coefs.alpha, coefs.beta])
    np.savetxt(path, data, delimiter=",", fmt="%.16e",
               header="s,a,b,theta,k,alpha,beta", comments="")
