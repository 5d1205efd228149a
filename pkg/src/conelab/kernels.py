"""Closed-form and quadrature-level scalar kernels.

Provides the heteroclinic transition profile v(t) = tanh(t/sqrt(2)) of the
one-dimensional Allen-Cahn equation, the principal branch of the Lambert W
function, the interaction constant a_star produced by projecting the
exponential tail interaction of two transition layers onto v', and the
one-dimensional correction kernels psi0, psi1, psi2 used to improve a
two-layer approximate solution.

Sign conventions for the kernels (self-consistent; see the ODE residual
tests): with L[psi] := psi'' + (1 - 3 v^2) psi,

    L[psi0] = g0,      g0(t) = 6 (1 - v^2) e^{-sqrt(2) t} - a_star v',
    L[psi1] = v'',     psi1(t) = t v'(t) / 2  (closed form),
    L[psi2] = t v'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

SQRT2 = math.sqrt(2.0)

__all__ = [
    "SQRT2",
    "heteroclinic_eval",
    "lambert_w",
    "InteractionConstant",
    "compute_a_star",
    "CorrectionKernels",
    "build_correction_kernels",
    "dump_kernels",
]


def heteroclinic_eval(t):
    """Evaluate the heteroclinic profile and its first two derivatives.

    Returns (v, dv, ddv) with v = tanh(t/sqrt2), dv = (1 - v^2)/sqrt2 and
    ddv = v^3 - v, so that ddv + v - v^3 = 0 exactly.
    """
    t = np.asarray(t, dtype=float)
    v = np.tanh(t / SQRT2)
    # sech^2 form keeps dv strictly positive where (1 - v^2) would round to 0
    with np.errstate(over="ignore"):
        sech = 1.0 / np.cosh(t / SQRT2)
    dv = sech * sech / SQRT2
    ddv = v * v * v - v
    if v.ndim == 0:
        return float(v), float(dv), float(ddv)
    return v, dv, ddv


def _interaction_weight(t):
    """(1 - v^2) e^{-sqrt2 t} in the overflow-free product form 4/(1+e^{sqrt2 t})^2."""
    t = np.asarray(t, dtype=float)
    # exp overflows for t ~ > 500; the weight is 0 there to double precision.
    with np.errstate(over="ignore"):
        e = np.exp(SQRT2 * t)
    w = 4.0 / np.square(1.0 + e)
    return np.where(np.isfinite(e), w, 0.0)


def lambert_w(z, tol=1e-15, max_iter=100):
    """Principal branch of the Lambert W function on [0, inf).

    Halley iteration from the initial guess log(1+z) for z < e and
    log(z) - log(log(z)) for z >= e; converges to |w e^w - z| at the level of
    machine rounding.  Raises ValueError for negative arguments.
    """
    scalar = np.isscalar(z) or getattr(z, "ndim", 1) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z < 0.0):
        raise ValueError("lambert_w: argument must be nonnegative (principal branch)")
    w = np.where(z < math.e, np.log1p(z), 1.0)
    big = z >= math.e
    if np.any(big):
        lz = np.log(z[big])
        w[big] = lz - np.log(lz)
    for _ in range(max_iter):
        ew = np.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        w -= dw
        if np.all(np.abs(dw) <= tol * (1.0 + np.abs(w))):
            break
    return float(w[0]) if scalar else w


@dataclass(frozen=True)
class InteractionConstant:
    """Interaction constant a_star and the two defining integrals."""

    a_star: float
    l2_vprime_sq: float
    numerator: float


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def compute_a_star(quad_tol: float = 1e-10) -> InteractionConstant:
    """Compute a_star = ||v'||^{-2} * integral of 6 (1-v^2) e^{-sqrt2 t} v' dt.

    Both integrals use adaptive quadrature on a truncated domain whose tails
    are below quad_tol; integrands are evaluated in product forms that stay
    bounded for all t.
    """
    if not (0.0 < quad_tol <= 1e-6):
        raise ValueError("quad_tol must lie in (0, 1e-6]")

    def dv2(t):
        return heteroclinic_eval(t)[1] ** 2

    def num(t):
        return 6.0 * _interaction_weight(t) * heteroclinic_eval(t)[1]

    # integrands decay like e^{-sqrt2 |t|} or faster; tails beyond |t|=60
    # are below 1e-35
    l2, err1 = integrate.quad(dv2, -60.0, 60.0, epsabs=quad_tol * 1e-2,
                              epsrel=quad_tol * 1e-2, limit=200)
    numerator, err2 = integrate.quad(num, -60.0, 60.0, epsabs=quad_tol * 1e-2,
                                     epsrel=quad_tol * 1e-2, limit=200)
    if err1 > quad_tol or err2 > quad_tol:
        raise QuadratureError("interaction-constant quadrature did not converge")
    return InteractionConstant(a_star=numerator / l2, l2_vprime_sq=l2,
                               numerator=numerator)


def _numerov_bvp(t, w, g, robin_left, robin_right):
    """Solve psi'' = w(t) psi + g(t) on the uniform grid t with Robin closures.

    robin_left / robin_right are the coefficients c in psi' + c psi = 0 at the
    respective ends.  Interior rows use the fourth-order Numerov stencil;
    the end rows use a second-order ghost elimination (the boundary data are
    exponentially small for all kernels solved here).
    """
    n = t.size
    h = t[1] - t[0]
    h2 = h * h
    ab = np.zeros((3, n))
    rhs = np.empty(n)

    cw = 1.0 - h2 * w / 12.0
    # interior Numerov rows: cw[i+1] psi[i+1] - (2 + 10 h^2 w[i]/12 ... )
    ab[0, 2:] = cw[2:]                      # super-diagonal (column j = i+1)
    ab[2, :-2] = cw[:-2]                    # sub-diagonal  (column j = i-1)
    ab[1, 1:-1] = -2.0 * (1.0 + 5.0 * h2 * w[1:-1] / 12.0)
    rhs[1:-1] = h2 * (g[2:] + 10.0 * g[1:-1] + g[:-2]) / 12.0

    # left boundary: ghost psi[-1] = psi[1] + 2 h c_L psi[0]
    ab[1, 0] = -2.0 + 2.0 * h * robin_left - h2 * w[0]
    ab[0, 1] = 2.0
    rhs[0] = h2 * g[0]
    # right boundary: ghost psi[n] = psi[n-2] - 2 h c_R psi[n-1]
    ab[1, -1] = -2.0 - 2.0 * h * robin_right - h2 * w[-1]
    ab[2, -2] = 2.0
    rhs[-1] = h2 * g[-1]

    return solve_banded((1, 1), ab, rhs)


@dataclass
class CorrectionKernels:
    """Sampled correction kernels on a symmetric grid with interpolation."""

    T_ker: float
    a_star: float
    l2_vprime_sq: float
    t: np.ndarray
    psi0: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    g0: np.ndarray
    _splines: dict = field(default_factory=dict, repr=False)

    def g0_eval(self, t):
        """g0(t) = 6 (1 - v^2) e^{-sqrt2 t} - a_star v', stable for all t."""
        dv = heteroclinic_eval(t)[1]
        return 6.0 * _interaction_weight(t) - self.a_star * dv

    def _spline(self, name):
        if name not in self._splines:
            self._splines[name] = CubicSpline(self.t, getattr(self, name))
        return self._splines[name]

    def _eval_with_tails(self, name, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        inside = np.abs(t) <= self.T_ker
        out[inside] = self._spline(name)(t[inside])
        arr = getattr(self, name)
        hi = t > self.T_ker
        lo = t < -self.T_ker
        if np.any(hi):
            # all kernels decay at +inf at least like e^{-sqrt2 (t - T)} times
            # slowly varying factors; the values at T_ker are already ~1e-12
            out[hi] = arr[-1] * np.exp(-SQRT2 * (t[hi] - self.T_ker))
        if np.any(lo):
            if name == "psi0":
                out[lo] = arr[0]          # psi0 plateaus at -inf
            else:
                out[lo] = arr[0] * np.exp(SQRT2 * (t[lo] + self.T_ker))
        return out

    def psi0_eval(self, t):
        return self._eval_with_tails("psi0", t)

    def psi1_eval(self, t):
        t = np.asarray(t, dtype=float)
        return t * heteroclinic_eval(t)[1] / 2.0

    def psi2_eval(self, t):
        return self._eval_with_tails("psi2", t)


def build_correction_kernels(T_ker: float = 25.0, quad_tol: float = 1e-10,
                             dt: float = 0.0025) -> CorrectionKernels:
    """Build g0 and the three correction kernels on [-T_ker, T_ker].

    psi1 is the closed form t v'/2; psi0 and psi2 are computed as bounded
    solutions of their defining ODEs by a fourth-order (Numerov) two-point
    solve with decay/plateau Robin closures, then normalized to vanish at
    t = 0 by subtracting the appropriate multiple of the homogeneous
    solution v'.
    """
    if T_ker < 10.0:
        raise ValueError("T_ker must be at least 10")
    const = compute_a_star(quad_tol)
    m = int(round(T_ker / dt))
    t = np.linspace(-T_ker, T_ker, 2 * m + 1)
    v, dv, _ = heteroclinic_eval(t)
    g0 = 6.0 * _interaction_weight(t) - const.a_star * dv
    w = 3.0 * v * v - 1.0

    psi1 = t * dv / 2.0

    # psi0: L[psi0] = g0; bounded at -inf (plateau -g0(-inf)/2 = -12),
    # decaying at +inf
    psi0 = _numerov_bvp(t, w, g0, robin_left=0.0, robin_right=SQRT2)
    # psi2: L[psi2] = t v'; decaying at both ends
    psi2 = _numerov_bvp(t, w, t * dv, robin_left=-SQRT2, robin_right=SQRT2)

    # normalize: remove the v'-multiple so that psi(0) = 0
    i0 = m
    psi0 = psi0 - (psi0[i0] / dv[i0]) * dv
    psi2 = psi2 - (psi2[i0] / dv[i0]) * dv

    if not (np.all(np.isfinite(psi0)) and np.all(np.isfinite(psi2))):
        raise QuadratureError("correction-kernel solve produced non-finite values")

    return CorrectionKernels(T_ker=T_ker, a_star=const.a_star,
                             l2_vprime_sq=const.l2_vprime_sq, t=t,
                             psi0=psi0, psi1=psi1, psi2=psi2, g0=g0)


def fd_second_derivative(y: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Interior second derivative by central differences.

    Returns an array over the interior nodes (2 trimmed on each side for
    order 4, 1 for order 2).
    """
    if order == 2:
        return (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h)
    if order == 4:
        return (-y[4:] + 16.0 * y[3:-1] - 30.0 * y[2:-2] + 16.0 * y[1:-3]
                - y[:-4]) / (12.0 * h * h)
    raise ValueError("order must be 2 or 4")


def dump_kernels(kernels: CorrectionKernels, path, decimate: int = 1) -> None:
    """Write the kernel grid as CSV with header t,v,dv,psi0,psi1,psi2,g0."""
    t = kernels.t[::decimate]
    v, dv, _ = heteroclinic_eval(t)
    data = np.column_stack([t, v, dv, kernels.psi0[::decimate],
                            kernels.psi1[::decimate], kernels.psi2[::decimate],
                            kernels.g0[::decimate]])
    np.savetxt(path, data, delimiter=",", fmt="%.16e",
               header="t,v,dv,psi0,psi1,psi2,g0", comments="")
