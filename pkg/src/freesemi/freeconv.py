"""Free additive convolution with a semicircle law via subordination.

The solver realizes the boundary-curve construction: y_tau(x) is the unique
root of  int d mu0 / ((x-s)^2 + y^2) = 1/tau  (zero when the y = 0 value
already falls below 1/tau), the map rho(u) = u + tau Re G(u + i y_tau(u)) is
a monotone bijection of the real line, and its inverse composed with the
boundary curve gives F_tau.  The density of mu0 (+) lambda_tau is then
-(1/pi) Im G(F_tau(x)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import _quad
from .errors import BracketFailure, NonConvergent, OnSupport
from .measure import MeasureSpec

_Y_REL_TOL = 1e-12
_RHO_RESIDUAL = 1e-9


def tau_crit(m: MeasureSpec, x_star: float) -> float:
    """Critical perturbation strength 1 / int d mu0 (x*-s)^-2."""
    g1 = m.moment_g(x_star, 1)
    if g1 <= 0:
        raise NonConvergent("second inverse moment must be positive")
    return 1.0 / g1


def x_star_tau(m: MeasureSpec, x_star: float, tau: float) -> float:
    """Drifted singular point x* + tau * int d mu0 / (x* - s)."""
    return x_star - tau * m.moment_g(x_star, 0)


@dataclass
class DensityProfile:
    """Density of mu_tau sampled on a grid."""

    tau: float
    grid: np.ndarray
    psi: np.ndarray
    x_star_tau: float | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        if np.any(psi < -1e-10):
            raise NonConvergent(
                f"density came out negative beyond slack: {psi.min():.3g}")
        self.psi = np.maximum(psi, 0.0)

    def mass(self) -> float:
        return float(np.trapezoid(self.psi, self.grid))


class SubordinationSolver:
    """Evaluates F_tau and the density of mu0 (+) lambda_tau.

    Immutable after construction; all evaluation methods are pure.  The
    Cauchy transform of mu0 goes through the measure's closed form when one
    exists (cross-validated against quadrature in the tests), otherwise
    through adaptive quadrature.
    """

    def __init__(self, m: MeasureSpec, tau: float, method: str = "auto",
                 boundary_points: int = 64):
        if tau <= 0:
            raise ValueError("tau must be > 0")
        self.measure = m
        self.tau = float(tau)
        self.method = method
        self._boundary_points = boundary_points
        self._boundary_cache = None
        self._last = None    # (x, u) warm start for the monotone rho solve
        self._y_hint = None  # last positive boundary height, Newton seed
        self._g1_cache = None

    # -- Cauchy transform plumbing ------------------------------------------

    def _g(self, w: complex) -> complex:
        try:
            return self.measure.cauchy(w, method=self.method)
        except OnSupport:
            return self._g_on_edge(float(np.real(w)))

    def _g_on_edge(self, u: float) -> complex:
        """G at a real support endpoint where the integral still converges."""
        total = 0.0
        for seg in self.measure.segments:
            al, ar = seg.alpha_left, seg.alpha_right
            if abs(u - seg.a) < 1e-12:
                al = al - 1.0
                if al <= -1.0:
                    raise OnSupport(f"G diverges at segment endpoint {u}")
            if abs(u - seg.b) < 1e-12:
                ar = ar - 1.0
                if ar <= -1.0:
                    raise OnSupport(f"G diverges at segment endpoint {u}")

            def integrand(s, d=seg.density):
                return np.asarray(d(s)) / (u - s)

            total += _quad.segment_integral(integrand, seg.a, seg.b, al, ar,
                                            rtol=1e-11)
        for at in self.measure.atoms:
            total += at.mass / (u - at.location)
        return complex(total)

    def _inv_square(self, x: float, y: float) -> float:
        """int d mu0 / ((x-s)^2 + y^2) for y > 0."""
        if self.measure.has_closed_cauchy and self.method != "quad":
            return -self._g(complex(x, y)).imag / y
        total = 0.0
        for seg in self.measure.segments:
            splits = [x] if seg.a < x < seg.b else []

            def integrand(s, d=seg.density):
                return np.asarray(d(s)) / ((x - s) ** 2 + y * y)

            total += _quad.segment_integral(integrand, seg.a, seg.b,
                                            seg.alpha_left, seg.alpha_right,
                                            splits=splits, rtol=1e-11)
        for at in self.measure.atoms:
            total += at.mass / ((x - at.location) ** 2 + y * y)
        return total

    def _inv_square_prime(self, x: float, y: float) -> float:
        """d/dy of the inverse-square integral (strictly negative)."""
        if self.measure.has_closed_cauchy and self.method != "quad":
            g = self._g(complex(x, y))
            gp = self.measure.cauchy_prime(complex(x, y))
            return (-gp.real * y + g.imag) / (y * y)
        total = 0.0
        for seg in self.measure.segments:
            splits = [x] if seg.a < x < seg.b else []

            def integrand(s, d=seg.density):
                return -2.0 * y * np.asarray(d(s)) / ((x - s) ** 2 + y * y) ** 2

            total += _quad.segment_integral(integrand, seg.a, seg.b,
                                            seg.alpha_left, seg.alpha_right,
                                            splits=splits, rtol=1e-9)
        for at in self.measure.atoms:
            total += -2.0 * y * at.mass / ((x - at.location) ** 2 + y * y) ** 2
        return total

    def _inv_square_at_zero(self, x: float) -> float:
        """The y = 0 value of the criterion integral; may be inf."""
        m = self.measure
        spec = m.singular
        if spec is not None and abs(x - spec.x_star) <= 1e-12:
            if self._g1_cache is None:
                self._g1_cache = m.moment_g(spec.x_star, 1)
            return self._g1_cache
        if (m.has_closed_cauchy and self.method != "quad"
                and m.distance_to_support(x) > 1e-12):
            return -m.cauchy_prime(complex(x, 0.0)).real
        for at in m.atoms:
            if abs(x - at.location) <= 1e-12:
                return math.inf
        for seg in m.segments:
            if seg.a + 1e-12 < x < seg.b - 1e-12:
                return math.inf  # positive density inside the segment
            for endpoint, alpha in ((seg.a, seg.alpha_left),
                                    (seg.b, seg.alpha_right)):
                if abs(x - endpoint) <= 1e-12:
                    if alpha <= 1.0:
                        return math.inf

                    def integrand(s, d=seg.density):
                        return np.asarray(d(s)) / (x - s) ** 2

                    al = alpha - 2.0 if endpoint == seg.a else seg.alpha_left
                    ar = alpha - 2.0 if endpoint == seg.b else seg.alpha_right
                    return _quad.segment_integral(integrand, seg.a, seg.b,
                                                  al, ar, rtol=1e-11)
        total = 0.0
        for seg in m.segments:
            def integrand(s, d=seg.density):
                return np.asarray(d(s)) / (x - s) ** 2

            total += _quad.segment_integral(integrand, seg.a, seg.b,
                                            seg.alpha_left, seg.alpha_right,
                                            rtol=1e-11)
        for at in m.atoms:
            total += at.mass / (x - at.location) ** 2
        return total

    # -- boundary curve -------------------------------------------------------

    def y_tau(self, x: float) -> float:
        """Height of Biane's boundary curve above x."""
        target = 1.0 / self.tau
        if self._inv_square_at_zero(x) <= target:
            return 0.0
        y = self._y_newton(x, target)
        if y is None:
            y = self._y_bisect(x, target)
        self._y_hint = y
        return y

    def _y_newton(self, x: float, target: float):
        """Newton from the last boundary height; None when it strays."""
        y = self._y_hint
        if y is None or not y > 0.0:
            return None
        for _ in range(30):
            fy = self._inv_square(x, y) - target
            fpy = self._inv_square_prime(x, y)
            if not fpy < 0.0:
                return None
            y_new = y - fy / fpy
            if not 0.0 < y_new < 1e6:
                return None
            if abs(y_new - y) <= 0.5 * _Y_REL_TOL * y_new:
                if abs(self._inv_square(x, y_new) - target) <= 1e-8 * target:
                    return y_new
                return None
            y = y_new
        return None

    def _y_bisect(self, x: float, target: float) -> float:
        mass = self.measure.total_mass
        y_hi = math.sqrt(self.tau * mass) * (1.0 + 1e-9)
        for _ in range(64):
            if self._inv_square(x, y_hi) < target:
                break
            y_hi *= 2.0
        else:
            raise NonConvergent("could not bracket y_tau from above")
        lo, hi = 0.0, y_hi
        for _ in range(46):
            mid = 0.5 * (lo + hi)
            if self._inv_square(x, mid) > target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= _Y_REL_TOL * hi:
                break
        y = 0.5 * (lo + hi)
        for _ in range(4):  # Newton polish; bracketed so steps stay tame
            fy = self._inv_square(x, y) - target
            fpy = self._inv_square_prime(x, y)
            if fpy == 0.0:
                break
            step = fy / fpy
            y_new = y - step
            if not (lo <= y_new <= hi):
                break
            y = y_new
        return y

    def boundary_point(self, u: float) -> complex:
        return complex(u, self.y_tau(u))

    def rho(self, u: float) -> float:
        """Boundary parameterization u + tau Re G(u + i y_tau(u))."""
        w = self.boundary_point(u)
        return u + self.tau * self._g(w).real

    @property
    def boundary_samples(self):
        """Cached (u, y_tau(u)) samples across the support, for diagnostics."""
        if self._boundary_cache is None:
            pad = 2.0 * math.sqrt(self.tau * self.measure.total_mass)
            us = np.linspace(self.measure.support_min - pad,
                             self.measure.support_max + pad,
                             self._boundary_points)
            self._boundary_cache = [(float(u), self.y_tau(float(u)))
                                    for u in us]
        return self._boundary_cache

    # -- subordination --------------------------------------------------------

    def subordinate(self, x: float) -> complex:
        """F_tau(x): solve rho(u) = x on the boundary, return u + i y_tau(u)."""
        x = float(x)
        pad = math.sqrt(self.tau * self.measure.total_mass) + 1e-3
        if self._last is not None and self._last[0] <= x:
            lo = self._last[1]
        else:
            lo = x - pad
            step = pad
            for _ in range(64):
                if self.rho(lo) <= x:
                    break
                lo -= step
                step *= 2.0
            else:
                raise BracketFailure("rho lower bracket not found")
        hi = max(lo + pad, x + pad)
        step = pad
        for _ in range(64):
            if self.rho(hi) >= x:
                break
            hi += step
            step *= 2.0
        else:
            raise BracketFailure("rho upper bracket not found")
        if self.rho(lo) > x:
            lo = x - pad  # warm start went stale; rebuild from scratch
            step = pad
            for _ in range(64):
                if self.rho(lo) <= x:
                    break
                lo -= step
                step *= 2.0
            else:
                raise BracketFailure("rho lower bracket not found")
        u = brentq(lambda t: self.rho(t) - x, lo, hi, xtol=1e-14, rtol=1e-15,
                   maxiter=200)
        w = self.boundary_point(u)
        residual = abs(u + self.tau * self._g(w).real - x)
        if residual > _RHO_RESIDUAL:
            raise NonConvergent(
                f"subordination residual {residual:.3g} at x = {x}")
        self._last = (x, u)
        return w

    def density_at(self, x: float) -> float:
        w = self.subordinate(x)
        if w.imag == 0.0:
            return 0.0
        return max(0.0, -self._g(w).imag / math.pi)

    def density(self, grid: Sequence[float]) -> DensityProfile:
        grid = np.asarray(grid, dtype=float)
        psi = np.array([self.density_at(x) for x in grid])
        xst = None
        m = self.measure
        if m.singular is not None:
            xst = x_star_tau(m, m.singular.x_star, self.tau)
        return DensityProfile(self.tau, grid, psi, xst)


def rightmost_flat_check(solver: SubordinationSolver, x_star: float,
                         tau: float | None = None, points: int = 25) -> bool:
    """True iff the density vanishes on (x*_tau, x*_tau + 1].

    Valid when x_star is the rightmost support point and tau <= tau_crit;
    the interval then sits under the flat part of the boundary curve.
    """
    tau = solver.tau if tau is None else tau
    xt = x_star_tau(solver.measure, x_star, tau)
    for x in np.linspace(xt + 1.0 / points, xt + 1.0, points):
        if solver.density_at(float(x)) > 1e-10:
            return False
    return True
