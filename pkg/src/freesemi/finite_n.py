"""Finite-n determinantal machinery for the unitary ensemble e^{-n tr V}.

Orthonormal polynomials are built by the Stieltjes procedure on a dense
composite Gauss-Legendre discretization of the weight.  The perturbed-model
kernels are contour double integrals; since the polynomial-ensemble kernel
is separable, each kernel value reduces to n pairs of 1-D quadratures
(a vertical-line integral in z and a weighted real integral in w), evaluated
with panel doubling until the kernel value stabilizes.

The vertical contour may be anchored at any abscissa (analyticity makes the
value independent of the anchor); by default it passes through the
evaluation point, which keeps the integrand magnitude flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _quad
from .errors import (ConfigError, Instability, NewtonDiverged, NonConvergent,
                     TruncationTooTight)
from .measure import PotentialSpec, SingularPointSpec

_DESK_N_KERNEL = 12
_DESK_N_OVERLAP = 4
_MAX_PANELS = 4096


# ---------------------------------------------------------------------------
# orthonormal polynomials


class OrthoBasis:
    """Orthonormal polynomials p_0..p_degree_max for the weight e^{-nV}."""

    def __init__(self, potential: PotentialSpec, n: int, degree_max: int,
                 alphas: np.ndarray, betas: np.ndarray, p0: float,
                 grid: Tuple[np.ndarray, np.ndarray]):
        self.potential = potential
        self.n = n
        self.degree_max = degree_max
        self.alphas = alphas          # a_0 .. a_{degree_max-1}
        self.betas = betas            # b_1 .. b_{degree_max}
        self.p0 = p0
        self.grid = grid              # (nodes, weights incl. e^{-nV})

    @property
    def leading_coefficients(self) -> np.ndarray:
        kappas = np.empty(self.degree_max + 1)
        kappas[0] = self.p0
        for j in range(self.degree_max):
            kappas[j + 1] = kappas[j] / self.betas[j]
        return kappas

    def evaluate(self, z, jmax: Optional[int] = None) -> np.ndarray:
        """Stack [p_0(z), ..., p_jmax(z)] via the three-term recurrence."""
        jmax = self.degree_max if jmax is None else jmax
        z = np.asarray(z)
        out = np.empty((jmax + 1,) + z.shape, dtype=z.dtype)
        out[0] = self.p0
        if jmax >= 1:
            out[1] = (z - self.alphas[0]) * out[0] / self.betas[0]
        for j in range(1, jmax):
            out[j + 1] = ((z - self.alphas[j]) * out[j]
                          - self.betas[j - 1] * out[j - 1]) / self.betas[j]
        return out

    def weight(self, x):
        return np.exp(-self.n * self.potential(np.asarray(x, dtype=float)))


def _weight_cutoff(potential: PotentialSpec, n: int, degree_max: int) -> float:
    xs = np.linspace(-1.0, 1.0, 201)
    v_min = float(np.min(potential(xs * 10.0)))
    x = 2.0
    for _ in range(200):
        decay = n * (potential(x) - v_min) - (2 * degree_max + 4) * math.log(x + 2.0)
        if decay > 80.0:
            return x
        x *= 1.15
    raise NonConvergent("weight cutoff search failed")


def _stieltjes(potential: PotentialSpec, n: int, degree_max: int,
               panels: int, cutoff: float):
    nodes, wq = _quad.gl_nodes(-cutoff, cutoff, panels, 24)
    w = (wq * np.exp(-n * potential(nodes))).astype(np.longdouble)
    x = nodes.astype(np.longdouble)
    mass = float(w.sum())
    if not mass > 0:
        raise Instability("weight mass underflowed")
    p0 = 1.0 / math.sqrt(mass)
    alphas = np.zeros(degree_max)
    betas = np.zeros(degree_max)
    p_prev = np.zeros_like(x)
    p_cur = np.full_like(x, p0)
    for j in range(degree_max):
        a_j = float(np.sum(w * x * p_cur * p_cur))
        t = (x - a_j) * p_cur - (betas[j - 1] if j > 0 else 0.0) * p_prev
        b2 = float(np.sum(w * t * t))
        if not (b2 > 0 and math.isfinite(b2)):
            raise Instability(f"lost positivity at degree {j + 1}")
        b_j = math.sqrt(b2)
        alphas[j] = a_j
        betas[j] = b_j
        p_prev, p_cur = p_cur, t / b_j
    return alphas, betas, p0, (nodes, wq * np.exp(-n * potential(nodes)))


def build_basis(potential: PotentialSpec, n: int, degree_max: int) -> OrthoBasis:
    """Recurrence coefficients by the Stieltjes procedure, panel-doubled.

    Raises Instability when the discretized Gram matrix loses more than
    ~12 digits (condition estimate above 1e12).
    """
    if degree_max > 24:
        raise ConfigError("degree_max capped at 24 (desk scale)")
    if degree_max < n:
        degree_max = n  # kernels need p_0..p_{n-1} at least
    cutoff = _weight_cutoff(potential, n, degree_max)
    panels = 64
    prev = None
    while panels <= _MAX_PANELS:
        alphas, betas, p0, grid = _stieltjes(potential, n, degree_max,
                                             panels, cutoff)
        if prev is not None:
            da = np.max(np.abs(alphas - prev[0]))
            db = np.max(np.abs(betas - prev[1]))
            if max(da, db) < 1e-13:
                basis = OrthoBasis(potential, n, degree_max, alphas, betas,
                                   p0, grid)
                _gram_check(basis)
                return basis
        prev = (alphas, betas)
        panels *= 2
    raise NonConvergent("recurrence coefficients did not stabilize")


def _gram_check(basis: OrthoBasis, tol: float = 1e-4):
    nodes, w = basis.grid
    p = basis.evaluate(nodes)
    gram = (p * w) @ p.T
    resid = np.max(np.abs(gram - np.eye(basis.degree_max + 1)))
    if resid > tol:
        raise Instability(
            f"orthonormality residual {resid:.3g}; Gram condition above 1e12")


# ---------------------------------------------------------------------------
# gauge machinery (no basis required; polynomial data only)


@dataclass
class GaugeData:
    u: float
    t: float
    s_n: float
    R_n_value: float
    H_hat: float


class GaugeMachine:
    """Saddle point s_n(u,t) and gauge factors for one (V, singular, n)."""

    def __init__(self, potential: PotentialSpec, spec: SingularPointSpec,
                 n: int):
        self.potential = potential
        self.spec = spec
        self.n = n
        self.gamma = spec.gamma
        self.c0 = spec.c0
        self.x_star = spec.x_star
        vpp = potential.deriv_at(spec.x_star, 2)
        if vpp >= 0:
            raise ConfigError("V''(x*) must be negative at a singular point")
        self.tau_crit = -2.0 / vpp
        self.t_crit = self.tau_crit / (1.0 + self.tau_crit)
        # R_n(s) = sum_{m>=3} V^(m)(x*) s^m / (2 m! c0^m n^((m-3) gamma))
        deg = potential.degree
        coeffs = np.zeros(deg + 1)
        for m in range(3, deg + 1):
            coeffs[m] = (potential.deriv_at(spec.x_star, m)
                         / (2.0 * math.factorial(m) * self.c0 ** m
                            * n ** ((m - 3) * self.gamma)))
        self._r_poly = np.polynomial.Polynomial(coeffs)
        self._r_prime = self._r_poly.deriv()
        self._r_second = self._r_prime.deriv()

    def c_hat(self, t: float) -> float:
        return self.t_crit / (self.t_crit - t) * self.c0

    def x_hat(self, t: float) -> float:
        return ((1.0 - t) * self.x_star
                + 0.5 * t * self.potential.deriv_at(self.x_star, 1))

    def r_n(self, s: float) -> float:
        return float(self._r_poly(s))

    def saddle(self, u: float, t: float) -> float:
        """Solve s = u - t c0 c_hat n^-gamma R_n'(s) by damped Newton."""
        if not 0.0 < t < self.t_crit:
            raise ConfigError("gauge needs 0 < t < t_crit")
        lam = t * self.c0 * self.c_hat(t) * self.n ** (-self.gamma)
        s = u
        for _ in range(64):
            f = s - u + lam * float(self._r_prime(s))
            fp = 1.0 + lam * float(self._r_second(s))
            if fp <= 0:
                break
            step = f / fp
            s_new = s - step
            if abs(step) < 1e-15 * max(1.0, abs(s)):
                return s_new
            s = s_new
        # bisection fallback on the monotone fixed-point map
        lo, hi = u - 1.0, u + 1.0
        flo = lo - u + lam * float(self._r_prime(lo))
        fhi = hi - u + lam * float(self._r_prime(hi))
        for _ in range(60):
            if flo < 0 < fhi:
                break
            lo -= 1.0
            hi += 1.0
            flo = lo - u + lam * float(self._r_prime(lo))
            fhi = hi - u + lam * float(self._r_prime(hi))
        else:
            raise NewtonDiverged("saddle bracket not found")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = mid - u + lam * float(self._r_prime(mid))
            if fm < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
        return 0.5 * (lo + hi)

    def saddle_residual(self, u: float, t: float, s: float) -> float:
        n, g = self.n, self.gamma
        return abs((s - u) * n ** (1 - 2 * g) / (t * self.c0 * self.c_hat(t))
                   + n ** (1 - 3 * g) * float(self._r_prime(s)))

    def r_hat(self, u: float, t: float, s: float) -> float:
        lam = 2.0 * t * self.c0 * self.c_hat(t)
        return self.r_n(s) + self.n ** self.gamma * (s - u) ** 2 / lam

    def gauge(self, u: float, t: float) -> GaugeData:
        """Exact multi-time gauge exponent H_hat(u, t)."""
        n, g = self.n, self.gamma
        v1 = self.potential.deriv_at(self.x_star, 1)
        v2 = self.potential.deriv_at(self.x_star, 2)
        ch = self.c_hat(t)
        s = self.saddle(u, t)
        h = (t * n * v1 ** 2 / (8.0 * (1.0 - t))
             + u * n ** (1 - g) * v1 / (2.0 * ch * (1.0 - t))
             + u * u * n ** (1 - 2 * g) * v2 / (4.0 * self.c0 * ch * (1.0 - t))
             + n ** (1 - 3 * g) * self.r_hat(u, t, s))
        return GaugeData(u=u, t=t, s_n=s, R_n_value=self.r_n(s), H_hat=h)

    def gauge_single_time(self, u: float, tau: float) -> float:
        """Single-time gauge H_n(u; tau) = H_hat(u, t) - tau n V'(x*)^2 / 8."""
        t = tau / (1.0 + tau)
        v1 = self.potential.deriv_at(self.x_star, 1)
        return self.gauge(u, t).H_hat - tau * self.n * v1 ** 2 / 8.0

    # -- heat factor and its microscopic rescaling ---------------------------

    def heat_kernel(self, x: float, y: float, t: float, tp: float) -> float:
        n = self.n
        log_g = (-n * (x - y) ** 2 / (2.0 * (tp - t))
                 + n * x * x / (2.0 * (1.0 - t))
                 - n * y * y / (2.0 * (1.0 - tp)))
        return math.sqrt(n / (2.0 * math.pi * (tp - t))) * math.exp(log_g)

    def scaled_heat(self, u: float, v: float, t: float, tp: float) -> float:
        """The rescaled Gaussian part F_n(u, v; t, t')."""
        n, g = self.n, self.gamma
        ct, ctp = self.c_hat(t), self.c_hat(tp)
        x = self.x_hat(t) + u / (ct * n ** g)
        y = self.x_hat(tp) + v / (ctp * n ** g)
        pref = math.exp(-self.gauge(u, t).H_hat + self.gauge(v, tp).H_hat)
        return pref / (math.sqrt(ct * ctp) * n ** g) * self.heat_kernel(x, y, t, tp)

    def sigma_sq(self, t: float, tp: float) -> float:
        """Variance of the Gaussian microscopic limit of the heat factor."""
        return self.c_hat(t) * self.c_hat(tp) * (tp - t)


# ---------------------------------------------------------------------------
# kernel engine


class KernelEngine:
    """Correlation kernels of the perturbed ensemble at finite n.

    Immutable after construction; kernel evaluations are pure.  ``singular``
    is required only by the gauge and microscopic-rescaling operations.
    """

    def __init__(self, basis: OrthoBasis, singular: Optional[SingularPointSpec] = None,
                 rtol: float = 1e-9, base_panels: int = 32):
        self.basis = basis
        self.n = basis.n
        self.singular = singular
        self.rtol = rtol
        self.base_panels = base_panels
        self.gauge_machine = (GaugeMachine(basis.potential, singular, basis.n)
                              if singular is not None else None)
        self._node_cache = {}

    # -- plain kernels --------------------------------------------------------

    def kernel_M(self, x, y):
        """Christoffel-Darboux kernel with the symmetric weight split."""
        b = self.basis
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        px = b.evaluate(x, self.n - 1)
        py = b.evaluate(y, self.n - 1)
        s = np.sum(px * py, axis=0)
        return np.exp(-0.5 * b.n * (b.potential(x) + b.potential(y))) * s

    def kernel_PE(self, z, w):
        """Polynomial-ensemble kernel, polynomial in its first argument."""
        b = self.basis
        z = np.asarray(z)
        w = np.asarray(w, dtype=float)
        pz = b.evaluate(z, self.n - 1)
        pw = b.evaluate(w, self.n - 1)
        return np.exp(-b.n * b.potential(w)) * np.sum(pz * pw, axis=0)

    # -- quadrature helpers ---------------------------------------------------

    def _cache_put(self, key, value):
        if len(self._node_cache) > 64:
            self._node_cache.clear()
        self._node_cache[key] = value
        return value

    def _p_on_line(self, anchor: float, z_max: float, panels: int):
        key = ("line", round(anchor, 14), round(z_max, 14), panels)
        if key not in self._node_cache:
            v, wts = _quad.gl_nodes(-z_max, z_max, panels, 16)
            pj = self.basis.evaluate(anchor + 1j * v, self.n - 1)
            return self._cache_put(key, (v, wts, pj))
        return self._node_cache[key]

    def _p_on_real(self, lo: float, hi: float, panels: int):
        key = ("real", round(lo, 14), round(hi, 14), panels)
        if key not in self._node_cache:
            w, wts = _quad.gl_nodes(lo, hi, panels, 16)
            pj = self.basis.evaluate(w, self.n - 1)
            pj = pj * np.exp(-self.n * self.basis.potential(w))
            return self._cache_put(key, (w, wts, pj))
        return self._node_cache[key]

    def _z_cutoff(self, decay: float, anchor: float) -> float:
        """Smallest Z with exp(-decay Z^2) * max_j |p_j(anchor+iZ)| < 1e-16."""
        z = math.sqrt(44.0 / decay)
        ref = np.max(np.abs(self.basis.evaluate(np.asarray(anchor + 0j),
                                                self.n - 1)))
        ref = max(ref, 1.0)
        for _ in range(60):
            tail = (np.max(np.abs(self.basis.evaluate(
                np.asarray(anchor + 1j * z), self.n - 1)))
                * math.exp(-decay * z * z))
            if tail <= 1e-16 * ref:
                return z
            z *= 1.2
        raise TruncationTooTight("vertical contour tail bound not satisfied")

    def _w_range(self, y: float, beta: float, c: float) -> Tuple[float, float]:
        """Real window where exp(-nV(w) - c (y - beta w)^2) is above 1e-40."""
        b = self.basis
        w0 = max(abs(b.grid[0][0]), abs(b.grid[0][-1]), abs(y) / beta + 1.0)
        for _ in range(40):
            ws = np.linspace(-w0, w0, 1601)
            logf = (-self.n * b.potential(ws) - c * (y - beta * ws) ** 2
                    + (self.n + 2) * np.log1p(np.abs(ws)))
            lmax = np.max(logf)
            keep = logf > lmax - 95.0
            if keep[0] or keep[-1]:
                w0 *= 1.5
                continue
            idx = np.nonzero(keep)[0]
            lo, hi = ws[idx[0]], ws[idx[-1]]
            pad = 0.05 * (hi - lo)
            return lo - pad, hi + pad
        raise TruncationTooTight("real contour window not found")

    # -- single-time perturbed kernel ----------------------------------------

    def _kernel_x_once(self, x: float, y: float, tau: float, anchor: float,
                       panels: int) -> complex:
        n = self.n
        z_max = self._z_cutoff(n / (2.0 * tau), anchor)
        v, wv, pline = self._p_on_line(anchor, z_max, panels)
        a_exp = np.exp(n * (anchor + 1j * v - x) ** 2 / (2.0 * tau))
        a_vec = pline @ (wv * a_exp)
        lo, hi = self._w_range(y, 1.0, n / (2.0 * tau))
        w, ww, preal = self._p_on_real(lo, hi, panels)
        b_exp = np.exp(-n * (w - y) ** 2 / (2.0 * tau))
        b_vec = preal @ (ww * b_exp)
        return n / (2.0 * math.pi * tau) * np.sum(a_vec * b_vec)

    def kernel_X(self, x: float, y: float, tau: float,
                 anchor: Optional[float] = None) -> float:
        """Perturbed-ensemble kernel via the contour double integral.

        ``anchor`` fixes the abscissa of the vertical z-contour; the value is
        anchor-independent by analyticity (tested), and the default anchor x
        keeps the exponential factor decaying for any (x, y).
        """
        if tau <= 0:
            raise ConfigError("kernel_X needs tau > 0")
        if self.n > _DESK_N_KERNEL:
            raise ConfigError(f"kernel_X capped at n <= {_DESK_N_KERNEL}")
        anchor = x if anchor is None else anchor
        return self._doubling(
            lambda p: self._kernel_x_once(x, y, tau, anchor, p))

    # -- multi-time kernel ----------------------------------------------------

    def _a_tilde(self, x: float, t: float, anchor: float, panels: int):
        n = self.n
        beta = 1.0 - t
        decay = n * beta / (2.0 * t)
        z_max = self._z_cutoff(decay, anchor)
        v, wv, pline = self._p_on_line(anchor, z_max, panels)
        expo = np.exp(n * (x - beta * (anchor + 1j * v)) ** 2
                      / (2.0 * t * beta))
        return pline @ (wv * expo)

    def _b_tilde(self, y: float, t: float, panels: int):
        n = self.n
        beta = 1.0 - t
        c = n / (2.0 * t * beta)
        lo, hi = self._w_range(y, beta, c)
        w, ww, preal = self._p_on_real(lo, hi, panels)
        expo = np.exp(-c * (y - beta * w) ** 2)
        return preal @ (ww * expo)

    def _kernel_tilde_once(self, x: float, y: float, t: float, tp: float,
                           anchor: float, panels: int) -> complex:
        a_vec = self._a_tilde(x, t, anchor, panels)
        b_vec = self._b_tilde(y, tp, panels)
        return (self.n / (2.0 * math.pi * math.sqrt(t * tp))
                * np.sum(a_vec * b_vec))

    def kernel_tilde(self, x: float, y: float, t: float, tp: float,
                     anchor: Optional[float] = None) -> float:
        """The double-integral part of the multi-time kernel (no heat term)."""
        if not (0.0 < t < 1.0 and 0.0 < tp < 1.0):
            raise ConfigError("times must lie in (0, 1)")
        if self.n > _DESK_N_KERNEL:
            raise ConfigError(f"multi-time kernel capped at n <= {_DESK_N_KERNEL}")
        anchor = x / (1.0 - t) if anchor is None else anchor
        return self._doubling(
            lambda p: self._kernel_tilde_once(x, y, t, tp, anchor, p))

    def kernel_multitime(self, x: float, y: float, t: float, tp: float,
                         anchor: Optional[float] = None) -> float:
        """Full multi-time kernel: tilde part minus the t < t' heat factor."""
        val = self.kernel_tilde(x, y, t, tp, anchor=anchor)
        if t < tp:
            val -= self._heat(x, y, t, tp)
        return val

    def _heat(self, x, y, t, tp):
        n = self.n
        return (math.sqrt(n / (2.0 * math.pi * (tp - t)))
                * math.exp(-n * (x - y) ** 2 / (2.0 * (tp - t))
                           + n * x * x / (2.0 * (1.0 - t))
                           - n * y * y / (2.0 * (1.0 - tp))))

    def _doubling(self, once) -> float:
        prev = None
        panels = self.base_panels
        while panels <= _MAX_PANELS:
            val = once(panels)
            if prev is not None:
                scale = max(abs(val), abs(prev), 1e-30)
                if abs(val - prev) <= max(self.rtol * scale, 1e-12):
                    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
                        raise NonConvergent(
                            f"kernel imaginary part {val.imag:.3g} too large")
                    return float(val.real)
                prev = val
            else:
                prev = val
            panels *= 2
        raise NonConvergent("kernel quadrature did not stabilize")

    # -- gauge and microscopic rescaling --------------------------------------

    def _need_gauge(self) -> GaugeMachine:
        if self.gauge_machine is None:
            raise ConfigError("engine was built without singular-point data")
        return self.gauge_machine

    def gauge(self, u: float, t: float) -> GaugeData:
        return self._need_gauge().gauge(u, t)

    def gauge_single_time(self, u: float, tau: float) -> float:
        return self._need_gauge().gauge_single_time(u, tau)

    def rescaled_kernel(self, u: float, v: float, t: float, tp: float) -> float:
        """Gauge-fixed microscopic kernel around the moving singular point."""
        gm = self._need_gauge()
        n, g = self.n, gm.gamma
        ct, ctp = gm.c_hat(t), gm.c_hat(tp)
        x = gm.x_hat(t) + u / (ct * n ** g)
        y = gm.x_hat(tp) + v / (ctp * n ** g)
        pref = math.exp(-gm.gauge(u, t).H_hat + gm.gauge(v, tp).H_hat)
        return (pref / (math.sqrt(ct * ctp) * n ** g)
                * self.kernel_tilde(x, y, t, tp))

    # -- Eynard-Mehta overlap matrix ------------------------------------------

    def overlap_matrix(self, t: float, panels: int = 64) -> np.ndarray:
        """The biorthogonality overlap matrix; identity when all is well."""
        if self.n > _DESK_N_OVERLAP:
            raise ConfigError(f"overlap matrix capped at n <= {_DESK_N_OVERLAP}")
        n = self.n
        beta = 1.0 - t

        def entries(x_panels):
            lo, hi = self._w_range(0.0, beta, n / (2.0 * t * beta))
            x_lo = beta * lo - 1.0
            x_hi = beta * hi + 1.0
            xs, wx = _quad.gl_nodes(x_lo, x_hi, x_panels, 16)
            m = np.zeros((n, n), dtype=complex)
            for xi, wxi in zip(xs, wx):
                b_vec = self._b_tilde(xi, t, panels)
                a_vec = self._a_tilde(xi, t, xi / beta, panels)
                m += wxi * np.outer(b_vec, a_vec)
            return n / (2.0 * math.pi * t) * m

        prev = None
        x_panels = 32
        while x_panels <= 1024:
            m = entries(x_panels)
            if prev is not None and np.max(np.abs(m - prev)) < 1e-9:
                return m.real
            prev = m
            x_panels *= 2
        raise NonConvergent("overlap matrix quadrature did not stabilize")
