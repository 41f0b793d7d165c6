"""Builtin measure families and benchmark equilibrium pairs.

Everything here is constructible from a config file; the constructors attach
exact singular-point factorizations and, where the density has the form
P(s) * sqrt((s-a)(b-s)), the closed-form Cauchy data.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import _quad, expr
from .errors import ConfigError
from .measure import Atom, MeasureSpec, PotentialSpec, Segment, SingularPointSpec


def _sqrt_edge_expr(a: float, b: float) -> dict:
    # sqrt((s-a)(b-s))
    return expr.e_sqrt(expr.e_mul(
        expr.e_add(expr.e_s(), expr.e_const(-a)),
        expr.e_add(expr.e_const(b), expr.e_mul(expr.e_const(-1.0), expr.e_s()))))


def poly_times_sqrt(coefficients: Sequence[float], interval,
                    total_mass: float = 1.0,
                    singular: Optional[SingularPointSpec] = None) -> MeasureSpec:
    """Density P(s) * sqrt((s-a)(b-s)) with ascending coefficients of P."""
    a, b = map(float, interval)
    coeffs = tuple(float(c) for c in coefficients)
    poly = np.polynomial.Polynomial(coeffs)

    def density(s):
        s = np.asarray(s, dtype=float)
        return poly(s) * np.sqrt(np.maximum((s - a) * (b - s), 0.0))

    tree = expr.e_mul(expr.e_poly(coeffs), _sqrt_edge_expr(a, b))
    seg = Segment(a, b, density, 0.5, 0.5, sqrt_poly=coeffs, expr=tree)
    return MeasureSpec([seg], total_mass=total_mass, singular=singular)


def semicircle(tau: float) -> MeasureSpec:
    """Semicircle law of variance tau on [-2 sqrt(tau), 2 sqrt(tau)]."""
    if tau <= 0:
        raise ConfigError("semicircle needs tau > 0")
    edge = 2.0 * math.sqrt(tau)
    return poly_times_sqrt([1.0 / (2.0 * math.pi * tau)], (-edge, edge))


def atom_measure(locations: Sequence[float], masses: Sequence[float],
                 total_mass: Optional[float] = None) -> MeasureSpec:
    atoms = [Atom(float(l), float(m)) for l, m in zip(locations, masses)]
    tm = sum(a.mass for a in atoms) if total_mass is None else total_mass
    return MeasureSpec([], atoms=atoms, total_mass=tm)


def two_atom() -> MeasureSpec:
    """The oracle (delta_{-1} + delta_{+1}) / 2."""
    return atom_measure([-1.0, 1.0], [0.5, 0.5])


def jacobi_power(c: float, alpha: float, beta: float, interval,
                 total_mass: float = 1.0,
                 singular: Optional[SingularPointSpec] = None) -> MeasureSpec:
    """Density C (s-a)^alpha (b-s)^beta on [a, b]."""
    a, b = map(float, interval)

    def density(s):
        s = np.asarray(s, dtype=float)
        return c * np.maximum(s - a, 0.0) ** alpha * np.maximum(b - s, 0.0) ** beta

    sqrt_poly = None
    pa, pb = alpha - 0.5, beta - 0.5
    if pa >= 0 and pb >= 0 and pa == int(pa) and pb == int(pb):
        left = np.polynomial.Polynomial([-a, 1.0]) ** int(pa)
        right = np.polynomial.Polynomial([b, -1.0]) ** int(pb)
        sqrt_poly = tuple(c * (left * right).coef)
    tree = expr.e_mul(
        expr.e_const(c),
        expr.e_pow(expr.e_add(expr.e_s(), expr.e_const(-a)), alpha),
        expr.e_pow(expr.e_add(expr.e_const(b),
                              expr.e_mul(expr.e_const(-1.0), expr.e_s())), beta))
    seg = Segment(a, b, density, alpha, beta, sqrt_poly=sqrt_poly, expr=tree)
    return MeasureSpec([seg], total_mass=total_mass, singular=singular)


def _monomial_norm(k: int) -> float:
    # int_{-2}^{2} s^(2k) sqrt(4 - s^2) ds
    return (2.0 ** (2 * k + 2) * (math.pi / 2.0)
            * math.comb(2 * k, k) / (4.0 ** k * (k + 1)))


def monomial_critical(k: int) -> MeasureSpec:
    """Interior singular density s^(2k) sqrt(4-s^2) / norm on [-2, 2].

    For k = 1 this is the equilibrium measure of V = x^4/4 - x^2 with a
    quadratic interior zero at 0; k = 2 gives the symmetric quartic zero
    whose critical local law has exponent 1/3.
    """
    norm = _monomial_norm(k)
    c0 = (2.0 / norm) ** (1.0 / (2 * k + 1))

    def h(s):
        s = np.asarray(s, dtype=float)
        return 0.5 * np.sqrt(np.maximum(4.0 - s * s, 0.0))

    h_tree = expr.e_mul(expr.e_const(0.5), _sqrt_edge_expr(-2.0, 2.0))
    spec = SingularPointSpec(0.0, "interior", k, c0, h, h_expr=h_tree)
    coeffs = [0.0] * (2 * k) + [1.0 / norm]
    return poly_times_sqrt(coeffs, (-2.0, 2.0), singular=spec)


def quartic_critical() -> MeasureSpec:
    return monomial_critical(1)


def edge_critical() -> MeasureSpec:
    """Edge oracle (4/(5 pi)) (1-s)^(5/2) (1+s)^(1/2) on [-1, 1].

    A sub-normalized oracle (total mass 1/2) whose right edge at x* = 1
    vanishes with exponent 5/2; its critical constants are exact Beta
    integrals (tau_crit = 5/2, g2 = -4/5).
    """
    c = 4.0 / (5.0 * math.pi)
    c0 = (c * math.sqrt(2.0)) ** (2.0 / 7.0)

    def h(s):
        s = np.asarray(s, dtype=float)
        return np.sqrt(np.maximum(0.5 * (1.0 + s), 0.0))

    h_tree = expr.e_pow(expr.e_mul(
        expr.e_const(0.5), expr.e_add(expr.e_const(1.0), expr.e_s())), 0.5)
    spec = SingularPointSpec(1.0, "right_edge", 1, c0, h, h_expr=h_tree)
    return jacobi_power(c, 0.5, 2.5, (-1.0, 1.0), total_mass=0.5,
                        singular=spec)


def asymmetric_k2(mirrored: bool = False) -> MeasureSpec:
    """k = 2 interior point with asymmetric support, so g2 != 0.

    Density ~ s^4 sqrt((s+1)(2-s)) on [-1, 2]; the mirrored variant reflects
    the support to [-2, 1], flipping the sign of g2.
    """
    a, b = (-2.0, 1.0) if mirrored else (-1.0, 2.0)

    def raw(s):
        s = np.asarray(s, dtype=float)
        return s ** 4 * np.sqrt(np.maximum((s - a) * (b - s), 0.0))

    mass = _quad.segment_integral(raw, a, b, 0.5, 0.5, rtol=1e-13)
    c = 1.0 / mass
    c0 = (c * math.sqrt(-a * b)) ** 0.2

    def h(s):
        s = np.asarray(s, dtype=float)
        return np.sqrt(np.maximum((s - a) * (b - s), 0.0) / (-a * b))

    spec = SingularPointSpec(0.0, "interior", 2, c0, h)
    return poly_times_sqrt([0.0, 0.0, 0.0, 0.0, c], (a, b), singular=spec)


def offset_critical(delta: float = 0.3) -> MeasureSpec:
    """Interior k = 1 point at x* = delta, off the support center.

    Density ~ (s - delta)^2 sqrt(4 - s^2) on [-2, 2]; the broken symmetry
    makes the singular point drift under perturbation (x*_tau != x*).
    """
    if not -2.0 < delta < 2.0:
        raise ConfigError("delta must sit inside (-2, 2)")
    # int (s-d)^2 sqrt(4-s^2) ds = 2 pi + 2 pi d^2
    mass = 2.0 * math.pi * (1.0 + delta * delta)
    c = 1.0 / mass
    c0 = (c * math.sqrt(4.0 - delta * delta)) ** (1.0 / 3.0)

    def h(s):
        s = np.asarray(s, dtype=float)
        return (np.sqrt(np.maximum(4.0 - s * s, 0.0))
                / math.sqrt(4.0 - delta * delta))

    spec = SingularPointSpec(delta, "interior", 1, c0, h)
    coeffs = [delta * delta * c, -2.0 * delta * c, c]
    return poly_times_sqrt(coeffs, (-2.0, 2.0), singular=spec)


def quartic_potential() -> PotentialSpec:
    """V(x) = x^4/4 - x^2, the equilibrium partner of monomial_critical(1)."""
    return PotentialSpec([0.0, 0.0, -1.0, 0.0, 0.25])


def gaussian_potential() -> PotentialSpec:
    """V(x) = x^2/2, equilibrium partner of the unit semicircle."""
    return PotentialSpec([0.0, 0.0, 0.5])


FAMILIES = {
    "semicircle": semicircle,
    "two_atom": two_atom,
    "atoms": atom_measure,
    "jacobi_power": jacobi_power,
    "poly_times_sqrt": poly_times_sqrt,
    "monomial_critical": monomial_critical,
    "quartic_critical": quartic_critical,
    "edge_critical": edge_critical,
    "offset_critical": offset_critical,
    "asymmetric_k2": asymmetric_k2,
}
