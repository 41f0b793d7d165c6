"""Classification of singular points and the local power laws they produce.

``classify`` assembles all constants entering the local density laws:
inverse-power moments g_j, the principal-value constant with its polar form
(r, theta), the critical strength tau_crit, the drifted location x*_tau, and
a case label.  ``predicted_local_law`` emits the exact leading exponent and
prefactor of the matching branch, and ``fit_power_law`` recovers (exponent,
prefactor) from sampled density values in log-log coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (ConfigError, InsufficientSamples, NonPositive,
                     SideUndefined, Unclassified)
from .measure import MeasureSpec, SingularPointSpec
from . import freeconv

G2_ZERO_TOL = 1e-9

CASE_SUBCRITICAL = "Subcritical"
CASE_I = "I"
CASE_II_PLUS = "II+"
CASE_II_MINUS = "II-"
CASE_III = "III"
CASE_IV = "IV"
CASE_V = "V"


@dataclass
class CriticalData:
    """Dossier of a singular point at perturbation strength tau."""

    spec: SingularPointSpec
    tau: float
    kappa: float
    gamma: float
    tau_crit: float
    x_star_tau: float
    g: Tuple[float, ...]          # g_0 .. g_jmax (absolutely convergent ones)
    case_label: str
    pv: Optional[float] = None    # PV of h(s)/(x*-s), interior k=1 only
    r: Optional[float] = None
    theta: Optional[float] = None
    g2: Optional[float] = None    # int d mu/(s-x*)^3 when absolutely convergent
    g3: Optional[float] = None

    def c_tau(self, tau: float) -> float:
        return self.tau_crit / (self.tau_crit - tau) * self.spec.c0

    def x_star_at(self, m: MeasureSpec, tau: float) -> float:
        return freeconv.x_star_tau(m, self.spec.x_star, tau)


@dataclass
class PowerLaw:
    """psi ~ prefactor * distance^exponent on one side of the singular point."""

    exponent: float
    prefactor: float
    side: str                     # "left" | "right" | "both"
    window: Tuple[float, float] = (0.0, 0.0)
    residual: float = 0.0


def classify(m: MeasureSpec, spec: SingularPointSpec, tau: float) -> CriticalData:
    """Populate the singular-point dossier and decide the critical case."""
    if m.singular is None or abs(m.singular.x_star - spec.x_star) > 1e-12:
        raise ConfigError("spec does not match the measure's singular point")
    k = spec.k
    tc = freeconv.tau_crit(m, spec.x_star)
    xt = freeconv.x_star_tau(m, spec.x_star, tau)
    jmax = 2 * k - 1 if spec.kind == "interior" else 2 * k
    g = tuple(m.moment_g(spec.x_star, j) for j in range(jmax + 1))

    pv = r = theta = g2 = g3 = None
    if spec.kind == "interior" and k == 1:
        pv = m.principal_value_h(spec)
        r = math.hypot(pv, math.pi)
        theta = math.atan2(math.pi, pv)  # arccot(pv/pi) in (0, pi)
    if spec.kind == "interior" and k >= 2:
        g2 = g[2]
        if abs(g2) < G2_ZERO_TOL:
            g3 = g[3]
    if spec.kind != "interior":
        g2 = g[2]

    if tau < tc * (1.0 - 1e-12):
        label = CASE_SUBCRITICAL
    elif spec.kind == "interior":
        if k == 1:
            label = CASE_I
        elif abs(g2) < G2_ZERO_TOL:
            label = CASE_III
        else:
            label = CASE_II_PLUS if g2 > 0 else CASE_II_MINUS
    else:
        # mirror convention: a left edge classifies via the reflected measure,
        # whose third moment is -g2
        g2_eff = g2 if spec.kind == "right_edge" else -g2
        if abs(g2_eff) < G2_ZERO_TOL:
            raise Unclassified("edge point with vanishing third moment")
        label = CASE_IV if g2_eff < 0 else CASE_V

    return CriticalData(spec=spec, tau=tau, kappa=spec.kappa,
                        gamma=spec.gamma, tau_crit=tc, x_star_tau=xt,
                        g=g, case_label=label, pv=pv, r=r, theta=theta,
                        g2=g2, g3=g3)


def predicted_local_law(cd: CriticalData, tau: float, side: str) -> PowerLaw:
    """Leading local law psi ~ prefactor * |s - x*_tau|^exponent.

    ``side`` is taken in the original orientation; for a left-edge point the
    roles of the two sides are mirrored internally.
    """
    if side not in ("left", "right"):
        raise ConfigError("side must be 'left' or 'right'")
    spec = cd.spec
    k = spec.k
    tc = cd.tau_crit
    label = cd.case_label
    mirrored = spec.kind == "left_edge"
    eff_side = {"left": "right", "right": "left"}[side] if mirrored else side

    if label == CASE_SUBCRITICAL:
        if not tau < tc:
            raise ConfigError("subcritical law requested at tau >= tau_crit")
        c_tau = cd.c_tau(tau)
        if spec.kind == "interior":
            return PowerLaw(2 * k, c_tau ** (2 * k + 1), "both")
        if eff_side == "right":
            raise SideUndefined(
                "density vanishes identically on the outer side of the edge")
        return PowerLaw(2 * k + 0.5, c_tau ** (2 * k + 1.5), side)

    if abs(tau - tc) > 1e-9 * max(1.0, tc):
        raise ConfigError("critical-case law requested away from tau_crit")

    if label == CASE_I:
        num = math.cos(0.5 * cd.theta) if eff_side == "left" else math.sin(0.5 * cd.theta)
        pref = num / (math.pi * tc ** 1.5 * spec.c0 ** 1.5 * math.sqrt(cd.r))
        return PowerLaw(0.5, pref, side)

    if label in (CASE_II_PLUS, CASE_II_MINUS):
        g2 = abs(cd.g2)
        steep = spec.c0 ** (2 * k + 1) / (2.0 * (tc * g2) ** (k + 0.5))
        shallow = 1.0 / (math.pi * tc ** 1.5 * math.sqrt(g2))
        # g2 > 0: steep branch (exponent k-1/2) on the left, sqrt on the right
        steep_side = "left" if label == CASE_II_PLUS else "right"
        if eff_side == steep_side:
            return PowerLaw(k - 0.5, steep, side)
        return PowerLaw(0.5, shallow, side)

    if label == CASE_III:
        pref = math.sqrt(3.0) / (2.0 * math.pi * tc ** (4.0 / 3.0)
                                 * cd.g3 ** (1.0 / 3.0))
        return PowerLaw(1.0 / 3.0, pref, "both")

    if label == CASE_IV:
        if eff_side == "right":
            raise SideUndefined(
                "density vanishes identically right of the critical edge")
        g2 = abs(cd.g2)
        return PowerLaw(0.5, 1.0 / (math.pi * tc ** 1.5 * math.sqrt(g2)), side)

    if label == CASE_V:
        g2 = abs(cd.g2)
        if eff_side == "left":
            pref = spec.c0 ** (2 * k + 1.5) / (2.0 * (tc * g2) ** (k + 0.75))
            return PowerLaw(k - 0.25, pref, side)
        return PowerLaw(0.5, 1.0 / (math.pi * tc ** 1.5 * math.sqrt(g2)), side)

    raise Unclassified(f"no local law for case {label!r}")


def fit_power_law(samples: Sequence[Tuple[float, float]],
                  window: Tuple[float, float]) -> PowerLaw:
    """Least-squares line in log-log coordinates over a distance window.

    samples: (distance > 0, psi > 0) pairs; returns exponent = slope,
    prefactor = exp(intercept), residual = max relative deviation.
    """
    lo, hi = window
    pts = [(d, p) for d, p in samples if lo <= d <= hi]
    if len(pts) < 8:
        raise InsufficientSamples(
            f"{len(pts)} samples in window [{lo}, {hi}]; need >= 8")
    d = np.array([p[0] for p in pts])
    psi = np.array([p[1] for p in pts])
    if np.any(d <= 0) or np.any(psi <= 0):
        raise NonPositive("power-law fit needs positive distances and values")
    slope, intercept = np.polyfit(np.log(d), np.log(psi), 1)
    pref = math.exp(intercept)
    fit = pref * d ** slope
    residual = float(np.max(np.abs(psi / fit - 1.0)))
    return PowerLaw(float(slope), pref, "both", (lo, hi), residual)


def density_samples(solver: "freeconv.SubordinationSolver", x_center: float,
                    side: str, window: Tuple[float, float],
                    count: int = 32) -> list:
    """(distance, psi) pairs on one side of x_center, log-spaced in distance."""
    sgn = -1.0 if side == "left" else 1.0
    dists = np.geomspace(window[0], window[1], count)
    out = []
    for dd in dists:
        out.append((float(dd), solver.density_at(x_center + sgn * dd)))
    return out
