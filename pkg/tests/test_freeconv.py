"""Subordination solver against closed-form free-convolution oracles."""

import math

import numpy as np
import pytest

from freesemi.freeconv import (SubordinationSolver, rightmost_flat_check,
                               tau_crit, x_star_tau)


def semicircle_density(tau, x):
    return np.sqrt(np.maximum(4.0 * tau - x * x, 0.0)) / (2.0 * math.pi * tau)


class TestTauCrit:
    def test_quartic(self, quartic_measure):
        assert tau_crit(quartic_measure, 0.0) == pytest.approx(1.0, rel=1e-9)

    def test_two_atom(self, two_atom):
        assert tau_crit(two_atom, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_edge(self, edge_measure):
        assert tau_crit(edge_measure, 1.0) == pytest.approx(2.5, rel=1e-9)


class TestXStarTau:
    def test_symmetric_fixed_point(self, quartic_measure):
        for tau in (0.3, 1.0):
            assert x_star_tau(quartic_measure, 0.0, tau) == pytest.approx(
                0.0, abs=1e-9)

    def test_matches_potential_drift(self, quartic_measure, quartic_potential):
        # x*_tau = x* + tau V'(x*)/2 for equilibrium pairs
        v1 = quartic_potential.deriv_at(0.0, 1)
        got = x_star_tau(quartic_measure, 0.0, 0.7)
        assert got == pytest.approx(0.0 + 0.35 * v1, abs=1e-7)

    def test_edge_drift(self, edge_measure):
        assert x_star_tau(edge_measure, 1.0, 2.5) == pytest.approx(2.0,
                                                                   abs=1e-9)


class TestBoundaryCurve:
    def test_two_atom_values(self, two_atom):
        s = SubordinationSolver(two_atom, 2.0)
        assert s.y_tau(0.0) == pytest.approx(1.0, rel=1e-9)
        s_sub = SubordinationSolver(two_atom, 0.5)
        assert s_sub.y_tau(0.0) == 0.0

    def test_far_field_vanishes(self, quartic_measure):
        s = SubordinationSolver(quartic_measure, 0.5)
        assert s.y_tau(quartic_measure.support_max
                       + quartic_measure.diameter) == 0.0

    def test_monotone_rho(self, quartic_measure):
        s = SubordinationSolver(quartic_measure, 0.8, boundary_points=48)
        rhos = [s.rho(u) for u, _ in s.boundary_samples]
        assert all(b > a for a, b in zip(rhos, rhos[1:]))

    def test_boundary_nonnegative(self, edge_measure):
        s = SubordinationSolver(edge_measure, 1.0)
        assert all(y >= 0.0 for _, y in s.boundary_samples)


class TestSubordinate:
    def test_two_atom_center(self, two_atom):
        s = SubordinationSolver(two_atom, 2.0)
        assert s.subordinate(0.0) == pytest.approx(1j, abs=1e-9)

    def test_semicircle_value(self, semicircle1):
        # F_tau(z) = z - tau G_{lambda_{1+tau}}(z); at z=0, tau=3: 1.5i
        s = SubordinationSolver(semicircle1, 3.0)
        assert s.subordinate(0.0) == pytest.approx(1.5j, abs=1e-9)

    def test_singular_point_maps_back(self, quartic_measure, edge_measure):
        for m, xs, tau in ((quartic_measure, 0.0, 0.5),
                           (quartic_measure, 0.0, 1.0),
                           (edge_measure, 1.0, 1.0),
                           (edge_measure, 1.0, 2.5)):
            s = SubordinationSolver(m, tau)
            xt = x_star_tau(m, xs, tau)
            f = s.subordinate(xt)
            assert f.real == pytest.approx(xs, abs=1e-8)
            # the boundary curve is steep at an edge x*; the preimage of the
            # floating-point x*_tau may carry a tiny positive height
            assert f.imag <= 1e-6

    def test_subordination_identity(self, quartic_measure, rng):
        # F + tau G(F) = x at every evaluated point
        s = SubordinationSolver(quartic_measure, 0.6)
        for x in rng.uniform(-2.5, 2.5, 8):
            f = s.subordinate(float(x))
            resid = abs(f + 0.6 * s._g(f) - x)
            assert resid <= 1e-8


class TestDensity:
    def test_semicircle_semigroup(self, semicircle1):
        tau = 0.5
        s = SubordinationSolver(semicircle1, tau)
        edge = 2.0 * math.sqrt(1 + tau)
        grid = np.linspace(-edge + 0.05, edge - 0.05, 41)
        prof = s.density(grid)
        exact = semicircle_density(1 + tau, grid)
        assert np.max(np.abs(prof.psi - exact)) <= 1e-6

    def test_two_atom_center_values(self, two_atom):
        for tau in (1.5, 2.0, 4.0):
            s = SubordinationSolver(two_atom, tau)
            assert s.density_at(0.0) == pytest.approx(
                math.sqrt(tau - 1.0) / (math.pi * tau), abs=1e-7)
        for tau in (0.25, 0.9):
            s = SubordinationSolver(two_atom, tau)
            assert s.density_at(0.0) <= 1e-10

    def test_mass_conservation(self, quartic_measure):
        for tau in (0.1, 0.5, 1.0):
            s = SubordinationSolver(quartic_measure, tau)
            pad = 2.0 * math.sqrt(tau) + 0.2
            grid = np.linspace(-2 - pad, 2 + pad, 801)
            prof = s.density(grid)
            assert prof.mass() == pytest.approx(1.0, abs=1e-4)

    def test_density_vanishes_at_moving_singular_point(self, quartic_measure,
                                                       edge_measure):
        # tolerance widens to 1e-7 in the cusp region at tau = tau_crit
        for m, xs in ((quartic_measure, 0.0), (edge_measure, 1.0)):
            for frac, tol in ((0.4, 1e-8), (1.0, 1e-7)):
                tau = frac * tau_crit(m, xs)
                s = SubordinationSolver(m, tau)
                xt = x_star_tau(m, xs, tau)
                assert s.density_at(xt) <= tol

    def test_quad_path_matches_closed_path(self, quartic_measure):
        fast = SubordinationSolver(quartic_measure, 0.5)
        slow = SubordinationSolver(quartic_measure, 0.5, method="quad")
        for x in (0.3, 1.1):
            assert slow.density_at(x) == pytest.approx(fast.density_at(x),
                                                       abs=1e-8)
            assert slow.subordinate(x) == pytest.approx(fast.subordinate(x),
                                                        abs=1e-8)

    def test_measure_without_closed_form(self):
        # generic Jacobi exponents force the quadrature path end to end
        from freesemi import presets
        from scipy.special import beta as beta_fn
        c = 1.0 / beta_fn(1.3, 1.7)
        m = presets.jacobi_power(c, 0.3, 0.7, (0.0, 1.0))
        s = SubordinationSolver(m, 0.4)
        tgt = 1.0 / 0.4
        for x in (0.2, 0.7):
            y = s.y_tau(x)
            assert y > 0
            assert s._inv_square(x, y) == pytest.approx(tgt, rel=1e-8)
            f = s.subordinate(x)  # residual asserted inside
            assert s.density_at(x) > 0.0
            assert f.imag > 0


class TestRightmostFlat:
    def test_edge_flat_at_subcritical_and_critical(self, edge_measure):
        for tau in (1.0, 2.5):
            s = SubordinationSolver(edge_measure, tau)
            assert rightmost_flat_check(s, 1.0) is True

    def test_interior_not_flat(self, quartic_measure):
        s = SubordinationSolver(quartic_measure, 0.5)
        assert rightmost_flat_check(s, 0.0) is False
