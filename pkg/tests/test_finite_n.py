"""Orthonormal bases, determinantal kernels, gauge and rescaling limits."""

import math

import numpy as np
import pytest

from freesemi import presets
from freesemi._quad import gl_nodes
from freesemi.errors import ConfigError
from freesemi.finite_n import GaugeMachine, KernelEngine, build_basis


@pytest.fixture(scope="module")
def gauss_basis_n4():
    return build_basis(presets.gaussian_potential(), 4, 8)


@pytest.fixture(scope="module")
def quartic_engine_n4(quartic_measure):
    basis = build_basis(presets.quartic_potential(), 4, 8)
    return KernelEngine(basis, singular=quartic_measure.singular)


@pytest.fixture(scope="module")
def quartic_gauge_n8(quartic_measure):
    return GaugeMachine(presets.quartic_potential(),
                        quartic_measure.singular, 8)


class TestBasis:
    def test_scaled_hermite_recurrence(self, gauss_basis_n4):
        b = gauss_basis_n4
        np.testing.assert_allclose(b.betas[:8] ** 2 * 4,
                                   np.arange(1, 9), rtol=1e-12)
        assert b.p0 == pytest.approx((4 / (2 * math.pi)) ** 0.25, rel=1e-12)

    def test_even_potential_alphas_vanish(self, gauss_basis_n4):
        assert np.max(np.abs(gauss_basis_n4.alphas)) < 1e-12
        bq = build_basis(presets.quartic_potential(), 6, 12)
        assert np.max(np.abs(bq.alphas)) < 1e-12

    def test_orthonormality_independent_quadrature(self):
        v = presets.quartic_potential()
        b = build_basis(v, 6, 12)
        nodes, w = gl_nodes(-3.6, 3.6, 380, 16)  # not the build grid
        p = b.evaluate(nodes)
        gram = (p * (w * np.exp(-6 * v(nodes)))) @ p.T
        assert np.max(np.abs(gram - np.eye(13))) <= 1e-8

    def test_degree_cap(self):
        with pytest.raises(ConfigError):
            build_basis(presets.gaussian_potential(), 4, 30)


class TestKernelM:
    @pytest.mark.parametrize("n", [2, 4, 6, 8])
    def test_trace_identity(self, n):
        for v, half_width in ((presets.gaussian_potential(), 6.0),
                              (presets.quartic_potential(), 3.4)):
            b = build_basis(v, n, max(n, 8))
            e = KernelEngine(b)
            nodes, w = gl_nodes(-half_width, half_width, 320, 16)
            trace = float(np.sum(w * e.kernel_M(nodes, nodes)))
            assert trace == pytest.approx(n, abs=1e-6)

    def test_n1_gaussian_value(self):
        b = build_basis(presets.gaussian_potential(), 1, 4)
        e = KernelEngine(b)
        assert float(e.kernel_M(np.asarray(0.0), np.asarray(0.0))) == \
            pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-10)

    def test_reproducing_property(self, quartic_engine_n4):
        e = quartic_engine_n4
        nodes, w = gl_nodes(-3.4, 3.4, 320, 16)
        for x, z in ((0.3, -0.5), (1.0, 1.2), (0.0, 0.0)):
            lhs = float(np.sum(w * e.kernel_M(np.full_like(nodes, x), nodes)
                               * e.kernel_M(nodes, np.full_like(nodes, z))))
            rhs = float(e.kernel_M(np.asarray(x), np.asarray(z)))
            assert lhs == pytest.approx(rhs, abs=1e-6)

    def test_diagonal_nonnegative_symmetric(self, quartic_engine_n4):
        e = quartic_engine_n4
        xs = np.linspace(-2.5, 2.5, 11)
        assert np.all(e.kernel_M(xs, xs) >= 0)
        assert float(e.kernel_M(np.asarray(0.4), np.asarray(-1.0))) == \
            pytest.approx(float(e.kernel_M(np.asarray(-1.0), np.asarray(0.4))),
                          rel=1e-12)


class TestKernelPE:
    def test_gauge_identity_with_kernel_m(self, quartic_engine_n4):
        e = quartic_engine_n4
        v = e.basis.potential
        for x, y in ((0.7, -0.4), (1.2, 0.1)):
            pe = complex(e.kernel_PE(np.asarray(x + 0j), np.asarray(y)))
            km = float(e.kernel_M(np.asarray(x), np.asarray(y)))
            assert pe == pytest.approx(km * math.exp(2.0 * (v(x) - v(y))),
                                       rel=1e-9)

    def test_conjugate_symmetry(self, quartic_engine_n4):
        e = quartic_engine_n4
        z = 0.3 + 0.8j
        a = complex(e.kernel_PE(np.asarray(np.conj(z)), np.asarray(0.5)))
        b = complex(e.kernel_PE(np.asarray(z), np.asarray(0.5)))
        assert a == pytest.approx(np.conj(b), rel=1e-12)

    def test_n1_gaussian_is_constant_in_z(self):
        b = build_basis(presets.gaussian_potential(), 1, 4)
        e = KernelEngine(b)
        for w in (0.0, 0.7):
            got = complex(e.kernel_PE(np.asarray(0.5j), np.asarray(w)))
            expect = math.sqrt(1.0 / (2 * math.pi)) * math.exp(-w * w / 2)
            assert got == pytest.approx(expect, rel=1e-10)


class TestKernelX:
    def test_n1_gaussian_one_point(self):
        b = build_basis(presets.gaussian_potential(), 1, 4)
        e = KernelEngine(b)
        assert e.kernel_X(0.0, 0.0, 1.0) == pytest.approx(
            1.0 / math.sqrt(4 * math.pi), abs=1e-10)

    def test_small_tau_approaches_kernel_m(self, quartic_engine_n4):
        e = quartic_engine_n4
        worst = 0.0
        for x in np.linspace(-2.2, 2.2, 12):
            km = float(e.kernel_M(np.asarray(x), np.asarray(x)))
            kx = e.kernel_X(float(x), float(x), 1e-3)
            worst = max(worst, abs(km - kx))
        assert worst <= 1e-2

    def test_tau_halving_convergence(self, quartic_engine_n4):
        e = quartic_engine_n4
        km = float(e.kernel_M(np.asarray(0.8), np.asarray(0.8)))
        devs = [abs(e.kernel_X(0.8, 0.8, tau) - km)
                for tau in (4e-3, 2e-3, 1e-3)]
        assert devs[2] < devs[1] < devs[0]

    def test_parity_for_even_potential(self, quartic_engine_n4):
        e = quartic_engine_n4
        for x in (0.5, 1.3):
            assert e.kernel_X(x, x, 0.7) == pytest.approx(
                e.kernel_X(-x, -x, 0.7), abs=1e-8)

    def test_positivity_on_grid(self, quartic_engine_n4):
        e = quartic_engine_n4
        for x in np.linspace(-2.0, 2.0, 9):
            assert e.kernel_X(float(x), float(x), 0.5) >= -1e-8

    def test_contour_shift_invariance(self, quartic_engine_n4):
        e = quartic_engine_n4
        base = e.kernel_X(0.3, -0.2, 0.5, anchor=0.0)
        for shift in (0.2, -0.2):
            moved = e.kernel_X(0.3, -0.2, 0.5, anchor=shift)
            assert abs(moved - base) <= 1e-7

    def test_desk_scale_cap(self):
        b = build_basis(presets.gaussian_potential(), 14, 16)
        e = KernelEngine(b)
        with pytest.raises(ConfigError):
            e.kernel_X(0.0, 0.0, 1.0)


class TestMultitime:
    def test_single_time_equivalence(self, quartic_engine_n4):
        e = quartic_engine_n4
        tau = 0.4
        t = tau / (1 + tau)
        for x, y in ((0.1, 0.2), (1.5, 1.4), (-0.6, 0.9)):
            k_x = e.kernel_X(x, y, tau)
            k_mt = e.kernel_tilde(x / (1 + tau), y / (1 + tau), t, t) / (1 + tau)
            assert abs(k_x - k_mt) <= 1e-7

    def test_heat_kernel_mass(self, quartic_engine_n4):
        e = quartic_engine_n4
        n, t, tp = e.n, 0.2, 0.5
        xs, w = gl_nodes(-4.0, 4.0, 200, 16)
        gauss = (math.sqrt(n / (2 * math.pi * (tp - t)))
                 * np.exp(-n * (0.3 - xs) ** 2 / (2 * (tp - t))))
        assert float(np.sum(w * gauss)) == pytest.approx(1.0, abs=1e-10)

    def test_heat_subtraction_only_forward_in_time(self, quartic_engine_n4):
        e = quartic_engine_n4
        x, y = 0.2, 0.3
        tilde = e.kernel_tilde(x, y, 0.3, 0.2)
        full = e.kernel_multitime(x, y, 0.3, 0.2)
        assert tilde == full  # t > t': no heat term
        assert e.kernel_multitime(x, y, 0.2, 0.3) != \
            e.kernel_tilde(x, y, 0.2, 0.3)

    @pytest.mark.parametrize("n,t", [(2, 0.3), (3, 0.3), (4, 0.2), (4, 0.45)])
    def test_overlap_matrix_identity(self, n, t, quartic_measure):
        b = build_basis(presets.quartic_potential(), n, max(n, 8))
        e = KernelEngine(b, singular=quartic_measure.singular)
        m = e.overlap_matrix(t)
        assert np.max(np.abs(m - np.eye(n))) <= 1e-6

    def test_overlap_cap(self, quartic_measure):
        b = build_basis(presets.quartic_potential(), 6, 8)
        e = KernelEngine(b, singular=quartic_measure.singular)
        with pytest.raises(ConfigError):
            e.overlap_matrix(0.3)


class TestGauge:
    def test_zero_point_values(self, quartic_gauge_n8):
        gm = quartic_gauge_n8
        g = gm.gauge(0.0, 0.2)
        assert g.s_n == 0.0
        assert g.R_n_value == 0.0
        # t n V'(x*)^2 / (8 (1-t)) vanishes for the quartic (V'(0) = 0)
        assert g.H_hat == 0.0

    def test_saddle_residual(self, quartic_gauge_n8):
        gm = quartic_gauge_n8
        for u in (-1.2, 0.4, 2.0):
            s = gm.saddle(u, 0.3)
            assert gm.saddle_residual(u, 0.3, s) <= 1e-10

    def test_hhat_matches_symbolic_expansion(self, quartic_gauge_n8):
        # independent derivation for V = x^4/4 - x^2 at x* = 0:
        #   R_n(s) = s^4 / (8 c0^4 n^(1/3)),  R_n'(s) = s^3 / (2 c0^4 n^(1/3))
        #   H_hat  = -u^2 n^(1/3) / (2 c0 c_t (1-t)) + R_hat(s_n)
        gm = quartic_gauge_n8
        n = gm.n
        c0 = gm.c0
        t = 0.25
        ct = gm.c_hat(t)
        for u in (0.3, -0.8, 1.5):
            s = gm.saddle(u, t)
            # fixed point of the independently coded map
            assert s == pytest.approx(
                u - t * c0 * ct * n ** (-1 / 3) * s ** 3 / (2 * c0 ** 4 * n ** (1 / 3)),
                rel=1e-12)
            r_hat = (s ** 4 / (8 * c0 ** 4 * n ** (1 / 3))
                     + n ** (1 / 3) * (s - u) ** 2 / (2 * t * c0 * ct))
            expected = (-u * u * n ** (1 / 3) / (2 * c0 * ct * (1 - t))
                        + r_hat)
            assert gm.gauge(u, t).H_hat == pytest.approx(expected, rel=1e-12)

    def test_single_time_gauge_relation(self, quartic_gauge_n8):
        gm = quartic_gauge_n8
        tau = 0.35
        t = tau / (1 + tau)
        for u in (0.5, -1.0):
            assert gm.gauge_single_time(u, tau) == pytest.approx(
                gm.gauge(u, t).H_hat, rel=1e-12)  # V'(0) = 0 kills the shift

    def test_determinant_gauge_invariance(self, quartic_engine_n4):
        e = quartic_engine_n4
        t, tp = 0.2, 0.3
        us = [-0.5, 0.2, 0.9]
        k = np.array([[e.kernel_multitime(x, y, t, tp) for y in us]
                      for x in us])
        h = np.array([e.gauge(u, t).H_hat for u in us])
        conj = np.exp(-h[:, None] + h[None, :]) * k
        d0, d1 = np.linalg.det(k), np.linalg.det(conj)
        assert d1 == pytest.approx(d0, rel=1e-12)


class TestRescaled:
    def test_n1_offdiagonal_determinant_identity(self):
        # a 1-point process has R_2 = 0: K(x,y) K(y,x) = K(x,x) K(y,y);
        # this pins the off-diagonal values in a gauge-free way
        b = build_basis(presets.gaussian_potential(), 1, 4)
        e = KernelEngine(b)
        x, y, tau = 0.4, -0.3, 0.8
        lhs = e.kernel_X(x, y, tau) * e.kernel_X(y, x, tau)
        rhs = e.kernel_X(x, x, tau) * e.kernel_X(y, y, tau)
        assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_symmetry_defect_shrinks_with_n(self, quartic_measure):
        # the raw kernel is one diagonal conjugation away from symmetric; the
        # gauge-fixed rescaling becomes symmetric only as n grows
        defects = []
        for n in (4, 8):
            b = build_basis(presets.quartic_potential(), n, max(n, 8))
            e = KernelEngine(b, singular=quartic_measure.singular)
            a = e.rescaled_kernel(0.4, -0.3, 0.2, 0.2)
            c = e.rescaled_kernel(-0.3, 0.4, 0.2, 0.2)
            defects.append(abs(a / c - 1.0))
        assert defects[1] < defects[0]

    def test_cauchy_differences_shrink(self, quartic_measure):
        vals = {}
        for n in (4, 6, 8):
            b = build_basis(presets.quartic_potential(), n, max(n, 8))
            e = KernelEngine(b, singular=quartic_measure.singular)
            vals[n] = e.rescaled_kernel(0.5, -0.3, 0.2, 0.2)
        assert abs(vals[6] - vals[8]) <= abs(vals[4] - vals[6])


class TestScaledHeat:
    def test_off_diagonal_decay(self, quartic_measure):
        v = presets.quartic_potential()
        spec = quartic_measure.singular
        vals = []
        for n in (4, 8, 16):
            gm = GaugeMachine(v, spec, n)
            vals.append(gm.scaled_heat(0.4, 1.1, 0.2, 0.3))
        assert vals[2] < vals[1] < vals[0]

    def test_diagonal_growth_rate(self, quartic_measure):
        v = presets.quartic_potential()
        spec = quartic_measure.singular
        gm1 = GaugeMachine(v, spec, 64)
        gm2 = GaugeMachine(v, spec, 256)
        ratio = gm2.scaled_heat(0.4, 0.4, 0.2, 0.3) / \
            gm1.scaled_heat(0.4, 0.4, 0.2, 0.3)
        # n^((1-2 gamma)/2) = n^(1/6) growth for kappa = 2
        assert ratio == pytest.approx(4.0 ** (1.0 / 6.0), rel=0.02)

    def test_matches_gaussian_form(self, quartic_measure):
        # F_n ~ sqrt(n^(1-2g)) / (sqrt(2 pi) sigma) exp(-n^(1-2g)(u-v)^2/(2 sigma^2))
        v = presets.quartic_potential()
        spec = quartic_measure.singular
        gm = GaugeMachine(v, spec, 4096)
        t, tp = 0.2, 0.3
        sig2 = gm.sigma_sq(t, tp)
        n13 = 4096 ** (1.0 / 3.0)
        for u, vv in ((0.3, 0.3), (0.2, 0.25)):
            model = (math.sqrt(n13) / math.sqrt(2 * math.pi * sig2)
                     * math.exp(-n13 * (u - vv) ** 2 / (2 * sig2)))
            assert gm.scaled_heat(u, vv, t, tp) == pytest.approx(model,
                                                                 rel=0.05)
