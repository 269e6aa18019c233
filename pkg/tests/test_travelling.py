import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FLAGSHIP, random_states
from gtwaves.errors import CompatibilityViolation, SubShockSingularity
from gtwaves.models import (BarotropicModel, ForceSpec, GtwClosedForm,
                            PressureLaw)
from gtwaves.systems import GradientOperator, decompose
from gtwaves.travelling import (TravellingFrame, detect_sonic_locus,
                                gtw_compat_residual, integrate_gtw,
                                integrate_to_point, pi_coefficients)
from oracles import mixed_partial_travelling


def flagship_frame():
    return TravellingFrame.barotropic_family(s=FLAGSHIP["s"],
                                             k1=FLAGSHIP["k1"])


class TestPiCoefficients:
    def test_f_equals_b_gives_constant_state(self, flagship_system):
        frame = TravellingFrame(
            s=2.5, F=lambda U: np.asarray(flagship_system.B(U)),
            label="F=B")
        pis = pi_coefficients(flagship_system, frame, np.array([1.2, 0.4]))
        np.testing.assert_allclose(pis.pi, 0.0, atol=1e-14)

    def test_flagship_pi_sum_is_alpha(self, flagship_system):
        # pi_1 + pi_2 = -k1 c beta = -k1 rho for beta = rho / c
        frame = flagship_frame()
        U = np.array([1.0, FLAGSHIP["s"] + 0.1])
        pis = pi_coefficients(flagship_system, frame, U)
        np.testing.assert_allclose(pis.pi.sum(), -FLAGSHIP["k1"] * 1.0,
                                   atol=1e-12)

    def test_sub_shock_raises_with_family_and_state(self, law_g2):
        model = BarotropicModel(
            pressure=law_g2,
            force=ForceSpec.gtw_family(k1=FLAGSHIP["k1"], s=FLAGSHIP["s"]))
        sysm = model.system()
        frame = TravellingFrame.homogeneous(s=1.0)   # B - F = B != 0
        c1 = law_g2.c(1.0)
        U_star = np.array([1.0, 1.0 - c1])           # lambda^2 = u + c = s
        with pytest.raises(SubShockSingularity) as err:
            pi_coefficients(sysm, frame, U_star)
        assert err.value.family == 1
        np.testing.assert_allclose(err.value.state, U_star)

    def test_removable_point_flagged_and_finite(self, flagship_system):
        # the constraint-compatible family keeps both projections zero on
        # the sonic loci, so the crossing is removable: pi stays finite
        frame = flagship_frame()
        c1 = np.sqrt(2.0)
        U_star = np.array([1.0, FLAGSHIP["s"] - c1])  # lambda^2 = s
        pis = pi_coefficients(flagship_system, frame, U_star)
        assert pis.removable[1]
        assert np.all(np.isfinite(pis.pi))
        # limit value: pi_2 = (k1 beta / 2)(u - s - c) -> -k1 beta c = -k1 rho
        np.testing.assert_allclose(pis.pi[1], -FLAGSHIP["k1"] * 1.0,
                                    rtol=1e-4)

    @settings(max_examples=25, deadline=None)
    @given(rho=st.floats(0.3, 4.0), u=st.floats(-2.0, 3.0))
    def test_gap_identity(self, rho, u):
        # (lambda^i - s) pi_i == l^i . (B - F) to near machine precision
        model = BarotropicModel(
            pressure=PressureLaw.polytropic(1.0, 2.0),
            force=ForceSpec.gtw_family(k1=0.5, s=1.0))
        sysm = model.system()
        frame = TravellingFrame.barotropic_family(s=1.0, k1=0.5)
        U = np.array([rho, u])
        try:
            pis = pi_coefficients(sysm, frame, U)
        except SubShockSingularity:
            return
        dec = decompose(sysm, U)
        target = dec.left @ (sysm.source(U) - frame.F(U))
        defect = np.abs(pis.gaps * pis.pi - target)
        scale = max(1.0, float(np.max(np.abs(target))))
        assert np.max(defect[~pis.removable]) <= 1e-12 * scale \
            if (~pis.removable).any() else True

    def test_reconstruction_defect_small(self, flagship_system, rng):
        frame = flagship_frame()
        for U in random_states(rng, n=10):
            pis = pi_coefficients(flagship_system, frame, U)
            assert pis.reconstruction_defect <= 1e-10


class TestCompatResidual:
    def test_zero_source_identically_compatible(self, flagship_system, rng):
        frame = TravellingFrame.homogeneous(s=0.7)
        for U in random_states(rng, n=8, u_range=(2.8, 4.0)):
            res = gtw_compat_residual(flagship_system, frame, U)
            assert np.max(np.abs(res)) <= 1e-12

    def test_flagship_family_compatible_at_random_states(self,
                                                         flagship_system,
                                                         rng):
        frame = flagship_frame()
        for U in random_states(rng, n=20, rho_range=(0.4, 3.0),
                               u_range=(-1.5, 2.8)):
            if np.min(np.abs(decompose(flagship_system, U).lambdas
                             - frame.s)) < 1e-3:
                continue
            res = gtw_compat_residual(flagship_system, frame, U)
            assert np.max(np.abs(res)) <= 1e-6

    def test_analytic_gradients_agree_with_central(self, flagship_system):
        frame = flagship_frame()
        U = np.array([1.4, 2.1])
        c = gtw_compat_residual(flagship_system, frame, U)
        a = gtw_compat_residual(flagship_system, frame, U,
                                GradientOperator(mode="analytic"))
        assert np.max(np.abs(c - a)) <= 1e-7
        assert np.max(np.abs(a)) <= 1e-10

    def test_matches_mixed_partial_oracle(self, flagship_system, rng):
        frame = TravellingFrame(
            s=1.0, F=lambda U: np.array([0.05 * U[0], U[1] ** 2]),
            label="generic")
        for U in random_states(rng, n=8, rho_range=(0.7, 2.0),
                               u_range=(1.5, 2.5)):
            if np.min(np.abs(decompose(flagship_system, U).lambdas
                             - frame.s)) < 5e-2:
                continue
            res = gtw_compat_residual(flagship_system, frame, U)
            oracle = mixed_partial_travelling(
                flagship_system, frame, U,
                lambda V: pi_coefficients(flagship_system, frame, V).pi,
                decompose)
            # l^s . (dH F - dF H) is exactly the residual entry
            assert np.max(np.abs(res - oracle)) <= 1e-4 * max(
                1.0, float(np.max(np.abs(oracle))))

    def test_incompatible_source_detected(self, flagship_system):
        frame = TravellingFrame(s=1.0,
                                F=lambda U: np.array([0.0, U[1] ** 2]),
                                label="negative-control")
        res = gtw_compat_residual(flagship_system, frame,
                                  np.array([1.3, 2.2]))
        assert np.max(np.abs(res)) > 1e-4


class TestIntegrateGtw:
    def test_flagship_matches_closed_form(self, flagship_system, law_g2):
        frame = flagship_frame()
        cf = GtwClosedForm(law_g2, **FLAGSHIP)
        sol = integrate_gtw(flagship_system, frame,
                            anchor=np.array([1.0, 1.1]), x0=0.0,
                            window=(-2.0, 2.0, 1.0), nx=81, nt=41)
        X, T = np.meshgrid(sol.xs, sol.ts)
        exact = cf(X, T)
        assert np.max(np.abs(sol.grid - exact)) <= 1e-7
        assert sol.path_defect <= 1e-6
        assert sol.compat_max <= 1e-6

    def test_homogeneous_frame_is_travelling_wave(self, flagship_system):
        # F = 0 over a nonzero source: classical travelling wave
        # U(x, t) = U(x - s t, 0)
        frame = TravellingFrame.homogeneous(s=3.0)
        anchor = np.array([1.0, 0.5])
        for (x, t) in [(0.3, 0.2), (-0.4, 0.5), (0.5, 0.6), (0.0, 0.4)]:
            a = integrate_to_point(flagship_system, frame, anchor, 0.0,
                                   x, t, "xt")
            b = integrate_to_point(flagship_system, frame, anchor, 0.0,
                                   x - 3.0 * t, 0.0, "xt")
            assert np.max(np.abs(a - b)) <= 1e-9

    def test_uniform_state_when_source_balances(self, flagship_system):
        # F = B kills every pi, so the wave is x-uniform and drifts along
        # dV/dt = B(V)
        frame = TravellingFrame(
            s=2.0, F=lambda U: np.asarray(flagship_system.B(U)),
            jac_F=flagship_system.jac_B, label="F=B")
        sol = integrate_gtw(flagship_system, frame,
                            anchor=np.array([1.5, 0.3]), x0=0.0,
                            window=(-1.0, 1.0, 0.5), nx=21, nt=11)
        spread = sol.grid.max(axis=1) - sol.grid.min(axis=1)
        assert np.max(np.abs(spread)) <= 1e-10
        from oracles import rk4
        drift = rk4(lambda t, V: np.asarray(flagship_system.B(V)),
                    np.array([1.5, 0.3]), 0.0, 0.5, 2000)
        assert np.max(np.abs(sol.grid[-1, 0] - drift)) <= 1e-8

    def test_path_independence_at_targets(self, flagship_system, rng):
        frame = flagship_frame()
        anchor = np.array([1.0, 1.1])
        worst = 0.0
        for _ in range(25):
            x = rng.uniform(-1.5, 1.5)
            t = rng.uniform(0.0, 1.0)
            a = integrate_to_point(flagship_system, frame, anchor, 0.0,
                                   x, t, "xt")
            b = integrate_to_point(flagship_system, frame, anchor, 0.0,
                                   x, t, "tx")
            worst = max(worst, float(np.max(np.abs(a - b))))
        assert worst <= 1e-6

    def test_frame_covariance(self, flagship_system, law_g2):
        # re-anchoring at (x0 + delta, U(x0 + delta, 0)) reproduces the field
        frame = flagship_frame()
        cf = GtwClosedForm(law_g2, **FLAGSHIP)
        delta = 0.5
        anchor2 = cf(delta, 0.0)
        sol2 = integrate_gtw(flagship_system, frame, anchor=anchor2,
                             x0=delta, window=(-1.0, 1.5, 0.5),
                             nx=26, nt=11)
        X, T = np.meshgrid(sol2.xs, sol2.ts)
        assert np.max(np.abs(sol2.grid - cf(X, T))) <= 1e-8

    def test_mixed_partial_consistency_second_order(self, flagship_system):
        # cross-derivatives of the reconstructed U_t and U_x fields agree at
        # O(h^2): the defect must drop by ~4x under grid refinement
        frame = flagship_frame()

        def defect(nx, nt):
            sol = integrate_gtw(flagship_system, frame,
                                anchor=np.array([1.0, 1.1]), x0=0.0,
                                window=(-1.0, 1.0, 0.5), nx=nx, nt=nt,
                                record_path_defect=False)
            ut = np.empty_like(sol.grid)
            ux = np.empty_like(sol.grid)
            for k in range(sol.ts.size):
                for j in range(sol.xs.size):
                    U = sol.grid[k, j]
                    pis = pi_coefficients(flagship_system, frame, U)
                    dec = decompose(flagship_system, U)
                    ux[k, j] = pis.pi @ dec.right
                    ut[k, j] = frame.F(U) - frame.s * ux[k, j]
            dx = sol.xs[1] - sol.xs[0]
            dt = sol.ts[1] - sol.ts[0]
            ut_x = (ut[:, 2:] - ut[:, :-2]) / (2 * dx)
            ux_t = (ux[2:, :] - ux[:-2, :]) / (2 * dt)
            return float(np.max(np.abs(ut_x[1:-1] - ux_t[:, 1:-1])))

        d1 = defect(21, 11)
        d2 = defect(41, 21)
        assert d2 <= d1 / 2.5
        assert d2 <= 1e-3

    def test_compat_violation_aborts(self, flagship_system):
        frame = TravellingFrame(s=1.0,
                                F=lambda U: np.array([0.0, U[1] ** 2]),
                                label="incompatible")
        with pytest.raises(CompatibilityViolation):
            integrate_gtw(flagship_system, frame,
                          anchor=np.array([1.0, 2.2]), x0=0.0,
                          window=(-0.5, 0.5, 0.3), nx=11, nt=5,
                          compat_tol=1e-5)


class TestSonicLocus:
    def test_flagship_loci_classified_removable(self, flagship_system):
        frame = flagship_frame()
        hits = detect_sonic_locus(flagship_system, frame,
                                  bounds=[(0.5, 2.0), (-1.5, 3.0)], n=24)
        assert hits
        assert all(h.kind == "removable" for h in hits)

    def test_zero_frame_over_forced_model_sub_shocks(self, flagship_system):
        frame = TravellingFrame.homogeneous(s=1.0)
        hits = detect_sonic_locus(flagship_system, frame,
                                  bounds=[(0.5, 2.0), (-1.5, 3.0)], n=24)
        assert hits
        assert any(h.kind == "sub-shock" for h in hits)
        for h in hits:
            # each located state sits on the lambda^family = s locus
            dec = decompose(flagship_system, h.state)
            assert abs(dec.lambdas[h.family] - 1.0) <= 1e-7

    def test_speed_below_spectrum_empty(self, flagship_system):
        frame = TravellingFrame.homogeneous(s=-10.0)
        hits = detect_sonic_locus(flagship_system, frame,
                                  bounds=[(0.5, 2.0), (-1.5, 3.0)], n=16)
        assert hits == []

    def test_balanced_source_all_removable(self, flagship_system):
        frame = TravellingFrame(
            s=1.0, F=lambda U: np.asarray(flagship_system.B(U)), label="F=B")
        hits = detect_sonic_locus(flagship_system, frame,
                                  bounds=[(0.5, 2.0), (-1.5, 3.0)], n=16)
        assert hits
        assert all(h.kind == "removable" for h in hits)
