"""Method-of-characteristics integration of the constrained forms.

With M = N - 1 constraint sources q^i the governing system collapses to an
ODE system along the free family,

    dx/dt = lambda^f(U),
    dU/dt = B + sum_i q^i (lambda^f - lambda^i) d^i,

whose initial data must satisfy l^i(U0) . U0'(x) = q^i(x, 0, U0).  The two
structural reductions integrate in Riemann-chart coordinates instead, and
classical simple waves come from the implicit profile relation
x = lambda^f(v0(xi), k) t + xi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .constraints import (ConstraintSet, RiemannChart, structural_case_i,
                          structural_case_ii)
from .errors import (CharacteristicCrossing, CompatibilityViolation,
                     ConstraintViolatedByInitialData,
                     InitialDataViolatesConstraints, NotDecoupled,
                     PostBreakingQuery, ProfileBlowup,
                     StructuralConditionViolation)
from .fields import SolutionField
from .systems import HyperbolicSystem, decompose


@dataclass
class CharacteristicFan:
    """Trajectories x(t; xi), U(t; xi) of one family from seeds on t = 0."""
    family: int
    seeds: np.ndarray
    ts: np.ndarray
    xs: np.ndarray          # (nt, n_seeds)
    us: np.ndarray          # (nt, n_seeds, n)
    crossing_time: float = np.inf

    def check_monotone(self) -> float:
        """First time level at which neighbouring trajectories cross."""
        for k, t in enumerate(self.ts):
            if np.any(np.diff(self.xs[k]) <= 0.0):
                return float(t)
        return np.inf


@dataclass
class MocSolution:
    """Characteristic trajectories resampled onto a regular (x, t) grid."""
    fan: CharacteristicFan
    xs: np.ndarray
    ts: np.ndarray
    grid: np.ndarray
    names: tuple
    init_residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_field(self, extra_meta=None) -> SolutionField:
        meta = dict(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        meta.setdefault("crossing_time",
                        None if np.isinf(self.fan.crossing_time)
                        else self.fan.crossing_time)
        return SolutionField(xs=self.xs, ts=self.ts, values=self.grid,
                             names=self.names, meta=meta)


def _integrate_seeds(rhs, y0s, ts, rtol, atol, fixed_step):
    """Integrate one ODE per seed over the common output times."""
    out = np.empty((len(ts), len(y0s), len(y0s[0])))
    for m, y0 in enumerate(y0s):
        if fixed_step:
            out[:, m, :] = _rk4_path(rhs, y0, ts)
            continue
        sol = solve_ivp(rhs, (ts[0], ts[-1]), y0, method="DOP853",
                        t_eval=ts, rtol=rtol, atol=atol)
        if not sol.success:
            raise ProfileBlowup(
                f"characteristic integration failed: {sol.message}")
        out[:, m, :] = sol.y.T
    return out


def _rk4_path(rhs, y0, ts, substeps=8):
    y = np.asarray(y0, dtype=float).copy()
    out = np.empty((len(ts), y.size))
    out[0] = y
    for k in range(1, len(ts)):
        h = (ts[k] - ts[k - 1]) / substeps
        t = ts[k - 1]
        for _ in range(substeps):
            k1 = np.asarray(rhs(t, y))
            k2 = np.asarray(rhs(t + h / 2, y + h / 2 * k1))
            k3 = np.asarray(rhs(t + h / 2, y + h / 2 * k2))
            k4 = np.asarray(rhs(t + h, y + h * k3))
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[k] = y
    return out


def _resample(fan: CharacteristicFan, grid_xs) -> np.ndarray:
    """Cubic resample of trajectory values onto fixed abscissae per level."""
    nt = fan.ts.size
    ncomp = fan.us.shape[2]
    grid = np.empty((nt, grid_xs.size, ncomp))
    for k in range(nt):
        xk = fan.xs[k]
        if grid_xs[0] < xk[0] - 1e-12 or grid_xs[-1] > xk[-1] + 1e-12:
            raise ValueError(
                "seed range does not cover the output window; widen the "
                "seed padding")
        spl = CubicSpline(xk, fan.us[k], axis=0)
        grid[k] = spl(np.clip(grid_xs, xk[0], xk[-1]))
    return grid


def _seed_range(sys, family, sample_states, x_min, x_max, t_max, margin=1.3):
    speeds = [abs(decompose(sys, U).lambdas[family]) for U in sample_states]
    pad = (max(speeds) + 0.5) * t_max * margin
    return x_min - pad, x_max + pad


def initial_constraint_residual(sys: HyperbolicSystem, cs: ConstraintSet,
                                U0: Callable, xs,
                                dU0: Optional[Callable] = None) -> np.ndarray:
    """Residual of l^i(U0) . U0' - q^i on the seed abscissae, shape (m, nx)."""
    xs = np.asarray(xs, dtype=float)
    res = np.empty((cs.m, xs.size))
    for j, x in enumerate(xs):
        U = np.asarray(U0(x), dtype=float)
        if dU0 is not None:
            Up = np.asarray(dU0(x), dtype=float)
        else:
            h = 1e-6 * max(1.0, abs(x))
            Up = (np.asarray(U0(x + h), dtype=float)
                  - np.asarray(U0(x - h), dtype=float)) / (2.0 * h)
        dec = decompose(sys, U)
        for a, (i, q) in enumerate(zip(cs.families, cs.sources)):
            res[a, j] = dec.left[i] @ Up - q(x, 0.0, U)
    return res


def integrate_constrained(sys: HyperbolicSystem, cs: ConstraintSet,
                          U0: Callable, window, n_seeds: int = 512,
                          nx: int = 201, nt: int = 51,
                          init_tol: float = 1e-6,
                          rtol: float = 1e-10, atol: float = 1e-12,
                          fixed_step: bool = False,
                          dU0: Optional[Callable] = None) -> MocSolution:
    """Integrate the constrained characteristic form from U0(x).

    Initial data must satisfy the constraints within init_tol; the
    constraints are then propagated by the evolution, and any drift can be
    monitored with constraint_residual_field.  Raises CharacteristicCrossing
    if trajectories cross inside the window.
    """
    cs.check_against(sys)
    x_min, x_max, t_max = float(window[0]), float(window[1]), float(window[2])
    free = cs.free_family(sys.n)
    ts = np.linspace(0.0, t_max, nt)
    probe = [np.asarray(U0(x), dtype=float)
             for x in np.linspace(x_min, x_max, 9)]
    lo, hi = _seed_range(sys, free, probe, x_min, x_max, t_max)
    seeds = np.linspace(lo, hi, n_seeds)

    if cs.m:
        res0 = initial_constraint_residual(sys, cs, U0, seeds, dU0)
        worst = float(np.max(np.abs(res0)))
        if worst > init_tol:
            jbad = int(np.argmax(np.max(np.abs(res0), axis=0)))
            raise InitialDataViolatesConstraints(worst, init_tol,
                                                 float(seeds[jbad]))

    def rhs(t, y):
        x, U = y[0], y[1:]
        dec = decompose(sys, U)
        dU = sys.source(U).astype(float)
        for i, q in zip(cs.families, cs.sources):
            dU = dU + q(x, t, U) * (dec.lambdas[free] - dec.lambdas[i]) \
                * dec.right[i]
        return np.concatenate([[dec.lambdas[free]], dU])

    y0s = [np.concatenate([[xi], np.asarray(U0(xi), dtype=float)])
           for xi in seeds]
    raw = _integrate_seeds(rhs, y0s, ts, rtol, atol, fixed_step)
    fan = CharacteristicFan(family=free, seeds=seeds, ts=ts,
                            xs=raw[:, :, 0], us=raw[:, :, 1:])
    fan.crossing_time = fan.check_monotone()
    if fan.crossing_time <= t_max:
        raise CharacteristicCrossing(fan.crossing_time)

    grid_xs = np.linspace(x_min, x_max, nx)
    grid = _resample(fan, grid_xs)
    return MocSolution(fan=fan, xs=grid_xs, ts=ts, grid=grid,
                       names=sys.names,
                       init_residual=0.0 if not cs.m else worst,
                       meta={"kind": "constrained-moc", "family": free})


def constraint_residual_field(sys: HyperbolicSystem, cs: ConstraintSet,
                              fieldobj: SolutionField) -> np.ndarray:
    """l^i . U_x - q^i on interior nodes of a field, shape (nt, nx-2, m)."""
    xs, ts, vals = fieldobj.xs, fieldobj.ts, fieldobj.values
    dx = xs[1] - xs[0]
    Ux = (vals[:, 2:, :] - vals[:, :-2, :]) / (2.0 * dx)
    out = np.empty((ts.size, xs.size - 2, cs.m))
    for k, t in enumerate(ts):
        for j in range(1, xs.size - 1):
            U = vals[k, j]
            dec = decompose(sys, U)
            for a, (i, q) in enumerate(zip(cs.families, cs.sources)):
                out[k, j - 1, a] = dec.left[i] @ Ux[k, j - 1] \
                    - q(xs[j], t, U)
    return out


class SimpleWave:
    """Simple wave of one family: invariants pinned at k, profile v0.

    The solution solves the implicit relation x = xi + lambda(xi) t with
    lambda(xi) the free-family speed of the state (k, v0(xi)); it breaks at
    t_b = min(-1 / lambda'(xi)) over decreasing stretches.
    """

    def __init__(self, sys: HyperbolicSystem, chart: RiemannChart,
                 k, v0: Callable, xi_span, n_xi: int = 2048):
        self.sys = sys
        self.chart = chart
        self.k = np.atleast_1d(np.asarray(k, dtype=float))
        self.v0 = v0
        self.xi = np.linspace(float(xi_span[0]), float(xi_span[1]), n_xi)
        lam = np.empty_like(self.xi)
        for j, xi in enumerate(self.xi):
            U = chart.inverse(self.k, v0(xi))
            lam[j] = decompose(sys, U).lambdas[chart.family]
        self._lam_spline = CubicSpline(self.xi, lam)
        dlam = self._lam_spline.derivative()(self.xi)
        neg = dlam < 0.0
        with np.errstate(divide="ignore", over="ignore"):
            self.breaking_time = float(np.min(-1.0 / dlam[neg])) \
                if neg.any() else np.inf
        self._lam = lam

    def xi_of(self, x: float, t: float) -> float:
        if t >= self.breaking_time:
            raise PostBreakingQuery(
                f"t = {t:g} is at or past the breaking time "
                f"t_b = {self.breaking_time:g}")
        g = self.xi + self._lam * t
        if x < g[0] or x > g[-1]:
            raise ValueError(
                f"x = {x:g} outside the simple-wave seed coverage "
                f"[{g[0]:g}, {g[-1]:g}]")
        j = int(np.searchsorted(g, x))
        j = max(1, min(j, g.size - 1))
        lo, hi = self.xi[j - 1], self.xi[j]
        fun = lambda xi: xi + self._lam_spline(xi) * t - x
        if fun(lo) == 0.0:
            return float(lo)
        return float(brentq(fun, lo, hi, xtol=1e-13))

    def eval(self, x: float, t: float) -> np.ndarray:
        xi = self.xi_of(float(x), float(t))
        return self.chart.inverse(self.k, self.v0(xi))

    def field(self, xs, ts, meta=None) -> SolutionField:
        xs = np.asarray(xs, dtype=float)
        ts = np.asarray(ts, dtype=float)
        vals = np.empty((ts.size, xs.size, self.sys.n))
        for kk, t in enumerate(ts):
            for j, x in enumerate(xs):
                vals[kk, j] = self.eval(x, t)
        base = {"kind": "simple-wave", "family": self.chart.family,
                "k": [float(v) for v in self.k],
                "t_b": None if np.isinf(self.breaking_time)
                else self.breaking_time}
        if meta:
            base.update(meta)
        return SolutionField(xs=xs, ts=ts, values=vals, names=self.sys.names,
                             meta=base)

    def invariant_defect(self, xs, ts) -> float:
        """max |R(U(x,t)) - k| over the sampled points."""
        worst = 0.0
        for t in np.asarray(ts, dtype=float):
            for x in np.asarray(xs, dtype=float):
                R = self.chart.R(self.eval(x, t))
                worst = max(worst, float(np.max(np.abs(R - self.k))))
        return worst


def simple_wave(sys: HyperbolicSystem, chart: RiemannChart, k, v0: Callable,
                xi_span, n_xi: int = 2048) -> SimpleWave:
    return SimpleWave(sys, chart, k, v0, xi_span, n_xi)


def breaking_time_oracle(sys, chart, k, v0, xi_span, n_xi=100_000) -> float:
    """Dense-sampling estimate of the breaking time via plain differences."""
    xi = np.linspace(float(xi_span[0]), float(xi_span[1]), n_xi)
    lam = np.empty_like(xi)
    kvec = np.atleast_1d(np.asarray(k, dtype=float))
    for j, s in enumerate(xi):
        lam[j] = decompose(sys, chart.inverse(kvec, v0(s))).lambdas[
            chart.family]
    dlam = np.gradient(lam, xi)
    neg = dlam < 0.0
    with np.errstate(divide="ignore", over="ignore"):
        return float(np.min(-1.0 / dlam[neg])) if neg.any() else np.inf


@dataclass
class CaseIReduction:
    """Invariant trajectory and tabulated source of the q = 0 reduction."""
    r_of_t: Callable
    ts: np.ndarray
    r_samples: np.ndarray
    structural: Optional[object] = None


def case_i_solve(sys: HyperbolicSystem, chart: RiemannChart,
                 F: Callable, R0, v0: Callable, window,
                 n_seeds: int = 512, nx: int = 201, nt: int = 51,
                 structural_tol: Optional[float] = 1e-7,
                 structural_v_probe: int = 7,
                 rtol: float = 1e-10, atol: float = 1e-12,
                 fixed_step: bool = False):
    """Solve the q = 0 reduction: spatially uniform invariants obeying
    dR/dt = F(R), then the retained coordinate along the free family.

    Returns (MocSolution, CaseIReduction).
    """
    x_min, x_max, t_max = float(window[0]), float(window[1]), float(window[2])
    R0 = np.atleast_1d(np.asarray(R0, dtype=float))
    m = R0.size
    ts = np.linspace(0.0, t_max, nt)

    def rhs_R(t, R):
        return np.atleast_1d(np.asarray(F(R), dtype=float))

    solR = solve_ivp(rhs_R, (0.0, t_max), R0, method="DOP853", rtol=rtol,
                     atol=atol, dense_output=True)
    if not solR.success:
        raise ProfileBlowup(f"invariant ODE failed: {solR.message}")
    r_of_t = lambda t: np.atleast_1d(solR.sol(t))

    if structural_tol is not None:
        r_traj = solR.sol(ts)
        r_vals = np.linspace(float(np.min(r_traj)), float(np.max(r_traj)),
                             5) if m == 1 else r_traj[0]
        v_probe = np.array([v0(x) for x in
                            np.linspace(x_min, x_max, structural_v_probe)])
        v_vals = np.linspace(float(np.min(v_probe)) - 1e-3,
                             float(np.max(v_probe)) + 1e-3,
                             structural_v_probe)
        rep = structural_case_i(sys, chart, np.unique(r_vals), v_vals,
                                tol=structural_tol)
        if not rep.holds:
            raise StructuralConditionViolation(
                f"sigma l.B varies along v by {float(np.max(rep.variation)):g}"
                f" > tol {structural_tol:g}; the q = 0 reduction does not "
                "apply")
        structural = rep
    else:
        structural = None

    probe = [chart.inverse(R0, v0(x))
             for x in np.linspace(x_min, x_max, 9)]
    lo, hi = _seed_range(sys, chart.family, probe, x_min, x_max, t_max)
    seeds = np.linspace(lo, hi, n_seeds)

    def rhs(t, y):
        x, v = y[0], y[1]
        R = r_of_t(t)
        U = chart.inverse(R, v)
        dec = decompose(sys, U)
        return np.array([dec.lambdas[chart.family],
                         sys.source(U)[chart.v_index]])

    y0s = [np.array([xi, v0(xi)]) for xi in seeds]
    raw = _integrate_seeds(rhs, y0s, ts, rtol, atol, fixed_step)

    us = np.empty((nt, n_seeds, sys.n))
    for k in range(nt):
        R = r_of_t(ts[k])
        for mcol in range(n_seeds):
            us[k, mcol] = chart.inverse(R, raw[k, mcol, 1])
    fan = CharacteristicFan(family=chart.family, seeds=seeds, ts=ts,
                            xs=raw[:, :, 0], us=us)
    fan.crossing_time = fan.check_monotone()
    if fan.crossing_time <= t_max:
        raise CharacteristicCrossing(fan.crossing_time)

    grid_xs = np.linspace(x_min, x_max, nx)
    grid = _resample(fan, grid_xs)
    sol = MocSolution(fan=fan, xs=grid_xs, ts=ts, grid=grid, names=sys.names,
                      meta={"kind": "case-i", "family": chart.family})
    red = CaseIReduction(r_of_t=r_of_t, ts=ts, r_samples=solR.sol(ts).T,
                         structural=structural)
    return sol, red


def case_ii_solve(sys: HyperbolicSystem, chart: RiemannChart,
                  F: Callable, G: Callable, R0: Callable, v0: Callable,
                  window, n_seeds: int = 512, nx: int = 201, nt: int = 51,
                  bracket_tol: float = 1e-7, init_tol: float = 1e-6,
                  decouple_tol: float = 1e-8,
                  rtol: float = 1e-10, atol: float = 1e-12,
                  fixed_step: bool = False) -> MocSolution:
    """Solve the decoupled second reduction: invariants obeying
    R_t + lambda^f(R) R_x = F + lambda^f G with the constraint R_x = G,
    then the retained coordinate along the same characteristics.

    Requires lambda^f to depend on the invariants alone (refused otherwise)
    and initial invariants satisfying their spatial constraint.
    """
    x_min, x_max, t_max = float(window[0]), float(window[1]), float(window[2])
    ts = np.linspace(0.0, t_max, nt)

    def Rvec(x):
        return np.atleast_1d(np.asarray(R0(x), dtype=float))

    def Gvec(R):
        return np.atleast_1d(np.asarray(G(R), dtype=float))

    def Fvec(R):
        return np.atleast_1d(np.asarray(F(R), dtype=float))

    probe_x = np.linspace(x_min, x_max, 9)
    r_probe = np.array([Rvec(x)[0] for x in probe_x])
    v_probe_vals = np.array([v0(x) for x in probe_x])
    r_lo, r_hi = float(r_probe.min()), float(r_probe.max())
    v_spread = float(v_probe_vals.max() - v_probe_vals.min())
    rep = structural_case_ii(sys, chart, Fvec, Gvec,
                             np.linspace(r_lo, r_hi, 5),
                             v_values=np.linspace(v_probe_vals.min(),
                                                  v_probe_vals.max(), 5)
                             if v_spread > 0 else
                             np.array([float(v_probe_vals[0])]))
    if rep.max_bracket > bracket_tol:
        raise CompatibilityViolation(
            f"commutator residual {rep.max_bracket:g} > tol {bracket_tol:g}; "
            "the prescribed F, G are not compatible")
    def_worst = float(np.max(np.abs(rep.def_residual_f))) \
        if rep.def_residual_f.size else 0.0
    if def_worst > bracket_tol:
        raise CompatibilityViolation(
            f"prescribed F, G disagree with the system source by "
            f"{def_worst:g} > tol {bracket_tol:g} on the probe grid")

    # constraint on the initial invariants: dR0/dx = G(R0)
    worst, worst_x = 0.0, x_min
    for x in probe_x:
        h = 1e-6 * max(1.0, abs(x))
        dR = (Rvec(x + h) - Rvec(x - h)) / (2.0 * h)
        r = float(np.max(np.abs(dR - Gvec(Rvec(x)))))
        if r > worst:
            worst, worst_x = r, float(x)
    if worst > init_tol:
        raise ConstraintViolatedByInitialData(worst, init_tol, worst_x)

    # the free speed must not vary with v
    v_probe = np.array([v0(x) for x in probe_x])
    v_lo, v_hi = float(np.min(v_probe)), float(np.max(v_probe))
    for x in probe_x[::4]:
        lams = []
        for v in np.linspace(v_lo, v_hi, 5):
            U = chart.inverse(Rvec(x), v)
            lams.append(decompose(sys, U).lambdas[chart.family])
        if np.max(lams) - np.min(lams) > decouple_tol:
            raise NotDecoupled(
                f"lambda of the free family varies with v by "
                f"{np.max(lams) - np.min(lams):g} > {decouple_tol:g}")

    probe = [chart.inverse(Rvec(x), v0(x)) for x in probe_x]
    lo, hi = _seed_range(sys, chart.family, probe, x_min, x_max, t_max)
    seeds = np.linspace(lo, hi, n_seeds)
    m = Rvec(seeds[0]).size

    def rhs(t, y):
        x, R, v = y[0], y[1:1 + m], y[1 + m]
        U = chart.inverse(R, v)
        dec = decompose(sys, U)
        lam = dec.lambdas[chart.family]
        dR = Fvec(R) + lam * Gvec(R)
        return np.concatenate([[lam], dR, [sys.source(U)[chart.v_index]]])

    y0s = [np.concatenate([[xi], Rvec(xi), [v0(xi)]]) for xi in seeds]
    raw = _integrate_seeds(rhs, y0s, ts, rtol, atol, fixed_step)

    us = np.empty((nt, n_seeds, sys.n))
    for k in range(nt):
        for mcol in range(n_seeds):
            us[k, mcol] = chart.inverse(raw[k, mcol, 1:1 + m],
                                        raw[k, mcol, 1 + m])
    fan = CharacteristicFan(family=chart.family, seeds=seeds, ts=ts,
                            xs=raw[:, :, 0], us=us)
    fan.crossing_time = fan.check_monotone()
    if fan.crossing_time <= t_max:
        raise CharacteristicCrossing(fan.crossing_time)

    grid_xs = np.linspace(x_min, x_max, nx)
    grid = _resample(fan, grid_xs)
    return MocSolution(fan=fan, xs=grid_xs, ts=ts, grid=grid,
                       names=sys.names,
                       meta={"kind": "case-ii", "family": chart.family})
