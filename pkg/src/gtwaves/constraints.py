"""Pointwise residual evaluators for the compatibility and structural
conditions of constrained hyperbolic systems, plus Riemann charts for N = 2.

Constraints have the form l^i . U_x = q^i(x, t, U) attached to M = N - 1
characteristic families; the remaining family is "free".  The evaluators
return the left-hand sides of the two involutiveness conditions (the
mixed-partial coefficients at zeroth and first order in the free component),
their Riemann-invariant counterparts, and the structural conditions of the
two solvable cases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, interp1d
from scipy.optimize import brentq

from .errors import (ChartEvaluationFailure, ChartInversionFailure,
                     QuadratureFailure)
from .models import BarotropicModel, PressureLaw
from .systems import (CENTRAL, GradientOperator, HyperbolicSystem, decompose,
                      source_jacobian, spectral_derivatives)


@dataclass(frozen=True)
class ConstraintSet:
    """M constraint sources q^i(x, t, U) attached to distinct families."""
    sources: tuple
    families: tuple

    def __post_init__(self):
        if len(self.sources) != len(self.families):
            raise ValueError("one family index per constraint source")
        if len(set(self.families)) != len(self.families):
            raise ValueError("attached families must be distinct")

    @classmethod
    def autonomous(cls, *qs, families=None) -> "ConstraintSet":
        """Wrap state-only sources q(U) into the (x, t, U) signature."""
        wrapped = tuple((lambda x, t, U, _q=q: _q(U)) for q in qs)
        if families is None:
            families = tuple(range(len(qs)))
        return cls(sources=wrapped, families=tuple(families))

    @property
    def m(self) -> int:
        return len(self.sources)

    def check_against(self, sys: HyperbolicSystem) -> None:
        if self.m >= sys.n:
            raise ValueError(f"M = {self.m} constraints require M < N = {sys.n}")
        if any(f < 0 or f >= sys.n for f in self.families):
            raise ValueError("family index out of range")

    def free_family(self, n: int) -> int:
        """The single family without a constraint (requires M = N - 1)."""
        if self.m != n - 1:
            raise ValueError("free family is defined only for M = N - 1")
        return next(i for i in range(n) if i not in self.families)

    def values(self, x: float, t: float, U: np.ndarray) -> np.ndarray:
        return np.array([q(x, t, U) for q in self.sources], dtype=float)


def constraint_set_from_frame(sys: HyperbolicSystem, frame) -> ConstraintSet:
    """Map a travelling frame into constraint-source form: the solution's
    x-derivative components along the first N-1 families,
    q^i(U) = l^i . (B - F) / (lambda^i - s)."""
    from .travelling import pi_coefficients  # local import to avoid a cycle

    def make(i):
        def q(x, t, U):
            return pi_coefficients(sys, frame, U).pi[i]
        return q

    return ConstraintSet(sources=tuple(make(i) for i in range(sys.n - 1)),
                         families=tuple(range(sys.n - 1)))


def _q_partials(q: Callable, x: float, t: float, U: np.ndarray,
                grad: GradientOperator):
    """(q, q_x, q_t, grad_U q) of one source by central differences."""
    val = q(x, t, U)
    hx = grad.rel_step * max(1.0, abs(x))
    ht = grad.rel_step * max(1.0, abs(t))
    q_x = (q(x + hx, t, U) - q(x - hx, t, U)) / (2.0 * hx)
    q_t = (q(x, t + ht, U) - q(x, t - ht, U)) / (2.0 * ht)
    gq = grad.grad_scalar(lambda V: q(x, t, V), U)
    return val, q_x, q_t, gq


def involutiveness_residual(sys: HyperbolicSystem, cs: ConstraintSet,
                            U: np.ndarray, point=(0.0, 0.0),
                            grad: GradientOperator = CENTRAL):
    """Left-hand sides of the two compatibility conditions for M = N - 1
    constraints, one pair per constrained family.

    res1 collects the terms independent of the free x-derivative component;
    res2 the terms linear in it.  Exact involution <=> both vanish
    identically in U.
    """
    cs.check_against(sys)
    U = np.asarray(U, dtype=float)
    x, t = point
    n = sys.n
    fam = list(cs.families)
    free = cs.free_family(n)

    dec = decompose(sys, U)
    lam, d, l = dec.lambdas, dec.right, dec.left
    B = sys.source(U)
    dB = source_jacobian(sys, U, grad)
    sd = spectral_derivatives(sys, U, grad)

    qv, qx, qt, gq = {}, {}, {}, {}
    for i, src in zip(fam, cs.sources):
        qv[i], qx[i], qt[i], gq[i] = _q_partials(src, x, t, U, grad)

    res1 = np.empty(cs.m)
    res2 = np.empty(cs.m)
    for a, i in enumerate(fam):
        arg = B - sum(qv[j] * (lam[j] - lam[i]) * d[j] for j in fam)
        r1 = qt[i] + lam[i] * qx[i] + gq[i] @ arg
        r1 += sum(qv[j] * qv[k] * (lam[j] - lam[k])
                  * (l[i] @ sd.dright[j] @ d[k])
                  for j in fam for k in fam)
        r1 += sum(qv[k] * (l[i] @ (sd.dright[k] @ B - dB @ d[k])
                           + qv[i] * (sd.dlam[i] @ d[k]))
                  for k in fam)
        res1[a] = r1

        r2 = (lam[i] - lam[free]) * (gq[i] @ d[free])
        r2 += sum(qv[k] * (lam[k] - lam[free])
                  * (l[i] @ (sd.dright[k] @ d[free]
                             - sd.dright[free] @ d[k]))
                  for k in fam)
        r2 += l[i] @ (sd.dright[free] @ B - dB @ d[free])
        r2 += qv[i] * (sd.dlam[i] @ d[free])
        res2[a] = r2
    return res1, res2


# ---------------------------------------------------------------------------
# Riemann charts


class RiemannChart:
    """Coordinates (R^1..R^{N-1}, v) adapted to one characteristic family.

    The invariants satisfy grad R^alpha . d^family = 0; v = u_j is a retained
    state coordinate making the chart nonsingular.  `inverse` maps chart
    coordinates back to a state vector.
    """

    def __init__(self, sys: HyperbolicSystem, family: int, v_index: int,
                 invariants: Callable, inverse: Callable,
                 grad_invariants: Optional[Callable] = None,
                 label: str = "chart"):
        self.sys = sys
        self.family = family
        self.v_index = v_index
        self._invariants = invariants
        self._inverse = inverse
        self._grad_invariants = grad_invariants
        self.label = label
        self.co_families = tuple(i for i in range(sys.n) if i != family)

    def R(self, U) -> np.ndarray:
        return np.atleast_1d(np.asarray(self._invariants(np.asarray(U, dtype=float)),
                                        dtype=float))

    def v(self, U) -> float:
        return float(np.asarray(U)[self.v_index])

    def coords(self, U):
        return self.R(U), self.v(U)

    def inverse(self, R, v) -> np.ndarray:
        U = np.asarray(self._inverse(np.atleast_1d(np.asarray(R, dtype=float)),
                                     float(v)), dtype=float)
        return U

    def grad_R(self, U) -> np.ndarray:
        """(N-1, n) rows grad R^alpha, analytic when available."""
        U = np.asarray(U, dtype=float)
        if self._grad_invariants is not None:
            return np.atleast_2d(np.asarray(self._grad_invariants(U), dtype=float))
        g = CENTRAL.grad_vector(lambda V: self.R(V), U)
        return np.atleast_2d(g)

    def sigma(self, U, dec=None) -> np.ndarray:
        """sigma[alpha, beta] = grad R^alpha . d^{co_families[beta]}."""
        if dec is None:
            dec = decompose(self.sys, U)
        G = self.grad_R(U)
        return np.stack([G @ dec.right[b] for b in self.co_families], axis=1)

    def jacobian_det(self, U) -> float:
        rows = np.vstack([self.grad_R(U),
                          np.eye(self.sys.n)[self.v_index][None, :]])
        return float(np.linalg.det(rows))

    def validate(self, states, ortho_tol: float = 1e-9,
                 det_tol: float = 1e-10) -> None:
        for U in states:
            dec = decompose(self.sys, U)
            defect = float(np.max(np.abs(self.grad_R(U) @ dec.right[self.family])))
            if defect > ortho_tol:
                raise ChartEvaluationFailure(
                    f"grad R . d^family = {defect:g} > {ortho_tol:g} at {U}")
            if abs(self.jacobian_det(U)) <= det_tol:
                raise ChartEvaluationFailure(
                    f"chart Jacobian singular at {U}")

    @classmethod
    def from_invariants(cls, sys, family, v_index, invariants, inverse,
                        grad_invariants=None, label="user chart"):
        """User-supplied invariants for systems with N > 2."""
        return cls(sys, family, v_index, invariants, inverse,
                   grad_invariants, label)


def _flow_between(sys, family, base, other, start_base, start_other,
                  end_base, rtol, atol):
    """Integrate d(other)/d(base) = d^family_other / d^family_base."""
    if abs(end_base - start_base) < 1e-15:
        return float(start_other)

    def rhs(b, y):
        U = np.empty(sys.n)
        U[base] = b
        U[other] = y[0]
        dv = decompose(sys, U).right[family]
        if abs(dv[base]) < 1e-13:
            raise QuadratureFailure(
                f"eigenvector component along base coordinate vanished at {U}")
        return [dv[other] / dv[base]]

    sol = solve_ivp(rhs, (start_base, end_base), [start_other], method="RK45",
                    rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise QuadratureFailure(
            f"invariant integration failed: {sol.message}")
    return float(sol.y[0, -1])


def riemann_chart(sys: HyperbolicSystem, seed, family: Optional[int] = None,
                  v_index: Optional[int] = None,
                  base_index: Optional[int] = None,
                  ref: Optional[float] = None,
                  rtol: float = 1e-11, atol: float = 1e-13) -> RiemannChart:
    """Numeric Riemann chart for a 2x2 system.

    The invariant is computed by integrating the characteristic ODE
    d(u_other)/d(u_base) = d^f_other / d^f_base from the state down to the
    reference section u_base = ref; its value there is R.  The additive
    normalization is therefore R(U) = u_other whenever u_base = ref.
    """
    if sys.n != 2:
        raise ValueError("automatic charts are implemented for N = 2 only; "
                         "use RiemannChart.from_invariants for larger systems")
    seed = np.asarray(seed, dtype=float)
    if family is None:
        family = sys.n - 1
    dec = decompose(sys, seed)
    dfam = dec.right[family]
    if base_index is None:
        base_index = int(np.argmax(np.abs(dfam)))
    other = 1 - base_index
    if v_index is None:
        v_index = other
    if ref is None:
        ref = float(seed[base_index])

    def invariants(U):
        return np.array([_flow_between(sys, family, base_index, other,
                                       float(U[base_index]), float(U[other]),
                                       ref, rtol, atol)])

    def inverse(R, v):
        R0 = float(R[0])
        if v_index == base_index:
            # flow the reference point (base=ref, other=R) out to base = v
            val = _flow_between(sys, family, base_index, other,
                                ref, R0, float(v), rtol, atol)
            U = np.empty(2)
            U[base_index] = v
            U[other] = val
            return U
        # v fixes the 'other' coordinate: locate base with an event
        def rhs(b, y):
            U = np.empty(2)
            U[base_index] = b
            U[other] = y[0]
            dv = decompose(sys, U).right[family]
            if abs(dv[base_index]) < 1e-13:
                raise QuadratureFailure(
                    "eigenvector component along base coordinate vanished")
            return [dv[other] / dv[base_index]]

        def hit(b, y):
            return y[0] - float(v)
        hit.terminal = True
        hit.direction = 0.0

        start = abs(float(v) - R0)
        for span in (max(1.0, 4.0 * start), 16.0, 64.0):
            for end in (ref + span, ref - span):
                sol = solve_ivp(rhs, (ref, end), [R0], method="RK45",
                                rtol=rtol, atol=atol, events=hit)
                if sol.t_events[0].size:
                    U = np.empty(2)
                    U[base_index] = float(sol.t_events[0][0])
                    U[other] = float(v)
                    return U
        raise ChartInversionFailure(
            f"no state with R = {R0:g}, v = {v:g} found near the reference")

    chart = RiemannChart(sys, family, v_index, invariants, inverse,
                         label=f"numeric(base={base_index}, ref={ref:g})")
    chart.base_index = base_index
    chart.ref = ref
    return chart


def barotropic_chart(model: BarotropicModel, family: int = 1,
                     v_index: int = 1, rho_ref: float = 1.0) -> RiemannChart:
    """Closed-form chart for the barotropic model.

    R = u -+ I(rho) with I(rho) = int_{rho_ref}^{rho} c(r)/r dr (minus sign
    for the fast family, plus for the slow), so R(rho_ref, 0) = 0.
    """
    law = model.pressure
    sgn = -1.0 if family == 1 else 1.0

    if law.kind == "polytropic":
        gamma = law.params["gamma"]
        cref = law.c(rho_ref)

        def I(rho):
            return 2.0 * (law.c(rho) - cref) / (gamma - 1.0)

        def I_inv(val):
            c = cref + 0.5 * (gamma - 1.0) * val
            if c <= 0.0:
                raise ChartInversionFailure(
                    "requested invariant value lies past the vacuum state")
            kap = law.params["kappa"]
            return (c * c / (kap * gamma)) ** (1.0 / (gamma - 1.0))
    elif law.kind == "isothermal":
        a = law.params["a"]

        def I(rho):
            return a * np.log(rho / rho_ref)

        def I_inv(val):
            return rho_ref * np.exp(val / a)
    else:
        raise ValueError("closed-form chart needs a builtin pressure law; "
                         "use riemann_chart for custom laws")

    def invariants(U):
        rho, u = U
        model.check_rho(rho)
        return np.array([u + sgn * I(rho)])

    def grad_invariants(U):
        rho, u = U
        return np.array([[sgn * law.c(rho) / rho, 1.0]])

    if v_index == 1:
        def inverse(R, v):
            rho = I_inv(sgn * (float(R[0]) - float(v)))
            model.check_rho(rho)
            return np.array([rho, float(v)])
    else:
        def inverse(R, v):
            model.check_rho(float(v))
            return np.array([float(v), float(R[0]) - sgn * I(float(v))])

    sys = model.system()
    chart = RiemannChart(sys, family, v_index, invariants, inverse,
                         grad_invariants=grad_invariants,
                         label=f"barotropic-analytic(rho_ref={rho_ref:g})")
    chart.rho_ref = rho_ref
    return chart


# ---------------------------------------------------------------------------
# Compatibility in Riemann coordinates


def _chart_pieces(sys, chart, q_list, R, v):
    """Everything the invariant-space conditions need at chart point (R, v)."""
    U = chart.inverse(R, v)
    dec = decompose(sys, U)
    co = chart.co_families
    sig = chart.sigma(U, dec)
    lam_co = dec.lambdas[list(co)]
    lam_f = dec.lambdas[chart.family]
    B = sys.source(U)
    lB = np.array([dec.left[b] @ B for b in co])
    qv = np.array([q(U) for q in q_list]) if q_list else np.zeros(0)
    dj = np.array([dec.right[b][chart.v_index] for b in co])
    Bj = B[chart.v_index]
    return {"U": U, "sigma": sig, "lam_co": lam_co, "lam_f": lam_f,
            "lB": lB, "q": qv, "dj": dj, "Bj": Bj}


def riemann_compat_residual(sys: HyperbolicSystem, chart: RiemannChart,
                            q_list: Sequence[Callable], U,
                            grad: GradientOperator = CENTRAL):
    """Invariant-space compatibility residuals at a state.

    res_c1[alpha]: the v-direction condition, with all co-family indices
    summed (the printed free/summed index ambiguity is resolved by summing
    throughout; validated by the homogeneous and case-i consistency checks).
    res_c2[alpha]: the invariant-bracket condition in w = sigma q and
    z = sigma (l.B - lambda q).
    """
    U = np.asarray(U, dtype=float)
    R0, v0 = chart.coords(U)
    m = sys.n - 1
    q_list = list(q_list)
    if len(q_list) != m:
        raise ValueError(f"need {m} constraint sources, got {len(q_list)}")

    hv = grad.rel_step * max(1.0, abs(v0))

    def at_v(v):
        return _chart_pieces(sys, chart, q_list, R0, v)

    p0 = at_v(v0)
    pp = at_v(v0 + hv)
    pm = at_v(v0 - hv)

    def dv(key):
        return (pp[key] - pm[key]) / (2.0 * hv)

    sig, lam_co, lam_f = p0["sigma"], p0["lam_co"], p0["lam_f"]
    qv, lB = p0["q"], p0["lB"]
    dsig_dv, dlam_dv, dq_dv = dv("sigma"), dv("lam_co"), dv("q")
    d_siglB_dv = dv("sigma") @ lB + sig @ dv("lB")

    res_c1 = np.empty(m)
    for a in range(m):
        lhs = np.sum((lam_co - lam_f) * sig[a] * dq_dv)
        rhs = np.sum(((lam_f - lam_co) * dsig_dv[a]
                      - sig[a] * dlam_dv) * qv)
        rhs += d_siglB_dv[a]
        res_c1[a] = lhs - rhs

    # bracket condition on w = sigma q and z = sigma (l.B - lambda q)
    def w_z(R, v):
        p = _chart_pieces(sys, chart, q_list, R, v)
        w = p["sigma"] @ p["q"]
        z = p["sigma"] @ (p["lB"] - p["lam_co"] * p["q"])
        return w, z

    w0, z0 = w_z(R0, v0)
    dw_dR = np.empty((m, m))
    dz_dR = np.empty((m, m))
    for g in range(m):
        hr = grad.rel_step * max(1.0, abs(R0[g]))
        Rp, Rm = R0.copy(), R0.copy()
        Rp[g] += hr
        Rm[g] -= hr
        wp, zp = w_z(Rp, v0)
        wm, zm = w_z(Rm, v0)
        dw_dR[:, g] = (wp - wm) / (2.0 * hr)
        dz_dR[:, g] = (zp - zm) / (2.0 * hr)
    wp, zp = w_z(R0, v0 + hv)
    wm, zm = w_z(R0, v0 - hv)
    dw_dv = (wp - wm) / (2.0 * hv)

    v_rhs = p0["Bj"] + np.sum((lam_f - lam_co) * qv * p0["dj"])
    res_c2 = dw_dR @ z0 - dz_dR @ w0 + dw_dv * v_rhs
    return res_c1, res_c2


@dataclass
class CaseIStructuralReport:
    """Whether sigma l.B is a function of the invariants alone."""
    holds: bool
    variation: np.ndarray          # per invariant, max spread along v
    r_values: np.ndarray
    f_samples: np.ndarray          # (n_r, N-1) tabulated source
    tol: float

    def F(self) -> Callable:
        """Interpolated source F(R) for the decoupled invariant ODE."""
        r = self.r_values
        if r.size >= 4:
            spl = CubicSpline(r, self.f_samples, axis=0)
            return lambda R: np.atleast_1d(spl(float(np.atleast_1d(R)[0])))
        lin = interp1d(r, self.f_samples, axis=0, fill_value="extrapolate")
        return lambda R: np.atleast_1d(lin(float(np.atleast_1d(R)[0])))


def structural_case_i(sys: HyperbolicSystem, chart: RiemannChart,
                      r_values, v_values, tol: float = 1e-8
                      ) -> CaseIStructuralReport:
    """Evaluate sigma^a_b l^b.B on an (R, v) grid; the q = 0 reduction is
    admissible iff the result does not vary along v."""
    r_values = np.atleast_1d(np.asarray(r_values, dtype=float))
    v_values = np.asarray(v_values, dtype=float)
    m = sys.n - 1
    grid = np.empty((r_values.size, v_values.size, m))
    for ir, r in enumerate(r_values):
        for iv, v in enumerate(v_values):
            try:
                p = _chart_pieces(sys, chart, [], np.array([r]), v)
            except Exception as exc:  # noqa: BLE001 - surface chart context
                raise ChartEvaluationFailure(
                    f"chart evaluation failed at R={r:g}, v={v:g}: {exc}"
                ) from exc
            grid[ir, iv] = p["sigma"] @ p["lB"]
    variation = np.max(grid.max(axis=1) - grid.min(axis=1), axis=0)
    mid = v_values.size // 2
    return CaseIStructuralReport(holds=bool(np.all(variation <= tol)),
                                 variation=variation,
                                 r_values=r_values,
                                 f_samples=grid[:, mid, :],
                                 tol=tol)


@dataclass
class CaseIIStructuralReport:
    """Residuals of the case-(ii) requirements."""
    bracket_residual: np.ndarray   # (n_r, N-1) commutator dG F - dF G
    def_residual_q: np.ndarray     # solve residual of sigma q = G
    def_residual_f: np.ndarray     # sigma(l.B - lambda q) - F on the grid
    r_values: np.ndarray

    @property
    def max_bracket(self) -> float:
        return float(np.max(np.abs(self.bracket_residual)))


def structural_case_ii(sys: HyperbolicSystem, chart: RiemannChart,
                       F: Callable, G: Callable, r_values,
                       v_values=None,
                       grad: GradientOperator = CENTRAL
                       ) -> CaseIIStructuralReport:
    """Check the proportional-fields bracket dG/dR F - dF/dR G = 0 and, on an
    (R, v) grid, how well the definitions sigma q = G and
    sigma (l.B - lambda q) = F can hold."""
    r_values = np.atleast_1d(np.asarray(r_values, dtype=float))
    m = sys.n - 1

    def as_vec(fn, R):
        return np.atleast_1d(np.asarray(fn(np.atleast_1d(R)), dtype=float))

    bracket = np.empty((r_values.size, m))
    for ir, r in enumerate(r_values):
        R = np.full(m, r) if m > 1 else np.array([r])
        dF = np.empty((m, m))
        dG = np.empty((m, m))
        for g in range(m):
            h = grad.rel_step * max(1.0, abs(R[g]))
            Rp, Rm = R.copy(), R.copy()
            Rp[g] += h
            Rm[g] -= h
            dF[:, g] = (as_vec(F, Rp) - as_vec(F, Rm)) / (2.0 * h)
            dG[:, g] = (as_vec(G, Rp) - as_vec(G, Rm)) / (2.0 * h)
        bracket[ir] = dG @ as_vec(F, R) - dF @ as_vec(G, R)

    if v_values is None:
        return CaseIIStructuralReport(bracket_residual=bracket,
                                      def_residual_q=np.zeros((0, 0, m)),
                                      def_residual_f=np.zeros((0, 0, m)),
                                      r_values=r_values)

    v_values = np.asarray(v_values, dtype=float)
    dq = np.empty((r_values.size, v_values.size, m))
    df = np.empty((r_values.size, v_values.size, m))
    for ir, r in enumerate(r_values):
        R = np.array([r]) if m == 1 else np.full(m, r)
        for iv, v in enumerate(v_values):
            p = _chart_pieces(sys, chart, [], R, v)
            qv = np.linalg.solve(p["sigma"], as_vec(G, R))
            dq[ir, iv] = p["sigma"] @ qv - as_vec(G, R)
            df[ir, iv] = p["sigma"] @ (p["lB"] - p["lam_co"] * qv) - as_vec(F, R)
    return CaseIIStructuralReport(bracket_residual=bracket,
                                  def_residual_q=dq,
                                  def_residual_f=df,
                                  r_values=r_values)


def chart_constraint_residual(sys: HyperbolicSystem, chart: RiemannChart,
                              q_list: Sequence[Callable], fieldobj):
    """Constraint residual dR/dx - sigma q evaluated on a solution field
    with O(h^2) interior differences; returns the (nt, nx-2, N-1) grid."""
    xs, vals = fieldobj.xs, fieldobj.values
    dx = xs[1] - xs[0]
    nt, nx, _ = vals.shape
    m = sys.n - 1
    Rgrid = np.empty((nt, nx, m))
    for k in range(nt):
        for j in range(nx):
            Rgrid[k, j] = chart.R(vals[k, j])
    dRdx = (Rgrid[:, 2:, :] - Rgrid[:, :-2, :]) / (2.0 * dx)
    res = np.empty_like(dRdx)
    for k in range(nt):
        for j in range(1, nx - 1):
            U = vals[k, j]
            dec = decompose(sys, U)
            sig = chart.sigma(U, dec)
            qv = np.array([q(U) for q in q_list])
            res[k, j - 1] = dRdx[k, j - 1] - sig @ qv
    return res


@dataclass
class ResidualProbe:
    """Sample driver for the pointwise evaluators: states, (x, t) points,
    values for the free derivative component, and the difference config."""
    states: tuple
    points: tuple = ((0.0, 0.0),)
    pi_values: tuple = (0.0, 1.0, -1.0)
    grad: GradientOperator = CENTRAL

    def involutiveness(self, sys, cs):
        """Max |res| of both conditions over all states and points."""
        worst = 0.0
        for U in self.states:
            for pt in self.points:
                r1, r2 = involutiveness_residual(sys, cs, U, pt, self.grad)
                worst = max(worst, float(np.max(np.abs(r1))),
                            float(np.max(np.abs(r2))))
        return worst

    def w_z(self, sys, chart, q_list, U):
        """w = sigma q and z = sigma (l.B - lambda q) at a state."""
        R, v = chart.coords(np.asarray(U, dtype=float))
        p = _chart_pieces(sys, chart, list(q_list), R, v)
        w = p["sigma"] @ p["q"]
        z = p["sigma"] @ (p["lB"] - p["lam_co"] * p["q"])
        return w, z
