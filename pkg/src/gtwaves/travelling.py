"""Travelling-frame reduction: waves satisfying U_t + s U_x = F(U).

The reduction expresses both partial derivatives through the eigenbasis,

    U_x = sum_j pi_j d^j,     U_t = F - s sum_j pi_j d^j,
    pi_i = l^i . (B - F) / (lambda^i - s),

checks the mixed-partial compatibility of the pair, integrates the
overdetermined system into a space-time solution, and detects the sub-shock
singularities that appear where a characteristic speed crosses s.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RectBivariateSpline

from .errors import (CompatibilityViolation, ProfileBlowup,
                     SubShockSingularity)
from .fields import SolutionField
from .systems import (CENTRAL, GradientOperator, HyperbolicSystem, decompose,
                      source_jacobian, spectral_derivatives)


@dataclass(frozen=True)
class TravellingFrame:
    """Wave speed s and the constraint source F(U); exact_tw marks F == 0."""
    s: float
    F: Callable[[np.ndarray], np.ndarray]
    exact_tw: bool = False
    jac_F: Optional[Callable] = None
    label: str = "custom"

    @classmethod
    def homogeneous(cls, s: float, n: int = 2) -> "TravellingFrame":
        return cls(s=s, F=lambda U: np.zeros(n), exact_tw=True,
                   jac_F=lambda U: np.zeros((n, n)), label="zero")

    @classmethod
    def barotropic_family(cls, s: float, k1: float) -> "TravellingFrame":
        """F = (0, k1 (u - s)), the source of the barotropic wave family."""
        def F(U):
            return np.array([0.0, k1 * (U[1] - s)])

        def jac_F(U):
            return np.array([[0.0, 0.0], [0.0, k1]])
        return cls(s=s, F=F, exact_tw=(k1 == 0.0), jac_F=jac_F,
                   label=f"barotropic(k1={k1:g})")


@dataclass
class PiCoefficients:
    """Derivative components pi_i with their speed gaps lambda^i - s."""
    pi: np.ndarray
    gaps: np.ndarray
    removable: np.ndarray
    reconstruction_defect: float

    @property
    def n(self) -> int:
        return self.pi.size


def default_sonic_tol(s: float) -> float:
    return 1e-8 * (1.0 + abs(s))


def pi_coefficients(sys: HyperbolicSystem, frame: TravellingFrame,
                    U, sonic_tol: Optional[float] = None) -> PiCoefficients:
    """pi_i = l^i . (B - F) / (lambda^i - s) at a state.

    Raises SubShockSingularity when a gap vanishes while the projection does
    not; a simultaneous zero is a removable point whose value is taken as a
    one-sided limit along the speed gradient and flagged.
    """
    U = np.asarray(U, dtype=float)
    if sonic_tol is None:
        sonic_tol = default_sonic_tol(frame.s)
    dec = decompose(sys, U)
    BF = sys.source(U) - np.asarray(frame.F(U), dtype=float)
    gaps = dec.lambdas - frame.s
    proj = dec.left @ BF
    pi = np.empty(sys.n)
    removable = np.zeros(sys.n, dtype=bool)
    for i in range(sys.n):
        if abs(gaps[i]) > sonic_tol:
            pi[i] = proj[i] / gaps[i]
            continue
        if abs(proj[i]) > sonic_tol:
            raise SubShockSingularity(i, U, float(gaps[i]), float(proj[i]))
        # both vanish: one-sided limit along the direction that moves the gap
        g = CENTRAL.grad_scalar(
            lambda V: decompose(sys, V).lambdas[i] - frame.s, U)
        norm = np.linalg.norm(g)
        if norm < 1e-13:
            pi[i] = 0.0
        else:
            w = g / norm
            eps = 1e-5 * max(1.0, float(np.max(np.abs(U))))
            V = U + eps * w
            dv = decompose(sys, V)
            num = dv.left[i] @ (sys.source(V) - np.asarray(frame.F(V)))
            den = dv.lambdas[i] - frame.s
            pi[i] = num / den if abs(den) > 1e-14 else 0.0
        removable[i] = True
    recon = (dec.left @ (pi @ dec.right)) @ dec.right - pi @ dec.right
    return PiCoefficients(pi=pi, gaps=gaps, removable=removable,
                          reconstruction_defect=float(np.max(np.abs(recon))))


def _pi_vector(sys, frame, U, sonic_tol=None):
    return pi_coefficients(sys, frame, U, sonic_tol).pi


def gtw_compat_residual(sys: HyperbolicSystem, frame: TravellingFrame,
                        U, grad: GradientOperator = CENTRAL) -> np.ndarray:
    """Mixed-partial compatibility residual of the reduced pair, one entry
    per left-eigenvector projection:

        res_s = F_i d(pi_s)/du_i
                - l^s_k (dF_k/du_i d^j_i - d(d^j_k)/du_i F_i) pi_j

    (all indices except s summed).  Zero for every s iff the constraints are
    compatible at U.  Sub-shock states inside the difference stencil
    propagate their error.
    """
    U = np.asarray(U, dtype=float)
    dec = decompose(sys, U)
    pis = pi_coefficients(sys, frame, U)
    Fv = np.asarray(frame.F(U), dtype=float)

    dpi = grad.grad_vector(lambda V: _pi_vector(sys, frame, V), U,
                           jac=None if grad.mode == "central" else
                           (lambda V: _analytic_dpi(sys, frame, V)))
    dF = grad.grad_vector(frame.F, U, jac=frame.jac_F)
    sd = spectral_derivatives(sys, U, grad)

    res = np.empty(sys.n)
    for s_idx in range(sys.n):
        lhs = Fv @ dpi[s_idx]
        rhs = 0.0
        for j in range(sys.n):
            rhs += pis.pi[j] * (dec.left[s_idx] @ dF @ dec.right[j])
            rhs -= pis.pi[j] * (dec.left[s_idx] @ sd.dright[j] @ Fv)
        res[s_idx] = lhs - rhs
    return res


def _analytic_dpi(sys, frame, U):
    """d pi_s / du_i from analytic eigen, source, and frame Jacobians."""
    dec = decompose(sys, U)
    sd = spectral_derivatives(sys, U, GradientOperator(mode="analytic"))
    dB = source_jacobian(sys, U, GradientOperator(mode="analytic"))
    dF = np.asarray(frame.jac_F(U), dtype=float)
    BF = sys.source(U) - np.asarray(frame.F(U), dtype=float)
    gaps = dec.lambdas - frame.s
    dpi = np.empty((sys.n, sys.n))
    for s_idx in range(sys.n):
        dnum = sd.dleft[s_idx].T @ BF + (dB - dF).T @ dec.left[s_idx]
        num = dec.left[s_idx] @ BF
        dpi[s_idx] = dnum / gaps[s_idx] \
            - num / gaps[s_idx] ** 2 * sd.dlam[s_idx]
    return dpi


@dataclass
class GtwSolution:
    """Space-time solution of the reduced pair on a regular grid."""
    frame: TravellingFrame
    xs: np.ndarray
    ts: np.ndarray
    grid: np.ndarray               # (nt, nx, n)
    anchor: np.ndarray
    x0: float
    path_defect: float = np.nan
    compat_max: float = np.nan

    def eval(self, x, t):
        splines = [RectBivariateSpline(self.ts, self.xs, self.grid[:, :, c],
                                       kx=min(3, self.ts.size - 1),
                                       ky=min(3, self.xs.size - 1))
                   for c in range(self.grid.shape[2])]
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.stack([s.ev(t, x) for s in splines], axis=-1)
        return out

    def to_field(self, names, meta=None) -> SolutionField:
        base = {"kind": "gtw", "s": self.frame.s,
                "frame": self.frame.label, "x0": self.x0,
                "anchor": list(map(float, self.anchor)),
                "path_defect": None if np.isnan(self.path_defect)
                else self.path_defect,
                "compat_max": None if np.isnan(self.compat_max)
                else self.compat_max}
        if meta:
            base.update(meta)
        return SolutionField(xs=self.xs, ts=self.ts, values=self.grid,
                             names=tuple(names), meta=base)


def _integrate_ode(rhs, y0, t_eval, rtol, atol, fixed_step):
    """Solve an autonomous ODE over t_eval (ascending from t_eval[0])."""
    if t_eval[-1] == t_eval[0]:
        return np.repeat(np.asarray(y0, dtype=float)[None, :],
                         len(t_eval), axis=0)
    if fixed_step:
        return _rk4(rhs, y0, t_eval)
    sol = solve_ivp(rhs, (t_eval[0], t_eval[-1]), y0, method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise ProfileBlowup(f"integration failed: {sol.message}")
    return sol.y.T


def _rk4(rhs, y0, t_eval, substeps=8):
    y = np.asarray(y0, dtype=float).copy()
    out = np.empty((len(t_eval), y.size))
    out[0] = y
    for k in range(1, len(t_eval)):
        h = (t_eval[k] - t_eval[k - 1]) / substeps
        t = t_eval[k - 1]
        for _ in range(substeps):
            k1 = np.asarray(rhs(t, y))
            k2 = np.asarray(rhs(t + h / 2, y + h / 2 * k1))
            k3 = np.asarray(rhs(t + h / 2, y + h / 2 * k2))
            k4 = np.asarray(rhs(t + h, y + h * k3))
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[k] = y
    return out


def integrate_gtw(sys: HyperbolicSystem, frame: TravellingFrame,
                  anchor, x0: float, window, nx: int = 101, nt: int = 51,
                  rtol: float = 1e-10, atol: float = 1e-12,
                  compat_tol: Optional[float] = 1e-5,
                  grad: GradientOperator = CENTRAL,
                  sonic_tol: Optional[float] = None,
                  fixed_step: bool = False,
                  record_path_defect: bool = True) -> GtwSolution:
    """Integrate the reduced pair from an anchor state U(x0, 0).

    The x-profile ODE dU/dx = sum pi_j d^j is solved along t = 0 first, then
    the t-line ODE dU/dt = F - s sum pi_j d^j from every grid abscissa; both
    fields depend on U alone.  The compatibility residual is monitored along
    the t = 0 profile and a sample of t-lines, and integration aborts on
    violation rather than continuing.
    """
    anchor = np.asarray(anchor, dtype=float)
    x_min, x_max, t_max = float(window[0]), float(window[1]), float(window[2])
    if not (x_min <= x0 <= x_max):
        raise ValueError("anchor abscissa x0 must lie inside the window")
    xs = np.linspace(x_min, x_max, nx)
    ts = np.linspace(0.0, t_max, nt)

    def rhs_x(_x, U):
        return _pi_vector(sys, frame, U, sonic_tol) @ decompose(sys, U).right

    def rhs_t(_t, U):
        ux = _pi_vector(sys, frame, U, sonic_tol) @ decompose(sys, U).right
        return np.asarray(frame.F(U), dtype=float) - frame.s * ux

    compat_max = np.nan
    if compat_tol is not None:
        compat_max = float(np.max(np.abs(
            gtw_compat_residual(sys, frame, anchor, grad))))
        if compat_max > compat_tol:
            raise CompatibilityViolation(
                f"constraint compatibility residual {compat_max:g} exceeds "
                f"tol {compat_tol:g} at the anchor state")

    # profile along t = 0, integrating right and left of the anchor
    def march(rhs, start, targets):
        if not targets.size:
            return np.empty((0, sys.n))
        if targets[0] == start:
            return _integrate_ode(rhs, anchor, targets, rtol, atol,
                                  fixed_step)
        ev = np.concatenate([[start], targets])
        return _integrate_ode(rhs, anchor, ev, rtol, atol, fixed_step)[1:]

    profile = np.empty((nx, sys.n))
    profile[xs >= x0] = march(rhs_x, x0, xs[xs >= x0])
    profile[xs < x0] = march(rhs_x, x0, xs[xs < x0][::-1])[::-1]

    if compat_tol is not None:
        checks = profile[:: max(1, nx // 8)]
        worst = max(float(np.max(np.abs(gtw_compat_residual(
            sys, frame, U, grad)))) for U in checks)
        compat_max = max(compat_max, worst)
        if worst > compat_tol:
            raise CompatibilityViolation(
                f"constraint compatibility residual {worst:g} exceeds "
                f"tol {compat_tol:g} along the initial profile")

    grid = np.empty((nt, nx, sys.n))
    for j in range(nx):
        grid[:, j, :] = _integrate_ode(rhs_t, profile[j], ts, rtol, atol,
                                       fixed_step)

    defect = np.nan
    if record_path_defect and nt > 1 and nx > 1:
        probes = [(xs[nx // 4], ts[-1]), (xs[-1], ts[nt // 2]),
                  (xs[nx // 2], ts[-1])]
        worst = 0.0
        for (px, pt) in probes:
            a = integrate_to_point(sys, frame, anchor, x0, px, pt, "xt",
                                   rtol, atol, sonic_tol, fixed_step)
            b = integrate_to_point(sys, frame, anchor, x0, px, pt, "tx",
                                   rtol, atol, sonic_tol, fixed_step)
            worst = max(worst, float(np.max(np.abs(a - b))))
        defect = worst

    return GtwSolution(frame=frame, xs=xs, ts=ts, grid=grid, anchor=anchor,
                       x0=x0, path_defect=defect, compat_max=compat_max)


def integrate_to_point(sys: HyperbolicSystem, frame: TravellingFrame,
                       anchor, x0: float, x: float, t: float,
                       order: str = "xt", rtol: float = 1e-10,
                       atol: float = 1e-12,
                       sonic_tol: Optional[float] = None,
                       fixed_step: bool = False) -> np.ndarray:
    """March the anchor state to (x, t) along coordinate lines, either
    x-profile first ("xt") or t-line first ("tx")."""

    def rhs_x(_x, U):
        return _pi_vector(sys, frame, U, sonic_tol) @ decompose(sys, U).right

    def rhs_t(_t, U):
        ux = _pi_vector(sys, frame, U, sonic_tol) @ decompose(sys, U).right
        return np.asarray(frame.F(U), dtype=float) - frame.s * ux

    U = np.asarray(anchor, dtype=float)
    if order == "xt":
        legs = ((rhs_x, x0, x), (rhs_t, 0.0, t))
    elif order == "tx":
        legs = ((rhs_t, 0.0, t), (rhs_x, x0, x))
    else:
        raise ValueError("order must be 'xt' or 'tx'")
    for rhs, a, b in legs:
        if a == b:
            continue
        U = _integrate_ode(rhs, U, np.array([a, b]), rtol, atol,
                           fixed_step)[-1]
    return U


@dataclass
class SonicHit:
    family: int
    state: np.ndarray
    gap: float
    projection: float
    kind: str  # "removable" | "sub-shock"


def detect_sonic_locus(sys: HyperbolicSystem, frame: TravellingFrame,
                       bounds, n: int = 64,
                       sonic_tol: Optional[float] = None) -> list:
    """Scan a state-space box for sign changes of lambda^i(U) - s along grid
    edges; each crossing is bisected and classified by the size of
    |l^i . (B - F)| there."""
    if sonic_tol is None:
        sonic_tol = default_sonic_tol(frame.s)
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    axes = [np.linspace(lo, hi, n) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    shape = mesh[0].shape
    nvar = len(bounds)

    gaps = np.empty(shape + (sys.n,))
    it = np.nditer(mesh[0], flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        U = np.array([m[idx] for m in mesh])
        gaps[idx] = decompose(sys, U).lambdas - frame.s

    hits = []

    def classify(i, U):
        dec = decompose(sys, U)
        proj = dec.left[i] @ (sys.source(U) - np.asarray(frame.F(U)))
        gap = dec.lambdas[i] - frame.s
        kind = "removable" if abs(proj) <= max(sonic_tol, 1e-7) else "sub-shock"
        hits.append(SonicHit(family=i, state=U, gap=float(gap),
                             projection=float(proj), kind=kind))

    def bisect(i, Ua, Ub):
        ga = decompose(sys, Ua).lambdas[i] - frame.s
        for _ in range(60):
            Um = 0.5 * (Ua + Ub)
            gm = decompose(sys, Um).lambdas[i] - frame.s
            if ga * gm <= 0.0:
                Ub = Um
            else:
                Ua, ga = Um, gm
            if np.max(np.abs(Ub - Ua)) < 1e-10:
                break
        classify(i, 0.5 * (Ua + Ub))

    for i in range(sys.n):
        for axis in range(nvar):
            g = gaps[..., i]
            sl_lo = [slice(None)] * nvar
            sl_hi = [slice(None)] * nvar
            sl_lo[axis] = slice(0, -1)
            sl_hi[axis] = slice(1, None)
            sign_change = g[tuple(sl_lo)] * g[tuple(sl_hi)] < 0.0
            for idx in np.argwhere(sign_change):
                idx_lo = list(idx)
                idx_hi = list(idx)
                idx_hi[axis] += 1
                Ua = np.array([m[tuple(idx_lo)] for m in mesh])
                Ub = np.array([m[tuple(idx_hi)] for m in mesh])
                bisect(i, Ua, Ub)
    return hits
