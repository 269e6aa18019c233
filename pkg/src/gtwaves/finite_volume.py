"""Independent grid reference for smooth solutions of U_t + A(U) U_x = B.

Two schemes step the quasilinear (non-conservative) form directly, which is
adequate because every solution this package verifies is smooth
(pre-breaking, no sub-shock): a first-order Lax-Friedrichs-type update with
centered A(U) U_x, and a second-order two-step predictor-corrector.  The
code path shares nothing with the characteristic/ODE constructions, so
agreement between the two is evidence rather than tautology.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AdmissibilityLoss, CFLViolation
from .fields import SolutionField
from .systems import HyperbolicSystem, decompose


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell grid with CFL-limited stepping.

    boundary: "exact" fills ghost cells from the supplied exact solution
    (a callable exact(x_array, t) -> (m, n)); "extrapolate" copies the edge
    cells outward.
    """
    x_min: float
    x_max: float
    cells: int
    t_end: float
    cfl: float = 0.45
    boundary: str = "extrapolate"
    exact: Optional[Callable] = None

    def __post_init__(self):
        if not (0.0 < self.cfl < 1.0):
            raise CFLViolation(f"CFL number {self.cfl} outside (0, 1)")
        if self.cells < 16:
            raise ValueError("need at least 16 cells")
        if self.boundary not in ("exact", "extrapolate"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if self.boundary == "exact" and self.exact is None:
            raise ValueError("boundary='exact' requires the exact callable")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.cells

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.cells) + 0.5) * self.dx


@dataclass
class ReferenceRun:
    scheme: str
    spec: GridSpec
    xs: np.ndarray
    final: np.ndarray              # (cells, n)
    t_end: float
    n_steps: int
    max_speed_history: np.ndarray
    errors: Optional[dict] = None  # vs exact, when available

    def to_field(self, names, meta=None) -> SolutionField:
        base = {"kind": "fv-reference", "scheme": self.scheme,
                "cells": self.spec.cells, "cfl": self.spec.cfl,
                "n_steps": self.n_steps}
        if meta:
            base.update(meta)
        vals = self.final[None, :, :]
        return SolutionField(xs=self.xs, ts=np.array([self.t_end]),
                             values=vals, names=tuple(names), meta=base)


def _batched_ops(sys: HyperbolicSystem):
    if sys.apply_A_batch is not None:
        apply_A = sys.apply_A_batch
    else:
        def apply_A(U, V):
            out = np.empty_like(V)
            for j in range(U.shape[0]):
                out[j] = np.asarray(sys.A(U[j])) @ V[j]
            return out
    if sys.B_batch is not None:
        B = sys.B_batch
    else:
        def B(U):
            out = np.empty_like(U)
            for j in range(U.shape[0]):
                out[j] = np.asarray(sys.B(U[j]))
            return out
    if sys.max_abs_speed_batch is not None:
        speed = sys.max_abs_speed_batch
    else:
        def speed(U):
            return max(float(np.max(np.abs(decompose(sys, U[j]).lambdas)))
                       for j in range(U.shape[0]))
    return apply_A, B, speed


def _check_admissible(sys, U, t):
    for j in range(U.shape[0]):
        if not (np.all(np.isfinite(U[j])) and sys.admissible(U[j])):
            raise AdmissibilityLoss(t, j, U[j])


def _ghost(spec: GridSpec, U, t, source_shift=None, layers=1):
    """Prepend/append ghost cells per side."""
    if spec.boundary == "extrapolate":
        top = np.repeat(U[:1], layers, axis=0)
        bot = np.repeat(U[-1:], layers, axis=0)
        return np.vstack([top, U, bot])
    dx = spec.dx
    xl = spec.x_min - (np.arange(layers, 0, -1) - 0.5) * dx
    xr = spec.x_max + (np.arange(1, layers + 1) - 0.5) * dx
    G = np.asarray(spec.exact(np.concatenate([xl, xr]), t), dtype=float)
    if source_shift is not None:
        G = source_shift(G)
    return np.vstack([G[:layers], U, G[layers:]])


def advance(sys: HyperbolicSystem, U0, spec: GridSpec,
            scheme: str = "pc2", source_mode: str = "strang",
            record_errors: bool = True) -> ReferenceRun:
    """Advance initial data to spec.t_end.

    scheme "lf": first-order Lax-Friedrichs-type transport with the source
    applied at the transported midpoint state.  scheme "pc2": second-order
    forward/backward predictor-corrector; the source enters through a
    Strang-type split around the transport step ("strang") or inside both
    stages ("unsplit").
    """
    if scheme not in ("lf", "pc2"):
        raise ValueError(f"unknown scheme {scheme!r}")
    xs = spec.centers()
    if callable(U0):
        U = np.asarray(U0(xs), dtype=float)
    else:
        U = np.asarray(U0, dtype=float).copy()
    if U.shape != (spec.cells, sys.n):
        raise ValueError(f"initial grid shape {U.shape} != "
                         f"({spec.cells}, {sys.n})")
    apply_A, B_of, speed_of = _batched_ops(sys)
    _check_admissible(sys, U, 0.0)

    t = 0.0
    n_steps = 0
    speeds = []
    dx = spec.dx

    def half_source(U, dt):
        # midpoint rule for dU/dt = B(U) over dt/2
        k1 = B_of(U)
        Umid = U + 0.25 * dt * k1
        return U + 0.5 * dt * B_of(Umid)

    while t < spec.t_end - 1e-14:
        smax = speed_of(U)
        speeds.append(smax)
        if smax <= 0.0:
            dt = spec.t_end - t
        else:
            dt = min(spec.cfl * dx / smax, spec.t_end - t)
        if dt <= 0.0:
            raise CFLViolation("nonpositive time step")

        if scheme == "lf":
            W = _ghost(spec, U, t)
            transport = 0.5 * (W[:-2] + W[2:]) \
                - dt / (2.0 * dx) * apply_A(W[1:-1], W[2:] - W[:-2])
            U_new = transport + dt * B_of(0.5 * (U + transport))
        elif source_mode == "strang":
            # S(dt/2) T(dt) S(dt/2); boundary data enters only at t with the
            # +dt/2 source phase, and corrector ghosts are themselves
            # predicted so both stages see consistent states
            U1 = half_source(U, dt)
            shift_in = (lambda G: half_source(G, dt)) \
                if spec.boundary == "exact" else None
            W = _ghost(spec, U1, t, source_shift=shift_in, layers=2)
            pred = W[1:-1] - dt / dx * apply_A(W[1:-1], W[2:] - W[1:-1])
            corr = 0.5 * (U1 + pred[1:-1]
                          - dt / dx * apply_A(pred[1:-1],
                                              pred[1:-1] - pred[:-2]))
            U_new = half_source(corr, dt)
        else:  # unsplit predictor-corrector with the source in both stages
            W = _ghost(spec, U, t, layers=2)
            pred = W[1:-1] - dt / dx * apply_A(W[1:-1], W[2:] - W[1:-1]) \
                + dt * B_of(W[1:-1])
            corr = 0.5 * (U + pred[1:-1]
                          - dt / dx * apply_A(pred[1:-1],
                                              pred[1:-1] - pred[:-2])
                          + dt * B_of(pred[1:-1]))
            U_new = corr

        t += dt
        n_steps += 1
        U = U_new
        _check_admissible(sys, U, t)

    errors = None
    if record_errors and spec.exact is not None:
        ref = np.asarray(spec.exact(xs, spec.t_end), dtype=float)
        diff = U - ref
        errors = {
            "l2": float(np.sqrt(np.mean(np.sum(diff ** 2, axis=1)))),
            "max": float(np.max(np.abs(diff))),
            "per_component_l2": [float(np.sqrt(np.mean(diff[:, c] ** 2)))
                                 for c in range(sys.n)],
        }
    return ReferenceRun(scheme=scheme, spec=spec, xs=xs, final=U,
                        t_end=spec.t_end, n_steps=n_steps,
                        max_speed_history=np.asarray(speeds), errors=errors)


@dataclass
class ConvergenceTable:
    cells: np.ndarray
    dx: np.ndarray
    l2: np.ndarray
    max: np.ndarray
    order: Optional[float]
    flagged: str = ""

    def rows(self):
        for c, h, e2, em in zip(self.cells, self.dx, self.l2, self.max):
            yield {"cells": int(c), "dx": float(h), "l2": float(e2),
                   "max": float(em)}


def convergence_study(sys: HyperbolicSystem, exact: Callable,
                      base: GridSpec, cell_ladder,
                      scheme: str = "pc2",
                      source_mode: str = "strang") -> ConvergenceTable:
    """Errors against an exact solution over a resolution ladder, with the
    convergence order fitted by least squares on log dx / log error."""
    cells = np.asarray(sorted(cell_ladder), dtype=int)
    l2s, maxs, dxs = [], [], []
    for m in cells:
        spec = GridSpec(x_min=base.x_min, x_max=base.x_max, cells=int(m),
                        t_end=base.t_end, cfl=base.cfl,
                        boundary=base.boundary, exact=exact)
        run = advance(sys, lambda xs: exact(xs, 0.0), spec, scheme=scheme,
                      source_mode=source_mode)
        l2s.append(run.errors["l2"])
        maxs.append(run.errors["max"])
        dxs.append(spec.dx)
    l2s = np.asarray(l2s)
    if np.max(l2s) < 1e-12:
        return ConvergenceTable(cells=cells, dx=np.asarray(dxs), l2=l2s,
                                max=np.asarray(maxs), order=None,
                                flagged="errors at machine epsilon; "
                                        "order fit skipped")
    slope = np.polyfit(np.log(dxs), np.log(l2s), 1)[0]
    return ConvergenceTable(cells=cells, dx=np.asarray(dxs), l2=l2s,
                            max=np.asarray(maxs), order=float(slope))
