"""Concrete systems, above all barotropic Euler:

    rho_t + u rho_x + rho u_x = 0
    u_t + u u_x + (c^2/rho) rho_x = f(rho, u),   c = sqrt(p'(rho))

with the constraint-compatible force family

    f = k1 (u - s) + k1 (c beta / rho) ((u - s)^2 - c^2)

whose travelling-frame wave admits the closed form rho = R(x - s t),
u = s + (a0 / R) e^{k1 t} with R' = -k1 c(R) beta(R).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NonpositiveDensity, ProfileBlowup, SonicPoint
from .systems import HyperbolicSystem, SpectralDecomposition, _sign_normalize


@dataclass(frozen=True)
class PressureLaw:
    """Barotropic pressure p(rho) with p' > 0; sound speed c = sqrt(p')."""
    kind: str
    p: Callable[[float], float]
    dp: Callable[[float], float]
    d2p: Optional[Callable[[float], float]] = None
    params: dict = field(default_factory=dict)

    @classmethod
    def polytropic(cls, kappa: float = 1.0, gamma: float = 2.0) -> "PressureLaw":
        if kappa <= 0 or gamma <= 1:
            raise ValueError("polytropic law needs kappa > 0 and gamma > 1")
        return cls(
            kind="polytropic",
            p=lambda r: kappa * r ** gamma,
            dp=lambda r: kappa * gamma * r ** (gamma - 1.0),
            d2p=lambda r: kappa * gamma * (gamma - 1.0) * r ** (gamma - 2.0),
            params={"kappa": kappa, "gamma": gamma},
        )

    @classmethod
    def isothermal(cls, a: float = 1.0) -> "PressureLaw":
        if a <= 0:
            raise ValueError("isothermal law needs a > 0")
        return cls(
            kind="isothermal",
            p=lambda r: a * a * r,
            dp=lambda r, _a2=a * a: _a2,
            d2p=lambda r: 0.0,
            params={"a": a},
        )

    @classmethod
    def custom(cls, p: Callable, dp: Callable,
               d2p: Optional[Callable] = None) -> "PressureLaw":
        return cls(kind="custom", p=p, dp=dp, d2p=d2p)

    def c(self, rho):
        dp = self.dp(rho)
        if np.any(np.asarray(dp) <= 0.0):
            raise NonpositiveDensity(float(np.min(rho)), 0.0)
        return np.sqrt(dp)

    def dc(self, rho):
        """c'(rho) = p''/(2c); central difference when p'' is unavailable."""
        if self.d2p is not None:
            return self.d2p(rho) / (2.0 * self.c(rho))
        h = 1e-6 * max(1.0, abs(rho))
        return (self.c(rho + h) - self.c(rho - h)) / (2.0 * h)


def _beta_rho_over_c(law: PressureLaw):
    def beta(rho):
        return rho / law.c(rho)
    return beta


@dataclass(frozen=True)
class ForceSpec:
    """Force term f(rho, u) of the momentum equation.

    kinds: "none" (f = 0), "gtw_family" (the constraint-compatible family
    above, with beta = rho/c or a user function of rho), "custom".
    """
    kind: str = "none"
    k1: float = 0.0
    s: float = 0.0
    beta: object = "rho_over_c"  # "rho_over_c" | callable rho -> beta
    fn: Optional[Callable] = None

    @classmethod
    def none(cls) -> "ForceSpec":
        return cls(kind="none")

    @classmethod
    def gtw_family(cls, k1: float, s: float,
                   beta="rho_over_c") -> "ForceSpec":
        return cls(kind="gtw_family", k1=k1, s=s, beta=beta)

    @classmethod
    def custom(cls, fn: Callable) -> "ForceSpec":
        return cls(kind="custom", fn=fn)

    def resolve_beta(self, law: PressureLaw) -> Callable:
        if callable(self.beta):
            return self.beta
        if self.beta == "rho_over_c":
            return _beta_rho_over_c(law)
        raise ValueError(f"unknown beta spec {self.beta!r}")

    def value(self, rho, u, law: PressureLaw):
        if self.kind == "none":
            return np.zeros(np.broadcast_shapes(np.shape(rho), np.shape(u)))
        if self.kind == "custom":
            return self.fn(rho, u)
        beta = self.resolve_beta(law)
        c = law.c(rho)
        w = u - self.s
        return self.k1 * w + self.k1 * c * beta(rho) / rho * (w * w - c * c)


@dataclass(frozen=True)
class BarotropicModel:
    """Barotropic Euler in (rho, u) with a pressure law and a force term."""
    pressure: PressureLaw
    force: ForceSpec = field(default_factory=ForceSpec.none)
    rho_min: float = 1e-10

    def check_rho(self, rho) -> None:
        if np.any(np.asarray(rho) <= self.rho_min):
            raise NonpositiveDensity(float(np.min(rho)), self.rho_min)

    def f(self, rho, u):
        return self.force.value(rho, u, self.pressure)

    def _A(self, U):
        rho, u = U
        self.check_rho(rho)
        c2 = self.pressure.dp(rho)
        return np.array([[u, rho], [c2 / rho, u]])

    def _B(self, U):
        rho, u = U
        self.check_rho(rho)
        return np.array([0.0, self.f(rho, u)])

    def _eigen(self, U):
        rho, u = U
        self.check_rho(rho)
        c = self.pressure.c(rho)
        lambdas = np.array([u - c, u + c])
        right = np.array([[1.0, -c / rho], [1.0, c / rho]])
        left = 0.5 * np.array([[1.0, -rho / c], [1.0, rho / c]])
        return lambdas, right, left

    def _eigen_jac(self, U):
        rho, u = U
        c = self.pressure.c(rho)
        dc = self.pressure.dc(rho)
        dlam = np.array([[-dc, 1.0], [dc, 1.0]])
        # d^1 = (1, -c/rho), d^2 = (1, c/rho)
        dcr = (dc * rho - c) / rho ** 2  # d(c/rho)/drho
        dright = np.zeros((2, 2, 2))
        dright[0, 1, 0] = -dcr
        dright[1, 1, 0] = dcr
        # l^1 = (1, -rho/c)/2, l^2 = (1, rho/c)/2
        drc = (c - rho * dc) / c ** 2  # d(rho/c)/drho
        dleft = np.zeros((2, 2, 2))
        dleft[0, 1, 0] = -0.5 * drc
        dleft[1, 1, 0] = 0.5 * drc
        return dlam, dright, dleft

    def _jac_B(self, U):
        rho, u = U
        h = 1e-6 * max(1.0, abs(rho))
        dfdr = (self.f(rho + h, u) - self.f(rho - h, u)) / (2.0 * h)
        if self.force.kind == "gtw_family":
            c = self.pressure.c(rho)
            beta = self.force.resolve_beta(self.pressure)
            w = u - self.force.s
            dfdu = self.force.k1 * (1.0 + 2.0 * c * beta(rho) / rho * w)
        else:
            hu = 1e-6 * max(1.0, abs(u))
            dfdu = (self.f(rho, u + hu) - self.f(rho, u - hu)) / (2.0 * hu)
        return np.array([[0.0, 0.0], [dfdr, dfdu]])

    def system(self) -> HyperbolicSystem:
        def apply_A(U, V):
            rho, u = U[:, 0], U[:, 1]
            c2 = self.pressure.dp(rho)
            return np.stack([u * V[:, 0] + rho * V[:, 1],
                             c2 / rho * V[:, 0] + u * V[:, 1]], axis=1)

        def B_batch(U):
            rho, u = U[:, 0], U[:, 1]
            out = np.zeros_like(U)
            out[:, 1] = self.f(rho, u)
            return out

        def max_abs_speed(U):
            rho, u = U[:, 0], U[:, 1]
            return float(np.max(np.abs(u) + self.pressure.c(rho)))

        return HyperbolicSystem(
            n=2,
            A=self._A,
            B=self._B,
            names=("rho", "u"),
            admissible=lambda U: bool(np.isfinite(U).all() and U[0] > self.rho_min),
            eigen=self._eigen,
            eigen_jac=self._eigen_jac,
            jac_B=self._jac_B,
            apply_A_batch=apply_A,
            B_batch=B_batch,
            max_abs_speed_batch=max_abs_speed,
        )

    def eigenstructure(self, rho: float, u: float) -> SpectralDecomposition:
        """Closed-form speeds u -+ c and eigenvector pairs
        l^{1,2} = (1, -+ rho/c)/2, d^{1,2} = (1, -+ c/rho)^T, passed through
        the deterministic sign convention (a no-op for this normalization)."""
        self.check_rho(rho)
        lambdas, right, left = self._eigen(np.array([rho, u]))
        lambdas, right, left = _sign_normalize(lambdas, right, left)
        return SpectralDecomposition(lambdas=lambdas, right=right, left=left)


def barotropic_eigenstructure(rho: float, u: float,
                              law: PressureLaw) -> SpectralDecomposition:
    return BarotropicModel(pressure=law).eigenstructure(rho, u)


class GtwClosedForm:
    """Exact travelling-frame wave of the barotropic model.

    rho(x, t) = R(sigma), u(x, t) = s + (a0 / R(sigma)) e^{k1 t} with
    sigma = x - s t and the profile solving dR/dsigma = -k1 c(R) beta(R).
    For beta = rho/c the profile is the exponential rho0 e^{-k1 sigma}; any
    other beta is integrated with a dense-output adaptive stepper.
    """

    def __init__(self, law: PressureLaw, k1: float, s: float, a0: float,
                 rho0: float, beta="rho_over_c", rho_min: float = 1e-10,
                 rtol: float = 1e-10, atol: float = 1e-12):
        if rho0 <= rho_min:
            raise NonpositiveDensity(rho0, rho_min)
        self.law = law
        self.k1 = k1
        self.s = s
        self.a0 = a0
        self.rho0 = rho0
        self.beta_spec = beta
        self.rho_min = rho_min
        self.rtol = rtol
        self.atol = atol
        self._analytic = (not callable(beta)) and beta == "rho_over_c"
        self._beta = (beta if callable(beta)
                      else _beta_rho_over_c(law))
        self._dense = None
        self._dense_span = (0.0, 0.0)

    def _extend_dense(self, lo: float, hi: float) -> None:
        lo, hi = min(lo, -1e-12), max(hi, 1e-12)
        cur_lo, cur_hi = self._dense_span
        if self._dense is not None and lo >= cur_lo and hi <= cur_hi:
            return

        def rhs(sig, y):
            r = y[0]
            if r <= self.rho_min:
                raise ProfileBlowup(
                    f"profile density {r:g} fell below rho_min at sigma={sig:g}")
            return [-self.k1 * self.law.c(r) * self._beta(r)]

        sols = {}
        for direction, end in (("fwd", hi), ("bwd", lo)):
            sol = solve_ivp(rhs, (0.0, end), [self.rho0], method="RK45",
                            rtol=self.rtol, atol=self.atol, dense_output=True)
            if not sol.success:
                raise ProfileBlowup(
                    f"profile integration failed towards sigma={end:g}: "
                    f"{sol.message}")
            sols[direction] = sol
        fwd, bwd = sols["fwd"], sols["bwd"]

        def evaluate(sig):
            sig = np.atleast_1d(np.asarray(sig, dtype=float))
            out = np.empty_like(sig)
            pos = sig >= 0.0
            if pos.any():
                out[pos] = fwd.sol(sig[pos])[0]
            if (~pos).any():
                out[~pos] = bwd.sol(sig[~pos])[0]
            return out

        self._dense = evaluate
        self._dense_span = (lo, hi)

    def profile(self, sigma):
        """R(sigma) > 0, the density profile."""
        sigma = np.asarray(sigma, dtype=float)
        if self._analytic:
            R = self.rho0 * np.exp(-self.k1 * sigma)
        else:
            self._extend_dense(float(np.min(sigma)), float(np.max(sigma)))
            R = self._dense(sigma).reshape(sigma.shape)
        if np.any(R <= self.rho_min):
            raise ProfileBlowup("profile density left the admissible range")
        return R

    def profile_deriv(self, sigma):
        """dR/dsigma, exact from the defining ODE."""
        R = self.profile(sigma)
        return -self.k1 * self.law.c(R) * self._beta(R)

    def __call__(self, x, t):
        """State (rho, u) at (x, t); broadcasts over array input."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        sigma = x - self.s * t
        R = self.profile(sigma)
        u = self.s + self.a0 / R * np.exp(self.k1 * t)
        return np.stack(np.broadcast_arrays(R, u), axis=-1)

    def derivatives(self, x, t):
        """Analytic space/time derivatives of the solution.

        Returns dict with rho, u, rho_x, rho_t, u_x, u_t.
        """
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        sigma = x - self.s * t
        R = self.profile(sigma)
        Rp = -self.k1 * self.law.c(R) * self._beta(R)
        w = self.a0 / R * np.exp(self.k1 * t)  # u - s
        u = self.s + w
        rho_x = Rp + np.zeros_like(w)
        rho_t = -self.s * Rp + np.zeros_like(w)
        u_x = -w * Rp / R
        u_t = self.k1 * w + self.s * w * Rp / R
        return {"rho": R + np.zeros_like(w), "u": u, "rho_x": rho_x,
                "rho_t": rho_t, "u_x": u_x, "u_t": u_t}

    def residual(self, x, t, model: Optional[BarotropicModel] = None):
        """Residuals of the two governing equations with analytic derivatives.

        The force term defaults to the wave's own family (k1, s, beta).
        """
        d = self.derivatives(x, t)
        rho, u = d["rho"], d["u"]
        c = self.law.c(rho)
        if model is None:
            model = BarotropicModel(
                pressure=self.law,
                force=ForceSpec.gtw_family(self.k1, self.s, self.beta_spec))
        res_mass = d["rho_t"] + u * d["rho_x"] + rho * d["u_x"]
        res_mom = d["u_t"] + u * d["u_x"] + c * c / rho * d["rho_x"] \
            - model.f(rho, u)
        return res_mass, res_mom

    def model(self) -> BarotropicModel:
        return BarotropicModel(
            pressure=self.law,
            force=ForceSpec.gtw_family(self.k1, self.s, self.beta_spec))


class ScalarTravellingWave:
    """Travelling-wave profile U(sigma) of u_t + a(u) u_x = f(u).

    Integrates (a(U) - s) U' = f(U); with f omitted the profile is the
    constant initial value.  Evaluation raises SonicPoint when a(U) = s was
    hit inside the requested range.
    """

    def __init__(self, a: Callable, f: Optional[Callable], s: float,
                 u0: float, sigma_span=(-5.0, 5.0),
                 rtol: float = 1e-10, atol: float = 1e-12):
        self.a = a
        self.f = f
        self.s = s
        self.u0 = float(u0)
        self.sigma_span = (float(sigma_span[0]), float(sigma_span[1]))
        self._sonic_at = None
        if f is None:
            self._dense = None
            return
        if abs(a(u0) - s) < 1e-12 and abs(f(u0)) > 1e-12:
            raise SonicPoint(f"a(U0) = s at the anchor U0 = {u0:g}")

        gap0 = a(u0) - s

        def rhs(sig, y):
            return [f(y[0]) / (self.a(y[0]) - self.s)]

        def sonic(sig, y):
            return self.a(y[0]) - self.s
        sonic.terminal = True
        sonic.direction = 0.0

        self._branches = {}
        for key, end in (("fwd", self.sigma_span[1]),
                         ("bwd", self.sigma_span[0])):
            sol = solve_ivp(rhs, (0.0, end), [self.u0], method="RK45",
                            rtol=rtol, atol=atol, dense_output=True,
                            events=sonic)
            if sol.t_events[0].size:
                self._sonic_at = float(sol.t_events[0][0])
            self._branches[key] = sol
        self._dense = True

    def __call__(self, sigma):
        scalar = np.isscalar(sigma) or np.ndim(sigma) == 0
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        if self.f is None:
            out = np.full_like(sigma, self.u0, dtype=float)
            return out[0] if scalar else out
        out = np.empty_like(sigma, dtype=float)
        for key, mask in (("fwd", sigma >= 0.0), ("bwd", sigma < 0.0)):
            if not mask.any():
                continue
            sol = self._branches[key]
            lo, hi = sorted((sol.t[0], sol.t[-1]))
            vals = sigma[mask]
            if np.any(vals < lo - 1e-12) or np.any(vals > hi + 1e-12):
                where = "unknown" if self._sonic_at is None \
                    else f"{self._sonic_at:g}"
                raise SonicPoint(
                    f"a(U) = s reached at sigma = {where}; "
                    "profile not defined past the sonic point")
            out[mask] = sol.sol(np.clip(vals, lo, hi))[0]
        return out[0] if scalar else out

    def on_grid(self, x, t):
        """Evaluate u(x, t) = U(x - s t)."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return self(x - self.s * t)


def scalar_demo(a: Callable, f: Optional[Callable], s: float, u0: float,
                sigma_span=(-5.0, 5.0), rtol: float = 1e-10,
                atol: float = 1e-12) -> ScalarTravellingWave:
    """Travelling wave of the scalar model u_t + a(u) u_x = f(u)."""
    return ScalarTravellingWave(a, f, s, u0, sigma_span, rtol, atol)
