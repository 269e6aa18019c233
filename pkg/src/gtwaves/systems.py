"""Quasilinear hyperbolic systems U_t + A(U) U_x = B(U).

Spectral decomposition of A with a deterministic normalization, plus the
central-difference gradient machinery every residual evaluator builds on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (ComplexEigenvalues, DegenerateSpeeds,
                     EvaluationOutsideAdmissibleSet)

SIGN_TOL = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenstructure of A(U) at one state.

    lambdas : (n,) speeds, ascending
    right   : (n, n), right[i] = d^i with A d^i = lambda^i d^i
    left    : (n, n), left[i] = l^i with l^i A = lambda^i l^i and
              l^i . d^j = delta_ij
    """
    lambdas: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def n(self) -> int:
        return self.lambdas.size

    def reconstruct(self, v: np.ndarray) -> np.ndarray:
        """Sum_i (l^i . v) d^i; equals v for a complete eigenbasis."""
        return (self.left @ v) @ self.right

    def biorthonormality_defect(self) -> float:
        return float(np.max(np.abs(self.left @ self.right.T - np.eye(self.n))))


@dataclass(frozen=True)
class HyperbolicSystem:
    """First-order quasilinear system with n unknowns.

    A and B map a state (n,) to an (n, n) matrix and an (n,) source.
    `eigen`, when supplied, returns analytic (lambdas, right, left) and
    always overrides the numeric eigensolver.  `eigen_jac` returns analytic
    derivatives (dlam, dright, dleft) with the index layout of
    spectral_derivatives.  Batched hooks are optional fast paths used by the
    grid reference solver.
    """
    n: int
    A: Callable[[np.ndarray], np.ndarray]
    B: Callable[[np.ndarray], np.ndarray]
    names: tuple = ()
    admissible: Callable[[np.ndarray], bool] = lambda U: True
    eigen: Optional[Callable] = None
    eigen_jac: Optional[Callable] = None
    jac_A: Optional[Callable] = None
    jac_B: Optional[Callable] = None
    hyperbolicity_tol: float = 1e-8
    apply_A_batch: Optional[Callable] = None
    B_batch: Optional[Callable] = None
    max_abs_speed_batch: Optional[Callable] = None

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names",
                               tuple(f"u{i}" for i in range(self.n)))

    def check_admissible(self, U: np.ndarray) -> None:
        if not self.admissible(np.asarray(U, dtype=float)):
            raise EvaluationOutsideAdmissibleSet(
                f"state {U} outside the admissible set")

    def source(self, U: np.ndarray) -> np.ndarray:
        return np.asarray(self.B(U), dtype=float)


def _sign_normalize(lambdas, right, left):
    """Deterministic convention: the first component of each d^i with
    |.| > SIGN_TOL is rescaled to +1 (so in particular positive), and l^i is
    rescaled so l^i . d^i = 1."""
    right = right.copy()
    left = left.copy()
    n = lambdas.size
    for i in range(n):
        for comp in right[i]:
            if abs(comp) > SIGN_TOL:
                right[i] = right[i] / comp
                break
        scale = left[i] @ right[i]
        left[i] = left[i] / scale
    return lambdas, right, left


def decompose(sys: HyperbolicSystem, U: np.ndarray) -> SpectralDecomposition:
    """Spectral decomposition of A(U), sorted ascending and sign-normalized.

    Raises ComplexEigenvalues if A is not hyperbolic at U and
    DegenerateSpeeds if two speeds fall within the strictness tolerance.
    """
    U = np.asarray(U, dtype=float)
    sys.check_admissible(U)

    if sys.eigen is not None:
        lambdas, right, left = sys.eigen(U)
        lambdas = np.asarray(lambdas, dtype=float)
        right = np.asarray(right, dtype=float)
        left = np.asarray(left, dtype=float)
        order = np.argsort(lambdas)
        lambdas, right, left = lambdas[order], right[order], left[order]
    else:
        A = np.asarray(sys.A(U), dtype=float)
        w, V = np.linalg.eig(A)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.max(np.abs(w.imag)) > 1e-9 * scale:
            raise ComplexEigenvalues(U, float(np.max(np.abs(w.imag))))
        lambdas = w.real
        order = np.argsort(lambdas)
        lambdas = lambdas[order]
        right = V.real[:, order].T
        left = None

    tol = sys.hyperbolicity_tol * max(1.0, float(np.max(np.abs(lambdas))))
    gaps = np.diff(lambdas)
    if lambdas.size > 1 and np.min(gaps) <= tol:
        k = int(np.argmin(gaps))
        raise DegenerateSpeeds(U, (k, k + 1), float(gaps[k]), tol)
    if left is None:
        # rows of the inverse of the right-eigenvector matrix are left
        # eigenvectors already scaled to l^i . d^j = delta_ij
        left = np.linalg.inv(right.T)

    lambdas, right, left = _sign_normalize(lambdas, right, left)
    return SpectralDecomposition(lambdas=lambdas, right=right, left=left)


@dataclass(frozen=True)
class GradientOperator:
    """d/dU by analytic pass-through or central differences.

    Central differencing uses a relative step h_i = rel_step * max(1, |u_i|)
    per component.
    """
    mode: str = "central"  # "central" | "analytic"
    rel_step: float = 1e-6

    def steps(self, U: np.ndarray) -> np.ndarray:
        return self.rel_step * np.maximum(1.0, np.abs(U))

    def grad_scalar(self, f: Callable, U: np.ndarray,
                    jac: Optional[Callable] = None) -> np.ndarray:
        """Gradient covector of a scalar function of the state."""
        if self.mode == "analytic":
            if jac is None:
                raise ValueError("analytic mode requires a supplied Jacobian")
            return np.asarray(jac(U), dtype=float)
        U = np.asarray(U, dtype=float)
        h = self.steps(U)
        out = np.empty(U.size)
        for b in range(U.size):
            Up, Um = U.copy(), U.copy()
            Up[b] += h[b]
            Um[b] -= h[b]
            out[b] = (f(Up) - f(Um)) / (2.0 * h[b])
        return out

    def grad_vector(self, g: Callable, U: np.ndarray,
                    jac: Optional[Callable] = None) -> np.ndarray:
        """Jacobian matrix J[a, b] = d g_a / d u_b."""
        if self.mode == "analytic":
            if jac is None:
                raise ValueError("analytic mode requires a supplied Jacobian")
            return np.asarray(jac(U), dtype=float)
        U = np.asarray(U, dtype=float)
        h = self.steps(U)
        cols = []
        for b in range(U.size):
            Up, Um = U.copy(), U.copy()
            Up[b] += h[b]
            Um[b] -= h[b]
            cols.append((np.asarray(g(Up), dtype=float)
                         - np.asarray(g(Um), dtype=float)) / (2.0 * h[b]))
        return np.stack(cols, axis=-1)


CENTRAL = GradientOperator()
ANALYTIC = GradientOperator(mode="analytic")


@dataclass(frozen=True)
class SpectralDerivatives:
    """State derivatives of the eigenstructure.

    dlam[i, b]      = d lambda^i / d u_b
    dright[i, k, b] = d (d^i)_k  / d u_b
    dleft[i, k, b]  = d (l^i)_k  / d u_b
    """
    dlam: np.ndarray
    dright: np.ndarray
    dleft: np.ndarray


def spectral_derivatives(sys: HyperbolicSystem, U: np.ndarray,
                         grad: GradientOperator = CENTRAL) -> SpectralDerivatives:
    """Differentiate the (sorted, sign-normalized) decomposition at U.

    Prefers the model's analytic eigen_jac; otherwise central differences of
    decompose, which are continuous thanks to the sign convention.
    """
    U = np.asarray(U, dtype=float)
    if sys.eigen_jac is not None and grad.mode != "central":
        dlam, dright, dleft = sys.eigen_jac(U)
        return SpectralDerivatives(np.asarray(dlam, dtype=float),
                                   np.asarray(dright, dtype=float),
                                   np.asarray(dleft, dtype=float))
    n = sys.n
    h = grad.steps(U)
    dlam = np.empty((n, n))
    dright = np.empty((n, n, n))
    dleft = np.empty((n, n, n))
    for b in range(n):
        Up, Um = U.copy(), U.copy()
        Up[b] += h[b]
        Um[b] -= h[b]
        dp = decompose(sys, Up)
        dm = decompose(sys, Um)
        dlam[:, b] = (dp.lambdas - dm.lambdas) / (2.0 * h[b])
        dright[:, :, b] = (dp.right - dm.right) / (2.0 * h[b])
        dleft[:, :, b] = (dp.left - dm.left) / (2.0 * h[b])
    return SpectralDerivatives(dlam, dright, dleft)


def source_jacobian(sys: HyperbolicSystem, U: np.ndarray,
                    grad: GradientOperator = CENTRAL) -> np.ndarray:
    """d B_a / d u_b, analytic when the model provides jac_B."""
    if sys.jac_B is not None and grad.mode != "central":
        return np.asarray(sys.jac_B(U), dtype=float)
    return GradientOperator(rel_step=grad.rel_step).grad_vector(sys.B, U)


def grad_scalar(f: Callable, U: np.ndarray,
                grad: GradientOperator = CENTRAL,
                jac: Optional[Callable] = None) -> np.ndarray:
    """Module-level convenience wrapper around GradientOperator.grad_scalar."""
    return grad.grad_scalar(f, U, jac=jac)


def grad_vector(g: Callable, U: np.ndarray,
                grad: GradientOperator = CENTRAL,
                jac: Optional[Callable] = None) -> np.ndarray:
    """Module-level convenience wrapper around GradientOperator.grad_vector."""
    return grad.grad_vector(g, U, jac=jac)
