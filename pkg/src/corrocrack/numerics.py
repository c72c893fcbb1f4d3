"""Shared numerical kernels.

Lambert W on the non-negative reals, the sparse SPD solve used by every
finite-element sub-problem, ordinary least squares (linear and log-log)
and a central finite-difference derivative check.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import lambertw, wrightomega

from .errors import DomainError, FitError, SolverError

log = logging.getLogger(__name__)

def lambert_w0(F):
    """Principal branch of the Lambert W function for ``F >= 0``.

    Thin wrapper over :func:`scipy.special.lambertw` that enforces the real
    domain and returns real output.

    Parameters
    ----------
    F : float or array_like
        Non-negative argument(s).

    Returns
    -------
    float or numpy.ndarray
        ``W0(F)``, same shape as the input.
    """
    F_arr = np.asarray(F, dtype=float)
    if np.any(np.isnan(F_arr)) or np.any(F_arr < 0.0):
        raise DomainError("lambert_w0 is only defined here for F >= 0")
    out = np.real(lambertw(F_arr, 0))
    if not np.all(np.isfinite(out)):
        raise SolverError("lambert_w0 did not converge")
    return float(out) if out.ndim == 0 else out


def lambert_w0_log(logF):
    """``W0(exp(logF))`` without forming ``exp(logF)``.

    Used when the argument would overflow. This is the Wright omega
    function on the real line, evaluated by :func:`scipy.special.wrightomega`.
    """
    lf = np.asarray(logF, dtype=float)
    out = np.real(wrightomega(lf))
    if not np.all(np.isfinite(out)):
        raise SolverError("lambert_w0_log did not converge")
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sparse SPD systems
# ---------------------------------------------------------------------------

@dataclass
class SparseSystem:
    """Symmetric sparse system ``A x = b`` with optional Dirichlet constraints.

    ``fixed_dofs``/``fixed_values`` are eliminated before solving; the
    returned solution contains the prescribed values at those positions.
    """

    matrix: sp.spmatrix
    rhs: np.ndarray
    fixed_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    fixed_values: Optional[np.ndarray] = None

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n, m = self.matrix.shape
        if n != m or self.rhs.shape != (n,):
            raise DomainError(f"inconsistent system dimensions {self.matrix.shape} / {self.rhs.shape}")
        self.fixed_dofs = np.asarray(self.fixed_dofs, dtype=int)
        if self.fixed_values is None:
            self.fixed_values = np.zeros(self.fixed_dofs.size)
        self.fixed_values = np.asarray(self.fixed_values, dtype=float)

    def check_symmetric(self, rtol: float = 1e-12) -> bool:
        diff = abs(self.matrix - self.matrix.T)
        scale = abs(self.matrix).max() if self.matrix.nnz else 1.0
        return (diff.max() if diff.nnz else 0.0) <= rtol * scale


def _cg_jacobi(A, b, rtol, maxiter):
    d = A.diagonal()
    if np.any(d <= 0.0):
        raise SolverError("non-positive diagonal entry; matrix is not SPD")
    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=sp.diags(1.0 / d))
    if info != 0:
        raise SolverError(f"conjugate gradient did not converge in {maxiter} iterations")
    return x


def solve_spd(sys_: SparseSystem, method: str = "direct", rtol: float = 1e-8) -> np.ndarray:
    """Solve an SPD sparse system after eliminating Dirichlet constraints.

    ``method="direct"`` uses a sparse LU factorisation with a symmetric
    fill-reducing ordering; ``method="cg"`` uses Jacobi-preconditioned
    conjugate gradients. Either way the relative residual of the reduced
    system is checked against ``rtol``.
    """
    A = sys_.matrix
    n = A.shape[0]
    x = np.zeros(n)
    free = np.ones(n, dtype=bool)
    if sys_.fixed_dofs.size:
        free[sys_.fixed_dofs] = False
        x[sys_.fixed_dofs] = sys_.fixed_values
    b = sys_.rhs - A @ x
    Aff = A[free][:, free].tocsc()
    bf = b[free]
    bnorm = np.linalg.norm(bf)
    if bnorm == 0.0:
        return x
    if method == "direct":
        if np.any(Aff.diagonal() <= 0.0):
            raise SolverError("non-positive diagonal entry; matrix is not SPD")
        try:
            lu = spla.splu(Aff, permc_spec="MMD_AT_PLUS_A",
                           options={"SymmetricMode": True})
        except RuntimeError as exc:  # singular factor
            raise SolverError(f"sparse factorisation failed: {exc}") from exc
        xf = lu.solve(bf)
        # iterative refinement recovers accuracy lost to pivoting on stiff contrasts
        for _ in range(3):
            r = bf - Aff @ xf
            if np.linalg.norm(r) <= 0.01 * rtol * bnorm:
                break
            xf += lu.solve(r)
    elif method == "cg":
        xf = _cg_jacobi(Aff.tocsr(), bf, rtol=min(rtol, 1e-10), maxiter=20 * Aff.shape[0])
    else:
        raise DomainError(f"unknown solver method {method!r}")
    if not np.all(np.isfinite(xf)):
        raise SolverError("linear solve produced non-finite values (singular system?)")
    res = np.linalg.norm(Aff @ xf - bf) / bnorm
    if res > rtol:
        raise SolverError(f"relative residual {res:.2e} exceeds {rtol:.0e}")
    x[free] = xf
    return x


# ---------------------------------------------------------------------------
# least squares
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """Outcome of a two-parameter least-squares fit.

    For :func:`linear_fit` ``coefficients = (slope, intercept)``; for
    :func:`power_fit` ``coefficients = (gamma1, gamma2)`` and ``rss``/``r2``
    refer to the log-log regression.
    """

    coefficients: tuple
    rss: float
    r2: float
    n: int


def _ols(x: np.ndarray, y: np.ndarray):
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = dx @ dx
    if sxx <= 0.0 or not np.isfinite(sxx):
        raise FitError("degenerate abscissae: all x values coincide")
    slope = (dx @ (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    rss = float(resid @ resid)
    dy = y - ym
    tss = float(dy @ dy)
    r2 = 1.0 - rss / tss if tss > 0.0 else 1.0
    return float(slope), float(intercept), rss, r2


def linear_fit(points: Sequence[Sequence[float]]) -> FitResult:
    """Ordinary least squares ``y = slope * x + intercept``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise FitError("at least two points are required for a linear fit")
    order = np.lexsort((pts[:, 1], pts[:, 0]))  # reordering-invariant summation
    pts = pts[order]
    slope, intercept, rss, r2 = _ols(pts[:, 0], pts[:, 1])
    return FitResult((slope, intercept), rss, r2, pts.shape[0])


def power_fit(points: Sequence[Sequence[float]], i_ref: float) -> FitResult:
    """Fit ``beta = gamma1 * (i / i_ref) ** gamma2`` by OLS in log-log space."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise FitError("at least two points are required for a power fit")
    if i_ref <= 0.0 or np.any(pts <= 0.0):
        raise DomainError("power_fit needs strictly positive data and reference")
    lx = np.log(pts[:, 0] / i_ref)
    ly = np.log(pts[:, 1])
    fit = linear_fit(np.column_stack([lx, ly]))
    g2, lg1 = fit.coefficients
    return FitResult((float(np.exp(lg1)), g2), fit.rss, fit.r2, fit.n)


def fd_check(f: Callable[[float], float], df: Callable[[float], float],
             x: float, h: float = 1e-6) -> float:
    """Relative error between ``df(x)`` and a central difference of ``f``."""
    fd = (f(x + h) - f(x - h)) / (2.0 * h)
    claimed = df(x)
    scale = max(abs(fd), abs(claimed))
    if scale == 0.0:
        return 0.0
    return abs(fd - claimed) / scale
