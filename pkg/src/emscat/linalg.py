"""Dense complex linear algebra: pivoted LU, solves, 1-norm condition estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, onenormest

__all__ = ["Factorization", "factor", "solve", "cond1_estimate",
           "frequency_sweep", "SingularMatrixError"]


class SingularMatrixError(np.linalg.LinAlgError):
    """Factorization hit an exact zero pivot."""


@dataclass
class Factorization:
    """LU factors with partial pivoting plus a pivot-growth diagnostic."""

    lu: np.ndarray
    piv: np.ndarray
    n: int
    reciprocal_pivot_growth: float

    def solve(self, rhs: np.ndarray, adjoint: bool = False) -> np.ndarray:
        rhs = np.asarray(rhs)
        if rhs.shape[0] != self.n:
            raise ValueError("right-hand side does not match the factorization")
        return sla.lu_solve((self.lu, self.piv), rhs, trans=2 if adjoint else 0)


def factor(matrix: np.ndarray, overwrite: bool = False) -> Factorization:
    """LU with partial pivoting; an exact zero pivot is reported, not masked.

    overwrite=True lets the factorization reuse the input buffer (the caller
    gives up the matrix), halving the peak memory of large solves.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    import warnings
    amax = np.abs(matrix).max()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(matrix, overwrite_a=overwrite)
    diag = np.abs(np.diag(lu))
    if np.any(diag == 0.0):
        raise SingularMatrixError("matrix is singular to machine precision")
    umax = np.abs(np.triu(lu)).max()
    rpg = float(amax / umax) if umax > 0 else np.inf
    return Factorization(lu=lu, piv=piv, n=lu.shape[0],
                         reciprocal_pivot_growth=rpg)


def solve(fac: Factorization, rhs: np.ndarray,
          refine_matrix: np.ndarray | None = None) -> np.ndarray:
    """Triangular solves; passing the original matrix enables one step of
    iterative refinement (off by default, the stabilized system is benign).
    """
    x = fac.solve(rhs)
    if refine_matrix is not None:
        x = x + fac.solve(rhs - refine_matrix @ x)
    return x


def cond1_estimate(matrix: np.ndarray, fac: Factorization | None = None) -> float:
    """1-norm condition estimate ||A||_1 * est(||A^-1||_1).

    The inverse norm uses the Hager/Higham power iteration through LU solves,
    so only a handful of triangular solves are needed.  Returns +inf when the
    factorization is singular.
    """
    matrix = np.asarray(matrix)
    norm_a = np.abs(matrix).sum(axis=0).max()
    if fac is None:
        try:
            fac = factor(matrix)
        except SingularMatrixError:
            return np.inf
    op = LinearOperator(
        shape=matrix.shape,
        matvec=lambda v: fac.solve(v),
        rmatvec=lambda v: fac.solve(v, adjoint=True),
        dtype=complex,
    )
    inv_norm = float(onenormest(op))
    return float(norm_a * inv_norm)


def frequency_sweep(medium_template, geom, n: int, omegas,
                    n_prime: int | None = None) -> list[tuple[float, float, float]]:
    """Stabilized vs unstabilized condition numbers over a frequency sweep."""
    from .assembly import assemble, assemble_unstabilized

    rows = []
    for omega in omegas:
        med = medium_template.with_omega(float(omega))
        system = assemble(med, geom, n, n_prime)
        k_stab = cond1_estimate(system.lhs)
        try:
            k_unstab = cond1_estimate(assemble_unstabilized(system))
        except SingularMatrixError:
            k_unstab = np.inf
        rows.append((float(omega), k_stab, k_unstab))
    return rows


def resonance_scan(medium_template, geom, n: int, window: tuple[float, float],
                   budget: int = 40, coarse: int = 24,
                   n_prime: int | None = None):
    """Locate the spurious-resonance spike of I + M inside a frequency window.

    Spends ``coarse`` evaluations on an even grid and the remaining budget on
    golden-section refinement of the condition-number ratio around the coarse
    peak.  Returns (rows, peak_omega, peak_ratio) with all sampled
    frequencies inside the window.
    """
    lo, hi = window
    omegas = list(np.linspace(lo, hi, coarse))
    rows = frequency_sweep(medium_template, geom, n, omegas, n_prime)

    def ratio_at(omega):
        row = frequency_sweep(medium_template, geom, n, [omega], n_prime)[0]
        rows.append(row)
        return (row[2] / row[1]) if np.isfinite(row[2]) else np.inf

    ratios = [(r[2] / r[1]) if np.isfinite(r[2]) else np.inf for r in rows]
    kbest = int(np.argmax(ratios))
    spacing = (hi - lo) / (coarse - 1)
    a = max(lo, rows[kbest][0] - spacing)
    b = min(hi, rows[kbest][0] + spacing)
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = ratio_at(x1), ratio_at(x2)
    remaining = budget - coarse - 2
    for _ in range(max(0, remaining)):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = ratio_at(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = ratio_at(x1)
    rows.sort(key=lambda r: r[0])
    ratios = [(r[2] / r[1]) if np.isfinite(r[2]) else np.inf for r in rows]
    kbest = int(np.argmax(ratios))
    return rows, rows[kbest][0], ratios[kbest]
