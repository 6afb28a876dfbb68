"""Spherical-harmonic machinery on the unit sphere.

Provides the product-exact quadrature rule with m = 2(n+1)**2 points, fully
orthonormal complex spherical harmonics, the fully discrete orthogonal
projection onto degree-n vector spherical polynomials, and the exact singular
moments of the Coulomb factor 1/|x - y|.

Conventions (fixed repo-wide):
    * harmonics are orthonormal in L2(S) with the Condon-Shortley phase,
      conj(Y[l, j]) == (-1)**j * Y[l, -j];
    * scalar coefficients are ordered l ascending, j ascending within l,
      flat index l*l + l + j;
    * vector coefficients stack the three Cartesian components with the
      component index outermost: [k=0 block | k=1 block | k=2 block].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureRule",
    "ScalarSpectralCoeffs",
    "VectorSpectralCoeffs",
    "build_quadrature",
    "eval_basis",
    "eval_basis_matrix",
    "project",
    "project_scalar",
    "evaluate_coeffs",
    "singular_moment",
    "legendre_partial_sums",
    "coeff_index",
]


def coeff_index(l: int, j: int) -> int:
    """Flat position of (l, j) in the documented coefficient ordering."""
    return l * l + l + j


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre x trapezoid rule, exact on P_n x P_n products.

    nodes are unit vectors with shape (m, 3), weights sum to 4*pi and
    m = 2*(n+1)**2.  Node ordering is polar-major: index = i_theta * n_phi + i_phi.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    azimuth_offset: float = 0.0

    @property
    def m(self) -> int:
        return self.nodes.shape[0]

    def __post_init__(self):
        if self.nodes.shape != (2 * (self.n + 1) ** 2, 3):
            raise ValueError("node count does not match degree")


def build_quadrature(n: int, azimuth_offset: float = 0.0) -> QuadratureRule:
    """Quadrature with (n+1) Gauss-Legendre points in cos(theta) tensored with
    a uniform 2(n+1)-point azimuthal trapezoid rule.

    Exact for all spherical polynomials of degree <= 2n+1, hence exact on
    products of two degree-n spherical polynomials.  ``azimuth_offset`` shifts
    the azimuthal grid by a fraction of its spacing (exactness is unaffected).
    """
    if n < 0:
        raise ValueError("degree must be >= 0")
    n_th = n + 1
    n_ph = 2 * (n + 1)
    ct, w_th = np.polynomial.legendre.leggauss(n_th)
    st = np.sqrt(1.0 - ct**2)
    phi = 2.0 * np.pi * (np.arange(n_ph) + azimuth_offset) / n_ph
    cp, sp = np.cos(phi), np.sin(phi)

    nodes = np.empty((n_th * n_ph, 3))
    nodes[:, 0] = np.repeat(st, n_ph) * np.tile(cp, n_th)
    nodes[:, 1] = np.repeat(st, n_ph) * np.tile(sp, n_th)
    nodes[:, 2] = np.repeat(ct, n_ph)
    weights = np.repeat(w_th, n_ph) * (np.pi / (n + 1))
    return QuadratureRule(n=n, nodes=nodes, weights=weights,
                          azimuth_offset=azimuth_offset)


@dataclass(frozen=True)
class ScalarSpectralCoeffs:
    """Complex coefficients c[l, j] for 0 <= l <= n, |j| <= l ((n+1)**2 values)."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != ((self.n + 1) ** 2,):
            raise ValueError("coefficient count does not match degree")


@dataclass(frozen=True)
class VectorSpectralCoeffs:
    """Cartesian-component stack of three scalar coefficient sets (k outermost)."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (3 * (self.n + 1) ** 2,):
            raise ValueError("coefficient count does not match degree")

    def component(self, k: int) -> ScalarSpectralCoeffs:
        nb = (self.n + 1) ** 2
        return ScalarSpectralCoeffs(self.n, self.values[k * nb:(k + 1) * nb])


def _normalized_legendre(n: int, ct: np.ndarray, st: np.ndarray) -> np.ndarray:
    """Fully normalized associated Legendre values Q[l, j >= 0] at cos(theta).

    Q[l, j] carries the Condon-Shortley phase and the complete L2(S)
    normalization so that Y[l, j] = Q[l, j] * exp(i*j*phi).  Three-term
    recurrence on the normalized functions, stable for l up to ~2000.
    """
    npts = ct.shape[0]
    out = np.zeros((n + 1, n + 1, npts))
    # seed: Q[m, m] built multiplicatively to avoid factorial overflow
    qmm = np.full(npts, 1.0 / np.sqrt(4.0 * np.pi))
    out[0, 0] = qmm
    for m in range(1, n + 1):
        qmm = qmm * (-st) * np.sqrt((2 * m + 1) / (2.0 * m))
        out[m, m] = qmm
    for m in range(0, n + 1):
        if m + 1 <= n:
            out[m + 1, m] = np.sqrt(2 * m + 3.0) * ct * out[m, m]
        for l in range(m + 2, n + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt((2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m)
                        / ((2.0 * l - 3.0) * (l * l - m * m)))
            out[l, m] = a * ct * out[l - 1, m] - b * out[l - 2, m]
    return out


def eval_basis_matrix(n: int, points: np.ndarray) -> np.ndarray:
    """All orthonormal harmonics Y[l, j] at unit vectors ``points`` (M, 3).

    Returns a complex array of shape ((n+1)**2, M) in the documented ordering.
    """
    pts = np.atleast_2d(points)
    ct = np.clip(pts[:, 2], -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct**2))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    q = _normalized_legendre(n, ct, st)
    out = np.zeros(((n + 1) ** 2, pts.shape[0]), dtype=np.complex128)
    for l in range(n + 1):
        out[coeff_index(l, 0)] = q[l, 0]
        for j in range(1, l + 1):
            e = np.exp(1j * j * phi)
            out[coeff_index(l, j)] = q[l, j] * e
            out[coeff_index(l, -j)] = (-1) ** j * q[l, j] * np.conj(e)
    return out


def eval_basis(n: int, xhat: np.ndarray) -> np.ndarray:
    """Harmonic values at a single unit vector, shape ((n+1)**2,)."""
    _check_unit(xhat)
    return eval_basis_matrix(n, xhat[None, :])[:, 0]


def _check_unit(xhat: np.ndarray, tol: float = 1e-12):
    if abs(np.linalg.norm(xhat) - 1.0) > tol:
        raise ValueError("direction is not a unit vector")


def project_scalar(samples: np.ndarray, rule: QuadratureRule,
                   basis: np.ndarray | None = None) -> ScalarSpectralCoeffs:
    """Discrete projection of scalar samples at the rule nodes onto degree n."""
    if samples.shape != (rule.m,):
        raise ValueError("sample count does not match the quadrature rule")
    if basis is None:
        basis = eval_basis_matrix(rule.n, rule.nodes)
    vals = basis.conj() @ (rule.weights * samples)
    return ScalarSpectralCoeffs(rule.n, vals)


def project(samples: np.ndarray, rule: QuadratureRule,
            basis: np.ndarray | None = None) -> VectorSpectralCoeffs:
    """Fully discrete orthogonal projection of vector samples (m, 3).

    Implements the degree-n projection: c[l, j, k] = (sample_k, Y[l, j])_m.
    """
    samples = np.asarray(samples)
    if samples.shape != (rule.m, 3):
        raise ValueError("sample count does not match the quadrature rule")
    if basis is None:
        basis = eval_basis_matrix(rule.n, rule.nodes)
    weighted = basis.conj() * rule.weights
    vals = (weighted @ samples).T.reshape(-1)  # (3, (n+1)^2) -> k outermost
    return VectorSpectralCoeffs(rule.n, np.ascontiguousarray(vals))


def evaluate_coeffs(coeffs: VectorSpectralCoeffs, xhat: np.ndarray) -> np.ndarray:
    """Synthesis at a single unit vector: sum c[l,j,k] Y[l,j](xhat) e_k."""
    _check_unit(xhat)
    basis = eval_basis(coeffs.n, xhat)
    nb = (coeffs.n + 1) ** 2
    c = coeffs.values.reshape(3, nb)
    return c @ basis


def evaluate_coeffs_many(coeffs: VectorSpectralCoeffs,
                         points: np.ndarray,
                         basis: np.ndarray | None = None) -> np.ndarray:
    """Synthesis at many points, shape (M, 3) complex."""
    if basis is None:
        basis = eval_basis_matrix(coeffs.n, points)
    nb = (coeffs.n + 1) ** 2
    c = coeffs.values.reshape(3, nb)
    return (c @ basis).T


def singular_moment(l: int, j: int, xhat: np.ndarray) -> complex:
    """Exact weakly singular moment: integral of Y[l,j](y)/|x - y| over S.

    Equals 4*pi/(2l+1) * Y[l,j](x), evaluated in closed form.
    """
    if l < 0 or abs(j) > l:
        raise ValueError("invalid harmonic indices")
    y = eval_basis(l, xhat)[coeff_index(l, j)]
    return 4.0 * np.pi / (2 * l + 1) * y


def legendre_partial_sums(nprime: int, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums Z(t) = sum_{l<=n'} P_l(t) and Z'(t) = sum_{l<=n'} P_l'(t).

    Z is the degree-n' truncation of the generating identity
    sum_l P_l(t) = 1/|x - y| for t = x.y on the unit sphere; Z and Z' are the
    node-level weights through which the exact singular moments act.
    """
    t = np.asarray(t, dtype=np.float64)
    p_prev = np.ones_like(t)
    z = np.ones_like(t)
    zp = np.zeros_like(t)
    if nprime == 0:
        return z, zp
    p = t.copy()
    dp_prev = np.zeros_like(t)
    dp = np.ones_like(t)
    z = z + p
    zp = zp + dp
    for l in range(1, nprime):
        p_next = ((2 * l + 1) * t * p - l * p_prev) / (l + 1)
        dp_next = dp_prev + (2 * l + 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
        z += p
        zp += dp
    return z, zp
