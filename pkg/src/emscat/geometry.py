"""Smooth genus-0 surface parametrizations q: S -> dD.

Each shape maps unit vectors on the reference sphere S to surface points and
supplies the outward unit normal and the surface Jacobian (area element of q
relative to S) from analytic derivatives.  Cartesian tangent formulas are used
throughout, which stay regular at the spherical-coordinate poles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["SurfaceParametrization", "SurfaceSample", "sphere", "spheroid",
           "chebyshev_particle", "radial_shape"]


@dataclass(frozen=True)
class SurfaceSample:
    """Point data of the parametrization at one reference direction."""

    xhat: np.ndarray
    x: np.ndarray
    normal: np.ndarray
    jacobian: float


def _chebyshev_T(order: int, t: np.ndarray) -> np.ndarray:
    return np.cos(order * np.arccos(np.clip(t, -1.0, 1.0)))


def _chebyshev_T_deriv(order: int, t: np.ndarray) -> np.ndarray:
    # T_m'(t) = m * U_{m-1}(t);  evaluated through trig away from |t|=1 and by
    # the polynomial limit at the poles
    t = np.clip(t, -1.0, 1.0)
    out = np.empty_like(t)
    interior = np.abs(t) < 1.0 - 1e-9
    th = np.arccos(t[interior])
    out[interior] = order * np.sin(order * th) / np.sin(th)
    edge = ~interior
    out[edge] = order**2 * np.sign(t[edge]) ** (order + 1)
    return out


def _chebyshev_divdiff(order: int, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Stable divided difference (T_m(s) - T_m(t)) / (s - t).

    Uses the power-basis expansion of T_m; exact polynomial arithmetic keeps
    the near-diagonal evaluation cancellation-free.
    """
    coeffs = np.polynomial.chebyshev.cheb2poly(
        np.eye(order + 1)[order])  # power-basis coefficients of T_order
    # divided difference of t^i is sum_{a+b=i-1} s^a t^b
    acc = np.zeros(np.broadcast(s, t).shape,
                   dtype=np.result_type(np.asarray(s).dtype, np.asarray(t).dtype))
    for i in range(1, order + 1):
        ci = coeffs[i]
        if ci == 0.0:
            continue
        inner = np.zeros_like(acc)
        for a in range(i):
            inner += s**a * t**(i - 1 - a)
        acc += ci * inner
    return acc


@dataclass(frozen=True)
class SurfaceParametrization:
    """One of the built-in shape families or a user radial map.

    kind: 'sphere' | 'spheroid' | 'chebyshev' | 'radial'.
    """

    kind: str
    radius: float = 1.0
    aspect_ratio: float = 1.0
    base: float = 0.5
    amplitude: float = 0.025
    order: int = 5
    radial_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None)
    radial_grad_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None)

    def __post_init__(self):
        if self.kind == "sphere":
            if self.radius <= 0:
                raise ValueError("radius must be positive")
        elif self.kind == "spheroid":
            if self.aspect_ratio < 1.0:
                raise ValueError("aspect ratio must be >= 1")
        elif self.kind == "chebyshev":
            if self.base - abs(self.amplitude) <= 0:
                raise ValueError("base - amplitude must stay positive")
            if self.order < 0:
                raise ValueError("order must be a non-negative integer")
        elif self.kind == "radial":
            if self.radial_fn is None or self.radial_grad_fn is None:
                raise ValueError("radial shapes need r(xhat) and its surface gradient")
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")

    # -- radial profile machinery (sphere/chebyshev/radial are r(xhat)*xhat) --

    def _is_radial(self) -> bool:
        return self.kind in ("sphere", "chebyshev", "radial")

    def _rho(self, xhat: np.ndarray) -> np.ndarray:
        if self.kind == "sphere":
            return np.full(xhat.shape[0], self.radius)
        if self.kind == "chebyshev":
            return self.base + self.amplitude * _chebyshev_T(self.order, xhat[:, 2])
        return np.asarray(self.radial_fn(xhat), dtype=float)

    def _rho_surface_grad(self, xhat: np.ndarray) -> np.ndarray:
        if self.kind == "sphere":
            return np.zeros_like(xhat)
        if self.kind == "chebyshev":
            dr = self.amplitude * _chebyshev_T_deriv(self.order, xhat[:, 2])
            e3 = np.zeros_like(xhat)
            e3[:, 2] = 1.0
            return dr[:, None] * (e3 - xhat[:, 2][:, None] * xhat)
        return np.asarray(self.radial_grad_fn(xhat), dtype=float)

    # -- evaluation ---------------------------------------------------------

    def evaluate_many(self, xhat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Positions, outward unit normals and Jacobians at unit vectors (M, 3)."""
        xhat = np.atleast_2d(np.asarray(xhat))
        if xhat.dtype not in (np.float64, np.longdouble):
            xhat = xhat.astype(float)
        if self.kind == "spheroid":
            rho = self.aspect_ratio
            x = np.column_stack([xhat[:, 0] / rho, xhat[:, 1] / rho, xhat[:, 2]])
            nvec = np.column_stack([xhat[:, 0] / rho, xhat[:, 1] / rho,
                                    xhat[:, 2] / rho**2])
            jac = np.linalg.norm(nvec, axis=1)
            normal = nvec / jac[:, None]
            return x, normal, jac
        rho = self._rho(xhat)
        if np.any(rho <= 0):
            raise ValueError("radial profile must stay positive")
        grad = self._rho_surface_grad(xhat)
        x = rho[:, None] * xhat
        nvec = rho[:, None] * xhat - grad
        nn = np.linalg.norm(nvec, axis=1)
        normal = nvec / nn[:, None]
        jac = rho * nn
        return x, normal, jac

    def evaluate(self, xhat: np.ndarray) -> SurfaceSample:
        xhat = np.asarray(xhat, dtype=float)
        if abs(np.linalg.norm(xhat) - 1.0) > 1e-12:
            raise ValueError("direction is not a unit vector")
        x, normal, jac = self.evaluate_many(xhat[None, :])
        return SurfaceSample(xhat=xhat, x=x[0], normal=normal[0], jacobian=float(jac[0]))

    # -- chord factor: q(x) - q(y) = C(x, y) @ (x - y) ------------------------

    def chord_matrix(self, xhat: np.ndarray, yhat: np.ndarray) -> np.ndarray:
        """Smooth matrices C with q(xhat) - q(yhat) = C @ (xhat - yhat).

        Inputs are broadcast-compatible stacks (..., 3); output (..., 3, 3).
        Closed form for the built-ins; a Gauss-Legendre Hadamard integral of
        the homogeneous extension for user radial shapes (inaccurate only for
        near-antipodal pairs, which the discretization never couples through
        this factor).
        """
        xhat = np.asarray(xhat, dtype=float)
        yhat = np.asarray(yhat, dtype=float)
        shape = np.broadcast_shapes(xhat.shape[:-1], yhat.shape[:-1])
        dtype = np.result_type(xhat.dtype, yhat.dtype)
        if self.kind == "sphere":
            c = self.radius * np.eye(3, dtype=dtype)
            return np.broadcast_to(c, shape + (3, 3))  # constant: view only
        if self.kind == "spheroid":
            c = np.diag([1.0 / self.aspect_ratio, 1.0 / self.aspect_ratio,
                         1.0]).astype(dtype)
            return np.broadcast_to(c, shape + (3, 3))
        if self.kind == "chebyshev":
            # q(x)-q(y) = rho(x3)(x-y) + amp*DD(x3,y3)*(x3-y3)*y
            rho_x = self.base + self.amplitude * _chebyshev_T(self.order, xhat[..., 2])
            dd = self.amplitude * _chebyshev_divdiff(self.order, xhat[..., 2], yhat[..., 2])
            c = np.zeros(shape + (3, 3), dtype=dtype)
            idx = np.arange(3)
            c[..., idx, idx] = rho_x[..., None]
            yb = np.broadcast_to(yhat, shape + (3,))
            c[..., :, 2] += dd[..., None] * yb
            return c
        return self._chord_matrix_hadamard(xhat, yhat)

    def _chord_matrix_hadamard(self, xhat: np.ndarray, yhat: np.ndarray) -> np.ndarray:
        nodes, w = np.polynomial.legendre.leggauss(32)
        tq = 0.5 * (nodes + 1.0)
        wq = 0.5 * w
        shape = np.broadcast_shapes(xhat.shape[:-1], yhat.shape[:-1])
        c = np.zeros(shape + (3, 3),
                     dtype=np.result_type(xhat.dtype, yhat.dtype))
        xb = np.broadcast_to(xhat, shape + (3,))
        yb = np.broadcast_to(yhat, shape + (3,))
        for t, w_t in zip(tq, wq):
            z = yb + t * (xb - yb)
            zn = np.linalg.norm(z, axis=-1)
            zhat = z / np.maximum(zn, 1e-300)[..., None]
            flat = zhat.reshape(-1, 3)
            rho = self._rho(flat).reshape(shape)
            grad = self._rho_surface_grad(flat).reshape(shape + (3,))
            idx = np.arange(3)
            c[..., idx, idx] += (w_t * rho)[..., None]
            c += w_t * zhat[..., :, None] * grad[..., None, :]
        return c

    # -- global metrics -----------------------------------------------------

    def diameter(self) -> float:
        """Maximum pairwise distance between surface points."""
        if self.kind == "sphere":
            return 2.0 * self.radius
        if self.kind == "spheroid":
            return 2.0  # poles at z = +-1 dominate the equatorial width
        return _numeric_diameter(self)

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        """First-order distance estimate from off-surface points to dD.

        Projects the signed gap along the surface normal at the radial (or
        scaled-radial) foot point; exact for the sphere, first-order accurate
        for the other shapes, which is all the near-field guards need.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "spheroid":
            rho = self.aspect_ratio
            scaled = np.column_stack([rho * pts[:, 0], rho * pts[:, 1], pts[:, 2]])
            g = np.linalg.norm(scaled, axis=1)
            grad = np.column_stack([rho**2 * pts[:, 0], rho**2 * pts[:, 1],
                                    pts[:, 2]]) / np.maximum(g, 1e-300)[:, None]
            return np.abs(g - 1.0) / np.maximum(np.linalg.norm(grad, axis=1), 1e-300)
        r = np.linalg.norm(pts, axis=1)
        safe = np.maximum(r, 1e-300)
        xhat = pts / safe[:, None]
        rho = self._rho(xhat)
        _, normal, _ = self.evaluate_many(xhat)
        tilt = np.abs(np.einsum("ij,ij->i", normal, xhat))
        return np.abs(r - rho) * tilt


from functools import lru_cache


@lru_cache(maxsize=32)
def _numeric_diameter(param: SurfaceParametrization) -> float:
    from scipy.optimize import minimize

    th = np.linspace(0.0, np.pi, 181)
    ph = np.linspace(0.0, 2.0 * np.pi, 73, endpoint=False)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    dirs = np.column_stack([
        (np.sin(tt) * np.cos(pp)).ravel(),
        (np.sin(tt) * np.sin(pp)).ravel(),
        np.cos(tt).ravel(),
    ])
    pts, _, _ = param.evaluate_many(dirs)
    # coarse search over the axisymmetric reduction, then refine in full angles
    best = 0.0
    best_pair = (0, 0)
    block = 2048
    for i in range(0, pts.shape[0], block):
        d2 = np.sum((pts[i:i + block, None, :] - pts[None, :, :]) ** 2, axis=2)
        k = np.unravel_index(np.argmax(d2), d2.shape)
        if d2[k] > best:
            best = d2[k]
            best_pair = (i + k[0], k[1])
    a0 = np.array([tt.ravel()[best_pair[0]], pp.ravel()[best_pair[0]],
                   tt.ravel()[best_pair[1]], pp.ravel()[best_pair[1]]])

    def neg_dist(a):
        d1 = np.array([np.sin(a[0]) * np.cos(a[1]), np.sin(a[0]) * np.sin(a[1]),
                       np.cos(a[0])])
        d2_ = np.array([np.sin(a[2]) * np.cos(a[3]), np.sin(a[2]) * np.sin(a[3]),
                        np.cos(a[2])])
        p, _, _ = param.evaluate_many(np.vstack([d1, d2_]))
        return -np.linalg.norm(p[0] - p[1])

    res = minimize(neg_dist, a0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    return float(-res.fun)


def sphere(radius: float = 1.0) -> SurfaceParametrization:
    return SurfaceParametrization(kind="sphere", radius=radius)


def spheroid(aspect_ratio: float) -> SurfaceParametrization:
    """Prolate spheroid (x1/rho, x2/rho, x3); major axis along z."""
    return SurfaceParametrization(kind="spheroid", aspect_ratio=aspect_ratio)


def chebyshev_particle(base: float = 0.5, amplitude: float = 1.0 / 40.0,
                       order: int = 5) -> SurfaceParametrization:
    """Radial particle r = base + amplitude * cos(order * arccos(x3))."""
    return SurfaceParametrization(kind="chebyshev", base=base,
                                  amplitude=amplitude, order=order)


def radial_shape(radial_fn, radial_grad_fn) -> SurfaceParametrization:
    """User radial map r(xhat) with its analytic surface gradient."""
    return SurfaceParametrization(kind="radial", radial_fn=radial_fn,
                                  radial_grad_fn=radial_grad_fn)
