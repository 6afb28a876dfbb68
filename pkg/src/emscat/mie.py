"""Independent Mie-series reference for the penetrable sphere.

Re-derived from scratch (transmission matching of vector spherical waves with
general permittivity and permeability on both sides) so the oracle shares no
code with the surface-integral solver.  Far fields follow the outgoing-wave
convention E_scat ~ (exp(i k |x|)/|x|) * E_inf(xhat).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .medium import Medium

__all__ = ["MieSolution", "mie_solve", "mie_far_field", "mie_near_field",
           "mie_surface_trace", "cross_sections", "truncation_order"]


def truncation_order(size_parameter: float, margin: int = 15) -> int:
    """Wiscombe-style truncation L >= x + 4 x^(1/3) + 2 plus a safety margin."""
    x = abs(size_parameter)
    return int(np.ceil(x + 4.05 * x ** (1.0 / 3.0) + 2.0)) + margin


@dataclass(frozen=True)
class MieSolution:
    """Scattering (a, b) and interior (c, d) coefficients, index l = 1..L."""

    medium: Medium
    radius: float
    L: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray


def _riccati(kind: str, lmax: int, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """psi_l(z) = z j_l(z) or xi_l(z) = z h1_l(z) with derivatives, l = 0..lmax."""
    ls = np.arange(lmax + 1)
    j = spherical_jn(ls, z)
    jp = spherical_jn(ls, z, derivative=True)
    if kind == "psi":
        f, fp = j, jp
    else:
        y = spherical_yn(ls, z)
        yp = spherical_yn(ls, z, derivative=True)
        f, fp = j + 1j * y, jp + 1j * yp
    return z * f, f + z * fp


def mie_solve(medium: Medium, radius: float) -> MieSolution:
    """Transmission coefficients for a homogeneous sphere of given radius."""
    if medium.omega <= 0:
        raise ValueError("Mie series requires omega > 0")
    k1 = medium.k_plus
    k2 = medium.k_minus
    x = k1 * radius
    y = k2 * radius
    m = k2 / k1
    mu1, mu2 = medium.mu_plus, medium.mu_minus
    L = truncation_order(abs(x))

    psi_x, dpsi_x = _riccati("psi", L, complex(x))
    xi_x, dxi_x = _riccati("xi", L, complex(x))
    psi_y, dpsi_y = _riccati("psi", L, complex(y))

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        den_tm = dxi_x * psi_y / mu2 - xi_x * dpsi_y / (m * mu1)
        a = (dpsi_x * psi_y / mu2 - psi_x * dpsi_y / (m * mu1)) / den_tm
        d = (1j / mu1) / den_tm
        den_te = xi_x * dpsi_y / mu2 - dxi_x * psi_y / (m * mu1)
        b = (psi_x * dpsi_y / mu2 - dpsi_x * psi_y / (m * mu1)) / den_te
        c = (-1j / mu1) / den_te
    for arr in (a, b, c, d):
        arr[~np.isfinite(arr)] = 0.0
        arr[0] = 0.0
    return MieSolution(medium=medium, radius=radius, L=L, a=a, b=b, c=c, d=d)


def _pi_tau(L: int, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angular functions pi_l = P_l^1/sin(theta), tau_l = dP_l^1/dtheta, l=1..L."""
    npts = mu.shape[0]
    pi = np.zeros((L + 1, npts))
    tau = np.zeros((L + 1, npts))
    pi[1] = 1.0
    tau[1] = mu
    for l in range(2, L + 1):
        pi[l] = ((2 * l - 1) * mu * pi[l - 1] - l * pi[l - 2]) / (l - 1)
        tau[l] = l * mu * pi[l] - (l + 1) * pi[l - 1]
    return pi, tau


def _amplitudes(sol: MieSolution, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pi, tau = _pi_tau(sol.L, mu)
    ls = np.arange(1, sol.L + 1)
    w = (2 * ls + 1) / (ls * (ls + 1.0))
    s1 = np.einsum("l,l,lp->p", w, sol.a[1:], pi[1:]) \
        + np.einsum("l,l,lp->p", w, sol.b[1:], tau[1:])
    s2 = np.einsum("l,l,lp->p", w, sol.a[1:], tau[1:]) \
        + np.einsum("l,l,lp->p", w, sol.b[1:], pi[1:])
    return s1, s2


def _canonical_far_field(sol: MieSolution, directions: np.ndarray) -> np.ndarray:
    """Far field for incidence +z, polarization +x, at unit directions (M, 3)."""
    k = sol.medium.k_plus
    dirs = np.atleast_2d(directions)
    ct = np.clip(dirs[:, 2], -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct**2))
    safe = st > 1e-300
    cp = np.where(safe, dirs[:, 0] / np.where(safe, st, 1.0), 1.0)
    sp = np.where(safe, dirs[:, 1] / np.where(safe, st, 1.0), 0.0)
    s1, s2 = _amplitudes(sol, ct)
    theta_hat = np.column_stack([ct * cp, ct * sp, -st])
    phi_hat = np.column_stack([-sp, cp, np.zeros_like(sp)])
    e = (1j / k) * (cp * s2)[:, None] * theta_hat \
        - (1j / k) * (sp * s1)[:, None] * phi_hat
    return e


def _frame_rotation(d: np.ndarray, e1: np.ndarray) -> np.ndarray:
    """Rotation R with R @ e1 = x, R @ (d x e1) = y, R @ d = z."""
    e2 = np.cross(d, e1)
    return np.vstack([e1, e2, d])


def mie_far_field(sol: MieSolution, d: np.ndarray, p: np.ndarray,
                  directions: np.ndarray) -> np.ndarray:
    """Far-field pattern for a plane wave with direction d and polarization p.

    p may be complex; it must satisfy d.p = 0.  Arbitrary incidence is handled
    by rigid rotation of the canonical (+z, +x) solution.
    """
    d = np.asarray(d, dtype=float)
    p = np.asarray(p, dtype=complex)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("incidence direction must be a unit vector")
    if abs(np.dot(d, p)) > 1e-12 * max(1.0, np.linalg.norm(p)):
        raise ValueError("polarization must be orthogonal to the direction")
    # real orthonormal pair spanning the polarization plane
    seed = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(seed, d)) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    e1 = seed - np.dot(seed, d) * d
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    alpha, beta = p @ e1, p @ e2

    dirs = np.atleast_2d(directions)
    out = np.zeros((dirs.shape[0], 3), dtype=complex)
    for coef, axis in ((alpha, e1), (beta, e2)):
        if coef == 0:
            continue
        rot = _frame_rotation(d, axis)
        out += coef * (_canonical_far_field(sol, dirs @ rot.T) @ rot)
    return out


def _vector_wave_field(points: np.ndarray, k: complex, L: int,
                       coef_mo: np.ndarray, coef_ne: np.ndarray,
                       coef_me: np.ndarray, coef_no: np.ndarray,
                       kind: str) -> np.ndarray:
    """Sum of degree-1-azimuth vector spherical waves at Cartesian points.

    Returns sum_l [coef_mo[l] M_o1l + coef_ne[l] N_e1l + coef_me[l] M_e1l
    + coef_no[l] N_o1l] with radial functions j_l (kind='j') or h1_l ('h').
    """
    pts = np.atleast_2d(points)
    r = np.linalg.norm(pts, axis=1)
    ct = np.clip(pts[:, 2] / r, -1.0, 1.0)
    st = np.sqrt(np.maximum(0.0, 1.0 - ct**2))
    safe = st > 1e-14
    cp = np.where(safe, pts[:, 0] / np.where(safe, r * st, 1.0), 1.0)
    sp = np.where(safe, pts[:, 1] / np.where(safe, r * st, 1.0), 0.0)
    rho = k * r

    ls = np.arange(L + 1)
    z = spherical_jn(ls[:, None], rho[None, :])
    zp = spherical_jn(ls[:, None], rho[None, :], derivative=True)
    if kind == "h":
        z = z + 1j * spherical_yn(ls[:, None], rho[None, :])
        zp = zp + 1j * spherical_yn(ls[:, None], rho[None, :], derivative=True)
    dzr = z / rho + zp  # [rho z_l]' / rho
    zr = z / rho

    pi, tau = _pi_tau(L, ct)
    e_r = np.zeros(pts.shape[0], dtype=complex)
    e_t = np.zeros(pts.shape[0], dtype=complex)
    e_p = np.zeros(pts.shape[0], dtype=complex)
    for l in range(1, L + 1):
        if coef_mo[l] != 0:
            e_t += coef_mo[l] * cp * pi[l] * z[l]
            e_p += -coef_mo[l] * sp * tau[l] * z[l]
        if coef_me[l] != 0:
            e_t += -coef_me[l] * sp * pi[l] * z[l]
            e_p += -coef_me[l] * cp * tau[l] * z[l]
        if coef_ne[l] != 0:
            e_r += coef_ne[l] * cp * l * (l + 1) * st * pi[l] * zr[l]
            e_t += coef_ne[l] * cp * tau[l] * dzr[l]
            e_p += -coef_ne[l] * sp * pi[l] * dzr[l]
        if coef_no[l] != 0:
            e_r += coef_no[l] * sp * l * (l + 1) * st * pi[l] * zr[l]
            e_t += coef_no[l] * sp * tau[l] * dzr[l]
            e_p += coef_no[l] * cp * pi[l] * dzr[l]
    r_hat = pts / r[:, None]
    theta_hat = np.column_stack([ct * cp, ct * sp, -st])
    phi_hat = np.column_stack([-sp, cp, np.zeros_like(sp)])
    return (e_r[:, None] * r_hat + e_t[:, None] * theta_hat
            + e_p[:, None] * phi_hat)


def _series_coefs(sol: MieSolution):
    ls = np.arange(sol.L + 1)
    el = np.zeros(sol.L + 1, dtype=complex)
    el[1:] = 1j ** ls[1:] * (2 * ls[1:] + 1) / (ls[1:] * (ls[1:] + 1.0))
    return el


def mie_near_field(sol: MieSolution, points: np.ndarray,
                   field: str = "E", total: bool = True) -> np.ndarray:
    """Total (or induced) E or H at Cartesian points, any side of the surface.

    Exterior points get incident + scattered series (total=True) or the
    scattered series alone; interior points always get the interior field.
    """
    med = sol.medium
    pts = np.atleast_2d(points)
    r = np.linalg.norm(pts, axis=1)
    out = np.zeros((pts.shape[0], 3), dtype=complex)
    el = _series_coefs(sol)
    k1, k2 = med.k_plus, med.k_minus
    zero = np.zeros(sol.L + 1, dtype=complex)

    ext = r >= sol.radius
    if np.any(ext):
        if field == "E":
            out[ext] = _vector_wave_field(pts[ext], k1, sol.L,
                                          -el * sol.b, 1j * el * sol.a,
                                          zero, zero, "h")
            if total:
                out[ext] += _plane_wave(pts[ext], med, "E")
        else:
            hfac = k1 / (med.omega * med.mu_plus)
            out[ext] = hfac * _vector_wave_field(pts[ext], k1, sol.L,
                                                 zero, zero, el * sol.a,
                                                 1j * el * sol.b, "h")
            if total:
                out[ext] += _plane_wave(pts[ext], med, "H")
    if np.any(~ext):
        inn = ~ext
        if field == "E":
            out[inn] = _vector_wave_field(pts[inn], k2, sol.L,
                                          el * sol.c, -1j * el * sol.d,
                                          zero, zero, "j")
        else:
            hfac = k2 / (med.omega * med.mu_minus)
            out[inn] = hfac * _vector_wave_field(pts[inn], k2, sol.L,
                                                 zero, zero, -el * sol.d,
                                                 -1j * el * sol.c, "j")
    return out


def _plane_wave(points: np.ndarray, med: Medium, field: str) -> np.ndarray:
    phase = np.exp(1j * med.k_plus * points[:, 2])
    if field == "E":
        return np.column_stack([phase, np.zeros_like(phase), np.zeros_like(phase)])
    amp = np.sqrt(med.eps_plus / med.mu_plus) * phase
    return np.column_stack([np.zeros_like(amp), amp, np.zeros_like(amp)])


def mie_surface_trace(sol: MieSolution, xhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exterior traces (e, h) of the total field at surface points a*xhat."""
    pts = sol.radius * np.atleast_2d(xhat)
    # nudge onto the exterior branch
    e = mie_near_field(sol, pts * (1.0 + 1e-14), "E", total=True)
    h = mie_near_field(sol, pts * (1.0 + 1e-14), "H", total=True)
    return e, h


def cross_sections(sol: MieSolution) -> tuple[float, float]:
    """(scattering, extinction) cross sections; exterior medium lossless."""
    k = sol.medium.k_plus
    ls = np.arange(1, sol.L + 1)
    w = 2 * ls + 1.0
    csca = 2 * np.pi / k**2 * np.sum(w * (np.abs(sol.a[1:])**2
                                          + np.abs(sol.b[1:])**2))
    cext = 2 * np.pi / k**2 * np.sum(w * (sol.a[1:] + sol.b[1:]).real)
    return float(csca), float(cext)
