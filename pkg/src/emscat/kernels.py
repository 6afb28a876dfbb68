"""Pointwise kernels of the transmission operators in pullback form.

All kernels act on the stacked unknown (e1, e2, e3, h1, h2, h3) in the
Jacobian-weighted variables W = J^(1/2) (w o q), so the discrete adjoint of
an assembled matrix is its conjugate transpose.

Every kernel entry is organized as

    K(xh, yh) = c0(xh, yh) / u  +  sum_c c1t[.., c] (xh - yh)_c / u^3  +  b(xh, yh)

with u = |xh - yh| the reference-sphere chord.  Both singular families admit
exact integration against spherical harmonics:

    int Y[l,j](yh) / u ds            = 4 pi/(2l+1) Y[l,j](xh)
    int (xh - yh) Y[l,j](yh) / u^3 ds = 4 pi/(2l+1) (Y[l,j](xh) xh / 2
                                                     - grad_S Y[l,j](xh))

so the fully discrete treatment reduces to node-level weights built from
Legendre partial sums (see assembly).  The c coefficients stay bounded at the
diagonal; cancellation-prone radial factors switch to series automatically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SurfaceParametrization
from .medium import Medium

__all__ = ["SplitKernelValue", "greens", "kernel_M", "kernel_J",
           "kernel_M_diagonal_limit", "kernel_M_direct", "PairData",
           "pair_data", "node_kernel_M", "node_kernel_J", "coulomb_weights"]

_FOURPI = 4.0 * np.pi


@dataclass(frozen=True)
class SplitKernelValue:
    """Weakly singular split: full kernel = singular_part/|xh-yh| + smooth_part."""

    singular_part: np.ndarray
    smooth_part: np.ndarray


def greens(k: complex, x: np.ndarray, y: np.ndarray) -> complex:
    """Fundamental solution exp(ik|x-y|)/(4 pi |x-y|); k = 0 gives the static kernel."""
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float))
    if r == 0.0:
        raise ValueError("coincident points")
    return np.exp(1j * k * r) / (_FOURPI * r)


# ---------------------------------------------------------------------------
# stable radial factors
# ---------------------------------------------------------------------------

def _sinc(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    z = z.astype(np.result_type(z.dtype, np.complex128))
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    out = np.sin(zs) / zs
    z2 = z * z
    return np.where(small, 1.0 - z2 / 6.0 + z2 * z2 / 120.0, out)


def _c1(z: np.ndarray) -> np.ndarray:
    """-cos z - z sin z  (= -1 - z^2/2 + z^4/8 - ...)."""
    return -np.cos(z) - z * np.sin(z)


def _f3(z: np.ndarray) -> np.ndarray:
    """(z cos z - sin z)/z^3, series-switched near zero."""
    z = np.asarray(z)
    z = z.astype(np.result_type(z.dtype, np.complex128))
    small = np.abs(z) < 0.3
    zs = np.where(small, 1.0, z)
    direct = (zs * np.cos(zs) - np.sin(zs)) / zs**3
    z2 = z * z
    series = -1.0 / 3.0 + z2 / 30.0 - z2**2 / 840.0 + z2**3 / 45360.0
    return np.where(small, series, direct)


def _c1_diff_over_r2(kp: complex, km: complex, r: np.ndarray) -> np.ndarray:
    """[c1(kp r) - c1(km r)] / r^2, series-switched near zero."""
    r = np.asarray(r, dtype=float)
    zmax = max(abs(kp), abs(km)) * r
    small = zmax < 0.3
    rs = np.where(small, 1.0, r)
    direct = (_c1(kp * rs) - _c1(km * rs)) / rs**2
    r2 = r * r
    series = (-(kp**2 - km**2) / 2.0
              + r2 * (kp**4 - km**4) / 8.0
              - r2**2 * (kp**6 - km**6) / 144.0
              + r2**3 * (kp**8 - km**8) / 5760.0
              - r2**4 * (kp**10 - km**10) / 403200.0)
    return np.where(small, series, direct)


def _cos_diff(kp: complex, km: complex, r: np.ndarray) -> np.ndarray:
    """cos(kp r) - cos(km r) via the product identity (cancellation-free)."""
    return -2.0 * np.sin(0.5 * (kp + km) * r) * np.sin(0.5 * (kp - km) * r)


def _sin_diff_over_r(kp: complex, km: complex, r: np.ndarray) -> np.ndarray:
    """[sin(kp r) - sin(km r)] / r."""
    return (kp - km) * np.cos(0.5 * (kp + km) * r) * _sinc(0.5 * (kp - km) * r)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.cross(a, b)


# ---------------------------------------------------------------------------
# pair geometry
# ---------------------------------------------------------------------------

@dataclass
class PairData:
    """Geometric quantities for stacked point pairs (flat arrays, length L)."""

    xhat: np.ndarray
    yhat: np.ndarray
    x: np.ndarray
    y: np.ndarray
    nx: np.ndarray
    ny: np.ndarray
    wj: np.ndarray        # sqrt(J(xh) J(yh))
    d: np.ndarray         # x - y
    r: np.ndarray
    u: np.ndarray         # |xh - yh|
    sep: np.ndarray       # xh - yh
    ratio1: np.ndarray    # u / r
    ratio3: np.ndarray
    chord: np.ndarray     # C with x - y = C (xh - yh)


def pair_data(geom: SurfaceParametrization, xhat: np.ndarray, yhat: np.ndarray,
              x_side=None, y_side=None, dtype=float) -> PairData:
    """Build pair geometry; sides may be precomputed (x, n, J) triples.

    dtype=np.longdouble hardens the vanishing geometric factors against
    cancellation for near-coincident pairs (the production quadratures never
    couple pairs that close; the extended path serves the pointwise kernel
    API and its coincidence-limit diagnostics).
    """
    xhat = np.atleast_2d(xhat).astype(dtype)
    yhat = np.atleast_2d(yhat).astype(dtype)
    if x_side is None:
        x_side = geom.evaluate_many(xhat)
    if y_side is None:
        y_side = geom.evaluate_many(yhat)
    x, nx, jx = x_side
    y, ny, jy = y_side
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    sep = xhat - yhat
    u = np.linalg.norm(sep, axis=-1)
    if np.any(u <= 0):
        raise ValueError("coincident points")
    ratio1 = u / r
    chord = geom.chord_matrix(xhat, yhat)
    return PairData(xhat=xhat, yhat=yhat, x=x, y=y, nx=nx, ny=ny,
                    wj=np.sqrt(jx * jy), d=d, r=r, u=u, sep=sep,
                    ratio1=ratio1, ratio3=ratio1**3, chord=chord)


# ---------------------------------------------------------------------------
# node-level kernels with pluggable singular weights
# ---------------------------------------------------------------------------

def coulomb_weights(pd: PairData, nprime: int | None):
    """Node-level weights of the two singular families.

    With nprime an integer, returns the degree-n' moment truncations
    (Legendre partial sums); with nprime None, returns the exact weights
    1/u and (xh - yh)/u^3, which reproduces the true kernel.
    """
    from .spherical import legendre_partial_sums

    if nprime is None:
        w0 = 1.0 / pd.u
        wv = pd.sep / (pd.u**3)[..., None]
        return w0, wv
    t = np.clip(np.einsum("...i,...i->...", pd.xhat, pd.yhat), -1.0, 1.0)
    z0, z0p = legendre_partial_sums(nprime, t)
    wv = 0.5 * z0[..., None] * pd.xhat - z0p[..., None] * (pd.yhat - t[..., None] * pd.xhat)
    return z0, wv


def _mblock(pd: PairData, alpha_p, alpha_m, kp, km, w0, wv_dot_ct, wv_dot_nxc):
    """Diagonal block M^(alpha+, alpha-): 3x3 kernels at the node level.

    w0 is the scalar singular weight; wv_dot_ct and wv_dot_nxc are the vector
    weight contracted with the chord-normal factor and with nx x C columns.
    """
    pref = 2.0 / (alpha_p + alpha_m)
    r = pd.r
    c1p, c1m = _c1(kp * r), _c1(km * r)
    c2p, c2m = kp**3 * _f3(kp * r), km**3 * _f3(km * r)
    c1_sig = alpha_p * c1p - alpha_m * c1m
    c2_sig = alpha_p * c2p - alpha_m * c2m
    c1_g = alpha_m * c1p - alpha_p * c1m
    c2_g = alpha_m * c2p - alpha_p * c2m
    c1d2 = _c1_diff_over_r2(kp, km, r)
    c2d = c2p - c2m

    nx, ny, d = pd.nx, pd.ny, pd.d
    nxny = np.einsum("...i,...i->...", nx, ny)
    dnx = np.einsum("...i,...i->...", d, nx)
    w_i = nxny[..., None, None] * np.eye(3) - ny[..., :, None] * nx[..., None, :]
    nxd = _cross(nx, d)
    nynx = _cross(ny, nx)
    t_mat = dnx[..., None, None] * w_i - nxd[..., :, None] * nynx[..., None, :]
    ptx_d = d - np.einsum("...i,...i->...", nx, d)[..., None] * nx
    dxn_x_ny = _cross(nxd, ny)

    # smooth remainders
    blk = (1j * c2_sig / _FOURPI)[..., None, None] * t_mat
    blk += (alpha_p * 1j * c2d / _FOURPI)[..., None, None] \
        * ptx_d[..., :, None] * ny[..., None, :]
    blk -= (alpha_m * 1j * c2d / _FOURPI)[..., None, None] \
        * nx[..., :, None] * dxn_x_ny[..., None, :]
    blk += (1j * c2_g * dnx / _FOURPI)[..., None, None] \
        * nx[..., :, None] * ny[..., None, :]

    # scalar-family singular terms (difference-gradient kernels)
    s0 = (c1d2 * pd.ratio1 / _FOURPI) * w0
    blk += (alpha_p * s0)[..., None, None] * ptx_d[..., :, None] * ny[..., None, :]
    blk -= (alpha_m * s0)[..., None, None] * nx[..., :, None] * dxn_x_ny[..., None, :]

    # vector-family singular terms (normal-derivative and chord-outer kernels)
    s3 = pd.ratio3 / _FOURPI
    blk += (s3 * c1_sig * wv_dot_ct)[..., None, None] * w_i
    blk -= (s3 * c1_sig)[..., None, None] * wv_dot_nxc[..., :, None] * nynx[..., None, :]
    blk += (s3 * c1_g * wv_dot_ct)[..., None, None] \
        * nx[..., :, None] * ny[..., None, :]
    return pref * blk


def _nblock(pd: PairData, alpha_p, alpha_m, beta_p, beta_m, lam, kp, km, w0):
    """Off-diagonal block N^(alpha, beta, lambda): single-layer type kernels."""
    pref = 2.0 / (alpha_p + alpha_m) * 1j * lam
    r = pd.r
    cos_ab = beta_p * alpha_p * np.cos(kp * r) - beta_m * alpha_m * np.cos(km * r)
    cos_b = beta_p * np.cos(kp * r) - beta_m * np.cos(km * r)
    sy_ab = beta_p * alpha_p * kp * _sinc(kp * r) - beta_m * alpha_m * km * _sinc(km * r)
    sy_b = beta_p * kp * _sinc(kp * r) - beta_m * km * _sinc(km * r)

    nx = pd.nx
    eye = np.eye(3)
    ptx = eye - nx[..., :, None] * nx[..., None, :]
    nxnx = nx[..., :, None] * nx[..., None, :]
    sing = (pd.ratio1 * w0 / _FOURPI)[..., None, None] \
        * (cos_ab[..., None, None] * ptx + (alpha_m * cos_b)[..., None, None] * nxnx)
    smooth = (1j / _FOURPI) \
        * (sy_ab[..., None, None] * ptx + (alpha_m * sy_b)[..., None, None] * nxnx)
    my = _cross_matrix(-pd.ny)
    return pref * np.einsum("...ij,...jk->...ik", sing + smooth, my)


def _cross_matrix(a: np.ndarray) -> np.ndarray:
    """Matrix of w -> a x w for stacked vectors a (..., 3)."""
    shape = a.shape[:-1]
    m = np.zeros(shape + (3, 3), dtype=a.dtype)
    m[..., 0, 1] = -a[..., 2]
    m[..., 0, 2] = a[..., 1]
    m[..., 1, 0] = a[..., 2]
    m[..., 1, 2] = -a[..., 0]
    m[..., 2, 0] = -a[..., 1]
    m[..., 2, 1] = a[..., 0]
    return m


def node_kernel_M(med: Medium, pd: PairData, w0, wv) -> np.ndarray:
    """Effective 6x6 node kernel of M under the given singular weights.

    With exact weights this is the true kernel; with moment truncations it is
    the fully discrete operator kernel used in assembly.
    """
    # complex on both sides so matched media cancel bit-exactly
    kp, km = complex(med.k_plus), complex(med.k_minus)
    ct = np.einsum("...e,...ec->...c", pd.nx, pd.chord)       # chord-normal factor
    wv_dot_ct = np.einsum("...c,...c->...", ct, wv)
    nxc = _cross(pd.nx[..., None, :], np.moveaxis(pd.chord, -1, -2))  # (.., c, 3)
    wv_dot_nxc = np.einsum("...ca,...c->...a", nxc, wv)

    out = np.zeros(pd.r.shape + (6, 6),
                   dtype=np.result_type(pd.x.dtype, np.complex128))
    out[..., :3, :3] = _mblock(pd, med.eps_plus, med.eps_minus, kp, km,
                               w0, wv_dot_ct, wv_dot_nxc)
    out[..., 3:, 3:] = _mblock(pd, med.mu_plus, med.mu_minus, kp, km,
                               w0, wv_dot_ct, wv_dot_nxc)
    if med.omega != 0.0:
        out[..., :3, 3:] = _nblock(pd, med.eps_plus, med.eps_minus,
                                   med.mu_plus, med.mu_minus, med.omega,
                                   kp, km, w0)
        out[..., 3:, :3] = _nblock(pd, med.mu_plus, med.mu_minus,
                                   med.eps_plus, med.eps_minus, -med.omega,
                                   kp, km, w0)
    return out * pd.wj[..., None, None]


def node_kernel_J(med: Medium, pd: PairData, w0) -> np.ndarray:
    """Effective 6x6 node kernel of the stabilizer J (rows 3 and 6 only)."""
    kp, km = complex(med.k_plus), complex(med.k_minus)
    r = pd.r
    c1d2 = _c1_diff_over_r2(kp, km, r)
    c2d = kp**3 * _f3(kp * r) - km**3 * _f3(km * r)
    dxny = _cross(pd.d, pd.ny)
    krow = (c1d2 * pd.ratio1 * w0 / _FOURPI)[..., None] * dxny \
        + (1j * c2d / _FOURPI)[..., None] * dxny
    s_scal = _cos_diff(kp, km, r) * pd.ratio1 * w0 / _FOURPI \
        + 1j * _sin_diff_over_r(kp, km, r) / _FOURPI
    srow = s_scal[..., None] * pd.ny

    out = np.zeros(pd.r.shape + (6, 6),
                   dtype=np.result_type(pd.x.dtype, np.complex128))
    out[..., 2, :3] = krow
    out[..., 2, 3:] = 1j * med.omega * med.mu_plus * srow
    out[..., 5, :3] = -1j * med.omega * med.eps_plus * srow
    out[..., 5, 3:] = krow
    return out * pd.wj[..., None, None]


# ---------------------------------------------------------------------------
# pointwise kernel API
# ---------------------------------------------------------------------------

def _near_dtype(geom: SurfaceParametrization, xhat, yhat):
    u = np.linalg.norm(np.asarray(xhat, float) - np.asarray(yhat, float))
    return np.longdouble if u < 1e-3 else float


def _split_parts(med: Medium, geom: SurfaceParametrization,
                 xhat: np.ndarray, yhat: np.ndarray):
    """(c0, c1t, b) for kernel M at one pair: full = c0/u + c1t.(xh-yh)/u^3 + b."""
    dtype = _near_dtype(geom, xhat, yhat)
    pd = pair_data(geom, xhat[None, :], yhat[None, :], dtype=dtype)
    zeros0 = np.zeros(1, dtype=dtype)
    zerosv = np.zeros((1, 3), dtype=dtype)
    b = node_kernel_M(med, pd, zeros0, zerosv)[0]
    c0 = node_kernel_M(med, pd, np.ones(1, dtype=dtype), zerosv)[0] - b
    c1t = np.empty((6, 6, 3), dtype=b.dtype)
    for c in range(3):
        ec = np.zeros((1, 3), dtype=dtype)
        ec[0, c] = 1.0
        c1t[:, :, c] = node_kernel_M(med, pd, zeros0, ec)[0] - b
    return c0, c1t, b, pd


def kernel_M(med: Medium, geom: SurfaceParametrization,
             xhat: np.ndarray, yhat: np.ndarray) -> SplitKernelValue:
    """Split 6x6 kernel of M at a pair of distinct reference directions."""
    xhat = np.asarray(xhat, float)
    yhat = np.asarray(yhat, float)
    c0, c1t, b, pd = _split_parts(med, geom, xhat, yhat)
    u = pd.u[0]
    singular = c0 + c1t @ (pd.sep[0] / u**2)
    return SplitKernelValue(singular_part=np.asarray(singular, dtype=complex),
                            smooth_part=np.asarray(b, dtype=complex))


def kernel_J(med: Medium, geom: SurfaceParametrization,
             xhat: np.ndarray, yhat: np.ndarray) -> np.ndarray:
    """Full 6x6 kernel of the stabilizer J (difference kernels, no 1/u part)."""
    dtype = _near_dtype(geom, xhat, yhat)
    pd = pair_data(geom, np.asarray(xhat, float)[None, :],
                   np.asarray(yhat, float)[None, :], dtype=dtype)
    w0 = 1.0 / pd.u
    return np.asarray(node_kernel_J(med, pd, w0)[0], dtype=complex)


def kernel_M_diagonal_limit(med: Medium, geom: SurfaceParametrization,
                            xhat: np.ndarray, n_dirs: int = 32,
                            h: float = 1e-6) -> SplitKernelValue:
    """Direction-averaged coincidence limit of the split kernel.

    Averages the split over a small geodesic circle around xhat; the stable
    radial factors make the h -> 0 evaluation exact to series order.  Used for
    coincident quadrature nodes and diagnostics.
    """
    xhat = np.asarray(xhat, float)
    t1 = np.array([1.0, 0.0, 0.0])
    if abs(t1 @ xhat) > 0.9:
        t1 = np.array([0.0, 1.0, 0.0])
    t1 = t1 - (t1 @ xhat) * xhat
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(xhat, t1)
    ld = np.longdouble
    ang = 2.0 * np.pi * np.arange(n_dirs, dtype=ld) / n_dirs
    xl = xhat.astype(ld)
    ys = (np.cos(ld(h)) * xl[None, :]
          + np.sin(ld(h)) * (np.cos(ang)[:, None] * t1.astype(ld)
                             + np.sin(ang)[:, None] * t2.astype(ld)))
    ys /= np.linalg.norm(ys, axis=1)[:, None]

    pd = pair_data(geom, np.broadcast_to(xl, (n_dirs, 3)).copy(), ys, dtype=ld)
    zeros0 = np.zeros(n_dirs, dtype=ld)
    zerosv = np.zeros((n_dirs, 3), dtype=ld)
    b = node_kernel_M(med, pd, zeros0, zerosv)
    c0 = node_kernel_M(med, pd, np.ones(n_dirs, dtype=ld), zerosv) - b
    wv = pd.sep / (pd.u**2)[:, None]
    sing_t1 = node_kernel_M(med, pd, zeros0, wv) - b
    return SplitKernelValue(
        singular_part=np.asarray((c0 + sing_t1).mean(axis=0), dtype=complex),
        smooth_part=np.asarray(b.mean(axis=0), dtype=complex))


# ---------------------------------------------------------------------------
# independent direct evaluation (test oracle path)
# ---------------------------------------------------------------------------

def _grad_g(k: complex, d: np.ndarray, r: np.ndarray) -> np.ndarray:
    g1 = np.exp(1j * k * r) * (1j * k * r - 1.0) / (_FOURPI * r**3)
    return g1[..., None] * d


def kernel_M_direct(med: Medium, geom: SurfaceParametrization,
                    xhat: np.ndarray, yhat: np.ndarray) -> np.ndarray:
    """Unsplit kernel of M from the raw operator definitions.

    Follows the component decomposition with explicit normal differences
    (the form used in the operator analysis), sharing no code with the split
    evaluator; serves as the splitting-consistency oracle.
    """
    dtype = _near_dtype(geom, xhat, yhat)
    pd = pair_data(geom, np.asarray(xhat, float)[None, :],
                   np.asarray(yhat, float)[None, :], dtype=dtype)
    x, y, nx, ny = pd.x[0], pd.y[0], pd.nx[0], pd.ny[0]
    d, r = pd.d[0], pd.r[0]
    cplx = np.clongdouble if dtype is np.longdouble else complex
    kp, km = cplx(med.k_plus), cplx(med.k_minus)
    gp = np.exp(1j * kp * r) / (_FOURPI * r)
    gm = np.exp(1j * km * r) / (_FOURPI * r)
    ggp = _grad_g(kp, d, np.array(r))
    ggm = _grad_g(km, d, np.array(r))
    dn = nx - ny
    nxm = _cross_matrix(nx)
    mY = _cross_matrix(-ny)

    def mdiag(ap, am):
        pref = 2.0 / (ap + am)
        # C = D - E on tangential densities
        dgnp, dgnm = ggp @ nx, ggm @ nx
        cker = (ap * dgnp - am * dgnm) * np.eye(3) \
            - np.outer(ap * ggp - am * ggm, dn)
        blk = nxm @ cker @ mY
        gdiff = ggp - ggm
        bvec = np.cross(gdiff, nx)
        blk += ap * np.outer(nxm @ bvec, ny)
        hrow = np.cross(gdiff, nx)
        blk += -am * np.outer(nx, mY.T @ hrow)
        blk += am * np.outer(nx, ny) * (dgnp - (ap / am) * dgnm)
        return pref * blk

    def nblock(ap, am, bp, bm, lam):
        pref = 2.0 / (ap + am)
        atil = 1j * lam * (bp * ap * gp - bm * am * gm)
        ftil = 1j * lam * (bp * gp - bm * gm)
        ptx = np.eye(3) - np.outer(nx, nx)
        return pref * (atil * ptx + am * ftil * np.outer(nx, nx)) @ mY

    out = np.zeros((6, 6), dtype=cplx)
    out[:3, :3] = mdiag(med.eps_plus, med.eps_minus)
    out[3:, 3:] = mdiag(med.mu_plus, med.mu_minus)
    if med.omega != 0.0:
        out[:3, 3:] = nblock(med.eps_plus, med.eps_minus,
                             med.mu_plus, med.mu_minus, med.omega)
        out[3:, :3] = nblock(med.mu_plus, med.mu_minus,
                             med.eps_plus, med.eps_minus, -med.omega)
    return np.asarray(out * pd.wj[0], dtype=complex)
