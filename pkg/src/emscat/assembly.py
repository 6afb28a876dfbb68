"""Dense coefficient-basis assembly of the stabilized Galerkin system.

The fully discrete operator samples each degree-n basis element on a
resolving inner grid, applies the node-level kernels, and projects the result
back onto degree n with the outer rule, mirroring the projected-operator
composition termwise.

Two inner-integration paths realize the degree-n' operator approximation:

* sphere: a global product rule of degree n + n' with the weakly singular
  factors replaced by their exact truncated moment sums (the kernels are
  zonal-polynomial there, so the treatment is exact on polynomial data);
* general surfaces: a per-target rotated polar rule, where the pullback
  kernels become smooth rectangle integrands (the chord ratio u/r is
  direction-dependent at the diagonal, which defeats any fixed global moment
  family but is resolved spectrally in rotated coordinates).

Matrix layout: component-major; row/col index = comp * (n+1)^2 + (l^2+l+j)
with comp = 0..2 the electric and 3..5 the magnetic Cartesian components.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import SurfaceParametrization
from .kernels import PairData, coulomb_weights, node_kernel_J, node_kernel_M
from .medium import Medium
from .spherical import QuadratureRule, build_quadrature, eval_basis_matrix

__all__ = ["AssembledSystem", "assemble", "assemble_unstabilized",
           "assemble_coupled", "build_rhs", "dump_matrix", "load_matrix"]


@dataclass
class AssembledSystem:
    """Dense discrete system: M, J, the Hermitian left-hand side and RHS map.

    J vanishes outside its two scalar-constraint row blocks, which are what
    is stored; J_mat materializes the dense matrix on demand.
    """

    n: int
    n_prime: int
    N: int
    medium: Medium
    geom: SurfaceParametrization
    M_mat: np.ndarray
    J_blocks: tuple  # ((nb, N) rows of block 2, (nb, N) rows of block 5)
    rule_outer: QuadratureRule
    rule_inner: QuadratureRule
    inner_surface: tuple  # (x, normal, jacobian) at the inner nodes
    basis_inner: np.ndarray = field(repr=False)  # degree-n harmonics at inner nodes

    @property
    def J_mat(self) -> np.ndarray:
        nb = self.N // 6
        out = np.zeros((self.N, self.N), dtype=complex)
        out[2 * nb:3 * nb, :] = self.J_blocks[0]
        out[5 * nb:6 * nb, :] = self.J_blocks[1]
        return out

    def apply_J(self, coeffs: np.ndarray) -> np.ndarray:
        nb = self.N // 6
        out = np.zeros(self.N, dtype=complex)
        out[2 * nb:3 * nb] = self.J_blocks[0] @ coeffs
        out[5 * nb:6 * nb] = self.J_blocks[1] @ coeffs
        return out

    @cached_property
    def lhs(self) -> np.ndarray:
        """I + M*M + M + M* + J*J, Hermitian by construction."""
        a = self.M_mat + np.eye(self.N)
        out = a.conj().T @ a
        for rows in self.J_blocks:
            out += rows.conj().T @ rows
        out += out.conj().T
        out *= 0.5
        return out

    def release_lhs(self) -> None:
        """Drop the cached left-hand side (e.g. after an in-place factorization)."""
        self.__dict__.pop("lhs", None)

    def rhs_map(self, f_coeffs: np.ndarray) -> np.ndarray:
        """(I + M*) applied to stacked trace coefficients."""
        f_coeffs = np.asarray(f_coeffs)
        if f_coeffs.shape != (self.N,):
            raise ValueError("coefficient vector does not match the system size")
        return f_coeffs + self.M_mat.conj().T @ f_coeffs


def assemble(medium: Medium, geom: SurfaceParametrization, n: int,
             n_prime: int | None = None, chunk: int | None = None) -> AssembledSystem:
    """Assemble the dense coefficient-basis matrices of M and J.

    n_prime defaults to n + 2, the smallest operator-approximation degree
    admitted by the convergence theory; smaller values are rejected.  chunk
    bounds the outer-node block size (default keeps the transient buffers a
    fraction of the stored matrices).
    """
    if n < 1:
        raise ValueError("projection degree must be >= 1")
    if n_prime is None:
        n_prime = n + 2
    if n_prime < n + 2:
        raise ValueError("operator degree must satisfy n' >= n + 2")

    rule_o = build_quadrature(n)
    side_o = geom.evaluate_many(rule_o.nodes)
    nb = (n + 1) ** 2
    nmat = 6 * nb
    basis_o = eval_basis_matrix(n, rule_o.nodes)
    proj = basis_o.conj() * rule_o.weights          # (nb, m)

    if geom.kind == "sphere":
        m_inner = 2 * (n + n_prime + 1) ** 2
    else:
        m_inner = 2 * (n_prime + 1) ** 2
    if chunk is None:
        # keep the transient kernel buffers well under the stored-matrix
        # footprint (the acceptance budget is 2 x 16 N^2 bytes peak)
        budget = min(2.5e8, max(1.6e7, (16 * nmat * nmat) // 6))
        chunk = int(np.clip(budget // (m_inner * 36 * 16 * 4), 4, 128))

    if geom.kind == "sphere":
        m_mat, j_blocks, rule_i = _operator_moment_path(
            medium, geom, n, n_prime, rule_o, side_o, proj, chunk)
    else:
        m_mat, j_blocks = _operator_rotated_path(
            medium, geom, n, n_prime, rule_o, side_o, proj, chunk)
        rule_i = build_quadrature(n + n_prime)
    side_i = geom.evaluate_many(rule_i.nodes)
    basis_i = eval_basis_matrix(n, rule_i.nodes)

    return AssembledSystem(n=n, n_prime=n_prime, N=nmat, medium=medium,
                           geom=geom, M_mat=m_mat, J_blocks=j_blocks,
                           rule_outer=rule_o, rule_inner=rule_i,
                           inner_surface=side_i, basis_inner=basis_i)


# ---------------------------------------------------------------------------
# sphere path: global rule + exact truncated moments
# ---------------------------------------------------------------------------

def _pair_chunk(geom, xh_o, side_o, sel, xh_i, side_i) -> PairData:
    xo, no, jo = side_o
    xi, ni, ji = side_i
    xhat = xh_o[sel][:, None, :]
    yhat = xh_i[None, :, :]
    x = xo[sel][:, None, :]
    y = xi[None, :, :]
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    sep = xhat - yhat
    u = np.linalg.norm(sep, axis=-1)
    if u.min() <= 1e-9:
        raise RuntimeError("outer and inner quadrature nodes nearly coincide")
    ratio1 = u / r
    chord = geom.chord_matrix(xhat, yhat)
    return PairData(xhat=xhat, yhat=yhat, x=x, y=y,
                    nx=no[sel][:, None, :], ny=ni[None, :, :],
                    wj=np.sqrt(jo[sel][:, None] * ji[None, :]),
                    d=d, r=r, u=u, sep=sep, ratio1=ratio1, ratio3=ratio1**3,
                    chord=chord)


def _operator_moment_path(medium, geom, n, n_prime, rule_o, side_o, proj, chunk):
    """Kernel projection at degree n' against degree-n data: the inner rule
    and the moment truncation must resolve the product degree n + n'."""
    deg_inner = n + n_prime
    rule_i = build_quadrature(deg_inner, azimuth_offset=0.5)
    if _min_cross_separation(rule_o.nodes, rule_i.nodes) < 1e-9:
        rule_i = build_quadrature(deg_inner, azimuth_offset=1.0 / 3.0)
    side_i = geom.evaluate_many(rule_i.nodes)
    nb = (n + 1) ** 2
    nmat = 6 * nb
    basis_i = eval_basis_matrix(n, rule_i.nodes)
    synth = rule_i.weights[:, None] * basis_i.T     # (m', nb)

    m_mat = np.zeros((nmat, nmat), dtype=complex)
    j_blocks = [np.zeros((nb, nmat), dtype=complex) for _ in range(2)]
    for start in range(0, rule_o.m, chunk):
        sel = slice(start, min(start + chunk, rule_o.m))
        pd = _pair_chunk(geom, rule_o.nodes, side_o, sel, rule_i.nodes, side_i)
        w0, wv = coulomb_weights(pd, deg_inner)
        km = node_kernel_M(medium, pd, w0, wv)
        kj = node_kernel_J(medium, pd, w0)
        pw = proj[:, sel]
        for i in range(6):
            for jc in range(6):
                v = km[:, :, i, jc] @ synth
                m_mat[i * nb:(i + 1) * nb, jc * nb:(jc + 1) * nb] += pw @ v
        for bidx, i in enumerate((2, 5)):
            for jc in range(6):
                v = kj[:, :, i, jc] @ synth
                j_blocks[bidx][:, jc * nb:(jc + 1) * nb] += pw @ v
    return m_mat, tuple(j_blocks), rule_i


def _min_cross_separation(a: np.ndarray, b: np.ndarray) -> float:
    best = np.inf
    for start in range(0, a.shape[0], 512):
        d = np.linalg.norm(a[start:start + 512, None, :] - b[None, :, :], axis=-1)
        best = min(best, float(d.min()))
    return best


# ---------------------------------------------------------------------------
# general path: per-target rotated polar rule
# ---------------------------------------------------------------------------

def _rotations_to(dirs: np.ndarray) -> np.ndarray:
    """Rotations T with T @ z = dir, stacked (M, 3, 3)."""
    m = dirs.shape[0]
    out = np.empty((m, 3, 3))
    z = np.array([0.0, 0.0, 1.0])
    ax = np.cross(np.broadcast_to(z, dirs.shape), dirs)
    na = np.linalg.norm(ax, axis=1)
    ct = np.clip(dirs[:, 2], -1.0, 1.0)
    ok = na > 1e-14
    for idx in range(m):
        if not ok[idx]:
            out[idx] = np.eye(3) if ct[idx] > 0 else np.diag([1.0, -1.0, -1.0])
            continue
        a = ax[idx] / na[idx]
        k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
        s = na[idx]
        out[idx] = np.eye(3) + s * k + (1.0 - ct[idx]) * (k @ k)
    return out


def _operator_rotated_path(medium, geom, n, n_prime, rule_o, side_o, proj, chunk):
    nb = (n + 1) ** 2
    nmat = 6 * nb
    n_th = n_prime + 1
    n_ph = 2 * (n_prime + 1)
    tg, wg = np.polynomial.legendre.leggauss(n_th)
    theta = 0.5 * np.pi * (tg + 1.0)
    w_th = 0.5 * np.pi * wg
    phi = 2.0 * np.pi * np.arange(n_ph) / n_ph
    st, ct = np.sin(theta), np.cos(theta)
    zref = np.empty((n_th * n_ph, 3))
    zref[:, 0] = np.repeat(st, n_ph) * np.tile(np.cos(phi), n_th)
    zref[:, 1] = np.repeat(st, n_ph) * np.tile(np.sin(phi), n_th)
    zref[:, 2] = np.repeat(ct, n_ph)
    wref = np.repeat(w_th * st, n_ph) * (2.0 * np.pi / n_ph)
    mtil = zref.shape[0]

    rots = _rotations_to(rule_o.nodes)
    xo, no, jo = side_o
    m_mat = np.zeros((nmat, nmat), dtype=complex)
    j_blocks = [np.zeros((nb, nmat), dtype=complex) for _ in range(2)]

    for start in range(0, rule_o.m, chunk):
        stop = min(start + chunk, rule_o.m)
        p_count = stop - start
        yhat = np.einsum("pab,qb->pqa", rots[start:stop], zref)
        flat = yhat.reshape(-1, 3)
        yi, ni, ji = geom.evaluate_many(flat)
        y_side = (yi.reshape(p_count, mtil, 3), ni.reshape(p_count, mtil, 3),
                  ji.reshape(p_count, mtil))
        xhat = rule_o.nodes[start:stop][:, None, :]
        x = xo[start:stop][:, None, :]
        d = x - y_side[0]
        r = np.linalg.norm(d, axis=-1)
        sep = xhat - yhat
        u = np.linalg.norm(sep, axis=-1)
        ratio1 = u / r
        pd = PairData(xhat=xhat, yhat=yhat, x=x, y=y_side[0],
                      nx=no[start:stop][:, None, :], ny=y_side[1],
                      wj=np.sqrt(jo[start:stop][:, None] * y_side[2]),
                      d=d, r=r, u=u, sep=sep, ratio1=ratio1, ratio3=ratio1**3,
                      chord=geom.chord_matrix(xhat, yhat))
        w0, wv = coulomb_weights(pd, None)   # exact kernels
        km = node_kernel_M(medium, pd, w0, wv)
        kj = node_kernel_J(medium, pd, w0)

        vm = np.empty((p_count, 6, nmat), dtype=complex)
        vj = np.empty((p_count, 2, nmat), dtype=complex)
        for pidx in range(p_count):
            basis_p = eval_basis_matrix(n, yhat[pidx])         # (nb, mtil)
            bw = wref[:, None] * basis_p.T                     # (mtil, nb)
            km_p = km[pidx].reshape(mtil, 36).T @ bw           # (36, nb)
            vm[pidx] = _fold_rows(km_p, nb)
            kj_p = kj[pidx][:, (2, 5), :].reshape(mtil, 12).T @ bw
            vj[pidx] = _fold_rows(kj_p, nb, rows=2)
        pw = proj[:, start:stop]
        for i in range(6):
            m_mat[i * nb:(i + 1) * nb, :] += pw @ vm[:, i, :]
        j_blocks[0] += pw @ vj[:, 0, :]
        j_blocks[1] += pw @ vj[:, 1, :]
    return m_mat, tuple(j_blocks)


def _fold_rows(kmat: np.ndarray, nb: int, rows: int = 6) -> np.ndarray:
    """(rows*6, nb) kernel-column products -> (rows, 6*nb) coefficient rows."""
    return kmat.reshape(rows, 6, nb).reshape(rows, 6 * nb)


def assemble_unstabilized(system: AssembledSystem) -> np.ndarray:
    """The plain second-kind matrix I + M (subject to spurious resonances)."""
    return np.eye(system.N) + system.M_mat


def assemble_coupled(system: AssembledSystem, xi: complex) -> np.ndarray:
    """Single-parameter coupling I + M + xi*J (not uniquely solvable in general)."""
    return np.eye(system.N) + system.M_mat + xi * system.J_mat


def build_rhs(system: AssembledSystem, f_coeffs: np.ndarray) -> np.ndarray:
    """Right-hand side (I + M*) F in the coefficient basis."""
    return system.rhs_map(f_coeffs)


_MAGIC = b"EMSC"


def dump_matrix(path, mat: np.ndarray) -> None:
    """Flat binary dump: magic, version, rows, cols, column-major complex128."""
    mat = np.asarray(mat, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", 1, mat.shape[0], mat.shape[1]))
        fh.write(np.asfortranarray(mat).tobytes(order="F"))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a matrix dump")
        _, rows, cols = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(), dtype=np.complex128)
    return data.reshape((rows, cols), order="F").copy()
