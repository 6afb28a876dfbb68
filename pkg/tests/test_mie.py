import numpy as np

from emscat import mie
from emscat.medium import Medium
from conftest import random_unit


def test_zero_contrast_coefficients_vanish():
    med = Medium.from_refractive_index(1.0, omega=2.0)
    sol = mie.mie_solve(med, 1.0)
    assert np.abs(sol.a).max() < 1e-15
    assert np.abs(sol.b).max() < 1e-15


def test_rayleigh_limit_dipole_coefficient():
    nu = 1.584
    x = 1e-3
    med = Medium.from_refractive_index(nu, omega=x)
    sol = mie.mie_solve(med, 1.0)
    a1_ref = -(2j / 3) * x**3 * (nu**2 - 1) / (nu**2 + 2)
    assert abs(sol.a[1] - a1_ref) / abs(a1_ref) < 1e-4


def test_optical_theorem_dielectric():
    med = Medium.from_refractive_index(1.584, omega=np.pi)
    sol = mie.mie_solve(med, 1.0)
    csca, cext = mie.cross_sections(sol)
    assert abs(csca - cext) < 1e-10 * cext
    # forward-amplitude form of the optical theorem fixes the far-field scale
    einf_fwd = mie.mie_far_field(sol, np.array([0, 0, 1.0]),
                                 np.array([1.0, 0, 0]),
                                 np.array([[0.0, 0.0, 1.0]]))[0]
    k = med.k_plus
    assert abs(4 * np.pi / k * np.imag(einf_fwd[0]) - cext) < 1e-10 * cext


def test_absorbing_extinction_exceeds_scattering():
    med = Medium.from_refractive_index(1.5 + 0.02j, omega=np.pi)
    csca, cext = mie.cross_sections(mie.mie_solve(med, 1.0))
    assert cext > csca


def test_energy_from_angular_integration():
    med = Medium.from_refractive_index(1.584, omega=np.pi)
    sol = mie.mie_solve(med, 1.0)
    csca, cext = mie.cross_sections(sol)
    # integrate |E_inf|^2 over the sphere of directions
    from emscat.spherical import build_quadrature
    rule = build_quadrature(40)
    einf = mie.mie_far_field(sol, np.array([0, 0, 1.0]), np.array([1.0, 0, 0]),
                             rule.nodes)
    val = np.sum(rule.weights * np.einsum("ij,ij->i", einf.conj(), einf).real)
    assert abs(val - csca) < 1e-10 * csca


def test_transmission_conditions_at_surface(rng):
    med = Medium.from_refractive_index(1.584, omega=np.pi)
    sol = mie.mie_solve(med, 1.0)
    dirs = random_unit(rng, 40)
    e_out = mie.mie_near_field(sol, dirs * (1 + 1e-12), "E")
    e_in = mie.mie_near_field(sol, dirs * (1 - 1e-12), "E")
    h_out = mie.mie_near_field(sol, dirs * (1 + 1e-12), "H")
    h_in = mie.mie_near_field(sol, dirs * (1 - 1e-12), "H")
    scale = np.abs(e_out).max()
    assert np.abs(np.cross(dirs, e_out - e_in)).max() < 1e-10 * scale
    assert np.abs(np.cross(dirs, h_out - h_in)).max() < 1e-10 * scale
    # charge continuity eps En
    jump = med.eps_plus * np.einsum("ij,ij->i", dirs, e_out) \
        - med.eps_minus * np.einsum("ij,ij->i", dirs, e_in)
    assert np.abs(jump).max() < 1e-10 * scale


def test_reciprocity_on_grid():
    med = Medium.from_refractive_index(1.584, omega=np.pi)
    sol = mie.mie_solve(med, 1.0)
    count = 90
    th = np.linspace(0, 2 * np.pi, count, endpoint=False)
    xh = np.column_stack([np.sin(th), np.zeros(count), np.cos(th)])
    eh = np.column_stack([np.cos(th), np.zeros(count), -np.sin(th)])
    amp = np.zeros((count, count), dtype=complex)
    for jdx in range(count):
        einf = mie.mie_far_field(sol, -xh[jdx], eh[jdx], xh)
        amp[:, jdx] = np.einsum("ij,ij->i", eh.astype(complex), einf)
    assert np.abs(amp - amp.T).max() < 1e-12 * np.abs(amp).max()


def test_rotational_consistency(rng):
    med = Medium.from_refractive_index(1.5 + 0.02j, omega=2.0)
    sol = mie.mie_solve(med, 1.0)
    d = np.array([0.0, 0.0, 1.0])
    p = np.array([1.0, 0.0, 0.0])
    dirs = random_unit(rng, 25)
    base = mie.mie_far_field(sol, d, p, dirs)
    ang = 0.83
    rot = np.array([[np.cos(ang), -np.sin(ang), 0],
                    [np.sin(ang), np.cos(ang), 0], [0, 0, 1.0]])
    rot = rot @ np.array([[1, 0, 0], [0, np.cos(0.4), -np.sin(0.4)],
                          [0, np.sin(0.4), np.cos(0.4)]])
    rotated = mie.mie_far_field(sol, rot @ d, rot @ p, dirs @ rot.T)
    assert np.abs(np.abs(rotated) - np.abs(base @ rot.T)).max() < 1e-12


def test_truncation_stability():
    med = Medium.from_refractive_index(1.584, omega=np.pi)
    sol = mie.mie_solve(med, 1.0)
    # re-solve with 10 extra orders by faking a larger size parameter bound
    big = mie.MieSolution(medium=med, radius=1.0, L=sol.L + 10,
                          a=np.pad(sol.a, (0, 10)), b=np.pad(sol.b, (0, 10)),
                          c=np.pad(sol.c, (0, 10)), d=np.pad(sol.d, (0, 10)))
    dirs = np.array([[0.0, 1.0, 0.0], [0.5, 0.5, np.sqrt(0.5)]])
    dirs[1] /= np.linalg.norm(dirs[1])
    e1 = mie.mie_far_field(sol, np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), dirs)
    e2 = mie.mie_far_field(big, np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), dirs)
    assert np.abs(e1 - e2).max() < 1e-13 * np.abs(e1).max()


def test_far_field_matches_large_radius_limit(rng):
    med = Medium.from_refractive_index(1.584, omega=np.pi)
    sol = mie.mie_solve(med, 1.0)
    dirs = random_unit(rng, 8)
    radius = 4e3
    es = mie.mie_near_field(sol, dirs * radius, "E", total=False)
    einf = mie.mie_far_field(sol, np.array([0, 0, 1.0]), np.array([1.0, 0, 0]),
                             dirs)
    k = med.k_plus
    resid = np.abs(es - np.exp(1j * k * radius) / radius * einf).max()
    assert resid * radius < 1e-2 * np.abs(einf).max()


def test_mie_requires_positive_frequency():
    import pytest

    med = Medium.from_refractive_index(1.584, omega=0.0)
    with pytest.raises(ValueError):
        mie.mie_solve(med, 1.0)
