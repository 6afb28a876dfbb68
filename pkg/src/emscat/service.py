"""FastAPI service wrapping the solver pipeline.

Each task the CLI exposes is a POST endpoint with a pydantic request model
mirroring the JSON config schema.  Assembled-and-factored systems are cached
(keyed by shape, medium and discretization) so repeated requests against the
same configuration reuse the factorization: the left-hand side is
incidence-independent, only the right-hand side changes.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, model_validator

from . import assembly, driver, geometry, linalg
from .medium import Medium

__all__ = ["app", "handle_solve", "handle_mie_check", "handle_reciprocity",
           "handle_cond_sweep", "handle_counterexample", "handle_near_field",
           "REQUEST_TYPES", "HANDLERS"]


# ---------------------------------------------------------------------------
# shared schema pieces
# ---------------------------------------------------------------------------

class ShapeModel(BaseModel):
    kind: Literal["sphere", "spheroid", "chebyshev"]
    radius: float = 1.0
    aspect_ratio: float = 2.0
    base: float = 0.5
    amplitude: float = 1.0 / 40.0
    order: int = 5

    def build(self) -> geometry.SurfaceParametrization:
        if self.kind == "sphere":
            return geometry.sphere(self.radius)
        if self.kind == "spheroid":
            return geometry.spheroid(self.aspect_ratio)
        return geometry.chebyshev_particle(self.base, self.amplitude, self.order)


class MediumModel(BaseModel):
    eps_plus: float = 1.0
    eps_minus_re: float = 1.0
    eps_minus_im: float = 0.0
    mu_plus: float = 1.0
    mu_minus: float = 1.0

    def build(self, omega: float) -> Medium:
        return Medium(eps_plus=self.eps_plus,
                      eps_minus=complex(self.eps_minus_re, self.eps_minus_im),
                      mu_plus=self.mu_plus, mu_minus=self.mu_minus, omega=omega)


class IncidenceModel(BaseModel):
    """Incidence direction -(sin t', 0, cos t') with polarization H or V."""

    theta_deg: float = 180.0
    polarization: Literal["H", "V"] = "H"

    def wave(self) -> driver.IncidentWave:
        theta = np.deg2rad(self.theta_deg)
        if self.polarization == "H":
            return driver.plane_wave_h(theta)
        return driver.plane_wave_v(theta)


class _FrequencyMixin(BaseModel):
    size_lambda: float | None = None
    omega: float | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.size_lambda is None) == (self.omega is None):
            raise ValueError("specify exactly one of size_lambda or omega")
        return self

    def resolve_omega(self, geom, medium_model: MediumModel) -> float:
        if self.omega is not None:
            return float(self.omega)
        d = geom.diameter()
        return float(2.0 * np.pi * self.size_lambda
                     / (d * np.sqrt(medium_model.eps_plus * medium_model.mu_plus)))


# ---------------------------------------------------------------------------
# system cache (factor once, solve many)
# ---------------------------------------------------------------------------

_CACHE: OrderedDict = OrderedDict()
_CACHE_LOCK = threading.Lock()
_CACHE_SIZE = 4


def _system_key(shape: ShapeModel, medium: MediumModel, omega: float,
                n: int, n_prime: int | None) -> tuple:
    return (tuple(sorted(shape.model_dump().items())),
            tuple(sorted(medium.model_dump().items())), omega, n, n_prime)


def get_system(shape: ShapeModel, medium: MediumModel, omega: float,
               n: int, n_prime: int | None):
    """Cached (AssembledSystem, Factorization) for a configuration."""
    key = _system_key(shape, medium, omega, n, n_prime)
    with _CACHE_LOCK:
        if key in _CACHE:
            _CACHE.move_to_end(key)
            return _CACHE[key]
    system = assembly.assemble(medium.build(omega), shape.build(), n, n_prime)
    fac = driver.factor_system(system)
    with _CACHE_LOCK:
        _CACHE[key] = (system, fac)
        while len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return system, fac


def clear_cache():
    with _CACHE_LOCK:
        _CACHE.clear()


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

class SolveRequest(_FrequencyMixin):
    shape: ShapeModel
    medium: MediumModel
    n: int = Field(ge=1)
    n_prime: int | None = None
    incidence: IncidenceModel = IncidenceModel()
    theta_count: int = 1202
    include_coefficients: bool = False


class SolveResponse(BaseModel):
    omega: float
    n: int
    n_prime: int
    constraint_residual: float
    theta_deg: list[float]
    sigma_hh_db: list[float]
    sigma_vv_db: list[float]
    far_field: list[list[float]]  # rows (Re Ex, Im Ex, ..., Im Ez) for the requested wave
    coefficients: list[list[float]] | None = None


def handle_solve(req: SolveRequest) -> SolveResponse:
    geom = req.shape.build()
    omega = req.resolve_omega(geom, req.medium)
    system, fac = get_system(req.shape, req.medium, omega, req.n, req.n_prime)
    thetas = driver.theta_grid(req.theta_count)
    dirs = driver.x_theta(thetas)
    theta_inc = np.deg2rad(req.incidence.theta_deg)

    sol_h = driver.solve_with_system(system, driver.plane_wave_h(theta_inc), fac=fac)
    sol_v = driver.solve_with_system(system, driver.plane_wave_v(theta_inc), fac=fac)
    einf_h = driver.far_field(sol_h, dirs)
    einf_v = driver.far_field(sol_v, dirs)
    sigma_hh = driver.rcs(einf_h, thetas, "H")
    sigma_vv = driver.rcs(einf_v, thetas, "V")

    requested = sol_h if req.incidence.polarization == "H" else sol_v
    einf = einf_h if req.incidence.polarization == "H" else einf_v
    ff = np.column_stack([einf.real[:, 0], einf.imag[:, 0],
                          einf.real[:, 1], einf.imag[:, 1],
                          einf.real[:, 2], einf.imag[:, 2]])
    coeffs = None
    if req.include_coefficients:
        coeffs = [[float(c.real), float(c.imag)] for c in requested.coeffs]
    return SolveResponse(
        omega=omega, n=system.n, n_prime=system.n_prime,
        constraint_residual=requested.constraint_residual,
        theta_deg=list(np.rad2deg(thetas)),
        sigma_hh_db=list(sigma_hh), sigma_vv_db=list(sigma_vv),
        far_field=ff.tolist(), coefficients=coeffs)


# ---------------------------------------------------------------------------
# mie-check
# ---------------------------------------------------------------------------

class MieCheckRequest(_FrequencyMixin):
    shape: ShapeModel
    medium: MediumModel
    n_values: list[int]
    n_prime_offset: int = 2
    theta_count: int = 1202
    incidence: IncidenceModel = IncidenceModel()


class MieCheckResponse(BaseModel):
    omega: float
    rows: list[dict]


def handle_mie_check(req: MieCheckRequest) -> MieCheckResponse:
    from . import mie

    if req.shape.kind != "sphere":
        raise ValueError("the Mie reference requires a sphere")
    geom = req.shape.build()
    omega = req.resolve_omega(geom, req.medium)
    med = req.medium.build(omega)
    wave = req.incidence.wave()
    thetas = driver.theta_grid(req.theta_count)
    dirs = driver.x_theta(thetas)
    msol = mie.mie_solve(med, req.shape.radius)
    ref = mie.mie_far_field(msol, wave.direction, wave.polarization, dirs)
    rows = []
    for n in req.n_values:
        system, fac = get_system(req.shape, req.medium, omega, n,
                                 n + req.n_prime_offset)
        sol = driver.solve_with_system(system, wave, fac=fac)
        err = driver.err_mie(driver.far_field(sol, dirs), ref)
        rows.append({"n": n, "err": err,
                     "constraint_residual": sol.constraint_residual})
    return MieCheckResponse(omega=omega, rows=rows)


# ---------------------------------------------------------------------------
# reciprocity
# ---------------------------------------------------------------------------

class ReciprocityRequest(_FrequencyMixin):
    shape: ShapeModel
    medium: MediumModel
    n: int = Field(ge=1)
    n_prime: int | None = None
    grid_size: int = 360


class ReciprocityResponse(BaseModel):
    omega: float
    n: int
    grid_size: int
    err_rp: float


def handle_reciprocity(req: ReciprocityRequest) -> ReciprocityResponse:
    geom = req.shape.build()
    omega = req.resolve_omega(geom, req.medium)
    system, _ = get_system(req.shape, req.medium, omega, req.n, req.n_prime)
    err = driver.err_reciprocity(system.medium, geom, req.n, req.n_prime,
                                 grid_size=req.grid_size, system=system)
    return ReciprocityResponse(omega=omega, n=req.n, grid_size=req.grid_size,
                               err_rp=err)


# ---------------------------------------------------------------------------
# cond-sweep
# ---------------------------------------------------------------------------

class CondSweepRequest(BaseModel):
    shape: ShapeModel
    medium: MediumModel
    n: int = Field(ge=1)
    n_prime: int | None = None
    omegas: list[float]


class CondSweepResponse(BaseModel):
    rows: list[dict]


def handle_cond_sweep(req: CondSweepRequest) -> CondSweepResponse:
    geom = req.shape.build()
    med = req.medium.build(1.0)
    rows = linalg.frequency_sweep(med, geom, req.n, req.omegas, req.n_prime)
    return CondSweepResponse(rows=[
        {"omega": om, "kappa_stab": ks, "kappa_unstab": ku}
        for om, ks, ku in rows])


# ---------------------------------------------------------------------------
# counterexample (coupling-parameter degeneracy report)
# ---------------------------------------------------------------------------

class CounterexampleRequest(BaseModel):
    xi_count: int = 100
    seed: int = 0


class CounterexampleResponse(BaseModel):
    max_abs_det_2x2: float
    max_abs_det_3x3: float
    intersection_trivial_2x2: bool
    intersection_trivial_3x3: bool
    xi_values_checked: int


def coupling_counterexamples():
    """The 2x2 and 3x3 pairs (I+M, J) with I+M+xi*J singular for every xi."""
    a2 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    j2 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    a3 = np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=complex)
    j3 = np.diag([1.0, -1.0, 0.0]).astype(complex)
    return (a2, j2), (a3, j3)


def handle_counterexample(req: CounterexampleRequest) -> CounterexampleResponse:
    rng = np.random.default_rng(req.seed)
    xis = np.concatenate([
        np.array([0.0, 1.0, 1j, 3.0 - 2.0j]),
        rng.normal(size=req.xi_count) + 1j * rng.normal(size=req.xi_count),
    ])
    (a2, j2), (a3, j3) = coupling_counterexamples()
    d2 = max(abs(np.linalg.det(a2 + xi * j2)) for xi in xis)
    d3 = max(abs(np.linalg.det(a3 + xi * j3)) for xi in xis)

    def trivial_intersection(a, j):
        stacked = np.vstack([a, j])
        return np.linalg.matrix_rank(stacked) == a.shape[1]

    return CounterexampleResponse(
        max_abs_det_2x2=float(d2), max_abs_det_3x3=float(d3),
        intersection_trivial_2x2=trivial_intersection(a2, j2),
        intersection_trivial_3x3=trivial_intersection(a3, j3),
        xi_values_checked=len(xis))


# ---------------------------------------------------------------------------
# near-field
# ---------------------------------------------------------------------------

class NearFieldRequest(_FrequencyMixin):
    shape: ShapeModel
    medium: MediumModel
    n: int = Field(ge=1)
    n_prime: int | None = None
    incidence: IncidenceModel = IncidenceModel()
    points: list[list[float]]


class NearFieldResponse(BaseModel):
    omega: float
    points: list[list[float]]
    values: list[list[float]]    # (Re Ex, Im Ex, ..., Im Ez)
    surface_distance: list[float]


def handle_near_field(req: NearFieldRequest) -> NearFieldResponse:
    geom = req.shape.build()
    omega = req.resolve_omega(geom, req.medium)
    system, fac = get_system(req.shape, req.medium, omega, req.n, req.n_prime)
    sol = driver.solve_with_system(system, req.incidence.wave(), fac=fac)
    pts = np.asarray(req.points, dtype=float)
    vals, dist = driver.near_field(sol, pts)
    out = np.column_stack([vals.real[:, 0], vals.imag[:, 0],
                           vals.real[:, 1], vals.imag[:, 1],
                           vals.real[:, 2], vals.imag[:, 2]])
    return NearFieldResponse(omega=omega, points=pts.tolist(),
                             values=out.tolist(),
                             surface_distance=list(dist))


# ---------------------------------------------------------------------------
# app wiring
# ---------------------------------------------------------------------------

REQUEST_TYPES = {
    "solve": SolveRequest,
    "mie-check": MieCheckRequest,
    "reciprocity": ReciprocityRequest,
    "cond-sweep": CondSweepRequest,
    "counterexample": CounterexampleRequest,
    "near-field": NearFieldRequest,
}

HANDLERS = {
    "solve": handle_solve,
    "mie-check": handle_mie_check,
    "reciprocity": handle_reciprocity,
    "cond-sweep": handle_cond_sweep,
    "counterexample": handle_counterexample,
    "near-field": handle_near_field,
}

app = FastAPI(title="emscat", version="0.1.0",
              description="Surface-integral electromagnetic scattering solver")


def _endpoint(task: str):
    req_type = REQUEST_TYPES[task]
    handler = HANDLERS[task]

    def run(request):
        try:
            return handler(request)
        except (ValueError, linalg.SingularMatrixError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    # runtime annotation: the stringified module-level annotations cannot
    # name this closure variable
    run.__annotations__ = {"request": req_type}
    run.__name__ = f"post_{task.replace('-', '_')}"
    return run


app.post("/solve", response_model=SolveResponse)(_endpoint("solve"))
app.post("/mie-check", response_model=MieCheckResponse)(_endpoint("mie-check"))
app.post("/reciprocity", response_model=ReciprocityResponse)(_endpoint("reciprocity"))
app.post("/cond-sweep", response_model=CondSweepResponse)(_endpoint("cond-sweep"))
app.post("/counterexample", response_model=CounterexampleResponse)(_endpoint("counterexample"))
app.post("/near-field", response_model=NearFieldResponse)(_endpoint("near-field"))


@app.get("/health")
def health():
    return {"status": "ok", "version": "0.1.0"}
