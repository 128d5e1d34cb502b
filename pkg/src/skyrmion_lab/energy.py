"""Energy functionals, topological charge and related fields.

Planar fields are evaluated on tensor-product grids with centred differences.
The discrete energy is built so that its exact gradient (divided by the nodal
quadrature weight) is ``laplacian(m) - 2 curl(m) - h (m - e3)``.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import Field2D, Grid2D, integrate_radial
from .profile import ProfileSolution

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class EnergyReport:
    dirichlet: float
    helicity: float
    zeeman: float
    total: float
    charge: float
    virial_residual: float
    boundary_ok: bool = True

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("boundary_ok")
        return d


# --------------------------------------------------------------------------
# radial quantities
# --------------------------------------------------------------------------

def _radial_integral(g: np.ndarray, profile: ProfileSolution) -> float:
    """``2 pi int_0^R g r dr`` with the cell ``[0, r0]`` taken at ``g(r0)``."""
    r0 = profile.grid.r0
    return 2.0 * np.pi * (integrate_radial(g, profile.grid, "r") + 0.5 * g[0] * r0 * r0)


def radial_densities(profile: ProfileSolution, helicity_form: str = "direct"):
    """Dirichlet, helicity and Zeeman integrands (per ``2 pi r dr``)."""
    r, th, dth = profile.r, profile.theta, profile.theta_prime
    st, ct = profile.sin_theta, np.cos(th)
    omc = 2.0 * np.sin(0.5 * th) ** 2
    dirichlet = 0.5 * dth**2 + 0.5 * (st / r) ** 2
    if helicity_form == "direct":
        helicity = dth + st * ct / r
    elif helicity_form == "null_lagrangian":
        helicity = omc * (dth - st / r)
    else:
        raise ValueError(f"unknown helicity form {helicity_form!r}")
    zeeman = profile.h * omc
    return dirichlet, helicity, zeeman


def radial_energy(profile: ProfileSolution, helicity_form: str = "direct") -> float:
    """Energy of the axisymmetric field built from ``profile``."""
    return float(sum(radial_split(profile, helicity_form)))


def radial_split(profile: ProfileSolution, helicity_form: str = "direct"):
    """``(dirichlet, helicity, zeeman)`` parts of :func:`radial_energy`."""
    return tuple(_radial_integral(g, profile) for g in radial_densities(profile, helicity_form))


def lagrange_multiplier(profile: ProfileSolution) -> np.ndarray:
    """Pointwise multiplier of the constrained Euler-Lagrange equation."""
    r, th, dth, h = profile.r, profile.theta, profile.theta_prime, profile.h
    st, ct = profile.sin_theta, np.cos(th)
    omc = 2.0 * np.sin(0.5 * th) ** 2
    return dth**2 + (st / r) ** 2 + 2.0 * dth + 2.0 * st * ct / r + h * omc


def multiplier_at_origin(s: float, h: float) -> float:
    """Limit of the multiplier as ``r -> 0`` for slope ``s``."""
    return 2.0 * s * s - 4.0 * s + 2.0 * h


def dissipative_tensor(profile: ProfileSolution) -> np.ndarray:
    """``D = d I`` with ``d = pi int (theta'^2 + sin^2 theta / r^2) r dr``."""
    r, th, dth = profile.r, profile.theta, profile.theta_prime
    g = dth**2 + (profile.sin_theta / r) ** 2
    d = 0.5 * _radial_integral(g, profile)
    return d * np.eye(2)


def helicity_of_ansatz(profile: ProfileSolution, N: int, gamma: float) -> float:
    """Helicity of ``(e^{i(gamma - N psi)} sin theta, cos theta)``.

    Evaluates the product of the radial integral ``-2 int sin^2 theta theta' r dr``
    with the angular integral of ``sin((N+1) psi - gamma)``, which vanishes
    unless ``N = -1``.
    """
    if N == 0:
        raise ValueError("formula valid only for N != 0")
    th, dth = profile.theta, profile.theta_prime
    radial = -2.0 * (integrate_radial(profile.sin_theta ** 2 * dth, profile.grid, "r"))
    angular = -2.0 * np.pi * np.sin(gamma) if N + 1 == 0 else 0.0
    return float(radial * angular)


# --------------------------------------------------------------------------
# rasterisation
# --------------------------------------------------------------------------

def default_grid(profile: ProfileSolution, n: int = 512, graded: bool = True) -> Grid2D:
    """Box of side ``2R``; graded towards the core unless ``graded=False``."""
    L = 2.0 * profile.grid.R
    if not graded:
        return Grid2D.uniform(L, n)
    return Grid2D.graded(L, n, 0.5 * profile.core_radius)


def rasterize(profile: ProfileSolution, grid: Grid2D | None = None, N: int = -1,
              gamma: float = 0.5 * np.pi, center=(0.0, 0.0)) -> Field2D:
    """Sample ``(e^{i(gamma - N psi)} sin theta(r), cos theta(r))`` about ``center``.

    The boundary ring is set to ``e3``.
    """
    grid = default_grid(profile) if grid is None else grid
    X, Y = grid.mesh()
    X, Y = X - center[0], Y - center[1]
    r = np.hypot(X, Y)
    th = profile.theta_at(r)
    psi = np.arctan2(Y, X)
    ang = gamma - N * psi
    m = np.stack([np.cos(ang) * np.sin(th), np.sin(ang) * np.sin(th), np.cos(th)])
    m[:, 0, :] = m[:, -1, :] = E3[:, None]
    m[:, :, 0] = m[:, :, -1] = E3[:, None]
    return Field2D(grid, m)


# --------------------------------------------------------------------------
# planar functionals
# --------------------------------------------------------------------------

def curl(field: Field2D) -> np.ndarray:
    """``(d2 m3, -d1 m3, d1 m2 - d2 m1)`` at interior nodes."""
    g, m = field.grid, field.values
    return np.stack([g.dy(m[2]), -g.dx(m[2]), g.dx(m[1]) - g.dy(m[0])])


def dirichlet_energy(field: Field2D) -> float:
    return 0.5 * field.grid.gradient_energy(field.values)


def helicity_energy(field: Field2D) -> float:
    """Integrated-by-parts helicity ``2 int (m1 d2 m3 - m2 d1 m3)``."""
    g, m = field.grid, field.values
    return 2.0 * g.integrate(m[0] * g.dy(m[2]) - m[1] * g.dx(m[2]))


def zeeman_energy(field: Field2D, h: float) -> float:
    d = field.values - E3[:, None, None]
    return 0.5 * h * field.grid.integrate(np.sum(d * d, axis=0))


def total_energy(field: Field2D, h: float) -> float:
    return dirichlet_energy(field) + helicity_energy(field) + zeeman_energy(field, h)


def charge_density(field: Field2D) -> np.ndarray:
    g, m = field.grid, field.values
    return np.einsum("i...,i...->...", m, np.cross(g.dx(m), g.dy(m), axis=0))


def topological_charge(field: Field2D) -> float:
    """Degree ``(1/4 pi) int m . (d1 m x d2 m)`` with centred differences."""
    return field.grid.integrate(charge_density(field)) / (4.0 * np.pi)


def energy_2d(field: Field2D, h: float, boundary_tol: float = 1e-6) -> EnergyReport:
    boundary_ok = field.boundary_defect <= boundary_tol
    if not boundary_ok:
        warnings.warn("field is not e3 on the boundary ring; helicity extension assumes decay",
                      stacklevel=2)
    ed = dirichlet_energy(field)
    eh = helicity_energy(field)
    ez = zeeman_energy(field, h)
    return EnergyReport(ed, eh, ez, ed + eh + ez, topological_charge(field), eh + 2.0 * ez,
                        boundary_ok)


def effective_field(field: Field2D, h: float) -> np.ndarray:
    """``laplacian(m) - 2 curl(m) + h e3`` at interior nodes (zero on the ring)."""
    g, m = field.grid, field.values
    out = g.laplacian(m) - 2.0 * curl(field)
    out[2, 1:-1, 1:-1] += h
    return out


def energy_gradient(field: Field2D, h: float) -> np.ndarray:
    """Exact gradient of :func:`total_energy` divided by the nodal weights (interior nodes)."""
    out = effective_field(field, h)
    out[:, 1:-1, 1:-1] -= h * field.values[:, 1:-1, 1:-1]
    return -out


def tension(field: Field2D, h: float) -> np.ndarray:
    """Tangential projection ``h_eff - (h_eff . m) m``."""
    he = effective_field(field, h)
    m = field.values
    out = he - np.sum(he * m, axis=0) * m
    out[:, 0, :] = out[:, -1, :] = 0.0
    out[:, :, 0] = out[:, :, -1] = 0.0
    return out


def dissipative_tensor_2d(field: Field2D) -> np.ndarray:
    g, m = field.grid, field.values
    d1, d2 = g.dx(m), g.dy(m)
    D = np.empty((2, 2))
    D[0, 0] = g.integrate(np.sum(d1 * d1, axis=0))
    D[1, 1] = g.integrate(np.sum(d2 * d2, axis=0))
    D[0, 1] = D[1, 0] = g.integrate(np.sum(d1 * d2, axis=0))
    return D
