"""Second variation at the axisymmetric skyrmion.

Tangent perturbations are written in the moving frame ``X = e_r``,
``Y = (-sin psi cos theta, cos psi cos theta, -sin theta)``.  Their angular
Fourier modes decouple into the radial forms

    H_k(a, b) = int { a'^2 + b'^2 + (k^2/r^2 + f) a^2 + (k^2/r^2 + g) b^2
                      + 4k (cos(theta)/r^2 - sin(theta)/r) a b } r dr.

Radial integrals are done in ``t = log r`` (``r dr = r^2 dt``), with
high-order differences for the quadrature-based forms and piecewise-linear
elements for the discrete spectra.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline

from .energy import energy_2d, lagrange_multiplier
from .numerics import (BandedSymmetricPair, Field2D, RadialGrid, integrate_radial,
                       radial_derivative, smallest_eigenpairs, uniform_derivative)
from .profile import FD_ORDER, ProfileSolution


@dataclass(frozen=True, eq=False)
class ModeCoefficients:
    """Nodal coefficients ``f``, ``g`` and the cross weight ``w`` of the mode forms."""

    f: np.ndarray
    g: np.ndarray
    w: np.ndarray


def mode_coefficients(profile: ProfileSolution) -> ModeCoefficients:
    r, th, dth, h = profile.r, profile.theta, profile.theta_prime, profile.h
    st, ct = profile.sin_theta, np.cos(th)
    f = ct**2 / r**2 - dth**2 - 2.0 * dth - 2.0 * st * ct / r + h * ct
    g = (ct**2 - st**2) / r**2 - 4.0 * st * ct / r + h * ct
    w = ct / r**2 - st / r
    return ModeCoefficients(f, g, w)


def _scaled_coefficients(profile: ProfileSolution):
    """``f r^2``, ``g r^2`` and ``cos(theta) - r sin(theta)``, finite at the origin."""
    r, th, dth, h = profile.r, profile.theta, profile.theta_prime, profile.h
    st, ct = profile.sin_theta, np.cos(th)
    fr2 = ct**2 - (r * dth) ** 2 - 2.0 * r * r * dth - 2.0 * r * st * ct + h * r * r * ct
    gr2 = ct**2 - st**2 - 4.0 * r * st * ct + h * r * r * ct
    cross = ct - r * st
    return fr2, gr2, cross


def _t_weights(grid: RadialGrid) -> np.ndarray:
    if grid.grading != "log":
        raise ValueError("mode forms require a log-graded grid")
    w = np.full(grid.n, grid.step)
    w[0] = w[-1] = 0.5 * grid.step
    return w


def _dt(values, grid: RadialGrid) -> np.ndarray:
    return uniform_derivative(values, grid.step, 1, FD_ORDER)


# --------------------------------------------------------------------------
# quadrature forms
# --------------------------------------------------------------------------

def mode_form(profile: ProfileSolution, k: int, alpha, beta) -> float:
    """Quadrature of the ``H_k`` integrand for nodal ``(alpha, beta)``."""
    grid = profile.grid
    a, b = np.asarray(alpha, float), np.asarray(beta, float)
    fr2, gr2, cross = _scaled_coefficients(profile)
    dens = (_dt(a, grid) ** 2 + _dt(b, grid) ** 2 + (k * k + fr2) * a * a
            + (k * k + gr2) * b * b + 4.0 * k * cross * a * b)
    return float(np.dot(_t_weights(grid), dens))


def l2_norm_sq(profile: ProfileSolution, alpha, beta) -> float:
    """``int (alpha^2 + beta^2) r dr``."""
    return integrate_radial(np.asarray(alpha) ** 2 + np.asarray(beta) ** 2, profile.grid, "r")


def h1_norm_sq(profile: ProfileSolution, alpha, beta) -> float:
    """``int (alpha'^2 + beta'^2 + alpha^2 + beta^2) r dr``."""
    grid = profile.grid
    a, b = np.asarray(alpha, float), np.asarray(beta, float)
    grad = float(np.dot(_t_weights(grid), _dt(a, grid) ** 2 + _dt(b, grid) ** 2))
    return grad + l2_norm_sq(profile, a, b)


@dataclass(frozen=True, eq=False)
class ReductionMargin:
    integrand: np.ndarray
    bound: np.ndarray


def mode_reduction_margin(profile: ProfileSolution, k: int, alpha, beta) -> ReductionMargin:
    """Pointwise density of ``H_{k+1} - H_k`` (per ``r dr``) and its lower bound."""
    if k < 1:
        raise ValueError("k must be at least 1")
    r, th = profile.r, profile.theta
    a, b = np.asarray(alpha, float), np.asarray(beta, float)
    integrand = ((2 * k + 1) * (a * a + b * b) + 4.0 * (np.cos(th) - r * profile.sin_theta) * a * b) / r**2
    bound = 3.0 * (np.abs(a) - np.abs(b)) ** 2 / r**2
    return ReductionMargin(integrand, bound)


@dataclass(frozen=True)
class HardyBalance:
    lhs: float
    rhs: float
    gap: float


def hardy_decomposition_check(A, V, psi, f, grid: RadialGrid) -> HardyBalance:
    """Both sides of ``int L f . f dr = int psi^2 A (g')^2 dr + int g^2 L psi . psi dr``.

    ``L = -(A u')' + V u`` and ``g = f / psi``.
    """
    A, V, psi, f = (np.asarray(x, float) for x in (A, V, psi, f))
    support = np.abs(f) > 0
    if np.any(psi[support] <= 0):
        raise ValueError("positivity of psi violated")

    def d(u):
        return radial_derivative(u, grid, FD_ORDER)

    def L(u):
        return -d(A * d(u)) + V * u

    g = np.zeros_like(f)
    g[support] = f[support] / psi[support]
    lhs = integrate_radial(L(f) * f, grid, "1")
    rhs = integrate_radial(psi**2 * A * d(g) ** 2, grid, "1") + integrate_radial(g * g * L(psi) * psi, grid, "1")
    return HardyBalance(lhs, rhs, abs(lhs - rhs))


def hardy_instances(profile: ProfileSolution, k: int):
    """The two ``(A, V, psi)`` triples used for the alpha and beta components."""
    r = profile.r
    c = mode_coefficients(profile)
    return (
        (r, k * k / r + c.f * r, profile.sin_theta / r),
        (r, k * k / r + c.g * r, -profile.theta_prime),
    )


def substitute(profile: ProfileSolution, xi, eta):
    """``alpha = sin(theta)/r * xi``, ``beta = -theta' * eta``."""
    return (profile.sin_theta / profile.r * np.asarray(xi, float),
            -profile.theta_prime * np.asarray(eta, float))


def tilde_form(profile: ProfileSolution, k: int, xi, eta) -> float:
    """``H_k`` written in the substituted variables ``(xi, eta)``."""
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    grid = profile.grid
    r, th, dth = profile.r, profile.theta, profile.theta_prime
    x, y = np.asarray(xi, float), np.asarray(eta, float)
    sr = profile.sin_theta / r
    coupling = 2.0 * sr * dth * (np.cos(th) / r - profile.sin_theta)
    dens = (sr**2 * _dt(x, grid) ** 2 + dth**2 * _dt(y, grid) ** 2
            + (k * k - 1) * (sr**2 * x * x + dth**2 * y * y)
            + r * coupling * (x * x - 2 * k * x * y + y * y))
    return float(np.dot(_t_weights(grid), dens))


def h0_lower_bound(profile: ProfileSolution, xi, eta) -> float:
    """``int 2 (sin^2 theta / r)(-theta') (xi^2 + eta^2/2) dr``."""
    x, y = np.asarray(xi, float), np.asarray(eta, float)
    dens = 2.0 * profile.sin_theta ** 2 / profile.r * (-profile.theta_prime) * (x * x + 0.5 * y * y)
    return integrate_radial(dens, profile.grid, "1")


def positivity_coefficient(profile: ProfileSolution) -> np.ndarray:
    """``r theta'^2 - sin^2 theta / (r (1 + 2 r^2 (-theta')))`` per node."""
    r, dth = profile.r, profile.theta_prime
    return r * dth**2 - profile.sin_theta ** 2 / (r * (1.0 + 2.0 * r * r * (-dth)))


def completed_square_form(profile: ProfileSolution, xi, eta) -> float:
    """The ``k = 1`` form as a sum of three manifestly nonnegative terms."""
    grid = profile.grid
    r, th, dth = profile.r, profile.theta, profile.theta_prime
    x, y = np.asarray(xi, float), np.asarray(eta, float)
    xt, yt = _dt(x, grid), _dt(y, grid)
    st = profile.sin_theta
    q = 1.0 + 2.0 * r * r * (-dth)
    # per dr, with xi' = xi_t / r; multiply by r for dt
    sq1 = (st / np.sqrt(r) * xt / r - st / r**1.5 * (x - y)) ** 2
    mid = positivity_coefficient(profile) * (yt / r) ** 2
    sq3 = (st / np.sqrt(r) / np.sqrt(q) * yt / r + st / r**1.5 * np.sqrt(q) * (x - y)) ** 2
    return float(np.dot(_t_weights(grid), r * (sq1 + mid + sq3)))


def translation_mode(profile: ProfileSolution):
    """``(sin(theta)/r, -theta')``: the ``k = 1`` profile of a translation."""
    return profile.sin_theta / profile.r, -profile.theta_prime


# --------------------------------------------------------------------------
# discrete spectra
# --------------------------------------------------------------------------

def _stiffness_1d(n: int, dt: float) -> sp.csr_matrix:
    """P1 stiffness for ``int u_t^2 dt`` on nodes ``0..n-1`` with ``u_n = 0``."""
    main = np.full(n, 2.0)
    main[0] = 1.0
    off = -np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / dt


def _interleave(Kaa, Kbb, Kab_diag):
    n = Kaa.shape[0]
    P = sp.lil_matrix((2 * n, 2 * n))
    Kaa, Kbb = sp.coo_matrix(Kaa), sp.coo_matrix(Kbb)
    for i, j, v in zip(Kaa.row, Kaa.col, Kaa.data):
        P[2 * i, 2 * j] += v
    for i, j, v in zip(Kbb.row, Kbb.col, Kbb.data):
        P[2 * i + 1, 2 * j + 1] += v
    idx = np.arange(n)
    P[2 * idx, 2 * idx + 1] = Kab_diag
    P[2 * idx + 1, 2 * idx] = Kab_diag
    return P.tocsr()


def assemble_mode(profile: ProfileSolution, k: int):
    """Banded pair for ``H_k`` with unknowns ``(alpha_i, beta_i)`` interleaved.

    Piecewise-linear elements in ``t``; potential and mass terms are lumped
    with trapezoid weights.  The last node carries a Dirichlet condition; the
    first node is left free (natural condition).
    """
    grid = profile.grid
    n = grid.n - 1
    dt = grid.step
    w = _t_weights(grid)[:n]
    r2 = grid.r[:n] ** 2
    fr2, gr2, cross = (c[:n] for c in _scaled_coefficients(profile))
    S = _stiffness_1d(n, dt)
    Kaa = S + sp.diags(w * (k * k + fr2))
    Kbb = S + sp.diags(w * (k * k + gr2))
    K = _interleave(Kaa, Kbb, 2.0 * k * cross * w)
    Mdiag = np.repeat(w * r2, 2)
    M = sp.diags(Mdiag, format="csr")
    G = _interleave(S, S, np.zeros(n))
    return BandedSymmetricPair(K, M), G


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    """Lowest eigenpairs of the ``H_k`` discretisation.

    ``eigenvectors[j]`` is a pair ``(alpha, beta)`` of nodal arrays on the full
    grid (zero at ``R``), normalised in ``L^2(r dr)``.  ``h1_quotients`` holds
    the same Rayleigh quotients with respect to the ``H^1`` norm.
    """

    k: int
    pair: BandedSymmetricPair
    eigenvalues: np.ndarray
    eigenvectors: tuple
    zero_mode_overlap: float
    h1_quotients: np.ndarray

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def to_json(self) -> dict:
        return {"k": self.k, "eigenvalues": [float(x) for x in self.eigenvalues],
                "zero_mode_overlap": float(self.zero_mode_overlap)}


def mode_spectrum(profile: ProfileSolution, k: int, count: int = 1) -> ModeSpectrum:
    if not 0 <= k <= 8:
        raise ValueError("k must lie in 0..8")
    if not 1 <= count <= 4:
        raise ValueError("count must lie in 1..4")
    pair, G = assemble_mode(profile, k)
    pairs = smallest_eigenpairs(pair, count)
    n = profile.grid.n
    za, zb = translation_mode(profile)
    z = np.empty(2 * (n - 1))
    z[0::2], z[1::2] = za[:-1], zb[:-1]
    Mz = pair.M @ z
    vecs, lams, h1q = [], [], []
    for lam, x in pairs:
        x = x if np.dot(x, Mz) >= 0 else -x
        a = np.append(x[0::2], 0.0)
        b = np.append(x[1::2], 0.0)
        vecs.append((a, b))
        lams.append(lam)
        mass = float(x @ (pair.M @ x))
        h1q.append(lam * mass / float(x @ (G @ x) + mass))
    x0 = pairs[0][1]
    overlap = abs(float(x0 @ Mz)) / np.sqrt(float(x0 @ (pair.M @ x0)) * float(z @ Mz))
    return ModeSpectrum(k, pair, np.array(lams), tuple(vecs), overlap, np.array(h1q))


# --------------------------------------------------------------------------
# planar Hessian
# --------------------------------------------------------------------------

def multiplier_on_grid(profile: ProfileSolution, field_grid) -> np.ndarray:
    """Radial multiplier interpolated onto a planar grid (zero beyond ``R``)."""
    lam = lagrange_multiplier(profile)
    spline = CubicSpline(profile.grid.t, lam)
    X, Y = field_grid.mesh()
    r = np.hypot(X, Y)
    out = np.zeros_like(r)
    inside = r <= profile.grid.R
    rr = np.maximum(r[inside], profile.grid.r0)
    out[inside] = spline(np.log(rr))
    return out


def hinf_bilinear(grid, phi: np.ndarray, psi: np.ndarray, h: float) -> float:
    """Discrete ``H_inf(phi, psi)``; ``H_inf(m - e3) / 2`` is the discrete energy of ``m``."""
    def q(u):
        return (grid.gradient_energy(u) + 4.0 * grid.integrate(u[0] * grid.dy(u[2]) - u[1] * grid.dx(u[2]))
                + h * grid.integrate(np.sum(u * u, axis=0)))
    return 0.25 * (q(phi + psi) - q(phi - psi))


def hinf_form(grid, phi: np.ndarray, h: float) -> float:
    return hinf_bilinear(grid, phi, phi, h)


def hessian_2d(profile: ProfileSolution, xi: Field2D, h: float | None = None) -> float:
    """``H_inf(xi) - int Lambda |xi|^2`` on the planar grid of ``xi``."""
    h = profile.h if h is None else h
    g, u = xi.grid, xi.values
    lam = multiplier_on_grid(profile, g)
    return hinf_form(g, u, h) - g.integrate(lam * np.sum(u * u, axis=0))


def h1_norm_sq_2d(grid, u: np.ndarray) -> float:
    return grid.gradient_energy(u) + grid.integrate(np.sum(u * u, axis=0))


def curl_norms(grid, u: np.ndarray):
    """``(int |curl u|^2, int |grad u|^2)`` with centred differences."""
    c = np.stack([grid.dy(u[2]), -grid.dx(u[2]), grid.dx(u[1]) - grid.dy(u[0])])
    gsq = np.sum(grid.dx(u) ** 2 + grid.dy(u) ** 2, axis=0)
    return grid.integrate(np.sum(c * c, axis=0)), grid.integrate(gsq)


@dataclass(frozen=True)
class IdentityGap:
    lhs: float
    rhs: float
    gap: float
    xi_h1_sq: float


def sphere_project(m0: Field2D, phi: np.ndarray, scale: float) -> Field2D:
    """``(m0 + scale phi) / |m0 + scale phi|``."""
    v = m0.values + scale * np.asarray(phi, float)
    norm = np.sqrt(np.sum(v * v, axis=0))
    if np.min(norm) < 0.5:
        raise ValueError("perturbation too large")
    return m0.with_values(v / norm)


def energy_hessian_identity(profile: ProfileSolution, m0: Field2D, perturbation: np.ndarray,
                            scale: float) -> IdentityGap:
    """Compare ``E(m) - E(m0)`` with ``H(m - m0) / 2`` for ``m`` the projected perturbation."""
    h = profile.h
    m = sphere_project(m0, perturbation, scale)
    lhs = energy_2d(m, h).total - energy_2d(m0, h).total
    xi = m0.with_values(m.values - m0.values)
    rhs = 0.5 * hessian_2d(profile, xi, h)
    return IdentityGap(lhs, rhs, abs(lhs - rhs), h1_norm_sq_2d(m0.grid, xi.values))


def moving_frame(field_grid, profile: ProfileSolution):
    """Frame vectors ``X`` and ``Y`` on a planar grid."""
    X_, Y_ = field_grid.mesh()
    psi = np.arctan2(Y_, X_)
    th = profile.theta_at(np.hypot(X_, Y_))
    X = np.stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)])
    Y = np.stack([-np.sin(psi) * np.cos(th), np.cos(psi) * np.cos(th), -np.sin(th)])
    return X, Y, psi


def translation_field(profile: ProfileSolution, field_grid, direction=(1.0, 0.0)) -> np.ndarray:
    """``(c . grad) m0`` evaluated from the profile in the moving frame."""
    X, Y, psi = moving_frame(field_grid, profile)
    Xg, Yg = field_grid.mesh()
    r = np.hypot(Xg, Yg)
    th = profile.theta_at(r)
    dth_spline = CubicSpline(profile.grid.t, profile.theta_prime)
    dth = np.where(r <= profile.grid.R, dth_spline(np.log(np.clip(r, profile.grid.r0, None))), 0.0)
    cx, cy = direction
    # d1 m0 = (sin(theta)/r) sin(psi) X + theta' cos(psi) Y; d2 is the quarter turn of it
    u1 = np.sin(th) / r * (cx * np.sin(psi) - cy * np.cos(psi))
    u2 = dth * (cx * np.cos(psi) + cy * np.sin(psi))
    out = u1 * X + u2 * Y
    out[:, 0, :] = out[:, -1, :] = 0.0
    out[:, :, 0] = out[:, :, -1] = 0.0
    return out


def tangent_project(m0: Field2D, phi: np.ndarray) -> np.ndarray:
    m = m0.values
    return phi - np.sum(phi * m, axis=0) * m



# --------------------------------------------------------------------------
# random test fields
# --------------------------------------------------------------------------

def random_radial_bump(grid: RadialGrid, rng: np.random.Generator, margin: float = 2.0) -> np.ndarray:
    """Smooth bump ``exp(-1/(1 - x^2))`` in ``t = log r`` with random centre, width and sign."""
    t = grid.t
    c = rng.uniform(t[0] + margin, t[-1] - margin)
    w = rng.uniform(0.3, 2.0)
    x = (t - c) / w
    inside = np.abs(x) < 1.0
    out = np.zeros_like(t)
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return rng.normal() * out


def random_planar_field(grid, rng: np.random.Generator, rmin: float, rmax: float = 1.0,
                        terms: int = 6) -> np.ndarray:
    """Sum of Gaussian blobs with log-uniform widths in ``[rmin, rmax]``; zero on the ring."""
    X, Y = grid.mesh()
    out = np.zeros((3,) + grid.shape)
    for _ in range(terms):
        c = rng.uniform(-1.0, 1.0, 2) * rng.choice([0.01, 0.1, 1.0])
        w = np.exp(rng.uniform(np.log(rmin), np.log(rmax)))
        out += rng.normal(size=(3, 1, 1)) * np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2) / (2.0 * w * w))
    out[:, 0, :] = out[:, -1, :] = 0.0
    out[:, :, 0] = out[:, :, -1] = 0.0
    return out


def random_tangent_perturbation(m0: Field2D, rng: np.random.Generator, rmin: float) -> np.ndarray:
    """Tangent field at ``m0`` with max-norm one."""
    phi = tangent_project(m0, random_planar_field(m0.grid, rng, rmin))
    return phi / np.max(np.abs(phi))
