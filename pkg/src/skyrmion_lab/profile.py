"""Polar profile of the axisymmetric skyrmion.

The profile solves

    theta'' + theta'/r - sin(theta) cos(theta)/r**2 + (2/r) sin(theta)**2 - h sin(theta) = 0

with ``theta(0) = pi`` and ``theta(inf) = 0``.  Internally everything is done in
``t = log r`` where the equation reads

    theta_tt = sin(theta) cos(theta) - 2 r sin(theta)**2 + h r**2 sin(theta),

which is regular at the origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve
from scipy.special import k1e

from .numerics import (NumericalFailure, RadialGrid, default_radius, fd_weights, radial_derivative,
                       uniform_derivative)

FD_ORDER = 8


class ProfileError(NumericalFailure):
    """Shooting or the Newton polish failed."""


@dataclass(frozen=True, eq=False)
class ProfileSolution:
    """Converged profile on a radial grid.

    ``slope`` is ``s = -theta'(0+)``; ``tail_rate`` is the least-squares slope
    of ``log(sqrt(r) theta)`` on the far field and ``tail_amplitude`` its
    prefactor.
    """

    h: float
    grid: RadialGrid
    theta: np.ndarray
    theta_prime: np.ndarray
    slope: float
    tail_amplitude: float
    tail_rate: float
    residual: float = float("nan")
    co_theta: np.ndarray | None = None

    def __post_init__(self):
        if self.co_theta is None:
            object.__setattr__(self, "co_theta", np.pi - np.asarray(self.theta, dtype=float))
        for name in ("theta", "theta_prime", "co_theta"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def theta_tt(self) -> np.ndarray:
        """Second derivative in ``t = log r``."""
        return _t_second(self.theta, self.grid)

    def theta_at(self, r) -> np.ndarray:
        """Interpolate the profile at arbitrary radii.

        A cubic spline in ``log r`` is used on the grid, the series expansion
        below ``r0`` and zero beyond ``R``.
        """
        r = np.asarray(r, dtype=float)
        spline = self._spline
        out = np.zeros_like(r)
        inner = r < self.grid.r0
        mid = (~inner) & (r <= self.grid.R)
        out[mid] = spline(np.log(r[mid]))
        c = series_coefficient(self.slope, self.h)
        ri = r[inner]
        out[inner] = np.pi - (self.slope * ri + c * ri**3)
        return out

    @cached_property
    def _spline(self):
        if self.grid.grading == "log":
            return CubicSpline(self.grid.t, self.theta,
                               bc_type=((1, self.theta_prime[0] * self.r[0]),
                                        (1, self.theta_prime[-1] * self.r[-1])))
        base = CubicSpline(self.r, self.theta,
                           bc_type=((1, self.theta_prime[0]), (1, self.theta_prime[-1])))
        return lambda t: base(np.exp(t))

    @cached_property
    def sin_theta(self) -> np.ndarray:
        """``sin(theta)``, evaluated through ``pi - theta`` in the core for full precision."""
        return np.where(self.theta > 0.5 * np.pi, np.sin(self.co_theta), np.sin(self.theta))

    def sin_theta_over_r(self) -> np.ndarray:
        return self.sin_theta / self.r

    @property
    def core_radius(self) -> float:
        """Radius where ``theta = pi/2``."""
        return crossing_radius(self, 0.5 * np.pi)


@dataclass(frozen=True)
class EstimateViolation:
    estimate: str
    node: int
    radius: float
    margin: float


@dataclass(frozen=True)
class ProfileDiagnostics:
    """Grid minima of the profile estimates and the asymptotic mismatches."""

    max_residual: float
    cos_margin: float
    sin_margin: float
    h_margin: float
    core_radius: float
    core_bound: float
    slope_mismatch: float
    tail_mismatch: float
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


# --------------------------------------------------------------------------
# equation pieces
# --------------------------------------------------------------------------

def series_coefficient(s: float, h: float) -> float:
    """Cubic coefficient ``c`` of ``pi - theta = s r + c r**3`` near the origin."""
    return (2.0 * s * s - h * s - (2.0 / 3.0) * s**3) / 8.0


def _series_dc(s: float, h: float) -> float:
    return (4.0 * s - h - 2.0 * s * s) / 8.0


def _forcing(theta, r, h):
    st = np.sin(theta)
    return st * np.cos(theta) - 2.0 * r * st * st + h * r * r * st


def _forcing_dtheta(theta, r, h):
    st, ct = np.sin(theta), np.cos(theta)
    return np.cos(2.0 * theta) - 4.0 * r * st * ct + h * r * r * ct


def _t_second(values, grid: RadialGrid) -> np.ndarray:
    if grid.grading == "log":
        return uniform_derivative(values, grid.step, 2, FD_ORDER)
    d1 = uniform_derivative(values, grid.step, 1, FD_ORDER)
    d2 = uniform_derivative(values, grid.step, 2, FD_ORDER)
    return grid.r**2 * d2 + grid.r * d1


def ode_residual(profile: ProfileSolution, scaled: bool = False) -> np.ndarray:
    """Left-hand side of the profile equation at the nodes.

    Interior nodes use centred high-order differences; the two end nodes are
    reported as zero.  With ``scaled=True`` the residual is multiplied by
    ``r**2`` (the log-coordinate form), which removes the roundoff
    amplification near the origin.
    """
    grid = profile.grid
    th = np.asarray(profile.theta, dtype=float)
    ph = np.asarray(profile.co_theta, dtype=float)
    res = np.where(th > 0.5 * np.pi,
                   _forcing_co(ph, grid.r, profile.h) - _t_second(ph, grid),
                   _t_second(th, grid) - _forcing(th, grid.r, profile.h))
    if not scaled:
        res = res / grid.r**2
    res[0] = res[-1] = 0.0
    return res


# --------------------------------------------------------------------------
# shooting
# --------------------------------------------------------------------------

def _log_rhs(t, y, h):
    r = np.exp(t)
    return [y[1], _forcing(y[0], r, h)]


def _start_radius(s: float, R: float, grid_r0: float) -> float:
    return min(grid_r0, 1e-3 / max(s, 1e-300), 1e-5 * R)


def _shoot(s: float, h: float, R: float, r_start: float, dense: bool = False):
    c = series_coefficient(s, h)
    phi = s * r_start + c * r_start**3
    phi_t = s * r_start + 3.0 * c * r_start**3
    y0 = [np.pi - phi, -phi_t]

    def crossed_zero(t, y, h):
        return y[0]

    def turned_up(t, y, h):
        return y[1]

    crossed_zero.terminal = True
    crossed_zero.direction = -1
    turned_up.terminal = True
    turned_up.direction = 1
    sol = solve_ivp(_log_rhs, (np.log(r_start), np.log(R)), y0, args=(h,),
                    method="DOP853", rtol=1e-13, atol=1e-15,
                    events=[crossed_zero, turned_up], dense_output=dense)
    if sol.t_events[0].size:
        outcome = "overshoot"
    elif sol.t_events[1].size:
        outcome = "undershoot" if sol.y_events[1][0][0] > 1e-3 else "late_undershoot"
    else:
        th, tht = sol.y[0, -1], sol.y[1, -1]
        outcome = "decay" if th < 1e-6 and tht < 0 else "undershoot"
    return outcome, sol


def classify_slope(s: float, h: float, R: float | None = None) -> str:
    """Classify a trial slope as ``overshoot``, ``undershoot`` or ``decay``.

    Overshoot: theta crosses zero.  Undershoot: theta' changes sign (or theta
    fails to decay by ``R``).  Decay: theta < 1e-6 with theta' < 0 at ``R``.
    """
    R = default_radius(h) if R is None else R
    outcome, _ = _shoot(s, h, R, _start_radius(s, R, 1e-5 * R))
    return "undershoot" if outcome == "late_undershoot" else outcome


def _bracket(h: float, R: float, r0: float):
    lo, hi = h / 8.0, 2.0 * h
    cls = lambda s: _shoot(s, h, R, _start_radius(s, R, r0))[0]  # noqa: E731
    if cls(lo) == "overshoot":
        raise ProfileError("shooting bracket failure")
    while cls(hi) != "overshoot":
        lo, hi = hi, 2.0 * hi
        if hi > 64.0 * h:
            raise ProfileError("shooting bracket failure")
    return lo, hi


def shoot_slope(h: float, R: float, r0: float) -> float:
    """Bisect the connecting slope to a bracket width of ``1e-12 h``."""
    lo, hi = _bracket(h, R, r0)
    while hi - lo > 1e-12 * h:
        mid = 0.5 * (lo + hi)
        if _shoot(mid, h, R, _start_radius(mid, R, r0))[0] == "overshoot":
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ShootingScan:
    """Outcome of a slope scan; ``transitions`` counts classification changes."""

    h: float
    samples: tuple

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    @property
    def transitions(self) -> int:
        seq = [o for _, o in self.samples if o != "decay"]
        return int(sum(a != b for a, b in zip(seq, seq[1:])))

    @property
    def monotone(self) -> bool:
        return self.transitions <= 1

    @property
    def report(self) -> str:
        if self.monotone:
            return f"{self.transitions} transition(s)"
        return f"non-monotone shooting map: {self.transitions} transitions"


def shooting_scan(h: float, s_range: tuple[float, float], samples: int = 64,
                  R: float | None = None) -> ShootingScan:
    """Classify ``samples`` evenly spaced trial slopes in ``s_range``."""
    if samples < 32:
        raise ValueError("samples must be at least 32")
    lo, hi = s_range
    if not 0 < lo < hi:
        raise ValueError("s_range must be an increasing interval of positive slopes")
    out = tuple((float(s), classify_slope(float(s), h, R)) for s in np.linspace(lo, hi, samples))
    return ShootingScan(float(h), out)


# --------------------------------------------------------------------------
# Newton polish on the full grid
# --------------------------------------------------------------------------

def _slope_from_node(phi0: float, r0: float, h: float, s_guess: float) -> float:
    s = s_guess
    for _ in range(50):
        c = series_coefficient(s, h)
        f = s * r0 + c * r0**3 - phi0
        df = r0 + _series_dc(s, h) * r0**3
        step = f / df
        s -= step
        if abs(step) <= 1e-15 * abs(s):
            break
    return s


def _second_matrix(n: int, step: float) -> sp.csr_matrix:
    """Sparse high-order second-derivative matrix on a uniform grid."""
    half = FD_ORDER // 2 + 1
    width = 2 * half + 1
    rows, cols, vals = [], [], []
    wc = fd_weights(tuple(range(-half, half + 1)), 2)
    for i in range(n):
        if i < half:
            offs = tuple(range(-i, width - i))
        elif i >= n - half:
            offs = tuple(range(-(width - 1 - (n - 1 - i)), n - i))
        else:
            offs = None
        w = wc if offs is None else fd_weights(offs, 2)
        base = range(-half, half + 1) if offs is None else offs
        for o, wk in zip(base, w):
            rows.append(i)
            cols.append(i + o)
            vals.append(wk)
    return sp.csr_matrix((np.asarray(vals) / step**2, (rows, cols)), shape=(n, n))


def _initial_guess(h: float, grid: RadialGrid, s: float) -> np.ndarray:
    R, r = grid.R, grid.r
    _, sol = _shoot(s, h, R, _start_radius(s, R, grid.r0), dense=True)
    t_end = sol.t[-1]
    th_path = sol.y[0]
    below = np.nonzero(th_path < 1e-6)[0]
    t_splice = sol.t[below[0]] if below.size else sol.t[int(np.argmin(np.where(sol.y[1] < 0, th_path, np.inf)))]
    t_splice = min(t_splice, t_end)
    r_splice = np.exp(t_splice)
    th_splice = float(sol.sol(t_splice)[0])
    q = np.sqrt(h)
    theta = np.empty_like(r)
    inside = r <= r_splice
    ts = np.clip(np.log(r[inside]), sol.t[0], t_end)
    theta[inside] = sol.sol(ts)[0]
    ro = r[~inside]
    theta[~inside] = th_splice * k1e(q * ro) / k1e(q * r_splice) * np.exp(-q * (ro - r_splice))
    return theta


def _forcing_co(phi, r, h):
    """Right-hand side of the log-form equation written for ``phi = pi - theta``."""
    sp_ = np.sin(phi)
    return sp_ * np.cos(phi) + 2.0 * r * sp_ * sp_ - h * r * r * sp_


def _forcing_co_dphi(phi, r, h):
    sp_, cp = np.sin(phi), np.cos(phi)
    return np.cos(2.0 * phi) + 4.0 * r * sp_ * cp - h * r * r * cp


def _polish(h: float, grid: RadialGrid, theta: np.ndarray, s: float, max_iter: int = 50):
    """Newton iteration on the full grid.

    The unknown is ``phi = pi - theta`` where ``theta > pi/2`` and ``theta``
    elsewhere, so that both the core and the tail keep full relative precision.
    Returns ``(theta, phi, s)``.
    """
    if grid.grading != "log":
        raise ValueError("the Newton polish requires a log-graded grid")
    n, r, dt = grid.n, grid.r, grid.step
    D2 = _second_matrix(n, dt)
    q = np.sqrt(h)
    rho = k1e(q * r[-1]) / k1e(q * r[-2]) * np.exp(-q * (r[-1] - r[-2]))
    r0 = r[0]
    e1 = np.exp(dt)
    geo = r0**3 * e1 * (e1 * e1 - 1.0)
    inner = theta > 0.5 * np.pi
    sigma = np.where(inner, -1.0, 1.0)
    u = np.where(inner, np.pi - theta, theta)
    best = np.inf
    stalled = 0
    for _ in range(max_iter):
        th = np.where(inner, np.pi - u, u)
        ph = np.where(inner, u, np.pi - u)
        F = np.where(inner, D2 @ ph - _forcing_co(ph, r, h), D2 @ th - _forcing(th, r, h))
        dF = np.where(inner, _forcing_co_dphi(ph, r, h), _forcing_dtheta(th, r, h))
        s = _slope_from_node(ph[0], r0, h, s)
        c = series_coefficient(s, h)
        F[0] = ph[1] - e1 * ph[0] - c * geo
        F[-1] = th[-1] - rho * th[-2]
        J = (sp.diags(sigma) @ D2 @ sp.diags(sigma) - sp.diags(dF)).tolil()
        J[0, :] = 0.0
        dsd0 = 1.0 / (r0 + _series_dc(s, h) * r0**3)
        J[0, 0] = -e1 - _series_dc(s, h) * geo * dsd0
        J[0, 1] = 1.0 if inner[1] else -1.0
        J[-1, :] = 0.0
        J[-1, -1] = 1.0
        J[-1, -2] = -rho
        delta = spsolve(J.tocsc(), -F)
        u = u + delta
        rel = float(np.max(np.abs(delta) / np.maximum(np.abs(u), 1e-300)))
        if rel < 1e-13:
            break
        if rel < best:
            best, stalled = rel, 0
        else:
            stalled += 1
            if stalled >= 3:
                break
    th = np.where(inner, np.pi - u, u)
    ph = np.where(inner, u, np.pi - u)
    s = _slope_from_node(ph[0], r0, h, s)
    return th, ph, s


def _tail_fit(r, theta):
    mask = (theta > 1e-12) & (theta < 1e-3)
    if mask.sum() < 8:
        return float("nan"), float("nan")
    y = np.log(np.sqrt(r[mask]) * theta[mask])
    rate, intercept = np.polyfit(r[mask], y, 1)
    return float(np.exp(intercept)), float(rate)


def default_grid(h: float) -> RadialGrid:
    """Log grid with ``r0 = 1e-8 R`` and 4096 nodes on ``(0, default_radius(h)]``."""
    return RadialGrid.log_uniform(default_radius(h), 4096, 1e-8)


def solve_profile(h: float, grid: RadialGrid | None = None, tol: float = 1e-8) -> ProfileSolution:
    """Connecting profile for field strength ``h``.

    Shooting (bisection on the initial slope) supplies a starting guess that
    is then polished by Newton iteration on the full grid with a high-order
    difference discretisation.  Convergence is declared when the log-form
    residual ``r**2 * LHS`` is at most ``tol * h`` at every interior node.
    """
    if not h > 1:
        raise ValueError("h must exceed 1")
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    grid = default_grid(h) if grid is None else grid
    s0 = shoot_slope(h, grid.R, grid.r0)
    theta0 = _initial_guess(h, grid, s0)
    theta, phi, s = _polish(h, grid, theta0, s0)
    inner = theta > 0.5 * np.pi
    theta_prime = np.where(inner, -radial_derivative(phi, grid, FD_ORDER),
                           radial_derivative(theta, grid, FD_ORDER))
    amp, rate = _tail_fit(grid.r, theta)
    prof = ProfileSolution(float(h), grid, theta, theta_prime, float(s), amp, rate, co_theta=phi)
    res = float(np.max(np.abs(ode_residual(prof, scaled=True))))
    if not np.isfinite(res) or res > tol * h:
        raise ProfileError("no convergence")
    return ProfileSolution(float(h), grid, theta, theta_prime, float(s), amp, rate, res, phi)


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------

def crossing_radius(profile: ProfileSolution, level: float) -> float:
    """Radius where the decreasing profile passes ``level``."""
    th = profile.theta
    i = int(np.nonzero(th < level)[0][0])
    if i == 0:
        return float(profile.r[0])
    return float(brentq(lambda x: profile.theta_at(np.array([x]))[0] - level,
                        profile.r[i - 1], profile.r[i], xtol=1e-15))


def verify_profile(profile: ProfileSolution) -> ProfileDiagnostics:
    """Evaluate the three pointwise estimates and the core-radius bound.

    Violations are collected into ``violations`` (estimate, worst node,
    margin) rather than raised, so that small fields can be explored.
    """
    r, th, dth, h = profile.r, profile.theta, profile.theta_prime, profile.h
    st = profile.sin_theta
    cos_expr = 1.5 - np.abs(np.cos(th) - r * st)
    sin_expr = r * r * dth * dth - st * st
    h_expr = h - 1.5 * st / r
    rstar = profile.core_radius
    bound = 2.0 / np.sqrt(h - 1.0)
    violations = []
    for name, expr, slack in (("theta_cos", cos_expr, 0.0), ("theta_sin", sin_expr, -1e-10),
                              ("theta_h", h_expr, 0.0)):
        i = int(np.argmin(expr))
        worst = float(expr[i])
        if (worst <= 0.0 and slack == 0.0) or worst < slack:
            violations.append(EstimateViolation(name, i, float(r[i]), worst))
    if not rstar < bound:
        violations.append(EstimateViolation("core_radius", int(np.argmin(np.abs(th - np.pi / 2))),
                                            rstar, bound - rstar))
    q = np.sqrt(h)
    return ProfileDiagnostics(
        max_residual=float(np.max(np.abs(ode_residual(profile)))),
        cos_margin=float(cos_expr.min()),
        sin_margin=float(sin_expr.min()),
        h_margin=float(h_expr.min()),
        core_radius=rstar,
        core_bound=float(bound),
        slope_mismatch=abs(profile.slope - h / 2) / (h / 2),
        tail_mismatch=abs(-profile.tail_rate - q) / q,
        violations=tuple(violations),
    )
