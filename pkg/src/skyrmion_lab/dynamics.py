"""Current-driven motion: Thiele relation and Landau-Lifshitz-Gilbert stepping.

The equation of motion is

    dm/dt + (v . grad) m = m x [alpha dm/dt + beta (v . grad) m - h_eff(m)].

With ``u = P_m (v . grad) m`` and ``b = -u + beta m x u - m x h_eff`` it is
equivalent to the explicit form ``(1 + alpha^2) dm/dt = b + alpha m x b``
(cross the equation with ``m`` and eliminate ``m x dm/dt``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .energy import charge_density, effective_field, tension, total_energy
from .numerics import Field2D, solve_2x2
from .profile import ProfileSolution

# epsilon_{12} = +1; with the counter-clockwise perp (a, b) -> (-b, a) the
# balance 4 pi (v - c)^perp = D (beta v - alpha c) becomes
# (4 pi EPS + alpha D) c = (4 pi EPS + beta D) v.
EPS = np.array([[0.0, 1.0], [-1.0, 0.0]])


def perp(a) -> np.ndarray:
    """Counter-clockwise quarter turn ``(a, b) -> (-b, a)``."""
    a = np.asarray(a, float)
    return np.array([-a[1], a[0]])


@dataclass(frozen=True, eq=False)
class ThieleResult:
    v: np.ndarray
    alpha: float
    beta: float
    D: np.ndarray
    A: np.ndarray
    c: np.ndarray
    hall_angle: float
    det: float

    def to_json(self) -> dict:
        return {"v": self.v.tolist(), "alpha": self.alpha, "beta": self.beta,
                "D": self.D.tolist(), "c": self.c.tolist(), "hall_angle": self.hall_angle,
                "det": self.det}


def signed_angle(a, b) -> float:
    """Angle from ``a`` to ``b`` (counter-clockwise positive)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b))


def thiele_from_tensor(D, v, alpha: float, beta: float) -> ThieleResult:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    D = np.asarray(D, float)
    v = np.asarray(v, float)
    A = 4.0 * np.pi * EPS + alpha * D
    rhs = (4.0 * np.pi * EPS + beta * D) @ v
    c = solve_2x2(A, -rhs) if np.any(v) else np.zeros(2)
    det = float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    hall = signed_angle(v, c) if np.any(v) else 0.0
    return ThieleResult(v, float(alpha), float(beta), D, A, c, hall, det)


def solve_thiele(profile: ProfileSolution, v, alpha: float, beta: float) -> ThieleResult:
    """Drift velocity of the skyrmion under spin velocity ``v``."""
    from .energy import dissipative_tensor

    return thiele_from_tensor(dissipative_tensor(profile), v, alpha, beta)


# --------------------------------------------------------------------------
# LLG
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LLGState:
    field: Field2D
    t: float
    h: float
    alpha: float
    beta: float
    v: tuple = (0.0, 0.0)
    energy: float = float("nan")
    center: tuple = (float("nan"), float("nan"))
    energy_trace: tuple = field(default_factory=tuple)


class UnstableStep(RuntimeError):
    pass


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _advection(field: Field2D, v) -> np.ndarray:
    g, m = field.grid, field.values
    vx, vy = v
    out = np.zeros_like(m)
    if vx:
        out += vx * g.upwind_dx(m, vx)
    if vy:
        out += vy * g.upwind_dy(m, vy)
    return out


def llg_rhs(field: Field2D, h: float, alpha: float, beta: float, v=(0.0, 0.0)) -> np.ndarray:
    """``dm/dt`` from the explicit form; zero on the boundary ring."""
    m = field.values
    he = effective_field(field, h)
    u = _advection(field, v)
    u = u - np.sum(u * m, axis=0) * m
    b = -u + beta * _cross(m, u) - _cross(m, he)
    out = (b + alpha * _cross(m, b)) / (1.0 + alpha * alpha)
    out[:, 0, :] = out[:, -1, :] = 0.0
    out[:, :, 0] = out[:, :, -1] = 0.0
    return out


def llg_residual(before: Field2D, after: Field2D, dt: float, h: float, alpha: float, beta: float,
                 v=(0.0, 0.0)) -> float:
    """Max-norm residual of the implicit equation at the midpoint of a step.

    The transport term is projected onto the tangent plane as in :func:`llg_rhs`;
    its normal part is a discretisation artefact of size ``O(|v| Delta^2)``.
    """
    mid = before.with_values(0.5 * (before.values + after.values))
    dmdt = (after.values - before.values) / dt
    u = _advection(mid, v)
    u = u - np.sum(u * mid.values, axis=0) * mid.values / np.sum(mid.values**2, axis=0)
    he = effective_field(mid, h)
    res = dmdt + u - _cross(mid.values, alpha * dmdt + beta * u - he)
    return float(np.max(np.abs(res[:, 1:-1, 1:-1])))


def stable_dt(field: Field2D, h: float, safety: float = 0.5) -> float:
    """Step size ``safety * 2.8 * Delta_min^2 / (8 + (1 + h) Delta_min^2)``."""
    d = field.grid.min_spacing
    return safety * 2.8 * d * d / (8.0 + (1.0 + h) * d * d)


def llg_step(state: LLGState, dt: float, with_energy: bool = True) -> LLGState:
    """One classical RK4 step followed by renormalisation to unit length."""
    f0 = state.field
    args = (state.h, state.alpha, state.beta, state.v)
    m = f0.values
    k1 = llg_rhs(f0, *args)
    k2 = llg_rhs(f0.with_values(m + 0.5 * dt * k1), *args)
    k3 = llg_rhs(f0.with_values(m + 0.5 * dt * k2), *args)
    k4 = llg_rhs(f0.with_values(m + dt * k3), *args)
    new = m + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    norm = np.sqrt(np.sum(new * new, axis=0))
    if not np.all(np.isfinite(norm)) or np.max(np.abs(norm - 1.0)) > 1e-6:
        raise UnstableStep("unstable step, reduce dt")
    nf = f0.with_values(new / norm)
    energy = total_energy(nf, state.h) if with_energy else float("nan")
    trace = state.energy_trace + (energy,) if with_energy else state.energy_trace
    return replace(state, field=nf, t=state.t + dt, energy=energy, energy_trace=trace)


def track_center(field: Field2D) -> np.ndarray:
    """Centroid of the topological charge density."""
    g = field.grid
    q = charge_density(field)
    total = g.integrate(q)
    if abs(total) < 0.5 * 4.0 * np.pi:
        raise ValueError("no skyrmion present")
    X, Y = g.mesh()
    return np.array([g.integrate(X * q), g.integrate(Y * q)]) / total


def traveling_residual(field: Field2D, c, v, alpha: float, beta: float, h: float) -> float:
    """``L^2`` norm of ``-tau(m) + m x [(v - c) . grad m] + (beta v - alpha c) . grad m``."""
    g, m = field.grid, field.values
    c, v = np.asarray(c, float), np.asarray(v, float)
    d1, d2 = g.dx(m), g.dy(m)
    w = v - c
    z = beta * v - alpha * c
    F = (-tension(field, h) + _cross(m, w[0] * d1 + w[1] * d2)
         + z[0] * d1 + z[1] * d2)
    return float(np.sqrt(g.integrate(np.sum(F * F, axis=0))))


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    center: np.ndarray
    energy: np.ndarray
    charge: np.ndarray
    final: LLGState

    def drift(self, start_fraction: float = 0.5) -> np.ndarray:
        """Least-squares velocity of the centre over the late part of the run."""
        mask = self.t >= self.t[0] + start_fraction * (self.t[-1] - self.t[0])
        A = np.vstack([self.t[mask], np.ones(mask.sum())]).T
        coef, *_ = np.linalg.lstsq(A, self.center[mask], rcond=None)
        return coef[0]


def simulate(initial: Field2D, h: float, alpha: float, beta: float, v, T: float, dt: float,
             record_every: int = 10, energy_every_step: bool = False) -> Trajectory:
    """Integrate up to time ``T`` and record centre, energy and charge."""
    from .energy import topological_charge

    state = LLGState(initial, 0.0, float(h), float(alpha), float(beta), tuple(map(float, v)),
                     total_energy(initial, h))
    steps = int(round(T / dt))
    ts, cs, es, qs = [0.0], [track_center(initial)], [state.energy], [topological_charge(initial)]
    for n in range(1, steps + 1):
        record = n % record_every == 0 or n == steps
        state = llg_step(state, dt, with_energy=energy_every_step or record)
        if not energy_every_step:
            state = replace(state, energy_trace=())
        if record:
            ts.append(state.t)
            cs.append(track_center(state.field))
            es.append(state.energy)
            qs.append(topological_charge(state.field))
    return Trajectory(np.array(ts), np.array(cs), np.array(es), np.array(qs), state)
