"""Independent reference computations used to freeze expected values."""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_bvp
from scipy.special import k1


def profile_slope_bvp(h: float, R: float | None = None, r0_ratio: float = 1e-7) -> float:
    """Initial slope from a collocation solve of the co-angle equation in ``t = log r``.

    Unknown ``phi = pi - theta`` obeys ``phi_tt = sin(phi) cos(phi) + 2 r sin^2(phi) - h r^2 sin(phi)``
    with ``phi_t = phi`` at the inner end (``phi ~ s r``) and the modified Bessel tail at ``R``.
    """
    R = float(np.clip(30.0 / np.sqrt(h), 3.0, 100.0)) if R is None else R
    t0, t1 = np.log(r0_ratio * R), np.log(R)
    q = np.sqrt(h)

    def rhs(t, y):
        r = np.exp(t)
        phi, dphi = y
        sp_ = np.sin(phi)
        return np.vstack([dphi, sp_ * np.cos(phi) + 2.0 * r * sp_ * sp_ - h * r * r * sp_])

    def bc(ya, yb):
        # theta = pi - phi decays like K1(q r): theta_t / theta = q R K1'(qR)/K1(qR)
        ratio = -q * R * (k1(q * R * (1 + 1e-7)) - k1(q * R * (1 - 1e-7))) / (2e-7 * q * R * k1(q * R))
        theta, dtheta = np.pi - yb[0], -yb[1]
        return np.array([ya[1] - ya[0], dtheta + ratio * theta])

    t = np.linspace(t0, t1, 4000)
    r = np.exp(t)
    guess_theta = np.pi * np.exp(-q * r) * (1.0 + q * r)
    guess_theta = np.clip(guess_theta, 1e-12, np.pi - 1e-12)
    phi = np.pi - guess_theta
    y = np.vstack([phi, np.gradient(phi, t)])
    sol = solve_bvp(rhs, bc, t, y, tol=1e-9, max_nodes=400000)
    if not sol.success:
        raise RuntimeError(sol.message)
    return float(sol.sol(t0)[0] / np.exp(t0))


def thiele_closed_form(d: float, v, alpha: float, beta: float) -> np.ndarray:
    """Drift for ``D = d I``: ``c = (4 pi J' + alpha d)^{-1} (4 pi J' + beta d) v`` expanded by hand."""
    g = 4.0 * np.pi
    a, b = alpha * d, beta * d
    det = a * a + g * g
    vx, vy = v
    # A = [[a, g], [-g, a]], A^{-1} = [[a, -g], [g, a]] / det, B = [[b, g], [-g, b]]
    bx, by = b * vx + g * vy, -g * vx + b * vy
    return np.array([a * bx - g * by, g * bx + a * by]) / det
