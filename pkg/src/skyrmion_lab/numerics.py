"""Numerical kernels shared by the profile, energy, stability and dynamics code.

Everything here is a pure function of immutable inputs.  Radial quantities live
on a :class:`RadialGrid`; planar fields live on a tensor-product
:class:`Grid2D` whose coordinate lines may be graded towards the origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh


class NumericalFailure(RuntimeError):
    """A numerical procedure could not reach its target."""


# --------------------------------------------------------------------------
# radial grids and quadrature
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing nodes on ``(0, R]``.

    ``grading`` is ``"log"`` (geometric nodes, uniform in ``t = log r``) or
    ``"uniform"``.
    """

    r: np.ndarray
    grading: str = "log"

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        if r.ndim != 1 or r.size < 256:
            raise ValueError("radial grid needs at least 256 nodes")
        if r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise ValueError("radial nodes must be positive and strictly increasing")
        if r[0] > 1e-4 * r[-1]:
            raise ValueError("inner radius must satisfy r0 <= 1e-4 R")
        if self.grading not in ("log", "uniform"):
            raise ValueError(f"unknown grading {self.grading!r}")

    @classmethod
    def log_uniform(cls, R: float, n: int = 2048, r0_ratio: float = 1e-5) -> "RadialGrid":
        return cls(np.geomspace(r0_ratio * R, R, n), "log")

    @classmethod
    def uniform(cls, R: float, n: int = 2048, r0_ratio: float = 1e-5) -> "RadialGrid":
        return cls(np.linspace(r0_ratio * R, R, n), "uniform")

    @property
    def n(self) -> int:
        return self.r.size

    @property
    def R(self) -> float:
        return float(self.r[-1])

    @property
    def r0(self) -> float:
        return float(self.r[0])

    @property
    def t(self) -> np.ndarray:
        return np.log(self.r)

    @property
    def step(self) -> float:
        """Spacing in the natural coordinate (``log r`` or ``r``)."""
        x = self.t if self.grading == "log" else self.r
        return float((x[-1] - x[0]) / (self.n - 1))

    @property
    def max_spacing(self) -> float:
        return float(np.max(np.diff(self.r)))

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights in the natural coordinate, expressed for ``dr``."""
        w = np.full(self.n, self.step)
        w[0] = w[-1] = 0.5 * self.step
        if self.grading == "log":
            w = w * self.r
        return w

    def refined(self) -> "RadialGrid":
        """Same end points, twice the resolution (halved step)."""
        n = 2 * self.n - 1
        if self.grading == "log":
            return RadialGrid(np.geomspace(self.r0, self.R, n), "log")
        return RadialGrid(np.linspace(self.r0, self.R, n), "uniform")


def default_radius(h: float) -> float:
    """Truncation radius ``30/sqrt(h)`` clipped to ``[3, 100]``."""
    return float(np.clip(30.0 / np.sqrt(h), 3.0, 100.0))


def integrate_radial(values, grid: RadialGrid, weight: str = "r") -> float:
    """Integrate ``values * weight`` over ``[r0, R]``.

    On a log grid the trapezoid rule is applied in ``t = log r``; for integrands
    that are small at both ends this is spectrally accurate.
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite integrand")
    if weight == "r":
        values = values * grid.r
    elif weight not in ("1", 1):
        raise ValueError(f"weight must be '1' or 'r', got {weight!r}")
    return float(np.dot(grid.weights, values))


@lru_cache(maxsize=64)
def fd_weights(offsets: tuple, deriv: int) -> np.ndarray:
    """Finite-difference weights on integer ``offsets`` for the ``deriv``-th derivative."""
    x = np.asarray(offsets, dtype=float)
    V = np.vander(x, increasing=True).T
    rhs = np.zeros(len(x))
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(V, rhs)


def uniform_derivative(values, step: float, deriv: int = 1, order: int = 8) -> np.ndarray:
    """High-order derivative of samples on a uniform grid.

    Central stencils of the requested order in the interior, one-sided stencils
    of the same width at the ends.
    """
    u = np.asarray(values, dtype=float)
    n = u.size
    half = order // 2 + (1 if deriv > 1 else 0)
    width = 2 * half + 1
    if n < width:
        raise ValueError("too few samples for the requested stencil")
    out = np.empty_like(u)
    w = fd_weights(tuple(range(-half, half + 1)), deriv)
    out[half:n - half] = sum(w[k] * u[k:n - 2 * half + k] for k in range(width))
    for i in range(half):
        wl = fd_weights(tuple(range(-i, width - i)), deriv)
        out[i] = np.dot(wl, u[:width])
        wr = fd_weights(tuple(range(-(width - 1 - i), i + 1)), deriv)
        out[n - 1 - i] = np.dot(wr, u[n - width:])
    return out / step**deriv


def radial_derivative(values, grid: RadialGrid, order: int = 8) -> np.ndarray:
    """``d/dr`` of nodal values (via ``t = log r`` on log grids)."""
    if grid.grading == "log":
        return uniform_derivative(values, grid.step, 1, order) / grid.r
    return uniform_derivative(values, grid.step, 1, order)


# --------------------------------------------------------------------------
# banded symmetric generalized eigenproblems
# --------------------------------------------------------------------------

def _to_upper_banded(A: sp.spmatrix, bw: int) -> np.ndarray:
    A = sp.dia_matrix(A)
    n = A.shape[0]
    ab = np.zeros((bw + 1, n))
    for k in range(bw + 1):
        d = A.diagonal(k)
        ab[bw - k, k:] = d
    return ab


@dataclass(frozen=True, eq=False)
class BandedSymmetricPair:
    """Stiffness ``K`` and mass ``M`` of a symmetric generalized eigenproblem."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    bandwidth: int = field(init=False)

    def __post_init__(self):
        K = sp.csr_matrix(self.K, dtype=float)
        M = sp.csr_matrix(self.M, dtype=float)
        if K.shape != M.shape or K.shape[0] != K.shape[1]:
            raise ValueError("K and M must be square and of equal size")
        scale = max(abs(K).max(), 1e-300)
        if abs(K - K.T).max() > 1e-13 * scale:
            raise ValueError("stiffness matrix is not symmetric")
        if abs(M - M.T).max() > 1e-13 * max(abs(M).max(), 1e-300):
            raise ValueError("mass matrix is not symmetric")
        rows, cols = (K + M).nonzero()
        bw = int(np.max(np.abs(rows - cols))) if rows.size else 0
        if bw > 5:
            raise ValueError(f"bandwidth {bw} exceeds 5")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "bandwidth", bw)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def banded(self, which: str) -> np.ndarray:
        return _to_upper_banded(self.K if which == "K" else self.M, self.bandwidth)


def _cholesky_or_none(ab: np.ndarray):
    try:
        return sla.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError:
        return None


def smallest_eigenpairs(pair: BandedSymmetricPair, count: int):
    """The ``count`` algebraically smallest eigenpairs of ``K x = lambda M x``.

    A shift below the spectrum is located by attempting banded Cholesky
    factorizations of ``K - sigma M``; Lanczos iteration on the shifted inverse
    then delivers the wanted pairs.  Eigenvectors are M-orthonormal.
    """
    if not 1 <= count <= 6:
        raise ValueError("count must be between 1 and 6")
    n = pair.n
    if count >= n:
        raise ValueError("count must be smaller than the problem size")
    Mb = pair.banded("M")
    if _cholesky_or_none(Mb) is None:
        raise ValueError("invalid mass matrix")
    Kb = pair.banded("K")
    knorm = float(sp.linalg.norm(pair.K, 1))

    # Rayleigh quotient of a smooth vector bounds lambda_min from above.
    sigma = -1.0
    factor = None
    for _ in range(200):
        factor = _cholesky_or_none(Kb - sigma * Mb)
        if factor is not None:
            break
        sigma = 4.0 * sigma
    if factor is None:
        raise NumericalFailure("no shift below the spectrum found")

    if n <= 64:
        w, V = sla.eigh(pair.K.toarray(), pair.M.toarray(), subset_by_index=[0, count - 1])
    else:
        op = LinearOperator((n, n), matvec=lambda x: sla.cho_solve_banded((factor, False), x),
                            dtype=float)
        w, V = eigsh(pair.K, k=count, M=pair.M, sigma=sigma, which="LM", OPinv=op,
                     tol=0.0, v0=np.ones(n))
    order = np.argsort(w)
    w, V = w[order], V[:, order]

    # Rayleigh-Ritz clean-up in the computed subspace.
    Kr = V.T @ (pair.K @ V)
    Mr = V.T @ (pair.M @ V)
    w, Y = sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T))
    V = V @ Y
    out = []
    for lam, x in zip(w, V.T):
        resid = np.linalg.norm(pair.K @ x - lam * (pair.M @ x))
        if resid > 1e-10 * knorm:
            raise NumericalFailure(f"eigenpair residual {resid:.3e} too large")
        out.append((float(lam), x))
    return out


# --------------------------------------------------------------------------
# small dense solves
# --------------------------------------------------------------------------

def solve_2x2(A, b) -> np.ndarray:
    """Solve ``A x + b = 0`` exactly for a 2x2 system."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) < 1e-14 * float(np.sum(A * A)) or det == 0.0:
        raise np.linalg.LinAlgError("singular system")
    inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det
    return -(inv @ b)


# --------------------------------------------------------------------------
# planar tensor-product grids
# --------------------------------------------------------------------------

def _axis_nodes_uniform(L: float, n: int) -> np.ndarray:
    d = L / n
    return -0.5 * L + (np.arange(n) + 0.5) * d


def _axis_nodes_sinh(L: float, n: int, core: float) -> np.ndarray:
    big = np.arcsinh(0.5 * L / core)
    dxi = 2.0 * big / n
    xi = -big + (np.arange(n) + 0.5) * dxi
    return core * np.sinh(xi)


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Tensor-product planar grid; the outermost ring of nodes is the boundary.

    ``core`` is ``None`` for a uniform grid with spacing ``L/n``; otherwise the
    nodes follow ``x = core * sinh(xi)`` with ``xi`` uniform, which keeps the
    relative spacing roughly constant away from the centre.
    """

    x: np.ndarray
    y: np.ndarray
    core: float | None = None

    def __post_init__(self):
        for name in ("x", "y"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 1 or a.size < 5 or np.any(np.diff(a) <= 0):
                raise ValueError(f"{name} must be strictly increasing with >= 5 nodes")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def uniform(cls, L: float, n: int) -> "Grid2D":
        a = _axis_nodes_uniform(L, n)
        return cls(a, a.copy(), None)

    @classmethod
    def graded(cls, L: float, n: int, core: float) -> "Grid2D":
        a = _axis_nodes_sinh(L, n, core)
        return cls(a, a.copy(), core)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.size, self.y.size)

    @property
    def spacing(self) -> float:
        """Largest node spacing (the uniform ``Delta`` for uniform grids)."""
        return float(max(np.diff(self.x).max(), np.diff(self.y).max()))

    @property
    def min_spacing(self) -> float:
        return float(min(np.diff(self.x).min(), np.diff(self.y).min()))

    @property
    def side(self) -> tuple[float, float]:
        return (float(self.x[-1] - self.x[0]), float(self.y[-1] - self.y[0]))

    def _dual(self, a):
        w = np.zeros_like(a)
        w[1:-1] = 0.5 * (a[2:] - a[:-2])
        return w

    @property
    def wx(self) -> np.ndarray:
        return self._dual(self.x)

    @property
    def wy(self) -> np.ndarray:
        return self._dual(self.y)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights; zero on the boundary ring."""
        return np.outer(self.wx, self.wy)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def interior(self) -> tuple[slice, slice]:
        return (slice(1, -1), slice(1, -1))

    # -- difference operators (act on the trailing two axes) ---------------

    def dx(self, u: np.ndarray) -> np.ndarray:
        """Centred derivative in x at interior nodes, zero on the boundary ring."""
        out = np.zeros_like(u)
        d = (self.x[2:] - self.x[:-2])[:, None]
        out[..., 1:-1, 1:-1] = (u[..., 2:, 1:-1] - u[..., :-2, 1:-1]) / d
        return out

    def dy(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        d = (self.y[2:] - self.y[:-2])[None, :]
        out[..., 1:-1, 1:-1] = (u[..., 1:-1, 2:] - u[..., 1:-1, :-2]) / d
        return out

    def gradient_energy(self, u: np.ndarray) -> float:
        """Edge sum approximating ``int |grad u|^2`` (all components summed)."""
        hx = np.diff(self.x)[:, None]
        hy = np.diff(self.y)[None, :]
        ex = (u[..., 1:, 1:-1] - u[..., :-1, 1:-1]) ** 2 / hx * self.wy[None, 1:-1]
        ey = (u[..., 1:-1, 1:] - u[..., 1:-1, :-1]) ** 2 / hy * self.wx[1:-1, None]
        return float(np.sum(ex) + np.sum(ey))

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Five-point Laplacian; minus the weighted gradient of :meth:`gradient_energy` / 2."""
        out = np.zeros_like(u)
        hx = np.diff(self.x)
        hy = np.diff(self.y)
        fx = (u[..., 1:, 1:-1] - u[..., :-1, 1:-1]) / hx[:, None]
        fy = (u[..., 1:-1, 1:] - u[..., 1:-1, :-1]) / hy[None, :]
        out[..., 1:-1, 1:-1] = ((fx[..., 1:, :] - fx[..., :-1, :]) / self.wx[1:-1, None]
                                + (fy[..., :, 1:] - fy[..., :, :-1]) / self.wy[None, 1:-1])
        return out

    def integrate(self, u: np.ndarray) -> float:
        return float(np.sum(self.weights * u))

    def upwind_dx(self, u: np.ndarray, vx: float) -> np.ndarray:
        """Second-order upwind-biased x-derivative (interior nodes)."""
        return _upwind(u, self.x, vx, axis=-2)

    def upwind_dy(self, u: np.ndarray, vy: float) -> np.ndarray:
        return _upwind(u, self.y, vy, axis=-1)


def _upwind(u, coords, vel, axis):
    """Three-point backward difference along ``axis`` for transport at velocity ``vel``."""
    if vel == 0.0:
        return np.zeros_like(u)
    w = np.moveaxis(u, axis, -1)
    x = coords
    if vel < 0:
        # mirror so that the stencil always looks upstream
        w = w[..., ::-1]
        x = -x[::-1]
    n = x.size
    d = np.zeros(w.shape)
    d[..., 1] = (w[..., 1] - w[..., 0]) / (x[1] - x[0])
    i = np.arange(2, n)
    ha = x[i] - x[i - 1]
    hb = x[i - 1] - x[i - 2]
    c0 = (2 * ha + hb) / (ha * (ha + hb))
    c1 = -(ha + hb) / (ha * hb)
    c2 = ha / (hb * (ha + hb))
    d[..., 2:] = c0 * w[..., 2:] + c1 * w[..., 1:-1] + c2 * w[..., :-2]
    if vel < 0:
        d = -d[..., ::-1]
    out = np.moveaxis(d, -1, axis)
    out[..., 0, :] = 0.0
    out[..., -1, :] = 0.0
    out[..., :, 0] = 0.0
    out[..., :, -1] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class Field2D:
    """Three-vector field sampled on a :class:`Grid2D`; ``values`` has shape ``(3, nx, ny)``."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (3,) + self.grid.shape:
            raise ValueError(f"values must have shape (3, {self.grid.shape[0]}, {self.grid.shape[1]})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def unit_defect(self) -> float:
        """Largest deviation of ``|m|`` from one."""
        return float(np.max(np.abs(np.sqrt(np.sum(self.values**2, axis=0)) - 1.0)))

    @property
    def boundary_defect(self) -> float:
        """Largest deviation from ``e3`` on the boundary ring."""
        d = self.values - np.array([0.0, 0.0, 1.0])[:, None, None]
        ring = np.concatenate([d[:, 0, :], d[:, -1, :], d[:, :, 0], d[:, :, -1]], axis=1)
        return float(np.max(np.abs(ring)))

    def with_values(self, values) -> "Field2D":
        return Field2D(self.grid, values)
