"""Uniform grid on (0, ell) with the weight x, weighted norms, and sharp constants.

Nodes are x_i = i h, i = 0..n. Weighted integrals use finite-volume dual-cell
weights m_i = int_{cell_i} x dx, with cells [x_i - h/2, x_i + h/2] clipped to
[0, ell]. The singular node x = 0 therefore carries the weight h^2/8. Gradients
live on cells [x_i, x_{i+1}] with weights x_{i+1/2} h, which makes the discrete
``||u_x||_H^2`` the exact weighted P1 stiffness form.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

DEFAULT_SEED = 20240607


@dataclass(frozen=True)
class Grid:
    ell: float
    n: int

    def __post_init__(self):
        if not self.ell > 0:
            raise ValueError("grid length ell must be positive")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError("grid needs n >= 8 cells")

    @property
    def h(self) -> float:
        return self.ell / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @cached_property
    def weights(self) -> np.ndarray:
        h = self.h
        w = self.x * h
        w[0] = h * h / 8.0
        w[-1] = self.ell * h / 2.0 - h * h / 8.0
        return w

    @cached_property
    def x_mid(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def cell_weights(self) -> np.ndarray:
        return self.x_mid * self.h

    @cached_property
    def free_weight_sum(self) -> float:
        return float(self.weights[:-1].sum())

    def integrate(self, f) -> float:
        """Quadrature of int_0^ell x f(x) dx."""
        return float(np.dot(self.weights, f))

    def field(self, func) -> np.ndarray:
        return np.asarray(func(self.x), dtype=float)


def _check(grid, *fields):
    for f in fields:
        if np.shape(f) != (grid.n + 1,):
            raise ValueError(f"field of shape {np.shape(f)} does not match grid with {grid.n + 1} nodes")


def weighted_norm_p(grid: Grid, u, p: float = 2.0) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    _check(grid, u)
    return grid.integrate(np.abs(u) ** p) ** (1.0 / p)


def weighted_inner(grid: Grid, u, v) -> float:
    _check(grid, u, v)
    return grid.integrate(np.asarray(u) * np.asarray(v))


def norm_H2(grid: Grid, u) -> float:
    return weighted_inner(grid, u, u)


def power_integral(grid: Grid, u, p: float) -> float:
    """int x |u|^p dx."""
    return grid.integrate(np.abs(u) ** p)


def cell_gradient(grid: Grid, u) -> np.ndarray:
    return np.diff(u) / grid.h


def gradient_norm2(grid: Grid, u) -> float:
    """||u_x||_H^2 = sum over cells of x_{i+1/2} h ((u_{i+1}-u_i)/h)^2."""
    du = cell_gradient(grid, u)
    return float(np.dot(grid.cell_weights, du * du))


def derivative(grid: Grid, u) -> np.ndarray:
    """Node values of u_x: centred inside, second-order one-sided at both ends."""
    _check(grid, u)
    u = np.asarray(u, dtype=float)
    h = grid.h
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    du[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    du[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return du


def project_mean_zero(grid: Grid, u) -> np.ndarray:
    """Remove the weighted mean along phi = ell - x, which vanishes at x = ell."""
    _check(grid, u)
    u = np.asarray(u, dtype=float)
    phi = grid.ell - grid.x
    mean = grid.integrate(u)
    scale = grid.integrate(np.abs(u))
    if mean == 0.0 or abs(mean) <= 1e-15 * scale:
        return u.copy()
    return u - (mean / grid.integrate(phi)) * phi


def mean_residual(grid: Grid, u) -> float:
    return grid.integrate(u)


# --------------------------------------------------------------------------
# stiffness on the free nodes 0..n-1 (u_n = 0)


def _stiffness_banded(grid: Grid) -> np.ndarray:
    """Upper-banded storage of K for scipy.linalg.solve_banded, l = u = 1."""
    n, h = grid.n, grid.h
    k = grid.x_mid / h  # x_{i+1/2}/h for cells i = 0..n-1
    diag = k.copy()
    diag[1:] += k[:-1]
    off = -k[:-1]
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return ab


def _stiffness_solve(grid: Grid, ab, rhs):
    return solve_banded((1, 1), ab, rhs)


class ConvergenceError(RuntimeError):
    pass


def estimate_Cp(grid: Grid, tol: float = 1e-13, max_iter: int = 10_000) -> float:
    """Best discrete constant in ||v||_H^2 <= C_p ||v_x||_H^2 over v(ell) = 0.

    Inverse iteration for the smallest eigenvalue of K v = lambda M v; C_p = 1/lambda.
    """
    ab = _stiffness_banded(grid)
    m = grid.weights[:-1]
    v = np.ones(grid.n)
    rq_old = 0.0
    for _ in range(max_iter):
        w = _stiffness_solve(grid, ab, m * v)
        v = w / np.sqrt(np.dot(m * w, w))
        full = np.append(v, 0.0)
        rq = np.dot(m * v, v) / gradient_norm2(grid, full)
        if abs(rq - rq_old) <= tol * rq:
            return float(rq)
        rq_old = rq
    raise ConvergenceError("inverse iteration for C_p did not converge")


def random_v0_field(grid: Grid, rng: np.random.Generator, modes: int = 8) -> np.ndarray:
    """Smooth random field vanishing at x = ell: random cosine series."""
    k = np.arange(modes)
    coef = rng.normal(size=modes) / (1.0 + k)
    xs = grid.x / grid.ell
    return np.cos(np.outer(xs, (k + 0.5) * np.pi)) @ coef


def embedding_ratio(grid: Grid, v, p: float) -> float:
    """int x |v|^p / ||v_x||_H^p."""
    return power_integral(grid, v, p) / gradient_norm2(grid, v) ** (p / 2.0)


def resolve_seed(seed: int | None = None) -> int:
    env = os.environ.get("VISCOWELL_SEED")
    if env is not None:
        return int(env)
    return DEFAULT_SEED if seed is None else int(seed)


def estimate_Cstar(grid: Grid, p: float, seed: int | None = None, starts: int = 16,
                   tol: float = 1e-12, max_iter: int = 5000) -> float:
    """Estimate sup int x|v|^p / ||v_x||_H^p over v(ell) = 0.

    Multi-start ascent on the unit K-sphere. Each step moves to the point of the
    sphere maximising the linearisation of the convex numerator,
    v <- K^{-1} grad / ||.||_K, which never decreases the ratio.
    """
    if not (2.0 < p < 4.0):
        raise ValueError(f"p={p} outside (2, 4)")
    rng = np.random.default_rng(resolve_seed(seed))
    ab = _stiffness_banded(grid)
    m = grid.weights[:-1]
    best = 0.0
    for _ in range(starts):
        v = np.append(random_v0_field(grid, rng)[:-1], 0.0)
        ratio = embedding_ratio(grid, v, p)
        for _ in range(max_iter):
            grad = m * np.abs(v[:-1]) ** (p - 2.0) * v[:-1]
            w = np.append(_stiffness_solve(grid, ab, grad), 0.0)
            v = w / np.sqrt(gradient_norm2(grid, w))
            new = embedding_ratio(grid, v, p)
            if abs(new - ratio) <= tol * new:
                ratio = new
                break
            ratio = new
        else:
            raise ConvergenceError("C_* ascent did not converge")
        best = max(best, ratio)
    return float(best)


# --------------------------------------------------------------------------
# CSV import / export


def write_field_csv(path, grid: Grid, u) -> None:
    _check(grid, u)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for xi, ui in zip(grid.x, u):
            w.writerow([repr(float(xi)), repr(float(ui))])


def read_field_csv(path, grid: Grid | None = None) -> np.ndarray:
    """Read a two-column (x, value) CSV; resample linearly onto ``grid`` if given."""
    xs, vals = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                xs.append(float(row[0]))
                vals.append(float(row[1]))
            except ValueError:
                continue
    if not xs:
        raise ValueError(f"no numeric rows in {path}")
    xs, vals = np.array(xs), np.array(vals)
    if grid is None:
        return vals
    return np.interp(grid.x, xs, vals)
