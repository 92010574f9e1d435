"""Energy functionals I, J, E, the memory seminorm (g o u_x), and the dissipation identity."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .kernels import RelaxationKernel, ZeroKernel
from .weighted_space import Grid, cell_gradient, gradient_norm2, norm_H2, power_integral

RECORD_FIELDS = ("t", "E", "I", "J", "kinetic", "gcirc", "norm_H2", "norm_ux_H2", "norm_p_p")


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    E: float
    I: float  # noqa: E741
    J: float
    kinetic: float
    gcirc: float
    norm_H2: float
    norm_ux_H2: float
    norm_p_p: float

    def as_dict(self) -> dict:
        return asdict(self)


def _lag_weights(times: np.ndarray) -> np.ndarray:
    """Trapezoid weights omega_j valid for every quadrature ending at a later record.

    For a rule on t_0..t_k the weight of t_j (j < k) is (t_{j+1} - t_{j-1})/2
    (t_1 - t_0)/2 for j = 0; the j = k term is never needed because its
    integrand vanishes.
    """
    w = np.zeros_like(times)
    if times.size > 1:
        d = np.diff(times)
        w[:-1] += d / 2
        w[1:-1] += d[:-1] / 2
    return w


def _memory_seminorms(grid: Grid, kernel: RelaxationKernel, times, U, derivative=False,
                      block: int = 256) -> np.ndarray:
    """(g o u_x)(t_k) for every record k (or (g' o u_x) with ``derivative``)."""
    times = np.asarray(times, dtype=float)
    R = times.size
    out = np.zeros(R)
    if isinstance(kernel, ZeroKernel) or R < 2:
        return out
    G = np.diff(U, axis=1) / grid.h * np.sqrt(grid.cell_weights)  # weighted gradients
    sq = np.einsum("ij,ij->i", G, G)
    omega = _lag_weights(times)
    func = kernel.derivative if derivative else kernel.value
    for start in range(1, R, block):
        stop = min(R, start + block)
        rows = np.arange(start, stop)
        gram = G[start:stop] @ G[:stop].T
        dist = sq[start:stop, None] + sq[None, :stop] - 2.0 * gram
        np.maximum(dist, 0.0, out=dist)
        lag = times[rows, None] - times[None, :stop]
        mask = lag > 0
        kern = np.where(mask, func(np.where(mask, lag, 0.0)), 0.0)
        out[start:stop] = (kern * dist * omega[None, :stop]).sum(axis=1)
    return out


def g_circ(grid: Grid, times, U, kernel: RelaxationKernel) -> float:
    """(g o u_x) at the last snapshot time from the snapshot history ``U`` (records x nodes)."""
    times = np.asarray(times, dtype=float)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if times.size != U.shape[0]:
        raise ValueError("history times and snapshots differ in length")
    if times.size == 0 or times[0] != 0.0:
        raise ValueError("history must start at t = 0")
    if times.size == 1 or isinstance(kernel, ZeroKernel):
        return 0.0
    t = times[-1]
    du = cell_gradient(grid, U[-1])[None, :] - np.diff(U, axis=1) / grid.h
    d2 = du**2 @ grid.cell_weights
    w = _lag_weights(times)
    lag = t - times[:-1]
    return float(np.sum(w[:-1] * kernel.value(lag) * d2[:-1]))


def _elastic(grid, u, kernel, t, gcirc):
    return (1.0 - kernel.mass(t)) * gradient_norm2(grid, u) + gcirc


def functional_I(grid: Grid, u, p: float, kernel: RelaxationKernel, t: float = 0.0,
                 gcirc: float = 0.0, source_enabled: bool = True) -> float:
    src = power_integral(grid, u, p) if source_enabled else 0.0
    return _elastic(grid, u, kernel, t, gcirc) - src


def functional_J(grid: Grid, u, p: float, kernel: RelaxationKernel, t: float = 0.0,
                 gcirc: float = 0.0, source_enabled: bool = True) -> float:
    src = power_integral(grid, u, p) if source_enabled else 0.0
    return 0.5 * _elastic(grid, u, kernel, t, gcirc) - src / p


def functional_E(grid: Grid, u, v, p: float, kernel: RelaxationKernel, t: float = 0.0,
                 gcirc: float = 0.0, source_enabled: bool = True) -> float:
    return functional_J(grid, u, p, kernel, t, gcirc, source_enabled) + 0.5 * norm_H2(grid, v)


def energy_records(grid: Grid, kernel: RelaxationKernel, p: float, times, U, V,
                   source_enabled: bool = True) -> list[EnergyRecord]:
    """EnergyRecord for every snapshot; (g o u_x) uses the snapshots themselves as history."""
    gcirc = _memory_seminorms(grid, kernel, times, U)
    records = []
    for t, u, v, gc in zip(times, U, V, gcirc):
        ux2 = gradient_norm2(grid, u)
        pp = power_integral(grid, u, p) if source_enabled else 0.0
        elastic = (1.0 - kernel.mass(t)) * ux2 + gc
        kin = 0.5 * norm_H2(grid, v)
        J = 0.5 * elastic - pp / p
        records.append(EnergyRecord(t=float(t), E=J + kin, I=elastic - pp, J=J, kinetic=kin,
                                    gcirc=float(gc), norm_H2=norm_H2(grid, u), norm_ux_H2=ux2,
                                    norm_p_p=pp))
    return records


def dissipation_rhs(grid: Grid, kernel: RelaxationKernel, a: float, times, U, V) -> np.ndarray:
    """1/2 (g' o u_x) - 1/2 g(t) ||u_x||_H^2 - a ||u_t||_H^2 at every snapshot."""
    gpc = _memory_seminorms(grid, kernel, times, U, derivative=True)
    ux2 = np.array([gradient_norm2(grid, u) for u in U])
    vt2 = np.array([norm_H2(grid, v) for v in V])
    return 0.5 * gpc - 0.5 * kernel.value(np.asarray(times, dtype=float)) * ux2 - a * vt2


def energy_identity_residual(traj, kernel: RelaxationKernel | None = None, a: float | None = None) -> float:
    """max |E'(t) - RHS(t)| over interior records, E' by central differences."""
    kernel = traj.params.kernel if kernel is None else kernel
    a = traj.params.a if a is None else a
    if len(traj.times) < 3:
        raise ValueError("energy identity check needs at least 3 records")
    E = np.array([r.E for r in traj.records])
    dE = np.gradient(E, traj.times)
    rhs = dissipation_rhs(traj.grid, kernel, a, traj.times, traj.u, traj.v)
    return float(np.max(np.abs(dE - rhs)[1:-1]))


def max_energy_increase(records) -> float:
    """Largest E(t_{k+1}) - E(t_k) over consecutive records (<= 0 means monotone)."""
    E = np.array([r.E for r in records])
    if E.size < 2:
        return 0.0
    return float(np.max(np.diff(E)))


def energy_scale(records, p: float) -> np.ndarray:
    """Sum of the non-negative terms of E at each record: kinetic + elastic/2 + int x|u|^p / p."""
    return np.array([r.kinetic + (r.J + r.norm_p_p / p) + r.norm_p_p / p for r in records])


def relative_energy_increase(records, p: float) -> float:
    """max_k (E_{k+1} - E_k) / scale_k; <= 0 means monotone."""
    E = np.array([r.E for r in records])
    if E.size < 2:
        return 0.0
    scale = energy_scale(records, p)[:-1]
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.diff(E) / scale))
