"""Explicit time stepping for the singular nonlocal viscoelastic wave problem

    u_tt - B u + int_0^t g(t-s) B u(s) ds + a u_t = |u|^(p-2) u,   B u = (x u_x)_x / x,
    u(ell, t) = 0,   int_0^ell x u dx = 0.

Space: finite volumes on the dual cells of a uniform node grid (see
``weighted_space``); the x = 0 cell is a genuine control volume with weight
h^2/8, so B is exact on quadratics there as well. The nonlocal condition is
enforced by a spatially uniform Lagrange multiplier, i.e. the acceleration is
projected onto the weighted-mean-zero subspace. That projection is orthogonal
in H, so it drops out of both the energy identity and the test with x u.

Time: kick-drift-kick leapfrog, damping by the average (v^{n+1} + v^n)/2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import ExponentialKernel, RelaxationKernel, ZeroKernel
from .weighted_space import Grid, norm_H2, project_mean_zero

CFL = 0.5
DEFAULT_BLOWUP_RATIO = 1e8


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup_detected"
    INSTABILITY = "numeric_instability"


class NumericInstability(FloatingPointError):
    pass


class HistoryError(RuntimeError):
    pass


@dataclass
class ProblemParams:
    p: float
    a: float
    kernel: RelaxationKernel
    grid: Grid
    source_enabled: bool = True
    memory_mode: str = "auto"  # auto | direct | recursive

    def __post_init__(self):
        if not (2.0 < self.p < 3.0):
            raise ValueError(f"source exponent p={self.p} must satisfy 2 < p < 3")
        if self.a < 0:
            raise ValueError(f"damping a={self.a} must be >= 0")
        if self.memory_mode not in ("auto", "direct", "recursive"):
            raise ValueError(f"unknown memory mode {self.memory_mode!r}")
        if self.memory_mode == "recursive" and not isinstance(self.kernel, ExponentialKernel):
            raise ValueError("recursive memory needs an exponential kernel")

    @property
    def recursive(self) -> bool:
        return isinstance(self.kernel, ExponentialKernel) and self.memory_mode != "direct"

    @property
    def needs_history(self) -> bool:
        return not isinstance(self.kernel, ZeroKernel) and not self.recursive


class History:
    """Append-only buffer of (t, u) snapshots feeding the memory convolution."""

    def __init__(self, size: int, capacity: int = 64):
        self.times = np.empty(capacity)
        self.values = np.empty((capacity, size))
        self.count = 0

    def append(self, t: float, u: np.ndarray) -> None:
        if self.count and t <= self.times[self.count - 1]:
            raise HistoryError("history times must increase strictly")
        if self.count == self.times.size:
            cap = 2 * self.times.size
            self.times = np.resize(self.times, cap)
            grown = np.empty((cap, self.values.shape[1]))
            grown[: self.count] = self.values[: self.count]
            self.values = grown
        self.times[self.count] = t
        self.values[self.count] = u
        self.count += 1

    @property
    def t(self) -> np.ndarray:
        return self.times[: self.count]

    @property
    def u(self) -> np.ndarray:
        return self.values[: self.count]


@dataclass
class SimState:
    t: float
    u: np.ndarray
    v: np.ndarray
    history: History | None = None
    # recursive accumulators for exponential kernels: trapezoid of g(t-s) u(s)
    # and of g(t-s) itself
    mem_sum: np.ndarray | None = None
    mem_mass: float = 0.0
    acc: np.ndarray | None = field(default=None, repr=False)


@dataclass
class Trajectory:
    grid: Grid
    params: ProblemParams
    dt: float
    times: np.ndarray
    u: np.ndarray  # (records, n+1)
    v: np.ndarray
    termination: Termination
    blowup_time: float | None = None
    constraint_residual_max: float = 0.0
    steps: int = 0
    records: list = field(default_factory=list)  # EnergyRecord per row

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


# --------------------------------------------------------------------------
# spatial operators


def bessel_operator(grid: Grid, u) -> np.ndarray:
    """(x u_x)_x / x in conservative flux form on nodes 0..n-1.

    Node 0 is the control volume [0, h/2] (no flux through x = 0); the entry at
    x = ell is unused by the update and returned as 0.
    """
    u = np.asarray(u, dtype=float)
    h = grid.h
    flux = grid.x_mid * np.diff(u) / h  # x_{i+1/2} u_x at cell midpoints
    out = np.zeros_like(u)
    out[0] = flux[0]
    out[1:-1] = flux[1:] - flux[:-1]
    out[:-1] /= grid.weights[:-1]
    return out


def _project_free(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Subtract the uniform multiplier so that sum_i m_i f_i = 0 over free nodes."""
    lam = np.dot(grid.weights[:-1], f[:-1]) / grid.free_weight_sum
    out = f - lam
    out[-1] = 0.0
    return out


def _trapezoid_weights(ts: np.ndarray) -> np.ndarray:
    w = np.zeros_like(ts)
    if ts.size > 1:
        d = np.diff(ts)
        w[:-1] += d / 2
        w[1:] += d / 2
    return w


def memory_term(state: SimState, kernel: RelaxationKernel, grid: Grid) -> np.ndarray:
    """int_0^t g(t-s) B u(s) ds at t = state.t.

    Trapezoid in s over the stored history, with the kernel-mass defect of the
    quadrature moved onto the current state so that a history constant in time
    returns exactly (int_0^t g) B u. For exponential kernels the trapezoid sums
    come from a recursive accumulator instead of the stored history.
    """
    if isinstance(kernel, ZeroKernel):
        return np.zeros_like(state.u)
    t = state.t
    if state.mem_sum is not None:
        weighted, trap_mass = state.mem_sum, state.mem_mass
    else:
        hist = state.history
        if hist is None or hist.count == 0:
            raise HistoryError("memory term needs a history")
        ts = hist.t
        if ts[0] != 0.0 or not math.isclose(ts[-1], t, rel_tol=1e-12, abs_tol=1e-14):
            raise HistoryError(f"history covers [{ts[0]}, {ts[-1]}], not [0, {t}]")
        w = _trapezoid_weights(ts) * kernel.value(t - ts)
        weighted = w @ hist.u
        trap_mass = float(w.sum())
    exact_mass = kernel.mass(t)
    return bessel_operator(grid, weighted + (exact_mass - trap_mass) * state.u)


def exponential_memory_update(mem_sum, mem_mass, u_old, u_new, kernel: ExponentialKernel, dt):
    """Advance the trapezoid sums of g(t-s) u(s) and g(t-s) by one step."""
    decay = math.exp(-kernel.eta * dt)
    half = 0.5 * dt * kernel.g0
    new_sum = decay * mem_sum + half * (decay * u_old + u_new)
    new_mass = decay * mem_mass + half * (decay + 1.0)
    return new_sum, new_mass


def acceleration(state: SimState, params: ProblemParams) -> np.ndarray:
    """Projected u_tt without the damping term."""
    grid = params.grid
    f = bessel_operator(grid, state.u) - memory_term(state, params.kernel, grid)
    if params.source_enabled:
        f = f + np.abs(state.u) ** (params.p - 2.0) * state.u
    return _project_free(grid, f)


# --------------------------------------------------------------------------
# initial data and stepping


def make_initial_data(grid: Grid, family: str = "quadratic", amplitude: float = 1.0,
                      velocity_scale: float = 0.0, custom=None):
    """(u0, u1) with u1 = velocity_scale * u0.

    ``quadratic``: A (ell - x)(x - ell/2); ``quartic``: A (ell^2 - x^2)(x^2 - ell^2/3),
    smooth at the origin; ``custom``: a node array supplied by the caller.
    All are pinned at x = ell and projected to weighted mean zero.
    """
    ell, x = grid.ell, grid.x
    if family == "quadratic":
        base = (ell - x) * (x - ell / 2.0)
    elif family == "quartic":
        base = (ell**2 - x**2) * (x**2 - ell**2 / 3.0)
    elif family == "custom":
        if custom is None:
            raise ValueError("custom initial data needs a field")
        base = np.array(custom, dtype=float)
        if base.shape != x.shape:
            raise ValueError("custom field does not match the grid")
    else:
        raise ValueError(f"unknown initial-data family {family!r}")
    u0 = amplitude * base
    u0[-1] = 0.0
    u0 = project_mean_zero(grid, u0)
    u1 = velocity_scale * u0
    return u0, u1


def initial_state(params: ProblemParams, u0, u1, t0: float = 0.0) -> SimState:
    grid = params.grid
    u0 = np.array(u0, dtype=float)
    u1 = np.array(u1, dtype=float)
    if u0.shape != grid.x.shape or u1.shape != grid.x.shape:
        raise ValueError("initial data do not match the grid")
    u0[-1] = u1[-1] = 0.0
    state = SimState(t=t0, u=u0, v=u1)
    if params.recursive:
        state.mem_sum = np.zeros_like(u0)
    elif params.needs_history:
        state.history = History(u0.size)
        state.history.append(t0, u0)
    state.acc = acceleration(state, params)
    return state


def _finite(*arrays):
    return all(np.all(np.isfinite(a)) for a in arrays)


def step(state: SimState, params: ProblemParams, dt: float) -> SimState:
    """One kick-drift-kick step; returns the new state (history buffer is shared)."""
    grid = params.grid
    if abs(dt) > CFL * grid.h * (1 + 1e-12):
        raise ValueError(f"|dt|={abs(dt)} violates dt <= {CFL} h = {CFL * grid.h}")
    if dt < 0 and not isinstance(params.kernel, ZeroKernel):
        raise ValueError("backward stepping is only defined without memory")
    a = params.a
    acc = state.acc if state.acc is not None else acceleration(state, params)
    v_half = state.v + 0.5 * dt * (acc - a * state.v)
    u_new = state.u + dt * v_half
    u_new[-1] = 0.0
    u_new = project_mean_zero(grid, u_new)
    t_new = state.t + dt
    new = SimState(t=t_new, u=u_new, v=state.v, history=state.history)
    if params.recursive:
        new.mem_sum, new.mem_mass = exponential_memory_update(
            state.mem_sum, state.mem_mass, state.u, u_new, params.kernel, dt)
    elif params.needs_history:
        new.history.append(t_new, u_new)
    acc_new = acceleration(new, params)
    v_new = (v_half + 0.5 * dt * acc_new) / (1.0 + 0.5 * a * dt)
    v_new[-1] = 0.0
    new.v = project_mean_zero(grid, v_new)
    new.acc = acc_new
    if not _finite(new.u, new.v, acc_new):
        raise NumericInstability(f"non-finite values at t={t_new}")
    return new


def adapted_dt(dt: float, p: float, u_ref: float, u) -> float:
    """Shrink dt like |u|_inf^(-(p-2)/2), the time scale of u'' = |u|^(p-2) u, once |u| exceeds u_ref."""
    peak = float(np.max(np.abs(u)))
    if u_ref <= 0 or peak <= u_ref:
        return dt
    return dt * (u_ref / peak) ** ((p - 2.0) / 2.0)


def run(params: ProblemParams, u0, u1, T: float, dt: float | None = None, record_every: int = 1,
        blowup_ratio: float = DEFAULT_BLOWUP_RATIO, compute_records: bool = True,
        adaptive: bool = False) -> Trajectory:
    """Integrate to min(T, blow-up, instability), keeping every ``record_every``-th state.

    With ``adaptive`` the step shrinks as the solution grows (see ``adapted_dt``) so that
    the approach to blow-up stays resolved; ``dt`` is then the largest step used.
    """
    grid = params.grid
    dt = CFL * grid.h if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if blowup_ratio <= 1:
        raise ValueError("blow-up threshold ratio must exceed 1")
    state = initial_state(params, u0, u1)
    u_ref = float(np.max(np.abs(state.u)))
    ref = norm_H2(grid, state.u)
    ref = ref if ref > 0 else 1.0
    threshold = blowup_ratio * ref

    times, us, vs = [state.t], [state.u.copy()], [state.v.copy()]
    termination, t_blow = Termination.COMPLETED, None
    resid = abs(grid.integrate(state.u))
    k = 0
    while T - state.t > 1e-9 * dt:
        k += 1
        dt_k = adapted_dt(dt, params.p, u_ref, state.u) if adaptive else dt
        if state.t + dt_k > T - 1e-9 * dt:
            dt_k = T - state.t
        try:
            state = step(state, params, dt_k)
        except NumericInstability:
            termination = Termination.INSTABILITY
            break
        resid = max(resid, abs(grid.integrate(state.u)) / (1.0 + math.sqrt(norm_H2(grid, state.u))))
        blown = norm_H2(grid, state.u) >= threshold
        last = T - state.t <= 1e-9 * dt
        if blown or k % record_every == 0 or last:
            times.append(state.t)
            us.append(state.u.copy())
            vs.append(state.v.copy())
        if blown:
            termination, t_blow = Termination.BLOWUP, state.t
            break

    traj = Trajectory(grid=grid, params=params, dt=dt, times=np.array(times), u=np.array(us),
                      v=np.array(vs), termination=termination, blowup_time=t_blow,
                      constraint_residual_max=float(resid), steps=k)
    if compute_records:
        from .energetics import energy_records

        traj.records = energy_records(grid, params.kernel, params.p, traj.times, traj.u, traj.v,
                                      source_enabled=params.source_enabled)
    return traj


def detect_blowup(traj: Trajectory, threshold_ratio: float = DEFAULT_BLOWUP_RATIO) -> float | None:
    """First record time with ||u||_H^2 >= ratio * ||u0||_H^2 (non-finite counts as crossing)."""
    if threshold_ratio <= 1:
        raise ValueError("threshold ratio must exceed 1")
    grid = traj.grid
    norms = np.array([norm_H2(grid, u) for u in traj.u])
    ref = norms[0] if norms[0] > 0 else 1.0
    hit = ~np.isfinite(norms) | (norms >= threshold_ratio * ref)
    idx = np.flatnonzero(hit)
    return float(traj.times[idx[0]]) if idx.size else None


@dataclass
class BlowupCertification:
    time: float | None
    time_refined: float | None
    relative_change: float | None

    @property
    def certified(self) -> bool:
        return self.relative_change is not None and self.relative_change < 0.05


def certify_blowup(params: ProblemParams, u0, u1, T: float, dt: float,
                   blowup_ratio: float = DEFAULT_BLOWUP_RATIO, adaptive: bool = False) -> BlowupCertification:
    """Rerun at dt/2; the detection is certified when the time moves by < 5%."""
    t1, t2 = (run(params, u0, u1, T, d, record_every=10**9, blowup_ratio=blowup_ratio,
                  compute_records=False, adaptive=adaptive).blowup_time for d in (dt, dt / 2))
    if t1 is None or t2 is None:
        return BlowupCertification(t1, t2, None)
    return BlowupCertification(t1, t2, abs(t1 - t2) / t2)


def leapfrog_energy(grid: Grid, u_old, u_new, dt: float) -> float:
    """Staggered energy 1/2 ||(u_new-u_old)/dt||_H^2 + 1/2 <K u_new, u_old>.

    Conserved by the scheme for g = 0, a = 0 without source; non-increasing when a > 0.
    """
    from .weighted_space import cell_gradient

    vel = (np.asarray(u_new) - np.asarray(u_old)) / dt
    cross = float(np.dot(grid.cell_weights, cell_gradient(grid, u_new) * cell_gradient(grid, u_old)))
    return 0.5 * norm_H2(grid, vel) + 0.5 * cross
