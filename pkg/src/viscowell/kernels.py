"""Relaxation kernels g(t), auxiliary rate functions xi(t), and hypothesis checks.

Kernels are small immutable objects with vectorised ``value``, ``derivative``
and ``mass`` methods. The module-level functions (``eval_kernel``,
``kernel_mass``, ``verify_G1`` ...) are the public entry points used by the
solver and the analysis code.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

ABS_TOL = 1e-10
REL_TOL = 1e-8


class KernelError(ValueError):
    """Invalid kernel parameters or an unsupported kernel operation."""


def _as_times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("kernel evaluated at negative time")
    return arr


def _out(arr, t):
    return float(arr) if np.ndim(t) == 0 else arr


class RelaxationKernel:
    """Base class; concrete variants override ``_value``/``_derivative``."""

    kind = "abstract"
    analytic = True

    def value(self, t):
        t_arr = _as_times(t)
        return _out(self._value(t_arr), t)

    def derivative(self, t):
        t_arr = _as_times(t)
        return _out(self._derivative(t_arr), t)

    def mass(self, horizon=math.inf) -> float:
        if horizon < 0:
            raise ValueError("negative horizon")
        return self._mass(horizon)

    @property
    def l(self) -> float:  # noqa: E743
        """Residual stiffness 1 - int_0^inf g."""
        return 1.0 - self.mass(math.inf)

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroKernel(RelaxationKernel):
    kind = "zero"

    def _value(self, t):
        return np.zeros_like(t)

    def _derivative(self, t):
        return np.zeros_like(t)

    def _mass(self, horizon):
        return 0.0

    def to_config(self):
        return {"type": "zero"}


@dataclass(frozen=True)
class ExponentialKernel(RelaxationKernel):
    """g(t) = g0 * exp(-eta t)."""

    g0: float
    eta: float
    kind = "exponential"

    def __post_init__(self):
        if not (self.g0 > 0 and self.eta > 0):
            raise KernelError("exponential kernel needs g0 > 0 and eta > 0")

    def _value(self, t):
        return self.g0 * np.exp(-self.eta * t)

    def _derivative(self, t):
        return -self.eta * self.g0 * np.exp(-self.eta * t)

    def _mass(self, horizon):
        if math.isinf(horizon):
            return self.g0 / self.eta
        return self.g0 / self.eta * -math.expm1(-self.eta * horizon)

    def to_config(self):
        return {"type": "exponential", "g0": self.g0, "eta": self.eta}


@dataclass(frozen=True)
class PolynomialKernel(RelaxationKernel):
    """g(t) = c0 * (1 + t)^(-q)."""

    c0: float
    q: float
    kind = "polynomial"

    def __post_init__(self):
        if not (self.c0 > 0 and self.q > 0):
            raise KernelError("polynomial kernel needs c0 > 0 and q > 0")

    def _value(self, t):
        return self.c0 * (1.0 + t) ** (-self.q)

    def _derivative(self, t):
        return -self.q * self.c0 * (1.0 + t) ** (-self.q - 1.0)

    def _mass(self, horizon):
        if math.isinf(horizon):
            if self.q <= 1:
                raise KernelError(f"kernel mass diverges for q={self.q} <= 1")
            return self.c0 / (self.q - 1.0)
        if self.q == 1:
            return self.c0 * math.log1p(horizon)
        return self.c0 / (self.q - 1.0) * (1.0 - (1.0 + horizon) ** (1.0 - self.q))

    def to_config(self):
        return {"type": "polynomial", "c0": self.c0, "q": self.q}


def _logmixed_xi_integral(r, t):
    # int_0^t [2(r-1)/(s+1)^(3-2r) + 1/(s+1)] ds
    return (1.0 + t) ** (2.0 * (r - 1.0)) - 1.0 + np.log1p(t)


def _logmixed_xi(r, t):
    return 2.0 * (r - 1.0) * (1.0 + t) ** (2.0 * r - 3.0) + 1.0 / (1.0 + t)


@dataclass(frozen=True)
class LogMixedKernel(RelaxationKernel):
    """Exact solution of g' = -xi g^r with xi(t) = 2(r-1)/(t+1)^(3-2r) + 1/(t+1).

    ``scale`` is g(0). For large t the kernel behaves like
    [(t+1)^(2(r-1)) + ln(t+1) - 1]^(-1/(r-1)).
    """

    r: float
    scale: float
    kind = "logmixed"

    def __post_init__(self):
        if not (1.0 < self.r < 1.5):
            raise KernelError("log-mixed kernel needs 1 < r < 3/2")
        if self.scale <= 0:
            raise KernelError("log-mixed kernel needs scale > 0")

    def _value(self, t):
        r = self.r
        base = self.scale ** (1.0 - r) + (r - 1.0) * _logmixed_xi_integral(r, t)
        return base ** (-1.0 / (r - 1.0))

    def _derivative(self, t):
        return -_logmixed_xi(self.r, t) * self._value(t) ** self.r

    def _mass(self, horizon):
        # s = e^u - 1 turns the algebraic tail into an exponentially decaying one;
        # the integrand falls like e^(-u), so u > 200 contributes nothing
        upper = min(math.log1p(horizon), 200.0)
        val, _ = integrate.quad(lambda u: float(self._value(np.asarray(math.expm1(u)))) * math.exp(u),
                                0.0, upper, limit=400, points=[min(upper, 5.0)])
        return val

    def to_config(self):
        return {"type": "logmixed", "r": self.r, "scale": self.scale}


@dataclass(frozen=True, eq=False)
class TabulatedKernel(RelaxationKernel):
    """Piecewise-linear kernel through sampled (time, value) pairs."""

    times: np.ndarray
    values: np.ndarray
    source: str | None = None
    kind = "tabulated"
    analytic = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise KernelError("tabulated kernel needs matching 1-D arrays of length >= 2")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise KernelError("tabulated times must start at 0 and increase strictly")
        if np.any(values < 0):
            raise KernelError("tabulated kernel values must be non-negative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def _check_range(self, t):
        if np.any(t > self.times[-1]):
            raise KernelError(f"time beyond tabulated range [0, {self.times[-1]}]")

    def _value(self, t):
        self._check_range(t)
        return np.interp(t, self.times, self.values)

    def _derivative(self, t):
        self._check_range(t)
        slopes = np.diff(self.values) / np.diff(self.times)
        # forward difference: slope of the interval starting at t
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, slopes.size - 1)
        return slopes[idx]

    def _mass(self, horizon):
        if math.isinf(horizon):
            raise KernelError("infinite-horizon mass is not supported for tabulated kernels")
        self._check_range(np.asarray(horizon))
        mask = self.times < horizon
        ts = np.append(self.times[mask], horizon)
        vs = np.interp(ts, self.times, self.values)
        return float(np.trapezoid(vs, ts))

    @property
    def l(self) -> float:  # noqa: E743
        # finite-horizon stand-in: mass over the tabulated range
        return 1.0 - self._mass(float(self.times[-1]))

    def to_config(self):
        return {"type": "tabulated", "table_path": self.source or ""}


def load_tabulated_kernel(path) -> TabulatedKernel:
    """Read a two-column ``time,value`` CSV (an optional header line is skipped)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise KernelError(f"bad row in kernel table {path}: {row}")
    if not rows:
        raise KernelError(f"empty kernel table {path}")
    arr = np.array(rows)
    return TabulatedKernel(arr[:, 0], arr[:, 1], source=str(path))


def make_kernel(kind: str, **params) -> RelaxationKernel:
    kind = kind.lower()
    if kind == "zero":
        return ZeroKernel()
    if kind == "exponential":
        return ExponentialKernel(float(params["g0"]), float(params["eta"]))
    if kind == "polynomial":
        return PolynomialKernel(float(params["c0"]), float(params["q"]))
    if kind == "logmixed":
        return LogMixedKernel(float(params["r"]), float(params.get("scale", 1.0)))
    if kind == "tabulated":
        return load_tabulated_kernel(Path(params["table_path"]))
    raise KernelError(f"unknown kernel type {kind!r}")


def eval_kernel(k: RelaxationKernel, t):
    return k.value(t)


def eval_kernel_derivative(k: RelaxationKernel, t):
    return k.derivative(t)


def kernel_mass(k: RelaxationKernel, horizon=math.inf) -> float:
    return k.mass(horizon)


# --------------------------------------------------------------------------
# xi(t)


class XiFunction:
    kind = "abstract"
    bound_L = 0.0
    diverges = True  # int_0^inf xi = inf (decided analytically per variant)

    def value(self, t):
        return _out(self._value(np.asarray(t, dtype=float)), t)

    def derivative(self, t):
        return _out(self._derivative(np.asarray(t, dtype=float)), t)

    def integral(self, t0, t):
        """int_{t0}^{t} xi(s) ds (closed form)."""
        t0 = float(t0)
        t_arr = np.asarray(t, dtype=float)
        if t0 < 0 or np.any(t_arr < t0):
            raise ValueError("xi integral needs t >= t0 >= 0")
        return _out(self._antiderivative(t_arr) - self._antiderivative(np.asarray(t0)), t)


@dataclass(frozen=True)
class ConstantXi(XiFunction):
    xi0: float
    kind = "constant"
    bound_L = 0.0

    def __post_init__(self):
        if self.xi0 <= 0:
            raise KernelError("constant xi must be positive")

    def _value(self, t):
        return np.full_like(t, self.xi0)

    def _derivative(self, t):
        return np.zeros_like(t)

    def _antiderivative(self, t):
        return self.xi0 * t


@dataclass(frozen=True)
class PowerLawXi(XiFunction):
    """xi(t) = scale * (1 + t)^(-m), 0 < m < 1."""

    m: float
    scale: float = 1.0
    kind = "powerlaw"

    def __post_init__(self):
        if not (0.0 < self.m < 1.0) or self.scale <= 0:
            raise KernelError("power-law xi needs 0 < m < 1 and scale > 0")

    @property
    def bound_L(self):
        return self.m

    def _value(self, t):
        return self.scale * (1.0 + t) ** (-self.m)

    def _derivative(self, t):
        return -self.m * self.scale * (1.0 + t) ** (-self.m - 1.0)

    def _antiderivative(self, t):
        return self.scale * ((1.0 + t) ** (1.0 - self.m) - 1.0) / (1.0 - self.m)


@dataclass(frozen=True)
class LogMixedXi(XiFunction):
    r: float
    kind = "logmixed"
    bound_L = 1.0

    def _value(self, t):
        return _logmixed_xi(self.r, t)

    def _derivative(self, t):
        r = self.r
        return 2.0 * (r - 1.0) * (2.0 * r - 3.0) * (1.0 + t) ** (2.0 * r - 4.0) - (1.0 + t) ** -2.0

    def _antiderivative(self, t):
        return _logmixed_xi_integral(self.r, t)


def xi_for_kernel(k: RelaxationKernel) -> tuple[float, XiFunction]:
    """Canonical (r, xi) for which g' = -xi g^r holds with equality."""
    if isinstance(k, ExponentialKernel):
        return 1.0, ConstantXi(k.eta)
    if isinstance(k, PolynomialKernel):
        if k.q <= 2:
            raise KernelError(f"polynomial exponent q={k.q} gives r >= 3/2, outside (G2)")
        return (k.q + 1.0) / k.q, ConstantXi(k.q * k.c0 ** (-1.0 / k.q))
    if isinstance(k, LogMixedKernel):
        return k.r, LogMixedXi(k.r)
    raise KernelError(f"no canonical xi for {k.kind} kernel")


# --------------------------------------------------------------------------
# hypothesis checks


def _tol(scale):
    return ABS_TOL + REL_TOL * np.abs(scale)


@dataclass
class G1Report:
    passed: bool
    g0: float
    l: float  # noqa: E741
    violations: list = field(default_factory=list)


def verify_G1(k: RelaxationKernel, grid) -> G1Report:
    """g(0) > 0, g >= 0 and non-increasing on ``grid``, and l = 1 - int g > 0."""
    ts = np.sort(np.asarray(grid, dtype=float))
    if ts.size == 0:
        raise ValueError("empty evaluation grid")
    violations = []
    g0 = k.value(0.0)
    if not g0 > 0:
        violations.append(("g(0)>0", 0.0, g0))
    vals = k.value(ts)
    for i in np.flatnonzero(vals < 0):
        violations.append(("g>=0", float(ts[i]), float(vals[i])))
    rises = np.diff(vals) - _tol(vals[:-1])
    for i in np.flatnonzero(rises > 0):
        violations.append(("non-increasing", float(ts[i + 1]), float(vals[i + 1] - vals[i])))
    l = k.l  # noqa: E741
    if not l > 0:
        violations.append(("l>0", math.inf, l))
    return G1Report(passed=not violations, g0=g0, l=l, violations=violations)


@dataclass
class G2Report:
    r: float
    inequality_ok: bool  # g' + xi g^r <= tol
    xi_positive_ok: bool
    xi_nonincreasing_ok: bool
    xi_ratio_ok: bool  # |xi'/xi| <= L
    xi_diverges_ok: bool
    g_power_integrable_ok: bool | None  # int g^(2-r) < inf; None when undecidable
    cr_bounded_ok: bool | None  # only meaningful for r > 1
    max_residual: float  # max of g' + xi g^r over the grid
    worst_violation: float
    cr_sampled: float | None = None

    @property
    def passed(self) -> bool:
        flags = [self.inequality_ok, self.xi_positive_ok, self.xi_nonincreasing_ok,
                 self.xi_ratio_ok, self.xi_diverges_ok]
        flags += [f for f in (self.g_power_integrable_ok, self.cr_bounded_ok) if f is not None]
        return all(flags)


def _g_power_integrable(k, r):
    if isinstance(k, (ExponentialKernel, ZeroKernel)):
        return True
    if isinstance(k, PolynomialKernel):
        return k.q * (2.0 - r) > 1.0
    if isinstance(k, LogMixedKernel):
        # g ~ t^-2 at infinity
        return 2.0 * (2.0 - r) > 1.0
    return None


def _cr_bounded(xi, r):
    # growth of t / (1 + int xi)^(1/(2(r-1))) at infinity
    if isinstance(xi, ConstantXi):
        return 1.0 / (2.0 * (r - 1.0)) >= 1.0
    if isinstance(xi, PowerLawXi):
        return (1.0 - xi.m) / (2.0 * (r - 1.0)) >= 1.0
    if isinstance(xi, LogMixedXi):
        return xi.r >= r
    return None


def verify_G2(k: RelaxationKernel, r: float, xi: XiFunction, grid, t0: float = 1.0) -> G2Report:
    if not (1.0 <= r < 1.5):
        raise ValueError(f"r={r} outside [1, 3/2)")
    ts = np.sort(np.asarray(grid, dtype=float))
    if ts.size == 0:
        raise ValueError("empty evaluation grid")
    gp = k.derivative(ts)
    g = k.value(ts)
    xv = xi.value(ts)
    bound = xv * g**r
    residual = gp + bound
    excess = residual - _tol(np.abs(gp) + bound)
    xd = xi.derivative(ts)
    ratio_excess = np.abs(xd / xv) - xi.bound_L - _tol(xi.bound_L)

    cr_ok = cr_val = None
    if r > 1.0:
        cr_ok = _cr_bounded(xi, r)
        later = ts[ts >= t0]
        if later.size:
            cr_val = float(np.max(later / (1.0 + xi.integral(t0, later)) ** (1.0 / (2.0 * (r - 1.0)))))

    worst = max(float(np.max(excess)), float(np.max(xd)), float(np.max(ratio_excess)), 0.0)
    return G2Report(
        r=r,
        inequality_ok=bool(np.all(excess <= 0)),
        xi_positive_ok=bool(np.all(xv > 0)),
        xi_nonincreasing_ok=bool(np.all(xd <= _tol(xd))),
        xi_ratio_ok=bool(np.all(ratio_excess <= 0)),
        xi_diverges_ok=bool(xi.diverges),
        g_power_integrable_ok=_g_power_integrable(k, r),
        cr_bounded_ok=cr_ok,
        max_residual=float(np.max(residual)),
        worst_violation=worst,
        cr_sampled=cr_val,
    )


def mass_threshold(p: float, delta: float) -> float:
    """Largest kernel mass under which negative-I data are guaranteed to blow up."""
    if not (2.0 < p < 3.0):
        raise ValueError(f"p={p} outside (2, 3)")
    if not delta < 1.0:
        raise ValueError(f"delta={delta} must be < 1")
    dh = max(0.0, delta)
    denom = (1.0 - dh) ** 2 * p + 2.0 * dh * (1.0 - dh)
    return (p - 2.0) / (p - 2.0 + 1.0 / denom)


def check_mass_condition(k: RelaxationKernel, p: float, delta: float) -> bool:
    return k.mass(math.inf) <= mass_threshold(p, delta)
