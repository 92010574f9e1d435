"""Well depth, Nehari quantities, stable/unstable classification and blow-up bounds."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .energetics import _memory_seminorms, functional_I
from .kernels import RelaxationKernel, check_mass_condition, mass_threshold
from .weighted_space import (Grid, estimate_Cp, estimate_Cstar, gradient_norm2, norm_H2,
                             power_integral, weighted_inner)


class PreconditionError(ValueError):
    pass


def well_depth(l: float, C_star: float, p: float) -> float:  # noqa: E741
    """d1 = (p-2)/(2p) * (l / C_*^(2/p))^(p/(p-2))."""
    if not (0.0 < l <= 1.0):
        raise ValueError(f"l={l} outside (0, 1]")
    if not C_star > 0:
        raise ValueError("C_* must be positive")
    if not (2.0 < p < 3.0):
        raise ValueError(f"p={p} outside (2, 3)")
    return (p - 2.0) / (2.0 * p) * (l / C_star ** (2.0 / p)) ** (p / (p - 2.0))


def default_delta(E0: float, d1: float) -> float:
    """delta = 0 for E0 <= 0, else a point strictly between E0/d1 and 1.

    The blow-up hypothesis needs E0 < delta d1 strictly, so the ratio E0/d1
    itself is not admissible; we step 5% of the way towards 1.
    """
    if E0 <= 0:
        return 0.0
    ratio = E0 / d1
    return ratio + 0.05 * (1.0 - ratio) if ratio < 1 else ratio


@dataclass
class WellConstants:
    l: float  # noqa: E741
    C_p: float
    C_star: float
    p: float
    d1: float
    delta: float = 0.0

    @property
    def delta_hat(self) -> float:
        return max(0.0, self.delta)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["delta_hat"] = self.delta_hat
        return out


def well_constants(grid: Grid, kernel: RelaxationKernel, p: float, delta: float = 0.0,
                   seed: int | None = None) -> WellConstants:
    l = kernel.l  # noqa: E741
    C_star = estimate_Cstar(grid, p, seed=seed)
    return WellConstants(l=l, C_p=estimate_Cp(grid), C_star=C_star, p=p,
                         d1=well_depth(l, C_star, p), delta=delta)


# --------------------------------------------------------------------------
# Nehari manifold


def _elastic_and_source(grid, u, p, kernel, t, gcirc):
    Q = (1.0 - kernel.mass(t)) * gradient_norm2(grid, u) + gcirc
    P = power_integral(grid, u, p)
    return Q, P


def lambda_bar2(grid: Grid, u, p: float, kernel: RelaxationKernel, t: float = 0.0,
                gcirc: float = 0.0) -> float:
    """Scaling that puts u on the Nehari manifold: [Q / int x|u|^p]^(1/(p-2))."""
    Q, P = _elastic_and_source(grid, u, p, kernel, t, gcirc)
    if P == 0.0:
        raise ZeroDivisionError("lambda_bar2 undefined for u = 0")
    return (Q / P) ** (1.0 / (p - 2.0))


def nehari_residual(grid: Grid, u, p: float, kernel: RelaxationKernel, t: float = 0.0,
                    gcirc: float = 0.0) -> tuple[float, float]:
    """(I(lambda_bar2 u), scale of its terms). The memory seminorm scales like lambda^2."""
    lam = lambda_bar2(grid, u, p, kernel, t, gcirc)
    w = lam * np.asarray(u)
    res = functional_I(grid, w, p, kernel, t, gcirc * lam * lam)
    scale = lam * lam * _elastic_and_source(grid, u, p, kernel, t, gcirc)[0]
    return res, scale


def mountain_pass_level(grid: Grid, u, p: float, kernel: RelaxationKernel, t: float = 0.0,
                        gcirc: float = 0.0) -> float:
    """sup over lambda >= 0 of J(lambda u) in closed form."""
    Q, P = _elastic_and_source(grid, u, p, kernel, t, gcirc)
    if P == 0.0:
        raise ZeroDivisionError("mountain-pass level undefined for u = 0")
    return (p - 2.0) / (2.0 * p) * (Q / P ** (2.0 / p)) ** (p / (p - 2.0))


# --------------------------------------------------------------------------
# classification


class WellClass(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE_BLOWUP = "UnstableBlowup"
    INDETERMINATE = "Indeterminate"


@dataclass
class Classification:
    tag: WellClass
    E0: float
    I0: float
    d1: float
    delta: float
    mass_ok: bool

    def as_dict(self) -> dict:
        out = asdict(self)
        out["tag"] = self.tag.value
        return out


def classify(E0: float, I0: float, constants: WellConstants, mass_ok: bool) -> Classification:
    d1, delta = constants.d1, constants.delta
    if E0 < d1 and I0 > 0:
        tag = WellClass.STABLE
    elif E0 < delta * d1 and I0 < 0 and mass_ok and delta < 1:
        tag = WellClass.UNSTABLE_BLOWUP
    else:
        tag = WellClass.INDETERMINATE
    return Classification(tag, E0, I0, d1, delta, mass_ok)


# --------------------------------------------------------------------------
# blow-up certificate


def blowup_time_bound(u0_sq: float, u0u1: float, b: float, T0: float, p: float,
                      a: float = 0.0, T: float = 0.0) -> float:
    """4 L(0) / ((p-2) L'(0)) with L(0) = (1 + aT)||u0||^2 + b T0^2, L'(0) = 2<u0,u1> + 2 b T0."""
    L0 = (1.0 + a * T) * u0_sq + b * T0 * T0
    Lp0 = 2.0 * u0u1 + 2.0 * b * T0
    if not Lp0 > 0:
        raise ArithmeticError("L'(0) must be positive")
    return 4.0 * L0 / ((p - 2.0) * Lp0)


@dataclass
class BlowupCertificate:
    b: float
    T0: float
    T: float
    L0: float
    Lprime0: float
    Tstar_bound: float
    branch: str  # "delta<=0" or "0<delta<1"
    u0_sq: float
    u1_sq: float
    a: float

    def as_dict(self) -> dict:
        return asdict(self)


def blowup_bound(grid: Grid, u0, u1, E0: float, constants: WellConstants, a: float,
                 mass_ok: bool, I0: float | None = None) -> BlowupCertificate:
    """Constants b, T0, T of the concavity argument and the resulting bound on T*."""
    if I0 is None:
        I0 = -math.inf  # caller vouches for I(0) < 0
    cls = classify(E0, I0, constants, mass_ok)
    if cls.tag is not WellClass.UNSTABLE_BLOWUP:
        raise PreconditionError(f"initial data classified {cls.tag.value}, not UnstableBlowup")
    p, d1, delta = constants.p, constants.d1, constants.delta
    if delta <= 0:
        b, branch = -2.0 * E0, "delta<=0"
    else:
        b, branch = 2.0 * (delta * d1 - E0), "0<delta<1"
    if not b > 0:
        raise PreconditionError("b must be positive (needs E0 < 0 on the delta <= 0 branch)")
    u0_sq = norm_H2(grid, u0)
    u1_sq = norm_H2(grid, u1)
    u0u1 = weighted_inner(grid, u0, u1)
    T0 = 1.01 * ((p - 2.0 + 4.0 * a) * u0_sq + (p - 2.0) * u1_sq) / (2.0 * (p - 2.0) * b)
    if T0 <= 0:
        raise PreconditionError("zero initial data is not in the unstable set")
    denom = 2.0 * (p - 2.0) * b * T0 - (p - 2.0 + 4.0 * a) * u0_sq - (p - 2.0) * u1_sq
    T = 1.01 * 4.0 * (u0_sq + b * T0 * T0) / denom
    L0 = (1.0 + a * T) * u0_sq + b * T0 * T0
    Lp0 = 2.0 * u0u1 + 2.0 * b * T0
    if not Lp0 > 0:
        raise ArithmeticError("L'(0) <= 0 after choosing T0")
    tstar = 4.0 * L0 / ((p - 2.0) * Lp0)
    if not T > tstar:
        raise ArithmeticError("T does not exceed the blow-up time bound")
    return BlowupCertificate(b=b, T0=T0, T=T, L0=L0, Lprime0=Lp0, Tstar_bound=tstar,
                             branch=branch, u0_sq=u0_sq, u1_sq=u1_sq, a=a)


# --------------------------------------------------------------------------
# diagnostics along trajectories


def concavity_function(times, norm_u_sq, a: float, cert: BlowupCertificate) -> np.ndarray:
    """L(t) = ||u||^2 + a int_0^t ||u||^2 + a (T - t) ||u0||^2 + b (t + T0)^2."""
    times = np.asarray(times, dtype=float)
    norm_u_sq = np.asarray(norm_u_sq, dtype=float)
    running = np.zeros_like(times)
    if times.size > 1:
        running[1:] = np.cumsum(0.5 * np.diff(times) * (norm_u_sq[1:] + norm_u_sq[:-1]))
    return (norm_u_sq + a * running + a * (cert.T - times) * norm_u_sq[0]
            + cert.b * (times + cert.T0) ** 2)


def convexity_values(times, L, p: float) -> tuple[np.ndarray, np.ndarray]:
    """L L'' - (p+2)/4 L'^2 and L L'' at interior points (second-order differences)."""
    times = np.asarray(times, dtype=float)
    L = np.asarray(L, dtype=float)
    if times.size < 5:
        raise ValueError("convexity diagnostic needs at least 5 records")
    dL = np.gradient(L, times)
    d2L = np.gradient(dL, times)
    # three-point second difference is sharper than gradient-of-gradient
    h1 = np.diff(times)[:-1]
    h2 = np.diff(times)[1:]
    d2L[1:-1] = 2.0 * (h1 * L[2:] - (h1 + h2) * L[1:-1] + h2 * L[:-2]) / (h1 * h2 * (h1 + h2))
    inner = slice(1, -1)
    return (L * d2L - (p + 2.0) / 4.0 * dL**2)[inner], (L * d2L)[inner]


@dataclass
class ConvexityReport:
    min_value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.min_value >= -self.tolerance


def convexity_diagnostic(traj, p: float, a: float, cert: BlowupCertificate,
                         C: float = 1.0) -> ConvexityReport:
    norms = np.array([norm_H2(traj.grid, u) for u in traj.u])
    L = concavity_function(traj.times, norms, a, cert)
    vals, LL2 = convexity_values(traj.times, L, p)
    dt = float(np.max(np.diff(traj.times)))
    return ConvexityReport(min_value=float(np.min(vals)), tolerance=C * dt * float(np.max(np.abs(LL2))))


def _rel_less(a, b, rel=1e-8):
    return a < b + rel * max(abs(a), abs(b))


def check_unstable_chain(records, kernel: RelaxationKernel, constants: WellConstants) -> list[bool]:
    """Per record: I < 0 and d1 < (p-2)/(2p) Q < (p-2)/(2p) int x|u|^p."""
    p, d1 = constants.p, constants.d1
    c = (p - 2.0) / (2.0 * p)
    out = []
    for r in records:
        Q = (1.0 - kernel.mass(r.t)) * r.norm_ux_H2 + r.gcirc
        ok = r.I < 0 and _rel_less(d1, c * Q) and _rel_less(c * Q, c * r.norm_p_p)
        # strictness: equality fails regardless of tolerance
        ok = ok and d1 != c * Q and Q != r.norm_p_p
        out.append(bool(ok))
    return out


def global_bound_coefficient(l: float, p: float) -> float:  # noqa: E741
    return 2.0 * p / (l * (p - 2.0))


def check_global_bound(records, constants: WellConstants) -> list[bool]:
    """Per record: ||u_x||_H^2 <= 2p/(l(p-2)) E(0) (1 + 1e-6)."""
    if not records:
        return []
    bound = global_bound_coefficient(constants.l, constants.p) * records[0].E
    return [bool(r.norm_ux_H2 <= bound * (1 + 1e-6) or r.norm_ux_H2 <= 0.0) for r in records]


def memory_seminorm_at(grid: Grid, kernel: RelaxationKernel, times, U) -> np.ndarray:
    return _memory_seminorms(grid, kernel, times, U)


@dataclass
class WellReport:
    constants: WellConstants
    classification: Classification
    mass_threshold: float
    certificate: BlowupCertificate | None = None

    def as_dict(self) -> dict:
        return {
            "constants": self.constants.as_dict(),
            "classification": self.classification.as_dict(),
            "mass_threshold": self.mass_threshold,
            "certificate": None if self.certificate is None else self.certificate.as_dict(),
        }


def assess_initial_data(grid: Grid, u0, u1, p: float, a: float, kernel: RelaxationKernel,
                        delta: float | None = None, seed: int | None = None,
                        source_enabled: bool = True) -> WellReport:
    """Constants, classification and (when applicable) blow-up certificate for (u0, u1)."""
    from .energetics import functional_E

    E0 = functional_E(grid, u0, u1, p, kernel, source_enabled=source_enabled)
    I0 = functional_I(grid, u0, p, kernel, source_enabled=source_enabled)
    const = well_constants(grid, kernel, p, seed=seed)
    const.delta = default_delta(E0, const.d1) if delta is None else delta
    if const.delta >= 1:
        mass_ok, thr = False, math.nan
    else:
        thr = mass_threshold(p, const.delta)
        mass_ok = check_mass_condition(kernel, p, const.delta)
    cls = classify(E0, I0, const, mass_ok)
    if not np.any(u0) and not np.any(u1):
        # the zero solution is global; neither strict inequality can hold for it
        cls.tag = WellClass.STABLE
    cert = None
    if cls.tag is WellClass.UNSTABLE_BLOWUP:
        cert = blowup_bound(grid, u0, u1, E0, const, a, mass_ok, I0=I0)
    return WellReport(const, cls, thr, cert)
