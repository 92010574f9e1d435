"""Least-squares fits of energy series to exponential and polynomial decay envelopes."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .kernels import XiFunction

log = logging.getLogger(__name__)

ENERGY_FLOOR = 1e-14
DEFAULT_T0 = 1.0
ROUNDOFF = 1e-12  # relative excess treated as equality with the envelope


class FitError(ValueError):
    pass


@dataclass
class DecayFit:
    model: str  # "exponential" or "polynomial"
    K: float
    rate: float  # kappa > 0 for exponential, fitted exponent (< 0) for polynomial
    t0: float
    r2: float
    violation_fraction: float = 0.0
    theoretical_exponent: float | None = None
    n_points: int = 0

    def envelope(self, s) -> np.ndarray:
        """K e^{-kappa s} or K (1 + s)^exponent at s = int_{t0}^t xi."""
        s = np.asarray(s, dtype=float)
        if self.model == "exponential":
            return self.K * np.exp(-self.rate * s)
        return self.K * (1.0 + s) ** self.rate

    def as_dict(self) -> dict:
        return asdict(self)


def xi_integral(xi: XiFunction, t0: float, t):
    return xi.integral(t0, t)


def _series(records):
    if hasattr(records, "__len__") and len(records) and hasattr(records[0], "E"):
        t = np.array([r.t for r in records], dtype=float)
        E = np.array([r.E for r in records], dtype=float)
    else:
        t, E = (np.asarray(a, dtype=float) for a in records)
    return t, E


def _window(records, t0):
    t, E = _series(records)
    if t.size == 0:
        raise FitError("empty energy series")
    E0 = E[0]
    sel = t >= t0
    bad = np.flatnonzero(sel & ~(E > 0))
    if bad.size:
        log.error("non-positive energies at record indices %s", bad.tolist())
        raise FitError(f"non-positive energies in fit window at indices {bad.tolist()[:10]}")
    if E0 > 0:
        sel &= E >= ENERGY_FLOOR * E0
    if np.count_nonzero(sel) < 10:
        raise FitError("need at least 10 records with t >= t0 and E > 0")
    return t[sel], E[sel]


def _linfit(X, Y):
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = np.sum((Y - Y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, float(min(1.0, max(0.0, r2)))


def fit_exponential(records, xi: XiFunction, t0: float = DEFAULT_T0) -> DecayFit:
    """log E = log K - kappa int_{t0}^t xi."""
    t, E = _window(records, t0)
    s = xi.integral(t0, t)
    slope, intercept, r2 = _linfit(s, np.log(E))
    fit = DecayFit("exponential", float(np.exp(intercept)), float(-slope), t0, r2, n_points=t.size)
    fit.violation_fraction = _violations(t, E, fit, xi, 1.0)
    return fit


def fit_polynomial(records, xi: XiFunction, r: float, t0: float = DEFAULT_T0) -> DecayFit:
    """log E = log K + exponent log(1 + int_{t0}^t xi); -1/(r-1) is reported alongside."""
    if not (1.0 < r < 1.5):
        raise FitError(f"polynomial model needs 1 < r < 3/2, got {r}")
    t, E = _window(records, t0)
    s = xi.integral(t0, t)
    slope, intercept, r2 = _linfit(np.log1p(s), np.log(E))
    fit = DecayFit("polynomial", float(np.exp(intercept)), float(slope), t0, r2,
                   theoretical_exponent=-1.0 / (r - 1.0), n_points=t.size)
    fit.violation_fraction = _violations(t, E, fit, xi, 1.0)
    return fit


def _violations(t, E, fit, xi, slack):
    env = fit.envelope(xi.integral(fit.t0, t))
    return float(np.mean(E > slack * env * (1 + ROUNDOFF)))


@dataclass
class EnvelopeCheck:
    violation_fraction: float
    min_slack: float


def check_envelope(records, fit: DecayFit, xi: XiFunction, slack: float = 1.0) -> EnvelopeCheck:
    """Fraction of records above slack * envelope, and the smallest slack giving zero."""
    if slack < 1.0:
        raise ValueError("slack must be >= 1")
    t, E = _series(records)
    sel = t >= fit.t0
    t, E = t[sel], E[sel]
    env = fit.envelope(xi.integral(fit.t0, t))
    frac = float(np.mean(E > slack * env * (1 + ROUNDOFF))) if t.size else 0.0
    min_slack = float(max(1.0, np.max(E / env) / (1 + ROUNDOFF))) if t.size else 1.0
    return EnvelopeCheck(frac, min_slack)


def write_envelope_csv(path, records, fit: DecayFit, xi: XiFunction) -> None:
    t, E = _series(records)
    sel = t >= fit.t0
    env = fit.envelope(xi.integral(fit.t0, t[sel]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E", "envelope"])
        for ti, Ei, vi in zip(t[sel], E[sel], env):
            w.writerow([repr(float(ti)), repr(float(Ei)), repr(float(vi))])


def select_fit(records, xi: XiFunction, r: float | None, t0: float = DEFAULT_T0) -> tuple[DecayFit, list[DecayFit]]:
    """Run both models and keep the higher R^2.

    The fitted polynomial exponent does not depend on r; r only fixes the
    theoretical exponent, which is left empty when r is outside (1, 3/2).
    """
    fits = [fit_exponential(records, xi, t0)]
    in_range = r is not None and 1.0 < r < 1.5
    poly = fit_polynomial(records, xi, r if in_range else 1.25, t0)
    if not in_range:
        poly.theoretical_exponent = None
    fits.append(poly)
    best = max(fits, key=lambda f: f.r2)
    return best, fits
