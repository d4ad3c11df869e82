"""Osgood moduli of continuity and Bihari-LaSalle comparison bounds.

A growth function Theta rates how fast the L^p norms of the data may blow up
as p -> 3^-; it induces the modulus

    omega_Theta(s) = s (1 - log s) Theta((2 - 3 log s) / (1 - log s))   s in (0, 1)
                   = Theta(2)                                           s >= 1.

The Osgood condition int_0^1 ds / omega(s) = +infty is what upgrades the
velocity modulus to a uniqueness class; the Bihari-LaSalle bound

    g(t) <= Omega^-1(Omega(g(0) + eta) + C t),   Omega(z) = -int_z^1 ds / omega(s)

quantifies it.  Everything here is scalar analysis: quadrature of 1 / omega,
the increasing function Omega and its inverse, and finite-grid verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

DEFAULT_EPS_GRID = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)
DEFAULT_ETA_GRID = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10)


class OmegaRangeError(ValueError):
    """Omega^-1 asked for a value below the (finite) range of a non-Osgood
    modulus, or brackets could not be established."""


@dataclass(frozen=True)
class GrowthFunction:
    """Nondecreasing Theta: [1, 3) -> [1, inf); may blow up at 3^-."""

    fn: Callable[[np.ndarray], np.ndarray]
    name: str

    def __call__(self, p):
        arr = np.asarray(p, dtype=np.float64)
        if np.any(arr < 1.0) or np.any(arr >= 3.0):
            raise ValueError("growth function domain is [1, 3)")
        out = self.fn(arr)
        return float(out) if np.ndim(p) == 0 else np.asarray(out)


def theta_constant(value=1.0):
    if value < 1.0:
        raise ValueError("growth functions take values in [1, inf)")
    return GrowthFunction(lambda p: np.full_like(p, value), "const(%g)" % value)


def theta_log():
    """Theta(s) = 1 - log(3 - s), the borderline Yudovich-type growth."""
    return GrowthFunction(lambda p: 1.0 - np.log(3.0 - p), "1-log(3-s)")


@dataclass(frozen=True)
class Modulus:
    """Modulus of continuity on (0, inf): omega(0+) = 0, positive near 0.

    osgood records the closed-form verdict when one is known (None means the
    finite-grid heuristic in osgood_integral is all we have).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    name: str
    osgood: Optional[bool] = None

    def __call__(self, s):
        arr = np.asarray(s, dtype=np.float64)
        out = self.fn(arr)
        return float(out) if np.ndim(s) == 0 else np.asarray(out)


def modulus_linear():
    return Modulus(lambda s: s, "s", osgood=True)


def modulus_loglinear():
    """s (1 - log s): the classical Yudovich modulus, Osgood but not Lipschitz.

    The same formula continues above 1 (it vanishes at s = e, so inversions
    stay below e).
    """
    return Modulus(lambda s: s * (1.0 - np.log(s)), "s(1-log s)", osgood=True)


def modulus_sqrt():
    return Modulus(lambda s: np.sqrt(s), "sqrt(s)", osgood=False)


def omega_theta(theta: GrowthFunction) -> Modulus:
    """The modulus induced by a growth function (see module docstring).

    Continuous at s = 1, concave on (0, 1) for the log growth function; for
    that Theta the value on (0, 1) simplifies to s(1 - log s)(1 + log(1 - log s)).
    """

    def fn(s):
        s = np.asarray(s, dtype=np.float64)
        if np.any(s <= 0.0):
            raise ValueError("modulus evaluated at s <= 0")
        out = np.empty_like(s)
        low = s < 1.0
        if np.any(low):
            sl = s[low]
            ell = 1.0 - np.log(sl)
            out[low] = sl * ell * theta.fn((3.0 * ell - 1.0) / ell)
        if np.any(~low):
            out[~low] = theta.fn(np.asarray(2.0))
        return out

    return Modulus(fn, "omega[%s]" % theta.name, osgood=None)


# ---------------------------------------------------------------------------
# Osgood integral and the finite-grid verdict


@dataclass
class OsgoodReport:
    eps_grid: np.ndarray
    values: np.ndarray
    verdict: str                  # "divergent" | "convergent"
    template: Optional[str]       # best-fitting growth template when divergent
    template_r2: dict = field(default_factory=dict)
    increments: np.ndarray = None


def _osgood_value(modulus, eps, tol=1e-11):
    # substitute s = exp(-t): ds / omega(s) -> exp(-t) dt / omega(exp(-t)),
    # which removes the 1/s part of the singularity at s = 0
    upper = math.log(1.0 / eps)
    val, _ = quad(
        lambda t: math.exp(-t) / float(modulus.fn(np.asarray(math.exp(-t)))),
        0.0,
        upper,
        limit=800,
        epsabs=tol,
        epsrel=1e-11,
    )
    return val


def osgood_integral(modulus: Modulus, eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
                    increment_tol=1e-9, ratio_cut=0.5) -> OsgoodReport:
    """Values of int_eps^1 ds / omega(s) along a decreasing eps grid plus a
    finite-grid divergence verdict.

    Convergent when the increments decay geometrically (successive ratio
    below ratio_cut) or fall under increment_tol outright; otherwise
    divergent, with the better-fitting of the log(1/eps) and log log(1/eps)
    growth templates reported.  A heuristic by nature: slowly divergent
    integrals (triple logs and beyond) still show non-geometric increments on
    this grid, which is exactly what the rule keys on.
    """
    eps = np.asarray(sorted(eps_grid, reverse=True), dtype=np.float64)
    values = np.array([_osgood_value(modulus, e) for e in eps])
    inc = np.diff(values)

    if inc.size == 0:
        raise ValueError("need at least two grid points for a verdict")
    ratios = inc[1:] / np.where(inc[:-1] > 0, inc[:-1], np.inf)
    convergent = inc[-1] < increment_tol or (ratios.size > 0 and np.max(ratios[-2:]) <= ratio_cut)

    r2 = {}
    for label, z in (("log", np.log(1.0 / eps)), ("loglog", np.log(np.log(1.0 / eps)))):
        coef = np.polyfit(z, values, 1)
        fit = np.polyval(coef, z)
        ss_res = float(np.sum((values - fit) ** 2))
        ss_tot = float(np.sum((values - values.mean()) ** 2))
        r2[label] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    template = None
    if not convergent:
        template = max(r2, key=r2.get)
    return OsgoodReport(eps, values, "convergent" if convergent else "divergent",
                        template, r2, inc)


@dataclass
class ConcavityReport:
    grid: np.ndarray
    second_derivatives: np.ndarray
    worst: float


def concavity_check(modulus: Modulus, grid=None, rel_step=1e-3) -> ConcavityReport:
    """Centered second differences of omega on a grid in (0, 1), scaled by
    h^2 so the entries estimate omega''.  Concave means all entries <= 0 up
    to round-off."""
    if grid is None:
        grid = np.logspace(-8, math.log10(0.99), 60)
    grid = np.asarray(grid, dtype=np.float64)
    h = np.minimum(grid * rel_step, (1.0 - grid) * 0.45)
    vals = (modulus(grid - h) - 2.0 * modulus(grid) + modulus(grid + h)) / h ** 2
    return ConcavityReport(grid, vals, float(np.max(vals)))


# ---------------------------------------------------------------------------
# Omega, its inverse, and the Bihari-LaSalle bound


def big_omega(modulus: Modulus, z, tol=1e-12):
    """Omega(z) = -int_z^1 ds / omega(s); quadrature continues on (1, z] for
    arguments above 1.  Strictly increasing wherever omega > 0."""
    z = float(z)
    if z <= 0.0:
        raise ValueError("Omega is defined for z > 0")
    if z == 1.0:
        return 0.0
    if z < 1.0:
        return -_osgood_value(modulus, z, tol=tol)
    probe = np.linspace(1.0, z, 33)
    w = modulus(probe)
    if np.any(np.asarray(w) <= 0.0):
        raise OmegaRangeError("modulus vanishes inside (1, z]; Omega undefined there")
    val, _ = quad(lambda s: 1.0 / float(modulus.fn(np.asarray(s))), 1.0, z,
                  limit=400, epsabs=tol, epsrel=1e-11)
    return val


def _upper_bracket(modulus, y, tol):
    # grow the bracket above 1; if omega vanishes at some s* > 1, Omega blows
    # up logarithmically at s*^- and the bracket is found by approaching it
    hi = 2.0
    lo_ok = 1.0
    for _ in range(200):
        try:
            if big_omega(modulus, hi, tol=tol) >= y:
                return hi
            lo_ok = hi
            hi = 1.0 + 2.0 * (hi - 1.0)
        except OmegaRangeError:
            # bisect toward the zero of omega from the last good point
            bad = hi
            for _ in range(300):
                mid = 0.5 * (lo_ok + bad)
                try:
                    if big_omega(modulus, mid, tol=tol) >= y:
                        return mid
                    lo_ok = mid
                except OmegaRangeError:
                    bad = mid
                if bad - lo_ok < 1e-13 * bad:
                    raise OmegaRangeError("could not bracket Omega^-1 above 1")
    raise OmegaRangeError("could not bracket Omega^-1 above 1")


def big_omega_inverse(modulus: Modulus, y, tol=1e-12, z_floor=1e-280):
    """Solve Omega(z) = y by bracketing and Brent's method.

    For a non-Osgood modulus Omega(0+) is finite, so sufficiently negative y
    has no preimage: OmegaRangeError.
    """
    from scipy.optimize import brentq

    y = float(y)
    if y == 0.0:
        return 1.0
    if y > 0.0:
        lo, hi = 1.0, _upper_bracket(modulus, y, tol)
        if hi == lo:
            return hi
    else:
        hi = 1.0
        lo = 0.5
        while big_omega(modulus, lo, tol=tol) > y:
            lo *= 0.25
            if lo < z_floor:
                raise OmegaRangeError(
                    "y below the range of Omega (non-Osgood modulus)")
    return brentq(lambda z: big_omega(modulus, z, tol=tol) - y, lo, hi,
                  xtol=1e-15, rtol=8.9e-16, maxiter=200)


def bihari_bound(g0, c, t, modulus: Modulus, eta_grid: Sequence[float] = DEFAULT_ETA_GRID):
    """min over eta of Omega^-1(Omega(g0 + eta) + c t).

    The eta > 0 shift keeps Omega finite when g0 = 0; the minimum lands on
    the smallest eta.  Nondecreasing in each of g0, c, t.  For omega(s) = s
    this collapses to the Gronwall bound (g0 + eta_min) exp(c t).
    """
    if g0 < 0.0 or c < 0.0 or t < 0.0:
        raise ValueError("bihari_bound expects nonnegative g0, c, t")
    best = math.inf
    ct = c * t
    for eta in eta_grid:
        y = big_omega(modulus, g0 + eta) + ct
        z = big_omega_inverse(modulus, y)
        best = min(best, z)
    return best


# ---------------------------------------------------------------------------
# Trajectory-pair diagnostics in the style of quantitative uniqueness proofs


def log_functional(x_a, x_b, weights, delta, labels=None, radius=math.inf):
    """g = sum_i w_i log(|x_a_i - x_b_i| / delta + 1) over labels in the ball
    of the given radius (labels default to all indices)."""
    x_a = np.asarray(x_a, dtype=np.float64)
    x_b = np.asarray(x_b, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    sel = np.ones(len(w), dtype=bool)
    if labels is not None and np.isfinite(radius):
        sel = np.linalg.norm(np.asarray(labels, dtype=np.float64), axis=1) <= radius
    d = np.linalg.norm(x_a[sel] - x_b[sel], axis=1)
    return float(np.sum(w[sel] * np.log(d / delta + 1.0)))


def superlevel_fraction(x_a, x_b, weights, lam, delta, labels=None, radius=math.inf):
    """Weighted fraction of labels with |x_a - x_b| >= lam, with the
    Chebyshev bound g / (W log(lam/delta + 1)) reported alongside."""
    x_a = np.asarray(x_a, dtype=np.float64)
    x_b = np.asarray(x_b, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    sel = np.ones(len(w), dtype=bool)
    if labels is not None and np.isfinite(radius):
        sel = np.linalg.norm(np.asarray(labels, dtype=np.float64), axis=1) <= radius
    wsel = w[sel]
    total = float(np.sum(wsel))
    if total == 0.0:
        return {"fraction": 0.0, "bound": 0.0, "g": 0.0}
    d = np.linalg.norm(x_a[sel] - x_b[sel], axis=1)
    frac = float(np.sum(wsel[d >= lam])) / total
    g = float(np.sum(wsel * np.log(d / delta + 1.0)))
    bound = g / (total * math.log(lam / delta + 1.0))
    return {"fraction": frac, "bound": bound, "g": g}
