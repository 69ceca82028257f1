"""The rho_nu penalty family and its scalar proximal operator.

``rho_nu(t) = |t| / (1 + |t|**(1 - nu))`` interpolates between ``|t|/2``
(``nu = 1``) and the bounded ``|t| / (1 + |t|)`` as ``nu -> 0``. Its slope
at the origin is 1 for every ``nu < 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NU_MIN = 0.05


@dataclass(frozen=True)
class PenaltySpec:
    lam: float
    nu: float = 0.1

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ValueError(f"penalty level must be finite and >= 0, got {self.lam}")
        if not NU_MIN <= self.nu <= 1:
            raise ValueError(f"nu must lie in [{NU_MIN}, 1], got {self.nu}")


def rho(spec: PenaltySpec, theta):
    a = np.abs(np.asarray(theta, dtype=float))
    return a / (1.0 + a ** (1.0 - spec.nu))


def penalty_value(spec: PenaltySpec, theta_vec) -> float:
    """Unweighted sum ``P_nu(theta)``; multiply by ``spec.lam`` for the penalty term."""
    return float(np.sum(rho(spec, theta_vec)))


def _drho(u, nu):
    # derivative for u > 0
    k = 1.0 - nu
    uk = u**k
    return (1.0 + nu * uk) / (1.0 + uk) ** 2


def _d2rho(u, nu):
    k = 1.0 - nu
    uk = u**k
    return k * u ** (k - 1.0) * (nu - 2.0 - nu * uk) / (1.0 + uk) ** 3


@lru_cache(maxsize=4096)
def threshold(weight: float, nu: float) -> float:
    """Largest ``|z|`` that the prox of ``weight * rho_nu`` maps to zero.

    At the threshold the nonzero stationary point ``u`` and the origin give
    equal objective values, which reduces to
    ``u / 2 = weight * (rho(u)/u - rho'(u))``; solved by bisection.
    """
    if weight <= 0:
        return 0.0
    if nu >= 1.0:
        return weight / 2.0
    k = 1.0 - nu

    def gap(u):
        uk = u**k
        return weight * (1.0 / (1.0 + uk) - _drho(u, nu)) - u / 2.0

    # gap > 0 near 0 (it behaves like u**k) and < 0 for large u
    lo, hi = 0.0, max(1.0, 4.0 * weight)
    while gap(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    if u <= 0:
        return weight
    return float(u + weight * _drho(u, nu))


def _stationary_root(z, weight, nu):
    """Largest root of ``u - z + weight * rho'(u)`` on ``(0, z]`` for z > threshold.

    ``rho'`` is convex and decreasing, so the function is convex; Newton
    from ``u = z`` (where it is positive) descends monotonically onto the
    largest root. Bisection takes over if a step leaves the bracket.
    """
    u = z.copy()
    lo = np.zeros_like(z)
    hi = z.copy()
    for _ in range(100):
        g = u - z + weight * _drho(u, nu)
        dg = 1.0 + weight * _d2rho(u, nu)
        pos = g > 0
        hi = np.where(pos, np.minimum(hi, u), hi)
        lo = np.where(pos, lo, np.maximum(lo, u))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg > 0, g / dg, np.inf)
        new = u - step
        bad = ~((new > lo) & (new < hi)) | ~np.isfinite(new)
        new = np.where(bad, 0.5 * (lo + hi), new)
        if np.all(np.abs(new - u) <= 1e-15 * np.maximum(1.0, np.abs(u))):
            u = new
            break
        u = new
    return u


def prox(spec: PenaltySpec, z, step: float = 1.0):
    """Global minimizer of ``(u - z)**2 / 2 + step * lam * rho_nu(u)``, entrywise.

    Entries with ``|z|`` at or below the threshold come back as exact zeros.
    """
    z = np.asarray(z, dtype=float)
    weight = float(step) * spec.lam
    if weight == 0:
        return z.copy()
    if spec.nu >= 1.0:
        return np.sign(z) * np.maximum(np.abs(z) - weight / 2.0, 0.0)
    tau = threshold(weight, spec.nu)
    a = np.abs(z)
    out = np.zeros_like(a)
    active = a > tau
    if np.any(active):
        out[active] = _stationary_root(a[active], weight, spec.nu)
    return np.sign(z) * out
