"""Closed-form approximation-ratio calculator.

Recomputes the worst-case guarantees of the algorithm portfolio:

* the cycle/tree trade-off for general capacity, via the Hamiltonian-cycle
  quality function ``f`` below (a two-variable minimization after fixing
  ``theta = 1 - tau``);
* the fixed-capacity guarantee ``max{g(ceil(x0)), g(floor(x0))}`` with
  ``g(x) = 3 + ln((k+1-x)/(floor(k/2)+1)) - 1/x`` and
  ``x0 = (sqrt(4k+5)-1)/2``, together with the rounding intensity recipe
  used by the LP tree algorithm;
* harmonic numbers as the classic weighted set-cover reference constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REGIMES = ("splittable-general", "unsplittable-general", "fixed-k", "splittable-fixed-k")


def _f_objective(tau, rho, eps):
    x = (3 * rho + tau - 4 * tau * rho) / (1 - rho)
    zeta = x + (eps / (tau * rho)) * (1 - tau * rho - x)
    return (1 + zeta) / (1 - tau) + 3 * eps / tau + 3 * rho / ((1 - rho) * (1 - tau)) - 1.0


def ratio_f_eps(eps: float, grid: int = 200, refine_tol: float = 1e-6) -> float:
    """Cycle-quality trade-off function: grid search plus coordinate descent.

    Minimizes over ``0 < tau, rho <= 1/6`` with ``theta = 1 - tau``.  Monotone
    non-decreasing in ``eps`` and vanishing as ``eps -> 0``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    hi = 1.0 / 6.0
    axis = np.linspace(hi / grid, hi, grid)
    T, R = np.meshgrid(axis, axis, indexing="ij")
    vals = _f_objective(T, R, eps)
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    tau, rho = float(T[i, j]), float(R[i, j])

    invphi = (math.sqrt(5.0) - 1.0) / 2.0

    def golden(fun, lo, up):
        a, b = lo, up
        while b - a > 1e-14 + 1e-10 * b:
            c1 = b - invphi * (b - a)
            c2 = a + invphi * (b - a)
            if fun(c1) < fun(c2):
                b = c2
            else:
                a = c1
        return 0.5 * (a + b)

    best = _f_objective(tau, rho, eps)
    for _ in range(80):
        tau = golden(lambda t: _f_objective(t, rho, eps), max(1e-13, tau / 3), min(hi, tau * 3))
        rho = golden(lambda r: _f_objective(tau, r, eps), max(1e-13, rho / 3), min(hi, rho * 3))
        cur = _f_objective(tau, rho, eps)
        if best - cur <= refine_tol * abs(best):
            best = cur
            break
        best = cur
    return float(best)


def f_eps_minimizer(eps: float) -> tuple[float, float, float]:
    """(value, tau, rho) at the minimum; used to confirm the constraint box."""
    hi = 1.0 / 6.0
    grid = 200
    axis = np.linspace(hi / grid, hi, grid)
    T, R = np.meshgrid(axis, axis, indexing="ij")
    vals = _f_objective(T, R, eps)
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    tau, rho = float(T[i, j]), float(R[i, j])
    for _ in range(40):
        taus = np.clip(np.linspace(tau * 0.5, tau * 1.5, 41), 1e-13, hi)
        tau = float(taus[np.argmin(_f_objective(taus, rho, eps))])
        rhos = np.clip(np.linspace(rho * 0.5, rho * 1.5, 41), 1e-13, hi)
        rho = float(rhos[np.argmin(_f_objective(tau, rhos, eps))])
    return _f_objective(tau, rho, eps), tau, rho


def _crossing(lhs, lo: float = 1e-9, hi: float = 0.45, iters: int = 64) -> float:
    """Solve lhs(eps) = 2 f(eps); lhs decreasing, f non-decreasing."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if lhs(mid) > 2.0 * ratio_f_eps(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def general_splittable_ratio() -> tuple[float, float]:
    """min over eps of max{4 - 2 eps, 3 + 2 f(eps)} -> (ratio, eps*); about 4 - 1/1500."""
    eps = _crossing(lambda e: 1.0 - 2.0 * e)
    return 4.0 - 2.0 * eps, eps


def general_unsplittable_ratio(delta0: float = 1e-6) -> tuple[float, float]:
    """min over eps of max{4 - 2 eps, 3 + ln2 + 2 f(eps) + delta0}; about 4 - 1/50000."""
    eps = _crossing(lambda e: 1.0 - math.log(2.0) - delta0 - 2.0 * e)
    return 4.0 - 2.0 * eps, eps


def splittable_fixed_k_floor() -> tuple[float, float]:
    """min over eps of max{3 + ln2 - eps, 3 + 2 f(eps)}; about 3 + ln2 - 1/9000."""
    eps = _crossing(lambda e: math.log(2.0) - e)
    return 3.0 + math.log(2.0) - eps, eps


def x0_fixed(k: int) -> float:
    """Stationary point of g: (sqrt(4k+5) - 1) / 2."""
    return (math.sqrt(4.0 * k + 5.0) - 1.0) / 2.0


def g_fixed(k: int, x: float) -> float:
    """g(x) = 3 + ln((k+1-x)/(floor(k/2)+1)) - 1/x."""
    return 3.0 + math.log((k + 1.0 - x) / (k // 2 + 1.0)) - 1.0 / x


def fixed_k_ratio(k: int) -> tuple[float, int]:
    """max{g(ceil(x0)), g(floor(x0))} and the integer argument attaining it."""
    if k < 1:
        raise ValueError("capacity must be positive")
    x0 = x0_fixed(k)
    lo, hi = max(1, math.floor(x0)), max(1, math.ceil(x0))
    if g_fixed(k, hi) >= g_fixed(k, lo):
        return g_fixed(k, hi), hi
    return g_fixed(k, lo), lo


def gamma_recipe(k: int) -> float:
    """Rounding intensity for the LP tree algorithm at fixed capacity.

    With the worst-case share ``x* = 1/x_arg`` this is
    ``ln((k+1-x_arg)/(floor(k/2)+1))``; zero means the rounding phase is
    skipped and the plain tree partition runs.
    """
    _, x_arg = fixed_k_ratio(k)
    return max(0.0, math.log((k + 1.0 - x_arg) / (k // 2 + 1.0)))


def harmonic(k: int) -> float:
    return float(sum(1.0 / i for i in range(1, k + 1)))


@dataclass(frozen=True)
class RatioReport:
    """A theoretical guarantee with its witness parameters."""

    k: int | None
    regime: str
    theoretical_ratio: float
    witness: dict
    harmonic_reference: tuple  # H_1..H_30

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "regime": self.regime,
            "theoretical_ratio": self.theoretical_ratio,
            "witness": dict(self.witness),
            "harmonic_reference": list(self.harmonic_reference),
        }


_HARMONICS = tuple(harmonic(i) for i in range(1, 31))


def tradeoff_ratio(k: int | None = None, regime: str = "fixed-k") -> RatioReport:
    """Theoretical approximation ratio for a regime (and capacity, if fixed)."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; choose from {REGIMES}")
    if regime == "splittable-general":
        ratio, eps = general_splittable_ratio()
        witness = {"eps": eps}
    elif regime == "unsplittable-general":
        ratio, eps = general_unsplittable_ratio()
        witness = {"eps": eps, "delta0": 1e-6}
    else:
        if k is None or k < 3:
            raise ValueError("fixed-k regimes need k >= 3")
        ratio, x_arg = fixed_k_ratio(k)
        witness = {
            "x0": x0_fixed(k),
            "x_arg": x_arg,
            "x_star": 1.0 / x_arg,
            "gamma": gamma_recipe(k),
        }
        if regime == "splittable-fixed-k":
            floor_ratio, eps = splittable_fixed_k_floor()
            if floor_ratio < ratio:
                ratio = floor_ratio
                witness = {"eps": eps, "source": "general-k trade-off"}
            else:
                witness["source"] = "fixed-k"
    return RatioReport(
        k=k,
        regime=regime,
        theoretical_ratio=float(ratio),
        witness=witness,
        harmonic_reference=_HARMONICS,
    )
