"""Full problem assembly and machine-checkable proxies for its hypotheses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .norms import matrix_norm, vector_norm
from .schedule import ImpulseSchedule, ratio_constant_K, bound_constants
from .timefn import DelayLaw, DelayViolation, MatrixFunction, validate_delay

__all__ = [
    "DelayTerm",
    "DelaySystem",
    "HypothesisCheck",
    "HypothesisReport",
    "LagBound",
    "validate_hypotheses",
    "weighted_coefficient",
    "lag_bound",
    "history_term_g",
]


@dataclass(frozen=True, eq=False)
class DelayTerm:
    """One delayed coupling: coefficient matrix A(t) applied to x(h(t))."""

    coeff: MatrixFunction
    delay: DelayLaw


@dataclass(frozen=True, eq=False)
class DelaySystem:
    """x'(t) + sum_k A_k(t) x(h_k(t)) = f(t) with jumps from ``schedule``.

    ``forcing`` and ``phi`` may be None (interpreted as zero); ``phi`` is the
    initial function supplying x on negative times.  ``horizon`` is the
    working interval [0, horizon] on which grids, norms and suprema live.
    """

    n: int
    terms: tuple
    schedule: ImpulseSchedule
    horizon: float
    forcing: MatrixFunction | None = None
    phi: MatrixFunction | None = None
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if term.coeff.shape != (self.n, self.n):
                raise ValueError(
                    f"coefficient matrix {term.coeff.shape} does not match n={self.n}"
                )
        for name in ("forcing", "phi"):
            fn = getattr(self, name)
            if fn is not None and fn.shape != (self.n, 1):
                raise ValueError(f"{name} must be an {self.n}x1 matrix function")
        if self.schedule.dim != self.n:
            raise ValueError("schedule dimension does not match the system")
        if self.horizon > self.schedule.coverage() + 1e-12:
            raise ValueError(
                "schedule does not cover the working horizon; extend the "
                "impulse list or declare gap_mode='finite'"
            )
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float).reshape(-1)
            if len(x0) != self.n:
                raise ValueError("x0 does not match the dimension")
            object.__setattr__(self, "x0", x0)

    @property
    def m(self) -> int:
        return len(self.terms)

    def forcing_at(self, t: float) -> np.ndarray:
        if self.forcing is None:
            return np.zeros(self.n)
        return self.forcing(t)[:, 0]

    def phi_at(self, xi: float) -> np.ndarray:
        if self.phi is None:
            return np.zeros(self.n)
        return self.phi(xi)[:, 0]

    def initial_value(self) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(self.n)
        return self.x0.copy()


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    value: float | None = None
    detail: str = ""


@dataclass
class HypothesisReport:
    checks: list
    jump_norm_bound: float = math.nan   # largest ||B_j||
    count_ratio: float = math.nan        # grid value of the counting constant
    growth_base: float = math.nan        # max{jump_norm_bound, 1}
    count_rate: float = math.nan         # max{count_ratio, 1}
    max_lag: float = math.nan

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            val = "" if c.value is None else f" value={c.value:.6g}"
            det = f" ({c.detail})" if c.detail else ""
            out.append(f"[{mark}] {c.name}{val}{det}")
        out.append(
            f"derived: growth_base={self.growth_base:.6g} "
            f"count_rate={self.count_rate:.6g} max_lag={self.max_lag:.6g}"
        )
        return out


def _window_integrals(series_fn, grid: np.ndarray) -> float:
    """Largest trapezoid integral over the unit windows [k, k+1] on the grid."""
    vals = np.array([series_fn(t) for t in grid])
    best = 0.0
    t_end = grid[-1]
    k = 0
    while k + 1.0 <= t_end + 1e-9:
        mask = (grid >= k - 1e-12) & (grid <= k + 1.0 + 1e-12)
        if np.sum(mask) >= 2:
            best = max(best, float(np.trapz(vals[mask], grid[mask])))
        k += 1
    return best


def validate_hypotheses(sys: DelaySystem, grid_step: float) -> HypothesisReport:
    """Run finite-grid proxies for the standing assumptions and report each.

    Measurability is not checkable numerically; local integrability is
    proxied by finite trapezoid integrals over unit windows, the initial
    function's boundedness by sampling over the reachable negative range.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    checks: list[HypothesisCheck] = []
    grid = np.linspace(0.0, sys.horizon, max(2, int(round(sys.horizon / grid_step)) + 1))

    times = sys.schedule.times
    ordered = times[0] == 0.0 and bool(np.all(np.diff(times) > 0))
    detail = "" if ordered else "times must start at 0 and increase strictly"
    if ordered and sys.schedule.gap_mode == "finite":
        detail = "finite impulse list; divergence of the times is declared, not checked"
    checks.append(HypothesisCheck("a1 ordered impulse times", ordered, detail=detail))

    integrable = True
    worst = 0.0
    note = ""
    try:
        for idx, term in enumerate(sys.terms):
            worst = max(worst, _window_integrals(lambda t: matrix_norm(term.coeff(t)), grid))
        worst = max(worst, _window_integrals(lambda t: vector_norm(sys.forcing_at(t)), grid))
        integrable = math.isfinite(worst)
    except ArithmeticError as exc:
        integrable, note = False, str(exc)
    checks.append(
        HypothesisCheck("a2 locally integrable coefficients", integrable, worst, note)
    )

    max_lag = 0.0
    delays_ok = True
    note = ""
    for idx, term in enumerate(sys.terms):
        try:
            max_lag = max(max_lag, validate_delay(term.delay, grid))
        except DelayViolation as exc:
            delays_ok = False
            note = f"term {idx}: {exc}"
            break
    checks.append(HypothesisCheck("a3 delayed arguments lag behind", delays_ok, max_lag, note))

    phi_ok = True
    phi_sup = 0.0
    if sys.phi is not None and max_lag > 0:
        xi = np.linspace(-max_lag, -1e-9, 200)
        try:
            phi_sup = max(vector_norm(sys.phi_at(x)) for x in xi)
            phi_ok = math.isfinite(phi_sup)
        except ArithmeticError as exc:
            phi_ok, note = False, str(exc)
    checks.append(HypothesisCheck("a4 bounded initial function", phi_ok, phi_sup))

    jump_bound = sys.schedule.max_jump_norm()
    checks.append(
        HypothesisCheck("a5 bounded jump matrices", math.isfinite(jump_bound), jump_bound)
    )

    k_ok = True
    k_val = 0.0
    note = ""
    if ordered:
        k_val = ratio_constant_K(sys.schedule, sys.horizon, grid_step)
        k_ok = math.isfinite(k_val)
    else:
        k_ok, note = False, "counting constant undefined for unordered times"
    checks.append(HypothesisCheck("a6 finite impulse-count ratio", k_ok, k_val, note))

    growth_base, count_rate = (math.nan, math.nan)
    if ordered:
        growth_base, count_rate = bound_constants(sys.schedule, k_val)
    return HypothesisReport(
        checks,
        jump_norm_bound=jump_bound,
        count_ratio=k_val,
        growth_base=growth_base,
        count_rate=count_rate,
        max_lag=max_lag,
    )


def weighted_coefficient(sys: DelaySystem, k: int, nu: float, t: float) -> np.ndarray:
    """Coefficient matrix of term ``k`` amplified by exp(nu * lag(t))."""
    if not 0 <= k < sys.m:
        raise IndexError(f"term index {k} out of range")
    term = sys.terms[k]
    lag = t - term.delay.delayed_time(t)
    return math.exp(nu * lag) * term.coeff(t)


class LagBound(NamedTuple):
    delta: float
    uniform: bool  # False when the lag is still growing at the horizon


def lag_bound(sys: DelaySystem, grid_points: int = 1001) -> LagBound:
    """Supremum of t - h_k(t) over the working grid, with a uniformity flag.

    Proportional delays have lags growing linearly in t; when the supremum
    sits at the end of the horizon and is still increasing there, no
    horizon-independent bound exists and the result is flagged.
    """
    if sys.m == 0:
        return LagBound(0.0, True)
    grid = np.linspace(0.0, sys.horizon, grid_points)
    delta = 0.0
    uniform = True
    for term in sys.terms:
        lags = np.array([t - term.delay.delayed_time(t) for t in grid])
        sup = float(np.max(lags))
        delta = max(delta, sup)
        k = int(np.argmax(lags))
        if k == len(grid) - 1 and len(grid) >= 2 and lags[-1] > lags[-2] + 1e-12:
            uniform = False
    return LagBound(delta, uniform)


def history_term_g(sys: DelaySystem, t: float) -> np.ndarray:
    """sum_k A_k(t) phi(h_k(t)), with the phi factor zeroed once h_k(t) >= 0."""
    out = np.zeros(sys.n)
    if t < 0:
        raise ValueError("history term is defined for t >= 0")
    for term in sys.terms:
        u = term.delay.delayed_time(t)
        if u < 0:
            out += term.coeff(t) @ sys.phi_at(u)
    return out
