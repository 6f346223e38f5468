"""Truncated function-space norms on sampled data.

All integrals are composite trapezoid sums whose panels are split at declared
jump points: the panel ending at a jump uses the stored left limit as its
right endpoint, the panel starting there uses the (right-continuous) stored
value.  p-th powers are applied pointwise before quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "vector_norm",
    "matrix_norm",
    "SampledFunction",
    "lp_norm",
    "mp_norm",
    "mp_norm_detail",
    "MpDetail",
    "dp_norm",
    "dp_tilde_norm",
    "membership_probe",
    "ProbeResult",
]


def vector_norm(v) -> float:
    """Max-absolute-value norm of a vector."""
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v))) if v.size else 0.0


def matrix_norm(m) -> float:
    """Max-row-sum norm (the matrix norm induced by :func:`vector_norm`)."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return float(np.max(np.sum(np.abs(m), axis=1))) if m.size else 0.0


def _pointwise_norm(values: np.ndarray) -> np.ndarray:
    """Reduce samples of shape (N,), (N,n) or (N,n,m) to a norm series."""
    if values.ndim == 1:
        return np.abs(values)
    if values.ndim == 2:
        return np.max(np.abs(values), axis=1)
    return np.max(np.sum(np.abs(values), axis=2), axis=1)


@dataclass
class SampledFunction:
    """Function samples on an increasing grid with optional jump annotations.

    ``values`` may be scalar, vector or matrix samples; norms are taken
    pointwise.  ``jump_indices`` mark grid points where the function is
    right-continuous with a distinct left limit stored in ``left_values``.
    """

    grid: np.ndarray
    values: np.ndarray
    jump_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    left_values: np.ndarray | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) != len(self.values):
            raise ValueError("grid and values must be aligned 1-d/N-d arrays")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        self.jump_indices = np.asarray(self.jump_indices, dtype=int)

    @classmethod
    def from_callable(cls, f, grid) -> "SampledFunction":
        grid = np.asarray(grid, dtype=float)
        vals = np.asarray([f(t) for t in grid], dtype=float)
        return cls(grid, vals)

    def norm_series(self) -> np.ndarray:
        return _pointwise_norm(self.values)

    def left_norm_series(self) -> np.ndarray:
        """Norm series with left limits substituted at jump points."""
        series = self.norm_series().copy()
        if self.left_values is not None and len(self.jump_indices):
            series[self.jump_indices] = _pointwise_norm(
                np.asarray(self.left_values, dtype=float)
            )
        return series


def _power_integral(fn: SampledFunction, t0: float, t1: float, p: float) -> float:
    """Trapezoid integral of ||fn||^p over [t0, t1] with jump-aligned panels."""
    grid = fn.grid
    if t0 < grid[0] - 1e-12 or t1 > grid[-1] + 1e-12:
        raise ValueError("interval outside the sampled span")
    if t1 <= t0:
        raise ValueError("empty integration interval")
    right = fn.norm_series() ** p          # value entering each panel from the left
    left = fn.left_norm_series() ** p      # value closing each panel from the right

    i0 = int(np.searchsorted(grid, t0, side="left"))
    i1 = int(np.searchsorted(grid, t1, side="right")) - 1
    i0 = min(max(i0, 0), len(grid) - 1)
    i1 = min(max(i1, 0), len(grid) - 1)

    def interp(series, t):
        j = int(np.searchsorted(grid, t, side="right")) - 1
        j = min(max(j, 0), len(grid) - 2)
        w = (t - grid[j]) / (grid[j + 1] - grid[j])
        return (1 - w) * right[j] + w * series[j + 1]

    total = 0.0
    # partial panel before the first interior grid point
    if grid[i0] > t0 + 1e-15:
        total += 0.5 * (grid[i0] - t0) * (interp(left, t0) + left[i0])
    # full interior panels
    if i1 > i0:
        h = np.diff(grid[i0 : i1 + 1])
        total += float(np.sum(0.5 * h * (right[i0:i1] + left[i0 + 1 : i1 + 1])))
    # partial panel after the last interior grid point
    if t1 > grid[i1] + 1e-15:
        total += 0.5 * (t1 - grid[i1]) * (right[i1] + interp(left, t1))
    return total


def lp_norm(fn: SampledFunction, p, interval) -> float:
    """Truncated L_p norm over ``interval``; ``p`` may be ``math.inf``."""
    t0, t1 = float(interval[0]), float(interval[1])
    if p == math.inf:
        if t1 < t0:
            raise ValueError("empty interval")
        grid = fn.grid
        mask = (grid >= t0 - 1e-12) & (grid <= t1 + 1e-12)
        if not np.any(mask):
            raise ValueError("interval contains no samples")
        candidates = [float(np.max(fn.norm_series()[mask]))]
        if fn.left_values is not None and len(fn.jump_indices):
            jmask = mask[fn.jump_indices]
            if np.any(jmask):
                candidates.append(
                    float(np.max(fn.left_norm_series()[fn.jump_indices][jmask]))
                )
        return max(candidates)
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    return _power_integral(fn, t0, t1, p) ** (1.0 / p)


@dataclass
class MpDetail:
    value: float
    upper_estimate: float
    window_starts: np.ndarray
    window_values: np.ndarray  # p-th power window integrals
    increasing_at_horizon: bool


def mp_norm_detail(fn: SampledFunction, p: float, horizon: float) -> MpDetail:
    """Sliding unit-window L_p supremum over [0, horizon].

    Window starts run over the grid, so the reported value is a lower bound
    of the true supremum; ``upper_estimate`` pads it by the largest
    neighbouring-window difference.  ``increasing_at_horizon`` flags a
    supremum still growing at the truncation point, i.e. a value that says
    nothing about the untruncated norm.
    """
    p = float(p)
    if horizon < 1.0:
        raise ValueError("horizon must be at least one window long")
    grid = fn.grid
    starts = grid[(grid >= -1e-12) & (grid <= horizon - 1.0 + 1e-12)]
    if len(starts) == 0:
        raise ValueError("no admissible window starts on the grid")
    vals = np.array([_power_integral(fn, s, s + 1.0, p) for s in starts])
    k = int(np.argmax(vals))
    slack = float(np.max(np.abs(np.diff(vals)))) if len(vals) > 1 else 0.0
    increasing = (
        k == len(vals) - 1 and len(vals) >= 2 and vals[-1] > vals[-2] + 1e-15
    )
    return MpDetail(
        value=float(vals[k]) ** (1.0 / p),
        upper_estimate=float(vals[k] + slack) ** (1.0 / p),
        window_starts=starts,
        window_values=vals,
        increasing_at_horizon=bool(increasing),
    )


def mp_norm(fn: SampledFunction, p: float, horizon: float) -> float:
    return mp_norm_detail(fn, p, horizon).value


def _traj_value_function(traj) -> SampledFunction:
    return SampledFunction(
        traj.grid,
        traj.values,
        jump_indices=traj.jump_indices,
        left_values=traj.values_left,
    )


def _traj_deriv_function(traj) -> SampledFunction:
    if traj.derivs is None:
        raise ValueError("trajectory carries no derivative samples")
    return SampledFunction(
        traj.grid,
        traj.derivs,
        jump_indices=traj.jump_indices,
        left_values=traj.derivs_left,
    )


def dp_norm(traj, p, interval) -> float:
    """L_p norm of the trajectory plus L_p norm of its stored derivative."""
    return lp_norm(_traj_value_function(traj), p, interval) + lp_norm(
        _traj_deriv_function(traj), p, interval
    )


def dp_tilde_norm(traj, a: float, p, interval) -> float:
    """||x(0)|| + ||x' + a x||_{L_p}: the damped-residual form of the norm."""
    if traj.derivs is None:
        raise ValueError("trajectory carries no derivative samples")
    combo = traj.derivs + a * traj.values
    combo_left = None
    if traj.values_left is not None and traj.derivs_left is not None:
        combo_left = traj.derivs_left + a * traj.values_left
    fn = SampledFunction(
        traj.grid, combo, jump_indices=traj.jump_indices, left_values=combo_left
    )
    return vector_norm(traj.values[0]) + lp_norm(fn, p, interval)


@dataclass
class ProbeResult:
    verdict: str  # "member" | "not-member" | "inconclusive"
    horizons: np.ndarray
    powers: np.ndarray      # p-th power integrals up to each horizon
    increments: np.ndarray

    def rows(self):
        incs = np.concatenate([[self.powers[0]], self.increments])
        return list(zip(self.horizons, self.powers, incs))


def membership_probe(fn: SampledFunction, p: float, horizons, tol: float) -> ProbeResult:
    """Saturation test for membership of a truncated L_p space.

    The p-th power integrals up to each horizon must have decreasing
    increments whose last value falls below ``tol`` for a "member" verdict;
    growing increments yield "not-member"; anything else is inconclusive.
    """
    horizons = np.asarray(sorted(float(h) for h in horizons))
    if len(horizons) < 3:
        raise ValueError("need at least three horizons")
    powers = np.array([_power_integral(fn, 0.0, h, float(p)) for h in horizons])
    inc = np.diff(powers)
    slack = 1e-12 * max(1.0, float(powers[-1]))
    if inc[-1] > inc[-2] + slack:
        verdict = "not-member"
    elif inc[-1] < tol and np.all(np.diff(inc) <= slack):
        verdict = "member"
    else:
        verdict = "inconclusive"
    return ProbeResult(verdict, horizons, powers, inc)
