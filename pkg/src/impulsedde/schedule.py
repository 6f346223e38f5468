"""Impulse schedules: jump times, jump matrices and their counting constants."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .norms import matrix_norm

__all__ = [
    "ImpulseSchedule",
    "HorizonError",
    "UndefinedGapsError",
    "count_impulses",
    "ratio_constant_K",
    "bound_constants",
    "gap_stats",
]


class HorizonError(ValueError):
    """Query outside the interval the schedule is declared to cover."""


class UndefinedGapsError(ValueError):
    """Gap statistics requested for a schedule without enough structure."""


@dataclass
class ImpulseSchedule:
    """Jump times ``times`` (with ``times[0] == 0``), matrices and jump vectors.

    ``times[1:]`` are the impulse instants; ``matrices[j]`` and ``jumps[j]``
    belong to ``times[j + 1]``.  ``gap_mode`` declares the (unrepresented)
    tail behaviour: "finite" means the listed impulses are all there are,
    "uniform" continues the listed spacing, "bounded" promises gaps inside
    ``declared_bounds``.  For the latter two, queries past the last listed
    time raise :class:`HorizonError` instead of silently missing impulses.

    Construction validates shapes; the ordering of ``times`` is checked by
    the hypothesis report so that deliberately broken schedules can still be
    built and diagnosed.
    """

    times: np.ndarray
    matrices: list = field(default_factory=list)
    jumps: list | None = None
    gap_mode: str = "finite"
    declared_bounds: tuple[float, float] | None = None
    dim: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ValueError("times must be a non-empty 1-d sequence")
        self.matrices = [np.atleast_2d(np.asarray(m, dtype=float)) for m in self.matrices]
        if len(self.matrices) != len(self.times) - 1:
            raise ValueError("need one jump matrix per impulse time")
        dims = {m.shape for m in self.matrices}
        if len(dims) > 1 or any(m.shape[0] != m.shape[1] for m in self.matrices):
            raise ValueError("jump matrices must be square and share one dimension")
        if self.dim is None:
            self.dim = self.matrices[0].shape[0] if self.matrices else 1
        if self.matrices and self.matrices[0].shape[0] != self.dim:
            raise ValueError("jump matrices do not match the declared dimension")
        if self.jumps is None:
            self.jumps = [np.zeros(self.dim) for _ in self.matrices]
        else:
            self.jumps = [np.asarray(v, dtype=float).reshape(-1) for v in self.jumps]
            if len(self.jumps) != len(self.matrices):
                raise ValueError("need one jump vector per impulse time")
            if any(len(v) != self.dim for v in self.jumps):
                raise ValueError("jump vectors do not match the dimension")
        if self.gap_mode not in ("finite", "uniform", "bounded"):
            raise ValueError(f"unknown gap_mode {self.gap_mode!r}")
        if self.gap_mode == "bounded" and self.declared_bounds is None:
            raise ValueError("bounded gap_mode needs declared (rho, sigma)")

    @classmethod
    def uniform(cls, spacing: float, count: int, matrix, jumps=None, dim=None) -> "ImpulseSchedule":
        """Equally spaced impulses at spacing, 2*spacing, ..., count*spacing."""
        if spacing <= 0 or count < 0:
            raise ValueError("spacing must be positive and count non-negative")
        times = np.arange(count + 1, dtype=float) * spacing
        mats = [np.atleast_2d(np.asarray(matrix, dtype=float))] * count
        return cls(times, mats, jumps=jumps, gap_mode="uniform", dim=dim)

    @property
    def impulse_times(self) -> np.ndarray:
        return self.times[1:]

    def coverage(self) -> float:
        """Largest time up to which the impulse pattern is fully known."""
        if self.gap_mode == "finite":
            return math.inf
        return float(self.times[-1])

    def max_jump_norm(self) -> float:
        """Largest max-row-sum norm among the jump matrices (0 if none)."""
        return max((matrix_norm(m) for m in self.matrices), default=0.0)

    def uniform_spacing(self) -> float | None:
        if self.gap_mode != "uniform" or len(self.times) < 2:
            return None
        return float(self.times[1] - self.times[0])


def count_impulses(sched: ImpulseSchedule, s: float, t: float) -> int:
    """Number of impulse times inside the open interval (s, t)."""
    if s > t:
        raise ValueError("need s <= t")
    cov = sched.coverage()
    if s < 0 or t > cov + 1e-12:
        raise HorizonError(f"query ({s}, {t}) outside covered range [0, {cov}]")
    taus = sched.impulse_times
    lo = int(np.searchsorted(taus, s, side="right"))
    hi = int(np.searchsorted(taus, t, side="left"))
    return max(0, hi - lo)


def ratio_constant_K(sched: ImpulseSchedule, horizon: float, grid_step: float) -> float:
    """Largest impulse-count-to-length ratio over grid pairs on [0, horizon].

    Pairs whose open interval contains exactly one impulse are excluded
    (their ratio diverges as the interval shrinks around the impulse and they
    carry no rate information).  For uniformly spaced schedules the exact
    value 2/spacing is folded in, so refinement of the grid only tightens
    the sweep, never the result.
    """
    if horizon <= 0 or grid_step <= 0:
        raise ValueError("horizon and grid_step must be positive")
    if horizon > sched.coverage() + 1e-12:
        raise HorizonError(f"horizon {horizon} beyond covered range {sched.coverage()}")
    taus = sched.impulse_times
    taus = taus[taus <= horizon + 1e-12]
    if len(taus) == 0:
        return 0.0
    npts = int(round(horizon / grid_step)) + 1
    grid = np.linspace(0.0, horizon, npts)
    n_before = np.searchsorted(taus, grid, side="left")   # impulses < t
    n_through = np.searchsorted(taus, grid, side="right")  # impulses <= s
    best = 0.0
    chunk = max(1, int(4e6) // npts)
    for lo in range(0, npts, chunk):
        hi = min(npts, lo + chunk)
        counts = n_before[None, :] - n_through[lo:hi, None]
        span = grid[None, :] - grid[lo:hi, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = counts / span
        mask = (span > 0) & (counts != 1)
        if np.any(mask):
            best = max(best, float(np.max(ratios[mask])))
    d = sched.uniform_spacing()
    if d is not None:
        best = max(best, 2.0 / d)
    return best


def bound_constants(sched: ImpulseSchedule, K: float) -> tuple[float, float]:
    """Clamp the jump-norm bound and the count-ratio constant to at least 1."""
    if K < 0:
        raise ValueError("K must be non-negative")
    return max(sched.max_jump_norm(), 1.0), max(K, 1.0)


def gap_stats(sched: ImpulseSchedule) -> tuple[float, float]:
    """(smallest, largest) gap between consecutive times, or declared bounds."""
    if sched.gap_mode == "bounded":
        return sched.declared_bounds
    if len(sched.times) < 2:
        raise UndefinedGapsError("schedule has no gaps to measure")
    gaps = np.diff(sched.times)
    return float(np.min(gaps)), float(np.max(gaps))
