"""Fixed-step integrator with exact jump handling at the impulse times.

The stepper is classical four-stage Runge-Kutta on a grid aligned with every
impulse time and with the leading delay-induced derivative breakpoints.
Delayed state is read back by linear interpolation of the already-computed
trajectory; arguments falling inside the step currently being formed are
interpolated against the running stage value, which makes the scheme reduce
exactly to classical RK4 when a delay law degenerates to h(t) = t.  At each
impulse time the jump x(tau) = B x(tau - 0) + alpha is applied exactly and
the post-jump value seeds the next subinterval (right continuity).

The same engine integrates single trajectories and batches of
fundamental-matrix columns with staggered start times: columns not yet
started simply hold the value zero, which doubles as their zero prehistory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .system import DelaySystem
from .timefn import ConstantLag, Pantograph

__all__ = ["Trajectory", "NonCausalDelayError", "integrate", "trajectory_eval"]


class NonCausalDelayError(RuntimeError):
    """A delayed argument ran ahead of the integration front."""


@dataclass
class Trajectory:
    """Piecewise absolutely continuous solution samples.

    ``values`` holds right-continuous states, ``values_left`` the pre-jump
    limits at ``grid[jump_indices]``; ``derivs`` are right derivatives from
    the equation's right-hand side, ``derivs_left`` their pre-jump analogues.
    """

    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray | None
    jump_indices: np.ndarray
    values_left: np.ndarray | None
    derivs_left: np.ndarray | None

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def right_endpoint_values(self) -> np.ndarray:
        """Values usable as right endpoints of panels (left limits at jumps)."""
        out = self.values.copy()
        if self.values_left is not None and len(self.jump_indices):
            out[self.jump_indices] = self.values_left
        return out


def _build_grid(sys: DelaySystem, t0: float, T: float, step: float, include=()):
    """Uniform grid on [t0, T] refined with impulse and breakpoint times.

    Returns the grid and a mapping from grid index to the impulse ordinal in
    the schedule.  Breakpoints: for a constant lag L, the lag multiples
    t0 + k L and the first post-impulse generation tau + L; for proportional
    delays, two generations of preimages of the start and impulse times.
    Expression delays get no insertion (their breakpoints are not invertible
    in general) and rely on the step being small.
    """
    if T < t0:
        raise ValueError("integration end precedes start")
    taus = [float(tj) for tj in sys.schedule.impulse_times if t0 < tj <= T + 1e-12]
    if T == t0:
        grid = np.array([t0])
        return grid, {}
    n_base = max(1, int(math.ceil((T - t0) / step - 1e-9)))
    base = np.linspace(t0, T, n_base + 1)

    extras = []
    seeds = [t0] + taus
    for term in sys.terms:
        law = term.delay
        if isinstance(law, ConstantLag) and law.tau > 0:
            k = 1
            while t0 + k * law.tau < T - 1e-12:
                extras.append(t0 + k * law.tau)
                k += 1
            extras.extend(tj + law.tau for tj in taus if tj + law.tau < T - 1e-12)
        elif isinstance(law, Pantograph) and law.ratio < 1.0:
            for seed in seeds:
                if seed <= 0:
                    continue
                g1 = seed / law.ratio
                g2 = g1 / law.ratio
                extras.extend(g for g in (g1, g2) if t0 < g < T - 1e-12)

    anchors = np.unique(np.concatenate([[t0, T], taus, np.asarray(list(include), float)]))
    others = np.unique(np.concatenate([base, np.asarray(extras, float)]))
    others = others[(others > t0) & (others < T)]
    if len(others):
        pos = np.searchsorted(anchors, others)
        lo = np.clip(pos - 1, 0, len(anchors) - 1)
        hi = np.clip(pos, 0, len(anchors) - 1)
        dist = np.minimum(np.abs(others - anchors[lo]), np.abs(others - anchors[hi]))
        others = others[dist > 1e-9]
    grid = np.unique(np.concatenate([anchors, others]))
    grid = grid[np.concatenate([[True], np.diff(grid) > 1e-12])]

    sched_taus = sys.schedule.impulse_times
    jump_map = {}
    for tj in taus:
        gi = int(np.searchsorted(grid, tj))
        if grid[gi] != tj:
            raise AssertionError("impulse time lost during grid construction")
        jump_map[gi] = int(np.searchsorted(sched_taus, tj))
    return grid, jump_map


@dataclass
class _MarchResult:
    grid: np.ndarray
    values: np.ndarray       # (N, C, n) right-continuous
    right_end: np.ndarray    # (N, C, n) with left limits at jumps
    jump_map: dict
    derivs: np.ndarray | None
    derivs_left: dict | None


def _march(
    sys: DelaySystem,
    grid: np.ndarray,
    jump_map: dict,
    starts: np.ndarray,
    inits: np.ndarray,
    history=None,
    with_forcing: bool = False,
    with_alphas: bool = False,
    want_derivs: bool = False,
) -> _MarchResult:
    """March all columns across the grid; see the module docstring.

    ``starts`` must be grid members; column c is dormant (identically zero)
    before ``starts[c]`` and is set to ``inits[c]`` when the front reaches it.
    """
    N = len(grid)
    C, n = inits.shape
    vals = np.zeros((N, C, n))
    right_end = np.zeros((N, C, n))
    derivs = np.zeros((N, C, n)) if want_derivs else None
    derivs_left = {} if want_derivs else None
    sched = sys.schedule
    terms = sys.terms
    tol_t = 1e-9

    def delayed(u, t_base, base_vals, t_stage, stage_vals):
        if u > t_stage + tol_t * max(1.0, abs(t_stage)):
            raise NonCausalDelayError(
                f"delayed argument {u} exceeds current time {t_stage}"
            )
        if u > t_base and t_stage > t_base:
            w = (u - t_base) / (t_stage - t_base)
            return (1.0 - w) * base_vals + w * stage_vals
        if u < grid[0]:
            if history is None:
                return np.zeros((C, n))
            return np.broadcast_to(np.asarray(history(u), float), (C, n))
        idx = int(np.searchsorted(grid, u, side="right")) - 1
        idx = min(max(idx, 0), N - 1)
        if grid[idx] == u or idx == N - 1:
            return vals[idx]
        w = (u - grid[idx]) / (grid[idx + 1] - grid[idx])
        return (1.0 - w) * vals[idx] + w * right_end[idx + 1]

    def rhs(t_stage, stage_vals, t_base, base_vals):
        out = np.zeros((C, n))
        if with_forcing:
            out += sys.forcing_at(t_stage)
        for term in terms:
            u = term.delay.delayed_time(t_stage)
            xh = delayed(u, t_base, base_vals, t_stage, stage_vals)
            out = out - xh @ term.coeff(t_stage).T
        return out

    state = np.zeros((C, n))
    startmask = starts == grid[0]
    state[startmask] = inits[startmask]
    vals[0] = state
    right_end[0] = state
    if want_derivs:
        derivs[0] = rhs(grid[0], state, grid[0], state)

    for i in range(N - 1):
        t_a, t_b = grid[i], grid[i + 1]
        h = t_b - t_a
        y = state
        k1 = derivs[i] if want_derivs else rhs(t_a, y, t_a, y)
        k2 = rhs(t_a + 0.5 * h, y + 0.5 * h * k1, t_a, y)
        k3 = rhs(t_a + 0.5 * h, y + 0.5 * h * k2, t_a, y)
        k4 = rhs(t_b, y + h * k3, t_a, y)
        ynew = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        right_end[i + 1] = ynew
        if i + 1 in jump_map:
            j = jump_map[i + 1]
            if want_derivs:
                derivs_left[i + 1] = rhs(t_b, ynew, t_a, y)
            ynew = ynew @ sched.matrices[j].T
            if with_alphas:
                ynew = ynew + sched.jumps[j]
        newly = starts == t_b
        if np.any(newly):
            ynew = ynew.copy()
            ynew[newly] = inits[newly]
        vals[i + 1] = ynew
        state = ynew
        if want_derivs:
            derivs[i + 1] = rhs(t_b, state, t_b, state)

    return _MarchResult(grid, vals, right_end, jump_map, derivs, derivs_left)


def integrate(
    sys: DelaySystem,
    x0,
    T: float,
    step: float,
    history_mode: str = "phi",
) -> Trajectory:
    """Integrate the problem from x(0) = x0 up to time T.

    ``history_mode`` selects what supplies x on negative arguments: the
    system's initial function ("phi") or zero ("zero", the convention of the
    homogeneous operator).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if T > sys.horizon + 1e-12:
        raise ValueError(f"T={T} exceeds the working horizon {sys.horizon}")
    if history_mode not in ("phi", "zero"):
        raise ValueError("history_mode must be 'phi' or 'zero'")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(x0) != sys.n:
        raise ValueError("x0 does not match the system dimension")
    grid, jump_map = _build_grid(sys, 0.0, T, step)
    history = sys.phi_at if history_mode == "phi" else None
    res = _march(
        sys,
        grid,
        jump_map,
        starts=np.array([0.0]),
        inits=x0[None, :],
        history=history,
        with_forcing=True,
        with_alphas=True,
        want_derivs=True,
    )
    jump_idx = np.array(sorted(jump_map.keys()), dtype=int)
    values_left = res.right_end[jump_idx, 0, :] if len(jump_idx) else np.zeros((0, sys.n))
    derivs_left = (
        np.array([res.derivs_left[i][0] for i in jump_idx])
        if len(jump_idx)
        else np.zeros((0, sys.n))
    )
    return Trajectory(
        grid=grid,
        values=res.values[:, 0, :],
        derivs=res.derivs[:, 0, :],
        jump_indices=jump_idx,
        values_left=values_left,
        derivs_left=derivs_left,
    )


def trajectory_eval(traj: Trajectory, t: float, side: str = "right") -> np.ndarray:
    """Linear interpolation of the trajectory; ``side`` resolves jump points."""
    grid = traj.grid
    if t < grid[0] - 1e-12 or t > grid[-1] + 1e-12:
        raise ValueError(f"t={t} outside the computed range [{grid[0]}, {grid[-1]}]")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    idx = int(np.searchsorted(grid, t, side="right")) - 1
    idx = min(max(idx, 0), len(grid) - 1)
    if grid[idx] == t:
        if side == "left" and traj.values_left is not None:
            pos = np.searchsorted(traj.jump_indices, idx)
            if pos < len(traj.jump_indices) and traj.jump_indices[pos] == idx:
                return traj.values_left[pos].copy()
        return traj.values[idx].copy()
    if idx == len(grid) - 1:
        return traj.values[idx].copy()
    w = (t - grid[idx]) / (grid[idx + 1] - grid[idx])
    right = traj.right_endpoint_values()
    return (1.0 - w) * traj.values[idx] + w * right[idx + 1]
