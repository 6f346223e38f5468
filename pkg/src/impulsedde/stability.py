"""Explicit stability certificates and empirical decay/admissibility probes.

The certificates evaluate closed-form sufficient conditions: bounded gaps,
contracting jumps, and a smallness inequality comparing (possibly
lag-weighted) unit-window norms of the coefficients against the jump
contraction per window.  They are sufficient only; a failing certificate
says nothing about the dynamics, which is what the empirical probes
(envelope fitting of the fundamental matrix, truncated-norm saturation of
forced responses) are for.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .fundamental import fundamental_numeric
from .norms import (
    SampledFunction,
    matrix_norm,
    membership_probe,
    mp_norm_detail,
    vector_norm,
)
from .schedule import UndefinedGapsError, gap_stats
from .solver import integrate
from .system import DelaySystem, history_term_g, lag_bound, weighted_coefficient

__all__ = [
    "Condition",
    "Certificate",
    "DecayFit",
    "DegenerateFitError",
    "certify_theorem5",
    "certify_theorem6",
    "certify_example24",
    "decay_fit",
    "CaseResult",
    "admissibility_probe",
    "stability_experiment",
]


@dataclass
class Condition:
    name: str
    passed: bool
    lhs: float = math.nan
    rhs: float = math.nan
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass
class Certificate:
    """Evaluated constants and per-condition outcomes of one criterion.

    ``status`` distinguishes a numeric failure from an inconclusive result
    where every inequality holds but a truncation flag (a window norm still
    growing at the horizon, or a lag with no uniform bound) undermines it.
    """

    kind: str
    sigma: float
    rho: float
    jump_norm: float
    eta: float
    delta: float | None
    term_window_norms: tuple
    lhs: float
    rhs: float
    conditions: list
    flags: list

    @property
    def verdict(self) -> bool:
        return all(c.passed for c in self.conditions) and not self.flags

    @property
    def status(self) -> str:
        if all(c.passed for c in self.conditions):
            return "pass" if not self.flags else "inconclusive"
        return "fail"

    def lines(self) -> list[str]:
        out = [f"certificate {self.kind}: {self.status.upper()}"]
        out.append(
            f"  sigma={self.sigma:.6g} rho={self.rho:.6g} "
            f"jump_norm={self.jump_norm:.6g} eta={self.eta:.6g}"
            + (f" delta={self.delta:.6g}" if self.delta is not None else "")
        )
        for c in self.conditions:
            mark = "pass" if c.passed else "FAIL"
            vals = ""
            if not math.isnan(c.lhs) or not math.isnan(c.rhs):
                vals = f" lhs={c.lhs:.6g} rhs={c.rhs:.6g} margin={c.margin:.6g}"
            note = f" ({c.note})" if c.note else ""
            out.append(f"  [{mark}] {c.name}{vals}{note}")
        for fl in self.flags:
            out.append(f"  [flag] {fl}")
        return out


def _coeff_window_norms(sys, eta, horizon, grid_step):
    """Unit-window sup norms of the (lag-weighted) coefficient matrices."""
    npts = max(2, int(round(horizon / grid_step)) + 1)
    grid = np.linspace(0.0, horizon, npts)
    details = []
    for k in range(sys.m):
        series = np.array(
            [matrix_norm(weighted_coefficient(sys, k, eta, t)) for t in grid]
        )
        details.append(mp_norm_detail(SampledFunction(grid, series), 1.0, horizon))
    return details


def _forcing_membership(sys, horizon, grid_step, tol):
    if sys.forcing is None:
        return Condition("forcing integrable on the half-line", True, note="zero forcing"), None
    grid = np.linspace(0.0, horizon, max(3, int(round(horizon / grid_step)) + 1))
    series = np.array([vector_norm(sys.forcing_at(t)) for t in grid])
    probe = membership_probe(
        SampledFunction(grid, series), 1.0, [horizon / 4, horizon / 2, horizon], tol
    )
    return (
        Condition(
            "forcing integrable on the half-line",
            probe.verdict == "member",
            note=f"saturation probe: {probe.verdict}",
        ),
        probe,
    )


def _history_membership(sys, horizon, grid_step, tol):
    if sys.phi is None or sys.m == 0:
        return Condition(
            "history correction integrable", True, note="zero initial function"
        )
    grid = np.linspace(0.0, horizon, max(3, int(round(horizon / grid_step)) + 1))
    series = np.array([vector_norm(history_term_g(sys, t)) for t in grid])
    probe = membership_probe(
        SampledFunction(grid, series), 1.0, [horizon / 4, horizon / 2, horizon], tol
    )
    return Condition(
        "history correction integrable",
        probe.verdict == "member",
        note=f"saturation probe: {probe.verdict}",
    )


def _gap_and_jump_conditions(sys):
    try:
        rho, sigma = gap_stats(sys.schedule)
        gaps_ok = 0.0 < rho <= sigma
        gap_note = ""
    except UndefinedGapsError as exc:
        rho, sigma = math.nan, math.nan
        gaps_ok, gap_note = False, str(exc)
    jump_norm = sys.schedule.max_jump_norm()
    cond_gaps = Condition(
        "impulse gaps bounded between rho and sigma", gaps_ok, rho, sigma, gap_note
    )
    cond_jumps = Condition("jump matrices contract", jump_norm < 1.0, jump_norm, 1.0)
    return cond_gaps, cond_jumps, rho, sigma, jump_norm


def _smallness_certificate(
    sys,
    kind: str,
    weight_with_eta: bool,
    window_exponent_extra: float,
    horizon: float,
    grid_step: float,
    probe_tol: float,
    delta: float | None,
    extra_conditions: list,
    extra_flags: list,
) -> Certificate:
    cond_gaps, cond_jumps, rho, sigma, jump_norm = _gap_and_jump_conditions(sys)
    conditions = list(extra_conditions)
    flags = list(extra_flags)

    eta = math.nan
    if 0.0 < jump_norm < 1.0 and math.isfinite(sigma):
        eta = -math.log(jump_norm) / sigma

    cond_forcing, _ = _forcing_membership(sys, horizon, grid_step, probe_tol)
    conditions.append(cond_forcing)

    window_details = []
    window_note = ""
    if math.isfinite(eta):
        weight = eta if weight_with_eta else 0.0
        window_details = _coeff_window_norms(sys, weight, horizon, grid_step)
        finite = all(math.isfinite(d.value) for d in window_details)
        for k, d in enumerate(window_details):
            if d.increasing_at_horizon:
                flags.append(
                    f"window norm of coefficient {k} still increasing at the "
                    f"horizon; its supremum is not conclusive"
                )
    else:
        finite = False
        window_note = "window norms skipped: contraction rate undefined"
    label = "lag-weighted coefficients" if weight_with_eta else "coefficients"
    conditions.append(
        Condition(f"{label} have finite unit-window norms", finite, note=window_note)
    )
    conditions.append(cond_gaps)
    conditions.append(cond_jumps)

    m1_sum = sum(d.value for d in window_details) if window_details else 0.0
    if math.isfinite(eta):
        lhs = math.exp(eta * (sigma + window_exponent_extra + 1.0)) * m1_sum
        rhs = 1.0 - math.exp(-eta)
        conditions.append(
            Condition("window norms below the per-window jump contraction", lhs <= rhs, lhs, rhs)
        )
    else:
        lhs, rhs = math.nan, math.nan
        conditions.append(
            Condition(
                "window norms below the per-window jump contraction",
                False,
                note="contraction rate undefined (jump norm not in (0, 1))",
            )
        )
    return Certificate(
        kind=kind,
        sigma=sigma,
        rho=rho,
        jump_norm=jump_norm,
        eta=eta,
        delta=delta,
        term_window_norms=tuple(d.value for d in window_details),
        lhs=lhs,
        rhs=rhs,
        conditions=conditions,
        flags=flags,
    )


def certify_theorem5(
    sys: DelaySystem,
    horizon: float | None = None,
    grid_step: float = 0.01,
    probe_tol: float = 1e-3,
) -> Certificate:
    """Integrable-solutions certificate (lag-weighted window norms).

    Passing means every solution and its derivative are integrable on the
    half-line for any integrable forcing; the window norms are computed on
    the given horizon and flagged when still growing there.
    """
    horizon = sys.horizon if horizon is None else horizon
    extra = [_history_membership(sys, horizon, grid_step, probe_tol)]
    return _smallness_certificate(
        sys,
        kind="theorem5",
        weight_with_eta=True,
        window_exponent_extra=0.0,
        horizon=horizon,
        grid_step=grid_step,
        probe_tol=probe_tol,
        delta=None,
        extra_conditions=extra,
        extra_flags=[],
    )


def certify_theorem6(
    sys: DelaySystem,
    horizon: float | None = None,
    grid_step: float = 0.01,
    probe_tol: float = 1e-3,
) -> Certificate:
    """Exponential-stability certificate (unweighted norms, bounded lags)."""
    horizon = sys.horizon if horizon is None else horizon
    lag = lag_bound(sys)
    extra_flags = []
    if lag.uniform:
        cond_delta = Condition("lags uniformly bounded", True, lag.delta, math.inf)
    else:
        cond_delta = Condition(
            "lags uniformly bounded",
            False,
            lag.delta,
            math.inf,
            "lag still growing at the horizon (proportional delay): no "
            "horizon-independent bound exists",
        )
    return _smallness_certificate(
        sys,
        kind="theorem6",
        weight_with_eta=False,
        window_exponent_extra=lag.delta,
        horizon=horizon,
        grid_step=grid_step,
        probe_tol=probe_tol,
        delta=lag.delta,
        extra_conditions=[cond_delta],
        extra_flags=extra_flags,
    )


def certify_example24(
    sys: DelaySystem,
    horizon: float | None = None,
    grid_step: float = 0.01,
    probe_tol: float = 1e-3,
) -> Certificate:
    """Scalar pantograph instance with unit-spaced scalar jumps.

    Specializes the integrability certificate: with unit gaps the smallness
    inequality reduces algebraically to  ||weighted coefficient||_window <=
    (1 - b) b^2  for jump factor b; both forms are computed and must agree.
    """
    cert = certify_theorem5(sys, horizon, grid_step, probe_tol)
    if sys.n != 1 or sys.m != 1:
        raise ValueError("the reduced certificate targets scalar single-delay systems")
    if not math.isclose(cert.sigma, 1.0, rel_tol=0, abs_tol=1e-12) or not math.isclose(
        cert.rho, 1.0, rel_tol=0, abs_tol=1e-12
    ):
        raise ValueError("the reduced certificate requires unit impulse spacing")
    b = cert.jump_norm
    conditions = list(cert.conditions)
    if 0.0 < b < 1.0:
        reduced_rhs = (1.0 - b) * b * b
        general_rhs = (1.0 - math.exp(-cert.eta)) * math.exp(-cert.eta * (cert.sigma + 1.0))
        if abs(reduced_rhs - general_rhs) > 1e-12:
            raise AssertionError(
                f"reduced threshold {reduced_rhs!r} disagrees with the general "
                f"form {general_rhs!r}"
            )
        m1 = sum(cert.term_window_norms)
        conditions.append(
            Condition(
                "weighted window norm below (1 - b) b^2",
                m1 <= reduced_rhs,
                m1,
                reduced_rhs,
            )
        )
    else:
        conditions.append(
            Condition(
                "weighted window norm below (1 - b) b^2",
                False,
                note="jump factor not strictly inside (0, 1)",
            )
        )
    return replace(cert, kind="example24", conditions=conditions)


class DegenerateFitError(ValueError):
    """No usable (positive-norm) samples left for the envelope fit."""


@dataclass
class DecayFit:
    """Envelope fit ||X|| <= prefactor * exp(-rate * (t - s)).

    ``rate`` comes from least squares on the log norms; ``prefactor`` is
    inflated until the envelope dominates every sample, so ``residual`` (the
    worst pre-inflation overshoot in log units) is reported for diagnosis.
    A negative rate indicates growth, not an error.
    """

    prefactor: float
    rate: float
    residual: float
    n_samples: int


def decay_fit(samples, min_gap: float) -> DecayFit:
    """Fit a decaying exponential envelope to (s, t, norm) samples."""
    kept = []
    dropped = 0
    for s, t, nrm in samples:
        if t - s < min_gap:
            continue
        if nrm <= 0.0:
            dropped += 1
            continue
        kept.append((t - s, nrm))
    if dropped:
        warnings.warn(f"dropped {dropped} zero-norm samples before fitting")
    if not kept:
        raise DegenerateFitError("all samples were zero or inside the minimum gap")
    if len(kept) < 10:
        raise ValueError(f"need at least 10 usable samples, got {len(kept)}")
    gaps = np.array([g for g, _ in kept])
    logs = np.log(np.array([v for _, v in kept]))
    slope, intercept = np.polyfit(gaps, logs, 1)
    rate = -float(slope)
    residual = float(np.max(logs - (intercept + slope * gaps)))
    prefactor = float(np.exp(np.max(logs + rate * gaps)))
    return DecayFit(prefactor=prefactor, rate=rate, residual=residual, n_samples=len(kept))


@dataclass
class CaseResult:
    label: str
    value_probe: object
    deriv_probe: object

    @property
    def member(self) -> bool:
        return (
            self.value_probe.verdict == "member"
            and self.deriv_probe.verdict == "member"
        )

    @property
    def verdict(self) -> str:
        if self.member:
            return "member"
        verdicts = {self.value_probe.verdict, self.deriv_probe.verdict}
        return "not-member" if "not-member" in verdicts else "inconclusive"


def admissibility_probe(
    sys: DelaySystem,
    f_cases,
    p: float,
    horizons,
    tol: float,
    step: float = 0.01,
) -> list:
    """For each forcing: integrate with zero history and probe saturation.

    Every "member" verdict supports (but does not prove) that integrable
    forcings produce solutions integrable together with their derivatives.
    Each candidate forcing must itself pass the membership probe.
    """
    horizons = sorted(float(h) for h in horizons)
    T = horizons[-1]
    if T > sys.horizon + 1e-12:
        raise ValueError("largest probe horizon exceeds the working horizon")
    results = []
    for idx, case in enumerate(f_cases):
        probe_grid = np.linspace(0.0, T, max(3, int(round(T / step)) + 1))
        if case is not None:
            series = np.array([vector_norm(case(t)[:, 0]) for t in probe_grid])
            self_probe = membership_probe(SampledFunction(probe_grid, series), p, horizons, tol)
            if self_probe.verdict != "member":
                raise ValueError(
                    f"forcing case {idx} is not itself a member ({self_probe.verdict})"
                )
        zsys = replace(sys, forcing=case, x0=None)
        traj = integrate(zsys, np.zeros(sys.n), T, step, history_mode="zero")
        value_fn = SampledFunction(
            traj.grid, traj.values, traj.jump_indices, traj.values_left
        )
        deriv_fn = SampledFunction(
            traj.grid, traj.derivs, traj.jump_indices, traj.derivs_left
        )
        results.append(
            CaseResult(
                label=f"case{idx}",
                value_probe=membership_probe(value_fn, p, horizons, tol),
                deriv_probe=membership_probe(deriv_fn, p, horizons, tol),
            )
        )
    return results


def _experiment_run(args):
    sys, s, span, step = args
    sample = fundamental_numeric(sys, s, s + span, step)
    return s, sample.grid, sample.norms()


def stability_experiment(
    sys: DelaySystem,
    s_list,
    span: float,
    step: float,
    min_gap: float = 1.0,
    max_samples_per_start: int = 400,
):
    """Sample ||X(t, s)|| for several base times and fit a decay envelope.

    The forcing is switched off internally (the propagator is homogeneous).
    A positive fitted rate together with a passing stability certificate is
    the empirical face of the admissibility-implies-stability statement.
    Set IMPULSEDDE_WORKERS > 1 to spread the base times over processes.
    """
    hsys = replace(sys, forcing=None)
    jobs = [(hsys, float(s), span, step) for s in s_list]
    workers = int(os.environ.get("IMPULSEDDE_WORKERS", "1"))
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_experiment_run, jobs))
    else:
        outputs = [_experiment_run(job) for job in jobs]
    rows = []
    for s, grid, norms in outputs:
        stride = max(1, len(grid) // max_samples_per_start)
        for i in range(0, len(grid), stride):
            rows.append((s, float(grid[i]), float(norms[i])))
    return decay_fit(rows, min_gap), rows
