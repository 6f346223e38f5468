"""Batch command-line front-end.

Commands: validate | simulate | fundamental | reconstruct | certify | probe
| decay.  Every command first parses the config (exit 2 on failure) and runs
the hypothesis checks (exit 3 on violation); outputs are CSV files in the
output directory, with PNG figures rendered next to them under --plot.
Exit codes: 0 success, 1 certificate/probe failure, 2 invalid config,
3 hypothesis violation, 4 inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys as _sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .fundamental import fundamental_numeric, reconstruct
from .norms import matrix_norm
from .schedule import gap_stats
from .solver import integrate, trajectory_eval
from .stability import admissibility_probe, certify_example24, certify_theorem5, certify_theorem6, stability_experiment
from .system import validate_hypotheses

VALIDATION_GRID_STEP = 0.01

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_INCONCLUSIVE = 4


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(cell) for cell in row])
    return path


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="impulsedde",
        description="simulate and certify linear delay systems with impulses",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML problem description")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--step", type=float, default=1e-3, help="integration step")
        p.add_argument("--qstep", type=float, default=1e-3, help="quadrature step")
        p.add_argument(
            "--horizon",
            type=float,
            nargs="+",
            default=None,
            help="horizon override; probe takes several, decay reads a span",
        )
        p.add_argument("--tol", type=float, default=1e-3, help="probe tolerance")
        p.add_argument("--plot", action="store_true", help="render PNG figures")

    common(sub.add_parser("validate", help="run the hypothesis checks"))
    common(sub.add_parser("simulate", help="integrate and dump the trajectory"))

    p = sub.add_parser("fundamental", help="numerical fundamental matrix")
    common(p)
    p.add_argument("--s", type=float, nargs="+", default=[0.0], help="base times")

    p = sub.add_parser("reconstruct", help="representation formula vs integration")
    common(p)
    p.add_argument("--t", type=float, nargs="+", required=True, help="evaluation times")

    p = sub.add_parser("certify", help="evaluate a stability certificate")
    common(p)
    p.add_argument("--which", choices=["t5", "t6", "example"], default="t5")

    p = sub.add_parser("probe", help="admissibility probe of the config's forcing")
    common(p)
    p.add_argument("--p", type=float, default=1.0, help="norm exponent")

    p = sub.add_parser("decay", help="fit a decay envelope to the propagator")
    common(p)
    p.add_argument("--s", type=float, nargs="+", default=[0.0], help="base times")
    return ap


def _load(args):
    cfg = load_config(args.config)
    report = validate_hypotheses(cfg.system, VALIDATION_GRID_STEP)
    return cfg, report


def cmd_validate(args, out: Path) -> int:
    cfg, report = _load(args)
    for line in report.lines():
        print(line)
    _write_csv(
        out / "hypotheses.csv",
        ["check", "passed", "value", "detail"],
        [(c.name, int(c.passed), "" if c.value is None else c.value, c.detail) for c in report.checks],
    )
    return EXIT_OK if report.all_passed else EXIT_HYPOTHESIS


def _guard(args, out: Path):
    cfg, report = _load(args)
    if not report.all_passed:
        for line in report.lines():
            print(line)
        print("hypothesis checks failed; aborting")
        return None
    return cfg


def cmd_simulate(args, out: Path) -> int:
    cfg = _guard(args, out)
    if cfg is None:
        return EXIT_HYPOTHESIS
    system = cfg.system
    T = args.horizon[0] if args.horizon else system.horizon
    traj = integrate(system, system.initial_value(), T, args.step)
    n = system.n
    header = (
        ["t"]
        + [f"x_{i + 1}" for i in range(n)]
        + [f"dx_{i + 1}" for i in range(n)]
        + ["is_jump"]
        + [f"x_left_{i + 1}" for i in range(n)]
    )
    jumps = {int(j): k for k, j in enumerate(traj.jump_indices)}
    rows = []
    for i, t in enumerate(traj.grid):
        left = traj.values_left[jumps[i]] if i in jumps else traj.values[i]
        rows.append(
            [t, *traj.values[i], *traj.derivs[i], int(i in jumps), *left]
        )
    _write_csv(out / "trajectory.csv", header, rows)
    print(f"trajectory with {len(traj.grid)} points written to {out / 'trajectory.csv'}")
    if args.plot:
        from . import plotting

        plotting.trajectory_figure(traj, out / "trajectory.png")
    return EXIT_OK


def cmd_fundamental(args, out: Path) -> int:
    cfg = _guard(args, out)
    if cfg is None:
        return EXIT_HYPOTHESIS
    system = cfg.system
    T = args.horizon[0] if args.horizon else system.horizon
    n = system.n
    mat_rows = []
    bound_rows = []
    jump_norm = system.schedule.max_jump_norm()
    eta = None
    if 0.0 < jump_norm < 1.0:
        rho, sigma = gap_stats(system.schedule)
        if rho > 0:
            eta = -math.log(jump_norm) / sigma
    for s in args.s:
        sample = fundamental_numeric(system, s, T, args.step)
        for i, t in enumerate(sample.grid):
            mat_rows.append([s, t, *sample.matrices[i].reshape(-1)])
            if eta is not None:
                nrm = matrix_norm(sample.matrices[i])
                bound = math.exp(-eta * (t - s - sigma))
                bound_rows.append([s, t, nrm, bound, bound - nrm])
    header = ["s", "t"] + [f"X_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    _write_csv(out / "fundamental.csv", header, mat_rows)
    print(f"fundamental matrix samples written to {out / 'fundamental.csv'}")
    if bound_rows:
        _write_csv(
            out / "fundamental_bounds.csv",
            ["s", "t", "norm_X", "bound", "margin"],
            bound_rows,
        )
        if args.plot:
            from . import plotting

            plotting.bounds_figure(
                [r[:3] for r in bound_rows], eta, sigma, out / "fundamental_bounds.png"
            )
    else:
        print("no contraction envelope applies (jump norm not inside (0, 1))")
    return EXIT_OK


def cmd_reconstruct(args, out: Path) -> int:
    cfg = _guard(args, out)
    if cfg is None:
        return EXIT_HYPOTHESIS
    system = cfg.system
    t_list = sorted(args.t)
    if t_list[-1] > system.horizon:
        print("requested time beyond the working horizon")
        return EXIT_CONFIG
    traj = integrate(system, system.initial_value(), t_list[-1], args.step)
    rows = []
    recon_all = []
    for t in t_list:
        xr = reconstruct(system, t, args.qstep)
        xd = trajectory_eval(traj, t)
        recon_all.append(xr)
        rows.append([t, *xr, *xd, float(np.max(np.abs(xr - xd)))])
    n = system.n
    header = (
        ["t"]
        + [f"x_recon_{i + 1}" for i in range(n)]
        + [f"x_direct_{i + 1}" for i in range(n)]
        + ["abs_err"]
    )
    _write_csv(out / "reconstruct.csv", header, rows)
    worst = max(r[-1] for r in rows)
    print(f"worst reconstruction error {worst:.3e} over {len(rows)} times")
    if args.plot:
        from . import plotting

        plotting.reconstruct_figure(traj, t_list, recon_all, out / "reconstruct.png")
    return EXIT_OK


def cmd_certify(args, out: Path) -> int:
    cfg = _guard(args, out)
    if cfg is None:
        return EXIT_HYPOTHESIS
    system = cfg.system
    which = {
        "t5": certify_theorem5,
        "t6": certify_theorem6,
        "example": certify_example24,
    }[args.which]
    cert = which(system, probe_tol=args.tol)
    for line in cert.lines():
        print(line)
    _write_csv(
        out / "certificate.csv",
        ["condition", "lhs", "rhs", "margin", "pass"],
        [(c.name, c.lhs, c.rhs, c.margin, int(c.passed)) for c in cert.conditions],
    )
    (out / "certificate.txt").write_text("\n".join(cert.lines()) + "\n")
    if args.plot:
        from . import plotting

        plotting.certificate_figure(cert, out / "certificate.png")
    return {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[cert.status]


def cmd_probe(args, out: Path) -> int:
    cfg = _guard(args, out)
    if cfg is None:
        return EXIT_HYPOTHESIS
    system = cfg.system
    horizons = args.horizon or [system.horizon / 4, system.horizon / 2, system.horizon]
    if len(horizons) < 3:
        print("probe needs at least three horizons")
        return EXIT_CONFIG
    results = admissibility_probe(
        system, [system.forcing], args.p, horizons, args.tol, step=args.step
    )
    rows = []
    for res in results:
        for label, probe in (("x", res.value_probe), ("dx", res.deriv_probe)):
            for h, power, inc in probe.rows():
                rows.append([res.label, label, h, power, inc, probe.verdict])
    _write_csv(
        out / "probe.csv",
        ["case", "series", "horizon", "norm_power", "increment", "verdict"],
        rows,
    )
    verdicts = [res.verdict for res in results]
    for res in results:
        print(
            f"{res.label}: x {res.value_probe.verdict}, "
            f"dx {res.deriv_probe.verdict} -> {res.verdict}"
        )
    if args.plot:
        from . import plotting

        pairs = []
        for res in results:
            pairs.append((res.value_probe, f"{res.label} x"))
            pairs.append((res.deriv_probe, f"{res.label} dx"))
        plotting.probe_figure(pairs, out / "probe.png")
    if all(v == "member" for v in verdicts):
        return EXIT_OK
    if any(v == "not-member" for v in verdicts):
        return EXIT_FAIL
    return EXIT_INCONCLUSIVE


def cmd_decay(args, out: Path) -> int:
    cfg = _guard(args, out)
    if cfg is None:
        return EXIT_HYPOTHESIS
    system = cfg.system
    span = args.horizon[0] if args.horizon else system.horizon - max(args.s)
    if max(args.s) + span > system.horizon + 1e-12:
        print("base time plus span exceeds the working horizon")
        return EXIT_CONFIG
    fit, rows = stability_experiment(system, args.s, span, args.step)
    _write_csv(out / "decay.csv", ["s", "t", "norm_X"], rows)
    summary = (
        f"decay fit over {fit.n_samples} samples: rate {fit.rate!r}, "
        f"prefactor {fit.prefactor!r}, pre-inflation residual {fit.residual!r}"
    )
    (out / "decay_fit.txt").write_text(summary + "\n")
    print(summary)
    if args.plot:
        from . import plotting

        plotting.decay_figure(rows, fit, out / "decay.png")
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "fundamental": cmd_fundamental,
    "reconstruct": cmd_reconstruct,
    "certify": cmd_certify,
    "probe": cmd_probe,
    "decay": cmd_decay,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](args, out)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    _sys.exit(main())
