"""TOML problem configurations.

Schema (all expression strings use the grammar of :mod:`impulsedde.timefn`)::

    [system]
    n = 1                # state dimension
    horizon = 20.0       # working interval [0, horizon]
    x0 = [1.0]           # optional initial value, defaults to zero

    [schedule]
    times = "uniform(1.0, 20)"     # or an explicit list [0.0, 1.0, ...]
    B = [[0.5]]                    # shared jump matrix, or one matrix per impulse
    alpha = [0.0]                  # optional jump vector(s)
    gap_mode = "uniform"           # uniform | bounded | finite
    rho = 0.5                      # declared gap bounds (bounded mode only)
    sigma = 1.5

    [[terms]]
    A = [["0.1"]]
    delay = "constant 0.1"         # or "pantograph 0.5" or "t - 0.1"

    [forcing]
    f = ["exp(-t)"]                # optional, defaults to zero

    [phi]
    phi = ["1"]                    # optional initial function, defaults to zero
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .schedule import ImpulseSchedule
from .system import DelaySystem, DelayTerm
from .timefn import MatrixFunction, ParseError, parse_delay

__all__ = ["ConfigError", "RunConfig", "load_config"]

_UNIFORM_RE = re.compile(r"^\s*uniform\(\s*([^,\s]+)\s*,\s*(\d+)\s*\)\s*$")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: DelaySystem
    path: Path
    data: dict


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return table[key]


def _parse_times(spec) -> tuple[np.ndarray, str]:
    if isinstance(spec, str):
        m = _UNIFORM_RE.match(spec)
        if not m:
            raise ConfigError(f"unrecognized times generator {spec!r}")
        d, count = float(m.group(1)), int(m.group(2))
        if d <= 0:
            raise ConfigError("uniform spacing must be positive")
        return np.arange(count + 1, dtype=float) * d, "uniform"
    times = np.asarray([float(x) for x in spec], dtype=float)
    return times, "finite"


def _parse_matrices(raw, count: int, n: int):
    def one(m):
        arr = np.asarray(m, dtype=float)
        if arr.shape != (n, n):
            raise ConfigError(f"jump matrix shape {arr.shape} does not match n={n}")
        return arr

    if count == 0:
        return []
    if raw and isinstance(raw[0], list) and raw[0] and isinstance(raw[0][0], list):
        mats = [one(m) for m in raw]
        if len(mats) != count:
            raise ConfigError(f"need {count} jump matrices, got {len(mats)}")
        return mats
    return [one(raw)] * count


def _parse_alphas(raw, count: int, n: int):
    if raw is None or count == 0:
        return None
    if raw and isinstance(raw[0], list):
        vecs = [np.asarray(v, dtype=float) for v in raw]
        if len(vecs) != count:
            raise ConfigError(f"need {count} jump vectors, got {len(vecs)}")
    else:
        vecs = [np.asarray(raw, dtype=float)] * count
    if any(v.shape != (n,) for v in vecs):
        raise ConfigError("jump vectors must have length n")
    return vecs


def _column(raw, n: int, what: str) -> MatrixFunction:
    if len(raw) != n:
        raise ConfigError(f"{what} must list {n} expression(s)")
    return MatrixFunction([[cell] for cell in raw])


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    try:
        sys_tab = _require(data, "system", "top level")
        n = int(_require(sys_tab, "n", "system"))
        horizon = float(_require(sys_tab, "horizon", "system"))
        x0 = sys_tab.get("x0")

        sched_tab = _require(data, "schedule", "top level")
        times, implied_mode = _parse_times(_require(sched_tab, "times", "schedule"))
        count = len(times) - 1
        matrices = _parse_matrices(sched_tab.get("B", []), count, n)
        if count and not matrices:
            raise ConfigError("schedule lists impulse times but no jump matrices B")
        alphas = _parse_alphas(sched_tab.get("alpha"), count, n)
        gap_mode = sched_tab.get("gap_mode", implied_mode)
        declared = None
        if gap_mode == "bounded":
            declared = (
                float(_require(sched_tab, "rho", "schedule")),
                float(_require(sched_tab, "sigma", "schedule")),
            )
        schedule = ImpulseSchedule(
            times,
            matrices,
            jumps=alphas,
            gap_mode=gap_mode,
            declared_bounds=declared,
            dim=n,
        )

        terms = []
        for idx, term_tab in enumerate(data.get("terms", [])):
            raw_a = _require(term_tab, "A", f"terms[{idx}]")
            coeff = MatrixFunction(raw_a)
            if coeff.shape != (n, n):
                raise ConfigError(
                    f"terms[{idx}].A has shape {coeff.shape}, expected ({n}, {n})"
                )
            terms.append(DelayTerm(coeff, parse_delay(_require(term_tab, "delay", f"terms[{idx}]"))))

        forcing = None
        if "forcing" in data and "f" in data["forcing"]:
            forcing = _column(data["forcing"]["f"], n, "forcing.f")
        phi = None
        if "phi" in data and "phi" in data["phi"]:
            phi = _column(data["phi"]["phi"], n, "phi.phi")

        system = DelaySystem(
            n=n,
            terms=tuple(terms),
            schedule=schedule,
            horizon=horizon,
            forcing=forcing,
            phi=phi,
            x0=None if x0 is None else np.asarray(x0, dtype=float),
        )
    except ParseError as exc:
        raise ConfigError(f"{path}: bad expression: {exc}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig(system=system, path=path, data=data)
