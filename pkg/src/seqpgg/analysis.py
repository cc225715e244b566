"""Parameter sweeps, Pareto-proximity sampling and tabular export."""

from __future__ import annotations

import csv
import enum
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import game
from .game import CostModel, GameParams
from .solver import SolverConfig, solve_spne


class Parameter(str, enum.Enum):
    """Parameters the sweeps and the comparative-statics checks can vary."""

    GAMMA = "gamma"
    RHO = "rho"
    B = "b"

    @property
    def field_name(self) -> str:
        return {"gamma": "gamma_coop", "rho": "rho", "b": "threshold"}[self.value]


DEFAULT_RANGES = {
    Parameter.GAMMA: (0.5, 3.0),
    Parameter.RHO: (1.0, 3.0),
    Parameter.B: (0.5, 2.0),
}
DEFAULT_COUNT = 25


@dataclass(frozen=True)
class SweepRow:
    param_name: str
    param_value: float
    profile: tuple[float, ...]
    utilities: tuple[float, ...]
    welfare: float
    success: bool


@dataclass(frozen=True)
class ParetoReport:
    sample_count: int
    seed: int
    dominating_count: int
    spne_profile: tuple[float, ...]
    spne_utilities: tuple[float, ...]
    examples: list = field(default_factory=list)


def swept_params(base: GameParams, which: Parameter, value: float,
                 penalty_ratio: float | None = None) -> GameParams:
    """``base`` with one parameter replaced; optionally ties the penalty to ``P = k * B``."""
    which = Parameter(which)
    params = replace(base, **{which.field_name: float(value)})
    if penalty_ratio is not None:
        params = replace(params, penalty=penalty_ratio * params.threshold)
    return params


def sweep(base_params: GameParams, cost: CostModel, which: Parameter,
          lo: float | None = None, hi: float | None = None, count: int = DEFAULT_COUNT,
          solver_config: SolverConfig | None = None, penalty_ratio: float | None = None,
          threads: int = 1) -> list[SweepRow]:
    """Solve the equilibrium at ``count`` evenly spaced values of one parameter.

    Rows come back in ascending parameter order whatever the thread count.
    """
    which = Parameter(which)
    d_lo, d_hi = DEFAULT_RANGES[which]
    lo = d_lo if lo is None else float(lo)
    hi = d_hi if hi is None else float(hi)
    if count < 2:
        raise ValueError("a sweep needs count >= 2")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    values = np.linspace(lo, hi, count)

    def one(v):
        params = swept_params(base_params, which, v, penalty_ratio)
        res = solve_spne(params, cost, solver_config)
        return SweepRow(which.value, float(v), res.profile, res.utilities,
                        res.welfare, res.success)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]


def dominates(u, v, eps: float = 0.0) -> bool:
    """True if ``u`` is weakly better than ``v`` for every agent and strictly for one.

    The comparison is exact by default; ``eps`` > 0 demands a margin in both
    tests and is meant for sensitivity studies only.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"utility vectors differ in length: {u.shape} vs {v.shape}")
    return bool(np.all(u >= v - eps) and np.any(u > v + eps))


def _dominating_mask(U, v, eps=0.0):
    return np.all(U >= v - eps, axis=-1) & np.any(U > v + eps, axis=-1)


def sample_profiles(params: GameParams, sample_count: int, seed: int) -> np.ndarray:
    """Uniform profiles on ``[c_min, c_max]^n``; sample ``k`` uses its own child stream.

    Child ``k`` is ``SeedSequence(seed, spawn_key=(k,))`` feeding a PCG64
    generator, so any subset of samples can be drawn in any order and still
    match a full serial run.
    """
    out = np.empty((sample_count, params.n))
    for k in range(sample_count):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))
        out[k] = rng.uniform(params.c_min, params.c_max, params.n)
    return out


def pareto_assess(params: GameParams, cost: CostModel, sample_count: int = 10_000,
                  seed: int = 0, solver_config: SolverConfig | None = None,
                  inject=None, eps: float = 0.0, max_examples: int = 10) -> ParetoReport:
    """Count sampled profiles whose utilities Pareto-dominate the equilibrium's.

    ``inject`` replaces the first samples with the given profiles, which lets a
    test plant a known profile among the random ones.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    res = solve_spne(params, cost, solver_config)
    spne_u = np.asarray(res.utilities)
    samples = sample_profiles(params, sample_count, seed)
    if inject is not None:
        planted = np.atleast_2d(np.asarray(inject, dtype=float))
        samples[: len(planted)] = planted[:sample_count]
    U = game.utilities(samples, params, cost)
    mask = _dominating_mask(U, spne_u, eps)
    examples = [[float(x) for x in samples[k]] for k in np.flatnonzero(mask)[:max_examples]]
    return ParetoReport(sample_count, int(seed), int(mask.sum()), res.profile,
                        res.utilities, examples)


def grid_pareto_count(params: GameParams, cost: CostModel, points: int,
                      reference_utilities) -> int:
    """Exhaustive count over the ``points**n`` lattice of profiles dominating the reference."""
    axis = np.linspace(params.c_min, params.c_max, points)
    mesh = np.stack(np.meshgrid(*([axis] * params.n), indexing="ij"), axis=-1)
    U = game.utilities(mesh.reshape(-1, params.n), params, cost)
    return int(_dominating_mask(U, np.asarray(reference_utilities, dtype=float)).sum())


# -- export ------------------------------------------------------------------------


def fmt6(x) -> str:
    return "%.6g" % x


def round6(x):
    """Round to six significant digits for JSON output."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(fmt6(x))
    if isinstance(x, dict):
        return {k: round6(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round6(v) for v in x]
    return x


def sweep_header(n: int) -> list[str]:
    return (["param_name", "param_value"] + [f"c_{i}" for i in range(1, n + 1)]
            + [f"u_{i}" for i in range(1, n + 1)] + ["welfare", "success"])


def rows_to_csv(rows: list[SweepRow], n: int | None = None) -> str:
    if n is None:
        n = len(rows[0].profile) if rows else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(sweep_header(n))
    for r in rows:
        w.writerow([r.param_name, fmt6(r.param_value)]
                   + [fmt6(c) for c in r.profile] + [fmt6(u) for u in r.utilities]
                   + [fmt6(r.welfare), "true" if r.success else "false"])
    return buf.getvalue()


def to_text(obj, fmt: str) -> str:
    """Serialize sweep rows, a report dataclass or a plain mapping as CSV or JSON."""
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(obj, list):
        if fmt == "csv":
            return rows_to_csv(obj)
        return json.dumps([round6(asdict(r)) for r in obj], indent=2) + "\n"
    data = asdict(obj) if hasattr(obj, "__dataclass_fields__") else dict(obj)
    if fmt == "json":
        return json.dumps(round6(data), indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "value"])
    for k, v in data.items():
        if isinstance(v, (list, tuple, dict)):
            v = json.dumps(round6(v))
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, (float, np.floating)):
            v = fmt6(v)
        w.writerow([k, v])
    return buf.getvalue()


def write_text(text: str, destination) -> None:
    """Write UTF-8 text with LF line endings to a path or an open text stream."""
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(destination)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export(obj, fmt: str, destination) -> None:
    """Write sweep rows or a report to ``destination`` as CSV or JSON."""
    write_text(to_text(obj, fmt), destination)


CURVE_HEADER = ["episode", "mean_reward", "mean_quality", "loss", "kl"]


def export_learning_curve(curve: list[dict], destination) -> None:
    """Write a training curve as CSV with one row per episode."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for row in curve:
        w.writerow([int(row["episode"])] + [fmt6(row[k]) for k in CURVE_HEADER[1:]])
    write_text(buf.getvalue(), destination)
