"""Subgame perfect equilibrium by backward induction.

Two engines share one bounded 1-D maximizer:

* ``NESTED`` evaluates every candidate contribution of agent ``i`` by solving
  the successors' problems recursively, batched over all candidates at once.
* ``DP`` tabulates the terminal aggregate reached from each history state
  ``(c_prev, s_prev)`` and reads it back by bilinear interpolation, so the cost
  grows linearly in ``n``.

The maximizer scans a uniform grid plus the penalty boundary ``t_i``, then
refines by golden-section search inside the best grid cell on each side of
``t_i``. The last mover's payoff is a quadratic on either side of its penalty
jump, so its best response is taken in closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .game import CostModel, GameParams, SuccessMode, SynergyMode, payoff_terms
from . import game

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class SolverMode(str, enum.Enum):
    NESTED = "nested"
    DP = "dp"


class TieBreak(str, enum.Enum):
    PREFER_LARGER = "prefer_larger"


class SolverConfigurationError(ValueError):
    """Raised when a solver mode cannot handle the requested game."""


@dataclass(frozen=True)
class SolverConfig:
    grid_points: int = 401
    refine_iters: int = 40
    tol: float = 1e-4
    payoff_tol: float = 1e-9
    tie_break: TieBreak = TieBreak.PREFER_LARGER
    dp_cells: tuple[int, int] = (201, 401)
    mode: SolverMode = SolverMode.NESTED
    max_nested_n: int = 6
    max_batch: int = 200_000

    def __post_init__(self):
        object.__setattr__(self, "mode", SolverMode(self.mode))
        object.__setattr__(self, "tie_break", TieBreak(self.tie_break))
        object.__setattr__(self, "dp_cells", tuple(int(v) for v in self.dp_cells))
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be >= 0")
        if len(self.dp_cells) != 2 or min(self.dp_cells) < 2:
            raise ValueError("dp_cells needs two counts >= 2")


@dataclass(frozen=True)
class HistoryState:
    """What agent ``i`` needs to know about the past: ``c_{i-1}`` and ``S_{i-1}``."""

    i: int
    c_prev: float = 0.0
    s_prev: float = 0.0

    def validate(self, params: GameParams) -> None:
        if not 1 <= self.i <= params.n:
            raise IndexError(f"agent index must be in [1, {params.n}], got {self.i}")
        if self.i == 1 and (self.c_prev != 0 or self.s_prev != 0):
            raise ValueError("the first mover has an empty history")
        if self.i > 1 and not params.c_min <= self.c_prev <= params.c_max:
            raise ValueError(f"c_prev={self.c_prev} outside the contribution bounds")
        if not 0 <= self.s_prev <= (self.i - 1) * params.c_max + 1e-12:
            raise ValueError(f"s_prev={self.s_prev} not reachable by agent {self.i}")


class PenaltyBoundary(NamedTuple):
    value: float
    reachable: bool


class BestResponse(NamedTuple):
    c_star: float
    value: float
    continuation: tuple[float, ...]


@dataclass(frozen=True)
class EquilibriumResult:
    profile: tuple[float, ...]
    utilities: tuple[float, ...]
    welfare: float
    success: bool
    diagnostics: dict = field(default_factory=dict)


def min_penalty_avoiding_contribution(state: HistoryState, params: GameParams) -> PenaltyBoundary:
    """Smallest own contribution that still lets the task succeed if successors max out.

    When even ``c_max`` cannot reach the threshold the value is clamped to
    ``c_max`` and ``reachable`` is False.
    """
    raw = _raw_boundary(params, state.i, state.s_prev)
    value = float(np.clip(raw, params.c_min, params.c_max))
    return PenaltyBoundary(value, bool(raw <= params.c_max))


def _raw_boundary(params, i, s_prev):
    if params.success_mode is SuccessMode.CUMULATIVE_SUM:
        return params.threshold - s_prev - (params.n - i) * params.c_max
    if i == params.n:
        return np.full_like(np.asarray(s_prev, dtype=float), params.threshold)
    return np.full_like(np.asarray(s_prev, dtype=float), params.c_min)


class _Engine:
    """Backward induction over batches of history states."""

    def __init__(self, params: GameParams, cost: CostModel, config: SolverConfig):
        self.params = params
        self.cost = cost
        self.config = config
        self.grid = np.linspace(params.c_min, params.c_max, config.grid_points)
        self.tables: dict[int, tuple] = {}
        if config.mode is SolverMode.NESTED and params.n > config.max_nested_n:
            raise SolverConfigurationError(
                f"nested mode is limited to n <= {config.max_nested_n}; use DP for n={params.n}"
            )
        if config.mode is SolverMode.DP:
            if (params.success_mode is not SuccessMode.CUMULATIVE_SUM
                    or params.synergy_mode is not SynergyMode.PREDECESSOR):
                raise SolverConfigurationError(
                    "DP mode needs cumulative-sum success and predecessor synergy"
                )
            self._build_tables()

    # -- boundaries and selection -------------------------------------------------

    def boundary(self, i, s_prev):
        p = self.params
        raw = _raw_boundary(p, i, s_prev)
        t = np.clip(raw, p.c_min, p.c_max)
        if p.success_mode is SuccessMode.CUMULATIVE_SUM:
            # t must actually clear the threshold once added in floating point
            base = s_prev + (p.n - i) * p.c_max
            for _ in range(4):
                short = (base + t < p.threshold) & (t < p.c_max) & (raw <= p.c_max)
                if not short.any():
                    break
                t = np.where(short, np.nextafter(t, np.inf), t)
        return t

    def select(self, values, cands):
        """Column index of the best candidate per row; near-ties go to the larger contribution."""
        best = values.max(axis=1, keepdims=True)
        near = values >= best - self.config.payoff_tol
        return np.where(near, cands, -np.inf).argmax(axis=1)

    # -- evaluation ---------------------------------------------------------------

    def evaluate(self, i, X, c_prev, s_prev):
        """Own payoff of agent ``i`` and the terminal aggregate for each candidate in ``X``."""
        p = self.params
        S = s_prev[:, None] + X
        if i == p.n:
            agg = S if p.success_mode is SuccessMode.CUMULATIVE_SUM else X
        else:
            _, agg = self.continuation(i + 1, X.ravel(), S.ravel())
            agg = agg.reshape(X.shape)
        val = payoff_terms(p, self.cost, X, c_prev[:, None], agg).total
        return np.asarray(val), agg

    def continuation(self, j, c_prev, s_prev):
        if j == self.params.n:
            return self.leaf(c_prev, s_prev)
        if self.config.mode is SolverMode.DP:
            return None, self.interpolate(j, c_prev, s_prev)
        return self.respond(j, c_prev, s_prev)

    def respond(self, i, c_prev, s_prev, refine=True):
        """Best responses of agent ``i`` at each state and the aggregates they lead to."""
        c_prev = np.asarray(c_prev, dtype=float).ravel()
        s_prev = np.asarray(s_prev, dtype=float).ravel()
        if i == self.params.n:
            return self.leaf(c_prev, s_prev)
        width = self.config.grid_points + 1
        rows = max(1, self.config.max_batch // width)
        if len(c_prev) <= rows:
            return self.optimize(i, c_prev, s_prev, refine)
        parts = [self.optimize(i, c_prev[k:k + rows], s_prev[k:k + rows], refine)
                 for k in range(0, len(c_prev), rows)]
        return (np.concatenate([a for a, _ in parts]),
                np.concatenate([b for _, b in parts]))

    def leaf(self, c_prev, s_prev):
        p, cost = self.params, self.cost
        quad = -cost.b + (p.gamma_coop / p.threshold if p.synergy_mode is SynergyMode.SELF else 0.0)
        lin = -cost.a + p.share
        if p.synergy_mode is SynergyMode.PREDECESSOR:
            lin = lin + p.gamma_coop * c_prev / p.threshold
        lin = np.broadcast_to(lin, c_prev.shape)
        t = self.boundary(p.n, s_prev)
        lo = np.full_like(c_prev, p.c_min)
        hi = np.full_like(c_prev, p.c_max)
        if quad < 0:
            stat = -lin / (2.0 * quad)
            cands = np.stack([lo, hi, t, np.clip(stat, lo, t), np.clip(stat, t, hi)], axis=1)
        else:
            # convex or linear on each piece: the optimum is an endpoint
            cands = np.stack([lo, hi, t], axis=1)
        val, agg = self.evaluate(p.n, cands, c_prev, s_prev)
        k = self.select(val, cands)
        rows = np.arange(len(k))
        return cands[rows, k], agg[rows, k]

    def optimize(self, i, c_prev, s_prev, refine=True):
        cfg = self.config
        grid = self.grid
        G = len(grid)
        M = len(c_prev)
        t = self.boundary(i, s_prev)
        X = np.concatenate([np.broadcast_to(grid, (M, G)), t[:, None]], axis=1)
        val, agg = self.evaluate(i, X, c_prev, s_prev)
        rows = np.arange(M)
        k = self.select(val, X)
        best_x, best_v, best_a = X[rows, k], val[rows, k], agg[rows, k]
        if not refine or cfg.refine_iters == 0 or grid[-1] == grid[0]:
            return best_x, best_a

        step = grid[1] - grid[0]
        j = np.clip(np.rint((best_x - grid[0]) / step).astype(int), 0, G - 1)
        lo = grid[np.maximum(j - 1, 0)]
        hi = grid[np.minimum(j + 1, G - 1)]
        cut = np.clip(t, lo, hi)
        a = np.concatenate([lo, cut])
        b = np.concatenate([cut, hi])
        cp2 = np.concatenate([c_prev, c_prev])
        sp2 = np.concatenate([s_prev, s_prev])
        for _ in range(cfg.refine_iters):
            if np.max(b - a) <= 1e-2 * cfg.tol:
                break
            x1 = b - INV_PHI * (b - a)
            x2 = a + INV_PHI * (b - a)
            pts = np.stack([x1, x2], axis=1)
            v, ag = self.evaluate(i, pts, cp2, sp2)
            cand_x = np.column_stack([best_x, pts[:M], pts[M:]])
            cand_v = np.column_stack([best_v, v[:M], v[M:]])
            cand_a = np.column_stack([best_a, ag[:M], ag[M:]])
            k = self.select(cand_v, cand_x)
            best_x, best_v, best_a = cand_x[rows, k], cand_v[rows, k], cand_a[rows, k]
            left = v[:, 0] > v[:, 1] + cfg.payoff_tol
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
        return best_x, best_a

    # -- dynamic programming tables -----------------------------------------------

    def _build_tables(self):
        # Table j holds the terminal aggregate when agent j moves at (c_prev, s_prev).
        # Agent 2 always has s_prev == c_prev, so its table is one-dimensional.
        p = self.params
        nc, ns = self.config.dp_cells
        for j in range(p.n - 1, 1, -1):
            cp = np.linspace(p.c_min, p.c_max, nc)
            if j == 2:
                _, agg = self.respond(j, cp, cp.copy(), refine=False)
                self.tables[j] = (cp, None, agg)
                continue
            sp = np.linspace((j - 1) * p.c_min, (j - 1) * p.c_max, ns)
            C, S = np.meshgrid(cp, sp, indexing="ij")
            _, agg = self.respond(j, C.ravel(), S.ravel(), refine=False)
            self.tables[j] = (cp, sp, agg.reshape(nc, ns))

    def interpolate(self, j, c_prev, s_prev):
        cp, sp, F = self.tables[j]
        if sp is None:
            ix, wx = _cell(cp, c_prev)
            return (1 - wx) * F[ix] + wx * F[np.minimum(ix + 1, len(cp) - 1)]
        ix, wx = _cell(cp, c_prev)
        iy, wy = _cell(sp, s_prev)
        ix1 = np.minimum(ix + 1, len(cp) - 1)
        iy1 = np.minimum(iy + 1, len(sp) - 1)
        return ((1 - wx) * (1 - wy) * F[ix, iy] + wx * (1 - wy) * F[ix1, iy]
                + (1 - wx) * wy * F[ix, iy1] + wx * wy * F[ix1, iy1])

    # -- on-path play -------------------------------------------------------------

    def play(self, state: HistoryState) -> list[float]:
        """Contributions of agents ``state.i .. n`` when everyone best-responds."""
        out = []
        c_prev, s_prev = state.c_prev, state.s_prev
        for i in range(state.i, self.params.n + 1):
            c, _ = self.respond(i, np.array([c_prev]), np.array([s_prev]))
            c = float(c[0])
            out.append(c)
            c_prev, s_prev = c, s_prev + c
        return out

    def diagnostics(self) -> dict:
        cfg = self.config
        step = float(self.grid[1] - self.grid[0])
        diag = {
            "mode": cfg.mode.value,
            "grid_points": cfg.grid_points,
            "grid_step": step,
            "bracket_error": min(2.0 * step * INV_PHI ** cfg.refine_iters, 1e-2 * cfg.tol),
        }
        if cfg.mode is SolverMode.DP:
            diag["dp_cells"] = list(cfg.dp_cells)
            diag["dp_cell_width"] = dp_cell_width(self.params, cfg)
        return diag


def _cell(nodes, x):
    n = len(nodes)
    if n == 1 or nodes[-1] == nodes[0]:
        return np.zeros(len(x), dtype=int), np.zeros(len(x))
    f = np.clip((x - nodes[0]) / (nodes[-1] - nodes[0]) * (n - 1), 0, n - 1)
    i = np.minimum(np.floor(f).astype(int), n - 2)
    return i, f - i


def dp_cell_width(params: GameParams, config: SolverConfig) -> float:
    """Spacing of the DP table along the predecessor-contribution axis."""
    return (params.c_max - params.c_min) / (config.dp_cells[0] - 1)


def best_response(state: HistoryState, params: GameParams, cost: CostModel,
                  config: SolverConfig | None = None) -> BestResponse:
    """Best contribution of ``state.i`` given that every successor best-responds."""
    config = config or SolverConfig()
    state.validate(params)
    engine = _Engine(params, cost, config)
    path = engine.play(state)
    c_star = path[0]
    c_prev = np.array([state.c_prev])
    val, _ = engine.evaluate(state.i, np.array([[c_star]]), c_prev, np.array([state.s_prev]))
    return BestResponse(c_star, float(val[0, 0]), tuple(path[1:]))


def best_response_curve(i: int, c_prev_samples, s_prev, params: GameParams,
                        cost: CostModel, config: SolverConfig | None = None):
    """Agent ``i``'s best response at each predecessor contribution.

    ``s_prev`` is either one cumulative sum held fixed along the curve or one
    value per sample (agent 2, whose history has ``S_1 = c_1``, needs the latter).
    """
    config = config or SolverConfig()
    samples = np.asarray(c_prev_samples, dtype=float)
    if np.any(np.diff(samples) < 0):
        raise ValueError("samples must be sorted ascending")
    if not 2 <= i <= params.n:
        raise IndexError(f"a best-response curve needs 2 <= i <= {params.n}")
    engine = _Engine(params, cost, config)
    sums = np.broadcast_to(np.asarray(s_prev, dtype=float), samples.shape).copy()
    c, _ = engine.respond(i, samples, sums)
    return [(float(x), float(y)) for x, y in zip(samples, c)]


def solve_spne(params: GameParams, cost: CostModel,
               config: SolverConfig | None = None) -> EquilibriumResult:
    """On-path equilibrium profile obtained by backward induction from the empty history."""
    config = config or SolverConfig()
    engine = _Engine(params, cost, config)
    profile = engine.play(HistoryState(1))
    u = game.utilities(profile, params, cost)
    return EquilibriumResult(
        profile=tuple(profile),
        utilities=tuple(float(x) for x in u),
        welfare=float(u.sum()),
        success=bool(game.success(profile, params)),
        diagnostics=engine.diagnostics(),
    )
