"""Numeric checks of the model's assumptions, equilibrium conditions and comparative statics.

Nothing here proves anything. Each check evaluates a stated condition on
concrete numbers, or compares a predicted equilibrium property with what the
solver actually returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import game
from .analysis import DEFAULT_COUNT, DEFAULT_RANGES, Parameter, sweep
from .game import CostModel, GameParams
from .solver import SolverConfig, best_response_curve, solve_spne

WELFARE_TOL = 1e-6


class PreconditionError(ValueError):
    """A check was asked for on inputs its premises exclude."""


@dataclass(frozen=True)
class AssumptionReport:
    positive_floor: bool
    simulation_only: bool
    marginal_positive: bool
    convex: bool
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_assumptions(params: GameParams, cost: CostModel, probe_points: int = 101) -> AssumptionReport:
    """Bounded positive contributions and a convex cost with positive marginal."""
    if probe_points < 3:
        raise ValueError("probe_points must be >= 3")
    failures = []
    positive_floor = params.c_min > 0
    if not positive_floor:
        failures.append("c_min must be > 0 (c_min = 0 is accepted for simulation only)")
    probes = np.linspace(params.c_min, params.c_max, probe_points)
    marginal_positive = bool(np.all(cost.marginal(probes) > 0))
    if not marginal_positive:
        failures.append("marginal cost is not positive on the whole interval")
    second = np.diff(cost(probes), 2)
    # the tolerance only absorbs rounding in the differences of an affine cost
    scale = 1e-12 * max(1.0, float(np.max(np.abs(cost(probes)))))
    convex = bool(np.all(second >= -scale))
    if not convex:
        failures.append("cost has a negative second difference")
    return AssumptionReport(positive_floor, not positive_floor, marginal_positive, convex, failures)


@dataclass(frozen=True)
class ConditionReport:
    rho_ok: bool
    rho_margin: float
    gamma_ok: bool
    gamma_required_scaled: float
    gamma_required_unscaled: float
    gamma_margin: float
    penalty_ok: bool
    penalty_required: float
    penalty_margin: float
    all_ok: bool
    predicted_profile: tuple[float, ...] | None

    @property
    def gamma_required(self) -> float:
        return max(self.gamma_required_scaled, self.gamma_required_unscaled)


def theorem1_conditions(params: GameParams, cost: CostModel) -> ConditionReport:
    """Sufficient conditions for the all-``c_max`` equilibrium.

    The cooperation bound is published in two forms that differ by a factor
    ``B`` on the marginal cost; the requirement used is the larger of the two.
    """
    if params.c_min <= 0:
        raise PreconditionError("the cooperation bound divides by c_min, which must be > 0")
    n, B = params.n, params.threshold
    lp = float(cost.marginal(params.c_max))
    share = params.share
    floor_ratio = params.c_min / B

    rho_margin = params.rho - n * lp
    g_main = (lp * B - share) / floor_ratio
    g_app = (lp - share) / floor_ratio
    gamma_margin = params.gamma_coop - max(g_main, g_app)
    p_req = (lp + params.gamma_coop * params.c_max / B + share) * (params.c_max - params.c_min)
    penalty_margin = params.penalty - p_req

    rho_ok, gamma_ok, penalty_ok = rho_margin > 0, gamma_margin > 0, penalty_margin > 0
    all_ok = rho_ok and gamma_ok and penalty_ok
    return ConditionReport(
        rho_ok=rho_ok, rho_margin=rho_margin,
        gamma_ok=gamma_ok, gamma_required_scaled=g_main, gamma_required_unscaled=g_app,
        gamma_margin=gamma_margin,
        penalty_ok=penalty_ok, penalty_required=p_req, penalty_margin=penalty_margin,
        all_ok=all_ok,
        predicted_profile=(params.c_max,) * n if all_ok else None,
    )


@dataclass(frozen=True)
class Theorem1Verdict:
    passed: bool
    max_deviation: float
    profile: tuple[float, ...]
    conditions: ConditionReport


def verify_theorem1(params: GameParams, cost: CostModel,
                    solver_config: SolverConfig | None = None) -> Theorem1Verdict:
    """Solve the game and compare with the predicted all-``c_max`` profile."""
    config = solver_config or SolverConfig()
    cond = theorem1_conditions(params, cost)
    if not cond.all_ok:
        raise PreconditionError("the equilibrium conditions do not hold for these parameters")
    res = solve_spne(params, cost, config)
    dev = float(np.max(np.abs(np.asarray(res.profile) - params.c_max)))
    return Theorem1Verdict(dev <= config.tol, dev, res.profile, cond)


def sample_condition_satisfying(rng: np.random.Generator, n_choices=(2, 3)) -> tuple[GameParams, CostModel]:
    """Draw a random game that meets every equilibrium condition, with some margin."""
    n = int(rng.choice(n_choices))
    c_min = float(rng.uniform(0.05, 0.3))
    c_max = float(rng.uniform(0.8, 1.5))
    if rng.uniform() < 0.5:
        cost = CostModel.linear(float(rng.uniform(0.5, 1.5)))
    else:
        cost = CostModel.quadratic(float(rng.uniform(0.3, 1.0)), float(rng.uniform(0.0, 0.5)))
    lp = float(cost.marginal(c_max))
    threshold = float(rng.uniform(0.3, 0.9) * n * c_max)
    rho = n * lp * float(rng.uniform(1.05, 2.0))
    base = GameParams(n=n, rho=rho, threshold=threshold, c_min=c_min, c_max=c_max, penalty=0.0)
    probe = theorem1_conditions(base, cost)
    gamma = max(0.0, probe.gamma_required) + float(rng.uniform(0.1, 2.0))
    base = replace(base, gamma_coop=gamma)
    p_req = theorem1_conditions(base, cost).penalty_required
    return replace(base, penalty=p_req * float(rng.uniform(1.05, 2.0))), cost


@dataclass(frozen=True)
class LemmaReport:
    passed: bool
    violations: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)


def verify_lemma1(params: GameParams, cost: CostModel, solver_config: SolverConfig | None = None,
                  grid_size: int = 25, slices: int = 5, along_path: bool = False) -> LemmaReport:
    """Check that best responses never fall as the predecessor contributes more.

    The history state is ``(c_{i-1}, S_{i-1})``. For each agent ``i >= 2`` the
    sum is held at ``slices`` representative values while ``c_{i-1}`` runs
    over ``[c_min, c_max]``, which is the partial effect the monotonicity
    argument is about. With ``along_path`` agent 2 instead follows its only
    reachable histories ``S_1 = c_1``; there the penalty boundary falls as
    ``c_1`` rises, so that curve need not be monotone.
    A drop larger than one solver grid step counts as a violation.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    config = solver_config or SolverConfig()
    p = params
    step = (p.c_max - p.c_min) / (config.grid_points - 1)
    cs = np.linspace(p.c_min, p.c_max, grid_size)
    violations, curves = [], {}
    for i in range(2, p.n + 1):
        if i == 2 and along_path:
            jobs = [(None, cs)]
        else:
            jobs = [(float(s), np.full(grid_size, s))
                    for s in np.linspace((i - 1) * p.c_min, (i - 1) * p.c_max, slices)]
        for s, sp in jobs:
            curve = best_response_curve(i, cs, cs if s is None else sp, p, cost, config)
            curves[(i, s)] = curve
            for (x0, y0), (x1, y1) in zip(curve, curve[1:]):
                if y1 < y0 - step:
                    violations.append({"agent": i, "s_prev": s, "c_prev": (x0, x1),
                                       "response": (y0, y1)})
    return LemmaReport(not violations, violations, curves)


@dataclass(frozen=True)
class StaticsReport:
    parameter: str
    values: list[float]
    welfare: list[float]
    expected: str
    violations: list = field(default_factory=list)
    net_change: float = 0.0

    @property
    def passed(self) -> bool:
        """No adjacent pair moves against the predicted direction."""
        return not self.violations

    @property
    def net_consistent(self) -> bool:
        """The endpoints alone move in the predicted direction (or tie)."""
        if self.expected == "non-decreasing":
            return self.net_change >= -WELFARE_TOL
        return self.net_change <= WELFARE_TOL


EXPECTED_SIGN = {
    Parameter.GAMMA: "non-decreasing",
    Parameter.RHO: "non-decreasing",
    Parameter.B: "non-increasing",
}


def comparative_statics(params: GameParams, cost: CostModel, which: Parameter,
                        lo: float | None = None, hi: float | None = None,
                        count: int = DEFAULT_COUNT, solver_config: SolverConfig | None = None,
                        tol: float = WELFARE_TOL, penalty_ratio: float | None = None,
                        threads: int = 1) -> StaticsReport:
    """Equilibrium welfare along a sweep, checked against the predicted sign pair by pair."""
    which = Parameter(which)
    lo = DEFAULT_RANGES[which][0] if lo is None else lo
    hi = DEFAULT_RANGES[which][1] if hi is None else hi
    rows = sweep(params, cost, which, lo, hi, count, solver_config, penalty_ratio, threads)
    values = [r.param_value for r in rows]
    welfare = [r.welfare for r in rows]
    expected = EXPECTED_SIGN[which]
    sign = 1.0 if expected == "non-decreasing" else -1.0
    violations = []
    for k in range(len(rows) - 1):
        if sign * (welfare[k + 1] - welfare[k]) < -tol:
            violations.append({"index": k, "values": (values[k], values[k + 1]),
                               "welfare": (welfare[k], welfare[k + 1])})
    return StaticsReport(which.value, values, welfare, expected, violations,
                         welfare[-1] - welfare[0])


def welfare_rho_slope(profile, params: GameParams, cost: CostModel, h: float = 1e-5) -> tuple[float, float]:
    """``dW/drho`` at a fixed profile: the analytic value ``S_n`` and a central difference."""
    arr = game.as_profile(profile, params)
    up = game.welfare(arr, replace(params, rho=params.rho + h), cost)
    down = game.welfare(arr, replace(params, rho=max(0.0, params.rho - h)), cost)
    width = params.rho + h - max(0.0, params.rho - h)
    return float(game.outcome(arr, params)), float((up - down) / width)
