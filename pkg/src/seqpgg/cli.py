"""Command-line front end: ``seqpgg {solve,check,sweep,pareto,best-response,train}``.

Machine output goes to stdout (or ``--out``), diagnostics to stderr.
Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import analysis, config as cfgmod, theory
from .analysis import Parameter
from .config import ConfigError, RunConfig
from .metarl import trainer as trainer_mod
from .solver import SolverConfigurationError, best_response_curve, solve_spne

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH",
                   help="YAML run config, or the name of a bundled config")
    p.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    p.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--threads", type=int, help="worker threads for sweeps (1 for bitwise reproducibility)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqpgg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="equilibrium profile by backward induction")
    _common(p)

    p = sub.add_parser("check", help="assumption, equilibrium-condition and monotonicity checks")
    _common(p)
    p.add_argument("--only", action="append",
                   choices=("assumptions", "theorem1", "lemma1", "statics"),
                   help="run only these checks (repeatable)")

    p = sub.add_parser("sweep", help="equilibrium along one parameter")
    _common(p)
    p.add_argument("--parameter", choices=[x.value for x in Parameter])
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--penalty-ratio", type=float, help="tie the penalty to P = k * B")

    p = sub.add_parser("pareto", help="Monte Carlo Pareto-dominance test of the equilibrium")
    _common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--grid-points", type=int, help="also run the exhaustive lattice check")

    p = sub.add_parser("best-response", help="best response of one agent along c_prev")
    _common(p)
    p.add_argument("--agent", type=int)
    p.add_argument("--s-prev", type=float)
    p.add_argument("--points", type=int)

    p = sub.add_parser("train", help="PPO meta-policy training on the synthetic environment")
    _common(p)
    p.add_argument("--episodes", type=int, help="maximum number of episodes")
    p.add_argument("--checkpoint", metavar="PATH", help="write a JSON checkpoint here")
    return parser


def _overrides(args) -> dict:
    o: dict = {"run": {}}
    for name in ("seed", "out", "format", "threads"):
        if getattr(args, name, None) is not None:
            o["run"][name] = getattr(args, name)
    cmd = args.command
    if cmd == "sweep":
        o["sweep"] = {k: v for k, v in (("parameter", args.parameter), ("lo", args.lo),
                                        ("hi", args.hi), ("count", args.count),
                                        ("penalty_ratio", args.penalty_ratio)) if v is not None}
    elif cmd == "pareto":
        o["pareto"] = {k: v for k, v in (("samples", args.samples),
                                         ("grid_points", args.grid_points)) if v is not None}
    elif cmd == "best-response":
        o["best_response"] = {k: v for k, v in (("agent", args.agent), ("s_prev", args.s_prev),
                                                ("points", args.points)) if v is not None}
    elif cmd == "train" and args.episodes is not None:
        o["trainer"] = {"max_episodes": args.episodes}
    elif cmd == "check" and args.only:
        o["check"] = {"checks": list(args.only)}
    return o


def _threads(cfg: RunConfig) -> int:
    return int(cfg.run.threads) if cfg.run.threads else (os.cpu_count() or 1)


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.run.out:
        analysis.write_text(text, cfg.run.out)
    else:
        sys.stdout.write(text)


def _fmt(cfg: RunConfig, default: str) -> str:
    return cfg.run.format or default


def cmd_solve(cfg: RunConfig) -> int:
    res = solve_spne(cfg.game, cfg.cost, cfg.solver)
    _emit(analysis.to_text(res, _fmt(cfg, "json")), cfg)
    return EXIT_OK


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def cmd_check(cfg: RunConfig) -> int:
    g, c, s = cfg.game, cfg.cost, cfg.solver
    out: dict = {}
    checks = cfg.check.checks
    if "assumptions" in checks:
        rep = theory.check_assumptions(g, c, cfg.check.probe_points)
        out["assumptions"] = dict(asdict(rep), ok=rep.ok)
    if "theorem1" in checks:
        try:
            cond = theory.theorem1_conditions(g, c)
            entry = dict(asdict(cond), gamma_required=cond.gamma_required)
            if cond.all_ok:
                v = theory.verify_theorem1(g, c, s)
                entry["verified"] = v.passed
                entry["solver_profile"] = list(v.profile)
                entry["max_deviation"] = v.max_deviation
            else:
                entry["verified"] = None
            out["theorem1"] = entry
        except theory.PreconditionError as exc:
            out["theorem1"] = {"precondition": str(exc)}
    if "lemma1" in checks:
        rep = theory.verify_lemma1(g, c, s, cfg.check.lemma_grid)
        out["lemma1"] = {"passed": rep.passed, "violations": rep.violations}
    if "statics" in checks:
        out["statics"] = {}
        for which in Parameter:
            rep = theory.comparative_statics(g, c, which, count=cfg.check.statics_count,
                                             solver_config=s, threads=_threads(cfg))
            out["statics"][which.value] = {
                "expected": rep.expected, "passed": rep.passed,
                "net_change": rep.net_change, "net_consistent": rep.net_consistent,
                "values": rep.values, "welfare": rep.welfare, "violations": rep.violations,
            }
    out = _jsonable(out)
    fmt = _fmt(cfg, "json")
    if fmt == "json":
        text = json.dumps(analysis.round6(out), indent=2) + "\n"
    else:
        text = analysis.to_text({k: v for k, v in out.items()}, "csv")
    _emit(text, cfg)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    sw = cfg.sweep
    rows = analysis.sweep(cfg.game, cfg.cost, Parameter(sw.parameter), sw.lo, sw.hi, sw.count,
                          cfg.solver, sw.penalty_ratio, _threads(cfg))
    _emit(analysis.to_text(rows, _fmt(cfg, "csv")), cfg)
    return EXIT_OK


def cmd_pareto(cfg: RunConfig) -> int:
    pc = cfg.pareto
    rep = analysis.pareto_assess(cfg.game, cfg.cost, pc.samples, cfg.run.seed, cfg.solver,
                                 eps=pc.eps)
    data = asdict(rep)
    if pc.grid_points:
        data["grid_points"] = pc.grid_points
        data["grid_dominating_count"] = analysis.grid_pareto_count(
            cfg.game, cfg.cost, pc.grid_points, rep.spne_utilities)
    _emit(analysis.to_text(data, _fmt(cfg, "json")), cfg)
    return EXIT_OK


def cmd_best_response(cfg: RunConfig) -> int:
    br, g = cfg.best_response, cfg.game
    if not 2 <= br.agent <= g.n:
        raise UsageError(f"best_response.agent must be in [2, {g.n}] for a curve in c_prev")
    samples = np.linspace(g.c_min, g.c_max, br.points)
    curve = best_response_curve(br.agent, samples, br.s_prev, g, cfg.cost, cfg.solver)
    if _fmt(cfg, "csv") == "csv":
        text = "c_prev,c_star\n" + "".join(
            f"{analysis.fmt6(x)},{analysis.fmt6(y)}\n" for x, y in curve)
    else:
        text = json.dumps({"agent": br.agent, "s_prev": analysis.round6(br.s_prev),
                           "curve": analysis.round6([list(p) for p in curve])}, indent=2) + "\n"
    _emit(text, cfg)
    return EXIT_OK


def cmd_train(cfg: RunConfig, checkpoint=None) -> int:
    res = trainer_mod.train(cfg.env, cfg.trainer, seed=cfg.run.seed,
                            checkpoint_path=checkpoint)
    if _fmt(cfg, "csv") == "csv":
        import io
        buf = io.StringIO()
        analysis.export_learning_curve(res.curve, buf)
        text = buf.getvalue()
    else:
        text = json.dumps({"episodes_run": res.episodes_run, "stopped_early": res.stopped_early,
                           "curve": analysis.round6(res.curve)}, indent=2) + "\n"
    _emit(text, cfg)
    if res.interrupted:
        print("training interrupted; checkpoint written" if checkpoint else
              "training interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "check": cmd_check, "sweep": cmd_sweep, "pareto": cmd_pareto,
    "best-response": cmd_best_response,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"seqpgg: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "train":
            return cmd_train(cfg, args.checkpoint)
        return COMMANDS[args.command](cfg)
    except (UsageError, ConfigError, SolverConfigurationError) as exc:
        print(f"seqpgg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ArithmeticError, IndexError) as exc:
        print(f"seqpgg: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
