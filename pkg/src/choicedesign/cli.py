"""Command-line interface.

Exit codes: 0 success (for ``optimize`` and ``certify``: certified optimal),
2 invalid input, 3 solver failure or a negative certificate.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from . import bradleyterry as bt
from . import io as fio
from .certify import certify, d_efficiency
from .choicemodel import uniform_design
from .dualsolver import optimal_design
from .exceptions import ChoiceDesignError, ConvergenceError, ExistenceError, RecoveryError

log = logging.getLogger("choicedesign")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3


class InputError(Exception):
    pass


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    return fio.read_json(args.config)


def _tolerances(args):
    return fio.tolerances_from_json(_config(args))


def _certify_tol(args, default=1e-6) -> float:
    if getattr(args, "tol", None) is not None:
        return args.tol
    return float(_config(args).get("certify_tol", default))


def _require_input(args):
    if not args.input:
        raise InputError("--input is required")
    return args.input


def cmd_optimize(args) -> int:
    problem = fio.read_problem(_require_input(args))
    report, status = bench.run_optimize(problem, _tolerances(args), _certify_tol(args), args.timings)
    _emit(fio.dumps(report), args.output)
    return status


def cmd_efficiency(args) -> int:
    problem = fio.read_problem(_require_input(args))
    designs = {}
    for path in args.design:
        designs[Path(path).stem] = fio.read_design(path, problem)
    if args.uniform:
        designs["uniform"] = uniform_design(problem)
    opt = optimal_design(problem, _tolerances(args))
    cert = certify(problem, opt.design, _certify_tol(args))
    lines = ["design,efficiency"]
    for name, xi in designs.items():
        e = d_efficiency(problem, xi, opt.design)
        if e == 0.0:
            log.warning("design %s has a disconnected support; efficiency 0", name)
        lines.append(f"{name},{bench.fmt(e)}")
    if not cert.optimal:
        log.warning("reference design failed certification (max violation %.3g)", cert.max_violation)
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK if cert.optimal else EXIT_SOLVER


def cmd_certify(args) -> int:
    problem = fio.read_problem(_require_input(args))
    if not args.design:
        raise InputError("--design is required")
    xi = fio.read_design(args.design[0], problem)
    cert = certify(problem, xi, _certify_tol(args))
    _emit(fio.dumps(cert.to_dict()), args.output)
    return EXIT_OK if cert.optimal else EXIT_SOLVER


def cmd_round(args) -> int:
    data = fio.read_json(_require_input(args))
    problem = fio.read_problem(args.problem) if args.problem else None
    if problem is None and all(key in data for key in ("m", "k")):
        problem_m, problem_k = int(data["m"]), int(data["k"])
    elif problem is not None:
        problem_m, problem_k = problem.m, problem.k
    else:
        raise InputError("design must carry m and k, or pass --problem")
    xi = fio.design_from_json(data, problem)
    rd = bench.round_with_loss(problem, xi, args.n)
    out = {
        "m": problem_m, "k": problem_k, "N": rd.N,
        "counts": rd.counts, "weights": rd.design,
        "efficiency_vs_unrounded": rd.efficiency,
    }
    _emit(fio.dumps(out), args.output)
    return EXIT_OK


def cmd_fit(args) -> int:
    counts = bt.read_counts_csv(_require_input(args), args.m)
    fit = bt.fit_mle(counts)
    out = {
        "m": counts.m,
        "pi": fit.pi,
        "log_likelihood": fit.log_likelihood,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "observations": counts.total,
    }
    _emit(fio.dumps(out), args.output)
    return EXIT_OK if fit.converged else EXIT_SOLVER


def _sim_config(args) -> bench.SimulationConfig:
    cfg = dict(_config(args).get("simulation", {}))
    for key in ("m", "k", "sigma", "replicates", "seed", "workers", "beta_sd"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return bench.SimulationConfig.from_dict(cfg)


def cmd_simulate(args) -> int:
    config = _sim_config(args)
    rows = bench.simulate(config, _tolerances(args))
    _emit(bench.simulation_csv(config, rows, args.timings), args.output)
    return EXIT_OK


def cmd_effline(args) -> int:
    rows = bench.effline(args.points, _tolerances(args))
    _emit(bench.effline_csv(rows), args.output)
    return EXIT_OK


def cmd_performance(args) -> int:
    rows = bench.performance(ms=args.m or (8, 10), ks=args.k or (3, 4, 5, 6),
                             instances=args.instances, seed=args.seed, tol=_tolerances(args))
    _emit(bench.performance_csv(rows), args.output)
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="choicedesign", description="Locally D-optimal choice designs.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, input_help=None):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--input", help=input_help)
        sp.add_argument("--output", help="output file (default: stdout)")
        sp.add_argument("--config", help="JSON config (tolerances, certify_tol, simulation)")
        sp.set_defaults(func=func)
        return sp

    sp = add("optimize", cmd_optimize, "compute and certify a D-optimal design", "problem JSON")
    sp.add_argument("--tol", type=float, help="certificate tolerance")
    sp.add_argument("--timings", action="store_true", help="include stage timings in the report")

    sp = add("efficiency", cmd_efficiency, "D-efficiencies against the optimum", "problem JSON")
    sp.add_argument("--design", action="append", default=[], help="design JSON (repeatable)")
    sp.add_argument("--uniform", action="store_true", help="also report the uniform design")
    sp.add_argument("--tol", type=float, help="certificate tolerance for the optimum")

    sp = add("certify", cmd_certify, "check optimality of a design", "problem JSON")
    sp.add_argument("--design", action="append", default=[], help="design JSON")
    sp.add_argument("--tol", type=float, help="certificate tolerance")

    sp = add("round", cmd_round, "round a design to N runs", "design JSON")
    sp.add_argument("--n", type=int, required=True, help="number of runs N")
    sp.add_argument("--problem", help="problem JSON, to report the efficiency loss")

    sp = add("fit", cmd_fit, "maximum likelihood pi from choice counts", "counts CSV")
    sp.add_argument("--m", type=int, help="number of alternatives (default: largest label)")

    sp = add("simulate", cmd_simulate, "uniform-design efficiency under random pi")
    sp.add_argument("--m", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--beta-sd", dest="beta_sd", choices=("sigma", "sigma_squared"))
    sp.add_argument("--timings", action="store_true", help="add a per-replicate time column")

    sp = add("effline", cmd_effline, "efficiencies along the six-alternative line")
    sp.add_argument("--points", type=int, default=100)

    sp = add("performance", cmd_performance, "time both solver steps on random instances")
    sp.add_argument("--m", type=int, action="append")
    sp.add_argument("--k", type=int, action="append")
    sp.add_argument("--instances", type=int, default=10)
    sp.add_argument("--seed", type=int, default=2024)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConvergenceError, RecoveryError) as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    except ExistenceError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (InputError, ChoiceDesignError, ValueError, KeyError, OSError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
