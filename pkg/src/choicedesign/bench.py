"""Run reports, exact rounding and the reproduction harnesses.

* :func:`run_optimize` produces the JSON report written by ``optimize``.
* :func:`round_design` turns an approximate design into counts for ``N`` runs.
* :func:`simulate` is the random-``pi`` study of uniform-design efficiency.
* :func:`effline` evaluates three designs along a one-parameter family of ``pi``.
* :func:`performance` times both solver steps on random instances.

Random numbers come from numpy's PCG64 with one ``SeedSequence`` child stream per
replicate, so results do not depend on how replicates are scheduled.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .certify import certify, d_efficiency
from .choicemodel import ChoiceProblem, log_det_reduced, uniform_design
from .dualsolver import (
    SolverTolerances,
    duality_gap,
    recover_design,
    solve_dual,
)
from .exceptions import ConvergenceError, RecoveryError

log = logging.getLogger(__name__)

RNG_NAME = "numpy PCG64, one SeedSequence(seed).spawn child per replicate"


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# optimize


def run_optimize(problem: ChoiceProblem, tol: SolverTolerances | None = None,
                 certify_tol: float = 1e-6, timings: bool = False) -> tuple[dict, int]:
    """Solve, recover, certify; return the report and a status.

    Status is 0 for a certified optimum and 3 when a stage failed or the
    certificate is negative. A report is produced in every case; on failure it
    holds the best iterate. Timings are left out unless requested so that
    reports are byte-reproducible.
    """
    from .io import design_to_json

    tol = tol or SolverTolerances()
    report = {"problem": problem.to_dict(), "tolerances": tol.to_dict(), "certify_tol": certify_tol}
    status = 0
    try:
        sol = solve_dual(problem, tol)
    except ConvergenceError as exc:
        sol = exc.best
        status = 3
        report["error"] = str(exc)
    report["dual"] = {
        "converged": sol.converged,
        "iterations": sol.iterations,
        "objective": sol.objective,
        "kkt_residual": sol.kkt_residual,
        "max_violation": sol.max_violation,
        "gamma": sol.gamma,
    }
    try:
        rec = recover_design(problem, sol, tol)
    except RecoveryError as exc:
        rec = exc.design
        status = 3
        report["error"] = str(exc)
    cert = certify(problem, rec.design, certify_tol)
    if not cert.optimal:
        status = 3
    report["design"] = design_to_json(problem, rec.design)
    report["recovery"] = {
        "residual": rec.residual,
        "scaled_residual": rec.scaled_residual,
        "support_size": int(len(rec.support)),
        "ridge": rec.ridge,
        "selection": rec.selection,
    }
    report["certificate"] = cert.to_dict()
    report["duality_gap"] = duality_gap(problem, rec.design)
    report["status"] = "optimal" if status == 0 else "not certified"
    if timings:
        report["timings"] = {"step1_seconds": sol.seconds, "step2_seconds": rec.seconds}
    return report, status


# ---------------------------------------------------------------------------
# rounding


def round_design(xi, N: int) -> np.ndarray:
    """Largest-remainder apportionment of ``N`` runs to the weights ``xi``.

    Every set first gets ``floor(N xi_j)`` runs; the remaining runs go to the
    largest fractional parts, ties broken towards the lower index.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0) or xi.sum() <= 0:
        raise ValueError("weights must be nonnegative with positive sum")
    share = N * xi / xi.sum()
    counts = np.floor(share).astype(np.int64)
    left = N - int(counts.sum())
    if left > 0:
        order = np.lexsort((np.arange(len(xi)), -(share - counts)))
        counts[order[:left]] += 1
    return counts


@dataclass
class RoundedDesign:
    counts: np.ndarray
    N: int
    design: np.ndarray
    efficiency: float | None  # relative to the unrounded design


def round_with_loss(problem: ChoiceProblem | None, xi, N: int) -> RoundedDesign:
    counts = round_design(xi, N)
    exact = counts / counts.sum()
    eff = None
    if problem is not None:
        ld0 = log_det_reduced(problem, xi)
        ld1 = log_det_reduced(problem, exact)
        eff = float(np.exp((ld1 - ld0) / (problem.m - 1))) if np.isfinite(ld1) else 0.0
    return RoundedDesign(counts, int(N), exact, eff)


# ---------------------------------------------------------------------------
# simulation study


@dataclass(frozen=True)
class SimulationConfig:
    m: int = 6
    k: int = 3
    sigma: float = 1.0
    replicates: int = 200
    seed: int = 12345
    workers: int = 1
    beta_sd: str = "sigma"  # or "sigma_squared"

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.beta_sd not in ("sigma", "sigma_squared"):
            raise ValueError(f"unknown beta_sd {self.beta_sd!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def sd(self) -> float:
        return self.sigma if self.beta_sd == "sigma" else self.sigma ** 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown simulation fields: {sorted(unknown)}")
        return cls(**d)


SIM_COLUMNS = ("replicate", "max_dir_der", "duality_gap", "eff_uniform", "support_size", "status")


def replicate_pi(config: SimulationConfig, index: int) -> np.ndarray:
    """``pi = exp(beta)`` with ``beta`` i.i.d. centred normal, for one replicate."""
    child = np.random.SeedSequence(config.seed).spawn(index + 1)[index]
    rng = np.random.Generator(np.random.PCG64(child))
    return np.exp(rng.normal(0.0, config.sd, config.m))


def _replicate(args):
    config, tol, index = args
    pi = replicate_pi(config, index)
    problem = ChoiceProblem(config.m, config.k, pi)
    row = {"replicate": index, "status": "ok"}
    t0 = time.perf_counter()
    try:
        sol = solve_dual(problem, tol)
        rec = recover_design(problem, sol, tol)
        xi = rec.design
        cert = certify(problem, xi)
        row.update(
            max_dir_der=float(cert.directional_derivatives.max()),
            duality_gap=duality_gap(problem, xi),
            eff_uniform=d_efficiency(problem, uniform_design(problem), xi),
            support_size=int(len(rec.support)),
        )
    except (ConvergenceError, RecoveryError) as exc:
        row.update(max_dir_der=np.nan, duality_gap=np.nan, eff_uniform=np.nan,
                   support_size=-1, status=type(exc).__name__)
    row["seconds"] = time.perf_counter() - t0
    return row


def simulate(config: SimulationConfig, tol: SolverTolerances | None = None) -> list[dict]:
    """Run all replicates; rows come back in replicate order. Failures are recorded, not raised."""
    tol = tol or SolverTolerances()
    jobs = [(config, tol, i) for i in range(config.replicates)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            rows = list(ex.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        rows = [_replicate(j) for j in jobs]
    return rows


@dataclass
class SimulationSummary:
    n_ok: int
    n_failed: int
    mean_eff_uniform: float
    se_eff_uniform: float
    mean_support: float
    se_support: float
    max_dir_der: float
    max_abs_gap: float


def summarize(rows: list[dict]) -> SimulationSummary:
    ok = [r for r in rows if r["status"] == "ok"]
    n = len(ok)
    eff = np.array([r["eff_uniform"] for r in ok])
    sup = np.array([r["support_size"] for r in ok], dtype=float)

    def mse(x):
        if len(x) == 0:
            return np.nan, np.nan
        return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0

    me, se = mse(eff)
    ms, ss = mse(sup)
    return SimulationSummary(
        n, len(rows) - n, me, se, ms, ss,
        float(max((r["max_dir_der"] for r in ok), default=np.nan)),
        float(max((abs(r["duality_gap"]) for r in ok), default=np.nan)),
    )


def simulation_csv(config: SimulationConfig, rows: list[dict], timings: bool = False) -> str:
    """Per-replicate rows plus a ``mean`` row; header comments name the generator."""
    buf = io.StringIO()
    buf.write(f"# rng: {RNG_NAME}\n")
    buf.write(f"# config: m={config.m} k={config.k} sigma={fmt(config.sigma)} "
              f"replicates={config.replicates} seed={config.seed} beta_sd={config.beta_sd}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = list(SIM_COLUMNS) + (["seconds"] if timings else [])
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if c == "status" else fmt(r[c]) for c in cols])
    s = summarize(rows)
    mean = ["mean", fmt(s.max_dir_der), fmt(s.max_abs_gap), fmt(s.mean_eff_uniform),
            fmt(s.mean_support), f"{s.n_ok}/{s.n_ok + s.n_failed} ok"]
    if timings:
        mean.append(fmt(np.mean([r["seconds"] for r in rows])))
    w.writerow(mean)
    w.writerow(["se", "", "", fmt(s.se_eff_uniform), fmt(s.se_support), ""] + ([""] if timings else []))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# efficiency line

XI1 = np.array([0, 1, 0, 1, 0, 1, 1, 1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 0, 1], dtype=float) / 10
XI2 = np.full(20, 0.1) - XI1
EFFLINE_EXPONENTS = np.array([1.0, 0.5, 1.25, 1.75, 0.75, 0.0])


def effline_pi(ell: float) -> np.ndarray:
    """``(pi1, pi1^(1/2), pi1^(5/4), pi1^(7/4), pi1^(3/4), 1)`` with ``pi1 = exp(ell/10)``."""
    return np.exp(EFFLINE_EXPONENTS * ell / 10.0)


def effline(n_points: int = 100, tol: SolverTolerances | None = None) -> list[tuple]:
    """Efficiencies of the uniform design and the two balanced designs along the line."""
    rows = []
    for ell in range(n_points):
        problem = ChoiceProblem(6, 3, effline_pi(ell))
        sol = solve_dual(problem, tol)
        xi_star = recover_design(problem, sol, tol).design
        rows.append((ell,
                     d_efficiency(problem, uniform_design(problem), xi_star),
                     d_efficiency(problem, XI1, xi_star),
                     d_efficiency(problem, XI2, xi_star)))
    return rows


def effline_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ell", "eff_uniform", "eff_xi1", "eff_xi2"])
    for ell, a, b, c in rows:
        w.writerow([ell, fmt(a), fmt(b), fmt(c)])
    return buf.getvalue()


def effline_endpoint(ell: float = 100, tol: SolverTolerances | None = None):
    """Optimal design at the end of the line (the returned object is an ``OptimalDesign``)."""
    from .dualsolver import optimal_design

    return optimal_design(ChoiceProblem(6, 3, effline_pi(ell)), tol)


# ---------------------------------------------------------------------------
# solver performance


PERF_COLUMNS = ("m", "k", "instance", "step1_seconds", "step2_seconds", "iterations",
                "max_dir_der", "duality_gap", "status")


def performance(ms=(8, 10), ks=(3, 4, 5, 6), instances: int = 10, seed: int = 2024,
                low: float = 1.0, high: float = 20.0,
                tol: SolverTolerances | None = None) -> list[dict]:
    """Time both steps on ``pi ~ Uniform[low, high]^m`` for each ``(m, k)`` cell."""
    rows = []
    root = np.random.SeedSequence(seed)
    cells = [(m, k) for m in ms for k in ks]
    for (m, k), ss in zip(cells, root.spawn(len(cells))):
        rng = np.random.Generator(np.random.PCG64(ss))
        for i in range(instances):
            problem = ChoiceProblem(m, k, rng.uniform(low, high, m))
            row = {"m": m, "k": k, "instance": i, "status": "ok"}
            try:
                sol = solve_dual(problem, tol)
                rec = recover_design(problem, sol, tol)
                cert = certify(problem, rec.design)
                row.update(step1_seconds=sol.seconds, step2_seconds=rec.seconds,
                           iterations=sol.iterations,
                           max_dir_der=float(cert.directional_derivatives.max()),
                           duality_gap=duality_gap(problem, rec.design))
            except (ConvergenceError, RecoveryError) as exc:
                row.update(step1_seconds=np.nan, step2_seconds=np.nan, iterations=-1,
                           max_dir_der=np.nan, duality_gap=np.nan, status=type(exc).__name__)
            rows.append(row)
    return rows


def performance_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PERF_COLUMNS)
    for r in rows:
        w.writerow([r[c] if c == "status" else fmt(r[c]) for c in PERF_COLUMNS])
    return buf.getvalue()
