"""JSON file formats.

Problems are ``{"m": int, "k": int, "pi": [...]}``. Designs are
``{"m": int, "k": int, "weights": [...]}`` with one weight per choice set in
lexicographic order of the ``k``-subsets of ``{1, ..., m}``; for ``m = 4, k = 2``
that is 12, 13, 14, 23, 24, 34. A design file may carry a ``"choice_sets"``
list (1-based) purely for readability; it is checked against the canonical order
when present.

Files use 1-based alternative labels throughout, the Python API 0-based ones.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .choicemodel import ChoiceProblem, as_design, enumerate_choice_sets
from .dualsolver import SolverTolerances
from .exceptions import DimensionError


def dumps(obj) -> str:
    """Deterministic JSON: fixed key order, shortest round-trip floats, trailing newline."""
    return json.dumps(_plain(obj), indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def problem_from_json(data) -> ChoiceProblem:
    if not isinstance(data, dict):
        raise ValueError("problem must be a JSON object")
    return ChoiceProblem.from_dict(data)


def read_problem(path) -> ChoiceProblem:
    return problem_from_json(read_json(path))


def design_to_json(problem: ChoiceProblem, xi, **extra) -> dict:
    out = {
        "m": problem.m,
        "k": problem.k,
        "weights": [float(x) for x in xi],
        "choice_sets": [[x + 1 for x in c] for c in problem.choice_sets],
    }
    out.update(extra)
    return out


def design_from_json(data, problem: ChoiceProblem | None = None, atol: float = 1e-8) -> np.ndarray:
    """Parse a design object, checking it against ``problem`` when given.

    Weights are renormalized when their sum is within ``atol`` of 1 (files
    written with limited precision); anything further off is rejected.
    """
    if isinstance(data, list):
        data = {"weights": data}
    if "weights" not in data:
        raise DimensionError("design is missing field 'weights'")
    w = np.asarray(data["weights"], dtype=float)
    if problem is not None:
        for key in ("m", "k"):
            if key in data and int(data[key]) != getattr(problem, key):
                raise DimensionError(f"design has {key}={data[key]}, problem has {getattr(problem, key)}")
        m, k = problem.m, problem.k
    else:
        m, k = int(data["m"]), int(data["k"])
    if "choice_sets" in data:
        given = [tuple(int(x) - 1 for x in c) for c in data["choice_sets"]]
        if given != list(enumerate_choice_sets(m, k)):
            raise DimensionError("choice_sets are not in lexicographic order")
    if w.sum() > 0 and abs(w.sum() - 1.0) <= atol:
        w = w / w.sum()
    probe = problem if problem is not None else ChoiceProblem(m, k, np.ones(m))
    return as_design(probe, w)


def read_design(path, problem: ChoiceProblem | None = None) -> np.ndarray:
    return design_from_json(read_json(path), problem)


def tolerances_from_json(data: dict | None) -> SolverTolerances:
    """Read tolerances from a config object (either flat or under ``"tolerances"``)."""
    if not data:
        return SolverTolerances()
    if set(data) & set(CONFIG_SECTIONS):
        data = data.get("tolerances", {})
    return SolverTolerances.from_dict(data)


CONFIG_SECTIONS = ("tolerances", "certify_tol", "simulation")


CONFIG_SCHEMA = {
    "tolerances": {
        "kkt": "stationarity and complementarity tolerance of the dual solver (1e-8)",
        "feas": "allowed violation of the dual constraints (1e-9)",
        "recover": "maximum scaled residual of design recovery (1e-6)",
        "max_iter_dual": "iteration cap of the dual solver (500)",
        "max_iter_recover": "iteration cap of the nonnegative least squares (1000)",
        "support_eps": "weights below this are set to zero (1e-8)",
        "ridge": "ridge weight used to select among equivalent designs (1e-10)",
        "active": "slack below which a dual constraint counts as active (1e-6)",
        "hessian": "'exact' or 'bfgs' quadratic model in the dual solver",
        "selection": "'ridge' (spread-out design) or 'sparse' (basic solution)",
    },
    "certify_tol": "tolerance of the optimality certificate (1e-6)",
    "simulation": {
        "m": "number of alternatives (6)",
        "k": "choice-set size (3)",
        "sigma": "spread of the log-attractiveness, see beta_sd",
        "replicates": "number of replicates",
        "seed": "64-bit seed of the PCG64 generator",
        "workers": "parallel processes (1)",
        "beta_sd": "'sigma' (beta ~ N(0, sigma^2)) or 'sigma_squared' (beta ~ N(0, sigma^4))",
    },
}
