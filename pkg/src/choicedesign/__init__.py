"""Locally D-optimal designs for multinomial logit choice experiments.

Designs are found through a dual problem over variograms: maximize the
Cayley-Menger log-determinant under linear constraints, then recover design
weights from the optimal information matrix. Certificates check the KKT
conditions directly.
"""

from .bradleyterry import (
    ChoiceCounts,
    chordality_diagnostic,
    closed_form_design,
    fit_mle,
    gamma_bar,
    lambda_weights,
    saturated_design,
)
from .certify import KKTCertificate, certify, d_efficiency, directional_derivatives
from .choicemodel import (
    ChoiceProblem,
    enumerate_choice_sets,
    incidence_matrix,
    information_matrix,
    log_det_reduced,
    uniform_design,
)
from .dualsolver import (
    DualSolution,
    OptimalDesign,
    RecoveredDesign,
    SolverTolerances,
    duality_gap,
    optimal_design,
    recover_design,
    solve_dual,
)
from .exceptions import (
    ChoiceDesignError,
    ConeError,
    ConvergenceError,
    DimensionError,
    ExistenceError,
    RecoveryError,
    StructureError,
)

__version__ = "0.1.0"

__all__ = [
    "ChoiceCounts",
    "ChoiceDesignError",
    "ChoiceProblem",
    "ConeError",
    "ConvergenceError",
    "DimensionError",
    "DualSolution",
    "ExistenceError",
    "KKTCertificate",
    "OptimalDesign",
    "RecoveredDesign",
    "RecoveryError",
    "SolverTolerances",
    "StructureError",
    "certify",
    "chordality_diagnostic",
    "closed_form_design",
    "d_efficiency",
    "directional_derivatives",
    "duality_gap",
    "enumerate_choice_sets",
    "fit_mle",
    "gamma_bar",
    "incidence_matrix",
    "information_matrix",
    "lambda_weights",
    "log_det_reduced",
    "optimal_design",
    "recover_design",
    "saturated_design",
    "solve_dual",
    "uniform_design",
]
