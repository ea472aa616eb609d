"""Geometric verification and decay certification for kinetic equations.

The modules compose a pipeline: expression-backed model fields
(expressions, fields, models), pointwise geometry (geometry), scanned
curvature and dominance assumptions (assumptions), the explicit entropy
decay certificate (certificate), a conservative phase-space solver
validating the certified rate (solver), and a command-line front end
(cli).
"""

from .assumptions import (
    AssumptionReport,
    check_model,
    curvature_bounds,
    default_grid,
    dominance_constants,
    form_A,
    form_B,
    form_C,
    form_R,
    growth_check,
    hormander_check,
    logsob_product,
    logsob_warped,
    report_kv,
    report_text,
)
from .certificate import (
    Certificate,
    EpsilonChoice,
    assemble_lambda,
    build_certificate,
    certificate_kv,
    choose_abck,
    epsilon_defaults,
    lemma_bounds_rhs,
    proposition_coefficients,
    read_certificate_kv,
    validate_certificate,
)
from .errors import (
    CFLViolation,
    DegenerateA,
    ExprDomainError,
    ExprSyntaxError,
    FDOrderError,
    HypocertError,
    InfeasibleRegion,
    InsufficientData,
    InvalidCertificate,
    LinearSolveFailure,
    MetricError,
    ModelFileError,
    NonpositiveValues,
    NonpositiveWeight,
    NotIsotropic,
    UnknownIdentifier,
)
from .expressions import diff_expr, evaluate, parse_expr, to_string
from .geometry import (
    bakry_emery_ricci,
    covariant_hessian,
    divergence_tensor2,
    divergence_vec,
    gradient_p,
    laplace_beltrami,
    metric_jet,
    ricci,
)
from .models import (
    ModelSpec,
    builtin_classical,
    builtin_relativistic,
    drift_W,
    load_model_file,
    weight_u,
)
from .solver import (
    FunctionalSeries,
    PhaseGrid,
    State,
    build_grid,
    cfl_limit,
    diffusion_matrix,
    entropy_production_diagnostics,
    fit_rate,
    functionals,
    initial_state,
    run,
    series_from_csv,
    series_to_csv,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "CFLViolation",
    "Certificate",
    "DegenerateA",
    "EpsilonChoice",
    "ExprDomainError",
    "ExprSyntaxError",
    "FDOrderError",
    "FunctionalSeries",
    "HypocertError",
    "InfeasibleRegion",
    "InsufficientData",
    "InvalidCertificate",
    "LinearSolveFailure",
    "MetricError",
    "ModelFileError",
    "ModelSpec",
    "NonpositiveValues",
    "NonpositiveWeight",
    "NotIsotropic",
    "PhaseGrid",
    "State",
    "UnknownIdentifier",
    "assemble_lambda",
    "bakry_emery_ricci",
    "build_certificate",
    "build_grid",
    "builtin_classical",
    "builtin_relativistic",
    "certificate_kv",
    "cfl_limit",
    "check_model",
    "choose_abck",
    "covariant_hessian",
    "curvature_bounds",
    "default_grid",
    "diff_expr",
    "diffusion_matrix",
    "divergence_tensor2",
    "divergence_vec",
    "dominance_constants",
    "drift_W",
    "entropy_production_diagnostics",
    "epsilon_defaults",
    "evaluate",
    "fit_rate",
    "form_A",
    "form_B",
    "form_C",
    "form_R",
    "functionals",
    "gradient_p",
    "growth_check",
    "hormander_check",
    "initial_state",
    "laplace_beltrami",
    "lemma_bounds_rhs",
    "load_model_file",
    "logsob_product",
    "logsob_warped",
    "metric_jet",
    "parse_expr",
    "proposition_coefficients",
    "read_certificate_kv",
    "report_kv",
    "report_text",
    "ricci",
    "run",
    "series_from_csv",
    "series_to_csv",
    "step",
    "to_string",
    "validate_certificate",
    "weight_u",
]
