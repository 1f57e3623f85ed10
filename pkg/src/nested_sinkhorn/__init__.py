"""Exact and entropy-regularized transport distances between discrete
measures and between scenario trees (nested, filtration-aware)."""

from .nested import (
    DEFAULT_LAMBDA_GRID,
    ConditionalSolution,
    EquivalenceReport,
    MartingaleReport,
    NestedBoundReport,
    NestedResult,
    SweepRow,
    conditional_marginal_residuals,
    flat_nested_lp,
    lambda_sweep,
    martingale_check,
    nested_bound_report,
    nested_exact,
    nested_sinkhorn,
    verify_entropic_equivalence,
)
from .scenario_tree import (
    Node,
    ScenarioTree,
    Trajectory,
    TreeFormatError,
    cost_matrix,
    generate_random_tree,
    ground_cost,
    parse_tree,
    serialize_tree,
    trajectories,
)
from .sinkhorn import (
    BoundReport,
    CheckResult,
    DualCertificate,
    KernelUnderflowError,
    SinkhornResult,
    bound_certificates,
    dual_from_scalings,
    entropy,
    gibbs_kernel,
    sinkhorn,
    sinkhorn_auto,
    sinkhorn_stabilized,
)
from .transport import LpSolution, TransportPlan, solve_transport_lp, wasserstein_distance

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "CheckResult",
    "ConditionalSolution",
    "DEFAULT_LAMBDA_GRID",
    "DualCertificate",
    "EquivalenceReport",
    "KernelUnderflowError",
    "LpSolution",
    "MartingaleReport",
    "NestedBoundReport",
    "NestedResult",
    "Node",
    "ScenarioTree",
    "SinkhornResult",
    "SweepRow",
    "Trajectory",
    "TransportPlan",
    "TreeFormatError",
    "bound_certificates",
    "conditional_marginal_residuals",
    "cost_matrix",
    "dual_from_scalings",
    "entropy",
    "flat_nested_lp",
    "generate_random_tree",
    "gibbs_kernel",
    "ground_cost",
    "lambda_sweep",
    "martingale_check",
    "nested_bound_report",
    "nested_exact",
    "nested_sinkhorn",
    "parse_tree",
    "serialize_tree",
    "sinkhorn",
    "sinkhorn_auto",
    "sinkhorn_stabilized",
    "solve_transport_lp",
    "trajectories",
    "verify_entropic_equivalence",
    "wasserstein_distance",
]
