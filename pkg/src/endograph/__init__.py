"""Total treatment effect estimation when the interference graph responds to treatment.

The main entry points are :class:`EndogenousGraph` (edge potential
outcomes), :func:`mu_hat` / :class:`AnchorTTEEstimator` (the unbiased
anchor-instrument estimator), the tests in :mod:`endograph.inference`, and
the Monte Carlo harness in :mod:`endograph.montecarlo`.
"""

from ._validation import AssumptionError, CapExceededError, DimensionError, EndographError, SchemaError
from .canonical import Instance
from .design import BernoulliDesign, draw, enumerate_assignments, exact_covariance, exact_expectation, substreams
from .estimators import (
    AnchorTTEEstimator,
    BatchEvaluator,
    EstimateResult,
    EstimatorConfig,
    HorvitzThompsonTTE,
    beta_hat,
    check_identification,
    gamma_hat,
    horvitz_thompson,
    mu_hat,
    mu_hat_uni,
    mu_tilde,
    w_hat,
)
from .graph import (
    AnchorSubgraph,
    DependencyReport,
    EndogenousGraph,
    PairRule,
    RealizedGraph,
    UnitSets,
    VerificationReport,
    classify_dependency,
    realize_graph,
    verify_anchor,
)
from .inference import TestResult, exogeneity_test, net_edges, r_driven_ttest, sharp_null_test
from .io import RunReport, load_graph, load_scenario, save_report, save_scenario
from .montecarlo import (
    BiasReport,
    ReplicationSummary,
    Scenario,
    ScalingReport,
    bias_table,
    normality_diagnostic,
    replicate,
    variance_scaling_study,
)
from .outcomes import OutcomeModel, Weights, exposure, outcome, potential_outcomes, true_tte

__version__ = "0.1.0"

__all__ = [
    "AnchorSubgraph",
    "AnchorTTEEstimator",
    "AssumptionError",
    "BatchEvaluator",
    "BernoulliDesign",
    "BiasReport",
    "CapExceededError",
    "DependencyReport",
    "DimensionError",
    "EndogenousGraph",
    "EndographError",
    "EstimateResult",
    "EstimatorConfig",
    "HorvitzThompsonTTE",
    "Instance",
    "OutcomeModel",
    "PairRule",
    "RealizedGraph",
    "ReplicationSummary",
    "RunReport",
    "ScalingReport",
    "Scenario",
    "SchemaError",
    "TestResult",
    "UnitSets",
    "VerificationReport",
    "Weights",
    "beta_hat",
    "bias_table",
    "check_identification",
    "classify_dependency",
    "draw",
    "enumerate_assignments",
    "exact_covariance",
    "exact_expectation",
    "exogeneity_test",
    "exposure",
    "gamma_hat",
    "horvitz_thompson",
    "load_graph",
    "load_scenario",
    "mu_hat",
    "mu_hat_uni",
    "mu_tilde",
    "net_edges",
    "normality_diagnostic",
    "outcome",
    "potential_outcomes",
    "r_driven_ttest",
    "realize_graph",
    "replicate",
    "save_report",
    "save_scenario",
    "sharp_null_test",
    "substreams",
    "true_tte",
    "variance_scaling_study",
    "verify_anchor",
    "w_hat",
]
