"""Bi-directional causal inference with possibly invalid instruments.

The forward effect of each ordering comes from plurality voting over
per-instrument ratios followed by TSLS; the reverse effect comes from
covariance heterogeneity in the residuals. :func:`infer` combines the two
orderings into a direction call and confidence intervals.
"""

from .core_stats import Dataset, SingularDesignError, projection_operator
from .dgp import SimConfig, generate
from .harness import ExperimentReport, run_experiment
from .inference import Branch, InferenceResult, SignPrior, infer
from .oracle import INF, PopulationSpec, oracle_pch
from .pipeline import PCHOutput, pch

__all__ = [
    "Branch",
    "Dataset",
    "ExperimentReport",
    "INF",
    "InferenceResult",
    "PCHOutput",
    "PopulationSpec",
    "SignPrior",
    "SimConfig",
    "SingularDesignError",
    "generate",
    "infer",
    "oracle_pch",
    "pch",
    "projection_operator",
    "run_experiment",
]
