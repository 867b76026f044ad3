"""Acquisition criteria, trajectory proposals and the learning loop."""

from .criteria import Criterion, SafetyBudget, alpha_for_budget, criterion_batch, criterion_value
from .acquisition import AcquisitionConfig, Proposal, propose_random_safe, propose_sal
from .fisher import fisher_matrix, propose_fisher
from .loop import ExperimentAborted, run_experiment

__all__ = [
    "Criterion",
    "SafetyBudget",
    "alpha_for_budget",
    "criterion_value",
    "criterion_batch",
    "AcquisitionConfig",
    "Proposal",
    "propose_sal",
    "propose_random_safe",
    "fisher_matrix",
    "propose_fisher",
    "ExperimentAborted",
    "run_experiment",
]
