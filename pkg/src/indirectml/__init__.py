"""Learning classifiers from weak supervision through a known conditional.

The observed signal depends on the unobserved true label only through a
column-stochastic conditional-probability matrix.  The package builds
those matrices for the common supervision types, trains softmax
classifiers by maximum likelihood on the induced observation
distribution, quantifies how much information each supervision type
carries via information matrices and asymptotic variances, and ships a
config-driven CLI that reruns the reference experiments.
"""

from .errors import IndirectMLError
from .fisher import (
    FisherReport,
    IdentifiabilityVerdict,
    asymptotic_variance,
    check_identifiability,
    fisher_bruteforce,
    fisher_direct,
    fisher_indirect,
    fisher_report,
    score_direct,
    score_indirect,
    verify_loewner,
)
from .model import Architecture, ClassifierParams, backward, forward_logits, init, predict_proba
from .objective import LossAndGrad, WeakDataset, combined_nll, indirect_nll, pooled_objective
from .optimizer import OptimizerConfig, TrainResult, schedule_lr, step, train
from .transition import (
    SimplexVector,
    TransitionMatrix,
    apply,
    class_conditional_noise,
    coarse_partition,
    identity,
    llp_from_proportions,
    pu_censoring,
    uniform_complementary,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "ClassifierParams",
    "FisherReport",
    "IdentifiabilityVerdict",
    "IndirectMLError",
    "LossAndGrad",
    "OptimizerConfig",
    "SimplexVector",
    "TrainResult",
    "TransitionMatrix",
    "WeakDataset",
    "apply",
    "asymptotic_variance",
    "backward",
    "check_identifiability",
    "class_conditional_noise",
    "coarse_partition",
    "combined_nll",
    "fisher_bruteforce",
    "fisher_direct",
    "fisher_indirect",
    "fisher_report",
    "forward_logits",
    "identity",
    "indirect_nll",
    "init",
    "llp_from_proportions",
    "pooled_objective",
    "predict_proba",
    "pu_censoring",
    "schedule_lr",
    "score_direct",
    "score_indirect",
    "step",
    "train",
    "uniform_complementary",
    "validate",
    "verify_loewner",
]
