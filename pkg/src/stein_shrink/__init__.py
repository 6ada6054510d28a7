"""Haff-type orthogonally invariant covariance shrinkage under Stein loss.

Works uniformly whether the population covariance and the sample covariance
``S = X X^T`` are invertible or singular.
"""

from .errors import (
    DegenerateConfigurationError,
    DimensionError,
    ParameterError,
    RankDeficiencyError,
    ReplicationError,
    SteinShrinkError,
    SymmetryError,
)
from .estimators import (
    EstimatorOutput,
    ShrinkageRule,
    default_rule,
    dominance_bound,
    haff_estimate,
    natural_estimate,
    oi_estimate,
    optimal_constant,
    psi_haff,
)
from .linalg import EigenSystem, pinv, posdet_log, sym_eig, truncate_to_rank
from .loss import LossValue, logdet_factorization_check, stein_loss
from .model import CovarianceSpec, Dimensions, build_sigma, factorize, make_stream, sample_cov, sample_data

__version__ = "0.1.0"
