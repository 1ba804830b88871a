"""Adjusted BIC for a binary naive Bayes model with two hidden states.

The marginal likelihood of N samples with statistics Y behaves as
N f_Y - lam ln N + m ln ln N + O(1), where (lam, m) depend on the
singularity type of Y.  The package classifies Y, assembles the score, and
checks the coefficients numerically.
"""

from .asymptotics import LadderFit, LadderPoint, fit_law, ladder_eval, verify_case
from .classify import Label, SingularityClass, classify_stats, is_product, two_link_split
from .errors import DomainError, IntegrationError, SingularityError, VerificationError
from .experiment import make_stats, md_exact_log_evidence, mf_vs_md_experiment, sample_dataset
from .geometry import TransformedPoint, t1_forward, t1_inverse, t2_forward, zero_set_sample
from .integrate import EvidenceEstimate, marginal_likelihood, toy_integral
from .mle import EmConfig, MleResult, em_fit, laplace_log_evidence, loglik_hessian
from .model import ModelParams, ProbTable, joint_from_params, marginals, product_table
from .score import ScoreReport, adjusted_bic, penalty_table, score_gap, score_stats, standard_bic

__all__ = [
    "DomainError", "EmConfig", "EvidenceEstimate", "IntegrationError", "Label", "LadderFit",
    "LadderPoint", "MleResult", "ModelParams", "ProbTable", "ScoreReport", "SingularityClass",
    "SingularityError", "TransformedPoint", "VerificationError", "adjusted_bic", "classify_stats",
    "em_fit", "fit_law", "is_product", "joint_from_params", "ladder_eval", "laplace_log_evidence",
    "loglik_hessian", "make_stats", "marginal_likelihood", "marginals", "md_exact_log_evidence",
    "mf_vs_md_experiment", "penalty_table", "product_table", "sample_dataset", "score_gap",
    "score_stats", "standard_bic", "t1_forward", "t1_inverse", "t2_forward", "toy_integral",
    "two_link_split", "verify_case", "zero_set_sample",
]
