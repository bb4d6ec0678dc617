"""Gaussian-optimal constants and numerical checks for the unified entropy power / Brascamp-Lieb inequality."""

__version__ = "0.1.0"

from .datum import BLDatum, ValidationReport, builtin_datum, validate_datum
from .entropy import EntropyEstimate, gaussian_entropy, knn_entropy, plugin_entropy
from .matkernels import QRSplit, logdet_pd, pd_sqrt, qr_pos_diag
from .objective import BlockPDMatrix, BlockSymMatrix, gradient, objective, scale_invariance_defect
from .solver import MgResult, SolverOptions, Status, certify_lower_bound, solve_mg, stationarity_residual
from .transport import (
    LinearPD,
    Monotone1D,
    ProductMap,
    StdNormalSampler,
    gaussian_brenier,
    jacobian,
    monotone_1d_map,
    product_map,
)
from .verifier import LemmaReport, TheoremReport, lemma1_check, proof_chain_audit, theorem_check_sampled, theorem_gap_gaussian

__all__ = [
    "BLDatum", "ValidationReport", "builtin_datum", "validate_datum",
    "EntropyEstimate", "gaussian_entropy", "knn_entropy", "plugin_entropy",
    "QRSplit", "logdet_pd", "pd_sqrt", "qr_pos_diag",
    "BlockPDMatrix", "BlockSymMatrix", "gradient", "objective", "scale_invariance_defect",
    "MgResult", "SolverOptions", "Status", "certify_lower_bound", "solve_mg", "stationarity_residual",
    "LinearPD", "Monotone1D", "ProductMap", "StdNormalSampler", "gaussian_brenier", "jacobian",
    "monotone_1d_map", "product_map",
    "LemmaReport", "TheoremReport", "lemma1_check", "proof_chain_audit", "theorem_check_sampled", "theorem_gap_gaussian",
]
