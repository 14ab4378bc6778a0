"""Maximal variance, demonic variance and non-determinism scores for MDPs."""

from .accrew import acc_demonic_variance, acc_max_variance
from .chain import Moments, acc_moments, mix_variance, pair_variance, reach_probs, wr_moments
from .config import AnalysisConfig
from .errors import AssumptionError, BudgetError, DemvarError, ModelError, ParseError
from .model import MemorylessScheduler, Mdp, MixWeight, product, product_scheduler, validate
from .parse import emit_report, format_model, parse_model
from .preprocess import check_finite, collapse, mec_decompose
from .wreach import analyze, chebyshev_bound, demonic_variance, max_variance, nds

__all__ = [
    "AnalysisConfig", "AssumptionError", "BudgetError", "DemvarError", "Mdp",
    "MemorylessScheduler", "MixWeight", "ModelError", "Moments", "ParseError",
    "acc_demonic_variance", "acc_max_variance", "acc_moments", "analyze",
    "chebyshev_bound", "check_finite", "collapse", "demonic_variance", "emit_report",
    "format_model", "max_variance", "mec_decompose", "mix_variance", "nds",
    "pair_variance", "parse_model", "product", "product_scheduler", "reach_probs",
    "validate", "wr_moments",
]
