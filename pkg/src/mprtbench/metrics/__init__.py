from .complexity import histogram_entropy, model_output_entropy
from .runners import (METRIC_IDS, CurveResult, EmprtResult, MprtResult, QualityEstimate,
                      RankRow, curve_auc, emprt_complexity_curve, rank_methods, run_emprt,
                      run_mprt, run_smprt)
from .similarity import SIMILARITY_IDS, compare_maps, mse, pearson, spearman, ssim

__all__ = [
    "histogram_entropy", "model_output_entropy",
    "METRIC_IDS", "CurveResult", "EmprtResult", "MprtResult", "QualityEstimate",
    "RankRow", "curve_auc", "emprt_complexity_curve", "rank_methods", "run_emprt",
    "run_mprt", "run_smprt",
    "SIMILARITY_IDS", "compare_maps", "mse", "pearson", "spearman", "ssim",
]
