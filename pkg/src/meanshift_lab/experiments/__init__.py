from .config import ESTIMATOR_KINDS, ExperimentConfig, Study
from .runner import replicate_seed, resolve_threads, run_replicates
from .studies import (
    CltStudy,
    CollapseStudy,
    ConsistencyStudy,
    Lemma3Study,
    MseGap,
    MseRow,
    MseStudy,
    QqRow,
    QqStudy,
    normal_scores,
    qq_correlation,
    replicate_estimates,
    run_clt_cross_check,
    run_collapse_check,
    run_consistency_study,
    run_lemma3_check,
    run_mse_study,
    run_qq_study,
    run_study,
)

__all__ = [
    "ESTIMATOR_KINDS",
    "CltStudy",
    "CollapseStudy",
    "ConsistencyStudy",
    "ExperimentConfig",
    "Lemma3Study",
    "MseGap",
    "MseRow",
    "MseStudy",
    "QqRow",
    "QqStudy",
    "Study",
    "normal_scores",
    "qq_correlation",
    "replicate_estimates",
    "replicate_seed",
    "resolve_threads",
    "run_clt_cross_check",
    "run_collapse_check",
    "run_consistency_study",
    "run_lemma3_check",
    "run_mse_study",
    "run_qq_study",
    "run_replicates",
    "run_study",
]
