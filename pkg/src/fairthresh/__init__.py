"""Group-wise threshold calibration for fairness-constrained classification."""

from .core import (
    Dataset,
    EvalReport,
    FairnessConstraint,
    GroupStats,
    ThresholdRule,
    group_stats,
)
from .metrics import (
    GroupedScores,
    ThresholdCurve,
    ddp_hat,
    deo_hat,
    doa_hat,
    dpe_hat,
    evaluate,
    positive_rate,
)
from .solve import (
    MulticlassSolveResult,
    SolveResult,
    SolverError,
    solve,
    solve_cost_sensitive,
    solve_dp,
    solve_eo,
    solve_multiclass_dp,
    solve_oa,
    solve_pe,
    sup_solve,
)
from .gaussian import (
    GaussianPopulation,
    MulticlassOracle,
    ScoreLaw,
    d_star,
    e_star,
    eta,
    fair_accuracy,
    load_population,
    o_star,
    oracle_multiclass_dp,
    oracle_rule,
    p_star,
    save_population,
    t_star,
    tail_rate,
    tau_star,
)
from .scores import (
    LogisticModel,
    TrainConfig,
    fit_logistic,
    load_model,
    predict_proba,
    save_model,
    score_dataset,
)
from .synth import SynthSpec, draw_population, sample

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EvalReport",
    "FairnessConstraint",
    "GroupStats",
    "ThresholdRule",
    "group_stats",
    "GroupedScores",
    "ThresholdCurve",
    "ddp_hat",
    "deo_hat",
    "doa_hat",
    "dpe_hat",
    "evaluate",
    "positive_rate",
    "MulticlassSolveResult",
    "SolveResult",
    "SolverError",
    "solve",
    "solve_cost_sensitive",
    "solve_dp",
    "solve_eo",
    "solve_multiclass_dp",
    "solve_oa",
    "solve_pe",
    "sup_solve",
    "GaussianPopulation",
    "MulticlassOracle",
    "ScoreLaw",
    "d_star",
    "e_star",
    "eta",
    "fair_accuracy",
    "load_population",
    "o_star",
    "oracle_multiclass_dp",
    "oracle_rule",
    "p_star",
    "save_population",
    "t_star",
    "tail_rate",
    "tau_star",
    "LogisticModel",
    "TrainConfig",
    "fit_logistic",
    "load_model",
    "predict_proba",
    "save_model",
    "score_dataset",
    "SynthSpec",
    "draw_population",
    "sample",
    "__version__",
]
