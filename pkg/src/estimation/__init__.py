"""
Estimation layer: multinomial weight models, stabilized weights, weighted
Cox regression, RMST contrasts and the stratified weighted bootstrap.
"""

from .base import (
    Collinear,
    ColumnMismatch,
    DegenerateGroups,
    DegenerateInput,
    DesignMatrix,
    EmptySubCohort,
    MedianUndefined,
    MonotoneLikelihood,
    NoEvents,
    NotConverged,
    NumericalError,
    PositivityFloorViolated,
    RankDeficient,
    Separation,
    TooManyFailedReplicates,
    ZeroDenominator,
    ZeroVariance,
)
from .bootstrap import BootstrapPlan, BootstrapResult, CoxCateEstimator, bootstrap_cate_ci, bootstrap_plan
from .effects import CateResult, cate, cate_grid, percentile_bounds, rmst, rmst_grid
from .glm import MultinomialFit, fit_multinomial, predict_proba
from .iptw import (
    SpecId,
    StabilizedWeights,
    WeightDiagnostics,
    WeightSpec,
    balance_table,
    build_design,
    compare_specs,
    stabilized_weights,
    weight_diagnostics,
)
from .splines import KnotRule, bspline_basis
from .survival import (
    COX_TERMS,
    CoxFit,
    StepSurvival,
    TieMethod,
    fit_weighted_cox,
    kaplan_meier,
    logrank_test,
    nelson_aalen,
    predict_survival,
    reverse_kaplan_meier_median,
)

__all__ = [
    'Collinear',
    'ColumnMismatch',
    'DegenerateGroups',
    'DegenerateInput',
    'DesignMatrix',
    'EmptySubCohort',
    'MedianUndefined',
    'MonotoneLikelihood',
    'NoEvents',
    'NotConverged',
    'NumericalError',
    'PositivityFloorViolated',
    'RankDeficient',
    'Separation',
    'TooManyFailedReplicates',
    'ZeroDenominator',
    'ZeroVariance',
    'BootstrapPlan',
    'BootstrapResult',
    'CoxCateEstimator',
    'bootstrap_cate_ci',
    'bootstrap_plan',
    'CateResult',
    'cate',
    'cate_grid',
    'percentile_bounds',
    'rmst',
    'rmst_grid',
    'MultinomialFit',
    'fit_multinomial',
    'predict_proba',
    'SpecId',
    'StabilizedWeights',
    'WeightDiagnostics',
    'WeightSpec',
    'balance_table',
    'build_design',
    'compare_specs',
    'stabilized_weights',
    'weight_diagnostics',
    'KnotRule',
    'bspline_basis',
    'COX_TERMS',
    'CoxFit',
    'StepSurvival',
    'TieMethod',
    'fit_weighted_cox',
    'kaplan_meier',
    'logrank_test',
    'nelson_aalen',
    'predict_survival',
    'reverse_kaplan_meier_median',
]
