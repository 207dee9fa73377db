"""Nested-subset regression grids driven by prior variable orderings."""

from .data_model import (
    Dataset,
    Ordering,
    StandardizationInfo,
    SubsetSchedule,
    build_lag_matrix,
    make_subset_schedule,
    ordering_from_lags,
    ordering_from_missingness,
    ordering_from_variance,
    sample_weighted_ordering,
    standardize,
)
from .lasso_engine import (
    LambdaGrid,
    SparseCoef,
    SqrtLassoConfig,
    cd_lasso,
    cov_cd_lasso,
    default_lambda_sq,
    lambda_grid,
    soft_threshold,
    sqrt_lasso_stop,
)
from .missing_data import (
    CovSurrogate,
    estimate_surrogate,
    psd_correct,
    smallest_eigenvalue,
    surrogate_cv_score,
)
from .model_io import FittedModel
from .order_path import (
    CoefficientGrid,
    active_set,
    fit_order_path,
    fit_order_path_cov,
    grid_predict,
)
from .ridge_path import (
    KernelState,
    ridge_all_subsets_predict,
    ridge_fit,
    ridge_svd_path,
    smw_rank_one,
)
from .selection import (
    CVPlan,
    SelectionResult,
    Theorem1Report,
    chrono_select,
    kfold_cv_select,
    make_chrono_plan,
    make_kfold_plan,
    oracle_select,
    ridge_kfold_select,
    test_split_select,
    theorem1_bound,
)
from .simgen import SimConfig, corrupt_design, gen_beta, gen_design, mask_missing, pve, rho_signal

__version__ = "0.1.0"
