"""Factor-augmented variable selection for scalar-on-function regression."""

from .competitors import GroupStructure, fit_group_mcp, fit_mcp_scores
from .exceptions import *  # noqa: F401,F403
from .factors import (
    FactorDecomposition,
    FactorSelectionConfig,
    ScoreMatrix,
    assemble_scores,
    estimate_factors,
    select_num_factors,
    select_num_factors_ic,
    select_num_factors_ratio,
)
from .fda import (
    EigenSystem,
    FunctionalSample,
    Grid,
    SmootherConfig,
    compute_scores,
    fpca,
    local_linear_smooth,
    smooth_longitudinal,
)
from .metrics import RunRecord, imse, out_of_sample_r2, selection_frequency, tpr
from .model import FfasmConfig, FfasmFit, fit_ffasm, functional_scores, predict, reconstruct_beta
from .penalized import (
    DesignMatrix,
    GlmFamily,
    PenaltySpec,
    cross_validate,
    fit_penalized,
    lambda_path,
    project_out,
    prox,
)
from .simulate import ScenarioConfig, gen_response, gen_scenario1, gen_scenario2, generate, true_betas

__version__ = "0.1.0"
