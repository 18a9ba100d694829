from .greedy import VARIANTS, greedy_result, run_greedy
from .hyper import AlternatingResult, fit_trees, hyper_objective, run_alternating, sample_hyperparams
from .smc import (
    ALGORITHMS,
    ParticleSet,
    Particle,
    SamplerConfig,
    SMCResult,
    effective_sample_size,
    run_postpost,
    run_smc,
    smc_step,
    stage_log_weights,
    systematic_resample,
)
from .weights import (
    fast_log_core,
    greedy_delta_corrected,
    greedy_delta_original,
    greedy_delta_textbook,
    pair_log_weight_exact,
    pair_log_weight_fast,
    pair_log_weight_laplace,
)
