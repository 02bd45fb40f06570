"""Knowledge-gradient frequency-band selection for RSS-based relative positioning."""
from .belief import (
    AttributeBelief,
    BasisSpec,
    BeliefState,
    FeatureMatrix,
    apply_basis,
    prior_from_attributes,
    sigma_tilde_attribute,
    sigma_tilde_full,
    update_attribute,
    update_full,
)
from .kg import (
    DominantSet,
    KgScores,
    LineSet,
    PolicyConfig,
    dominant_lines,
    kg_factor_all,
    kg_factor_all_attribute,
    kg_h,
    kgcb_step,
    select_offline,
    select_online,
    subset_reduce,
    subset_reduce_attribute,
)
from .positioning import (
    EkfConfig,
    EkfState,
    PathLossModel,
    Position2D,
    build_linear_system,
    distance_from_pl,
    ekf_predict,
    ekf_update,
    estimate_tx_positions,
    free_space_pl0,
    lsq_solve,
    multilaterate,
    pl_from_distance,
)
from .spectrum import (
    FeatureMoments,
    ScenarioConfig,
    SweepRecord,
    SweepSet,
    cluster_bands,
    feature_moments,
    generate_scenario,
    load_sweeps,
    make_scenario,
    save_sweeps,
    smooth_rss,
)
from .harness import ExperimentConfig, RunResult, SummaryStats, compare_policies, run_experiment, summarize
from .report import emit_csv

__version__ = "0.1.0"
