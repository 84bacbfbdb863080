//! Gapless local alignment: score models, the Lundberg root and tilted law,
//! score fields, Gumbel constants and cluster-shape sampling.

pub mod cluster;
pub mod constants;
pub mod field;
pub mod lundberg;
pub mod model;

pub use cluster::{sample_cluster_q, ClusterSample, WalkPath};
pub use constants::{
    compare_to_gumbel, extremal_index_alignment, gumbel_check, gumbel_params, tail_constant_c,
    Estimate, GumbelCheck, GumbelParams, McConfig, DEFAULT_TOL,
};
pub use field::{
    burn_in_length, connected_clusters, heatmap_export, max_score, offdiagonal_scan, score_field,
    simulate_scores, FieldMode, ScoreSample,
};
pub use lundberg::{
    check_e_prime, lundberg_solve, relative_entropy, tilt, EPrimeReport, TiltedModel,
};
pub use model::{lattice_span, validate_model, IncrementLaw, ScoreModel, ValidationReport};
