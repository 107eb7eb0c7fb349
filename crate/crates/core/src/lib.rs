//! Maximum-entropy inference for finite-level quantum systems.
//!
//! Given observables `a₁, …, a_k` and a prior `σ ∝ e^θ`, the inference map
//! `Ψ` sends an expected value `m` to the state minimizing the relative
//! entropy `S(ρ, σ)` subject to `tr(ρ aᵢ) = mᵢ`. Interior points go through
//! the exponential family `R(λ) ∝ e^{θ + λ·a}`; boundary points through
//! recursive compression onto exposed faces of the state space.

pub mod density;
pub mod error;
pub mod family;
pub mod fixtures;
pub mod hermitian;
pub mod inference;
pub mod linalg;
pub mod moments;
pub mod openness;
pub mod random;
pub mod scan;
pub mod spectral;

pub use density::{relative_entropy, trace_distance, von_neumann_entropy, DensityMatrix};
pub use error::{Error, Result};
pub use family::{
    dual_gradient, dual_hessian, gibbs_state, log_partition, solve_dual, solve_dual_with, DualOptions,
    DualSolution, NaturalParameters,
};
pub use hermitian::{hs_inner, HermitianMatrix};
pub use inference::{
    compress_to_face, infer, primal_oracle, primal_oracle_with, sample_fiber, CompressedProblem, InferenceOptions,
    InferencePath, InferenceResult, MaxEntInference, OracleOptions, OracleResult,
};
pub use moments::{
    boundary_curve, classify_point, moment_map, project_to_body, simulate_sample_mean, support_function,
    BoundaryClassification, BoundaryPoint, ExpectedValue, ExpectedValueBody, ObservableConfig, ObservableSet,
    PointStatus,
};
pub use openness::{
    halfspace_exposed_point, halfspace_image_boundary, lemma_cross_check, openness_probe, HalfSpaceNeighborhood,
    LemmaOptions, LemmaReport, OpennessReport, OpennessVerdict, ProbeTarget,
};
pub use scan::{
    continuity_probe, estimation_pipeline_demo, scan_boundary, scan_boundary_with, scan_ray, scan_ray_with,
    ContinuityReport, DemoRow, JumpCandidate, RayProfile, RaySample, ScanOptions, ScanProfile, ScanSample,
};
pub use spectral::{matrix_exp, matrix_function, matrix_log, spectral_decompose, SpectralDecomposition};
