//! Toolbox for Bell-test analysis: behaviors and their geometry, quantum
//! models that attempt to violate (or classically reproduce) Bell
//! inequalities, and device-independent certification primitives.
//!
//! The crate is organized around a small set of shared value types
//! ([`Scenario`], [`Behavior`], [`CorrelatorVector`], [`BellInequality`])
//! consumed by:
//!
//! - [`polytope`]: deterministic strategies, facet enumeration, and exact
//!   local-model membership via linear programming;
//! - [`linalg`]: dense complex matrices, Hermitian eigensolving, Born-rule
//!   behaviors, and two-qubit state decompositions;
//! - [`bell`]: CHSH maximization (operator norm and correlation-matrix
//!   criteria), embeddings for higher-dimensional pure states, and canned
//!   entangled-state behaviors;
//! - [`sim`]: seeded local-variable simulators, including communication- and
//!   detection-assisted cheats, with mergeable statistical reports;
//! - [`qset`]: moment-matrix relaxations of the quantum set, randomness
//!   bounds from CHSH, and coarse-grained covariance feasibility;
//! - [`selftest`]: state and measurement certification from correlations
//!   alone, via an explicit extraction circuit;
//! - [`boxes`]: no-signaling boxes beyond quantum, chained correlation
//!   measures, and guessing games they power.

pub mod bell;
pub mod boxes;
pub mod error;
pub mod linalg;
pub mod polytope;
pub mod qset;
pub mod selftest;
pub mod sim;
pub mod stats;
pub mod vec3;

pub use boxes::{
    chained_quantum_settings, chained_value, leggett_marginal_bound, local_fraction_bound,
    majority_vote_coarse_grain, pr_box, pr_deterministic_points, pr_uniqueness_check,
    rac_brute_force_best, rac_play, random_ns_behavior, seeded_rng, ChainedForm, ChainedSpec,
    CoarseCell, CoarseGrainReport, LeggettReport, PrUniquenessReport, RacStrategy, MAX_CHAIN,
};
pub use bell::{
    chsh_behavior, ghz_conditional_chsh, gisin_embedding, horodecki_max_chsh,
    pure_state_max_chsh, singlet_behavior, tripartite_unique_state, tsirelson_norm,
    werner_behavior, ChshSettings, MaxChsh, SchmidtCoeffs,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use linalg::{
    born_behavior, herm_eigen, is_ppt, jordan_blocks, partial_trace, partial_transpose,
    sym3_eigen, sym_eigen, two_qubit_compose, two_qubit_decompose, unitary_eigen, ComplexMatrix,
    DensityMatrix, DichotomicObservable, JordanDecomposition, TwoQubitState,
};
pub use polytope::{
    correlator_polytope_vertices, enumerate_deterministic, enumerate_deterministic_capped,
    facet_enumeration, is_trivial_facet, lv_membership, strategy_behavior,
    DeterministicStrategy, LvDecomposition, MembershipVerdict,
};
pub use qset::{
    arcsin_criterion, arcsin_criterion_all_signs, block_optimize_marginal,
    correlator_moment_matrix, macroscopic_covariance, ml_feasibility, projector_moment_matrix,
    q1_behavior_feasibility, q1_feasibility, randomness_bound, randomness_curve_achievability,
    ArcsinCriterion, CurvePoint, FeasibilityResult, FreeSlot, MomentMatrix,
    DEFAULT_FEASIBILITY_TOL,
};
pub use selftest::{
    chsh_self_test_probe, direct_sum_singlet_state, mayers_yao_residuals, swap_isometry,
    ChshProbe, ExtractionResult, MayersYaoResiduals, ProbeOperator, SelfTestInstance,
    MAX_SIDE_DIM,
};
pub use sim::{
    behavior_from_cell_counts, builtin_strategies, chi_squared_p_value, detection_cheat,
    leaked_settings_run, memory_lv_run, simulate_anticorrelation_lv, simulate_single_qubit_lv,
    simulate_toner_bacon, simulate_werner_half, toner_bacon_expected_histogram,
    AdaptiveStrategy, CheatPairStats, DetectionCheatReport, DirectionStats,
    GreedyAvoidLastLoss, MajorityHistory, MemoryReport, PairStats, RoundRobin, RunConfig,
    SimulationReport, SingleQubitReport, HISTOGRAM_BINS,
};
pub use stats::{
    bell_value, chsh_value, outcome_sign, Behavior, BellInequality, CorrelatorVector,
    InequalityForm, Scenario, TableBuild,
};
pub use vec3::{Mat3, Vec3};
