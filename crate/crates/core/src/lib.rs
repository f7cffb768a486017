//! Spectra of sums of rank-one tensor-product matrices
//! `M = sum_j tau_j Y_j Y_j^*` and their Marchenko-Pastur limit.
//!
//! The crate has three layers:
//!
//! - combinatorics of canonical sequences and their walk graphs
//!   ([`sequences`], [`graphs`], [`combinatorics`]),
//! - moments, both limiting and exact for finite `n` ([`moments`]),
//! - Monte Carlo spectra and the limit law ([`simulation`], [`mplaw`]).

pub mod combinatorics;
pub mod distribution;
pub mod graphs;
pub mod linalg;
pub mod moments;
pub mod mplaw;
pub mod numeric;
pub mod sequences;
pub mod simulation;
pub mod verify;

pub use distribution::{EntryDistribution, MixedMomentRule};
pub use graphs::{build_graph, classify, delta1_partner, is_delta1, paired_partners, GraphClass, WalkGraph};
pub use moments::{exact_mean_trace_moment, limiting_moment, mp_moment, TauModel};
pub use mplaw::MpLaw;
pub use sequences::{canonicalize, enumerate_canonical, CanonicalSequence};
pub use simulation::{run_trials, SpectrumSample, TrialConfig, TrialReport};
