//! Joint inference of statement credibility, post objectivity and user
//! trustworthiness over online community corpora.
//!
//! The observed world is a set of users, their posts, and (drug, effect)
//! statements matched inside post text. Every statement occurrence forms a
//! (statement, post, user) clique carrying stylistic, affective and user
//! features. A semi-supervised conditional random field over those cliques is
//! trained by Monte-Carlo EM: a Gibbs-sampled E-step over unlabeled statements
//! (optionally modulated by explicit per-user trust scores) alternates with an
//! L2-regularized trust-region Newton M-step.
//!
//! Module map:
//!
//! * [`corpus`] loading, validation and catalog-driven statement matching
//! * [`features`] stylistic / affective / user feature extraction
//! * [`graph`] clique structure and label partition
//! * [`optim`] trust-region Newton and coordinate-descent L1 solvers
//! * [`inference`] potentials, Gibbs E-step, M-step, EM driver, exact oracle
//! * [`baselines`] frequency ranking and linear classifiers
//! * [`evaluation`] metrics and the repeated split protocol
//! * [`synth`] planted-truth corpus generator
//! * [`cli`] command surface

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod graph;
pub mod inference;
pub mod matrix;
pub mod optim;
pub mod par;
pub mod seed;
pub mod synth;
pub mod tsv;

pub use error::{Error, Result};

/// Library version recorded in model files and run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
