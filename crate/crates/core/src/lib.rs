//! Pick-to-Learn meta-algorithms with distribution-free risk certificates.
//!
//! * [`bounds`]: the compression bound `eps_bar(k, delta, n)`, binomial tail
//!   inversion and the conformal certificate.
//! * [`meta`]: P2L, P2L+, the time-triggered variant and the all-iterations
//!   sweep, generic over the scenario and decision types.
//! * [`reach`]: Christoffel-function reachable sets for the Duffing
//!   oscillator.
//! * [`control`]: grid-searched feedback gains for a scalar linear system
//!   with certified cost thresholds.
//! * [`baselines`]: test-set and split-conformal reachability pipelines.
//! * [`harness`]: seeded experiment sweeps and CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bounds;
pub mod control;
pub mod error;
pub mod harness;
pub mod meta;
pub mod reach;
pub mod rng;
pub mod special;

pub use bounds::{
    binomial_tail_inversion, conformal_eps, eps_bar, eps_bar_oracle, psi_value, risk_bound,
    union_delta, BoundMethod, BoundQuery, BoundResult,
};
pub use error::{Error, Result};
pub use meta::{
    certify, run_all_iterations, run_p2l, run_p2l_plus, run_p2l_tts, AllIterations,
    CompressionResult, Dataset, Property, PropertyOrder, ScoreOrder, SelectionOrder, Synthesizer,
    TimeTriggered,
};
