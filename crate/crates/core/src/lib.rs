//! Social learning by agents that are Bayesian without recall: each round
//! they update on a fresh private signal and on what their neighbors did in
//! the previous round, treating that as if it were the only history.
//!
//! Two communication modes are modeled. In the action mode agents share a
//! binary action, and the population evolves as a Markov chain on
//! `{±1}^n` ([`ising`], [`chain`]). In the belief mode agents share their
//! whole posterior and beliefs evolve log-linearly ([`belief`]), with
//! asymptotics governed by the network's Perron data ([`graph`]).

pub mod belief;
pub mod chain;
pub mod error;
pub mod exec;
pub mod format;
pub mod generate;
pub mod graph;
pub mod harness;
pub mod ising;
pub mod model;
pub mod scenarios;
pub mod stochastic;

pub use error::{Error, ErrorCategory, Result};
pub use exec::{Execution, RunConfig};
pub use model::{Likelihood, ModelSpec, Network, Prior, SignalStructure, StateSpace};
