//! Random problem instances for property tests, acceptance runs and benches.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Likelihood, ModelSpec, Network, Prior, SignalStructure, StateSpace};

#[derive(Debug, Clone)]
pub struct ModelOptions {
    pub agents: RangeInclusive<usize>,
    pub states: RangeInclusive<usize>,
    pub signals: RangeInclusive<usize>,
    pub edge_probability: f64,
    /// Smallest unnormalized likelihood weight; keeps every entry positive.
    pub min_weight: f64,
    pub common_prior: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            agents: 2..=4,
            states: 2..=4,
            signals: 2..=4,
            edge_probability: 0.5,
            min_weight: 0.05,
            common_prior: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinaryModelOptions {
    pub agents: RangeInclusive<usize>,
    pub signals: RangeInclusive<usize>,
    pub edge_probability: f64,
    pub min_weight: f64,
    /// Priors on the first state are drawn from this interval.
    pub prior: (f64, f64),
}

impl Default for BinaryModelOptions {
    fn default() -> Self {
        BinaryModelOptions {
            agents: 2..=6,
            signals: 2..=4,
            edge_probability: 0.5,
            min_weight: 0.05,
            prior: (0.2, 0.8),
        }
    }
}

/// Distribution with `len` entries, each proportional to a uniform draw on
/// `[min_weight, 1)`.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, len: usize, min_weight: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(min_weight..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.into_iter().map(|x| x / total).collect();
    // push the rounding residue into the largest entry
    let residue = 1.0 - p.iter().sum::<f64>();
    if let Some(max) = p.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += residue;
    }
    p
}

pub fn random_likelihood<R: Rng + ?Sized>(rng: &mut R, signals: usize, states: usize, min_weight: f64) -> Likelihood {
    let columns: Vec<Vec<f64>> = (0..states)
        .map(|_| random_distribution(rng, signals, min_weight))
        .collect();
    Likelihood::from_columns(&columns)
}

/// Directed graph with each ordered pair linked independently.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Network {
    let edges: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (j, i)))
        .filter(|&(j, i)| i != j)
        .filter(|_| rng.gen_bool(p))
        .collect();
    Network::from_edges(n, &edges)
}

/// A directed circle through a random ordering of the nodes plus each other
/// ordered pair with probability `p`.
pub fn random_strongly_connected<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Network {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<_> = (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && !edges.contains(&(j, i)) && rng.gen_bool(p) {
                edges.push((j, i));
            }
        }
    }
    Network::from_edges(n, &edges)
}

pub fn random_model<R: Rng + ?Sized>(rng: &mut R, opts: &ModelOptions) -> ModelSpec {
    let n = rng.gen_range(opts.agents.clone());
    let m = rng.gen_range(opts.states.clone());
    let signals = (0..n)
        .map(|_| {
            let k = rng.gen_range(opts.signals.clone());
            random_likelihood(rng, k, m, opts.min_weight)
        })
        .collect();
    let priors = if opts.common_prior {
        Prior::common(n, random_distribution(rng, m, 0.1))
    } else {
        Prior {
            agents: (0..n).map(|_| random_distribution(rng, m, 0.1)).collect(),
        }
    };
    ModelSpec {
        states: StateSpace::numbered(m),
        signals: SignalStructure { agents: signals },
        priors,
        network: random_network(rng, n, opts.edge_probability),
        truth: rng.gen_range(0..m),
    }
}

pub fn random_binary_model<R: Rng + ?Sized>(rng: &mut R, opts: &BinaryModelOptions) -> ModelSpec {
    let n = rng.gen_range(opts.agents.clone());
    let signals = (0..n)
        .map(|_| {
            let k = rng.gen_range(opts.signals.clone());
            random_likelihood(rng, k, 2, opts.min_weight)
        })
        .collect();
    let priors = (0..n)
        .map(|_| {
            let p = rng.gen_range(opts.prior.0..opts.prior.1);
            vec![p, 1.0 - p]
        })
        .collect();
    ModelSpec {
        states: StateSpace::new(["+1", "-1"]),
        signals: SignalStructure { agents: signals },
        priors: Prior { agents: priors },
        network: random_network(rng, n, opts.edge_probability),
        truth: rng.gen_range(0..2),
    }
}
