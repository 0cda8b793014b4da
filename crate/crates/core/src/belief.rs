//! Belief dynamics: Bayesian updates, the log-linear network rule and its
//! single-neighbor forms, network-wide statistics, learning detection and
//! asymptotic rates.
//!
//! Beliefs are stored as normalized log-probabilities. Probabilities only
//! appear at the output boundary, through [`Belief::probabilities`].

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{trial_rng, try_map_indexed, RunConfig};
use crate::graph::{classify_topology, perron, root_circle, strongly_connected, SpectralData, Topology};
use crate::model::{draw_signals, kl_divergence, log_likelihood_ratio, ModelSpec, Network};
use crate::stochastic::stationary_law;

/// Log-ratios are clamped to `±SATURATION` before exponentiation.
pub const SATURATION: f64 = 700.0;
/// Total-variation distance under which two beliefs count as equal when the
/// time-one oracle inverts a reported belief.
pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_THRESHOLD: f64 = 0.99;
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.2;

/// A probability vector over states, held as log-probabilities whose
/// log-sum-exp is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    log: Vec<f64>,
}

impl Belief {
    /// Normalizes an unnormalized log-vector by max-shift; `None` if every
    /// entry is `-∞` (or any entry is NaN or `+∞`).
    pub fn from_log(mut log: Vec<f64>) -> Option<Self> {
        if log.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return None;
        }
        let max = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return None;
        }
        let total: f64 = log.iter().map(|x| (x - max).exp()).sum();
        let shift = max + total.ln();
        for x in &mut log {
            *x -= shift;
        }
        Some(Belief { log })
    }

    pub fn from_probabilities(p: &[f64]) -> Option<Self> {
        Self::from_log(p.iter().map(|x| x.ln()).collect())
    }

    /// Stored log-probabilities, not re-normalized. Used to rebuild a
    /// trajectory from its serialized form without perturbing it.
    pub fn from_normalized_log(log: Vec<f64>) -> Self {
        Belief { log }
    }

    pub fn log(&self) -> &[f64] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.log.iter().map(|x| x.max(-SATURATION).exp()).collect()
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.log[state].max(-SATURATION).exp()
    }

    /// `log(μ(a)/μ(b))`.
    pub fn log_ratio(&self, a: usize, b: usize) -> f64 {
        self.log[a] - self.log[b]
    }

    /// Total-variation distance to another belief.
    pub fn total_variation(&self, other: &Belief) -> f64 {
        0.5 * self
            .probabilities()
            .iter()
            .zip(other.probabilities())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

fn log_likelihood_column(model: &ModelSpec, agent: usize, signal: usize) -> Result<Vec<f64>> {
    model.check_agent(agent)?;
    model.check_signal(agent, signal)?;
    let lik = model.likelihood(agent);
    let column: Vec<f64> = (0..model.state_count()).map(|k| lik.prob(signal, k).ln()).collect();
    if column.iter().all(|x| *x == f64::NEG_INFINITY) {
        return Err(Error::ImpossibleSignal { agent, signal });
    }
    Ok(column)
}

fn log_prior(model: &ModelSpec, agent: usize) -> Vec<f64> {
    model.prior(agent).iter().map(|p| p.ln()).collect()
}

fn posterior(agent: usize, log: Vec<f64>) -> Result<Belief> {
    Belief::from_log(log).ok_or(Error::DegeneratePosterior { agent })
}

pub fn bayes_initial_belief(model: &ModelSpec, agent: usize, signal: usize) -> Result<Belief> {
    let lik = log_likelihood_column(model, agent, signal)?;
    let log = log_prior(model, agent).iter().zip(lik).map(|(p, l)| p + l).collect();
    posterior(agent, log)
}

pub fn single_agent_bayes_step(model: &ModelSpec, agent: usize, belief: &Belief, signal: usize) -> Result<Belief> {
    let lik = log_likelihood_column(model, agent, signal)?;
    let log = belief.log().iter().zip(lik).map(|(b, l)| b + l).collect();
    posterior(agent, log)
}

/// Network update: posterior `∝ ν_i ℓ_i(s|·) Π_{j∈N(i)} μ_j / ν_j`.
/// `neighbor_beliefs` follows the order of `model.network.neighbors(agent)`.
pub fn bwr_belief_step(model: &ModelSpec, agent: usize, neighbor_beliefs: &[&Belief], signal: usize) -> Result<Belief> {
    let lik = log_likelihood_column(model, agent, signal)?;
    let neighbors = model.network.neighbors(agent);
    if neighbors.len() != neighbor_beliefs.len() {
        return Err(Error::Precondition(format!(
            "agent {agent}: {} neighbor beliefs for {} neighbors",
            neighbor_beliefs.len(),
            neighbors.len()
        )));
    }
    let mut log: Vec<f64> = log_prior(model, agent).iter().zip(lik).map(|(p, l)| p + l).collect();
    for (&j, belief) in neighbors.iter().zip(neighbor_beliefs) {
        for (k, x) in log.iter_mut().enumerate() {
            *x += belief.log()[k] - model.prior(j)[k].ln();
        }
    }
    posterior(agent, log)
}

/// Signals of `agent` whose initial Bayesian belief is within `tolerance`
/// (total variation) of `reported`.
pub fn signals_consistent_with(model: &ModelSpec, agent: usize, reported: &Belief, tolerance: f64) -> Vec<usize> {
    (0..model.likelihood(agent).signal_count())
        .filter(|&s| {
            bayes_initial_belief(model, agent, s)
                .map(|b| b.total_variation(reported) <= tolerance)
                .unwrap_or(false)
        })
        .collect()
}

/// Exact time-one posterior by enumeration: every neighbor's report is
/// inverted to the set of signals that could have produced it, and the joint
/// likelihood is summed over those sets.
pub fn time_one_oracle(
    model: &ModelSpec,
    agent: usize,
    neighbor_beliefs: &[&Belief],
    signal: usize,
    tolerance: f64,
) -> Result<Belief> {
    model.check_agent(agent)?;
    model.check_signal(agent, signal)?;
    let neighbors = model.network.neighbors(agent);
    if neighbors.len() != neighbor_beliefs.len() {
        return Err(Error::Precondition(format!(
            "agent {agent}: {} neighbor beliefs for {} neighbors",
            neighbor_beliefs.len(),
            neighbors.len()
        )));
    }
    let lik = model.likelihood(agent);
    let prior = model.prior(agent);
    let mut joint: Vec<f64> = (0..model.state_count()).map(|k| prior[k] * lik.prob(signal, k)).collect();
    for (&j, reported) in neighbors.iter().zip(neighbor_beliefs) {
        let consistent = signals_consistent_with(model, j, reported, tolerance);
        if consistent.is_empty() {
            return Err(Error::UnreachableBelief { agent, neighbor: j });
        }
        let lj = model.likelihood(j);
        for (k, x) in joint.iter_mut().enumerate() {
            *x *= consistent.iter().map(|&s| lj.prob(s, k)).sum::<f64>();
        }
    }
    if joint.iter().all(|x| *x == 0.0) {
        return Err(Error::DegeneratePosterior { agent });
    }
    posterior(agent, joint.iter().map(|x| x.ln()).collect())
}

fn require_common_prior(model: &ModelSpec) -> Result<()> {
    match model.priors.common_mismatch() {
        Some((a, b)) => Err(Error::NoCommonPrior { a, b }),
        None => Ok(()),
    }
}

fn require_single_predecessor(model: &ModelSpec, agent: usize) -> Result<()> {
    match model.network.degree(agent) {
        1 => Ok(()),
        degree => Err(Error::InDegreeNotOne { agent, degree }),
    }
}

fn relay_update(model: &ModelSpec, agent: usize, source: &Belief, signal: usize) -> Result<Belief> {
    let lik = log_likelihood_column(model, agent, signal)?;
    let log = source.log().iter().zip(lik).map(|(b, l)| b + l).collect();
    posterior(agent, log)
}

/// Single-predecessor update: posterior `∝ μ_j ℓ_i(s|·)`.
pub fn circle_step(model: &ModelSpec, agent: usize, predecessor: &Belief, signal: usize) -> Result<Belief> {
    model.check_agent(agent)?;
    require_single_predecessor(model, agent)?;
    require_common_prior(model)?;
    relay_update(model, agent, predecessor, signal)
}

/// Per-agent distribution over in-neighbors, aligned with
/// `network.neighbors(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborChoice {
    pub weights: Vec<Vec<f64>>,
}

impl NeighborChoice {
    pub fn uniform(network: &Network) -> Self {
        NeighborChoice {
            weights: (0..network.len())
                .map(|i| {
                    let d = network.degree(i);
                    vec![1.0 / d as f64; d]
                })
                .collect(),
        }
    }

    pub fn validate(&self, network: &Network) -> Result<()> {
        if self.weights.len() != network.len() {
            return Err(Error::InvalidChoice {
                agent: self.weights.len().min(network.len()),
                reason: format!("{} distributions for {} agents", self.weights.len(), network.len()),
            });
        }
        for (agent, w) in self.weights.iter().enumerate() {
            if network.degree(agent) == 0 {
                return Err(Error::EmptyNeighborhood { agent });
            }
            if w.len() != network.degree(agent) {
                return Err(Error::InvalidChoice {
                    agent,
                    reason: format!("{} weights for {} neighbors", w.len(), network.degree(agent)),
                });
            }
            if w.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidChoice {
                    agent,
                    reason: "weight outside [0, 1]".into(),
                });
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidChoice {
                    agent,
                    reason: format!("weights sum to {sum}"),
                });
            }
        }
        Ok(())
    }

    /// Inverse-CDF draw of a neighbor (an agent index) from one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, network: &Network, agent: usize, rng: &mut R) -> usize {
        let neighbors = network.neighbors(agent);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &p) in self.weights[agent].iter().enumerate() {
            acc += p;
            if u < acc {
                return neighbors[k];
            }
        }
        // rounding left u above the last partial sum: take the last neighbor with mass
        let last = self.weights[agent].iter().rposition(|&p| p > 0.0).unwrap_or(0);
        neighbors[last]
    }

    /// `P[i][j]`: probability that `i` listens to `j`.
    pub fn chain_matrix(&self, network: &Network) -> DMatrix<f64> {
        let n = network.len();
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            for (&j, &w) in network.neighbors(i).iter().zip(&self.weights[i]) {
                p[(i, j)] += w;
            }
        }
        p
    }

    /// Stationary law of the neighbor-choice chain.
    pub fn stationary(&self, network: &Network) -> Result<Vec<f64>> {
        self.validate(network)?;
        stationary_law(&self.chain_matrix(network))
    }
}

/// Draws a neighbor and applies the single-predecessor update with that
/// neighbor's current belief. Returns the new belief and the chosen neighbor.
pub fn random_neighbor_step<R: Rng + ?Sized>(
    model: &ModelSpec,
    agent: usize,
    rng: &mut R,
    current: &[Belief],
    signal: usize,
    choice: &NeighborChoice,
) -> Result<(Belief, usize)> {
    model.check_agent(agent)?;
    if model.network.degree(agent) == 0 {
        return Err(Error::EmptyNeighborhood { agent });
    }
    require_common_prior(model)?;
    let j = choice.sample(&model.network, agent, rng);
    Ok((relay_update(model, agent, &current[j], signal)?, j))
}

/// Network-wide statistics at one step, indexed by false state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub false_states: Vec<usize>,
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
}

/// `Φ = Σ α_i φ_i`, `Λ = Σ α_i λ(s_i)` and `β = Σ α_i log(ν_i(θ̌)/ν_i(θ))`.
pub fn global_stats(model: &ModelSpec, spectral: &SpectralData, beliefs: &[Belief], signals: &[usize]) -> Result<GlobalStats> {
    let truth = model.truth;
    let false_states = model.false_states();
    let mut phi = Vec::with_capacity(false_states.len());
    let mut lambda = Vec::with_capacity(false_states.len());
    let mut beta = Vec::with_capacity(false_states.len());
    for &f in &false_states {
        let (mut p, mut l, mut b) = (0.0, 0.0, 0.0);
        for (i, &a) in spectral.alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            p += a * beliefs[i].log_ratio(f, truth);
            l += a * log_likelihood_ratio(model, i, signals[i], f)?;
            b += a * (model.prior(i)[f] / model.prior(i)[truth]).ln();
        }
        phi.push(p);
        lambda.push(l);
        beta.push(b);
    }
    Ok(GlobalStats {
        false_states,
        phi,
        lambda,
        beta,
    })
}

/// Largest relative residual of `Φ_t = Λ_t + ρ Φ_{t−1} + (1 − ρ) β` over the
/// false states.
pub fn recursion_residual(previous: &GlobalStats, current: &GlobalStats, rho: f64) -> f64 {
    (0..current.phi.len())
        .map(|k| {
            let predicted = current.lambda[k] + rho * previous.phi[k] + (1.0 - rho) * current.beta[k];
            let scale = 1f64.max(current.phi[k].abs()).max(rho * previous.phi[k].abs());
            (current.phi[k] - predicted).abs() / scale
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeliefMode {
    /// Every agent combines all in-neighbor beliefs.
    Full,
    /// Every agent has one in-neighbor and relays its belief.
    Circle,
    /// Every agent relays one randomly chosen in-neighbor.
    RandomNeighbor,
    /// Agents ignore the network and update sequentially on their own signals.
    Bayes,
}

/// One trial, `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTrajectory {
    pub agents: usize,
    pub states: usize,
    /// Flat `[t][agent][state]` normalized log-beliefs.
    pub log_beliefs: Vec<f64>,
    /// Flat `[t][agent]`.
    pub signals: Vec<usize>,
    /// Flat `[t − 1][agent]`, random-neighbor mode only.
    pub choices: Option<Vec<usize>>,
    /// Per step, when the network is strongly connected.
    pub global: Option<Vec<GlobalStats>>,
}

impl BeliefTrajectory {
    pub fn steps(&self) -> usize {
        if self.agents == 0 || self.states == 0 {
            0
        } else {
            self.log_beliefs.len() / (self.agents * self.states)
        }
    }

    pub fn log_belief(&self, t: usize, agent: usize) -> &[f64] {
        let start = (t * self.agents + agent) * self.states;
        &self.log_beliefs[start..start + self.states]
    }

    pub fn belief(&self, t: usize, agent: usize) -> Belief {
        Belief::from_normalized_log(self.log_belief(t, agent).to_vec())
    }

    pub fn phi(&self, t: usize, agent: usize, false_state: usize, truth: usize) -> f64 {
        let b = self.log_belief(t, agent);
        b[false_state] - b[truth]
    }
}

#[derive(Debug, Clone)]
pub struct BeliefSimulation {
    pub mode: BeliefMode,
    pub spectral: Option<SpectralData>,
    pub trials: Vec<BeliefTrajectory>,
}

fn check_mode(model: &ModelSpec, mode: BeliefMode, choice: &NeighborChoice) -> Result<()> {
    match mode {
        BeliefMode::Full | BeliefMode::Bayes => Ok(()),
        BeliefMode::Circle => {
            for i in 0..model.agents() {
                require_single_predecessor(model, i)?;
            }
            require_common_prior(model)
        }
        BeliefMode::RandomNeighbor => {
            if !strongly_connected(&model.network) {
                return Err(Error::NotStronglyConnected);
            }
            require_common_prior(model)?;
            choice.validate(&model.network)
        }
    }
}

/// Monte Carlo belief trajectories. Each step draws one signal per agent in
/// ascending order, then (random-neighbor mode) one neighbor choice per agent
/// in ascending order.
pub fn simulate_beliefs(
    model: &ModelSpec,
    mode: BeliefMode,
    choice: Option<&NeighborChoice>,
    config: &RunConfig,
) -> Result<BeliefSimulation> {
    let default_choice;
    let choice = match choice {
        Some(c) => c,
        None => {
            default_choice = NeighborChoice::uniform(&model.network);
            &default_choice
        }
    };
    check_mode(model, mode, choice)?;
    let spectral = if strongly_connected(&model.network) {
        Some(perron(&model.network)?)
    } else {
        None
    };
    let trials = try_map_indexed(config.execution, config.trials, |trial| {
        run_trial(model, mode, choice, spectral.as_ref(), config, trial)
    })?;
    Ok(BeliefSimulation { mode, spectral, trials })
}

fn run_trial(
    model: &ModelSpec,
    mode: BeliefMode,
    choice: &NeighborChoice,
    spectral: Option<&SpectralData>,
    config: &RunConfig,
    trial: usize,
) -> Result<BeliefTrajectory> {
    let n = model.agents();
    let m = model.state_count();
    let steps = config.horizon + 1;
    let mut rng = trial_rng(config.seed, trial);
    let mut log_beliefs = Vec::with_capacity(steps * n * m);
    let mut all_signals = Vec::with_capacity(steps * n);
    let mut choices = (mode == BeliefMode::RandomNeighbor).then(|| Vec::with_capacity(config.horizon * n));
    let mut global = spectral.map(|_| Vec::with_capacity(steps));

    let signals = draw_signals(model, &mut rng);
    let mut beliefs = (0..n)
        .map(|i| bayes_initial_belief(model, i, signals[i]))
        .collect::<Result<Vec<_>>>()?;
    let mut record = |beliefs: &[Belief], signals: &[usize]| -> Result<()> {
        for b in beliefs {
            log_beliefs.extend_from_slice(b.log());
        }
        all_signals.extend_from_slice(signals);
        if let (Some(g), Some(sp)) = (global.as_mut(), spectral) {
            g.push(global_stats(model, sp, beliefs, signals)?);
        }
        Ok(())
    };
    record(&beliefs, &signals)?;

    for _ in 1..steps {
        let signals = draw_signals(model, &mut rng);
        let next = match mode {
            BeliefMode::Full => (0..n)
                .map(|i| {
                    let neighbors: Vec<&Belief> = model.network.neighbors(i).iter().map(|&j| &beliefs[j]).collect();
                    bwr_belief_step(model, i, &neighbors, signals[i])
                })
                .collect::<Result<Vec<_>>>()?,
            BeliefMode::Bayes => (0..n)
                .map(|i| single_agent_bayes_step(model, i, &beliefs[i], signals[i]))
                .collect::<Result<Vec<_>>>()?,
            BeliefMode::Circle => (0..n)
                .map(|i| relay_update(model, i, &beliefs[model.network.neighbors(i)[0]], signals[i]))
                .collect::<Result<Vec<_>>>()?,
            BeliefMode::RandomNeighbor => {
                let chosen: Vec<usize> = (0..n).map(|i| choice.sample(&model.network, i, &mut rng)).collect();
                let next = (0..n)
                    .map(|i| relay_update(model, i, &beliefs[chosen[i]], signals[i]))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(c) = choices.as_mut() {
                    c.extend_from_slice(&chosen);
                }
                next
            }
        };
        beliefs = next;
        record(&beliefs, &signals)?;
    }
    Ok(BeliefTrajectory {
        agents: n,
        states: m,
        log_beliefs,
        signals: all_signals,
        choices,
        global,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum RateEstimate {
    Finite(f64),
    /// Beliefs are point masses on the truth throughout the window.
    Saturated,
    /// Fewer than two points, or non-finite data of another kind.
    Undefined,
}

impl RateEstimate {
    pub fn finite(self) -> Option<f64> {
        match self {
            RateEstimate::Finite(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningVerdict {
    pub agent: usize,
    pub learning: bool,
    pub rate: RateEstimate,
}

/// Window length used by default: the final fifth of the trajectory.
pub fn default_window(steps: usize) -> usize {
    ((steps as f64 * DEFAULT_WINDOW_FRACTION).round() as usize).clamp(1.min(steps), steps)
}

/// Least-squares slope of `ys` against `0, 1, …`.
pub fn least_squares_slope(ys: &[f64]) -> Option<f64> {
    let n = ys.len();
    if n < 2 {
        return None;
    }
    let mean_x = (n - 1) as f64 / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dx = k as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    Some(sxy / sxx)
}

/// Agent `i` learns iff `μ_{i,t}(θ) ≥ threshold` for every `t` in the final
/// `window` steps. The rate is the negated least-squares slope of
/// `max_θ̌ φ_{i,t}(θ̌)` over that window.
pub fn detect_learning(
    trajectory: &BeliefTrajectory,
    truth: usize,
    threshold: f64,
    window: usize,
) -> Result<Vec<LearningVerdict>> {
    let steps = trajectory.steps();
    if window == 0 || window > steps {
        return Err(Error::Precondition(format!(
            "window of {window} steps for a trajectory of {steps}"
        )));
    }
    let start = steps - window;
    Ok((0..trajectory.agents)
        .map(|i| {
            let learning = (start..steps).all(|t| trajectory.log_belief(t, i)[truth].exp() >= threshold);
            let series: Vec<f64> = (start..steps)
                .map(|t| {
                    (0..trajectory.states)
                        .filter(|&k| k != truth)
                        .map(|k| trajectory.phi(t, i, k, truth))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let rate = if series.iter().all(|x| *x == f64::NEG_INFINITY) {
                RateEstimate::Saturated
            } else if series.iter().any(|x| !x.is_finite()) {
                RateEstimate::Undefined
            } else {
                least_squares_slope(&series).map_or(RateEstimate::Undefined, |s| RateEstimate::Finite(-s))
            };
            LearningVerdict { agent: i, learning, rate }
        })
        .collect())
}

/// Mean of the finite rate estimates of `agents` across trials.
pub fn pooled_rate(verdicts: &[Vec<LearningVerdict>], agents: &[usize]) -> Option<f64> {
    let rates: Vec<f64> = verdicts
        .iter()
        .flat_map(|trial| agents.iter().filter_map(move |&i| trial.get(i)?.rate.finite()))
        .collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rate {
    pub rate: f64,
    pub binding_state: usize,
}

/// `min_θ̌ Σ_i weight_i D_KL,i(θ‖θ̌)` with the minimizing false state (lowest
/// index on ties).
pub fn weighted_rate(model: &ModelSpec, weights: &[(usize, f64)]) -> Rate {
    model
        .false_states()
        .into_iter()
        .map(|f| Rate {
            rate: weights
                .iter()
                .filter(|(_, w)| *w != 0.0)
                .map(|&(i, w)| w * kl_divergence(model, i, model.truth, f))
                .sum(),
            binding_state: f,
        })
        .fold(None, |best: Option<Rate>, r| match best {
            Some(b) if b.rate <= r.rate => Some(b),
            _ => Some(r),
        })
        .expect("at least two states")
}

/// `(1/|S|) min_θ̌ Σ_{j∈S} D_KL,j`, the rate a relay cycle through `S` attains.
pub fn subset_rate(model: &ModelSpec, agents: &[usize]) -> Rate {
    let share = 1.0 / agents.len() as f64;
    let weights: Vec<(usize, f64)> = agents.iter().map(|&i| (i, share)).collect();
    weighted_rate(model, &weights)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub states: Vec<String>,
    pub centralized: Rate,
    pub circle: Rate,
    pub individual: Vec<Rate>,
    pub average_individual: f64,
    /// Present for strongly connected networks.
    pub random_walk: Option<Rate>,
    pub neighbor_stationary: Option<Vec<f64>>,
    /// Present when the network has a root circle.
    pub root_circle: Option<Vec<usize>>,
    pub root_circle_rate: Option<Rate>,
}

pub fn learning_rates(model: &ModelSpec, choice: Option<&NeighborChoice>) -> Result<RateReport> {
    let n = model.agents();
    let centralized = weighted_rate(model, &(0..n).map(|i| (i, 1.0)).collect::<Vec<_>>());
    let circle = Rate {
        rate: centralized.rate / n as f64,
        binding_state: centralized.binding_state,
    };
    let individual: Vec<Rate> = (0..n).map(|i| weighted_rate(model, &[(i, 1.0)])).collect();
    let average_individual = individual.iter().map(|r| r.rate).sum::<f64>() / n as f64;

    let (random_walk, neighbor_stationary) = if strongly_connected(&model.network) && n > 1 {
        let pi = match choice {
            Some(c) => c.stationary(&model.network)?,
            None => NeighborChoice::uniform(&model.network).stationary(&model.network)?,
        };
        let weights: Vec<(usize, f64)> = pi.iter().copied().enumerate().collect();
        (Some(weighted_rate(model, &weights)), Some(pi))
    } else {
        (None, None)
    };
    let root = match classify_topology(&model.network) {
        Topology::DirectedCircle | Topology::RootCircleTree => root_circle(&model.network),
        _ => None,
    };
    let root_circle_rate = root.as_deref().map(|c| subset_rate(model, c));
    Ok(RateReport {
        states: model.states.labels.clone(),
        centralized,
        circle,
        individual,
        average_individual,
        random_walk,
        neighbor_stationary,
        root_circle: root,
        root_circle_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::RunConfig;
    use crate::generate::{random_model, random_strongly_connected, ModelOptions};
    use crate::model::{Likelihood, Prior, SignalStructure, StateSpace};
    use crate::scenarios::{example1_model, theorem1_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn single_agent(lik: Likelihood, prior: Vec<f64>, truth: usize) -> ModelSpec {
        let m = prior.len();
        ModelSpec {
            states: StateSpace::numbered(m),
            signals: SignalStructure { agents: vec![lik] },
            priors: Prior { agents: vec![prior] },
            network: Network::empty(1),
            truth,
        }
    }

    #[test]
    fn initial_belief_examples() {
        let flat = single_agent(Likelihood::binary(&[0.5, 0.5]), vec![0.5, 0.5], 0);
        assert!(close(&bayes_initial_belief(&flat, 0, 0).unwrap().probabilities(), &[0.5, 0.5], 1e-15));

        let lik = Likelihood::new(vec![vec![0.2, 0.8], vec![0.8, 0.2]]);
        let model = single_agent(lik, vec![0.5, 0.5], 0);
        assert!(close(&bayes_initial_belief(&model, 0, 0).unwrap().probabilities(), &[0.2, 0.8], 1e-15));

        let ex = example1_model();
        let b = bayes_initial_belief(&ex, 0, 0).unwrap().probabilities();
        let total = 1.0 / 3.0 + 1.0 / 3.0 + 1.0 / 5.0;
        assert!(close(&b, &[1.0 / 3.0 / total, 1.0 / 3.0 / total, 0.2 / total], 1e-15));
    }

    #[test]
    fn impossible_signal_is_rejected() {
        let lik = Likelihood::new(vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        let model = single_agent(lik, vec![0.5, 0.5], 0);
        assert!(matches!(
            bayes_initial_belief(&model, 0, 1),
            Err(Error::ImpossibleSignal { agent: 0, signal: 1 })
        ));
    }

    #[test]
    fn bayes_step_identity() {
        let lik = Likelihood::new(vec![vec![0.5, 0.2, 0.3], vec![0.3, 0.6, 0.3], vec![0.2, 0.2, 0.4]]);
        let prior = vec![0.2, 0.5, 0.3];
        let model = single_agent(lik, prior.clone(), 0);
        // an uninformative signal leaves the belief unchanged
        let uninformative = single_agent(Likelihood::binary(&[0.4, 0.4]), vec![0.3, 0.7], 0);
        let b = bayes_initial_belief(&uninformative, 0, 0).unwrap();
        assert!(close(single_agent_bayes_step(&uninformative, 0, &b, 1).unwrap().log(), b.log(), 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = draw_signals(&model, &mut rng)[0];
        let mut belief = bayes_initial_belief(&model, 0, s).unwrap();
        let mut sums = [0.0; 3];
        for t in 0..500 {
            if t > 0 {
                s = draw_signals(&model, &mut rng)[0];
                belief = single_agent_bayes_step(&model, 0, &belief, s).unwrap();
            }
            for f in 1..3 {
                sums[f] += log_likelihood_ratio(&model, 0, s, f).unwrap();
                let expected = (prior[f] / prior[0]).ln() + sums[f];
                assert!((belief.log_ratio(f, 0) - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_agent_slope_matches_kl() {
        let lik = Likelihood::new(vec![vec![0.8, 0.3], vec![0.2, 0.7]]);
        let model = single_agent(lik, vec![0.5, 0.5], 0);
        let kl = kl_divergence(&model, 0, 0, 1);
        let sim = simulate_beliefs(&model, BeliefMode::Bayes, None, &RunConfig::new(10_000, 8, 5)).unwrap();
        let slopes: Vec<f64> = sim.trials.iter().map(|t| -t.phi(10_000, 0, 1, 0) / 10_000.0).collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        assert!((mean - kl).abs() / kl < 0.05, "{mean} vs {kl}");
        let verdicts: Vec<_> = sim
            .trials
            .iter()
            .map(|t| detect_learning(t, 0, DEFAULT_THRESHOLD, default_window(t.steps())).unwrap())
            .collect();
        assert!(verdicts.iter().all(|v| v[0].learning));
        let pooled = pooled_rate(&verdicts, &[0]).unwrap();
        assert!((pooled - kl).abs() / kl < 0.05, "{pooled} vs {kl}");
    }

    #[test]
    fn bwr_step_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opts = ModelOptions { agents: 3..=3, ..Default::default() };
        for _ in 0..50 {
            let mut model = random_model(&mut rng, &opts);
            model.network = Network::from_edges(3, &[(1, 0), (2, 0), (0, 1)]);
            // neighbors reporting their priors contribute nothing
            let priors: Vec<Belief> = (0..3).map(|j| Belief::from_probabilities(model.prior(j)).unwrap()).collect();
            let refs = [&priors[1], &priors[2]];
            for s in 0..model.likelihood(0).signal_count() {
                let step = bwr_belief_step(&model, 0, &refs, s).unwrap();
                let initial = bayes_initial_belief(&model, 0, s).unwrap();
                assert!(close(step.log(), initial.log(), 1e-12));
            }
            // with a common prior and one neighbor, the step is the relay form
            model.priors = Prior::common(3, model.prior(0).to_vec());
            model.network = Network::directed_circle(3);
            let reported = bayes_initial_belief(&model, 2, 0).unwrap();
            let via_bwr = bwr_belief_step(&model, 0, &[&reported], 1).unwrap();
            let via_circle = circle_step(&model, 0, &reported, 1).unwrap();
            assert!(close(via_bwr.log(), via_circle.log(), 1e-12));
        }
    }

    #[test]
    fn oracle_matches_bwr_step_at_time_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let model = random_model(&mut rng, &ModelOptions::default());
            let signals = draw_signals(&model, &mut rng);
            let initial: Vec<Belief> = (0..model.agents())
                .map(|i| bayes_initial_belief(&model, i, signals[i]).unwrap())
                .collect();
            for i in 0..model.agents() {
                let refs: Vec<&Belief> = model.network.neighbors(i).iter().map(|&j| &initial[j]).collect();
                let s = rng.gen_range(0..model.likelihood(i).signal_count());
                let a = bwr_belief_step(&model, i, &refs, s).unwrap().probabilities();
                let b = time_one_oracle(&model, i, &refs, s, ORACLE_TOLERANCE).unwrap().probabilities();
                assert!(close(&a, &b, 1e-10));
            }
        }
    }

    #[test]
    fn oracle_sums_colliding_signals() {
        // neighbor signals 0 and 1 have proportional likelihood rows
        let neighbor = Likelihood::new(vec![vec![0.1, 0.2], vec![0.2, 0.4], vec![0.7, 0.4]]);
        let own = Likelihood::new(vec![vec![0.6, 0.3], vec![0.4, 0.7]]);
        let model = ModelSpec {
            states: StateSpace::numbered(2),
            signals: SignalStructure { agents: vec![own, neighbor] },
            priors: Prior::uniform(2, 2),
            network: Network::from_edges(2, &[(1, 0)]),
            truth: 0,
        };
        let reported = bayes_initial_belief(&model, 1, 0).unwrap();
        assert_eq!(signals_consistent_with(&model, 1, &reported, ORACLE_TOLERANCE), vec![0, 1]);
        let oracle = time_one_oracle(&model, 0, &[&reported], 0, ORACLE_TOLERANCE).unwrap();
        // ν ℓ_0(0|·) (ℓ_1(0|·) + ℓ_1(1|·)) = 0.5·(0.6·0.3, 0.3·0.6)
        assert!(close(&oracle.probabilities(), &[0.5, 0.5], 1e-15));
        let step = bwr_belief_step(&model, 0, &[&reported], 0).unwrap();
        assert!(close(&oracle.probabilities(), &step.probabilities(), 1e-12));

        let unreachable = Belief::from_probabilities(&[0.99, 0.01]).unwrap();
        assert!(matches!(
            time_one_oracle(&model, 0, &[&unreachable], 0, ORACLE_TOLERANCE),
            Err(Error::UnreachableBelief { agent: 0, neighbor: 1 })
        ));
    }

    #[test]
    fn circle_step_preconditions() {
        let model = example1_model();
        let b = bayes_initial_belief(&model, 0, 0).unwrap();
        // agent 2 is uninformative: relaying leaves the belief as is
        assert!(close(circle_step(&model, 2, &b, 1).unwrap().log(), b.log(), 1e-15));
        let mut k3 = theorem1_model();
        assert!(matches!(circle_step(&k3, 0, &b, 0), Err(Error::InDegreeNotOne { agent: 0, degree: 2 })));
        k3.network = Network::directed_circle(3);
        k3.priors.agents[1] = vec![0.2, 0.4, 0.4];
        assert!(matches!(circle_step(&k3, 0, &b, 0), Err(Error::NoCommonPrior { .. })));
    }

    #[test]
    fn random_neighbor_degenerate_choices() {
        let mut model = theorem1_model();
        let beliefs: Vec<Belief> = (0..3).map(|i| bayes_initial_belief(&model, i, 0).unwrap()).collect();
        let choice = NeighborChoice {
            weights: vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (b, j) = random_neighbor_step(&model, 0, &mut rng, &beliefs, 1, &choice).unwrap();
            assert_eq!(j, 2);
            assert!(close(b.log(), relay_update(&model, 0, &beliefs[2], 1).unwrap().log(), 0.0));
        }
        model.network = Network::from_edges(3, &[(1, 0), (2, 1)]);
        assert!(matches!(
            random_neighbor_step(&model, 2, &mut rng, &beliefs, 0, &choice),
            Err(Error::EmptyNeighborhood { agent: 2 })
        ));
        let bad = NeighborChoice { weights: vec![vec![0.7, 0.7], vec![1.0, 0.0], vec![0.5, 0.5]] };
        assert!(bad.validate(&theorem1_model().network).is_err());
    }

    #[test]
    fn neighbor_chain_stationary_law() {
        let net = Network::from_edges(3, &[(1, 0), (2, 0), (2, 1), (0, 2)]);
        let pi = NeighborChoice::uniform(&net).stationary(&net).unwrap();
        assert!(close(&pi, &[0.4, 0.2, 0.4], 1e-12));
    }

    #[test]
    fn global_stats_examples() {
        let model = theorem1_model();
        let spectral = perron(&model.network).unwrap();
        let beliefs: Vec<Belief> = (0..3).map(|_| bayes_initial_belief(&model, 0, 1).unwrap()).collect();
        let g = global_stats(&model, &spectral, &beliefs, &[1, 1, 1]).unwrap();
        // identical beliefs and a common prior: α sums to 1 so Φ and β are single-agent values
        for (k, &f) in g.false_states.iter().enumerate() {
            assert!((g.phi[k] - beliefs[0].log_ratio(f, 0)).abs() < 1e-12);
            let prior = model.prior(0);
            assert!((g.beta[k] - (prior[f] / prior[0]).ln()).abs() < 1e-12);
        }
        let mut uniform = model.clone();
        uniform.priors = Prior::uniform(3, 3);
        let g = global_stats(&uniform, &spectral, &beliefs, &[0, 0, 0]).unwrap();
        assert!(g.beta.iter().all(|b| *b == 0.0));
    }

    fn check_identities(model: &ModelSpec, horizon: usize, seed: u64) {
        let sim = simulate_beliefs(model, BeliefMode::Full, None, &RunConfig::new(horizon, 3, seed)).unwrap();
        let truth = model.truth;
        for traj in &sim.trials {
            for t in 0..traj.steps() {
                for i in 0..model.agents() {
                    let p: f64 = traj.belief(t, i).probabilities().iter().sum();
                    assert!((p - 1.0).abs() < 1e-10);
                }
            }
            // per-agent log-linear identity
            for t in 1..traj.steps() {
                for i in 0..model.agents() {
                    for f in model.false_states() {
                        let gamma = |j: usize| (model.prior(j)[f] / model.prior(j)[truth]).ln();
                        let s = traj.signals[t * model.agents() + i];
                        let mut expected = gamma(i) + log_likelihood_ratio(model, i, s, f).unwrap();
                        for &j in model.network.neighbors(i) {
                            expected += traj.phi(t - 1, j, f, truth) - gamma(j);
                        }
                        let got = traj.phi(t, i, f, truth);
                        assert!((got - expected).abs() < 1e-9 * expected.abs().max(1.0), "{got} vs {expected}");
                    }
                }
            }
            if let (Some(global), Some(sp)) = (&traj.global, &sim.spectral) {
                for t in 1..global.len() {
                    assert!(recursion_residual(&global[t - 1], &global[t], sp.rho) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn log_linear_identities_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 0..30 {
            let mut model = random_model(&mut rng, &ModelOptions::default());
            if k % 2 == 0 {
                model.network = random_strongly_connected(&mut rng, model.agents(), 0.4);
            }
            check_identities(&model, 15, k);
        }
        check_identities(&theorem1_model(), 40, 99);
    }

    #[test]
    fn horizon_zero_is_initial_beliefs() {
        let model = example1_model();
        let sim = simulate_beliefs(&model, BeliefMode::Circle, None, &RunConfig::new(0, 2, 4)).unwrap();
        for traj in &sim.trials {
            assert_eq!(traj.steps(), 1);
            for i in 0..8 {
                let expected = bayes_initial_belief(&model, i, traj.signals[i]).unwrap();
                assert_eq!(traj.log_belief(0, i), expected.log());
            }
        }
    }

    #[test]
    fn simulation_is_deterministic_and_schedule_free() {
        let model = theorem1_model();
        let par = simulate_beliefs(&model, BeliefMode::RandomNeighbor, None, &RunConfig::new(30, 6, 8)).unwrap();
        let seq =
            simulate_beliefs(&model, BeliefMode::RandomNeighbor, None, &RunConfig::new(30, 6, 8).sequential()).unwrap();
        assert_eq!(par.trials, seq.trials);
        assert!(par.trials[0].choices.as_ref().unwrap().len() == 30 * 3);
    }

    #[test]
    fn mode_preconditions() {
        let cfg = RunConfig::new(3, 1, 0);
        assert!(matches!(
            simulate_beliefs(&theorem1_model(), BeliefMode::Circle, None, &cfg),
            Err(Error::InDegreeNotOne { .. })
        ));
        assert!(matches!(
            simulate_beliefs(&example1_model(), BeliefMode::RandomNeighbor, None, &cfg),
            Err(Error::NotStronglyConnected)
        ));
    }

    #[test]
    fn circles_learn_within_the_predicted_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let opts = ModelOptions { agents: 2..=4, common_prior: true, ..Default::default() };
        let mut tested = 0;
        while tested < 5 {
            let mut model = random_model(&mut rng, &opts);
            model.network = Network::directed_circle(model.agents());
            let rate = learning_rates(&model, None).unwrap().circle.rate;
            if rate < 0.02 {
                continue;
            }
            let horizon = (5.0 / rate * 1e3f64.ln()).ceil() as usize;
            let sim = simulate_beliefs(&model, BeliefMode::Circle, None, &RunConfig::new(horizon, 20, tested)).unwrap();
            for traj in &sim.trials {
                let last = traj.steps() - 1;
                for i in 0..model.agents() {
                    assert!(traj.belief(last, i).prob(model.truth) >= DEFAULT_THRESHOLD);
                }
            }
            tested += 1;
        }
    }

    fn constant_trajectory(belief: &[f64], steps: usize) -> BeliefTrajectory {
        let b = Belief::from_probabilities(belief).unwrap();
        BeliefTrajectory {
            agents: 1,
            states: belief.len(),
            log_beliefs: (0..steps).flat_map(|_| b.log().to_vec()).collect(),
            signals: vec![0; steps],
            choices: None,
            global: None,
        }
    }

    #[test]
    fn detection_on_constant_trajectories() {
        let point = constant_trajectory(&[1.0, 0.0], 50);
        let v = detect_learning(&point, 0, 0.99, 10).unwrap();
        assert!(v[0].learning);
        assert_eq!(v[0].rate, RateEstimate::Saturated);
        let flat = constant_trajectory(&[0.5, 0.5], 50);
        let v = detect_learning(&flat, 0, 0.99, 10).unwrap();
        assert!(!v[0].learning);
        assert_eq!(v[0].rate, RateEstimate::Finite(0.0));
        assert!(detect_learning(&flat, 0, 0.99, 51).is_err());
    }

    #[test]
    fn slope_of_a_line() {
        let ys: Vec<f64> = (0..10).map(|x| 3.0 - 0.5 * x as f64).collect();
        assert!((least_squares_slope(&ys).unwrap() + 0.5).abs() < 1e-14);
        assert_eq!(least_squares_slope(&[1.0]), None);
    }

    #[test]
    fn example1_rates() {
        let report = learning_rates(&example1_model(), None).unwrap();
        assert_eq!(report.root_circle, Some(vec![0, 1, 2]));
        let root = report.root_circle_rate.unwrap();
        // agent 1 separates state 3, agent 2 separates state 2
        let kl_a = (1.0 / 3.0) * (5.0f64 / 3.0).ln() + (2.0 / 3.0) * (5.0f64 / 6.0).ln();
        let kl_b = 0.5 * (0.5f64 / (2.0 / 3.0)).ln() + 0.5 * (0.5f64 / (1.0 / 3.0)).ln();
        assert!((root.rate - kl_a.min(kl_b) / 3.0).abs() < 1e-12);
        assert_eq!(root.binding_state, if kl_a < kl_b { 2 } else { 1 });
        assert!(report.random_walk.is_none());
    }

    #[test]
    fn uninformative_rates_vanish_and_order_holds() {
        let model = single_agent(Likelihood::binary(&[0.3, 0.3]), vec![0.5, 0.5], 0);
        let r = learning_rates(&model, None).unwrap();
        assert_eq!((r.centralized.rate, r.circle.rate, r.average_individual), (0.0, 0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let model = random_model(&mut rng, &ModelOptions::default());
            let r = learning_rates(&model, None).unwrap();
            assert!(r.average_individual <= r.circle.rate && r.circle.rate <= r.centralized.rate);
        }
    }
}
