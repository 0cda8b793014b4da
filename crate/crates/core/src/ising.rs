//! Binary-state, binary-action dynamics: every agent plays the sign of a
//! weighted vote of its neighbors' previous actions plus a private-signal
//! threshold term.
//!
//! State index 0 is `θ_1` (action `+1`) and state index 1 is `θ_2` (action
//! `−1`), regardless of which of the two is the truth. `λ_1(s)` always means
//! `log(ℓ(s|θ_1) / ℓ(s|θ_2))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, trial_rng, RunConfig};
use crate::model::{draw_signals, ModelSpec};

/// Arguments of `sign` closer to zero than this are recorded as near ties.
pub const NEAR_TIE: f64 = 1e-9;

/// `sign` with `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Vertex of `{±1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ActionProfile(pub Vec<i8>);

impl ActionProfile {
    pub fn constant(n: usize, action: i8) -> Self {
        ActionProfile(vec![action; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit `i` set iff agent `i` plays `+1`.
    pub fn to_mask(&self) -> usize {
        mask_of(&self.0)
    }

    pub fn from_mask(mask: usize, n: usize) -> Self {
        ActionProfile((0..n).map(|i| action_bit(mask, i)).collect())
    }
}

pub fn mask_of(actions: &[i8]) -> usize {
    actions
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .fold(0, |m, (i, _)| m | (1 << i))
}

#[inline]
pub fn action_bit(mask: usize, agent: usize) -> i8 {
    if mask >> agent & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Partition of an agent's signals by the sign of its time-zero action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dichotomy {
    /// Signals leading to `+1`: `ℓ(s|θ_1)ν(θ_1) ≥ ℓ(s|θ_2)ν(θ_2)`.
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsingConstants {
    pub dichotomy: Vec<Dichotomy>,
    /// `V_i`, built from the signal structures of `N(i)`.
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    /// `W_i`, agent `i`'s weight as seen by its out-neighbors.
    #[serde(rename = "W")]
    pub w_ratio: Vec<f64>,
    /// `w_i = log W_i`.
    pub w: Vec<f64>,
    /// `η_i = log(ν_i(θ_1)/ν_i(θ_2)) + log V_i`.
    pub eta: Vec<f64>,
    /// `λ_1(s)` per agent and signal; NaN for signals impossible under both states.
    #[serde(skip)]
    pub lambda: Vec<Vec<f64>>,
}

impl IsingConstants {
    /// Agents whose action carries no information (`w_i = 0`).
    pub fn uninformative(&self) -> Vec<usize> {
        (0..self.w.len()).filter(|&i| self.w[i] == 0.0).collect()
    }

    /// `Σ_{j ∈ N(i)} w_j a_j + η_i`, the deterministic part of the vote.
    pub fn field(&self, model: &ModelSpec, agent: usize, actions: &[i8]) -> f64 {
        model
            .network
            .neighbors(agent)
            .iter()
            .fold(self.eta[agent], |acc, &j| acc + self.w[j] * f64::from(actions[j]))
    }
}

pub(crate) fn require_binary(model: &ModelSpec) -> Result<()> {
    match model.state_count() {
        2 => Ok(()),
        states => Err(Error::NotBinary { states }),
    }
}

/// `log(ℓ(s|θ_1)/ℓ(s|θ_2))` with ±∞ for one-sided zeros.
pub fn lambda_one(model: &ModelSpec, agent: usize, signal: usize) -> f64 {
    let lik = model.likelihood(agent);
    let (p1, p2) = (lik.prob(signal, 0), lik.prob(signal, 1));
    match (p1 > 0.0, p2 > 0.0) {
        (true, true) if p1 == p2 => 0.0,
        (true, true) => p1.ln() - p2.ln(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => f64::NAN,
    }
}

pub fn signal_dichotomy(model: &ModelSpec, agent: usize) -> Result<Dichotomy> {
    require_binary(model)?;
    model.check_agent(agent)?;
    let lik = model.likelihood(agent);
    let prior = model.prior(agent);
    let (plus, minus) = (0..lik.signal_count())
        .partition(|&s| lik.prob(s, 0) * prior[0] >= lik.prob(s, 1) * prior[1]);
    Ok(Dichotomy { plus, minus })
}

/// `Σ_{s ∈ cell} ℓ(s|θ_1) / Σ_{s ∈ cell} ℓ(s|θ_2)`; `None` for a cell with
/// no mass under either state.
fn cell_ratio(model: &ModelSpec, agent: usize, cell: &[usize], sign: i8) -> Result<Option<f64>> {
    let lik = model.likelihood(agent);
    let m1: f64 = cell.iter().map(|&s| lik.prob(s, 0)).sum();
    let m2: f64 = cell.iter().map(|&s| lik.prob(s, 1)).sum();
    match (m1 > 0.0, m2 > 0.0) {
        (true, true) => Ok(Some(m1 / m2)),
        (false, false) => Ok(None),
        (false, true) => Err(Error::DegenerateDichotomy {
            agent,
            cell: sign,
            state: 0,
        }),
        (true, false) => Err(Error::DegenerateDichotomy {
            agent,
            cell: sign,
            state: 1,
        }),
    }
}

/// `(W_j, sqrt(R_{+1} R_{−1}))` for one agent: its weight and its factor in
/// its out-neighbors' `V`.
fn weight_and_bias(model: &ModelSpec, agent: usize, dichotomy: &Dichotomy) -> Result<(f64, f64)> {
    let plus = cell_ratio(model, agent, &dichotomy.plus, 1)?;
    let minus = cell_ratio(model, agent, &dichotomy.minus, -1)?;
    Ok(match (plus, minus) {
        (Some(a), Some(b)) => ((a / b).sqrt(), (a * b).sqrt()),
        // the action is deterministic and its ratio is the only one that occurs
        (Some(r), None) | (None, Some(r)) => (1.0, r),
        (None, None) => unreachable!("likelihood columns carry unit mass"),
    })
}

pub fn ising_constants(model: &ModelSpec) -> Result<IsingConstants> {
    require_binary(model)?;
    let n = model.agents();
    let dichotomy = (0..n)
        .map(|i| signal_dichotomy(model, i))
        .collect::<Result<Vec<_>>>()?;
    let observed: Vec<bool> = model.network.out_neighbors().iter().map(|o| !o.is_empty()).collect();

    let mut w_ratio = Vec::with_capacity(n);
    let mut bias = Vec::with_capacity(n);
    for (j, d) in dichotomy.iter().enumerate() {
        match weight_and_bias(model, j, d) {
            Ok((wr, b)) => {
                w_ratio.push(wr);
                bias.push(b);
            }
            Err(e) if observed[j] => return Err(e),
            // nobody reads this agent's action
            Err(_) => {
                w_ratio.push(f64::INFINITY);
                bias.push(f64::NAN);
            }
        }
    }

    let v: Vec<f64> = (0..n)
        .map(|i| model.network.neighbors(i).iter().map(|&j| bias[j]).product())
        .collect();
    let eta = (0..n)
        .map(|i| {
            let prior = model.prior(i);
            (prior[0] / prior[1]).ln() + v[i].ln()
        })
        .collect();
    let w = w_ratio.iter().map(|wr| wr.ln()).collect();
    let lambda = (0..n)
        .map(|i| {
            (0..model.likelihood(i).signal_count())
                .map(|s| lambda_one(model, i, s))
                .collect()
        })
        .collect();
    Ok(IsingConstants {
        dichotomy,
        v,
        w_ratio,
        w,
        eta,
        lambda,
    })
}

/// Time-zero action: `sign(log(ν_i(θ_1)/ν_i(θ_2)) + λ_1(s))`.
pub fn initial_action(model: &ModelSpec, constants: &IsingConstants, agent: usize, signal: usize) -> i8 {
    let prior = model.prior(agent);
    sign((prior[0] / prior[1]).ln() + constants.lambda[agent][signal])
}

/// Arguments of `sign` for every agent's next action.
pub fn vote_arguments(
    model: &ModelSpec,
    constants: &IsingConstants,
    profile: &[i8],
    signals: &[usize],
) -> Vec<f64> {
    (0..model.agents())
        .map(|i| constants.field(model, i, profile) + constants.lambda[i][signals[i]])
        .collect()
}

/// One synchronous step: every agent reads the same previous profile.
pub fn step_actions(
    model: &ModelSpec,
    constants: &IsingConstants,
    profile: &ActionProfile,
    signals: &[usize],
) -> ActionProfile {
    ActionProfile(
        vote_arguments(model, constants, &profile.0, signals)
            .into_iter()
            .map(sign)
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearTie {
    pub t: usize,
    pub agent: usize,
    pub argument: f64,
}

/// One trial's profiles for `t = 0..=horizon`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTrajectory {
    pub agents: usize,
    pub actions: Vec<i8>,
    pub near_ties: Vec<NearTie>,
}

impl ActionTrajectory {
    pub fn steps(&self) -> usize {
        self.actions.len().checked_div(self.agents).unwrap_or(0)
    }

    pub fn profile(&self, t: usize) -> &[i8] {
        &self.actions[t * self.agents..(t + 1) * self.agents]
    }

    pub fn mask(&self, t: usize) -> usize {
        mask_of(self.profile(t))
    }

    pub fn last(&self) -> &[i8] {
        self.profile(self.steps() - 1)
    }
}

/// Monte Carlo runs of the action dynamics: signals are drawn for every
/// agent at every step (agents ascending), `t = 0` uses the initial rule and
/// later steps the weighted vote.
pub fn simulate_actions(
    model: &ModelSpec,
    constants: &IsingConstants,
    config: &RunConfig,
) -> Result<Vec<ActionTrajectory>> {
    require_binary(model)?;
    Ok(map_indexed(config.execution, config.trials, |trial| {
        run_trial(model, constants, config, trial)
    }))
}

fn run_trial(model: &ModelSpec, constants: &IsingConstants, config: &RunConfig, trial: usize) -> ActionTrajectory {
    let n = model.agents();
    let mut rng = trial_rng(config.seed, trial);
    let mut actions = Vec::with_capacity(n * (config.horizon + 1));
    let mut near_ties = Vec::new();

    let signals = draw_signals(model, &mut rng);
    for (i, &s) in signals.iter().enumerate() {
        let prior = model.prior(i);
        let argument = (prior[0] / prior[1]).ln() + constants.lambda[i][s];
        if argument.abs() < NEAR_TIE {
            near_ties.push(NearTie { t: 0, agent: i, argument });
        }
        actions.push(sign(argument));
    }
    for t in 1..=config.horizon {
        let signals = draw_signals(model, &mut rng);
        let previous = (t - 1) * n;
        for (i, &s) in signals.iter().enumerate() {
            let argument = constants.field(model, i, &actions[previous..previous + n]) + constants.lambda[i][s];
            if argument.abs() < NEAR_TIE {
                near_ties.push(NearTie { t, agent: i, argument });
            }
            actions.push(sign(argument));
        }
    }
    ActionTrajectory {
        agents: n,
        actions,
        near_ties,
    }
}

/// `log V_i` written as cell masses of each neighbor: `½ Σ_j [log m⁺₁ +
/// log m⁻₁ − log m⁺₂ − log m⁻₂]`, where `m^c_k` is the mass of cell `c` under
/// state `k`. Takes raw (possibly unnormalized) masses.
pub fn log_v_from_masses(masses: &[[f64; 4]]) -> f64 {
    masses
        .iter()
        .map(|[p1, m1, p2, m2]| 0.5 * (p1.ln() + m1.ln() - p2.ln() - m2.ln()))
        .sum()
}
