//! Problem instances: states, per-agent signal structures and priors, the
//! directed network, and the index of the true state.
//!
//! Agents are indexed `0..n` and states `0..m`. Likelihood matrices are
//! stored row-major with rows indexed by signal and columns by state, so
//! `likelihood[s][k]` is the probability of signal `s` under state `k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for likelihood columns and priors.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub labels: Vec<String>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        StateSpace {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    /// States labelled `"1"..="m"`.
    pub fn numbered(m: usize) -> Self {
        StateSpace::new((1..=m).map(|k| k.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One agent's likelihood matrix `ℓ_i(s | θ̂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Likelihood {
    pub rows: Vec<Vec<f64>>,
}

impl Likelihood {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        Likelihood { rows }
    }

    /// Build from per-state columns (each column a distribution over signals).
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let signals = columns.first().map_or(0, Vec::len);
        let rows = (0..signals)
            .map(|s| columns.iter().map(|c| c[s]).collect())
            .collect();
        Likelihood { rows }
    }

    /// Two-signal structure from `P(s = 0 | θ̂)` per state.
    pub fn binary(p_zero: &[f64]) -> Self {
        Likelihood {
            rows: vec![p_zero.to_vec(), p_zero.iter().map(|p| 1.0 - p).collect()],
        }
    }

    pub fn signal_count(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn prob(&self, signal: usize, state: usize) -> f64 {
        self.rows[signal][state]
    }

    pub fn column(&self, state: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[state]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalStructure {
    pub agents: Vec<Likelihood>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub agents: Vec<Vec<f64>>,
}

impl Prior {
    pub fn common(n: usize, belief: Vec<f64>) -> Self {
        Prior {
            agents: vec![belief; n],
        }
    }

    pub fn uniform(n: usize, m: usize) -> Self {
        Prior::common(n, vec![1.0 / m as f64; m])
    }

    /// `true` when every agent holds the same prior (to within `SUM_TOLERANCE`).
    pub fn common_mismatch(&self) -> Option<(usize, usize)> {
        let first = self.agents.first()?;
        self.agents.iter().enumerate().skip(1).find_map(|(i, p)| {
            let differs = p.len() != first.len()
                || p.iter().zip(first).any(|(a, b)| (a - b).abs() > SUM_TOLERANCE);
            differs.then_some((0, i))
        })
    }
}

/// Directed network. `in_neighbors[i]` is `N(i)`, the agents whose reports
/// agent `i` observes; `[A]_ij = 1` iff `j ∈ N(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub in_neighbors: Vec<Vec<usize>>,
}

impl Network {
    /// From `(j, i)` pairs meaning `j` is an in-neighbor of `i`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut in_neighbors = vec![Vec::new(); n];
        for &(j, i) in edges {
            if i < n {
                in_neighbors[i].push(j);
            }
        }
        for list in &mut in_neighbors {
            list.sort_unstable();
        }
        Network { in_neighbors }
    }

    /// Directed circle in which agent `i` listens to `i - 1 (mod n)`.
    pub fn directed_circle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| ((i + n - 1) % n, i)).collect();
        Network::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (j, i)))
            .collect();
        Network::from_edges(n, &edges)
    }

    pub fn empty(n: usize) -> Self {
        Network {
            in_neighbors: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.in_neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_neighbors.is_empty()
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.in_neighbors[agent]
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.in_neighbors[agent].len()
    }

    /// `(j, i)` pairs in ascending `(i, j)` order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.in_neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().map(move |&j| (j, i)))
            .collect()
    }

    /// Out-neighbor lists: `out[j]` holds every `i` with `j ∈ N(i)`.
    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for (i, ns) in self.in_neighbors.iter().enumerate() {
            for &j in ns {
                if j < out.len() {
                    out[j].push(i);
                }
            }
        }
        out
    }

    pub fn adjacency(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for (i, ns) in self.in_neighbors.iter().enumerate() {
            for &j in ns {
                a[i][j] = 1.0;
            }
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub states: StateSpace,
    pub signals: SignalStructure,
    pub priors: Prior,
    pub network: Network,
    pub truth: usize,
}

/// One invariant violation, located by a human-readable path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl ModelSpec {
    pub fn agents(&self) -> usize {
        self.network.len()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn likelihood(&self, agent: usize) -> &Likelihood {
        &self.signals.agents[agent]
    }

    pub fn prior(&self, agent: usize) -> &[f64] {
        &self.priors.agents[agent]
    }

    /// Every false state, in ascending order.
    pub fn false_states(&self) -> Vec<usize> {
        (0..self.state_count()).filter(|&k| k != self.truth).collect()
    }

    /// Returns the model if it passes [`validate`], otherwise every violation.
    pub fn validated(self) -> Result<Self> {
        let violations = validate(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(
                violations.iter().map(ToString::to_string).collect(),
            ))
        }
    }

    pub(crate) fn check_agent(&self, agent: usize) -> Result<()> {
        if agent < self.agents() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "agent",
                index: agent,
                limit: self.agents(),
            })
        }
    }

    pub(crate) fn check_state(&self, state: usize) -> Result<()> {
        if state < self.state_count() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "state",
                index: state,
                limit: self.state_count(),
            })
        }
    }

    pub(crate) fn check_signal(&self, agent: usize, signal: usize) -> Result<()> {
        let count = self.likelihood(agent).signal_count();
        if signal < count {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: "signal",
                index: signal,
                limit: count,
            })
        }
    }
}

/// Every invariant violation of `model`; empty iff the model is valid.
fn rounded(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

pub fn validate(model: &ModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |location: String, message: String| out.push(Violation { location, message });

    let m = model.states.len();
    if m < 2 {
        push("states".into(), format!("need at least 2 states, found {m}"));
    }
    for (k, label) in model.states.labels.iter().enumerate() {
        if model.states.labels[..k].contains(label) {
            push(format!("states[{k}]"), format!("duplicate label {label:?}"));
        }
    }
    if model.truth >= m {
        push(
            "truth".into(),
            format!("state index {} out of range for {m} states", model.truth),
        );
    }

    let n = model.network.len();
    if model.signals.agents.len() != n {
        push(
            "signals".into(),
            format!("{} likelihood matrices for {n} agents", model.signals.agents.len()),
        );
    }
    if model.priors.agents.len() != n {
        push(
            "priors".into(),
            format!("{} priors for {n} agents", model.priors.agents.len()),
        );
    }

    for (i, lik) in model.signals.agents.iter().enumerate() {
        if lik.rows.is_empty() {
            push(format!("agent {i} likelihood"), "no signals".into());
            continue;
        }
        let mut ragged = false;
        for (s, row) in lik.rows.iter().enumerate() {
            if row.len() != m {
                push(
                    format!("agent {i} likelihood signal {s}"),
                    format!("{} entries for {m} states", row.len()),
                );
                ragged = true;
            }
            for (k, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    push(
                        format!("agent {i} likelihood signal {s} state {k}"),
                        format!("probability {p} outside [0, 1]"),
                    );
                }
            }
        }
        if ragged {
            continue;
        }
        for k in 0..m {
            let sum: f64 = lik.rows.iter().map(|r| r[k]).sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                push(
                    format!("agent {i} likelihood state {k}"),
                    format!("column sums to {}, expected 1", rounded(sum)),
                );
            }
        }
    }

    for (i, prior) in model.priors.agents.iter().enumerate() {
        if prior.len() != m {
            push(
                format!("agent {i} prior"),
                format!("{} entries for {m} states", prior.len()),
            );
            continue;
        }
        for (k, &p) in prior.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                push(
                    format!("agent {i} prior state {k}"),
                    format!("probability {p} violates full support"),
                );
            }
        }
        let sum: f64 = prior.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            push(
                format!("agent {i} prior"),
                format!("sums to {}, expected 1", rounded(sum)),
            );
        }
    }

    for (i, ns) in model.network.in_neighbors.iter().enumerate() {
        for (pos, &j) in ns.iter().enumerate() {
            if j >= n {
                push(
                    format!("network edge {j}->{i}"),
                    format!("agent {j} out of range for {n} agents"),
                );
            } else if j == i {
                push(format!("network edge {j}->{i}"), "self-loop".into());
            } else if ns[..pos].contains(&j) {
                push(format!("network edge {j}->{i}"), "duplicate edge".into());
            }
        }
    }
    out
}

/// Draws one signal for `agent` under the model's true state by inverse CDF
/// on a single uniform `[0, 1)` variate, scanning signals in ascending order.
pub fn sample_signal<R: Rng + ?Sized>(model: &ModelSpec, agent: usize, rng: &mut R) -> usize {
    let lik = model.likelihood(agent);
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut last_supported = 0;
    for (s, row) in lik.rows.iter().enumerate() {
        let p = row[model.truth];
        if p > 0.0 {
            cumulative += p;
            last_supported = s;
            if u < cumulative {
                return s;
            }
        }
    }
    // rounding left the cumulative sum just below 1
    last_supported
}

/// One signal per agent, drawn in ascending agent order.
pub fn draw_signals<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> Vec<usize> {
    (0..model.agents())
        .map(|i| sample_signal(model, i, rng))
        .collect()
}

/// `λ_θ̌(s) = log(ℓ_i(s|θ̌) / ℓ_i(s|θ))` against the model's truth. Returns
/// `-∞` when the signal is impossible under `false_state`.
pub fn log_likelihood_ratio(
    model: &ModelSpec,
    agent: usize,
    signal: usize,
    false_state: usize,
) -> Result<f64> {
    model.check_agent(agent)?;
    model.check_signal(agent, signal)?;
    model.check_state(false_state)?;
    let lik = model.likelihood(agent);
    let truth = lik.prob(signal, model.truth);
    if truth <= 0.0 {
        return Err(Error::TruthImpossibleSignal { agent, signal });
    }
    let other = lik.prob(signal, false_state);
    if other <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if other == truth {
        return Ok(0.0);
    }
    Ok((other / truth).ln())
}

/// `D_KL(ℓ_i(·|true_state) || ℓ_i(·|false_state))`; `+∞` when the support of
/// the first is not contained in the support of the second.
pub fn kl_divergence(model: &ModelSpec, agent: usize, true_state: usize, false_state: usize) -> f64 {
    let lik = model.likelihood(agent);
    kl_between(&lik.column(true_state), &lik.column(false_state))
}

/// KL divergence between two distributions over the same finite set.
pub fn kl_between(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 || pi == qi {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi / qi).ln();
    }
    // individual terms can be negative; the sum is not, up to rounding
    total.max(0.0)
}
