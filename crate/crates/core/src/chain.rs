//! Exact analysis of the Markov chain that the action dynamics induce on
//! `{±1}^n`.
//!
//! Profiles are bitmasks: bit `i` is set iff agent `i` plays `+1`. Kernel
//! rows are sources and columns destinations, so `row(src)[dst]` is the
//! probability of moving from `src` to `dst` in one step.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::graph::tarjan_scc;
use crate::ising::{action_bit, require_binary, IsingConstants};
use crate::model::ModelSpec;
use crate::stochastic::stationary_law;

/// Largest agent count with a dense `2^n × 2^n` kernel.
pub const KERNEL_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    agents: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn from_rows(agents: usize, rows: Vec<Vec<f64>>) -> Self {
        Kernel {
            agents,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn size(&self) -> usize {
        1 << self.agents
    }

    pub fn row(&self, src: usize) -> &[f64] {
        let size = self.size();
        &self.data[src * size..(src + 1) * size]
    }

    /// `P(dst, src)`, the probability of `dst` at `t + 1` given `src` at `t`.
    pub fn prob(&self, dst: usize, src: usize) -> f64 {
        self.data[src * self.size() + dst]
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        (0..self.size())
            .map(|src| {
                self.row(src)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(dst, _)| dst)
                    .collect()
            })
            .collect()
    }

    /// Profiles with `P(a, a) = 1`.
    pub fn absorbing(&self) -> Vec<usize> {
        (0..self.size()).filter(|&a| self.prob(a, a) == 1.0).collect()
    }
}

fn supported_signals(model: &ModelSpec, agent: usize) -> impl Iterator<Item = usize> + '_ {
    let lik = model.likelihood(agent);
    (0..lik.signal_count()).filter(move |&s| lik.prob(s, model.truth) > 0.0)
}

/// Probability over the agent's fresh signal that it plays `+1` next, given
/// the current profile. Exactly 1 (or 0) when every (or no) signal with
/// positive probability under the truth passes the threshold.
pub fn activation_probability(model: &ModelSpec, constants: &IsingConstants, profile: &[i8], agent: usize) -> f64 {
    let field = constants.field(model, agent, profile);
    let lik = model.likelihood(agent);
    let (mut pass, mut fail, mut mass) = (0usize, 0usize, 0.0);
    for s in supported_signals(model, agent) {
        if field + constants.lambda[agent][s] >= 0.0 {
            pass += 1;
            mass += lik.prob(s, model.truth);
        } else {
            fail += 1;
        }
    }
    match (pass, fail) {
        (_, 0) => 1.0,
        (0, _) => 0.0,
        _ => mass,
    }
}

/// Law over destinations when agent `i` independently plays `+1` with
/// probability `plus[i]`.
fn product_law(plus: &[f64]) -> Vec<f64> {
    let mut law = vec![1.0];
    for &p in plus {
        let mut next = vec![0.0; law.len() * 2];
        let high = law.len();
        for (mask, &q) in law.iter().enumerate() {
            next[mask] = q * (1.0 - p);
            next[mask | high] = q * p;
        }
        law = next;
    }
    law
}

fn check_capacity(model: &ModelSpec) -> Result<()> {
    require_binary(model)?;
    if model.agents() > KERNEL_CAP {
        return Err(Error::KernelCapacity {
            agents: model.agents(),
            cap: KERNEL_CAP,
        });
    }
    Ok(())
}

pub fn transition_kernel(model: &ModelSpec, constants: &IsingConstants) -> Result<Kernel> {
    transition_kernel_with(model, constants, Execution::default())
}

/// Kernel construction, one row per source profile (rows in parallel).
pub fn transition_kernel_with(model: &ModelSpec, constants: &IsingConstants, execution: Execution) -> Result<Kernel> {
    check_capacity(model)?;
    let n = model.agents();
    let rows = map_indexed(execution, 1 << n, |src| {
        let profile: Vec<i8> = (0..n).map(|i| action_bit(src, i)).collect();
        let plus: Vec<f64> = (0..n)
            .map(|i| activation_probability(model, constants, &profile, i))
            .collect();
        product_law(&plus)
    });
    Ok(Kernel::from_rows(n, rows))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateClasses {
    pub transient: Vec<Vec<usize>>,
    pub recurrent: Vec<Vec<usize>>,
}

impl StateClasses {
    /// Recurrent class index of each profile, `None` for transient profiles.
    pub fn recurrent_index(&self, size: usize) -> Vec<Option<usize>> {
        let mut index = vec![None; size];
        for (c, class) in self.recurrent.iter().enumerate() {
            for &a in class {
                index[a] = Some(c);
            }
        }
        index
    }
}

/// Communication classes of the positive-transition digraph; a class is
/// recurrent iff no positive transition leaves it. Classes are sorted by
/// their smallest profile.
pub fn classify_states(kernel: &Kernel) -> StateClasses {
    let successors = kernel.successors();
    let components = tarjan_scc(&successors);
    let mut owner = vec![0; kernel.size()];
    for (c, comp) in components.iter().enumerate() {
        for &a in comp {
            owner[a] = c;
        }
    }
    let mut transient = Vec::new();
    let mut recurrent = Vec::new();
    for (c, comp) in components.into_iter().enumerate() {
        let closed = comp.iter().all(|&a| successors[a].iter().all(|&b| owner[b] == c));
        if closed {
            recurrent.push(comp);
        } else {
            transient.push(comp);
        }
    }
    transient.sort();
    recurrent.sort();
    StateClasses { transient, recurrent }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquilibriumReport {
    /// Profiles satisfying the characterization with ties counted in favor
    /// of the equilibrium.
    pub equilibria: Vec<usize>,
    /// Equilibria that hinge on an exactly-zero vote for an agent playing
    /// `−1`; under `sign(0) = +1` these are not absorbing.
    pub tie_dependent: Vec<usize>,
}

/// Profiles `a*` with `a*_i (λ_1(s) + η_i + Σ_{j∈N(i)} w_j a*_j) ≥ 0` for every
/// agent and every signal that can occur under the truth.
pub fn equilibria_by_inequality(model: &ModelSpec, constants: &IsingConstants) -> Result<EquilibriumReport> {
    check_capacity(model)?;
    let n = model.agents();
    let mut equilibria = Vec::new();
    let mut tie_dependent = Vec::new();
    for mask in 0..1usize << n {
        let profile: Vec<i8> = (0..n).map(|i| action_bit(mask, i)).collect();
        let mut holds = true;
        let mut tie = false;
        'agents: for i in 0..n {
            let field = constants.field(model, i, &profile);
            let a = f64::from(profile[i]);
            for s in supported_signals(model, i) {
                let x = field + constants.lambda[i][s];
                if a * x < 0.0 {
                    holds = false;
                    break 'agents;
                }
                if x == 0.0 && profile[i] < 0 {
                    tie = true;
                }
            }
        }
        if holds {
            equilibria.push(mask);
            if tie {
                tie_dependent.push(mask);
            }
        }
    }
    Ok(EquilibriumReport {
        equilibria,
        tie_dependent,
    })
}

/// Strict consensus condition: `max_s |λ_1(s) + η_i| < Σ_{j∈N(i)} w_j` for all `i`.
pub fn consensus_equilibrium_check(model: &ModelSpec, constants: &IsingConstants) -> Result<bool> {
    require_binary(model)?;
    Ok((0..model.agents()).all(|i| {
        let total: f64 = model.network.neighbors(i).iter().map(|&j| constants.w[j]).sum();
        supported_signals(model, i).all(|s| (constants.lambda[i][s] + constants.eta[i]).abs() < total)
    }))
}

fn restrict(kernel: &Kernel, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| kernel.prob(cols[c], rows[r]))
}

/// Stationary law of the kernel restricted to a recurrent class, in the
/// class's profile order.
pub fn stationary_distribution(kernel: &Kernel, class: &[usize]) -> Result<Vec<f64>> {
    let leak: f64 = class
        .iter()
        .map(|&a| 1.0 - class.iter().map(|&b| kernel.prob(b, a)).sum::<f64>())
        .fold(0.0, f64::max);
    if leak > 1e-9 {
        return Err(Error::Precondition(format!(
            "class is not closed (probability {leak:e} leaves it)"
        )));
    }
    stationary_law(&restrict(kernel, class, class))
}

/// Probability of first reaching each recurrent class from every profile
/// (rows: profiles, columns: recurrent classes).
pub fn absorption_matrix(kernel: &Kernel, classes: &StateClasses) -> Result<Vec<Vec<f64>>> {
    let size = kernel.size();
    let r = classes.recurrent.len();
    let owner = classes.recurrent_index(size);
    let transient: Vec<usize> = (0..size).filter(|&a| owner[a].is_none()).collect();
    let mut out = vec![vec![0.0; r]; size];
    for (a, o) in owner.iter().enumerate() {
        if let Some(c) = o {
            out[a][*c] = 1.0;
        }
    }
    if transient.is_empty() {
        return Ok(out);
    }
    let t = transient.len();
    // (I − Q) X = R on the chain with each recurrent class collapsed
    let q = restrict(kernel, &transient, &transient);
    let lhs = DMatrix::identity(t, t) - q;
    let rhs = DMatrix::from_fn(t, r, |row, c| {
        classes.recurrent[c].iter().map(|&b| kernel.prob(b, transient[row])).sum()
    });
    let x = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular fundamental matrix".into()))?;
    for (row, &a) in transient.iter().enumerate() {
        for c in 0..r {
            out[a][c] = x[(row, c)].clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Probability that the first recurrent class reached is each `C_k`, from
/// the initial law `initial` over profiles.
pub fn absorption_analysis(kernel: &Kernel, classes: &StateClasses, initial: &[f64]) -> Result<Vec<f64>> {
    let matrix = absorption_matrix(kernel, classes)?;
    let mut out = vec![0.0; classes.recurrent.len()];
    for (row, &mass) in matrix.iter().zip(initial) {
        for (o, p) in out.iter_mut().zip(row) {
            *o += mass * p;
        }
    }
    Ok(out)
}

/// Exact law of the time-zero profile.
pub fn initial_profile_distribution(model: &ModelSpec, constants: &IsingConstants) -> Result<Vec<f64>> {
    check_capacity(model)?;
    let plus: Vec<f64> = (0..model.agents())
        .map(|i| {
            let prior = model.prior(i);
            let bias = (prior[0] / prior[1]).ln();
            let lik = model.likelihood(i);
            let (mut pass, mut fail, mut mass) = (0, 0, 0.0);
            for s in supported_signals(model, i) {
                if bias + constants.lambda[i][s] >= 0.0 {
                    pass += 1;
                    mass += lik.prob(s, model.truth);
                } else {
                    fail += 1;
                }
            }
            match (pass, fail) {
                (_, 0) => 1.0,
                (0, _) => 0.0,
                _ => mass,
            }
        })
        .collect();
    Ok(product_law(&plus))
}

/// Kernel plus its derived structure.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub kernel: Kernel,
    pub classes: StateClasses,
    pub equilibria: Vec<usize>,
}

pub fn analyze(model: &ModelSpec, constants: &IsingConstants) -> Result<ChainAnalysis> {
    let kernel = transition_kernel(model, constants)?;
    let classes = classify_states(&kernel);
    let equilibria = kernel.absorbing();
    Ok(ChainAnalysis {
        kernel,
        classes,
        equilibria,
    })
}

fn profile_vec(mask: usize, n: usize) -> Vec<i8> {
    (0..n).map(|i| action_bit(mask, i)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrentClassReport {
    pub profiles: Vec<Vec<i8>>,
    pub masks: Vec<usize>,
    pub stationary: Vec<f64>,
    pub absorption_probability: Vec<f64>,
}

/// JSON-ready summary of the chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub agents: usize,
    pub equilibria: Vec<Vec<i8>>,
    pub equilibria_by_inequality: Vec<Vec<i8>>,
    pub tie_dependent_equilibria: Vec<Vec<i8>>,
    pub consensus_equilibrium: bool,
    pub transient_classes: Vec<Vec<Vec<i8>>>,
    pub recurrent_classes: Vec<RecurrentClassReport>,
    pub initial_distribution: Vec<f64>,
    /// Rows: profiles by mask; columns: recurrent classes.
    pub absorption_matrix: Vec<Vec<f64>>,
}

pub fn chain_report(model: &ModelSpec, constants: &IsingConstants) -> Result<ChainReport> {
    let n = model.agents();
    let analysis = analyze(model, constants)?;
    let by_inequality = equilibria_by_inequality(model, constants)?;
    let initial = initial_profile_distribution(model, constants)?;
    let matrix = absorption_matrix(&analysis.kernel, &analysis.classes)?;
    let reach = absorption_analysis(&analysis.kernel, &analysis.classes, &initial)?;
    let recurrent_classes = analysis
        .classes
        .recurrent
        .iter()
        .zip(&reach)
        .map(|(class, &p)| {
            Ok(RecurrentClassReport {
                profiles: class.iter().map(|&a| profile_vec(a, n)).collect(),
                masks: class.clone(),
                stationary: stationary_distribution(&analysis.kernel, class)?,
                absorption_probability: vec![p],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let vecs = |masks: &[usize]| masks.iter().map(|&a| profile_vec(a, n)).collect::<Vec<_>>();
    Ok(ChainReport {
        agents: n,
        equilibria: vecs(&analysis.equilibria),
        equilibria_by_inequality: vecs(&by_inequality.equilibria),
        tie_dependent_equilibria: vecs(&by_inequality.tie_dependent),
        consensus_equilibrium: consensus_equilibrium_check(model, constants)?,
        transient_classes: analysis.classes.transient.iter().map(|c| vecs(c)).collect(),
        recurrent_classes,
        initial_distribution: initial,
        absorption_matrix: matrix,
    })
}

/// Kernel as CSV: header `src,dst_0,..`, one row per source mask.
pub fn kernel_csv(kernel: &Kernel) -> String {
    let mut out = String::from("src");
    for dst in 0..kernel.size() {
        out.push_str(&format!(",dst_{dst}"));
    }
    out.push('\n');
    for src in 0..kernel.size() {
        out.push_str(&src.to_string());
        for p in kernel.row(src) {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out
}
