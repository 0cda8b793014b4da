//! Canonical model instances used by the built-in scenarios and the tests.

use crate::model::{Likelihood, ModelSpec, Network, Prior, SignalStructure, StateSpace};

/// Peripheral wiring of the eight-agent example: `(from, to)` with `from` an
/// in-neighbor of `to`. Agents 0..3 form the root circle 0 → 1 → 2 → 0; the
/// peripherals hang off it with in-degree one, agent 7 at depth three.
pub const EXAMPLE1_EDGES: [(usize, usize); 8] = [
    (2, 0),
    (0, 1),
    (1, 2),
    (0, 3),
    (1, 4),
    (2, 5),
    (3, 6),
    (6, 7),
];

/// Eight agents, three states, binary signals. Agents 0 and 1 are
/// informative (about states 3 and 2 respectively), everyone else draws
/// signals that do not depend on the state. Uniform common prior, truth is
/// the first state.
pub fn example1_model() -> ModelSpec {
    let uninformative = Likelihood::binary(&[0.25, 0.25, 0.25]);
    let mut agents = vec![
        Likelihood::binary(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 5.0]),
        Likelihood::binary(&[1.0 / 2.0, 2.0 / 3.0, 1.0 / 2.0]),
    ];
    agents.extend(std::iter::repeat_n(uninformative, 6));
    ModelSpec {
        states: StateSpace::numbered(3),
        signals: SignalStructure { agents },
        priors: Prior::uniform(8, 3),
        network: Network::from_edges(8, &EXAMPLE1_EDGES),
        truth: 0,
    }
}

/// Complete three-node digraph (ρ = 2) on which learning is a rare event.
/// Every agent sees a binary signal whose first value is an alarm, drawn with
/// probability `10⁻⁶` under the truth and a tenth of that under either false
/// state, so the truth is globally identifiable. Shifted by `β`, the network
/// log-ratio is `Σ_τ 2^{t−τ} Λ_τ`: a quiet round adds about `+9·10⁻⁷`, an
/// alarm about `−0.77`, and doubling fixes the sign within the first rounds.
/// Beliefs move towards the truth only when an alarm arrives among roughly
/// the first nineteen rounds, which happens in about `6·10⁻⁵` of all trials.
pub fn theorem1_model() -> ModelSpec {
    let alarm = 1e-6;
    let signal = Likelihood::binary(&[alarm, alarm / 10.0, alarm / 10.0]);
    ModelSpec {
        states: StateSpace::numbered(3),
        signals: SignalStructure {
            agents: vec![signal; 3],
        },
        priors: Prior::uniform(3, 3),
        network: Network::complete(3),
        truth: 0,
    }
}

/// Binary-state model whose only recurrent classes are the two consensus
/// profiles: five agents on the complete digraph with symmetric binary
/// signals of accuracy 0.6 and a uniform prior, truth is the second (−1)
/// state.
pub fn ising_consensus_model() -> ModelSpec {
    let n = 5;
    ModelSpec {
        states: StateSpace::new(["+1", "-1"]),
        signals: SignalStructure {
            agents: vec![Likelihood::binary(&[0.6, 0.4]); n],
        },
        priors: Prior::uniform(n, 2),
        network: Network::complete(n),
        truth: 1,
    }
}

