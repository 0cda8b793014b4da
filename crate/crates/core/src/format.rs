//! JSON model files.
//!
//! ```text
//! model    := { "states": [label, ...],
//!               "agents": [agent, ...],
//!               "prior":  [p, ...]            (optional common prior)
//!               "edges":  [[from, to], ...],   (from is an in-neighbor of to)
//!               "truth":  label }
//! agent    := { "likelihood": [[p, ...], ...]  (rows = signals, columns = states)
//!               "prior": [p, ...] }            (optional; overrides the common prior)
//! ```
//!
//! Every agent needs a prior from one of the two places. Agent indices in
//! `edges` are 0-based. Files are validated on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Likelihood, ModelSpec, Network, Prior, SignalStructure, StateSpace};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub likelihood: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub agents: Vec<AgentFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    pub truth: String,
}

impl ModelFile {
    pub fn into_model(self) -> Result<ModelSpec> {
        let n = self.agents.len();
        let states = StateSpace::new(self.states);
        let truth = states.index_of(&self.truth).ok_or_else(|| {
            Error::InvalidModel(vec![format!("truth: unknown state label {:?}", self.truth)])
        })?;
        let mut priors = Vec::with_capacity(n);
        let mut missing = Vec::new();
        for (i, agent) in self.agents.iter().enumerate() {
            match agent.prior.as_ref().or(self.prior.as_ref()) {
                Some(p) => priors.push(p.clone()),
                None => {
                    missing.push(format!("agent {i} prior: missing"));
                    priors.push(Vec::new());
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::InvalidModel(missing));
        }
        let out_of_range: Vec<_> = self
            .edges
            .iter()
            .filter(|[j, i]| *j >= n || *i >= n)
            .map(|[j, i]| format!("network edge {j}->{i}: agent out of range for {n} agents"))
            .collect();
        if !out_of_range.is_empty() {
            return Err(Error::InvalidModel(out_of_range));
        }
        let edges: Vec<_> = self.edges.iter().map(|[j, i]| (*j, *i)).collect();
        ModelSpec {
            states,
            signals: SignalStructure {
                agents: self
                    .agents
                    .into_iter()
                    .map(|a| Likelihood::new(a.likelihood))
                    .collect(),
            },
            priors: Prior { agents: priors },
            network: Network::from_edges(n, &edges),
            truth,
        }
        .validated()
    }

    pub fn from_model(model: &ModelSpec) -> Self {
        let common = model.priors.common_mismatch().is_none();
        ModelFile {
            states: model.states.labels.clone(),
            agents: model
                .signals
                .agents
                .iter()
                .zip(&model.priors.agents)
                .map(|(lik, prior)| AgentFile {
                    likelihood: lik.rows.clone(),
                    prior: (!common).then(|| prior.clone()),
                })
                .collect(),
            prior: common.then(|| model.priors.agents[0].clone()),
            edges: model.network.edges().into_iter().map(|(j, i)| [j, i]).collect(),
            truth: model.states.labels[model.truth].clone(),
        }
    }
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.into_model()
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::from(e).context(path.display().to_string()))?;
    parse_model(&text).map_err(|e| e.context(path.display().to_string()))
}

pub fn model_to_json(model: &ModelSpec) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(model)).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::example1_model;

    #[test]
    fn example1_round_trips() {
        let model = example1_model();
        let text = model_to_json(&model);
        assert_eq!(parse_model(&text).unwrap(), model);
    }

    #[test]
    fn loader_refuses_invalid_files() {
        let text = r#"{
            "states": ["a", "b"],
            "agents": [{"likelihood": [[0.5, 0.5], [0.4, 0.5]]}],
            "prior": [0.5, 0.5],
            "truth": "a"
        }"#;
        let err = parse_model(text).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(ref v) if v.len() == 1), "{err}");
    }

    #[test]
    fn per_agent_prior_overrides_common() {
        let text = r#"{
            "states": ["a", "b"],
            "agents": [
                {"likelihood": [[0.9, 0.1], [0.1, 0.9]], "prior": [0.2, 0.8]},
                {"likelihood": [[0.9, 0.1], [0.1, 0.9]]}
            ],
            "prior": [0.5, 0.5],
            "edges": [[0, 1], [1, 0]],
            "truth": "b"
        }"#;
        let model = parse_model(text).unwrap();
        assert_eq!(model.truth, 1);
        assert_eq!(model.priors.agents[0], vec![0.2, 0.8]);
        assert_eq!(model.priors.agents[1], vec![0.5, 0.5]);
        assert_eq!(model.network.neighbors(1), &[0]);
    }

    #[test]
    fn missing_prior_and_unknown_truth() {
        let base = r#"{"states": ["a", "b"], "agents": [{"likelihood": [[1, 1]]}], "truth": "a"}"#;
        assert!(parse_model(base).is_err());
        let bad_truth =
            r#"{"states": ["a", "b"], "agents": [{"likelihood": [[1, 1]]}], "prior": [0.5, 0.5], "truth": "c"}"#;
        assert!(parse_model(bad_truth).is_err());
    }
}
