//! Connectivity and spectral structure of the network.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Network;

/// Convergence threshold on successive normalized iterates (∞-norm).
pub const PERRON_TOLERANCE: f64 = 1e-13;
pub const PERRON_MAX_ITERATIONS: usize = 1_000_000;
/// Accepted residual `‖αᵀA − ρ αᵀ‖_∞`.
pub const PERRON_RESIDUAL: f64 = 1e-9;

/// Spectral radius of `A` and its normalized Perron left-eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralData {
    pub rho: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Topology {
    DirectedCircle,
    RootCircleTree,
    StronglyConnectedGeneral,
    Other,
}

/// Tarjan's strongly connected components over successor lists. Components
/// come out in reverse topological order of the condensation (sinks first).
pub fn tarjan_scc(successors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = successors.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next = 0;
    // explicit call stack of (node, next successor position)
    let mut calls: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        calls.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = calls.last_mut() {
            if let Some(&w) = successors[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    calls.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}

pub fn strongly_connected(network: &Network) -> bool {
    let n = network.len();
    n > 0 && tarjan_scc(&network.out_neighbors()).len() == 1
}

fn weakly_connected(network: &Network) -> bool {
    let n = network.len();
    if n == 0 {
        return false;
    }
    let mut undirected = network.out_neighbors();
    for (i, ns) in network.in_neighbors.iter().enumerate() {
        undirected[i].extend_from_slice(ns);
    }
    let mut seen = vec![false; n];
    let mut todo = vec![0];
    seen[0] = true;
    while let Some(v) = todo.pop() {
        for &w in &undirected[v] {
            if !seen[w] {
                seen[w] = true;
                todo.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// A single directed cycle through every node.
pub fn is_directed_circle(network: &Network) -> bool {
    let n = network.len();
    if n < 2 {
        return false;
    }
    let out = network.out_neighbors();
    (0..n).all(|i| network.degree(i) == 1 && out[i].len() == 1) && strongly_connected(network)
}

pub fn classify_topology(network: &Network) -> Topology {
    if is_directed_circle(network) {
        Topology::DirectedCircle
    } else if strongly_connected(network) {
        Topology::StronglyConnectedGeneral
    } else if root_circle(network).is_some() {
        Topology::RootCircleTree
    } else {
        Topology::Other
    }
}

/// The unique directed cycle of a weakly connected graph whose in-degrees
/// are all at most one, listed along information flow starting from its
/// smallest member. `None` for any other graph.
pub fn root_circle(network: &Network) -> Option<Vec<usize>> {
    let n = network.len();
    if n < 2 || !weakly_connected(network) {
        return None;
    }
    if (0..n).any(|i| network.degree(i) > 1) {
        return None;
    }
    // with in-degree <= 1 and weak connectivity, a single cycle means n edges
    if (0..n).any(|i| network.degree(i) == 0) {
        return None;
    }
    let parent = |i: usize| network.neighbors(i)[0];
    let mut v = 0;
    for _ in 0..n {
        v = parent(v);
    }
    let mut cycle = vec![v];
    let mut w = parent(v);
    while w != v {
        cycle.push(w);
        w = parent(w);
    }
    // parents walk against the flow
    cycle.reverse();
    let start = cycle
        .iter()
        .enumerate()
        .min_by_key(|&(_, &c)| c)
        .map(|(p, _)| p)
        .unwrap_or(0);
    cycle.rotate_left(start);
    Some(cycle)
}

/// Period of a strongly connected digraph (gcd of cycle lengths).
pub fn period(network: &Network) -> usize {
    let n = network.len();
    let out = network.out_neighbors();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    let mut g = 0usize;
    while let Some(v) = queue.pop_front() {
        for &w in &out[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            } else {
                let diff = (level[v] + 1).abs_diff(level[w]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `αᵀ A` for `A` given by in-neighbor lists: `(αᵀA)_j = Σ_{i : j ∈ N(i)} α_i`.
fn left_multiply(network: &Network, x: &[f64], shift: f64) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().map(|v| v * shift).collect();
    for (i, ns) in network.in_neighbors.iter().enumerate() {
        for &j in ns {
            y[j] += x[i];
        }
    }
    y
}

fn power_iteration(network: &Network, shift: f64) -> Result<(f64, Vec<f64>)> {
    let n = network.len();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..PERRON_MAX_ITERATIONS {
        let y = left_multiply(network, &x, shift);
        let total: f64 = y.iter().sum();
        let y: Vec<f64> = y.into_iter().map(|v| v / total).collect();
        let diff = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = y;
        if diff < PERRON_TOLERANCE {
            // with Σx = 1 and x ≥ 0, Σ(xᵀ(A + shift I)) is the eigenvalue
            let lambda: f64 = left_multiply(network, &x, shift).iter().sum();
            return Ok((lambda - shift, x));
        }
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge within {PERRON_MAX_ITERATIONS} iterations"
    )))
}

/// Perron root and normalized left eigenvector of the adjacency matrix.
///
/// Directed circles are answered analytically (ρ = 1, uniform α). Other
/// aperiodic graphs use power iteration on `Aᵀ` from the uniform vector;
/// periodic graphs iterate on `(A + I)ᵀ`, which is primitive and shares the
/// eigenvector, then subtract one from the root.
pub fn perron(network: &Network) -> Result<SpectralData> {
    if !strongly_connected(network) {
        return Err(Error::NotStronglyConnected);
    }
    let n = network.len();
    if n == 1 {
        // a lone agent without self-loop: A = [0]
        return Ok(SpectralData {
            rho: 0.0,
            alpha: vec![1.0],
        });
    }
    if is_directed_circle(network) {
        return Ok(SpectralData {
            rho: 1.0,
            alpha: vec![1.0 / n as f64; n],
        });
    }
    let shift = if period(network) == 1 { 0.0 } else { 1.0 };
    let (rho, alpha) = power_iteration(network, shift)?;
    let data = SpectralData { rho, alpha };
    let residual = perron_residual(network, &data);
    if residual >= PERRON_RESIDUAL {
        return Err(Error::Numerical(format!(
            "Perron residual {residual:e} exceeds {PERRON_RESIDUAL:e}"
        )));
    }
    Ok(data)
}

/// `‖αᵀA − ρ αᵀ‖_∞`.
pub fn perron_residual(network: &Network, data: &SpectralData) -> f64 {
    left_multiply(network, &data.alpha, 0.0)
        .iter()
        .zip(&data.alpha)
        .map(|(y, a)| (y - data.rho * a).abs())
        .fold(0.0, f64::max)
}

/// Structural summary of a network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphReport {
    pub agents: usize,
    pub edges: usize,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    pub topology: Topology,
    pub strongly_connected: bool,
    pub components: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_circle: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perron_residual: Option<f64>,
}

pub fn analyze(network: &Network) -> Result<GraphReport> {
    let connected = strongly_connected(network);
    let spectral = if connected { Some(perron(network)?) } else { None };
    let mut components = tarjan_scc(&network.out_neighbors());
    components.sort();
    Ok(GraphReport {
        agents: network.len(),
        edges: network.edges().len(),
        in_degree: (0..network.len()).map(|i| network.degree(i)).collect(),
        out_degree: network.out_neighbors().iter().map(Vec::len).collect(),
        topology: classify_topology(network),
        strongly_connected: connected,
        components,
        period: connected.then(|| period(network)),
        root_circle: root_circle(network),
        perron_residual: spectral.as_ref().map(|s| perron_residual(network, s)),
        spectral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::example1_model;

    #[test]
    fn connectivity_examples() {
        assert!(strongly_connected(&Network::directed_circle(3)));
        assert!(!strongly_connected(&Network::empty(2)));
        assert!(!strongly_connected(&example1_model().network));
    }

    #[test]
    fn circle_spectrum() {
        for n in 2..7 {
            let s = perron(&Network::directed_circle(n)).unwrap();
            assert_eq!(s.rho, 1.0);
            assert!(s.alpha.iter().all(|&a| (a - 1.0 / n as f64).abs() < 1e-15));
        }
    }

    #[test]
    fn complete_graph_spectrum() {
        let s = perron(&Network::complete(3)).unwrap();
        assert!((s.rho - 2.0).abs() < 1e-12);
        assert!(s.alpha.iter().all(|&a| (a - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn periodic_non_circle_uses_shift() {
        // bipartite 2-periodic graph: 0 <-> 1, 0 <-> 2
        let net = Network::from_edges(3, &[(0, 1), (1, 0), (0, 2), (2, 0)]);
        assert_eq!(period(&net), 2);
        let s = perron(&net).unwrap();
        assert!((s.rho - 2f64.sqrt()).abs() < 1e-10, "{}", s.rho);
        assert!(perron_residual(&net, &s) < 1e-9);
    }

    #[test]
    fn degree_two_node_breaks_circle() {
        // 3-circle plus chord 0 -> 2: node 2 has in-degree 2
        let net = Network::from_edges(3, &[(2, 0), (0, 1), (1, 2), (0, 2)]);
        assert!(!is_directed_circle(&net));
        let s = perron(&net).unwrap();
        // characteristic polynomial λ³ − λ − 1: plastic number
        let plastic = 1.324_717_957_244_746;
        assert!((s.rho - plastic).abs() < 1e-10, "{}", s.rho);
        assert!(s.rho > 1.0);
    }

    #[test]
    fn topology_examples() {
        assert_eq!(
            classify_topology(&example1_model().network),
            Topology::RootCircleTree
        );
        assert_eq!(
            classify_topology(&Network::directed_circle(5)),
            Topology::DirectedCircle
        );
        assert_eq!(
            classify_topology(&Network::complete(4)),
            Topology::StronglyConnectedGeneral
        );
        let two_circles = Network::from_edges(4, &[(1, 0), (0, 1), (3, 2), (2, 3)]);
        assert!(!is_directed_circle(&two_circles));
        assert_eq!(classify_topology(&two_circles), Topology::Other);
        assert_eq!(classify_topology(&Network::empty(3)), Topology::Other);
    }

    #[test]
    fn example1_root_circle() {
        assert_eq!(root_circle(&example1_model().network), Some(vec![0, 1, 2]));
    }

    #[test]
    fn perron_rejects_disconnected() {
        assert!(matches!(
            perron(&Network::empty(3)),
            Err(Error::NotStronglyConnected)
        ));
    }

    #[test]
    fn tarjan_sinks_first() {
        // 0 -> 1 -> 2 -> 1
        let succ = vec![vec![1], vec![2], vec![1]];
        let comps = tarjan_scc(&succ);
        assert_eq!(comps, vec![vec![1, 2], vec![0]]);
    }

    #[test]
    fn report_for_example1() {
        let r = analyze(&example1_model().network).unwrap();
        assert_eq!(r.topology, Topology::RootCircleTree);
        assert!(!r.strongly_connected && r.spectral.is_none());
        assert_eq!(r.root_circle, Some(vec![0, 1, 2]));
        assert_eq!(r.in_degree, vec![1; 8]);
        assert_eq!(r.components.len(), 6);
    }
}
