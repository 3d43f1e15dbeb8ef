//! Helpers shared by the integration suites: a brute-force routing oracle
//! that enumerates simple paths, and a random-digraph generator whose edge
//! weights are small integers so path costs are exact in f64.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use v2xlab::netgraph::{Edge, EdgeId, EdgeWeights, Node, NodeId, RoadNetwork};

/// Builds a network from `(id, from, to, length_m)` tuples with unit speed
/// limits, so the free-flow weight of each edge equals its length exactly.
pub fn net_from_edges(n_nodes: usize, edges: &[(&str, usize, usize, f64)]) -> RoadNetwork {
    // Nodes sit on a tiny circle so that every pairwise distance stays below
    // the smallest edge length the tests use (1 m); road lengths must cover
    // at least the straight-line distance between their endpoints.
    let nodes: Vec<Node> = (0..n_nodes)
        .map(|i| {
            let angle = i as f64 / n_nodes as f64 * std::f64::consts::TAU;
            Node {
                id: NodeId::new(format!("n{i}")),
                x: 0.4 * angle.cos(),
                y: 0.4 * angle.sin(),
                signal: None,
            }
        })
        .collect();
    let edges: Vec<Edge> = edges
        .iter()
        .map(|(id, from, to, len)| Edge {
            id: EdgeId::new(*id),
            from: NodeId::new(format!("n{from}")),
            to: NodeId::new(format!("n{to}")),
            length_m: *len,
            speed_limit_mps: 1.0,
            lanes: 1,
        })
        .collect();
    RoadNetwork::from_parts(nodes, edges).expect("test network is well formed")
}

/// Random connected-ish digraph: up to `max_nodes` nodes, no self loops, no
/// parallel edges, integer lengths in 1..=20 at unit speed. Every node gets
/// at least one outgoing edge so most pairs are reachable.
pub fn rand_digraph(rng: &mut impl Rng, max_nodes: usize) -> RoadNetwork {
    let n = rng.random_range(4..=max_nodes);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        // One guaranteed outgoing edge per node.
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        pairs.push((i, j));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !pairs.contains(&(i, j)) && rng.random::<f64>() < 1.4 / n as f64 {
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let edges: Vec<(String, usize, usize, f64)> = pairs
        .into_iter()
        .map(|(i, j)| {
            (
                format!("e{i}-{j}"),
                i,
                j,
                rng.random_range(1..=20) as f64,
            )
        })
        .collect();
    let tuples: Vec<(&str, usize, usize, f64)> = edges
        .iter()
        .map(|(id, i, j, len)| (id.as_str(), *i, *j, *len))
        .collect();
    net_from_edges(n, &tuples)
}

/// Minimum-cost simple path by exhaustive enumeration. Returns the cost and
/// the edge sequence; among equal-cost paths the lexicographically smallest
/// edge-id sequence wins, mirroring the router's documented tie-break.
/// Infinite-weight edges are treated as absent. `None` when unreachable.
pub fn oracle_shortest(
    net: &RoadNetwork,
    from: &NodeId,
    to: &NodeId,
    weights: &EdgeWeights,
) -> Option<(f64, Vec<EdgeId>)> {
    let index: BTreeMap<&NodeId, usize> = net.nodes().map(|n| &n.id).zip(0..).collect();
    let mut best: Option<(f64, Vec<EdgeId>)> = None;
    let mut path: Vec<EdgeId> = Vec::new();
    let mut visited = vec![false; index.len()];
    visited[index[from]] = true;
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        net: &RoadNetwork,
        index: &BTreeMap<&NodeId, usize>,
        weights: &EdgeWeights,
        at: &NodeId,
        to: &NodeId,
        cost: f64,
        path: &mut Vec<EdgeId>,
        visited: &mut Vec<bool>,
        best: &mut Option<(f64, Vec<EdgeId>)>,
    ) {
        if at == to {
            let better = match best {
                None => true,
                Some((c, p)) => {
                    cost < *c || (cost == *c && path.as_slice() < p.as_slice())
                }
            };
            if better {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        for edge_id in net.out_edges(at) {
            let w = weights[edge_id];
            if w.is_infinite() {
                continue;
            }
            let edge = net.edge(edge_id).expect("edge ids come from the network");
            let next = index[&edge.to];
            if visited[next] {
                continue;
            }
            visited[next] = true;
            path.push(edge_id.clone());
            dfs(net, index, weights, &edge.to, to, cost + w, path, visited, best);
            path.pop();
            visited[next] = false;
        }
    }
    dfs(
        net, &index, weights, from, to, 0.0, &mut path, &mut visited, &mut best,
    );
    best
}
