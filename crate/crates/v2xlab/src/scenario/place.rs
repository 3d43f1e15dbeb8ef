//! Deterministic roadside-unit placement. Units belong at signalized
//! intersections; when fewer units than signals are available the subset is
//! spread out by farthest-point selection, and when more are requested the
//! surplus spreads over the remaining intersections the same way.

use crate::geom::Vec2;
use crate::netgraph::{NodeId, RoadNetwork};
use crate::protocol::{Rsu, RsuId};

use super::ScenarioError;

/// Picks `n` distinct nodes to host roadside units and returns the units in
/// node-id order with densely assigned ids. Placement is a pure function of
/// the network: signalized nodes are preferred; a subset is chosen by
/// farthest-point selection seeded with the lowest node id (ties on distance
/// broken by id), so a small budget still covers the whole map.
pub fn place_rsus(net: &RoadNetwork, n: u32) -> Result<Vec<Rsu>, ScenarioError> {
    let n = n as usize;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n > net.node_count() {
        return Err(ScenarioError::Config(format!(
            "cannot place {n} roadside units on {} nodes",
            net.node_count()
        )));
    }

    let signalized: Vec<(NodeId, Vec2)> = net
        .nodes()
        .filter(|nd| nd.signal.is_some())
        .map(|nd| (nd.id.clone(), nd.pos()))
        .collect();
    let unsignalized: Vec<(NodeId, Vec2)> = net
        .nodes()
        .filter(|nd| nd.signal.is_none())
        .map(|nd| (nd.id.clone(), nd.pos()))
        .collect();

    let mut chosen: Vec<(NodeId, Vec2)> = Vec::with_capacity(n);
    if n <= signalized.len() {
        farthest_point_fill(&mut chosen, &signalized, n);
    } else {
        chosen.extend(signalized.iter().cloned());
        farthest_point_fill(&mut chosen, &unsignalized, n);
    }

    chosen.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(chosen
        .into_iter()
        .enumerate()
        .map(|(i, (node, pos))| Rsu::new(RsuId(i as u32), node, pos))
        .collect())
}

/// Adds candidates to `chosen` until it holds `target` entries, each time
/// taking the candidate farthest from everything already chosen. An empty
/// `chosen` starts from the first (lowest-id) candidate.
fn farthest_point_fill(
    chosen: &mut Vec<(NodeId, Vec2)>,
    candidates: &[(NodeId, Vec2)],
    target: usize,
) {
    while chosen.len() < target {
        if chosen.is_empty() {
            chosen.push(candidates[0].clone());
            continue;
        }
        let mut best: Option<(&(NodeId, Vec2), f64)> = None;
        for cand in candidates {
            if chosen.iter().any(|(id, _)| *id == cand.0) {
                continue;
            }
            let min_d = chosen
                .iter()
                .map(|(_, p)| p.distance(cand.1))
                .fold(f64::INFINITY, f64::min);
            // Strict improvement keeps the earliest (lowest-id) candidate on
            // ties, making placement fully deterministic.
            if best.is_none_or(|(_, d)| min_d > d) {
                best = Some((cand, min_d));
            }
        }
        match best {
            Some((cand, _)) => chosen.push(cand.clone()),
            None => break,
        }
    }
}
