//! Cross-checks the router against an exhaustive simple-path oracle on
//! randomly generated digraphs, plus determinism and blocking behavior.

mod common;

use common::{net_from_edges, oracle_shortest, rand_digraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use v2xlab::netgraph::{
    grid_network, route_travel_time, shortest_path, NetError, NodeId,
};

#[test]
fn router_matches_oracle_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut compared = 0u32;
    let mut reachable = 0u32;
    for _ in 0..100 {
        let net = rand_digraph(&mut rng, 10);
        let weights = net.free_flow_weights();
        let ids: Vec<NodeId> = net.nodes().map(|n| n.id.clone()).collect();
        for _ in 0..8 {
            let a = rng.random_range(0..ids.len());
            let mut b = rng.random_range(0..ids.len() - 1);
            if b >= a {
                b += 1;
            }
            let (from, to) = (&ids[a], &ids[b]);
            let oracle = oracle_shortest(&net, from, to, &weights);
            match shortest_path(&net, from, to, &weights) {
                Ok(route) => {
                    let (oracle_cost, oracle_edges) = oracle.unwrap_or_else(|| {
                        panic!("router found a path {from}->{to} the oracle missed")
                    });
                    let cost = route_travel_time(&net, &route, &weights)
                        .expect("route edges all carry weights");
                    assert_eq!(
                        cost, oracle_cost,
                        "cost mismatch {from}->{to}: router {cost}, oracle {oracle_cost}"
                    );
                    assert_eq!(
                        route.edges(),
                        oracle_edges.as_slice(),
                        "edge-sequence mismatch {from}->{to}"
                    );
                    reachable += 1;
                }
                Err(NetError::Unreachable { .. }) => {
                    assert!(
                        oracle.is_none(),
                        "router reported {from}->{to} unreachable but the oracle \
                         found a path"
                    );
                }
                Err(e) => panic!("unexpected router error {from}->{to}: {e}"),
            }
            compared += 1;
        }
    }
    assert_eq!(compared, 800);
    // The generator guarantees out-degree >= 1, so most pairs connect; a
    // collapsed count would mean the comparison is vacuous.
    assert!(reachable > 400, "only {reachable} of 800 pairs reachable");
}

#[test]
fn router_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = rand_digraph(&mut rng, 10);
    let weights = net.free_flow_weights();
    let ids: Vec<NodeId> = net.nodes().map(|n| n.id.clone()).collect();
    for a in 0..ids.len() {
        for b in 0..ids.len() {
            if a == b {
                continue;
            }
            let first = shortest_path(&net, &ids[a], &ids[b], &weights);
            let second = shortest_path(&net, &ids[a], &ids[b], &weights);
            match (first, second) {
                (Ok(r1), Ok(r2)) => assert_eq!(r1.edges(), r2.edges()),
                (Err(_), Err(_)) => {}
                _ => panic!("reachability flapped between identical queries"),
            }
        }
    }
}

#[test]
fn raising_a_weight_never_shortens_a_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let net = rand_digraph(&mut rng, 8);
        let weights = net.free_flow_weights();
        let ids: Vec<NodeId> = net.nodes().map(|n| n.id.clone()).collect();
        let victim = {
            let k = rng.random_range(0..net.edge_count());
            net.edges().nth(k).expect("index in bounds").id.clone()
        };
        let mut raised = weights.clone();
        raised.insert(victim, weights.values().sum::<f64>() + 1.0);
        for _ in 0..6 {
            let a = rng.random_range(0..ids.len());
            let mut b = rng.random_range(0..ids.len() - 1);
            if b >= a {
                b += 1;
            }
            let before = shortest_path(&net, &ids[a], &ids[b], &weights)
                .ok()
                .map(|r| route_travel_time(&net, &r, &weights).expect("weighted"));
            let after = shortest_path(&net, &ids[a], &ids[b], &raised)
                .ok()
                .map(|r| route_travel_time(&net, &r, &raised).expect("weighted"));
            match (before, after) {
                (Some(c0), Some(c1)) => assert!(
                    c1 >= c0,
                    "raising one weight shortened {} -> {}: {c0} -> {c1}",
                    ids[a],
                    ids[b],
                ),
                (None, Some(_)) => panic!("raising a weight created a path"),
                _ => {}
            }
        }
    }
}

#[test]
fn infinite_weights_block_edges_exactly() {
    // Two routes from n0 to n3: the short chain through n1 and a longer
    // bypass through n2. Blocking the chain's middle edge must divert the
    // route to the bypass; blocking both must make n3 unreachable.
    let net = net_from_edges(
        4,
        &[
            ("e01", 0, 1, 1.0),
            ("e13", 1, 3, 1.0),
            ("e02", 0, 2, 5.0),
            ("e23", 2, 3, 5.0),
        ],
    );
    let free = net.free_flow_weights();
    let (n0, n3) = (NodeId::new("n0"), NodeId::new("n3"));

    let direct = shortest_path(&net, &n0, &n3, &free).expect("reachable");
    assert_eq!(route_travel_time(&net, &direct, &free).unwrap(), 2.0);

    let mut blocked = free.clone();
    blocked.insert(v2xlab::netgraph::EdgeId::new("e13"), f64::INFINITY);
    let bypass = shortest_path(&net, &n0, &n3, &blocked).expect("bypass exists");
    assert!(!bypass.edges().iter().any(|e| e.as_str() == "e13"));
    assert_eq!(route_travel_time(&net, &bypass, &free).unwrap(), 10.0);
    let oracle = oracle_shortest(&net, &n0, &n3, &blocked).expect("oracle bypass");
    assert_eq!(bypass.edges(), oracle.1.as_slice());

    blocked.insert(v2xlab::netgraph::EdgeId::new("e23"), f64::INFINITY);
    assert!(matches!(
        shortest_path(&net, &n0, &n3, &blocked),
        Err(NetError::Unreachable { .. })
    ));
    assert!(oracle_shortest(&net, &n0, &n3, &blocked).is_none());
}

#[test]
fn grid_corner_route_costs_the_manhattan_time() {
    let net = grid_network(5, 5, 100.0, 10.0, 2);
    let weights = net.free_flow_weights();
    let route = shortest_path(
        &net,
        &NodeId::new("n0x0"),
        &NodeId::new("n4x4"),
        &weights,
    )
    .expect("corners connect");
    let cost = route_travel_time(&net, &route, &weights).expect("weighted");
    // 8 blocks of 100 m at 10 m/s.
    assert_eq!(cost, 80.0);
    assert_eq!(route.edges().len(), 8);
}
