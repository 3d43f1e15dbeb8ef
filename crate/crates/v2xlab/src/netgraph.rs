//! Road network graph: typed nodes and directed edges, JSON loading,
//! synthetic grid generation, and deterministic shortest-path routing.
//!
//! Networks are immutable after construction. Edge weights for routing are
//! supplied externally as a map from edge id to traversal seconds; an
//! infinite weight marks an edge as blocked. Cost ties between paths are
//! broken by the lexicographically smallest edge-id sequence so that routing
//! is reproducible across runs and platforms.

use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;

/// Opaque node identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque edge identifier. The `Ord` impl (lexicographic on the underlying
/// string) is what routing tie-breaks are defined over.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(String);

impl EdgeId {
    pub fn new(id: impl Into<String>) -> Self {
        EdgeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An intersection or endpoint, with planar coordinates in meters.
/// `signal` carries the controller identifier when the node is signalized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
}

impl Node {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// A directed road segment between two nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub speed_limit_mps: f64,
    pub lanes: u32,
}

/// Errors from network construction, loading, and routing.
#[derive(Debug, Error)]
pub enum NetError {
    #[error("network parse error: {0}")]
    Parse(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge id {0}")]
    DuplicateEdge(EdgeId),
    #[error("edge {edge} references missing node {node}")]
    DanglingEndpoint { edge: EdgeId, node: NodeId },
    #[error("edge {0} has nonpositive length")]
    NonpositiveLength(EdgeId),
    #[error("edge {0} has nonpositive speed limit")]
    NonpositiveSpeed(EdgeId),
    #[error("edge {0} has zero lanes")]
    ZeroLanes(EdgeId),
    #[error("node {0} has a non-finite coordinate")]
    BadCoordinate(NodeId),
    #[error("edge {edge} length {length_m} m is shorter than the straight line between its endpoints ({euclid_m} m)")]
    ShorterThanStraightLine {
        edge: EdgeId,
        length_m: f64,
        euclid_m: f64,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("origin and destination are both {0}")]
    SameEndpoints(NodeId),
    #[error("no route from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("negative weight {weight} on edge {edge}")]
    NegativeWeight { edge: EdgeId, weight: f64 },
    #[error("weight on edge {0} is not a number")]
    NanWeight(EdgeId),
    #[error("missing weight for edge {0}")]
    MissingWeight(EdgeId),
    #[error("route is empty")]
    EmptyRoute,
    #[error("route edges {a} -> {b} are not connected")]
    DisconnectedRoute { a: EdgeId, b: EdgeId },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-edge traversal cost in seconds. `f64::INFINITY` blocks an edge.
pub type EdgeWeights = BTreeMap<EdgeId, f64>;

/// Immutable road network with deterministic iteration order everywhere.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    out_edges: BTreeMap<NodeId, Vec<EdgeId>>,
    in_edges: BTreeMap<NodeId, Vec<EdgeId>>,
}

// Tolerance for the length-vs-straight-line check; grids sit exactly on it.
const LENGTH_SLACK_M: f64 = 1e-6;

impl RoadNetwork {
    /// Builds a network from parts, validating every structural invariant:
    /// unique ids, endpoints present, positive length and speed, at least one
    /// lane, and edge length no shorter than the straight line between its
    /// endpoints.
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetError> {
        let mut node_map = BTreeMap::new();
        for node in nodes {
            if !node.x.is_finite() || !node.y.is_finite() {
                return Err(NetError::BadCoordinate(node.id));
            }
            let id = node.id.clone();
            if node_map.insert(id.clone(), node).is_some() {
                return Err(NetError::DuplicateNode(id));
            }
        }
        let mut edge_map: BTreeMap<EdgeId, Edge> = BTreeMap::new();
        let mut out_edges: BTreeMap<NodeId, Vec<EdgeId>> =
            node_map.keys().map(|n| (n.clone(), Vec::new())).collect();
        let mut in_edges = out_edges.clone();
        for edge in edges {
            for endpoint in [&edge.from, &edge.to] {
                if !node_map.contains_key(endpoint) {
                    return Err(NetError::DanglingEndpoint {
                        edge: edge.id,
                        node: endpoint.clone(),
                    });
                }
            }
            if !(edge.length_m > 0.0) {
                return Err(NetError::NonpositiveLength(edge.id));
            }
            if !(edge.speed_limit_mps > 0.0) {
                return Err(NetError::NonpositiveSpeed(edge.id));
            }
            if edge.lanes == 0 {
                return Err(NetError::ZeroLanes(edge.id));
            }
            let euclid = node_map[&edge.from].pos().distance(node_map[&edge.to].pos());
            if edge.length_m + LENGTH_SLACK_M < euclid {
                return Err(NetError::ShorterThanStraightLine {
                    edge: edge.id,
                    length_m: edge.length_m,
                    euclid_m: euclid,
                });
            }
            out_edges.get_mut(&edge.from).unwrap().push(edge.id.clone());
            in_edges.get_mut(&edge.to).unwrap().push(edge.id.clone());
            let id = edge.id.clone();
            if edge_map.insert(id.clone(), edge).is_some() {
                return Err(NetError::DuplicateEdge(id));
            }
        }
        for list in out_edges.values_mut().chain(in_edges.values_mut()) {
            list.sort();
        }
        Ok(RoadNetwork {
            nodes: node_map,
            edges: edge_map,
            out_edges,
            in_edges,
        })
    }

    pub fn node(&self, id: &NodeId) -> Result<&Node, NetError> {
        self.nodes.get(id).ok_or_else(|| NetError::UnknownNode(id.clone()))
    }

    pub fn edge(&self, id: &EdgeId) -> Result<&Edge, NetError> {
        self.edges.get(id).ok_or_else(|| NetError::UnknownEdge(id.clone()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Outgoing edge ids of a node, sorted by edge id.
    pub fn out_edges(&self, id: &NodeId) -> &[EdgeId] {
        self.out_edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Incoming edge ids of a node, sorted by edge id.
    pub fn in_edges(&self, id: &NodeId) -> &[EdgeId] {
        self.in_edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Free-flow traversal time (length over speed limit) for every edge.
    pub fn free_flow_weights(&self) -> EdgeWeights {
        self.edges
            .values()
            .map(|e| (e.id.clone(), e.length_m / e.speed_limit_mps))
            .collect()
    }

    /// Position along an edge, `offset_m` from its upstream end.
    pub fn position_on_edge(&self, edge: &EdgeId, offset_m: f64) -> Result<Vec2, NetError> {
        let e = self.edge(edge)?;
        let from = self.node(&e.from)?.pos();
        let to = self.node(&e.to)?.pos();
        let t = (offset_m / e.length_m).clamp(0.0, 1.0);
        Ok(from.lerp(to, t))
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// Loads a network from its JSON document form:
/// `{"nodes": [{"id","x","y","signal"?}], "edges": [{"id","from","to","length_m","speed_limit_mps","lanes"}]}`.
pub fn load_network(reader: impl Read) -> Result<RoadNetwork, NetError> {
    let doc: NetworkDoc =
        serde_json::from_reader(reader).map_err(|e| NetError::Parse(e.to_string()))?;
    RoadNetwork::from_parts(doc.nodes, doc.edges)
}

/// Writes a network in the same JSON document form `load_network` accepts.
pub fn write_network(net: &RoadNetwork, mut writer: impl Write) -> Result<(), NetError> {
    let doc = NetworkDoc {
        nodes: net.nodes().cloned().collect(),
        edges: net.edges().cloned().collect(),
    };
    serde_json::to_writer_pretty(&mut writer, &doc).map_err(|e| NetError::Parse(e.to_string()))?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Generates a rectangular Manhattan grid: `rows x cols` nodes spaced
/// `block_m` apart, bidirectional edges between orthogonal neighbors, and a
/// signal on every `signal_stride`-th interior intersection (row-major
/// order). Node and edge ids are deterministic functions of grid position.
///
/// Panics if `rows < 2`, `cols < 2`, `block_m <= 0`, `speed_mps <= 0`, or
/// `signal_stride == 0`.
pub fn grid_network(
    rows: u32,
    cols: u32,
    block_m: f64,
    speed_mps: f64,
    signal_stride: u32,
) -> RoadNetwork {
    assert!(rows >= 2 && cols >= 2, "grid needs at least 2x2 nodes");
    assert!(block_m > 0.0, "block length must be positive");
    assert!(speed_mps > 0.0, "speed limit must be positive");
    assert!(signal_stride >= 1, "signal stride must be at least 1");

    let node_id = |r: u32, c: u32| NodeId::new(format!("n{r}x{c}"));
    let mut nodes = Vec::new();
    let mut interior_index = 0u32;
    for r in 0..rows {
        for c in 0..cols {
            let interior = r > 0 && r < rows - 1 && c > 0 && c < cols - 1;
            let signal = if interior {
                let s = interior_index
                    .is_multiple_of(signal_stride)
                    .then(|| format!("sig-n{r}x{c}"));
                interior_index += 1;
                s
            } else {
                None
            };
            nodes.push(Node {
                id: node_id(r, c),
                x: f64::from(c) * block_m,
                y: f64::from(r) * block_m,
                signal,
            });
        }
    }

    let mut edges = Vec::new();
    let mut push_pair = |a: NodeId, b: NodeId| {
        for (from, to) in [(a.clone(), b.clone()), (b, a)] {
            edges.push(Edge {
                id: EdgeId::new(format!("{from}-{to}")),
                from,
                to,
                length_m: block_m,
                speed_limit_mps: speed_mps,
                lanes: 1,
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                push_pair(node_id(r, c), node_id(r, c + 1));
            }
            if r + 1 < rows {
                push_pair(node_id(r, c), node_id(r + 1, c));
            }
        }
    }

    RoadNetwork::from_parts(nodes, edges).expect("generated grid is structurally valid")
}

/// A non-empty sequence of consecutive connected edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    edges: Vec<EdgeId>,
}

impl Route {
    /// Validates non-emptiness and head-to-tail connectivity against `net`.
    pub fn new(net: &RoadNetwork, edges: Vec<EdgeId>) -> Result<Self, NetError> {
        if edges.is_empty() {
            return Err(NetError::EmptyRoute);
        }
        for pair in edges.windows(2) {
            let a = net.edge(&pair[0])?;
            let b = net.edge(&pair[1])?;
            if a.to != b.from {
                return Err(NetError::DisconnectedRoute {
                    a: a.id.clone(),
                    b: b.id.clone(),
                });
            }
        }
        net.edge(edges.last().unwrap())?;
        Ok(Route { edges })
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    pub fn first(&self) -> &EdgeId {
        &self.edges[0]
    }

    pub fn last(&self) -> &EdgeId {
        self.edges.last().unwrap()
    }

    /// Node the route ends at.
    pub fn end_node(&self, net: &RoadNetwork) -> Result<NodeId, NetError> {
        Ok(net.edge(self.last())?.to.clone())
    }
}

/// Heap entry for shortest-path search. Ordered so that the binary max-heap
/// pops the smallest cost first, with ties broken by the lexicographically
/// smallest edge-id sequence, then by node id.
struct HeapEntry {
    cost: f64,
    path: Vec<EdgeId>,
    node: NodeId,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.path.cmp(&self.path))
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Dijkstra over nonnegative edge weights. Edges with infinite weight are
/// treated as blocked. Among all minimum-cost routes the one with the
/// lexicographically smallest edge-id sequence is returned.
pub fn shortest_path(
    net: &RoadNetwork,
    origin: &NodeId,
    dest: &NodeId,
    weights: &EdgeWeights,
) -> Result<Route, NetError> {
    net.node(origin)?;
    net.node(dest)?;
    if origin == dest {
        return Err(NetError::SameEndpoints(origin.clone()));
    }
    for edge in net.edges() {
        match weights.get(&edge.id) {
            None => return Err(NetError::MissingWeight(edge.id.clone())),
            Some(w) if w.is_nan() => return Err(NetError::NanWeight(edge.id.clone())),
            Some(w) if *w < 0.0 => {
                return Err(NetError::NegativeWeight {
                    edge: edge.id.clone(),
                    weight: *w,
                })
            }
            Some(_) => {}
        }
    }

    let mut settled: BTreeMap<NodeId, ()> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        cost: 0.0,
        path: Vec::new(),
        node: origin.clone(),
    });
    while let Some(entry) = heap.pop() {
        if settled.contains_key(&entry.node) {
            continue;
        }
        settled.insert(entry.node.clone(), ());
        if entry.node == *dest {
            return Route::new(net, entry.path);
        }
        for edge_id in net.out_edges(&entry.node) {
            let w = weights[edge_id];
            if w.is_infinite() {
                continue;
            }
            let edge = net.edge(edge_id)?;
            if settled.contains_key(&edge.to) {
                continue;
            }
            let mut path = entry.path.clone();
            path.push(edge_id.clone());
            heap.push(HeapEntry {
                cost: entry.cost + w,
                path,
                node: edge.to.clone(),
            });
        }
    }
    Err(NetError::Unreachable {
        from: origin.clone(),
        to: dest.clone(),
    })
}

/// Sum of the weights along a route. Errors if any edge is unknown or has no
/// weight.
pub fn route_travel_time(
    net: &RoadNetwork,
    route: &Route,
    weights: &EdgeWeights,
) -> Result<f64, NetError> {
    let mut total = 0.0;
    for edge_id in route.edges() {
        net.edge(edge_id)?;
        total += weights
            .get(edge_id)
            .copied()
            .ok_or_else(|| NetError::MissingWeight(edge_id.clone()))?;
    }
    Ok(total)
}
