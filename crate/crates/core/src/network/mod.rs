//! Network model: a rooted tree of resistive edges fed by one source and
//! drained at leaf sinks that all sit at a common head.
//!
//! Head loss across an edge follows `ΔH = k·Qⁿ`. Demand nodes are exactly the
//! non-source leaves, and the edge into each demand node (its terminal edge)
//! carries the only controllable valve.

mod io;
mod topology;
mod transform;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{parse_network, to_json};
pub(crate) use topology::Topology;
pub use transform::{effective_depth, lump_coincident_sinks, DepthReport};

/// Per-sink demand volumes keyed by node id.
pub type Demands = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub id: String,
    pub head: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub k: f64,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, k: f64) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
            k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub exponent: f64,
    pub source: Source,
    pub sink_head: f64,
    pub edges: Vec<Edge>,
    pub demands: Demands,
}

impl Network {
    pub fn new(
        exponent: f64,
        source_id: impl Into<String>,
        source_head: f64,
        sink_head: f64,
        edges: Vec<Edge>,
        demands: Demands,
    ) -> Self {
        Network {
            exponent,
            source: Source {
                id: source_id.into(),
                head: source_head,
            },
            sink_head,
            edges,
            demands,
        }
    }

    /// Every node id mentioned by the source or an edge.
    pub fn nodes(&self) -> BTreeSet<&str> {
        let mut nodes = BTreeSet::new();
        nodes.insert(self.source.id.as_str());
        for e in &self.edges {
            nodes.insert(e.from.as_str());
            nodes.insert(e.to.as_str());
        }
        nodes
    }

    /// Demand node ids in lexicographic order. All per-sink vectors in this
    /// crate use this order.
    pub fn demand_nodes(&self) -> Vec<&str> {
        self.demands.keys().map(String::as_str).collect()
    }

    pub fn driving_head(&self) -> f64 {
        self.source.head - self.sink_head
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.values().sum()
    }

    /// Demand values aligned with [`Network::demand_nodes`].
    pub fn demand_vector(&self) -> Vec<f64> {
        self.demands.values().copied().collect()
    }

    /// Checks an externally supplied demand table against this network's
    /// demand nodes and returns it in demand-node order.
    pub fn demands_for(&self, demands: &Demands) -> crate::error::Result<Vec<f64>> {
        if demands.len() != self.demands.len()
            || !demands.keys().zip(self.demands.keys()).all(|(a, b)| a == b)
        {
            return Err(crate::error::Error::ConfigMismatch(format!(
                "demands must name exactly the demand nodes {:?}",
                self.demand_nodes()
            )));
        }
        if let Some((id, d)) = demands.iter().find(|(_, d)| !d.is_finite() || **d < 0.0) {
            return Err(crate::error::Error::Domain(format!(
                "demand of `{id}` must be finite and non-negative, got {d}"
            )));
        }
        Ok(demands.values().copied().collect())
    }

    /// Checks every structural and numeric invariant. An empty list means the
    /// network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        validate_network(self)
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

/// One violated network invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code")]
pub enum Violation {
    ExponentBelowOne { exponent: f64 },
    NonFinite { field: String },
    NegativeResistance { from: String, to: String, k: f64 },
    NoDrivingHead { source_head: f64, sink_head: f64 },
    SelfLoop { node: String },
    EdgeIntoSource { from: String },
    DuplicateEdge { from: String, to: String },
    MultipleParents { node: String },
    Cycle { node: String },
    Unreachable { node: String },
    UnknownDemandNode { node: String },
    DemandOnSource,
    DemandOnInternalNode { node: String },
    LeafWithoutDemand { node: String },
    NegativeDemand { node: String, demand: f64 },
    NoDemandNodes,
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::ExponentBelowOne { .. } => "ExponentBelowOne",
            Violation::NonFinite { .. } => "NonFinite",
            Violation::NegativeResistance { .. } => "NegativeResistance",
            Violation::NoDrivingHead { .. } => "NoDrivingHead",
            Violation::SelfLoop { .. } => "SelfLoop",
            Violation::EdgeIntoSource { .. } => "EdgeIntoSource",
            Violation::DuplicateEdge { .. } => "DuplicateEdge",
            Violation::MultipleParents { .. } => "MultipleParents",
            Violation::Cycle { .. } => "Cycle",
            Violation::Unreachable { .. } => "Unreachable",
            Violation::UnknownDemandNode { .. } => "UnknownDemandNode",
            Violation::DemandOnSource => "DemandOnSource",
            Violation::DemandOnInternalNode { .. } => "DemandOnInternalNode",
            Violation::LeafWithoutDemand { .. } => "LeafWithoutDemand",
            Violation::NegativeDemand { .. } => "NegativeDemand",
            Violation::NoDemandNodes => "NoDemandNodes",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ExponentBelowOne { exponent } => {
                write!(f, "ExponentBelowOne: exponent {exponent} < 1")
            }
            Violation::NonFinite { field } => write!(f, "NonFinite: {field}"),
            Violation::NegativeResistance { from, to, k } => {
                write!(f, "NegativeResistance: edge {from}->{to} has k = {k}")
            }
            Violation::NoDrivingHead {
                source_head,
                sink_head,
            } => write!(
                f,
                "NoDrivingHead: source head {source_head} does not exceed sink head {sink_head}"
            ),
            Violation::SelfLoop { node } => write!(f, "SelfLoop: {node}"),
            Violation::EdgeIntoSource { from } => write!(f, "EdgeIntoSource: from {from}"),
            Violation::DuplicateEdge { from, to } => write!(f, "DuplicateEdge: {from}->{to}"),
            Violation::MultipleParents { node } => write!(f, "MultipleParents: {node}"),
            Violation::Cycle { node } => write!(f, "Cycle: through {node}"),
            Violation::Unreachable { node } => write!(f, "Unreachable: {node}"),
            Violation::UnknownDemandNode { node } => write!(f, "UnknownDemandNode: {node}"),
            Violation::DemandOnSource => write!(f, "DemandOnSource"),
            Violation::DemandOnInternalNode { node } => {
                write!(f, "DemandOnInternalNode: {node}")
            }
            Violation::LeafWithoutDemand { node } => write!(f, "LeafWithoutDemand: {node}"),
            Violation::NegativeDemand { node, demand } => {
                write!(f, "NegativeDemand: {node} = {demand}")
            }
            Violation::NoDemandNodes => write!(f, "NoDemandNodes"),
        }
    }
}

pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();

    if !net.exponent.is_finite() {
        out.push(Violation::NonFinite {
            field: "exponent".into(),
        });
    } else if net.exponent < 1.0 {
        out.push(Violation::ExponentBelowOne {
            exponent: net.exponent,
        });
    }
    if !net.source.head.is_finite() {
        out.push(Violation::NonFinite {
            field: "source.head".into(),
        });
    }
    if !net.sink_head.is_finite() {
        out.push(Violation::NonFinite {
            field: "sink_head".into(),
        });
    }

    let source = net.source.id.as_str();
    let mut parent: HashMap<&str, &str> = HashMap::new();
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut seen_edges: BTreeSet<(&str, &str)> = BTreeSet::new();

    for e in &net.edges {
        if !e.k.is_finite() {
            out.push(Violation::NonFinite {
                field: format!("k({}->{})", e.from, e.to),
            });
        } else if e.k < 0.0 {
            out.push(Violation::NegativeResistance {
                from: e.from.clone(),
                to: e.to.clone(),
                k: e.k,
            });
        }
        if e.from == e.to {
            out.push(Violation::SelfLoop {
                node: e.from.clone(),
            });
            continue;
        }
        if !seen_edges.insert((e.from.as_str(), e.to.as_str())) {
            out.push(Violation::DuplicateEdge {
                from: e.from.clone(),
                to: e.to.clone(),
            });
            continue;
        }
        if e.to == source {
            out.push(Violation::EdgeIntoSource {
                from: e.from.clone(),
            });
        }
        if parent.contains_key(e.to.as_str()) {
            out.push(Violation::MultipleParents { node: e.to.clone() });
        } else {
            parent.insert(e.to.as_str(), e.from.as_str());
        }
        children
            .entry(e.from.as_str())
            .or_default()
            .push(e.to.as_str());
    }

    let nodes = net.nodes();

    // Cycles: follow parent pointers; a walk longer than the node count must loop.
    let mut cycle_reported: BTreeSet<&str> = BTreeSet::new();
    for &start in &nodes {
        let mut cur = start;
        let mut steps = 0usize;
        while let Some(&p) = parent.get(cur) {
            cur = p;
            steps += 1;
            if steps > nodes.len() {
                break;
            }
        }
        if steps > nodes.len() {
            // `cur` lies on the cycle; collect it to report once per cycle.
            let mut members = vec![cur];
            let mut n = parent[cur];
            while n != cur {
                members.push(n);
                n = parent[n];
            }
            let rep = *members.iter().min().unwrap();
            if cycle_reported.insert(rep) {
                out.push(Violation::Cycle { node: rep.into() });
            }
        }
    }

    // Reachability from the source.
    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![source];
    while let Some(n) = stack.pop() {
        if !reached.insert(n) {
            continue;
        }
        if let Some(cs) = children.get(n) {
            stack.extend(cs.iter().copied());
        }
    }
    for &n in &nodes {
        if !reached.contains(n) {
            out.push(Violation::Unreachable { node: n.into() });
        }
    }

    for (node, &d) in &net.demands {
        if !nodes.contains(node.as_str()) {
            out.push(Violation::UnknownDemandNode { node: node.clone() });
            continue;
        }
        if node == source {
            out.push(Violation::DemandOnSource);
        } else if children.contains_key(node.as_str()) {
            out.push(Violation::DemandOnInternalNode { node: node.clone() });
        }
        if !d.is_finite() {
            out.push(Violation::NonFinite {
                field: format!("demand({node})"),
            });
        } else if d < 0.0 {
            out.push(Violation::NegativeDemand {
                node: node.clone(),
                demand: d,
            });
        }
    }
    for &n in &nodes {
        if n != source && !children.contains_key(n) && !net.demands.contains_key(n) {
            out.push(Violation::LeafWithoutDemand { node: n.into() });
        }
    }
    if net.demands.is_empty() {
        out.push(Violation::NoDemandNodes);
    }

    let any_positive = net.demands.values().any(|&d| d > 0.0);
    if any_positive && net.source.head.is_finite() && net.sink_head.is_finite()
        && net.source.head <= net.sink_head
    {
        out.push(Violation::NoDrivingHead {
            source_head: net.source.head,
            sink_head: net.sink_head,
        });
    }

    out
}
