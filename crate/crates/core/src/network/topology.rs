use std::collections::HashMap;

use super::{Network, Violation};
use crate::error::{Error, Result};

/// Index-based view of a valid network. Node 0 is the source; children are
/// listed in id order so traversals are deterministic.
#[derive(Debug, Clone)]
pub(crate) struct Topology {
    pub ids: Vec<String>,
    pub index: HashMap<String, usize>,
    pub parent: Vec<Option<usize>>,
    /// Resistance of the edge into each node (0 for the source).
    pub k_in: Vec<f64>,
    /// Position of the edge into each node within `Network::edges`.
    pub edge_in: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Demand nodes in lexicographic id order.
    pub sinks: Vec<usize>,
    pub sink_slot: Vec<Option<usize>>,
    /// Pre-order from the source.
    pub preorder: Vec<usize>,
}

impl Topology {
    /// Builds the indexed tree. Head-related violations are tolerated here;
    /// callers that need positive driving head check it themselves.
    pub fn new(net: &Network) -> Result<Self> {
        let violations: Vec<Violation> = net
            .validate()
            .into_iter()
            .filter(|v| !matches!(v, Violation::NoDrivingHead { .. }))
            .collect();
        if !violations.is_empty() {
            return Err(Error::InvalidNetwork(violations));
        }

        let mut ids: Vec<String> = vec![net.source.id.clone()];
        ids.extend(
            net.nodes()
                .into_iter()
                .filter(|&n| n != net.source.id)
                .map(String::from),
        );
        let index: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let n = ids.len();
        let mut parent = vec![None; n];
        let mut k_in = vec![0.0; n];
        let mut edge_in = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (ei, e) in net.edges.iter().enumerate() {
            let u = index[&e.from];
            let v = index[&e.to];
            parent[v] = Some(u);
            k_in[v] = e.k;
            edge_in[v] = Some(ei);
            children[u].push(v);
        }
        for cs in &mut children {
            cs.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        }
        let sinks: Vec<usize> = net.demands.keys().map(|id| index[id]).collect();
        let mut sink_slot = vec![None; n];
        for (slot, &s) in sinks.iter().enumerate() {
            sink_slot[s] = Some(slot);
        }
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![0usize];
        while let Some(u) = stack.pop() {
            preorder.push(u);
            stack.extend(children[u].iter().rev().copied());
        }

        Ok(Topology {
            ids,
            index,
            parent,
            k_in,
            edge_in,
            children,
            sinks,
            sink_slot,
            preorder,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_sink(&self, node: usize) -> bool {
        self.sink_slot[node].is_some()
    }

    /// Nodes on the path from the source down to `node`, excluding the source.
    pub fn path_from_source(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(p) = self.parent[cur] {
            path.push(cur);
            cur = p;
        }
        path.reverse();
        path
    }
}
