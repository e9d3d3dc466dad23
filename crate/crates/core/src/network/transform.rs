use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Edge, Network, Topology};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthReport {
    /// Effective depth: the largest number of positive-resistance edges on a
    /// source-to-demand-node path, floored at 1.
    pub m: usize,
    /// Plain edge count of the deepest source-to-demand-node path.
    pub raw_depth: usize,
    /// The network with every zero-resistance non-terminal edge contracted.
    pub contracted_network: Network,
    /// `(kept, absorbed)` pairs, in pre-order.
    pub contraction_log: Vec<(String, String)>,
}

/// Contracts zero-resistance edges and measures the depth of what remains.
///
/// Terminal edges are never contracted because that would put a demand on a
/// junction; a zero-resistance terminal edge simply adds nothing to `m`.
pub fn effective_depth(net: &Network) -> Result<DepthReport> {
    let topo = Topology::new(net)?;

    let mut m = 0usize;
    let mut raw_depth = 0usize;
    for &s in &topo.sinks {
        let path = topo.path_from_source(s);
        raw_depth = raw_depth.max(path.len());
        m = m.max(path.iter().filter(|&&v| topo.k_in[v] > 0.0).count());
    }
    if !topo.sinks.is_empty() {
        m = m.max(1);
    }

    // Representative of each node after contraction: the topmost node of its
    // zero-resistance run.
    let mut rep: Vec<usize> = (0..topo.len()).collect();
    let mut log = Vec::new();
    for &v in &topo.preorder {
        if let Some(p) = topo.parent[v] {
            if topo.k_in[v] == 0.0 && !topo.is_sink(v) {
                rep[v] = rep[p];
                log.push((topo.ids[rep[p]].clone(), topo.ids[v].clone()));
            }
        }
    }
    let edges = net
        .edges
        .iter()
        .filter_map(|e| {
            let v = topo.index[&e.to];
            if rep[v] != v {
                return None;
            }
            let u = rep[topo.index[&e.from]];
            Some(Edge::new(topo.ids[u].clone(), e.to.clone(), e.k))
        })
        .collect();
    let contracted_network = Network {
        edges,
        ..net.clone()
    };

    Ok(DepthReport {
        m,
        raw_depth,
        contracted_network,
        contraction_log: log,
    })
}

/// Merges demand nodes that reach the same junction exclusively through
/// zero-resistance edges into a single demand node carrying their summed
/// demand. The survivor keeps the smallest id of its group and hangs off the
/// junction by a zero-resistance edge.
pub fn lump_coincident_sinks(net: &Network) -> Result<Network> {
    let topo = Topology::new(net)?;

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &s in &topo.sinks {
        let mut anchor = s;
        while topo.k_in[anchor] == 0.0 {
            match topo.parent[anchor] {
                Some(p) => anchor = p,
                None => break,
            }
        }
        groups.entry(anchor).or_default().push(s);
    }

    let mut removed: BTreeSet<usize> = BTreeSet::new();
    let mut rewired: BTreeMap<usize, usize> = BTreeMap::new();
    let mut demands = net.demands.clone();
    for (&anchor, members) in &groups {
        if members.len() < 2 {
            continue;
        }
        // members follow sink order, so the first has the smallest id
        let keep = members[0];
        let total: f64 = members.iter().map(|&s| net.demands[&topo.ids[s]]).sum();
        demands.insert(topo.ids[keep].clone(), total);
        for &s in &members[1..] {
            demands.remove(&topo.ids[s]);
            removed.insert(s);
        }
        rewired.insert(keep, anchor);
    }
    if removed.is_empty() {
        return Ok(net.clone());
    }

    // Drop junctions left without children or demand.
    let mut child_count: Vec<usize> = vec![0; topo.len()];
    for v in 0..topo.len() {
        if removed.contains(&v) {
            continue;
        }
        let parent = rewired.get(&v).copied().or(topo.parent[v]);
        if let Some(p) = parent {
            child_count[p] += 1;
        }
    }
    let mut dead = removed.clone();
    loop {
        let mut changed = false;
        for v in 1..topo.len() {
            if dead.contains(&v) || topo.is_sink(v) || child_count[v] > 0 {
                continue;
            }
            dead.insert(v);
            if let Some(p) = rewired.get(&v).copied().or(topo.parent[v]) {
                child_count[p] -= 1;
            }
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let edges = net
        .edges
        .iter()
        .filter_map(|e| {
            let v = topo.index[&e.to];
            if dead.contains(&v) {
                return None;
            }
            match rewired.get(&v) {
                Some(&anchor) => Some(Edge::new(topo.ids[anchor].clone(), e.to.clone(), 0.0)),
                None => Some(e.clone()),
            }
        })
        .collect();

    Ok(Network {
        edges,
        demands,
        ..net.clone()
    })
}
