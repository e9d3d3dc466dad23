//! Steady-state flows and heads of a tree network under one valve setting.
//!
//! Every sink sits at the common head `h0` and every edge obeys `ΔH = k·Qⁿ`
//! with the same exponent, so the flow drawn by any subtree held at head `H`
//! is an exact power law `((H − h0)/R)^(1/n)`. Equivalent resistances reduce
//! bottom-up: resistances in series add, and parallel branches combine
//! through their conductances `G = R^(−1/n)`, which add. Flows are then
//! distributed top-down in proportion to conductance, which keeps node
//! balance exact up to rounding.
//!
//! An open sink reached through zero total resistance has infinite
//! conductance. Its junction is pinned at `h0`: it swallows all flow that
//! arrives and starves everything else below that junction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum ValveState {
    Closed,
    /// Open with extra resistance `kv ≥ 0` added to the terminal edge.
    Open { kv: f64 },
}

impl ValveState {
    pub const FULLY_OPEN: ValveState = ValveState::Open { kv: 0.0 };

    pub fn is_open(&self) -> bool {
        matches!(self, ValveState::Open { .. })
    }

    /// Extra resistance, `None` when closed.
    pub fn kv(&self) -> Option<f64> {
        match *self {
            ValveState::Closed => None,
            ValveState::Open { kv } => Some(kv),
        }
    }
}

/// Valve state of every demand node, keyed by node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValveConfiguration {
    pub valves: BTreeMap<String, ValveState>,
}

impl ValveConfiguration {
    pub fn all_open(net: &Network) -> Self {
        Self::uniform(net, ValveState::FULLY_OPEN)
    }

    pub fn uniform(net: &Network, state: ValveState) -> Self {
        ValveConfiguration {
            valves: net.demands.keys().map(|id| (id.clone(), state)).collect(),
        }
    }

    /// Discrete configuration opening exactly the sinks whose bit is set in
    /// `mask`, bit `i` referring to the `i`-th demand node in id order.
    pub fn from_mask(net: &Network, mask: u64) -> Self {
        ValveConfiguration {
            valves: net
                .demands
                .keys()
                .enumerate()
                .map(|(i, id)| {
                    let state = if mask >> i & 1 == 1 {
                        ValveState::FULLY_OPEN
                    } else {
                        ValveState::Closed
                    };
                    (id.clone(), state)
                })
                .collect(),
        }
    }

    pub fn from_states(net: &Network, states: &[ValveState]) -> Self {
        ValveConfiguration {
            valves: net.demands.keys().cloned().zip(states.iter().copied()).collect(),
        }
    }

    /// Open with `kv = 0` or closed everywhere.
    pub fn is_discrete(&self) -> bool {
        self.valves
            .values()
            .all(|v| matches!(v, ValveState::Closed | ValveState::Open { kv: 0.0 }))
    }

    pub fn open_set(&self) -> Vec<&str> {
        self.valves
            .iter()
            .filter(|(_, v)| v.is_open())
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn set(&mut self, sink: &str, state: ValveState) {
        if let Some(v) = self.valves.get_mut(sink) {
            *v = state;
        }
    }

    /// States in demand-node order, after checking keys and values.
    pub fn states_for(&self, net: &Network) -> Result<Vec<ValveState>> {
        if self.valves.len() != net.demands.len()
            || !self.valves.keys().zip(net.demands.keys()).all(|(a, b)| a == b)
        {
            return Err(Error::ConfigMismatch(format!(
                "expected valves for {:?}, got {:?}",
                net.demand_nodes(),
                self.valves.keys().collect::<Vec<_>>()
            )));
        }
        for (id, v) in &self.valves {
            if let ValveState::Open { kv } = *v {
                if !kv.is_finite() || kv < 0.0 {
                    return Err(Error::ConfigMismatch(format!(
                        "valve {id} has invalid extra resistance {kv}"
                    )));
                }
            }
        }
        Ok(self.valves.values().copied().collect())
    }
}

/// Equilibrium of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowState {
    /// Flow on each edge, aligned with `Network::edges`.
    pub edge_flows: Vec<f64>,
    pub node_heads: BTreeMap<String, f64>,
    pub sink_flows: BTreeMap<String, f64>,
    pub config: ValveConfiguration,
}

impl FlowState {
    pub fn sink_flow_vector(&self) -> Vec<f64> {
        self.sink_flows.values().copied().collect()
    }

    pub fn total_outflow(&self) -> f64 {
        self.sink_flows.values().sum()
    }
}

/// Unbranched run of edges from a branching node down to the next sink or
/// junction. All edges on it carry the same flow.
#[derive(Debug, Clone)]
struct Chain {
    /// Nodes whose incoming edge lies on the chain; the last one is `end`.
    nodes: Vec<usize>,
    resistance: f64,
    end: usize,
}

/// Solver prepared for one network; reuse it across configurations.
#[derive(Debug, Clone)]
pub struct HydraulicModel {
    net: Network,
    topo: Topology,
    /// Chains hanging off each node (non-empty only for the source and junctions).
    chains: Vec<Vec<Chain>>,
    /// Nodes that own chains, children before parents.
    bottom_up: Vec<usize>,
    exponent: f64,
    sink_head: f64,
}

/// Raw solution in index space.
#[derive(Debug, Clone)]
pub(crate) struct RawState {
    pub edge_flows: Vec<f64>,
    pub heads: Vec<f64>,
    pub sink_flows: Vec<f64>,
}

impl HydraulicModel {
    pub fn new(net: &Network) -> Result<Self> {
        let topo = Topology::new(net)?;
        let mut chains = vec![Vec::new(); topo.len()];
        let mut owners = Vec::new();
        for &u in &topo.preorder {
            let branching = u == 0 || (!topo.is_sink(u) && topo.children[u].len() != 1);
            if !branching {
                continue;
            }
            owners.push(u);
            for &c in &topo.children[u] {
                let mut nodes = vec![c];
                let mut resistance = topo.k_in[c];
                let mut cur = c;
                while !topo.is_sink(cur) && topo.children[cur].len() == 1 {
                    cur = topo.children[cur][0];
                    nodes.push(cur);
                    resistance += topo.k_in[cur];
                }
                chains[u].push(Chain {
                    nodes,
                    resistance,
                    end: cur,
                });
            }
        }
        owners.reverse();
        Ok(HydraulicModel {
            net: net.clone(),
            exponent: net.exponent,
            sink_head: net.sink_head,
            topo,
            chains,
            bottom_up: owners,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub(crate) fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn sink_count(&self) -> usize {
        self.topo.sinks.len()
    }

    pub fn solve(&self, config: &ValveConfiguration) -> Result<FlowState> {
        let states = config.states_for(&self.net)?;
        let raw = self.solve_states(&states)?;
        Ok(self.to_flow_state(raw, config.clone()))
    }

    /// Sink flows only, in demand-node order.
    pub fn sink_flows(&self, states: &[ValveState]) -> Result<Vec<f64>> {
        Ok(self.solve_states(states)?.sink_flows)
    }

    /// Flow drawn by the subtree below `node` when `node` is held at `head`.
    pub fn subtree_characteristic(
        &self,
        config: &ValveConfiguration,
        node: &str,
        head: f64,
    ) -> Result<f64> {
        let states = config.states_for(&self.net)?;
        let &v = self
            .topo
            .index
            .get(node)
            .ok_or_else(|| Error::UnknownNode(node.to_string()))?;
        if head < self.sink_head {
            return Err(Error::Domain(format!(
                "head {head} is below the sink head {}",
                self.sink_head
            )));
        }
        let cond = self.conductances(&states)?;
        let g = if v == 0 || !self.chains[v].is_empty() {
            cond.node[v]
        } else {
            // interior of a chain: everything below flows through one edge run
            self.chain_below(v, &states, &cond)
        };
        let offset = head - self.sink_head;
        if offset == 0.0 || g == 0.0 {
            return Ok(0.0);
        }
        if g.is_infinite() {
            return Err(Error::Unbounded(node.to_string()));
        }
        Ok(offset.powf(1.0 / self.exponent) * g)
    }

    fn chain_below(&self, v: usize, states: &[ValveState], cond: &Conductances) -> f64 {
        if self.topo.is_sink(v) {
            return 0.0;
        }
        // v has exactly one child; walk to the chain end accumulating resistance
        let mut resistance = 0.0;
        let mut cur = v;
        while !self.topo.is_sink(cur) && self.topo.children[cur].len() == 1 {
            cur = self.topo.children[cur][0];
            resistance += self.topo.k_in[cur];
        }
        self.series_conductance(resistance, cur, states, &cond.node)
    }

    pub(crate) fn solve_states(&self, states: &[ValveState]) -> Result<RawState> {
        if states.len() != self.topo.sinks.len() {
            return Err(Error::ConfigMismatch(format!(
                "expected {} valve states, got {}",
                self.topo.sinks.len(),
                states.len()
            )));
        }
        let n = self.exponent;
        let h0 = self.sink_head;
        let h_src = self.net.source.head;
        let drive = h_src - h0;
        if drive < 0.0 {
            return Err(Error::NoDrivingHead {
                source_head: h_src,
                sink_head: h0,
            });
        }
        let cond = self.conductances(states)?;
        if cond.node[0].is_infinite() && drive > 0.0 {
            return Err(Error::Unbounded(self.topo.ids[0].clone()));
        }

        let len = self.topo.len();
        let mut heads = vec![h0; len];
        let mut edge_flows = vec![0.0; self.net.edges.len()];
        let mut sink_flows = vec![0.0; self.topo.sinks.len()];
        // head above h0, kept apart from `heads` to avoid cancellation
        let mut offsets = vec![0.0; len];
        heads[0] = h_src;
        offsets[0] = drive;

        // (owner, flow into owner); the source's inflow is implied by its head.
        let mut stack: Vec<(usize, Option<f64>)> = vec![(0, None)];
        while let Some((u, inflow)) = stack.pop() {
            let g_total = cond.node[u];
            for (ci, chain) in self.chains[u].iter().enumerate() {
                let g = cond.chain[u][ci];
                let q = match inflow {
                    None => {
                        if drive == 0.0 {
                            0.0
                        } else {
                            drive.powf(1.0 / n) * g
                        }
                    }
                    Some(q_in) => {
                        if q_in == 0.0 || g == 0.0 {
                            0.0
                        } else if g_total.is_infinite() {
                            if g.is_infinite() {
                                q_in
                            } else {
                                0.0
                            }
                        } else {
                            q_in * (g / g_total)
                        }
                    }
                };

                for &v in &chain.nodes {
                    if let Some(ei) = self.topo.edge_in[v] {
                        edge_flows[ei] = q;
                    }
                }
                let end = chain.end;
                if let Some(slot) = self.topo.sink_slot[end] {
                    sink_flows[slot] = q;
                }

                if q == 0.0 {
                    // no flow, no head loss; sinks stay at h0
                    for &v in &chain.nodes {
                        if !self.topo.is_sink(v) {
                            heads[v] = heads[u];
                            offsets[v] = offsets[u];
                        }
                    }
                } else {
                    // head offset just below the chain's last edge
                    let tail = match self.topo.sink_slot[end] {
                        Some(slot) => states[slot].kv().unwrap_or(0.0),
                        None => equivalent_resistance(cond.node[end], n),
                    };
                    // qⁿ from the owner's offset, so the chain's drops add up to it
                    let r_total = chain.resistance + tail;
                    let qn = if r_total > 0.0 { offsets[u] / r_total } else { 0.0 };
                    let mut acc = tail * qn;
                    if !self.topo.is_sink(end) {
                        offsets[end] = acc;
                    }
                    for w in chain.nodes.windows(2).rev() {
                        acc += self.topo.k_in[w[1]] * qn;
                        offsets[w[0]] = acc;
                    }
                    for &v in &chain.nodes {
                        heads[v] = h0 + offsets[v];
                    }
                }
                if !self.topo.is_sink(end) {
                    stack.push((end, Some(q)));
                }
            }
        }
        for h in &mut heads {
            *h = h.clamp(h0, h_src);
        }
        Ok(RawState {
            edge_flows,
            heads,
            sink_flows,
        })
    }

    fn series_conductance(
        &self,
        resistance: f64,
        end: usize,
        states: &[ValveState],
        node_g: &[f64],
    ) -> f64 {
        let n = self.exponent;
        let tail = match self.topo.sink_slot[end] {
            Some(slot) => match states[slot] {
                ValveState::Closed => return 0.0,
                ValveState::Open { kv } => kv,
            },
            None => equivalent_resistance(node_g[end], n),
        };
        conductance(resistance + tail, n)
    }

    fn conductances(&self, states: &[ValveState]) -> Result<Conductances> {
        let len = self.topo.len();
        let mut node = vec![0.0; len];
        let mut chain: Vec<Vec<f64>> = self.chains.iter().map(|c| vec![0.0; c.len()]).collect();
        for &u in &self.bottom_up {
            let mut total = 0.0;
            let mut pinned = 0usize;
            for (ci, c) in self.chains[u].iter().enumerate() {
                let g = self.series_conductance(c.resistance, c.end, states, &node);
                if g.is_infinite() {
                    pinned += 1;
                }
                chain[u][ci] = g;
                total += g;
            }
            if pinned > 1 {
                return Err(Error::IndeterminateSplit(self.topo.ids[u].clone()));
            }
            node[u] = total;
        }
        Ok(Conductances { node, chain })
    }

    fn to_flow_state(&self, raw: RawState, config: ValveConfiguration) -> FlowState {
        FlowState {
            edge_flows: raw.edge_flows,
            node_heads: self
                .topo
                .ids
                .iter()
                .cloned()
                .zip(raw.heads)
                .collect(),
            sink_flows: self
                .net
                .demands
                .keys()
                .cloned()
                .zip(raw.sink_flows)
                .collect(),
            config,
        }
    }
}

struct Conductances {
    node: Vec<f64>,
    chain: Vec<Vec<f64>>,
}

fn conductance(resistance: f64, n: f64) -> f64 {
    if resistance == 0.0 {
        f64::INFINITY
    } else if resistance.is_infinite() {
        0.0
    } else {
        resistance.powf(-1.0 / n)
    }
}

fn equivalent_resistance(conductance: f64, n: f64) -> f64 {
    if conductance.is_infinite() {
        0.0
    } else if conductance == 0.0 {
        f64::INFINITY
    } else {
        conductance.powf(-n)
    }
}

/// Equilibrium flows and heads of `net` under `config`.
pub fn solve_state(net: &Network, config: &ValveConfiguration) -> Result<FlowState> {
    HydraulicModel::new(net)?.solve(config)
}

/// Flow drawn by the subtree rooted at `node` when held at `head`.
pub fn subtree_characteristic(
    net: &Network,
    config: &ValveConfiguration,
    node: &str,
    head: f64,
) -> Result<f64> {
    HydraulicModel::new(net)?.subtree_characteristic(config, node, head)
}

/// Residual check of a flow state against node balance, the edge law and the
/// head bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub max_balance_residual: f64,
    pub balance_tolerance: f64,
    pub max_edge_law_excess: f64,
    pub head_bound_violations: usize,
    pub closed_valve_leaks: usize,
    pub passed: bool,
}

pub const BALANCE_TOLERANCE: f64 = 1e-9;
pub const EDGE_LAW_TOLERANCE: f64 = 1e-9;

/// Checks node balance within `1e−9·max(1, root outflow)` and the edge law
/// within `1e−9` relative, plus a floor of a few ulps of the largest head for
/// the subtraction that forms each head difference.
pub fn audit_flow_state(net: &Network, state: &FlowState) -> Result<AuditReport> {
    let topo = Topology::new(net)?;
    let states = state.config.states_for(net)?;
    let n = net.exponent;
    let h0 = net.sink_head;

    let root_out: f64 = topo.children[0]
        .iter()
        .map(|&c| state.edge_flows[topo.edge_in[c].unwrap()])
        .sum();
    let balance_tolerance = BALANCE_TOLERANCE * root_out.max(1.0);

    let head = |v: usize| state.node_heads[&topo.ids[v]];
    let head_scale = topo
        .ids
        .iter()
        .map(|id| state.node_heads[id].abs())
        .fold(0.0, f64::max);
    let floor = 8.0 * f64::EPSILON * head_scale;

    let mut max_balance: f64 = 0.0;
    let mut max_excess: f64 = 0.0;
    let mut head_bound_violations = 0;
    let mut closed_valve_leaks = 0;

    for v in 0..topo.len() {
        let h = head(v);
        if h < h0 || h > net.source.head {
            head_bound_violations += 1;
        }
        if v != 0 && !topo.is_sink(v) {
            let inflow = state.edge_flows[topo.edge_in[v].unwrap()];
            let outflow: f64 = topo.children[v]
                .iter()
                .map(|&c| state.edge_flows[topo.edge_in[c].unwrap()])
                .sum();
            max_balance = max_balance.max((inflow - outflow).abs());
        }
        if let Some(p) = topo.parent[v] {
            let q = state.edge_flows[topo.edge_in[v].unwrap()];
            let mut k_eff = topo.k_in[v];
            if let Some(slot) = topo.sink_slot[v] {
                match states[slot] {
                    ValveState::Closed => {
                        if q != 0.0 {
                            closed_valve_leaks += 1;
                        }
                        continue;
                    }
                    ValveState::Open { kv } => k_eff += kv,
                }
            }
            if q > 0.0 {
                let drop = head(p) - head(v);
                let law = k_eff * q.powf(n);
                let allowed = EDGE_LAW_TOLERANCE * drop.abs().max(law) + floor;
                max_excess = max_excess.max((drop - law).abs() - allowed);
            }
        }
    }

    let passed = max_balance <= balance_tolerance
        && max_excess <= 0.0
        && head_bound_violations == 0
        && closed_valve_leaks == 0;
    Ok(AuditReport {
        max_balance_residual: max_balance,
        balance_tolerance,
        max_edge_law_excess: max_excess,
        head_bound_violations,
        closed_valve_leaks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Demands, Edge};

    fn demands(ids: &[&str]) -> Demands {
        ids.iter().map(|id| (id.to_string(), 1.0)).collect()
    }

    fn single(k: f64, n: f64, head: f64) -> Network {
        Network::new(n, "src", head, 0.0, vec![Edge::new("src", "s1", k)], demands(&["s1"]))
    }

    fn y_network() -> Network {
        Network::new(
            2.0,
            "src",
            3.0,
            0.0,
            vec![
                Edge::new("src", "j", 1.0),
                Edge::new("j", "a", 1.0),
                Edge::new("j", "b", 1.0),
            ],
            demands(&["a", "b"]),
        )
    }

    fn class_c_m2() -> Network {
        Network::new(
            2.0,
            "src",
            7.0,
            0.0,
            vec![
                Edge::new("src", "t1", 1.0),
                Edge::new("t1", "s1", 0.0),
                Edge::new("t1", "s2", 3.0),
            ],
            demands(&["s1", "s2"]),
        )
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn characteristic_of_leaf_edge() {
        let net = single(1.0, 2.0, 4.0);
        let cfg = ValveConfiguration::all_open(&net);
        assert_close(subtree_characteristic(&net, &cfg, "src", 4.0).unwrap(), 2.0, 1e-15);
        assert_eq!(subtree_characteristic(&net, &cfg, "src", 0.0).unwrap(), 0.0);
        assert_eq!(subtree_characteristic(&net, &cfg, "s1", 3.0).unwrap(), 0.0);
    }

    #[test]
    fn characteristic_of_junction_with_two_leaves() {
        let net = y_network();
        let cfg = ValveConfiguration::all_open(&net);
        assert_close(subtree_characteristic(&net, &cfg, "j", 1.0).unwrap(), 2.0, 1e-15);
    }

    #[test]
    fn characteristic_is_unbounded_at_pinned_node() {
        let net = class_c_m2();
        let cfg = ValveConfiguration::all_open(&net);
        assert!(matches!(
            subtree_characteristic(&net, &cfg, "t1", 1.0),
            Err(Error::Unbounded(_))
        ));
        assert_eq!(subtree_characteristic(&net, &cfg, "t1", 0.0).unwrap(), 0.0);
        // finite once the pinning valve is closed
        let mut cfg = cfg;
        cfg.set("s1", ValveState::Closed);
        assert_close(
            subtree_characteristic(&net, &cfg, "t1", 3.0).unwrap(),
            1.0,
            1e-15,
        );
    }

    #[test]
    fn single_edge() {
        let net = single(1.0, 2.0, 4.0);
        let s = solve_state(&net, &ValveConfiguration::all_open(&net)).unwrap();
        assert_close(s.edge_flows[0], 2.0, 1e-15);
        assert_eq!(s.node_heads["s1"], 0.0);
    }

    #[test]
    fn series_chain() {
        let net = Network::new(
            2.0,
            "src",
            8.0,
            0.0,
            vec![Edge::new("src", "m", 1.0), Edge::new("m", "s1", 1.0)],
            demands(&["s1"]),
        );
        let s = solve_state(&net, &ValveConfiguration::all_open(&net)).unwrap();
        assert_close(s.edge_flows[0], 2.0, 1e-15);
        assert_close(s.edge_flows[1], 2.0, 1e-15);
        assert_close(s.node_heads["m"], 4.0, 1e-14);
    }

    #[test]
    fn y_network_split() {
        let net = y_network();
        let s = solve_state(&net, &ValveConfiguration::all_open(&net)).unwrap();
        // Q² + (Q/2)² = 3
        let trunk = (3.0f64 / 1.25).sqrt();
        assert_close(s.edge_flows[0], trunk, 1e-14);
        assert_close(trunk, 1.549193, 1e-6);
        assert_close(s.sink_flows["a"], 0.774597, 1e-6);
        assert_close(s.sink_flows["b"], trunk / 2.0, 1e-14);
        assert!(audit_flow_state(&net, &s).unwrap().passed);
    }

    #[test]
    fn head_pinning_starves_downstream() {
        let net = class_c_m2();
        let s = solve_state(&net, &ValveConfiguration::all_open(&net)).unwrap();
        assert_close(s.sink_flows["s1"], 7f64.sqrt(), 1e-14);
        assert_eq!(s.sink_flows["s2"], 0.0);
        assert_eq!(s.node_heads["t1"], 0.0);
        assert!(audit_flow_state(&net, &s).unwrap().passed);
    }

    #[test]
    fn closed_valves_carry_no_flow() {
        let net = y_network();
        let mut cfg = ValveConfiguration::all_open(&net);
        cfg.set("a", ValveState::Closed);
        let s = solve_state(&net, &cfg).unwrap();
        assert_eq!(s.sink_flows["a"], 0.0);
        assert_close(s.sink_flows["b"], (1.5f64).sqrt(), 1e-14);
        let audit = audit_flow_state(&net, &s).unwrap();
        assert!(audit.passed, "{audit:?}");
    }

    #[test]
    fn everything_closed_leaves_heads_at_source() {
        let net = y_network();
        let s = solve_state(&net, &ValveConfiguration::uniform(&net, ValveState::Closed)).unwrap();
        assert!(s.edge_flows.iter().all(|&q| q == 0.0));
        assert_eq!(s.node_heads["j"], 3.0);
        assert_eq!(s.node_heads["a"], 0.0);
    }

    #[test]
    fn zero_resistance_from_source_is_unbounded() {
        let net = single(0.0, 2.0, 4.0);
        assert!(matches!(
            solve_state(&net, &ValveConfiguration::all_open(&net)),
            Err(Error::Unbounded(_))
        ));
    }

    #[test]
    fn coincident_zero_sinks_are_indeterminate() {
        let net = Network::new(
            2.0,
            "src",
            4.0,
            0.0,
            vec![
                Edge::new("src", "j", 1.0),
                Edge::new("j", "a", 0.0),
                Edge::new("j", "b", 0.0),
            ],
            demands(&["a", "b"]),
        );
        assert!(matches!(
            solve_state(&net, &ValveConfiguration::all_open(&net)),
            Err(Error::IndeterminateSplit(id)) if id == "j"
        ));
    }

    #[test]
    fn source_below_sink_has_no_driving_head() {
        let mut net = single(1.0, 2.0, 4.0);
        net.source.head = -1.0;
        assert!(matches!(
            solve_state(&net, &ValveConfiguration::all_open(&net)),
            Err(Error::NoDrivingHead { .. })
        ));
    }

    #[test]
    fn config_must_cover_demand_nodes() {
        let net = y_network();
        let mut cfg = ValveConfiguration::all_open(&net);
        cfg.valves.remove("a");
        assert!(matches!(solve_state(&net, &cfg), Err(Error::ConfigMismatch(_))));
        let mut cfg = ValveConfiguration::all_open(&net);
        cfg.set("a", ValveState::Open { kv: -1.0 });
        assert!(matches!(solve_state(&net, &cfg), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn linear_exponent() {
        let net = single(2.0, 1.0, 4.0);
        let s = solve_state(&net, &ValveConfiguration::all_open(&net)).unwrap();
        assert_close(s.edge_flows[0], 2.0, 1e-15);
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let net = y_network();
        let cfg = ValveConfiguration::all_open(&net);
        let a = solve_state(&net, &cfg).unwrap();
        let b = solve_state(&net, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
