//! Independent reference solver: nested bisection on edge flows, one edge at
//! a time, with no use of equivalent resistances.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use valvetime_core::{Network, ValveConfiguration, ValveState};

pub struct Oracle<'a> {
    net: &'a Network,
    children: HashMap<&'a str, Vec<(&'a str, f64)>>,
    valves: &'a BTreeMap<String, ValveState>,
}

impl<'a> Oracle<'a> {
    pub fn new(net: &'a Network, config: &'a ValveConfiguration) -> Self {
        let mut children: HashMap<&str, Vec<(&str, f64)>> = HashMap::new();
        for e in &net.edges {
            children.entry(e.from.as_str()).or_default().push((e.to.as_str(), e.k));
        }
        Oracle {
            net,
            children,
            valves: &config.valves,
        }
    }

    /// Flow leaving `node` when it is held at `head`.
    fn outflow(&self, node: &str, head: f64) -> f64 {
        self.children
            .get(node)
            .map(|cs| cs.iter().map(|&(c, k)| self.edge_flow(c, k, head)).sum())
            .unwrap_or(0.0)
    }

    /// Flow on the edge into `child` when its parent sits at `head`.
    fn edge_flow(&self, child: &str, k: f64, head: f64) -> f64 {
        let n = self.net.exponent;
        let h0 = self.net.sink_head;
        let avail = head - h0;
        if avail <= 0.0 {
            return 0.0;
        }
        if let Some(state) = self.valves.get(child) {
            return match state {
                ValveState::Closed => 0.0,
                ValveState::Open { kv } => {
                    let r = k + kv;
                    assert!(r > 0.0, "reference solver needs positive resistance");
                    (avail / r).powf(1.0 / n)
                }
            };
        }
        if k == 0.0 {
            return self.outflow(child, head);
        }
        // q = outflow(child, head − k·qⁿ); the left side minus the right side
        // increases in q
        let mut lo = 0.0;
        let mut hi = (avail / k).powf(1.0 / n);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mid - self.outflow(child, head - k * mid.powf(n)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sink_flows(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        self.collect(&self.net.source.id, self.net.source.head, &mut out);
        for id in self.net.demands.keys() {
            out.entry(id.clone()).or_insert(0.0);
        }
        out
    }

    fn collect(&self, node: &str, head: f64, out: &mut BTreeMap<String, f64>) {
        let Some(cs) = self.children.get(node) else {
            return;
        };
        for &(c, k) in cs {
            let q = self.edge_flow(c, k, head);
            if self.valves.contains_key(c) {
                out.insert(c.to_string(), q);
            } else {
                self.collect(c, head - k * q.powf(self.net.exponent), out);
            }
        }
    }
}

pub fn assert_close(a: f64, b: f64, rel: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1e-300);
    assert!(
        (a - b).abs() <= rel * scale,
        "{what}: {a} vs {b} (rel {:e})",
        (a - b).abs() / scale
    );
}
