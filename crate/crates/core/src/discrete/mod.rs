//! ON/OFF valve control.
//!
//! Delivered volume depends only on how long each open set is held, not on
//! the order, so the fastest discrete operation is a linear program over all
//! open sets. Schedule S, the greedy policy of opening everything and
//! closing each valve as its demand completes, is simulated event by event.

mod lp;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

pub use lp::{solve_min_time_lp, LpProblem, LpSolution};

use crate::error::{Error, Result};
use crate::hydraulics::{HydraulicModel, ValveConfiguration, ValveState};
use crate::network::{Demands, Network};

/// Largest number of sinks whose open sets are enumerated.
pub const MAX_ENUMERATED_SINKS: usize = 20;

/// Flows below this are treated as no progress when timing events.
const FLOW_FLOOR: f64 = 1e-15;
/// Sinks finishing within this relative margin of the next event close with it.
const EVENT_TOLERANCE: f64 = 1e-12;

/// One open set and the sink flows it produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumeratedConfiguration {
    pub open_set: Vec<String>,
    /// Sink flows in demand-node order.
    pub flows: Vec<f64>,
}

impl EnumeratedConfiguration {
    pub fn config(&self, net: &Network) -> ValveConfiguration {
        let mut config = ValveConfiguration::uniform(net, ValveState::Closed);
        for id in &self.open_set {
            config.set(id, ValveState::FULLY_OPEN);
        }
        config
    }
}

/// Every non-empty open set of `restrict_to` (all demand nodes by default),
/// ordered by subset index: bit `i` of the index opens the `i`-th candidate
/// in id order. Sinks outside the candidates stay closed.
pub fn enumerate_configurations(
    net: &Network,
    restrict_to: Option<&[String]>,
) -> Result<Vec<EnumeratedConfiguration>> {
    let model = HydraulicModel::new(net)?;
    enumerate_with_model(&model, restrict_to)
}

pub(crate) fn enumerate_with_model(
    model: &HydraulicModel,
    restrict_to: Option<&[String]>,
) -> Result<Vec<EnumeratedConfiguration>> {
    let net = model.network();
    let ids = net.demand_nodes();
    let candidates: Vec<usize> = match restrict_to {
        None => (0..ids.len()).collect(),
        Some(subset) => {
            let mut slots = Vec::with_capacity(subset.len());
            for id in subset {
                let slot = ids
                    .iter()
                    .position(|s| s == id)
                    .ok_or_else(|| Error::UnknownNode(id.clone()))?;
                slots.push(slot);
            }
            slots.sort_unstable();
            slots.dedup();
            slots
        }
    };
    if candidates.len() > MAX_ENUMERATED_SINKS {
        return Err(Error::TooManySinks {
            count: candidates.len(),
            cap: MAX_ENUMERATED_SINKS,
        });
    }
    let count = 1usize << candidates.len();
    (1..count)
        .into_par_iter()
        .map(|mask| {
            let mut states = vec![ValveState::Closed; ids.len()];
            let mut open_set = Vec::new();
            for (bit, &slot) in candidates.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    states[slot] = ValveState::FULLY_OPEN;
                    open_set.push(ids[slot].to_string());
                }
            }
            Ok(EnumeratedConfiguration {
                open_set,
                flows: model.sink_flows(&states)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleStep {
    pub config: ValveConfiguration,
    pub duration: f64,
    pub sink_flows: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub steps: Vec<ScheduleStep>,
    pub total_time: f64,
    pub delivered: BTreeMap<String, f64>,
}

impl Schedule {
    fn from_steps(steps: Vec<ScheduleStep>, sinks: &[&str]) -> Schedule {
        let total_time = steps.iter().map(|s| s.duration).sum();
        let delivered = sinks
            .iter()
            .map(|&id| {
                let v: f64 = steps.iter().map(|s| s.duration * s.sink_flows[id]).sum();
                (id.to_string(), v)
            })
            .collect();
        Schedule {
            steps,
            total_time,
            delivered,
        }
    }
}

/// Greedy schedule: open every valve with remaining demand, hold until the
/// next sink completes, close it, repeat.
pub fn schedule_s(net: &Network, demands: &Demands) -> Result<Schedule> {
    let model = HydraulicModel::new(net)?;
    schedule_s_with_model(&model, demands)
}

pub(crate) fn schedule_s_with_model(model: &HydraulicModel, demands: &Demands) -> Result<Schedule> {
    let net = model.network();
    let d = net.demands_for(demands)?;
    if !d.iter().any(|&x| x > 0.0) {
        return Err(Error::Domain("total demand must be positive".into()));
    }
    let ids = net.demand_nodes();
    let mut remaining = d.clone();
    let mut open: Vec<bool> = d.iter().map(|&x| x > 0.0).collect();
    let mut steps = Vec::new();

    while open.iter().any(|&o| o) {
        let states: Vec<ValveState> = open
            .iter()
            .map(|&o| if o { ValveState::FULLY_OPEN } else { ValveState::Closed })
            .collect();
        let flows = model.sink_flows(&states)?;
        let finish: Vec<Option<f64>> = (0..d.len())
            .map(|i| (open[i] && flows[i] > FLOW_FLOOR).then(|| remaining[i] / flows[i]))
            .collect();
        let Some(tau) = finish.iter().flatten().copied().reduce(f64::min) else {
            return Err(Error::Stalled(
                (0..d.len())
                    .filter(|&i| open[i])
                    .map(|i| ids[i].to_string())
                    .collect(),
            ));
        };
        for i in 0..d.len() {
            if !open[i] {
                continue;
            }
            match finish[i] {
                Some(t) if t <= tau * (1.0 + EVENT_TOLERANCE) => {
                    remaining[i] = 0.0;
                    open[i] = false;
                }
                _ => remaining[i] -= tau * flows[i],
            }
        }
        steps.push(ScheduleStep {
            config: ValveConfiguration::from_states(net, &states),
            duration: tau,
            sink_flows: ids.iter().map(|s| s.to_string()).zip(flows).collect(),
        });
    }
    Ok(Schedule::from_steps(steps, &ids))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteOptimum {
    pub t_d_opt: f64,
    pub schedule: Schedule,
}

/// Fastest ON/OFF operation: the best time-sharing of all open sets of the
/// sinks with positive demand.
pub fn optimal_discrete(net: &Network, demands: &Demands) -> Result<DiscreteOptimum> {
    let model = HydraulicModel::new(net)?;
    optimal_discrete_with_model(&model, demands)
}

pub(crate) fn optimal_discrete_with_model(
    model: &HydraulicModel,
    demands: &Demands,
) -> Result<DiscreteOptimum> {
    let net = model.network();
    let d = net.demands_for(demands)?;
    let positive: Vec<String> = net
        .demands
        .keys()
        .zip(&d)
        .filter(|(_, &x)| x > 0.0)
        .map(|(id, _)| id.clone())
        .collect();
    if positive.is_empty() {
        return Err(Error::Domain("total demand must be positive".into()));
    }
    let entries = enumerate_with_model(model, Some(&positive))?;
    let problem = LpProblem {
        columns: entries.iter().map(|e| e.flows.clone()).collect(),
        rhs: d,
    };
    let solution = solve_min_time_lp(&problem)?;

    let mut active: Vec<usize> = (0..entries.len())
        .filter(|&j| solution.weights[j] > 0.0)
        .collect();
    // larger open sets first; subset index breaks ties
    active.sort_by_key(|&j| std::cmp::Reverse(entries[j].open_set.len()));
    let ids = net.demand_nodes();
    let steps = active
        .iter()
        .map(|&j| ScheduleStep {
            config: entries[j].config(net),
            duration: solution.weights[j],
            sink_flows: ids
                .iter()
                .map(|s| s.to_string())
                .zip(entries[j].flows.iter().copied())
                .collect(),
        })
        .collect();
    let schedule = Schedule::from_steps(steps, &ids);
    Ok(DiscreteOptimum {
        t_d_opt: schedule.total_time,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    fn star(flows_k: &[f64], demands: &[f64]) -> Network {
        let mut edges = Vec::new();
        let mut d = Demands::new();
        for (i, (&k, &x)) in flows_k.iter().zip(demands).enumerate() {
            edges.push(Edge::new("src", format!("s{i}"), k));
            d.insert(format!("s{i}"), x);
        }
        Network::new(2.0, "src", 1.0, 0.0, edges, d)
    }

    fn class_c_m2() -> Network {
        let mut demands = Demands::new();
        demands.insert("s1".into(), 1.0);
        demands.insert("s2".into(), 1.0);
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
            demands,
        )
    }

    #[test]
    fn star_configurations_are_independent() {
        let net = star(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        let all = enumerate_configurations(&net, None).unwrap();
        assert_eq!(all.len(), 7);
        let full = &all[6];
        for e in &all {
            for (i, id) in net.demand_nodes().iter().enumerate() {
                if e.open_set.iter().any(|s| s == id) {
                    assert_eq!(e.flows[i], full.flows[i]);
                } else {
                    assert_eq!(e.flows[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn class_c_open_sets() {
        let net = class_c_m2();
        let all = enumerate_configurations(&net, None).unwrap();
        // masks 1 = {s1}, 2 = {s2}, 3 = {s1, s2}
        assert_eq!(all[2].flows[1], 0.0);
        assert!((all[2].flows[0] - 7f64.sqrt()).abs() < 1e-14);
        assert_eq!(all[1].open_set, vec!["s2".to_string()]);
        assert!((all[1].flows[1] - 1.322876).abs() < 1e-6);
    }

    #[test]
    fn enumeration_cap() {
        let k = vec![1.0; 21];
        let net = star(&k, &k);
        assert!(matches!(
            enumerate_configurations(&net, None),
            Err(Error::TooManySinks { count: 21, cap: 20 })
        ));
    }

    #[test]
    fn class_c_schedule_s() {
        let net = class_c_m2();
        let s = schedule_s(&net, &net.demands).unwrap();
        assert_eq!(s.steps.len(), 2);
        assert!((s.steps[0].duration - 1.0 / 7f64.sqrt()).abs() < 1e-12);
        assert!((s.steps[1].duration - 0.755929).abs() < 1e-6);
        assert!((s.total_time - 3.0 / 7f64.sqrt()).abs() < 1e-12);
        assert!((s.delivered["s1"] - 1.0).abs() < 1e-12);
        assert!((s.delivered["s2"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_star_finishes_in_one_step() {
        let net = star(&[1.0, 1.0], &[1.0, 1.0]);
        let s = schedule_s(&net, &net.demands).unwrap();
        assert_eq!(s.steps.len(), 1);
        assert!((s.total_time - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_demand_sinks_never_open() {
        let net = star(&[1.0, 1.0], &[1.0, 0.0]);
        let s = schedule_s(&net, &net.demands).unwrap();
        assert_eq!(s.steps[0].config.valves["s1"], ValveState::Closed);
        assert_eq!(s.delivered["s1"], 0.0);
    }

    #[test]
    fn class_c_optimum_equals_schedule_s() {
        let net = class_c_m2();
        let opt = optimal_discrete(&net, &net.demands).unwrap();
        assert!((opt.t_d_opt - 3.0 / 7f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn symmetric_star_optimum() {
        let net = star(&[1.0, 1.0], &[1.0, 1.0]);
        let opt = optimal_discrete(&net, &net.demands).unwrap();
        assert!((opt.t_d_opt - 1.0).abs() < 1e-12);
        assert_eq!(opt.schedule.steps.len(), 1);
    }

    #[test]
    fn y_network_optimum_is_fully_open() {
        let mut demands = Demands::new();
        demands.insert("a".into(), 1.0);
        demands.insert("b".into(), 1.0);
        let net = Network::new(
            2.0,
            "src",
            3.0,
            0.0,
            vec![
                Edge::new("src", "j", 1.0),
                Edge::new("j", "a", 1.0),
                Edge::new("j", "b", 1.0),
            ],
            demands,
        );
        let opt = optimal_discrete(&net, &net.demands).unwrap();
        assert!((opt.t_d_opt - 1.290994).abs() < 1e-6);
    }
}
