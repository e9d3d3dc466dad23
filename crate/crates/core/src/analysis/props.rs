//! Finite-perturbation checks of how a network responds to throttling one
//! valve, and of the power inequalities behind the ratio bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hydraulics::{FlowState, HydraulicModel, ValveConfiguration, ValveState};
use crate::network::Network;

pub const PROPERTY_TOLERANCE: f64 = 1e-9;
pub const POWER_TOLERANCE: f64 = 1e-12;
/// Target accuracy on the throttled flow when searching for a valve setting.
const FLOW_TARGET_TOLERANCE: f64 = 1e-10;

/// Outcome of one asserted property across all perturbation steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub passed: bool,
    /// Most negative slack seen (the property holds when slack ≥ −tolerance).
    pub worst_slack: f64,
    pub tolerance: f64,
    pub witness: Option<String>,
}

impl PropertyVerdict {
    fn new(tolerance: f64) -> Self {
        PropertyVerdict {
            passed: true,
            worst_slack: f64::INFINITY,
            tolerance,
            witness: None,
        }
    }

    fn observe(&mut self, slack: f64, witness: impl FnOnce() -> String) {
        if slack < self.worst_slack {
            self.worst_slack = slack;
            if slack < -self.tolerance {
                self.passed = false;
                self.witness = Some(witness());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityVerdict {
    /// Throttling a valve never raises its own flow.
    pub own_flow_nonincreasing: PropertyVerdict,
    /// ... and never lowers any other sink's flow.
    pub other_flows_nondecreasing: PropertyVerdict,
    /// The others gain at most what the throttled sink loses.
    pub loss_covers_gains: PropertyVerdict,
    /// No node head drops.
    pub heads_nondecreasing: PropertyVerdict,
}

impl MonotonicityVerdict {
    pub fn passed(&self) -> bool {
        self.own_flow_nonincreasing.passed
            && self.other_flows_nondecreasing.passed
            && self.loss_covers_gains.passed
            && self.heads_nondecreasing.passed
    }
}

/// Ordering of valve states by resistance, closed being the largest.
fn resistance_rank(state: ValveState) -> f64 {
    state.kv().unwrap_or(f64::INFINITY)
}

/// Throttles `valve` through `kv_steps` (ascending, closed last) starting
/// from `config` and checks the response after every step.
pub fn check_valve_closure_monotonicity(
    net: &Network,
    config: &ValveConfiguration,
    valve: &str,
    kv_steps: &[ValveState],
) -> Result<MonotonicityVerdict> {
    check_monotonicity_observed(net, config, valve, kv_steps, &mut |_| {})
}

pub(crate) fn check_monotonicity_observed(
    net: &Network,
    config: &ValveConfiguration,
    valve: &str,
    kv_steps: &[ValveState],
    observe: &mut dyn FnMut(&FlowState),
) -> Result<MonotonicityVerdict> {
    let model = HydraulicModel::new(net)?;
    let slot = net
        .demand_nodes()
        .iter()
        .position(|&s| s == valve)
        .ok_or_else(|| Error::UnknownNode(valve.to_string()))?;
    let start = config.states_for(net)?[slot];
    let mut sequence = vec![start];
    sequence.extend_from_slice(kv_steps);
    if sequence
        .windows(2)
        .any(|w| resistance_rank(w[1]) < resistance_rank(w[0]))
    {
        return Err(Error::Domain(
            "valve steps must not reduce the valve resistance".into(),
        ));
    }

    let mut states = Vec::with_capacity(sequence.len());
    for &s in &sequence {
        let mut c = config.clone();
        c.set(valve, s);
        let state = model.solve(&c)?;
        observe(&state);
        states.push(state);
    }

    let flow_scale = states
        .iter()
        .flat_map(|s| s.sink_flows.values())
        .fold(1.0f64, |a, &b| a.max(b));
    let head_scale = states
        .iter()
        .flat_map(|s| s.node_heads.values())
        .fold(1.0f64, |a, &b| a.max(b.abs()));
    let flow_tol = PROPERTY_TOLERANCE * flow_scale;
    let head_tol = PROPERTY_TOLERANCE * head_scale;

    let mut own = PropertyVerdict::new(flow_tol);
    let mut others = PropertyVerdict::new(flow_tol);
    let mut covers = PropertyVerdict::new(flow_tol);
    let mut heads = PropertyVerdict::new(head_tol);
    for (step, pair) in states.windows(2).enumerate() {
        let (before, after) = (&pair[0], &pair[1]);
        let loss = before.sink_flows[valve] - after.sink_flows[valve];
        own.observe(loss, || format!("step {step}: flow into {valve} rose by {}", -loss));
        let mut gains = 0.0;
        for (id, &f_after) in &after.sink_flows {
            if id == valve {
                continue;
            }
            let gain = f_after - before.sink_flows[id];
            gains += gain;
            others.observe(gain, || format!("step {step}: flow into {id} fell by {}", -gain));
        }
        covers.observe(loss - gains, || {
            format!("step {step}: others gained {gains} while {valve} lost {loss}")
        });
        for (id, &h_after) in &after.node_heads {
            let rise = h_after - before.node_heads[id];
            heads.observe(rise, || format!("step {step}: head at {id} fell by {}", -rise));
        }
    }
    Ok(MonotonicityVerdict {
        own_flow_nonincreasing: own,
        other_flows_nondecreasing: others,
        loss_covers_gains: covers,
        heads_nondecreasing: heads,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityVerdict {
    pub initial_flow: f64,
    pub delta: f64,
    /// Valve resistances reducing the flow by `delta` and `2·delta`.
    pub kv_first: f64,
    pub kv_second: f64,
    /// Gain of all other sinks over the first and second decrement.
    pub gain_first: f64,
    pub gain_second: f64,
    pub passed: bool,
}

/// Reduces the flow through `valve` twice by `delta` and checks that the
/// second reduction helps the other sinks no more than the first.
pub fn check_concavity(
    net: &Network,
    config: &ValveConfiguration,
    valve: &str,
    delta: f64,
) -> Result<ConcavityVerdict> {
    check_concavity_observed(net, config, valve, delta, &mut |_| {})
}

pub(crate) fn check_concavity_observed(
    net: &Network,
    config: &ValveConfiguration,
    valve: &str,
    delta: f64,
    observe: &mut dyn FnMut(&FlowState),
) -> Result<ConcavityVerdict> {
    let model = HydraulicModel::new(net)?;
    let kv0 = match config.valves.get(valve) {
        None => return Err(Error::UnknownNode(valve.to_string())),
        Some(ValveState::Closed) => {
            return Err(Error::Domain(format!("valve {valve} must be open")))
        }
        Some(ValveState::Open { kv }) => *kv,
    };
    let base = model.solve(config)?;
    observe(&base);
    let q0 = base.sink_flows[valve];
    if !(delta > 0.0 && q0 >= 2.0 * delta) {
        return Err(Error::UnreachableTarget(format!(
            "flow {q0} into {valve} cannot drop by twice {delta}"
        )));
    }
    let tol = FLOW_TARGET_TOLERANCE * q0.max(1.0);
    let (kv1, first) = throttle_to(&model, config, valve, kv0, q0 - delta, tol)?;
    let (kv2, second) = throttle_to(&model, config, valve, kv1, q0 - 2.0 * delta, tol)?;
    observe(&first);
    observe(&second);

    let others = |s: &FlowState| -> f64 {
        s.sink_flows
            .iter()
            .filter(|(id, _)| id.as_str() != valve)
            .map(|(_, f)| f)
            .sum()
    };
    let gain_first = others(&first) - others(&base);
    let gain_second = others(&second) - others(&first);
    let scale = q0.max(1.0);
    Ok(ConcavityVerdict {
        initial_flow: q0,
        delta,
        kv_first: kv1,
        kv_second: kv2,
        gain_first,
        gain_second,
        passed: gain_first >= gain_second - PROPERTY_TOLERANCE * scale,
    })
}

/// Finds a valve resistance at least `kv_lo` giving `target` flow into
/// `valve`, by bisection (geometric while the bracket is wide).
fn throttle_to(
    model: &HydraulicModel,
    config: &ValveConfiguration,
    valve: &str,
    kv_lo: f64,
    target: f64,
    tol: f64,
) -> Result<(f64, FlowState)> {
    let solve = |kv: f64| -> Result<FlowState> {
        let mut c = config.clone();
        c.set(valve, ValveState::Open { kv });
        model.solve(&c)
    };
    let mut lo = kv_lo;
    let mut hi = kv_lo.max(1.0);
    let mut state = solve(hi)?;
    while state.sink_flows[valve] > target {
        lo = hi;
        hi *= 4.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(Error::UnreachableTarget(format!(
                "no valve setting brings {valve} down to {target}"
            )));
        }
        state = solve(hi)?;
    }
    // invariant: flow at lo is above target, flow at hi is at or below it
    for _ in 0..4000 {
        let f = state.sink_flows[valve];
        if (f - target).abs() <= tol {
            return Ok((hi, state));
        }
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let s = solve(mid)?;
        let f = s.sink_flows[valve];
        if (f - target).abs() <= tol {
            return Ok((mid, s));
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
            state = s;
        }
    }
    Err(Error::UnreachableTarget(format!(
        "valve search for {valve} stalled at flow {}, target {target}",
        state.sink_flows[valve]
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerVerdict {
    /// `(a + b)^(1/n) ≤ a^(1/n) + b^(1/n)` for every pair.
    pub subadditive: bool,
    /// `Σ xᵢ^(1/n) / (Σ xᵢ)^(1/n)`. An all-zero input takes the limit along
    /// equal entries, which is the bound.
    pub ratio: f64,
    /// `m^(1−1/n)` for `m` entries.
    pub bound: f64,
    pub within_bound: bool,
    /// The ratio reaches the bound.
    pub attains_bound: bool,
    pub all_equal: bool,
}

impl PowerVerdict {
    /// Both inequalities hold, and for `n > 1` the bound is reached exactly
    /// when all entries are equal. At `n = 1` the ratio is identically 1.
    pub fn passed(&self, n: f64) -> bool {
        self.subadditive
            && self.within_bound
            && (n == 1.0 || self.attains_bound == self.all_equal)
    }
}

pub fn check_power_inequalities(xs: &[f64], n: f64) -> Result<PowerVerdict> {
    if xs.is_empty() {
        return Err(Error::Domain("at least one value is required".into()));
    }
    if xs.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(Error::Domain("values must be finite and non-negative".into()));
    }
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::Domain(format!("exponent must be at least 1, got {n}")));
    }
    let inv = 1.0 / n;
    let roots: Vec<f64> = xs.iter().map(|x| x.powf(inv)).collect();
    let mut subadditive = true;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let lhs = (xs[i] + xs[j]).powf(inv);
            let rhs = roots[i] + roots[j];
            if lhs > rhs + POWER_TOLERANCE * rhs.max(1.0) {
                subadditive = false;
            }
        }
    }
    let total: f64 = xs.iter().sum();
    let bound = (xs.len() as f64).powf(1.0 - inv);
    let ratio = if total == 0.0 {
        bound
    } else {
        roots.iter().sum::<f64>() / total.powf(inv)
    };
    let max = xs.iter().copied().fold(0.0, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let all_equal = max - min <= POWER_TOLERANCE * max.max(1.0);
    Ok(PowerVerdict {
        subadditive,
        ratio,
        bound,
        within_bound: ratio <= bound + POWER_TOLERANCE,
        attains_bound: (bound - ratio).abs() <= POWER_TOLERANCE,
        all_equal,
    })
}
