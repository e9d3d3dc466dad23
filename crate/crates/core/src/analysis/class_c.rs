//! Class C: a single resistive mainline whose taps each feed a sink through
//! a zero-resistance branch. Opening an upstream branch pins its tap at the
//! sink head and starves everything below, so ON/OFF operation can only
//! serve one tap at a time.

use serde::Serialize;

use crate::continuous::proportional_configuration;
use crate::discrete::schedule_s;
use crate::error::{Error, Result};
use crate::network::{Demands, Edge, Network};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCInstance {
    pub network: Network,
    pub mainline_resistances: Vec<f64>,
    /// Flow on each mainline edge during unit-time continuous delivery.
    pub mainline_flows: Vec<f64>,
    /// Demand of each tap, in mainline order.
    pub demands: Vec<f64>,
    #[serde(rename = "predicted_R")]
    pub predicted_r: f64,
}

/// Sink id of tap `i` (1-based).
pub fn tap_sink(i: usize) -> String {
    format!("s{i}")
}

fn tap_junction(i: usize) -> String {
    format!("t{i}")
}

fn check_mainline(k: &[f64], q: &[f64], n: f64) -> Result<()> {
    if k.is_empty() || k.len() != q.len() {
        return Err(Error::Domain(
            "resistances and flows must be non-empty and of equal length".into(),
        ));
    }
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::Domain(format!("exponent must be at least 1, got {n}")));
    }
    if let Some(bad) = k.iter().find(|&&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::Domain(format!("mainline resistance must be positive, got {bad}")));
    }
    if let Some(bad) = q.iter().find(|&&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::Domain(format!("mainline flow must be positive, got {bad}")));
    }
    if q.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Domain("mainline flows must be non-increasing".into()));
    }
    Ok(())
}

/// Time schedule S needs on the class-C mainline `k` when unit-time
/// continuous delivery runs mainline flows `q`.
///
/// Tap `i` is served alone at `(Δh/Kᵢ)^(1/n)` with `Kᵢ = k₁ + … + kᵢ` and
/// `Δh = Σ kᵢqᵢⁿ`, which sums to
/// `Σ qᵢ(Kᵢ^(1/n) − Kᵢ₋₁^(1/n)) / Δh^(1/n)`.
pub fn class_c_closed_form(k: &[f64], q: &[f64], n: f64) -> Result<f64> {
    check_mainline(k, q, n)?;
    let inv = 1.0 / n;
    let dh: f64 = k.iter().zip(q).map(|(&ki, &qi)| ki * qi.powf(n)).sum();
    let mut cumulative = 0.0;
    let mut prev_root = 0.0;
    let mut total = 0.0;
    for (&ki, &qi) in k.iter().zip(q) {
        cumulative += ki;
        let root = cumulative.powf(inv);
        total += qi * (root - prev_root);
        prev_root = root;
    }
    Ok(total / dh.powf(inv))
}

/// Builds the class-C network for mainline `k` and flows `q`, with sink head
/// 0 and the source head set so that the flows `q` take unit time.
pub fn class_c_instance(k: &[f64], q: &[f64], n: f64) -> Result<ClassCInstance> {
    check_mainline(k, q, n)?;
    let j = k.len();
    let dh: f64 = k.iter().zip(q).map(|(&ki, &qi)| ki * qi.powf(n)).sum();
    let demands: Vec<f64> = (0..j)
        .map(|i| if i + 1 < j { q[i] - q[i + 1] } else { q[i] })
        .collect();

    let mut edges = Vec::with_capacity(2 * j - 1);
    let mut table = Demands::new();
    let mut upstream = "src".to_string();
    for i in 1..=j {
        let tap = if i < j { tap_junction(i) } else { tap_sink(i) };
        edges.push(Edge::new(upstream.clone(), tap.clone(), k[i - 1]));
        if i < j {
            edges.push(Edge::new(tap.clone(), tap_sink(i), 0.0));
        }
        table.insert(tap_sink(i), demands[i - 1]);
        upstream = tap;
    }
    let network = Network::new(n, "src", dh, 0.0, edges, table);
    Ok(ClassCInstance {
        network,
        mainline_resistances: k.to_vec(),
        mainline_flows: q.to_vec(),
        demands,
        predicted_r: class_c_closed_form(k, q, n)?,
    })
}

/// Geometric mainline `kᵢ = ρ^(i−1)` with `qᵢ = ρ^(−(i−1)/n)`, which makes
/// every `kᵢqᵢⁿ` equal. Its ratio approaches `m^(1−1/n)` as `ρ` grows.
pub fn worst_case_instance(m: usize, n: f64, rho: f64) -> Result<ClassCInstance> {
    if m < 1 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    if !(rho.is_finite() && rho > 1.0) {
        return Err(Error::Domain(format!("resistance ratio must exceed 1, got {rho}")));
    }
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::Domain(format!("exponent must be at least 1, got {n}")));
    }
    let k: Vec<f64> = (0..m).map(|i| rho.powi(i as i32)).collect();
    let q: Vec<f64> = (0..m).map(|i| rho.powf(-(i as f64) / n)).collect();
    class_c_instance(&k, &q, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BraessReport {
    pub m: usize,
    pub exponent: f64,
    pub rho: f64,
    /// Selfish operation with bare zero-resistance branches.
    pub selfish_time_open_branches: f64,
    /// Selfish operation after adding the centralized valve resistances to
    /// the branches.
    pub selfish_time_augmented: f64,
    pub centralized_time: f64,
    pub augmented_network: Network,
}

/// Selfish (open until satisfied) operation of the worst-case instance, as
/// built and after the branches are made as resistive as the centralized
/// continuous plan's valves. Adding resistance makes selfish operation faster.
pub fn braess_demo(m: usize, n: f64, rho: f64) -> Result<BraessReport> {
    let instance = worst_case_instance(m, n, rho)?;
    let net = &instance.network;
    let open = schedule_s(net, &net.demands)?;
    let plan = proportional_configuration(net, &net.demands)?;

    let mut augmented = net.clone();
    for e in &mut augmented.edges {
        if let Some(kv) = plan.config.valves.get(&e.to).and_then(|v| v.kv()) {
            e.k += kv;
        }
    }
    let throttled = schedule_s(&augmented, &augmented.demands)?;
    Ok(BraessReport {
        m,
        exponent: n,
        rho,
        selfish_time_open_branches: open.total_time,
        selfish_time_augmented: throttled.total_time,
        centralized_time: plan.t_cv,
        augmented_network: augmented,
    })
}
