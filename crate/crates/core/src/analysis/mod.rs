//! How much slower ON/OFF operation is than continuous operation.
//!
//! `R = t_d_opt / t_cv` lies in `[1, m^(1−1/n)]`, where `m` is the effective
//! depth. The upper end is approached by class-C networks.

mod class_c;
mod props;
mod random;
mod sweep;

use serde::Serialize;

pub use class_c::{
    braess_demo, class_c_closed_form, class_c_instance, tap_sink, worst_case_instance,
    BraessReport, ClassCInstance,
};
pub use props::{
    check_concavity, check_power_inequalities, check_valve_closure_monotonicity,
    ConcavityVerdict, MonotonicityVerdict, PowerVerdict, PropertyVerdict, POWER_TOLERANCE,
    PROPERTY_TOLERANCE,
};
pub use random::{random_class_c, random_instance, random_instance_with, RandomTreeParams};
pub use sweep::{
    audit_analysis, bounds_sweep, poa_sweep, props_sweep, AuditTally, SweepRecord, SweepSummary,
    Suite, PropsSummary,
};

use crate::continuous::{mixture_upper_bound, proportional_with_model, ContinuousPlan, Mixture};
use crate::discrete::{optimal_discrete_with_model, schedule_s_with_model, DiscreteOptimum, Schedule};
use crate::error::{Error, Result};
use crate::hydraulics::HydraulicModel;
use crate::network::{effective_depth, Demands, Network};

/// Absolute slack allowed on the ratio bounds.
pub const BOUND_TOLERANCE: f64 = 1e-6;
/// Slack allowed between optimal times, relative to `max(1, time)`.
pub const SANDWICH_TOLERANCE: f64 = 1e-9;

/// `m^(1−1/n)`, the largest possible ratio on a network of effective depth `m`.
pub fn bound_r(m: usize, n: f64) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::Domain(format!("exponent must be at least 1, got {n}")));
    }
    Ok((m as f64).powf(1.0 - 1.0 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Anomaly {
    /// `R < 1`.
    RatioBelowOne,
    /// The mixture beat the constant proportional plan.
    MixtureBelowConstant,
    BoundExceeded,
    TrivialBoundExceeded,
    PoaAboveBound,
    /// An optimum came out above a schedule it should dominate.
    SandwichViolated,
}

impl Anomaly {
    pub fn code(&self) -> &'static str {
        match self {
            Anomaly::RatioBelowOne => "RatioBelowOne",
            Anomaly::MixtureBelowConstant => "MixtureBelowConstant",
            Anomaly::BoundExceeded => "BoundExceeded",
            Anomaly::TrivialBoundExceeded => "TrivialBoundExceeded",
            Anomaly::PoaAboveBound => "PoaAboveBound",
            Anomaly::SandwichViolated => "SandwichViolated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub t_cv: f64,
    #[serde(rename = "t_S")]
    pub t_s: f64,
    pub t_d_opt: f64,
    pub t_mix: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub m: usize,
    pub bound: f64,
    pub trivial_bound: usize,
    pub poa: f64,
    pub anomalies: Vec<Anomaly>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatioOptions {
    /// Random directions added to the mixture pool.
    pub samples: usize,
    pub seed: u64,
}

impl Default for RatioOptions {
    fn default() -> Self {
        RatioOptions {
            samples: 8,
            seed: 0,
        }
    }
}

/// Every plan behind an [`AnalysisReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub continuous: ContinuousPlan,
    pub selfish: Schedule,
    pub discrete: DiscreteOptimum,
    pub mixture: Mixture,
}

pub fn compute_ratio(net: &Network, demands: &Demands) -> Result<AnalysisReport> {
    Ok(analyze(net, demands, &RatioOptions::default())?.report)
}

pub fn analyze(net: &Network, demands: &Demands, options: &RatioOptions) -> Result<Analysis> {
    let model = HydraulicModel::new(net)?;
    let continuous = proportional_with_model(&model, demands)?;
    let selfish = schedule_s_with_model(&model, demands)?;
    let discrete = optimal_discrete_with_model(&model, demands)?;
    let mixture = mixture_upper_bound(net, demands, options.samples, options.seed)?;
    let depth = effective_depth(net)?;

    let t_cv = continuous.t_cv;
    let t_s = selfish.total_time;
    let t_d_opt = discrete.t_d_opt;
    let t_mix = mixture.t_mix;
    let r = t_d_opt / t_cv;
    let poa = t_s / t_cv;
    let bound = bound_r(depth.m, net.exponent)?;
    let trivial_bound = net.demands.len();

    let slack = |t: f64| SANDWICH_TOLERANCE * t.max(1.0);
    let mut anomalies = Vec::new();
    if r < 1.0 - BOUND_TOLERANCE {
        anomalies.push(Anomaly::RatioBelowOne);
    }
    if t_mix < t_cv * (1.0 - BOUND_TOLERANCE) {
        anomalies.push(Anomaly::MixtureBelowConstant);
    }
    if r > bound + BOUND_TOLERANCE {
        anomalies.push(Anomaly::BoundExceeded);
    }
    if r > trivial_bound as f64 + BOUND_TOLERANCE {
        anomalies.push(Anomaly::TrivialBoundExceeded);
    }
    if poa > bound + BOUND_TOLERANCE {
        anomalies.push(Anomaly::PoaAboveBound);
    }
    if t_d_opt > t_s + slack(t_s) || t_mix > t_cv.min(t_d_opt) + slack(t_cv) {
        anomalies.push(Anomaly::SandwichViolated);
    }

    Ok(Analysis {
        report: AnalysisReport {
            t_cv,
            t_s,
            t_d_opt,
            t_mix,
            r,
            m: depth.m,
            bound,
            trivial_bound,
            poa,
            anomalies,
        },
        continuous,
        selfish,
        discrete,
        mixture,
    })
}

/// Selfish operation time over the continuous optimum.
pub fn compute_poa(net: &Network, demands: &Demands) -> Result<f64> {
    let model = HydraulicModel::new(net)?;
    let plan = proportional_with_model(&model, demands)?;
    let selfish = schedule_s_with_model(&model, demands)?;
    Ok(selfish.total_time / plan.t_cv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    #[test]
    fn bound_values() {
        for n in [1.0, 1.85, 2.0] {
            assert_eq!(bound_r(1, n).unwrap(), 1.0);
        }
        assert!((bound_r(2, 2.0).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((bound_r(4, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(bound_r(0, 2.0).is_err());
        assert!(bound_r(2, 0.9).is_err());
    }

    #[test]
    fn class_c_two_taps() {
        let inst = class_c_instance(&[1.0, 3.0], &[2.0, 1.0], 2.0).unwrap();
        let report = compute_ratio(&inst.network, &inst.network.demands).unwrap();
        assert!((report.r - 1.133893).abs() < 1e-6);
        assert!((report.bound - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((report.poa - report.r).abs() < 1e-9);
        assert!(report.anomalies.is_empty(), "{:?}", report.anomalies);
    }

    #[test]
    fn symmetric_star_has_unit_ratio() {
        let mut demands = Demands::new();
        demands.insert("a".into(), 1.0);
        demands.insert("b".into(), 1.0);
        let net = Network::new(
            2.0,
            "src",
            1.0,
            0.0,
            vec![Edge::new("src", "a", 1.0), Edge::new("src", "b", 1.0)],
            demands,
        );
        let report = compute_ratio(&net, &net.demands).unwrap();
        assert!((report.r - 1.0).abs() < 1e-6);
        assert!((compute_poa(&net, &net.demands).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_field_names() {
        let inst = worst_case_instance(2, 2.0, 10.0).unwrap();
        let report = compute_ratio(&inst.network, &inst.network.demands).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["t_cv", "t_S", "t_d_opt", "t_mix", "R", "m", "bound", "trivial_bound", "poa", "anomalies"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
