//! Seeded random sweeps behind the `verify` suites.
//!
//! Trial `i` draws everything from its own seed, taken as the `i`-th output of
//! a generator seeded with the sweep seed, so a sweep can be reproduced
//! trial by trial and runs in parallel without changing its results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::class_c::worst_case_instance;
use super::props::{
    check_concavity_observed, check_monotonicity_observed, check_power_inequalities,
};
use super::random::{random_class_c, random_instance_with, RandomTreeParams};
use super::{analyze, bound_r, Analysis, Anomaly, RatioOptions, BOUND_TOLERANCE};
use crate::error::Result;
use crate::hydraulics::{
    audit_flow_state, FlowState, HydraulicModel, ValveConfiguration, ValveState,
};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Props,
    Bounds,
    Poa,
}

/// Count of re-solved flow states and how many failed the residual audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AuditTally {
    pub states: usize,
    pub failures: usize,
}

impl AuditTally {
    pub fn add(&mut self, other: AuditTally) {
        self.states += other.states;
        self.failures += other.failures;
    }

    pub fn record(&mut self, net: &Network, state: &FlowState) {
        self.states += 1;
        match audit_flow_state(net, state) {
            Ok(report) if report.passed => {}
            _ => self.failures += 1,
        }
    }
}

/// Re-solves every configuration an analysis used and audits the result.
pub fn audit_analysis(net: &Network, analysis: &Analysis) -> Result<AuditTally> {
    let model = HydraulicModel::new(net)?;
    let mut tally = AuditTally::default();
    let configs = std::iter::once(&analysis.continuous.config)
        .chain(analysis.selfish.steps.iter().map(|s| &s.config))
        .chain(analysis.discrete.schedule.steps.iter().map(|s| &s.config))
        .chain(analysis.mixture.basis.iter().map(|c| &c.config));
    for config in configs {
        tally.record(net, &model.solve(config)?);
    }
    Ok(tally)
}

/// One analyzed random instance, flattened for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub m: usize,
    pub n: f64,
    pub t_cv: f64,
    #[serde(rename = "t_S")]
    pub t_s: f64,
    pub t_d_opt: f64,
    pub t_mix: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub bound: f64,
    pub poa: f64,
    /// Anomaly codes joined by `;`.
    pub anomaly_flags: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub violations: usize,
    /// Instances flagged with `R < 1`.
    pub anomalies: usize,
    pub audit: AuditTally,
    pub records: Vec<SweepRecord>,
    pub witnesses: Vec<String>,
}

fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.random()).collect()
}

struct RatioTrial {
    record: SweepRecord,
    anomalies: Vec<Anomaly>,
    audit: AuditTally,
}

fn ratio_trial(seed: u64, samples: usize) -> Result<RatioTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1.0..=3.0);
    let depth = rng.random_range(1..=5);
    let branching = rng.random_range(1..=3);
    let net = random_instance_with(rng.random(), &RandomTreeParams::new(depth, branching, n))?;
    let analysis = analyze(
        &net,
        &net.demands,
        &RatioOptions {
            samples,
            seed: rng.random(),
        },
    )?;
    let audit = audit_analysis(&net, &analysis)?;
    let r = &analysis.report;
    Ok(RatioTrial {
        record: SweepRecord {
            seed,
            m: r.m,
            n,
            t_cv: r.t_cv,
            t_s: r.t_s,
            t_d_opt: r.t_d_opt,
            t_mix: r.t_mix,
            r: r.r,
            bound: r.bound,
            poa: r.poa,
            anomaly_flags: r
                .anomalies
                .iter()
                .map(Anomaly::code)
                .collect::<Vec<_>>()
                .join(";"),
        },
        anomalies: r.anomalies.clone(),
        audit,
    })
}

fn ratio_sweep(
    suite: Suite,
    trials: usize,
    seed: u64,
    samples: usize,
    counts_as_violation: fn(Anomaly) -> bool,
) -> Result<SweepSummary> {
    let results: Vec<RatioTrial> = trial_seeds(seed, trials)
        .into_par_iter()
        .map(|s| ratio_trial(s, samples))
        .collect::<Result<_>>()?;
    let mut summary = SweepSummary {
        suite,
        trials,
        seed,
        violations: 0,
        anomalies: 0,
        audit: AuditTally::default(),
        records: Vec::with_capacity(trials),
        witnesses: Vec::new(),
    };
    for t in results {
        summary.audit.add(t.audit);
        if t.anomalies.contains(&Anomaly::RatioBelowOne) {
            summary.anomalies += 1;
        }
        let bad: Vec<&str> = t
            .anomalies
            .iter()
            .filter(|&&a| counts_as_violation(a))
            .map(Anomaly::code)
            .collect();
        if !bad.is_empty() {
            summary.violations += 1;
            summary
                .witnesses
                .push(format!("seed {}: {}", t.record.seed, bad.join(", ")));
        }
        summary.records.push(t.record);
    }
    Ok(summary)
}

/// Random trees of depth at most 5 with `n ∈ [1, 3]`: the ratio stays under
/// both bounds and the optimal times are correctly ordered.
pub fn bounds_sweep(trials: usize, seed: u64, samples: usize) -> Result<SweepSummary> {
    ratio_sweep(Suite::Bounds, trials, seed, samples, |a| {
        matches!(
            a,
            Anomaly::BoundExceeded | Anomaly::TrivialBoundExceeded | Anomaly::SandwichViolated
        )
    })
}

/// Random trees plus the three-tap worst case: selfish operation is never
/// worse than the bound, and gets close to it on the worst case.
pub fn poa_sweep(trials: usize, seed: u64, samples: usize) -> Result<SweepSummary> {
    let mut summary = ratio_sweep(Suite::Poa, trials, seed, samples, |a| {
        a == Anomaly::PoaAboveBound
    })?;
    let worst = worst_case_instance(3, 2.0, 1e4)?;
    let analysis = analyze(&worst.network, &worst.network.demands, &RatioOptions::default())?;
    summary.audit.add(audit_analysis(&worst.network, &analysis)?);
    let bound = bound_r(3, 2.0)?;
    let poa = analysis.report.poa;
    if (poa - bound).abs() > 0.02 * bound || poa > bound + BOUND_TOLERANCE {
        summary.violations += 1;
        summary
            .witnesses
            .push(format!("three-tap worst case: PoA {poa} against bound {bound}"));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropsSummary {
    pub trials: usize,
    pub seed: u64,
    pub monotonicity_checks: usize,
    pub concavity_checks: usize,
    pub power_samples: usize,
    pub violations: usize,
    pub audit: AuditTally,
    pub witnesses: Vec<String>,
}

/// Power-inequality samples drawn per props trial.
pub const POWER_SAMPLES_PER_TRIAL: usize = 200;

struct PropsTrial {
    monotonicity: usize,
    concavity: usize,
    power: usize,
    witnesses: Vec<String>,
    audit: AuditTally,
}

fn random_state(rng: &mut ChaCha8Rng) -> ValveState {
    if rng.random_bool(0.3) {
        ValveState::FULLY_OPEN
    } else {
        ValveState::Open {
            kv: (rng.random_range(-2.0..=2.0) * std::f64::consts::LN_10).exp(),
        }
    }
}

fn props_trial(seed: u64) -> Result<PropsTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1.0..=3.0);
    let net = if rng.random_bool(0.25) {
        random_class_c(rng.random(), 5, n)?.network
    } else {
        let depth = rng.random_range(1..=5);
        let branching = rng.random_range(1..=3);
        random_instance_with(rng.random(), &RandomTreeParams::new(depth, branching, n))?
    };
    let mut trial = PropsTrial {
        monotonicity: 0,
        concavity: 0,
        power: 0,
        witnesses: Vec::new(),
        audit: AuditTally::default(),
    };

    let ids: Vec<String> = net.demands.keys().cloned().collect();
    let states: Vec<ValveState> = ids
        .iter()
        .map(|_| {
            if rng.random_bool(0.15) {
                ValveState::Closed
            } else {
                random_state(&mut rng)
            }
        })
        .collect();
    let mut config = ValveConfiguration::from_states(&net, &states);
    let valve = ids[rng.random_range(0..ids.len())].clone();
    if !config.valves[&valve].is_open() {
        config.set(&valve, random_state(&mut rng));
    }
    let start = config.valves[&valve].kv().unwrap_or(0.0);
    let steps_len = rng.random_range(1..=4);
    let mut kv = start;
    let mut steps = Vec::with_capacity(steps_len);
    for i in 0..steps_len {
        if i + 1 == steps_len && rng.random_bool(0.3) {
            steps.push(ValveState::Closed);
        } else {
            kv += (rng.random_range(-2.0..=2.0) * std::f64::consts::LN_10).exp();
            steps.push(ValveState::Open { kv });
        }
    }

    let mut audit = AuditTally::default();
    let verdict = check_monotonicity_observed(&net, &config, &valve, &steps, &mut |s| {
        audit.record(&net, s)
    })?;
    trial.monotonicity += 1;
    if !verdict.passed() {
        for p in [
            &verdict.own_flow_nonincreasing,
            &verdict.other_flows_nondecreasing,
            &verdict.loss_covers_gains,
            &verdict.heads_nondecreasing,
        ] {
            if let Some(w) = &p.witness {
                trial.witnesses.push(format!("seed {seed}: {w}"));
            }
        }
    }

    let q0 = HydraulicModel::new(&net)?.solve(&config)?.sink_flows[&valve];
    if q0 > 1e-9 {
        let delta = q0 * rng.random_range(0.02..=0.49);
        let concavity = check_concavity_observed(&net, &config, &valve, delta, &mut |s| {
            audit.record(&net, s)
        })?;
        trial.concavity += 1;
        if !concavity.passed {
            trial.witnesses.push(format!(
                "seed {seed}: gains {} then {} throttling {valve}",
                concavity.gain_first, concavity.gain_second
            ));
        }
    }
    trial.audit = audit;

    for _ in 0..POWER_SAMPLES_PER_TRIAL {
        let n = rng.random_range(1.0..=3.0);
        let len = rng.random_range(1..=8);
        let xs: Vec<f64> = if rng.random_bool(0.1) {
            vec![rng.random_range(0.0..=10.0); len]
        } else {
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        0.0
                    } else {
                        rng.random_range(0.0..=10.0)
                    }
                })
                .collect()
        };
        let v = check_power_inequalities(&xs, n)?;
        trial.power += 1;
        if !v.passed(n) {
            trial
                .witnesses
                .push(format!("seed {seed}: power inequality failed for {xs:?}, n = {n}"));
        }
    }
    Ok(trial)
}

/// Valve-throttling responses and the power inequalities on random trees
/// and random class-C networks.
pub fn props_sweep(trials: usize, seed: u64) -> Result<PropsSummary> {
    let results: Vec<PropsTrial> = trial_seeds(seed, trials)
        .into_par_iter()
        .map(props_trial)
        .collect::<Result<_>>()?;
    let mut summary = PropsSummary {
        trials,
        seed,
        monotonicity_checks: 0,
        concavity_checks: 0,
        power_samples: 0,
        violations: 0,
        audit: AuditTally::default(),
        witnesses: Vec::new(),
    };
    for t in results {
        summary.monotonicity_checks += t.monotonicity;
        summary.concavity_checks += t.concavity;
        summary.power_samples += t.power;
        summary.violations += t.witnesses.len();
        summary.audit.add(t.audit);
        summary.witnesses.extend(t.witnesses);
    }
    Ok(summary)
}
