//! Continuous valve control.
//!
//! With every valve held at a constant setting, flows are constant, so the
//! fastest constant plan delivers all demands at the same instant: sink
//! flows proportional to demand, `f = c·D`, with the scale `c` as large as
//! the available head allows.
//!
//! Proportional flows fix every edge flow (`c` times the demand below the
//! edge), so the head lost on the way to sink `i` is `cⁿ·Pᵢ` with
//! `Pᵢ = Σ k_e·S_eⁿ` over the edges on its path. The largest feasible `c`
//! makes the sink with the largest `Pᵢ` use all of the driving head and
//! gives it a fully open valve. Every other sink absorbs the surplus in its
//! valve: `kvᵢ = (P_max − Pᵢ)/Dᵢⁿ`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discrete::{enumerate_configurations, solve_min_time_lp, LpProblem};
use crate::error::{Error, Result};
use crate::hydraulics::{HydraulicModel, ValveConfiguration, ValveState};
use crate::network::{Demands, Network};

/// Relative tolerance under which two path losses count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousPlan {
    pub config: ValveConfiguration,
    /// Equilibrium sink flows under `config`.
    pub leaf_flows: BTreeMap<String, f64>,
    /// Flow per unit demand.
    pub scale: f64,
    pub t_cv: f64,
    pub binding_leaf: String,
}

/// The fastest constant valve setting that delivers all demands together.
pub fn proportional_configuration(net: &Network, demands: &Demands) -> Result<ContinuousPlan> {
    let model = HydraulicModel::new(net)?;
    proportional_with_model(&model, demands)
}

pub(crate) fn proportional_with_model(
    model: &HydraulicModel,
    demands: &Demands,
) -> Result<ContinuousPlan> {
    let net = model.network();
    let d = net.demands_for(demands)?;
    let (states, scale, binding) = proportional_states(model, &d)?;
    let config = ValveConfiguration::from_states(net, &states);
    let flows = model.sink_flows(&states)?;
    Ok(ContinuousPlan {
        leaf_flows: net.demands.keys().cloned().zip(flows).collect(),
        config,
        scale,
        t_cv: 1.0 / scale,
        binding_leaf: net.demand_nodes()[binding].to_string(),
    })
}

/// Valve states, scale `c` and binding slot for demand vector `d`.
pub(crate) fn proportional_states(
    model: &HydraulicModel,
    d: &[f64],
) -> Result<(Vec<ValveState>, f64, usize)> {
    let net = model.network();
    let topo = model.topology();
    let n = net.exponent;
    let drive = net.driving_head();
    if drive <= 0.0 {
        return Err(Error::NoDrivingHead {
            source_head: net.source.head,
            sink_head: net.sink_head,
        });
    }
    if !d.iter().any(|&x| x > 0.0) {
        return Err(Error::Domain("at least one demand must be positive".into()));
    }

    // demand carried by the edge into each node
    let mut below = vec![0.0; topo.len()];
    for (slot, &s) in topo.sinks.iter().enumerate() {
        below[s] = d[slot];
    }
    for &v in topo.preorder.iter().rev() {
        if let Some(p) = topo.parent[v] {
            below[p] += below[v];
        }
    }
    // accumulated loss coefficient from the source down to each node
    let mut loss = vec![0.0; topo.len()];
    for &v in &topo.preorder {
        if let Some(p) = topo.parent[v] {
            loss[v] = loss[p] + topo.k_in[v] * below[v].powf(n);
        }
    }

    let path_loss: Vec<f64> = topo.sinks.iter().map(|&s| loss[s]).collect();
    let p_max = d
        .iter()
        .zip(&path_loss)
        .filter(|(&di, _)| di > 0.0)
        .map(|(_, &p)| p)
        .fold(0.0, f64::max);
    if p_max == 0.0 {
        return Err(Error::Unbounded(net.source.id.clone()));
    }
    let binding = (0..d.len())
        .find(|&i| d[i] > 0.0 && path_loss[i] >= p_max * (1.0 - TIE_TOLERANCE))
        .expect("the maximum is attained");
    let scale = (drive / path_loss[binding]).powf(1.0 / n);

    let states = (0..d.len())
        .map(|i| {
            if d[i] == 0.0 {
                ValveState::Closed
            } else if i == binding {
                ValveState::FULLY_OPEN
            } else {
                let kv = (path_loss[binding] - path_loss[i]) / d[i].powf(n);
                ValveState::Open { kv: kv.max(0.0) }
            }
        })
        .collect();
    Ok((states, scale, binding))
}

/// One configuration of a mixture and the time it is held.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub config: ValveConfiguration,
    pub duration: f64,
    pub sink_flows: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mixture {
    pub t_mix: f64,
    pub basis: Vec<MixtureComponent>,
    pub pool_size: usize,
}

/// Fastest time-sharing of a pool of configurations: every discrete
/// configuration, the proportional one, and `samples` proportional
/// configurations for random demand directions.
pub fn mixture_upper_bound(
    net: &Network,
    demands: &Demands,
    samples: usize,
    seed: u64,
) -> Result<Mixture> {
    let model = HydraulicModel::new(net)?;
    let d = net.demands_for(demands)?;
    let positive: Vec<String> = net
        .demands
        .keys()
        .zip(&d)
        .filter(|(_, &x)| x > 0.0)
        .map(|(id, _)| id.clone())
        .collect();

    let mut pool: Vec<(ValveConfiguration, Vec<f64>)> = enumerate_configurations(net, Some(&positive))?
        .into_iter()
        .map(|e| {
            let config = e.config(net);
            (config, e.flows)
        })
        .collect();

    // Entered with the flows it is built to deliver. Re-solving its valve
    // settings can drift from c·D by far more than rounding when a deep
    // branch runs on a sliver of head.
    let (states, scale, _) = proportional_states(&model, &d)?;
    pool.push((
        ValveConfiguration::from_states(net, &states),
        d.iter().map(|&x| scale * x).collect(),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let direction: Vec<f64> = d
            .iter()
            .map(|&x| {
                if x > 0.0 {
                    // exponential draws normalize to a uniform point on the simplex
                    -(1.0 - rng.random::<f64>()).ln() + f64::MIN_POSITIVE
                } else {
                    0.0
                }
            })
            .collect();
        let (states, _, _) = proportional_states(&model, &direction)?;
        pool.push((
            ValveConfiguration::from_states(net, &states),
            model.sink_flows(&states)?,
        ));
    }

    let problem = LpProblem {
        columns: pool.iter().map(|(_, f)| f.clone()).collect(),
        rhs: d,
    };
    let solution = solve_min_time_lp(&problem)?;
    let basis = solution
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(j, &w)| MixtureComponent {
            config: pool[j].0.clone(),
            duration: w,
            sink_flows: net.demands.keys().cloned().zip(pool[j].1.iter().copied()).collect(),
        })
        .collect();
    Ok(Mixture {
        t_mix: solution.t_opt,
        basis,
        pool_size: pool.len(),
    })
}
