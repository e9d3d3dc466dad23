use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::class_c::{class_c_instance, ClassCInstance};
use crate::error::{Error, Result};
use crate::hydraulics::{HydraulicModel, ValveState};
use crate::network::{Demands, Edge, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTreeParams {
    /// Longest source-to-sink path, in edges.
    pub max_depth: usize,
    pub max_branching: usize,
    /// Keeps configuration enumeration small.
    pub max_sinks: usize,
    pub exponent: f64,
}

impl RandomTreeParams {
    pub fn new(max_depth: usize, max_branching: usize, exponent: f64) -> Self {
        RandomTreeParams {
            max_depth,
            max_branching,
            max_sinks: 8,
            exponent,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// Random tree with resistances log-uniform in `[1e−2, 1e2]` whose demands
/// are what a random all-open valve setting delivers in unit time.
pub fn random_instance(seed: u64, max_depth: usize, max_branching: usize, n: f64) -> Result<Network> {
    random_instance_with(seed, &RandomTreeParams::new(max_depth, max_branching, n))
}

pub fn random_instance_with(seed: u64, params: &RandomTreeParams) -> Result<Network> {
    if params.max_depth < 1 || params.max_branching < 1 || params.max_sinks < 1 {
        return Err(Error::Domain(
            "depth, branching and sink limits must be at least 1".into(),
        ));
    }
    if !(params.exponent.is_finite() && params.exponent >= 1.0) {
        return Err(Error::Domain(format!(
            "exponent must be at least 1, got {}",
            params.exponent
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // children[i] lists the children of node i; node 0 is the source
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut depth = vec![0usize];
    let mut leaves = 0usize;
    let root_fanout = rng.random_range(1..=params.max_branching.min(params.max_sinks));
    for _ in 0..root_fanout {
        children.push(Vec::new());
        depth.push(1);
        let id = children.len() - 1;
        children[0].push(id);
        leaves += 1;
    }
    let mut next = 1;
    while next < children.len() {
        let v = next;
        next += 1;
        if depth[v] >= params.max_depth || !rng.random_bool(0.5) {
            continue;
        }
        // turning a leaf into b children adds b − 1 leaves
        let room = params.max_sinks - leaves + 1;
        let fanout = rng.random_range(1..=params.max_branching.min(room));
        for _ in 0..fanout {
            children.push(Vec::new());
            depth.push(depth[v] + 1);
            let id = children.len() - 1;
            children[v].push(id);
        }
        leaves += fanout - 1;
    }

    let width = (children.len() - 1).to_string().len();
    let name = |i: usize| {
        if i == 0 {
            "src".to_string()
        } else {
            format!("v{i:0width$}")
        }
    };
    let mut edges = Vec::new();
    for (u, cs) in children.iter().enumerate() {
        for &c in cs {
            edges.push(Edge::new(name(u), name(c), log_uniform(&mut rng, 1e-2, 1e2)));
        }
    }
    let sinks: Vec<usize> = (1..children.len()).filter(|&i| children[i].is_empty()).collect();
    let sink_head = rng.random_range(0.0..=5.0);
    let drive = log_uniform(&mut rng, 1.0, 10.0);
    let placeholder: Demands = sinks.iter().map(|&s| (name(s), 1.0)).collect();
    let mut net = Network::new(
        params.exponent,
        "src",
        sink_head + drive,
        sink_head,
        edges,
        placeholder,
    );

    let states: Vec<ValveState> = net
        .demands
        .keys()
        .map(|_| {
            if rng.random_bool(0.5) {
                ValveState::FULLY_OPEN
            } else {
                ValveState::Open {
                    kv: log_uniform(&mut rng, 1e-2, 1e2),
                }
            }
        })
        .collect();
    let flows = HydraulicModel::new(&net)?.sink_flows(&states)?;
    for (d, f) in net.demands.values_mut().zip(flows) {
        *d = f;
    }
    Ok(net)
}

/// Class-C network with random resistances and random non-increasing
/// mainline flows.
pub fn random_class_c(seed: u64, max_taps: usize, n: f64) -> Result<ClassCInstance> {
    if max_taps < 1 {
        return Err(Error::Domain("at least one tap is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taps = rng.random_range(1..=max_taps);
    let k: Vec<f64> = (0..taps).map(|_| log_uniform(&mut rng, 1e-2, 1e2)).collect();
    let mut q = Vec::with_capacity(taps);
    let mut flow = log_uniform(&mut rng, 0.1, 10.0);
    for _ in 0..taps {
        q.push(flow);
        flow *= rng.random_range(0.05..=1.0);
    }
    class_c_instance(&k, &q, n)
}
