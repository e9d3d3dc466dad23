use proptest::prelude::*;
use valvetime_core::analysis::{
    analyze, bound_r, check_concavity, check_valve_closure_monotonicity, class_c_instance,
    compute_ratio, random_class_c, random_instance, worst_case_instance, RatioOptions,
};
use valvetime_core::continuous::{mixture_upper_bound, proportional_configuration};
use valvetime_core::discrete::{optimal_discrete, schedule_s};
use valvetime_core::{Demands, Edge, Network, ValveConfiguration, ValveState};

// Minimum ON/OFF times from a separate high-precision hydraulic solve of
// every open set followed by HiGHS on the time-sharing problem.
const REFERENCE_OPTIMA: [(u64, usize, f64, f64); 3] = [
    (353, 5, 2.0, 1.0024274123348582),
    (17, 4, 1.85, 1.0662556158765362),
    (33, 4, 1.85, 1.1392157289736835),
];

#[test]
fn discrete_optimum_matches_reference() {
    for (seed, depth, n, expected) in REFERENCE_OPTIMA {
        let net = random_instance(seed, depth, 3, n).unwrap();
        let t = optimal_discrete(&net, &net.demands).unwrap().t_d_opt;
        assert!((t - expected).abs() <= 1e-12, "seed {seed}: {t} vs {expected}");
    }
}

#[test]
fn uneven_y_network_scale() {
    // path losses 1·3² + 1·2² = 13 for sink a and 9 + 1 = 10 for b, so
    // c = sqrt(3/13) and b absorbs 13 − 10 = 3 per unit demand
    let demands: Demands = [("a".to_string(), 2.0), ("b".to_string(), 1.0)].into();
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
    let plan = proportional_configuration(&net, &net.demands).unwrap();
    assert!((plan.scale - (3.0f64 / 13.0).sqrt()).abs() < 1e-15);
    assert_eq!(plan.binding_leaf, "a");
    assert_eq!(plan.config.valves["b"], ValveState::Open { kv: 3.0 });
}

#[test]
fn two_tap_class_c_values() {
    let inst = class_c_instance(&[1.0, 3.0], &[2.0, 1.0], 2.0).unwrap();
    let net = &inst.network;
    let plan = proportional_configuration(net, &net.demands).unwrap();
    assert!((plan.t_cv - 1.0).abs() < 1e-12);
    let selfish = schedule_s(net, &net.demands).unwrap();
    assert!((selfish.total_time - 3.0 / 7f64.sqrt()).abs() < 1e-12);
    let report = compute_ratio(net, &net.demands).unwrap();
    assert!((report.r - 1.1338934).abs() < 1e-6);
}

#[test]
fn equalized_two_tap_value() {
    let r = worst_case_instance(2, 2.0, 1e4).unwrap().predicted_r;
    assert!((r - 1.4071778490164495).abs() < 1e-12);
}

#[test]
fn predicted_ratio_grows_with_rho() {
    for m in 2..=4 {
        for n in [1.5, 1.85, 2.0, 3.0] {
            let values: Vec<f64> = [10.0, 1e2, 1e3, 1e4]
                .iter()
                .map(|&rho| worst_case_instance(m, n, rho).unwrap().predicted_r)
                .collect();
            assert!(values.windows(2).all(|w| w[0] < w[1]), "m={m} n={n}: {values:?}");
            assert!(values[3] <= bound_r(m, n).unwrap());
        }
    }
}

#[test]
fn star_mixture_is_the_proportional_time() {
    let demands: Demands = [("a".to_string(), 1.0), ("b".to_string(), 3.0), ("c".to_string(), 0.5)].into();
    let net = Network::new(
        1.85,
        "src",
        4.0,
        1.0,
        vec![
            Edge::new("src", "a", 1.0),
            Edge::new("src", "b", 0.2),
            Edge::new("src", "c", 7.0),
        ],
        demands,
    );
    let plan = proportional_configuration(&net, &net.demands).unwrap();
    let mix = mixture_upper_bound(&net, &net.demands, 8, 3).unwrap();
    assert!((mix.t_mix - plan.t_cv).abs() <= 1e-9);
}

fn kv_ladder(raw: &[f64]) -> Vec<ValveState> {
    let mut kvs: Vec<f64> = raw.to_vec();
    kvs.sort_by(f64::total_cmp);
    let mut out: Vec<ValveState> = kvs.into_iter().map(|kv| ValveState::Open { kv }).collect();
    out.push(ValveState::Closed);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn throttling_responses(
        seed in any::<u64>(),
        n in 1.0f64..3.0,
        pick in any::<prop::sample::Index>(),
        steps in prop::collection::vec(0.0f64..100.0, 1..6),
    ) {
        let net = random_instance(seed, 5, 3, n).unwrap();
        let config = ValveConfiguration::all_open(&net);
        let ids = net.demand_nodes();
        let valve = ids[pick.index(ids.len())];
        let verdict = check_valve_closure_monotonicity(&net, &config, valve, &kv_ladder(&steps)).unwrap();
        prop_assert!(verdict.passed(), "{verdict:?}");
    }

    #[test]
    fn diminishing_gains(
        seed in any::<u64>(),
        n in 1.0f64..3.0,
        pick in any::<prop::sample::Index>(),
        fraction in 0.01f64..0.45,
    ) {
        let net = random_instance(seed, 5, 3, n).unwrap();
        let config = ValveConfiguration::all_open(&net);
        let ids = net.demand_nodes();
        let valve = ids[pick.index(ids.len())];
        let q = valvetime_core::solve_state(&net, &config).unwrap().sink_flows[valve];
        let verdict = check_concavity(&net, &config, valve, fraction * q).unwrap();
        prop_assert!(verdict.passed, "{verdict:?}");
    }

    #[test]
    fn ratio_sandwich(seed in any::<u64>(), n in 1.0f64..3.0, depth in 1usize..=5) {
        let net = random_instance(seed, depth, 3, n).unwrap();
        let a = analyze(&net, &net.demands, &RatioOptions { samples: 4, seed }).unwrap();
        let r = &a.report;
        prop_assert!(r.t_d_opt <= r.t_s + 1e-9);
        prop_assert!(r.t_mix <= r.t_cv.min(r.t_d_opt) + 1e-9);
        prop_assert!(r.r >= 1.0 - 1e-6 && r.r <= r.bound + 1e-6, "{r:?}");
        prop_assert!(r.poa <= r.bound + 1e-6);
        prop_assert!(r.anomalies.is_empty(), "{:?}", r.anomalies);
        for (id, d) in &net.demands {
            prop_assert!((a.selfish.delivered[id] - d).abs() <= 1e-9 * d.max(1.0));
            prop_assert!((a.discrete.schedule.delivered[id] - d).abs() <= 1e-9 * d.max(1.0));
        }
    }

    #[test]
    fn doubling_demands_doubles_time(seed in any::<u64>(), n in 1.0f64..3.0) {
        let net = random_instance(seed, 4, 3, n).unwrap();
        let doubled: Demands = net.demands.iter().map(|(k, v)| (k.clone(), 2.0 * v)).collect();
        let a = proportional_configuration(&net, &net.demands).unwrap();
        let b = proportional_configuration(&net, &doubled).unwrap();
        prop_assert!((b.t_cv - 2.0 * a.t_cv).abs() <= 1e-12 * b.t_cv);
        let total: f64 = a.leaf_flows.values().sum();
        for (id, f) in &a.leaf_flows {
            prop_assert!((b.leaf_flows[id] - f).abs() <= 1e-9 * total);
        }
        let da = optimal_discrete(&net, &net.demands).unwrap().t_d_opt;
        let db = optimal_discrete(&net, &doubled).unwrap().t_d_opt;
        prop_assert!((db - 2.0 * da).abs() <= 1e-9 * db);
    }

    #[test]
    fn class_c_simulation_matches_closed_form(seed in any::<u64>(), n in 1.0f64..3.0) {
        let inst = random_class_c(seed, 5, n).unwrap();
        let net = &inst.network;
        let selfish = schedule_s(net, &net.demands).unwrap();
        let plan = proportional_configuration(net, &net.demands).unwrap();
        prop_assert!((plan.t_cv - 1.0).abs() <= 1e-9);
        prop_assert!((selfish.total_time - inst.predicted_r).abs() <= 1e-9);
        let report = compute_ratio(net, &net.demands).unwrap();
        prop_assert!((report.r - inst.predicted_r).abs() <= 1e-9);
    }

    #[test]
    fn analysis_is_deterministic(seed in any::<u64>(), n in 1.0f64..3.0) {
        let net = random_instance(seed, 4, 3, n).unwrap();
        let opts = RatioOptions { samples: 6, seed };
        prop_assert_eq!(analyze(&net, &net.demands, &opts).unwrap(), analyze(&net, &net.demands, &opts).unwrap());
    }
}
