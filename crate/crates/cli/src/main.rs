//! `valvetime`: steady flows, valve schedules and ON/OFF versus continuous
//! control on tree networks obeying `ΔH = k·Qⁿ`.

mod input;
mod output;
mod render;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use valvetime_core::analysis::{
    analyze, braess_demo, bounds_sweep, poa_sweep, props_sweep, worst_case_instance,
    PropsSummary, RatioOptions, SweepRecord, SweepSummary,
};
use valvetime_core::continuous::{mixture_upper_bound, proportional_configuration, ContinuousPlan, Mixture};
use valvetime_core::discrete::{optimal_discrete, schedule_s, Schedule};
use valvetime_core::{solve_state, Error, ErrorClass, ValveConfiguration};

use render::Format;

#[derive(Parser, Debug)]
#[command(name = "valvetime", version, about = "Valve scheduling on potential-flow tree networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InputArg {
    /// Network JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MixtureArgs {
    /// Random directional configurations added to the mixture pool.
    #[arg(long, default_value_t = 8)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Number of taps on the mainline.
    #[arg(long)]
    m: usize,
    /// Head-loss exponent.
    #[arg(long)]
    n: f64,
    /// Ratio between successive mainline resistances.
    #[arg(long, default_value_t = 1e4)]
    rho: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady state with every valve fully open.
    Solve(InputArg),
    /// Proportional constant valve settings and the mixture cross-check.
    PlanContinuous {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        mixture: MixtureArgs,
    },
    /// Fastest ON/OFF schedule.
    PlanDiscrete(InputArg),
    /// Every valve open until its own demand is met.
    PlanSelfish(InputArg),
    /// ON/OFF over continuous time, with its bounds.
    Ratio {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        mixture: MixtureArgs,
    },
    /// Equalized mainline instance that approaches the ratio bound.
    WorstCase(InstanceArgs),
    /// Randomized property and bound suites.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        samples: usize,
    },
    /// Selfish operation before and after adding branch resistance.
    BraessDemo(InstanceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Props,
    Bounds,
    Poa,
    All,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Usage(String),
    /// The report was written but records property violations.
    Violations(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.code(),
            Failure::Usage(_) => "Usage",
            Failure::Violations(_) => "PropertyViolation",
        }
    }

    fn exit(&self) -> u8 {
        match self {
            Failure::Core(e) if e.class() == ErrorClass::Numeric => 2,
            Failure::Violations(_) => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Usage(m) => m.clone(),
            Failure::Violations(n) => format!("{n} property violations"),
        }
    }
}

type Outcome = std::result::Result<String, Failure>;

fn no_csv(command: &str) -> Failure {
    Failure::Usage(format!("{command} has no csv form; use json or text"))
}

fn solve(args: &InputArg, format: Format) -> Outcome {
    let net = input::load_network(input::require_input(args.input.as_deref())?)?;
    let state = solve_state(&net, &ValveConfiguration::all_open(&net))?;
    Ok(match format {
        Format::Json => render::json(&state)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = net
                .edges
                .iter()
                .zip(&state.edge_flows)
                .map(|(e, q)| {
                    vec![
                        e.from.clone(),
                        e.to.clone(),
                        e.k.to_string(),
                        q.to_string(),
                        state.node_heads[&e.to].to_string(),
                    ]
                })
                .collect();
            render::table_csv(&["from", "to", "k", "flow", "head_to"], &rows)
        }
        Format::Text => {
            let mut s = format!("total outflow {}\n", state.total_outflow());
            for (id, q) in &state.sink_flows {
                let _ = writeln!(s, "  {id}: flow {q}");
            }
            for (id, h) in &state.node_heads {
                let _ = writeln!(s, "  head {id}: {h}");
            }
            s
        }
    })
}

#[derive(Serialize)]
struct ContinuousReport {
    plan: ContinuousPlan,
    mixture: Mixture,
}

fn plan_continuous(args: &InputArg, mix: &MixtureArgs, format: Format) -> Outcome {
    let net = input::load_network(input::require_input(args.input.as_deref())?)?;
    let plan = proportional_configuration(&net, &net.demands)?;
    let mixture = mixture_upper_bound(&net, &net.demands, mix.samples, mix.seed)?;
    Ok(match format {
        Format::Json => render::json(&ContinuousReport { plan, mixture })?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = plan
                .config
                .valves
                .iter()
                .map(|(id, v)| {
                    vec![
                        id.clone(),
                        net.demands[id].to_string(),
                        v.kv().map_or("closed".to_string(), |kv| kv.to_string()),
                        plan.leaf_flows[id].to_string(),
                    ]
                })
                .collect();
            render::table_csv(&["sink", "demand", "kv", "flow"], &rows)
        }
        Format::Text => {
            let mut s = format!(
                "t_cv {} (binding {})\nt_mix {} over a pool of {}\n",
                plan.t_cv, plan.binding_leaf, mixture.t_mix, mixture.pool_size
            );
            for (id, v) in &plan.config.valves {
                let setting = v.kv().map_or("closed".to_string(), |kv| format!("kv {kv}"));
                let _ = writeln!(s, "  {id}: {setting}, flow {}", plan.leaf_flows[id]);
            }
            s
        }
    })
}

fn schedule_output(schedule: &Schedule, format: Format, head: String, value: &impl Serialize) -> Outcome {
    Ok(match format {
        Format::Json => render::json(value)?,
        Format::Csv => render::schedule_csv(schedule),
        Format::Text => {
            let mut s = head;
            render::schedule_text(&mut s, schedule);
            s
        }
    })
}

fn plan_discrete(args: &InputArg, format: Format) -> Outcome {
    let net = input::load_network(input::require_input(args.input.as_deref())?)?;
    let opt = optimal_discrete(&net, &net.demands)?;
    let head = format!("t_d_opt {} in {} steps\n", opt.t_d_opt, opt.schedule.steps.len());
    schedule_output(&opt.schedule, format, head, &opt)
}

#[derive(Serialize)]
struct SelfishReport {
    #[serde(rename = "t_S")]
    t_s: f64,
    t_cv: f64,
    poa: f64,
    schedule: Schedule,
}

fn plan_selfish(args: &InputArg, format: Format) -> Outcome {
    let net = input::load_network(input::require_input(args.input.as_deref())?)?;
    let schedule = schedule_s(&net, &net.demands)?;
    let t_cv = proportional_configuration(&net, &net.demands)?.t_cv;
    let report = SelfishReport {
        t_s: schedule.total_time,
        t_cv,
        poa: schedule.total_time / t_cv,
        schedule,
    };
    let head = format!("t_S {} (PoA {})\n", report.t_s, report.poa);
    schedule_output(&report.schedule, format, head, &report)
}

fn ratio(args: &InputArg, mix: &MixtureArgs, format: Format) -> Outcome {
    let net = input::load_network(input::require_input(args.input.as_deref())?)?;
    let opts = RatioOptions {
        samples: mix.samples,
        seed: mix.seed,
    };
    let r = analyze(&net, &net.demands, &opts)?.report;
    Ok(match format {
        Format::Json => render::json(&r)?,
        Format::Csv => {
            let record = SweepRecord {
                seed: mix.seed,
                m: r.m,
                n: net.exponent,
                t_cv: r.t_cv,
                t_s: r.t_s,
                t_d_opt: r.t_d_opt,
                t_mix: r.t_mix,
                r: r.r,
                bound: r.bound,
                poa: r.poa,
                anomaly_flags: r.anomalies.iter().map(|a| a.code()).collect::<Vec<_>>().join(";"),
            };
            render::sweep_csv([&record])
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "R {} (bound {}, m = {}, |T| = {})", r.r, r.bound, r.m, r.trivial_bound);
            let _ = writeln!(s, "t_cv {}\nt_d_opt {}\nt_S {}\nt_mix {}\npoa {}", r.t_cv, r.t_d_opt, r.t_s, r.t_mix, r.poa);
            if !r.anomalies.is_empty() {
                let codes: Vec<&str> = r.anomalies.iter().map(|a| a.code()).collect();
                let _ = writeln!(s, "anomalies {}", codes.join(" "));
            }
            s
        }
    })
}

fn worst_case(args: &InstanceArgs, format: Format) -> Outcome {
    let inst = worst_case_instance(args.m, args.n, args.rho)?;
    Ok(match format {
        Format::Json => render::json(&inst)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..inst.demands.len())
                .map(|i| {
                    vec![
                        (i + 1).to_string(),
                        inst.mainline_resistances[i].to_string(),
                        inst.mainline_flows[i].to_string(),
                        inst.demands[i].to_string(),
                    ]
                })
                .collect();
            render::table_csv(&["tap", "k", "q", "demand"], &rows)
        }
        Format::Text => format!(
            "predicted_R {} for m = {}, n = {}, rho = {}\n",
            inst.predicted_r, args.m, args.n, args.rho
        ),
    })
}

#[derive(Serialize, Default)]
struct VerifyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    props: Option<PropsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<SweepSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poa: Option<SweepSummary>,
}

fn verify(suite: SuiteArg, trials: usize, seed: u64, samples: usize, format: Format) -> (Outcome, usize) {
    let run = || -> Result<VerifyReport, Failure> {
        if trials == 0 {
            return Err(Failure::Usage("--trials must be at least 1".into()));
        }
        if format == Format::Csv && suite == SuiteArg::Props {
            return Err(no_csv("verify --suite props"));
        }
        let mut report = VerifyReport::default();
        if matches!(suite, SuiteArg::Props | SuiteArg::All) {
            report.props = Some(props_sweep(trials, seed)?);
        }
        if matches!(suite, SuiteArg::Bounds | SuiteArg::All) {
            report.bounds = Some(bounds_sweep(trials, seed, samples)?);
        }
        if matches!(suite, SuiteArg::Poa | SuiteArg::All) {
            report.poa = Some(poa_sweep(trials, seed, samples)?);
        }
        Ok(report)
    };
    let report = match run() {
        Ok(r) => r,
        Err(e) => return (Err(e), 0),
    };
    let violations = report.props.as_ref().map_or(0, |p| p.violations + p.audit.failures)
        + [&report.bounds, &report.poa]
            .iter()
            .filter_map(|s| s.as_ref())
            .map(|s| s.violations + s.audit.failures)
            .sum::<usize>();
    let body = match format {
        Format::Json => render::json(&report).map_err(Failure::from),
        Format::Csv => Ok(render::sweep_csv(
            [&report.bounds, &report.poa]
                .into_iter()
                .flatten()
                .flat_map(|s| s.records.iter()),
        )),
        Format::Text => {
            let mut s = String::new();
            if let Some(p) = &report.props {
                let _ = writeln!(
                    s,
                    "props: {} trials, {} throttling and {} concavity checks, {} power samples, {} flow states audited, {} violations",
                    p.trials, p.monotonicity_checks, p.concavity_checks, p.power_samples, p.audit.states, p.violations + p.audit.failures
                );
                for w in &p.witnesses {
                    let _ = writeln!(s, "  {w}");
                }
            }
            for (name, summary) in [("bounds", &report.bounds), ("poa", &report.poa)] {
                if let Some(x) = summary {
                    let _ = writeln!(
                        s,
                        "{name}: {} trials, {} anomalies, {} flow states audited, {} violations",
                        x.trials, x.anomalies, x.audit.states, x.violations + x.audit.failures
                    );
                    for w in &x.witnesses {
                        let _ = writeln!(s, "  {w}");
                    }
                }
            }
            Ok(s)
        }
    };
    (body, violations)
}

fn braess(args: &InstanceArgs, format: Format) -> Outcome {
    let r = braess_demo(args.m, args.n, args.rho)?;
    Ok(match format {
        Format::Json => render::json(&r)?,
        Format::Csv => render::table_csv(
            &["m", "n", "rho", "selfish_open_branches", "selfish_augmented", "centralized"],
            &[vec![
                r.m.to_string(),
                r.exponent.to_string(),
                r.rho.to_string(),
                r.selfish_time_open_branches.to_string(),
                r.selfish_time_augmented.to_string(),
                r.centralized_time.to_string(),
            ]],
        ),
        Format::Text => format!(
            "selfish, open branches: {}\nselfish, augmented branches: {}\ncentralized: {}\n",
            r.selfish_time_open_branches, r.selfish_time_augmented, r.centralized_time
        ),
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let format = cli.format;
    let (body, violations) = match &cli.command {
        Command::Solve(a) => (solve(a, format), 0),
        Command::PlanContinuous { input, mixture } => (plan_continuous(input, mixture, format), 0),
        Command::PlanDiscrete(a) => (plan_discrete(a, format), 0),
        Command::PlanSelfish(a) => (plan_selfish(a, format), 0),
        Command::Ratio { input, mixture } => (ratio(input, mixture, format), 0),
        Command::WorstCase(a) => (worst_case(a, format), 0),
        Command::Verify {
            suite,
            trials,
            seed,
            samples,
        } => verify(*suite, *trials, *seed, *samples, format),
        Command::BraessDemo(a) => (braess(a, format), 0),
    };
    output::emit(cli.out.as_deref(), &body?).map_err(|e| Failure::Core(Error::Io(e)))?;
    if violations > 0 {
        return Err(Failure::Violations(violations));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code(), f.message());
            ExitCode::from(f.exit())
        }
    }
}
