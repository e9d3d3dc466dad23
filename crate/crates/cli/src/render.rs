use std::fmt::Write as _;

use clap::ValueEnum;
use serde::Serialize;
use valvetime_core::analysis::SweepRecord;
use valvetime_core::discrete::Schedule;
use valvetime_core::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> String {
    let bytes = wtr.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// `step_index, duration`, then one flow column per sink in id order.
pub fn schedule_csv(schedule: &Schedule) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let sinks: Vec<&String> = schedule.delivered.keys().collect();
    let mut header = vec!["step_index".to_string(), "duration".to_string()];
    header.extend(sinks.iter().map(|s| s.to_string()));
    wtr.write_record(&header).unwrap();
    for (i, step) in schedule.steps.iter().enumerate() {
        let mut row = vec![i.to_string(), step.duration.to_string()];
        row.extend(sinks.iter().map(|s| step.sink_flows[*s].to_string()));
        wtr.write_record(&row).unwrap();
    }
    finish(wtr)
}

pub fn sweep_csv<'a>(records: impl IntoIterator<Item = &'a SweepRecord>) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut empty = true;
    for r in records {
        wtr.serialize(r).unwrap();
        empty = false;
    }
    if empty {
        wtr.write_record([
            "seed", "m", "n", "t_cv", "t_S", "t_d_opt", "t_mix", "R", "bound", "poa",
            "anomaly_flags",
        ])
        .unwrap();
    }
    finish(wtr)
}

/// Generic CSV from a header and rows of displayable cells.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).unwrap();
    for row in rows {
        wtr.write_record(row).unwrap();
    }
    finish(wtr)
}

pub fn schedule_text(out: &mut String, schedule: &Schedule) {
    for (i, step) in schedule.steps.iter().enumerate() {
        let open: Vec<&str> = step
            .sink_flows
            .iter()
            .filter(|(_, &q)| q > 0.0)
            .map(|(id, _)| id.as_str())
            .collect();
        let _ = writeln!(
            out,
            "  step {i}: {} for {}",
            if open.is_empty() { "-".to_string() } else { open.join(" ") },
            step.duration
        );
    }
}
