//! CSV and text outputs of a run.
//!
//! `trace.csv` has one row per recorded sample. Columns, with 1-based agent
//! `i` and component `c`: `t`, then for each agent `x{i}_{c}`, `xhat{i}_{c}`,
//! `vhat{i}_{c}`, `u{i}_{c}`, `e{i}_{c}`, and finally the exosystem state
//! `v_{c}`. Values use 17 significant digits.
//!
//! `events.csv` lists every scheduled transmission as
//! `from,to,k,send_time,delivery_time`, with `LOST` for dropped messages.

use std::io::{self, Write};

use coopreg_core::comms::{write_schedule_csv, CommsError, Message};
use coopreg_core::sim::{RunReport, Scenario, SimTrace};

pub const TRACE_COLUMNS_HELP: &str = "\
trace.csv columns (agent i and component c are 1-based):
  t            sample time
  x{i}_{c}     plant state
  xhat{i}_{c}  observer state
  vhat{i}_{c}  exosystem estimate
  u{i}_{c}     control input
  e{i}_{c}     regulated error
  v_{c}        exosystem state
events.csv columns: from,to,k,send_time,delivery_time (LOST when dropped)";

pub fn trace_header(trace: &SimTrace) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let (Some(state), Some(inputs), Some(errors)) = (trace.states.first(), trace.inputs.first(), trace.errors.first()) else {
        return cols;
    };
    for (i, a) in state.agents.iter().enumerate() {
        let id = i + 1;
        let mut group = |prefix: &str, n: usize| cols.extend((1..=n).map(|c| format!("{prefix}{id}_{c}")));
        group("x", a.x.len());
        group("xhat", a.xhat.len());
        group("vhat", a.upsilon_hat.len());
        group("u", inputs[i].len());
        group("e", errors[i].e.len());
    }
    cols.extend((1..=state.upsilon.len()).map(|c| format!("v_{c}")));
    cols
}

pub fn write_trace<W: Write>(mut w: W, trace: &SimTrace) -> io::Result<()> {
    writeln!(w, "{}", trace_header(trace).join(","))?;
    let mut row = String::new();
    for (n, t) in trace.times.iter().enumerate() {
        row.clear();
        let mut push = |v: f64| {
            if !row.is_empty() {
                row.push(',');
            }
            row.push_str(&format!("{v:.16e}"));
        };
        push(*t);
        let state = &trace.states[n];
        for (i, a) in state.agents.iter().enumerate() {
            for v in a.x.iter().chain(&a.xhat).chain(&a.upsilon_hat).chain(&trace.inputs[n][i]).chain(&trace.errors[n][i].e) {
                push(*v);
            }
        }
        for v in &state.upsilon {
            push(*v);
        }
        writeln!(w, "{row}")?;
    }
    w.flush()
}

pub fn write_events<W: Write>(w: W, schedules: &[Vec<Message>], ts: f64) -> Result<(), CommsError> {
    let all: Vec<Message> = schedules.iter().flatten().copied().collect();
    write_schedule_csv(w, &all, ts)
}

pub fn report_text(sc: &Scenario, report: &RunReport) -> String {
    let ch = &sc.channel;
    format!(
        "seed: {}\nh*: {} s\nhorizon: {} s\ndt: {} s\nts: {} s\n{}",
        ch.seed, ch.h_star, sc.sim.horizon, sc.sim.dt, ch.ts, report
    )
}

/// One line per certificate, as printed by `verify`.
pub fn certificate_lines(report: &RunReport) -> String {
    let mut s = String::new();
    for c in &report.certificates {
        s.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    s
}
