//! Trajectory CSV and JSON summary output.

use std::io::Write;

use serde::Serialize;

use crate::analysis::disagreement;
use crate::geometry::Surface;
use crate::graph::Graph;
use crate::integrator::{Termination, Trajectory};

use super::run::{CheckReport, RunReport};

/// Writes `t,agent,x0,…,xn,V,drift`, one row per agent per record, agents 1-based.
/// `V` is the record's disagreement and `drift` the agent's `|c(x_i)|`.
pub fn write_csv<W: Write>(out: W, traj: &Trajectory, surface: &Surface, g: &Graph) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let dim = traj.states.first().map_or(0, |x| x.ambient_dim());
    let mut header = vec!["t".to_string(), "agent".to_string()];
    header.extend((0..dim).map(|k| format!("x{k}")));
    header.extend(["V".to_string(), "drift".to_string()]);
    w.write_record(&header)?;
    for (&t, x) in traj.times.iter().zip(&traj.states) {
        let v = disagreement(g, x);
        for (i, p) in x.iter().enumerate() {
            let drift = surface.constraint_value(p).map_or(f64::NAN, f64::abs);
            let mut row = vec![t.to_string(), (i + 1).to_string()];
            row.extend(p.iter().map(f64::to_string));
            row.extend([v.to_string(), drift.to_string()]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub outcome: String,
    pub twist: Option<u32>,
    #[serde(rename = "terminal_V")]
    pub terminal_v: f64,
    pub terminal_diameter: f64,
    pub terminal_residual: Option<f64>,
    pub terminal_max_norm: f64,
    pub final_time: f64,
    pub steps: usize,
    pub aborted: bool,
    pub termination: String,
    pub seed: Option<u64>,
    pub checks: Vec<CheckReport>,
}

impl Summary {
    pub fn new(scenario: &str, seed: Option<u64>, report: &RunReport) -> Self {
        let c = &report.classification;
        let traj = &report.trajectory;
        Self {
            scenario: scenario.into(),
            outcome: c.outcome.to_string(),
            twist: c.outcome.twist(),
            terminal_v: c.terminal_disagreement,
            terminal_diameter: c.terminal_diameter,
            terminal_residual: c.terminal_residual,
            terminal_max_norm: c.terminal_max_norm,
            final_time: *traj.times.last().expect("nonempty trajectory"),
            steps: traj.steps,
            aborted: report.aborted(),
            termination: describe(&traj.termination),
            seed,
            checks: report.checks.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        text
    }
}

fn describe(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::Diverged { time, max_norm } => {
            format!("diverged at t={time}: max norm {max_norm}")
        }
        Termination::DriftExceeded { time, drift } => {
            format!("constraint drift {drift} exceeded tolerance at t={time}")
        }
        Termination::StepFailed { time, error } => format!("step failed at t={time}: {error}"),
    }
}
