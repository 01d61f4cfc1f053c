//! Running a prepared scenario and evaluating its companion check.

use serde::Serialize;

use crate::analysis::{
    classify, kuramoto_reduced_field, mexican_hat_reduced_field, pseudosphere_u_exact,
    pseudosphere_u_from_height, pseudosphere_u_oracle, Classification,
};
use crate::dynamics::{equilibrium_residual, Configuration, VectorFieldKind};
use crate::geometry::{azimuth, Point, Surface};
use crate::integrator::{rk4_flat, simulate, IntegratorSettings, Termination, Trajectory};

use super::scenario::{CheckSpec, Prepared, ScenarioError};

/// One measured quantity compared against a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub bound: f64,
    pub passed: bool,
}

impl CheckReport {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=",
            bound,
            passed: value <= bound,
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">=",
            bound,
            passed: value >= bound,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trajectory: Trajectory,
    pub classification: Classification,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    pub fn aborted(&self) -> bool {
        self.trajectory.termination.is_aborted()
    }
}

pub fn run_prepared(p: &Prepared) -> Result<RunReport, ScenarioError> {
    log::info!(
        "running {} on {} with {} agents, {} steps",
        p.name,
        p.surface.name(),
        p.graph.n_agents(),
        p.settings.n_steps()
    );
    let trajectory = simulate(&p.kind, &p.surface, &p.graph, &p.x0, &p.settings)?;
    match &trajectory.termination {
        Termination::Completed => {}
        Termination::Diverged { time, max_norm } => {
            log::info!("divergence guard fired at t={time} (max norm {max_norm})")
        }
        other => log::warn!("run aborted: {other:?}"),
    }
    let classification = classify(&trajectory, &p.kind, &p.surface, &p.graph, &p.classify);
    let checks = match p.check {
        Some(check) => run_check(check, p, &trajectory)?,
        None => Vec::new(),
    };
    Ok(RunReport {
        trajectory,
        classification,
        checks,
    })
}

fn run_check(check: CheckSpec, p: &Prepared, traj: &Trajectory) -> Result<Vec<CheckReport>, ScenarioError> {
    Ok(match check {
        CheckSpec::PseudosphereU => pseudosphere_u_check(p, traj)?,
        CheckSpec::SphereConjugacy => sphere_conjugacy_check(p, traj)?,
        CheckSpec::KuramotoPolar => vec![kuramoto_check(p, traj)],
        CheckSpec::MexicanHatReduced => mexican_hat_check(p, traj)?,
        CheckSpec::EquilibriumResiduals => residual_check(p)?,
    })
}

/// Step index of a recorded time.
fn step_index(t: f64, settings: &IntegratorSettings) -> usize {
    (t / settings.step).round() as usize
}

/// Recovered `u` of every agent at every record.
pub fn recovered_u_track(traj: &Trajectory) -> Result<Vec<Vec<f64>>, ScenarioError> {
    traj.states
        .iter()
        .map(|x| {
            x.iter()
                .map(|p| pseudosphere_u_from_height(p[2]).map_err(ScenarioError::from))
                .collect()
        })
        .collect()
}

fn pseudosphere_u_check(p: &Prepared, traj: &Trajectory) -> Result<Vec<CheckReport>, ScenarioError> {
    let spec = p.twisted.expect("validated as twisted");
    let n = spec.n_agents;
    let track = recovered_u_track(traj)?;
    let mut err_closed: f64 = 0.0;
    let mut err_exact: f64 = 0.0;
    for (&t, us) in traj.times.iter().zip(&track) {
        for &u in us {
            err_closed = err_closed.max((u - pseudosphere_u_oracle(t, n, spec.u)).abs());
            err_exact = err_exact.max((u - pseudosphere_u_exact(t, n, spec.u)).abs());
        }
    }
    Ok(vec![
        CheckReport::at_most("u_vs_printed_closed_form", err_closed, 1e-4),
        CheckReport::at_most("u_vs_reduced_ode_solution", err_exact, 1e-4),
    ])
}

/// Largest `‖Lᵀ x_i(t) − y_i(t)‖` between the ellipsoid run and the sphere run from `Lᵀ x₀`.
fn sphere_conjugacy_check(p: &Prepared, traj: &Trajectory) -> Result<Vec<CheckReport>, ScenarioError> {
    let Surface::Ellipsoid(e) = &p.surface else {
        unreachable!("validated as ellipsoid")
    };
    let sphere = Surface::sphere(e.dim() - 1)?;
    let y0 = Configuration::new(p.x0.iter().map(|x| e.to_sphere(x)).collect())?;
    let twin = simulate(&VectorFieldKind::gradient_flow(), &sphere, &p.graph, &y0, &p.settings)?;
    let deviation = traj
        .states
        .iter()
        .zip(&twin.states)
        .flat_map(|(xs, ys)| xs.iter().zip(ys.iter()).map(|(x, y)| (e.to_sphere(x) - y).norm()))
        .fold(0.0, f64::max);
    Ok(vec![CheckReport::at_most("ellipsoid_vs_sphere_deviation", deviation, 1e-6)])
}

fn kuramoto_check(p: &Prepared, traj: &Trajectory) -> CheckReport {
    let thetas: Vec<f64> = p.x0.iter().map(azimuth).collect();
    let omegas: Vec<f64> = match &p.kind.drift {
        Some(d) => d.omegas().iter().map(|o| o[(1, 0)]).collect(),
        None => vec![0.0; thetas.len()],
    };
    let k = p.graph.weight_matrix();
    let steps = step_index(*traj.times.last().expect("nonempty"), &p.settings);
    let path = rk4_flat(&thetas, p.settings.step, steps, |th| kuramoto_reduced_field(th, &omegas, &k));
    let deviation = traj
        .times
        .iter()
        .zip(&traj.states)
        .flat_map(|(&t, xs)| {
            let th = &path[step_index(t, &p.settings)];
            xs.iter()
                .zip(th.iter())
                .map(|(x, a)| (x - Point::from_vec(vec![a.cos(), a.sin()])).norm())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    CheckReport::at_most("cartesian_vs_polar_deviation", deviation, 1e-8)
}

fn mexican_hat_check(p: &Prepared, traj: &Trajectory) -> Result<Vec<CheckReport>, ScenarioError> {
    let Surface::DoubleGraph(f) = &p.surface else {
        unreachable!("validated as double graph")
    };
    let start = [p.x0[0][0], p.x0[0][1]];
    let steps = step_index(*traj.times.last().expect("nonempty"), &p.settings);
    let mut field_error = None;
    let path = rk4_flat(&start, p.settings.step, steps, |xy| match mexican_hat_reduced_field(f, xy[0], xy[1]) {
        Ok((vx, vy)) => vec![vx, vy],
        Err(e) => {
            field_error.get_or_insert(e);
            vec![0.0, 0.0]
        }
    });
    if let Some(e) = field_error {
        return Err(e.into());
    }
    let mut deviation: f64 = 0.0;
    let mut asymmetry: f64 = 0.0;
    for (&t, x) in traj.times.iter().zip(&traj.states) {
        let xy = &path[step_index(t, &p.settings)];
        deviation = deviation.max((x[0][0] - xy[0]).hypot(x[0][1] - xy[1]));
        asymmetry = asymmetry
            .max((x[0][0] - x[1][0]).abs())
            .max((x[0][1] - x[1][1]).abs())
            .max((x[0][2] + x[1][2]).abs());
    }
    Ok(vec![
        CheckReport::at_most("reduced_field_deviation", deviation, 1e-6),
        CheckReport::at_most("mirror_asymmetry", asymmetry, 1e-10),
    ])
}

fn residual_check(p: &Prepared) -> Result<Vec<CheckReport>, ScenarioError> {
    let zhu = equilibrium_residual(&VectorFieldKind::zhu(), &p.surface, &p.graph, &p.x0)?;
    let gf = equilibrium_residual(&VectorFieldKind::gradient_flow(), &p.surface, &p.graph, &p.x0)?;
    Ok(vec![
        CheckReport::at_most("zhu_residual", zhu, 1e-12),
        CheckReport::at_least("gradient_flow_residual", gf, 1e-3),
    ])
}
