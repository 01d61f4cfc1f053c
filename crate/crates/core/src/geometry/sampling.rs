//! Random points, near-consensus configurations and test matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{GeometryError, Point, Profile, Surface, Telescope};

fn gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Point {
    Point::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

fn unit_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Point {
    loop {
        let g = gaussian(dim, rng);
        let norm = g.norm();
        if norm > 1e-8 {
            return g / norm;
        }
    }
}

/// Draws a base point on the surface, by normalization on spheres and ellipsoids
/// and by parameter sampling elsewhere.
pub fn sample_point<R: Rng + ?Sized>(surface: &Surface, rng: &mut R) -> Result<Point, GeometryError> {
    let angle = |rng: &mut R| rng.random_range(-PI..PI);
    let point = match surface {
        Surface::Sphere { dim } => unit_gaussian(dim + 1, rng),
        Surface::Ellipsoid(e) => e.from_sphere(&unit_gaussian(e.dim(), rng)),
        Surface::Pseudosphere => {
            let (lo, hi) = Profile::Pseudosphere.sample_range();
            let u = rng.random_range(lo..hi);
            surface.revolution_point(u, angle(rng))?
        }
        Surface::Cylinder { .. } => {
            let z = rng.random_range(-1.0..1.0);
            surface.revolution_point(z, angle(rng))?
        }
        Surface::Telescope(t) => {
            let k = rng.random_range(1..=t.k_max());
            surface.revolution_point(Telescope::band_center(k), angle(rng))?
        }
        Surface::Revolution(p) => {
            let (lo, hi) = p.sample_range();
            let u = rng.random_range(lo..hi);
            surface.revolution_point(u, angle(rng))?
        }
        Surface::DoubleGraph(f) => {
            let x = rng.random_range(-1.0..1.0);
            let y = rng.random_range(-1.0..1.0);
            Point::from_vec(vec![x, y, f.value(x, y)])
        }
    };
    surface.retract(&point)
}

/// Uniform tangent vector of norm at most `radius` at `y`.
pub fn tangent_perturbation<R: Rng + ?Sized>(
    surface: &Surface,
    y: &Point,
    radius: f64,
    rng: &mut R,
) -> Result<Point, GeometryError> {
    let tangent_dim = surface.ambient_dim() - 1;
    let direction = loop {
        let v = surface.project(y, &gaussian(surface.ambient_dim(), rng))?;
        let norm = v.norm();
        if norm > 1e-8 {
            break v / norm;
        }
    };
    let magnitude = radius * rng.random::<f64>().powf(1.0 / tangent_dim as f64);
    Ok(direction * magnitude)
}

/// Draws per agent before [`near_consensus`] gives up on a perturbation it cannot retract.
pub const MAX_PERTURBATION_DRAWS: usize = 100;

/// Agents scattered around one random base point: each is the base point moved by a
/// uniform tangent vector of norm at most `radius`, then retracted. Perturbations that
/// leave the retraction's domain (for example past the pseudosphere rim) are redrawn.
pub fn near_consensus<R: Rng + ?Sized>(
    surface: &Surface,
    n_agents: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<Point>, GeometryError> {
    let base = sample_point(surface, rng)?;
    (0..n_agents)
        .map(|_| {
            let mut last = None;
            for _ in 0..MAX_PERTURBATION_DRAWS {
                let step = tangent_perturbation(surface, &base, radius, rng)?;
                match surface.retract(&(&base + step)) {
                    Ok(p) => return Ok(p),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("at least one draw"))
        })
        .collect()
}

/// Independently sampled agents.
pub fn random_configuration<R: Rng + ?Sized>(
    surface: &Surface,
    n_agents: usize,
    rng: &mut R,
) -> Result<Vec<Point>, GeometryError> {
    (0..n_agents).map(|_| sample_point(surface, rng)).collect()
}

/// Random orthogonal matrix with determinant +1.
pub fn random_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Random symmetric positive-definite matrix `Q diag(λ) Qᵀ` with
/// `λ_min = 1` and condition number at most `max_condition`.
pub fn random_spd<R: Rng + ?Sized>(dim: usize, max_condition: f64, rng: &mut R) -> DMatrix<f64> {
    let q = random_rotation(dim, rng);
    let log_cond = max_condition.max(1.0).log10();
    let mut lambdas: Vec<f64> = (0..dim).map(|_| 10f64.powf(log_cond * rng.random::<f64>())).collect();
    lambdas[0] = 1.0;
    let d = DMatrix::from_diagonal(&Point::from_vec(lambdas));
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}
