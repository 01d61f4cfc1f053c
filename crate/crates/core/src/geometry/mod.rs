//! Implicit hypersurfaces `{y : c(y) = 0}` with their normals, tangent projectors and retractions.

mod registry;
pub mod sampling;
mod telescope;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use registry::{invert_tractrix_height, tractrix_height, HeightField, Profile};
pub use telescope::{Telescope, DEFAULT_BANDS, DEFAULT_GLUE_WIDTH};

/// A point in the ambient Euclidean space `R^{n+1}`.
pub type Point = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected a point in R^{expected}, got R^{found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("outside surface domain: {0}")]
    OutOfDomain(String),
    #[error("invalid surface parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown function registry key {0:?}")]
    UnknownRegistryKey(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("point is not on the surface (|c| = {residual:e})")]
    OffSurface { residual: f64 },
    #[error("constraint residual {residual:e} exceeds the retraction capture radius {capture:e}")]
    OutsideCaptureRadius { residual: f64, capture: f64 },
    #[error("retraction did not converge in {iterations} iterations (|c| = {residual:e})")]
    RetractionFailed { iterations: usize, residual: f64 },
}

/// Tangent vector at a surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub basepoint: Point,
    pub coords: Point,
}

/// Ellipsoid `{z : ⟨z, A z⟩ = 1}` with its Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        let lower = cholesky_lower(&matrix)?;
        Ok(Self { matrix, lower })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular `L` with `A = L Lᵀ`.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest semi-axis `1/√λ_min`, the maximal norm of any ellipsoid point.
    pub fn max_semi_axis(&self) -> f64 {
        let eig = self.matrix.clone().symmetric_eigen();
        1.0 / eig.eigenvalues.min().sqrt()
    }

    /// `y = Lᵀ x`, carrying ellipsoid points onto the unit sphere.
    pub fn to_sphere(&self, x: &Point) -> Point {
        self.lower.tr_mul(x)
    }

    /// Inverse of [`Ellipsoid::to_sphere`]: solves `Lᵀ x = y`.
    pub fn from_sphere(&self, y: &Point) -> Point {
        self.lower
            .transpose()
            .solve_upper_triangular(y)
            .expect("Cholesky factor has a positive diagonal")
    }
}

fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(GeometryError::NotPositiveDefinite(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(GeometryError::NotPositiveDefinite(
            "matrix is not symmetric".into(),
        ));
    }
    a.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| GeometryError::NotPositiveDefinite("Cholesky factorization failed".into()))
}

/// Maps an ellipsoid point `x` (with `⟨x, A x⟩ = 1`) to the unit sphere via `y = Lᵀ x`, `A = L Lᵀ`.
pub fn conjugate_to_sphere(a: &DMatrix<f64>, x: &Point) -> Result<Point, GeometryError> {
    let lower = cholesky_lower(a)?;
    if x.len() != a.nrows() {
        return Err(GeometryError::DimensionMismatch {
            expected: a.nrows(),
            found: x.len(),
        });
    }
    let residual = x.dot(&(a * x)) - 1.0;
    if residual.abs() > 1e-10 {
        return Err(GeometryError::OffSurface {
            residual: residual.abs(),
        });
    }
    Ok(lower.tr_mul(x))
}

/// Newton retraction settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retraction {
    /// Largest `|c(y)|` accepted as a starting point.
    pub capture_radius: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for Retraction {
    fn default() -> Self {
        Self {
            capture_radius: 10.0,
            tolerance: 1e-12,
            max_iterations: 50,
        }
    }
}

/// Catalog of implicit hypersurfaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    /// Unit sphere `S^n ⊂ R^{n+1}`, `c = ‖y‖² − 1`.
    Sphere { dim: usize },
    /// `c = ⟨y, A y⟩ − 1`.
    Ellipsoid(Ellipsoid),
    /// Upper branch (`u > 0`) of the tractrix surface of revolution.
    Pseudosphere,
    /// `c = x² + y² − r²` in `R³`.
    Cylinder { radius: f64 },
    /// `c = x² + y² − r(z)²` with the banded radius profile.
    Telescope(Telescope),
    /// The two sheets `z = ±f(x, y)`, `c = |z| − f(x, y)`.
    DoubleGraph(HeightField),
    /// `c = √(x² + y²) − φ(ψ⁻¹(z))`.
    Revolution(Profile),
}

impl Surface {
    pub fn sphere(dim: usize) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::InvalidParameter(
                "sphere dimension must be at least 1".into(),
            ));
        }
        Ok(Self::Sphere { dim })
    }

    pub fn ellipsoid(matrix: DMatrix<f64>) -> Result<Self, GeometryError> {
        if matrix.nrows() < 2 {
            return Err(GeometryError::InvalidParameter(
                "ellipsoid matrix must be at least 2x2".into(),
            ));
        }
        Ellipsoid::new(matrix).map(Self::Ellipsoid)
    }

    pub fn cylinder(radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!(
                "cylinder radius must be positive, got {radius}"
            )));
        }
        Ok(Self::Cylinder { radius })
    }

    pub fn telescope(k_max: u32, glue_width: f64) -> Result<Self, GeometryError> {
        Telescope::new(k_max, glue_width).map(Self::Telescope)
    }

    /// Ambient dimension `n + 1`.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Sphere { dim } => dim + 1,
            Self::Ellipsoid(e) => e.dim(),
            _ => 3,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Sphere { dim } => format!("sphere(S^{dim})"),
            Self::Ellipsoid(e) => format!("ellipsoid(R^{})", e.dim()),
            Self::Pseudosphere => "pseudosphere".into(),
            Self::Cylinder { radius } => format!("cylinder(r={radius})"),
            Self::Telescope(t) => format!("telescope(k_max={}, glue={})", t.k_max(), t.glue_width()),
            Self::DoubleGraph(f) => format!("double-graph({f})"),
            Self::Revolution(p) => format!("revolution({p})"),
        }
    }

    /// True for surfaces with rotational symmetry about the last coordinate axis
    /// (for `S¹`, the circle itself), where an azimuthal angle is meaningful.
    pub fn is_revolution(&self) -> bool {
        match self {
            Self::Sphere { dim } => *dim <= 2,
            Self::Pseudosphere | Self::Cylinder { .. } | Self::Telescope(_) | Self::Revolution(_) => {
                true
            }
            Self::Ellipsoid(_) | Self::DoubleGraph(_) => false,
        }
    }

    pub fn check_dim(&self, y: &Point) -> Result<(), GeometryError> {
        let expected = self.ambient_dim();
        if y.len() == expected {
            Ok(())
        } else {
            Err(GeometryError::DimensionMismatch {
                expected,
                found: y.len(),
            })
        }
    }

    /// The constraint `c(y)`; zero exactly on the surface.
    pub fn constraint_value(&self, y: &Point) -> Result<f64, GeometryError> {
        self.check_dim(y)?;
        Ok(match self {
            Self::Sphere { .. } => y.norm_squared() - 1.0,
            Self::Ellipsoid(e) => y.dot(&(e.matrix() * y)) - 1.0,
            Self::Pseudosphere => {
                let p = tractrix_parts(y)?;
                y[2] * y[2] - p.height * p.height
            }
            Self::Cylinder { radius } => y[0] * y[0] + y[1] * y[1] - radius * radius,
            Self::Telescope(t) => {
                let (r, _) = t.radius(y[2]);
                y[0] * y[0] + y[1] * y[1] - r * r
            }
            Self::DoubleGraph(f) => y[2].abs() - f.value(y[0], y[1]),
            Self::Revolution(p) => {
                let u = p.parameter_from_height(y[2])?;
                y[0].hypot(y[1]) - p.phi(u)
            }
        })
    }

    /// `∇c(y)`.
    pub fn constraint_gradient(&self, y: &Point) -> Result<Point, GeometryError> {
        self.check_dim(y)?;
        let grad = match self {
            Self::Sphere { .. } => 2.0 * y,
            Self::Ellipsoid(e) => 2.0 * (e.matrix() * y),
            Self::Pseudosphere => {
                let p = tractrix_parts(y)?;
                // c = z² − g(ρ)², g'(ρ) = −√(1−ρ²)/ρ
                let d_rho = 2.0 * p.height * p.sqrt_one_minus / p.rho;
                Point::from_vec(vec![d_rho * y[0] / p.rho, d_rho * y[1] / p.rho, 2.0 * y[2]])
            }
            Self::Cylinder { .. } => Point::from_vec(vec![2.0 * y[0], 2.0 * y[1], 0.0]),
            Self::Telescope(t) => {
                let (r, dr) = t.radius(y[2]);
                Point::from_vec(vec![2.0 * y[0], 2.0 * y[1], -2.0 * r * dr])
            }
            Self::DoubleGraph(f) => {
                if y[2] == 0.0 {
                    return Err(GeometryError::SingularPoint(
                        "double graph constraint |z| - f is not differentiable at z = 0".into(),
                    ));
                }
                let (fx, fy) = f.gradient(y[0], y[1]);
                Point::from_vec(vec![-fx, -fy, y[2].signum()])
            }
            Self::Revolution(p) => {
                let rho = y[0].hypot(y[1]);
                if rho == 0.0 {
                    return Err(GeometryError::SingularPoint(
                        "point lies on the axis of revolution".into(),
                    ));
                }
                let u = p.parameter_from_height(y[2])?;
                let dpsi = p.dpsi(u);
                if dpsi == 0.0 {
                    return Err(GeometryError::SingularPoint(format!(
                        "profile {p} has a horizontal tangent at u = {u}"
                    )));
                }
                Point::from_vec(vec![y[0] / rho, y[1] / rho, -p.dphi(u) / dpsi])
            }
        };
        let norm = grad.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(GeometryError::SingularPoint(format!(
                "constraint gradient vanishes or is undefined at {:?}",
                y.as_slice()
            )));
        }
        Ok(grad)
    }

    /// Gauss map `∇c/‖∇c‖`. The pseudosphere uses its closed-form outward normal
    /// `(tanh u cos v, tanh u sin v, sech u)` with `sech u = √(x² + y²)`.
    pub fn unit_normal(&self, y: &Point) -> Result<Point, GeometryError> {
        match self {
            Self::Pseudosphere => {
                self.check_dim(y)?;
                let p = tractrix_parts(y)?;
                let s = p.sqrt_one_minus / p.rho;
                Ok(Point::from_vec(vec![s * y[0], s * y[1], p.rho]))
            }
            _ => {
                let grad = self.constraint_gradient(y)?;
                let norm = grad.norm();
                Ok(grad / norm)
            }
        }
    }

    /// `(I − n nᵀ) v` as a bare ambient vector.
    pub fn project(&self, y: &Point, v: &Point) -> Result<Point, GeometryError> {
        self.check_dim(v)?;
        let n = self.unit_normal(y)?;
        Ok(v - &n * n.dot(v))
    }

    /// Orthogonal projection of `v` onto the tangent space at `y`.
    pub fn project_tangent(&self, y: &Point, v: &Point) -> Result<TangentVector, GeometryError> {
        let coords = self.project(y, v)?;
        Ok(TangentVector {
            basepoint: y.clone(),
            coords,
        })
    }

    /// Residual used by the Newton retraction. Equal to `c` except on the pseudosphere,
    /// where the unsquared `z − g(ρ)` is used to avoid the double root of `z² − g²`.
    fn retraction_residual(&self, y: &Point) -> Result<(f64, Point), GeometryError> {
        match self {
            Self::Pseudosphere => {
                let p = tractrix_parts(y)?;
                let d_rho = p.sqrt_one_minus / p.rho;
                let grad = Point::from_vec(vec![d_rho * y[0] / p.rho, d_rho * y[1] / p.rho, 1.0]);
                Ok((y[2] - p.height, grad))
            }
            _ => Ok((self.constraint_value(y)?, self.constraint_gradient(y)?)),
        }
    }

    /// Restores the constraint with the default [`Retraction`] settings.
    pub fn retract(&self, y: &Point) -> Result<Point, GeometryError> {
        self.retract_with(y, &Retraction::default())
    }

    /// Newton iteration on `t ↦ c(y + t n(y))` along the fixed direction `n(y)`.
    pub fn retract_with(&self, y: &Point, opts: &Retraction) -> Result<Point, GeometryError> {
        let residual = self.constraint_value(y)?;
        if residual.abs() <= opts.tolerance {
            return Ok(y.clone());
        }
        if !(residual.abs() < opts.capture_radius) {
            return Err(GeometryError::OutsideCaptureRadius {
                residual: residual.abs(),
                capture: opts.capture_radius,
            });
        }
        let direction = self.unit_normal(y)?;
        let mut point = y.clone();
        let mut last = residual.abs();
        for _ in 0..opts.max_iterations {
            let (r, grad) = self.retraction_residual(&point)?;
            let slope = grad.dot(&direction);
            if slope == 0.0 || !slope.is_finite() {
                return Err(GeometryError::SingularPoint(
                    "retraction direction is tangent to the level set".into(),
                ));
            }
            point.axpy(-r / slope, &direction, 1.0);
            last = self.constraint_value(&point)?.abs();
            if last <= opts.tolerance {
                return Ok(point);
            }
        }
        Err(GeometryError::RetractionFailed {
            iterations: opts.max_iterations,
            residual: last,
        })
    }

    /// Meridian `(φ(u), ψ(u))` of a surface of revolution.
    pub fn meridian(&self, u: f64) -> Result<(f64, f64), GeometryError> {
        if !u.is_finite() {
            return Err(GeometryError::OutOfDomain(format!("profile parameter {u}")));
        }
        match self {
            Self::Revolution(p) => {
                p.check_domain(u)?;
                Ok((p.phi(u), p.psi(u)))
            }
            Self::Pseudosphere => {
                Profile::Pseudosphere.check_domain(u)?;
                Ok((1.0 / u.cosh(), tractrix_height(u)))
            }
            Self::Cylinder { radius } => Ok((*radius, u)),
            Self::Telescope(t) => Ok((t.radius(u).0, u)),
            Self::Sphere { dim: 2 } => {
                if (0.0..=std::f64::consts::PI).contains(&u) {
                    Ok((u.sin(), u.cos()))
                } else {
                    Err(GeometryError::OutOfDomain(format!(
                        "polar angle {u} outside [0, π]"
                    )))
                }
            }
            _ => Err(GeometryError::InvalidParameter(format!(
                "{} is not parametrized as a surface of revolution",
                self.name()
            ))),
        }
    }

    /// `(φ(u) cos v, φ(u) sin v, ψ(u))`.
    pub fn revolution_point(&self, u: f64, v: f64) -> Result<Point, GeometryError> {
        let (phi, psi) = self.meridian(u)?;
        Ok(Point::from_vec(vec![phi * v.cos(), phi * v.sin(), psi]))
    }

    pub fn is_on_surface(&self, y: &Point, tol: f64) -> bool {
        self.constraint_value(y).is_ok_and(|c| c.abs() <= tol)
    }
}

/// Closed-form outward pseudosphere normal at parameters `(u, v)`.
pub fn pseudosphere_normal(u: f64, v: f64) -> Point {
    let t = u.tanh();
    Point::from_vec(vec![t * v.cos(), t * v.sin(), 1.0 / u.cosh()])
}

/// Azimuthal angle of `y` about the last axis (`atan2(y₁, y₀)`).
pub fn azimuth(y: &Point) -> f64 {
    y[1].atan2(y[0])
}

struct TractrixParts {
    rho: f64,
    /// `√(1 − ρ²) = tanh u`
    sqrt_one_minus: f64,
    /// `g(ρ) = sech⁻¹ρ − √(1 − ρ²) = u − tanh u`
    height: f64,
}

fn tractrix_parts(y: &Point) -> Result<TractrixParts, GeometryError> {
    let rho = y[0].hypot(y[1]);
    if !(rho > 0.0 && rho < 1.0) || !(y[2] > 0.0) {
        return Err(GeometryError::SingularPoint(format!(
            "pseudosphere requires 0 < ρ < 1 and z > 0 (branch u > 0); got ρ = {rho}, z = {}",
            y[2]
        )));
    }
    let sqrt_one_minus = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let asech = ((1.0 + sqrt_one_minus) / rho).ln();
    Ok(TractrixParts {
        rho,
        sqrt_one_minus,
        height: asech - sqrt_one_minus,
    })
}
