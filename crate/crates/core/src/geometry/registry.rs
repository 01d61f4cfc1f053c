//! Named built-in scalar functions used by `DoubleGraph` and `Revolution` surfaces.
//!
//! Functions are selected by registry key (for example `"paraboloid:1,2"`) rather
//! than parsed from expressions, so every entry carries exact analytic derivatives.

use std::fmt;
use std::str::FromStr;

use super::GeometryError;

/// Height field `f(x, y)` with strictly positive infimum, describing the sheets `z = ±f(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeightField {
    /// `f = c + a (x² + y²)`; key `paraboloid[:c,a]`, default `c = 1, a = 1`.
    Paraboloid { c: f64, a: f64 },
    /// `f = c + a (x² + y² − r²)²`, a non-convex hat with a ring of minima; key `hat[:c,a,r]`.
    Hat { c: f64, a: f64, r: f64 },
}

impl HeightField {
    pub fn paraboloid(c: f64, a: f64) -> Result<Self, GeometryError> {
        Self::Paraboloid { c, a }.validated()
    }

    pub fn hat(c: f64, a: f64, r: f64) -> Result<Self, GeometryError> {
        Self::Hat { c, a, r }.validated()
    }

    fn validated(self) -> Result<Self, GeometryError> {
        let ok = match self {
            Self::Paraboloid { c, a } => c > 0.0 && a >= 0.0 && a.is_finite() && c.is_finite(),
            Self::Hat { c, a, r } => {
                c > 0.0 && a >= 0.0 && [c, a, r].iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(GeometryError::InvalidParameter(format!(
                "height field {self} must have a strictly positive infimum"
            )))
        }
    }

    /// Greatest lower bound of `f` over the plane.
    pub fn infimum(&self) -> f64 {
        match *self {
            Self::Paraboloid { c, .. } | Self::Hat { c, .. } => c,
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let rho2 = x * x + y * y;
        match *self {
            Self::Paraboloid { c, a } => c + a * rho2,
            Self::Hat { c, a, r } => {
                let s = rho2 - r * r;
                c + a * s * s
            }
        }
    }

    /// Analytic partials `(∂f/∂x, ∂f/∂y)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Self::Paraboloid { a, .. } => (2.0 * a * x, 2.0 * a * y),
            Self::Hat { a, r, .. } => {
                let s = x * x + y * y - r * r;
                (4.0 * a * s * x, 4.0 * a * s * y)
            }
        }
    }
}

impl fmt::Display for HeightField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Paraboloid { c, a } => write!(f, "paraboloid:{c},{a}"),
            Self::Hat { c, a, r } => write!(f, "hat:{c},{a},{r}"),
        }
    }
}

impl FromStr for HeightField {
    type Err = GeometryError;

    fn from_str(key: &str) -> Result<Self, Self::Err> {
        let (name, params) = split_key(key)?;
        match name {
            "paraboloid" => match params.as_slice() {
                [] => Self::paraboloid(1.0, 1.0),
                [c, a] => Self::paraboloid(*c, *a),
                _ => Err(bad_arity(key, "0 or 2")),
            },
            "hat" => match params.as_slice() {
                [] => Self::hat(1.0, 1.0, 1.0),
                [c, a, r] => Self::hat(*c, *a, *r),
                _ => Err(bad_arity(key, "0 or 3")),
            },
            _ => Err(GeometryError::UnknownRegistryKey(key.to_string())),
        }
    }
}

/// Meridian profile `(φ(u), ψ(u))` of a surface of revolution about the z-axis.
///
/// Points are `(φ(u) cos v, φ(u) sin v, ψ(u))`. Every profile has `ψ` strictly
/// monotone on its domain so that the height determines `u` uniquely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `φ = r`, `ψ = u`; key `cylinder[:r]`.
    Cylinder { radius: f64 },
    /// `φ = sin u`, `ψ = cos u` on `(0, π)`; key `sphere`.
    Sphere,
    /// `φ = sech u`, `ψ = u − tanh u` on `(0, ∞)`; key `pseudosphere`.
    Pseudosphere,
    /// `φ = cosh u`, `ψ = u`; key `catenoid`.
    Catenoid,
}

impl Profile {
    /// Open parameter interval on which the profile is admissible.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::Cylinder { .. } | Self::Catenoid => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Sphere => (0.0, std::f64::consts::PI),
            Self::Pseudosphere => (0.0, f64::INFINITY),
        }
    }

    /// Parameter range used when sampling random points.
    pub fn sample_range(&self) -> (f64, f64) {
        match self {
            Self::Cylinder { .. } | Self::Catenoid => (-1.0, 1.0),
            Self::Sphere => (0.3, std::f64::consts::PI - 0.3),
            Self::Pseudosphere => (0.5, 2.0),
        }
    }

    pub fn check_domain(&self, u: f64) -> Result<(), GeometryError> {
        let (lo, hi) = self.domain();
        if u.is_finite() && u > lo && u < hi {
            Ok(())
        } else {
            Err(GeometryError::OutOfDomain(format!(
                "profile parameter u = {u} outside ({lo}, {hi}) for {self}"
            )))
        }
    }

    pub fn phi(&self, u: f64) -> f64 {
        match *self {
            Self::Cylinder { radius } => radius,
            Self::Sphere => u.sin(),
            Self::Pseudosphere => 1.0 / u.cosh(),
            Self::Catenoid => u.cosh(),
        }
    }

    pub fn dphi(&self, u: f64) -> f64 {
        match *self {
            Self::Cylinder { .. } => 0.0,
            Self::Sphere => u.cos(),
            Self::Pseudosphere => -u.tanh() / u.cosh(),
            Self::Catenoid => u.sinh(),
        }
    }

    pub fn psi(&self, u: f64) -> f64 {
        match *self {
            Self::Cylinder { .. } | Self::Catenoid => u,
            Self::Sphere => u.cos(),
            Self::Pseudosphere => tractrix_height(u),
        }
    }

    pub fn dpsi(&self, u: f64) -> f64 {
        match *self {
            Self::Cylinder { .. } | Self::Catenoid => 1.0,
            Self::Sphere => -u.sin(),
            Self::Pseudosphere => {
                let t = u.tanh();
                t * t
            }
        }
    }

    /// Solves `ψ(u) = z` for `u` in the profile domain.
    pub fn parameter_from_height(&self, z: f64) -> Result<f64, GeometryError> {
        match self {
            Self::Cylinder { .. } | Self::Catenoid => Ok(z),
            Self::Sphere => {
                if z > -1.0 && z < 1.0 {
                    Ok(z.acos())
                } else {
                    Err(GeometryError::OutOfDomain(format!(
                        "height {z} is outside the open sphere profile range (-1, 1)"
                    )))
                }
            }
            Self::Pseudosphere => invert_tractrix_height(z),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cylinder { radius } => write!(f, "cylinder:{radius}"),
            Self::Sphere => f.write_str("sphere"),
            Self::Pseudosphere => f.write_str("pseudosphere"),
            Self::Catenoid => f.write_str("catenoid"),
        }
    }
}

impl FromStr for Profile {
    type Err = GeometryError;

    fn from_str(key: &str) -> Result<Self, Self::Err> {
        let (name, params) = split_key(key)?;
        let profile = match (name, params.as_slice()) {
            ("cylinder", []) => Self::Cylinder { radius: 1.0 },
            ("cylinder", [r]) if *r > 0.0 && r.is_finite() => Self::Cylinder { radius: *r },
            ("cylinder", [_]) => {
                return Err(GeometryError::InvalidParameter(format!(
                    "cylinder radius must be positive in {key:?}"
                )))
            }
            ("cylinder", _) => return Err(bad_arity(key, "0 or 1")),
            ("sphere", []) => Self::Sphere,
            ("pseudosphere", []) => Self::Pseudosphere,
            ("catenoid", []) => Self::Catenoid,
            ("sphere" | "pseudosphere" | "catenoid", _) => return Err(bad_arity(key, "0")),
            _ => return Err(GeometryError::UnknownRegistryKey(key.to_string())),
        };
        Ok(profile)
    }
}

/// `u − tanh u`, using its Taylor series near zero where the difference cancels.
pub fn tractrix_height(u: f64) -> f64 {
    if u.abs() < 0.05 {
        let u2 = u * u;
        u * u2
            * (1.0 / 3.0
                + u2 * (-2.0 / 15.0
                    + u2 * (17.0 / 315.0 + u2 * (-62.0 / 2835.0 + u2 * (1382.0 / 155925.0)))))
    } else {
        u - u.tanh()
    }
}

/// Inverts `z = u − tanh u` on `u > 0`.
///
/// The map is increasing and convex, so Newton started to the right of the root
/// (at `z + 1`, since `u − tanh u ≥ u − 1`) converges monotonically.
pub fn invert_tractrix_height(z: f64) -> Result<f64, GeometryError> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(GeometryError::OutOfDomain(format!(
            "pseudosphere height z = {z} must be positive (branch u > 0)"
        )));
    }
    let mut u = z + 1.0;
    for _ in 0..200 {
        let t = u.tanh();
        let g = tractrix_height(u) - z;
        let dg = t * t;
        let next = u - g / dg;
        if !next.is_finite() {
            break;
        }
        if (next - u).abs() <= 1e-14 * next.abs() {
            return Ok(next);
        }
        u = next;
    }
    Err(GeometryError::OutOfDomain(format!(
        "could not invert pseudosphere height z = {z}"
    )))
}

fn split_key(key: &str) -> Result<(&str, Vec<f64>), GeometryError> {
    let key = key.trim();
    let (name, rest) = match key.split_once(':') {
        Some((name, rest)) => (name.trim(), Some(rest)),
        None => (key, None),
    };
    let params = match rest {
        None => Vec::new(),
        Some(rest) => rest
            .split(',')
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| {
                    GeometryError::InvalidParameter(format!(
                        "non-numeric parameter {p:?} in registry key {key:?}"
                    ))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    Ok((name, params))
}

fn bad_arity(key: &str, expected: &str) -> GeometryError {
    GeometryError::InvalidParameter(format!(
        "registry key {key:?} expects {expected} parameters"
    ))
}
