//! Telescope surface: a stack of shrinking cylinders joined by C∞ but non-analytic blends.
//!
//! Band `k` (1-based) occupies heights `[1 − 2^{1−k}, 1 − 2^{−k}]` and has radius
//! `2^{−k/2}` on its plateau. Consecutive bands are joined around the height
//! `1 − 2^{−k}` by a smoothstep of width `glue_width · 2^{−k}` built from `e^{−1/t}`.

use super::GeometryError;

pub const DEFAULT_BANDS: u32 = 12;
pub const DEFAULT_GLUE_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Telescope {
    k_max: u32,
    glue_width: f64,
}

impl Telescope {
    pub fn new(k_max: u32, glue_width: f64) -> Result<Self, GeometryError> {
        if k_max == 0 || k_max > 60 {
            return Err(GeometryError::InvalidParameter(format!(
                "telescope band count must be in 1..=60, got {k_max}"
            )));
        }
        if !(glue_width > 0.0 && glue_width < 0.5) {
            return Err(GeometryError::InvalidParameter(format!(
                "telescope glue width must lie in (0, 0.5), got {glue_width}"
            )));
        }
        Ok(Self { k_max, glue_width })
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn glue_width(&self) -> f64 {
        self.glue_width
    }

    /// Plateau radius of band `k`.
    pub fn band_radius(k: u32) -> f64 {
        (-(k as f64) / 2.0).exp2()
    }

    /// Height interval `[lower, upper]` of band `k`.
    pub fn band_bounds(k: u32) -> (f64, f64) {
        (1.0 - (1.0 - k as f64).exp2(), 1.0 - (-(k as f64)).exp2())
    }

    /// Midpoint of band `k`; always on the plateau because `glue_width < 0.5`.
    pub fn band_center(k: u32) -> f64 {
        let (lo, hi) = Self::band_bounds(k);
        0.5 * (lo + hi)
    }

    /// Part of band `k` where the radius is exactly [`Telescope::band_radius`].
    pub fn plateau(&self, k: u32) -> (f64, f64) {
        let (lo, hi) = Self::band_bounds(k);
        let below = if k > 1 { 0.5 * self.glue_width * (1.0 - k as f64).exp2() } else { 0.0 };
        let above = if k < self.k_max { 0.5 * self.glue_width * (-(k as f64)).exp2() } else { 0.0 };
        (lo + below, hi - above)
    }

    pub fn check_band(&self, k: u32) -> Result<(), GeometryError> {
        if k >= 1 && k <= self.k_max {
            Ok(())
        } else {
            Err(GeometryError::InvalidParameter(format!(
                "telescope band {k} outside 1..={}",
                self.k_max
            )))
        }
    }

    /// Band containing height `z`, clamped to `1..=k_max`.
    pub fn band_of(&self, z: f64) -> u32 {
        (1..self.k_max)
            .find(|&k| z < Self::band_bounds(k).1)
            .unwrap_or(self.k_max)
    }

    /// Radius profile `r(z)` and its derivative `r'(z)`.
    pub fn radius(&self, z: f64) -> (f64, f64) {
        for k in 1..self.k_max {
            let joint = Self::band_bounds(k).1;
            let width = self.glue_width * (-(k as f64)).exp2();
            let start = joint - 0.5 * width;
            if z < start {
                break;
            }
            if z < start + width {
                let (s, ds) = smoothstep((z - start) / width);
                let (r0, r1) = (Self::band_radius(k), Self::band_radius(k + 1));
                return (r0 + (r1 - r0) * s, (r1 - r0) * ds / width);
            }
        }
        (Self::band_radius(self.band_of(z)), 0.0)
    }
}

impl Default for Telescope {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_BANDS,
            glue_width: DEFAULT_GLUE_WIDTH,
        }
    }
}

/// `e^{−1/t}` for `t > 0`, zero otherwise, with its derivative.
fn bump(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else {
        let g = (-1.0 / t).exp();
        (g, g / (t * t))
    }
}

/// C∞ step from 0 (t ≤ 0) to 1 (t ≥ 1), with derivative.
fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let (a, da) = bump(t);
    let (b, db) = bump(1.0 - t);
    let sum = a + b;
    (a / sum, (da * b + a * db) / (sum * sum))
}
