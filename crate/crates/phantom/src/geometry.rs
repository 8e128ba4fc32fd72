//! Ellipse-based phantom geometry in normalized [-1, 1] coordinates.

use rand::Rng;

use crate::{PhantomError, Result};
use mdr_autodiff::rng_from;

/// One elliptical region. Later regions overwrite earlier ones on overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseRegion {
    pub center: (f64, f64),
    /// Semi-axes (a, b) in normalized units.
    pub axes: (f64, f64),
    /// Rotation in radians.
    pub rotation: f64,
    pub class_id: u8,
}

impl EllipseRegion {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        let du = u - self.center.0;
        let dv = v - self.center.1;
        let (s, c) = self.rotation.sin_cos();
        let p = c * du + s * dv;
        let q = -s * du + c * dv;
        let (a, b) = self.axes;
        (p / a) * (p / a) + (q / b) * (q / b) <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub regions: Vec<EllipseRegion>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Inclusive (min, max) number of regions, head ellipse included.
    pub region_range: (usize, usize),
    /// Semi-axis range for interior regions.
    pub size_range: (f64, f64),
    /// Tissue classes are drawn from 1..=n_classes.
    pub n_classes: u8,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            region_range: (4, 7),
            size_range: (0.08, 0.35),
            n_classes: 3,
        }
    }
}

/// Draw a random phantom: one large head ellipse plus interior structures.
/// Deterministic in `seed`; every region stays inside the field of view.
pub fn sample_phantom(seed: u64, config: &SamplerConfig) -> Result<PhantomSpec> {
    let (lo, hi) = config.region_range;
    if lo < 3 || hi < lo {
        return Err(PhantomError::BadConfig(format!(
            "region range ({lo}, {hi}) must satisfy 3 <= min <= max"
        )));
    }
    let (smin, smax) = config.size_range;
    if !(smin > 0.0 && smax >= smin && smax <= 0.5) {
        return Err(PhantomError::BadConfig(format!(
            "size range ({smin}, {smax}) must satisfy 0 < min <= max <= 0.5"
        )));
    }
    if config.n_classes == 0 {
        return Err(PhantomError::BadConfig("need at least one class".into()));
    }
    let mut rng = rng_from(seed);
    let n_regions = rng.gen_range(lo..=hi);
    let mut regions = Vec::with_capacity(n_regions);

    // head ellipse: big, near-centered
    let head_class = rng.gen_range(1..=config.n_classes);
    regions.push(EllipseRegion {
        center: (rng.gen_range(-0.08..=0.08), rng.gen_range(-0.08..=0.08)),
        axes: (rng.gen_range(0.55..=0.78), rng.gen_range(0.55..=0.78)),
        rotation: rng.gen_range(0.0..std::f64::consts::PI),
        class_id: head_class,
    });

    for _ in 1..n_regions {
        regions.push(EllipseRegion {
            center: (rng.gen_range(-0.45..=0.45), rng.gen_range(-0.45..=0.45)),
            axes: (
                rng.gen_range(smin..=smax),
                rng.gen_range(smin..=smax),
            ),
            rotation: rng.gen_range(0.0..std::f64::consts::PI),
            class_id: rng.gen_range(1..=config.n_classes),
        });
    }
    Ok(PhantomSpec { regions, seed })
}
