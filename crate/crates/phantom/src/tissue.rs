//! Tissue parameter tables and antialiased rasterization.

use std::collections::BTreeMap;

use crate::geometry::PhantomSpec;
use crate::{PhantomError, Result};
use mdr_autodiff::{Dtype, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TissueParams {
    /// Proton density, arbitrary units.
    pub pd: f64,
    /// Longitudinal relaxation time, ms.
    pub t1_ms: f64,
    /// Transverse relaxation time, ms.
    pub t2_ms: f64,
}

/// Class id -> tissue parameters. Class 0 is always background (PD = 0).
#[derive(Debug, Clone)]
pub struct TissueTable {
    classes: BTreeMap<u8, TissueParams>,
}

impl TissueTable {
    pub fn new(entries: &[(u8, TissueParams)]) -> Result<Self> {
        let mut classes = BTreeMap::new();
        classes.insert(
            0u8,
            TissueParams {
                pd: 0.0,
                t1_ms: 0.0,
                t2_ms: 0.0,
            },
        );
        for (id, p) in entries {
            if *id == 0 {
                return Err(PhantomError::BadTable("class 0 is reserved".into()));
            }
            if p.pd < 0.0 {
                return Err(PhantomError::BadTable(format!("class {id}: PD < 0")));
            }
            if p.pd > 0.0 && (p.t1_ms <= 0.0 || p.t2_ms <= 0.0) {
                return Err(PhantomError::BadTable(format!(
                    "class {id}: relaxation times must be positive where PD > 0"
                )));
            }
            if p.t2_ms > p.t1_ms {
                return Err(PhantomError::BadTable(format!("class {id}: T2 > T1")));
            }
            classes.insert(*id, *p);
        }
        Ok(TissueTable { classes })
    }

    pub fn get(&self, id: u8) -> Result<TissueParams> {
        self.classes
            .get(&id)
            .copied()
            .ok_or(PhantomError::UnknownClass(id))
    }

    /// WM/GM/CSF-like defaults at 3T-like values.
    pub fn brain_default() -> Self {
        TissueTable::new(&[
            (
                1,
                TissueParams {
                    pd: 0.7,
                    t1_ms: 800.0,
                    t2_ms: 70.0,
                },
            ),
            (
                2,
                TissueParams {
                    pd: 0.85,
                    t1_ms: 1300.0,
                    t2_ms: 95.0,
                },
            ),
            (
                3,
                TissueParams {
                    pd: 1.0,
                    t1_ms: 3500.0,
                    t2_ms: 450.0,
                },
            ),
        ])
        .expect("default table is valid")
    }
}

/// Per-voxel PD/T1/T2 maps on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueMaps {
    pub pd: Tensor,
    pub t1: Tensor,
    pub t2: Tensor,
    pub h: usize,
    pub w: usize,
}

impl TissueMaps {
    pub fn support(&self) -> Vec<bool> {
        self.pd.data().iter().map(|&v| v > 0.0).collect()
    }
}

const SUBSAMPLES: usize = 4;

/// Rasterize a phantom spec onto an h x w grid with 4x supersampling.
/// Painter's order: the last region containing a subsample wins.
pub fn render_tissue_maps(
    spec: &PhantomSpec,
    grid: (usize, usize),
    table: &TissueTable,
) -> Result<TissueMaps> {
    let (h, w) = grid;
    // validate class ids up front so the error names the class, not a pixel
    for r in &spec.regions {
        table.get(r.class_id)?;
    }
    let mut pd = Tensor::zeros(&[h, w], Dtype::Real);
    let mut t1 = Tensor::zeros(&[h, w], Dtype::Real);
    let mut t2 = Tensor::zeros(&[h, w], Dtype::Real);
    let inv = 1.0 / (SUBSAMPLES * SUBSAMPLES) as f64;
    for y in 0..h {
        for x in 0..w {
            let (mut apd, mut at1, mut at2) = (0.0, 0.0, 0.0);
            for sy in 0..SUBSAMPLES {
                for sx in 0..SUBSAMPLES {
                    let u = -1.0
                        + 2.0 * (x as f64 + (sx as f64 + 0.5) / SUBSAMPLES as f64) / w as f64;
                    let v = -1.0
                        + 2.0 * (y as f64 + (sy as f64 + 0.5) / SUBSAMPLES as f64) / h as f64;
                    let mut class = 0u8;
                    for r in &spec.regions {
                        if r.contains(u, v) {
                            class = r.class_id;
                        }
                    }
                    let p = table.get(class)?;
                    apd += p.pd;
                    at1 += p.t1_ms;
                    at2 += p.t2_ms;
                }
            }
            let i = y * w + x;
            pd.data_mut()[i] = apd * inv;
            t1.data_mut()[i] = at1 * inv;
            t2.data_mut()[i] = at2 * inv;
        }
    }
    Ok(TissueMaps { pd, t1, t2, h, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EllipseRegion;

    fn disc_spec(radius: f64, class_id: u8) -> PhantomSpec {
        PhantomSpec {
            regions: vec![EllipseRegion {
                center: (0.0, 0.0),
                axes: (radius, radius),
                rotation: 0.0,
                class_id,
            }],
            seed: 0,
        }
    }

    #[test]
    fn constant_region_takes_table_value() {
        let spec = disc_spec(0.9, 2);
        let maps = render_tissue_maps(&spec, (64, 64), &TissueTable::brain_default()).unwrap();
        // center pixel fully inside
        let i = 32 * 64 + 32;
        assert_eq!(maps.t1.data()[i], 1300.0);
        assert_eq!(maps.t2.data()[i], 95.0);
    }

    #[test]
    fn empty_spec_renders_zero_pd() {
        let spec = PhantomSpec {
            regions: vec![],
            seed: 0,
        };
        let maps = render_tissue_maps(&spec, (32, 32), &TissueTable::brain_default()).unwrap();
        assert!(maps.pd.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disc_area_matches_analytic_value() {
        // radius 0.5 on a 256^2 grid over [-1,1]: pi * 64^2 pixels
        let spec = disc_spec(0.5, 1);
        let maps = render_tissue_maps(&spec, (256, 256), &TissueTable::brain_default()).unwrap();
        let area: f64 = maps.pd.data().iter().sum::<f64>() / 0.7;
        let expect = std::f64::consts::PI * 64.0 * 64.0;
        let rel = (area - expect).abs() / expect;
        assert!(rel < 0.005, "area {area} vs {expect} (rel {rel})");
    }

    #[test]
    fn unknown_class_rejected() {
        let spec = disc_spec(0.5, 9);
        assert!(matches!(
            render_tissue_maps(&spec, (16, 16), &TissueTable::brain_default()),
            Err(PhantomError::UnknownClass(9))
        ));
    }

    #[test]
    fn painters_order_overwrites() {
        let spec = PhantomSpec {
            regions: vec![
                EllipseRegion {
                    center: (0.0, 0.0),
                    axes: (0.8, 0.8),
                    rotation: 0.0,
                    class_id: 1,
                },
                EllipseRegion {
                    center: (0.0, 0.0),
                    axes: (0.3, 0.3),
                    rotation: 0.0,
                    class_id: 3,
                },
            ],
            seed: 0,
        };
        let maps = render_tissue_maps(&spec, (64, 64), &TissueTable::brain_default()).unwrap();
        let center = 32 * 64 + 32;
        assert_eq!(maps.t1.data()[center], 3500.0);
        // a point inside the big ellipse but outside the small one
        let edge = 32 * 64 + 12;
        assert_eq!(maps.t1.data()[edge], 800.0);
    }

    #[test]
    fn table_rejects_t2_above_t1() {
        assert!(TissueTable::new(&[(
            1,
            TissueParams {
                pd: 1.0,
                t1_ms: 100.0,
                t2_ms: 200.0,
            }
        )])
        .is_err());
    }
}
