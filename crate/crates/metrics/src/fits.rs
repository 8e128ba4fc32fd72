//! Voxelwise parameter fits.

use mdr_autodiff::{Dtype, Tensor};

use crate::{MetricsError, Result};

/// T2 values at or above this are excluded from metric masks.
pub const T2_METRIC_CUTOFF_MS: f64 = 500.0;

/// A fitted parameter map with its validity mask and fit residuals.
#[derive(Debug, Clone)]
pub struct ParamMap {
    /// Fitted values (ms or arbitrary units); zero where invalid.
    pub values: Tensor,
    pub valid: Vec<bool>,
    /// Sum of squared regression residuals per voxel.
    pub residual: Tensor,
}

impl ParamMap {
    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

fn check_stack(mag: &Tensor, need: usize) -> Result<(usize, usize, usize)> {
    if mag.shape().len() != 3 || mag.dtype() != Dtype::Real {
        return Err(MetricsError::ShapeMismatch(format!(
            "expected real [n,h,w] magnitudes, got {:?} {:?}",
            mag.dtype(),
            mag.shape()
        )));
    }
    let n = mag.shape()[0];
    if n < need {
        return Err(MetricsError::TooFewFrames { need, got: n });
    }
    Ok((n, mag.shape()[1], mag.shape()[2]))
}

/// Linearized vFA T1 fit. Returns (T1 map, PD map).
///
/// Regresses y = S/sin(a) on x = S/tan(a); the slope is E1 = exp(-TR/T1)
/// and the intercept PD (1 - E1). Voxels with slope outside (0, 1) or
/// nonpositive signal are marked invalid.
pub fn fit_t1_vfa(mag: &Tensor, tr_ms: f64, flip_deg: &[f64]) -> Result<(ParamMap, ParamMap)> {
    let (na, h, w) = check_stack(mag, 2)?;
    if na != flip_deg.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{na} frames vs {} flip angles",
            flip_deg.len()
        )));
    }
    let sins: Vec<f64> = flip_deg.iter().map(|a| a.to_radians().sin()).collect();
    let tans: Vec<f64> = flip_deg.iter().map(|a| a.to_radians().tan()).collect();
    let mut t1 = Tensor::zeros(&[h, w], Dtype::Real);
    let mut pd = Tensor::zeros(&[h, w], Dtype::Real);
    let mut res = Tensor::zeros(&[h, w], Dtype::Real);
    let mut valid = vec![false; h * w];
    let md = mag.data();
    for i in 0..h * w {
        let signals: Vec<f64> = (0..na).map(|k| md[k * h * w + i]).collect();
        if signals.iter().all(|&s| s <= 0.0) {
            continue;
        }
        let xs: Vec<f64> = (0..na).map(|k| signals[k] / tans[k]).collect();
        let ys: Vec<f64> = (0..na).map(|k| signals[k] / sins[k]).collect();
        let n = na as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|v| v * v).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-30 {
            continue;
        }
        let slope = (n * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / n;
        if !(slope > 0.0 && slope < 1.0) {
            continue;
        }
        let t1_val = -tr_ms / slope.ln();
        let pd_val = intercept / (1.0 - slope);
        if !(t1_val.is_finite() && t1_val > 0.0 && pd_val > 0.0) {
            continue;
        }
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .sum();
        t1.data_mut()[i] = t1_val;
        pd.data_mut()[i] = pd_val;
        res.data_mut()[i] = rss;
        valid[i] = true;
    }
    let residual = res;
    Ok((
        ParamMap {
            values: t1,
            valid: valid.clone(),
            residual: residual.clone(),
        },
        ParamMap {
            values: pd,
            valid,
            residual,
        },
    ))
}

/// Magnitude-weighted log-linear T2 fit. Returns (T2 map, PD map).
///
/// ln S = ln PD - TE/T2 with weights proportional to the signal magnitude;
/// nonpositive magnitudes are clipped at 1e-8 before the log and counted
/// into the residual diagnostics. Non-decaying voxels are invalid.
pub fn fit_t2_mese(mag: &Tensor, echo_times_ms: &[f64]) -> Result<(ParamMap, ParamMap)> {
    let (ne, h, w) = check_stack(mag, 2)?;
    if ne != echo_times_ms.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{ne} frames vs {} echo times",
            echo_times_ms.len()
        )));
    }
    let mut t2 = Tensor::zeros(&[h, w], Dtype::Real);
    let mut pd = Tensor::zeros(&[h, w], Dtype::Real);
    let mut res = Tensor::zeros(&[h, w], Dtype::Real);
    let mut valid = vec![false; h * w];
    let md = mag.data();
    const CLIP: f64 = 1e-8;
    for i in 0..h * w {
        let signals: Vec<f64> = (0..ne).map(|k| md[k * h * w + i]).collect();
        if signals.iter().all(|&s| s <= CLIP) {
            continue;
        }
        let n_clipped = signals.iter().filter(|&&s| s <= CLIP).count();
        let logs: Vec<f64> = signals.iter().map(|&s| s.max(CLIP).ln()).collect();
        let weights: Vec<f64> = signals.iter().map(|&s| s.max(CLIP)).collect();
        let sw: f64 = weights.iter().sum();
        let swx: f64 = weights.iter().zip(echo_times_ms).map(|(w_, x)| w_ * x).sum();
        let swy: f64 = weights.iter().zip(&logs).map(|(w_, y)| w_ * y).sum();
        let swxx: f64 = weights
            .iter()
            .zip(echo_times_ms)
            .map(|(w_, x)| w_ * x * x)
            .sum();
        let swxy: f64 = weights
            .iter()
            .zip(echo_times_ms.iter().zip(&logs))
            .map(|(w_, (x, y))| w_ * x * y)
            .sum();
        let denom = sw * swxx - swx * swx;
        if denom.abs() < 1e-30 {
            continue;
        }
        let slope = (sw * swxy - swx * swy) / denom;
        let intercept = (swy - slope * swx) / sw;
        if slope >= -1e-12 {
            continue; // no decay: T2 -> infinity
        }
        let t2_val = -1.0 / slope;
        let pd_val = intercept.exp();
        if !(t2_val.is_finite() && pd_val.is_finite()) {
            continue;
        }
        let rss: f64 = echo_times_ms
            .iter()
            .zip(&logs)
            .zip(&weights)
            .map(|((x, y), w_)| {
                let r = y - (slope * x + intercept);
                w_ * r * r
            })
            .sum::<f64>()
            + n_clipped as f64;
        t2.data_mut()[i] = t2_val;
        pd.data_mut()[i] = pd_val;
        res.data_mut()[i] = rss;
        valid[i] = true;
    }
    let residual = res;
    Ok((
        ParamMap {
            values: t2,
            valid: valid.clone(),
            residual: residual.clone(),
        },
        ParamMap {
            values: pd,
            valid,
            residual,
        },
    ))
}

/// Valid voxels with T2 below the 500 ms metric cutoff.
pub fn t2_metric_mask(t2: &ParamMap) -> Vec<bool> {
    t2.valid
        .iter()
        .zip(t2.values.data())
        .map(|(&v, &t)| v && t < T2_METRIC_CUTOFF_MS)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdr_phantom::{
        mese_signal, render_tissue_maps, sample_phantom, spgr_signal, AcquisitionProtocol,
        SamplerConfig, TissueTable,
    };

    fn magnitude(stack: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(stack.shape(), Dtype::Real);
        for i in 0..stack.numel() {
            let (re, im) = stack.c_get(i);
            out.data_mut()[i] = re.hypot(im);
        }
        out
    }

    #[test]
    fn scalar_two_angle_case_is_exact() {
        // synthetic voxel with T1 = 800, TR = 40, two angles
        let (t1_true, tr, pd_true) = (800.0f64, 40.0, 1.3);
        let angles = [10.0f64, 30.0];
        let e1 = (-tr / t1_true).exp();
        let mut mag = Tensor::zeros(&[2, 1, 1], Dtype::Real);
        for (k, a) in angles.iter().enumerate() {
            let ar = a.to_radians();
            mag.data_mut()[k] = pd_true * ar.sin() * (1.0 - e1) / (1.0 - ar.cos() * e1);
        }
        let (t1, pd) = fit_t1_vfa(&mag, tr, &angles).unwrap();
        assert!(t1.valid[0]);
        assert!((t1.values.data()[0] - t1_true).abs() / t1_true < 1e-6);
        assert!((pd.values.data()[0] - pd_true).abs() / pd_true < 1e-6);
    }

    #[test]
    fn noiseless_phantom_t1_within_one_percent() {
        let spec = sample_phantom(42, &SamplerConfig::default()).unwrap();
        let maps = render_tissue_maps(&spec, (32, 32), &TissueTable::brain_default()).unwrap();
        let proto = AcquisitionProtocol::vfa_default();
        let stack = spgr_signal(&maps, &proto, None).unwrap();
        let (t1, pd) = fit_t1_vfa(&magnitude(&stack), 40.0, &[5.0, 10.0, 15.0, 20.0, 30.0, 40.0])
            .unwrap();
        for i in 0..32 * 32 {
            // compare only away from antialiased boundaries, where the voxel
            // is a pure tissue rather than a supersampled mixture
            let pd_true = maps.pd.data()[i];
            let is_pure = [0.7, 0.85, 1.0].iter().any(|v| (pd_true - v).abs() < 1e-12);
            if pd_true > 0.0 && is_pure {
                assert!(t1.valid[i], "valid fit expected at voxel {i}");
                let rel = (t1.values.data()[i] - maps.t1.data()[i]).abs() / maps.t1.data()[i];
                assert!(rel < 0.01, "voxel {i}: rel err {rel}");
                let rel_pd = (pd.values.data()[i] - pd_true).abs() / pd_true;
                assert!(rel_pd < 0.01);
            }
        }
    }

    #[test]
    fn zero_pd_voxels_are_invalid() {
        let mag = Tensor::zeros(&[3, 2, 2], Dtype::Real);
        let (t1, _) = fit_t1_vfa(&mag, 40.0, &[5.0, 15.0, 30.0]).unwrap();
        assert_eq!(t1.n_valid(), 0);
    }

    #[test]
    fn noiseless_t2_within_half_percent() {
        let spec = sample_phantom(43, &SamplerConfig::default()).unwrap();
        let maps = render_tissue_maps(&spec, (32, 32), &TissueTable::brain_default()).unwrap();
        let proto = AcquisitionProtocol::mese_default();
        let stack = mese_signal(&maps, &proto, None).unwrap();
        let tes = proto.echo_times().unwrap();
        let (t2, _) = fit_t2_mese(&magnitude(&stack), &tes).unwrap();
        for i in 0..32 * 32 {
            let pd_true = maps.pd.data()[i];
            let is_pure = [0.7, 0.85, 1.0].iter().any(|v| (pd_true - v).abs() < 1e-12);
            if pd_true > 0.0 && is_pure {
                assert!(t2.valid[i]);
                let rel = (t2.values.data()[i] - maps.t2.data()[i]).abs() / maps.t2.data()[i];
                assert!(rel < 0.005, "voxel {i}: rel err {rel}");
            }
        }
    }

    #[test]
    fn constant_signal_marked_invalid() {
        let mag = Tensor::full(&[4, 1, 1], Dtype::Real, 0.8);
        let (t2, _) = fit_t2_mese(&mag, &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(t2.n_valid(), 0);
    }

    #[test]
    fn metric_mask_excludes_long_t2() {
        // CSF-like 450 ms stays, a 520 ms voxel leaves the metric mask
        let tes: Vec<f64> = (0..8).map(|k| 11.5 + 11.5 * k as f64).collect();
        let mut mag = Tensor::zeros(&[8, 1, 2], Dtype::Real);
        for (k, te) in tes.iter().enumerate() {
            mag.data_mut()[k * 2] = (-te / 450.0f64).exp();
            mag.data_mut()[k * 2 + 1] = (-te / 520.0f64).exp();
        }
        let (t2, _) = fit_t2_mese(&mag, &tes).unwrap();
        assert!(t2.valid[0] && t2.valid[1]);
        let mask = t2_metric_mask(&t2);
        assert!(mask[0], "450 ms voxel included");
        assert!(!mask[1], "520 ms voxel excluded");
    }
}
