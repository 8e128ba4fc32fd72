//! Simplified low-resolution coil calibration.
//!
//! The central ky lines of one frame are apodized with a Hann window,
//! inverse-transformed per coil and normalized by the root-sum-of-squares.
//! Phases are referenced to the first coil so the common image phase
//! cancels. This stands in for a full ESPIRiT calibration at desk scale.

use mdr_autodiff::{fft2_unitary, Dtype, FftDirection, Tensor};

use crate::operators::fftshift2;
use crate::{MriError, Result};

const SUPPORT_FRACTION: f64 = 0.05;

/// Low-resolution image of one coil from the central `n_lines` ky columns.
fn lowres_image(kframe: &Tensor, coil: usize, n_lines: usize) -> Result<Tensor> {
    let (nc, h, w) = (kframe.shape()[0], kframe.shape()[1], kframe.shape()[2]);
    debug_assert!(coil < nc);
    let start = (w - n_lines) / 2;
    let mut k = Tensor::zeros(&[h, w], Dtype::Complex);
    {
        let kd = k.data_mut();
        let sd = kframe.data();
        for y in 0..h {
            for j in 0..n_lines {
                let ky = start + j;
                // periodic Hann taper; identity when taking every line
                let win = if n_lines == w {
                    1.0
                } else {
                    let ph = std::f64::consts::PI * (j as f64 + 0.5) / n_lines as f64;
                    ph.sin() * ph.sin()
                };
                let src = ((coil * h + y) * w + ky) * 2;
                let dst = (y * w + ky) * 2;
                kd[dst] = sd[src] * win;
                kd[dst + 1] = sd[src + 1] * win;
            }
        }
    }
    Ok(fft2_unitary(&fftshift2(&k), FftDirection::Inverse)?)
}

/// Estimate sensitivity maps from the central k-space lines of a single
/// frame (complex [nc, h, w], centered layout). The output has unit
/// root-sum-of-squares on the detected support and zeros outside it.
pub fn calibrate_sensitivities(kframe: &Tensor, n_lines: usize) -> Result<Tensor> {
    if kframe.shape().len() != 3 || kframe.dtype() != Dtype::Complex {
        return Err(MriError::ShapeMismatch(format!(
            "calibration expects complex [nc,h,w], got {:?}",
            kframe.shape()
        )));
    }
    let (nc, h, w) = (kframe.shape()[0], kframe.shape()[1], kframe.shape()[2]);
    if n_lines < 4 {
        return Err(MriError::Calibration(format!(
            "need at least 4 central lines, got {n_lines}"
        )));
    }
    if n_lines > w {
        return Err(MriError::Calibration(format!(
            "{n_lines} central lines exceed ny = {w}"
        )));
    }
    let lowres: Vec<Tensor> = (0..nc)
        .map(|c| lowres_image(kframe, c, n_lines))
        .collect::<Result<_>>()?;

    let mut rss = vec![0.0f64; h * w];
    for img in &lowres {
        for i in 0..h * w {
            let (re, im) = img.c_get(i);
            rss[i] += re * re + im * im;
        }
    }
    rss.iter_mut().for_each(|v| *v = v.sqrt());
    let max_rss = rss.iter().cloned().fold(0.0, f64::max);
    if max_rss == 0.0 {
        return Err(MriError::Calibration("all-zero calibration data".into()));
    }
    let thresh = SUPPORT_FRACTION * max_rss;

    let mut maps = Tensor::zeros(&[nc, h, w], Dtype::Complex);
    for i in 0..h * w {
        if rss[i] < thresh {
            continue; // outside support: maps stay zero
        }
        if rss[i] == 0.0 {
            return Err(MriError::Calibration(format!(
                "zero RSS inside support at voxel {i}"
            )));
        }
        // phase reference: rotate by the conjugate phase of coil 1
        let (r1, i1) = lowres[0].c_get(i);
        let mag1 = r1.hypot(i1);
        let (pr, pi) = if mag1 > 1e-14 * max_rss {
            (r1 / mag1, -i1 / mag1)
        } else {
            (1.0, 0.0)
        };
        for (c, img) in lowres.iter().enumerate() {
            let (re, im) = img.c_get(i);
            let (sre, sim) = (re / rss[i], im / rss[i]);
            maps.c_set(c * h * w + i, sre * pr - sim * pi, sre * pi + sim * pr);
        }
    }
    Ok(maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::SamplingMask;
    use crate::operators::forward_op;
    use mdr_phantom::{
        render_tissue_maps, simulate_sensitivities, spgr_signal, AcquisitionProtocol, CoilModel,
        EllipseRegion, PhantomSpec, TissueTable,
    };

    fn phantom_frame_kspace(sens: &Tensor, h: usize, w: usize) -> (Tensor, Vec<bool>) {
        let spec = PhantomSpec {
            regions: vec![EllipseRegion {
                center: (0.0, 0.0),
                axes: (0.75, 0.65),
                rotation: 0.2,
                class_id: 2,
            }],
            seed: 3,
        };
        let maps = render_tissue_maps(&spec, (h, w), &TissueTable::brain_default()).unwrap();
        let stack = spgr_signal(&maps, &AcquisitionProtocol::vfa_default(), None).unwrap();
        // frame 4 (30 deg) has strong signal
        let frame = Tensor::from_vec(
            &[1, h, w],
            Dtype::Complex,
            stack.data()[2 * 4 * h * w..2 * 5 * h * w].to_vec(),
        )
        .unwrap();
        let mask = SamplingMask::full(1, w);
        let k = forward_op(&frame, sens, &mask).unwrap();
        let nc = sens.shape()[0];
        let k = Tensor::from_vec(&[nc, h, w], Dtype::Complex, k.into_data()).unwrap();
        // comparison mask: solid interior of the phantom
        let interior: Vec<bool> = maps.pd.data().iter().map(|&v| v > 0.8 * 0.85).collect();
        (k, interior)
    }

    /// reference the truth maps the same way the estimator does
    fn referenced_truth(sens: &Tensor) -> Tensor {
        let (nc, h, w) = (sens.shape()[0], sens.shape()[1], sens.shape()[2]);
        let mut out = Tensor::zeros(&[nc, h, w], Dtype::Complex);
        for i in 0..h * w {
            let mut rss = 0.0;
            for c in 0..nc {
                let (re, im) = sens.c_get(c * h * w + i);
                rss += re * re + im * im;
            }
            let rss = rss.sqrt();
            if rss == 0.0 {
                continue;
            }
            let (r1, i1) = sens.c_get(i);
            let m1 = r1.hypot(i1).max(1e-300);
            let (pr, pi) = (r1 / m1, -i1 / m1);
            for c in 0..nc {
                let (re, im) = sens.c_get(c * h * w + i);
                let (sre, sim) = (re / rss, im / rss);
                out.c_set(c * h * w + i, sre * pr - sim * pi, sre * pi + sim * pr);
            }
        }
        out
    }

    #[test]
    fn constant_coils_recovered_up_to_global_phase() {
        let (h, w) = (32, 32);
        let mut sens = Tensor::zeros(&[3, h, w], Dtype::Complex);
        let coils = [(0.8, 0.3), (0.5, -0.6), (0.9, 0.1)];
        for (c, (re, im)) in coils.iter().enumerate() {
            for i in 0..h * w {
                sens.c_set(c * h * w + i, *re, *im);
            }
        }
        let (k, interior) = phantom_frame_kspace(&sens, h, w);
        let est = calibrate_sensitivities(&k, 12).unwrap();
        let truth = referenced_truth(&sens);
        let mut max_err = 0.0f64;
        for i in 0..h * w {
            if !interior[i] {
                continue;
            }
            for c in 0..3 {
                let (er, ei) = est.c_get(c * h * w + i);
                let (tr, ti) = truth.c_get(c * h * w + i);
                max_err = max_err.max(((er - tr).powi(2) + (ei - ti).powi(2)).sqrt());
            }
        }
        assert!(max_err < 1e-3, "max pointwise error {max_err}");
    }

    #[test]
    fn full_lines_smooth_truth_under_one_percent() {
        let (h, w) = (32, 32);
        let sens = simulate_sensitivities(4, (h, w), 5, CoilModel::GaussianBumps);
        let (k, interior) = phantom_frame_kspace(&sens, h, w);
        let est = calibrate_sensitivities(&k, w).unwrap();
        let truth = referenced_truth(&sens);
        let (mut err2, mut ref2) = (0.0f64, 0.0f64);
        for i in 0..h * w {
            if !interior[i] {
                continue;
            }
            for c in 0..4 {
                let (er, ei) = est.c_get(c * h * w + i);
                let (tr, ti) = truth.c_get(c * h * w + i);
                err2 += (er - tr).powi(2) + (ei - ti).powi(2);
                ref2 += tr * tr + ti * ti;
            }
        }
        let rel = (err2 / ref2).sqrt();
        assert!(rel < 0.01, "relative error {rel}");
    }

    #[test]
    fn single_uniform_coil_gives_unit_map() {
        let (h, w) = (32, 32);
        let mut sens = Tensor::zeros(&[1, h, w], Dtype::Complex);
        for i in 0..h * w {
            sens.c_set(i, 1.0, 0.0);
        }
        let (k, interior) = phantom_frame_kspace(&sens, h, w);
        let est = calibrate_sensitivities(&k, 12).unwrap();
        for i in 0..h * w {
            if interior[i] {
                let (re, im) = est.c_get(i);
                assert!((re - 1.0).abs() < 1e-9 && im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_few_lines_rejected() {
        let k = Tensor::zeros(&[1, 8, 8], Dtype::Complex);
        assert!(calibrate_sensitivities(&k, 3).is_err());
    }
}
