//! Steady-state signal equations and synthetic phase.

use crate::protocol::AcquisitionProtocol;
use crate::tissue::TissueMaps;
use crate::{PhantomError, Result};
use mdr_autodiff::{rng_from, Dtype, Tensor};
use rand_distr::{Distribution, Normal};

/// Smooth second-order polynomial phase map in radians, coefficients
/// ~ N(0, 0.3).
pub fn synth_phase(grid: (usize, usize), seed: u64) -> Tensor {
    let (h, w) = grid;
    let mut rng = rng_from(seed.wrapping_mul(0x9e37).wrapping_add(0x79b9));
    let normal = Normal::new(0.0, 0.3).expect("valid std");
    let c: Vec<f64> = (0..6).map(|_| normal.sample(&mut rng)).collect();
    let mut phase = Tensor::zeros(&[h, w], Dtype::Real);
    for y in 0..h {
        for x in 0..w {
            let u = -1.0 + 2.0 * (x as f64 + 0.5) / w as f64;
            let v = -1.0 + 2.0 * (y as f64 + 0.5) / h as f64;
            phase.data_mut()[y * w + x] =
                c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v;
        }
    }
    phase
}

/// SPGR steady-state magnitude: S = PD sin(a) (1 - E1) / (1 - cos(a) E1)
/// with E1 = exp(-TR/T1).
pub fn spgr_magnitude(pd: f64, t1_ms: f64, tr_ms: f64, alpha_rad: f64) -> f64 {
    if pd == 0.0 {
        return 0.0;
    }
    let e1 = (-tr_ms / t1_ms).exp();
    pd * alpha_rad.sin() * (1.0 - e1) / (1.0 - alpha_rad.cos() * e1)
}

/// MESE magnitude: S = PD exp(-TE/T2).
pub fn mese_magnitude(pd: f64, t2_ms: f64, te_ms: f64) -> f64 {
    if pd == 0.0 {
        return 0.0;
    }
    pd * (-te_ms / t2_ms).exp()
}

fn check_positive(maps: &TissueMaps, what: &'static str) -> Result<()> {
    let param = match what {
        "T1" => maps.t1.data(),
        _ => maps.t2.data(),
    };
    for (i, (&pd, &p)) in maps.pd.data().iter().zip(param.iter()).enumerate() {
        if pd > 0.0 && p <= 0.0 {
            return Err(PhantomError::NonPositiveParam { what, voxel: i });
        }
    }
    Ok(())
}

/// Magnitude of one protocol frame at one voxel.
fn frame_magnitude(
    protocol: &AcquisitionProtocol,
    frame: usize,
    pd: f64,
    t1_ms: f64,
    t2_ms: f64,
) -> f64 {
    match protocol {
        AcquisitionProtocol::VfaSpgr { tr_ms, flip_deg, .. } => {
            spgr_magnitude(pd, t1_ms, *tr_ms, flip_deg[frame].to_radians())
        }
        AcquisitionProtocol::Mese {
            te1_ms,
            delta_te_ms,
            ..
        } => mese_magnitude(pd, t2_ms, te1_ms + frame as f64 * delta_te_ms),
    }
}

/// Render a single contrast frame as a complex [h, w] image. The optional
/// phase map (radians) is applied voxelwise.
pub fn signal_frame(
    maps: &TissueMaps,
    protocol: &AcquisitionProtocol,
    frame: usize,
    phase: Option<&Tensor>,
) -> Result<Tensor> {
    let n = protocol.n_frames();
    if frame >= n {
        return Err(PhantomError::ContrastIndex {
            idx: frame,
            n_frames: n,
        });
    }
    match protocol {
        AcquisitionProtocol::VfaSpgr { .. } => check_positive(maps, "T1")?,
        AcquisitionProtocol::Mese { .. } => check_positive(maps, "T2")?,
    }
    let (h, w) = (maps.h, maps.w);
    let mut out = Tensor::zeros(&[h, w], Dtype::Complex);
    for i in 0..h * w {
        let mag = frame_magnitude(
            protocol,
            frame,
            maps.pd.data()[i],
            maps.t1.data()[i],
            maps.t2.data()[i],
        );
        match phase {
            Some(p) => {
                let (s, c) = p.data()[i].sin_cos();
                out.c_set(i, mag * c, mag * s);
            }
            None => out.c_set(i, mag, 0.0),
        }
    }
    Ok(out)
}

fn signal_stack(
    maps: &TissueMaps,
    protocol: &AcquisitionProtocol,
    phase: Option<&Tensor>,
) -> Result<Tensor> {
    let n = protocol.n_frames();
    let (h, w) = (maps.h, maps.w);
    let mut out = Tensor::zeros(&[n, h, w], Dtype::Complex);
    for t in 0..n {
        let frame = signal_frame(maps, protocol, t, phase)?;
        out.data_mut()[2 * t * h * w..2 * (t + 1) * h * w].copy_from_slice(frame.data());
    }
    Ok(out)
}

/// One frame per flip angle, complex [n_angles, h, w].
pub fn spgr_signal(
    maps: &TissueMaps,
    protocol: &AcquisitionProtocol,
    phase: Option<&Tensor>,
) -> Result<Tensor> {
    match protocol {
        AcquisitionProtocol::VfaSpgr { .. } => signal_stack(maps, protocol, phase),
        _ => Err(PhantomError::ProtocolMismatch(
            "spgr_signal needs a vFA-SPGR protocol".into(),
        )),
    }
}

/// One frame per echo, complex [n_echoes, h, w].
pub fn mese_signal(
    maps: &TissueMaps,
    protocol: &AcquisitionProtocol,
    phase: Option<&Tensor>,
) -> Result<Tensor> {
    match protocol {
        AcquisitionProtocol::Mese { .. } => signal_stack(maps, protocol, phase),
        _ => Err(PhantomError::ProtocolMismatch(
            "mese_signal needs a MESE protocol".into(),
        )),
    }
}

/// Render the full multicontrast stack for either protocol kind, with the
/// phantom's seed-derived phase map.
pub fn render_stack(
    maps: &TissueMaps,
    protocol: &AcquisitionProtocol,
    phase_seed: u64,
) -> Result<Tensor> {
    let phase = synth_phase((maps.h, maps.w), phase_seed);
    signal_stack(maps, protocol, Some(&phase))
}
