//! Unitary 2-D FFT over the trailing two dimensions of a complex tensor.
//!
//! Both directions carry the 1/sqrt(Nx*Ny) normalization, so `inv(fwd(x))`
//! recovers `x` and Parseval holds exactly. Sizes are restricted to powers
//! of two.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{AdError, Result};
use crate::tensor::{Dtype, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FftDirection {
    Forward,
    Inverse,
}

thread_local! {
    static PLAN_CACHE: RefCell<HashMap<(usize, FftDirection), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLAN_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, dir))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                match dir {
                    FftDirection::Forward => planner.plan_fft_forward(n),
                    FftDirection::Inverse => planner.plan_fft_inverse(n),
                }
            })
            .clone()
    })
}

/// Unitary 2-D FFT applied independently to each [h, w] slice of a complex
/// tensor with shape [..., h, w].
pub fn fft2_unitary(x: &Tensor, dir: FftDirection) -> Result<Tensor> {
    if x.dtype() != Dtype::Complex {
        return Err(AdError::InvalidArg("fft2 expects a complex tensor".into()));
    }
    let nd = x.shape().len();
    if nd < 2 {
        return Err(AdError::InvalidArg(
            "fft2 expects at least two dimensions".into(),
        ));
    }
    let h = x.shape()[nd - 2];
    let w = x.shape()[nd - 1];
    if !h.is_power_of_two() {
        return Err(AdError::FftNonPowerOfTwo(h));
    }
    if !w.is_power_of_two() {
        return Err(AdError::FftNonPowerOfTwo(w));
    }
    let n_slices: usize = x.shape()[..nd - 2].iter().product();
    let row_plan = plan(w, dir);
    let col_plan = plan(h, dir);
    let scale = 1.0 / ((h * w) as f64).sqrt();

    let mut out = x.clone();
    let mut plane: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); h * w];
    let mut col: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); h];
    for s in 0..n_slices {
        let base = s * h * w;
        {
            let od = out.data();
            for i in 0..h * w {
                plane[i] = Complex64::new(od[2 * (base + i)], od[2 * (base + i) + 1]);
            }
        }
        for row in plane.chunks_exact_mut(w) {
            row_plan.process(row);
        }
        for xcol in 0..w {
            for y in 0..h {
                col[y] = plane[y * w + xcol];
            }
            col_plan.process(&mut col);
            for y in 0..h {
                plane[y * w + xcol] = col[y];
            }
        }
        let od = out.data_mut();
        for i in 0..h * w {
            od[2 * (base + i)] = plane[i].re * scale;
            od[2 * (base + i) + 1] = plane[i].im * scale;
        }
    }
    Ok(out)
}
