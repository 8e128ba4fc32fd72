//! Temporal subspace estimation from low-resolution training data.
//!
//! The Casorati matrix (rows: voxel-coil pairs, columns: frames) of the
//! central-line time series is factored through the Hermitian eigenproblem
//! of its Gram matrix; the leading right singular vectors form the basis.

use nalgebra::{Complex, DMatrix};

use mdr_autodiff::{fft2_unitary, Dtype, FftDirection, Tensor};

use crate::operators::fftshift2;
use crate::{MriError, Result};

type C64 = Complex<f64>;

/// Orthonormal temporal basis V (r x nt): rows are right singular vectors,
/// so V V^H = I_r and per-voxel series project as x -> x V^H V.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    /// Complex [r, nt].
    pub v_hat: Tensor,
    /// Squared singular values of the Casorati matrix, descending.
    pub spectrum: Vec<f64>,
    /// True when the requested rank exceeded the numerical rank.
    pub rank_deficient: bool,
}

impl SubspaceBasis {
    pub fn rank(&self) -> usize {
        self.v_hat.shape()[0]
    }

    pub fn n_frames(&self) -> usize {
        self.v_hat.shape()[1]
    }

    #[inline]
    pub fn at(&self, k: usize, t: usize) -> (f64, f64) {
        self.v_hat.c_get(k * self.n_frames() + t)
    }

    /// The trivial identity basis (r = nt), which makes the subspace
    /// pipeline coincide with the unconstrained one.
    pub fn identity(nt: usize) -> Self {
        let mut v = Tensor::zeros(&[nt, nt], Dtype::Complex);
        for t in 0..nt {
            v.c_set(t * nt + t, 1.0, 0.0);
        }
        SubspaceBasis {
            v_hat: v,
            spectrum: vec![1.0; nt],
            rank_deficient: false,
        }
    }
}

fn central_lowres(k: &Tensor, t: usize, c: usize, n_lines: usize) -> Result<Tensor> {
    let (nc, h, w) = (k.shape()[1], k.shape()[2], k.shape()[3]);
    let start = (w - n_lines) / 2;
    let mut frame = Tensor::zeros(&[h, w], Dtype::Complex);
    {
        let fd = frame.data_mut();
        let kd = k.data();
        for y in 0..h {
            for j in 0..n_lines {
                let ky = start + j;
                let win = if n_lines == w {
                    1.0
                } else {
                    let ph = std::f64::consts::PI * (j as f64 + 0.5) / n_lines as f64;
                    ph.sin() * ph.sin()
                };
                let src = ((((t * nc) + c) * h + y) * w + ky) * 2;
                let dst = (y * w + ky) * 2;
                fd[dst] = kd[src] * win;
                fd[dst + 1] = kd[src + 1] * win;
            }
        }
    }
    Ok(fft2_unitary(&fftshift2(&frame), FftDirection::Inverse)?)
}

/// Estimate the leading `r` right singular vectors of the Casorati matrix of
/// low-resolution frame images built from `n_lines` central ky columns of
/// k-space (complex [nt, nc, h, w]).
pub fn estimate_subspace(kspace: &Tensor, n_lines: usize, r: usize) -> Result<SubspaceBasis> {
    if kspace.shape().len() != 4 || kspace.dtype() != Dtype::Complex {
        return Err(MriError::ShapeMismatch(format!(
            "subspace estimation expects complex [nt,nc,h,w], got {:?}",
            kspace.shape()
        )));
    }
    let (nt, nc, h, w) = (
        kspace.shape()[0],
        kspace.shape()[1],
        kspace.shape()[2],
        kspace.shape()[3],
    );
    if r == 0 || r > nt {
        return Err(MriError::SubspaceRank { r, nt });
    }
    if n_lines > w {
        return Err(MriError::Calibration(format!(
            "{n_lines} central lines exceed ny = {w}"
        )));
    }
    // Gram matrix of the (voxel-coil) x frames Casorati matrix
    let mut series: Vec<Tensor> = Vec::with_capacity(nt * nc);
    for t in 0..nt {
        for c in 0..nc {
            series.push(central_lowres(kspace, t, c, n_lines)?);
        }
    }
    let mut gram = DMatrix::<C64>::zeros(nt, nt);
    for ti in 0..nt {
        for tj in ti..nt {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..nc {
                let a = &series[ti * nc + c];
                let b = &series[tj * nc + c];
                for i in 0..h * w {
                    let (ar, ai) = a.c_get(i);
                    let (br, bi) = b.c_get(i);
                    // conj(a) * b
                    acc += C64::new(ar * br + ai * bi, ar * bi - ai * br);
                }
            }
            gram[(ti, tj)] = acc;
            gram[(tj, ti)] = acc.conj();
        }
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let numerical_rank = spectrum
        .iter()
        .filter(|&&v| v > 1e-12 * spectrum[0].max(f64::MIN_POSITIVE))
        .count();

    let mut v_hat = Tensor::zeros(&[r, nt], Dtype::Complex);
    for (k, &col) in order.iter().take(r).enumerate() {
        for t in 0..nt {
            let v = eig.eigenvectors[(t, col)];
            // row k of V is the conjugate transpose of eigenvector k
            v_hat.c_set(k * nt + t, v.re, -v.im);
        }
    }
    Ok(SubspaceBasis {
        v_hat,
        spectrum,
        rank_deficient: r > numerical_rank,
    })
}

/// Spatial coefficients U = X V^H: complex [r, h, w] from [nt, h, w].
pub fn compress_temporal(x: &Tensor, basis: &SubspaceBasis) -> Tensor {
    let (nt, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    debug_assert_eq!(nt, basis.n_frames());
    let r = basis.rank();
    let mut u = Tensor::zeros(&[r, h, w], Dtype::Complex);
    for k in 0..r {
        for t in 0..nt {
            let (vr, vi) = basis.at(k, t);
            // u_k += x_t * conj(v[k,t])
            for i in 0..h * w {
                let (xr, xi) = x.c_get(t * h * w + i);
                let idx = k * h * w + i;
                let (ur, ui) = u.c_get(idx);
                u.c_set(idx, ur + xr * vr + xi * vi, ui + xi * vr - xr * vi);
            }
        }
    }
    u
}

/// Expand spatial coefficients back to frames: X = U V, complex [nt, h, w].
pub fn expand_temporal(u: &Tensor, basis: &SubspaceBasis) -> Tensor {
    let (r, h, w) = (u.shape()[0], u.shape()[1], u.shape()[2]);
    debug_assert_eq!(r, basis.rank());
    let nt = basis.n_frames();
    let mut x = Tensor::zeros(&[nt, h, w], Dtype::Complex);
    for t in 0..nt {
        for k in 0..r {
            let (vr, vi) = basis.at(k, t);
            for i in 0..h * w {
                let (ur, ui) = u.c_get(k * h * w + i);
                let idx = t * h * w + i;
                let (xr, xi) = x.c_get(idx);
                x.c_set(idx, xr + ur * vr - ui * vi, xi + ur * vi + ui * vr);
            }
        }
    }
    x
}

/// Orthogonal projection of each voxel's time series onto span(V):
/// X -> X V^H V.
pub fn project_subspace(x: &Tensor, basis: &SubspaceBasis) -> Result<Tensor> {
    if x.shape().len() != 3 || x.shape()[0] != basis.n_frames() {
        return Err(MriError::ShapeMismatch(format!(
            "projection expects [nt={},h,w], got {:?}",
            basis.n_frames(),
            x.shape()
        )));
    }
    Ok(expand_temporal(&compress_temporal(x, basis), basis))
}
