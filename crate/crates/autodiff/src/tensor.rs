//! Dense row-major tensors over f64 storage.
//!
//! Complex tensors hold interleaved (re, im) pairs. Arithmetic is done in
//! f64; the on-disk format (see the cli crate) stores real32/complex64.

use crate::error::{AdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Real,
    Complex,
}

impl Dtype {
    /// Number of f64 slots per logical element.
    pub fn width(self) -> usize {
        match self {
            Dtype::Real => 1,
            Dtype::Complex => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    dtype: Dtype,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize], dtype: Dtype) -> Self {
        let n: usize = shape.iter().product::<usize>() * dtype.width();
        Tensor {
            shape: shape.to_vec(),
            dtype,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], dtype: Dtype, data: Vec<f64>) -> Result<Self> {
        let expect = shape.iter().product::<usize>() * dtype.width();
        if data.len() != expect {
            return Err(AdError::InvalidArg(format!(
                "data length {} does not match shape {:?} ({} slots)",
                data.len(),
                shape,
                expect
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            dtype,
            data,
        })
    }

    pub fn real_from(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        Self::from_vec(shape, Dtype::Real, data)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            dtype: Dtype::Real,
            data: vec![v],
        }
    }

    pub fn full(shape: &[usize], dtype: Dtype, v: f64) -> Self {
        let mut t = Self::zeros(shape, dtype);
        t.data.iter_mut().for_each(|x| *x = v);
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    /// Number of logical elements (complex pairs count once).
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    /// Raw f64 storage (interleaved for complex).
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Re-interpret with a new shape of identical element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.numel() {
            return Err(AdError::InvalidArg(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn same_layout(&self, other: &Tensor) -> bool {
        self.shape == other.shape && self.dtype == other.dtype
    }

    // ---- complex element access ----------------------------------------

    pub fn c_get(&self, idx: usize) -> (f64, f64) {
        debug_assert_eq!(self.dtype, Dtype::Complex);
        (self.data[2 * idx], self.data[2 * idx + 1])
    }

    pub fn c_set(&mut self, idx: usize, re: f64, im: f64) {
        debug_assert_eq!(self.dtype, Dtype::Complex);
        self.data[2 * idx] = re;
        self.data[2 * idx + 1] = im;
    }

    // ---- arithmetic ------------------------------------------------------

    pub fn scale_in_place(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Tensor {
        let mut t = self.clone();
        t.scale_in_place(a);
        t
    }

    pub fn add_in_place(&mut self, other: &Tensor) {
        assert!(self.same_layout(other), "tensor layout mismatch in add");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    /// self += a * other
    pub fn axpy_in_place(&mut self, a: f64, other: &Tensor) {
        assert!(self.same_layout(other), "tensor layout mismatch in axpy");
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += a * *y;
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        let mut t = self.clone();
        t.add_in_place(other);
        t
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        let mut t = self.clone();
        t.axpy_in_place(-1.0, other);
        t
    }

    /// Real inner product of the raw storage vectors. For complex tensors
    /// this is Re<a, b> over the C^N inner product, i.e. the R^{2N} dot.
    pub fn dot_real(&self, other: &Tensor) -> f64 {
        assert!(self.same_layout(other), "tensor layout mismatch in dot");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Squared Frobenius norm (sum of squared f64 slots; for complex this is
    /// sum of |z|^2).
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Elementwise complex multiply: self * other (both complex, same shape).
    pub fn c_mul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.dtype, Dtype::Complex);
        assert!(self.same_layout(other));
        let mut out = Tensor::zeros(&self.shape, Dtype::Complex);
        for i in 0..self.numel() {
            let (ar, ai) = self.c_get(i);
            let (br, bi) = other.c_get(i);
            out.c_set(i, ar * br - ai * bi, ar * bi + ai * br);
        }
        out
    }

    /// Elementwise multiply by the conjugate of `other`.
    pub fn c_mul_conj(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.dtype, Dtype::Complex);
        assert!(self.same_layout(other));
        let mut out = Tensor::zeros(&self.shape, Dtype::Complex);
        for i in 0..self.numel() {
            let (ar, ai) = self.c_get(i);
            let (br, bi) = other.c_get(i);
            out.c_set(i, ar * br + ai * bi, ai * br - ar * bi);
        }
        out
    }

    /// Complex magnitude map as a real tensor of the same shape.
    pub fn c_abs(&self) -> Tensor {
        assert_eq!(self.dtype, Dtype::Complex);
        let mut out = Tensor::zeros(&self.shape, Dtype::Real);
        for i in 0..self.numel() {
            let (re, im) = self.c_get(i);
            out.data[i] = re.hypot(im);
        }
        out
    }

    /// Promote a real tensor to complex with zero imaginary part.
    pub fn to_complex(&self) -> Tensor {
        assert_eq!(self.dtype, Dtype::Real);
        let mut out = Tensor::zeros(&self.shape, Dtype::Complex);
        for i in 0..self.numel() {
            out.data[2 * i] = self.data[i];
        }
        out
    }
}

/// Row-major offset of `[c, y, x]` inside a `[ch, h, w]` tensor.
#[inline]
pub fn idx3(w: usize, h: usize, c: usize, y: usize, x: usize) -> usize {
    (c * h + y) * w + x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_and_shape() {
        let t = Tensor::zeros(&[2, 3], Dtype::Complex);
        assert_eq!(t.numel(), 6);
        assert_eq!(t.data().len(), 12);
    }

    #[test]
    fn from_vec_len_mismatch_rejected() {
        assert!(Tensor::from_vec(&[2, 2], Dtype::Real, vec![0.0; 3]).is_err());
    }

    #[test]
    fn complex_mul_matches_hand_case() {
        // (1+2i)(3+4i) = -5 + 10i
        let a = Tensor::from_vec(&[1], Dtype::Complex, vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[1], Dtype::Complex, vec![3.0, 4.0]).unwrap();
        let c = a.c_mul(&b);
        assert_eq!(c.c_get(0), (-5.0, 10.0));
        // (1+2i) * conj(3+4i) = (1+2i)(3-4i) = 11 + 2i
        let d = a.c_mul_conj(&b);
        assert_eq!(d.c_get(0), (11.0, 2.0));
    }

    #[test]
    fn dot_real_is_r2n_dot() {
        let a = Tensor::from_vec(&[2], Dtype::Complex, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2], Dtype::Complex, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(a.dot_real(&b), 5.0 + 12.0 + 21.0 + 32.0);
    }
}
