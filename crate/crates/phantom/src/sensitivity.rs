//! Simulated coil sensitivity maps.

use mdr_autodiff::{rng_from, Dtype, Tensor};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoilModel {
    /// All-ones single-coil style maps.
    Uniform,
    /// Smooth complex Gaussian bumps centered on ring positions outside the
    /// field of view.
    GaussianBumps,
}

/// Complex [n_coils, h, w] maps, deterministic per seed. Bump widths and
/// ring positions keep the root-sum-of-squares well above zero across the
/// phantom support.
pub fn simulate_sensitivities(
    n_coils: usize,
    grid: (usize, usize),
    seed: u64,
    model: CoilModel,
) -> Tensor {
    assert!(n_coils >= 1, "need at least one coil");
    let (h, w) = grid;
    let mut maps = Tensor::zeros(&[n_coils, h, w], Dtype::Complex);
    match model {
        CoilModel::Uniform => {
            for i in 0..n_coils * h * w {
                maps.c_set(i, 1.0, 0.0);
            }
        }
        CoilModel::GaussianBumps => {
            let mut rng = rng_from(seed);
            for c in 0..n_coils {
                let theta = 2.0 * std::f64::consts::PI * c as f64 / n_coils as f64
                    + rng.gen_range(-0.15..0.15);
                let radius = 1.3 + rng.gen_range(-0.05..0.05);
                let (cx, cy) = (radius * theta.cos(), radius * theta.sin());
                let width = 1.1 + rng.gen_range(-0.1..0.1);
                let gain = 1.0 + rng.gen_range(-0.1..0.1);
                let (p1, p2) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                let p0 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                for y in 0..h {
                    for x in 0..w {
                        let u = -1.0 + 2.0 * (x as f64 + 0.5) / w as f64;
                        let v = -1.0 + 2.0 * (y as f64 + 0.5) / h as f64;
                        let d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
                        let mag = gain * (-d2 / (2.0 * width * width)).exp();
                        let phase = p0 + p1 * u + p2 * v;
                        let (s, co) = phase.sin_cos();
                        maps.c_set((c * h + y) * w + x, mag * co, mag * s);
                    }
                }
            }
        }
    }
    maps
}

/// Root-sum-of-squares magnitude across coils, real [h, w].
pub fn rss(maps: &Tensor) -> Tensor {
    let (nc, h, w) = (maps.shape()[0], maps.shape()[1], maps.shape()[2]);
    let mut out = Tensor::zeros(&[h, w], Dtype::Real);
    for i in 0..h * w {
        let mut acc = 0.0;
        for c in 0..nc {
            let (re, im) = maps.c_get(c * h * w + i);
            acc += re * re + im * im;
        }
        out.data_mut()[i] = acc.sqrt();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_model_gives_ones() {
        let maps = simulate_sensitivities(1, (8, 8), 0, CoilModel::Uniform);
        for i in 0..64 {
            assert_eq!(maps.c_get(i), (1.0, 0.0));
        }
    }

    #[test]
    fn rss_covers_central_disc() {
        for &n_coils in &[1usize, 4, 8] {
            let maps = simulate_sensitivities(n_coils, (64, 64), 3, CoilModel::GaussianBumps);
            let r = rss(&maps);
            for y in 0..64 {
                for x in 0..64 {
                    let u = -1.0 + 2.0 * (x as f64 + 0.5) / 64.0;
                    let v = -1.0 + 2.0 * (y as f64 + 0.5) / 64.0;
                    if u * u + v * v <= 0.8 * 0.8 {
                        assert!(
                            r.data()[y * 64 + x] >= 0.1,
                            "rss too small at ({u},{v}) with {n_coils} coils"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn seeded_maps_are_deterministic() {
        let a = simulate_sensitivities(4, (16, 16), 9, CoilModel::GaussianBumps);
        let b = simulate_sensitivities(4, (16, 16), 9, CoilModel::GaussianBumps);
        assert_eq!(a, b);
    }
}
