//! Model layout and parameter initialization.

use serde::{Deserialize, Serialize};

use mdr_autodiff::{normal_tensor, rng_from, Dtype, ParamStore, Tensor};

/// Fixed desk-scale architecture descriptor. `image_hw` must be twice
/// `latent_hw`; contrast levels run coarse to fine with FiLM widths
/// `2 * dec_channels[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepArchitecture {
    pub image_hw: usize,
    pub latent_hw: usize,
    pub latent_ch: usize,
    pub dec_channels: [usize; 3],
    pub enc_g_ch: usize,
    pub enc_c_ch: [usize; 3],
}

impl Default for RepArchitecture {
    fn default() -> Self {
        RepArchitecture {
            image_hw: 32,
            latent_hw: 16,
            latent_ch: 4,
            dec_channels: [32, 16, 8],
            enc_g_ch: 16,
            enc_c_ch: [12, 16, 24],
        }
    }
}

impl RepArchitecture {
    /// FiLM vector widths per decoder level, coarse to fine.
    pub fn contrast_widths(&self) -> [usize; 3] {
        [
            2 * self.dec_channels[0],
            2 * self.dec_channels[1],
            2 * self.dec_channels[2],
        ]
    }

    pub fn latent_shape(&self) -> [usize; 3] {
        [self.latent_ch, self.latent_hw, self.latent_hw]
    }
}

/// Per-frame multi-level contrast code; level vectors split into
/// (gamma, beta) halves.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastLatent {
    pub levels: Vec<Tensor>,
}

impl ContrastLatent {
    pub fn zeros(arch: &RepArchitecture) -> Self {
        ContrastLatent {
            levels: arch
                .contrast_widths()
                .iter()
                .map(|&w| Tensor::zeros(&[w], Dtype::Real))
                .collect(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.levels.iter().map(|l| l.norm_sq()).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        ContrastLatent {
            levels: self.levels.iter().map(|l| l.scaled(a)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        ContrastLatent {
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }
}

/// Trained representation: one parameter store holding E_g (`eg.*`),
/// E_c (`ec.*`) and the decoder (`dec.*`), plus the per-channel geometry
/// latent standardization fixed after training.
#[derive(Debug, Clone)]
pub struct RepModel {
    pub arch: RepArchitecture,
    pub params: ParamStore,
    /// Per-channel mean subtracted from raw encoder outputs.
    pub latent_mean: Tensor,
    /// Per-channel scale dividing raw encoder outputs.
    pub latent_std: Tensor,
    pub seed: u64,
}

fn conv_param(
    store: &mut ParamStore,
    name: &str,
    out_ch: usize,
    in_ch: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    let std = (2.0 / (in_ch * 9) as f64).sqrt();
    let w = normal_tensor(&[out_ch, in_ch, 3, 3], Dtype::Real, rng).scaled(std);
    store.insert(&format!("{name}.w"), w);
    store.insert(&format!("{name}.b"), Tensor::zeros(&[out_ch], Dtype::Real));
}

fn affine_param(
    store: &mut ParamStore,
    name: &str,
    out_dim: usize,
    in_dim: usize,
    gamma_bias_half: bool,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    let std = (2.0 / in_dim as f64).sqrt();
    let w = normal_tensor(&[out_dim, in_dim], Dtype::Real, rng).scaled(std);
    store.insert(&format!("{name}.w"), w);
    let mut b = Tensor::zeros(&[out_dim], Dtype::Real);
    if gamma_bias_half {
        // first half of the output is a FiLM gamma: start at unit gain
        for i in 0..out_dim / 2 {
            b.data_mut()[i] = 1.0;
        }
    }
    store.insert(&format!("{name}.b"), b);
}

impl RepModel {
    pub fn init(arch: &RepArchitecture, seed: u64) -> Self {
        assert_eq!(arch.image_hw, 2 * arch.latent_hw, "one downsample stage");
        let mut rng = rng_from(seed);
        let mut params = ParamStore::new();
        // geometry encoder
        conv_param(&mut params, "eg.conv1", arch.enc_g_ch, 2, &mut rng);
        conv_param(&mut params, "eg.conv2", arch.enc_g_ch, arch.enc_g_ch, &mut rng);
        conv_param(&mut params, "eg.conv3", arch.latent_ch, arch.enc_g_ch, &mut rng);
        // contrast encoder: stages fine -> coarse feeding levels 3 -> 1
        conv_param(&mut params, "ec.conv1", arch.enc_c_ch[0], 2, &mut rng);
        conv_param(&mut params, "ec.conv2", arch.enc_c_ch[1], arch.enc_c_ch[0], &mut rng);
        conv_param(&mut params, "ec.conv3", arch.enc_c_ch[2], arch.enc_c_ch[1], &mut rng);
        let widths = arch.contrast_widths();
        affine_param(&mut params, "ec.fc1", widths[2], arch.enc_c_ch[0], true, &mut rng);
        affine_param(&mut params, "ec.fc2", widths[1], arch.enc_c_ch[1], true, &mut rng);
        affine_param(&mut params, "ec.fc3", widths[0], arch.enc_c_ch[2], true, &mut rng);
        // decoder
        conv_param(&mut params, "dec.conv1", arch.dec_channels[0], arch.latent_ch, &mut rng);
        conv_param(
            &mut params,
            "dec.conv2",
            arch.dec_channels[1],
            arch.dec_channels[0],
            &mut rng,
        );
        conv_param(
            &mut params,
            "dec.conv3",
            arch.dec_channels[2],
            arch.dec_channels[1],
            &mut rng,
        );
        conv_param(&mut params, "dec.head", 2, arch.dec_channels[2], &mut rng);

        RepModel {
            arch: arch.clone(),
            params,
            latent_mean: Tensor::zeros(&[arch.latent_ch], Dtype::Real),
            latent_std: Tensor::full(&[arch.latent_ch], Dtype::Real, 1.0),
            seed,
        }
    }

    /// Flat serialization entries: parameters plus the standardization.
    pub fn entries(&self) -> Vec<(String, Tensor)> {
        let mut e = self.params.entries();
        e.push(("latent.mean".into(), self.latent_mean.clone()));
        e.push(("latent.std".into(), self.latent_std.clone()));
        e
    }

    pub fn from_entries(
        arch: RepArchitecture,
        seed: u64,
        entries: Vec<(String, Tensor)>,
    ) -> Self {
        let mut params = ParamStore::new();
        let mut latent_mean = Tensor::zeros(&[arch.latent_ch], Dtype::Real);
        let mut latent_std = Tensor::full(&[arch.latent_ch], Dtype::Real, 1.0);
        for (name, t) in entries {
            match name.as_str() {
                "latent.mean" => latent_mean = t,
                "latent.std" => latent_std = t,
                _ => params.insert(&name, t),
            }
        }
        RepModel {
            arch,
            params,
            latent_mean,
            latent_std,
            seed,
        }
    }
}
