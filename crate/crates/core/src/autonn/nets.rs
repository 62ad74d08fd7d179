//! Toy mask generator and metric discriminator.

use super::tape::{Tape, Var};
use super::tensor::{ParamSet, Tensor};
use super::NnError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub gen_channels: usize,
    pub disc_channels: usize,
    pub kernel: usize,
    /// Frequency pooling factor applied to the discriminator input.
    pub disc_pool: usize,
    pub disc_hidden: usize,
    /// Initial bias of the mask head; sigmoid(2) ≈ 0.88 starts near identity.
    pub mask_bias_init: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            gen_channels: 6,
            disc_channels: 8,
            kernel: 5,
            disc_pool: 8,
            disc_hidden: 16,
            mask_bias_init: 2.0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(format!("kernel must be odd, got {}", self.kernel));
        }
        if self.gen_channels == 0 || self.disc_channels == 0 || self.disc_hidden == 0 {
            return Err("channel counts must be positive".into());
        }
        if self.disc_pool == 0 {
            return Err("disc_pool must be positive".into());
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

fn conv_params(
    rng: &mut ChaCha8Rng,
    name: &str,
    out_ch: usize,
    in_ch: usize,
    k: usize,
) -> Vec<(String, Tensor)> {
    let fan_in = in_ch * k * k;
    vec![
        (
            format!("{name}.weight"),
            Tensor::new(uniform(rng, out_ch * fan_in, fan_in), &[out_ch, in_ch, k, k], true)
                .expect("shape"),
        ),
        (
            format!("{name}.bias"),
            Tensor::new(vec![0.01; out_ch], &[out_ch], true).expect("shape"),
        ),
    ]
}

/// Per-pixel inputs for the generator: compressed noisy magnitude and its
/// per-frequency time average, stacked as `[2, T, F]`.
pub fn generator_features(compressed_mag: &[f64], frames: usize, bins: usize) -> Vec<f64> {
    let mut mean = vec![0.0; bins];
    for row in compressed_mag.chunks(bins) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= frames as f64);
    let mut out = Vec::with_capacity(2 * frames * bins);
    out.extend_from_slice(compressed_mag);
    for _ in 0..frames {
        out.extend_from_slice(&mean);
    }
    out
}

/// Conv stack + 1×1 sigmoid head producing a mask in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    pub params: ParamSet,
    pub config: NetConfig,
}

impl GeneratorNet {
    pub const INPUT_CHANNELS: usize = 2;

    pub fn new(config: NetConfig, rng: &mut ChaCha8Rng) -> Self {
        let (c, k) = (config.gen_channels, config.kernel);
        let mut entries = conv_params(rng, "gen.conv1", c, Self::INPUT_CHANNELS, k);
        entries.extend(conv_params(rng, "gen.conv2", c, c, k));
        entries.extend(conv_params(rng, "gen.conv3", c, c, k));
        let mut head = conv_params(rng, "gen.head", 1, c, 1);
        head[1].1.data[0] = config.mask_bias_init;
        entries.extend(head);
        Self {
            params: ParamSet::new(entries).expect("unique names"),
            config,
        }
    }

    pub fn from_params(params: ParamSet, config: NetConfig) -> Self {
        Self { params, config }
    }

    /// `features` is `[2, T, F]`; returns the mask `[T, F]`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], features: Var) -> Result<Var, NnError> {
        let shape = tape.shape(features).to_vec();
        if shape.len() != 3 || shape[0] != Self::INPUT_CHANNELS {
            return Err(NnError::ShapeMismatch(format!("generator input {shape:?}")));
        }
        let mut h = features;
        for layer in 0..3 {
            h = tape.conv2d(h, vars[2 * layer], vars[2 * layer + 1])?;
            h = tape.relu(h)?;
        }
        let logits = tape.conv2d(h, vars[6], vars[7])?;
        let mask = tape.sigmoid(logits)?;
        tape.reshape(mask, &shape[1..])
    }
}

/// Conv stack over a stacked (candidate, reference) pair, global mean
/// pooling and a two-layer dense head with a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet {
    pub params: ParamSet,
    pub config: NetConfig,
}

impl DiscriminatorNet {
    pub fn new(config: NetConfig, rng: &mut ChaCha8Rng) -> Self {
        let (c, k, h) = (config.disc_channels, config.kernel, config.disc_hidden);
        let mut entries = conv_params(rng, "disc.conv1", c, 2, k);
        entries.extend(conv_params(rng, "disc.conv2", c, c, k));
        entries.extend(conv_params(rng, "disc.conv3", c, c, k));
        entries.push((
            "disc.fc1.weight".into(),
            Tensor::new(uniform(rng, c * h, c), &[c, h], true).expect("shape"),
        ));
        entries.push(("disc.fc1.bias".into(), Tensor::new(vec![0.01; h], &[1, h], true).expect("shape")));
        entries.push((
            "disc.fc2.weight".into(),
            Tensor::new(uniform(rng, h, h).iter().map(|v| v * 0.1).collect(), &[h, 1], true)
                .expect("shape"),
        ));
        entries.push(("disc.fc2.bias".into(), Tensor::new(vec![0.5], &[1, 1], true).expect("shape")));
        Self {
            params: ParamSet::new(entries).expect("unique names"),
            config,
        }
    }

    pub fn from_params(params: ParamSet, config: NetConfig) -> Self {
        Self { params, config }
    }

    /// Both inputs are `[T, F]` compressed magnitudes; returns shape `[1]`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], candidate: Var, reference: Var) -> Result<Var, NnError> {
        let shape = tape.shape(candidate).to_vec();
        if shape.len() != 2 || tape.shape(reference) != shape.as_slice() {
            return Err(NnError::ShapeMismatch(format!(
                "discriminator inputs {shape:?} / {:?}",
                tape.shape(reference)
            )));
        }
        let plane = [1, shape[0], shape[1]];
        let a = tape.reshape(candidate, &plane)?;
        let b = tape.reshape(reference, &plane)?;
        let mut h = tape.concat(&[a, b])?;
        if self.config.disc_pool > 1 {
            h = tape.avg_pool_last(h, self.config.disc_pool)?;
        }
        for layer in 0..3 {
            h = tape.conv2d(h, vars[2 * layer], vars[2 * layer + 1])?;
            h = tape.relu(h)?;
        }
        let pooled = tape.mean_spatial(h)?;
        let c = tape.shape(pooled)[0];
        let row = tape.reshape(pooled, &[1, c])?;
        let hidden = tape.matmul(row, vars[6])?;
        let hidden = tape.add(hidden, vars[7])?;
        let hidden = tape.relu(hidden)?;
        let out = tape.matmul(hidden, vars[8])?;
        let out = tape.add(out, vars[9])?;
        tape.reshape(out, &[1])
    }
}
