//! Decoder-only GLU transformer: configuration, weights and the
//! instrumented forward pass.
//!
//! Layout: token embedding, then `n_layers` blocks of
//! `[pre-norm causal attention -> pre-norm GLU MLP]` with residual adds,
//! a final RMS norm, and the output embedding.

mod forward;
mod io;
mod vocab;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{ProbeId, ProbeKind};

pub use forward::{
    log_softmax, mlp_forward, rms_norm, trace_sequence, trace_values, Activations, ForwardTrace,
    MlpOutput, MlpWeights,
};
pub use io::{load_model, save_model};
pub use vocab::{project_to_vocab, value_vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// SwiGLU gate.
    Silu,
    /// GeGLU gate (tanh approximation).
    Gelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Silu => x / (1.0 + (-x).exp()),
            Activation::Gelu => {
                const SQRT_2_OVER_PI: f32 = 0.797_884_6;
                0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044_715 * x * x * x)).tanh())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub n_heads: usize,
    pub head_dim: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub activation: Activation,
    pub norm_eps: f32,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("n_heads", self.n_heads),
            ("head_dim", self.head_dim),
            ("vocab_size", self.vocab_size),
            ("max_seq_len", self.max_seq_len),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
        }
        if self.d_ff <= self.d_model {
            return Err(Error::InvalidConfig(format!(
                "d_ff ({}) must exceed d_model ({})",
                self.d_ff, self.d_model
            )));
        }
        if self.n_heads * self.head_dim != self.d_model {
            return Err(Error::InvalidConfig(format!(
                "n_heads ({}) x head_dim ({}) != d_model ({})",
                self.n_heads, self.head_dim, self.d_model
            )));
        }
        if !(self.norm_eps.is_finite() && self.norm_eps > 0.0) {
            return Err(Error::InvalidConfig("norm_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn mlp_probe_count(&self) -> usize {
        self.n_layers * self.d_ff
    }

    /// Every MLP key probe, layer-major.
    pub fn all_mlp_probes(&self) -> Vec<ProbeId> {
        (0..self.n_layers)
            .flat_map(|l| (0..self.d_ff).map(move |i| ProbeId::mlp_key(l, i)))
            .collect()
    }

    pub fn all_head_probes(&self) -> Vec<ProbeId> {
        (0..self.n_layers)
            .flat_map(|l| (0..self.n_heads).map(move |h| ProbeId::attn_head(l, h)))
            .collect()
    }

    pub fn check_probe(&self, probe: &ProbeId) -> Result<()> {
        probe.validate_shape()?;
        let bad = |reason: String| Error::InvalidProbe {
            probe: probe.to_string(),
            reason,
        };
        if let (Some(layer), Some(index)) = (probe.layer, probe.index) {
            if layer >= self.n_layers {
                return Err(bad(format!("layer >= n_layers ({})", self.n_layers)));
            }
            let limit = match probe.kind {
                ProbeKind::MlpKey => self.d_ff,
                ProbeKind::AttnHeadNorm => self.n_heads,
                ProbeKind::LogLikelihood => unreachable!(),
            };
            if index >= limit {
                return Err(bad(format!("index >= {limit}")));
            }
        }
        Ok(())
    }

    /// Canonical tensor names with their required shapes.
    pub fn expected_tensors(&self) -> Vec<(String, Vec<usize>)> {
        let (d, f, v) = (self.d_model, self.d_ff, self.vocab_size);
        let mut out = vec![
            ("embed.in".to_string(), vec![v, d]),
            ("embed.out".to_string(), vec![v, d]),
            ("final_norm".to_string(), vec![d]),
        ];
        for l in 0..self.n_layers {
            let p = |s: &str| format!("layers.{l}.{s}");
            out.push((p("attn_norm"), vec![d]));
            out.push((p("attn.w_q"), vec![d, d]));
            out.push((p("attn.w_k"), vec![d, d]));
            out.push((p("attn.w_v"), vec![d, d]));
            out.push((p("attn.w_o"), vec![d, d]));
            out.push((p("mlp_norm"), vec![d]));
            out.push((p("mlp.w_gate"), vec![f, d]));
            out.push((p("mlp.w_up"), vec![f, d]));
            out.push((p("mlp.w_down"), vec![d, f]));
        }
        out
    }
}

/// A dense row-major tensor of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::InvalidInput(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Borrowed weights of one transformer block.
#[derive(Debug, Clone, Copy)]
pub struct LayerWeights<'a> {
    pub attn_norm: &'a [f32],
    pub w_q: &'a [f32],
    pub w_k: &'a [f32],
    pub w_v: &'a [f32],
    pub w_o: &'a [f32],
    pub mlp_norm: &'a [f32],
    pub mlp: MlpWeights<'a>,
}

/// Validated model configuration plus named weights. Immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    config: ModelConfig,
    tensors: BTreeMap<String, Tensor>,
}

impl ModelBundle {
    pub fn new(config: ModelConfig, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let expected = config.expected_tensors();
        for (name, _) in &expected {
            if !tensors.contains_key(name) {
                return Err(Error::MissingTensor(name.clone()));
            }
        }
        for (name, shape) in &expected {
            let t = &tensors[name];
            if &t.shape != shape {
                return Err(Error::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    actual: t.shape.clone(),
                });
            }
        }
        for (name, t) in &tensors {
            if let Some(offset) = t.data.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteTensor {
                    name: name.clone(),
                    offset,
                });
            }
        }
        Ok(ModelBundle { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    // Names are validated at construction, so lookups of canonical names
    // cannot fail afterwards.
    fn data(&self, name: &str) -> &[f32] {
        &self.tensors[name].data
    }

    pub fn embed_in(&self) -> &[f32] {
        self.data("embed.in")
    }

    pub fn embed_out(&self) -> &[f32] {
        self.data("embed.out")
    }

    pub fn final_norm(&self) -> &[f32] {
        self.data("final_norm")
    }

    pub fn layer(&self, l: usize) -> LayerWeights<'_> {
        let get = |s: &str| self.data(&format!("layers.{l}.{s}"));
        LayerWeights {
            attn_norm: get("attn_norm"),
            w_q: get("attn.w_q"),
            w_k: get("attn.w_k"),
            w_v: get("attn.w_v"),
            w_o: get("attn.w_o"),
            mlp_norm: get("mlp_norm"),
            mlp: MlpWeights {
                w_gate: get("mlp.w_gate"),
                w_up: get("mlp.w_up"),
                w_down: get("mlp.w_down"),
                d_model: self.config.d_model,
                d_ff: self.config.d_ff,
                activation: self.config.activation,
            },
        }
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn tiny_config(activation: Activation) -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 16,
            d_ff: 48,
            n_heads: 2,
            head_dim: 8,
            vocab_size: 258,
            max_seq_len: 128,
            activation,
            norm_eps: 1e-5,
        }
    }

    pub fn random_model(config: &ModelConfig, seed: u64) -> ModelBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in config.expected_tensors() {
            let n: usize = shape.iter().product();
            let data = if shape.len() == 1 {
                (0..n).map(|_| rng.random_range(0.5..1.5)).collect()
            } else {
                (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()
            };
            tensors.insert(name, Tensor { shape, data });
        }
        ModelBundle::new(config.clone(), tensors).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn config_invariants() {
        let mut c = tiny_config(Activation::Silu);
        assert!(c.validate().is_ok());
        c.d_ff = 16;
        assert!(c.validate().is_err());
        let mut c = tiny_config(Activation::Silu);
        c.head_dim = 7;
        assert!(c.validate().is_err());
        let mut c = tiny_config(Activation::Silu);
        c.vocab_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn probe_count_matches_layers_times_width() {
        let c = tiny_config(Activation::Gelu);
        assert_eq!(c.all_mlp_probes().len(), 96);
        assert_eq!(c.mlp_probe_count(), 96);
        assert!(c.check_probe(&ProbeId::mlp_key(2, 0)).is_err());
        assert!(c.check_probe(&ProbeId::mlp_key(1, 47)).is_ok());
        assert!(c.check_probe(&ProbeId::attn_head(1, 2)).is_err());
    }

    #[test]
    fn bundle_rejects_missing_and_misshaped() {
        let c = tiny_config(Activation::Silu);
        let m = random_model(&c, 1);
        let mut t = m.tensors().clone();
        t.remove("layers.1.mlp.w_down");
        match ModelBundle::new(c.clone(), t) {
            Err(Error::MissingTensor(n)) => assert_eq!(n, "layers.1.mlp.w_down"),
            other => panic!("{other:?}"),
        }
        let mut t = m.tensors().clone();
        t.insert(
            "layers.0.mlp.w_gate".into(),
            Tensor::zeros(vec![48, 17]),
        );
        match ModelBundle::new(c.clone(), t) {
            Err(Error::ShapeMismatch { name, expected, .. }) => {
                assert_eq!(name, "layers.0.mlp.w_gate");
                assert_eq!(expected, vec![48, 16]);
            }
            other => panic!("{other:?}"),
        }
        let mut t = m.tensors().clone();
        t.get_mut("embed.out").unwrap().data[5] = f32::NAN;
        match ModelBundle::new(c, t) {
            Err(Error::NonFiniteTensor { name, offset }) => {
                assert_eq!(name, "embed.out");
                assert_eq!(offset, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn activations_at_zero() {
        assert_eq!(Activation::Silu.apply(0.0), 0.0);
        assert_eq!(Activation::Gelu.apply(0.0), 0.0);
        assert!((Activation::Silu.apply(2.0) - 2.0 / (1.0 + (-2.0f32).exp())).abs() < 1e-7);
    }
}
