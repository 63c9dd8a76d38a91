use std::collections::BTreeMap;
use std::ops::Range;

use super::{Activation, LayerWeights, ModelBundle};
use crate::error::{Error, Result};
use crate::probe::{ProbeId, ProbeKind};

/// Borrowed MLP weights of one layer, row-major.
#[derive(Debug, Clone, Copy)]
pub struct MlpWeights<'a> {
    /// `d_ff x d_model`
    pub w_gate: &'a [f32],
    /// `d_ff x d_model`
    pub w_up: &'a [f32],
    /// `d_model x d_ff`; column `i` is value vector `v_i`.
    pub w_down: &'a [f32],
    pub d_model: usize,
    pub d_ff: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpOutput {
    pub m: Vec<f32>,
    pub keys: Vec<f32>,
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[r] = sum_c w[r, c] * x[c]` for a `rows x x.len()` matrix.
fn matvec(w: &[f32], x: &[f32], rows: usize) -> Vec<f32> {
    let cols = x.len();
    (0..rows).map(|r| dot(&w[r * cols..(r + 1) * cols], x)).collect()
}

/// GLU MLP: `m = W_down(f(W_gate h) * (W_up h))`, also returning the key
/// activations `k_i = f(w_gate_i . h)(w_up_i . h)`.
pub fn mlp_forward(h: &[f32], w: &MlpWeights<'_>, layer: usize) -> Result<MlpOutput> {
    if h.len() != w.d_model {
        return Err(Error::InvalidInput(format!(
            "mlp input has length {}, expected {}",
            h.len(),
            w.d_model
        )));
    }
    let d = w.d_model;
    let keys: Vec<f32> = (0..w.d_ff)
        .map(|i| {
            let gate = dot(&w.w_gate[i * d..(i + 1) * d], h);
            let up = dot(&w.w_up[i * d..(i + 1) * d], h);
            w.activation.apply(gate) * up
        })
        .collect();
    if keys.iter().any(|k| !k.is_finite()) {
        return Err(Error::NumericOverflow {
            layer,
            stage: "mlp keys",
        });
    }
    let m = matvec(w.w_down, &keys, d);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericOverflow {
            layer,
            stage: "mlp output",
        });
    }
    Ok(MlpOutput { m, keys })
}

/// RMS normalisation with a 64-bit mean-square accumulation.
pub fn rms_norm(x: &[f32], scale: &[f32], eps: f32) -> Vec<f32> {
    let ms = x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() / x.len() as f64;
    let inv = (1.0 / (ms + f64::from(eps)).sqrt()) as f32;
    x.iter().zip(scale).map(|(v, s)| v * inv * s).collect()
}

/// Numerically stable log-softmax evaluated at `target`.
pub fn log_softmax(logits: &[f32], target: usize) -> f64 {
    let max = logits
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(f64::from(b)));
    let lse = logits
        .iter()
        .map(|&l| (f64::from(l) - max).exp())
        .sum::<f64>()
        .ln();
    f64::from(logits[target]) - max - lse
}

/// Per-position internals captured during one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// `[layer][position]` normalised MLP input `h`.
    pub mlp_inputs: Vec<Vec<Vec<f32>>>,
    /// `[layer][position][neuron]`
    pub keys: Vec<Vec<Vec<f32>>>,
    /// `[layer][position][head]`
    pub head_norms: Vec<Vec<Vec<f64>>>,
    /// `[position]` final hidden state after the final norm.
    pub final_hidden: Vec<Vec<f32>>,
}

impl Activations {
    pub fn seq_len(&self) -> usize {
        self.final_hidden.len()
    }
}

impl ModelBundle {
    /// Runs the causal forward pass over `tokens`, keeping every position.
    pub fn run(&self, tokens: &[u32]) -> Result<Activations> {
        let c = &self.config;
        if tokens.is_empty() {
            return Err(Error::InvalidInput("empty token list".into()));
        }
        if tokens.len() > c.max_seq_len {
            return Err(Error::InvalidInput(format!(
                "sequence length {} exceeds max_seq_len {}",
                tokens.len(),
                c.max_seq_len
            )));
        }
        let d = c.d_model;
        let embed = self.embed_in();
        let mut x: Vec<Vec<f32>> = Vec::with_capacity(tokens.len());
        for &t in tokens {
            let t = t as usize;
            if t >= c.vocab_size {
                return Err(Error::InvalidInput(format!(
                    "token id {t} out of vocabulary ({})",
                    c.vocab_size
                )));
            }
            x.push(embed[t * d..(t + 1) * d].to_vec());
        }

        let mut acts = Activations {
            mlp_inputs: Vec::with_capacity(c.n_layers),
            keys: Vec::with_capacity(c.n_layers),
            head_norms: Vec::with_capacity(c.n_layers),
            final_hidden: Vec::new(),
        };
        for l in 0..c.n_layers {
            let w = self.layer(l);
            let norms = self.attention(&mut x, &w, l)?;
            acts.head_norms.push(norms);

            let mut inputs = Vec::with_capacity(x.len());
            let mut keys = Vec::with_capacity(x.len());
            for xt in x.iter_mut() {
                let h = rms_norm(xt, w.mlp_norm, c.norm_eps);
                let out = mlp_forward(&h, &w.mlp, l)?;
                for (a, b) in xt.iter_mut().zip(&out.m) {
                    *a += b;
                }
                inputs.push(h);
                keys.push(out.keys);
            }
            acts.mlp_inputs.push(inputs);
            acts.keys.push(keys);
        }
        acts.final_hidden = x
            .iter()
            .map(|xt| rms_norm(xt, self.final_norm(), c.norm_eps))
            .collect();
        Ok(acts)
    }

    /// Causal multi-head attention with residual add. Returns the per-head
    /// output norms for every position.
    fn attention(
        &self,
        x: &mut [Vec<f32>],
        w: &LayerWeights<'_>,
        layer: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let c = &self.config;
        let (d, hd) = (c.d_model, c.head_dim);
        let scale = 1.0 / (hd as f32).sqrt();
        let normed: Vec<Vec<f32>> = x
            .iter()
            .map(|xt| rms_norm(xt, w.attn_norm, c.norm_eps))
            .collect();
        let q: Vec<Vec<f32>> = normed.iter().map(|h| matvec(w.w_q, h, d)).collect();
        let k: Vec<Vec<f32>> = normed.iter().map(|h| matvec(w.w_k, h, d)).collect();
        let v: Vec<Vec<f32>> = normed.iter().map(|h| matvec(w.w_v, h, d)).collect();

        let mut all_norms = Vec::with_capacity(x.len());
        for t in 0..x.len() {
            let mut total = vec![0.0f32; d];
            let mut norms = Vec::with_capacity(c.n_heads);
            for head in 0..c.n_heads {
                let span = head * hd..(head + 1) * hd;
                let scores: Vec<f32> = (0..=t)
                    .map(|s| dot(&q[t][span.clone()], &k[s][span.clone()]) * scale)
                    .collect();
                let max = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let exps: Vec<f32> = scores.iter().map(|s| (s - max).exp()).collect();
                let z: f32 = exps.iter().sum();
                let mut o = vec![0.0f32; hd];
                for (s, e) in exps.iter().enumerate() {
                    let p = e / z;
                    for (oi, vi) in o.iter_mut().zip(&v[s][span.clone()]) {
                        *oi += p * vi;
                    }
                }
                // This head's slice of the output projection.
                let mut y = vec![0.0f32; d];
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr = dot(&w.w_o[r * d + span.start..r * d + span.end], &o);
                }
                let norm = y.iter().map(|&a| f64::from(a) * f64::from(a)).sum::<f64>().sqrt();
                if !norm.is_finite() {
                    return Err(Error::NumericOverflow {
                        layer,
                        stage: "attention",
                    });
                }
                norms.push(norm);
                for (a, b) in total.iter_mut().zip(&y) {
                    *a += b;
                }
            }
            for (a, b) in x[t].iter_mut().zip(&total) {
                *a += b;
            }
            all_norms.push(norms);
        }
        Ok(all_norms)
    }

    /// Output-embedding logits for a final hidden state.
    pub fn logits(&self, hidden: &[f32]) -> Vec<f32> {
        matvec(self.embed_out(), hidden, self.config.vocab_size)
    }

    /// `sum_{t in span} log p(tokens[t] | tokens[..t])`.
    pub fn span_log_likelihood(
        &self,
        acts: &Activations,
        tokens: &[u32],
        span: Range<usize>,
    ) -> Result<f64> {
        check_span(&span, tokens.len())?;
        let mut total = 0.0f64;
        for t in span {
            let logits = self.logits(&acts.final_hidden[t - 1]);
            total += log_softmax(&logits, tokens[t] as usize);
        }
        if !total.is_finite() {
            return Err(Error::NumericOverflow {
                layer: self.config.n_layers,
                stage: "log-softmax",
            });
        }
        Ok(total)
    }
}

fn check_span(span: &Range<usize>, len: usize) -> Result<()> {
    if span.is_empty() || span.end > len {
        return Err(Error::InvalidInput(format!(
            "answer span {span:?} empty or out of bounds for {len} tokens"
        )));
    }
    if span.start == 0 {
        return Err(Error::InvalidInput(
            "answer span must start after the first token".into(),
        ));
    }
    Ok(())
}

/// Probe values for one (item, candidate) sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub item_id: String,
    pub candidate_index: usize,
    pub probe_values: BTreeMap<ProbeId, f64>,
    pub seq_len: usize,
}

/// Computes the requested probe values, in `probes` order. MLP keys and
/// head norms are read at the final token.
pub fn trace_values(
    model: &ModelBundle,
    tokens: &[u32],
    answer_span: Range<usize>,
    probes: &[ProbeId],
) -> Result<Vec<f64>> {
    check_span(&answer_span, tokens.len())?;
    for p in probes {
        model.config().check_probe(p)?;
    }
    let acts = model.run(tokens)?;
    let last = tokens.len() - 1;
    let needs_ll = probes.iter().any(|p| p.kind == ProbeKind::LogLikelihood);
    let ll = if needs_ll {
        model.span_log_likelihood(&acts, tokens, answer_span)?
    } else {
        0.0
    };
    Ok(probes
        .iter()
        .map(|p| match (p.kind, p.layer, p.index) {
            (ProbeKind::MlpKey, Some(l), Some(i)) => f64::from(acts.keys[l][last][i]),
            (ProbeKind::AttnHeadNorm, Some(l), Some(h)) => acts.head_norms[l][last][h],
            _ => ll,
        })
        .collect())
}

pub fn trace_sequence(
    model: &ModelBundle,
    item_id: &str,
    candidate_index: usize,
    tokens: &[u32],
    answer_span: Range<usize>,
    probes: &[ProbeId],
) -> Result<ForwardTrace> {
    let values = trace_values(model, tokens, answer_span, probes)?;
    Ok(ForwardTrace {
        item_id: item_id.to_string(),
        candidate_index,
        probe_values: probes.iter().copied().zip(values).collect(),
        seq_len: tokens.len(),
    })
}
