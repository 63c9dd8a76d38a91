//! Seeded generators for records, datasets and models with known ground
//! truth.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::capture::capture;
use crate::data::{Dataset, McqItem, Split};
use crate::error::{Error, Result};
use crate::model::{ModelBundle, ModelConfig, Tensor};
use crate::probe::{ProbeId, ProbeKind};
use crate::records::{ItemRecord, ProbeRecordSet, ValueMatrix};
use crate::select::{score_probes, Pattern};
use crate::tokenizer::BYTE_VOCAB_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedProbe {
    #[serde(flatten)]
    pub probe: ProbeId,
    pub pattern: Pattern,
    /// Per-item probability that the probe's extremum lands on the label.
    pub reliability: f64,
}

fn default_name() -> String {
    "synth".into()
}

fn default_width() -> usize {
    1000
}

fn default_noise_kind() -> ProbeKind {
    ProbeKind::MlpKey
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub planted_probes: Vec<PlantedProbe>,
    pub noise_probe_count: usize,
    pub n_items: usize,
    pub m_candidates: usize,
    /// Half-width of the per-(item, probe) uniform offset shared by all
    /// candidates.
    #[serde(default)]
    pub baseline_spread: f64,
    pub seed: u64,
    /// Noise probes fill `(layer, index)` slots with this many per layer.
    #[serde(default = "default_width")]
    pub layer_width: usize,
    #[serde(default = "default_noise_kind")]
    pub noise_kind: ProbeKind,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("plant spec: {m}")));
        if self.n_items == 0 {
            return bad("n_items must be >= 1".into());
        }
        if self.m_candidates == 0 {
            return bad("m_candidates must be >= 1".into());
        }
        if self.layer_width == 0 {
            return bad("layer_width must be >= 1".into());
        }
        if !(self.baseline_spread >= 0.0 && self.baseline_spread.is_finite()) {
            return bad("baseline_spread must be a finite non-negative number".into());
        }
        let mut seen = HashSet::new();
        for p in &self.planted_probes {
            if !(0.0..=1.0).contains(&p.reliability) {
                return bad(format!("reliability {} of {} outside [0, 1]", p.reliability, p.probe));
            }
            p.pattern.ensure_base()?;
            p.probe.validate_shape()?;
            if !seen.insert(p.probe) {
                return bad(format!("probe {} planted twice", p.probe));
            }
        }
        Ok(())
    }

    /// Ids assigned to the noise probes, disjoint from the planted ones.
    pub fn noise_probes(&self) -> Vec<ProbeId> {
        let planted: HashSet<ProbeId> = self.planted_probes.iter().map(|p| p.probe).collect();
        let mut out = Vec::with_capacity(self.noise_probe_count);
        let mut slot = 0usize;
        while out.len() < self.noise_probe_count {
            let id = ProbeId {
                kind: self.noise_kind,
                layer: Some(slot / self.layer_width),
                index: Some(slot % self.layer_width),
            };
            if !planted.contains(&id) {
                out.push(id);
            }
            slot += 1;
        }
        out
    }
}

/// Builds records where planted probes pick the label with their stated
/// reliability and noise probes are exchangeable across candidates.
pub fn gen_records(spec: &PlantSpec) -> Result<(ProbeRecordSet, Dataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = spec.noise_probes();
    let mut probes: Vec<ProbeId> = spec.planted_probes.iter().map(|p| p.probe).collect();
    probes.extend(&noise);
    let n_cols = probes.len();
    let m = spec.m_candidates;

    let mut items = Vec::with_capacity(spec.n_items);
    let mut ds_items = Vec::with_capacity(spec.n_items);
    let mut z = vec![0.0f64; m];
    for i in 0..spec.n_items {
        let label = rng.random_range(0..m);
        let mut data = vec![0.0f64; m * n_cols];
        for col in 0..n_cols {
            let offset = if spec.baseline_spread > 0.0 {
                rng.random_range(-spec.baseline_spread..=spec.baseline_spread)
            } else {
                0.0
            };
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            if let Some(plant) = spec.planted_probes.get(col) {
                z.sort_by(f64::total_cmp);
                let extreme = match plant.pattern {
                    Pattern::Argmin => z.remove(0),
                    _ => z.pop().expect("m >= 1"),
                };
                let target = if m == 1 || rng.random_bool(plant.reliability) {
                    label
                } else {
                    let other = rng.random_range(0..m - 1);
                    if other >= label { other + 1 } else { other }
                };
                z.shuffle(&mut rng);
                let mut rest = z.drain(..);
                for r in 0..m {
                    let v = if r == target {
                        extreme
                    } else {
                        rest.next().expect("m - 1 remaining")
                    };
                    data[r * n_cols + col] = offset + v;
                }
                drop(rest);
                z.resize(m, 0.0);
            } else {
                for r in 0..m {
                    data[r * n_cols + col] = offset + z[r];
                }
            }
        }
        let item_id = format!("{}-{i:06}", spec.name);
        items.push(ItemRecord {
            item_id: item_id.clone(),
            label: Some(label),
            values: ValueMatrix::new(m, n_cols, data)?,
        });
        ds_items.push(McqItem {
            item_id,
            question: format!("synthetic question {i}"),
            candidates: (0..m).map(|j| format!("candidate {j}")).collect(),
            label: Some(label),
        });
    }
    let records = ProbeRecordSet::new(spec.name.clone(), probes, items)?;
    let dataset = Dataset::new(spec.name.clone(), "", Split::Train, ds_items)?;
    Ok((records, dataset))
}

/// Byte that ends every correct candidate in a marker dataset.
pub const MARKER: u8 = b'!';

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| (b'a' + rng.random_range(0..26u8)) as char)
        .collect()
}

/// Dataset whose correct candidates end with [`MARKER`] and whose wrong
/// candidates end with a letter; all candidates of an item have equal
/// length.
pub fn gen_marker_dataset(name: &str, n_items: usize, m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..n_items)
        .map(|i| {
            let qlen = rng.random_range(3..9);
            let question = format!("{}?", random_word(&mut rng, qlen));
            let alen = rng.random_range(2..6);
            let label = rng.random_range(0..m);
            let candidates = (0..m)
                .map(|j| {
                    let mut w = random_word(&mut rng, alen);
                    if j == label {
                        w.push(MARKER as char);
                    } else {
                        w.push_str(&random_word(&mut rng, 1));
                    }
                    w
                })
                .collect();
            McqItem {
                item_id: format!("{name}-{i:05}"),
                question,
                candidates,
                label: Some(label),
            }
        })
        .collect();
    Dataset::new(name, "", Split::Train, items)
}

/// Random weights: matrices uniform in `[-scale, scale]`, norm scales 1.
pub fn random_model(config: &ModelConfig, seed: u64, scale: f32) -> Result<ModelBundle> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for (name, shape) in config.expected_tensors() {
        let n: usize = shape.iter().product();
        let data = if shape.len() == 1 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
        };
        tensors.insert(name, Tensor { shape, data });
    }
    ModelBundle::new(config.clone(), tensors)
}

/// A small default model shape for synthetic runs.
pub fn desk_config() -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        d_model: 16,
        d_ff: 48,
        n_heads: 2,
        head_dim: 8,
        vocab_size: BYTE_VOCAB_SIZE,
        max_seq_len: 256,
        activation: crate::model::Activation::Silu,
        norm_eps: 1e-5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rig")]
pub enum Rig {
    /// Output embedding zeroed: every token has probability `1/|V|`.
    UniformLogits,
    /// Unigram logits favouring bytes seen only in correct candidates.
    LabelTokensDominant,
    /// Neuron `(layer, index)` fires only when the final token is the
    /// marker ending every correct candidate.
    PlantMlpNeuron { layer: usize, index: usize },
}

type Tensors = BTreeMap<String, Tensor>;

fn set(t: &mut Tensors, name: &str, f: impl Fn(&mut Tensor)) {
    f(t.get_mut(name).expect("canonical tensor present"));
}

/// Zeroes column `col` of every weight that reads the residual stream and
/// row `col` of every weight that writes to it.
fn isolate_channel(t: &mut Tensors, c: &ModelConfig, col: usize) {
    let d = c.d_model;
    for l in 0..c.n_layers {
        for w in ["attn.w_q", "attn.w_k", "attn.w_v", "mlp.w_gate", "mlp.w_up"] {
            set(t, &format!("layers.{l}.{w}"), |x| {
                let rows = x.shape[0];
                for r in 0..rows {
                    x.data[r * d + col] = 0.0;
                }
            });
        }
        for w in ["attn.w_o", "mlp.w_down"] {
            set(t, &format!("layers.{l}.{w}"), |x| {
                let cols = x.shape[1];
                for k in 0..cols {
                    x.data[col * cols + k] = 0.0;
                }
            });
        }
    }
}

/// Bytes that end every correct candidate and no wrong one.
fn find_final_marker(dataset: &Dataset) -> Result<u8> {
    let mut marker = None;
    for item in &dataset.items {
        let label = item
            .label
            .ok_or_else(|| Error::Rig(format!("item `{}` is unlabeled", item.item_id)))?;
        let last = *item.candidates[label].as_bytes().last().expect("non-empty");
        match marker {
            None => marker = Some(last),
            Some(m) if m != last => {
                return Err(Error::Rig(format!(
                    "correct candidates do not share a final byte (item `{}`)",
                    item.item_id
                )))
            }
            _ => {}
        }
    }
    let marker = marker.ok_or_else(|| Error::Rig("empty dataset".into()))?;
    for item in &dataset.items {
        let mut text = format!("{}{}", dataset.instruction, item.question);
        for (j, c) in item.candidates.iter().enumerate() {
            if Some(j) != item.label {
                text.push_str(c);
            } else {
                text.push_str(&c[..c.len() - 1]);
            }
        }
        if text.as_bytes().contains(&marker) {
            return Err(Error::Rig(format!(
                "marker byte {marker:#04x} also appears outside correct endings (item `{}`)",
                item.item_id
            )));
        }
    }
    Ok(marker)
}

fn check_rig_dims(config: &ModelConfig) -> Result<()> {
    config.validate()?;
    if config.vocab_size < BYTE_VOCAB_SIZE {
        return Err(Error::Rig(format!(
            "vocab_size {} < {BYTE_VOCAB_SIZE} needed by the byte tokenizer",
            config.vocab_size
        )));
    }
    if config.d_model < 2 {
        return Err(Error::Rig("d_model must be >= 2 to reserve a channel".into()));
    }
    Ok(())
}

fn uniform_logits(config: &ModelConfig, seed: u64) -> Result<ModelBundle> {
    let mut t = random_model(config, seed, 0.5)?.tensors().clone();
    set(&mut t, "embed.out", |x| x.data.fill(0.0));
    ModelBundle::new(config.clone(), t)
}

fn label_tokens_dominant(config: &ModelConfig, dataset: &Dataset, seed: u64) -> Result<ModelBundle> {
    const CHANNEL: usize = 0;
    const STRENGTH: f32 = 4.0;
    let d = config.d_model;
    let mut in_correct = [false; 256];
    let mut in_wrong = [false; 256];
    for item in &dataset.items {
        let label = item
            .label
            .ok_or_else(|| Error::Rig(format!("item `{}` is unlabeled", item.item_id)))?;
        for (j, c) in item.candidates.iter().enumerate() {
            let seen = if j == label { &mut in_correct } else { &mut in_wrong };
            for b in c.bytes() {
                seen[b as usize] = true;
            }
        }
    }
    let score = |b: usize| -> f32 {
        match (in_correct[b], in_wrong[b]) {
            (true, false) => STRENGTH,
            (false, true) => -STRENGTH,
            _ => 0.0,
        }
    };
    // Feasibility under the unigram approximation.
    for item in &dataset.items {
        let label = item.label.expect("checked above");
        let total = |c: &str| -> f32 { c.bytes().map(|b| score(b as usize)).sum() };
        let want = total(&item.candidates[label]) - item.candidates[label].len() as f32 * STRENGTH;
        for (j, c) in item.candidates.iter().enumerate() {
            let other = total(c) - c.len() as f32 * STRENGTH;
            if j != label && other >= want {
                return Err(Error::Rig(format!(
                    "item `{}`: candidate {j} cannot be scored below the correct one by byte frequencies",
                    item.item_id
                )));
            }
        }
    }

    let mut t = random_model(config, seed, 0.1)?.tensors().clone();
    set(&mut t, "embed.in", |x| {
        for v in x.data.iter_mut() {
            *v *= 1e-2;
        }
        for tok in 0..config.vocab_size {
            x.data[tok * d + CHANNEL] = 1.0;
        }
    });
    isolate_channel(&mut t, config, CHANNEL);
    set(&mut t, "final_norm", |x| {
        x.data.fill(0.0);
        x.data[CHANNEL] = 1.0;
    });
    set(&mut t, "embed.out", |x| {
        x.data.fill(0.0);
        for b in 0..256 {
            x.data[b * d + CHANNEL] = score(b);
        }
    });
    ModelBundle::new(config.clone(), t)
}

fn plant_once(
    config: &ModelConfig,
    marker: u8,
    layer: usize,
    index: usize,
    seed: u64,
) -> Result<ModelBundle> {
    let d = config.d_model;
    let channel = d - 1;
    let mut t = random_model(config, seed, 0.5)?.tensors().clone();
    set(&mut t, "embed.in", |x| {
        for tok in 0..config.vocab_size {
            x.data[tok * d + channel] = 0.0;
        }
        let row = marker as usize * d;
        x.data[row..row + d].fill(0.0);
        x.data[row + channel] = 1.0;
    });
    isolate_channel(&mut t, config, channel);
    for w in ["mlp.w_gate", "mlp.w_up"] {
        set(&mut t, &format!("layers.{layer}.{w}"), |x| {
            x.data[index * d..(index + 1) * d].fill(0.0);
            x.data[index * d + channel] = 2.0;
        });
    }
    ModelBundle::new(config.clone(), t)
}

/// Checks that the planted neuron is the unique top argmax probe.
fn plant_is_unique_top(model: &ModelBundle, dataset: &Dataset, target: ProbeId) -> Result<bool> {
    let probes = model.config().all_mlp_probes();
    let recs = capture(model, dataset, &probes)?;
    let scores = score_probes(&recs, Pattern::Argmax)?;
    let mut ranked = scores.clone();
    ranked.sort_by_key(|s| s.rank);
    Ok(ranked[0].probe == target
        && ranked[0].correct == ranked[0].n_items
        && ranked.get(1).is_none_or(|s| s.correct < ranked[0].correct))
}

/// Attempts per plant before giving up; each reseeds the background weights.
const PLANT_ATTEMPTS: u64 = 32;

pub fn gen_rigged_model(
    config: &ModelConfig,
    dataset: &Dataset,
    rig: Rig,
    seed: u64,
) -> Result<ModelBundle> {
    check_rig_dims(config)?;
    match rig {
        Rig::UniformLogits => uniform_logits(config, seed),
        Rig::LabelTokensDominant => label_tokens_dominant(config, dataset, seed),
        Rig::PlantMlpNeuron { layer, index } => {
            if layer >= config.n_layers || index >= config.d_ff {
                return Err(Error::Rig(format!(
                    "neuron ({layer}, {index}) outside {} layers x {} neurons",
                    config.n_layers, config.d_ff
                )));
            }
            let marker = find_final_marker(dataset)?;
            let target = ProbeId::mlp_key(layer, index);
            for attempt in 0..PLANT_ATTEMPTS {
                let model = plant_once(config, marker, layer, index, seed.wrapping_add(attempt))?;
                if plant_is_unique_top(&model, dataset, target)? {
                    return Ok(model);
                }
            }
            Err(Error::Rig(format!(
                "another neuron matched the plant on every one of {PLANT_ATTEMPTS} seeds; use more items"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::score_probes;

    fn spec(reliability: f64, n_items: usize, m: usize) -> PlantSpec {
        PlantSpec {
            name: "s".into(),
            planted_probes: vec![PlantedProbe {
                probe: ProbeId::mlp_key(0, 0),
                pattern: Pattern::Argmax,
                reliability,
            }],
            noise_probe_count: 3,
            n_items,
            m_candidates: m,
            baseline_spread: 0.0,
            seed: 5,
            layer_width: 10,
            noise_kind: ProbeKind::MlpKey,
        }
    }

    #[test]
    fn perfect_plant_scores_one() {
        let (r, d) = gen_records(&spec(1.0, 300, 4)).unwrap();
        let s = score_probes(&r, Pattern::Argmax).unwrap();
        assert_eq!(s[0].probe, ProbeId::mlp_key(0, 0));
        assert_eq!(s[0].correct, 300);
        assert_eq!(d.items.len(), 300);
        assert_eq!(r.n_probes(), 4);
    }

    #[test]
    fn noise_ids_skip_planted() {
        let s = spec(1.0, 1, 2);
        assert_eq!(
            s.noise_probes(),
            vec![ProbeId::mlp_key(0, 1), ProbeId::mlp_key(0, 2), ProbeId::mlp_key(0, 3)]
        );
    }

    #[test]
    fn deterministic_in_seed() {
        let a = gen_records(&spec(0.8, 50, 3)).unwrap();
        let b = gen_records(&spec(0.8, 50, 3)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(0.8, 50, 3);
        other.seed = 6;
        assert_ne!(gen_records(&other).unwrap().0, a.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_records(&spec(1.5, 10, 2)).is_err());
        assert!(gen_records(&spec(0.5, 0, 2)).is_err());
        let mut s = spec(0.5, 10, 2);
        s.planted_probes[0].pattern = Pattern::Combined;
        assert!(gen_records(&s).is_err());
    }

    #[test]
    fn spec_parses_from_json() {
        let s: PlantSpec = serde_json::from_str(
            r#"{"planted_probes":[{"kind":"mlp_key","layer":1,"index":7,"pattern":"argmin","reliability":0.9}],
                "noise_probe_count":10,"n_items":20,"m_candidates":2,"seed":1}"#,
        )
        .unwrap();
        assert_eq!(s.planted_probes[0].probe, ProbeId::mlp_key(1, 7));
        assert_eq!(s.layer_width, 1000);
        assert_eq!(s.name, "synth");
    }

    #[test]
    fn marker_dataset_shape() {
        let d = gen_marker_dataset("mk", 20, 4, 3).unwrap();
        for item in &d.items {
            let l = item.label.unwrap();
            let len = item.candidates[0].len();
            for (j, c) in item.candidates.iter().enumerate() {
                assert_eq!(c.len(), len);
                assert_eq!(c.ends_with('!'), j == l);
            }
        }
        assert_eq!(find_final_marker(&d).unwrap(), MARKER);
    }

    #[test]
    fn impossible_rigs_are_reported() {
        let d = gen_marker_dataset("mk", 5, 2, 3).unwrap();
        let mut c = desk_config();
        assert!(matches!(
            gen_rigged_model(&c, &d, Rig::PlantMlpNeuron { layer: 5, index: 0 }, 0),
            Err(Error::Rig(_))
        ));
        c.vocab_size = 100;
        assert!(matches!(
            gen_rigged_model(&c, &d, Rig::UniformLogits, 0),
            Err(Error::Rig(_))
        ));
        let mut bad = d.clone();
        bad.items[0].question.push('!');
        assert!(matches!(
            gen_rigged_model(&desk_config(), &bad, Rig::PlantMlpNeuron { layer: 0, index: 0 }, 0),
            Err(Error::Rig(_))
        ));
    }

    #[test]
    fn rig_serde_shape() {
        let r: Rig = serde_json::from_str(r#"{"rig":"plant_mlp_neuron","layer":1,"index":7}"#).unwrap();
        assert_eq!(r, Rig::PlantMlpNeuron { layer: 1, index: 7 });
    }

    #[test]
    fn uniform_rig_gives_uniform_loglik() {
        use crate::ensemble::{log_likelihood_records, LoglikScope};
        let d = gen_marker_dataset("mk", 6, 3, 1).unwrap();
        let m = gen_rigged_model(&desk_config(), &d, Rig::UniformLogits, 2).unwrap();
        let r = log_likelihood_records(&m, &d, LoglikScope::AnswerSum).unwrap();
        for (item, rec) in d.items.iter().zip(r.items()) {
            for (c, text) in item.candidates.iter().enumerate() {
                let want = -(text.len() as f64) * (BYTE_VOCAB_SIZE as f64).ln();
                assert!((rec.values.get(c, 0) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dominant_rig_makes_loglik_perfect() {
        use crate::ensemble::{log_likelihood_baseline, log_likelihood_records, LoglikScope};
        let d = gen_marker_dataset("mk", 30, 4, 1).unwrap();
        let m = gen_rigged_model(&desk_config(), &d, Rig::LabelTokensDominant, 2).unwrap();
        let r = log_likelihood_records(&m, &d, LoglikScope::AnswerSum).unwrap();
        assert_eq!(log_likelihood_baseline(&r).unwrap().accuracy, Some(1.0));
    }

    #[test]
    fn planted_neuron_is_unique_top() {
        let d = gen_marker_dataset("mk", 40, 4, 1).unwrap();
        let target = ProbeId::mlp_key(1, 7);
        let m = gen_rigged_model(&desk_config(), &d, Rig::PlantMlpNeuron { layer: 1, index: 7 }, 3)
            .unwrap();
        assert!(plant_is_unique_top(&m, &d, target).unwrap());
    }
}
