//! A straight-line f64 transformer checks every probe the library captures.

mod common;

use truthv::capture::{all_probes, capture};
use truthv::data::{assemble_prompt, Dataset, McqItem, Split};
use truthv::model::{Activation, ModelBundle, ModelConfig};
use truthv::synth::{desk_config, random_model};
use truthv::{ProbeId, ProbeKind};

struct Reference {
    keys: Vec<Vec<f64>>,
    head_norms: Vec<Vec<f64>>,
    loglik: f64,
}

fn w(model: &ModelBundle, name: &str) -> Vec<f64> {
    model.tensor(name).unwrap().data.iter().map(|&v| v as f64).collect()
}

fn rms(x: &[f64], g: &[f64], eps: f64) -> Vec<f64> {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    x.iter().zip(g).map(|(v, s)| v / (ms + eps).sqrt() * s).collect()
}

fn mv(m: &[f64], x: &[f64]) -> Vec<f64> {
    m.chunks(x.len()).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Silu => x / (1.0 + (-x).exp()),
        Activation::Gelu => {
            0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
        }
    }
}

/// Keys and head norms at the final token plus the span log-likelihood.
fn reference(model: &ModelBundle, tokens: &[u32], span: std::ops::Range<usize>) -> Reference {
    let c = model.config();
    let (d, hd, eps) = (c.d_model, c.head_dim, c.norm_eps as f64);
    let emb = w(model, "embed.in");
    let mut x: Vec<Vec<f64>> = tokens
        .iter()
        .map(|&t| emb[t as usize * d..(t as usize + 1) * d].to_vec())
        .collect();
    let n = x.len();
    let mut keys = Vec::new();
    let mut head_norms = Vec::new();
    for l in 0..c.n_layers {
        let p = |s: &str| w(model, &format!("layers.{l}.{s}"));
        let (wq, wk, wv, wo) = (p("attn.w_q"), p("attn.w_k"), p("attn.w_v"), p("attn.w_o"));
        let hs: Vec<Vec<f64>> = x.iter().map(|xt| rms(xt, &p("attn_norm"), eps)).collect();
        let q: Vec<_> = hs.iter().map(|h| mv(&wq, h)).collect();
        let k: Vec<_> = hs.iter().map(|h| mv(&wk, h)).collect();
        let v: Vec<_> = hs.iter().map(|h| mv(&wv, h)).collect();
        let mut new_x = x.clone();
        let mut last_norms = Vec::new();
        for t in 0..n {
            for head in 0..c.n_heads {
                let r = head * hd..(head + 1) * hd;
                let s: Vec<f64> = (0..=t)
                    .map(|u| {
                        q[t][r.clone()].iter().zip(&k[u][r.clone()]).map(|(a, b)| a * b).sum::<f64>()
                            / (hd as f64).sqrt()
                    })
                    .collect();
                let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = s.iter().map(|a| (a - mx).exp()).sum();
                let mut o = vec![0.0; hd];
                for u in 0..=t {
                    let a = (s[u] - mx).exp() / z;
                    for j in 0..hd {
                        o[j] += a * v[u][r.start + j];
                    }
                }
                let y: Vec<f64> = (0..d)
                    .map(|row| (0..hd).map(|j| wo[row * d + r.start + j] * o[j]).sum())
                    .collect();
                if t == n - 1 {
                    last_norms.push(y.iter().map(|a| a * a).sum::<f64>().sqrt());
                }
                for j in 0..d {
                    new_x[t][j] += y[j];
                }
            }
        }
        x = new_x;
        head_norms.push(last_norms);
        let (wg, wu, wd) = (p("mlp.w_gate"), p("mlp.w_up"), p("mlp.w_down"));
        let norm = p("mlp_norm");
        for (t, xt) in x.iter_mut().enumerate() {
            let h = rms(xt, &norm, eps);
            let kk: Vec<f64> = mv(&wg, &h)
                .into_iter()
                .zip(mv(&wu, &h))
                .map(|(g, u)| act(c.activation, g) * u)
                .collect();
            for (a, b) in xt.iter_mut().zip(mv(&wd, &kk)) {
                *a += b;
            }
            if t == n - 1 {
                keys.push(kk);
            }
        }
    }
    let out = w(model, "embed.out");
    let g = w(model, "final_norm");
    let mut loglik = 0.0;
    for t in span {
        let h = rms(&x[t - 1], &g, eps);
        let logits = mv(&out, &h);
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = logits.iter().map(|a| (a - mx).exp()).sum::<f64>().ln() + mx;
        loglik += logits[tokens[t] as usize] - lse;
    }
    Reference {
        keys,
        head_norms,
        loglik,
    }
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-4 * scale.max(1.0)
}

fn dataset() -> Dataset {
    let items = (0..3)
        .map(|i| McqItem {
            item_id: format!("q{i}"),
            question: format!("Which value is right for case {i}?"),
            candidates: vec!["yes".into(), "no way".into(), format!("maybe {i}")],
            label: Some(i % 3),
        })
        .collect();
    Dataset::new("oracle", "Answer truthfully.", Split::Validation, items).unwrap()
}

fn config(a: Activation) -> ModelConfig {
    ModelConfig {
        activation: a,
        ..desk_config()
    }
}

#[test]
fn captured_values_match_reference_forward() {
    for (seed, a) in [(1, Activation::Silu), (2, Activation::Gelu)] {
        let model = random_model(&config(a), seed, 0.4).unwrap();
        let ds = dataset();
        let probes = all_probes(&model);
        let recs = capture(&model, &ds, &probes).unwrap();
        for (item, rec) in ds.items.iter().zip(recs.items()) {
            for c in 0..item.candidates.len() {
                let prompt = assemble_prompt(&ds, item, c, model.config().max_seq_len).unwrap();
                let r = reference(&model, &prompt.tokens, prompt.answer_span.clone());
                let scale = r
                    .keys
                    .iter()
                    .flatten()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                for (col, p) in recs.probes().iter().enumerate() {
                    let got = rec.values.get(c, col);
                    let (want, s) = match (p.kind, p.layer, p.index) {
                        (ProbeKind::MlpKey, Some(l), Some(i)) => (r.keys[l][i], scale),
                        (ProbeKind::AttnHeadNorm, Some(l), Some(h)) => (r.head_norms[l][h], 1.0),
                        _ => (r.loglik, r.loglik.abs()),
                    };
                    assert!(close(got, want, s), "{p} item {} cand {c}: {got} vs {want}", item.item_id);
                }
            }
        }
    }
}

#[test]
fn keys_match_straight_line_recomputation_on_captured_input() {
    let model = random_model(&desk_config(), 9, 0.5).unwrap();
    let tokens: Vec<u32> = vec![256, 72, 105, 10, 65, 33];
    let acts = model.run(&tokens).unwrap();
    let c = model.config();
    for l in 0..c.n_layers {
        let wg = w(&model, &format!("layers.{l}.mlp.w_gate"));
        let wu = w(&model, &format!("layers.{l}.mlp.w_up"));
        for (t, h) in acts.mlp_inputs[l].iter().enumerate() {
            let h: Vec<f64> = h.iter().map(|&v| v as f64).collect();
            let g = mv(&wg, &h);
            let u = mv(&wu, &h);
            for i in 0..c.d_ff {
                let want = act(c.activation, g[i]) * u[i];
                let got = acts.keys[l][t][i] as f64;
                assert!((got - want).abs() <= 1e-5 * want.abs().max(1.0), "l{l} t{t} i{i}");
            }
        }
    }
}

#[test]
fn capture_is_per_item_and_order_independent() {
    let model = random_model(&desk_config(), 4, 0.5).unwrap();
    let ds = dataset();
    let probes = vec![ProbeId::mlp_key(1, 3), ProbeId::log_likelihood(), ProbeId::attn_head(0, 1)];
    let all = capture(&model, &ds, &probes).unwrap();
    let mut reversed = ds.clone();
    reversed.items.reverse();
    let rev = capture(&model, &reversed, &probes).unwrap();
    for item in all.items() {
        let other = rev.items().iter().find(|i| i.item_id == item.item_id).unwrap();
        assert_eq!(item, other);
        let single = Dataset::new(
            "one",
            ds.instruction.clone(),
            Split::Validation,
            vec![ds.items.iter().find(|i| i.item_id == item.item_id).unwrap().clone()],
        )
        .unwrap();
        assert_eq!(&capture(&model, &single, &probes).unwrap().items()[0], item);
    }
}
