//! Projection of value vectors onto the output vocabulary (`r = E v`).

use super::ModelBundle;
use crate::error::{Error, Result};

/// Column `neuron` of `layers.{layer}.mlp.w_down`.
pub fn value_vector(model: &ModelBundle, layer: usize, neuron: usize) -> Result<Vec<f32>> {
    let c = model.config();
    if layer >= c.n_layers || neuron >= c.d_ff {
        return Err(Error::InvalidInput(format!(
            "value vector ({layer}, {neuron}) out of range for {} layers x {} neurons",
            c.n_layers, c.d_ff
        )));
    }
    let w = model.layer(layer).mlp.w_down;
    Ok((0..c.d_model).map(|r| w[r * c.d_ff + neuron]).collect())
}

/// Top `top_k` tokens by descending `E v` score; ties go to the lower id.
pub fn project_to_vocab(
    model: &ModelBundle,
    layer: usize,
    neuron: usize,
    top_k: usize,
) -> Result<Vec<(usize, f64)>> {
    let c = model.config();
    if top_k > c.vocab_size {
        return Err(Error::InvalidInput(format!(
            "top_k {top_k} exceeds vocab_size {}",
            c.vocab_size
        )));
    }
    let v = value_vector(model, layer, neuron)?;
    let e = model.embed_out();
    let d = c.d_model;
    let mut scored: Vec<(usize, f64)> = (0..c.vocab_size)
        .map(|t| {
            let row = &e[t * d..(t + 1) * d];
            let s = row
                .iter()
                .zip(&v)
                .map(|(a, b)| f64::from(*a) * f64::from(*b))
                .sum();
            (t, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(top_k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::super::{Activation, Tensor};
    use super::*;

    #[test]
    fn identity_embedding_picks_basis_index() {
        let c = tiny_config(Activation::Silu);
        let m = random_model(&c, 31);
        let mut t = m.tensors().clone();
        let mut e = Tensor::zeros(vec![258, 16]);
        for i in 0..16 {
            e.data[i * 16 + i] = 1.0;
        }
        t.insert("embed.out".into(), e);
        let mut down = Tensor::zeros(vec![16, 48]);
        down.data[3 * 48 + 5] = 1.0; // v_5 = e_3
        t.insert("layers.1.mlp.w_down".into(), down);
        let m = ModelBundle::new(c, t).unwrap();
        let top = project_to_vocab(&m, 1, 5, 1).unwrap();
        assert_eq!(top[0].0, 3);
        // Remaining scores are all zero, so ties resolve by ascending id.
        let top3 = project_to_vocab(&m, 1, 5, 3).unwrap();
        assert_eq!(top3.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3, 0, 1]);
    }

    #[test]
    fn full_top_k_is_a_permutation() {
        let c = tiny_config(Activation::Silu);
        let m = random_model(&c, 32);
        let mut ids: Vec<usize> = project_to_vocab(&m, 0, 0, 258)
            .unwrap()
            .into_iter()
            .map(|x| x.0)
            .collect();
        ids.sort();
        assert_eq!(ids, (0..258).collect::<Vec<_>>());
    }

    #[test]
    fn out_of_range_requests_fail() {
        let c = tiny_config(Activation::Silu);
        let m = random_model(&c, 33);
        assert!(project_to_vocab(&m, 2, 0, 1).is_err());
        assert!(project_to_vocab(&m, 0, 48, 1).is_err());
        assert!(project_to_vocab(&m, 0, 0, 259).is_err());
    }
}
