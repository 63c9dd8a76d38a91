//! Marginal statistics of the planted-record generator.

use truthv::select::{score_probes, Pattern};
use truthv::synth::{gen_records, PlantSpec, PlantedProbe};
use truthv::{ProbeId, ProbeKind};

fn spec(reliability: f64, m: usize, n_items: usize, seed: u64) -> PlantSpec {
    PlantSpec {
        name: "stats".into(),
        planted_probes: vec![
            PlantedProbe { probe: ProbeId::mlp_key(0, 0), pattern: Pattern::Argmax, reliability },
            PlantedProbe { probe: ProbeId::mlp_key(0, 1), pattern: Pattern::Argmin, reliability },
        ],
        noise_probe_count: 3,
        n_items,
        m_candidates: m,
        baseline_spread: 0.5,
        seed,
        layer_width: 10,
        noise_kind: ProbeKind::MlpKey,
    }
}

#[test]
fn noise_probes_sit_at_chance() {
    let (r, _) = gen_records(&spec(1.0, 4, 10_000, 1)).unwrap();
    for s in score_probes(&r, Pattern::Argmax).unwrap().iter().filter(|s| s.probe.index >= Some(2)) {
        assert!((s.accuracy() - 0.25).abs() <= 0.02, "{} {}", s.probe, s.accuracy());
    }
}

#[test]
fn plant_accuracy_tracks_reliability() {
    for (q, m, seed) in [(0.9, 4, 2), (0.6, 3, 3), (0.3, 2, 4)] {
        let n = 4000;
        let (r, _) = gen_records(&spec(q, m, n, seed)).unwrap();
        let sigma = (q * (1.0 - q) / n as f64).sqrt();
        let max = score_probes(&r, Pattern::Argmax).unwrap();
        let min = score_probes(&r, Pattern::Argmin).unwrap();
        for (scores, idx) in [(&max, 0), (&min, 1)] {
            let s = scores.iter().find(|s| s.probe == ProbeId::mlp_key(0, idx)).unwrap();
            assert!((s.accuracy() - q).abs() <= 3.0 * sigma, "q={q} {}: {}", s.probe, s.accuracy());
        }
    }
}
