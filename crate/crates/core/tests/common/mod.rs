//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use truthv::records::{ItemRecord, ProbeRecordSet, ValueMatrix};
use truthv::ProbeId;

/// Brute-force per-probe correct counts: the first index holding the
/// extreme value is the pick.
pub fn brute_force_correct(records: &ProbeRecordSet, argmax: bool) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for col in 0..records.n_probes() {
        let mut correct = 0u64;
        let mut n = 0u64;
        for item in records.items() {
            let mut best = 0usize;
            for r in 1..item.values.rows() {
                let v = item.values.get(r, col);
                let b = item.values.get(best, col);
                if (argmax && v > b) || (!argmax && v < b) {
                    best = r;
                }
            }
            if Some(best) == item.label {
                correct += 1;
            }
            n += 1;
        }
        out.push((correct, n));
    }
    out
}

/// Random labeled records. With `levels = Some(k)` values are drawn from
/// `k` integers so ties occur; otherwise they are continuous.
pub fn random_records(
    n_items: usize,
    m: usize,
    n_probes: usize,
    levels: Option<u32>,
    seed: u64,
) -> ProbeRecordSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<ProbeId> = (0..n_probes).map(|i| ProbeId::mlp_key(i / 100, i % 100)).collect();
    let items = (0..n_items)
        .map(|i| {
            let data = (0..m * n_probes)
                .map(|_| match levels {
                    Some(k) => rng.random_range(0..k) as f64,
                    None => rng.random_range(-1.0..1.0),
                })
                .collect();
            ItemRecord {
                item_id: format!("it{i:05}"),
                label: Some(rng.random_range(0..m)),
                values: ValueMatrix::new(m, n_probes, data).unwrap(),
            }
        })
        .collect();
    ProbeRecordSet::new("rand", probes, items).unwrap()
}

/// `P(X >= k)` for `X ~ Binomial(n, q)`, by enumeration.
pub fn binomial_tail(n: u64, q: f64, k: u64) -> f64 {
    let mut total = 0.0;
    for j in k..=n {
        let mut c = 1.0f64;
        for t in 0..j {
            c = c * (n - t) as f64 / (t + 1) as f64;
        }
        total += c * q.powi(j as i32) * (1.0 - q).powi((n - j) as i32);
    }
    total
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_truthv")
}

/// Runs the binary in `dir` with the given thread override.
pub fn truthv(dir: &Path, threads: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.current_dir(dir).args(args).env_remove("TRUTHV_THREADS");
    if let Some(t) = threads {
        cmd.env("TRUTHV_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

pub fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}
