#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reintel::models::{zeros_like, Classifier};

/// Pairwise AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half. Quadratic, used only as a reference.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0usize;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs as f64
}

pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    pub rel_error: f64,
}

const STEP: f64 = 1e-5;
const NORM_FLOOR: f64 = 1e-9;

/// Compares analytic gradients with central differences on up to `per_group`
/// coordinates of every tensor. Half the coordinates are the largest analytic
/// entries, half are drawn at random. Dropout is active and replayed from
/// `dropout_seed` for every evaluation.
pub fn gradcheck<C: Classifier>(
    model: &C,
    input: &C::Input,
    label: usize,
    dropout_seed: u64,
    per_group: usize,
) -> Vec<GroupCheck> {
    let dropout = ChaCha8Rng::seed_from_u64(dropout_seed);
    let loss_at = |m: &C| {
        let mut scratch = zeros_like(m);
        m.accumulate_gradient(input, label, Some(&mut dropout.clone()), &mut scratch)
            .expect("loss")
    };
    let mut grads = zeros_like(model);
    model
        .accumulate_gradient(input, label, Some(&mut dropout.clone()), &mut grads)
        .expect("gradient");

    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();
    let mut pick = ChaCha8Rng::seed_from_u64(dropout_seed ^ 0x9e37);
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (gi, (name, g)) in analytic.iter().enumerate() {
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()));
        let mut coords: Vec<usize> = order.iter().take(per_group / 2).copied().collect();
        let mut rest: Vec<usize> = order[coords.len()..].to_vec();
        rest.shuffle(&mut pick);
        coords.extend(rest.into_iter().take(per_group - coords.len()));

        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for &c in &coords {
            let orig = probe.tensors()[gi].1.data()[c];
            probe.tensors_mut()[gi].1.data_mut()[c] = orig + STEP;
            let up = loss_at(&probe);
            probe.tensors_mut()[gi].1.data_mut()[c] = orig - STEP;
            let down = loss_at(&probe);
            probe.tensors_mut()[gi].1.data_mut()[c] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            diff2 += (g[c] - numeric).powi(2);
            a2 += g[c] * g[c];
            n2 += numeric * numeric;
        }
        let scale = a2.sqrt().max(n2.sqrt());
        let rel_error = if scale < NORM_FLOOR { 0.0 } else { diff2.sqrt() / scale };
        out.push(GroupCheck {
            name: name.clone(),
            checked: coords.len(),
            rel_error,
        });
    }
    out
}
