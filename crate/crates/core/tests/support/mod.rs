//! Reference implementations used as oracles. None of these call into the
//! code paths they are compared against.

#![allow(dead_code)]

use bob_url::dataset::Label;
use bob_url::nn::{Matrix, MlpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Histogram read off the input as a bit string: one byte window at every
/// bit offset `8k` (n windows) and at every offset `8k + 4` that still fits
/// (n - 1 windows).
pub fn bit_window_histogram(bytes: &[u8]) -> [u64; 256] {
    let bits: Vec<u8> = bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect();
    let mut counts = [0u64; 256];
    let mut offset = 0;
    while offset + 8 <= bits.len() {
        let value = bits[offset..offset + 8].iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize);
        counts[value] += 1;
        offset += 4;
    }
    counts
}

pub fn random_bytes(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<u8> {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| rng.random::<u8>()).collect()
}

/// Dense `W x + b` with explicit loops over every input.
fn dense(weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let in_dim = x.len();
    (0..bias.len())
        .map(|o| {
            let mut acc = bias[o];
            for i in 0..in_dim {
                acc += weights[o * in_dim + i] * x[i];
            }
            acc
        })
        .collect()
}

/// Pre-activations of both hidden layers and the logits for one sample, eval mode.
pub fn reference_forward(params: &[Vec<f64>; 6], x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let relu = |v: &[f64]| v.iter().map(|&a| if a > 0.0 { a } else { 0.0 }).collect::<Vec<_>>();
    let pre1 = dense(&params[0], &params[1], x);
    let pre2 = dense(&params[2], &params[3], &relu(&pre1));
    let logits = dense(&params[4], &params[5], &relu(&pre2));
    (pre1, pre2, logits)
}

/// Mean `-log softmax(logits)[label]` computed as a log-sum-exp.
pub fn reference_loss(params: &[Vec<f64>; 6], batch: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let (_, _, z) = reference_forward(params, batch.row(r));
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[label];
    }
    total / labels.len() as f64
}

pub fn owned_params(model: &MlpModel) -> [Vec<f64>; 6] {
    let p = model.parameters();
    [p[0].to_vec(), p[1].to_vec(), p[2].to_vec(), p[3].to_vec(), p[4].to_vec(), p[5].to_vec()]
}

/// Central finite differences of [`reference_loss`] for every parameter.
pub fn numeric_gradient(model: &MlpModel, batch: &Matrix, labels: &[usize], step: f64) -> [Vec<f64>; 6] {
    let base = owned_params(model);
    let mut out: [Vec<f64>; 6] = Default::default();
    for group in 0..6 {
        out[group] = (0..base[group].len())
            .map(|i| {
                let mut plus = base.clone();
                plus[group][i] += step;
                let mut minus = base.clone();
                minus[group][i] -= step;
                (reference_loss(&plus, batch, labels) - reference_loss(&minus, batch, labels)) / (2.0 * step)
            })
            .collect();
    }
    out
}

/// Smallest |pre-activation| over the batch; finite differences straddling a
/// ReLU kink are meaningless, so callers skip cases where this is tiny.
pub fn min_abs_preactivation(model: &MlpModel, batch: &Matrix) -> f64 {
    let params = owned_params(model);
    (0..batch.rows())
        .flat_map(|r| {
            let (p1, p2, _) = reference_forward(&params, batch.row(r));
            p1.into_iter().chain(p2)
        })
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min)
}

/// Relative error with the denominator floored at `floor`, so entries whose
/// true value is ~0 are judged on absolute error `rel_tol * floor`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)` by comparing every positive/negative pair.
pub fn pair_auc(scores: &[(f64, Label)]) -> f64 {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1 == Label::Malicious).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| s.1 == Label::Benign).map(|s| s.0).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Random scored samples with at least one of each class. Scores are drawn
/// from a coarse grid so ties are common.
pub fn random_scores(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<(f64, Label)> {
    let n = rng.random_range(2..=max_len);
    let grid = rng.random_range(2..=50) as f64;
    let mut scores: Vec<(f64, Label)> = (0..n)
        .map(|_| {
            let s = (rng.random::<f64>() * grid).floor() / grid;
            let l = if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign };
            (s, l)
        })
        .collect();
    scores[0].1 = Label::Malicious;
    scores[1].1 = Label::Benign;
    scores
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
