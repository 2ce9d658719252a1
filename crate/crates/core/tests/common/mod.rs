//! Brute-force oracles over the full `3^l` index space and shared fixtures.
//!
//! Nothing here goes through the unique-coefficient fast paths of the
//! library; every tensor is materialized entry by entry.

#![allow(dead_code)]

pub mod checks;

use hotfield::hotensor::enumerate_unique;
use hotfield::{Order, SymmetricHOT};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ORDERS: [usize; 3] = [2, 4, 6];

/// Every index tuple of length `l` over `{0, 1, 2}`, first index slowest.
pub fn all_indices(l: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..l {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..3).map(move |i| {
                    let mut v = prefix.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    out
}

/// Entry `T[indices]`, found by counting axes and scanning the unique list.
pub fn entry(t: &SymmetricHOT, indices: &[usize]) -> f64 {
    let mut counts = [0usize; 3];
    for &i in indices {
        counts[i] += 1;
    }
    let triples = enumerate_unique(t.order().get()).unwrap();
    let pos = triples
        .iter()
        .position(|e| e.i == counts[0] && e.j == counts[1] && e.k == counts[2])
        .unwrap();
    t.coeffs()[pos]
}

/// Dense array in the same flat layout as [`all_indices`].
pub fn dense(t: &SymmetricHOT) -> Vec<f64> {
    all_indices(t.order().get())
        .iter()
        .map(|idx| entry(t, idx))
        .collect()
}

pub fn frobenius_oracle(a: &SymmetricHOT, b: &SymmetricHOT) -> f64 {
    dense(a)
        .iter()
        .zip(dense(b))
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `Σ_{i1..il} T[i1..il] g[i1] ⋯ g[il]`
pub fn diffusivity_oracle(t: &SymmetricHOT, g: &Vector3<f64>) -> f64 {
    all_indices(t.order().get())
        .iter()
        .map(|idx| entry(t, idx) * idx.iter().map(|&i| g[i]).product::<f64>())
        .sum()
}

/// `T'[i1..il] = Σ_{j1..jl} A[i1 j1] ⋯ A[il jl] D[j1..jl]`, read back at one
/// representative index per unique component.
pub fn tucker_oracle(core: &SymmetricHOT, a: &Matrix3<f64>) -> Vec<f64> {
    let l = core.order().get();
    let all = all_indices(l);
    let d = dense(core);
    enumerate_unique(l)
        .unwrap()
        .iter()
        .map(|e| {
            let rep: Vec<usize> = std::iter::repeat(0)
                .take(e.i)
                .chain(std::iter::repeat(1).take(e.j))
                .chain(std::iter::repeat(2).take(e.k))
                .collect();
            all.iter()
                .zip(&d)
                .map(|(js, dv)| {
                    rep.iter().zip(js).map(|(&i, &j)| a[(i, j)]).product::<f64>() * dv
                })
                .sum()
        })
        .collect()
}

pub fn random_tensor(order: Order, rng: &mut ChaCha8Rng) -> SymmetricHOT {
    let coeffs = (0..order.n_unique()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SymmetricHOT::new(order, coeffs).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn rank2(m: [[f64; 3]; 3]) -> SymmetricHOT {
    SymmetricHOT::from_matrix(&Matrix3::from_fn(|r, c| m[r][c]))
}

pub fn diag(a: f64, b: f64, c: f64) -> SymmetricHOT {
    rank2([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
}

/// Two-sided Kolmogorov–Smirnov p-value of `sample` against `cdf`.
pub fn ks_pvalue(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = cdf(*v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    kolmogorov_survival((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d)
}

fn kolmogorov_survival(t: f64) -> f64 {
    if t < 1e-3 {
        return 1.0;
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * t * t).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Mean and its standard error from non-overlapping batch means.
pub fn batch_mean(x: &[f64], batches: usize) -> (f64, f64) {
    let size = x.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

/// Total-variation distance between binned samples and bin probabilities.
pub fn total_variation(sample: &[f64], edges: &[f64], probs: &[f64]) -> f64 {
    let mut counts = vec![0usize; probs.len()];
    let mut outside = 0usize;
    for v in sample {
        match edges.windows(2).position(|w| *v >= w[0] && *v < w[1]) {
            Some(b) => counts[b] += 1,
            None => outside += 1,
        }
    }
    let n = sample.len() as f64;
    let inside: f64 = counts
        .iter()
        .zip(probs)
        .map(|(c, p)| (*c as f64 / n - p).abs())
        .sum();
    let mass_outside = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    0.5 * (inside + (outside as f64 / n - mass_outside).abs())
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(mean, sd).unwrap().cdf(x)
}
