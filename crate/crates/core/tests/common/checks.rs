//! Measurements shared by the topical suites and the acceptance target.

use hotfield::gp::{CovarianceFactor, KernelParams};
use hotfield::harness::generate_synthetic;
use hotfield::inference::{ess_step, mh_update_theta, McmcConfig};
use hotfield::tdp::{sample_factor_field, TDPState, ThetaPrior};
use hotfield::{Order, SymmetricHOT};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{batch_mean, ks_pvalue, normal_cdf};

/// KS p-value of thinned ESS draws of a 1D latent with a flat likelihood
/// against the `N(0, var)` prior.
pub fn ess_flat_likelihood_ks(seed: u64, var: f64) -> f64 {
    let prior = CovarianceFactor::from_lower(DMatrix::from_element(1, 1, var.sqrt()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_element(1, 0.0);
    let mut kept = Vec::with_capacity(5000);
    for it in 0..50_000 {
        x = ess_step(&x, 0.0, &prior, |_| 0.0, &mut rng).unwrap().0;
        if it % 10 == 9 {
            kept.push(x[0]);
        }
    }
    ks_pvalue(&kept, |v| normal_cdf(v, 0.0, var.sqrt()))
}

/// Chain estimate against the closed form for one coordinate of a
/// Gaussian-Gaussian model.
#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    pub mean: f64,
    pub mean_se: f64,
    pub exact_mean: f64,
    pub var: f64,
    pub var_se: f64,
    pub exact_var: f64,
}

impl MomentCheck {
    pub fn within(&self, n_se: f64) -> bool {
        (self.mean - self.exact_mean).abs() <= n_se * self.mean_se
            && (self.var - self.exact_var).abs() <= n_se * self.var_se
    }
}

/// ESS on a 2D latent with a correlated prior and a Gaussian likelihood
/// `y ~ N(x, s² I)`.
pub fn ess_conjugate_moments(seed: u64) -> Vec<MomentCheck> {
    let prior_cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
    let y = DVector::from_vec(vec![1.5, -0.8]);
    let s2 = 0.5;
    let prior = CovarianceFactor::from_lower(prior_cov.clone().cholesky().unwrap().l());
    let loglik = |x: &DVector<f64>| -(x - &y).norm_squared() / (2.0 * s2);

    let precision = prior_cov.try_inverse().unwrap() + DMatrix::identity(2, 2) / s2;
    let post_cov = precision.try_inverse().unwrap();
    let post_mean = &post_cov * &y / s2;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::zeros(2);
    let mut ll = loglik(&x);
    let mut draws = vec![Vec::new(), Vec::new()];
    for it in 0..101_000 {
        (x, ll) = ess_step(&x, ll, &prior, loglik, &mut rng).unwrap();
        if it >= 1000 {
            draws[0].push(x[0]);
            draws[1].push(x[1]);
        }
    }
    (0..2)
        .map(|d| {
            let (mean, mean_se) = batch_mean(&draws[d], 50);
            let sq: Vec<f64> = draws[d].iter().map(|v| (v - post_mean[d]).powi(2)).collect();
            let (var, var_se) = batch_mean(&sq, 50);
            MomentCheck {
                mean,
                mean_se,
                exact_mean: post_mean[d],
                var,
                var_se,
                exact_var: post_cov[(d, d)],
            }
        })
        .collect()
}

/// Posterior median of `θ` from the length-scale move alone, with the factor
/// field fixed at the one that generated a seeded 16×16 synthetic field at
/// `θ = 0.1`.
pub fn theta_recovery_median(seed: u64) -> f64 {
    let truth = generate_synthetic(Order::new(2).unwrap(), 16, 16, 0.1, 1.0, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_values = sample_factor_field(truth.sites(), &KernelParams::new(0.1), &mut rng).unwrap();
    let prior = ThetaPrior::default();
    let mut state = TDPState {
        a_values,
        core: SymmetricHOT::isotropic(truth.order()),
        theta: prior.median() * 3.0,
        sigma2: 0.01,
        c2: 1.0,
    };
    let cfg = McmcConfig {
        mh_step_theta: 0.1,
        ..Default::default()
    };
    let mut thetas = Vec::new();
    for it in 0..1500 {
        state = mh_update_theta(&state, truth.sites(), &cfg, &prior, &mut rng).unwrap().0;
        if it >= 500 {
            thetas.push(state.theta);
        }
    }
    thetas.sort_by(f64::total_cmp);
    thetas[thetas.len() / 2]
}

/// Largest deviations of the library's Frobenius distance, diffusivity and
/// Tucker reconstruction (dense and fast) from the full-array oracles over
/// `n` random cases per rank.
pub fn oracle_deviation(n: usize, seed: u64) -> [f64; 3] {
    use hotfield::hotensor::{evaluate_diffusivity, frobenius_distance, symmetric_tucker, tucker_reconstruct};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    for l in super::ORDERS {
        let o = Order::new(l).unwrap();
        for _ in 0..n {
            let (a, b) = (super::random_tensor(o, &mut rng), super::random_tensor(o, &mut rng));
            let err = (frobenius_distance(&a, &b).unwrap() - super::frobenius_oracle(&a, &b)).abs();
            worst[0] = worst[0].max(err);

            let g = super::random_unit(&mut rng);
            let err = (evaluate_diffusivity(&a, &g).unwrap() - super::diffusivity_oracle(&a, &g)).abs();
            worst[1] = worst[1].max(err);

            let m = super::random_matrix(&mut rng);
            let expected = super::tucker_oracle(&a, &m);
            let dense = tucker_reconstruct(&a, &DMatrix::from_column_slice(3, 3, m.as_slice())).unwrap();
            let fast = symmetric_tucker(&a, &m);
            for ((d, f), e) in dense.coeffs().iter().zip(fast.coeffs()).zip(&expected) {
                worst[2] = worst[2].max((d - e).abs()).max((f - e).abs());
            }
        }
    }
    worst
}

/// Conditioning at the training sites with jitter 1e-10: largest mean error
/// and largest predictive variance over random 5-point problems.
pub fn gp_training_exactness(seed: u64) -> (f64, f64) {
    use hotfield::gp::gp_conditional;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean_err, mut var) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let sites: Vec<[f64; 2]> = (0..5).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let f = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let p = KernelParams::new(0.1).with_jitter(1e-10);
        let c = gp_conditional(&sites, &f, &sites, &p).unwrap();
        mean_err = mean_err.max((&c.mean - &f).abs().max());
        var = var.max(c.variances().abs().max());
    }
    (mean_err, var)
}

/// Largest deviation of gp_conditional from conditioning through an explicit
/// inverse over random 5-point problems with 5 query sites.
pub fn gp_dense_oracle_deviation(seed: u64) -> f64 {
    use hotfield::gp::gp_conditional;
    use rand::Rng;
    let se = |a: &[f64; 2], b: &[f64; 2], t: f64| {
        (-((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)) / (2.0 * t * t)).exp()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut pts = |n: usize| -> Vec<[f64; 2]> {
            (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect()
        };
        let (train, query) = (pts(5), pts(5));
        let f = DVector::from_fn(5, |_, _| rng.gen_range(-2.0..2.0));
        let theta = rng.gen_range(0.2..0.6);
        let p = KernelParams::new(theta);
        let k = DMatrix::from_fn(5, 5, |i, j| se(&train[i], &train[j], theta) + if i == j { p.jitter } else { 0.0 });
        let ks = DMatrix::from_fn(5, 5, |i, j| se(&train[i], &query[j], theta));
        let kss = DMatrix::from_fn(5, 5, |i, j| se(&query[i], &query[j], theta));
        let k_inv = k.try_inverse().unwrap();
        let mean = ks.transpose() * &k_inv * &f;
        let cov = kss - ks.transpose() * &k_inv * &ks;
        let got = gp_conditional(&train, &f, &query, &p).unwrap();
        worst = worst.max((got.mean - mean).abs().max()).max((got.cov - cov).abs().max());
    }
    worst
}

/// A diffusion-scale tensor (mm²/s) from a simulated two-fibre acquisition.
pub fn realistic_tensor(order: Order, rng: &mut ChaCha8Rng) -> SymmetricHOT {
    hotfield::harness::simulated_dmri_core(order, 1.0, rng).unwrap().scaled(1e-3)
}

/// Largest coefficient error of synthesize → fit over `n` tensors with 90
/// hemisphere directions at b = 1000.
pub fn stejskal_tanner_round_trip(order: usize, n: usize, seed: u64) -> f64 {
    use hotfield::stfit::{fibonacci_hemisphere, fit_hot, synthesize, GradientScheme};
    let o = Order::new(order).unwrap();
    let scheme = GradientScheme::new(fibonacci_hemisphere(90), 1000.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let t = realistic_tensor(o, &mut rng);
        let fit = fit_hot(&synthesize(&t, &scheme), &scheme, o).unwrap();
        for (a, b) in fit.coeffs().iter().zip(t.coeffs()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn indefinite_pair() -> hotfield::TensorField {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/indefinite_pair.field");
    hotfield::dataio::read_field_file(&path).unwrap()
}

/// Smallest eigenvalue of the direct and log-Euclidean midpoints of the
/// bundled indefinite pair.
pub fn indefinite_midpoint_eigenvalues() -> (f64, f64) {
    use hotfield::baselines::{direct_interpolate, log_euclidean_interpolate};
    let field = indefinite_pair();
    let mid = [0.5, 0.5];
    let min_eig = |t: SymmetricHOT| t.to_matrix().unwrap().symmetric_eigen().eigenvalues.min();
    (
        min_eig(direct_interpolate(&field, &mid).unwrap()),
        min_eig(log_euclidean_interpolate(&field, &mid).unwrap()),
    )
}

/// Largest deviation of the log-Euclidean midpoint of random diagonal SPD
/// pairs from `diag(√(aᵢ bᵢ))`.
pub fn log_euclidean_diagonal_deviation(seed: u64) -> f64 {
    use hotfield::baselines::log_euclidean_interpolate;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.05..5.0));
        let b: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.05..5.0));
        let (ta, tb) = (super::diag(a[0], a[1], a[2]), super::diag(b[0], b[1], b[2]));
        let field = hotfield::TensorField::unit_grid(
            Order::new(2).unwrap(),
            2,
            2,
            vec![ta.clone(), tb.clone(), ta, tb],
        )
        .unwrap();
        let m = log_euclidean_interpolate(&field, &[0.5, rng.gen_range(0.0..1.0)])
            .unwrap()
            .to_matrix()
            .unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { (a[r] * b[r]).sqrt() } else { 0.0 };
                worst = worst.max((m[(r, c)] - want).abs());
            }
        }
    }
    worst
}

/// Largest deviation of direct interpolation from the data at the nodes of a
/// seeded synthetic field.
pub fn direct_node_deviation(order: usize, seed: u64) -> f64 {
    use hotfield::baselines::direct_interpolate_all;
    let field = generate_synthetic(Order::new(order).unwrap(), 6, 5, 0.2, 1.0, seed).unwrap();
    let pred = direct_interpolate_all(&field, field.sites()).unwrap();
    pred.iter()
        .zip(field.tensors())
        .flat_map(|(p, t)| p.coeffs().iter().zip(t.coeffs()).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}
