//! Gaussian-process machinery over 2D sites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hotensor::Site;

pub const DEFAULT_JITTER: f64 = 1e-8;
/// Largest diagonal jitter tried before a factorization is reported failed.
pub const MAX_JITTER: f64 = 1e-4;

/// Squared-exponential kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub jitter: f64,
}

impl KernelParams {
    /// Unit signal variance and the default jitter.
    pub fn new(length_scale: f64) -> Self {
        Self {
            length_scale,
            signal_variance: 1.0,
            jitter: DEFAULT_JITTER,
        }
    }

    pub fn with_jitter(self, jitter: f64) -> Self {
        Self { jitter, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "length scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.signal_variance > 0.0) || !(self.jitter > 0.0) {
            return Err(Error::InvalidConfig(
                "signal variance and jitter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `σ_f² exp(−‖z1 − z2‖² / 2θ²)`
pub fn kernel_eval(z1: &Site, z2: &Site, p: &KernelParams) -> f64 {
    let dx = z1[0] - z2[0];
    let dy = z1[1] - z2[1];
    p.signal_variance * (-(dx * dx + dy * dy) / (2.0 * p.length_scale * p.length_scale)).exp()
}

/// Gram matrix over `sites` with `p.jitter` on the diagonal.
pub fn covariance_matrix(sites: &[Site], p: &KernelParams) -> DMatrix<f64> {
    let n = sites.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = p.signal_variance + p.jitter;
        for j in 0..i {
            let v = kernel_eval(&sites[i], &sites[j], p);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `K[i][j] = k(a_i, b_j)` without jitter.
pub fn cross_covariance(a: &[Site], b: &[Site], p: &KernelParams) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| kernel_eval(&a[i], &b[j], p))
}

/// Cholesky factor `L` with `L Lᵀ = K`. Only the lower triangle of `k` is read.
pub fn factor_psd(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            n,
            k.ncols()
        )));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = k[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = k[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Cholesky factor of a covariance together with the jitter it needed.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CovarianceFactor {
    /// Factors `covariance_matrix(sites, p)`, raising the jitter tenfold on
    /// failure until [`MAX_JITTER`].
    pub fn new(sites: &[Site], p: &KernelParams) -> Result<Self> {
        p.validate()?;
        let mut jitter = p.jitter;
        loop {
            let k = covariance_matrix(sites, &p.with_jitter(jitter));
            match factor_psd(&k) {
                Ok(lower) => return Ok(Self { lower, jitter }),
                Err(e) if jitter * 10.0 > MAX_JITTER * (1.0 + 1e-9) => return Err(e),
                Err(_) => {
                    log::debug!("covariance factorization failed at jitter {jitter:e}; escalating");
                    jitter *= 10.0;
                }
            }
        }
    }

    pub fn from_lower(lower: DMatrix<f64>) -> Self {
        Self { lower, jitter: 0.0 }
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log |K|`
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `L⁻¹ b`
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lower
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `K⁻¹ b`
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let w = self.whiten(b);
        self.lower
            .tr_solve_lower_triangular(&w)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `bᵀ K⁻¹ b`
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        self.whiten(b).norm_squared()
    }

    /// Zero-mean Gaussian log-density of `x` under this covariance.
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let n = self.dim() as f64;
        -0.5 * (self.quad_form(x) + self.log_det() + n * (2.0 * std::f64::consts::PI).ln())
    }

    /// `L ε` for standard normal `ε`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.lower * eps
    }
}

/// One draw from the zero-mean GP prior at `sites`.
pub fn sample_gp_prior<R: Rng + ?Sized>(
    sites: &[Site],
    p: &KernelParams,
    rng: &mut R,
) -> Result<DVector<f64>> {
    Ok(CovarianceFactor::new(sites, p)?.sample(rng))
}

/// Predictive Gaussian at query sites.
#[derive(Debug, Clone)]
pub struct GPConditional {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GPConditional {
    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal()
    }
}

/// Exact conditioning of the noise-free GP on `f_train` at `z_train`.
/// The jitter only regularizes the training covariance.
pub fn gp_conditional(
    z_train: &[Site],
    f_train: &DVector<f64>,
    z_star: &[Site],
    p: &KernelParams,
) -> Result<GPConditional> {
    if f_train.len() != z_train.len() {
        return Err(Error::SiteCountMismatch {
            expected: z_train.len(),
            found: f_train.len(),
        });
    }
    let factor = CovarianceFactor::new(z_train, p)?;
    let k_star = cross_covariance(z_train, z_star, p);
    let alpha = factor.solve(f_train);
    let mean = k_star.transpose() * alpha;
    let v = factor
        .lower()
        .solve_lower_triangular(&k_star)
        .expect("Cholesky factor has a positive diagonal");
    let mut cov = cross_covariance(z_star, z_star, p) - v.transpose() * v;
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(GPConditional { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        let p = KernelParams::new(0.3);
        assert_eq!(kernel_eval(&[0.2, 0.4], &[0.2, 0.4], &p), 1.0);
        let v = kernel_eval(&[0.0, 0.0], &[0.3, 0.0], &p);
        assert_relative_eq!(v, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(v, 0.6065306597126334, epsilon = 1e-15);
        assert_eq!(
            kernel_eval(&[0.1, 0.7], &[0.5, 0.2], &p),
            kernel_eval(&[0.5, 0.2], &[0.1, 0.7], &p)
        );
    }

    #[test]
    fn single_point_and_separated_points() {
        let p = KernelParams::new(0.1);
        let k = covariance_matrix(&[[0.3, 0.3]], &p);
        assert_eq!(k[(0, 0)], 1.0 + DEFAULT_JITTER);
        let k = covariance_matrix(&[[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]], &p);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(k[(i, j)] < 1e-300);
                }
            }
        }
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(factor_psd(&DMatrix::identity(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let k = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let l = factor_psd(&k).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            factor_psd(&bad),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn random_five_points_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sites: Vec<Site> = (0..5).map(|_| [rng.gen(), rng.gen()]).collect();
        let k = covariance_matrix(&sites, &KernelParams::new(0.2));
        let l = factor_psd(&k).unwrap();
        let err = (&l * l.transpose() - &k).norm() / k.norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn jitter_escalates_on_duplicate_sites() {
        // Identical sites make K singular up to the jitter.
        let sites = vec![[0.5, 0.5]; 40];
        let f = CovarianceFactor::new(&sites, &KernelParams::new(0.1).with_jitter(1e-16)).unwrap();
        assert!(f.jitter() > 1e-16);
        assert!(f.jitter() <= MAX_JITTER);
    }

    #[test]
    fn prior_draws_are_deterministic() {
        let sites = [[0.0, 0.0], [0.3, 0.1], [0.9, 0.4]];
        let p = KernelParams::new(0.2);
        let a = sample_gp_prior(&sites, &p, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_gp_prior(&sites, &p, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditional_reverts_to_prior_far_away() {
        let p = KernelParams::new(0.1);
        let z = [[0.0, 0.0], [0.1, 0.0]];
        let f = DVector::from_vec(vec![1.5, -0.3]);
        let c = gp_conditional(&z, &f, &[[10.0, 10.0]], &p).unwrap();
        assert!(c.mean[0].abs() < 1e-12);
        assert_relative_eq!(c.cov[(0, 0)], 1.0, epsilon = 1e-12);
        assert!(gp_conditional(&z, &DVector::zeros(3), &[[0.0, 1.0]], &p).is_err());
    }
}
