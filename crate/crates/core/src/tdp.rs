//! The Tucker decomposition process.
//!
//! A field `T(z) = 𝒟 ×₁ A(z) ×₂ ⋯ ×ₗ A(z)` with a symmetric core `𝒟` whose
//! unique elements are i.i.d. `N(0, c²)` and a 3×3 factor `A(z)` whose nine
//! entries are independent zero-mean GPs over the site coordinates.
//!
//! The factor columns are not normalized. Scaling every `A(z)` by `s` and the
//! core by `s^-l` leaves the field unchanged, so only the product is
//! identified by the data; the priors pin the scale.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::{CovarianceFactor, KernelParams};
use crate::hotensor::{symmetric_tucker, Order, Site, SymmetricHOT, TensorField};

/// Number of GP latents per site (entries of the 3×3 factor).
pub const N_LATENTS: usize = 9;

pub const DEFAULT_SIGMA2: f64 = 0.01;
pub const DEFAULT_C2: f64 = 1.0;

/// Log-normal prior on the kernel length-scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPrior {
    pub log_mean: f64,
    pub log_sd: f64,
}

impl Default for ThetaPrior {
    /// Median 0.1, log-sd 1.
    fn default() -> Self {
        Self {
            log_mean: 0.1f64.ln(),
            log_sd: 1.0,
        }
    }
}

impl ThetaPrior {
    pub fn median(&self) -> f64 {
        self.log_mean.exp()
    }

    /// Log-density of `theta`; `-inf` outside the support.
    pub fn log_density(&self, theta: f64) -> f64 {
        if !(theta > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = (theta.ln() - self.log_mean) / self.log_sd;
        -theta.ln() - self.log_sd.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
    }
}

/// All latent variables and fixed hyperparameters of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct TDPState {
    /// `A(z_i)` for every training site.
    pub a_values: Vec<Matrix3<f64>>,
    pub core: SymmetricHOT,
    pub theta: f64,
    pub sigma2: f64,
    pub c2: f64,
}

impl TDPState {
    pub fn order(&self) -> Order {
        self.core.order()
    }

    pub fn n_sites(&self) -> usize {
        self.a_values.len()
    }

    /// Values of factor entry `j = 3 r + c` across all sites.
    pub fn latent(&self, j: usize) -> DVector<f64> {
        let (r, c) = (j / 3, j % 3);
        DVector::from_iterator(self.a_values.len(), self.a_values.iter().map(|a| a[(r, c)]))
    }

    pub fn set_latent(&mut self, j: usize, values: &DVector<f64>) {
        let (r, c) = (j / 3, j % 3);
        for (a, v) in self.a_values.iter_mut().zip(values.iter()) {
            a[(r, c)] = *v;
        }
    }

    /// Flat `u` vector, site-major with each `A(z_i)` row-major.
    pub fn latent_vector(&self) -> DVector<f64> {
        to_latent_vector(&self.a_values)
    }

    pub fn reconstruct_at(&self, a: &Matrix3<f64>) -> SymmetricHOT {
        reconstruct_at(self, a)
    }

    /// Reconstructed tensor at every training site.
    pub fn reconstruct_all(&self) -> Vec<SymmetricHOT> {
        self.a_values
            .iter()
            .map(|a| symmetric_tucker(&self.core, a))
            .collect()
    }
}

pub fn to_latent_vector(a_values: &[Matrix3<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        a_values.len() * N_LATENTS,
        a_values
            .iter()
            .flat_map(|a| (0..N_LATENTS).map(move |j| a[(j / 3, j % 3)])),
    )
}

pub fn from_latent_vector(u: &DVector<f64>) -> Result<Vec<Matrix3<f64>>> {
    if u.len() % N_LATENTS != 0 {
        return Err(Error::DimensionMismatch(format!(
            "latent vector length {} is not a multiple of {N_LATENTS}",
            u.len()
        )));
    }
    Ok(u.as_slice()
        .chunks_exact(N_LATENTS)
        .map(Matrix3::from_row_slice)
        .collect())
}

/// `𝒟 ×₁ A ×₂ ⋯ ×ₗ A` for the state's core.
pub fn reconstruct_at(state: &TDPState, a: &Matrix3<f64>) -> SymmetricHOT {
    symmetric_tucker(&state.core, a)
}

/// One joint draw of factors, core and tensors from the prior.
#[derive(Debug, Clone)]
pub struct PriorDraw {
    pub a_values: Vec<Matrix3<f64>>,
    pub core: SymmetricHOT,
    pub tensors: Vec<SymmetricHOT>,
}

/// Draws the nine factor latents (in entry order), then the core.
/// Draws the nine latent GPs at `sites`, `A(z_i)[r][c]` taking latent `3r + c`.
pub fn sample_factor_field<R: Rng + ?Sized>(
    sites: &[Site],
    p: &KernelParams,
    rng: &mut R,
) -> Result<Vec<Matrix3<f64>>> {
    let factor = CovarianceFactor::new(sites, p)?;
    let mut a_values = vec![Matrix3::zeros(); sites.len()];
    for j in 0..N_LATENTS {
        let draw = factor.sample(rng);
        for (a, v) in a_values.iter_mut().zip(draw.iter()) {
            a[(j / 3, j % 3)] = *v;
        }
    }
    Ok(a_values)
}

pub fn sample_prior<R: Rng + ?Sized>(
    sites: &[Site],
    order: Order,
    p: &KernelParams,
    c2: f64,
    rng: &mut R,
) -> Result<PriorDraw> {
    if !(c2 >= 0.0) {
        return Err(Error::InvalidConfig(format!("core variance must be >= 0, got {c2}")));
    }
    let a_values = sample_factor_field(sites, p, rng)?;
    let sd = c2.sqrt();
    let coeffs = (0..order.n_unique())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let core = SymmetricHOT::new(order, coeffs)?;
    let tensors = a_values.iter().map(|a| symmetric_tucker(&core, a)).collect();
    Ok(PriorDraw {
        a_values,
        core,
        tensors,
    })
}

/// Prior sample on the `nx × ny` unit grid.
pub fn sample_prior_field<R: Rng + ?Sized>(
    nx: usize,
    ny: usize,
    order: Order,
    p: &KernelParams,
    c2: f64,
    rng: &mut R,
) -> Result<TensorField> {
    let sites = crate::hotensor::field::unit_grid_sites(nx, ny);
    let draw = sample_prior(&sites, order, p, c2, rng)?;
    TensorField::new(order, nx, ny, sites, draw.tensors)
}

/// `Σᵢ ‖Xᵢ − 𝒟 ×ₖ A(zᵢ)‖²_F`
pub fn residual_sum_sq(data: &[SymmetricHOT], a_values: &[Matrix3<f64>], core: &SymmetricHOT) -> f64 {
    data.iter()
        .zip(a_values)
        .map(|(x, a)| x.distance_sq_unchecked(&symmetric_tucker(core, a)))
        .sum()
}

/// Normalizing constant of the likelihood: each of the `N · 3^l` array
/// entries is an independent `N(·, σ²)` observation.
pub fn log_likelihood_constant(n_sites: usize, order: Order, sigma2: f64) -> f64 {
    -0.5 * (n_sites * order.full_len()) as f64 * (2.0 * PI * sigma2).ln()
}

fn check_alignment(data: &TensorField, state: &TDPState) -> Result<()> {
    if data.order() != state.order() {
        return Err(Error::IncompatibleTensors {
            left: data.order().get(),
            right: state.order().get(),
        });
    }
    if data.len() != state.n_sites() {
        return Err(Error::SiteCountMismatch {
            expected: data.len(),
            found: state.n_sites(),
        });
    }
    Ok(())
}

/// Gaussian log-likelihood of the observed field, including its constant.
pub fn log_likelihood(data: &TensorField, state: &TDPState) -> Result<f64> {
    check_alignment(data, state)?;
    let rss = residual_sum_sq(data.tensors(), &state.a_values, &state.core);
    Ok(-rss / (2.0 * state.sigma2) + log_likelihood_constant(data.len(), state.order(), state.sigma2))
}

/// `N(0, c² I)` log-density of the unique core elements.
pub fn core_log_prior(core: &SymmetricHOT, c2: f64) -> f64 {
    let n = core.coeffs().len() as f64;
    let ss: f64 = core.coeffs().iter().map(|c| c * c).sum();
    -0.5 * ss / c2 - 0.5 * n * (2.0 * PI * c2).ln()
}

/// GP log-density of all nine factor latents under a given factorization.
pub fn latent_log_prior(state: &TDPState, factor: &CovarianceFactor) -> f64 {
    (0..N_LATENTS)
        .map(|j| factor.log_density(&state.latent(j)))
        .sum()
}

/// Joint log prior of the latents, the core and `θ`.
pub fn log_prior(state: &TDPState, sites: &[Site], theta_prior: &ThetaPrior) -> Result<f64> {
    if !(state.theta > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    if sites.len() != state.n_sites() {
        return Err(Error::SiteCountMismatch {
            expected: sites.len(),
            found: state.n_sites(),
        });
    }
    let factor = CovarianceFactor::new(sites, &KernelParams::new(state.theta))?;
    Ok(latent_log_prior(state, &factor)
        + core_log_prior(&state.core, state.c2)
        + theta_prior.log_density(state.theta))
}
