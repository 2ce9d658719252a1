//! Posterior sampling and prediction for the Tucker decomposition process.
//!
//! One MCMC iteration cycles through
//! 1. an elliptical slice sampling update of each of the nine factor
//!    latents (sequentially, each sees the previous ones' new values),
//! 2. a log-space random-walk Metropolis–Hastings move on `θ`,
//! 3. a joint random-walk Metropolis–Hastings move on the unique core
//!    elements.

use nalgebra::{DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::{cross_covariance, CovarianceFactor, KernelParams};
use crate::hotensor::{symmetric_tucker, Order, Site, SymmetricHOT, TensorField};
use crate::tdp::{
    core_log_prior, latent_log_prior, log_likelihood_constant, residual_sum_sq,
    sample_factor_field, TDPState, ThetaPrior, DEFAULT_C2, DEFAULT_SIGMA2, N_LATENTS,
};

/// Chain settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub n_iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Standard deviation of the log-space `θ` proposal.
    pub mh_step_theta: f64,
    /// Core proposal standard deviation as a multiple of `√c²`.
    pub mh_step_core: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iters: 5000,
            burn_in: 1000,
            thin: 10,
            mh_step_theta: 0.1,
            mh_step_core: 0.05,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 || self.burn_in >= self.n_iters {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= burn_in < n_iters, got burn_in={} n_iters={}",
                self.burn_in, self.n_iters
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.mh_step_theta >= 0.0) || !(self.mh_step_core >= 0.0) {
            return Err(Error::InvalidConfig("proposal scales must be >= 0".into()));
        }
        Ok(())
    }
}

/// Fixed model hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub sigma2: f64,
    pub c2: f64,
    pub theta_prior: ThetaPrior,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            sigma2: DEFAULT_SIGMA2,
            c2: DEFAULT_C2,
            theta_prior: ThetaPrior::default(),
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || !(self.c2 > 0.0) || !(self.theta_prior.log_sd > 0.0) {
            return Err(Error::InvalidConfig(
                "sigma2, c2 and the theta prior log-sd must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Thinned post-burn-in draws and chain diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub states: Vec<TDPState>,
    pub accept_theta: f64,
    pub accept_core: f64,
    /// Log posterior (up to a constant) after every iteration.
    pub trace: Vec<f64>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.theta).collect()
    }

    pub fn theta_median(&self) -> f64 {
        let mut t = self.thetas();
        t.sort_by(f64::total_cmp);
        median_sorted(&t)
    }
}

pub(crate) fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Upper bound on bracket shrinks per ESS update.
const ESS_MAX_SHRINKS: usize = 200;

/// One elliptical slice sampling transition.
///
/// `current_ll` is the log-likelihood at `latent`. Returns the new latent and
/// its log-likelihood.
pub fn ess_step<R, F>(
    latent: &DVector<f64>,
    current_ll: f64,
    prior: &CovarianceFactor,
    mut loglik: F,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)>
where
    R: Rng + ?Sized,
    F: FnMut(&DVector<f64>) -> f64,
{
    if !current_ll.is_finite() {
        return Err(Error::NonFinite(format!(
            "log-likelihood {current_ll} at the current latent"
        )));
    }
    let nu = prior.sample(rng);
    let threshold = current_ll + rng.gen::<f64>().ln();
    let mut angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (mut lo, mut hi) = (angle - std::f64::consts::TAU, angle);
    for _ in 0..ESS_MAX_SHRINKS {
        let proposal = latent * angle.cos() + &nu * angle.sin();
        let ll = loglik(&proposal);
        if ll > threshold {
            return Ok((proposal, ll));
        }
        if angle < 0.0 {
            lo = angle;
        } else {
            hi = angle;
        }
        angle = rng.gen_range(lo..hi);
    }
    // The bracket has collapsed onto the current point.
    Ok((latent.clone(), current_ll))
}

/// Elliptical slice sampling update of a zero-mean Gaussian latent with prior
/// factor `prior_factor` (lower triangular, covariance `L Lᵀ`).
pub fn ess_update<R, F>(
    latent: &DVector<f64>,
    prior_factor: &CovarianceFactor,
    mut loglik: F,
    rng: &mut R,
) -> Result<DVector<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&DVector<f64>) -> f64,
{
    let ll = loglik(latent);
    Ok(ess_step(latent, ll, prior_factor, loglik, rng)?.0)
}

/// Log-space random-walk proposal for `θ`; returns the new `θ`, its
/// covariance factor and whether the move was accepted.
fn theta_step<R: Rng + ?Sized>(
    state: &TDPState,
    factor: &CovarianceFactor,
    sites: &[Site],
    step: f64,
    theta_prior: &ThetaPrior,
    rng: &mut R,
) -> Result<Option<(f64, CovarianceFactor)>> {
    let eps: f64 = rng.sample(StandardNormal);
    let log_u = rng.gen::<f64>().ln();
    let proposed = state.theta * (step * eps).exp();
    if !(proposed > 0.0 && proposed.is_finite()) {
        return Ok(None);
    }
    let new_factor = match CovarianceFactor::new(sites, &KernelParams::new(proposed)) {
        Ok(f) => f,
        Err(e) => {
            log::debug!("rejecting theta={proposed}: {e}");
            return Ok(None);
        }
    };
    let current = latent_log_prior(state, factor)
        + theta_prior.log_density(state.theta)
        + state.theta.ln();
    let candidate = {
        let mut s = state.clone();
        s.theta = proposed;
        latent_log_prior(&s, &new_factor) + theta_prior.log_density(proposed) + proposed.ln()
    };
    if !current.is_finite() {
        return Err(Error::NonFinite(format!(
            "log posterior at theta={}",
            state.theta
        )));
    }
    if log_u < candidate - current {
        Ok(Some((proposed, new_factor)))
    } else {
        Ok(None)
    }
}

/// Metropolis–Hastings update of the length-scale with the factor latents
/// held fixed. The likelihood does not depend on `θ`.
pub fn mh_update_theta<R: Rng + ?Sized>(
    state: &TDPState,
    sites: &[Site],
    cfg: &McmcConfig,
    theta_prior: &ThetaPrior,
    rng: &mut R,
) -> Result<(TDPState, bool)> {
    let factor = CovarianceFactor::new(sites, &KernelParams::new(state.theta))?;
    match theta_step(state, &factor, sites, cfg.mh_step_theta, theta_prior, rng)? {
        Some((theta, _)) => {
            let mut next = state.clone();
            next.theta = theta;
            Ok((next, true))
        }
        None => Ok((state.clone(), false)),
    }
}

/// Joint Gaussian random walk on the core with a caller-supplied
/// log-likelihood of the core. Returns the accepted core (if any) and its
/// log-likelihood.
pub fn core_step<R, F>(
    core: &SymmetricHOT,
    current_ll: f64,
    c2: f64,
    step: f64,
    mut loglik: F,
    rng: &mut R,
) -> Option<(SymmetricHOT, f64)>
where
    R: Rng + ?Sized,
    F: FnMut(&SymmetricHOT) -> f64,
{
    let scale = step * c2.sqrt();
    let mut proposal = core.clone();
    for c in proposal.coeffs_mut() {
        *c += scale * rng.sample::<f64, _>(StandardNormal);
    }
    let log_u = rng.gen::<f64>().ln();
    let ll = loglik(&proposal);
    let log_ratio = ll + core_log_prior(&proposal, c2) - current_ll - core_log_prior(core, c2);
    if log_u < log_ratio {
        Some((proposal, ll))
    } else {
        None
    }
}

/// Metropolis–Hastings update of the core tensor.
pub fn mh_update_core<R: Rng + ?Sized>(
    state: &TDPState,
    data: &TensorField,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<(TDPState, bool)> {
    let current = crate::tdp::log_likelihood(data, state)?;
    let loglik = |core: &SymmetricHOT| {
        -residual_sum_sq(data.tensors(), &state.a_values, core) / (2.0 * state.sigma2)
            + log_likelihood_constant(data.len(), state.order(), state.sigma2)
    };
    match core_step(&state.core, current, state.c2, cfg.mh_step_core, loglik, rng) {
        Some((core, _)) => {
            let mut next = state.clone();
            next.core = core;
            Ok((next, true))
        }
        None => Ok((state.clone(), false)),
    }
}

/// Mean of the unique coefficients over the field.
pub fn mean_tensor(field: &TensorField) -> SymmetricHOT {
    let n = field.len().max(1) as f64;
    let mut mean = SymmetricHOT::zeros(field.order());
    for t in field.tensors() {
        for (m, c) in mean.coeffs_mut().iter_mut().zip(t.coeffs()) {
            *m += c / n;
        }
    }
    mean
}

/// A running chain with cached factorization and likelihood.
pub struct Chain<'a> {
    data: &'a TensorField,
    cfg: McmcConfig,
    hyper: Hyper,
    state: TDPState,
    factor: CovarianceFactor,
    rss: f64,
    rng: ChaCha8Rng,
    theta_accepts: usize,
    core_accepts: usize,
    iterations: usize,
}

impl<'a> Chain<'a> {
    /// Starts from `A` drawn from the GP prior at the prior median of `θ` and
    /// the core set to the mean training tensor.
    pub fn new(data: &'a TensorField, cfg: McmcConfig, hyper: Hyper) -> Result<Self> {
        cfg.validate()?;
        hyper.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidConfig("training field is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let theta = hyper.theta_prior.median();
        let a_values = sample_factor_field(data.sites(), &KernelParams::new(theta), &mut rng)?;
        let state = TDPState {
            a_values,
            core: mean_tensor(data),
            theta,
            sigma2: hyper.sigma2,
            c2: hyper.c2,
        };
        Self::from_state(data, cfg, hyper, state, rng)
    }

    /// Starts from a given state.
    pub fn with_state(
        data: &'a TensorField,
        cfg: McmcConfig,
        hyper: Hyper,
        state: TDPState,
    ) -> Result<Self> {
        cfg.validate()?;
        hyper.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::from_state(data, cfg, hyper, state, rng)
    }

    fn from_state(
        data: &'a TensorField,
        cfg: McmcConfig,
        hyper: Hyper,
        state: TDPState,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if state.n_sites() != data.len() {
            return Err(Error::SiteCountMismatch {
                expected: data.len(),
                found: state.n_sites(),
            });
        }
        if state.order() != data.order() {
            return Err(Error::IncompatibleTensors {
                left: data.order().get(),
                right: state.order().get(),
            });
        }
        let factor = CovarianceFactor::new(data.sites(), &KernelParams::new(state.theta))?;
        let rss = residual_sum_sq(data.tensors(), &state.a_values, &state.core);
        Ok(Self {
            data,
            cfg,
            hyper,
            state,
            factor,
            rss,
            rng,
            theta_accepts: 0,
            core_accepts: 0,
            iterations: 0,
        })
    }

    pub fn state(&self) -> &TDPState {
        &self.state
    }

    fn loglik_from_rss(&self, rss: f64) -> f64 {
        -rss / (2.0 * self.state.sigma2)
            + log_likelihood_constant(self.data.len(), self.state.order(), self.state.sigma2)
    }

    pub fn log_likelihood(&self) -> f64 {
        self.loglik_from_rss(self.rss)
    }

    pub fn log_posterior(&self) -> f64 {
        self.log_likelihood()
            + latent_log_prior(&self.state, &self.factor)
            + core_log_prior(&self.state.core, self.state.c2)
            + self.hyper.theta_prior.log_density(self.state.theta)
    }

    /// One full cycle of updates.
    pub fn step(&mut self) -> Result<()> {
        let sigma2 = self.state.sigma2;
        let data = self.data.tensors();

        for j in 0..N_LATENTS {
            let (r, c) = (j / 3, j % 3);
            let current = self.state.latent(j);
            let current_ll = -self.rss / (2.0 * sigma2);
            let mut scratch = self.state.a_values.clone();
            let core = &self.state.core;
            let loglik = |f: &DVector<f64>| {
                for (a, v) in scratch.iter_mut().zip(f.iter()) {
                    a[(r, c)] = *v;
                }
                -residual_sum_sq(data, &scratch, core) / (2.0 * sigma2)
            };
            let (next, ll) = ess_step(&current, current_ll, &self.factor, loglik, &mut self.rng)?;
            self.state.set_latent(j, &next);
            self.rss = -2.0 * sigma2 * ll;
        }

        if let Some((theta, factor)) = theta_step(
            &self.state,
            &self.factor,
            self.data.sites(),
            self.cfg.mh_step_theta,
            &self.hyper.theta_prior,
            &mut self.rng,
        )? {
            self.state.theta = theta;
            self.factor = factor;
            self.theta_accepts += 1;
        }

        let a_values = &self.state.a_values;
        let loglik = |core: &SymmetricHOT| -residual_sum_sq(data, a_values, core) / (2.0 * sigma2);
        let current_ll = -self.rss / (2.0 * sigma2);
        if let Some((core, ll)) = core_step(
            &self.state.core,
            current_ll,
            self.state.c2,
            self.cfg.mh_step_core,
            loglik,
            &mut self.rng,
        ) {
            self.state.core = core;
            self.rss = -2.0 * sigma2 * ll;
            self.core_accepts += 1;
        }

        self.iterations += 1;
        Ok(())
    }

    pub fn acceptance(&self) -> (f64, f64) {
        let n = self.iterations.max(1) as f64;
        (self.theta_accepts as f64 / n, self.core_accepts as f64 / n)
    }
}

/// Runs a full chain and keeps every `thin`-th state after burn-in.
pub fn run_mcmc(data: &TensorField, cfg: &McmcConfig, hyper: &Hyper) -> Result<PosteriorSamples> {
    let mut chain = Chain::new(data, *cfg, *hyper)?;
    collect(&mut chain, cfg)
}

/// Like [`run_mcmc`] but starting from `init`.
pub fn run_mcmc_from(
    data: &TensorField,
    cfg: &McmcConfig,
    hyper: &Hyper,
    init: TDPState,
) -> Result<PosteriorSamples> {
    let mut chain = Chain::with_state(data, *cfg, *hyper, init)?;
    collect(&mut chain, cfg)
}

fn collect(chain: &mut Chain<'_>, cfg: &McmcConfig) -> Result<PosteriorSamples> {
    let mut states = Vec::with_capacity((cfg.n_iters - cfg.burn_in).div_ceil(cfg.thin));
    let mut trace = Vec::with_capacity(cfg.n_iters);
    for it in 0..cfg.n_iters {
        chain.step()?;
        trace.push(chain.log_posterior());
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            states.push(chain.state().clone());
        }
    }
    let (accept_theta, accept_core) = chain.acceptance();
    log::info!(
        "chain finished: {} samples, theta acceptance {:.3}, core acceptance {:.3}",
        states.len(),
        accept_theta,
        accept_core
    );
    Ok(PosteriorSamples {
        states,
        accept_theta,
        accept_core,
        trace,
    })
}

/// How posterior draws are combined into a point prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Reconstruct a tensor per draw, then average the tensors.
    #[default]
    PerSample,
    /// Average the predictive factor means and the cores over draws, then
    /// reconstruct once.
    MeanLatents,
}

/// Point predictions with a per-site spread.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub tensors: Vec<SymmetricHOT>,
    /// Across-draw standard deviation of the Frobenius norm of the
    /// reconstructed tensor.
    pub uncertainty: Vec<f64>,
}

/// Posterior-predictive tensors at `z_star` averaged over draws.
pub fn predict(
    samples: &PosteriorSamples,
    z_train: &[Site],
    z_star: &[Site],
) -> Result<Prediction> {
    predict_with(samples, z_train, z_star, Aggregation::PerSample)
}

pub fn predict_with(
    samples: &PosteriorSamples,
    z_train: &[Site],
    z_star: &[Site],
    aggregation: Aggregation,
) -> Result<Prediction> {
    let first = samples.states.first().ok_or(Error::EmptySamples)?;
    if z_star.is_empty() {
        return Err(Error::InvalidConfig("no query sites".into()));
    }
    let order: Order = first.order();
    let n_star = z_star.len();
    let n_draws = samples.states.len() as f64;

    let mut sum = vec![SymmetricHOT::zeros(order); n_star];
    let mut a_sum = vec![Matrix3::<f64>::zeros(); n_star];
    let mut core_sum = SymmetricHOT::zeros(order);
    let mut norm_sum = vec![0.0; n_star];
    let mut norm_sq_sum = vec![0.0; n_star];

    let mut cached: Option<(f64, CovarianceFactor, nalgebra::DMatrix<f64>)> = None;
    for state in &samples.states {
        if state.n_sites() != z_train.len() {
            return Err(Error::SiteCountMismatch {
                expected: z_train.len(),
                found: state.n_sites(),
            });
        }
        if cached.as_ref().map(|c| c.0) != Some(state.theta) {
            let p = KernelParams::new(state.theta);
            let factor = CovarianceFactor::new(z_train, &p)?;
            let k_star = cross_covariance(z_train, z_star, &p);
            cached = Some((state.theta, factor, k_star));
        }
        let (_, factor, k_star) = cached.as_ref().expect("set above");
        let a_star = predictive_factors(state, factor, k_star);
        for (site, a) in a_star.iter().enumerate() {
            let t = symmetric_tucker(&state.core, a);
            let norm = t.frobenius_norm();
            norm_sum[site] += norm;
            norm_sq_sum[site] += norm * norm;
            for (s, c) in sum[site].coeffs_mut().iter_mut().zip(t.coeffs()) {
                *s += c / n_draws;
            }
            a_sum[site] += a / n_draws;
        }
        for (s, c) in core_sum.coeffs_mut().iter_mut().zip(state.core.coeffs()) {
            *s += c / n_draws;
        }
    }

    let tensors = match aggregation {
        Aggregation::PerSample => sum,
        Aggregation::MeanLatents => a_sum
            .iter()
            .map(|a| symmetric_tucker(&core_sum, a))
            .collect(),
    };
    let uncertainty = norm_sum
        .iter()
        .zip(&norm_sq_sum)
        .map(|(s, ss)| {
            let mean = s / n_draws;
            (ss / n_draws - mean * mean).max(0.0).sqrt()
        })
        .collect();
    Ok(Prediction {
        tensors,
        uncertainty,
    })
}

/// Predictive mean of `A(z*)` for one draw: `K*ᵀ K⁻¹ a_j` per entry.
fn predictive_factors(
    state: &TDPState,
    factor: &CovarianceFactor,
    k_star: &nalgebra::DMatrix<f64>,
) -> Vec<Matrix3<f64>> {
    let mut out = vec![Matrix3::zeros(); k_star.ncols()];
    for j in 0..N_LATENTS {
        let alpha = factor.solve(&state.latent(j));
        let mean = k_star.tr_mul(&alpha);
        for (a, v) in out.iter_mut().zip(mean.iter()) {
            a[(j / 3, j % 3)] = *v;
        }
    }
    out
}
