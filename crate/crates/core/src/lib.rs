//! Interpolation of symmetric higher-order tensor fields.
//!
//! Fields of even-order (2, 4, 6) symmetric tensors over three dimensions are
//! modelled with a Tucker decomposition process: every tensor is a shared
//! symmetric core contracted on each mode by a 3×3 factor `A(z)` whose nine
//! entries are independent Gaussian processes over the 2D position `z`.
//! Posterior inference runs elliptical slice sampling on the factor latents
//! and Metropolis–Hastings on the length-scale and the core.
//!
//! Module map:
//! - [`hotensor`]: symmetric tensor storage, mode products, Tucker
//!   reconstruction, Frobenius distance, diffusivity.
//! - [`gp`]: squared-exponential kernel, Cholesky factors, prior draws and
//!   Gaussian conditioning.
//! - [`tdp`]: the process prior, likelihood and latent state.
//! - [`inference`]: MCMC updates, chains and posterior prediction.
//! - [`baselines`]: bilinear and log-Euclidean interpolation.
//! - [`stfit`]: tensor estimation from diffusion-weighted signals.
//! - [`dataio`] and [`harness`]: file formats and the experiment pipeline.

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod gp;
pub mod harness;
pub mod hotensor;
pub mod inference;
pub mod stfit;
pub mod tdp;

pub use error::{Error, Result};
pub use hotensor::{Order, Site, SymmetricHOT, TensorField};
