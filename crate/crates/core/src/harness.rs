//! Experiment pipeline: synthetic fields, downsampling, interpolation,
//! evaluation and glyph export.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::{direct_interpolate_all, log_euclidean_interpolate_all, BilinearGrid};
use crate::dataio::fmt_num;
use crate::error::{Error, Result};
use crate::gp::KernelParams;
use crate::hotensor::field::unit_grid_sites;
use crate::hotensor::{frobenius_distance, symmetric_tucker, Order, Site, SymmetricHOT, TensorField};
use crate::inference::{predict, run_mcmc, Hyper, McmcConfig};
use crate::stfit::{fibonacci_hemisphere, fibonacci_sphere, fit_hot, GradientScheme};
use crate::tdp::sample_factor_field;

/// Directions used by the positivity audit.
pub const AUDIT_DIRECTIONS: usize = 64;

/// Coordinate tolerance when matching sites between fields.
pub const SITE_TOLERANCE: f64 = 1e-9;

/// Axial and radial diffusivity of the simulated fibres, in µm²/ms.
const FIBRE_DIFFUSIVITY: (f64, f64) = (1.7, 0.3);
/// b-value of the simulated acquisition in ms/µm² (1000 s/mm²).
const SIMULATED_B: f64 = 1.0;
const SIMULATED_DIRECTIONS: usize = 90;

/// A core tensor estimated from a simulated diffusion acquisition: two equally
/// weighted fibres with random orientations, noiseless signals over 90
/// hemisphere directions, a least-squares fit, then scaled by `√c²`.
pub fn simulated_dmri_core<R: Rng + ?Sized>(order: Order, c2: f64, rng: &mut R) -> Result<SymmetricHOT> {
    if !(c2 >= 0.0 && c2.is_finite()) {
        return Err(Error::InvalidConfig(format!("core variance must be >= 0, got {c2}")));
    }
    let (axial, radial) = FIBRE_DIFFUSIVITY;
    let fibres: Vec<Vector3<f64>> = (0..2)
        .map(|_| {
            let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            v.normalize()
        })
        .collect();
    let scheme = GradientScheme::new(fibonacci_hemisphere(SIMULATED_DIRECTIONS), SIMULATED_B, 1.0)?;
    let signals: Vec<f64> = scheme
        .directions()
        .iter()
        .map(|g| {
            fibres
                .iter()
                .map(|v| 0.5 * (-SIMULATED_B * (radial + (axial - radial) * g.dot(v).powi(2))).exp())
                .sum()
        })
        .collect();
    Ok(fit_hot(&signals, &scheme, order)?.scaled(c2.sqrt()))
}

/// A synthetic field: factor matrices drawn from the process prior on the
/// unit grid, combined with a core from [`simulated_dmri_core`].
pub fn generate_synthetic(
    order: Order,
    nx: usize,
    ny: usize,
    theta: f64,
    c2: f64,
    seed: u64,
) -> Result<TensorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = unit_grid_sites(nx, ny);
    let a_values = sample_factor_field(&sites, &KernelParams::new(theta), &mut rng)?;
    let core = simulated_dmri_core(order, c2, &mut rng)?;
    let tensors = a_values.iter().map(|a| symmetric_tucker(&core, a)).collect();
    TensorField::new(order, nx, ny, sites, tensors)
}

/// Keeps the nodes with even indices along both axes.
pub fn downsample_by_two(field: &TensorField) -> Result<TensorField> {
    if field.nx() < 3 || field.ny() < 3 {
        return Err(Error::InvalidConfig(format!(
            "grid {}x{} is too small to downsample (need at least 3x3)",
            field.nx(),
            field.ny()
        )));
    }
    let (nx, ny) = (field.nx().div_ceil(2), field.ny().div_ceil(2));
    let mut sites = Vec::with_capacity(nx * ny);
    let mut tensors = Vec::with_capacity(nx * ny);
    for iy in (0..field.ny()).step_by(2) {
        for ix in (0..field.nx()).step_by(2) {
            let n = field.node(ix, iy);
            sites.push(field.sites()[n]);
            tensors.push(field.tensors()[n].clone());
        }
    }
    TensorField::new(field.order(), nx, ny, sites, tensors)
}

/// Nodes of `truth` absent from `train` that lie inside the training grid's
/// bounding box, in `truth` order.
pub fn heldout_sites(truth: &TensorField, train: &TensorField) -> Vec<Site> {
    let (lo, hi) = bounding_box(train.sites());
    truth
        .sites()
        .iter()
        .filter(|s| train.find_site(s, SITE_TOLERANCE).is_none())
        .filter(|s| (0..2).all(|d| s[d] >= lo[d] && s[d] <= hi[d]))
        .copied()
        .collect()
}

fn bounding_box(sites: &[Site]) -> (Site, Site) {
    sites.iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), s| {
            (
                [lo[0].min(s[0]), lo[1].min(s[1])],
                [hi[0].max(s[0]), hi[1].max(s[1])],
            )
        },
    )
}

/// Interpolation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tdp,
    Direct,
    LogEuclid,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tdp" => Ok(Method::Tdp),
            "direct" => Ok(Method::Direct),
            "logeuclid" => Ok(Method::LogEuclid),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Tdp => "tdp",
            Method::Direct => "direct",
            Method::LogEuclid => "logeuclid",
        })
    }
}

/// Chain summary attached to TDP predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub n_samples: usize,
    pub accept_theta: f64,
    pub accept_core: f64,
    pub theta_median: f64,
}

#[derive(Debug, Clone)]
pub struct Interpolation {
    pub field: TensorField,
    /// Per-site spread, TDP only.
    pub uncertainty: Option<Vec<f64>>,
    pub chain: Option<ChainSummary>,
    pub elapsed_secs: f64,
}

/// Predicts tensors at `targets` from a training grid.
pub fn interpolate(
    train: &TensorField,
    targets: &[Site],
    method: Method,
    cfg: &McmcConfig,
    hyper: &Hyper,
) -> Result<Interpolation> {
    if method == Method::LogEuclid && train.order().get() != 2 {
        return Err(Error::UnsupportedOrder {
            required: 2,
            found: train.order().get(),
        });
    }
    // Every method shares the no-extrapolation domain.
    let grid = BilinearGrid::new(train)?;
    for z in targets {
        grid.weights(z)?;
    }
    let start = Instant::now();
    let (tensors, uncertainty, chain) = match method {
        Method::Direct => (direct_interpolate_all(train, targets)?, None, None),
        Method::LogEuclid => (log_euclidean_interpolate_all(train, targets)?, None, None),
        Method::Tdp => {
            let samples = run_mcmc(train, cfg, hyper)?;
            let pred = predict(&samples, train.sites(), targets)?;
            let summary = ChainSummary {
                n_samples: samples.len(),
                accept_theta: samples.accept_theta,
                accept_core: samples.accept_core,
                theta_median: samples.theta_median(),
            };
            (pred.tensors, Some(pred.uncertainty), Some(summary))
        }
    };
    let field = TensorField::from_sites(train.order(), targets.to_vec(), tensors)?;
    Ok(Interpolation {
        field,
        uncertainty,
        chain,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Frobenius error summary of a predicted field.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub distances: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator).
    pub sd: f64,
    /// Fraction of predicted tensors with a negative diffusivity along any
    /// audit direction.
    pub negative_fraction: f64,
    /// Named wall-clock timings in seconds.
    pub timings: Vec<(String, f64)>,
}

impl EvalReport {
    /// `mean ± sd` with three decimals.
    pub fn summary(&self) -> String {
        format!("{:.3} ± {:.3}", self.mean, self.sd)
    }

    /// Summary statistics and per-site distances. Timings are left out so
    /// the text is reproducible.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sites={}", self.distances.len());
        let _ = writeln!(s, "mean={}", fmt_num(self.mean));
        let _ = writeln!(s, "sd={}", fmt_num(self.sd));
        let _ = writeln!(s, "summary={}", self.summary());
        let _ = writeln!(s, "negative_fraction={}", fmt_num(self.negative_fraction));
        for d in &self.distances {
            let _ = writeln!(s, "distance={}", fmt_num(*d));
        }
        s
    }

    /// [`EvalReport::to_text`] followed by the timings.
    pub fn to_text_full(&self) -> String {
        let mut s = self.to_text();
        for (name, secs) in &self.timings {
            let _ = writeln!(s, "timing.{name}={secs:.6}");
        }
        s
    }
}

/// Whether `t` is negative along any of `dirs`.
pub fn has_negative_diffusivity(t: &SymmetricHOT, dirs: &[nalgebra::Vector3<f64>]) -> bool {
    dirs.iter().any(|g| t.diffusivity_unchecked(g) < 0.0)
}

/// Per-site Frobenius distance between `predicted` and the `truth` node at
/// the same coordinates.
pub fn evaluate(predicted: &TensorField, truth: &TensorField) -> Result<EvalReport> {
    let start = Instant::now();
    if predicted.order() != truth.order() {
        return Err(Error::IncompatibleTensors {
            left: predicted.order().get(),
            right: truth.order().get(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidConfig("predicted field has no sites".into()));
    }
    let distances = predicted
        .sites()
        .iter()
        .zip(predicted.tensors())
        .map(|(s, t)| {
            let i = truth
                .find_site(s, SITE_TOLERANCE)
                .ok_or(Error::SiteMismatch { x: s[0], y: s[1] })?;
            frobenius_distance(t, &truth.tensors()[i])
        })
        .collect::<Result<Vec<_>>>()?;
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let sd = if distances.len() > 1 {
        (distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let dirs = fibonacci_sphere(AUDIT_DIRECTIONS);
    let negative = predicted
        .tensors()
        .iter()
        .filter(|t| has_negative_diffusivity(t, &dirs))
        .count();
    Ok(EvalReport {
        distances,
        mean,
        sd,
        negative_fraction: negative as f64 / n,
        timings: vec![("evaluate".into(), start.elapsed().as_secs_f64())],
    })
}

/// In-plane polar glyph samples `x y φ r` with `r = D(cos φ, sin φ, 0)`.
pub fn glyph_export(field: &TensorField, samples_per_glyph: usize) -> Result<String> {
    if samples_per_glyph < 8 {
        return Err(Error::InvalidConfig(format!(
            "need at least 8 samples per glyph, got {samples_per_glyph}"
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "# x y phi r");
    for (site, t) in field.sites().iter().zip(field.tensors()) {
        for k in 0..samples_per_glyph {
            let phi = std::f64::consts::TAU * k as f64 / samples_per_glyph as f64;
            let g = nalgebra::Vector3::new(phi.cos(), phi.sin(), 0.0);
            let r = t.diffusivity_unchecked(&g);
            let _ = writeln!(
                out,
                "{} {} {} {}",
                fmt_num(site[0]),
                fmt_num(site[1]),
                fmt_num(phi),
                fmt_num(r)
            );
        }
    }
    Ok(out)
}

/// Outcome of one downsample-and-interpolate benchmark.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub method: Method,
    pub report: EvalReport,
    pub chain: Option<ChainSummary>,
}

/// Generates a synthetic field, trains on the even-index nodes and scores
/// each method on the held-out nodes.
pub fn benchmark(
    order: Order,
    n: usize,
    theta: f64,
    seed: u64,
    methods: &[Method],
    cfg: &McmcConfig,
    hyper: &Hyper,
) -> Result<Vec<BenchmarkResult>> {
    let truth = generate_synthetic(order, n, n, theta, hyper.c2, seed)?;
    let train = downsample_by_two(&truth)?;
    let targets = heldout_sites(&truth, &train);
    methods
        .iter()
        .map(|&method| {
            let interp = interpolate(&train, &targets, method, cfg, hyper)?;
            let mut report = evaluate(&interp.field, &truth)?;
            report.timings.push(("interpolate".into(), interp.elapsed_secs));
            Ok(BenchmarkResult {
                method,
                report,
                chain: interp.chain,
            })
        })
        .collect()
}
