//! Tensor estimation from diffusion-weighted signals.
//!
//! Under the generalized Stejskal–Tanner model
//! `log S_k = log S_0 − b · D(g_k)` the apparent diffusivity along each
//! gradient direction is linear in the unique tensor coefficients, so the
//! coefficients follow from an ordinary least-squares solve.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::hotensor::{Order, Site, SymmetricHOT, TensorField, UNIT_TOLERANCE};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Gradient directions, b-value and baseline signal.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientScheme {
    directions: Vec<Vector3<f64>>,
    b: f64,
    s0: f64,
}

impl GradientScheme {
    pub fn new(directions: Vec<Vector3<f64>>, b: f64, s0: f64) -> Result<Self> {
        if let Some(g) = directions
            .iter()
            .find(|g| !((g.norm() - 1.0).abs() <= UNIT_TOLERANCE))
        {
            return Err(Error::NotUnitVector { norm: g.norm() });
        }
        if !(b > 0.0 && b.is_finite()) || !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "b and s0 must be positive, got b={b} s0={s0}"
            )));
        }
        Ok(Self { directions, b, s0 })
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }
}

/// Signals per site, one value per gradient direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub sites: Vec<Site>,
    pub signals: Vec<Vec<f64>>,
}

/// Row `k` holds `multiplicity(e) · g_k^e` for every unique component `e`.
pub fn design_matrix(scheme: &GradientScheme, order: Order) -> DMatrix<f64> {
    let probe = SymmetricHOT::zeros(order);
    let (triples, mults) = (probe.triples(), probe.multiplicities());
    DMatrix::from_fn(scheme.directions.len(), order.n_unique(), |k, c| {
        mults[c] * triples[c].monomial(&scheme.directions[k])
    })
}

/// Noiseless forward model `S_k = S_0 exp(−b D(g_k))`.
pub fn synthesize(t: &SymmetricHOT, scheme: &GradientScheme) -> Vec<f64> {
    scheme
        .directions
        .iter()
        .map(|g| scheme.s0 * (-scheme.b * t.diffusivity_unchecked(g)).exp())
        .collect()
}

/// Least-squares fitter with the design factorized once.
pub struct Fitter {
    order: Order,
    scheme: GradientScheme,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Fitter {
    pub fn new(scheme: &GradientScheme, order: Order) -> Result<Self> {
        let k = scheme.directions.len();
        if k < order.n_unique() {
            return Err(Error::RankDeficient(format!(
                "{k} directions cannot determine {} coefficients of an order-{order} tensor",
                order.n_unique()
            )));
        }
        let svd = design_matrix(scheme, order).svd(true, true);
        let max = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > RANK_TOLERANCE * max)
            .count();
        if rank < order.n_unique() {
            return Err(Error::RankDeficient(format!(
                "design has rank {rank}, need {}; directions are degenerate for order {order}",
                order.n_unique()
            )));
        }
        Ok(Self {
            order,
            scheme: scheme.clone(),
            svd,
        })
    }

    /// Fits one site's signals. `site` only labels errors.
    pub fn fit(&self, signals: &[f64], site: usize) -> Result<SymmetricHOT> {
        if signals.len() != self.scheme.directions.len() {
            return Err(Error::DimensionMismatch(format!(
                "site {site} has {} signals for {} directions",
                signals.len(),
                self.scheme.directions.len()
            )));
        }
        if let Some((direction, &value)) = signals
            .iter()
            .enumerate()
            .find(|(_, s)| !(**s > 0.0 && s.is_finite()))
        {
            return Err(Error::NonPositiveSignal {
                site,
                direction,
                value,
            });
        }
        let log_s0 = self.scheme.s0.ln();
        let rhs = DVector::from_iterator(
            signals.len(),
            signals.iter().map(|s| (log_s0 - s.ln()) / self.scheme.b),
        );
        let coeffs = self
            .svd
            .solve(&rhs, 0.0)
            .map_err(|e| Error::RankDeficient(e.to_string()))?;
        SymmetricHOT::new(self.order, coeffs.iter().copied().collect())
    }
}

/// Fits one tensor from the signals of a single site.
pub fn fit_hot(signals: &[f64], scheme: &GradientScheme, order: Order) -> Result<SymmetricHOT> {
    Fitter::new(scheme, order)?.fit(signals, 0)
}

/// Fits every site of a record. Sites forming a row-major rectilinear grid
/// keep that layout; anything else becomes a scattered field.
pub fn fit_record(record: &SignalRecord, scheme: &GradientScheme, order: Order) -> Result<TensorField> {
    let fitter = Fitter::new(scheme, order)?;
    let tensors = record
        .signals
        .iter()
        .enumerate()
        .map(|(i, s)| fitter.fit(s, i))
        .collect::<Result<Vec<_>>>()?;
    let (nx, ny) = grid_shape(&record.sites);
    TensorField::new(order, nx, ny, record.sites.clone(), tensors)
}

fn grid_shape(sites: &[Site]) -> (usize, usize) {
    let n = sites.len();
    if n == 0 {
        return (0, 1);
    }
    let nx = sites.iter().take_while(|s| s[1] == sites[0][1]).count();
    if nx == 0 || n % nx != 0 {
        return (n, 1);
    }
    let ny = n / nx;
    let regular = (0..ny).all(|iy| {
        (0..nx).all(|ix| {
            let s = sites[iy * nx + ix];
            s[0] == sites[ix][0] && s[1] == sites[iy * nx][1]
        })
    });
    if regular {
        (nx, ny)
    } else {
        (n, 1)
    }
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653; // π (3 − √5)

/// `n` quasi-uniform unit vectors over the whole sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            spiral_point(i, z)
        })
        .collect()
}

/// `n` quasi-uniform unit vectors over the upper hemisphere. Antipodal pairs
/// carry the same information for even orders, so acquisition schemes use a
/// hemisphere.
pub fn fibonacci_hemisphere(n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            spiral_point(i, z)
        })
        .collect()
}

fn spiral_point(i: usize, z: f64) -> Vector3<f64> {
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = GOLDEN_ANGLE * i as f64;
    Vector3::new(r * phi.cos(), r * phi.sin(), z).normalize()
}
