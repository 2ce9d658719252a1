//! Reference interpolators on regular grids: component-wise bilinear for any
//! order and log-Euclidean for rank 2.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::hotensor::{Site, SymmetricHOT, TensorField};

/// Eigenvalues below this are raised to it before taking a matrix log.
pub const EIGEN_FLOOR: f64 = 1e-6;

/// Slack for queries sitting on the hull boundary.
const EDGE_TOLERANCE: f64 = 1e-12;

/// Cell lookup and bilinear weights on a rectilinear grid.
#[derive(Debug, Clone)]
pub struct BilinearGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl BilinearGrid {
    pub fn new(field: &TensorField) -> Result<Self> {
        let (xs, ys) = field.grid_axes().ok_or_else(|| {
            Error::InvalidConfig("bilinear interpolation needs a rectilinear grid".into())
        })?;
        Ok(Self { xs, ys })
    }

    /// Up to four `(node, weight)` pairs; nodes are row-major indices.
    pub fn weights(&self, z: &Site) -> Result<[(usize, f64); 4]> {
        let out = || Error::OutOfDomain { x: z[0], y: z[1] };
        let (ix, tx) = locate(&self.xs, z[0]).ok_or_else(out)?;
        let (iy, ty) = locate(&self.ys, z[1]).ok_or_else(out)?;
        let nx = self.xs.len();
        let ix1 = (ix + 1).min(nx - 1);
        let iy1 = (iy + 1).min(self.ys.len() - 1);
        Ok([
            (iy * nx + ix, (1.0 - tx) * (1.0 - ty)),
            (iy * nx + ix1, tx * (1.0 - ty)),
            (iy1 * nx + ix, (1.0 - tx) * ty),
            (iy1 * nx + ix1, tx * ty),
        ])
    }
}

/// Cell index and local coordinate in `[0, 1]` along one axis.
fn locate(axis: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    let (first, last) = (axis[0], axis[n - 1]);
    let span = (last - first).abs().max(1.0);
    if !(v >= first - EDGE_TOLERANCE * span && v <= last + EDGE_TOLERANCE * span) {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let v = v.clamp(first, last);
    // last cell whose left edge is <= v
    let i = axis.partition_point(|a| *a <= v).saturating_sub(1).min(n - 2);
    let t = (v - axis[i]) / (axis[i + 1] - axis[i]);
    Some((i, t.clamp(0.0, 1.0)))
}

/// Bilinear interpolation of every unique coefficient.
pub fn direct_interpolate(field: &TensorField, z_star: &Site) -> Result<SymmetricHOT> {
    let grid = BilinearGrid::new(field)?;
    direct_with(&grid, field, z_star)
}

fn direct_with(grid: &BilinearGrid, field: &TensorField, z: &Site) -> Result<SymmetricHOT> {
    let mut out = SymmetricHOT::zeros(field.order());
    for (node, w) in grid.weights(z)? {
        if w == 0.0 {
            continue;
        }
        for (o, c) in out.coeffs_mut().iter_mut().zip(field.tensors()[node].coeffs()) {
            *o += w * c;
        }
    }
    Ok(out)
}

/// Bilinear interpolation at many sites.
pub fn direct_interpolate_all(field: &TensorField, queries: &[Site]) -> Result<Vec<SymmetricHOT>> {
    let grid = BilinearGrid::new(field)?;
    queries.iter().map(|z| direct_with(&grid, field, z)).collect()
}

/// A symmetric positive definite 3×3 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spd3(Matrix3<f64>);

impl Spd3 {
    /// Symmetrizes `m` and raises eigenvalues below [`EIGEN_FLOOR`].
    pub fn new(m: &Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        let sym = (m + m.transpose()) * 0.5;
        let eig = eigen(sym);
        if eig.eigenvalues.iter().all(|l| *l >= EIGEN_FLOOR) {
            return Ok(Self(sym));
        }
        log::debug!(
            "clamping eigenvalues {:?} to floor {EIGEN_FLOOR:e}",
            eig.eigenvalues.as_slice()
        );
        let clamped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
        Ok(Self(compose(&eig.eigenvectors, &clamped)))
    }

    pub fn from_tensor(t: &SymmetricHOT) -> Result<Self> {
        Self::new(&t.to_matrix()?)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_tensor(&self) -> SymmetricHOT {
        SymmetricHOT::from_matrix(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigen(self.0).eigenvalues.min()
    }
}

struct Eigen3 {
    eigenvalues: Vector3<f64>,
    eigenvectors: Matrix3<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3×3 matrix.
///
/// nalgebra's `SymmetricEigen` loses up to 1e-1 in reconstruction on some
/// well-conditioned inputs with two close eigenvalues; Jacobi rotations are
/// accurate to round-off.
fn eigen(m: Matrix3<f64>) -> Eigen3 {
    let mut a = m;
    let mut v = Matrix3::identity();
    for _ in 0..64 {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            if apq.abs() <= 1e-3 * f64::EPSILON * (a[(p, p)].abs() + a[(q, q)].abs()) {
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                continue;
            }
            rotated = true;
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut j = Matrix3::identity();
            j[(p, p)] = c;
            j[(q, q)] = c;
            j[(p, q)] = s;
            j[(q, p)] = -s;
            a = j.transpose() * a * j;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= j;
        }
        if !rotated {
            break;
        }
    }
    Eigen3 {
        eigenvalues: a.diagonal(),
        eigenvectors: v,
    }
}

fn compose(vectors: &Matrix3<f64>, values: &Vector3<f64>) -> Matrix3<f64> {
    let m = vectors * Matrix3::from_diagonal(values) * vectors.transpose();
    (m + m.transpose()) * 0.5
}

/// Matrix logarithm through the eigendecomposition.
pub fn spd_log(m: &Spd3) -> Matrix3<f64> {
    let eig = eigen(m.0);
    compose(&eig.eigenvectors, &eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR).ln()))
}

/// Matrix exponential of a symmetric matrix.
pub fn spd_exp(s: &Matrix3<f64>) -> Result<Spd3> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = eigen(sym);
    Ok(Spd3(compose(&eig.eigenvectors, &eig.eigenvalues.map(f64::exp))))
}

/// Log-Euclidean interpolator with node logarithms computed once.
#[derive(Debug, Clone)]
pub struct LogEuclidean {
    grid: BilinearGrid,
    logs: Vec<Matrix3<f64>>,
}

impl LogEuclidean {
    pub fn new(field: &TensorField) -> Result<Self> {
        if field.order().get() != 2 {
            return Err(Error::UnsupportedOrder {
                required: 2,
                found: field.order().get(),
            });
        }
        let grid = BilinearGrid::new(field)?;
        let logs = field
            .tensors()
            .iter()
            .map(|t| Ok(spd_log(&Spd3::from_tensor(t)?)))
            .collect::<Result<_>>()?;
        Ok(Self { grid, logs })
    }

    pub fn interpolate(&self, z: &Site) -> Result<SymmetricHOT> {
        let mut acc = Matrix3::zeros();
        for (node, w) in self.grid.weights(z)? {
            if w != 0.0 {
                acc += self.logs[node] * w;
            }
        }
        Ok(spd_exp(&acc)?.to_tensor())
    }
}

/// Bilinear interpolation in the matrix-log domain, mapped back with the
/// matrix exponential. Rank 2 only.
pub fn log_euclidean_interpolate(field: &TensorField, z_star: &Site) -> Result<SymmetricHOT> {
    LogEuclidean::new(field)?.interpolate(z_star)
}

pub fn log_euclidean_interpolate_all(
    field: &TensorField,
    queries: &[Site],
) -> Result<Vec<SymmetricHOT>> {
    let le = LogEuclidean::new(field)?;
    queries.iter().map(|z| le.interpolate(z)).collect()
}
