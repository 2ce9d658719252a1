//! Symmetric higher-order tensors over dimension 3.
//!
//! A fully symmetric tensor of order `l` has `(l+1)(l+2)/2` distinct
//! components. Each one is labelled by an [`ExponentTriple`] `(i, j, k)`
//! counting how many of its indices point along x, y and z. Coefficients are
//! stored in graded lexicographic order with x before y before z, so rank 2
//! reads `xx, xy, xz, yy, yz, zz`.
//!
//! The dense `3^l` array form lives in [`full`] and is used for mode
//! products and as a brute-force reference. Everything performance-sensitive
//! works on the unique coefficients directly.

pub(crate) mod field;
pub mod full;

use std::sync::LazyLock;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

pub use field::{Site, TensorField};
pub use full::{mode_product, FullTensor};

/// Largest tensor order supported.
pub const MAX_ORDER: usize = 6;

/// Tolerance on `‖g‖₂ − 1` for diffusivity directions.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Exponents of x, y and z in one unique tensor component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExponentTriple {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl ExponentTriple {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    pub fn degree(&self) -> usize {
        self.i + self.j + self.k
    }

    pub fn get(&self, axis: usize) -> usize {
        match axis {
            0 => self.i,
            1 => self.j,
            _ => self.k,
        }
    }

    /// Number of index tuples of the full array that map to this component,
    /// the multinomial coefficient `l! / (i! j! k!)`.
    pub fn multiplicity(&self) -> usize {
        factorial(self.degree()) / (factorial(self.i) * factorial(self.j) * factorial(self.k))
    }

    /// `g_x^i g_y^j g_z^k`.
    pub fn monomial(&self, g: &Vector3<f64>) -> f64 {
        g.x.powi(self.i as i32) * g.y.powi(self.j as i32) * g.z.powi(self.k as i32)
    }

    /// Position of this triple in the canonical enumeration of its degree.
    pub fn position(&self) -> usize {
        let rest = self.degree() - self.i;
        rest * (rest + 1) / 2 + (rest - self.j)
    }

    /// Exponent triple of a full-array index tuple such as `[0, 2, 2, 1]`.
    pub fn from_indices(indices: &[usize]) -> Self {
        let mut counts = [0usize; 3];
        for &axis in indices {
            counts[axis] += 1;
        }
        Self::new(counts[0], counts[1], counts[2])
    }

    /// Sorted full-array index tuple representing this component.
    pub fn representative(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree());
        out.extend(std::iter::repeat(0).take(self.i));
        out.extend(std::iter::repeat(1).take(self.j));
        out.extend(std::iter::repeat(2).take(self.k));
        out
    }
}

/// multinomial(l; i, j, k)
pub fn multiplicity(e: ExponentTriple) -> usize {
    e.multiplicity()
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Validated even tensor order in {2, 4, 6}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Order(usize);

impl Order {
    pub fn new(l: usize) -> Result<Self> {
        match l {
            2 | 4 | 6 => Ok(Self(l)),
            _ => Err(Error::InvalidOrder(l)),
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// `N_l = (l+1)(l+2)/2`
    pub fn n_unique(self) -> usize {
        n_unique(self.0)
    }

    /// `3^l`
    pub fn full_len(self) -> usize {
        3usize.pow(self.0 as u32)
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn n_unique(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Canonical enumeration of the unique components of an order-`l` tensor.
pub fn enumerate_unique(l: usize) -> Result<Vec<ExponentTriple>> {
    let order = Order::new(l)?;
    Ok(tables()[order.get()].triples.clone())
}

/// Per-degree lookup tables, degrees 0 through [`MAX_ORDER`].
struct DegreeTable {
    triples: Vec<ExponentTriple>,
    multiplicities: Vec<f64>,
    /// `raise[axis][p]` is the position in degree `d + 1` of triple `p`
    /// (degree `d`) with one more index along `axis`.
    raise: [Vec<usize>; 3],
}

fn triples_of_degree(d: usize) -> Vec<ExponentTriple> {
    let mut out = Vec::with_capacity(n_unique(d));
    for i in (0..=d).rev() {
        for j in (0..=d - i).rev() {
            out.push(ExponentTriple::new(i, j, d - i - j));
        }
    }
    out
}

static TABLES: LazyLock<Vec<DegreeTable>> = LazyLock::new(|| {
    (0..=MAX_ORDER)
        .map(|d| {
            let triples = triples_of_degree(d);
            let multiplicities = triples.iter().map(|t| t.multiplicity() as f64).collect();
            let raise = std::array::from_fn(|axis| {
                triples
                    .iter()
                    .map(|t| {
                        let mut up = *t;
                        match axis {
                            0 => up.i += 1,
                            1 => up.j += 1,
                            _ => up.k += 1,
                        }
                        up.position()
                    })
                    .collect()
            });
            DegreeTable {
                triples,
                multiplicities,
                raise,
            }
        })
        .collect()
});

fn tables() -> &'static [DegreeTable] {
    &TABLES
}

/// One fully symmetric tensor stored as its unique coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricHOT {
    order: Order,
    coeffs: Vec<f64>,
}

impl SymmetricHOT {
    pub fn new(order: Order, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != order.n_unique() {
            return Err(Error::DimensionMismatch(format!(
                "order {} needs {} coefficients, got {}",
                order,
                order.n_unique(),
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("tensor coefficient {bad}")));
        }
        Ok(Self { order, coeffs })
    }

    pub fn zeros(order: Order) -> Self {
        Self {
            order,
            coeffs: vec![0.0; order.n_unique()],
        }
    }

    /// The tensor whose diffusivity is `‖g‖^l`, i.e. the identity for rank 2.
    pub fn isotropic(order: Order) -> Self {
        let half = order.get() / 2;
        let coeffs = tables()[order.get()]
            .triples
            .iter()
            .map(|t| {
                if t.i % 2 == 1 || t.j % 2 == 1 || t.k % 2 == 1 {
                    return 0.0;
                }
                let poly = factorial(half)
                    / (factorial(t.i / 2) * factorial(t.j / 2) * factorial(t.k / 2));
                poly as f64 / t.multiplicity() as f64
            })
            .collect();
        Self { order, coeffs }
    }

    /// Rank-2 tensor from a 3×3 matrix (the symmetric part is used).
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let s = (m + m.transpose()) * 0.5;
        Self {
            order: Order(2),
            coeffs: vec![s[(0, 0)], s[(0, 1)], s[(0, 2)], s[(1, 1)], s[(1, 2)], s[(2, 2)]],
        }
    }

    /// Rank-2 tensor as a symmetric 3×3 matrix.
    pub fn to_matrix(&self) -> Result<Matrix3<f64>> {
        if self.order.get() != 2 {
            return Err(Error::UnsupportedOrder {
                required: 2,
                found: self.order.get(),
            });
        }
        let c = &self.coeffs;
        Ok(Matrix3::new(
            c[0], c[1], c[2], //
            c[1], c[3], c[4], //
            c[2], c[4], c[5],
        ))
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, e: ExponentTriple) -> f64 {
        self.coeffs[e.position()]
    }

    /// Component at a full-array index tuple.
    pub fn at(&self, indices: &[usize]) -> f64 {
        self.get(ExponentTriple::from_indices(indices))
    }

    pub fn triples(&self) -> &'static [ExponentTriple] {
        &tables()[self.order.get()].triples
    }

    pub fn multiplicities(&self) -> &'static [f64] {
        &tables()[self.order.get()].multiplicities
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn check_same_order(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::IncompatibleTensors {
                left: self.order.get(),
                right: other.order.get(),
            });
        }
        Ok(())
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        self.check_same_order(other)?;
        Ok(Self {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    /// Squared Frobenius norm over the full `3^l` array.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(self.multiplicities())
            .map(|(c, m)| m * c * c)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Squared Frobenius distance; callers guarantee equal orders.
    pub(crate) fn distance_sq_unchecked(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.multiplicities())
            .map(|((a, b), m)| {
                let d = a - b;
                m * d * d
            })
            .sum()
    }

    /// Diffusivity `D(g)` without the unit-norm check.
    pub fn diffusivity_unchecked(&self, g: &Vector3<f64>) -> f64 {
        self.coeffs
            .iter()
            .zip(self.triples())
            .zip(self.multiplicities())
            .map(|((c, t), m)| m * c * t.monomial(g))
            .sum()
    }

    pub fn expand(&self) -> FullTensor {
        FullTensor::from_symmetric(self)
    }
}

/// Tensorial Frobenius distance, the square root of the summed squared
/// differences over all `3^l` components.
pub fn frobenius_distance(a: &SymmetricHOT, b: &SymmetricHOT) -> Result<f64> {
    a.check_same_order(b)?;
    Ok(a.distance_sq_unchecked(b).sqrt())
}

/// Diffusivity function `D(g) = Σ D_{i1..il} g_{i1} ⋯ g_{il}` for a unit `g`.
pub fn evaluate_diffusivity(t: &SymmetricHOT, g: &Vector3<f64>) -> Result<f64> {
    let norm = g.norm();
    if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::NotUnitVector { norm });
    }
    Ok(t.diffusivity_unchecked(g))
}

/// Tucker reconstruction `core ×₁ A ×₂ A ⋯ ×ₗ A` through the dense array.
///
/// The factor must be 3×3. Every mode is contracted with a [`mode_product`],
/// then the result is symmetrized and compressed back.
pub fn tucker_reconstruct(core: &SymmetricHOT, a: &DMatrix<f64>) -> Result<SymmetricHOT> {
    if a.shape() != (3, 3) {
        return Err(Error::DimensionMismatch(format!(
            "factor matrix must be 3x3, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let a = Matrix3::from_iterator(a.iter().copied());
    let mut t = core.expand();
    for mode in 1..=core.order().get() {
        t = t.mode_product(mode, &a)?;
    }
    t.compress()
}

/// Tucker reconstruction computed directly on unique coefficients.
///
/// Each output component `T_e` is the core contracted against the rows of `a`
/// selected by a representative index tuple of `e`. Contracting one index of
/// a symmetric tensor leaves a symmetric tensor, so intermediates stay in
/// unique form and shared prefixes of the sorted index tuples are reused.
pub fn symmetric_tucker(core: &SymmetricHOT, a: &Matrix3<f64>) -> SymmetricHOT {
    let order = core.order();
    let mut out = vec![0.0; order.n_unique()];
    let mut scratch: Vec<Vec<f64>> = (0..=order.get()).map(|d| vec![0.0; n_unique(d)]).collect();
    scratch[order.get()].copy_from_slice(&core.coeffs);
    contract_rec(a, order.get(), 0, [0; 3], &mut scratch, &mut out);
    SymmetricHOT { order, coeffs: out }
}

fn contract_rec(
    a: &Matrix3<f64>,
    degree: usize,
    start_axis: usize,
    counts: [usize; 3],
    scratch: &mut [Vec<f64>],
    out: &mut [f64],
) {
    if degree == 0 {
        let e = ExponentTriple::new(counts[0], counts[1], counts[2]);
        out[e.position()] = scratch[0][0];
        return;
    }
    let lower = &tables()[degree - 1];
    for axis in start_axis..3 {
        let (head, tail) = scratch.split_at_mut(degree);
        let src = &tail[0];
        let dst = &mut head[degree - 1];
        let (v0, v1, v2) = (a[(axis, 0)], a[(axis, 1)], a[(axis, 2)]);
        for (p, slot) in dst.iter_mut().enumerate() {
            *slot = v0 * src[lower.raise[0][p]]
                + v1 * src[lower.raise[1][p]]
                + v2 * src[lower.raise[2][p]];
        }
        let mut next = counts;
        next[axis] += 1;
        contract_rec(a, degree - 1, axis, next, scratch, out);
    }
}
