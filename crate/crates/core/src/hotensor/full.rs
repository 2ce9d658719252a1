//! Dense `3^l` tensor arrays.

use nalgebra::Matrix3;

use super::{tables, ExponentTriple, Order, SymmetricHOT};
use crate::error::{Error, Result};

/// Relative tolerance for asymmetry when compressing a dense array.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// A dense order-`l` tensor over dimension 3. The first index is the most
/// significant in the flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTensor {
    order: Order,
    data: Vec<f64>,
}

impl FullTensor {
    pub fn zeros(order: Order) -> Self {
        Self {
            order,
            data: vec![0.0; order.full_len()],
        }
    }

    pub fn from_vec(order: Order, data: Vec<f64>) -> Result<Self> {
        if data.len() != order.full_len() {
            return Err(Error::DimensionMismatch(format!(
                "order {} needs {} entries, got {}",
                order,
                order.full_len(),
                data.len()
            )));
        }
        Ok(Self { order, data })
    }

    pub fn from_symmetric(t: &SymmetricHOT) -> Self {
        let order = t.order();
        let mut data = vec![0.0; order.full_len()];
        for (flat, slot) in data.iter_mut().enumerate() {
            *slot = t.get(exponents_of(flat, order.get()));
        }
        Self { order, data }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, indices: &[usize]) -> f64 {
        self.data[flat_index(indices)]
    }

    /// Mode-`mode` product (1-based), contracting that index against the
    /// second index of `m`: `(T ×ₖ M)_{..j..} = Σᵢ T_{..i..} M_{j i}`.
    pub fn mode_product(&self, mode: usize, m: &Matrix3<f64>) -> Result<Self> {
        let l = self.order.get();
        if mode == 0 || mode > l {
            return Err(Error::ModeOutOfRange { mode, order: l });
        }
        let stride = 3usize.pow((l - mode) as u32);
        let mut out = vec![0.0; self.data.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let j = (flat / stride) % 3;
            let base = flat - j * stride;
            *slot = (0..3).map(|i| m[(j, i)] * self.data[base + i * stride]).sum();
        }
        Ok(Self {
            order: self.order,
            data: out,
        })
    }

    /// Averages every orbit of index permutations into one unique coefficient.
    /// Fails if any entry strays from its orbit mean by more than
    /// [`SYMMETRY_TOLERANCE`] relative to the largest entry.
    pub fn compress(&self) -> Result<SymmetricHOT> {
        let l = self.order.get();
        let table = &tables()[l];
        let mut sums = vec![0.0; table.triples.len()];
        for (flat, v) in self.data.iter().enumerate() {
            sums[exponents_of(flat, l).position()] += v;
        }
        let coeffs: Vec<f64> = sums
            .iter()
            .zip(&table.multiplicities)
            .map(|(s, m)| s / m)
            .collect();
        let scale = self.data.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let deviation = self
            .data
            .iter()
            .enumerate()
            .map(|(flat, v)| (v - coeffs[exponents_of(flat, l).position()]).abs())
            .fold(0.0, f64::max);
        if deviation > SYMMETRY_TOLERANCE * scale {
            return Err(Error::Asymmetric { deviation });
        }
        SymmetricHOT::new(self.order, coeffs)
    }
}

/// Mode-`k` product of a dense tensor with a 3×3 matrix.
pub fn mode_product(t: &FullTensor, k: usize, m: &Matrix3<f64>) -> Result<FullTensor> {
    t.mode_product(k, m)
}

fn flat_index(indices: &[usize]) -> usize {
    indices.iter().fold(0, |acc, &i| acc * 3 + i)
}

fn exponents_of(mut flat: usize, l: usize) -> ExponentTriple {
    let mut counts = [0usize; 3];
    for _ in 0..l {
        counts[flat % 3] += 1;
        flat /= 3;
    }
    ExponentTriple::new(counts[0], counts[1], counts[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(order: Order) -> FullTensor {
        let data = (0..order.full_len()).map(|v| ((v * 13) % 7) as f64 - 3.0).collect();
        FullTensor::from_vec(order, data).unwrap()
    }

    #[test]
    fn identity_and_zero_products() {
        let t = sample(Order::new(4).unwrap());
        for k in 1..=4 {
            assert_eq!(t.mode_product(k, &Matrix3::identity()).unwrap(), t);
            let z = t.mode_product(k, &Matrix3::zeros()).unwrap();
            assert!(z.data().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn mode_out_of_range() {
        let t = sample(Order::new(2).unwrap());
        assert!(matches!(
            t.mode_product(0, &Matrix3::identity()),
            Err(Error::ModeOutOfRange { mode: 0, order: 2 })
        ));
        assert!(matches!(
            mode_product(&t, 3, &Matrix3::identity()),
            Err(Error::ModeOutOfRange { mode: 3, order: 2 })
        ));
    }

    #[test]
    fn rank2_products_are_matrix_sandwich() {
        let order = Order::new(2).unwrap();
        let t = sample(order);
        let tm = Matrix3::from_row_slice(t.data());
        let a = Matrix3::new(0.2, 1.0, -0.5, 0.3, -0.7, 0.9, 1.4, 0.0, 0.6);
        let out = t.mode_product(1, &a).unwrap().mode_product(2, &a).unwrap();
        let expected = a * tm * a.transpose();
        for r in 0..3 {
            for c in 0..3 {
                assert_relative_eq!(out.get(&[r, c]), expected[(r, c)], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn compress_rejects_asymmetry() {
        let order = Order::new(2).unwrap();
        let mut data = vec![0.0; 9];
        data[1] = 1.0;
        let t = FullTensor::from_vec(order, data).unwrap();
        assert!(matches!(t.compress(), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn expand_compress_round_trip() {
        let order = Order::new(6).unwrap();
        let coeffs = (0..order.n_unique()).map(|v| v as f64 / 7.0).collect();
        let t = SymmetricHOT::new(order, coeffs).unwrap();
        let back = t.expand().compress().unwrap();
        for (a, b) in back.coeffs().iter().zip(t.coeffs()) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
        assert_eq!(t.expand().get(&[0, 1, 2, 2, 1, 0]), t.at(&[0, 0, 1, 1, 2, 2]));
    }
}
