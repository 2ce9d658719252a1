use super::{Order, SymmetricHOT};
use crate::error::{Error, Result};

/// Spatial coordinates `[x, y]` of one field node.
pub type Site = [f64; 2];

/// Tensors of a common order attached to distinct 2D sites.
///
/// Sites are laid out as an `nx × ny` grid in row-major order (x varies
/// fastest). A scattered list of sites is stored with `ny = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    order: Order,
    nx: usize,
    ny: usize,
    sites: Vec<Site>,
    tensors: Vec<SymmetricHOT>,
}

impl TensorField {
    pub fn new(
        order: Order,
        nx: usize,
        ny: usize,
        sites: Vec<Site>,
        tensors: Vec<SymmetricHOT>,
    ) -> Result<Self> {
        if nx * ny != sites.len() {
            return Err(Error::SiteCountMismatch {
                expected: nx * ny,
                found: sites.len(),
            });
        }
        if tensors.len() != sites.len() {
            return Err(Error::SiteCountMismatch {
                expected: sites.len(),
                found: tensors.len(),
            });
        }
        if let Some(t) = tensors.iter().find(|t| t.order() != order) {
            return Err(Error::IncompatibleTensors {
                left: order.get(),
                right: t.order().get(),
            });
        }
        if let Some(s) = sites.iter().find(|s| !(s[0].is_finite() && s[1].is_finite())) {
            return Err(Error::NonFinite(format!("site ({}, {})", s[0], s[1])));
        }
        let mut sorted = sites.clone();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "duplicate site ({}, {})",
                w[0][0], w[0][1]
            )));
        }
        Ok(Self {
            order,
            nx,
            ny,
            sites,
            tensors,
        })
    }

    /// A scattered field (`ny = 1`).
    pub fn from_sites(order: Order, sites: Vec<Site>, tensors: Vec<SymmetricHOT>) -> Result<Self> {
        let n = sites.len();
        Self::new(order, n, 1, sites, tensors)
    }

    /// Grid on `[0, 1]²` with spacing `1/(n-1)` along each axis.
    pub fn unit_grid(order: Order, nx: usize, ny: usize, tensors: Vec<SymmetricHOT>) -> Result<Self> {
        Self::new(order, nx, ny, unit_grid_sites(nx, ny), tensors)
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn tensors(&self) -> &[SymmetricHOT] {
        &self.tensors
    }

    pub fn node(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Index of the node at `site`, matching each coordinate within `tol`.
    pub fn find_site(&self, site: &Site, tol: f64) -> Option<usize> {
        self.sites
            .iter()
            .position(|s| (s[0] - site[0]).abs() <= tol && (s[1] - site[1]).abs() <= tol)
    }

    /// Axis coordinates when the sites form a rectilinear row-major grid with
    /// strictly increasing axes.
    pub fn grid_axes(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let xs: Vec<f64> = (0..self.nx).map(|ix| self.sites[ix][0]).collect();
        let ys: Vec<f64> = (0..self.ny).map(|iy| self.sites[self.node(0, iy)][1]).collect();
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&xs) || !increasing(&ys) {
            return None;
        }
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if self.sites[self.node(ix, iy)] != [xs[ix], ys[iy]] {
                    return None;
                }
            }
        }
        Some((xs, ys))
    }
}

pub(crate) fn unit_coord(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

pub(crate) fn unit_grid_sites(nx: usize, ny: usize) -> Vec<Site> {
    let mut sites = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            sites.push([unit_coord(ix, nx), unit_coord(iy, ny)]);
        }
    }
    sites
}
