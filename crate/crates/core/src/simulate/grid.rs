//! Uniform space-time grid with Dirichlet boundary.

use serde::Serialize;

use super::SimError;
use crate::system::BoxDomain;

/// `cells[i]` cells along axis `i`; unknowns live on the `cells[i] - 1`
/// interior nodes, boundary nodes carry the homogeneous Dirichlet value.
#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    pub dimension: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub h: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub horizon: f64,
}

impl Grid {
    pub fn new(domain: &BoxDomain, cells: &[usize], horizon: f64, steps: usize) -> Result<Grid, SimError> {
        let n = domain.dimension();
        if !(1..=2).contains(&n) {
            return Err(SimError::Unsupported(format!("grids are 1D or 2D, got dimension {n}")));
        }
        if cells.len() != n {
            return Err(SimError::Grid(format!("{} cell counts for a {n}D domain", cells.len())));
        }
        if cells.iter().any(|&c| c < 2) {
            return Err(SimError::Grid("need at least 2 cells per axis".into()));
        }
        if !(horizon > 0.0) || steps == 0 {
            return Err(SimError::Grid(format!("horizon {horizon} / steps {steps} must be positive")));
        }
        let h = (0..n).map(|i| (domain.hi[i] - domain.lo[i]) / cells[i] as f64).collect();
        Ok(Grid {
            dimension: n,
            lo: domain.lo.clone(),
            hi: domain.hi.clone(),
            cells: cells.to_vec(),
            h,
            dt: horizon / steps as f64,
            steps,
            horizon,
        })
    }

    /// Interior nodes along `axis`.
    pub fn interior(&self, axis: usize) -> usize {
        self.cells[axis] - 1
    }

    /// Number of interior nodes (unknowns per component).
    pub fn nodes(&self) -> usize {
        (0..self.dimension).map(|i| self.interior(i)).product()
    }

    /// Total unknowns of the two-component state.
    pub fn state_len(&self) -> usize {
        2 * self.nodes()
    }

    /// `Π h_i`, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Axis indices (1-based node numbers, 1..cells-1) of a flat node.
    pub fn node_multi(&self, node: usize) -> [usize; 2] {
        let m0 = self.interior(0);
        if self.dimension == 1 {
            [node + 1, 0]
        } else {
            [node % m0 + 1, node / m0 + 1]
        }
    }

    /// Flat node of 1-based axis indices, `None` on or beyond the boundary.
    pub fn node_at(&self, idx: [isize; 2]) -> Option<usize> {
        let inside = |axis: usize, k: isize| k >= 1 && k < self.cells[axis] as isize;
        if !inside(0, idx[0]) {
            return None;
        }
        if self.dimension == 1 {
            return Some(idx[0] as usize - 1);
        }
        if !inside(1, idx[1]) {
            return None;
        }
        Some((idx[1] as usize - 1) * self.interior(0) + idx[0] as usize - 1)
    }

    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.lo[axis] + k as f64 * self.h[axis]
    }

    /// Spatial coordinates of a flat node.
    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        let m = self.node_multi(node);
        (0..self.dimension).map(|a| self.coord(a, m[a])).collect()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// `(t, x...)` evaluation point of a node at time level `n`.
    pub fn point(&self, n: usize, node: usize) -> Vec<f64> {
        let mut p = vec![self.time(n)];
        p.extend(self.node_coords(node));
        p
    }
}
