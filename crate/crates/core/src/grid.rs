//! Grids and grid-bound sampled functions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::sync::Arc;

/// Relative tolerance for detecting uniform spacing and matching the anchor.
const NODE_TOL: f64 = 1e-12;

/// A strictly increasing set of nodes on a finite interval, with one node
/// marked as the anchor x₀ (the base point of all cumulative integrals).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    anchor_index: usize,
    uniform_h: Option<f64>,
}

impl Grid {
    /// Uniform grid with `n` nodes on [l1, l2], anchored at the node nearest
    /// to `anchor` (which must coincide with a node up to rounding).
    pub fn uniform(l1: f64, l2: f64, n: usize, anchor: f64) -> Result<Arc<Grid>> {
        if !(l1.is_finite() && l2.is_finite()) || l2 <= l1 {
            return Err(Error::Config(format!("invalid interval [{l1}, {l2}]")));
        }
        if n < 3 {
            return Err(Error::Config(format!("grid needs at least 3 nodes, got {n}")));
        }
        let h = (l2 - l1) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { l2 } else { l1 + i as f64 * h })
            .collect();
        let anchor_index = ((anchor - l1) / h).round() as isize;
        if anchor_index < 0 || anchor_index as usize >= n {
            return Err(Error::Config(format!("anchor {anchor} outside [{l1}, {l2}]")));
        }
        let anchor_index = anchor_index as usize;
        if (nodes[anchor_index] - anchor).abs() > NODE_TOL * (l2 - l1) {
            return Err(Error::Config(format!(
                "anchor {anchor} does not coincide with a grid node (nearest: {})",
                nodes[anchor_index]
            )));
        }
        Ok(Arc::new(Grid { nodes, anchor_index, uniform_h: Some(h) }))
    }

    /// Grid from explicit nodes; spacing uniformity is detected automatically.
    pub fn from_nodes(nodes: Vec<f64>, anchor_index: usize) -> Result<Arc<Grid>> {
        if nodes.len() < 3 {
            return Err(Error::Config(format!("grid needs at least 3 nodes, got {}", nodes.len())));
        }
        if anchor_index >= nodes.len() {
            return Err(Error::Config(format!("anchor index {anchor_index} out of bounds")));
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid nodes must be finite and strictly increasing".into()));
        }
        let span = nodes[nodes.len() - 1] - nodes[0];
        let h = (nodes[1] - nodes[0]).abs();
        let uniform = nodes.windows(2).all(|w| (w[1] - w[0] - h).abs() <= NODE_TOL * span);
        let uniform_h = uniform.then_some(h);
        Ok(Arc::new(Grid { nodes, anchor_index, uniform_h }))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn anchor_index(&self) -> usize {
        self.anchor_index
    }

    /// The anchor x₀.
    pub fn anchor(&self) -> f64 {
        self.nodes[self.anchor_index]
    }

    /// Node spacing, when the grid is uniform.
    pub fn uniform_spacing(&self) -> Option<f64> {
        self.uniform_h
    }

    pub fn left(&self) -> f64 {
        self.nodes[0]
    }

    pub fn right(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index of the node equal to `x` up to rounding, if any.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let span = self.right() - self.left();
        let i = match self.uniform_h {
            Some(h) => ((x - self.left()) / h).round() as isize,
            None => self.nodes.partition_point(|&n| n < x) as isize,
        };
        for j in [i - 1, i, i + 1] {
            if j >= 0 && (j as usize) < self.nodes.len()
                && (self.nodes[j as usize] - x).abs() <= NODE_TOL * span.max(1.0)
            {
                return Some(j as usize);
            }
        }
        None
    }

    /// True when the grid is uniform, has its anchor at the midpoint, and is
    /// symmetric about it. Transmutation operators require this layout.
    pub fn is_symmetric(&self) -> bool {
        let n = self.nodes.len();
        if self.uniform_h.is_none() || n % 2 == 0 || self.anchor_index != n / 2 {
            return false;
        }
        let span = self.right() - self.left();
        (self.left() + self.right() - 2.0 * self.anchor()).abs() <= NODE_TOL * span.max(1.0)
    }
}

/// Values attached to the nodes of a shared grid.
///
/// Arithmetic is only defined between functions on the identical grid; a
/// mismatch panics rather than resampling, since resampling silently changes
/// the accuracy contract.
#[derive(Debug, Clone)]
pub struct SampledFunction<T: Scalar = f64> {
    grid: Arc<Grid>,
    values: Vec<T>,
}

impl<T: Scalar> SampledFunction<T> {
    pub fn new(grid: Arc<Grid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> T) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        SampledFunction { grid: Arc::clone(grid), values }
    }

    pub fn constant(grid: &Arc<Grid>, c: T) -> Self {
        SampledFunction { grid: Arc::clone(grid), values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at the anchor node.
    pub fn at_anchor(&self) -> T {
        self.values[self.grid.anchor_index()]
    }

    /// True when both functions live on the same grid (pointer or structural).
    pub fn same_grid(&self, other: &SampledFunction<T>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    fn check_same_grid(&self, other: &SampledFunction<T>, op: &str) {
        assert!(
            self.same_grid(other),
            "cross-grid {op}: operands live on different grids; resample explicitly"
        );
    }

    /// Pointwise sum. Panics on grid mismatch.
    pub fn add(&self, other: &SampledFunction<T>) -> SampledFunction<T> {
        self.check_same_grid(other, "add");
        self.zip(other, |x, y| x + y)
    }

    /// Pointwise difference. Panics on grid mismatch.
    pub fn sub(&self, other: &SampledFunction<T>) -> SampledFunction<T> {
        self.check_same_grid(other, "sub");
        self.zip(other, |x, y| x - y)
    }

    /// Pointwise product. Panics on grid mismatch.
    pub fn mul(&self, other: &SampledFunction<T>) -> SampledFunction<T> {
        self.check_same_grid(other, "mul");
        self.zip(other, |x, y| x * y)
    }

    fn zip(&self, other: &SampledFunction<T>, f: impl Fn(T, T) -> T) -> SampledFunction<T> {
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        SampledFunction { grid: Arc::clone(&self.grid), values }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> SampledFunction<T> {
        SampledFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Multiply by a scalar.
    pub fn scaled(&self, s: T) -> SampledFunction<T> {
        self.map(|x| x * s)
    }

    /// axpy update: self += other * s. Panics on grid mismatch.
    pub fn add_scaled(&mut self, other: &SampledFunction<T>, s: T) {
        self.check_same_grid(other, "add_scaled");
        for (x, &y) in self.values.iter_mut().zip(other.values.iter()) {
            *x += y * s;
        }
    }

    /// Sup norm over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Sup distance to another function on the same grid.
    pub fn sup_distance(&self, other: &SampledFunction<T>) -> f64 {
        self.check_same_grid(other, "sup_distance");
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(&x, &y)| (x - y).modulus())
            .fold(0.0, f64::max)
    }
}

impl SampledFunction<f64> {
    /// Lift real samples into the complex plane.
    pub fn to_complex(&self) -> SampledFunction<crate::C64> {
        SampledFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&x| crate::C64::new(x, 0.0)).collect(),
        }
    }
}

impl SampledFunction<crate::C64> {
    /// Real parts of the samples.
    pub fn re(&self) -> SampledFunction<f64> {
        SampledFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    /// Largest imaginary modulus over the nodes; a residual check when the
    /// result is known to be real.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}
