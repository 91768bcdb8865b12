//! Graded symmetric grids on `[-R, R]`, quadrature, and upwind differentiation.
//!
//! Nodes straddle the peak at the origin: `xi_k = R (k/n_half)^gamma` for
//! `k = 1..n_half` on the positive side, mirrored on the negative side, so the
//! origin itself is never a node. Functions sampled on such a grid may jump
//! across 0; one-sided limits are represented by the innermost node pair.

use std::sync::Arc;

use num_complex::Complex64;

use crate::convolve::ConvTables;
use crate::error::{Error, Result};

/// Graded symmetric node set on `[-R, R]` with composite trapezoid weights.
#[derive(Debug)]
pub struct Grid {
    half_width: f64,
    grading: f64,
    n_half: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    deriv: DerivTables,
    pub(crate) conv: ConvTables,
}

/// Precomputed 3-point upwind stencils, one per node.
///
/// Stored in difference form `D f(k) = w1 (f_. - f_k) + w2 (f_.. - f_k)` so a
/// constant differentiates to exactly zero.
#[derive(Debug)]
pub(crate) struct DerivTables {
    pub(crate) idx: Vec<[usize; 2]>,
    pub(crate) wts: Vec<[f64; 2]>,
}

impl Grid {
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    /// Total node count (`2 * n_half`).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the first positive node; nodes `0..half` are negative.
    pub fn half(&self) -> usize {
        self.n_half
    }

    /// Magnitude of the innermost node pair.
    pub fn xi_min(&self) -> f64 {
        self.nodes[self.n_half]
    }

    /// Smallest spacing between consecutive nodes.
    pub fn min_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Two grids are compatible when built from identical parameters.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.half_width == other.half_width
            && self.grading == other.grading
            && self.n_half == other.n_half
    }

    pub(crate) fn deriv_tables(&self) -> &DerivTables {
        &self.deriv
    }
}

/// Build a graded symmetric grid.
///
/// `xi_k = R (k/n_half)^gamma`, `k = 1..n_half`, mirrored about the origin,
/// with composite trapezoid weights spanning `[-R, R]`.
pub fn build_grid(half_width: f64, n_half: usize, grading: f64) -> Result<Arc<Grid>> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::Parameter(format!(
            "half_width must be positive and finite, got {half_width}"
        )));
    }
    if n_half < 8 {
        return Err(Error::Parameter(format!(
            "n_half must be at least 8, got {n_half}"
        )));
    }
    if !(grading.is_finite() && grading >= 1.0) {
        return Err(Error::Parameter(format!(
            "grading exponent must be >= 1, got {grading}"
        )));
    }
    let n = 2 * n_half;
    let mut nodes = vec![0.0; n];
    for k in 1..=n_half {
        let xi = half_width * (k as f64 / n_half as f64).powf(grading);
        nodes[n_half + k - 1] = xi;
        nodes[n_half - k] = -xi;
    }
    if nodes[n_half] <= 0.0 {
        return Err(Error::Parameter(format!(
            "grading {grading} underflows the innermost node to zero at n_half {n_half}"
        )));
    }
    for p in nodes.windows(2) {
        if p[1] <= p[0] {
            return Err(Error::Parameter(
                "node set is not strictly increasing (grading too extreme)".into(),
            ));
        }
    }
    let mut weights = vec![0.0; n];
    weights[0] = (nodes[1] - nodes[0]) / 2.0;
    weights[n - 1] = (nodes[n - 1] - nodes[n - 2]) / 2.0;
    for i in 1..n - 1 {
        weights[i] = (nodes[i + 1] - nodes[i - 1]) / 2.0;
    }
    let deriv = build_deriv_tables(&nodes, n_half);
    let conv = ConvTables::build(&nodes, n_half);
    Ok(Arc::new(Grid {
        half_width,
        grading,
        n_half,
        nodes,
        weights,
        deriv,
        conv,
    }))
}

/// Second-order one-sided stencils, right-biased where the side allows it.
///
/// Characteristics of the transport term move toward negative `xi`, so
/// information arrives from the right; stencils never cross the origin. The
/// two nodes nearest a side's right end fall back to centered and left-biased
/// stencils.
fn build_deriv_tables(nodes: &[f64], n_half: usize) -> DerivTables {
    let n = nodes.len();
    let mut idx = vec![[0usize; 2]; n];
    let mut wts = vec![[0f64; 2]; n];
    for side in 0..2 {
        let lo = side * n_half;
        let hi = lo + n_half;
        for k in lo..hi {
            let (a, b, c) = if k + 2 < hi {
                (k, k + 1, k + 2)
            } else if k + 1 < hi {
                (k - 1, k, k + 1)
            } else {
                (k - 2, k - 1, k)
            };
            let (xa, xb, xc) = (nodes[a], nodes[b], nodes[c]);
            let x = nodes[k];
            let la = (2.0 * x - xb - xc) / ((xa - xb) * (xa - xc));
            let lb = (2.0 * x - xa - xc) / ((xb - xa) * (xb - xc));
            let lc = (2.0 * x - xa - xb) / ((xc - xa) * (xc - xb));
            // difference form relative to the self node
            let mut others = [(a, la), (b, lb), (c, lc)];
            others.sort_by_key(|&(j, _)| usize::from(j == k));
            // after sort the self node is last
            idx[k] = [others[0].0, others[1].0];
            wts[k] = [others[0].1, others[1].1];
        }
    }
    DerivTables { idx, wts }
}

/// Complex-valued samples on a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn from_values(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: vec![Complex64::ZERO; n],
        }
    }

    pub fn from_real_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| Complex64::new(f(x), 0.0)).collect();
        GridFunction { grid, values }
    }

    pub fn from_complex_fn(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Mean of the two innermost samples, standing in for the value at 0.
    pub fn origin_value(&self) -> Complex64 {
        let h = self.grid.half();
        (self.values[h - 1] + self.values[h]) / 2.0
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, c: Complex64) -> GridFunction {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    /// `self + c * other`; the grids must match.
    pub fn axpy(&self, c: Complex64, other: &GridFunction) -> Result<GridFunction> {
        check_same_grid(self, other)?;
        Ok(GridFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + c * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// Pointwise product with real samples of the same length.
    pub(crate) fn mul_real(&self, coef: &[f64]) -> GridFunction {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(coef)
                .map(|(&v, &c)| v * c)
                .collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }
}

pub(crate) fn check_same_grid(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if !f.grid().compatible(g.grid()) {
        return Err(Error::Contract(
            "grid mismatch between operands".into(),
        ));
    }
    Ok(())
}

/// Quadrature approximation of the L2 pairing `∫ conj(f) g`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    check_same_grid(f, g)?;
    let w = f.grid().weights();
    let mut acc = Complex64::ZERO;
    for i in 0..w.len() {
        acc += w[i] * f.values()[i].conj() * g.values()[i];
    }
    Ok(acc)
}

/// Quadrature L2 norm; real part clamped at zero before the square root.
pub fn l2_norm(f: &GridFunction) -> f64 {
    let w = f.grid().weights();
    let mut acc = 0.0;
    for i in 0..w.len() {
        acc += w[i] * f.values()[i].norm_sqr();
    }
    acc.max(0.0).sqrt()
}

/// One-sided second-order differentiation, right-biased, never crossing the
/// origin.
pub fn derivative_upwind(f: &GridFunction) -> Result<GridFunction> {
    let grid = f.grid();
    if grid.n_half() < 4 {
        return Err(Error::Parameter(
            "derivative stencils need at least 4 nodes per side".into(),
        ));
    }
    Ok(derivative_upwind_unchecked(f))
}

pub(crate) fn derivative_upwind_unchecked(f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let t = grid.deriv_tables();
    let v = f.values();
    let values = (0..v.len())
        .map(|k| {
            let [j0, j1] = t.idx[k];
            let [w0, w1] = t.wts[k];
            w0 * (v[j0] - v[k]) + w1 * (v[j1] - v[k])
        })
        .collect();
    GridFunction {
        grid: Arc::clone(grid),
        values,
    }
}
