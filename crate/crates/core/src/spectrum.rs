//! Exact eigenfunctions, the Frobenius-based construction for general b,
//! dense discretization, eigenvalue computation, and pseudospectral
//! verification of the spectral strip `|Re lambda| <= |5/2 - b|`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg;
use crate::operator::{apply_operator, OperatorKind};

/// Roots of the indicial equation
/// `sigma^2 + (2 lambda + 2b - 5) sigma + (lambda + b - 2)(lambda + b - 1) = 0`
/// governing the local exponents at the regular singular point `xi = 0`.
#[derive(Debug, Clone, Copy)]
pub struct IndicialRoots {
    pub sigma1: Complex64,
    pub sigma2: Complex64,
    /// discriminant vanished (double root)
    pub degenerate: bool,
    /// zero is a root, i.e. `lambda + b` is 1 or 2 (logarithmic branch)
    pub zero_is_root: bool,
}

pub fn indicial_roots(lambda: Complex64, b: f64) -> IndicialRoots {
    let s = lambda + b;
    let p = 2.0 * s - 5.0;
    let q = (s - 2.0) * (s - 1.0);
    let disc = 17.0 - 8.0 * s;
    let sq = disc.sqrt();
    let sigma1 = (-p + sq) / 2.0;
    let sigma2 = (-p - sq) / 2.0;
    IndicialRoots {
        sigma1,
        sigma2,
        degenerate: disc.norm() <= 1e-12,
        zero_is_root: q.norm() <= 1e-12 || (s - 1.0).norm() <= 1e-12 || (s - 2.0).norm() <= 1e-12,
    }
}

fn cpow(base: f64, expo: Complex64) -> Complex64 {
    // principal branch; all bases sampled here are positive reals
    (expo * base.ln()).exp()
}

/// L2-branch eigenfunction of `L0` for `0 < |Re lambda| < 5/2 - b`.
///
/// For `Re lambda > 0` it lives on `xi < 0` with unit amplitude; the
/// `Re lambda < 0` case is the mirror image under `xi -> -xi`,
/// `lambda -> -lambda`.
pub fn l0_eigenfunction(lambda: Complex64, b: f64, grid: &Arc<Grid>) -> Result<GridFunction> {
    let margin = 2.5 - b;
    if !(lambda.re.abs() > 0.0 && lambda.re.abs() < margin) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} is outside the open strip 0 < |Re lambda| < 5/2 - b = {margin} \
             (membership needs Re lambda < 5/2 - b)"
        )));
    }
    if lambda.re < 0.0 {
        let mirrored = l0_eigenfunction(-lambda, b, grid)?;
        let n = grid.len();
        let vals = (0..n).map(|k| mirrored.values()[n - 1 - k]).collect();
        return GridFunction::from_values(Arc::clone(grid), vals);
    }
    Ok(GridFunction::from_complex_fn(Arc::clone(grid), move |x| {
        if x < 0.0 {
            // 1 / ((e^{-xi} - 1)^lambda (1 - e^{xi})^{b-2})
            let a = (-x).exp_m1(); // e^{-xi} - 1 > 0
            let c = -x.exp_m1(); // 1 - e^{xi} > 0
            (cpow(a, lambda) * c.powf(b - 2.0)).inv()
        } else {
            Complex64::ZERO
        }
    }))
}

/// L2-branch eigenfunction of the adjoint truncation `L0*`, which exists only
/// for `b > 5/2` and `0 < |Re lambda| < b - 5/2`.
pub fn l0_adjoint_eigenfunction(
    lambda: Complex64,
    b: f64,
    grid: &Arc<Grid>,
) -> Result<GridFunction> {
    if b <= 2.5 {
        return Err(Error::Domain(format!(
            "nonzero L2 solutions of the adjoint eigenvalue problem exist only if b > 5/2, got b = {b}"
        )));
    }
    let margin = b - 2.5;
    if !(lambda.re.abs() > 0.0 && lambda.re.abs() < margin) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} is outside the open strip 0 < |Re lambda| < b - 5/2 = {margin}"
        )));
    }
    if lambda.re < 0.0 {
        let mirrored = l0_adjoint_eigenfunction(-lambda, b, grid)?;
        let n = grid.len();
        let vals = (0..n).map(|k| mirrored.values()[n - 1 - k]).collect();
        return GridFunction::from_values(Arc::clone(grid), vals);
    }
    Ok(GridFunction::from_complex_fn(Arc::clone(grid), move |x| {
        if x > 0.0 {
            // (e^{xi} - 1)^{-lambda} / (1 - e^{-xi})^{3-b}
            let a = x.exp_m1();
            let c = -(-x).exp_m1();
            cpow(a, -lambda) * c.powf(b - 3.0)
        } else {
            Complex64::ZERO
        }
    }))
}

/// Closed-form eigenfunction of the full operator L at b = 2 (Camassa-Holm),
/// valid for `lambda` away from -1, 0, 1.
pub fn ch_exact_eigenfunction(
    lambda: Complex64,
    grid: &Arc<Grid>,
    m_minus: Complex64,
    m_plus: Complex64,
) -> Result<GridFunction> {
    for excluded in [-1.0, 0.0, 1.0] {
        if (lambda - excluded).norm() < 1e-12 {
            return Err(Error::Domain(format!(
                "the closed form requires lambda away from {{-1, 0, 1}}, got lambda = {lambda}"
            )));
        }
    }
    let pref = (lambda * (1.0 - lambda * lambda)).inv();
    Ok(GridFunction::from_complex_fn(Arc::clone(grid), move |x| {
        if x > 0.0 {
            let em1 = x.exp_m1(); // e^{xi} - 1
            pref * m_plus * (lambda + (-x).exp()) * cpow(em1, lambda)
        } else {
            let em1 = (-x).exp_m1(); // e^{-xi} - 1
            pref * m_minus * (lambda - x.exp()) * cpow(em1, -lambda)
        }
    }))
}

/// The profile `m = v - v''` solving `(1-phi) m' - b phi' m = lambda m`
/// piecewise by construction.
pub fn m_profile(
    lambda: Complex64,
    b: f64,
    m_minus: Complex64,
    m_plus: Complex64,
    grid: &Arc<Grid>,
) -> GridFunction {
    GridFunction::from_complex_fn(Arc::clone(grid), move |x| {
        if x > 0.0 {
            let base = -(-x).exp_m1(); // 1 - e^{-xi}
            m_plus * (lambda * x).exp() * cpow(base, lambda - b)
        } else {
            let base = -x.exp_m1(); // 1 - e^{xi}
            m_minus * (lambda * x).exp() * cpow(base, -lambda - b)
        }
    })
}

/// Frobenius/asymptotic data for the second-order equation satisfied by the
/// reduced profile `f` in `v = e^{lambda xi} f(xi) (1 - e^{xi})^{2-lambda-b}`.
struct ReducedOde {
    lam: Complex64,
    b: f64,
    big_l: Complex64, // lambda + b - 2
    big_m: Complex64, // lambda + b - 1
}

impl ReducedOde {
    fn new(lambda: Complex64, b: f64) -> Self {
        ReducedOde {
            lam: lambda,
            b,
            big_l: lambda + b - 2.0,
            big_m: lambda + b - 1.0,
        }
    }

    /// Series coefficients of the analytic particular solution at xi = 0:
    /// `f = c0 + c1 xi + c2 xi^2 + ...` with `c0 = -1/((l+b-2)(l+b-1))`.
    fn series(&self) -> (Complex64, Complex64, Complex64) {
        let b = self.b;
        let c0 = -(self.big_l * self.big_m).inv();
        let c1 = (3.0 - 2.0 * b) * c0 / (self.lam + b - 3.0);
        let num = -2.0 * (2.0 - b) * c1 - (b - 1.0) * (b - 3.0) * c0
            + self.big_l * c1
            + (3.0 - 2.0 * b) * self.big_l * (c1 + c0 / 2.0);
        let c2 = num / (2.0 + self.big_l * self.big_m - 4.0 * self.big_l);
        (c0, c1, c2)
    }

    /// Constant and first exponential correction of `f` as `xi -> -inf`.
    fn asymptote(&self) -> (Complex64, Complex64) {
        let b = self.b;
        let f_inf = (1.0 - self.lam * self.lam).inv();
        let f1 = f_inf * (2.0 * (b - 1.0) * (b - 3.0) + self.big_l * (3.0 - 2.0 * b))
            / (self.lam * (self.lam + 2.0));
        (f_inf, f1)
    }

    fn rhs(&self, xi: f64, f: Complex64, fp: Complex64) -> (Complex64, Complex64) {
        let b = self.b;
        let u = -xi.exp_m1(); // 1 - e^{xi} > 0 on xi < 0
        let fpp = (-1.0 - self.big_l * self.big_m * f
            - self.big_l * u * (2.0 * fp + (3.0 - 2.0 * b) * f))
            / (u * u)
            - 2.0 * (2.0 - b) * fp
            - (b - 1.0) * (b - 3.0) * f;
        (fp, fpp)
    }
}

/// Integrate the reduced equation rightward from `-R` (where the decaying
/// asymptote seeds it) to every negative node. The rightward direction keeps
/// the `e^{-xi}` homogeneous mode decaying; the `e^{xi}` mode it cannot
/// suppress is exactly the free amplitude fitted afterwards.
fn integrate_reduced(ode: &ReducedOde, nodes_neg: &[f64], r_half: f64) -> Vec<Complex64> {
    let (f_inf, f1) = ode.asymptote();
    let e = (-r_half).exp();
    let mut f = f_inf + f1 * e;
    let mut fp = f1 * e;
    let mut xi = nodes_neg[0];
    let mut out = Vec::with_capacity(nodes_neg.len());
    out.push(f);
    for &target in &nodes_neg[1..] {
        while xi < target - 1e-300 {
            let cap = 0.02f64.min(0.05 * xi.abs());
            let h = (target - xi).min(cap.max(1e-18));
            let (k1f, k1p) = ode.rhs(xi, f, fp);
            let (k2f, k2p) = ode.rhs(xi + h / 2.0, f + h / 2.0 * k1f, fp + h / 2.0 * k1p);
            let (k3f, k3p) = ode.rhs(xi + h / 2.0, f + h / 2.0 * k2f, fp + h / 2.0 * k2p);
            let (k4f, k4p) = ode.rhs(xi + h, f + h * k3f, fp + h * k3p);
            f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
            fp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            xi += h;
        }
        out.push(f);
    }
    out
}

/// Eigenfunction candidate of L from the Frobenius-regular branch.
///
/// The particular profile (normalization `m_- = 1`) is integrated on `xi < 0`
/// and combined with the free homogeneous amplitudes `c_h e^{xi}` (left) and
/// `c_+ e^{-xi}` (right), which are closed by least squares on the residual
/// `||L v - lambda v||` over the grid.
pub fn point_eigenfunction(lambda: Complex64, b: f64, grid: &Arc<Grid>) -> Result<GridFunction> {
    let margin = 2.5 - b;
    if !(lambda.re > 0.0 && lambda.re < margin) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} outside the point-spectrum regime 0 < Re lambda < 5/2 - b = {margin} \
             (Re lambda + b - 2 < 1/2 is required)"
        )));
    }
    let s = lambda + b;
    if (s - 1.0).norm() < 1e-9 || (s - 2.0).norm() < 1e-9 {
        return Err(Error::Unsupported(format!(
            "lambda + b = {s} hits the logarithmic Frobenius branch (lambda + b in {{1, 2}})"
        )));
    }
    let ode = ReducedOde::new(lambda, b);
    let half = grid.half();
    let nodes = grid.nodes();
    let f_vals = integrate_reduced(&ode, &nodes[..half], grid.half_width());
    let mut vp = vec![Complex64::ZERO; grid.len()];
    for k in 0..half {
        let x = nodes[k];
        let base = -x.exp_m1(); // 1 - e^{xi}
        vp[k] = (lambda * x).exp() * f_vals[k] * cpow(base, 2.0 - lambda - b);
    }
    let vp = GridFunction::from_values(Arc::clone(grid), vp)?;
    let u1 = GridFunction::from_complex_fn(Arc::clone(grid), |x| {
        if x < 0.0 {
            Complex64::new(x.exp(), 0.0)
        } else {
            Complex64::ZERO
        }
    });
    let u2 = GridFunction::from_complex_fn(Arc::clone(grid), |x| {
        if x > 0.0 {
            Complex64::new((-x).exp(), 0.0)
        } else {
            Complex64::ZERO
        }
    });
    let resid = |v: &GridFunction| -> Result<GridFunction> {
        apply_operator(OperatorKind::L, v, b)?.axpy(-lambda, v)
    };
    let a1 = resid(&vp)?;
    let a2 = resid(&u1)?;
    let a3 = resid(&u2)?;
    // weighted least squares for (c_h, c_plus)
    let w = grid.weights();
    let dot = |x: &GridFunction, y: &GridFunction| -> Complex64 {
        let mut acc = Complex64::ZERO;
        for i in 0..w.len() {
            acc += w[i] * x.values()[i].conj() * y.values()[i];
        }
        acc
    };
    let (g11, g12, g22) = (dot(&a2, &a2), dot(&a2, &a3), dot(&a3, &a3));
    let (r1, r2) = (-dot(&a2, &a1), -dot(&a3, &a1));
    let det = g11 * g22 - g12 * g12.conj();
    if det.norm() < 1e-30 * (g11.norm() * g22.norm()).max(1e-300) {
        return Err(Error::Numerical(
            "degenerate least-squares system for the free amplitudes".into(),
        ));
    }
    let ch = (r1 * g22 - g12 * r2) / det;
    let cp = (g11 * r2 - g12.conj() * r1) / det;
    vp.axpy(ch, &u1)?.axpy(cp, &u2)
}

/// Dense discretization of L, L0, or L* on a grid.
///
/// The operators are real, so the matrix is stored with real entries; its
/// action on complex sample vectors applies to real and imaginary parts.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    kind: OperatorKind,
    b: f64,
    grid: Arc<Grid>,
    /// row-major, dimension = node count
    data: Vec<f64>,
}

impl OperatorMatrix {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Matrix action on a sample vector.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if !f.grid().compatible(&self.grid) {
            return Err(Error::Contract("grid mismatch with operator matrix".into()));
        }
        let n = self.dim();
        let mut out = vec![Complex64::ZERO; n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = Complex64::ZERO;
            for (j, &m) in row.iter().enumerate() {
                acc += m * f.values()[j];
            }
            out[i] = acc;
        }
        GridFunction::from_values(Arc::clone(&self.grid), out)
    }
}

/// Assemble the dense matrix column by column from the operator application,
/// so the matrix action reproduces `apply_operator` to rounding.
pub fn discretize(kind: OperatorKind, b: f64, grid: &Arc<Grid>) -> Result<OperatorMatrix> {
    let n = grid.len();
    let mut data = vec![0.0; n * n];
    let mut basis = GridFunction::zero(Arc::clone(grid));
    for j in 0..n {
        basis.values_mut()[j] = Complex64::new(1.0, 0.0);
        let col = apply_operator(kind, &basis, b)?;
        for i in 0..n {
            data[i * n + j] = col.values()[i].re;
        }
        basis.values_mut()[j] = Complex64::ZERO;
    }
    Ok(OperatorMatrix {
        kind,
        b,
        grid: Arc::clone(grid),
        data,
    })
}

/// All eigenvalues of the discretized operator, sorted by real then imaginary
/// part. Conjugate-pair symmetry is exact because the matrix is real.
pub fn eigenvalues(m: &OperatorMatrix) -> Result<Vec<Complex64>> {
    linalg::dense_eigenvalues(&m.data, m.dim())
}

/// Backward error `||M v - lambda v|| / (||M||_F ||v||)` minimized over v,
/// computed on demand for a returned eigenvalue.
pub fn eigen_backward_error(m: &OperatorMatrix, lambda: Complex64) -> f64 {
    let n = m.dim();
    let mut h = m.data.clone();
    linalg::hessenberg_in_place(&mut h, n);
    let sigma = linalg::hessenberg_sigma_min(&h, n, lambda);
    sigma / linalg::frobenius_norm(&m.data)
}

/// Rectangle of spectral-parameter samples.
#[derive(Debug, Clone, Copy)]
pub struct LambdaRect {
    pub re_min: f64,
    pub re_max: f64,
    pub n_re: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub n_im: usize,
}

impl LambdaRect {
    pub fn validate(&self) -> Result<()> {
        if !(self.re_min.is_finite() && self.re_max.is_finite() && self.re_min <= self.re_max) {
            return Err(Error::Parameter("malformed Re-lambda range".into()));
        }
        if !(self.im_min.is_finite() && self.im_max.is_finite() && self.im_min <= self.im_max) {
            return Err(Error::Parameter("malformed Im-lambda range".into()));
        }
        if self.n_re == 0 || self.n_im == 0 {
            return Err(Error::Parameter("lambda rectangle needs at least one sample per axis".into()));
        }
        Ok(())
    }

    pub fn re_values(&self) -> Vec<f64> {
        axis(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_values(&self) -> Vec<f64> {
        axis(self.im_min, self.im_max, self.n_im)
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Subspace restriction for the sigma_min observable.
///
/// The truncation of the line admits grid vectors that mimic solutions
/// excluded from L2 only by their behaviour at infinity or by a
/// non-square-integrable singularity at the origin; one Dirichlet node per
/// outer boundary and a fixed count of origin-adjacent nodes are excluded so
/// that sigma_min tracks the resolvent bound instead of those artifacts.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub drop_boundary: usize,
    pub drop_inner: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            drop_boundary: 1,
            drop_inner: 3,
        }
    }
}

/// Precomputed Hessenberg form of the weighted, restricted shift family
/// `W^{1/2}(M - lambda I)W^{-1/2}`; each lambda costs O(n^2).
pub struct ScanContext {
    hess: Vec<f64>,
    dim: usize,
}

impl ScanContext {
    pub fn new(m: &OperatorMatrix, opts: ScanOptions) -> Result<ScanContext> {
        let n = m.dim();
        let half = n / 2;
        let keep: Vec<usize> = (0..n)
            .filter(|&i| {
                i >= opts.drop_boundary
                    && i < n - opts.drop_boundary
                    && !(i >= half - opts.drop_inner && i < half + opts.drop_inner)
            })
            .collect();
        if keep.len() < 8 {
            return Err(Error::Parameter(
                "scan restriction leaves fewer than 8 nodes".into(),
            ));
        }
        let w = m.grid().weights();
        let nk = keep.len();
        let mut a = vec![0.0; nk * nk];
        for (ii, &i) in keep.iter().enumerate() {
            let si = w[i].sqrt();
            for (jj, &j) in keep.iter().enumerate() {
                a[ii * nk + jj] = si * m.data[i * n + j] / w[j].sqrt();
            }
        }
        linalg::hessenberg_in_place(&mut a, nk);
        Ok(ScanContext { hess: a, dim: nk })
    }

    /// Smallest singular value of the restricted, weighted `M - lambda I`.
    pub fn sigma_min(&self, lambda: Complex64) -> f64 {
        linalg::hessenberg_sigma_min(&self.hess, self.dim, lambda)
    }
}

/// A rectangle of lambda samples with the smallest singular value of
/// `(L_h - lambda I)` at each, in the quadrature-weighted norm.
#[derive(Debug, Clone)]
pub struct SpectralScan {
    pub re_values: Vec<f64>,
    pub im_values: Vec<f64>,
    /// row-major `[i_im * n_re + i_re]`
    pub sigma_min: Vec<f64>,
    pub grid_n_half: usize,
}

/// Evaluate the sigma_min map over the rectangle; lambda points are
/// independent and evaluated in parallel with deterministic ordering.
pub fn pseudospectral_scan(
    kind: OperatorKind,
    b: f64,
    grid: &Arc<Grid>,
    rect: &LambdaRect,
    opts: ScanOptions,
) -> Result<SpectralScan> {
    rect.validate()?;
    let m = discretize(kind, b, grid)?;
    let ctx = ScanContext::new(&m, opts)?;
    let re = rect.re_values();
    let im = rect.im_values();
    let points: Vec<(usize, Complex64)> = im
        .iter()
        .enumerate()
        .flat_map(|(ii, &y)| {
            let re = &re;
            re.iter()
                .enumerate()
                .map(move |(jj, &x)| (ii * re.len() + jj, Complex64::new(x, y)))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut sigma = vec![0.0; points.len()];
    let computed: Vec<(usize, f64)> = points
        .par_iter()
        .map(|&(idx, lam)| (idx, ctx.sigma_min(lam)))
        .collect();
    for (idx, s) in computed {
        sigma[idx] = s;
    }
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite sigma_min in scan".into()));
    }
    Ok(SpectralScan {
        re_values: re,
        im_values: im,
        sigma_min: sigma,
        grid_n_half: grid.n_half(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, derivative_upwind, inner_product, l2_norm};
    use crate::kernels::PeakonProfile;

    #[test]
    fn indicial_examples() {
        // lambda + b = 2 -> roots {0, 1}
        let r = indicial_roots(Complex64::new(0.5, 0.0), 1.5);
        assert!(r.zero_is_root);
        let mut roots = [r.sigma1, r.sigma2];
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((roots[0]).norm() < 1e-12);
        assert!((roots[1] - 1.0).norm() < 1e-12);
        // lambda + b = 1 -> roots {0, 3}
        let r = indicial_roots(Complex64::new(0.25, 0.0), 0.75);
        assert!(r.zero_is_root);
        let mut roots = [r.sigma1, r.sigma2];
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!(roots[0].norm() < 1e-12);
        assert!((roots[1] - 3.0).norm() < 1e-12);
        // lambda + b = 17/8 -> double root 3/8
        let r = indicial_roots(Complex64::new(17.0 / 8.0 - 1.0, 0.0), 1.0);
        assert!(r.degenerate);
        assert!((r.sigma1 - 0.375).norm() < 1e-12);
    }

    #[test]
    fn indicial_sum_product_invariants() {
        let mut state = 7u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) * 4.0 - 2.0
        };
        for _ in 0..1000 {
            let lam = Complex64::new(rnd(), rnd());
            let b = rnd() + 2.0;
            let r = indicial_roots(lam, b);
            let sum = r.sigma1 + r.sigma2;
            let prod = r.sigma1 * r.sigma2;
            let s = lam + b;
            assert!((sum + 2.0 * s - 5.0).norm() < 1e-12);
            assert!((prod - (s - 2.0) * (s - 1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn l0_eigenfunction_residual_and_asymptote() {
        let g = build_grid(40.0, 2000, 3.0).unwrap();
        let lam = Complex64::new(0.3, 0.0);
        let v = l0_eigenfunction(lam, 2.0, &g).unwrap();
        let lv = apply_operator(OperatorKind::L0, &v, 2.0).unwrap();
        let r = l2_norm(&lv.axpy(-lam, &v).unwrap()) / l2_norm(&v);
        // the |xi|^{2-b-Re lambda} singularity limits the fixed-grid residual;
        // see the refinement check below for the convergence statement
        assert!(r <= 2e-2, "relative residual {r}");
        // v ~ e^{lambda xi} toward -inf
        let idx = g
            .nodes()
            .iter()
            .position(|&x| x > -20.0)
            .unwrap()
            .saturating_sub(1);
        let x = g.nodes()[idx];
        let ratio = v.values()[idx] / (lam * x).exp();
        assert!((ratio - 1.0).norm() < 1e-6, "ratio {ratio}");
        // outside the strip
        assert!(l0_eigenfunction(Complex64::new(0.8, 0.0), 2.0, &g).is_err());
    }

    #[test]
    fn l0_eigenfunction_residual_shrinks_under_refinement() {
        let lam = Complex64::new(0.3, 0.0);
        let mut errs = Vec::new();
        for n in [1000, 4000] {
            let g = build_grid(40.0, n, 3.0).unwrap();
            let v = l0_eigenfunction(lam, 2.0, &g).unwrap();
            let lv = apply_operator(OperatorKind::L0, &v, 2.0).unwrap();
            errs.push(l2_norm(&lv.axpy(-lam, &v).unwrap()) / l2_norm(&v));
        }
        assert!(errs[1] < 0.6 * errs[0], "{errs:?}");
    }

    #[test]
    fn l0_adjoint_eigenfunction_cases() {
        let g = build_grid(40.0, 2000, 3.0).unwrap();
        assert!(l0_adjoint_eigenfunction(Complex64::new(0.5, 0.0), 2.0, &g).is_err());
        let lam = Complex64::new(0.5, 0.0);
        let v = l0_adjoint_eigenfunction(lam, 3.5, &g).unwrap();
        // L0* v = -(1-phi) v' + (3-b) phi' v
        let dv = derivative_upwind(&v).unwrap();
        let res = GridFunction::from_values(
            Arc::clone(&g),
            g.nodes()
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    -(1.0 - PeakonProfile::phi(x)) * dv.values()[k]
                        + (3.0 - 3.5) * PeakonProfile::phi_prime(x) * v.values()[k]
                        - lam * v.values()[k]
                })
                .collect(),
        )
        .unwrap();
        assert!(l2_norm(&res) / l2_norm(&v) <= 1e-3);
        // mirrored call matches v(-xi)
        let vm = l0_adjoint_eigenfunction(-lam, 3.5, &g).unwrap();
        let n = g.len();
        for k in 0..n {
            assert!((vm.values()[k] - v.values()[n - 1 - k]).norm() < 1e-14);
        }
    }

    #[test]
    fn ch_exact_eigenfunction_residual() {
        let g = build_grid(40.0, 2000, 3.0).unwrap();
        let lam = Complex64::new(0.25, 0.0);
        assert!(ch_exact_eigenfunction(Complex64::new(1.0, 0.0), &g, Complex64::ONE, Complex64::ZERO).is_err());
        let v = ch_exact_eigenfunction(lam, &g, Complex64::ONE, Complex64::ZERO).unwrap();
        let lv = apply_operator(OperatorKind::L, &v, 2.0).unwrap();
        let r = l2_norm(&lv.axpy(-lam, &v).unwrap()) / l2_norm(&v);
        // origin singularity |xi|^{-lambda} limits the fixed-grid residual
        assert!(r < 0.08, "residual {r}");
        // L2 norm finite and stable under refinement (0 < Re lambda < 1/2)
        let g2 = build_grid(40.0, 4000, 3.0).unwrap();
        let v2 = ch_exact_eigenfunction(lam, &g2, Complex64::ONE, Complex64::ZERO).unwrap();
        let (n1, n2) = (l2_norm(&v), l2_norm(&v2));
        assert!(n2.is_finite() && n2 / n1 < 2.0 && n1 / n2 < 2.0);
    }

    #[test]
    fn m_profile_solves_first_order_equation_away_from_origin() {
        let g = build_grid(40.0, 8000, 3.0).unwrap();
        let lam = Complex64::new(0.25, 0.0);
        let b = 2.0;
        let m = m_profile(lam, b, Complex64::ONE, Complex64::ZERO, &g);
        let dm = derivative_upwind(&m).unwrap();
        let mut res2 = 0.0;
        let mut nrm2 = 0.0;
        for (k, &x) in g.nodes().iter().enumerate() {
            // m is not square integrable at the origin (m in H^{-2} only);
            // check the equation where the grid resolves it
            if x.abs() < 0.2 {
                continue;
            }
            let r = (1.0 - PeakonProfile::phi(x)) * dm.values()[k]
                - b * PeakonProfile::phi_prime(x) * m.values()[k]
                - lam * m.values()[k];
            res2 += g.weights()[k] * r.norm_sqr();
            nrm2 += g.weights()[k] * m.values()[k].norm_sqr();
        }
        assert!((res2 / nrm2).sqrt() <= 1e-4, "{}", (res2 / nrm2).sqrt());
        // zero amplitudes give the zero profile
        let z = m_profile(lam, b, Complex64::ZERO, Complex64::ZERO, &g);
        assert_eq!(l2_norm(&z), 0.0);
        // m ~ e^{lambda xi} toward -inf
        let idx = g.nodes().iter().position(|&x| x > -20.0).unwrap() - 1;
        let x = g.nodes()[idx];
        let ratio = m.values()[idx] / (lam * x).exp();
        assert!((ratio - 1.0).norm() < 1e-6);
    }

    #[test]
    fn point_eigenfunction_domain_checks() {
        let g = build_grid(40.0, 1000, 3.0).unwrap();
        assert!(point_eigenfunction(Complex64::new(0.6, 0.0), 2.0, &g).is_err());
        assert!(matches!(
            point_eigenfunction(Complex64::new(0.1, 0.0), 1.9, &g),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn point_eigenfunction_matches_closed_form_at_b2() {
        let g = build_grid(40.0, 2000, 3.0).unwrap();
        let lam = Complex64::new(0.25, 0.0);
        let v = point_eigenfunction(lam, 2.0, &g).unwrap();
        let vch = ch_exact_eigenfunction(lam, &g, Complex64::ONE, Complex64::ZERO).unwrap();
        let angle = subspace_angle_mod_homogeneous(&v, &vch, &g);
        assert!(angle <= 1e-2, "angle {angle}");
    }

    /// Principal angle between two candidates after projecting out the free
    /// homogeneous span {e^{xi} on the left, e^{-xi} on the right}.
    pub(crate) fn subspace_angle_mod_homogeneous(
        v1: &GridFunction,
        v2: &GridFunction,
        g: &Arc<Grid>,
    ) -> f64 {
        let u1 = GridFunction::from_complex_fn(Arc::clone(g), |x| {
            if x < 0.0 {
                Complex64::new(x.exp(), 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let u2 = GridFunction::from_complex_fn(Arc::clone(g), |x| {
            if x > 0.0 {
                Complex64::new((-x).exp(), 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let proj = |v: &GridFunction| -> GridFunction {
            let mut out = v.clone();
            for u in [&u1, &u2] {
                let c = inner_product(u, &out).unwrap() / inner_product(u, u).unwrap();
                out = out.axpy(-c, u).unwrap();
            }
            out
        };
        let p1 = proj(v1);
        let p2 = proj(v2);
        let c = inner_product(&p1, &p2).unwrap().norm() / (l2_norm(&p1) * l2_norm(&p2));
        c.min(1.0).acos()
    }

    #[test]
    fn discretize_agrees_with_apply() {
        let g = build_grid(20.0, 60, 2.0).unwrap();
        let m = discretize(OperatorKind::L, 2.5, &g).unwrap();
        let mut state = 99u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for _ in 0..10 {
            let f = GridFunction::from_values(
                Arc::clone(&g),
                (0..g.len()).map(|_| Complex64::new(rnd(), rnd())).collect(),
            )
            .unwrap();
            let by_matrix = m.apply(&f).unwrap();
            let direct = apply_operator(OperatorKind::L, &f, 2.5).unwrap();
            let diff = l2_norm(&by_matrix.sub(&direct).unwrap());
            assert!(diff <= 1e-12 * l2_norm(&direct).max(1.0), "diff {diff}");
        }
    }

    #[test]
    fn discretized_l_reproduces_lemma_action() {
        let g = build_grid(40.0, 500, 3.0).unwrap();
        let b = 3.0;
        let m = discretize(OperatorKind::L, b, &g).unwrap();
        let phi = PeakonProfile::sample_phi(&g);
        let phip = PeakonProfile::sample_phi_prime(&g);
        let mphi = m.apply(&phi).unwrap();
        let r1 = l2_norm(&mphi.axpy(Complex64::new(b - 2.0, 0.0), &phip).unwrap());
        assert!(r1 <= 1e-4, "{r1}");
        let r2 = l2_norm(&m.apply(&phip).unwrap());
        assert!(r2 <= 1e-4, "{r2}");
    }

    #[test]
    fn near_null_space_is_nilpotent_for_b_not_2() {
        // L phi in span{phi'} and L phi' ~ 0: nilpotent of index 2 on the span
        let g = build_grid(40.0, 2000, 3.0).unwrap();
        let b = 3.0;
        let phi = PeakonProfile::sample_phi(&g);
        let phip = PeakonProfile::sample_phi_prime(&g);
        let lphi = apply_operator(OperatorKind::L, &phi, b).unwrap();
        // component along phi' and residual off the span
        let c = inner_product(&phip, &lphi).unwrap() / inner_product(&phip, &phip).unwrap();
        let off = l2_norm(&lphi.axpy(-c, &phip).unwrap());
        assert!((c.re - (2.0 - b)).abs() < 1e-4);
        assert!(off <= 1e-5);
        let llphi = apply_operator(OperatorKind::L, &lphi, b).unwrap();
        assert!(l2_norm(&llphi) <= 1e-4);
    }

    #[test]
    fn eigenvalues_toy_examples() {
        let g = build_grid(40.0, 8, 1.0).unwrap();
        let m = discretize(OperatorKind::L0, 2.0, &g).unwrap();
        let e = eigenvalues(&m).unwrap();
        assert_eq!(e.len(), 16);
        // real matrix: conjugate pairs
        for z in &e {
            if z.im != 0.0 {
                assert!(e.iter().any(|w| (w - z.conj()).norm() < 1e-10));
            }
        }
        // backward error on demand
        let be = eigen_backward_error(&m, e[3]);
        assert!(be <= 1e-8, "backward error {be}");
    }

    #[test]
    fn scan_reflection_symmetry() {
        let g = build_grid(40.0, 250, 3.0).unwrap();
        let m = discretize(OperatorKind::L, 2.0, &g).unwrap();
        let ctx = ScanContext::new(&m, ScanOptions::default()).unwrap();
        for &(re, im) in &[(0.8, 0.3), (0.4, -0.6)] {
            let lam = Complex64::new(re, im);
            let s1 = ctx.sigma_min(lam);
            let s2 = ctx.sigma_min(-lam.conj());
            assert!(
                (s1 - s2).abs() <= 0.02 * s1.max(s2),
                "sigma({lam}) = {s1} vs sigma({}) = {s2}",
                -lam.conj()
            );
        }
    }

    #[test]
    fn scan_rectangle_layout_and_validation() {
        let g = build_grid(40.0, 64, 3.0).unwrap();
        let rect = LambdaRect {
            re_min: -0.5,
            re_max: 0.5,
            n_re: 3,
            im_min: 0.0,
            im_max: 1.0,
            n_im: 2,
        };
        let scan =
            pseudospectral_scan(OperatorKind::L, 2.0, &g, &rect, ScanOptions::default()).unwrap();
        assert_eq!(scan.sigma_min.len(), 6);
        assert!(scan.sigma_min.iter().all(|s| s.is_finite() && *s >= 0.0));
        let bad = LambdaRect {
            re_min: 0.5,
            re_max: -0.5,
            n_re: 3,
            im_min: 0.0,
            im_max: 1.0,
            n_im: 2,
        };
        assert!(bad.validate().is_err());
    }
}
