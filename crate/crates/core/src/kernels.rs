//! The peakon profile, exponential-kernel convolutions, the compact operator
//! Q in its equivalent algebraic forms, and the convolution identities they
//! satisfy.

use std::sync::Arc;

use num_complex::Complex64;

use crate::convolve::Weight;
use crate::error::{Error, Result};
use crate::grid::{derivative_upwind, l2_norm, Grid, GridFunction};

/// The peakon profile `phi(xi) = e^{-|xi|}` and its derivative.
///
/// Pure formulas; the origin itself is never sampled on the grids used here,
/// so `sgn` never needs a value at 0.
pub struct PeakonProfile;

impl PeakonProfile {
    pub fn phi(x: f64) -> f64 {
        (-x.abs()).exp()
    }

    pub fn phi_prime(x: f64) -> f64 {
        -x.signum() * (-x.abs()).exp()
    }

    pub fn sgn(x: f64) -> f64 {
        x.signum()
    }

    pub fn sample_phi(grid: &Arc<Grid>) -> GridFunction {
        GridFunction::from_real_fn(Arc::clone(grid), Self::phi)
    }

    pub fn sample_phi_prime(grid: &Arc<Grid>) -> GridFunction {
        GridFunction::from_real_fn(Arc::clone(grid), Self::phi_prime)
    }
}

/// Selector among the three equivalent algebraic expressions of Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QForm {
    /// `1/2 (b-3) phi*(phi' v) - 1/2 (2b-3) phi'*(phi v)`
    Form1,
    /// `3/2 (b-2) phi*(phi' v) + (2b-3) phi v_{-1}`
    Form2A,
    /// `-3/2 (b-2) phi'*(phi v) + (3-b) phi v_{-1}`
    Form2B,
}

fn sample_real(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Vec<f64> {
    grid.nodes().iter().map(|&x| f(x)).collect()
}

/// `(phi * f)(xi_k)`, evaluated in O(n) by exponentially weighted prefix and
/// suffix sweeps of the product-integration rule; the field is treated as
/// zero outside `[-R, R]`, committing a tail error of order `e^{-R} ||f||_L1`.
pub fn conv_phi(f: &GridFunction) -> GridFunction {
    let (a, b) = f.grid().conv.conv_pair(f.values(), Weight::One);
    let vals = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    GridFunction::from_values(Arc::clone(f.grid()), vals).expect("same grid")
}

/// `(phi' * f)(xi_k)` with the signed kernel `-sgn(xi - eta) e^{-|xi - eta|}`.
pub fn conv_phi_prime(f: &GridFunction) -> GridFunction {
    let (a, b) = f.grid().conv.conv_pair(f.values(), Weight::One);
    let vals = a.iter().zip(&b).map(|(x, y)| y - x).collect();
    GridFunction::from_values(Arc::clone(f.grid()), vals).expect("same grid")
}

pub(crate) fn conv_phi_weighted(f: &GridFunction, w: Weight) -> GridFunction {
    let (a, b) = f.grid().conv.conv_pair(f.values(), w);
    let vals = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    GridFunction::from_values(Arc::clone(f.grid()), vals).expect("same grid")
}

pub(crate) fn conv_phi_prime_weighted(f: &GridFunction, w: Weight) -> GridFunction {
    let (a, b) = f.grid().conv.conv_pair(f.values(), w);
    let vals = a.iter().zip(&b).map(|(x, y)| y - x).collect();
    GridFunction::from_values(Arc::clone(f.grid()), vals).expect("same grid")
}

/// Running integral `v_{-1}(xi) = ∫_0^xi v`, trapezoid rule outward from the
/// origin, with the origin value taken as the mean of the innermost samples.
pub fn antiderivative_from_zero(f: &GridFunction) -> GridFunction {
    let vals = f.grid().conv.antiderivative(f.values(), false);
    GridFunction::from_values(Arc::clone(f.grid()), vals).expect("same grid")
}

/// Antiderivative integrating the convolution engine's own interpolant, used
/// inside Q so that all three forms integrate the same field.
pub(crate) fn antiderivative_consistent(f: &GridFunction) -> GridFunction {
    let vals = f.grid().conv.antiderivative(f.values(), true);
    GridFunction::from_values(Arc::clone(f.grid()), vals).expect("same grid")
}

/// The compact operator Q in the selected algebraic form.
pub fn apply_q(f: &GridFunction, b: f64, form: QForm) -> GridFunction {
    let grid = f.grid();
    let phi = sample_real(grid, PeakonProfile::phi);
    match form {
        QForm::Form1 => {
            let t1 = conv_phi_weighted(f, Weight::PhiPrime);
            let t2 = conv_phi_prime_weighted(f, Weight::Phi);
            t1.scaled(Complex64::new(0.5 * (b - 3.0), 0.0))
                .axpy(Complex64::new(-0.5 * (2.0 * b - 3.0), 0.0), &t2)
                .expect("same grid")
        }
        QForm::Form2A => {
            let t1 = conv_phi_weighted(f, Weight::PhiPrime);
            let vm1 = antiderivative_consistent(f).mul_real(&phi);
            t1.scaled(Complex64::new(1.5 * (b - 2.0), 0.0))
                .axpy(Complex64::new(2.0 * b - 3.0, 0.0), &vm1)
                .expect("same grid")
        }
        QForm::Form2B => {
            let t2 = conv_phi_prime_weighted(f, Weight::Phi);
            let vm1 = antiderivative_consistent(f).mul_real(&phi);
            t2.scaled(Complex64::new(-1.5 * (b - 2.0), 0.0))
                .axpy(Complex64::new(3.0 - b, 0.0), &vm1)
                .expect("same grid")
        }
    }
}

/// Kernel selector for [`hs_norm_squared`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsKernel {
    /// `K1 = -sgn(eta) e^{-|xi - eta| - |eta|}`, the kernel of `phi*(phi' v)`.
    K1,
    /// `K2 = sgn(xi) e^{-|xi|}` on `eta` between 0 and `xi`, the kernel of
    /// `phi v_{-1}`.
    K2,
}

/// Squared Hilbert-Schmidt norm by double quadrature over the grid square.
///
/// `|K2|^2` jumps across `|eta| = |xi|`; that locus lands exactly on nodes of
/// the mirror-symmetric grid, where the mean of the one-sided limits is used
/// so the trapezoid rule keeps second order.
pub fn hs_norm_squared(kernel: HsKernel, grid: &Grid) -> f64 {
    let x = grid.nodes();
    let w = grid.weights();
    let n = x.len();
    match kernel {
        HsKernel::K1 => {
            let mut total = 0.0;
            for k in 0..n {
                let mut inner = 0.0;
                for j in 0..n {
                    inner += w[j] * (-2.0 * (x[k] - x[j]).abs() - 2.0 * x[j].abs()).exp();
                }
                total += w[k] * inner;
            }
            total
        }
        HsKernel::K2 => {
            let mut total = 0.0;
            for k in 0..n {
                let ksq = (-2.0 * x[k].abs()).exp();
                let mut inner = 0.0;
                for j in 0..n {
                    if x[j].signum() != x[k].signum() {
                        continue;
                    }
                    let r = x[j].abs() / x[k].abs();
                    if r < 1.0 {
                        inner += w[j];
                    } else if r == 1.0 {
                        inner += w[j] / 2.0;
                    }
                }
                total += w[k] * ksq * inner;
            }
            total
        }
    }
}

/// Left side of the stationary peakon balance
/// `-phi + 1/2 phi^2 + 1/4 phi*[b phi^2 + (3-b)(phi')^2]` evaluated on the
/// grid, with the profile scaled by `amplitude` (1 for the true peakon).
pub fn stationary_residual_scaled(b: f64, grid: &Arc<Grid>, amplitude: f64) -> GridFunction {
    let phi = sample_real(grid, PeakonProfile::phi);
    let phip = sample_real(grid, PeakonProfile::phi_prime);
    let a = amplitude;
    let g = GridFunction::from_values(
        Arc::clone(grid),
        phi.iter()
            .zip(&phip)
            .map(|(&p, &dp)| Complex64::new(a * a * (b * p * p + (3.0 - b) * dp * dp), 0.0))
            .collect(),
    )
    .expect("same grid");
    let conv = conv_phi(&g);
    let vals = (0..grid.len())
        .map(|i| {
            Complex64::new(-a * phi[i] + 0.5 * a * a * phi[i] * phi[i], 0.0) + 0.25 * conv.values()[i]
        })
        .collect();
    GridFunction::from_values(Arc::clone(grid), vals).expect("same grid")
}

/// Residual of Eq. (statCH) for the exact peakon profile.
pub fn stationary_residual(b: f64, grid: &Arc<Grid>) -> GridFunction {
    stationary_residual_scaled(b, grid, 1.0)
}

/// The two convolution identities every `v` in H^1 satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvIdentity {
    /// `phi'*(phi' v') = phi*(phi' v) - phi'*(phi v) + 2 (v0 - v) phi'`
    One,
    /// `phi*(phi' v) + phi'*(phi v) + 2 phi v_{-1} = 0`
    Two,
}

/// L2 norm of the selected identity's residual for the given field.
pub fn convolution_identity_residual(f: &GridFunction, which: ConvIdentity) -> Result<f64> {
    let grid = f.grid();
    let phip = sample_real(grid, PeakonProfile::phi_prime);
    match which {
        ConvIdentity::One => {
            let fp = derivative_upwind(f)?;
            let lhs = conv_phi_prime_weighted(&fp, Weight::PhiPrime);
            let t1 = conv_phi_weighted(f, Weight::PhiPrime);
            let t2 = conv_phi_prime_weighted(f, Weight::Phi);
            let v0 = f.origin_value();
            let jump = GridFunction::from_values(
                Arc::clone(grid),
                f.values()
                    .iter()
                    .zip(&phip)
                    .map(|(&v, &dp)| 2.0 * (v0 - v) * dp)
                    .collect(),
            )?;
            let rhs = t1
                .sub(&t2)?
                .axpy(Complex64::new(1.0, 0.0), &jump)?;
            Ok(l2_norm(&lhs.sub(&rhs)?))
        }
        ConvIdentity::Two => {
            let t1 = conv_phi_weighted(f, Weight::PhiPrime);
            let t2 = conv_phi_prime_weighted(f, Weight::Phi);
            let phi = sample_real(grid, PeakonProfile::phi);
            let vm1 = antiderivative_consistent(f).mul_real(&phi);
            let res = t1
                .axpy(Complex64::new(1.0, 0.0), &t2)?
                .axpy(Complex64::new(2.0, 0.0), &vm1)?;
            Ok(l2_norm(&res))
        }
    }
}

impl std::str::FromStr for QForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "form1" => Ok(QForm::Form1),
            "form2a" => Ok(QForm::Form2A),
            "form2b" => Ok(QForm::Form2B),
            other => Err(Error::Parameter(format!("unknown Q form '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, inner_product};

    fn default_grid() -> Arc<Grid> {
        build_grid(40.0, 2000, 3.0).unwrap()
    }

    #[test]
    fn profile_symmetries() {
        for &x in &[0.3, 1.7, 12.0] {
            assert_eq!(PeakonProfile::phi(-x), PeakonProfile::phi(x));
            assert_eq!(PeakonProfile::phi_prime(-x), -PeakonProfile::phi_prime(x));
            assert_eq!(PeakonProfile::phi_prime(x).abs(), PeakonProfile::phi(x));
        }
    }

    #[test]
    fn profile_satisfies_modified_helmholtz_off_origin() {
        // (1 - d^2/dxi^2) phi = 0 pointwise for xi != 0, by one-sided differences
        let h = 1e-4;
        for &x in &[0.5, -2.0, 7.0] {
            let d2 = (PeakonProfile::phi(x + h) - 2.0 * PeakonProfile::phi(x)
                + PeakonProfile::phi(x - h))
                / (h * h);
            assert!((PeakonProfile::phi(x) - d2).abs() < 1e-6);
        }
    }

    #[test]
    fn conv_phi_of_zero_is_zero() {
        let g = default_grid();
        let z = GridFunction::zero(Arc::clone(&g));
        assert_eq!(l2_norm(&conv_phi(&z)), 0.0);
        assert_eq!(l2_norm(&conv_phi_prime(&z)), 0.0);
    }

    #[test]
    fn conv_phi_of_phi_closed_form() {
        // phi * phi = (1 + |xi|) e^{-|xi|}
        let g = default_grid();
        let phi = PeakonProfile::sample_phi(&g);
        let c = conv_phi(&phi);
        for (k, &x) in g.nodes().iter().enumerate() {
            let expect = (1.0 + x.abs()) * (-x.abs()).exp();
            assert!(
                (c.values()[k].re - expect).abs() < 1e-10,
                "x={x}: {} vs {expect}",
                c.values()[k].re
            );
        }
    }

    #[test]
    fn conv_phi_of_phi_prime_closed_form() {
        // phi * phi' = -xi e^{-|xi|}
        let g = default_grid();
        let phip = PeakonProfile::sample_phi_prime(&g);
        let c = conv_phi(&phip);
        for (k, &x) in g.nodes().iter().enumerate() {
            let expect = -x * (-x.abs()).exp();
            assert!((c.values()[k].re - expect).abs() < 1e-10, "x={x}");
        }
        // phi' * phi equals the same function
        let phi = PeakonProfile::sample_phi(&g);
        let c2 = conv_phi_prime(&phi);
        for k in 0..g.len() {
            assert!((c2.values()[k] - c.values()[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn conv_derivative_consistency() {
        // d/dxi (phi * f) = phi' * f for smooth f
        let g = default_grid();
        let f = GridFunction::from_real_fn(Arc::clone(&g), |x| (-(x - 1.0) * (x - 1.0)).exp());
        let c = conv_phi(&f);
        let dc = derivative_upwind(&c).unwrap();
        let cp = conv_phi_prime(&f);
        let diff = dc.sub(&cp).unwrap();
        assert!(l2_norm(&diff) < 1e-5, "got {}", l2_norm(&diff));
    }

    #[test]
    fn antiderivative_closed_forms() {
        let g = default_grid();
        let z = GridFunction::zero(Arc::clone(&g));
        assert_eq!(l2_norm(&antiderivative_from_zero(&z)), 0.0);
        let phi = PeakonProfile::sample_phi(&g);
        let t = antiderivative_from_zero(&phi);
        for (k, &x) in g.nodes().iter().enumerate() {
            let expect = x.signum() * (1.0 - (-x.abs()).exp());
            assert!((t.values()[k].re - expect).abs() < 1e-5, "x={x}");
        }
        let phip = PeakonProfile::sample_phi_prime(&g);
        let t = antiderivative_from_zero(&phip);
        for (k, &x) in g.nodes().iter().enumerate() {
            let expect = (-x.abs()).exp() - 1.0;
            assert!((t.values()[k].re - expect).abs() < 1e-5, "x={x}");
        }
    }

    #[test]
    fn q_of_phi_and_phi_prime_match_lemma() {
        let g = default_grid();
        let phi = PeakonProfile::sample_phi(&g);
        let phip = PeakonProfile::sample_phi_prime(&g);
        for &b in &[1.0, 2.0, 2.5, 3.0, 4.0] {
            for &form in &[QForm::Form1, QForm::Form2A, QForm::Form2B] {
                // Q(phi) = (1-b)(phi' - phi phi')
                let q = apply_q(&phi, b, form);
                let expect = GridFunction::from_real_fn(Arc::clone(&g), |x| {
                    (1.0 - b)
                        * (PeakonProfile::phi_prime(x)
                            - PeakonProfile::phi(x) * PeakonProfile::phi_prime(x))
                });
                assert!(
                    l2_norm(&q.sub(&expect).unwrap()) < 1e-5,
                    "Q(phi) b={b} {form:?}"
                );
                // Q(phi') = -phi + (b-1) phi^2
                let q = apply_q(&phip, b, form);
                let expect = GridFunction::from_real_fn(Arc::clone(&g), |x| {
                    -PeakonProfile::phi(x) + (b - 1.0) * PeakonProfile::phi(x).powi(2)
                });
                assert!(
                    l2_norm(&q.sub(&expect).unwrap()) < 1e-5,
                    "Q(phi') b={b} {form:?}"
                );
            }
        }
        // Q(0) = 0
        let z = GridFunction::zero(Arc::clone(&g));
        assert_eq!(l2_norm(&apply_q(&z, 2.5, QForm::Form1)), 0.0);
    }

    #[test]
    fn q_form_equivalence_on_random_smooth_fields() {
        let g = build_grid(40.0, 1000, 3.0).unwrap();
        let mut state = 0xfeed_beefu64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for trial in 0..10 {
            let params: Vec<(f64, f64, f64)> = (0..4)
                .map(|_| (2.0 * rnd(), 10.0 * rnd(), 1.0 + rnd().abs() * 2.0))
                .collect();
            let f = GridFunction::from_real_fn(Arc::clone(&g), |x| {
                params
                    .iter()
                    .map(|&(a, c, s)| a * (-((x - c) / s).powi(2)).exp())
                    .sum()
            });
            let b = 1.0 + 3.0 * rnd().abs();
            let q1 = apply_q(&f, b, QForm::Form1);
            let q2 = apply_q(&f, b, QForm::Form2A);
            let q3 = apply_q(&f, b, QForm::Form2B);
            let nf = l2_norm(&f).max(1e-300);
            assert!(
                l2_norm(&q1.sub(&q2).unwrap()) / nf < 1e-12,
                "trial {trial}"
            );
            assert!(
                l2_norm(&q2.sub(&q3).unwrap()) / nf < 1e-12,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn q_maps_real_to_real() {
        let g = build_grid(20.0, 500, 2.0).unwrap();
        let f = GridFunction::from_real_fn(Arc::clone(&g), |x| (x * 0.7).sin() * (-x * x / 9.0).exp());
        let q = apply_q(&f, 2.7, QForm::Form2A);
        assert!(q.values().iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn q_smoothing_bound_stable_under_refinement() {
        // ||Q f||_inf <= C ||f||_L2 with C stable as the grid refines
        let mut cs = Vec::new();
        for n in [500, 1000, 2000] {
            let g = build_grid(40.0, n, 3.0).unwrap();
            let f = GridFunction::from_real_fn(Arc::clone(&g), |x| {
                (3.0 * x).sin() * (-(x / 4.0).powi(2)).exp()
            });
            let q = apply_q(&f, 3.0, QForm::Form2A);
            let sup = q.values().iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            cs.push(sup / l2_norm(&f));
        }
        assert!((cs[0] - cs[2]).abs() < 0.05 * cs[2], "{cs:?}");
    }

    #[test]
    fn hs_norms_match_paper_values() {
        let g = build_grid(40.0, 2000, 3.0).unwrap();
        let k1 = hs_norm_squared(HsKernel::K1, &g);
        let k2 = hs_norm_squared(HsKernel::K2, &g);
        assert!((k1 - 1.0).abs() < 1e-4, "K1: {k1}");
        assert!((k2 - 0.5).abs() < 1e-4, "K2: {k2}");
        let small = build_grid(1.0, 2000, 3.0).unwrap();
        assert!(hs_norm_squared(HsKernel::K1, &small) < k1);
        assert!(hs_norm_squared(HsKernel::K2, &small) < k2);
    }

    #[test]
    fn stationary_residual_vanishes_for_peakon() {
        let g = default_grid();
        for &b in &[2.0, 3.0, 4.0] {
            let r = stationary_residual(b, &g);
            let sup = r.values().iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            assert!(sup <= 1e-6, "b={b}: {sup}");
        }
        let r = stationary_residual_scaled(2.0, &g, 1.1);
        let sup = r.values().iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        assert!(sup >= 0.05, "scaled profile should break the balance: {sup}");
    }

    #[test]
    fn identity_two_residuals() {
        let g = default_grid();
        let phi = PeakonProfile::sample_phi(&g);
        let r = convolution_identity_residual(&phi, ConvIdentity::Two).unwrap();
        assert!(r <= 1e-6, "got {r}");
        let z = GridFunction::zero(Arc::clone(&g));
        assert_eq!(
            convolution_identity_residual(&z, ConvIdentity::Two).unwrap(),
            0.0
        );
    }

    #[test]
    fn identity_one_residual_gaussian() {
        let g = default_grid();
        let f = GridFunction::from_real_fn(Arc::clone(&g), |x| (-x * x).exp());
        let r = convolution_identity_residual(&f, ConvIdentity::One).unwrap();
        assert!(r <= 1e-5, "got {r}");
    }

    #[test]
    fn identity_two_neutral_in_inner_product_with_phi_prime() {
        // regression guard: the weighted convolutions and the consistent
        // antiderivative must integrate the same interpolant
        let g = default_grid();
        let f = GridFunction::from_real_fn(Arc::clone(&g), |x| (-(x - 2.0) * (x - 2.0)).exp());
        let r = convolution_identity_residual(&f, ConvIdentity::Two).unwrap();
        assert!(r < 1e-12 * l2_norm(&f).max(1.0), "got {r}");
        let _ = inner_product(&f, &f).unwrap();
    }
}
