//! Application of the linearized operator L, its truncation L0, and the
//! adjoint L*, together with the exact identities they satisfy.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{
    check_same_grid, derivative_upwind, inner_product, l2_norm, Grid, GridFunction,
};
use crate::kernels::{apply_q, conv_phi, conv_phi_prime, PeakonProfile, QForm};

/// Selector among the three operators this module applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `L = (1-phi) d/dxi + (2-b) phi' + Q`
    L,
    /// `L0 = (1-phi) d/dxi + (2-b) phi'`
    L0,
    /// `L* v = (phi-1) v' + (3-b) phi' v + 1/2 (b-3) phi' (phi*v)
    ///         + 1/2 (2b-3) phi (phi'*v)`
    LStar,
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(OperatorKind::L),
            "L0" | "l0" => Ok(OperatorKind::L0),
            "Lstar" | "lstar" | "L*" => Ok(OperatorKind::LStar),
            other => Err(Error::Parameter(format!("unknown operator kind '{other}'"))),
        }
    }
}

fn check_b(b: f64) -> Result<()> {
    if !b.is_finite() {
        return Err(Error::Parameter(format!("family parameter b = {b} is not finite")));
    }
    Ok(())
}

/// Apply the selected operator to a grid function.
///
/// The transport factor `(1-phi)` vanishes toward the origin, which keeps the
/// one-sidedness of the innermost stencils from contaminating the result. L*
/// is assembled from its own non-divergence form rather than by transposing
/// the discretization of L, so adjointness tests cross-check two code paths.
pub fn apply_operator(kind: OperatorKind, f: &GridFunction, b: f64) -> Result<GridFunction> {
    check_b(b)?;
    let grid = f.grid();
    let df = derivative_upwind(f)?;
    let n = grid.len();
    let nodes = grid.nodes();
    match kind {
        OperatorKind::L | OperatorKind::L0 => {
            let mut vals = Vec::with_capacity(n);
            for k in 0..n {
                let x = nodes[k];
                let phi = PeakonProfile::phi(x);
                let phip = PeakonProfile::phi_prime(x);
                vals.push((1.0 - phi) * df.values()[k] + (2.0 - b) * phip * f.values()[k]);
            }
            let base = GridFunction::from_values(Arc::clone(grid), vals)?;
            if kind == OperatorKind::L0 {
                return Ok(base);
            }
            let q = apply_q(f, b, QForm::Form2A);
            base.axpy(Complex64::new(1.0, 0.0), &q)
        }
        OperatorKind::LStar => {
            let cphi = conv_phi(f);
            let cphip = conv_phi_prime(f);
            let mut vals = Vec::with_capacity(n);
            for k in 0..n {
                let x = nodes[k];
                let phi = PeakonProfile::phi(x);
                let phip = PeakonProfile::phi_prime(x);
                vals.push(
                    (phi - 1.0) * df.values()[k]
                        + (3.0 - b) * phip * f.values()[k]
                        + 0.5 * (b - 3.0) * phip * cphi.values()[k]
                        + 0.5 * (2.0 * b - 3.0) * phi * cphip.values()[k],
                );
            }
            GridFunction::from_values(Arc::clone(grid), vals)
        }
    }
}

/// The four residual norms `||L* g - rhs||` for `g in {1, sgn, phi^2, phi phi'}`
/// against the closed-form right-hand sides valid for every b.
pub fn adjoint_identity_residuals(b: f64, grid: &Arc<Grid>) -> Result<[f64; 4]> {
    check_b(b)?;
    let one = GridFunction::from_real_fn(Arc::clone(grid), |_| 1.0);
    let sgn = GridFunction::from_real_fn(Arc::clone(grid), PeakonProfile::sgn);
    let phi2 = GridFunction::from_real_fn(Arc::clone(grid), |x| PeakonProfile::phi(x).powi(2));
    let phiphip = GridFunction::from_real_fn(Arc::clone(grid), |x| {
        PeakonProfile::phi(x) * PeakonProfile::phi_prime(x)
    });

    let r1 = l2_norm(&apply_operator(OperatorKind::LStar, &one, b)?);

    let rhs2 = GridFunction::from_real_fn(Arc::clone(grid), |x| {
        3.0 * (b - 2.0) * PeakonProfile::phi(x).powi(2)
    });
    let r2 = l2_norm(&apply_operator(OperatorKind::LStar, &sgn, b)?.sub(&rhs2)?);

    let rhs3 = GridFunction::from_real_fn(Arc::clone(grid), |x| {
        let p = PeakonProfile::phi(x);
        let dp = PeakonProfile::phi_prime(x);
        2.0 * (b - 3.0) * p * dp + 8.0 / 3.0 * (3.0 - b) * p * p * dp
    });
    let r3 = l2_norm(&apply_operator(OperatorKind::LStar, &phi2, b)?.sub(&rhs3)?);

    let rhs4 = GridFunction::from_real_fn(Arc::clone(grid), |x| {
        let p = PeakonProfile::phi(x);
        (b - 4.0) * p * p + 8.0 / 3.0 * (3.0 - b) * p * p * p
    });
    let r4 = l2_norm(&apply_operator(OperatorKind::LStar, &phiphip, b)?.sub(&rhs4)?);

    Ok([r1, r2, r3, r4])
}

/// The antisymmetric bounded solution `v_b` of `L* v = 0`, defined for b > 3:
/// `v_b = sgn (1-phi)^{b-3} (b(b-2) phi^2 + (3-b) phi - 1)`.
pub fn adjoint_null_vector(b: f64, grid: &Arc<Grid>) -> Result<GridFunction> {
    check_b(b)?;
    if b <= 3.0 {
        return Err(Error::Domain(format!(
            "the bounded antisymmetric null vector of L* requires b > 3 \
             (boundedness is satisfied only if b > 3), got b = {b}"
        )));
    }
    Ok(GridFunction::from_real_fn(Arc::clone(grid), move |x| {
        let p = PeakonProfile::phi(x);
        x.signum() * (1.0 - p).powf(b - 3.0) * (b * (b - 2.0) * p * p + (3.0 - b) * p - 1.0)
    }))
}

/// `|<Lf, g> - <f, L*g>|`, the discrete adjointness defect.
pub fn adjointness_residual(f: &GridFunction, g: &GridFunction, b: f64) -> Result<f64> {
    check_same_grid(f, g)?;
    let lf = apply_operator(OperatorKind::L, f, b)?;
    let lsg = apply_operator(OperatorKind::LStar, g, b)?;
    let lhs = inner_product(&lf, g)?;
    let rhs = inner_product(f, &lsg)?;
    Ok((lhs - rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn default_grid() -> Arc<Grid> {
        build_grid(40.0, 2000, 3.0).unwrap()
    }

    #[test]
    fn lemma_l_phi_and_l_phi_prime() {
        let g = default_grid();
        let phi = PeakonProfile::sample_phi(&g);
        let phip = PeakonProfile::sample_phi_prime(&g);
        for &b in &[1.0, 2.0, 2.5, 3.0, 4.0] {
            let lphi = apply_operator(OperatorKind::L, &phi, b).unwrap();
            let expect = phip.scaled(Complex64::new(2.0 - b, 0.0));
            let r1 = l2_norm(&lphi.sub(&expect).unwrap());
            assert!(r1 <= 1e-5, "b={b}: ||L phi - (2-b) phi'|| = {r1}");
            let r2 = l2_norm(&apply_operator(OperatorKind::L, &phip, b).unwrap());
            assert!(r2 <= 1e-5, "b={b}: ||L phi'|| = {r2}");
        }
    }

    #[test]
    fn lemma_residuals_shrink_under_refinement() {
        for &b in &[1.0, 2.5, 4.0] {
            let mut errs = Vec::new();
            for n in [500, 1000, 2000] {
                let g = build_grid(40.0, n, 3.0).unwrap();
                let phi = PeakonProfile::sample_phi(&g);
                let lphi = apply_operator(OperatorKind::L, &phi, b).unwrap();
                let expect = PeakonProfile::sample_phi_prime(&g).scaled(Complex64::new(2.0 - b, 0.0));
                errs.push(l2_norm(&lphi.sub(&expect).unwrap()));
            }
            assert!(errs[0] > errs[1] && errs[1] > errs[2], "b={b}: {errs:?}");
        }
    }

    #[test]
    fn l_star_annihilates_constants() {
        let g = default_grid();
        let one = GridFunction::from_real_fn(Arc::clone(&g), |_| 1.0);
        for &b in &[2.0, 3.0, 4.0] {
            let r = l2_norm(&apply_operator(OperatorKind::LStar, &one, b).unwrap());
            assert!(r <= 1e-10, "b={b}: {r}");
        }
    }

    #[test]
    fn adjoint_identities_all_b() {
        let g = default_grid();
        for &b in &[2.0, 3.0, 4.0] {
            let rs = adjoint_identity_residuals(b, &g).unwrap();
            for (i, r) in rs.iter().enumerate() {
                assert!(*r <= 1e-5, "b={b} identity {i}: {r}");
            }
        }
        // at b = 3 the right side of L* phi^2 vanishes identically
        let phi2 = GridFunction::from_real_fn(Arc::clone(&g), |x| PeakonProfile::phi(x).powi(2));
        let r = l2_norm(&apply_operator(OperatorKind::LStar, &phi2, 3.0).unwrap());
        assert!(r <= 1e-5, "L* phi^2 at b=3: {r}");
    }

    #[test]
    fn adjoint_null_vector_behaviour() {
        let g = default_grid();
        assert!(matches!(
            adjoint_null_vector(2.5, &g),
            Err(Error::Domain(_))
        ));
        for &b in &[4.0, 5.0] {
            let vb = adjoint_null_vector(b, &g).unwrap();
            let r = l2_norm(&apply_operator(OperatorKind::LStar, &vb, b).unwrap());
            assert!(r / l2_norm(&vb) <= 1e-5, "b={b}: {}", r / l2_norm(&vb));
        }
        // exact antisymmetry
        let vb = adjoint_null_vector(4.0, &g).unwrap();
        let n = g.len();
        for k in 0..n {
            assert_eq!(vb.values()[k], -vb.values()[n - 1 - k]);
        }
    }

    #[test]
    fn adjointness_on_bumps() {
        // fine uniform grid: the defect is pure discretization error
        let g = build_grid(10.0, 8000, 1.0).unwrap();
        let f = GridFunction::from_real_fn(Arc::clone(&g), |x| (-4.0 * (x - 2.0) * (x - 2.0)).exp());
        let r = adjointness_residual(&f, &f, 3.0).unwrap();
        assert!(r <= 1e-6, "got {r}");
        let z = GridFunction::zero(Arc::clone(&g));
        assert_eq!(adjointness_residual(&z, &f, 3.0).unwrap(), 0.0);
        // random smooth bumps at b = 3.5
        let f = GridFunction::from_real_fn(Arc::clone(&g), |x| {
            0.7 * (-2.0 * (x - 1.5) * (x - 1.5)).exp() - 0.3 * (-3.0 * (x + 2.0) * (x + 2.0)).exp()
        });
        let h = GridFunction::from_real_fn(Arc::clone(&g), |x| {
            (-1.5 * (x + 1.0) * (x + 1.0)).exp() + 0.5 * (-2.5 * (x - 3.0) * (x - 3.0)).exp()
        });
        let r = adjointness_residual(&f, &h, 3.5).unwrap();
        assert!(r <= 1e-5, "got {r}");
    }

    #[test]
    fn operators_are_linear_and_real() {
        let g = build_grid(20.0, 500, 2.0).unwrap();
        let f = GridFunction::from_real_fn(Arc::clone(&g), |x| (0.5 * x).sin() * (-x * x / 16.0).exp());
        let h = GridFunction::from_real_fn(Arc::clone(&g), |x| (-(x - 1.0) * (x - 1.0)).exp());
        let (alpha, beta) = (Complex64::new(1.3, -0.4), Complex64::new(-0.2, 2.0));
        for kind in [OperatorKind::L, OperatorKind::L0, OperatorKind::LStar] {
            let combo = f.scaled(alpha).axpy(beta, &h).unwrap();
            let lhs = apply_operator(kind, &combo, 2.7).unwrap();
            let rhs = apply_operator(kind, &f, 2.7)
                .unwrap()
                .scaled(alpha)
                .axpy(beta, &apply_operator(kind, &h, 2.7).unwrap())
                .unwrap();
            let diff = l2_norm(&lhs.sub(&rhs).unwrap());
            assert!(diff <= 1e-12 * l2_norm(&lhs).max(1.0), "{kind:?}: {diff}");
            // real input -> real output
            let out = apply_operator(kind, &h, 2.7).unwrap();
            assert!(out.values().iter().all(|v| v.im == 0.0), "{kind:?}");
        }
    }

    #[test]
    fn transport_coefficient_nonnegative() {
        let g = default_grid();
        for &x in g.nodes() {
            let c = 1.0 - PeakonProfile::phi(x);
            assert!(c > 0.0, "x={x}");
        }
    }
}
