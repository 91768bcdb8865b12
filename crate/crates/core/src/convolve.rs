//! Product-integration machinery for the exponential-kernel convolutions.
//!
//! Every convolution in this crate integrates the kernel exactly against a
//! piecewise-cubic Hermite interpolant of the samples (linear across the
//! origin gap, where the interpolated field may kink or jump). Writing
//! `A(x) = e^{-x} ∫_{-R}^{x} e^{eta} w(eta) vhat(eta) d eta` and
//! `B(x) = e^{x} ∫_{x}^{R} e^{-eta} w(eta) vhat(eta) d eta` for a weight
//! `w in {1, phi, phi'}`, both sweeps satisfy one-term recurrences with
//! per-interval coefficients that depend only on the grid, so each
//! application costs O(n). The kernel pieces recombine as
//! `phi * (w v) = A + B` and `phi' * (w v) = B - A`.
//!
//! All exponential scale factors are attached to interval endpoints, so no
//! intermediate quantity exceeds the integrand's own magnitude.

use num_complex::Complex64;

/// Weight function multiplying the field inside the convolution integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Weight {
    One,
    Phi,
    PhiPrime,
}

impl Weight {
    fn index(self) -> usize {
        match self {
            Weight::One => 0,
            Weight::Phi => 1,
            Weight::PhiPrime => 2,
        }
    }

    /// (exponent, sign) of the weight on a given side of the origin.
    fn side(self, negative: bool) -> (f64, f64) {
        match self {
            Weight::One => (0.0, 1.0),
            Weight::Phi => (if negative { 1.0 } else { -1.0 }, 1.0),
            Weight::PhiPrime => {
                if negative {
                    (1.0, 1.0)
                } else {
                    (-1.0, -1.0)
                }
            }
        }
    }
}

/// `E_m(z) = ∫_0^1 t^m e^{z t} dt`, stable for small `z` via the series.
fn em(z: f64, m: usize) -> f64 {
    if z.abs() < 0.25 {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 0usize;
        loop {
            let c = term / (m + k + 1) as f64;
            sum += c;
            if c.abs() < 1e-18 {
                return sum;
            }
            k += 1;
            term *= z / k as f64;
        }
    }
    let mut e = z.exp_m1() / z;
    let ez = z.exp();
    for mm in 1..=m {
        e = (ez - mm as f64 * e) / z;
    }
    e
}

/// Integrals of the four cubic Hermite basis functions against `e^{z t}`.
fn hermite_moments(z: f64) -> [f64; 4] {
    let e0 = em(z, 0);
    let e1 = em(z, 1);
    let e2 = em(z, 2);
    let e3 = em(z, 3);
    [
        2.0 * e3 - 3.0 * e2 + e0,
        e3 - 2.0 * e2 + e1,
        -2.0 * e3 + 3.0 * e2,
        e3 - e2,
    ]
}

/// Linear-interpolant moments `[coef_vp, coef_vq]` against `e^{z t}`.
fn linear_moments(z: f64) -> [f64; 2] {
    let e0 = em(z, 0);
    let e1 = em(z, 1);
    [e0 - e1, e1]
}

#[derive(Debug)]
struct FamilyTables {
    /// A-sweep coefficients per interval: contribution =
    /// `a[0] v_p + a[1] d_p + a[2] v_q + a[3] d_q` (slope terms zero on the gap).
    a: [Vec<f64>; 4],
    b: [Vec<f64>; 4],
}

#[derive(Debug)]
pub(crate) struct ConvTables {
    half: usize,
    /// `e^{-(x_{j+1} - x_j)}` per interval.
    decay: Vec<f64>,
    /// interval widths
    width: Vec<f64>,
    /// widths of the two gap half-pieces `[-xi_min, 0]` and `[0, xi_min]`.
    gap_halves: (f64, f64),
    fams: [FamilyTables; 3],
    /// slope-stencil base index and weights (4-point cubic fit per side)
    s_idx: Vec<usize>,
    s_wts: Vec<[f64; 4]>,
}

impl ConvTables {
    pub(crate) fn build(nodes: &[f64], n_half: usize) -> ConvTables {
        let n = nodes.len();
        let half = n_half;
        let m = n - 1;
        let gap = half - 1;
        let mut decay = vec![0.0; m];
        let mut width = vec![0.0; m];
        for j in 0..m {
            width[j] = nodes[j + 1] - nodes[j];
            decay[j] = (-width[j]).exp();
        }
        let fams = [Weight::One, Weight::Phi, Weight::PhiPrime].map(|wt| {
            let mut a = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
            let mut b = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
            for j in 0..m {
                let p = nodes[j];
                let q = nodes[j + 1];
                let h = width[j];
                if j == gap {
                    // two linear pieces [p,0] and [0,q]; vhat(0) = (v_p + v_q)/2
                    let mut acc_a = [0.0f64; 2];
                    let mut acc_b = [0.0f64; 2];
                    for (lo, hi, first) in [(p, 0.0, true), (0.0, q, false)] {
                        let hh = hi - lo;
                        let (cw, s) = wt.side(lo < 0.0 && hi <= 0.0);
                        // A kernel e^{+eta}
                        let za = (1.0 + cw) * hh;
                        let la = linear_moments(za);
                        let sa = s * ((1.0 + cw) * lo - q).exp() * hh;
                        // B kernel e^{-eta}
                        let zb = (cw - 1.0) * hh;
                        let lb = linear_moments(zb);
                        let sb = s * ((cw - 1.0) * lo + p).exp() * hh;
                        if first {
                            // endpoints (v_p, v0)
                            acc_a[0] += sa * (la[0] + la[1] / 2.0);
                            acc_a[1] += sa * (la[1] / 2.0);
                            acc_b[0] += sb * (lb[0] + lb[1] / 2.0);
                            acc_b[1] += sb * (lb[1] / 2.0);
                        } else {
                            // endpoints (v0, v_q)
                            acc_a[0] += sa * (la[0] / 2.0);
                            acc_a[1] += sa * (la[0] / 2.0 + la[1]);
                            acc_b[0] += sb * (lb[0] / 2.0);
                            acc_b[1] += sb * (lb[0] / 2.0 + lb[1]);
                        }
                    }
                    a[0][j] = acc_a[0];
                    a[2][j] = acc_a[1];
                    b[0][j] = acc_b[0];
                    b[2][j] = acc_b[1];
                } else {
                    let (cw, s) = wt.side(q <= 0.0);
                    let za = (1.0 + cw) * h;
                    let ma = hermite_moments(za);
                    let sa = s * ((1.0 + cw) * p - q).exp() * h;
                    a[0][j] = sa * ma[0];
                    a[1][j] = sa * h * ma[1];
                    a[2][j] = sa * ma[2];
                    a[3][j] = sa * h * ma[3];
                    let zb = (cw - 1.0) * h;
                    let mb = hermite_moments(zb);
                    let sb = s * (cw * p).exp() * h;
                    b[0][j] = sb * mb[0];
                    b[1][j] = sb * h * mb[1];
                    b[2][j] = sb * mb[2];
                    b[3][j] = sb * h * mb[3];
                }
            }
            FamilyTables { a, b }
        });
        // slope stencils: cubic fit through 4 nearest same-side nodes
        let mut s_idx = vec![0usize; n];
        let mut s_wts = vec![[0.0f64; 4]; n];
        for k in 0..n {
            let lo = if k < half { 0 } else { half };
            let hi = if k < half { half } else { n };
            let j0 = (k.max(lo + 1) - 1).min(hi - 4);
            let xs = &nodes[j0..j0 + 4];
            let x = nodes[k];
            for i in 0..4 {
                let mut sum = 0.0;
                for jj in 0..4 {
                    if jj == i {
                        continue;
                    }
                    let mut prod = 1.0;
                    for kk in 0..4 {
                        if kk == i || kk == jj {
                            continue;
                        }
                        prod *= (x - xs[kk]) / (xs[i] - xs[kk]);
                    }
                    sum += prod / (xs[i] - xs[jj]);
                }
                s_wts[k][i] = sum;
            }
            s_idx[k] = j0;
        }
        ConvTables {
            half,
            decay,
            width,
            gap_halves: (-nodes[gap], nodes[gap + 1]),
            fams,
            s_idx,
            s_wts,
        }
    }

    /// Cubic-fit slope estimates, one per node, never crossing the origin.
    pub(crate) fn slopes(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..v.len())
            .map(|k| {
                let j = self.s_idx[k];
                let w = &self.s_wts[k];
                w[0] * v[j] + w[1] * v[j + 1] + w[2] * v[j + 2] + w[3] * v[j + 3]
            })
            .collect()
    }

    /// Scaled prefix/suffix kernel sweeps `(A, B)` for the weighted field.
    pub(crate) fn conv_pair(&self, v: &[Complex64], wt: Weight) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = v.len();
        let d = self.slopes(v);
        let fam = &self.fams[wt.index()];
        let mut a = vec![Complex64::ZERO; n];
        for k in 1..n {
            let j = k - 1;
            let local = fam.a[0][j] * v[j]
                + fam.a[1][j] * d[j]
                + fam.a[2][j] * v[j + 1]
                + fam.a[3][j] * d[j + 1];
            a[k] = self.decay[j] * a[k - 1] + local;
        }
        let mut b = vec![Complex64::ZERO; n];
        for k in (0..n - 1).rev() {
            let j = k;
            let local = fam.b[0][j] * v[j]
                + fam.b[1][j] * d[j]
                + fam.b[2][j] * v[j + 1]
                + fam.b[3][j] * d[j + 1];
            b[k] = self.decay[j] * b[k + 1] + local;
        }
        (a, b)
    }

    /// Antiderivative from the origin, integrating the same interpolant the
    /// convolutions use (cubic per interval, linear over the gap).
    pub(crate) fn antiderivative(&self, v: &[Complex64], cubic: bool) -> Vec<Complex64> {
        let n = v.len();
        let half = self.half;
        let d = if cubic {
            self.slopes(v)
        } else {
            Vec::new()
        };
        let interval = |j: usize| -> Complex64 {
            let h = self.width[j];
            let lin = (v[j] + v[j + 1]) * (h / 2.0);
            if cubic {
                lin + (d[j] - d[j + 1]) * (h * h / 12.0)
            } else {
                lin
            }
        };
        let v0 = (v[half - 1] + v[half]) / 2.0;
        let (hl, hr) = self.gap_halves;
        let mut out = vec![Complex64::ZERO; n];
        out[half] = (v0 + v[half]) * (hr / 2.0);
        for k in half + 1..n {
            out[k] = out[k - 1] + interval(k - 1);
        }
        out[half - 1] = -((v[half - 1] + v0) * (hl / 2.0));
        for k in (0..half - 1).rev() {
            out[k] = out[k + 1] - interval(k);
        }
        out
    }
}
