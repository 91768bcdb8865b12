//! Dense linear algebra: Hessenberg reduction, the shifted double-QR
//! eigenvalue iteration for real nonsymmetric matrices, and smallest singular
//! values of shifted Hessenberg matrices via Givens QR plus inverse iteration.
//!
//! Everything here works on row-major `Vec<f64>` / `Vec<Complex64>` buffers;
//! sizes stay in the low thousands, so no blocking is attempted.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major dense view helper.
#[inline]
fn at(n: usize, i: usize, j: usize) -> usize {
    i * n + j
}

/// Orthogonal similarity reduction to upper Hessenberg form, in place.
/// The subdiagonal garbage below the first subdiagonal is zeroed.
pub fn hessenberg_in_place(a: &mut [f64], n: usize) {
    assert_eq!(a.len(), n * n);
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k, rows k+1..n
        let mut alpha = 0.0;
        for i in k + 1..n {
            alpha += a[at(n, i, k)] * a[at(n, i, k)];
        }
        alpha = alpha.sqrt();
        if alpha == 0.0 {
            continue;
        }
        if a[at(n, k + 1, k)] > 0.0 {
            alpha = -alpha;
        }
        let mut vnorm2 = 0.0;
        for i in k + 1..n {
            v[i] = a[at(n, i, k)];
            if i == k + 1 {
                v[i] -= alpha;
            }
            vnorm2 += v[i] * v[i];
        }
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // A <- (I - beta v v^T) A
        for j in k..n {
            let mut s = 0.0;
            for i in k + 1..n {
                s += v[i] * a[at(n, i, j)];
            }
            s *= beta;
            for i in k + 1..n {
                a[at(n, i, j)] -= s * v[i];
            }
        }
        // A <- A (I - beta v v^T)
        for i in 0..n {
            let mut s = 0.0;
            for j in k + 1..n {
                s += a[at(n, i, j)] * v[j];
            }
            s *= beta;
            for j in k + 1..n {
                a[at(n, i, j)] -= s * v[j];
            }
        }
        a[at(n, k + 1, k)] = alpha;
        for i in k + 2..n {
            a[at(n, i, k)] = 0.0;
        }
    }
}

/// Eigenvalues of a real upper Hessenberg matrix by the Francis double-shift
/// QR iteration (destroys `h`).
pub fn hessenberg_eigenvalues(h: &mut [f64], n: usize) -> Result<Vec<Complex64>> {
    assert_eq!(h.len(), n * n);
    let mut eig = vec![Complex64::ZERO; n];
    if n == 0 {
        return Ok(eig);
    }
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += h[at(n, i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(eig);
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // search for a negligible subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let s = h[at(n, (l - 1) as usize, (l - 1) as usize)].abs()
                    + h[at(n, l as usize, l as usize)].abs();
                let s = if s == 0.0 { anorm } else { s };
                if h[at(n, l as usize, (l - 1) as usize)].abs() + s == s {
                    h[at(n, l as usize, (l - 1) as usize)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = h[at(n, nn as usize, nn as usize)];
            if l == nn {
                eig[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let y = h[at(n, (nn - 1) as usize, (nn - 1) as usize)];
            let w = h[at(n, nn as usize, (nn - 1) as usize)]
                * h[at(n, (nn - 1) as usize, nn as usize)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    let e1 = x + z;
                    let e2 = if z != 0.0 { x - w / z } else { x + z };
                    eig[(nn - 1) as usize] = Complex64::new(e1, 0.0);
                    eig[nn as usize] = Complex64::new(e2, 0.0);
                } else {
                    eig[(nn - 1) as usize] = Complex64::new(x + p, z);
                    eig[nn as usize] = Complex64::new(x + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(Error::Numerical(format!(
                    "QR iteration did not converge after 60 sweeps at block size {}",
                    nn + 1
                )));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 || its == 30 || its == 40 || its == 50 {
                t += x;
                for i in 0..=nn as usize {
                    h[at(n, i, i)] -= x;
                }
                let s = h[at(n, nn as usize, (nn - 1) as usize)].abs()
                    + h[at(n, (nn - 1) as usize, (nn - 2) as usize)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // find two consecutive small subdiagonals
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[at(n, m as usize, m as usize)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[at(n, (m + 1) as usize, m as usize)]
                    + h[at(n, m as usize, (m + 1) as usize)];
                q = h[at(n, (m + 1) as usize, (m + 1) as usize)] - z - rr - ss;
                r = h[at(n, (m + 2) as usize, (m + 1) as usize)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[at(n, m as usize, (m - 1) as usize)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (h[at(n, (m - 1) as usize, (m - 1) as usize)].abs()
                        + z.abs()
                        + h[at(n, (m + 1) as usize, (m + 1) as usize)].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                h[at(n, i as usize, (i - 2) as usize)] = 0.0;
                if i != m + 2 {
                    h[at(n, i as usize, (i - 3) as usize)] = 0.0;
                }
            }
            // double QR sweep over rows m..nn
            for k in m..=nn - 1 {
                if k != m {
                    p = h[at(n, k as usize, (k - 1) as usize)];
                    q = h[at(n, (k + 1) as usize, (k - 1) as usize)];
                    r = 0.0;
                    if k != nn - 1 {
                        r = h[at(n, (k + 2) as usize, (k - 1) as usize)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        h[at(n, k as usize, (k - 1) as usize)] =
                            -h[at(n, k as usize, (k - 1) as usize)];
                    }
                } else {
                    h[at(n, k as usize, (k - 1) as usize)] = -s * x;
                }
                p += s;
                let xx = p / s;
                let yy = q / s;
                let zz = r / s;
                q /= p;
                r /= p;
                for j in k as usize..=nn as usize {
                    let mut pp = h[at(n, k as usize, j)] + q * h[at(n, (k + 1) as usize, j)];
                    if k != nn - 1 {
                        pp += r * h[at(n, (k + 2) as usize, j)];
                        h[at(n, (k + 2) as usize, j)] -= pp * zz;
                    }
                    h[at(n, (k + 1) as usize, j)] -= pp * yy;
                    h[at(n, k as usize, j)] -= pp * xx;
                }
                let mmin = if nn < k + 3 { nn } else { k + 3 };
                for i in l as usize..=mmin as usize {
                    let mut pp =
                        xx * h[at(n, i, k as usize)] + yy * h[at(n, i, (k + 1) as usize)];
                    if k != nn - 1 {
                        pp += zz * h[at(n, i, (k + 2) as usize)];
                        h[at(n, i, (k + 2) as usize)] -= pp * r;
                    }
                    h[at(n, i, (k + 1) as usize)] -= pp * q;
                    h[at(n, i, k as usize)] -= pp;
                }
            }
        }
    }
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eig)
}

/// Eigenvalues of a dense real matrix (Hessenberg reduction + shifted QR),
/// sorted by real part then imaginary part.
pub fn dense_eigenvalues(a: &[f64], n: usize) -> Result<Vec<Complex64>> {
    if a.len() != n * n {
        return Err(Error::Parameter("matrix buffer does not match dimension".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("matrix has non-finite entries".into()));
    }
    let mut h = a.to_vec();
    hessenberg_in_place(&mut h, n);
    hessenberg_eigenvalues(&mut h, n)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn unit_uniform(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

/// Smallest singular value of `H - lambda I` for a real upper Hessenberg `H`,
/// via complex Givens QR followed by inverse iteration on the normal
/// equations. Deterministic for a fixed seed.
pub fn hessenberg_sigma_min(h: &[f64], n: usize, lambda: Complex64) -> f64 {
    assert_eq!(h.len(), n * n);
    // R starts as H - lambda I restricted to the Hessenberg band
    let mut r = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            r[at(n, i, j)] = Complex64::new(h[at(n, i, j)], 0.0);
        }
        r[at(n, i, i)] -= lambda;
    }
    let mut scale = 0.0f64;
    for v in r.iter() {
        scale = scale.max(v.norm());
    }
    if scale == 0.0 {
        return 0.0;
    }
    // Givens QR: zero the subdiagonal
    for k in 0..n - 1 {
        let a = r[at(n, k, k)];
        let b = r[at(n, k + 1, k)];
        let rho = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if rho == 0.0 {
            continue;
        }
        let c = a / rho;
        let s = b / rho;
        for j in k..n {
            let x = r[at(n, k, j)];
            let y = r[at(n, k + 1, j)];
            r[at(n, k, j)] = c.conj() * x + s.conj() * y;
            r[at(n, k + 1, j)] = -s * x + c * y;
        }
    }
    // guard exactly singular diagonals
    let tiny = scale * 1e-200;
    for i in 0..n {
        if r[at(n, i, i)].norm() < tiny {
            r[at(n, i, i)] = Complex64::new(tiny, 0.0);
        }
    }
    // inverse iteration on R^H R, deterministic start
    let mut state = 0x5eed_0f00_dead_beef_u64;
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(unit_uniform(&mut state) - 0.5, unit_uniform(&mut state) - 0.5))
        .collect();
    normalize(&mut x);
    let mut y = vec![Complex64::ZERO; n];
    let mut z = vec![Complex64::ZERO; n];
    let mut sigma_prev = f64::INFINITY;
    for _ in 0..500 {
        // R^H y = x  (forward substitution; (R^H)_{ij} = conj(R_{ji}))
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= r[at(n, j, i)].conj() * y[j];
            }
            y[i] = acc / r[at(n, i, i)].conj();
        }
        // R z = y  (back substitution)
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= r[at(n, i, j)] * z[j];
            }
            z[i] = acc / r[at(n, i, i)];
        }
        let znorm = norm(&z);
        if !znorm.is_finite() || znorm == 0.0 {
            break;
        }
        let sigma = 1.0 / znorm.sqrt();
        for i in 0..n {
            x[i] = z[i] / znorm;
        }
        if (sigma - sigma_prev).abs() <= 1e-10 * sigma.max(1e-300) {
            sigma_prev = sigma;
            break;
        }
        sigma_prev = sigma;
    }
    // Rayleigh polish: sigma = ||R x|| for the converged unit vector
    let mut rx_norm2 = 0.0;
    for i in 0..n {
        let mut acc = Complex64::ZERO;
        for j in i..n {
            acc += r[at(n, i, j)] * x[j];
        }
        rx_norm2 += acc.norm_sqr();
    }
    rx_norm2.sqrt().min(sigma_prev)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Frobenius norm of a real matrix buffer.
pub fn frobenius_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
