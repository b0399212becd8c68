//! Eigenvalues of small dense real nonsymmetric matrices.
//!
//! Balancing, Householder reduction to upper Hessenberg form, then the
//! Francis double-shift QR iteration with deflation. Matrices of dimension
//! one or two are solved directly.

// The QR sweeps follow the textbook 1-based index formulation.
#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Largest accepted matrix dimension.
pub const MAX_DIM: usize = 64;

const MAX_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension {0} exceeds {MAX_DIM}")]
    TooLarge(usize),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("QR iteration did not converge; {} eigenvalues found", .partial.len())]
    NoConvergence { partial: Vec<Complex64> },
}

/// All eigenvalues, sorted by real part descending and then by imaginary
/// part descending.
pub fn eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<Complex64>, EigenError> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(EigenError::NotSquare { rows, cols });
    }
    if rows > MAX_DIM {
        return Err(EigenError::TooLarge(rows));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let mut out = match rows {
        0 => Vec::new(),
        1 => vec![Complex64::new(matrix[(0, 0)], 0.0)],
        2 => {
            let (l1, l2) = eig2(matrix[(0, 0)], matrix[(0, 1)], matrix[(1, 0)], matrix[(1, 1)]);
            vec![l1, l2]
        }
        n => {
            // 1-based working copy keeps the index arithmetic of the iteration readable
            let mut a = vec![vec![0.0; n + 1]; n + 1];
            for i in 0..n {
                for j in 0..n {
                    a[i + 1][j + 1] = matrix[(i, j)];
                }
            }
            balance(&mut a, n);
            hessenberg(&mut a, n);
            hqr(&mut a, n)?
        }
    };
    sort_spectrum(&mut out);
    Ok(out)
}

fn sort_spectrum(values: &mut [Complex64]) {
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Eigenvalues of `[[a, b], [c, d]]`.
fn eig2(a: f64, b: f64, c: f64, d: f64) -> (Complex64, Complex64) {
    let p = 0.5 * (a - d);
    let w = b * c;
    let q = p * p + w;
    if q >= 0.0 {
        let z = p + q.sqrt().copysign(p);
        if z == 0.0 {
            (Complex64::new(d, 0.0), Complex64::new(d, 0.0))
        } else {
            (Complex64::new(d + z, 0.0), Complex64::new(d - w / z, 0.0))
        }
    } else {
        let im = (-q).sqrt();
        (Complex64::new(d + p, im), Complex64::new(d + p, -im))
    }
}

/// Diagonal similarity scaling by powers of two so that row and column norms
/// are comparable.
fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 1..=n {
                    a[i][j] *= g;
                }
                for j in 1..=n {
                    a[j][i] *= f;
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    let mut v = vec![0.0; n + 1];
    for k in 1..=n.saturating_sub(2) {
        let norm = (k + 1..=n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = -norm.copysign(a[k + 1][k]);
        for i in k + 1..=n {
            v[i] = a[i][k];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..=n).map(|i| v[i] * v[i]).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for i in k + 1..=n {
            v[i] /= vnorm;
        }
        // H A
        for j in k..=n {
            let s: f64 = (k + 1..=n).map(|i| v[i] * a[i][j]).sum();
            for i in k + 1..=n {
                a[i][j] -= 2.0 * v[i] * s;
            }
        }
        // (H A) H
        for row in a.iter_mut().skip(1) {
            let s: f64 = (k + 1..=n).map(|j| row[j] * v[j]).sum();
            for j in k + 1..=n {
                row[j] -= 2.0 * s * v[j];
            }
        }
        a[k + 1][k] = alpha;
        for row in a.iter_mut().take(n + 1).skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (1-based storage).
/// The matrix is destroyed.
#[allow(clippy::many_single_char_names)]
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Complex64>, EigenError> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut found = vec![false; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }

    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                // one root
                wr[nn] = x + t;
                wi[nn] = 0.0;
                found[nn] = true;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                // two roots
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z0 = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z0.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = z0;
                    wi[nn] = -z0;
                }
                found[nn] = true;
                found[nn - 1] = true;
                nn -= 2;
                break;
            }
            if its == MAX_ITERATIONS {
                let partial = (1..=n)
                    .filter(|&i| found[i])
                    .map(|i| Complex64::new(wr[i], wi[i]))
                    .collect();
                return Err(EigenError::NoConvergence { partial });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // look for two consecutive small subdiagonal elements
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }

            // double QR step on rows l..nn and columns m..nn
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != nn - 1 { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = nn.min(k + 3);
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k != nn - 1 {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}
