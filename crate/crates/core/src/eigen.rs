//! Eigenvalues of small real matrices.
//!
//! Balancing, reduction to upper Hessenberg form by stabilized elementary
//! similarity transforms, then Francis double-shift QR iteration. Complex
//! eigenvalues come out as exact conjugate pairs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

const MAX_ITERATIONS_PER_EIGENVALUE: usize = 60;

pub(crate) fn real_eigenvalues(m: &SquareMatrix) -> Result<Vec<Complex64>> {
    let n = m.dim();
    if is_triangular(m) {
        return Ok((0..n).map(|i| Complex64::new(m[(i, i)], 0.0)).collect());
    }
    let mut a: Vec<Vec<f64>> = m.rows();
    balance(&mut a);
    hessenberg(&mut a);
    hqr(&mut a, n)
}

/// Upper or lower triangular, diagonal included. The spectrum is then read
/// off exactly instead of being reconstructed with rounding.
fn is_triangular(m: &SquareMatrix) -> bool {
    let n = m.dim();
    let upper = (0..n).all(|i| (0..i).all(|j| m[(i, j)] == 0.0));
    let lower = (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)] == 0.0));
    upper || lower
}

fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut g = r / RADIX;
            let mut f = 1.0;
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
                for j in 0..n {
                    a[i][j] *= g;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

/// Gaussian elimination with pivoting; entries below the subdiagonal are
/// zeroed on exit.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut pivot = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                pivot = j;
            }
        }
        if pivot != m {
            for j in (m - 1)..n {
                let tmp = a[pivot][j];
                a[pivot][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut() {
                row.swap(pivot, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            a[i][j] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Complex64>> {
    let eps = f64::EPSILON;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut its = 0usize;
    let mut total_its = 0usize;
    while nn >= 0 {
        let nu = nn as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > 0 {
            let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[l][l - 1].abs() <= eps * s {
                a[l][l - 1] = 0.0;
                break;
            }
            l -= 1;
        }
        let mut x = a[nu][nu];
        if l == nu {
            wr[nu] = x + t;
            wi[nu] = 0.0;
            nn -= 1;
            its = 0;
            continue;
        }
        let mut y = a[nu - 1][nu - 1];
        let mut w = a[nu][nu - 1] * a[nu - 1][nu];
        if l == nu - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let mut z = q.abs().sqrt();
            x += t;
            if q >= 0.0 {
                z = p + sign(z, p);
                wr[nu - 1] = x + z;
                wr[nu] = x + z;
                if z != 0.0 {
                    wr[nu] = x - w / z;
                }
                wi[nu - 1] = 0.0;
                wi[nu] = 0.0;
            } else {
                wr[nu - 1] = x + p;
                wr[nu] = x + p;
                wi[nu - 1] = z;
                wi[nu] = -z;
            }
            nn -= 2;
            its = 0;
            continue;
        }

        if its == MAX_ITERATIONS_PER_EIGENVALUE {
            return Err(Error::ConvergenceFailure {
                iterations: total_its,
            });
        }
        if its > 0 && its % 10 == 0 {
            // Exceptional shift.
            t += x;
            for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                row[i] -= x;
            }
            let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;
        total_its += 1;

        // Look for two consecutive small subdiagonal elements.
        let mut m = nu - 2;
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
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in m..nu - 1 {
            a[i + 2][i] = 0.0;
            if i != m {
                a[i + 2][i - 1] = 0.0;
            }
        }

        // Double QR step on rows l..=nn and columns m..=nn.
        let mut k = m;
        while k < nu {
            if k != m {
                p = a[k][k - 1];
                q = a[k + 1][k - 1];
                r = 0.0;
                if k + 1 != nu {
                    r = a[k + 2][k - 1];
                }
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
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
                for j in k..=nu {
                    let mut pp = a[k][j] + q * a[k + 1][j];
                    if k + 1 != nu {
                        pp += r * a[k + 2][j];
                        a[k + 2][j] -= pp * z;
                    }
                    a[k + 1][j] -= pp * y;
                    a[k][j] -= pp * x;
                }
                let mmin = if nu < k + 3 { nu } else { k + 3 };
                for row in a.iter_mut().take(mmin + 1).skip(l) {
                    let mut pp = x * row[k] + y * row[k + 1];
                    if k + 1 != nu {
                        pp += z * row[k + 2];
                        row[k + 2] -= pp * r;
                    }
                    row[k + 1] -= pp * q;
                    row[k] -= pp;
                }
            }
            k += 1;
        }
    }

    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}
