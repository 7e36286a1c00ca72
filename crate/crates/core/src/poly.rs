//! Real polynomials of low degree, stored leading coefficient first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Build from coefficients, leading first. Leading zeros are stripped.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let first = coeffs.iter().position(|&c| c != 0.0);
        let coeffs = match first {
            Some(i) => coeffs[i..].to_vec(),
            None => vec![0.0],
        };
        Self { coeffs }
    }

    /// `(x - r)^m`.
    pub fn linear_power(r: f64, m: usize) -> Self {
        (0..m).fold(Polynomial::new(vec![1.0]), |acc, _| {
            acc.mul(&Polynomial::new(vec![1.0, -r]))
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == 1.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let n = self.degree();
        if n == 0 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(
            self.coeffs[..n]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (n - i) as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// Long division by a monic divisor. Returns `(quotient, remainder)`; the
    /// remainder always has `divisor.degree()` coefficients (zero-padded).
    pub fn div_rem_monic(&self, divisor: &Polynomial) -> Result<(Polynomial, Vec<f64>)> {
        if !divisor.is_monic() {
            return Err(Error::InvalidArgument("divisor must be monic".into()));
        }
        let m = divisor.degree();
        if self.degree() < m {
            let mut rem = vec![0.0; m - self.coeffs.len()];
            rem.extend_from_slice(&self.coeffs);
            return Ok((Polynomial::new(vec![0.0]), rem));
        }
        let mut work = self.coeffs.clone();
        let qlen = work.len() - m;
        for i in 0..qlen {
            let lead = work[i];
            for (j, &d) in divisor.coeffs.iter().enumerate().skip(1) {
                work[i + j] -= lead * d;
            }
        }
        let rem = work.split_off(qlen);
        Ok((Polynomial::new(work), rem))
    }

    /// All complex roots by Aberth–Ehrlich simultaneous iteration.
    ///
    /// Intended for degree ≤ 5; multiple roots converge to roughly
    /// `eps^(1/m)` accuracy as usual.
    pub fn roots(&self) -> Vec<Complex64> {
        let n = self.degree();
        if n == 0 {
            return Vec::new();
        }
        let lead = self.leading();
        let monic = Polynomial::new(self.coeffs.iter().map(|c| c / lead).collect());
        if n == 1 {
            return vec![Complex64::new(-monic.coeffs[1], 0.0)];
        }
        let deriv = monic.derivative();
        let bound = 1.0
            + monic.coeffs[1..]
                .iter()
                .map(|c| c.abs())
                .fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
                Complex64::from_polar(0.5 * bound, angle)
            })
            .collect();

        for _ in 0..1000 {
            let mut largest_step: f64 = 0.0;
            for k in 0..n {
                let pz = monic.eval_complex(z[k]);
                if pz == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ratio = pz / deriv.eval_complex(z[k]);
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != k)
                    .map(|j| (z[k] - z[j]).inv())
                    .sum();
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                if step.is_finite() {
                    z[k] -= step;
                    largest_step = largest_step.max(step.norm() / (1.0 + z[k].norm()));
                }
            }
            if largest_step <= 1e-15 {
                break;
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_of_known_product() {
        let p = Polynomial::new(vec![1.0, 3.0, 2.0]); // (x+1)(x+2)
        let (q, r) = p.div_rem_monic(&Polynomial::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(q.coeffs(), &[1.0, 2.0]);
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn linear_power_binomial() {
        assert_eq!(
            Polynomial::linear_power(-1.0, 3).coeffs(),
            &[1.0, 3.0, 3.0, 1.0]
        );
    }

    #[test]
    fn roots_of_quadratic_with_complex_pair() {
        // x^2 + 1
        let mut r = Polynomial::new(vec![1.0, 0.0, 1.0]).roots();
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-13);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn roots_of_cubic() {
        // (x+1)(x-2)(x+3)
        let p =Polynomial::new(vec![1.0, 1.0])
            .mul(&Polynomial::new(vec![1.0, -2.0]))
            .mul(&Polynomial::new(vec![1.0, 3.0]));
        let mut r: Vec<f64> = p.roots().iter().map(|z| z.re).collect();
        r.sort_by(f64::total_cmp);
        for (got, want) in r.iter().zip([-3.0, -1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
