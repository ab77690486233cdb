//! Truncated Fourier series on the 2π-periodic circle.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// `f(x) = sum_{|k| <= m} c_k e^{ikx}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierField {
    m: usize,
    coeffs: Vec<Complex64>,
    parity: Parity,
}

impl FourierField {
    pub fn zeros(m: usize) -> Self {
        FourierField {
            m,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * m + 1],
            parity: Parity::None,
        }
    }

    pub fn from_coeffs(m: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * m + 1 {
            return Err(Error::TruncationMismatch {
                left: 2 * m + 1,
                right: coeffs.len(),
            });
        }
        Ok(FourierField {
            m,
            coeffs,
            parity: Parity::None,
        })
    }

    /// Real trigonometric polynomial `a0 + sum a_k cos kx + sum b_k sin kx`.
    pub fn from_trig(m: usize, constant: f64, cos: &[(usize, f64)], sin: &[(usize, f64)]) -> Self {
        let mut f = FourierField::zeros(m);
        f.coeffs[m] += constant;
        for &(k, a) in cos {
            f.add_cos(k, a);
        }
        for &(k, b) in sin {
            f.add_sin(k, b);
        }
        f
    }

    pub fn add_cos(&mut self, k: usize, a: f64) {
        if k == 0 {
            self.coeffs[self.m] += a;
        } else if k <= self.m {
            self.coeffs[self.m + k] += 0.5 * a;
            self.coeffs[self.m - k] += 0.5 * a;
        }
    }

    pub fn add_sin(&mut self, k: usize, b: f64) {
        if k >= 1 && k <= self.m {
            self.coeffs[self.m + k] += Complex64::new(0.0, -0.5 * b);
            self.coeffs[self.m - k] += Complex64::new(0.0, 0.5 * b);
        }
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `e^{ikx}`, zero outside the truncation.
    pub fn get(&self, k: i64) -> Complex64 {
        let m = self.m as i64;
        if k.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + m) as usize]
        }
    }

    pub fn set(&mut self, k: i64, z: Complex64) {
        let m = self.m as i64;
        assert!(k.abs() <= m, "mode {k} outside truncation {m}");
        self.coeffs[(k + m) as usize] = z;
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[self.m].re
    }

    /// Amplitude of `cos kx` in the real representation.
    pub fn cos_coeff(&self, k: usize) -> f64 {
        if k == 0 {
            self.get(0).re
        } else {
            (self.get(k as i64) + self.get(-(k as i64))).re
        }
    }

    /// Amplitude of `sin kx` in the real representation.
    pub fn sin_coeff(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            let k = k as i64;
            (Complex64::i() * (self.get(k) - self.get(-k))).re
        }
    }

    /// Largest violation of `c_{-k} = conj(c_k)`.
    pub fn reality_defect(&self) -> f64 {
        let m = self.m as i64;
        (0..=m)
            .map(|k| (self.get(-k) - self.get(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest violation of the claimed parity (zero when untagged).
    pub fn parity_defect(&self) -> f64 {
        let m = self.m as i64;
        let sign = match self.parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
            Parity::None => return 0.0,
        };
        (0..=m)
            .map(|k| (self.get(-k) - sign * self.get(k)).norm())
            .fold(0.0, f64::max)
    }

    pub fn check_parity(&self, tol: f64) -> bool {
        self.parity_defect() <= tol
    }

    fn same_m(&self, other: &FourierField) -> Result<()> {
        if self.m == other.m {
            Ok(())
        } else {
            Err(Error::TruncationMismatch {
                left: self.m,
                right: other.m,
            })
        }
    }

    pub fn add(&self, other: &FourierField) -> Result<FourierField> {
        self.same_m(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(FourierField {
            m: self.m,
            coeffs,
            parity: Parity::None,
        })
    }

    pub fn scale(&self, s: f64) -> FourierField {
        FourierField {
            m: self.m,
            coeffs: self.coeffs.iter().map(|z| z * s).collect(),
            parity: self.parity,
        }
    }

    /// Multiply mode `k` by `symbol(k)`.
    pub fn apply(&self, symbol: impl Fn(i64) -> Complex64) -> FourierField {
        let m = self.m as i64;
        let coeffs = (-m..=m).zip(&self.coeffs).map(|(k, z)| symbol(k) * z).collect();
        FourierField {
            m: self.m,
            coeffs,
            parity: Parity::None,
        }
    }

    pub fn derivative(&self) -> FourierField {
        self.apply(|k| Complex64::new(0.0, k as f64))
    }

    /// Product with modes beyond the truncation discarded.
    pub fn mul(&self, other: &FourierField) -> Result<FourierField> {
        self.same_m(other)?;
        let m = self.m as i64;
        let mut out = FourierField::zeros(self.m);
        for k in -m..=m {
            let mut s = Complex64::new(0.0, 0.0);
            for j in (k - m).max(-m)..=(k + m).min(m) {
                s += self.get(j) * other.get(k - j);
            }
            out.coeffs[(k + m) as usize] = s;
        }
        Ok(out)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let m = self.m as i64;
        (-m..=m)
            .zip(&self.coeffs)
            .map(|(k, z)| z * Complex64::from_polar(1.0, k as f64 * x))
            .sum()
    }

    /// Samples on the uniform grid `x_j = 2πj/n`, `n > 2m`.
    pub fn to_grid(&self, n: usize) -> Vec<Complex64> {
        assert!(n > 2 * self.m, "grid of {n} points cannot hold {} modes", self.m);
        let m = self.m as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for k in -m..=m {
            buf[k.rem_euclid(n as i64) as usize] = self.get(k);
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf
    }

    /// Discrete Fourier analysis of samples on the uniform grid, keeping
    /// modes `[-m, m]`.
    pub fn from_grid(samples: &[Complex64], m: usize) -> FourierField {
        let n = samples.len();
        assert!(n > 2 * m, "grid of {n} points cannot resolve {m} modes");
        let mut buf = samples.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mi = m as i64;
        let coeffs = (-mi..=mi)
            .map(|k| buf[k.rem_euclid(n as i64) as usize] / n as f64)
            .collect();
        FourierField {
            m,
            coeffs,
            parity: Parity::None,
        }
    }

    pub fn from_real_grid(samples: &[f64], m: usize) -> FourierField {
        let z: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FourierField::from_grid(&z, m)
    }

    /// Zero imaginary and odd (or even) parts that the parity forbids.
    pub fn symmetrize(mut self, parity: Parity) -> FourierField {
        let m = self.m as i64;
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
            Parity::None => return self.with_parity(Parity::None),
        };
        for k in 0..=m {
            let a = self.get(k);
            let b = self.get(-k);
            // real field of the given parity: c_k real (even) or imaginary (odd)
            let avg = 0.5 * (a + sign * b);
            let ck = if sign > 0.0 {
                Complex64::new(avg.re, 0.0)
            } else {
                Complex64::new(0.0, avg.im)
            };
            self.set(k, ck);
            self.set(-k, sign * ck);
        }
        self.with_parity(parity)
    }

    pub fn max_abs_diff(&self, other: &FourierField) -> f64 {
        let m = self.m.max(other.m) as i64;
        (-m..=m)
            .map(|k| (self.get(k) - other.get(k)).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `sqrt(mean |f|^2)`, equal to the l2 norm of the coefficients.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn trig_roundtrip() {
        let f = FourierField::from_trig(4, 0.5, &[(1, 2.0), (3, -1.0)], &[(2, 0.25)]);
        assert!((f.cos_coeff(1) - 2.0).abs() < 1e-15);
        assert!((f.cos_coeff(3) + 1.0).abs() < 1e-15);
        assert!((f.sin_coeff(2) - 0.25).abs() < 1e-15);
        assert!((f.mean() - 0.5).abs() < 1e-15);
        let x: f64 = 0.7;
        let direct = 0.5 + 2.0 * x.cos() - (3.0 * x).cos() + 0.25 * (2.0 * x).sin();
        assert!((f.eval(x).re - direct).abs() < 1e-14);
    }

    #[test]
    fn derivative_of_sine() {
        let f = FourierField::from_trig(3, 0.0, &[], &[(2, 1.0)]);
        let d = f.derivative();
        assert!((d.cos_coeff(2) - 2.0).abs() < 1e-15);
        assert!(d.sin_coeff(2).abs() < 1e-15);
    }

    #[test]
    fn product_identity() {
        // cos x * sin x = sin(2x)/2
        let c = FourierField::from_trig(4, 0.0, &[(1, 1.0)], &[]);
        let s = FourierField::from_trig(4, 0.0, &[], &[(1, 1.0)]);
        let p = c.mul(&s).unwrap();
        assert!((p.sin_coeff(2) - 0.5).abs() < 1e-15);
        assert!(p.max_abs() <= 0.25 + 1e-15);
    }

    #[test]
    fn grid_matches_direct_evaluation() {
        let f = FourierField::from_trig(5, 0.1, &[(1, 1.0), (5, 0.3)], &[(4, -0.7)]);
        let n = 16;
        let g = f.to_grid(n);
        for (j, z) in g.iter().enumerate() {
            let x = 2.0 * PI * j as f64 / n as f64;
            assert!((z - f.eval(x)).norm() < 1e-13);
        }
        let back = FourierField::from_grid(&g, 5);
        assert!(back.max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn mismatch_is_reported() {
        let a = FourierField::zeros(3);
        let b = FourierField::zeros(4);
        assert!(matches!(a.mul(&b), Err(Error::TruncationMismatch { .. })));
    }

    proptest! {
        #[test]
        fn product_of_real_fields_is_real(a in prop::collection::vec(-1.0f64..1.0, 7),
                                          b in prop::collection::vec(-1.0f64..1.0, 7)) {
            // degree 4 times degree 4 fits in 8 modes, so nothing is discarded
            let f = FourierField::from_trig(8, a[0], &[(1, a[1]), (2, a[2]), (3, a[3])], &[(1, a[4]), (2, a[5]), (4, a[6])]);
            let g = FourierField::from_trig(8, b[0], &[(1, b[1]), (2, b[2]), (3, b[3])], &[(1, b[4]), (2, b[5]), (4, b[6])]);
            let p = f.mul(&g).unwrap();
            prop_assert!(p.reality_defect() < 1e-14);
            let x = 1.234;
            prop_assert!((p.eval(x) - f.eval(x) * g.eval(x)).norm() < 1e-12);
        }

        #[test]
        fn even_times_even_is_even(a in prop::collection::vec(-1.0f64..1.0, 3)) {
            let f = FourierField::from_trig(6, a[0], &[(1, a[1]), (2, a[2])], &[]).with_parity(Parity::Even);
            let p = f.mul(&f).unwrap().with_parity(Parity::Even);
            prop_assert!(p.check_parity(1e-14));
        }
    }
}
