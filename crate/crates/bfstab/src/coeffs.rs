//! Closed-form depth coefficients and the critical depth.
//!
//! Everything is a function of the linear speed `c_h = sqrt(tanh h)` at unit
//! wavenumber and unit gravity.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest admissible depth. Below it the expansions degenerate.
pub const H_MIN: f64 = 0.05;
/// Largest admissible depth.
pub const H_MAX: f64 = 50.0;

/// Dimensionless depth, validated against `(H_MIN, H_MAX)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Depth(f64);

impl Depth {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > H_MIN && h < H_MAX {
            Ok(Depth(h))
        } else {
            Err(Error::Domain {
                h,
                min: H_MIN,
                max: H_MAX,
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Linear phase speed `sqrt(tanh h)`.
    pub fn speed(self) -> f64 {
        self.0.tanh().sqrt()
    }
}

impl TryFrom<f64> for Depth {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Depth::new(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthCoefficients {
    pub h: f64,
    pub c_h: f64,
    pub gamma_h: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub delta_h: f64,
    pub zeta_h: f64,
    pub b_bold_h: f64,
    pub e_11: f64,
    pub e_12: f64,
    pub e_22: f64,
    pub e_wb: f64,
    pub f_11: f64,
    pub tilde_e11: f64,
    pub d_h: f64,
    pub breve_c_h: f64,
    /// `sqrt(8 e_WB / e_22)`, only when `e_WB > 0`.
    pub e_h: Option<f64>,
}

/// Whitham-Benjamin function written directly in terms of `c_h`.
pub fn e_wb(h: Depth) -> f64 {
    let h = h.value();
    let c = h.tanh().sqrt();
    let c2 = c * c;
    let c4 = c2 * c2;
    let c8 = c4 * c4;
    let e12 = c + (1.0 - c4) * h / c;
    let d_h = h - 0.25 * e12 * e12;
    let one_m = 1.0 - c4;
    ((9.0 * c8 - 10.0 * c4 + 9.0) / (8.0 * c4 * c2)
        - (1.0 + 0.5 * one_m + 0.75 * one_m * one_m * h / c2) / d_h)
        / c
}

pub fn depth_coefficients(h: Depth) -> DepthCoefficients {
    let hv = h.value();
    let c = h.speed();
    let c2 = c * c;
    let c4 = c2 * c2;
    let c8 = c4 * c4;
    let sc = c.sqrt();
    let one_m = 1.0 - c4;

    let e_12 = c + one_m * hv / c;
    let e_22 = (one_m * (1.0 + 3.0 * c4) * hv * hv + 2.0 * c2 * (c4 - 1.0) * hv + c4) / (c2 * c);
    let e_11 = (9.0 * c8 - 10.0 * c4 + 9.0) / (8.0 * c4 * c2 * c);
    let f_11 = 0.5 * one_m / (c * sc);
    let d_h = hv - 0.25 * e_12 * e_12;
    let tilde_e11 = -(1.0 / c + hv * f_11 * f_11 + e_12 * f_11 / sc) / d_h;

    let gamma_h = 1.0 + hv * one_m / c2;
    let alpha_h = 0.5 * (3.0 + c4) / (c.powi(5) * sc);
    let beta_h = 0.25 * (1.0 + c4) * (3.0 - c4) / (c.powi(6) * sc);
    let delta_h = (3.0 + c4) / (4.0 * c2 * sc);
    let zeta_h = c * gamma_h * gamma_h / 8.0;
    let b_bold_h = gamma_h * c + hv * one_m * (gamma_h - 2.0 * (1.0 - c2 * hv)) / c;

    let e_wb = e_wb(h);
    let e_h = (e_wb > 0.0).then(|| (8.0 * e_wb / e_22).sqrt());

    DepthCoefficients {
        h: hv,
        c_h: c,
        gamma_h,
        alpha_h,
        beta_h,
        delta_h,
        zeta_h,
        b_bold_h,
        e_11,
        e_12,
        e_22,
        e_wb,
        f_11,
        tilde_e11,
        d_h,
        breve_c_h: 2.0 * c - e_12,
        e_h,
    }
}

/// Root of `e_WB` inside `bracket`, by bisection with secant steps.
pub fn critical_depth(bracket: (f64, f64), tol: f64) -> Result<Depth> {
    let (mut a, mut b) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let mut fa = e_wb(Depth::new(a)?);
    let mut fb = e_wb(Depth::new(b)?);
    if fa == 0.0 {
        return Depth::new(a);
    }
    if fb == 0.0 {
        return Depth::new(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { a, b });
    }
    let tol = tol.max(4.0 * f64::EPSILON);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        // secant candidate, fall back to the midpoint when it leaves the
        // inner half of the bracket
        let s = b - fb * (b - a) / (fb - fa);
        let lo = a + 0.25 * (b - a);
        let hi = b - 0.25 * (b - a);
        let x = if s.is_finite() && s > lo && s < hi { s } else { mid };
        let fx = e_wb(Depth::new(x)?);
        if fx == 0.0 {
            return Depth::new(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a < tol {
            break;
        }
    }
    Depth::new(if fa.abs() < fb.abs() { a } else { b })
}

/// Default search for the critical depth.
pub fn critical_depth_default() -> Result<Depth> {
    critical_depth((1.0, 2.0), 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(h: f64) -> Depth {
        Depth::new(h).unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Depth::new(0.01).is_err());
        assert!(Depth::new(60.0).is_err());
        assert!(Depth::new(f64::NAN).is_err());
    }

    #[test]
    fn speed_at_unit_depth() {
        // sqrt(tanh 1) to 12 digits
        assert!((d(1.0).speed() - 0.872_693_620_898).abs() < 1e-11);
    }

    #[test]
    fn sign_of_e_wb() {
        assert!(depth_coefficients(d(1.0)).e_wb < 0.0);
        assert!(depth_coefficients(d(2.0)).e_wb > 0.0);
        assert!(depth_coefficients(d(1.0)).e_h.is_none());
        assert!(depth_coefficients(d(2.0)).e_h.is_some());
    }

    #[test]
    fn deep_water_limits() {
        let k = depth_coefficients(d(20.0));
        assert!((k.e_22 - 1.0).abs() < 1e-4);
        assert!((k.e_12 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn e22_from_b_and_zeta() {
        for h in [0.3, 1.0, 2.5, 7.0] {
            let k = depth_coefficients(d(h));
            assert!((k.e_22 - 2.0 * (k.b_bold_h - 4.0 * k.zeta_h)).abs() < 1e-12 * k.e_22.max(1.0));
        }
    }

    #[test]
    fn root_and_bracket_errors() {
        let r = critical_depth((1.0, 2.0), 1e-10).unwrap().value();
        assert!((r - 1.363).abs() < 1e-3);
        let r2 = critical_depth((1.3, 1.4), 1e-12).unwrap().value();
        assert!((r - r2).abs() < 1e-10);
        assert!(matches!(
            critical_depth((2.0, 3.0), 1e-10),
            Err(Error::NoSignChange { .. })
        ));
    }
}
