//! Second-order Stokes wave, Dirichlet–Neumann expansion, conformal
//! flattening and the coefficient functions `p_ε`, `a_ε` of the linearized
//! operator.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::coeffs::Depth;
use crate::error::{Error, Result};
use crate::fourier::{FourierField, Parity};

/// Default Fourier truncation for every oracle path.
pub const DEFAULT_MODES: usize = 32;

/// Largest amplitude accepted by the perturbative routines.
pub const EPS_MAX: f64 = 0.1;

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps.abs() <= EPS_MAX {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps={eps} outside [-{EPS_MAX}, {EPS_MAX}]")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StokesExpansion {
    pub h: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub eta2_0: f64,
    pub eta2_2: f64,
    pub psi2_2: f64,
    pub eta1: FourierField,
    pub psi1: FourierField,
    pub eta2: FourierField,
    pub psi2: FourierField,
}

pub fn stokes_expansion(h: Depth) -> StokesExpansion {
    stokes_expansion_with_modes(h, DEFAULT_MODES)
}

pub fn stokes_expansion_with_modes(h: Depth, m: usize) -> StokesExpansion {
    let c = h.speed();
    let c2 = c * c;
    let c4 = c2 * c2;
    let c8 = c4 * c4;
    let c12 = c8 * c4;
    let c7 = c4 * c2 * c;
    let eta2_0 = (c4 - 1.0) / (4.0 * c2);
    let eta2_2 = (3.0 - c4) / (4.0 * c4 * c2);
    let psi2_2 = (3.0 + c8) / (8.0 * c7);
    let speed2 = (-2.0 * c12 + 13.0 * c8 - 12.0 * c4 + 9.0) / (16.0 * c7);
    StokesExpansion {
        h: h.value(),
        c0: c,
        c1: 0.0,
        c2: speed2,
        eta2_0,
        eta2_2,
        psi2_2,
        eta1: FourierField::from_trig(m, 0.0, &[(1, 1.0)], &[]).with_parity(Parity::Even),
        psi1: FourierField::from_trig(m, 0.0, &[], &[(1, 1.0 / c)]).with_parity(Parity::Odd),
        eta2: FourierField::from_trig(m, eta2_0, &[(2, eta2_2)], &[]).with_parity(Parity::Even),
        psi2: FourierField::from_trig(m, 0.0, &[], &[(2, psi2_2)]).with_parity(Parity::Odd),
    }
}

/// The ε²-truncated wave.
#[derive(Debug, Clone)]
pub struct TruncatedWave {
    pub eps: f64,
    pub eta: FourierField,
    pub psi: FourierField,
    pub speed: f64,
}

impl StokesExpansion {
    pub fn wave(&self, eps: f64) -> TruncatedWave {
        let e2 = eps * eps;
        let eta = self.eta1.scale(eps).add(&self.eta2.scale(e2)).unwrap();
        let psi = self.psi1.scale(eps).add(&self.psi2.scale(e2)).unwrap();
        TruncatedWave {
            eps,
            eta: eta.with_parity(Parity::Even),
            psi: psi.with_parity(Parity::Odd),
            speed: self.c0 + self.c1 * eps + self.c2 * e2,
        }
    }
}

/// `(G_0 + G_1(η) + G_2(η))ψ` up to the requested order in η.
pub fn dirichlet_neumann(eta: &FourierField, psi: &FourierField, h: Depth, order: u8) -> Result<FourierField> {
    if eta.modes() != psi.modes() {
        return Err(Error::TruncationMismatch {
            left: eta.modes(),
            right: psi.modes(),
        });
    }
    if order > 2 {
        return Err(Error::InvalidArgument(format!("Dirichlet-Neumann order {order} > 2")));
    }
    let hv = h.value();
    let d = |f: &FourierField| f.apply(|k| Complex64::new(k as f64, 0.0));
    let t = |f: &FourierField| f.apply(|k| Complex64::new((hv * k as f64).tanh(), 0.0));
    let g0 = |f: &FourierField| f.apply(|k| Complex64::new(k as f64 * (hv * k as f64).tanh(), 0.0));

    let mut out = g0(psi);
    if order >= 1 {
        let u = d(psi);
        let inner = eta.mul(&u)?.add(&t(&eta.mul(&t(&u))?).scale(-1.0))?;
        out = out.add(&d(&inner))?;
    }
    if order >= 2 {
        let eta2 = eta.mul(eta)?;
        let g0psi = g0(psi);
        let a = d(&d(&eta2.mul(&g0psi)?));
        let b = g0(&eta2.mul(&d(&d(psi)))?);
        let c = g0(&eta.mul(&g0(&eta.mul(&g0psi)?))?);
        out = out.add(&a.add(&b)?.add(&c.scale(-2.0))?.scale(-0.5))?;
    }
    Ok(out)
}

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| 2.0 * PI * j as f64 / n as f64)
}

/// Largest L² residual of the two traveling-wave equations evaluated on the
/// truncated wave with the second-order Dirichlet–Neumann expansion.
pub fn traveling_residual(h: Depth, eps: f64, m: usize) -> Result<f64> {
    check_eps(eps)?;
    if m < 8 {
        return Err(Error::InvalidArgument(format!("truncation M={m} below 8")));
    }
    let st = stokes_expansion_with_modes(h, m);
    let w = st.wave(eps);
    let gpsi = dirichlet_neumann(&w.eta, &w.psi, h, 2)?;
    let eta_x = w.eta.derivative();
    let psi_x = w.psi.derivative();

    let kinematic = eta_x.scale(w.speed).add(&gpsi)?;
    let r1 = kinematic.l2_norm();

    let n = 4 * m;
    let ex = eta_x.to_grid(n);
    let px = psi_x.to_grid(n);
    let et = w.eta.to_grid(n);
    let gp = gpsi.to_grid(n);
    let mut sq = 0.0;
    for j in 0..n {
        let (ex, px, et, gp) = (ex[j].re, px[j].re, et[j].re, gp[j].re);
        let num = gp + ex * px;
        let r = w.speed * px - et - 0.5 * px * px + num * num / (2.0 * (1.0 + ex * ex));
        sq += r * r;
    }
    let r2 = (sq / n as f64).sqrt();
    Ok(r1.max(r2))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalData {
    pub p_frak: FourierField,
    pub f_eps: f64,
    pub iterations: usize,
    pub residual: f64,
}

const CONFORMAL_MAX_ITER: usize = 200;

pub fn conformal_fixed_point(h: Depth, eps: f64, m: usize, tol: f64) -> Result<ConformalData> {
    check_eps(eps)?;
    let w = stokes_expansion_with_modes(h, m).wave(eps);
    conformal_for(&w.eta, h, m, tol)
}

fn conformal_for(eta: &FourierField, h: Depth, m: usize, tol: f64) -> Result<ConformalData> {
    let hv = h.value();
    let n = 4 * m;
    let xs: Vec<f64> = grid(n).collect();
    let mut p = FourierField::zeros(m);
    let mut f = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=CONFORMAL_MAX_ITER {
        let pg = p.to_grid(n);
        let comp: Vec<f64> = xs.iter().zip(&pg).map(|(x, q)| eta.eval(x + q.re).re).collect();
        let g = FourierField::from_real_grid(&comp, m);
        let f_new = g.mean();
        let p_new = g
            .apply(|k| {
                if k == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let kf = k as f64;
                    Complex64::new(0.0, -kf.signum() / ((hv + f_new) * kf.abs()).tanh())
                }
            })
            .symmetrize(Parity::Odd);
        residual = p_new.max_abs_diff(&p).max((f_new - f).abs());
        p = p_new;
        f = f_new;
        if residual < tol {
            return Ok(ConformalData {
                p_frak: p,
                f_eps: f,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "conformal fixed point",
        iterations: CONFORMAL_MAX_ITER,
        residual,
    })
}

/// Closed-form expansion coefficients of `p_ε`, `a_ε`, `𝔭` and `f_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientExpansion {
    pub p1_1: f64,
    pub p2_0: f64,
    pub p2_2: f64,
    pub a1_1: f64,
    pub a2_0: f64,
    pub a2_2: f64,
    pub pfrak1_1: f64,
    pub pfrak2_2: f64,
    pub f2: f64,
}

pub fn coefficient_expansion(h: Depth) -> CoefficientExpansion {
    let c = h.speed();
    let c2 = c * c;
    let c4 = c2 * c2;
    let c8 = c4 * c4;
    let c12 = c8 * c4;
    let c7 = c4 * c2 * c;
    CoefficientExpansion {
        p1_1: -2.0 / c,
        p2_0: (9.0 + 12.0 * c4 + 5.0 * c8 - 2.0 * c12) / (16.0 * c7),
        p2_2: -(3.0 + c4) / (2.0 * c7),
        a1_1: -(c2 + 1.0 / c2),
        a2_0: 1.5 + 0.5 / c4,
        a2_2: (-14.0 * c4 + 9.0 * c8 - 3.0) / (4.0 * c8),
        pfrak1_1: 1.0 / c2,
        pfrak2_2: (1.0 + c4) * (3.0 + c4) / (8.0 * c8),
        f2: (c4 - 3.0) / (4.0 * c2),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientFunctions {
    pub h: f64,
    pub eps: f64,
    pub p_eps: FourierField,
    pub a_eps: FourierField,
    pub f_eps: f64,
    /// Wave speed used inside `p_ε`, `a_ε`.
    pub speed: f64,
    /// Offset added to `c_h + ε² c_2` to obtain `speed` (zero unless the
    /// speed was calibrated).
    pub speed_correction: f64,
    pub conformal: ConformalData,
    pub expansion: CoefficientExpansion,
}

impl CoefficientFunctions {
    /// Flat state: `p = a = 0`, `f = 0`.
    pub fn flat(h: Depth, m: usize) -> Self {
        CoefficientFunctions {
            h: h.value(),
            eps: 0.0,
            p_eps: FourierField::zeros(m).with_parity(Parity::Even),
            a_eps: FourierField::zeros(m).with_parity(Parity::Even),
            f_eps: 0.0,
            speed: h.speed(),
            speed_correction: 0.0,
            conformal: ConformalData {
                p_frak: FourierField::zeros(m).with_parity(Parity::Odd),
                f_eps: 0.0,
                iterations: 0,
                residual: 0.0,
            },
            expansion: coefficient_expansion(h),
        }
    }

    pub fn modes(&self) -> usize {
        self.p_eps.modes()
    }
}

pub const CONFORMAL_TOL: f64 = 1e-14;

pub fn coefficient_functions(h: Depth, eps: f64, m: usize) -> Result<CoefficientFunctions> {
    check_eps(eps)?;
    let w = stokes_expansion_with_modes(h, m).wave(eps);
    coefficient_functions_for(h, &w, m)
}

/// `p_ε`, `a_ε` from an explicit wave profile and speed.
pub fn coefficient_functions_for(h: Depth, w: &TruncatedWave, m: usize) -> Result<CoefficientFunctions> {
    let conformal = conformal_for(&w.eta, h, m, CONFORMAL_TOL)?;
    let n = 4 * m;
    let c_h = h.speed();
    let c_eps = w.speed;

    let eta_x = w.eta.derivative();
    let eta_xx = eta_x.derivative();
    let psi_x = w.psi.derivative();
    let psi_xx = psi_x.derivative();
    let pg = conformal.p_frak.to_grid(n);
    let pxg = conformal.p_frak.derivative().to_grid(n);

    let mut cp = Vec::with_capacity(n);
    let mut oa = Vec::with_capacity(n);
    for (j, x) in grid(n).enumerate() {
        let y = x + pg[j].re;
        let s = eta_x.eval(y).re;
        let sx = eta_xx.eval(y).re;
        let t = psi_x.eval(y).re;
        let tx = psi_xx.eval(y).re;
        let q = 1.0 + s * s;
        let b_x = tx * s / q + (t - c_eps) * sx * (1.0 - s * s) / (q * q);
        let b = (t - c_eps) * s / q;
        let v = t - b * s;
        let jac = 1.0 + pxg[j].re;
        cp.push((c_eps - v) / jac - c_h);
        oa.push((1.0 + (v - c_eps) * b_x) / jac - 1.0);
    }
    let p_eps = FourierField::from_real_grid(&cp, m).symmetrize(Parity::Even);
    let a_eps = FourierField::from_real_grid(&oa, m).symmetrize(Parity::Even);
    Ok(CoefficientFunctions {
        h: h.value(),
        eps: w.eps,
        p_eps,
        a_eps,
        f_eps: conformal.f_eps,
        speed: c_eps,
        speed_correction: 0.0,
        conformal,
        expansion: coefficient_expansion(h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(h: f64) -> Depth {
        Depth::new(h).unwrap()
    }

    #[test]
    fn deep_water_second_order() {
        let s = stokes_expansion(d(25.0));
        assert!(s.eta2_0.abs() < 1e-6);
        assert!((s.eta2_2 - 0.5).abs() < 1e-6);
        assert!((s.psi2_2 - 0.5).abs() < 1e-6);
        assert_eq!(s.c1, 0.0);
    }

    #[test]
    fn mean_level_at_unit_depth() {
        let t = 1f64.tanh();
        let s = stokes_expansion(d(1.0));
        assert!(s.eta2_0 < 0.0);
        assert!((s.eta2_0 - (t * t - 1.0) / (4.0 * t)).abs() < 1e-14);
    }

    #[test]
    fn second_order_solves_linear_system() {
        // B0 (eta2, psi2) = forcing at mode 2 and mode 0, solved independently
        for h in [0.5, 1.0, 3.0] {
            let c = d(h).speed();
            let s = stokes_expansion(d(h));
            let c2 = c * c;
            let rhs_cos = -0.25 * (1.0 / c2 + c2);
            let rhs_sin = -(1.0 - c2 * c2) / (c * (1.0 + c2 * c2));
            let t2 = (2.0 * h).tanh();
            let det = 2.0 * t2 - 4.0 * c2;
            let eta22 = (rhs_cos * 2.0 * t2 + 2.0 * c * rhs_sin) / det;
            let psi22 = (rhs_sin + 2.0 * c * rhs_cos) / det;
            assert!((s.eta2_2 - eta22).abs() < 1e-12);
            assert!((s.psi2_2 - psi22).abs() < 1e-12);
            assert!((s.eta2_0 + 0.25 * (1.0 / c2 - c2)).abs() < 1e-12);
        }
    }

    #[test]
    fn dn_flat_surface() {
        let h = d(1.3);
        let eta = FourierField::zeros(8);
        let psi = FourierField::from_trig(8, 0.0, &[], &[(1, 1.0)]);
        let g = dirichlet_neumann(&eta, &psi, h, 2).unwrap();
        assert!((g.sin_coeff(1) - 1.3f64.tanh()).abs() < 1e-15);
        assert!(g.max_abs() <= 0.5 * 1.3f64.tanh() + 1e-15);
    }

    #[test]
    fn dn_first_order_term() {
        for hv in [0.7, 1.0, 2.0] {
            let h = d(hv);
            let c = h.speed();
            let c4 = c.powi(4);
            let eta = FourierField::from_trig(8, 0.0, &[(1, 1.0)], &[]);
            let psi = FourierField::from_trig(8, 0.0, &[], &[(1, 1.0 / c)]);
            let g0 = dirichlet_neumann(&eta, &psi, h, 0).unwrap();
            let g1 = dirichlet_neumann(&eta, &psi, h, 1).unwrap();
            let diff = g1.add(&g0.scale(-1.0)).unwrap();
            assert!((diff.sin_coeff(2) - (1.0 - c4) / (c * (1.0 + c4))).abs() < 1e-14);
            assert!((g0.sin_coeff(1) - c).abs() < 1e-14);
        }
    }

    #[test]
    fn dn_second_order_projection() {
        // first-harmonic part of G2(eta1) psi1
        let h = d(1.4);
        let c = h.speed();
        let c4 = c.powi(4);
        let eta = FourierField::from_trig(8, 0.0, &[(1, 1.0)], &[]);
        let psi = FourierField::from_trig(8, 0.0, &[], &[(1, 1.0 / c)]);
        let g1 = dirichlet_neumann(&eta, &psi, h, 1).unwrap();
        let g2 = dirichlet_neumann(&eta, &psi, h, 2).unwrap();
        let part = g2.add(&g1.scale(-1.0)).unwrap();
        assert!((part.sin_coeff(1) - c * (3.0 * c4 - 1.0) / (4.0 * (1.0 + c4))).abs() < 1e-13);
    }

    #[test]
    fn dn_kills_constants() {
        let h = d(0.9);
        let eta = FourierField::from_trig(8, 0.2, &[(1, 0.3), (2, -0.1)], &[(3, 0.05)]);
        let psi = FourierField::from_trig(8, 1.7, &[], &[]);
        for order in 0..=2 {
            assert!(dirichlet_neumann(&eta, &psi, h, order).unwrap().max_abs() < 1e-15);
        }
    }

    #[test]
    fn residual_flat_and_cubic() {
        assert!(traveling_residual(d(1.5), 0.0, 32).unwrap() <= 1e-14);
        let r1 = traveling_residual(d(1.5), 0.02, 32).unwrap();
        let r2 = traveling_residual(d(1.5), 0.01, 32).unwrap();
        let ratio = r1 / r2;
        assert!((6.5..=9.5).contains(&ratio), "ratio {ratio}");
        assert!(traveling_residual(d(2.0), 0.01, 32).unwrap() <= 1e-5);
    }

    #[test]
    fn kinematic_equation_to_second_order() {
        let h = d(1.2);
        let m = 16;
        for eps in [0.02, 0.01] {
            let w = stokes_expansion_with_modes(h, m).wave(eps);
            let g = dirichlet_neumann(&w.eta, &w.psi, h, 2).unwrap();
            let r = g.add(&w.eta.derivative().scale(w.speed)).unwrap();
            assert!(r.max_abs() < 5.0 * eps.powi(3), "eps {eps}: {}", r.max_abs());
        }
    }

    #[test]
    fn conformal_zero_amplitude() {
        let c = conformal_fixed_point(d(1.0), 0.0, 16, 1e-14).unwrap();
        assert!(c.p_frak.max_abs() == 0.0);
        assert!(c.f_eps == 0.0);
    }

    #[test]
    fn conformal_leading_terms() {
        let h = d(1.0);
        let eps = 0.01;
        let c = h.speed();
        let cf = conformal_fixed_point(h, eps, 32, 1e-15).unwrap();
        assert!(cf.p_frak.check_parity(1e-12));
        let s1 = cf.p_frak.sin_coeff(1);
        // measured relative remainder is about 2.63 ε² at h = 1
        assert!(((s1 - eps / (c * c)) / (eps / (c * c))).abs() < 3.0 * eps * eps);
        let f2 = (c.powi(4) - 3.0) / (4.0 * c * c);
        assert!((cf.f_eps / (eps * eps) - f2).abs() < 5.0 * eps);
        let ex = coefficient_expansion(h);
        assert!((cf.p_frak.sin_coeff(2) / (eps * eps) - ex.pfrak2_2).abs() < 5.0 * eps * ex.pfrak2_2.abs());
        assert!(cf.iterations < 20);
    }

    #[test]
    fn coefficient_functions_vanish_when_flat() {
        let cf = coefficient_functions(d(1.0), 0.0, 16).unwrap();
        assert!(cf.p_eps.max_abs() < 1e-15);
        assert!(cf.a_eps.max_abs() < 1e-15);
    }

    #[test]
    fn first_harmonics_of_p_and_a() {
        let eps = 0.005;
        for hv in [1.0, 2.0] {
            let h = d(hv);
            let cf = coefficient_functions(h, eps, 32).unwrap();
            let ex = cf.expansion;
            let p1 = cf.p_eps.cos_coeff(1) / eps;
            let a1 = cf.a_eps.cos_coeff(1) / eps;
            assert!(((p1 - ex.p1_1) / ex.p1_1).abs() < 2.0 * eps);
            assert!(((a1 - ex.a1_1) / ex.a1_1).abs() < 2.0 * eps);
        }
    }

    #[test]
    fn second_harmonics_converge() {
        let h = d(1.5);
        let ex = coefficient_expansion(h);
        let err = |eps: f64| {
            let cf = coefficient_functions(h, eps, 32).unwrap();
            let e2 = eps * eps;
            [
                cf.p_eps.cos_coeff(2) / e2 - ex.p2_2,
                cf.p_eps.cos_coeff(0) / e2 - ex.p2_0,
                cf.a_eps.cos_coeff(2) / e2 - ex.a2_2,
                cf.a_eps.cos_coeff(0) / e2 - ex.a2_0,
            ]
        };
        let big = err(0.02);
        let small = err(0.01);
        for (b, s) in big.iter().zip(&small) {
            assert!(s.abs() < 5.0 * 0.01 * 10.0, "{s}");
            // O(ε) remainder: halving ε roughly halves the error
            assert!(s.abs() <= 0.75 * b.abs() + 1e-9, "{b} -> {s}");
        }
    }

    #[test]
    fn parities_hold() {
        let cf = coefficient_functions(d(0.8), 0.03, 32).unwrap();
        assert!(cf.p_eps.check_parity(1e-12));
        assert!(cf.a_eps.check_parity(1e-12));
        assert!(cf.conformal.p_frak.check_parity(1e-12));
        let w = stokes_expansion(d(0.8)).wave(0.03);
        assert!(w.eta.check_parity(1e-14) && w.psi.check_parity(1e-14));
    }
}
