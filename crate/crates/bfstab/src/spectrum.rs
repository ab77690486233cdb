//! Benjamin-Feir predictions from the depth coefficients and their
//! reconciliation with the direct Floquet spectrum.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::{depth_coefficients, Depth};
use crate::error::{Error, Result};
use crate::operator::{assemble_L, calibrated_coefficients, full_spectrum};
use crate::stokes::CoefficientFunctions;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Real parts above this count as unstable.
pub const INSTABILITY_THRESHOLD: f64 = 1e-9;
pub const BAND_TOL: f64 = 1e-4;
/// Required ratio between the 5th and 4th smallest moduli.
pub const CLUSTER_GAP: f64 = 2.0;

/// `8 e_WB ε² − e₂₂ μ²`, remainders dropped.
pub fn delta_bf(h: Depth, mu: f64, eps: f64) -> f64 {
    let k = depth_coefficients(h);
    8.0 * k.e_wb * eps * eps - k.e_22 * mu * mu
}

#[derive(Debug, Clone, Serialize)]
pub struct BenjaminFeirPrediction {
    pub h: f64,
    pub mu: f64,
    pub eps: f64,
    pub delta_bf_leading: f64,
    /// `e_h ε`, absent when `e_WB ≤ 0`.
    pub mu_bar_leading: Option<f64>,
    pub lambda1_plus: Complex64,
    pub lambda1_minus: Complex64,
    pub lambda0_plus: Complex64,
    pub lambda0_minus: Complex64,
    pub unstable: bool,
    pub leading_order: bool,
}

impl BenjaminFeirPrediction {
    /// `[λ₁⁺, λ₁⁻, λ₀⁺, λ₀⁻]`.
    pub fn quadruple(&self) -> [Complex64; 4] {
        [self.lambda1_plus, self.lambda1_minus, self.lambda0_plus, self.lambda0_minus]
    }
}

pub fn predict_eigenvalues(h: Depth, mu: f64, eps: f64) -> Result<BenjaminFeirPrediction> {
    if !(0.0..=0.2).contains(&mu) {
        return Err(Error::InvalidArgument(format!("prediction needs 0 <= mu <= 0.2, got {mu}")));
    }
    if !(0.0..=0.05).contains(&eps) {
        return Err(Error::InvalidArgument(format!("prediction needs 0 <= eps <= 0.05, got {eps}")));
    }
    let k = depth_coefficients(h);
    let delta = delta_bf(h, mu, eps);
    let centre = I * (0.5 * k.breve_c_h * mu);
    let radius = mu / 8.0 * k.e_22.sqrt();
    let split = if delta >= 0.0 {
        Complex64::new(radius * delta.sqrt(), 0.0)
    } else {
        I * (radius * (-delta).sqrt())
    };
    let mean = I * (k.c_h * mu);
    let stable = I * (mu * (h.value() * mu).tanh()).sqrt();
    Ok(BenjaminFeirPrediction {
        h: h.value(),
        mu,
        eps,
        delta_bf_leading: delta,
        mu_bar_leading: k.e_h.map(|e| e * eps),
        lambda1_plus: centre + split,
        lambda1_minus: centre - split,
        lambda0_plus: mean - stable,
        lambda0_minus: mean + stable,
        unstable: delta > 0.0 && k.e_wb > 0.0 && mu > 0.0,
        leading_order: true,
    })
}

fn regime(h: Depth) -> Result<crate::coeffs::DepthCoefficients> {
    let k = depth_coefficients(h);
    if k.e_wb > 0.0 {
        Ok(k)
    } else {
        Err(Error::Regime(format!(
            "e_WB({}) = {:.6} is not positive: no Benjamin-Feir band below the critical depth",
            h.value(),
            k.e_wb
        )))
    }
}

/// One sample of the leading-order locus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure8Point {
    pub mu: f64,
    pub re_plus: f64,
    pub im_plus: f64,
    pub re_minus: f64,
    pub im_minus: f64,
}

/// The leading-order figure-8: `samples` values of `μ ∈ [0, μ̄]` on the upper
/// loop, followed by the lower loop at `−μ` (the spectrum at `−μ` is the
/// complex conjugate).
pub fn figure8(h: Depth, eps: f64, samples: usize) -> Result<Vec<Figure8Point>> {
    let k = regime(h)?;
    if samples < 2 {
        return Err(Error::InvalidArgument("figure8 needs at least 2 samples".into()));
    }
    let mu_bar = k.e_h.unwrap() * eps;
    let upper: Vec<Figure8Point> = (0..samples)
        .map(|j| {
            let mu = mu_bar * j as f64 / (samples - 1) as f64;
            let radicand = (8.0 * k.e_wb * eps * eps - k.e_22 * mu * mu).max(0.0);
            let re = mu / 8.0 * k.e_22.sqrt() * radicand.sqrt();
            let im = 0.5 * k.breve_c_h * mu;
            Figure8Point {
                mu,
                re_plus: re,
                im_plus: im,
                re_minus: -re,
                im_minus: im,
            }
        })
        .collect();
    let lower = upper.iter().map(|p| Figure8Point {
        mu: -p.mu,
        re_plus: p.re_plus,
        im_plus: -p.im_plus,
        re_minus: p.re_minus,
        im_minus: -p.im_minus,
    });
    Ok(upper.iter().cloned().chain(lower).collect())
}

/// `(μ̄/√2, ½ e_WB ε²)`: the leading-order maximiser and maximum of `Re λ₁⁺`.
pub fn max_growth_leading(h: Depth, eps: f64) -> Result<(f64, f64)> {
    let k = regime(h)?;
    Ok((k.e_h.unwrap() * eps / 2f64.sqrt(), 0.5 * k.e_wb * eps * eps))
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchedEigenvalue {
    pub label: &'static str,
    pub computed: Complex64,
    pub predicted: Complex64,
    pub abs_error: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub full: Vec<Complex64>,
    /// The four smallest-modulus eigenvalues.
    pub quadruple: Vec<Complex64>,
    /// `|λ₅| / |λ₄|`.
    pub gap_ratio: f64,
    pub prediction: BenjaminFeirPrediction,
    pub matched: Vec<MatchedEigenvalue>,
}

impl SpectrumReport {
    pub fn max_real(&self) -> f64 {
        self.quadruple.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Members of the quadruple with real part above `threshold` in modulus.
    pub fn unstable_count(&self, threshold: f64) -> usize {
        self.quadruple.iter().filter(|z| z.re.abs() > threshold).count()
    }

    pub fn in_cluster(&self, z: &Complex64) -> bool {
        self.quadruple.contains(z)
    }

    /// Largest distance from `−conj(λ)` to the quadruple.
    pub fn symmetry_defect(&self) -> f64 {
        self.quadruple
            .iter()
            .map(|z| {
                let m = -z.conj();
                self.quadruple.iter().map(|w| (w - m).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

const PERMUTATIONS: [[usize; 4]; 24] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
];

/// Pair `computed[perm[i]]` with `predicted[i]` minimising the total distance.
pub fn assign(computed: &[Complex64; 4], predicted: &[Complex64; 4]) -> [usize; 4] {
    let cost = |p: &[usize; 4]| (0..4).map(|i| (computed[p[i]] - predicted[i]).norm()).sum::<f64>();
    *PERMUTATIONS
        .iter()
        .min_by(|a, b| cost(a).total_cmp(&cost(b)))
        .unwrap()
}

pub fn match_spectrum(full: &[Complex64], prediction: &BenjaminFeirPrediction) -> Result<SpectrumReport> {
    if full.len() < 5 {
        return Err(Error::InvalidArgument(format!("spectrum of {} eigenvalues is too small", full.len())));
    }
    let mut by_modulus = full.to_vec();
    by_modulus.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)));
    let gap_ratio = by_modulus[4].norm() / by_modulus[3].norm();
    if gap_ratio < CLUSTER_GAP {
        return Err(Error::ClusterAmbiguity(gap_ratio));
    }
    let quadruple = [by_modulus[0], by_modulus[1], by_modulus[2], by_modulus[3]];
    let predicted = prediction.quadruple();
    let perm = assign(&quadruple, &predicted);
    let labels = ["lambda1+", "lambda1-", "lambda0+", "lambda0-"];
    let matched = (0..4)
        .map(|i| {
            let computed = quadruple[perm[i]];
            let abs_error = (computed - predicted[i]).norm();
            MatchedEigenvalue {
                label: labels[i],
                computed,
                predicted: predicted[i],
                abs_error,
                rel_error: abs_error / predicted[i].norm().max(f64::MIN_POSITIVE),
            }
        })
        .collect();
    Ok(SpectrumReport {
        full: full.to_vec(),
        quadruple: quadruple.to_vec(),
        gap_ratio,
        prediction: prediction.clone(),
        matched,
    })
}

/// Direct spectra along a μ-line for fixed `(h, ε, M)`, reusing the
/// calibrated coefficient functions.
#[derive(Debug, Clone)]
pub struct FloquetSolver {
    pub h: Depth,
    pub eps: f64,
    pub m: usize,
    pub coeffs: CoefficientFunctions,
}

impl FloquetSolver {
    pub fn new(h: Depth, eps: f64, m: usize) -> Result<Self> {
        Ok(FloquetSolver {
            h,
            eps,
            m,
            coeffs: calibrated_coefficients(h, eps, m)?,
        })
    }

    pub fn spectrum(&self, mu: f64) -> Result<Vec<Complex64>> {
        full_spectrum(&assemble_L(self.h, mu, self.m, &self.coeffs)?)
    }

    pub fn report(&self, mu: f64) -> Result<SpectrumReport> {
        let prediction = predict_eigenvalues(self.h, mu, self.eps)?;
        match_spectrum(&self.spectrum(mu)?, &prediction)
    }

    /// Largest real part in the near-zero quadruple.
    pub fn growth(&self, mu: f64) -> Result<f64> {
        let mut ev = self.spectrum(mu)?;
        ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        Ok(ev[..4].iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BandMethod {
    Analytic,
    Numeric,
}

/// Upper edge `μ̄(ε)` of the unstable band. The numeric edge bisects on
/// `max Re > INSTABILITY_THRESHOLD` between `μ̄_lead/2` and `2 μ̄_lead`.
pub fn unstable_band(h: Depth, eps: f64, method: BandMethod, m: usize, tol: f64) -> Result<f64> {
    let k = regime(h)?;
    let analytic = k.e_h.unwrap() * eps;
    if method == BandMethod::Analytic || eps == 0.0 {
        return Ok(analytic);
    }
    let solver = FloquetSolver::new(h, eps, m)?;
    let unstable = |mu: f64| solver.growth(mu).map(|g| g > INSTABILITY_THRESHOLD);
    let (mut lo, mut hi) = (0.5 * analytic, 2.0 * analytic);
    if !unstable(lo)? || unstable(hi)? {
        return Err(Error::Regime(format!(
            "band edge not bracketed by [{lo:.3e}, {hi:.3e}] at h={}, eps={eps}",
            h.value()
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Numeric maximum over μ of `Re λ₁⁺`: a coarse grid on `(0, μ̄_lead]` in
/// parallel, refined by golden-section search.
pub fn max_growth(h: Depth, eps: f64, m: usize) -> Result<(f64, f64)> {
    let k = regime(h)?;
    let mu_bar = k.e_h.unwrap() * eps;
    let solver = FloquetSolver::new(h, eps, m)?;
    let grid: Vec<f64> = (1..=24).map(|j| mu_bar * j as f64 / 24.0).collect();
    let values: Vec<f64> = grid.par_iter().map(|&mu| solver.growth(mu)).collect::<Result<_>>()?;
    let best = (0..grid.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let step = mu_bar / 24.0;
    let (mut a, mut b) = ((grid[best] - step).max(0.25 * step), grid[best] + step);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = solver.growth(x1)?;
    let mut f2 = solver.growth(x2)?;
    while b - a > 1e-6 * mu_bar {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = solver.growth(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = solver.growth(x1)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}
