//! Truncated Fourier matrices of the Bloch-Floquet operator `L_{μ,ε}`, its
//! self-adjoint factor `B_{μ,ε}` and the shifted pair `𝓛 = L − i c_h μ`,
//! `𝓑`.
//!
//! Layout: a vector holds the η coefficients of modes `-M..=M` followed by the
//! ψ coefficients of the same modes, so the matrix size is `2(2M+1)`.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::coeffs::Depth;
use crate::error::{Error, Result};
use crate::stokes::{coefficient_functions_for, stokes_expansion_with_modes, CoefficientFunctions, DEFAULT_MODES};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `L_{μ,ε}`.
    L,
    /// `B_{μ,ε}` with `L = J B`.
    B,
    /// `𝓛_{μ,ε} = L_{μ,ε} − i c_h μ`.
    ShiftedL,
    /// `𝓑_{μ,ε}` with `𝓛 = J 𝓑`.
    ShiftedB,
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub m: usize,
    pub h: f64,
    pub mu: f64,
    pub eps: f64,
    pub kind: OperatorKind,
}

impl OperatorMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }
}

/// Symplectic matrix `J = [[0, I], [-I, 0]]` for truncation `m`.
pub fn symplectic_form(m: usize) -> CMatrix {
    let n = 2 * m + 1;
    let mut j = CMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = ONE;
        j[(n + k, k)] = -ONE;
    }
    j
}

/// Diagonal sign part of the reversibility involution: `diag(I, -I)`. The
/// full map is this matrix composed with complex conjugation.
pub fn reversibility_signs(m: usize) -> Vec<f64> {
    let n = 2 * m + 1;
    (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect()
}

/// `max |L S + S conj(L)|`, zero for a reversible operator.
pub fn antireversibility_defect(l: &CMatrix) -> f64 {
    reversibility_defect(l, -1.0)
}

/// `max |B S - S conj(B)|`, zero for a reversibility-preserving operator.
pub fn reversibility_preserving_defect(b: &CMatrix) -> f64 {
    reversibility_defect(b, 1.0)
}

fn reversibility_defect(a: &CMatrix, sign: f64) -> f64 {
    let n = a.nrows();
    let half = n / 2;
    let s = |i: usize| if i < half { 1.0 } else { -1.0 };
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let d = a[(r, c)] * s(c) - sign * s(r) * a[(r, c)].conj();
            worst = worst.max(d.norm());
        }
    }
    worst
}

fn check_inputs(mu: f64, m: usize, coeffs: &CoefficientFunctions) -> Result<()> {
    if !(0.0..0.5).contains(&mu) {
        return Err(Error::MuOutOfZone(mu));
    }
    if coeffs.modes() != m {
        return Err(Error::TruncationMismatch {
            left: m,
            right: coeffs.modes(),
        });
    }
    Ok(())
}

/// Assemble any of the four operators. The Fourier multiplier is
/// `(k+μ) tanh((h+f_ε)(k+μ))`, analytic across `k + μ = 0`.
pub fn assemble(kind: OperatorKind, h: Depth, mu: f64, m: usize, coeffs: &CoefficientFunctions) -> Result<OperatorMatrix> {
    check_inputs(mu, m, coeffs)?;
    let n = 2 * m + 1;
    let mi = m as i64;
    let c = h.speed();
    let depth = h.value() + coeffs.f_eps;
    let p = &coeffs.p_eps;
    let a = &coeffs.a_eps;

    // convolution kernels including the constant parts
    let cp = |k: i64, j: i64| p.get(k - j) + if k == j { Complex64::new(c, 0.0) } else { ZERO };
    let oa = |k: i64, j: i64| a.get(k - j) + if k == j { ONE } else { ZERO };
    let shifted = matches!(kind, OperatorKind::ShiftedL | OperatorKind::ShiftedB);
    let shift = if shifted { I * c * mu } else { ZERO };

    let mut out = CMatrix::zeros(2 * n, 2 * n);
    for (r, k) in (-mi..=mi).enumerate() {
        let kmu = k as f64 + mu;
        for (s, j) in (-mi..=mi).enumerate() {
            if (k - j).abs() > mi {
                continue;
            }
            let jmu = j as f64 + mu;
            // (∂x + iμ)∘(c+p), (c+p)(∂x + iμ), 1+a
            let d_cp = I * kmu * cp(k, j) - if r == s { shift } else { ZERO };
            let cp_d = cp(k, j) * I * jmu - if r == s { shift } else { ZERO };
            let one_a = oa(k, j);
            match kind {
                OperatorKind::L | OperatorKind::ShiftedL => {
                    out[(r, s)] = d_cp;
                    out[(n + r, s)] = -one_a;
                    out[(n + r, n + s)] = cp_d;
                }
                OperatorKind::B | OperatorKind::ShiftedB => {
                    out[(r, s)] = one_a;
                    out[(r, n + s)] = -cp_d;
                    out[(n + r, s)] = d_cp;
                }
            }
        }
        let symbol = Complex64::new(kmu * (depth * kmu).tanh(), 0.0);
        match kind {
            OperatorKind::L | OperatorKind::ShiftedL => out[(r, n + r)] = symbol,
            OperatorKind::B | OperatorKind::ShiftedB => out[(n + r, n + r)] = symbol,
        }
    }
    Ok(OperatorMatrix {
        entries: out,
        m,
        h: h.value(),
        mu,
        eps: coeffs.eps,
        kind,
    })
}

#[allow(non_snake_case)]
pub fn assemble_L(h: Depth, mu: f64, m: usize, coeffs: &CoefficientFunctions) -> Result<OperatorMatrix> {
    assemble(OperatorKind::L, h, mu, m, coeffs)
}

#[allow(non_snake_case)]
pub fn assemble_B(h: Depth, mu: f64, m: usize, coeffs: &CoefficientFunctions) -> Result<OperatorMatrix> {
    assemble(OperatorKind::B, h, mu, m, coeffs)
}

/// Eigenvalue, on the cos x branch, of the even-ψ reduction
/// `K = G + D C A⁻¹ C D` of `L_{0,ε}` (with `A = 1+a`, `C = c_h+p`,
/// `D = ∂x`). `L_{0,ε}` has a kernel vector besides `(0, 1)` exactly when it
/// vanishes.
pub fn translation_defect(h: Depth, m: usize, coeffs: &CoefficientFunctions) -> Result<f64> {
    let n = 2 * m + 1;
    let mi = m as i64;
    let c = h.speed();
    let depth = h.value() + coeffs.f_eps;
    let mut a = CMatrix::zeros(n, n);
    let mut cd = CMatrix::zeros(n, n);
    let mut dc = CMatrix::zeros(n, n);
    for (r, k) in (-mi..=mi).enumerate() {
        for (s, j) in (-mi..=mi).enumerate() {
            if (k - j).abs() > mi {
                continue;
            }
            let diag = if r == s { 1.0 } else { 0.0 };
            let cp = coeffs.p_eps.get(k - j) + c * diag;
            a[(r, s)] = coeffs.a_eps.get(k - j) + diag;
            cd[(r, s)] = cp * I * j as f64;
            dc[(r, s)] = I * k as f64 * cp;
        }
    }
    let x = a
        .lu()
        .solve(&cd)
        .ok_or_else(|| Error::Eigensolver("singular 1+a block".into()))?;
    let mut k_full = &dc * x;
    for (r, k) in (-mi..=mi).enumerate() {
        let kf = k as f64;
        k_full[(r, r)] += kf * (depth * kf).tanh();
    }
    // orthonormal cosine basis: e_0 = δ_0, e_k = (δ_k + δ_{-k})/√2
    let idx = |k: i64| (k + mi) as usize;
    let mut even = DMatrix::<f64>::zeros(m + 1, m + 1);
    let w = |k: usize| if k == 0 { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
    for p in 0..=m {
        for q in 0..=m {
            let rows: &[i64] = &if p == 0 { vec![0] } else { vec![p as i64, -(p as i64)] };
            let cols: &[i64] = &if q == 0 { vec![0] } else { vec![q as i64, -(q as i64)] };
            let mut sum = Complex64::new(0.0, 0.0);
            for &r in rows {
                for &s in cols {
                    sum += k_full[(idx(r), idx(s))];
                }
            }
            even[(p, q)] = (sum * w(p) * w(q)).re;
        }
    }
    let even = 0.5 * (&even + even.transpose());
    let eig = SymmetricEigen::new(even);
    let best = (0..=m)
        .max_by(|&i, &j| eig.eigenvectors[(1, i)].abs().total_cmp(&eig.eigenvectors[(1, j)].abs()))
        .unwrap();
    Ok(eig.eigenvalues[best])
}

/// Acceptance level for the translation defect at the default truncation.
pub const CALIBRATION_TOL: f64 = 1e-12;

/// Coefficient functions of the truncated Stokes wave with the speed shifted
/// by the amount (of order ε⁴) that restores the translation kernel of
/// `L_{0,ε}`. Without it the truncated wave leaves the zero eigenvalue split by
/// a spurious `O(ε³)` pair.
pub fn calibrated_coefficients(h: Depth, eps: f64, m: usize) -> Result<CoefficientFunctions> {
    let mut wave = stokes_expansion_with_modes(h, m).wave(eps);
    let base = wave.speed;
    let mut eval = |delta: f64| -> Result<(CoefficientFunctions, f64)> {
        wave.speed = base + delta;
        let mut cf = coefficient_functions_for(h, &wave, m)?;
        cf.speed_correction = delta;
        let k = translation_defect(h, m, &cf)?;
        Ok((cf, k))
    };
    let (cf0, k0) = eval(0.0)?;
    if eps == 0.0 || k0 == 0.0 {
        return Ok(cf0);
    }
    // roundoff in K grows like ‖K‖ ~ M²
    let tol = CALIBRATION_TOL * (m as f64 / DEFAULT_MODES as f64).powi(2).max(1.0);
    let mut best = (k0.abs(), 0.0);
    let mut d0 = 0.0;
    let mut k0 = k0;
    let mut d1 = 1e-3 * eps.powi(2);
    let (mut cf1, mut k1) = eval(d1)?;
    for _ in 0..30 {
        if k1.abs() < best.0 {
            best = (k1.abs(), d1);
        }
        if k1.abs() <= 1e-15 || k1 == k0 || (d1 - d0).abs() <= 1e-18 {
            break;
        }
        let d2 = d1 - k1 * (d1 - d0) / (k1 - k0);
        let (cf2, k2) = eval(d2)?;
        d0 = d1;
        k0 = k1;
        d1 = d2;
        cf1 = cf2;
        k1 = k2;
    }
    if k1.abs() <= best.0 {
        best = (k1.abs(), d1);
    }
    if best.0 > tol {
        return Err(Error::NonConvergence {
            what: "speed calibration",
            iterations: 30,
            residual: best.0,
        });
    }
    if best.1 == d1 {
        Ok(cf1)
    } else {
        eval(best.1).map(|(cf, _)| cf)
    }
}

/// Closed-form spectrum of the flat-state operator: for every mode `k` in
/// `[-M, M]` both `λ_k^+` and `λ_k^-`.
pub fn flat_eigenvalues(h: Depth, mu: f64, m: usize) -> Vec<Complex64> {
    let c = h.speed();
    let hv = h.value();
    let w = |x: f64| (x.abs() * (hv * x.abs()).tanh()).sqrt();
    let mi = m as i64;
    let mut out = Vec::with_capacity(2 * (2 * m + 1));
    for k in -mi..=mi {
        let k = k as f64;
        out.push(I * (c * (k + mu) - w(k + mu)));
        out.push(I * (c * (-k + mu) + w(k - mu)));
    }
    sort_spectrum(&mut out);
    out
}

/// Order by imaginary part, then real part.
pub fn sort_spectrum(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
}

/// All eigenvalues of a dense complex matrix.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 100 * n.max(10)).ok_or_else(|| {
        Error::Eigensolver(format!(
            "QR iteration did not converge (size {n}, max entry {:.3e})",
            a.iter().map(|z| z.norm()).fold(0.0, f64::max)
        ))
    })?;
    let (_, t) = schur.unpack();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() != 0.0 {
            // leftover 2×2 block
            let (p, q, r, s) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let tr = 0.5 * (p + s);
            let disc = (0.25 * (p - s) * (p - s) + q * r).sqrt();
            out.push(tr + disc);
            out.push(tr - disc);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    Ok(out)
}

/// Full truncated spectrum, ordered by `(Im, Re)`.
pub fn full_spectrum(l: &OperatorMatrix) -> Result<Vec<Complex64>> {
    let mut ev = eigenvalues(&l.entries)?;
    sort_spectrum(&mut ev);
    Ok(ev)
}

/// Distance between two spectra as multisets: greedy nearest matching after
/// sorting, which is exact when both are sorted consistently and well
/// separated, and an upper bound otherwise.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for z in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, w)| (i, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}

/// `max |λ' + conj(λ)|` over the spectrum, matching each `λ` to the nearest
/// `−conj` partner.
pub fn hamiltonian_symmetry_defect(spec: &[Complex64]) -> f64 {
    let mirrored: Vec<Complex64> = spec.iter().map(|z| -z.conj()).collect();
    multiset_distance(spec, &mirrored)
}

/// Largest violation of `A_{-k,-j} = conj(A_{k,j})`: zero when the operator
/// maps real functions to real functions.
pub fn real_operator_defect(a: &CMatrix) -> f64 {
    let n = a.nrows() / 2;
    let flip = |i: usize| if i < n { n - 1 - i } else { 3 * n - 1 - i };
    let mut worst: f64 = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            worst = worst.max((a[(flip(r), flip(c))] - a[(r, c)].conj()).norm());
        }
    }
    worst
}
