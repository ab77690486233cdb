//! Kato reduction of `𝓛_{μ,ε}` to the four-dimensional invariant subspace
//! near zero: Riesz projector by contour quadrature, transformation
//! operator, transported basis and the reduced 4×4 matrix.

use nalgebra::{DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::coeffs::Depth;
use crate::error::{Error, Result};
use crate::operator::{assemble, eigenvalues, flat_eigenvalues, CMatrix, OperatorKind, OperatorMatrix};
use crate::stokes::CoefficientFunctions;

pub type C4 = Matrix4<Complex64>;
pub type C2 = Matrix2<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const DEFAULT_NODES: usize = 64;
pub const MIN_NODES: usize = 32;
/// Largest admissible deviation of the symplectic Gram matrix.
pub const GRAM_TOL: f64 = 1e-6;
const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 2000;

/// Circle `|λ| = radius` traversed counterclockwise, sampled at `nodes`
/// equispaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contour {
    pub radius: f64,
    pub nodes: usize,
}

impl Contour {
    pub fn new(radius: f64, nodes: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!("contour radius {radius} must be positive")));
        }
        if nodes < MIN_NODES {
            return Err(Error::InvalidArgument(format!("contour needs at least {MIN_NODES} nodes, got {nodes}")));
        }
        Ok(Contour { radius, nodes })
    }

    /// `δ = min(0.4 g, 0.2)` with `g` the distance from zero to the rest of
    /// the flat spectrum.
    pub fn for_depth(h: Depth, nodes: usize) -> Result<Self> {
        Contour::new((0.4 * cluster_gap(h)).min(0.2), nodes)
    }

    pub fn doubled(self) -> Self {
        Contour {
            radius: self.radius,
            nodes: 2 * self.nodes,
        }
    }

    fn node(&self, j: usize) -> Complex64 {
        // half-step offset keeps nodes off the axes
        let theta = std::f64::consts::TAU * (j as f64 + 0.5) / self.nodes as f64;
        Complex64::from_polar(self.radius, theta)
    }
}

/// Distance from zero to the nearest nonzero eigenvalue of `L_{0,0}`.
pub fn cluster_gap(h: Depth) -> f64 {
    flat_eigenvalues(h, 0.0, 4)
        .into_iter()
        .map(|z| z.norm())
        .filter(|&r| r > 1e-12)
        .fold(f64::INFINITY, f64::min)
}

fn quadrature(l: &CMatrix, contour: &Contour) -> Result<CMatrix> {
    let n = l.nrows();
    let terms: Vec<Result<CMatrix>> = (0..contour.nodes)
        .into_par_iter()
        .map(|j| {
            let lambda = contour.node(j);
            let mut shifted = l.clone();
            for i in 0..n {
                shifted[(i, i)] -= lambda;
            }
            let inv = shifted.lu().try_inverse().ok_or(Error::ResolventSingular { node: j })?;
            if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::ResolventSingular { node: j });
            }
            Ok(inv * (-lambda / contour.nodes as f64))
        })
        .collect();
    // summed in node order so the result does not depend on scheduling
    let mut p = CMatrix::zeros(n, n);
    for t in terms {
        p += t?;
    }
    Ok(p)
}

/// Riesz projector `−(1/2πi)∮(𝓛−λ)⁻¹dλ` of a shifted operator, by the
/// trapezoidal rule. Retries once with a slightly smaller radius when a node
/// lands on an eigenvalue.
pub fn spectral_projector(l: &OperatorMatrix, contour: &Contour) -> Result<CMatrix> {
    if l.kind != OperatorKind::ShiftedL {
        return Err(Error::InvalidArgument(format!(
            "spectral projector needs the shifted operator, got {:?}",
            l.kind
        )));
    }
    let p = match quadrature(&l.entries, contour) {
        Err(Error::ResolventSingular { .. }) => {
            let retry = Contour {
                radius: 0.97 * contour.radius,
                nodes: contour.nodes,
            };
            quadrature(&l.entries, &retry)?
        }
        other => other?,
    };
    let rank = numerical_rank(&p);
    if rank != 4 {
        return Err(Error::ProjectorRank(rank));
    }
    Ok(p)
}

/// Number of singular values above 0.5.
pub fn numerical_rank(p: &CMatrix) -> usize {
    p.clone().singular_values().iter().filter(|&&s| s > 0.5).count()
}

fn spectral_norm(a: &CMatrix) -> f64 {
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Exact projector of `L_{0,0}` onto its generalized kernel. Mode 0 is
/// nilpotent and kept whole; on modes ±1 the kernel direction is split off
/// from the eigenvalue `2ick`.
pub fn unperturbed_projector(h: Depth, m: usize) -> CMatrix {
    let n = 2 * m + 1;
    let c = h.speed();
    let mut p = CMatrix::zeros(2 * n, 2 * n);
    let zero = m;
    p[(zero, zero)] = ONE;
    p[(n + zero, n + zero)] = ONE;
    for k in [-1i64, 1] {
        let r = (m as i64 + k) as usize;
        let kf = k as f64;
        // block [[ick, k tanh(hk)], [-1, ick]], projector (M − 2ick)/(−2ick)
        let other = 2.0 * I * c * kf;
        let block = [
            [I * c * kf - other, Complex64::new(kf * (h.value() * kf).tanh(), 0.0)],
            [-ONE, I * c * kf - other],
        ];
        let idx = [r, n + r];
        for a in 0..2 {
            for b in 0..2 {
                p[(idx[a], idx[b])] = block[a][b] / (-other);
            }
        }
    }
    p
}

/// `U = (I − (P−P₀)²)^{-1/2} [P P₀ + (I−P)(I−P₀)]`, with the inverse square
/// root summed as a binomial series.
pub fn transformation_operator(p: &CMatrix, p00: &CMatrix) -> Result<CMatrix> {
    let n = p.nrows();
    let diff = p - p00;
    let norm = spectral_norm(&diff);
    if norm >= 1.0 {
        return Err(Error::SeriesDivergence(norm));
    }
    let r = &diff * &diff;
    let id = CMatrix::identity(n, n);
    let mut sum = id.clone();
    let mut term = id.clone();
    let mut converged = false;
    for k in 1..=SERIES_MAX_TERMS {
        term = &term * &r * Complex64::new((2 * k - 1) as f64 / (2 * k) as f64, 0.0);
        sum += &term;
        if term.norm() < SERIES_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SeriesDivergence(norm));
    }
    Ok(sum * (p * p00 + (&id - p) * (&id - p00)))
}

/// The four vectors `f₁⁺, f₁⁻, f₀⁺, f₀⁻` of the generalized kernel of
/// `L_{0,0}` in the coefficient layout.
pub fn unperturbed_basis(h: Depth, m: usize) -> [CVector; 4] {
    let n = 2 * m + 1;
    let c = h.speed();
    let (sq, isq) = (c.sqrt(), 1.0 / c.sqrt());
    let plus = m + 1;
    let minus = m - 1;
    let mut f1p = CVector::zeros(2 * n);
    // (c^{1/2} cos x, c^{-1/2} sin x)
    f1p[plus] = Complex64::new(0.5 * sq, 0.0);
    f1p[minus] = Complex64::new(0.5 * sq, 0.0);
    f1p[n + plus] = Complex64::new(0.0, -0.5 * isq);
    f1p[n + minus] = Complex64::new(0.0, 0.5 * isq);
    let mut f1m = CVector::zeros(2 * n);
    // (−c^{1/2} sin x, c^{-1/2} cos x)
    f1m[plus] = Complex64::new(0.0, 0.5 * sq);
    f1m[minus] = Complex64::new(0.0, -0.5 * sq);
    f1m[n + plus] = Complex64::new(0.5 * isq, 0.0);
    f1m[n + minus] = Complex64::new(0.5 * isq, 0.0);
    let mut f0p = CVector::zeros(2 * n);
    f0p[m] = ONE;
    let mut f0m = CVector::zeros(2 * n);
    f0m[n + m] = ONE;
    [f1p, f1m, f0p, f0m]
}

/// `(f, g) = Σ f̂ conj(ĝ)`, the mean of `f·conj(g)` over a period.
pub fn pairing(f: &CVector, g: &CVector) -> Complex64 {
    g.dotc(f)
}

fn apply_j(v: &CVector) -> CVector {
    let n = v.len() / 2;
    let mut out = CVector::zeros(v.len());
    for i in 0..n {
        out[i] = v[n + i];
        out[n + i] = -v[i];
    }
    out
}

/// `W_{ij} = (J f_j, f_i)`.
pub fn symplectic_gram(basis: &[CVector; 4]) -> C4 {
    C4::from_fn(|i, j| pairing(&apply_j(&basis[j]), &basis[i]))
}

/// `max |ρ̄ f − σ f|` over the basis, `ρ̄` acting on coefficients as
/// `(conj η̂, −conj ψ̂)`.
pub fn reversibility_defect(basis: &[CVector; 4]) -> f64 {
    let signs = [1.0, -1.0, 1.0, -1.0];
    let mut worst: f64 = 0.0;
    for (f, sigma) in basis.iter().zip(signs) {
        let n = f.len() / 2;
        for i in 0..f.len() {
            let rho = if i < n { f[i].conj() } else { -f[i].conj() };
            worst = worst.max((rho - sigma * f[i]).norm());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct KatoBasis {
    /// `f₁⁺, f₁⁻, f₀⁺, f₀⁻` transported by `U`.
    pub vectors: [CVector; 4],
    /// The unperturbed vectors they originate from.
    pub unperturbed: [CVector; 4],
    pub m: usize,
}

impl KatoBasis {
    pub fn transport(u: &CMatrix, h: Depth, m: usize) -> Self {
        let unperturbed = unperturbed_basis(h, m);
        let vectors = [0, 1, 2, 3].map(|i| u * &unperturbed[i]);
        KatoBasis { vectors, unperturbed, m }
    }

    pub fn gram_defect(&self) -> f64 {
        max_abs4(&(symplectic_gram(&self.vectors) - symplectic_gram(&self.unperturbed)))
    }

    pub fn reversibility_defect(&self) -> f64 {
        reversibility_defect(&self.vectors)
    }
}

fn max_abs4(a: &C4) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn j2() -> C2 {
    C2::new(ZERO, ONE, -ONE, ZERO)
}

pub fn j4() -> C4 {
    let mut j = C4::zeros();
    j[(0, 1)] = ONE;
    j[(1, 0)] = -ONE;
    j[(2, 3)] = ONE;
    j[(3, 2)] = -ONE;
    j
}

fn serialize_c4<S: Serializer>(a: &C4, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(4))?;
    for i in 0..4 {
        let row: Vec<[f64; 2]> = (0..4).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Self-adjoint `B4` of the reduced Hamiltonian matrix `L4 = J₄ B4`,
/// `B4[i][j] = (𝓑 f_j, f_i)`, split as `[[E, F], [F*, G]]`.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedQuadruple {
    #[serde(serialize_with = "serialize_c4")]
    pub b4: C4,
    #[serde(serialize_with = "serialize_c4")]
    pub l4: C4,
    pub h: f64,
    pub mu: f64,
    pub eps: f64,
}

impl ReducedQuadruple {
    pub fn new(b4: C4, h: f64, mu: f64, eps: f64) -> Self {
        ReducedQuadruple {
            l4: j4() * b4,
            b4,
            h,
            mu,
            eps,
        }
    }

    pub fn e(&self) -> C2 {
        self.b4.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn f(&self) -> C2 {
        self.b4.fixed_view::<2, 2>(0, 2).into_owned()
    }

    pub fn g(&self) -> C2 {
        self.b4.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn hermitian_defect(&self) -> f64 {
        max_abs4(&(self.b4 - self.b4.adjoint()))
    }

    /// Largest imaginary part where the index sum is even, and largest real
    /// part where it is odd.
    pub fn pattern_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let z = self.b4[(i, j)];
                let leak = if (i + j) % 2 == 0 { z.im } else { z.re };
                worst = worst.max(leak.abs());
            }
        }
        worst
    }

    /// Eigenvalues of `i c_h μ + J₄ B4`.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let shift = I * self.h.tanh().sqrt() * self.mu;
        let l = CMatrix::from_fn(4, 4, |i, j| self.l4[(i, j)]);
        Ok(eigenvalues(&l)?.into_iter().map(|z| z + shift).collect())
    }
}

/// Every intermediate of one reduction.
#[derive(Debug, Clone)]
pub struct KatoReduction {
    pub contour: Contour,
    pub projector: CMatrix,
    pub unperturbed_projector: CMatrix,
    pub transformation: CMatrix,
    pub basis: KatoBasis,
    pub quadruple: ReducedQuadruple,
}

/// Matrix of `𝓑` in the basis, rejecting bases that are not symplectic.
pub fn reduced_matrix(b: &OperatorMatrix, basis: &KatoBasis, h: Depth, mu: f64) -> Result<ReducedQuadruple> {
    if b.kind != OperatorKind::ShiftedB {
        return Err(Error::InvalidArgument(format!(
            "reduced matrix needs the shifted factor, got {:?}",
            b.kind
        )));
    }
    let gram = basis.gram_defect();
    if gram.is_nan() || gram > GRAM_TOL {
        return Err(Error::BasisDegenerate(gram));
    }
    let images: Vec<CVector> = basis.vectors.iter().map(|f| &b.entries * f).collect();
    let b4 = C4::from_fn(|i, j| pairing(&images[j], &basis.vectors[i]));
    Ok(ReducedQuadruple::new(b4, h.value(), mu, b.eps))
}

/// Full reduction at one `(μ, ε)` for given coefficient functions.
pub fn kato_reduction(h: Depth, mu: f64, coeffs: &CoefficientFunctions, contour: &Contour) -> Result<KatoReduction> {
    let m = coeffs.modes();
    let l = assemble(OperatorKind::ShiftedL, h, mu, m, coeffs)?;
    let b = assemble(OperatorKind::ShiftedB, h, mu, m, coeffs)?;
    let projector = spectral_projector(&l, contour)?;
    let p00 = unperturbed_projector(h, m);
    let transformation = transformation_operator(&projector, &p00)?;
    let basis = KatoBasis::transport(&transformation, h, m);
    let quadruple = reduced_matrix(&b, &basis, h, mu)?;
    Ok(KatoReduction {
        contour: *contour,
        projector,
        unperturbed_projector: p00,
        transformation,
        basis,
        quadruple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::depth_coefficients;
    use crate::operator::{calibrated_coefficients, real_operator_defect, symplectic_form};

    fn d(h: f64) -> Depth {
        Depth::new(h).unwrap()
    }

    fn max_abs(a: &CMatrix) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn reduce(h: f64, eps: f64, mu: f64, m: usize) -> KatoReduction {
        let h = d(h);
        let cf = calibrated_coefficients(h, eps, m).unwrap();
        let contour = Contour::for_depth(h, DEFAULT_NODES).unwrap();
        kato_reduction(h, mu, &cf, &contour).unwrap()
    }

    #[test]
    fn closed_form_projector_matches_quadrature() {
        let h = d(1.0);
        let flat = CoefficientFunctions::flat(h, 8);
        let l = assemble(OperatorKind::ShiftedL, h, 0.0, 8, &flat).unwrap();
        let p = spectral_projector(&l, &Contour::for_depth(h, 64).unwrap()).unwrap();
        let p00 = unperturbed_projector(h, 8);
        assert!(max_abs(&(&p - &p00)) <= 1e-12);
        for f in unperturbed_basis(h, 8) {
            assert!((&p * &f - &f).camax() <= 1e-10);
        }
    }

    #[test]
    fn projector_structure() {
        let r = reduce(2.0, 0.01, 0.02, 32);
        let p = &r.projector;
        let tr: Complex64 = p.trace();
        assert!((tr - Complex64::new(4.0, 0.0)).norm() <= 1e-6);
        assert!(max_abs(&(p * p - p)) <= 1e-8);
        let j = symplectic_form(32);
        assert!(max_abs(&(&j * p - p.adjoint() * &j)) <= 1e-8);
    }

    #[test]
    fn doubling_nodes_is_stable() {
        let h = d(1.0);
        let cf = calibrated_coefficients(h, 0.01, 16).unwrap();
        let l = assemble(OperatorKind::ShiftedL, h, 0.01, 16, &cf).unwrap();
        let c = Contour::for_depth(h, 64).unwrap();
        let p1 = spectral_projector(&l, &c).unwrap();
        let p2 = spectral_projector(&l, &c.doubled()).unwrap();
        assert!(max_abs(&(&p1 - &p2)) < 1e-9);
    }

    #[test]
    fn transformation_identity_and_symplectic() {
        let h = d(1.0);
        let p00 = unperturbed_projector(h, 8);
        let u = transformation_operator(&p00, &p00).unwrap();
        assert!(max_abs(&(u - CMatrix::identity(34, 34))) <= 1e-14);

        let r = reduce(1.0, 0.01, 0.01, 32);
        let u = &r.transformation;
        let j = symplectic_form(32);
        assert!(max_abs(&(u.adjoint() * &j * u - &j)) <= 1e-8);
        let inv = u.clone().try_inverse().unwrap();
        assert!(max_abs(&(u * &r.unperturbed_projector * inv - &r.projector)) <= 1e-8);
    }

    #[test]
    fn transformation_is_real_at_zero_mu() {
        let r = reduce(2.0, 0.01, 0.0, 32);
        assert!(real_operator_defect(&r.transformation) <= 1e-8);
    }

    #[test]
    fn divergent_series_is_reported() {
        let h = d(1.0);
        let p00 = unperturbed_projector(h, 4);
        let far = CMatrix::zeros(18, 18);
        assert!(matches!(
            transformation_operator(&far, &p00),
            Err(Error::SeriesDivergence(_))
        ));
    }

    #[test]
    fn unperturbed_basis_is_canonical() {
        let basis = unperturbed_basis(d(1.5), 6);
        assert!(max_abs4(&(symplectic_gram(&basis) - j4())) <= 1e-15);
        assert!(reversibility_defect(&basis) <= 1e-15);
        assert!((pairing(&basis[2], &basis[2]) - ONE).norm() == 0.0);
    }

    #[test]
    fn flat_state_blocks() {
        for mu in [0.01, 0.05] {
            let r = reduce(1.0, 0.0, mu, 16);
            let q = &r.quadruple;
            assert!(q.f().iter().all(|z| z.norm() <= 1e-8));
            let g = q.g();
            let expect = C2::new(ONE, ZERO, ZERO, Complex64::new(mu * (mu).tanh(), 0.0));
            assert!((g - expect).iter().all(|z| z.norm() <= 1e-8), "{g}");
        }
    }

    #[test]
    fn structure_and_eigenvalue_fidelity() {
        let r = reduce(2.0, 0.01, 0.02, 32);
        let q = &r.quadruple;
        assert!(q.hermitian_defect() <= 1e-8);
        assert!(q.pattern_defect() <= 1e-8);
        assert!(r.basis.reversibility_defect() <= 1e-8);
        let l = assemble(OperatorKind::L, d(2.0), 0.02, 32, &calibrated_coefficients(d(2.0), 0.01, 32).unwrap()).unwrap();
        let mut full = crate::operator::full_spectrum(&l).unwrap();
        full.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let reduced = q.eigenvalues().unwrap();
        assert!(crate::operator::multiset_distance(&reduced, &full[..4]) <= 1e-7);
    }

    #[test]
    fn zero_mu_entries() {
        let h = 2.0;
        let k = depth_coefficients(d(h));
        for eps in [0.005, 0.01, 0.02] {
            let q = reduce(h, eps, 0.0, 32).quadruple;
            let e = q.e();
            assert!(e[(1, 1)].norm() <= 1e-8, "E22 = {}", e[(1, 1)]);
            let r_e = e[(0, 0)].re / (eps * eps);
            assert!((r_e / k.e_11 - 1.0).abs() <= 5.0 * eps, "{r_e} vs {}", k.e_11);
            let r_f = q.f()[(0, 0)].re / eps;
            assert!((r_f / k.f_11 - 1.0).abs() <= 5.0 * eps * eps, "{r_f} vs {}", k.f_11);
        }
    }

    #[test]
    fn basis_first_order_correction() {
        let h = 1.0;
        let k = depth_coefficients(d(h));
        let m = 32;
        for eps in [0.01, 0.005] {
            let r = reduce(h, eps, 0.0, m);
            let f = &r.basis.vectors[0];
            let n = 2 * m + 1;
            let dv = (f - &r.basis.unperturbed[0]) / Complex64::new(eps, 0.0);
            // cos 2x amplitude of η, sin 2x amplitude of ψ
            let alpha = (dv[m + 2] + dv[m - 2]).re;
            let beta = (I * (dv[n + m + 2] - dv[n + m - 2])).re;
            assert!((alpha - k.alpha_h).abs() <= 20.0 * eps * k.alpha_h.abs(), "{alpha} vs {}", k.alpha_h);
            assert!((beta - k.beta_h).abs() <= 20.0 * eps * k.beta_h.abs(), "{beta} vs {}", k.beta_h);
        }
    }

    #[test]
    fn rejects_wrong_kinds() {
        let h = d(1.0);
        let flat = CoefficientFunctions::flat(h, 8);
        let l = assemble(OperatorKind::L, h, 0.1, 8, &flat).unwrap();
        assert!(spectral_projector(&l, &Contour::new(0.2, 64).unwrap()).is_err());
        assert!(Contour::new(0.2, 16).is_err());
    }
}
