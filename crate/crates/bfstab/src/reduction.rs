//! Block decoupling of the reduced 4×4 Hamiltonian matrix into the
//! Benjamin-Feir block `U` and the mean-flow block `S`.
//!
//! Pipeline: singular rescaling, one Sylvester step conjugated by `exp(S)`,
//! then a fixed-point iteration that removes the remaining off-diagonal part.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::Serialize;

use crate::coeffs::{depth_coefficients, Depth};
use crate::error::{Error, Result};
use crate::kato::{j2, j4, ReducedQuadruple, C2, C4};
use crate::operator::{eigenvalues, CMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest Sylvester determinant accepted for inversion, relative to the
/// fourth power of the largest coefficient (the determinant is homogeneous of
/// degree 4, and in the small-μ regime every coefficient is `O(μ)`).
pub const DET_MIN: f64 = 1e-6;
pub const DECOUPLE_TOL: f64 = 1e-12;
pub const DECOUPLE_MAX_ITER: usize = 50;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn max_abs(a: &C4) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `B' = Y* B Y` with `Y = diag(Q, Q)`, `Q = diag(√μ, 1/√μ)`.
pub fn singular_rescaling(q: &ReducedQuadruple) -> Result<ReducedQuadruple> {
    if q.mu.is_nan() || q.mu <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "singular rescaling needs mu > 0, got {}",
            q.mu
        )));
    }
    let (s, t) = (q.mu.sqrt(), 1.0 / q.mu.sqrt());
    let y = C4::from_diagonal(&nalgebra::Vector4::new(c(s), c(t), c(s), c(t)));
    Ok(ReducedQuadruple::new(y.adjoint() * q.b4 * y, q.h, q.mu, q.eps))
}

/// Entries of the real 4×4 matrix
/// `[[a, b, c, 0], [d, a, 0, −c], [e, 0, a, −b], [0, −e, −d, a]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SylvesterCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl SylvesterCoefficients {
    pub fn matrix(&self) -> Matrix4<f64> {
        let SylvesterCoefficients { a, b, c, d, e } = *self;
        Matrix4::new(a, b, c, 0.0, d, a, 0.0, -c, e, 0.0, a, -b, 0.0, -e, -d, a)
    }

    /// `max(|a|, |b|, |c|, |d|, |e|)`.
    pub fn scale(&self) -> f64 {
        [self.a, self.b, self.c, self.d, self.e]
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }

    /// `a = G₁₂ − E₁₂`, `b = G₁₁`, `c = E₂₂`, `d = G₂₂`, `e = E₁₁` for the
    /// blocks of a reversibility-preserving quadruple.
    pub fn from_quadruple(q: &ReducedQuadruple) -> Self {
        let (e, g) = (q.e(), q.g());
        SylvesterCoefficients {
            a: g[(0, 1)].im - e[(0, 1)].im,
            b: g[(0, 0)].re,
            c: e[(1, 1)].re,
            d: g[(1, 1)].re,
            e: e[(0, 0)].re,
        }
    }
}

pub fn sylvester_det(co: &SylvesterCoefficients) -> f64 {
    let SylvesterCoefficients { a, b, c, d, e } = *co;
    let a2 = a * a;
    a2 * a2 - 2.0 * a2 * (b * d + c * e) + (b * d - c * e).powi(2)
}

pub fn sylvester_inverse(co: &SylvesterCoefficients) -> Result<Matrix4<f64>> {
    let det = sylvester_det(co);
    if det.is_nan() || det.abs() <= DET_MIN * co.scale().powi(4) {
        return Err(Error::NearSingular(det));
    }
    let SylvesterCoefficients { a, b, c, d, e } = *co;
    let a2 = a * a;
    let (bd, ce) = (b * d, c * e);
    let diag = a * (a2 - bd - ce);
    let adj = Matrix4::new(
        diag,
        b * (-a2 + bd - ce),
        -c * (a2 + bd - ce),
        -2.0 * a * b * c,
        d * (-a2 + bd - ce),
        diag,
        2.0 * a * c * d,
        -c * (-a2 - bd + ce),
        -e * (a2 + bd - ce),
        2.0 * a * b * e,
        diag,
        b * (a2 - bd + ce),
        -2.0 * a * d * e,
        -e * (-a2 - bd + ce),
        d * (a2 - bd + ce),
        diag,
    );
    Ok(adj / det)
}

fn block(a: &C4, r: usize, s: usize) -> C2 {
    a.fixed_view::<2, 2>(r, s).into_owned()
}

fn set_block(a: &mut C4, r: usize, s: usize, b: &C2) {
    a.fixed_view_mut::<2, 2>(r, s).copy_from(b);
}

/// `X = [[x₁₁, i x₁₂], [i x₂₁, x₂₂]]` solving `D₁X − XD₀ = −J₂F` with
/// `D₁ = J₂E`, `D₀ = J₂G`, through the real 4×4 system.
fn sylvester_solve(co: &SylvesterCoefficients, f: &C2) -> Result<C2> {
    let rhs = nalgebra::Vector4::new(-f[(1, 0)].im, f[(1, 1)].re, -f[(0, 0)].re, f[(0, 1)].im);
    let x = sylvester_inverse(co)? * rhs;
    Ok(C2::new(c(x[0]), I * x[1], I * x[2], c(x[3])))
}

pub fn solve_homological(q1: &ReducedQuadruple) -> Result<C2> {
    sylvester_solve(&SylvesterCoefficients::from_quadruple(q1), &q1.f())
}

/// `S = J₄ [[0, Σ], [Σ*, 0]]`, `Σ = J₂ X`.
pub fn generator(x: &C2) -> C4 {
    let sigma = j2() * x;
    let mut m = C4::zeros();
    set_block(&mut m, 0, 2, &sigma);
    set_block(&mut m, 2, 0, &sigma.adjoint());
    j4() * m
}

/// Scaling and squaring with a degree-6 Taylor polynomial.
pub fn expm(a: &C4) -> C4 {
    let norm = (0..4)
        .map(|j| (0..4).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    // ‖A‖⁷/7! stays below 1e-16 relative under 0.015
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.015 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * c(scale);
    let mut term = C4::identity();
    let mut sum = C4::identity();
    for k in 1..=6 {
        term = term * x * c(1.0 / k as f64);
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// `exp(S) L exp(−S)` returned as the quadruple `B = −J₄ L`.
fn conjugate(l: &C4, s: &C4, template: &ReducedQuadruple) -> ReducedQuadruple {
    let conj = expm(s) * l * expm(&-s);
    ReducedQuadruple::new(-j4() * conj, template.h, template.mu, template.eps)
}

pub fn decouple_step(q1: &ReducedQuadruple, x: &C2) -> ReducedQuadruple {
    conjugate(&q1.l4, &generator(x), q1)
}

fn off_diagonal(a: &C4) -> C4 {
    let mut out = C4::zeros();
    set_block(&mut out, 0, 2, &block(a, 0, 2));
    set_block(&mut out, 2, 0, &block(a, 2, 0));
    out
}

/// Max-norm of the off-diagonal 2×2 blocks.
pub fn off_diagonal_residual(a: &C4) -> f64 {
    max_abs(&off_diagonal(a))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecoupledPair {
    /// `i c_h μ + J₂ E`, carrying the Benjamin-Feir eigenvalues `λ₁±`.
    #[serde(serialize_with = "serialize_c2")]
    pub u_block: C2,
    /// `i c_h μ + J₂ G`, carrying `λ₀±`.
    #[serde(serialize_with = "serialize_c2")]
    pub s_block: C2,
    pub off_diagonal_residual: f64,
    pub iterations: usize,
    /// Max-norm change of the diagonal blocks of `B` across the iteration.
    pub diagonal_correction: f64,
    pub decoupled: ReducedQuadruple,
}

fn serialize_c2<S: serde::Serializer>(a: &C2, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..2)
        .map(|i| (0..2).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect();
    rows.serialize(s)
}

fn eig2(a: &C2) -> Result<Vec<Complex64>> {
    eigenvalues(&CMatrix::from_fn(2, 2, |i, j| a[(i, j)]))
}

impl DecoupledPair {
    pub fn u_eigenvalues(&self) -> Result<Vec<Complex64>> {
        eig2(&self.u_block)
    }

    pub fn s_eigenvalues(&self) -> Result<Vec<Complex64>> {
        eig2(&self.s_block)
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let mut v = self.u_eigenvalues()?;
        v.extend(self.s_eigenvalues()?);
        Ok(v)
    }
}

/// Solve `[S, D] = −R − 𝓡(S)` by fixed-point iteration, where
/// `𝓡(S) = Π_off(e^S L e^{−S}) − R − [S, D]`, until the conjugated matrix has
/// off-diagonal max-norm at most `tol`. Aborts when the residual grows.
pub fn full_decouple(q2: &ReducedQuadruple, tol: f64) -> Result<DecoupledPair> {
    let l = q2.l4;
    let r = off_diagonal(&l);
    let d = l - r;
    let co = SylvesterCoefficients::from_quadruple(q2);
    let mut s = C4::zeros();
    let mut previous = f64::INFINITY;
    for iterations in 1..=DECOUPLE_MAX_ITER {
        let conj = expm(&s) * l * expm(&-s);
        let residual = off_diagonal_residual(&conj);
        if residual <= tol {
            let b3 = -j4() * conj;
            let decoupled = ReducedQuadruple::new(b3, q2.h, q2.mu, q2.eps);
            let shift = I * q2.h.tanh().sqrt() * q2.mu;
            let diag_change = |r0: usize| max_abs2(&(block(&b3, r0, r0) - block(&q2.b4, r0, r0)));
            return Ok(DecoupledPair {
                u_block: j2() * decoupled.e() + C2::identity() * shift,
                s_block: j2() * decoupled.g() + C2::identity() * shift,
                off_diagonal_residual: residual,
                iterations,
                diagonal_correction: diag_change(0).max(diag_change(2)),
                decoupled,
            });
        }
        if residual >= previous {
            return Err(Error::NonConvergence {
                what: "block decoupling (residual increased)",
                iterations,
                residual,
            });
        }
        previous = residual;
        let remainder = off_diagonal(&conj) - r - (s * d - d * s);
        let top_right = block(&(r + remainder), 0, 2);
        let f_eff = -j2() * top_right;
        s = generator(&sylvester_solve(&co, &f_eff)?);
    }
    Err(Error::NonConvergence {
        what: "block decoupling",
        iterations: DECOUPLE_MAX_ITER,
        residual: previous,
    })
}

fn max_abs2(a: &C2) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Every stage of the decoupling pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionStages {
    pub input: ReducedQuadruple,
    pub rescaled: ReducedQuadruple,
    #[serde(serialize_with = "serialize_c2")]
    pub x: C2,
    pub stepped: ReducedQuadruple,
    pub decoupled: DecoupledPair,
}

pub fn decoupling_pipeline(q: &ReducedQuadruple, tol: f64) -> Result<ReductionStages> {
    let rescaled = singular_rescaling(q)?;
    let x = solve_homological(&rescaled)?;
    let stepped = decouple_step(&rescaled, &x);
    let decoupled = full_decouple(&stepped, tol)?;
    Ok(ReductionStages {
        input: q.clone(),
        rescaled,
        x,
        stepped,
        decoupled,
    })
}

/// Quadruple built from the leading terms of the entry expansions alone:
/// `E = [[e₁₁ε² − e₂₂μ²/8, i e₁₂μ/2], [·, −e₂₂μ²/8]]`,
/// `F = [[f₁₁ε, i c_h^{-1/2} με], [0, 0]]`, `G = diag(1, μ tanh hμ)`.
pub fn leading_order_quadruple(h: Depth, mu: f64, eps: f64) -> ReducedQuadruple {
    let k = depth_coefficients(h);
    let mut b = C4::zeros();
    let e11 = k.e_11 * eps * eps - k.e_22 * mu * mu / 8.0;
    let e12 = I * (0.5 * k.e_12 * mu);
    set_block(&mut b, 0, 0, &C2::new(c(e11), e12, -e12, c(-k.e_22 * mu * mu / 8.0)));
    let f = C2::new(c(k.f_11 * eps), I * (mu * eps / k.c_h.sqrt()), ZERO, ZERO);
    set_block(&mut b, 0, 2, &f);
    set_block(&mut b, 2, 0, &f.adjoint());
    set_block(&mut b, 2, 2, &C2::new(c(1.0), ZERO, ZERO, c(mu * (h.value() * mu).tanh())));
    ReducedQuadruple::new(b, h.value(), mu, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kato::{kato_reduction, Contour, DEFAULT_NODES};
    use crate::operator::{calibrated_coefficients, multiset_distance};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn d(h: f64) -> Depth {
        Depth::new(h).unwrap()
    }

    fn kato(h: f64, eps: f64, mu: f64) -> ReducedQuadruple {
        let h = d(h);
        let cf = calibrated_coefficients(h, eps, 32).unwrap();
        kato_reduction(h, mu, &cf, &Contour::for_depth(h, DEFAULT_NODES).unwrap())
            .unwrap()
            .quadruple
    }

    fn sample(rng: &mut impl Rng) -> SylvesterCoefficients {
        let mut u = || rng.random_range(-2.0..2.0);
        SylvesterCoefficients {
            a: u(),
            b: u(),
            c: u(),
            d: u(),
            e: u(),
        }
    }

    #[test]
    fn det_trivial_cases() {
        let id = SylvesterCoefficients { a: 1.0, b: 0.0, c: 0.0, d: 0.0, e: 0.0 };
        assert_eq!(sylvester_det(&id), 1.0);
        assert_eq!(sylvester_inverse(&id).unwrap(), Matrix4::identity());
        let bd = SylvesterCoefficients { a: 0.0, b: 1.0, c: 0.0, d: 1.0, e: 0.0 };
        assert_eq!(sylvester_det(&bd), 1.0);
    }

    #[test]
    fn det_and_inverse_match_dense_oracles() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut tested = 0;
        while tested < 100 {
            let co = sample(&mut rng);
            let a = co.matrix();
            // cofactor determinant from nalgebra's LU as the oracle
            let det = a.determinant();
            assert!((sylvester_det(&co) - det).abs() <= 1e-12 * det.abs().max(1.0));
            if det.abs() <= DET_MIN * co.scale().powi(4) {
                continue;
            }
            let inv = sylvester_inverse(&co).unwrap();
            let dense = a.try_inverse().unwrap();
            assert!((inv - dense).amax() <= 1e-10 * dense.amax().max(1.0));
            assert!((a * inv - Matrix4::identity()).amax() <= 1e-12 * dense.amax().max(1.0));
            tested += 1;
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let co = SylvesterCoefficients { a: 0.0, b: 0.0, c: 0.0, d: 0.0, e: 0.0 };
        assert!(matches!(sylvester_inverse(&co), Err(Error::NearSingular(_))));
    }

    #[test]
    fn rescaling_is_similarity() {
        let q = kato(2.0, 0.01, 0.01);
        let r = singular_rescaling(&q).unwrap();
        assert!(multiset_distance(&q.eigenvalues().unwrap(), &r.eigenvalues().unwrap()) <= 1e-10);
        let one = ReducedQuadruple::new(q.b4, q.h, 1.0, q.eps);
        assert!(max_abs(&(singular_rescaling(&one).unwrap().b4 - q.b4)) == 0.0);
        let f = r.f().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(f / (0.01 * 0.01) <= 5.0);
        assert!(singular_rescaling(&ReducedQuadruple::new(q.b4, q.h, 0.0, q.eps)).is_err());
    }

    #[test]
    fn homological_solution_matches_kronecker_solve() {
        let q1 = singular_rescaling(&kato(2.0, 0.01, 0.005)).unwrap();
        let x = solve_homological(&q1).unwrap();
        for z in [x[(0, 0)], x[(1, 1)]] {
            assert!(z.im.abs() <= 1e-10);
        }
        for z in [x[(0, 1)], x[(1, 0)]] {
            assert!(z.re.abs() <= 1e-10);
        }
        let (d1, d0) = (j2() * q1.e(), j2() * q1.g());
        let rhs = -j2() * q1.f();
        assert!(max_abs2(&(d1 * x - x * d0 - rhs)) <= 1e-10);
        // vec(D₁X − XD₀) = (I⊗D₁ − D₀ᵀ⊗I) vec X, column-major
        let mut k = C4::zeros();
        for col in 0..2 {
            for row in 0..2 {
                for j in 0..2 {
                    k[(col * 2 + row, col * 2 + j)] += d1[(row, j)];
                    k[(col * 2 + row, j * 2 + row)] -= d0[(j, col)];
                }
            }
        }
        let b = nalgebra::Vector4::new(rhs[(0, 0)], rhs[(1, 0)], rhs[(0, 1)], rhs[(1, 1)]);
        let v = k.lu().solve(&b).unwrap();
        let xk = C2::new(v[0], v[2], v[1], v[3]);
        assert!(max_abs2(&(xk - x)) <= 1e-9 * max_abs2(&x).max(1.0));
    }

    #[test]
    fn zero_coupling_gives_zero_generator() {
        let mut q = singular_rescaling(&leading_order_quadruple(d(2.0), 0.01, 0.01)).unwrap();
        q = ReducedQuadruple::new(q.b4 - off_diagonal(&q.b4), q.h, q.mu, q.eps);
        let x = solve_homological(&q).unwrap();
        assert!(max_abs2(&x) == 0.0);
        let stepped = decouple_step(&q, &x);
        assert!(max_abs(&(stepped.b4 - q.b4)) <= 1e-17);
        let pair = full_decouple(&q, DECOUPLE_TOL).unwrap();
        assert_eq!(pair.iterations, 1);
        assert!(max_abs(&(pair.decoupled.b4 - q.b4)) == 0.0);
    }

    #[test]
    fn homological_equation_kills_first_order_coupling() {
        let q1 = singular_rescaling(&kato(2.0, 0.01, 0.01)).unwrap();
        let x = solve_homological(&q1).unwrap();
        let s = generator(&x);
        let r = off_diagonal(&q1.l4);
        let dm = q1.l4 - r;
        assert!(max_abs(&(r + s * dm - dm * s)) <= 1e-12);
    }

    #[test]
    fn x21_leading_term() {
        let h = 2.0;
        let k = depth_coefficients(d(h));
        let target = -0.5 / k.d_h * (k.e_12 * k.f_11 + 2.0 / k.c_h.sqrt());
        let mut errs = vec![];
        for eps in [0.04, 0.02, 0.01] {
            let q1 = singular_rescaling(&kato(h, eps, eps * eps)).unwrap();
            let x = solve_homological(&q1).unwrap();
            errs.push((x[(1, 0)].im / eps - target).abs());
        }
        assert!(errs[2] < errs[0], "{errs:?}");
        assert!(errs[2] <= 0.05 * target.abs(), "{errs:?} {target}");
    }

    #[test]
    fn expm_matches_series_and_inverse() {
        let q = kato(1.0, 0.02, 0.02);
        let s = generator(&solve_homological(&singular_rescaling(&q).unwrap()).unwrap());
        let big = s * c(40.0);
        let prod = expm(&big) * expm(&-big);
        assert!(max_abs(&(prod - C4::identity())) <= 1e-12);
        let zero = expm(&C4::zeros());
        assert_eq!(zero, C4::identity());
    }

    #[test]
    fn pipeline_preserves_structure() {
        for h in [1.0, 2.0] {
            let q = kato(h, 0.01, 0.01);
            let st = decoupling_pipeline(&q, DECOUPLE_TOL).unwrap();
            let ev_in = q.eigenvalues().unwrap();
            for stage in [&st.rescaled, &st.stepped, &st.decoupled.decoupled] {
                assert!(multiset_distance(&ev_in, &stage.eigenvalues().unwrap()) <= 1e-10);
                assert!(stage.hermitian_defect() <= 1e-9);
                assert!(stage.pattern_defect() <= 1e-9);
            }
            assert!(st.decoupled.off_diagonal_residual <= DECOUPLE_TOL);
            assert!(multiset_distance(&ev_in, &st.decoupled.eigenvalues().unwrap()) <= 1e-10);
            let s = st.decoupled.s_eigenvalues().unwrap();
            assert!(s.iter().all(|z| z.re.abs() <= 1e-9));
        }
    }

    #[test]
    fn second_coupling_is_cubic_in_eps() {
        let mut ratios = vec![];
        for eps in [0.02, 0.01, 0.005] {
            let q1 = singular_rescaling(&kato(2.0, eps, eps)).unwrap();
            let q2 = decouple_step(&q1, &solve_homological(&q1).unwrap());
            let f2 = q2.f().iter().map(|z| z.norm()).fold(0.0, f64::max);
            ratios.push(f2 / (eps * eps.powi(3)));
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 50.0), "{ratios:?}");
    }

    #[test]
    fn leading_order_pipeline_runs() {
        let q = leading_order_quadruple(d(2.0), 0.01, 0.01);
        let st = decoupling_pipeline(&q, DECOUPLE_TOL).unwrap();
        let k = depth_coefficients(d(2.0));
        let e2 = st.stepped.e()[(0, 0)].re;
        let ratio = (e2 + k.e_22 * 1e-6 / 8.0) / (0.01 * 1e-4);
        assert!((ratio - k.e_wb).abs() <= 0.2 * k.e_wb.abs(), "{ratio} vs {}", k.e_wb);
    }

    proptest! {
        #[test]
        fn det_formulas_agree(a in -2.0f64..2.0, b in -2.0f64..2.0, cc in -2.0f64..2.0, dd in -2.0f64..2.0, e in -2.0f64..2.0) {
            let co = SylvesterCoefficients { a, b, c: cc, d: dd, e };
            let alt = (b * dd - a * a).powi(2) - 2.0 * cc * e * (a * a + b * dd - 0.5 * cc * e);
            prop_assert!((sylvester_det(&co) - alt).abs() <= 1e-12 * alt.abs().max(1.0));
        }
    }
}
