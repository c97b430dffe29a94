//! The covariant cloning family for maximally entangled qubit pairs.
//!
//! A cloner is a rank-4 tensor `s_ijkl` over magic-basis indices: clone `a`
//! (i), clone `b` (j), ancilla (k) and input (l). It acts on an input with
//! magic coefficients `n` as
//!
//! ```text
//! |n⟩ -> Σ_ijk (Σ_l s_ijkl n_l) |i⟩_a |j⟩_b |k⟩_anc
//! ```
//!
//! The covariant tensors are `A δ_il δ_jk + B δ_jl δ_ik + C δ_kl δ_ij`.

use nalgebra::{DMatrix, Matrix4};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qmat::{c, ComplexMatrix, C64};
use crate::states::{
    from_magic, magic_basis, magic_unitary, to_magic, MagicCoefficients, TwoQubitPure,
};

/// Tolerance on the normalization quadric.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Bloch-vector shrink of the optimal universal qubit cloner.
pub const LOCAL_SHRINK: f64 = 2.0 / 3.0;

const ZERO: C64 = C64::new(0.0, 0.0);

/// The `(A, B, C)` triple of an invariant cloning tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClonerCoefficients {
    pub a: C64,
    pub b: C64,
    pub c: C64,
}

impl ClonerCoefficients {
    pub fn new(a: C64, b: C64, c: C64) -> Self {
        Self { a, b, c }
    }

    pub fn real(a: f64, b: f64, cc: f64) -> Self {
        Self::new(c(a, 0.0), c(b, 0.0), c(cc, 0.0))
    }

    /// `4(|A|²+|B|²+|C|²) + 2 Re(AB* + AC* + BC*)`; equals one for a
    /// trace-preserving cloner.
    pub fn normalization_value(&self) -> f64 {
        let (a, b, cc) = (self.a, self.b, self.c);
        4.0 * (a.norm_sqr() + b.norm_sqr() + cc.norm_sqr())
            + 2.0 * (a * b.conj() + a * cc.conj() + b * cc.conj()).re
    }

    pub fn check_normalized(&self) -> Result<()> {
        let value = self.normalization_value();
        if (value - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::CoefficientsNotNormalized { value });
        }
        Ok(())
    }

    /// Rescales onto the normalization quadric.
    pub fn normalized(&self) -> Result<Self> {
        let value = self.normalization_value();
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::CoefficientsNotNormalized { value });
        }
        let k = c(value.sqrt().recip(), 0.0);
        Ok(Self::new(self.a * k, self.b * k, self.c * k))
    }

    /// Exchanges the roles of the two clones.
    pub fn swapped(&self) -> Self {
        Self::new(self.b, self.a, self.c)
    }
}

/// `A = B = (1/3)√(1/2 + 1/√13)`, `C = A(√13 - 3)/2`.
pub fn optimal_symmetric_coeffs() -> ClonerCoefficients {
    let r13 = 13f64.sqrt();
    let a = (0.5 + 1.0 / r13).sqrt() / 3.0;
    let cc = a * (r13 - 3.0) / 2.0;
    ClonerCoefficients::real(a, a, cc)
}

/// `(5 + √13)/12`.
pub fn optimal_symmetric_fidelity() -> f64 {
    (5.0 + 13f64.sqrt()) / 12.0
}

/// Dense `s_ijkl`, stored with `l` fastest. Equivalently the 64x4 isometry
/// whose column `l` is the image of the magic basis vector `e_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClonerTensor {
    s: Vec<C64>,
}

#[inline]
fn idx(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 4 + j) * 4 + k) * 4 + l
}

impl ClonerTensor {
    pub fn zeros() -> Self {
        Self { s: vec![ZERO; 256] }
    }

    pub fn from_coeffs(co: &ClonerCoefficients) -> Self {
        let mut t = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        let mut v = ZERO;
                        if i == l && j == k {
                            v += co.a;
                        }
                        if j == l && i == k {
                            v += co.b;
                        }
                        if k == l && i == j {
                            v += co.c;
                        }
                        t.s[idx(i, j, k, l)] = v;
                    }
                }
            }
        }
        t
    }

    /// Interprets a 64x4 matrix (rows `(i, j, k)`, columns `l`) as a tensor.
    pub fn from_isometry(v: &DMatrix<C64>) -> Result<Self> {
        if v.nrows() != 64 || v.ncols() != 4 {
            return Err(Error::Dimension(format!(
                "isometry must be 64x4, got {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let mut t = Self::zeros();
        for row in 0..64 {
            for l in 0..4 {
                t.s[row * 4 + l] = v[(row, l)];
            }
        }
        Ok(t)
    }

    pub fn to_isometry(&self) -> DMatrix<C64> {
        DMatrix::from_fn(64, 4, |row, l| self.s[row * 4 + l])
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.s[idx(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, value: C64) {
        self.s[idx(i, j, k, l)] = value;
    }

    /// Reads `(A, B, C)` off the entries `s_0110`, `s_0101`, `s_0011`.
    pub fn coefficients(&self) -> ClonerCoefficients {
        ClonerCoefficients::new(
            self.get(0, 1, 1, 0),
            self.get(0, 1, 0, 1),
            self.get(0, 0, 1, 1),
        )
    }

    /// Max-norm distance from the invariant tensor built from
    /// [`Self::coefficients`]; zero exactly for the covariant family.
    pub fn invariant_form_residual(&self) -> f64 {
        self.max_abs_diff(&Self::from_coeffs(&self.coefficients()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.s
            .iter()
            .zip(other.s.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Applies `R` to each of the four indices.
    pub fn rotated(&self, r: &Matrix4<f64>) -> Self {
        let mut cur = self.s.clone();
        for axis in 0..4 {
            let stride = 4usize.pow(3 - axis as u32);
            let mut next = vec![ZERO; 256];
            for (flat, out) in next.iter_mut().enumerate() {
                let digit = (flat / stride) % 4;
                let base = flat - digit * stride;
                let mut acc = ZERO;
                for p in 0..4 {
                    acc += cur[base + p * stride] * r[(digit, p)];
                }
                *out = acc;
            }
            cur = next;
        }
        Self { s: cur }
    }

    /// `Σ_l s_ijkl n_l` as a 64-vector indexed `(i, j, k)`.
    pub fn apply(&self, n: &MagicCoefficients) -> [C64; 64] {
        let n = n.coeffs();
        let mut out = [ZERO; 64];
        for (row, o) in out.iter_mut().enumerate() {
            let base = row * 4;
            *o = (0..4).map(|l| self.s[base + l] * n[l]).sum();
        }
        out
    }
}

/// Magic-basis reduced states of clones `a` and `b` from the joint
/// `(a, b, ancilla)` amplitude vector.
pub fn clone_states_magic(psi: &[C64; 64]) -> (Matrix4<C64>, Matrix4<C64>) {
    let mut ra = Matrix4::zeros();
    let mut rb = Matrix4::zeros();
    for x in 0..4 {
        for y in 0..4 {
            let mut acc_a = ZERO;
            let mut acc_b = ZERO;
            for p in 0..4 {
                for q in 0..4 {
                    acc_a += psi[x * 16 + p * 4 + q] * psi[y * 16 + p * 4 + q].conj();
                    acc_b += psi[p * 16 + x * 4 + q] * psi[p * 16 + y * 4 + q].conj();
                }
            }
            ra[(x, y)] = acc_a;
            rb[(x, y)] = acc_b;
        }
    }
    (ra, rb)
}

fn magic_to_computational(rho_magic: &Matrix4<C64>) -> ComplexMatrix {
    let m = magic_unitary();
    let r = m * rho_magic * m.adjoint();
    let entries: Vec<C64> = (0..16).map(|k| r[(k / 4, k % 4)]).collect();
    ComplexMatrix::from_row_slice(4, &entries)
        .and_then(|x| x.with_dims(&[2, 2]))
        .expect("finite 4x4")
}

fn overlap(n: &MagicCoefficients, rho_magic: &Matrix4<C64>) -> f64 {
    let v = n.coeffs();
    let mut acc = ZERO;
    for i in 0..4 {
        for j in 0..4 {
            acc += v[i].conj() * rho_magic[(i, j)] * v[j];
        }
    }
    acc.re
}

/// Reduced states of the two clones (computational basis, factors `[2, 2]`)
/// and their overlaps with the input.
#[derive(Clone, Debug)]
pub struct ClonePair {
    pub rho_a: ComplexMatrix,
    pub rho_b: ComplexMatrix,
    pub f_a: f64,
    pub f_b: f64,
}

impl ClonePair {
    pub fn from_joint(n: &MagicCoefficients, psi: &[C64; 64]) -> Self {
        let (ra, rb) = clone_states_magic(psi);
        Self {
            f_a: overlap(n, &ra),
            f_b: overlap(n, &rb),
            rho_a: magic_to_computational(&ra),
            rho_b: magic_to_computational(&rb),
        }
    }
}

pub fn apply_cloner(n: &MagicCoefficients, co: &ClonerCoefficients) -> Result<[C64; 64]> {
    co.check_normalized()?;
    let out = ClonerTensor::from_coeffs(co).apply(n);
    let norm_sq: f64 = out.iter().map(|z| z.norm_sqr()).sum();
    if (norm_sq - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(out)
}

pub fn clone_pair(n: &MagicCoefficients, co: &ClonerCoefficients) -> Result<ClonePair> {
    let psi = apply_cloner(n, co)?;
    Ok(ClonePair::from_joint(n, &psi))
}

/// `F_a = 4|A|²+|B|²+|C|²+2Re(AB*+AC*+BC*)`, and `F_b` with `A ↔ B`.
pub fn fidelities_closed_form(co: &ClonerCoefficients) -> (f64, f64) {
    let (a, b, cc) = (co.a, co.b, co.c);
    let cross = 2.0 * (a * b.conj() + a * cc.conj() + b * cc.conj()).re;
    let rest = cc.norm_sqr() + cross;
    (
        4.0 * a.norm_sqr() + b.norm_sqr() + rest,
        4.0 * b.norm_sqr() + a.norm_sqr() + rest,
    )
}

/// Best fidelity of clone `a` for real coefficients with `B = b_coeff` and
/// clone `b` at fidelity `f_b`, after eliminating `A` and `C`.
pub fn tradeoff_fa(b_coeff: f64, f_b: f64) -> Result<f64> {
    const EDGE: f64 = 1e-14;
    if !(0.25 - EDGE..=1.0 + EDGE).contains(&f_b) {
        return Err(Error::OutOfDomain {
            name: "f_b",
            value: f_b,
            domain: "[1/4, 1]",
        });
    }
    let outer = -3.0 * b_coeff * b_coeff + f_b;
    if outer < -EDGE {
        return Err(Error::Infeasible(format!(
            "-3B^2 + F_b = {outer:e} < 0 at B = {b_coeff}, F_b = {f_b}"
        )));
    }
    let root = outer.max(0.0).sqrt();
    let inner = 18.0 * b_coeff * b_coeff + 18.0 * b_coeff * root - 15.0 * f_b + 6.0;
    if inner < -EDGE {
        return Err(Error::Infeasible(format!(
            "inner radicand {inner:e} < 0 at B = {b_coeff}, F_b = {f_b}"
        )));
    }
    Ok(-3.0 * b_coeff * b_coeff
        + (f_b + 1.0) / 2.0
        + (root - b_coeff) / 2.0 * inner.max(0.0).sqrt())
}

/// Depolarizes one qubit of a two-qubit operator: `η ρ + (1-η) I/2 ⊗ Tr_q ρ`.
fn depolarize_qubit(rho: &ComplexMatrix, qubit: usize, shrink: f64) -> Result<ComplexMatrix> {
    let other = 1 - qubit;
    let reduced = rho.partial_trace(&[other])?;
    let half_id = ComplexMatrix::identity(&[2]).scale(c(0.5, 0.0));
    let noise = if qubit == 0 {
        half_id.kron(&reduced)
    } else {
        reduced.kron(&half_id)
    };
    Ok(&rho.scale(c(shrink, 0.0)) + &noise.scale(c(1.0 - shrink, 0.0)))
}

/// Each qubit of the pair is cloned independently by the optimal universal
/// qubit cloner, whose single-clone marginal is the depolarizing channel with
/// shrink 2/3. Both clones are identical.
pub fn local_clone_pair(n: &MagicCoefficients) -> Result<ClonePair> {
    let input = from_magic(n)?;
    let rho = input.density();
    let out = depolarize_qubit(&depolarize_qubit(&rho, 0, LOCAL_SHRINK)?, 1, LOCAL_SHRINK)?;
    let f = {
        let v = input.amps();
        let mut acc = ZERO;
        for i in 0..4 {
            for j in 0..4 {
                acc += v[i].conj() * out.get(i, j) * v[j];
            }
        }
        acc.re
    };
    Ok(ClonePair {
        rho_a: out.clone(),
        rho_b: out,
        f_a: f,
        f_b: f,
    })
}

/// One branch of the measure-and-reprepare strategy: with `probability` the
/// outcome `e_index` is seen and both clones are prepared in it.
#[derive(Clone, Debug)]
pub struct BellOutcome {
    pub index: usize,
    pub probability: f64,
    pub clone: TwoQubitPure,
}

/// Measures the input in the magic basis and prepares two copies of the
/// outcome. Zero-probability outcomes are dropped.
pub fn bell_measure_reprepare(n: &MagicCoefficients) -> Result<Vec<BellOutcome>> {
    let coeffs = n.coeffs();
    let norm_sq: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    if (norm_sq - 1.0).abs() > crate::states::NORM_TOL {
        return Err(Error::NotNormalized { norm_sq });
    }
    let basis = magic_basis();
    Ok(coeffs
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm_sqr() > 1e-15)
        .map(|(i, z)| BellOutcome {
            index: i,
            probability: z.norm_sqr(),
            clone: basis[i],
        })
        .collect())
}

/// Highest per-branch clone concurrence of the measure-and-reprepare
/// strategy on a pure input.
pub fn bell_reprepare_max_concurrence(input: &TwoQubitPure) -> Result<f64> {
    let outcomes = bell_measure_reprepare(&to_magic(input)?)?;
    let mut best = 0.0f64;
    for o in outcomes {
        let conc = crate::states::concurrence_pure(&to_magic(&o.clone)?);
        best = best.max(conc);
    }
    Ok(best)
}

/// Normalized triple with independent complex Gaussian `A`, `B`, `C`.
pub fn random_coefficients_with<R: Rng + ?Sized>(rng: &mut R) -> ClonerCoefficients {
    let mut z = || c(rng.sample(StandardNormal), rng.sample(StandardNormal));
    loop {
        let co = ClonerCoefficients::new(z(), z(), z());
        if let Ok(n) = co.normalized() {
            return n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{concurrence_mixed, werner_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_real_triple(rng: &mut ChaCha8Rng) -> ClonerCoefficients {
        ClonerCoefficients::real(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalized()
        .unwrap()
    }

    #[test]
    fn tensor_entries() {
        let co = ClonerCoefficients::real(0.3, 0.2, 0.1);
        let t = ClonerTensor::from_coeffs(&co);
        assert!((t.get(0, 0, 0, 0) - c(0.6, 0.0)).norm() < 1e-15);
        assert_eq!(t.get(0, 1, 1, 0), c(0.3, 0.0));
        assert_eq!(t.get(0, 0, 1, 1), c(0.1, 0.0));
        assert_eq!(t.get(0, 1, 2, 3), ZERO);
        assert_eq!(t.coefficients(), co);
        assert_eq!(t.invariant_form_residual(), 0.0);
    }

    #[test]
    fn optimal_coefficients() {
        let co = optimal_symmetric_coeffs();
        // closed-form values evaluated independently in double precision
        assert!((co.a.re - 0.293_891_532_9).abs() < 1e-9);
        assert!((co.c.re - 0.088_983_196_3).abs() < 1e-9);
        assert!((co.normalization_value() - 1.0).abs() < 1e-12);
        let (fa, fb) = fidelities_closed_form(&co);
        assert!((fa - 0.717_129_273).abs() < 1e-9);
        assert_eq!(fa, fb);
    }

    #[test]
    fn apply_examples() {
        let e0 = MagicCoefficients::basis(0);
        let out = apply_cloner(&e0, &optimal_symmetric_coeffs()).unwrap();
        let ns: f64 = out.iter().map(|z| z.norm_sqr()).sum();
        assert!((ns - 1.0).abs() < 1e-12);

        let trivial = ClonerCoefficients::real(0.5, 0.0, 0.0);
        let out = apply_cloner(&e0, &trivial).unwrap();
        for (row, z) in out.iter().enumerate() {
            let (i, j, k) = (row / 16, (row / 4) % 4, row % 4);
            let expect = if i == 0 && j == k { 0.5 } else { 0.0 };
            assert!((z - c(expect, 0.0)).norm() < 1e-15);
        }
        let pair = clone_pair(&e0, &trivial).unwrap();
        assert!(pair.rho_a.max_abs_diff(&magic_basis()[0].density()) < 1e-15);
    }

    #[test]
    fn apply_rejects_unnormalized() {
        let bad = ClonerCoefficients::real(0.5, 0.5, 0.5);
        assert!(matches!(
            apply_cloner(&MagicCoefficients::basis(0), &bad),
            Err(Error::CoefficientsNotNormalized { .. })
        ));
    }

    #[test]
    fn product_input_gives_separable_clones() {
        let n = to_magic(&TwoQubitPure::basis(0)).unwrap();
        let pair = clone_pair(&n, &optimal_symmetric_coeffs()).unwrap();
        assert!(concurrence_mixed(&pair.rho_a).unwrap() < 1e-9);
        assert!(concurrence_mixed(&pair.rho_b).unwrap() < 1e-9);
    }

    #[test]
    fn clone_pair_examples() {
        let f = optimal_symmetric_fidelity();
        let n = MagicCoefficients::from_real([0.5, 0.5, -0.5, 0.5]).unwrap();
        let pair = clone_pair(&n, &optimal_symmetric_coeffs()).unwrap();
        assert!((pair.f_a - f).abs() < 1e-9);
        assert!((pair.f_b - f).abs() < 1e-9);

        let pair = clone_pair(&n, &ClonerCoefficients::real(0.5, 0.0, 0.0)).unwrap();
        assert!((pair.f_a - 1.0).abs() < 1e-12);
        assert!((pair.f_b - 0.25).abs() < 1e-12);

        let pair = clone_pair(&MagicCoefficients::basis(2), &optimal_symmetric_coeffs()).unwrap();
        let w = werner_state(f, 2).unwrap();
        assert!(pair.rho_a.max_abs_diff(&w) < 1e-9);
        assert!(pair.rho_b.max_abs_diff(&w) < 1e-9);
    }

    #[test]
    fn closed_form_examples() {
        let (fa, fb) = fidelities_closed_form(&ClonerCoefficients::real(0.5, 0.0, 0.0));
        assert!((fa - 1.0).abs() < 1e-15 && (fb - 0.25).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let co = random_real_triple(&mut rng);
            let (fa, fb) = fidelities_closed_form(&co);
            let pair = clone_pair(&crate::states::random_me_state_with(&mut rng), &co).unwrap();
            assert!((pair.f_a - fa).abs() < 1e-10);
            assert!((pair.f_b - fb).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_closed_form_reduces() {
        // A = B collapses to 7|A|² + |C|² + 4 Re(AC*)
        let co = ClonerCoefficients::new(c(0.2, 0.1), c(0.2, 0.1), c(0.05, -0.3));
        let (fa, _) = fidelities_closed_form(&co);
        let expect = 7.0 * co.a.norm_sqr() + co.c.norm_sqr() + 4.0 * (co.a * co.c.conj()).re;
        assert!((fa - expect).abs() < 1e-15);
    }

    #[test]
    fn tradeoff_examples() {
        assert!((tradeoff_fa(0.0, 0.25).unwrap() - 1.0).abs() < 1e-15);
        let f = optimal_symmetric_fidelity();
        let a = optimal_symmetric_coeffs().a.re;
        assert!((tradeoff_fa(a, f).unwrap() - f).abs() < 1e-9);
    }

    #[test]
    fn tradeoff_domain_errors() {
        assert!(matches!(
            tradeoff_fa(0.0, 0.2),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            tradeoff_fa(0.0, 1.1),
            Err(Error::OutOfDomain { .. })
        ));
        // -3B² + F_b < 0
        assert!(matches!(tradeoff_fa(0.6, 0.5), Err(Error::Infeasible(_))));
        // inner radicand 18B² + 18B√(F_b-3B²) - 15F_b + 6 < 0 near B = -0.2, F_b = 0.9
        assert!(matches!(tradeoff_fa(-0.2, 0.9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn local_cloner_examples() {
        let n = crate::states::random_me_state(4);
        let pair = local_clone_pair(&n).unwrap();
        assert!((pair.f_a - 7.0 / 12.0).abs() < 1e-12);
        let conc = concurrence_mixed(&pair.rho_a).unwrap();
        assert!((conc - 1.0 / 6.0).abs() < 1e-10);
        let e = crate::states::eof_from_concurrence(conc).unwrap();
        assert!((e - 0.060).abs() < 1e-3);

        let prod = to_magic(&crate::states::random_product_state(4)).unwrap();
        let pair = local_clone_pair(&prod).unwrap();
        assert!(concurrence_mixed(&pair.rho_a).unwrap() < 1e-10);
    }

    #[test]
    fn measure_reprepare_examples() {
        let out = bell_measure_reprepare(&MagicCoefficients::basis(0)).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].probability - 1.0).abs() < 1e-15);

        let zero = to_magic(&TwoQubitPure::basis(0)).unwrap();
        let out = bell_measure_reprepare(&zero).unwrap();
        let idx: Vec<usize> = out.iter().map(|o| o.index).collect();
        assert_eq!(idx, vec![0, 1]);
        for o in &out {
            assert!((o.probability - 0.5).abs() < 1e-15);
        }
        assert!(
            (bell_reprepare_max_concurrence(&TwoQubitPure::basis(0)).unwrap() - 1.0).abs() < 1e-12
        );

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sup = MagicCoefficients::from_real([s, s, 0.0, 0.0]).unwrap();
        let target = from_magic(&sup).unwrap();
        for o in bell_measure_reprepare(&sup).unwrap() {
            assert!(o.clone.inner(&target).norm_sqr() < 1.0 - 1e-9);
        }
    }

    #[test]
    fn rotation_by_identity_is_exact() {
        let t = ClonerTensor::from_coeffs(&optimal_symmetric_coeffs());
        assert_eq!(t.rotated(&Matrix4::identity()), t);
    }

    #[test]
    fn isometry_round_trip() {
        let t = ClonerTensor::from_coeffs(&optimal_symmetric_coeffs());
        let v = t.to_isometry();
        let gram = v.adjoint() * &v;
        let id = DMatrix::<C64>::identity(4, 4);
        assert!((gram - id).iter().all(|z| z.norm() < 1e-12));
        assert_eq!(ClonerTensor::from_isometry(&v).unwrap(), t);
    }
}
