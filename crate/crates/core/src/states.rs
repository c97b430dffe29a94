//! Two-qubit pure states, the magic basis, concurrence and entanglement of
//! formation.
//!
//! Computational order is `|00⟩, |01⟩, |10⟩, |11⟩`. The magic basis is
//!
//! ```text
//! e0 = |Φ+⟩,  e1 = i|Φ-⟩,  e2 = i|Ψ+⟩,  e3 = |Ψ-⟩
//! ```
//!
//! and in it a pure state with coefficients `n` has concurrence `|Σ n_i²|`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qmat::{c, ComplexMatrix, C64};

/// Tolerance on unit norm for state constructors.
pub const NORM_TOL: f64 = 1e-10;
/// Trace and positivity tolerance for density-matrix inputs.
pub const DENSITY_TOL: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitPure {
    amps: [C64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagicCoefficients {
    n: [C64; 4],
}

fn norm_sq(v: &[C64; 4]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn check_norm(v: &[C64; 4]) -> Result<()> {
    let ns = norm_sq(v);
    if (ns - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sq: ns });
    }
    Ok(())
}

impl TwoQubitPure {
    pub fn new(amps: [C64; 4]) -> Result<Self> {
        check_norm(&amps)?;
        Ok(Self { amps })
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amps: [C64; 4]) -> Result<Self> {
        let ns = norm_sq(&amps);
        if !(ns > 0.0 && ns.is_finite()) {
            return Err(Error::NotNormalized { norm_sq: ns });
        }
        let k = ns.sqrt().recip();
        Ok(Self {
            amps: amps.map(|z| z * k),
        })
    }

    pub fn basis(index: usize) -> Self {
        let mut amps = [ZERO; 4];
        amps[index] = c(1.0, 0.0);
        Self { amps }
    }

    pub fn product(q1: [C64; 2], q2: [C64; 2]) -> Result<Self> {
        Self::normalized([q1[0] * q2[0], q1[0] * q2[1], q1[1] * q2[0], q1[1] * q2[1]])
    }

    /// `α|00⟩ + √(1-α²)|11⟩`.
    pub fn schmidt(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OutOfDomain {
                name: "alpha",
                value: alpha,
                domain: "[0, 1]",
            });
        }
        let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
        Self::new([c(alpha, 0.0), ZERO, ZERO, c(beta, 0.0)])
    }

    pub fn amps(&self) -> &[C64; 4] {
        &self.amps
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn density(&self) -> ComplexMatrix {
        ComplexMatrix::projector(&self.amps, &[2, 2]).expect("4 = 2 x 2")
    }
}

impl MagicCoefficients {
    pub fn new(n: [C64; 4]) -> Result<Self> {
        check_norm(&n)?;
        Ok(Self { n })
    }

    pub fn from_real(n: [f64; 4]) -> Result<Self> {
        Self::new(n.map(|x| c(x, 0.0)))
    }

    pub fn basis(index: usize) -> Self {
        let mut n = [ZERO; 4];
        n[index] = c(1.0, 0.0);
        Self { n }
    }

    pub fn coeffs(&self) -> &[C64; 4] {
        &self.n
    }

    /// True when every coefficient is real up to a common global phase.
    pub fn is_real_up_to_phase(&self, tol: f64) -> bool {
        let pivot = self
            .n
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(ZERO);
        if pivot.norm() == 0.0 {
            return false;
        }
        let phase = pivot.conj() / pivot.norm();
        self.n.iter().all(|z| (z * phase).im.abs() <= tol)
    }

    /// Magic-basis density matrix `n n†`.
    pub fn projector_magic(&self) -> Matrix4<C64> {
        Matrix4::from_fn(|i, j| self.n[i] * self.n[j].conj())
    }
}

/// The four magic-basis vectors in computational coordinates.
pub fn magic_basis() -> [TwoQubitPure; 4] {
    let s = FRAC_1_SQRT_2;
    [
        TwoQubitPure {
            amps: [c(s, 0.0), ZERO, ZERO, c(s, 0.0)],
        },
        TwoQubitPure {
            amps: [c(0.0, s), ZERO, ZERO, c(0.0, -s)],
        },
        TwoQubitPure {
            amps: [ZERO, c(0.0, s), c(0.0, s), ZERO],
        },
        TwoQubitPure {
            amps: [ZERO, c(s, 0.0), c(-s, 0.0), ZERO],
        },
    ]
}

/// Unitary whose columns are the magic basis vectors; maps magic
/// coordinates to computational coordinates.
pub fn magic_unitary() -> Matrix4<C64> {
    let basis = magic_basis();
    Matrix4::from_fn(|row, col| basis[col].amps[row])
}

pub fn magic_unitary_dyn() -> DMatrix<C64> {
    let m = magic_unitary();
    DMatrix::from_fn(4, 4, |i, j| m[(i, j)])
}

pub fn to_magic(s: &TwoQubitPure) -> Result<MagicCoefficients> {
    check_norm(&s.amps)?;
    let basis = magic_basis();
    let mut n = [ZERO; 4];
    for (ni, e) in n.iter_mut().zip(basis.iter()) {
        *ni = e.inner(s);
    }
    Ok(MagicCoefficients { n })
}

pub fn from_magic(n: &MagicCoefficients) -> Result<TwoQubitPure> {
    check_norm(&n.n)?;
    let basis = magic_basis();
    let mut amps = [ZERO; 4];
    for (coef, e) in n.n.iter().zip(basis.iter()) {
        for (a, b) in amps.iter_mut().zip(e.amps.iter()) {
            *a += coef * b;
        }
    }
    Ok(TwoQubitPure { amps })
}

pub fn concurrence_pure(n: &MagicCoefficients) -> f64 {
    let sum: C64 = n.n.iter().map(|z| z * z).sum();
    sum.norm().min(1.0)
}

/// Checks Hermiticity, unit trace and positivity of a two-qubit state.
pub fn validate_density(rho: &ComplexMatrix) -> Result<()> {
    if rho.side() != 4 {
        return Err(Error::NotDensityMatrix(format!(
            "expected 4x4, got {0}x{0}",
            rho.side()
        )));
    }
    rho.ensure_hermitian()?;
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
        return Err(Error::NotDensityMatrix(format!("trace {tr}")));
    }
    let min = rho.hermitian_eig()?.min_eigenvalue();
    if min < -DENSITY_TOL {
        return Err(Error::NotDensityMatrix(format!("min eigenvalue {min:e}")));
    }
    Ok(())
}

fn to_m4(rho: &ComplexMatrix) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| rho.get(i, j))
}

fn hermitian_part(m: &Matrix4<C64>) -> Matrix4<C64> {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues of ρ below this are eigensolver noise and dropped before the
/// concurrence spectrum is formed; square roots would otherwise lift 1e-17
/// noise to 1e-9.
const RANK_CUTOFF: f64 = 1e-14;

/// `W` with `W W† = ρ`, built from the eigendecomposition.
fn factor(rho: &Matrix4<C64>) -> Matrix4<C64> {
    let eig = hermitian_part(rho).symmetric_eigen();
    let mut w = eig.eigenvectors;
    for j in 0..4 {
        let lambda = eig.eigenvalues[j];
        let s = if lambda > RANK_CUTOFF {
            lambda.sqrt()
        } else {
            0.0
        };
        for i in 0..4 {
            w[(i, j)] *= s;
        }
    }
    w
}

/// `λ1 ≥ λ2 ≥ λ3 ≥ λ4`, the singular values of `Wᵀ J W` for `ρ = W W†`.
/// They equal the square roots of the eigenvalues of `ρ J ρ* J`, i.e. the
/// spectrum of `√(√ρ ρ̃ √ρ)`.
fn lambda_spectrum_with(rho: &Matrix4<C64>, flip: Option<&Matrix4<C64>>) -> [f64; 4] {
    let w = factor(rho);
    let t = match flip {
        Some(j) => w.transpose() * j * w,
        None => w.transpose() * w,
    };
    let sv = t.singular_values();
    let mut l = [sv[0], sv[1], sv[2], sv[3]];
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

/// `λ1 - λ2 - λ3 - λ4` before clamping at zero, for a density matrix
/// already expressed in the magic basis. Smooth where the spectrum is
/// non-degenerate, which is what the optimizers climb on.
pub fn concurrence_margin_magic(rho_magic: &Matrix4<C64>) -> f64 {
    let l = lambda_spectrum_with(rho_magic, None);
    l[0] - l[1] - l[2] - l[3]
}

/// Mixed-state concurrence with the complex conjugation taken in the magic
/// basis.
pub fn concurrence_mixed(rho: &ComplexMatrix) -> Result<f64> {
    validate_density(rho)?;
    let m = magic_unitary();
    let rho_magic = m.adjoint() * to_m4(rho) * m;
    Ok(concurrence_margin_magic(&rho_magic).clamp(0.0, 1.0))
}

/// Mixed-state concurrence from the spin flip `σy⊗σy` applied to `ρ*` in the
/// computational basis. Independent of the magic-basis route above; the two
/// must agree.
pub fn concurrence_spin_flip(rho: &ComplexMatrix) -> Result<f64> {
    validate_density(rho)?;
    // σy ⊗ σy is real: anti-diagonal (-1, 1, 1, -1)
    let yy = Matrix4::from_fn(|i, j| {
        if i + j == 3 {
            c(if i == 0 || i == 3 { -1.0 } else { 1.0 }, 0.0)
        } else {
            ZERO
        }
    });
    let l = lambda_spectrum_with(&to_m4(rho), Some(&yy));
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain {
            name: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    Ok(term(x) + term(1.0 - x))
}

/// Entanglement of formation in ebits for a given concurrence.
pub fn eof_from_concurrence(conc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&conc) {
        return Err(Error::OutOfDomain {
            name: "concurrence",
            value: conc,
            domain: "[0, 1]",
        });
    }
    let x = 0.5 + 0.5 * (1.0 - conc * conc).max(0.0).sqrt();
    binary_entropy(x.min(1.0))
}

/// Entanglement of formation of a Werner-form clone with fidelity `f`.
pub fn eof_from_fidelity(f: f64) -> Result<f64> {
    eof_from_concurrence((2.0 * f - 1.0).clamp(0.0, 1.0))
}

/// `f |e_i⟩⟨e_i| + (1-f)/3 Σ_{j≠i} |e_j⟩⟨e_j|` in computational coordinates.
pub fn werner_state(f: f64, index: usize) -> Result<ComplexMatrix> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OutOfDomain {
            name: "f",
            value: f,
            domain: "[0, 1]",
        });
    }
    if index > 3 {
        return Err(Error::InvalidArgument(format!(
            "magic basis index {index} out of range"
        )));
    }
    let mut diag = [(1.0 - f) / 3.0; 4];
    diag[index] = f;
    let d = Matrix4::from_fn(|i, j| if i == j { c(diag[i], 0.0) } else { ZERO });
    let m = magic_unitary();
    let rho = m * d * m.adjoint();
    let entries: Vec<C64> = (0..16).map(|k| rho[(k / 4, k % 4)]).collect();
    ComplexMatrix::from_row_slice(4, &entries)?.with_dims(&[2, 2])
}

/// Uniform real unit 4-vector; every such vector is maximally entangled.
pub fn random_me_state_with<R: Rng + ?Sized>(rng: &mut R) -> MagicCoefficients {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return MagicCoefficients {
                n: v.map(|x| c(x / norm, 0.0)),
            };
        }
    }
}

fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> [C64; 2] {
    loop {
        let v: [C64; 2] =
            std::array::from_fn(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if norm > 1e-12 {
            return v.map(|z| z / norm);
        }
    }
}

/// Tensor product of two Haar-random single-qubit states.
pub fn random_product_state_with<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitPure {
    let a = random_qubit(rng);
    let b = random_qubit(rng);
    TwoQubitPure::product(a, b).expect("product of unit vectors")
}

/// Haar-random two-qubit pure state (not necessarily entangled).
pub fn random_pure_state_with<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitPure {
    let v: [C64; 4] =
        std::array::from_fn(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    TwoQubitPure::normalized(v).expect("gaussian vector is nonzero")
}

pub fn random_me_state(seed: u64) -> MagicCoefficients {
    random_me_state_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_product_state(seed: u64) -> TwoQubitPure {
    random_product_state_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: f64 = FRAC_1_SQRT_2;

    #[test]
    fn magic_basis_vectors() {
        let b = magic_basis();
        assert_eq!(b[0].amps, [c(S, 0.0), ZERO, ZERO, c(S, 0.0)]);
        assert_eq!(b[1].amps, [c(0.0, S), ZERO, ZERO, c(0.0, -S)]);
        for i in 0..4 {
            for j in 0..4 {
                let g = b[i].inner(&b[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn to_magic_examples() {
        let n = to_magic(&TwoQubitPure::basis(0)).unwrap();
        let expect = [c(S, 0.0), c(0.0, -S), ZERO, ZERO];
        for (a, b) in n.coeffs().iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        let n3 = to_magic(&magic_basis()[3]).unwrap();
        assert!((n3.coeffs()[3] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(n3.coeffs()[..3].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn magic_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let s = random_pure_state_with(&mut rng);
            let n = to_magic(&s).unwrap();
            assert!((norm_sq(n.coeffs()) - 1.0).abs() < 1e-12);
            let back = from_magic(&n).unwrap();
            for (a, b) in back.amps.iter().zip(s.amps.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let err = TwoQubitPure::new([c(1.0, 0.0), c(1.0, 0.0), ZERO, ZERO]).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
        assert!(MagicCoefficients::from_real([0.5, 0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn pure_concurrence_examples() {
        let real = MagicCoefficients::from_real([0.5, -0.5, 0.5, 0.5]).unwrap();
        assert!((concurrence_pure(&real) - 1.0).abs() < 1e-15);

        let prod = to_magic(&TwoQubitPure::basis(0)).unwrap();
        assert!(concurrence_pure(&prod).abs() < 1e-15);

        let s = TwoQubitPure::new([c(0.8, 0.0), ZERO, ZERO, c(0.6, 0.0)]).unwrap();
        let cp = concurrence_pure(&to_magic(&s).unwrap());
        assert!((cp - 0.96).abs() < 1e-12);
        let cm = concurrence_mixed(&s.density()).unwrap();
        assert!((cm - 0.96).abs() < 1e-8);
    }

    #[test]
    fn mixed_concurrence_examples() {
        let w = werner_state(7.0 / 12.0, 0).unwrap();
        assert!((concurrence_mixed(&w).unwrap() - 1.0 / 6.0).abs() < 1e-10);

        let mixed = ComplexMatrix::identity(&[2, 2]).scale(c(0.25, 0.0));
        assert!(concurrence_mixed(&mixed).unwrap().abs() < 1e-12);

        let bell = magic_basis()[0].density();
        assert!((concurrence_mixed(&bell).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mixed_concurrence_rejects_non_states() {
        let not_unit = ComplexMatrix::identity(&[2, 2]);
        assert!(matches!(
            concurrence_mixed(&not_unit),
            Err(Error::NotDensityMatrix(_))
        ));
        let negative = ComplexMatrix::from_diagonal(&[1.2, -0.2, 0.0, 0.0]);
        assert!(concurrence_mixed(&negative).is_err());
        let small = ComplexMatrix::identity(&[2]).scale(c(0.5, 0.0));
        assert!(concurrence_mixed(&small).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // x = 1/2 + √(1 - C²)/2 at C = 2F_opt - 1
        let h = binary_entropy(0.950394).unwrap();
        assert!((h - 0.2847).abs() < 5e-4, "{h}");
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn eof_examples() {
        assert!((eof_from_concurrence(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(eof_from_concurrence(0.0).unwrap(), 0.0);
        let f_opt = (5.0 + 13f64.sqrt()) / 12.0;
        let e = eof_from_concurrence(2.0 * f_opt - 1.0).unwrap();
        assert!((e - 0.2847).abs() < 5e-4, "{e}");
        let local = eof_from_concurrence(1.0 / 6.0).unwrap();
        assert!((local - 0.060).abs() < 1e-3, "{local}");
        assert!(eof_from_concurrence(1.01).is_err());
    }

    #[test]
    fn eof_is_monotone() {
        let values: Vec<f64> = (0..1000)
            .map(|k| eof_from_concurrence(k as f64 / 999.0).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn werner_examples() {
        let b = magic_basis();
        for (i, e) in b.iter().enumerate() {
            let w = werner_state(1.0, i).unwrap();
            assert!(w.max_abs_diff(&e.density()) < 1e-15);
        }
        let mixed = werner_state(0.25, 2).unwrap();
        assert!(mixed.max_abs_diff(&ComplexMatrix::identity(&[4]).scale(c(0.25, 0.0))) < 1e-15);
        let ev = werner_state(0.7, 1).unwrap().eigenvalues().unwrap();
        let expect = [0.7, 0.1, 0.1, 0.1];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(werner_state(1.2, 0).is_err());
        assert!(werner_state(0.5, 4).is_err());
    }

    #[test]
    fn random_samples() {
        for seed in 0..50 {
            let me = random_me_state(seed);
            assert!((concurrence_pure(&me) - 1.0).abs() < 1e-10);
            let p = random_product_state(seed);
            assert!(concurrence_pure(&to_magic(&p).unwrap()) < 1e-10);
        }
        assert_eq!(random_me_state(17), random_me_state(17));
        assert_eq!(random_product_state(17), random_product_state(17));
        assert_ne!(random_me_state(17), random_me_state(18));
    }

    #[test]
    fn schmidt_state_domain() {
        assert!(TwoQubitPure::schmidt(1.1).is_err());
        let s = TwoQubitPure::schmidt(0.6).unwrap();
        assert!((s.amps[3].re - 0.8).abs() < 1e-15);
    }
}
