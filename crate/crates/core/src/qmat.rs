//! Dense complex matrices over labelled tensor-product factorizations.
//!
//! Every matrix carries the list of subsystem dimensions it acts on. The
//! first factor is the slowest-varying index, so `|ab⟩` sits at row
//! `a * d_b + b`.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used when deciding whether an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-SQRT_CLAMP_TOL, 0)` are rounding noise for `sqrt_psd`.
pub const SQRT_CLAMP_TOL: f64 = 1e-9;

const MAX_SIDE: usize = 256;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<C64>,
    dims: Vec<usize>,
}

/// Eigenvalues in non-increasing order with matching orthonormal columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl EigenDecomposition {
    /// Rebuilds `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, dims: &[usize], f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        ComplexMatrix {
            data: scaled * v.adjoint(),
            dims: dims.to_vec(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

impl ComplexMatrix {
    pub fn new(data: DMatrix<C64>, dims: Vec<usize>) -> Result<Self> {
        let side: usize = dims.iter().product();
        if data.nrows() != data.ncols() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, expected square",
                data.nrows(),
                data.ncols()
            )));
        }
        if side != data.nrows() || dims.contains(&0) {
            return Err(Error::Dimension(format!(
                "dims {:?} do not factor side length {}",
                dims,
                data.nrows()
            )));
        }
        if side > MAX_SIDE {
            return Err(Error::Dimension(format!("side {side} exceeds {MAX_SIDE}")));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { data, dims })
    }

    /// Single-factor matrix from a row-major slice.
    pub fn from_row_slice(side: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != side * side {
            return Err(Error::Dimension(format!(
                "{} entries for a {side}x{side} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(side, side, entries), vec![side])
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let side = rows.len();
        let entries: Vec<C64> = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| c(x, 0.0)))
            .collect();
        Self::from_row_slice(side, &entries)
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self {
            data: DMatrix::zeros(side, side),
            dims: dims.to_vec(),
        }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let side = dims.iter().product();
        Self {
            data: DMatrix::identity(side, side),
            dims: dims.to_vec(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            data[(i, i)] = c(d, 0.0);
        }
        Self {
            data,
            dims: vec![n],
        }
    }

    /// `|v⟩⟨v|` on the given factorization.
    pub fn projector(v: &[C64], dims: &[usize]) -> Result<Self> {
        let n = v.len();
        let data = DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
        Self::new(data, dims.to_vec())
    }

    pub fn side(&self) -> usize {
        self.data.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn with_dims(mut self, dims: &[usize]) -> Result<Self> {
        if dims.iter().product::<usize>() != self.side() {
            return Err(Error::Dimension(format!(
                "dims {:?} do not factor side length {}",
                dims,
                self.side()
            )));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            dims: self.dims.clone(),
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            data: self.data.map(|z| z.conj()),
            dims: self.dims.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
            dims: self.dims.clone(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            data: &self.data * s,
            dims: self.dims.clone(),
        }
    }

    /// `U M U†`, keeping the factor labels.
    pub fn conjugate_by(&self, u: &DMatrix<C64>) -> Self {
        Self {
            data: u * &self.data * u.adjoint(),
            dims: self.dims.clone(),
        }
    }

    /// Max-norm distance `max |m_ij - n_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_gap(&self) -> f64 {
        let n = self.side();
        let mut gap = 0.0f64;
        for i in 0..n {
            for j in i..n {
                gap = gap.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        gap
    }

    /// Tensor product; dims are concatenated.
    pub fn kron(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self {
            data: self.data.kronecker(&other.data),
            dims,
        }
    }

    fn check_subsystems(&self, subsystems: &[usize]) -> Result<()> {
        for &s in subsystems {
            if s >= self.dims.len() {
                return Err(Error::SubsystemOutOfRange {
                    index: s,
                    count: self.dims.len(),
                });
            }
        }
        Ok(())
    }

    /// Traces out every factor not listed in `keep`. Kept factors retain their
    /// original relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        self.check_subsystems(keep)?;
        let nf = self.dims.len();
        let mut kept = vec![false; nf];
        for &k in keep {
            kept[k] = true;
        }
        let keep_idx: Vec<usize> = (0..nf).filter(|&i| kept[i]).collect();
        let trace_idx: Vec<usize> = (0..nf).filter(|&i| !kept[i]).collect();
        let strides = strides(&self.dims);
        let out_dims: Vec<usize> = keep_idx.iter().map(|&i| self.dims[i]).collect();
        let out_side: usize = out_dims.iter().product();
        let traced_side: usize = trace_idx.iter().map(|&i| self.dims[i]).product();

        let offset = |outer: usize, factors: &[usize]| -> usize {
            let mut rem = outer;
            let mut off = 0;
            for &f in factors.iter().rev() {
                let d = self.dims[f];
                off += (rem % d) * strides[f];
                rem /= d;
            }
            off
        };
        let kept_offsets: Vec<usize> = (0..out_side).map(|k| offset(k, &keep_idx)).collect();
        let traced_offsets: Vec<usize> = (0..traced_side).map(|t| offset(t, &trace_idx)).collect();

        let mut out = DMatrix::zeros(out_side, out_side);
        for (r, &ro) in kept_offsets.iter().enumerate() {
            for (cc, &co) in kept_offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &t in &traced_offsets {
                    acc += self.data[(ro + t, co + t)];
                }
                out[(r, cc)] = acc;
            }
        }
        let out_dims = if out_dims.is_empty() {
            vec![1]
        } else {
            out_dims
        };
        Ok(Self {
            data: out,
            dims: out_dims,
        })
    }

    /// Transposes the listed factors, leaving the others untouched.
    pub fn partial_transpose(&self, subsystems: &[usize]) -> Result<Self> {
        self.check_subsystems(subsystems)?;
        let nf = self.dims.len();
        let mut flip = vec![false; nf];
        for &s in subsystems {
            flip[s] = true;
        }
        let n = self.side();
        let mut out = DMatrix::zeros(n, n);
        let mut ri = vec![0usize; nf];
        let mut ci = vec![0usize; nf];
        for r in 0..n {
            unflatten(r, &self.dims, &mut ri);
            for col in 0..n {
                unflatten(col, &self.dims, &mut ci);
                let (mut nr, mut nc) = (0usize, 0usize);
                for f in 0..nf {
                    let (a, b) = if flip[f] {
                        (ci[f], ri[f])
                    } else {
                        (ri[f], ci[f])
                    };
                    nr = nr * self.dims[f] + a;
                    nc = nc * self.dims[f] + b;
                }
                out[(nr, nc)] = self.data[(r, col)];
            }
        }
        Ok(Self {
            data: out,
            dims: self.dims.clone(),
        })
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let gap = self.hermiticity_gap();
        if gap < HERMITIAN_TOL {
            Ok(())
        } else {
            Err(Error::NotHermitian { gap })
        }
    }

    pub fn hermitian_eig(&self) -> Result<EigenDecomposition> {
        self.ensure_hermitian()?;
        // symmetrize so rounding in the lower triangle cannot leak in
        let h = (&self.data + self.data.adjoint()) * c(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, k| {
            eig.eigenvectors[(r, order[k])]
        });
        Ok(EigenDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.hermitian_eig()?.eigenvalues)
    }

    pub fn sqrt_psd(&self) -> Result<Self> {
        let eig = self.hermitian_eig()?;
        let min = eig.min_eigenvalue();
        if min < -SQRT_CLAMP_TOL {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(eig.reconstruct_with(&self.dims, |l| l.max(0.0).sqrt()))
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.hermitian_eig()?.min_eigenvalue() >= -tol)
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn unflatten(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for f in (0..dims.len()).rev() {
        out[f] = idx % dims[f];
        idx /= dims[f];
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data * &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data + &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data - &rhs.data,
            dims: self.dims.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&[1.0, -1.0])
    }

    fn phi_plus() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        ComplexMatrix::projector(&v, &[2, 2]).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let entries: Vec<C64> = (0..n * n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::from_row_slice(n, &entries).unwrap()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, dims: &[usize]) -> ComplexMatrix {
        let n = dims.iter().product();
        let m = random_matrix(rng, n);
        (&m + &m.adjoint()).with_dims(dims).unwrap()
    }

    #[test]
    fn kron_examples() {
        let i2 = ComplexMatrix::identity(&[2]);
        let i4 = i2.kron(&i2);
        assert_eq!(i4.dims(), &[2, 2]);
        assert_eq!(i4.max_abs_diff(&ComplexMatrix::identity(&[4])), 0.0);

        let zz = sigma_z().kron(&sigma_z());
        assert_eq!(
            zz.max_abs_diff(&ComplexMatrix::from_diagonal(&[1.0, -1.0, -1.0, 1.0])),
            0.0
        );

        let m = ComplexMatrix::from_diagonal(&[2.0, 3.0]).kron(&i2);
        assert_eq!(m.trace(), c(10.0, 0.0));
    }

    #[test]
    fn partial_trace_examples() {
        let marginal = phi_plus().partial_trace(&[0]).unwrap();
        assert!(marginal.max_abs_diff(&ComplexMatrix::identity(&[2]).scale(c(0.5, 0.0))) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 2);
        let b = random_matrix(&mut rng, 3);
        let ab = a.kron(&b);
        let got = ab.partial_trace(&[0]).unwrap();
        assert!(got.max_abs_diff(&a.scale(b.trace())) < 1e-12);
        let got_b = ab.partial_trace(&[1]).unwrap();
        assert!(got_b.max_abs_diff(&b.scale(a.trace())) < 1e-12);

        let all = ab.partial_trace(&[0, 1]).unwrap();
        assert_eq!(all.max_abs_diff(&ab), 0.0);
    }

    #[test]
    fn partial_trace_rejects_bad_index() {
        let err = phi_plus().partial_trace(&[2]).unwrap_err();
        assert_eq!(err, Error::SubsystemOutOfRange { index: 2, count: 2 });
    }

    #[test]
    fn partial_trace_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_hermitian(&mut rng, &[2, 3, 2, 2]);
        let direct = m.partial_trace(&[0, 3]).unwrap();
        // drop factor 1, then the factor formerly at index 2 (now 1)
        let staged = m
            .partial_trace(&[0, 2, 3])
            .unwrap()
            .partial_trace(&[0, 2])
            .unwrap();
        assert!(direct.max_abs_diff(&staged) < 1e-12);
        assert!((direct.trace() - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_transpose_of_bell_projector() {
        let pt = phi_plus().partial_transpose(&[1]).unwrap();
        let ev = pt.eigenvalues().unwrap();
        let expect = [0.5, 0.5, 0.5, -0.5];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn partial_transpose_factorized_and_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 2);
        let b = random_matrix(&mut rng, 3);
        let pt = a.kron(&b).partial_transpose(&[1]).unwrap();
        assert_eq!(pt.max_abs_diff(&a.kron(&b.transpose())), 0.0);

        let m = random_hermitian(&mut rng, &[2, 2, 2]);
        let twice = m
            .partial_transpose(&[0, 2])
            .unwrap()
            .partial_transpose(&[0, 2])
            .unwrap();
        assert_eq!(twice, m);
    }

    #[test]
    fn partial_transpose_preserves_trace_and_hermiticity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random_hermitian(&mut rng, &[2, 2, 2, 2]);
            let pt = m.partial_transpose(&[0, 2]).unwrap();
            assert!((pt.trace() - m.trace()).norm() < 1e-12);
            assert!(pt.hermiticity_gap() < 1e-14);
        }
    }

    #[test]
    fn eig_examples() {
        let d = ComplexMatrix::from_diagonal(&[1.0, 3.0, 2.0]);
        assert_eq!(d.eigenvalues().unwrap(), vec![3.0, 2.0, 1.0]);

        let q = ComplexMatrix::identity(&[4]).scale(c(0.25, 0.0));
        for ev in q.eigenvalues().unwrap() {
            assert!((ev - 0.25).abs() < 1e-15);
        }

        let ev = phi_plus().eigenvalues().unwrap();
        let expect = [1.0, 0.0, 0.0, 0.0];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(m.hermitian_eig(), Err(Error::NotHermitian { .. })));
        assert!(matches!(m.is_psd(1e-9), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [2usize, 4, 16, 64] {
            let m = random_hermitian(&mut rng, &[n]);
            let eig = m.hermitian_eig().unwrap();
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let back = eig.reconstruct_with(&[n], |l| l);
            assert!(back.max_abs_diff(&m) < 1e-10, "n = {n}");
            let gram = eig.eigenvectors.adjoint() * &eig.eigenvectors;
            let id = DMatrix::<C64>::identity(n, n);
            assert!((gram - id).iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn sqrt_examples() {
        let r = ComplexMatrix::from_diagonal(&[4.0, 1.0])
            .sqrt_psd()
            .unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::from_diagonal(&[2.0, 1.0])) < 1e-14);

        let id = ComplexMatrix::identity(&[3]);
        assert!(id.sqrt_psd().unwrap().max_abs_diff(&id) < 1e-14);

        let p = phi_plus();
        assert!(p.sqrt_psd().unwrap().max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn sqrt_clamps_noise_but_rejects_negative() {
        let tiny = ComplexMatrix::from_diagonal(&[1.0, -5e-10]);
        let r = tiny.sqrt_psd().unwrap();
        assert_eq!(r.get(1, 1), c(0.0, 0.0));

        let neg = ComplexMatrix::from_diagonal(&[1.0, -1e-6]);
        assert!(matches!(neg.sqrt_psd(), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn sqrt_of_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let g = random_matrix(&mut rng, 4);
            let m = &g * &g.adjoint();
            let r = m.sqrt_psd().unwrap();
            assert!((&r * &r).max_abs_diff(&m) < 1e-8);
            assert!(r.hermiticity_gap() < 1e-10);
            assert!(r.is_psd(1e-10).unwrap());
        }
    }

    #[test]
    fn psd_examples() {
        assert!(ComplexMatrix::identity(&[4]).is_psd(1e-9).unwrap());
        assert!(!ComplexMatrix::from_diagonal(&[1.0, -0.1])
            .is_psd(1e-9)
            .unwrap());
        assert!(ComplexMatrix::from_diagonal(&[1.0, -1e-12])
            .is_psd(1e-9)
            .unwrap());
    }

    #[test]
    fn constructor_validates() {
        let data = DMatrix::<C64>::identity(4, 4);
        assert!(ComplexMatrix::new(data.clone(), vec![2, 3]).is_err());
        let mut bad = data;
        bad[(0, 0)] = c(f64::NAN, 0.0);
        assert_eq!(ComplexMatrix::new(bad, vec![4]), Err(Error::NonFinite));
    }
}
