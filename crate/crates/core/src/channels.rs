//! Choi-operator view of a cloner and the checks built on it: trace
//! preservation, complete positivity, PPT of the single-clone maps and
//! SO(4) covariance of the tensor.
//!
//! The Choi state is `|S⟩ = ½ Σ_l |e_l*⟩_R ⊗ V|e_l⟩`, converted to
//! computational qubits on every factor, with the ancilla traced out. Its
//! qubit order is `(R1, R2, a1, a2, b1, b2)`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cloner::{bell_reprepare_max_concurrence, ClonePair, ClonerCoefficients, ClonerTensor};
use crate::error::{Error, Result};
use crate::par;
use crate::qmat::{c, ComplexMatrix, C64};
use crate::states::{
    concurrence_mixed, magic_unitary, random_product_state_with, to_magic, TwoQubitPure,
};

/// Positivity tolerance on Choi and partially transposed Choi spectra.
pub const PPT_TOL: f64 = 1e-9;
/// Tolerance on the trace-preservation identity.
pub const TP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloneLabel {
    A,
    B,
}

impl std::str::FromStr for CloneLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Self::A),
            "b" | "B" => Ok(Self::B),
            other => Err(Error::InvalidArgument(format!(
                "unknown clone label {other:?}"
            ))),
        }
    }
}

/// Which factors a Choi matrix spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoiLayout {
    /// Input ⊗ clone a ⊗ clone b.
    Joint,
    /// Input ⊗ a single clone; the label is unknown for imported matrices.
    Single(Option<CloneLabel>),
}

/// `Tr S = 1`, and trace preservation reads `Tr_out S = I/4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoiNormalization {
    UnitTrace,
}

#[derive(Clone, Debug)]
pub struct ChoiOperator {
    pub matrix: ComplexMatrix,
    pub layout: ChoiLayout,
    pub normalization: ChoiNormalization,
}

impl ChoiOperator {
    fn output_factors(&self) -> Vec<usize> {
        match self.layout {
            ChoiLayout::Joint => vec![2, 3, 4, 5],
            ChoiLayout::Single(_) => vec![2, 3],
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.matrix.hermitian_eig()?.min_eigenvalue())
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        self.matrix.is_psd(tol)
    }

    /// `max |Tr_out S - I/4|`.
    pub fn trace_preservation_gap(&self) -> Result<f64> {
        let _ = self.output_factors();
        let input = self.matrix.partial_trace(&[0, 1])?;
        let target = ComplexMatrix::identity(&[2, 2]).scale(c(0.25, 0.0));
        Ok(input.max_abs_diff(&target))
    }
}

fn choi_layout_dims(layout: ChoiLayout) -> Vec<usize> {
    match layout {
        ChoiLayout::Joint => vec![2; 6],
        ChoiLayout::Single(_) => vec![2; 4],
    }
}

fn contract_axis(src: &[C64], stride: usize, u: &Matrix4<C64>) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); 256];
    for (flat, o) in out.iter_mut().enumerate() {
        let digit = (flat / stride) % 4;
        let base = flat - digit * stride;
        *o = (0..4).map(|p| u[(digit, p)] * src[base + p * stride]).sum();
    }
    out
}

/// Factor `W` (64x4, rows `(R, a, b)` computational, columns ancilla) of the
/// joint Choi matrix, `S = W W†`, for an isometry `V` in tensor layout.
pub(crate) fn choi_factor(v: &DMatrix<C64>) -> DMatrix<C64> {
    let m = magic_unitary();
    let mc = m.map(|z| z.conj());
    // w[(x, y, z), k] = ½ Σ conj(M)[x,l] M[y,i] M[z,j] s_ijkl
    // as three single-index contractions over layout (l, i, j, k)
    let mut cur = vec![C64::new(0.0, 0.0); 256];
    for row in 0..64 {
        for l in 0..4 {
            cur[l * 64 + row] = v[(row, l)];
        }
    }
    cur = contract_axis(&cur, 64, &mc);
    cur = contract_axis(&cur, 16, &m);
    cur = contract_axis(&cur, 4, &m);
    DMatrix::from_fn(64, 4, |row, k| cur[row * 4 + k] * 0.5)
}

/// Adjoint of [`choi_factor`] as a linear map; pulls a gradient with
/// respect to `W` back to one with respect to `V`.
pub(crate) fn choi_factor_adjoint(g: &DMatrix<C64>) -> DMatrix<C64> {
    let m = magic_unitary();
    let mh = m.adjoint();
    let mt = m.transpose();
    let mut cur = vec![C64::new(0.0, 0.0); 256];
    for row in 0..64 {
        for k in 0..4 {
            cur[row * 4 + k] = g[(row, k)];
        }
    }
    cur = contract_axis(&cur, 64, &mt);
    cur = contract_axis(&cur, 16, &mh);
    cur = contract_axis(&cur, 4, &mh);
    DMatrix::from_fn(64, 4, |row, l| cur[l * 64 + row] * 0.5)
}

/// Choi state of an arbitrary tensor; no trace-preservation check.
pub fn choi_from_tensor(t: &ClonerTensor) -> ChoiOperator {
    let w = choi_factor(&t.to_isometry());
    let s = &w * w.adjoint();
    ChoiOperator {
        matrix: ComplexMatrix::new(s, vec![2; 6]).expect("64 = 2^6"),
        layout: ChoiLayout::Joint,
        normalization: ChoiNormalization::UnitTrace,
    }
}

pub fn choi_from_coeffs(co: &ClonerCoefficients) -> Result<ChoiOperator> {
    co.check_normalized()?;
    Ok(choi_from_tensor(&ClonerTensor::from_coeffs(co)))
}

/// Choi operator of the map from the input to one clone.
pub fn reduced_choi(s: &ChoiOperator, which: CloneLabel) -> Result<ChoiOperator> {
    if s.layout != ChoiLayout::Joint || s.matrix.side() != 64 {
        return Err(Error::Dimension(
            "reduced_choi expects a joint 64x64 cloning Choi operator".into(),
        ));
    }
    let keep: &[usize] = match which {
        CloneLabel::A => &[0, 1, 2, 3],
        CloneLabel::B => &[0, 1, 4, 5],
    };
    Ok(ChoiOperator {
        matrix: s.matrix.partial_trace(keep)?,
        layout: ChoiLayout::Single(Some(which)),
        normalization: s.normalization,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PptReport {
    pub is_ppt: bool,
    pub min_eigenvalue: f64,
    pub self_transpose_gap: f64,
}

/// Partially transposes the first qubit of the input and the first qubit of
/// the clone, then reports positivity and distance from the untransposed
/// operator.
pub fn ppt_check(s_reduced: &ChoiOperator, tol: f64) -> Result<PptReport> {
    if s_reduced.matrix.side() != 16 {
        return Err(Error::Dimension(format!(
            "ppt_check expects a 16x16 single-clone Choi operator, got {0}x{0}",
            s_reduced.matrix.side()
        )));
    }
    let m = s_reduced.matrix.clone().with_dims(&[2, 2, 2, 2])?;
    let pt = m.partial_transpose(&[0, 2])?;
    let min_eigenvalue = pt.hermitian_eig()?.min_eigenvalue();
    Ok(PptReport {
        is_ppt: min_eigenvalue >= -tol,
        min_eigenvalue,
        self_transpose_gap: pt.max_abs_diff(&m),
    })
}

/// Fidelities of both clones for `input`, read off the Choi operator as
/// `F = 4 Tr[S_x (P^T ⊗ P)]` with `P = |input⟩⟨input|`.
pub fn choi_fidelities(s: &ChoiOperator, input: &TwoQubitPure) -> Result<(f64, f64)> {
    let p = input.density();
    let probe = p.transpose().kron(&p);
    let overlap = |which| -> Result<f64> {
        let r = reduced_choi(s, which)?;
        Ok(4.0 * (r.matrix.data() * probe.data()).trace().re)
    };
    Ok((overlap(CloneLabel::A)?, overlap(CloneLabel::B)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SO4Rotation(Matrix4<f64>);

impl SO4Rotation {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn new(r: Matrix4<f64>) -> Result<Self> {
        let gap = (r * r.transpose() - Matrix4::identity()).abs().max();
        if gap > 1e-12 || (r.determinant() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "not a rotation (orthogonality gap {gap:e}, det {})",
                r.determinant()
            )));
        }
        Ok(Self(r))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }
}

/// Haar-random rotation: Gram-Schmidt on a Gaussian matrix, with one column
/// flipped if needed to land in SO(4).
pub fn random_so4_with<R: Rng + ?Sized>(rng: &mut R) -> SO4Rotation {
    let g = Matrix4::<f64>::from_fn(|_, _| rng.sample(StandardNormal));
    let mut q = Matrix4::<f64>::zeros();
    for j in 0..4 {
        let mut v = g.column(j).into_owned();
        for _ in 0..2 {
            for p in 0..j {
                let qp = q.column(p).into_owned();
                v -= qp * qp.dot(&v);
            }
        }
        let norm = v.norm();
        q.set_column(j, &(v / norm));
    }
    if q.determinant() < 0.0 {
        let flipped = -q.column(0).into_owned();
        q.set_column(0, &flipped);
    }
    SO4Rotation(q)
}

pub fn random_so4(seed: u64) -> SO4Rotation {
    random_so4_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Max-norm change of `t` under each `R^{⊗4}`.
pub fn covariance_deviation(t: &ClonerTensor, rotations: &[SO4Rotation]) -> f64 {
    par::map_slice(rotations, |r| t.rotated(&r.0).max_abs_diff(t))
        .into_iter()
        .fold(0.0, f64::max)
}

pub fn covariance_check(t: &ClonerTensor, trials: usize, seed: u64) -> f64 {
    let rotations: Vec<SO4Rotation> = (0..trials as u64)
        .map(|i| random_so4(par::derive_seed(seed, i)))
        .collect();
    covariance_deviation(t, &rotations)
}

/// Highest concurrence of either clone over seeded random product inputs.
pub fn separability_scan_tensor(t: &ClonerTensor, trials: usize, seed: u64) -> Result<f64> {
    let values = par::map_indexed(trials, |i| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, i as u64));
        let input = random_product_state_with(&mut rng);
        let n = to_magic(&input)?;
        let pair = ClonePair::from_joint(&n, &t.apply(&n));
        Ok(concurrence_mixed(&pair.rho_a)?.max(concurrence_mixed(&pair.rho_b)?))
    });
    values
        .into_iter()
        .try_fold(0.0f64, |acc, v| v.map(|x| acc.max(x)))
}

pub fn separability_scan(co: &ClonerCoefficients, trials: usize, seed: u64) -> Result<f64> {
    co.check_normalized()?;
    separability_scan_tensor(&ClonerTensor::from_coeffs(co), trials, seed)
}

/// Same scan for the measure-and-reprepare strategy, using the per-branch
/// clone concurrence.
pub fn separability_scan_reprepare(trials: usize, seed: u64) -> Result<f64> {
    let values = par::map_indexed(trials, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, i as u64));
        bell_reprepare_max_concurrence(&random_product_state_with(&mut rng))
    });
    values
        .into_iter()
        .try_fold(0.0f64, |acc, v| v.map(|x| acc.max(x)))
}

/// Writes `dims,<d1>,...` followed by one row per matrix row holding
/// `re,im` pairs.
pub fn write_choi_csv<W: Write>(s: &ChoiOperator, mut out: W) -> std::io::Result<()> {
    let dims: Vec<String> = s.matrix.dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "dims,{}", dims.join(","))?;
    let n = s.matrix.side();
    for i in 0..n {
        let mut fields = Vec::with_capacity(2 * n);
        for j in 0..n {
            let z = s.matrix.get(i, j);
            fields.push(format!("{:.17e}", z.re));
            fields.push(format!("{:.17e}", z.im));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_choi_csv<R: BufRead>(input: R) -> Result<ChoiOperator> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty Choi CSV".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let mut fields = header.trim().split(',');
    if fields.next() != Some("dims") {
        return Err(Error::Parse("header must start with `dims`".into()));
    }
    let dims: Vec<usize> = fields
        .map(|f| {
            f.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let layout = match dims.as_slice() {
        [2, 2, 2, 2, 2, 2] => ChoiLayout::Joint,
        [2, 2, 2, 2] => ChoiLayout::Single(None),
        other => {
            return Err(Error::Parse(format!(
                "unsupported Choi dims {other:?}; expected six or four qubits"
            )))
        }
    };
    let n: usize = dims.iter().product();
    let mut entries = Vec::with_capacity(n * n);
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(e.to_string()))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 2 * n {
            return Err(Error::Parse(format!(
                "row {row} has {} fields, expected {}",
                vals.len(),
                2 * n
            )));
        }
        entries.extend(vals.chunks(2).map(|p| c(p[0], p[1])));
    }
    if entries.len() != n * n {
        return Err(Error::Parse(format!(
            "expected {n} rows, got {}",
            entries.len() / n
        )));
    }
    let matrix = ComplexMatrix::new(
        DMatrix::from_row_slice(n, n, &entries),
        choi_layout_dims(layout),
    )?;
    Ok(ChoiOperator {
        matrix,
        layout,
        normalization: ChoiNormalization::UnitTrace,
    })
}
