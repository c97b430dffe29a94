//! Searches over the covariant family and over general cloning isometries,
//! plus the one-dimensional sweeps and root finds behind the tradeoff and
//! input-entanglement curves.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::cloner::{
    apply_cloner, clone_states_magic, optimal_symmetric_coeffs, tradeoff_fa, ClonerCoefficients,
};
use crate::error::{Error, Result};
use crate::par;
use crate::states::{
    concurrence_margin_magic, eof_from_concurrence, eof_from_fidelity, to_magic, TwoQubitPure,
};

mod isometry;

pub use isometry::{design_inputs, isometry_from_parameters, optimize_isometry, IsometryObjective};

/// Step for finite-difference gradients.
pub const FD_STEP: f64 = 1e-6;
/// Relative improvement below which an ascent counts as stalled.
pub const REL_IMPROVEMENT_TOL: f64 = 1e-10;
/// Consecutive stalled iterations that end an ascent.
pub const STALL_WINDOW: usize = 5;

/// One point of the fidelity tradeoff frontier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeoffPoint {
    pub f_b: f64,
    pub f_a: f64,
    pub e_a: f64,
    pub e_b: f64,
    /// The `B` coefficient at which `f_a` is attained.
    pub b_coeff: f64,
}

impl TradeoffPoint {
    pub fn e_sum(&self) -> f64 {
        self.e_a + self.e_b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub objective_value: f64,
    pub parameters: Vec<f64>,
    pub restarts_used: usize,
    pub converged: bool,
    /// Largest per-iteration objective gain over the final stall window;
    /// stands in for a gradient norm.
    pub gradient_surrogate: f64,
    /// Named side quantities (clone fidelities, constraint residuals, ...).
    pub diagnostics: Vec<(&'static str, f64)>,
}

impl SearchResult {
    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
    }
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x1, f1), (x2, f2), (x, fx)]
        .into_iter()
        .fold(
            (x, fx),
            |best, cand| if cand.1 > best.1 { cand } else { best },
        )
}

/// Grid scan followed by golden-section refinement around the best cell.
fn scan_then_refine(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    cells: usize,
    tol: f64,
) -> (f64, f64) {
    let h = (hi - lo) / cells as f64;
    let (best_i, _) = (0..=cells)
        .map(|i| (i, f(lo + h * i as f64)))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let a = (lo + h * (best_i as f64 - 1.0)).max(lo);
    let b = (lo + h * (best_i as f64 + 1.0)).min(hi);
    golden_max(f, a, b, tol)
}

pub(crate) struct Ascent {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub surrogate: f64,
}

/// Finite-difference gradient ascent with backtracking on an unconstrained
/// low-dimensional objective.
pub(crate) fn fd_ascent(f: impl Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> Ascent {
    let mut x = x0.to_vec();
    let mut val = f(&x);
    let mut step = 0.1;
    let mut gains: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let grad: Vec<f64> = (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += FD_STEP;
                xm[k] -= FD_STEP;
                (f(&xp) - f(&xm)) / (2.0 * FD_STEP)
            })
            .collect();
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        while step > 1e-14 {
            let xn: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + step * gi).collect();
            let vn = f(&xn);
            if vn >= val + 1e-4 * step * g2 {
                accepted = Some((xn, vn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, vn)) = accepted else {
            converged = true;
            break;
        };
        gains.push(vn - val);
        x = xn;
        val = vn;
        step *= 2.0;
        if gains.len() >= STALL_WINDOW
            && gains[gains.len() - STALL_WINDOW..]
                .iter()
                .all(|g| *g < REL_IMPROVEMENT_TOL * val.abs().max(1e-300))
        {
            converged = true;
            break;
        }
    }
    let surrogate = gains
        .iter()
        .rev()
        .take(STALL_WINDOW)
        .copied()
        .fold(0.0, f64::max);
    Ascent {
        x,
        value: val,
        converged,
        surrogate,
    }
}

/// Best symmetric covariant cloner (`A = B`, real coefficients).
///
/// The normalization curve `10A² + 4AC + 4C² = 1` is an ellipse; it is walked
/// by angle through the eigenbasis of its quadratic form, and the symmetric
/// fidelity `7A² + 4AC + C²` is maximized along it.
pub fn optimize_symmetric() -> ClonerCoefficients {
    let q = Matrix2::<f64>::new(10.0, 2.0, 2.0, 4.0);
    let w = Matrix2::<f64>::new(7.0, 2.0, 2.0, 1.0);
    let eig = q.symmetric_eigen();
    let axes = [
        eig.eigenvectors.column(0) / eig.eigenvalues[0].sqrt(),
        eig.eigenvectors.column(1) / eig.eigenvalues[1].sqrt(),
    ];
    let point = |t: f64| -> Vector2<f64> { axes[0] * t.cos() + axes[1] * t.sin() };
    let fid = |t: f64| {
        let x = point(t);
        x.dot(&(w * x))
    };
    // x and -x give the same cloner, so half a turn covers the curve
    let (t, _) = scan_then_refine(fid, 0.0, PI, 720, 1e-12);
    let mut x = point(t);
    if x[0] < 0.0 {
        x = -x;
    }
    ClonerCoefficients::real(x[0], x[0], x[1])
}

fn check_weight(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfDomain {
            name: "p",
            value: p,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// Maximizes `p F_a + (1-p) F_b` over real `(A, B, C)` on the normalization
/// ellipsoid, parametrized by two angles in the eigenbasis of its quadratic
/// form; multi-start local ascent over a fixed grid of starting angles.
pub fn optimize_weighted(p: f64) -> Result<SearchResult> {
    check_weight(p)?;
    let (q, fa, fb) = fidelity_forms();
    let w = fa * p + fb * (1.0 - p);
    let eig = q.symmetric_eigen();
    let scaled = Matrix3::from_fn(|i, j| eig.eigenvectors[(i, j)] / eig.eigenvalues[j].sqrt());
    let point = |ang: &[f64]| -> Vector3<f64> {
        let (th, ph) = (ang[0], ang[1]);
        scaled * Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos())
    };
    let objective = |ang: &[f64]| {
        let x = point(ang);
        x.dot(&(w * x))
    };
    let starts: Vec<[f64; 2]> = (0..4)
        .flat_map(|i| (0..8).map(move |j| [PI / 8.0 + i as f64 * PI / 4.0, j as f64 * PI / 4.0]))
        .collect();
    let runs = par::map_slice(&starts, |s| fd_ascent(objective, s, 20_000));
    let best = runs
        .iter()
        .fold(None::<&Ascent>, |b, r| match b {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .expect("at least one start");
    let mut x = point(&best.x);
    if x.sum() < 0.0 {
        x = -x;
    }
    let f_a = x.dot(&(fa * x));
    let f_b = x.dot(&(fb * x));
    Ok(SearchResult {
        objective_value: best.value,
        parameters: vec![x[0], x[1], x[2]],
        restarts_used: starts.len(),
        converged: best.converged,
        gradient_surrogate: best.surrogate,
        diagnostics: vec![
            ("f_a", f_a),
            ("f_b", f_b),
            ("normalization", x.dot(&(q * x))),
        ],
    })
}

fn fidelity_forms() -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    (
        Matrix3::<f64>::new(4.0, 1.0, 1.0, 1.0, 4.0, 1.0, 1.0, 1.0, 4.0),
        Matrix3::<f64>::new(4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
        Matrix3::<f64>::new(1.0, 1.0, 1.0, 1.0, 4.0, 1.0, 1.0, 1.0, 1.0),
    )
}

/// Exact maximum of `p F_a + (1-p) F_b` over real triples: the top
/// eigenvalue of `Q^{-1/2} W Q^{-1/2}` for normalization form `Q` and
/// objective form `W`. Serves as the reference for [`optimize_weighted`].
pub fn weighted_optimum_exact(p: f64) -> Result<f64> {
    check_weight(p)?;
    let (q, fa, fb) = fidelity_forms();
    let eq = q.symmetric_eigen();
    let q_inv_half = eq.eigenvectors
        * Matrix3::from_diagonal(&eq.eigenvalues.map(|l: f64| 1.0 / l.sqrt()))
        * eq.eigenvectors.transpose();
    let w = fa * p + fb * (1.0 - p);
    Ok((q_inv_half * w * q_inv_half)
        .symmetric_eigen()
        .eigenvalues
        .max())
}

/// `max_B F_a(B, F_b)` with the maximizing `B`.
pub fn max_fa_at(f_b: f64) -> Result<(f64, f64)> {
    if !(0.25..=1.0).contains(&f_b) {
        return Err(Error::OutOfDomain {
            name: "f_b",
            value: f_b,
            domain: "[1/4, 1]",
        });
    }
    let edge = (f_b / 3.0).sqrt();
    let f = |b: f64| tradeoff_fa(b, f_b).unwrap_or(f64::NEG_INFINITY);
    let best = if f_b >= 2.0 / 3.0 {
        // Here the inner radicand 18(B² + B√(F_b-3B²) - T), T = (15F_b-6)/18,
        // is negative for B < 0, and for B > 0 it is non-negative exactly when
        // -4B⁴ + (F_b+2T)B² - T² ≥ 0. The roots in B² have discriminant
        // (2(1-F_b)/3)(6F_b-2), so the feasible interval is known in closed
        // form even where it shrinks to the point B = 1/2 at F_b = 1 and the
        // radicand itself cancels to rounding noise.
        let disc = (2.0 * (1.0 - f_b) / 3.0) * (6.0 * f_b - 2.0);
        let mid = (24.0 * f_b - 6.0) / 9.0;
        let root = disc.max(0.0).sqrt();
        let lo = ((mid - root) / 8.0).max(0.0).sqrt().min(edge);
        let hi = ((mid + root) / 8.0).max(0.0).sqrt().min(edge);
        if hi - lo < 1e-12 {
            let b = 0.5 * (lo + hi);
            (b, f(b))
        } else {
            scan_then_refine(f, lo, hi, 200, 1e-12)
        }
    } else {
        scan_then_refine(f, -edge, edge, 400, 1e-11)
    };
    if !best.1.is_finite() {
        return Err(Error::Infeasible(format!("no feasible B at F_b = {f_b}")));
    }
    Ok((best.1, best.0))
}

fn tradeoff_point(f_b: f64) -> Result<TradeoffPoint> {
    let (f_a, b_coeff) = max_fa_at(f_b)?;
    Ok(TradeoffPoint {
        f_b,
        f_a,
        e_a: eof_from_fidelity(f_a.min(1.0))?,
        e_b: eof_from_fidelity(f_b)?,
        b_coeff,
    })
}

fn check_points(points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 grid points, got {points}"
        )));
    }
    Ok(())
}

/// Evenly spaced `F_b` in `[1/4, 1]`, each with the best attainable `F_a`.
pub fn sweep_fig1(points: usize) -> Result<Vec<TradeoffPoint>> {
    check_points(points)?;
    let step = 0.75 / (points - 1) as f64;
    par::map_indexed(points, |i| {
        let f_b = if i + 1 == points {
            1.0
        } else {
            0.25 + step * i as f64
        };
        tradeoff_point(f_b)
    })
    .into_iter()
    .collect()
}

/// Clone `b` fidelity beyond which clone `a` can no longer be entangled,
/// i.e. the root of `max_B F_a = 1/2`.
pub fn find_fb_where_ea_vanishes() -> Result<f64> {
    let g = |f_b: f64| max_fa_at(f_b).map(|(fa, _)| fa - 0.5);
    let (mut lo, mut hi) = (0.717, 1.0);
    if g(lo)? <= 0.0 || g(hi)? >= 0.0 {
        return Err(Error::Infeasible("no sign change on [0.717, 1]".into()));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn clone_margin_for_alpha(alpha: f64) -> Result<f64> {
    let n = to_magic(&TwoQubitPure::schmidt(alpha)?)?;
    let psi = apply_cloner(&n, &optimal_symmetric_coeffs())?;
    let (rho_a, _) = clone_states_magic(&psi);
    Ok(concurrence_margin_magic(&rho_a))
}

fn input_eof(alpha: f64) -> Result<f64> {
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    eof_from_concurrence((2.0 * alpha * beta).clamp(0.0, 1.0))
}

/// `(E_in, E_out)` for inputs `α|00⟩ + √(1-α²)|11⟩` cloned by the optimal
/// symmetric cloner, ordered from product (`α = 1`) to maximally entangled
/// (`α = 1/√2`).
pub fn sweep_fig2(points: usize) -> Result<Vec<(f64, f64)>> {
    check_points(points)?;
    let span = 1.0 - FRAC_1_SQRT_2;
    par::map_indexed(points, |i| {
        let alpha = if i + 1 == points {
            FRAC_1_SQRT_2
        } else {
            1.0 - span * i as f64 / (points - 1) as f64
        };
        let conc = clone_margin_for_alpha(alpha)?.clamp(0.0, 1.0);
        Ok((input_eof(alpha)?, eof_from_concurrence(conc)?))
    })
    .into_iter()
    .collect()
}

/// Input entanglement (ebits) below which the optimal cloner's clones are
/// separable.
pub fn find_critical_input_entanglement() -> Result<f64> {
    let (mut lo, mut hi) = (FRAC_1_SQRT_2, 1.0);
    // margin > 0 at lo (entangled clones), < 0 at hi
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if clone_margin_for_alpha(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    input_eof(0.5 * (lo + hi))
}

/// Clone concurrence of the optimal symmetric cloner for the Schmidt input
/// whose entanglement of formation is `e_in`.
pub fn clone_concurrence_at_input_eof(e_in: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e_in) {
        return Err(Error::OutOfDomain {
            name: "e_in",
            value: e_in,
            domain: "[0, 1]",
        });
    }
    // E_in decreases in α on [1/√2, 1]
    let (mut lo, mut hi) = (FRAC_1_SQRT_2, 1.0);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if input_eof(mid)? > e_in {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(clone_margin_for_alpha(0.5 * (lo + hi))?.clamp(0.0, 1.0))
}
