//! The Hill discriminant, Bloch eigenvalue branches, and multiple points.
//!
//! The spectrum of the Hill operator on the line is organized by the
//! *discriminant*
//!
//! ```text
//!   F(lambda) = theta(1, lambda) + phi'(1, lambda),
//! ```
//!
//! the trace of the monodromy matrix. For each quasimomentum `t` the Bloch
//! eigenvalues are the roots of the characteristic equation
//!
//! ```text
//!   F(lambda) = 2 cos t,
//! ```
//!
//! and as `t` sweeps `(0, 2 pi)` the roots organize into branches
//! `lambda_k(t)` labelled so that `lambda_k(t) ~ (2 pi k + t)^2` for large
//! `|k|` (the free-operator bands, exact when `q = 0`). This module:
//!
//! * evaluates `F`, `F'` and the square-root combination
//!   `p(lambda) = sqrt(4 - F^2)` with branch continuation along paths,
//! * locates single band points by Newton iteration from the free seed,
//!   with an argument-principle fallback,
//! * traces whole branches over a quasimomentum grid with warm seeds and a
//!   continuity certificate,
//! * finds the *multiple points* — zeros of `F'` — in a rectangle by a
//!   complete winding-number search, annotating each with the discriminant
//!   value, the recovered quasimomentum `t0`, and algebraic multiplicity.
//!
//! Multiple points are where two Bloch branches collide; they are the raw
//! material for spectral-singularity classification downstream.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::monodromy::{
    fundamental_with_second_derivative, integrate_with_lambda_derivative, FundamentalPair,
};
use crate::potential::Potential;
use crate::rootfind::{find_zeros, newton_polish, Rect, ZeroSearchOptions};

/// Minimum distance from the exceptional quasimomenta `{0, pi}` (and `2 pi`)
/// required of simple-point requests.
pub const DELTA_GUARD: f64 = 1e-6;

/// Scale-aware threshold under which `|F'(lambda)|` flags a multiple point.
pub fn crit_tol(lambda: Complex64) -> f64 {
    1e-8 * (1.0 + lambda.norm())
}

/// Scale-aware acceptance residual for the characteristic equation.
pub fn band_residual_tol(lambda: Complex64) -> f64 {
    1e-8 * (1.0 + lambda.norm())
}

// ======================================================================
// DiscriminantValue
// ======================================================================

/// The discriminant and its companions at one spectral point.
#[derive(Debug, Clone, Copy)]
pub struct DiscriminantValue {
    /// Spectral parameter.
    pub lambda: Complex64,
    /// `F(lambda) = theta(1) + phi'(1)`.
    pub f: Complex64,
    /// `F'(lambda)` from the variational system.
    pub df: Complex64,
    /// `sqrt(4 - F^2)`, principal branch at a single point; see
    /// [`p_of_lambda`] for branch-consistent paths.
    pub p: Complex64,
}

impl DiscriminantValue {
    fn from_pair(pair: &FundamentalPair) -> Self {
        let f = pair.discriminant();
        let df = pair
            .discriminant_dlambda()
            .expect("pair carries lambda-derivatives");
        DiscriminantValue {
            lambda: pair.lambda,
            f,
            df,
            p: principal_p(f),
        }
    }

    /// `|p^2 + F^2 - 4|` relative to 4: the branch-consistency defect.
    pub fn branch_defect(&self) -> f64 {
        (self.p * self.p + self.f * self.f - Complex64::new(4.0, 0.0)).norm() / 4.0
    }
}

#[inline]
fn principal_p(f: Complex64) -> Complex64 {
    (Complex64::new(4.0, 0.0) - f * f).sqrt()
}

/// Evaluate `F`, `F'` and the principal `p` at a point.
///
/// # Errors
/// Propagates integration failures (overflow guard, step budget).
pub fn hill_discriminant(q: &Potential, lambda: Complex64, tol: f64) -> Result<DiscriminantValue> {
    let pair = integrate_with_lambda_derivative(q, lambda, tol)?;
    Ok(DiscriminantValue::from_pair(&pair))
}

// ======================================================================
// Branch-consistent square root along paths
// ======================================================================

/// Continue `p = sqrt(4 - F^2)` along an ordered path of discriminant
/// values: principal root at the first point, then the sign that keeps `p`
/// continuous.
///
/// The path must be fine enough that the sign choice is unambiguous
/// (consecutive `F` differing by less than 0.5 guarantees it; larger steps
/// are accepted as long as the two candidate signs are clearly separated).
///
/// # Errors
/// [`Error::BranchAmbiguity`] when consecutive values jump by 2 or more, or
/// when the two sign candidates are too close to call.
pub fn p_of_lambda(path: &[DiscriminantValue]) -> Result<Vec<Complex64>> {
    continue_sqrt_branch_from(path.iter().map(|d| d.f), None)
}

/// Branch continuation on raw discriminant values; `start` optionally pins
/// the branch at the first point (instead of the principal root), which
/// lets adjacent path segments share a branch.
pub fn continue_sqrt_branch_from<I>(fs: I, start: Option<Complex64>) -> Result<Vec<Complex64>>
where
    I: IntoIterator<Item = Complex64>,
{
    let mut out: Vec<Complex64> = Vec::new();
    let mut prev_f: Option<Complex64> = None;
    for (j, f) in fs.into_iter().enumerate() {
        let s = principal_p(f);
        let p = match (prev_f, out.last()) {
            (None, _) => match start {
                None => s,
                Some(anchor) => {
                    if (s - anchor).norm() <= (-s - anchor).norm() {
                        s
                    } else {
                        -s
                    }
                }
            },
            (Some(pf), Some(&pp)) => {
                let jump = (f - pf).norm();
                if jump >= 2.0 {
                    return Err(Error::BranchAmbiguity { index: j, jump });
                }
                let d_plus = (s - pp).norm();
                let d_minus = (-s - pp).norm();
                // Ambiguity: both signs nearly equidistant from the previous
                // value while the step was coarse (p near a branch point).
                if jump >= 0.5 && (d_plus - d_minus).abs() <= 0.05 * (d_plus + d_minus) {
                    return Err(Error::BranchAmbiguity { index: j, jump });
                }
                if d_plus <= d_minus {
                    s
                } else {
                    -s
                }
            }
            _ => unreachable!("prev_f and out advance together"),
        };
        out.push(p);
        prev_f = Some(f);
    }
    Ok(out)
}

/// The characteristic polynomial value `e^{i 2 t} - F e^{i t} + 1`:
/// zero exactly when `F = 2 cos t`.
pub fn characteristic_poly(f: Complex64, t: f64) -> Complex64 {
    let e1 = Complex64::new(0.0, t).exp();
    e1 * e1 - f * e1 + Complex64::new(1.0, 0.0)
}

// ======================================================================
// Locating single band points
// ======================================================================

/// Whether a band-point solve must certify simplicity (`|F'|` above the
/// critical threshold at every iterate) or may pass near multiple points
/// (bundle handling in the expansion assembly).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplicityCheck {
    /// Raise [`Error::NearMultiple`] when an iterate has `|F'| < crit_tol`.
    Strict,
    /// Never raise; the caller owns multiplicity handling.
    Skip,
}

/// Free-operator seed for branch `k` at quasimomentum `t`, shifted by the
/// potential's mean.
pub fn band_seed(q: &Potential, k: i32, t: f64) -> Complex64 {
    let base = TAU * k as f64 + t;
    Complex64::new(base * base, 0.0) + q.mean_shift()
}

/// Locate the Bloch eigenvalue `lambda_k(t)` by Newton iteration on
/// `g(lambda) = F(lambda) - 2 cos t` from the free seed `(2 pi k + t)^2`
/// (mean-shifted), falling back to a complete argument-principle search in
/// a disk of radius `4 pi (|k| + 1)` around the seed.
///
/// `t` must keep a distance of at least [`DELTA_GUARD`] from `{0, pi, 2 pi}`.
///
/// # Errors
/// * [`Error::NearMultiple`] — an iterate passed `|F'| < crit_tol`.
/// * [`Error::RootNotFound`] — no root inside the fallback region.
pub fn locate_band_point(q: &Potential, k: i32, t: f64, tol: f64) -> Result<DiscriminantValue> {
    guard_t(t)?;
    locate_from_seed(q, band_seed(q, k, t), k, t, tol, SimplicityCheck::Strict)
}

fn guard_t(t: f64) -> Result<()> {
    let dist = t
        .min((t - std::f64::consts::PI).abs())
        .min(TAU - t);
    if !(0.0..TAU).contains(&t) || dist < DELTA_GUARD {
        return Err(Error::InvalidGrid(format!(
            "quasimomentum t = {t} must lie in (0, 2pi) at distance >= {DELTA_GUARD:.0e} \
             from 0, pi, 2pi (exceptional points need bundle handling)"
        )));
    }
    Ok(())
}

/// Newton solve for `F(lambda) = 2 cos t` from an arbitrary seed. Exposed
/// crate-wide so band tracing and expansion windows can warm-start.
pub(crate) fn locate_from_seed(
    q: &Potential,
    seed: Complex64,
    k: i32,
    t: f64,
    tol: f64,
    simplicity: SimplicityCheck,
) -> Result<DiscriminantValue> {
    let target = Complex64::new(2.0 * t.cos(), 0.0);
    let near_multiple: std::cell::Cell<Option<(Complex64, f64)>> = std::cell::Cell::new(None);
    // Smallest-residual iterate seen, as (z, f - target, df). Newton's own
    // step criterion can be unreachable next to a multiple point, where the
    // integration noise in F is amplified by 1/|F'|; an iterate that
    // satisfies the characteristic equation at working precision is a root
    // regardless of how the iteration that produced it terminated.
    let best: std::cell::Cell<Option<(Complex64, Complex64, Complex64)>> =
        std::cell::Cell::new(None);
    let mut eval = |z: Complex64| -> Result<(Complex64, Complex64)> {
        let d = hill_discriminant(q, z, tol)?;
        if d.df.norm() < crit_tol(z) {
            near_multiple.set(Some((z, d.df.norm())));
        }
        let f_shift = d.f - target;
        if best
            .get()
            .is_none_or(|(_, bf, _)| f_shift.norm() < bf.norm())
        {
            best.set(Some((z, f_shift, d.df)));
        }
        Ok((f_shift, d.df))
    };

    let newton = newton_polish(&mut eval, seed, 1, 1e-13, 40);
    if simplicity == SimplicityCheck::Strict {
        if let Some((lambda, df_abs)) = near_multiple.get() {
            return Err(Error::NearMultiple { lambda, df_abs });
        }
    }
    let accept = |z: Complex64, f_shift: Complex64, df: Complex64| -> Option<DiscriminantValue> {
        let f = f_shift + target;
        (f_shift.norm() <= band_residual_tol(z)).then(|| DiscriminantValue {
            lambda: z,
            f,
            df,
            p: principal_p(f),
        })
    };
    if let Ok(res) = &newton {
        if let Some(v) = accept(res.z, res.f, res.df) {
            return Ok(v);
        }
    }
    if let Some((z, f_shift, df)) = best.get() {
        if let Some(v) = accept(z, f_shift, df) {
            return Ok(v);
        }
    }

    // Fallback: complete search in a square around the seed.
    let radius = 4.0 * std::f64::consts::PI * (k.unsigned_abs() as f64 + 1.0);
    let rect = Rect::new(
        seed.re - radius,
        seed.re + radius,
        seed.im - radius,
        seed.im + radius,
    )?;
    let opts = ZeroSearchOptions {
        boundary_samples: 24,
        cluster_tol: 1e-6 * (1.0 + seed.norm()),
        ..ZeroSearchOptions::default()
    };
    let zeros = find_zeros(&mut eval, &rect, &opts).map_err(|e| match e {
        Error::IncompleteSearch { .. } => e,
        other => Error::RootNotFound(format!(
            "no root of F(lambda) - 2cos({t}) within radius {radius:.1} of seed {seed}: {other}"
        )),
    })?;
    if simplicity == SimplicityCheck::Strict {
        if let Some((lambda, df_abs)) = near_multiple.get() {
            return Err(Error::NearMultiple { lambda, df_abs });
        }
    }
    let best = zeros
        .iter()
        .min_by(|a, b| {
            (a.0 - seed)
                .norm()
                .partial_cmp(&(b.0 - seed).norm())
                .expect("finite distances")
        })
        .ok_or_else(|| {
            Error::RootNotFound(format!(
                "no root of F(lambda) - 2cos({t}) within radius {radius:.1} of seed {seed}"
            ))
        })?;
    let d = hill_discriminant(q, best.0, tol)?;
    accept(best.0, d.f - target, d.df).ok_or_else(|| {
        Error::RootNotFound(format!(
            "fallback root {} fails the residual test for t = {t}",
            best.0
        ))
    })
}

/// Locate `lambda_k(t)` warm-started from a previous node on the same
/// branch (tangent seed `dlambda/dt = -2 sin t / F'`), from the free seed
/// on the first call. A continuity bound rejects jumps onto a different
/// branch. Shared by the exponent ladders and the expansion windows; the
/// simplicity check is skipped because both walk close to multiple points
/// on purpose.
pub(crate) fn locate_warm(
    q: &Potential,
    k: i32,
    t: f64,
    prev: &mut Option<(f64, DiscriminantValue)>,
    tol: f64,
) -> Result<DiscriminantValue> {
    let seed = match prev.as_ref() {
        None => band_seed(q, k, t),
        Some((tp, dp)) => {
            let slope = Complex64::new(-2.0 * tp.sin(), 0.0) / dp.df;
            if slope.is_finite() && slope.norm() < 1e8 {
                dp.lambda + slope * (t - tp)
            } else {
                dp.lambda
            }
        }
    };
    let disc = locate_from_seed(q, seed, k, t, tol, SimplicityCheck::Skip)?;
    if let Some((tp, dp)) = prev.as_ref() {
        let dt = (t - tp).abs();
        let bound = (10.0 * TAU * (k.unsigned_abs() as f64 + 1.0) + 5.0) * dt
            + 1e-6 * (1.0 + dp.lambda.norm());
        let jump = (disc.lambda - dp.lambda).norm();
        if jump > bound {
            return Err(Error::BranchCrossing {
                index: 0,
                jump,
                bound,
            });
        }
    }
    *prev = Some((t, disc));
    Ok(disc)
}

// ======================================================================
// Band tracing
// ======================================================================

/// Per-node annotation of a traced band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeFlag {
    /// `|F'|` comfortably above the critical threshold.
    Simple,
    /// `|F'| < 10 crit_tol`: the node sits close to a multiple point.
    NearMultiple,
}

/// One Bloch eigenvalue branch sampled on a quasimomentum grid.
#[derive(Debug, Clone)]
pub struct Band {
    /// Branch index (free-operator labelling).
    pub k: i32,
    /// Ascending quasimomentum nodes in `(0, 2 pi)`, excluding `{0, pi}`.
    pub t_nodes: Vec<f64>,
    /// `lambda_k(t)` per node.
    pub lambda_vals: Vec<Complex64>,
    /// `F'(lambda_k(t))` per node (used by normalization downstream).
    pub df_vals: Vec<Complex64>,
    /// `alpha_k(t)` per node; empty until filled by the eigenfunction
    /// module.
    pub alpha_vals: Vec<Complex64>,
    /// Per-node simplicity flags.
    pub flags: Vec<NodeFlag>,
}

impl Band {
    /// Largest characteristic-equation residual over the nodes, from a
    /// fresh discriminant evaluation (diagnostic).
    pub fn max_residual(&self, q: &Potential, tol: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for (&t, &l) in self.t_nodes.iter().zip(&self.lambda_vals) {
            let d = hill_discriminant(q, l, tol)?;
            worst = worst.max((d.f - Complex64::new(2.0 * t.cos(), 0.0)).norm());
        }
        Ok(worst)
    }
}

/// Trace `lambda_k(t)` across `t_nodes` (ascending, inside `(0, 2 pi)`,
/// each at distance >= [`DELTA_GUARD`] from `{0, pi, 2 pi}`).
///
/// Each node is solved by Newton iteration warm-started from the previous
/// node's root advanced by the free-parabola increment, which keeps the
/// free-operator labelling through transversal branch crossings at
/// (near-)closed gaps. Continuity between consecutive roots is certified
/// against the local seed spacing.
///
/// # Errors
/// [`Error::BranchCrossing`] with the node index when consecutive roots
/// jump farther than the seed spacing allows.
pub fn trace_band(q: &Potential, k: i32, t_nodes: &[f64], tol: f64) -> Result<Band> {
    if t_nodes.is_empty() {
        return Err(Error::InvalidGrid("empty quasimomentum grid".into()));
    }
    if !t_nodes.windows(2).all(|p| p[0] < p[1]) {
        return Err(Error::InvalidGrid(
            "quasimomentum grid must be strictly ascending".into(),
        ));
    }
    for &t in t_nodes {
        guard_t(t)?;
    }
    let mut lambda_vals = Vec::with_capacity(t_nodes.len());
    let mut df_vals = Vec::with_capacity(t_nodes.len());
    let mut flags = Vec::with_capacity(t_nodes.len());
    let mut prev: Option<DiscriminantValue> = None;
    let mut prev_t = 0.0f64;
    for (j, &t) in t_nodes.iter().enumerate() {
        let seed = match &prev {
            None => band_seed(q, k, t),
            Some(d) => {
                // Continue along the free-numbered analytic branch by
                // advancing the previous root with the free-parabola
                // increment. The deviation from the parabola drifts slowly,
                // so the seed stays in the right Newton basin — including
                // through transversal branch crossings at (near-)closed
                // gaps, where the implicit-function tangent -2 sin t / F'
                // degenerates (F' -> 0) and a plain warm restart would snap
                // to the nearest root of the *other* branch.
                let rho_prev = TAU * k as f64 + prev_t;
                let rho = TAU * k as f64 + t;
                d.lambda + Complex64::new(rho * rho - rho_prev * rho_prev, 0.0)
            }
        };
        let val = locate_from_seed(q, seed, k, t, tol, SimplicityCheck::Skip)?;
        if let Some(p) = &prev {
            let dt = t - prev_t;
            let bound =
                (10.0 * TAU * (k.unsigned_abs() as f64 + 1.0) + 5.0) * dt + 1e-6 * (1.0 + p.lambda.norm());
            let jump = (val.lambda - p.lambda).norm();
            if jump > bound {
                return Err(Error::BranchCrossing {
                    index: j,
                    jump,
                    bound,
                });
            }
        }
        flags.push(if val.df.norm() < 10.0 * crit_tol(val.lambda) {
            NodeFlag::NearMultiple
        } else {
            NodeFlag::Simple
        });
        lambda_vals.push(val.lambda);
        df_vals.push(val.df);
        prev = Some(val);
        prev_t = t;
    }
    Ok(Band {
        k,
        t_nodes: t_nodes.to_vec(),
        lambda_vals,
        df_vals,
        alpha_vals: Vec::new(),
        flags,
    })
}

// ======================================================================
// Multiple points (zeros of F')
// ======================================================================

/// A zero of `F'` annotated with the data needed for classification.
#[derive(Debug, Clone, Copy)]
pub struct CriticalPoint {
    /// Location of the zero of `F'`.
    pub lambda0: Complex64,
    /// `F(lambda0)`.
    pub f0: Complex64,
    /// Quasimomentum `arccos(F0/2)` in `[0, pi]`, present when `F0` is real
    /// with `|F0| <= 2 + 1e-10`; the mirror point `2 pi - t0` carries the
    /// same eigenvalue.
    pub t0: Option<f64>,
    /// Order of `lambda0` as a root of `F(lambda) - F0`: one more than the
    /// order of the `F'` zero (2 when `F''(lambda0) != 0`).
    pub algebraic_multiplicity: usize,
    /// Order of the zero of `F'` itself (from the winding count).
    pub derivative_zero_order: usize,
}

/// Find all zeros of `F'` in a rectangle, with completeness certified by
/// the argument principle (`F''` supplies the Newton derivative via the
/// second variational system).
///
/// The boundary is jittered deterministically when it grazes a zero.
/// Returned points are sorted by real part, then imaginary part, and
/// filtered to the requested rectangle (the jittered search region may be
/// marginally larger).
///
/// # Errors
/// [`Error::IncompleteSearch`] when located multiplicities do not match the
/// boundary winding number.
pub fn find_multiple_points(
    q: &Potential,
    region: &Rect,
    tol: f64,
) -> Result<Vec<CriticalPoint>> {
    let mut eval = |z: Complex64| -> Result<(Complex64, Complex64)> {
        let (pair, f2) = fundamental_with_second_derivative(q, z, tol)?;
        Ok((
            pair.discriminant_dlambda()
                .expect("second-derivative run fills first derivatives"),
            f2,
        ))
    };
    let opts = ZeroSearchOptions {
        boundary_samples: 12,
        cluster_tol: 1e-6 * (1.0 + region.center().norm()),
        newton_tol: 1e-12,
        ..ZeroSearchOptions::default()
    };
    let zeros = find_zeros(&mut eval, region, &opts)?;
    let mut points = Vec::with_capacity(zeros.len());
    for (z, m) in zeros {
        if !region.contains(z, 0.0) {
            continue;
        }
        let d = hill_discriminant(q, z, tol)?;
        let f0 = d.f;
        let t0 = if f0.im.abs() <= 1e-8 * (1.0 + f0.norm()) && f0.re.abs() <= 2.0 + 1e-10 {
            Some((f0.re / 2.0).clamp(-1.0, 1.0).acos())
        } else {
            None
        };
        points.push(CriticalPoint {
            lambda0: z,
            f0,
            t0,
            algebraic_multiplicity: m + 1,
            derivative_zero_order: m,
        });
    }
    Ok(points)
}

// ======================================================================
// Tests
// ======================================================================
