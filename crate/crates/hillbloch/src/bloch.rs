//! Floquet eigenfunctions and normalized biorthogonal Bloch pairs.
//!
//! For a band point `(lambda, t)` — a root of `F(lambda) = 2 cos t` — the
//! operator `H_t` (the Hill operator on `[0, 1]` with quasi-periodic
//! boundary conditions `y(1) = e^{it} y(0)`, `y'(1) = e^{it} y'(0)`) has the
//! eigenfunction
//!
//! ```text
//!   Phi(lambda, t, x) = phi(1, lambda) theta(x, lambda)
//!                     + (e^{it} - theta(1, lambda)) phi(x, lambda),
//! ```
//!
//! with the alternative combination
//!
//! ```text
//!   G(lambda, t, x) = theta'(1, lambda) phi(x, lambda)
//!                   + (e^{it} - phi'(1, lambda)) theta(x, lambda)
//! ```
//!
//! available when `Phi` degenerates; away from `t in {0, pi}` at least one
//! of the two is nonzero. The adjoint operator `H_t^*` (same boundary
//! condition, potential `conj q`) has the eigenfunction
//! `conj(Phi(lambda, -t, x))` at `conj lambda`, so the *normalized pair*
//!
//! ```text
//!   Psi     = gauge . Phi(lambda, t, .)  / || . ||,
//!   Psi^*   = gauge . conj(Phi(lambda, -t, .)) / || . ||
//! ```
//!
//! is biorthogonal across distinct simple band points at the same `t`. The
//! *norm function*
//!
//! ```text
//!   alpha_k(t) = (Psi^*, Psi) = integral of Psi^* conj(Psi)
//! ```
//!
//! measures the angle between the pair; `alpha -> 0` signals a spectral
//! singularity, and `1/alpha` drives the spectral expansion. A closed form
//! bypasses the quadrature:
//!
//! ```text
//!   integral of Phi(.,t) Phi(.,-t) over [0,1]  =  -phi(1, lambda) F'(lambda),
//! ```
//!
//! which this module exposes both as a cross-check and as the fast route to
//! `alpha`.

use num_complex::Complex64;

use crate::discriminant::{crit_tol, locate_band_point, DiscriminantValue};
use crate::error::{Error, Result};
use crate::monodromy::{fundamental_with_samples, FundamentalPair};
use crate::potential::{GridSpec, Potential};
use crate::quad::{weighted_inner, weighted_l2_norm};

/// Relative threshold under which a Floquet combination counts as the zero
/// function (its coefficients vanish together only at true degeneracies).
pub const NULL_TOL: f64 = 1e-10;

/// Pair angle below which a pair is flagged as effectively singular.
pub const SINGULAR_ALPHA: f64 = 1e-14;

/// Which eigenfunction formula produced a set of samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhichFormula {
    /// `Phi = phi(1) theta(x) + (e^{it} - theta(1)) phi(x)`.
    Phi,
    /// `G = theta'(1) phi(x) + (e^{it} - phi'(1)) theta(x)`.
    G,
}

/// Result of evaluating the Floquet eigenfunction at a band point.
#[derive(Debug, Clone)]
pub enum FloquetFunction {
    /// A one-dimensional eigenspace, spanned by `samples`.
    Single {
        /// Unnormalized samples on the requested grid.
        samples: Vec<Complex64>,
        /// Which combination was used.
        formula: WhichFormula,
    },
    /// A two-dimensional eigenspace (periodic/antiperiodic point with both
    /// combinations null): the fundamental solutions themselves span it.
    DoubleSpace {
        /// Samples of `theta(x, lambda)`.
        theta: Vec<Complex64>,
        /// Samples of `phi(x, lambda)`.
        phi: Vec<Complex64>,
    },
}

/// A normalized biorthogonal eigenfunction pair at one band point.
#[derive(Debug, Clone)]
pub struct BlochPair {
    /// Branch index.
    pub k: i32,
    /// Quasimomentum.
    pub t: f64,
    /// Eigenvalue `lambda_k(t)`.
    pub lambda: Complex64,
    /// `F'(lambda_k(t))`, kept for singularity diagnostics.
    pub df: Complex64,
    /// Normalized, gauged samples of `Psi_{k,t}` on the x-grid.
    pub psi: Vec<Complex64>,
    /// Normalized, gauged samples of `Psi^*_{k,t}`.
    pub psi_star: Vec<Complex64>,
    /// Pair angle `alpha_k(t) = (Psi^*, Psi)`.
    pub alpha: Complex64,
    /// `X_{k,t} = Psi^*_{k,t} / alpha_k(t)` (large near singularities).
    pub x_dual: Vec<Complex64>,
    /// Formula used for `psi` (the `+t` member).
    pub which_formula: WhichFormula,
}

impl BlochPair {
    /// Whether the pair angle is numerically indistinguishable from zero
    /// (the expansion must treat this point by a limiting procedure).
    pub fn is_singular(&self) -> bool {
        self.alpha.norm() < SINGULAR_ALPHA
    }
}

/// Unit-modulus factor `c` such that the largest-magnitude entry of
/// `c * samples` is real positive. Ties within a relative `1e-12` resolve
/// to the earliest index; an all-zero vector gets `c = 1`.
pub fn gauge_factor(samples: &[Complex64]) -> Complex64 {
    let max = samples.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if max == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let z = samples
        .iter()
        .find(|z| z.norm() >= max * (1.0 - 1e-12))
        .expect("max was attained");
    z.conj() / z.norm()
}

/// Combine fundamental-solution samples into the eigenfunction of `H_t` at
/// an already-verified band point.
fn assemble(
    end: &FundamentalPair,
    theta: &[Complex64],
    phi: &[Complex64],
    t: f64,
) -> Result<FloquetFunction> {
    let eit = Complex64::new(0.0, t).exp();
    let c1 = end.phi1;
    let c2 = eit - end.theta1;
    let samples: Vec<Complex64> = theta
        .iter()
        .zip(phi)
        .map(|(&th, &ph)| c1 * th + c2 * ph)
        .collect();
    let sup = samples.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if sup >= NULL_TOL * (c1.norm() + c2.norm() + 1.0) {
        return Ok(FloquetFunction::Single {
            samples,
            formula: WhichFormula::Phi,
        });
    }

    let g1 = end.dtheta1;
    let g2 = eit - end.dphi1;
    let g_samples: Vec<Complex64> = theta
        .iter()
        .zip(phi)
        .map(|(&th, &ph)| g1 * ph + g2 * th)
        .collect();
    let g_sup = g_samples.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if g_sup >= NULL_TOL * (g1.norm() + g2.norm() + 1.0) {
        return Ok(FloquetFunction::Single {
            samples: g_samples,
            formula: WhichFormula::G,
        });
    }

    // Both combinations vanish: a two-dimensional eigenspace. Legitimate
    // only at the periodic/antiperiodic quasimomenta.
    let dist = (t.sin()).abs();
    if dist < 1e-9 {
        Ok(FloquetFunction::DoubleSpace {
            theta: theta.to_vec(),
            phi: phi.to_vec(),
        })
    } else {
        Err(Error::DegeneratePair(format!(
            "both eigenfunction formulas vanish at lambda = {}, t = {t} \
             away from the periodic/antiperiodic points",
            end.lambda
        )))
    }
}

/// Evaluate the Floquet eigenfunction of `H_t` at `(lambda, t)` on `xs`.
///
/// `(lambda, t)` must satisfy the characteristic equation: the residual
/// `|F(lambda) - 2 cos t|` is checked against the scale-aware band
/// tolerance.
///
/// Returns the `Phi` combination when it is nonzero, the `G` combination
/// as fallback, or the two-dimensional `{theta, phi}` eigenspace at a
/// periodic/antiperiodic double point.
///
/// # Errors
/// * [`Error::NotABandPoint`] — the characteristic residual is too large.
/// * [`Error::DegeneratePair`] — both formulas vanish away from `{0, pi}`.
pub fn floquet_function(
    q: &Potential,
    lambda: Complex64,
    t: f64,
    xs: &[f64],
    tol: f64,
) -> Result<FloquetFunction> {
    let end = fundamental_with_samples(q, lambda, tol, xs)?;
    let residual = (end.discriminant() - Complex64::new(2.0 * t.cos(), 0.0)).norm();
    let allowed = crate::discriminant::band_residual_tol(lambda);
    if residual > allowed {
        return Err(Error::NotABandPoint {
            residual,
            tol: allowed,
        });
    }
    let (theta, phi) = end
        .samples
        .as_ref()
        .map(|s| (s.theta.clone(), s.phi.clone()))
        .expect("sampled run");
    assemble(&end, &theta, &phi, t)
}

/// Everything a pair (or the closed-form `alpha`) needs from one sampled
/// integration at a located band point.
struct Ingredients {
    end: FundamentalPair,
    /// Raw `Phi(lambda, +t, .)` samples and formula.
    plus: (Vec<Complex64>, WhichFormula),
    /// Raw `Phi(lambda, -t, .)` samples and formula.
    minus: (Vec<Complex64>, WhichFormula),
    norm_plus: f64,
    norm_minus: f64,
    gauge_plus: Complex64,
    gauge_minus: Complex64,
}

fn ingredients(
    q: &Potential,
    disc: &DiscriminantValue,
    t: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<Ingredients> {
    let xs = grid.x_grid();
    let w = grid.x_weights();
    let end = fundamental_with_samples(q, disc.lambda, tol, &xs)?;
    let (theta, phi) = end
        .samples
        .as_ref()
        .map(|s| (s.theta.clone(), s.phi.clone()))
        .expect("sampled run");
    let single = |f: FloquetFunction| -> Result<(Vec<Complex64>, WhichFormula)> {
        match f {
            FloquetFunction::Single { samples, formula } => Ok((samples, formula)),
            FloquetFunction::DoubleSpace { .. } => Err(Error::DegeneratePair(format!(
                "two-dimensional eigenspace at lambda = {}, t = {t}: pairs are defined \
                 only at simple band points off the periodic/antiperiodic quasimomenta",
                disc.lambda
            ))),
        }
    };
    let plus = single(assemble(&end, &theta, &phi, t)?)?;
    let minus = single(assemble(&end, &theta, &phi, -t)?)?;
    let star_raw: Vec<Complex64> = minus.0.iter().map(|z| z.conj()).collect();
    let norm_plus = weighted_l2_norm(&plus.0, &w);
    let norm_minus = weighted_l2_norm(&minus.0, &w);
    if norm_plus == 0.0 || norm_minus == 0.0 {
        return Err(Error::DegeneratePair(format!(
            "zero-norm eigenfunction at lambda = {}, t = {t}",
            disc.lambda
        )));
    }
    let gauge_plus = gauge_factor(&plus.0);
    let gauge_minus = gauge_factor(&star_raw);
    Ok(Ingredients {
        end,
        plus,
        minus,
        norm_plus,
        norm_minus,
        gauge_plus,
        gauge_minus,
    })
}

/// Build the normalized biorthogonal pair at `lambda_k(t)`.
///
/// The eigenvalue is located from the free seed; `t` must stay away from
/// the periodic/antiperiodic quasimomenta `{0, pi}` (pairs degenerate
/// there) and the located point must be simple.
///
/// # Errors
/// * [`Error::DegeneratePair`] — `lambda_k(t)` is within the critical
///   threshold of a multiple point (bundle handling belongs to the caller).
/// * Propagates location and integration failures.
///
/// `alpha` below [`SINGULAR_ALPHA`] is *not* an error — it is the expected
/// signal approaching a spectral singularity; see
/// [`BlochPair::is_singular`].
pub fn normalized_pair(
    q: &Potential,
    k: i32,
    t: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<BlochPair> {
    let disc = locate_band_point(q, k, t, tol).map_err(degenerate_from_near_multiple)?;
    normalized_pair_from(q, &disc, k, t, grid, tol)
}

fn degenerate_from_near_multiple(e: Error) -> Error {
    match e {
        Error::NearMultiple { lambda, df_abs } => Error::DegeneratePair(format!(
            "lambda = {lambda} sits near a multiple point (|F'| = {df_abs:.3e}); \
             route this quasimomentum through bundle handling"
        )),
        other => other,
    }
}

/// [`normalized_pair`] for an already-located band point (warm paths:
/// band tracing, expansion windows).
pub fn normalized_pair_from(
    q: &Potential,
    disc: &DiscriminantValue,
    k: i32,
    t: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<BlochPair> {
    if disc.df.norm() < crit_tol(disc.lambda) {
        return Err(Error::DegeneratePair(format!(
            "lambda = {} is a multiple point (|F'| = {:.3e})",
            disc.lambda,
            disc.df.norm()
        )));
    }
    pair_unchecked(q, disc, k, t, grid, tol)
}

/// [`normalized_pair_from`] without the multiple-point refusal.
///
/// Singularity ladders and excision windows deliberately walk into the
/// `|F'| -> 0` regime; they own the interpretation of a collapsing `alpha`.
pub(crate) fn pair_unchecked(
    q: &Potential,
    disc: &DiscriminantValue,
    k: i32,
    t: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<BlochPair> {
    let ing = ingredients(q, disc, t, grid, tol)?;
    let w = grid.x_weights();
    let psi: Vec<Complex64> = ing
        .plus
        .0
        .iter()
        .map(|&z| z * ing.gauge_plus / ing.norm_plus)
        .collect();
    let psi_star: Vec<Complex64> = ing
        .minus
        .0
        .iter()
        .map(|&z| z.conj() * ing.gauge_minus / ing.norm_minus)
        .collect();
    let alpha = weighted_inner(&psi_star, &psi, &w);
    let x_dual: Vec<Complex64> = psi_star.iter().map(|&z| z / alpha).collect();
    Ok(BlochPair {
        k,
        t,
        lambda: disc.lambda,
        df: disc.df,
        psi,
        psi_star,
        alpha,
        x_dual,
        which_formula: ing.plus.1,
    })
}

/// Closed-form pair angle: `alpha` from the overlap identity
/// `(Phi_t, Phi_-t) = -phi(1, lambda) F'(lambda)` with the same
/// normalization and gauge as [`normalized_pair`], skipping the alpha
/// quadrature.
///
/// # Errors
/// [`Error::FormulaInapplicable`] — `phi(1, lambda)` is numerically zero,
/// or either eigenfunction needed the `G` fallback (the identity addresses
/// the `Phi` combination only).
pub fn alpha_via_identity(
    q: &Potential,
    k: i32,
    t: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<Complex64> {
    let disc = locate_band_point(q, k, t, tol).map_err(degenerate_from_near_multiple)?;
    alpha_via_identity_from(q, &disc, t, grid, tol)
}

/// [`alpha_via_identity`] for an already-located band point.
pub fn alpha_via_identity_from(
    q: &Potential,
    disc: &DiscriminantValue,
    t: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<Complex64> {
    let ing = ingredients(q, disc, t, grid, tol)?;
    if ing.plus.1 != WhichFormula::Phi || ing.minus.1 != WhichFormula::Phi {
        return Err(Error::FormulaInapplicable(
            "the overlap identity covers the Phi combination; a G fallback was used".into(),
        ));
    }
    let phi_sup = ing
        .end
        .samples
        .as_ref()
        .expect("sampled run")
        .phi
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if ing.end.phi1.norm() < 1e-12 * (1.0 + phi_sup) {
        return Err(Error::FormulaInapplicable(format!(
            "phi(1, lambda) = {} is numerically zero; fall back to quadrature",
            ing.end.phi1
        )));
    }
    let overlap = -ing.end.phi1 * disc.df;
    Ok(ing.gauge_minus * ing.gauge_plus.conj() * overlap.conj() / (ing.norm_plus * ing.norm_minus))
}

/// Both sides of the overlap identity at a band point: the quadrature
/// value `integral of Phi(., t) Phi(., -t)` and the closed form
/// `-phi(1, lambda) F'(lambda)` — they agree at simple band points and the
/// comparison is the standard validation of a located eigenpair.
pub fn floquet_overlap(
    q: &Potential,
    disc: &DiscriminantValue,
    t: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<(Complex64, Complex64)> {
    let ing = ingredients(q, disc, t, grid, tol)?;
    if ing.plus.1 != WhichFormula::Phi || ing.minus.1 != WhichFormula::Phi {
        return Err(Error::FormulaInapplicable(
            "overlap identity requested at a point where Phi degenerates".into(),
        ));
    }
    let w = grid.x_weights();
    // Plain (unconjugated) product integral.
    let quadrature: Complex64 = ing
        .plus
        .0
        .iter()
        .zip(&ing.minus.0)
        .zip(&w)
        .map(|((&a, &b), &wi)| a * b * wi)
        .sum();
    let closed = -ing.end.phi1 * disc.df;
    Ok((quadrature, closed))
}

// ======================================================================
// Tests
// ======================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::weighted_inner;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{PI, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid_n(n: usize) -> GridSpec {
        GridSpec {
            x_points: n,
            ..GridSpec::default()
        }
    }

    fn one_mode(amp: f64) -> Potential {
        Potential::from_modes([(1, c(amp, 0.0))]).unwrap()
    }

    // ------------------------------------------------------------------
    // floquet_function
    // ------------------------------------------------------------------

    #[test]
    fn free_phi_formula_is_plane_wave() {
        let q = Potential::zero();
        let grid = grid_n(65);
        let xs = grid.x_grid();
        match floquet_function(&q, c(1.0, 0.0), 1.0, &xs, 1e-11).unwrap() {
            FloquetFunction::Single { samples, formula } => {
                assert_eq!(formula, WhichFormula::Phi);
                let s1 = 1.0f64.sin();
                for (&x, &v) in xs.iter().zip(&samples) {
                    let expect = c(s1, 0.0) * Complex64::new(0.0, x).exp();
                    assert!((v - expect).norm() < 1e-11, "x = {x}: {v} vs {expect}");
                }
                // Quasi-periodicity at the endpoints comes for free.
                let eit = Complex64::new(0.0, 1.0).exp();
                assert!((samples[xs.len() - 1] - eit * samples[0]).norm() < 1e-11);
            }
            other => panic!("expected a single eigenfunction, got {other:?}"),
        }
    }

    #[test]
    fn free_partner_branch_is_conjugate_wave() {
        // The second root of the characteristic polynomial at the same t:
        // lambda = (2 pi - 1)^2 carries e^{-i(2 pi - 1)x} (up to scale).
        let q = Potential::zero();
        let grid = grid_n(65);
        let xs = grid.x_grid();
        let lam = (TAU - 1.0).powi(2);
        match floquet_function(&q, c(lam, 0.0), 1.0, &xs, 1e-11).unwrap() {
            FloquetFunction::Single { samples, .. } => {
                let w = -(TAU - 1.0);
                let ratio0 = samples[0] / Complex64::new(0.0, w * xs[0]).exp();
                assert!(ratio0.norm() > 1e-3, "degenerate scale");
                for (&x, &v) in xs.iter().zip(&samples) {
                    let expect = ratio0 * Complex64::new(0.0, w * x).exp();
                    assert!((v - expect).norm() < 1e-9 * ratio0.norm(), "x = {x}");
                }
            }
            other => panic!("expected a single eigenfunction, got {other:?}"),
        }
    }

    #[test]
    fn free_periodic_double_point_yields_two_dimensional_space() {
        let q = Potential::zero();
        let grid = grid_n(65);
        let xs = grid.x_grid();
        match floquet_function(&q, c(4.0 * PI * PI, 0.0), 0.0, &xs, 1e-11).unwrap() {
            FloquetFunction::DoubleSpace { theta, phi } => {
                for (j, &x) in xs.iter().enumerate() {
                    assert!((theta[j] - c((TAU * x).cos(), 0.0)).norm() < 1e-10);
                    assert!((phi[j] - c((TAU * x).sin() / TAU, 0.0)).norm() < 1e-10);
                }
            }
            other => panic!("expected a double space, got {other:?}"),
        }
    }

    #[test]
    fn non_band_point_is_rejected() {
        let q = Potential::zero();
        let xs = grid_n(17).x_grid();
        let err = floquet_function(&q, c(10.0, 0.0), 1.0, &xs, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NotABandPoint { .. }), "{err}");
    }

    #[test]
    fn gasymov_antiperiodic_point_keeps_one_dimensional_space() {
        // For q = e^{i 2 pi x} the double eigenvalue pi^2 at t = pi has
        // geometric multiplicity 1: the Floquet formula must stay usable.
        let q = one_mode(1.0);
        let xs = grid_n(129).x_grid();
        match floquet_function(&q, c(PI * PI, 0.0), PI, &xs, 1e-10).unwrap() {
            FloquetFunction::Single { samples, .. } => {
                let sup = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
                assert!(sup > 1e-6, "eigenfunction collapsed: sup = {sup:e}");
            }
            other => panic!("expected a single eigenfunction, got {other:?}"),
        }
    }

    // ------------------------------------------------------------------
    // normalized_pair
    // ------------------------------------------------------------------

    #[test]
    fn free_pair_is_self_dual_with_unit_alpha() {
        let q = Potential::zero();
        let grid = grid_n(257);
        for (k, t) in [(0, 1.0), (1, 2.0)] {
            let pair = normalized_pair(&q, k, t, &grid, 1e-11).unwrap();
            assert!((pair.alpha - c(1.0, 0.0)).norm() < 1e-8, "alpha = {}", pair.alpha);
            let w = grid.x_weights();
            assert!((weighted_l2_norm(&pair.psi, &w) - 1.0).abs() < 1e-8);
            assert!((weighted_l2_norm(&pair.psi_star, &w) - 1.0).abs() < 1e-8);
            // Self-adjoint free case: psi and psi_star coincide.
            let omega = TAU * k as f64 + t;
            let xs = grid.x_grid();
            for (j, &x) in xs.iter().enumerate() {
                let expect = Complex64::new(0.0, omega * x).exp();
                assert!((pair.psi[j] - expect).norm() < 1e-8, "x = {x}");
                assert!((pair.psi_star[j] - expect).norm() < 1e-8);
                assert!((pair.x_dual[j] - pair.psi_star[j] / pair.alpha).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pair_normalization_gauge_and_alpha_consistency() {
        let q = one_mode(0.3);
        let grid = GridSpec::default();
        let pair = normalized_pair(&q, 1, 1.0, &grid, 1e-10).unwrap();
        let w = grid.x_weights();
        assert!((weighted_l2_norm(&pair.psi, &w) - 1.0).abs() < 1e-8);
        assert!((weighted_l2_norm(&pair.psi_star, &w) - 1.0).abs() < 1e-8);
        let alpha = weighted_inner(&pair.psi_star, &pair.psi, &w);
        assert!((alpha - pair.alpha).norm() < 1e-12);
        for samples in [&pair.psi, &pair.psi_star] {
            let max = samples.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            let top = samples
                .iter()
                .find(|z| z.norm() >= max * (1.0 - 1e-12))
                .unwrap();
            assert!(top.re > 0.0, "gauge sample not positive: {top}");
            assert!(top.im.abs() <= 1e-10 * top.re, "gauge sample not real: {top}");
        }
        assert!(!pair.is_singular());
    }

    #[test]
    fn near_multiple_point_raises_degenerate_pair() {
        // Gasymov potential: lambda_{-1}(t) and lambda_1(...) collide at
        // 4 pi^2 as t -> 0; directly at a multiple point the pair is
        // refused. Use a t so close to 0 it is forbidden anyway -> guard;
        // instead drive the simplicity check with a discriminant value at
        // the exact double point.
        let q = one_mode(1.0);
        let disc = crate::discriminant::hill_discriminant(&q, c(4.0 * PI * PI, 0.0), 1e-10)
            .unwrap();
        let err =
            normalized_pair_from(&q, &disc, 1, 0.01, &grid_n(65), 1e-10).unwrap_err();
        assert!(matches!(err, Error::DegeneratePair(_)), "{err}");
    }

    // ------------------------------------------------------------------
    // alpha: identity vs quadrature
    // ------------------------------------------------------------------

    #[test]
    fn free_alpha_identity_is_one() {
        let q = Potential::zero();
        let grid = grid_n(257);
        for (k, t) in [(0, 1.0), (1, 2.0)] {
            let a = alpha_via_identity(&q, k, t, &grid, 1e-11).unwrap();
            assert!((a - c(1.0, 0.0)).norm() < 1e-8, "k={k}, t={t}: {a}");
        }
    }

    #[test]
    fn alpha_identity_matches_quadrature() {
        let q = one_mode(0.3);
        let grid = GridSpec::default();
        let quad = normalized_pair(&q, 1, 1.0, &grid, 1e-10).unwrap().alpha;
        let ident = alpha_via_identity(&q, 1, 1.0, &grid, 1e-10).unwrap();
        assert!(
            (quad - ident).norm() <= 1e-6 * (1.0 + quad.norm()),
            "quadrature {quad} vs identity {ident}"
        );
        // Refinement oracle: the default-grid quadrature agrees with a
        // 2048-panel quadrature, so the identity check is not comparing
        // one coarse error against another.
        let fine = normalized_pair(&q, 1, 1.0, &grid_n(2049), 1e-10).unwrap().alpha;
        assert!((quad - fine).norm() < 1e-8, "quadrature unconverged: {quad} vs {fine}");
    }

    #[test]
    fn overlap_identity_on_random_simple_points() {
        let q = Potential::from_modes([(1, c(0.5, 0.0)), (-1, c(0.2, 0.0))]).unwrap();
        let grid = GridSpec::default();
        for k in [-2i32, 0, 1, 3] {
            for t in [0.7, 2.1, 4.4] {
                let disc = locate_band_point(&q, k, t, 1e-10).unwrap();
                let (lhs, rhs) = floquet_overlap(&q, &disc, t, &grid, 1e-10).unwrap();
                assert!(
                    (lhs - rhs).norm() <= 1e-6 * (1.0 + rhs.norm()),
                    "k={k}, t={t}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn quadratic_trace_identity_at_band_points() {
        // (e^{-it} - theta(1))(e^{it} - theta(1)) = -phi(1) theta'(1)
        // whenever F(lambda) = 2 cos t: a consequence of the Wronskian and
        // the characteristic equation.
        let q = one_mode(0.3);
        for (k, t) in [(0, 0.9), (1, 2.3), (-2, 5.1)] {
            let disc = locate_band_point(&q, k, t, 1e-10).unwrap();
            let end = fundamental_with_samples(&q, disc.lambda, 1e-10, &[0.0, 1.0]).unwrap();
            let em = Complex64::new(0.0, -t).exp();
            let ep = Complex64::new(0.0, t).exp();
            let lhs = (em - end.theta1) * (ep - end.theta1);
            let rhs = -end.phi1 * end.dtheta1;
            assert!((lhs - rhs).norm() < 1e-8, "k={k}, t={t}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn projection_is_gauge_invariant() {
        let q = one_mode(0.3);
        let grid = grid_n(129);
        let pair = normalized_pair(&q, 0, 1.3, &grid, 1e-10).unwrap();
        let w = grid.x_weights();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g: Vec<Complex64> = (0..grid.x_points)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let project = |psi: &[Complex64], psi_star: &[Complex64]| -> Vec<Complex64> {
            let alpha = weighted_inner(psi_star, psi, &w);
            let coeff = weighted_inner(&g, psi_star, &w) / alpha.conj();
            psi.iter().map(|&p| coeff * p).collect()
        };
        let base = project(&pair.psi, &pair.psi_star);
        let cp = Complex64::new(0.0, 0.7).exp();
        let cm = Complex64::new(0.0, -1.3).exp();
        let psi2: Vec<Complex64> = pair.psi.iter().map(|&z| z * cp).collect();
        let star2: Vec<Complex64> = pair.psi_star.iter().map(|&z| z * cm).collect();
        let twisted = project(&psi2, &star2);
        for (a, b) in base.iter().zip(&twisted) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn biorthogonality_across_branches() {
        let q = one_mode(0.3);
        let grid = grid_n(1025);
        let w = grid.x_weights();
        let t = 1.2;
        let ks = [-2i32, 0, 1, 3];
        let pairs: Vec<BlochPair> = ks
            .iter()
            .map(|&k| normalized_pair(&q, k, t, &grid, 1e-10).unwrap())
            .collect();
        for (i, a) in pairs.iter().enumerate() {
            for (j, b) in pairs.iter().enumerate() {
                let overlap = weighted_inner(&b.psi_star, &a.psi, &w).norm();
                if i == j {
                    assert!(overlap > 1e-3, "diagonal pair angle collapsed");
                } else {
                    assert!(
                        overlap <= 1e-6,
                        "k={} vs k'={}: overlap {overlap:e}",
                        a.k,
                        b.k
                    );
                }
            }
        }
    }

    #[test]
    fn alpha_shrinks_toward_gasymov_singularities() {
        // q = e^{i 2 pi x} turns every periodic/antiperiodic double point
        // into a singularity of the pair: alpha -> 0 roughly linearly in
        // the distance to the exceptional quasimomentum. On branch 1 the
        // linear regime starts below |t| ~ 1e-3 (the end values phi(1) and
        // 1 - theta(1) at lambda = 4 pi^2 are ~1e-4..1e-3, which sets the
        // crossover); branch 0 towards pi decays cleanly from the start.
        let q = one_mode(1.0);
        let grid = grid_n(257);
        for (k, ts) in [
            (1i32, vec![1e-3, 5e-4, 2.5e-4, 1.25e-4]),
            (0i32, vec![PI - 1e-2, PI - 5e-3, PI - 2.5e-3, PI - 1.25e-3]),
        ] {
            let alphas: Vec<f64> = ts
                .iter()
                .map(|&t| normalized_pair(&q, k, t, &grid, 1e-10).unwrap().alpha.norm())
                .collect();
            for w in alphas.windows(2) {
                assert!(w[1] < w[0], "k = {k}: alpha not decreasing: {alphas:?}");
            }
            // Distance halves three times: a linear exponent gives 1/8.
            assert!(
                alphas[3] < alphas[0] / 4.0,
                "k = {k}: alpha decays too slowly: {alphas:?}"
            );
        }
    }

    #[test]
    fn pair_converges_to_plane_wave_for_large_k() {
        // Distance to the free eigenfunction (after optimal phase
        // alignment) decays like 1/k.
        let q = one_mode(0.1);
        let grid = grid_n(513);
        let xs = grid.x_grid();
        let w = grid.x_weights();
        let t = 2.0;
        let dev: Vec<f64> = [4i32, 8, 16]
            .iter()
            .map(|&k| {
                let pair = normalized_pair(&q, k, t, &grid, 1e-10).unwrap();
                let free: Vec<Complex64> = xs
                    .iter()
                    .map(|&x| Complex64::new(0.0, (TAU * k as f64 + t) * x).exp())
                    .collect();
                let inner = weighted_inner(&pair.psi, &free, &w);
                let phase = inner.conj() / inner.norm();
                let diff: Vec<Complex64> = pair
                    .psi
                    .iter()
                    .zip(&free)
                    .map(|(&p, &f)| p * phase - f)
                    .collect();
                weighted_l2_norm(&diff, &w)
            })
            .collect();
        assert!(dev[1] < dev[0] && dev[2] < dev[1], "no decay: {dev:?}");
        assert!(dev[2] < dev[0] / 2.5, "slower than 1/k: {dev:?}");
    }

    #[test]
    fn gauge_factor_rules() {
        // Largest sample wins; ties resolve to the first index.
        let v = [c(0.0, 0.5), c(-2.0, 0.0), c(1.0, 1.0)];
        let g = gauge_factor(&v);
        let gauged: Vec<Complex64> = v.iter().map(|&z| z * g).collect();
        assert!((gauged[1] - c(2.0, 0.0)).norm() < 1e-15);
        let tie = [c(0.0, 1.0), c(1.0, 0.0)];
        let g = gauge_factor(&tie);
        assert!(((tie[0] * g) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((gauge_factor(&[c(0.0, 0.0)]) - c(1.0, 0.0)).norm() == 0.0);
    }
}
