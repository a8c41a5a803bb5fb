//! Classification of multiple points of the discriminant and the index
//! bookkeeping that steers the paired spectral expansion.
//!
//! A multiple point (`F'(lambda0) = 0` with `F(lambda0) = 2 cos t0`) is
//! classified by where it sits and how the monodromy degenerates there:
//!
//! * interior `t0` (away from `{0, pi}`): a **spectral singularity** — the
//!   biorthogonal normalizer `alpha` vanishes on the band interior;
//! * `t0` at `0` or `pi` with geometric multiplicity 1 (monodromy is a
//!   Jordan block): an **essential spectral singularity** — `alpha` decays
//!   like a power of the distance to the edge and single-band integrals
//!   diverge, so the expansion must pair the two merging bands;
//! * `t0` at `0` or `pi` with geometric multiplicity 2 (monodromy is
//!   `±Identity`): a **regular multiple point** — `alpha` stays bounded
//!   away from zero and no pairing is needed.
//!
//! The decay exponent is measured on a dyadic ladder of quasimomentum
//! distances and the index sets `N`, `S`, `K` collect, per edge, the
//! low-index bands that need individual or grouped treatment; every higher
//! index is covered by the two-band pairing map.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::bloch;
use crate::discriminant::{
    hill_discriminant, locate_warm, CriticalPoint, DiscriminantValue, DELTA_GUARD,
};
use crate::error::{Error, Result};
use crate::monodromy::{fundamental_with_second_derivative, integrate_fundamental};
use crate::potential::{GridSpec, Potential};

const TAU: f64 = std::f64::consts::TAU;

// ======================================================================
// Thresholds
// ======================================================================

/// Default half-width of the excision windows around `t = 0` and `t = pi`.
pub const DEFAULT_H: f64 = 0.02;

/// A fitted decay exponent `beta >= 1 - FIT_SLACK` marks a band as
/// singular at the edge (membership in the `S` sets).
pub const FIT_SLACK: f64 = 0.1;

/// An edge point whose conclusive pair-angle fit decays slower than this
/// is a barely-open gap seen through location noise, not a Jordan block;
/// [`classify_point`] downgrades it to a regular multiple point.
pub const NO_DECAY_BETA: f64 = 0.5;

/// Maximum spread of the tail slopes around their mean before an exponent
/// fit is declared inconclusive.
pub const INCONCLUSIVE_SPREAD: f64 = 0.2;

/// Maximum relative disagreement between the directly located and the
/// model-continued `alpha` on the overlap rungs before a fit is declared
/// inconclusive.
pub const MODEL_DEFECT_TOL: f64 = 0.05;

/// Maximum number of dyadic halvings in the `alpha` ladder below the
/// window width (fewer when the foot would drop under
/// [`LADDER_FOOT_MIN`]).
pub const LADDER_DEPTH: usize = 18;

/// Smallest quasimomentum distance probed by a ladder.
pub const LADDER_FOOT_MIN: f64 = 1e-7;

/// Classifications at band indices `|k| <= LOW_INDEX_BOUND` rest on the
/// numerics alone; the asymptotic theorems certify large `|k|` only.
pub const LOW_INDEX_BOUND: i32 = 3;

/// `t0` closer than this to `{0, pi, 2 pi}` counts as a periodic or
/// antiperiodic edge point. `F(lambda0)` is accurate to roughly `1e-8` and
/// `arccos` maps that to about `1e-4` near the edges, so the margin is
/// generous for genuine edge points while no interior point of interest
/// sits this close to an edge.
pub const EDGE_T_TOL: f64 = 1e-3;

/// Threshold on the monodromy off-diagonal entries `phi(1)`, `theta'(1)`
/// deciding geometric multiplicity 2 at a periodic/antiperiodic eigenvalue.
pub fn gm_tol(lambda0: Complex64) -> f64 {
    1e-7 * (1.0 + lambda0.norm())
}

fn is_edge_zero(t0: f64) -> bool {
    t0.abs() < EDGE_T_TOL || (TAU - t0).abs() < EDGE_T_TOL
}

fn is_edge_pi(t0: f64) -> bool {
    (t0 - PI).abs() < EDGE_T_TOL
}

fn is_edge(t0: f64) -> bool {
    is_edge_zero(t0) || is_edge_pi(t0)
}

// ======================================================================
// Classification
// ======================================================================

/// Nature of a multiple point of the discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Edge point whose monodromy is diagonalizable: the expansion needs no
    /// special handling.
    RegularMultiple,
    /// Interior multiple point: `alpha` vanishes inside the band.
    SpectralSingularity,
    /// Edge point with a Jordan-block monodromy: the divergence cancels
    /// only in the paired two-band combination.
    EssentialSpectralSingularity,
}

impl Classification {
    /// Stable machine-readable tag (report files).
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::RegularMultiple => "regular_multiple",
            Classification::SpectralSingularity => "spectral_singularity",
            Classification::EssentialSpectralSingularity => "essential_spectral_singularity",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The classification rule itself, as a pure function of position and
/// geometric multiplicity.
///
/// Interior multiple points are spectral singularities regardless of the
/// second argument (a two-dimensional eigenspace would force the monodromy
/// to be `e^{i t0} * Identity`, whose determinant `e^{2 i t0} = 1` pins
/// `t0` to an edge, so interior points always carry a Jordan block).
pub fn classification_for(t0: f64, geometric_multiplicity: u8) -> Classification {
    if !is_edge(t0) {
        Classification::SpectralSingularity
    } else if geometric_multiplicity == 1 {
        Classification::EssentialSpectralSingularity
    } else {
        Classification::RegularMultiple
    }
}

/// Dimension of the `H_{t0}` eigenspace at a periodic (`t0 = 0`) or
/// antiperiodic (`t0 = pi`) eigenvalue: 2 when both monodromy
/// off-diagonals `phi(1)`, `theta'(1)` vanish (within [`gm_tol`]), else 1.
///
/// # Errors
/// [`Error::InvalidConfig`] — `t0` is not an edge quasimomentum, or
/// `F(lambda0)` is not at the matching endpoint `±2`.
pub fn geometric_multiplicity(
    q: &Potential,
    lambda0: Complex64,
    t0: f64,
    tol: f64,
) -> Result<u8> {
    let target = if is_edge_zero(t0) {
        2.0
    } else if is_edge_pi(t0) {
        -2.0
    } else {
        return Err(Error::InvalidConfig(format!(
            "geometric multiplicity is defined at periodic/antiperiodic points; t0 = {t0} \
             is interior"
        )));
    };
    let pair = integrate_fundamental(q, lambda0, tol)?;
    let f = pair.discriminant();
    let defect = (f - Complex64::new(target, 0.0)).norm();
    if defect > 1e-6 * (1.0 + lambda0.norm()) {
        return Err(Error::InvalidConfig(format!(
            "lambda0 = {lambda0} is not a {} eigenvalue: F = {f} (defect {defect:.3e})",
            if target > 0.0 { "periodic" } else { "antiperiodic" },
        )));
    }
    let thr = gm_tol(lambda0);
    Ok(if pair.phi1.norm() <= thr && pair.dtheta1.norm() <= thr {
        2
    } else {
        1
    })
}

// ======================================================================
// Approach ladders
// ======================================================================

/// Quasimomentum node at distance `d` from `t0`, steered toward the
/// interior of `(0, 2 pi) \ {pi}` so located points stay off the
/// exceptional set.
fn approach_node(t0: f64, d: f64) -> f64 {
    debug_assert!(d > 0.0 && d <= 0.1);
    let t = if t0.abs() < EDGE_T_TOL {
        d
    } else if (TAU - t0).abs() < EDGE_T_TOL {
        TAU - d
    } else if is_edge_pi(t0) {
        PI - d
    } else if t0 < PI {
        if t0 <= PI / 2.0 {
            t0 + d
        } else {
            t0 - d
        }
    } else if t0 <= 1.5 * PI {
        t0 + d
    } else {
        t0 - d
    };
    // Model rungs walk below `DELTA_GUARD` on purpose (they never locate
    // roots there); only strict interior membership is required.
    debug_assert!(t > 0.0 && t < TAU && t != PI);
    t
}

/// Least-squares cubic through `(s_i, lambda_i)` via normal equations
/// (real Gram matrix, complex right-hand side). With `pin = Some(l0)` the
/// constant term is fixed at `l0` and only the powers `s..s^3` are fitted.
fn fit_cubic(s: &[f64], lam: &[Complex64], pin: Option<Complex64>) -> Result<[Complex64; 4]> {
    debug_assert!(s.len() == lam.len() && s.len() >= 4);
    let lo = usize::from(pin.is_some());
    let shift = pin.unwrap_or_default();
    let mut g = [[0.0_f64; 4]; 4];
    let mut b = [Complex64::default(); 4];
    for (&si, &li) in s.iter().zip(lam) {
        let mut pw = [1.0_f64; 7];
        for j in 1..7 {
            pw[j] = pw[j - 1] * si;
        }
        for p in lo..4 {
            b[p] += (li - shift) * pw[p];
            for q in lo..4 {
                g[p][q] += pw[p + q];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the active block.
    for col in lo..4 {
        let piv = (col..4)
            .max_by(|&i, &j| g[i][col].abs().partial_cmp(&g[j][col].abs()).unwrap())
            .unwrap();
        if g[piv][col].abs() < 1e-300 {
            return Err(Error::RootNotFound(
                "degenerate normal equations in the branch model fit".into(),
            ));
        }
        g.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = g[row][col] / g[col][col];
            for c2 in col..4 {
                g[row][c2] -= f * g[col][c2];
            }
            b[row] -= b[col] * f;
        }
    }
    let mut a = [Complex64::default(); 4];
    for row in (lo..4).rev() {
        let mut acc = b[row];
        for c2 in row + 1..4 {
            acc -= a[c2] * g[row][c2];
        }
        a[row] = acc / g[row][row];
    }
    a[0] += shift;
    Ok(a)
}

/// Newton-refine the zero of `F'` nearest `seed` (simple zeros converge
/// quadratically; `F''` comes from the second variational system, so the
/// refinement carries none of the square-root accuracy loss of locating a
/// branch near its merge). Returns `None` when no critical point lies
/// within `radius` of the seed or Newton fails to settle.
fn refine_critical(
    q: &Potential,
    seed: Complex64,
    radius: f64,
    tol: f64,
) -> Result<Option<Complex64>> {
    let mut z = seed;
    for _ in 0..12 {
        let (pair, f2) = fundamental_with_second_derivative(q, z, tol)?;
        let f1 = pair
            .discriminant_dlambda()
            .expect("second-derivative run fills first derivatives");
        if f2.norm() < 1e-300 {
            return Ok(None);
        }
        let step = f1 / f2;
        z -= step;
        if (z - seed).norm() > radius {
            return Ok(None);
        }
        if step.norm() <= 1e-12 * (1.0 + z.norm()) {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

/// Power-law fit of `|alpha|` against the distance to `t0`.
#[derive(Debug, Clone)]
pub struct ExponentFit {
    /// Fitted exponent: `|alpha| ~ dist^beta` on the converged tail.
    pub beta: f64,
    /// Largest deviation of a tail slope from `beta`.
    pub residual: f64,
    /// Tail slopes agree within [`INCONCLUSIVE_SPREAD`] and the model
    /// route matches the directly located one within
    /// [`MODEL_DEFECT_TOL`].
    pub conclusive: bool,
    /// Largest relative raw-vs-model `alpha` disagreement on the overlap
    /// rungs.
    pub model_defect: f64,
    /// Ladder distances, descending.
    pub dists: Vec<f64>,
    /// `|alpha|` on each rung.
    pub alphas: Vec<f64>,
    /// Branch-model eigenvalue limit at `t0` (the fitted constant term).
    pub lambda_limit: Complex64,
}

impl ExponentFit {
    /// Singular-decay test used for the `S` sets.
    pub fn is_singular(&self) -> bool {
        self.conclusive && self.beta >= 1.0 - FIT_SLACK
    }
}

/// Measure the decay exponent of `|alpha|` along branch `k` approaching
/// `t0`, on the dyadic ladder `w * 2^-j`.
///
/// Near a multiple point the band is a quadratic branch point of the
/// `t <-> lambda` correspondence, so root-locating the eigenvalue costs
/// the square root of the integration accuracy and dies well above the
/// decay's crossover scale for the weaker (higher-index) singularities.
/// The branch itself, however, is analytic in the distance `d` through
/// the merge (the two roots of `F(lambda) = 2 cos t` split linearly with
/// no half-powers), so the ladder:
///
/// 1. locates the branch at ten geometric nodes on `[w/8, w]`, where
///    location is reliable;
/// 2. fits a cubic `lambda(d)` and continues it below `w/8`;
/// 3. evaluates monodromy, eigenfunctions and `alpha` at the model
///    eigenvalues — quantities that are all *smooth* in `lambda`, so they
///    lose no accuracy — down to a foot of at most [`LADDER_FOOT_MIN`];
/// 4. cross-checks the located and model routes on the rungs where both
///    are trustworthy (`model_defect`).
///
/// The exponent is the mean of the last three pairwise slopes
/// `log2(alpha_j / alpha_{j+1})`: `alpha` may plateau before the
/// asymptotic power law takes over (the crossover scale is set by the
/// size of the monodromy off-diagonals at the multiple point), so only
/// the converged tail is averaged, and the fit is `conclusive` when those
/// slopes agree within [`INCONCLUSIVE_SPREAD`].
///
/// # Errors
/// * [`Error::InvalidConfig`] — window width outside `[1e-3, 0.1]`.
/// * [`Error::BranchCrossing`] — a warm step left the branch.
/// * Propagates location/integration failures.
pub fn alpha_exponent(
    q: &Potential,
    k: i32,
    t0: f64,
    w: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<ExponentFit> {
    if !(1e-3..=0.1).contains(&w) {
        return Err(Error::InvalidConfig(format!(
            "exponent-ladder window w = {w} must lie in [1e-3, 0.1]"
        )));
    }
    let depth = ((w / LADDER_FOOT_MIN).log2().floor() as usize).min(LADDER_DEPTH);

    // March to the window, then through the ten fit nodes w * 2^(-i/3),
    // i = 0..=9 (so the dyadic rungs 0..=3 land exactly on fit nodes).
    let mut prev: Option<(f64, DiscriminantValue)> = None;
    let mut d = 0.08_f64.max(w);
    while d > w * (1.0 + 1e-12) {
        locate_warm(q, k, approach_node(t0, d), &mut prev, tol)?;
        d = (0.5 * d).max(w);
    }
    let mut fit_s = Vec::with_capacity(10);
    let mut fit_lam = Vec::with_capacity(10);
    let mut raw_alpha = [f64::NAN; 4];
    for i in 0..10_i32 {
        let di = if i % 3 == 0 {
            w * 0.5_f64.powi(i / 3)
        } else {
            w * 2.0_f64.powf(-f64::from(i) / 3.0)
        };
        let t = approach_node(t0, di);
        let disc = locate_warm(q, k, t, &mut prev, tol)?;
        fit_s.push(di / w);
        fit_lam.push(disc.lambda);
        if i % 3 == 0 {
            let pair = bloch::pair_unchecked(q, &disc, k, t, grid, tol)?;
            raw_alpha[(i / 3) as usize] = pair.alpha.norm();
        }
    }
    let mut coeffs = fit_cubic(&fit_s, &fit_lam, None)?;
    // The unconstrained constant term carries the fit's truncation error
    // (~1e-6), which at the smallest rungs rivals the distance to the
    // branch limit itself. When the limit is an actual critical point of
    // F, Newton on F' recovers it to ~1e-9; pin the model there so the
    // foot of the ladder measures the decay and not the fit bias.
    let radius = 3e-5 * (1.0 + coeffs[0].norm());
    if let Some(lam0) = refine_critical(q, coeffs[0], radius, tol)? {
        coeffs = fit_cubic(&fit_s, &fit_lam, Some(lam0))?;
    }
    let model = |dd: f64| {
        let s = dd / w;
        ((coeffs[3] * s + coeffs[2]) * s + coeffs[1]) * s + coeffs[0]
    };

    // Dyadic rungs on the model branch.
    let mut dists = Vec::with_capacity(depth + 1);
    let mut alphas = Vec::with_capacity(depth + 1);
    let mut model_defect = 0.0_f64;
    for j in 0..=depth {
        let dj = w * 0.5_f64.powi(j as i32);
        let disc = hill_discriminant(q, model(dj), tol)?;
        let t = approach_node(t0, dj);
        let pair = bloch::pair_unchecked(q, &disc, k, t, grid, tol)?;
        let am = pair.alpha.norm();
        if j < 4 {
            let raw = raw_alpha[j];
            if raw.is_finite() && raw.max(am) > 0.0 {
                model_defect = model_defect.max((am - raw).abs() / raw.max(am));
            }
        }
        dists.push(dj);
        alphas.push(am);
    }

    let slopes: Vec<f64> = alphas
        .windows(2)
        .map(|w2| (w2[0] / w2[1]).ln() / std::f64::consts::LN_2)
        .collect();
    let tail = &slopes[slopes.len() - 3..];
    let beta = tail.iter().sum::<f64>() / tail.len() as f64;
    let residual = tail
        .iter()
        .map(|s| (s - beta).abs())
        .fold(0.0_f64, f64::max);
    let conclusive =
        beta.is_finite() && residual <= INCONCLUSIVE_SPREAD && model_defect <= MODEL_DEFECT_TOL;
    Ok(ExponentFit {
        beta,
        residual,
        conclusive,
        model_defect,
        dists,
        alphas,
        lambda_limit: coeffs[0],
    })
}

// ======================================================================
// Point classification
// ======================================================================

/// A fully classified multiple point.
#[derive(Debug, Clone)]
pub struct SingularityRecord {
    /// Location of the multiple point.
    pub lambda0: Complex64,
    /// `F(lambda0)`.
    pub f0: Complex64,
    /// Quasimomentum in `[0, pi]` (the mirror `2 pi - t0` is implied).
    pub t0: f64,
    /// Root order of `F - F0` at `lambda0`.
    pub algebraic_multiplicity: usize,
    /// Eigenspace dimension (1 = Jordan block, 2 = diagonalizable).
    pub geometric_multiplicity: u8,
    /// Outcome of the dichotomy.
    pub classification: Classification,
    /// Measured `|alpha|` decay on the lowest involved band.
    pub alpha_exponent: Option<ExponentFit>,
    /// Band indices whose traced eigenvalues converge to `lambda0`.
    pub involved_bands: Vec<i32>,
    /// True when the lowest involved index is `<=` [`LOW_INDEX_BOUND`]:
    /// the asymptotic classification theorems do not reach this far down,
    /// so the record rests on the numerics alone.
    pub low_index_unproven: bool,
}

/// Band indices whose branches converge to `lambda0` as `t` approaches
/// `t0`, found by marching nearby free-numbering candidates inward and
/// extrapolating linearly to the limit.
fn involved_bands(q: &Potential, lambda0: Complex64, t0: f64, tol: f64) -> Result<Vec<i32>> {
    let rho = (lambda0 - q.mean_shift()).sqrt().norm();
    let mut cands: Vec<i32> = Vec::new();
    if is_edge_zero(t0) {
        let k0 = (rho / TAU).round() as i32;
        for d in -1..=1 {
            cands.push(k0 + d);
            cands.push(-(k0 + d));
        }
    } else if is_edge_pi(t0) {
        let k0 = ((rho / PI - 1.0) / 2.0).round() as i32;
        for d in -1..=1 {
            cands.push(k0 + d);
            cands.push(-(k0 + d) - 1);
        }
    } else {
        let kp = ((rho - t0) / TAU).round() as i32;
        let km = ((-rho - t0) / TAU).round() as i32;
        for d in -1..=1 {
            cands.push(kp + d);
            cands.push(km + d);
        }
    }
    cands.sort_unstable();
    cands.dedup();

    let tol_match = 1e-4 * (1.0 + lambda0.norm());
    let mut involved = Vec::new();
    for &k in &cands {
        if let Ok(limit) = branch_limit(q, k, t0, tol) {
            if (limit - lambda0).norm() <= tol_match {
                involved.push(k);
            }
        }
    }
    if involved.is_empty() {
        return Err(Error::RootNotFound(format!(
            "no traced band converges to lambda0 = {lambda0} as t -> {t0}: band numbering \
             is inconsistent with the multiple-point table"
        )));
    }
    Ok(involved)
}

/// Extrapolated limit of branch `k` as `t -> t0` (marched from distance
/// 0.04 down to 0.01, then `2 lambda(0.01) - lambda(0.02)`).
fn branch_limit(q: &Potential, k: i32, t0: f64, tol: f64) -> Result<Complex64> {
    let mut prev: Option<(f64, DiscriminantValue)> = None;
    let mut last_two = [Complex64::default(); 2];
    for &dist in &[0.04, 0.02, 0.01] {
        let disc = locate_warm(q, k, approach_node(t0, dist), &mut prev, tol)?;
        last_two = [last_two[1], disc.lambda];
    }
    Ok(2.0 * last_two[1] - last_two[0])
}

/// Classify a multiple point: dichotomy by position and geometric
/// multiplicity, the bands meeting it, and the measured `alpha` decay.
///
/// # Errors
/// * [`Error::InvalidConfig`] — the point has `F0` off `[-2, 2]` (no
///   quasimomentum; it never meets the spectrum of the line operator).
/// * [`Error::RootNotFound`] — no traced band converges to `lambda0`.
/// * Propagates integration and ladder failures.
pub fn classify_point(
    q: &Potential,
    cp: &CriticalPoint,
    grid: &GridSpec,
    tol: f64,
) -> Result<SingularityRecord> {
    let t0 = cp.t0.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "multiple point at lambda0 = {} has F0 = {} off the band range [-2, 2]; it \
             carries no quasimomentum and is not a spectral point",
            cp.lambda0, cp.f0
        ))
    })?;
    let edge = is_edge(t0);
    let gm = if edge {
        geometric_multiplicity(q, cp.lambda0, t0, tol)?
    } else {
        1
    };
    let involved = involved_bands(q, cp.lambda0, t0, tol)?;
    let k_fit = involved
        .iter()
        .copied()
        .min_by_key(|&k| (k.unsigned_abs(), k < 0))
        .expect("involved_bands is nonempty");
    let fit = alpha_exponent(q, k_fit, t0, DEFAULT_H, grid, tol)?;
    let mut classification = classification_for(t0, gm);
    // Nonzero off-diagonal end values also arise *between* the two simple
    // eigenvalues of a barely-open gap, where integration noise cannot
    // resolve `|F0| - 2` and the extremum masquerades as an on-spectrum
    // point with a Jordan-looking monodromy (for real potentials every
    // sufficiently narrow gap lands here). The measured pair-angle decay
    // separates the cases: a genuine Jordan edge point forces
    // `|alpha| -> 0` along the involved bands, while bands beside a
    // barely-open gap keep `|alpha|` bounded below. A conclusive no-decay
    // fit therefore downgrades the point to a regular multiple point.
    if classification == Classification::EssentialSpectralSingularity
        && fit.conclusive
        && fit.beta < NO_DECAY_BETA
    {
        classification = Classification::RegularMultiple;
    }
    let low_index_unproven = edge
        && involved
            .iter()
            .map(|k| k.unsigned_abs())
            .min()
            .expect("nonempty")
            <= LOW_INDEX_BOUND as u32;
    Ok(SingularityRecord {
        lambda0: cp.lambda0,
        f0: cp.f0,
        t0,
        algebraic_multiplicity: cp.algebraic_multiplicity,
        geometric_multiplicity: gm,
        classification,
        alpha_exponent: Some(fit),
        involved_bands: involved,
        low_index_unproven,
    })
}

// ======================================================================
// Projection-norm growth
// ======================================================================

/// Supremum of `1 / |alpha_k(t)|` over a quasimomentum interval — the
/// operator norm of the rank-one spectral projection onto the band-`k`
/// pair. Sampled on `samples` uniform nodes, then refined twice around the
/// running argmax. Returns `f64::INFINITY` when `|alpha|` underflows
/// `1e-14` (an exact singular point inside the interval).
///
/// # Errors
/// [`Error::InvalidConfig`] — the interval leaves `(0, 2 pi)` or has fewer
/// than two samples. Propagates location/integration failures.
pub fn projection_norm(
    q: &Potential,
    k: i32,
    interval: (f64, f64),
    samples: usize,
    grid: &GridSpec,
    tol: f64,
) -> Result<f64> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite()) || a <= 0.0 || b <= a || b >= TAU {
        return Err(Error::InvalidConfig(format!(
            "projection-norm interval [{a}, {b}] must sit inside (0, 2 pi)"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidConfig(
            "projection norm needs at least two sample nodes".into(),
        ));
    }

    let keep = |t: f64| {
        t > 2.0 * DELTA_GUARD
            && t < TAU - 2.0 * DELTA_GUARD
            && (t - PI).abs() > 2.0 * DELTA_GUARD
    };
    let sweep = |lo: f64, hi: f64, n: usize| -> Result<(f64, f64)> {
        let mut sup = 0.0_f64;
        let mut arg = lo;
        let mut prev: Option<(f64, DiscriminantValue)> = None;
        for i in 0..n {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            if !keep(t) {
                continue;
            }
            let disc = locate_warm(q, k, t, &mut prev, tol)?;
            let pair = bloch::pair_unchecked(q, &disc, k, t, grid, tol)?;
            let am = pair.alpha.norm();
            if am < 1e-14 {
                return Ok((f64::INFINITY, t));
            }
            if 1.0 / am > sup {
                sup = 1.0 / am;
                arg = t;
            }
        }
        Ok((sup, arg))
    };

    let (mut sup, mut arg) = sweep(a, b, samples)?;
    if sup.is_infinite() {
        return Ok(sup);
    }
    let mut width = (b - a) / (samples - 1) as f64;
    for _ in 0..2 {
        let lo = (arg - width).max(a);
        let hi = (arg + width).min(b);
        let (s, t_at) = sweep(lo, hi, 9)?;
        if s.is_infinite() {
            return Ok(s);
        }
        sup = sup.max(s);
        arg = t_at;
        width = (hi - lo) / 8.0;
    }
    Ok(sup)
}

// ======================================================================
// Index sets
// ======================================================================

/// Bands sharing one singular edge limit (their windows must be summed
/// before the excision limit is taken).
#[derive(Debug, Clone)]
pub struct KGroup {
    /// Common extrapolated eigenvalue at the edge.
    pub lambda0: Complex64,
    /// Member band indices.
    pub members: Vec<i32>,
}

/// Low-index bookkeeping for the paired expansion at window width `h`.
///
/// `N` sets collect the bands whose edge groups are not safely isolated
/// (plus the always-included lowest groups); `S` sets are the `N` members
/// with singular `alpha` decay; `K` groups partition each `S` set by the
/// shared limit eigenvalue. Every index above the `N` thresholds is
/// covered by the pairing map: `{k, -k}` at the periodic edge,
/// `{k, -(k+1)}` at the antiperiodic edge.
#[derive(Debug, Clone)]
pub struct IndexSets {
    /// Window half-width the sets were built for.
    pub h: f64,
    /// Largest band index considered.
    pub k_max: i32,
    /// Isolation threshold at the periodic edge (group index).
    pub n0: i32,
    /// Isolation threshold at the antiperiodic edge (group index).
    pub npi: i32,
    /// `{-n0, ..., n0}`.
    pub set_n0: Vec<i32>,
    /// `{-(npi+1), ..., npi}` (members of groups `0..=npi`).
    pub set_npi: Vec<i32>,
    /// Singular members of `set_n0`.
    pub s0h: Vec<i32>,
    /// Singular members of `set_npi`.
    pub spih: Vec<i32>,
    /// Exponent fits for every member of `set_n0`.
    pub fits_0: Vec<(i32, ExponentFit)>,
    /// Exponent fits for every member of `set_npi`.
    pub fits_pi: Vec<(i32, ExponentFit)>,
    /// Partition of `s0h` by limit eigenvalue.
    pub k_groups_0: Vec<KGroup>,
    /// Partition of `spih` by limit eigenvalue.
    pub k_groups_pi: Vec<KGroup>,
    /// `(k, -k)` for `n0 < k <= k_max`.
    pub pair_map_0: Vec<(i32, i32)>,
    /// `(k, -(k+1))` for `npi < k <= k_max`.
    pub pair_map_pi: Vec<(i32, i32)>,
}

/// Build the index sets for window width `h` and band cutoff `k_max`.
///
/// Isolation of the edge group `m` is tested at `t in {h, h/2}` against
/// every other tabulated branch, with gap tolerance `pi * m` at the
/// periodic edge and `pi * (2m + 1) / 2` at the antiperiodic edge (a
/// quarter of the leading free gap growth). The thresholds floor at 0:
/// the lowest groups (`{0}` at the periodic edge, `{0, -1}` at the
/// antiperiodic edge) are always examined individually, because the
/// asymptotic pairing propositions only cover indices above the
/// thresholds.
///
/// # Errors
/// * [`Error::InvalidConfig`] — `h` outside `(0, 1/32)`, `k_max < 1`, a
///   critical point's `t0` within `1e-6` of a window boundary, or the top
///   group not isolated (increase `k_max`).
/// * Propagates location, pairing, and ladder failures.
pub fn build_index_sets(
    q: &Potential,
    h: f64,
    k_max: i32,
    crits: &[CriticalPoint],
    grid: &GridSpec,
    tol: f64,
) -> Result<IndexSets> {
    if !(h >= 1e-3 && h < 1.0 / 32.0) {
        return Err(Error::InvalidConfig(format!(
            "window half-width h = {h} must lie in [1e-3, 1/32) (the lower end keeps the \
             exponent ladders above the location noise floor)"
        )));
    }
    if k_max < 1 {
        return Err(Error::InvalidConfig("k_max must be at least 1".into()));
    }
    for cp in crits {
        if let Some(t0) = cp.t0 {
            for boundary in [h, PI - h] {
                if (t0 - boundary).abs() < 1e-6 {
                    return Err(Error::InvalidConfig(format!(
                        "critical point with t0 = {t0} sits on a window boundary (h = {h}); \
                         perturb h"
                    )));
                }
            }
        }
    }

    // Eigenvalue tables over j in [-k_max - 1, k_max] at the four probe
    // quasimomenta. The extra negative index completes the antiperiodic
    // groups {m, -(m+1)} up to m = k_max.
    let js: Vec<i32> = (-k_max - 1..=k_max).collect();
    let probes_0 = [h, h / 2.0];
    let probes_pi = [PI - h, PI - h / 2.0];
    let mut table_0 = vec![[Complex64::default(); 2]; js.len()];
    let mut table_pi = vec![[Complex64::default(); 2]; js.len()];
    for (ji, &j) in js.iter().enumerate() {
        for (probes, table) in [(&probes_0, &mut table_0), (&probes_pi, &mut table_pi)] {
            let mut prev: Option<(f64, DiscriminantValue)> = None;
            for (pi_idx, &t) in probes.iter().enumerate() {
                table[ji][pi_idx] = locate_warm(q, j, t, &mut prev, tol)?.lambda;
            }
        }
    }
    let idx_of = |j: i32| (j + k_max + 1) as usize;

    let isolated = |table: &Vec<[Complex64; 2]>, members: &[i32], gap: f64| -> bool {
        for col in 0..2 {
            for &g in members {
                let gv = table[idx_of(g)][col];
                for &j in &js {
                    if members.contains(&j) {
                        continue;
                    }
                    if (table[idx_of(j)][col] - gv).norm() <= gap {
                        return false;
                    }
                }
            }
        }
        true
    };

    let mut n0 = 0;
    for m in 1..=k_max {
        if !isolated(&table_0, &[m, -m], PI * m as f64) {
            n0 = m;
        }
    }
    if n0 == k_max {
        return Err(Error::InvalidConfig(format!(
            "k_max = {k_max} too small: the top periodic-edge group {{{k_max}, -{k_max}}} is \
             not isolated at t = h"
        )));
    }
    let mut npi = 0;
    for m in 0..=k_max {
        if !isolated(&table_pi, &[m, -m - 1], PI * (2.0 * m as f64 + 1.0) / 2.0) {
            npi = m;
        }
    }
    if npi == k_max {
        return Err(Error::InvalidConfig(format!(
            "k_max = {k_max} too small: the top antiperiodic-edge group {{{k_max}, -{}}} is \
             not isolated at t = pi - h",
            k_max + 1
        )));
    }

    let set_n0: Vec<i32> = (-n0..=n0).collect();
    let set_npi: Vec<i32> = (-npi - 1..=npi).collect();

    let mut fits_0 = Vec::with_capacity(set_n0.len());
    for &k in &set_n0 {
        fits_0.push((k, alpha_exponent(q, k, 0.0, h, grid, tol)?));
    }
    let mut fits_pi = Vec::with_capacity(set_npi.len());
    for &k in &set_npi {
        fits_pi.push((k, alpha_exponent(q, k, PI, h, grid, tol)?));
    }
    let singular_of = |fits: &[(i32, ExponentFit)]| -> Vec<i32> {
        fits.iter()
            .filter(|(_, f)| f.is_singular())
            .map(|(k, _)| *k)
            .collect()
    };
    let s0h = singular_of(&fits_0);
    let spih = singular_of(&fits_pi);

    let group_of = |s: &[i32], fits: &[(i32, ExponentFit)]| -> Vec<KGroup> {
        let mut groups: Vec<KGroup> = Vec::new();
        for &k in s {
            let lam = fits
                .iter()
                .find(|(j, _)| *j == k)
                .expect("S is a subset of the fitted set")
                .1
                .lambda_limit;
            match groups
                .iter_mut()
                .find(|g| (g.lambda0 - lam).norm() <= 1e-4 * (1.0 + lam.norm()))
            {
                Some(g) => g.members.push(k),
                None => groups.push(KGroup {
                    lambda0: lam,
                    members: vec![k],
                }),
            }
        }
        groups
    };
    let k_groups_0 = group_of(&s0h, &fits_0);
    let k_groups_pi = group_of(&spih, &fits_pi);

    let pair_map_0: Vec<(i32, i32)> = (n0 + 1..=k_max).map(|k| (k, -k)).collect();
    let pair_map_pi: Vec<(i32, i32)> = (npi + 1..=k_max).map(|k| (k, -k - 1)).collect();

    Ok(IndexSets {
        h,
        k_max,
        n0,
        npi,
        set_n0,
        set_npi,
        s0h,
        spih,
        fits_0,
        fits_pi,
        k_groups_0,
        k_groups_pi,
        pair_map_0,
        pair_map_pi,
    })
}

// ======================================================================
// Tests
// ======================================================================
