//! Fundamental solutions of the Hill equation and their derivatives.
//!
//! For the operator `-y'' + q(x) y = lambda y` on `[0, 1]` this module
//! produces the canonical fundamental pair
//!
//! ```text
//!   theta(0, lambda) = 1,  theta'(0, lambda) = 0,
//!   phi(0, lambda)   = 0,  phi'(0, lambda)   = 1,
//! ```
//!
//! returning their end-values at `x = 1`, optional derivatives with respect
//! to the spectral parameter, and optional dense samples on `[0, 1]`.
//! Everything downstream (discriminant, Bloch eigenfunctions, expansions)
//! is assembled from these four functions.
//!
//! Three levels of the variational hierarchy are integrated as one complex
//! first-order system (`r(x) = q(x) - lambda`):
//!
//! ```text
//!   y''          = r y                    (the equation itself)
//!   (d_l y)''    = r (d_l y) - y          (lambda-derivative)
//!   (d_l^2 y)''  = r (d_l^2 y) - 2 d_l y  (second lambda-derivative)
//! ```
//!
//! Derivatives in `lambda` are computed through these variational systems —
//! never by finite differences — because they end up in denominators of
//! normalization constants and need full precision.
//!
//! The potential's mean is handled as a spectral shift: the ODE always uses
//! the mean-zero part of `q` at the shifted parameter `lambda - mean`, which
//! is mathematically identical to using the full `q` at `lambda`.
//!
//! For the free operator (`q = 0`) the propagator is known in closed form
//! (`theta = cos(w x)`, `phi = sin(w x)/w`, `w = sqrt(lambda)`), so the
//! public entry points evaluate it directly instead of integrating an ODE
//! whose exact solution is available; the ODE path remains available
//! crate-internally and is cross-checked against the closed form in tests.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::potential::Potential;

/// Spectral parameters larger than this are rejected up front: solutions
/// grow like `exp(|Im sqrt(lambda)|)` and the double-precision integration
/// would silently lose all accuracy.
pub const LAMBDA_OVERFLOW_GUARD: f64 = 1e8;

/// Floor of the enforced Wronskian identity `theta phi' - phi theta' = 1`.
pub const WRONSKIAN_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

// ======================================================================
// Result types
// ======================================================================

/// Dense samples of the fundamental pair on an ascending grid in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SolutionSamples {
    /// Sample abscissae (ascending, inside `[0, 1]`).
    pub xs: Vec<f64>,
    /// `theta(x_i)`.
    pub theta: Vec<Complex64>,
    /// `theta'(x_i)`.
    pub dtheta: Vec<Complex64>,
    /// `phi(x_i)`.
    pub phi: Vec<Complex64>,
    /// `phi'(x_i)`.
    pub dphi: Vec<Complex64>,
}

/// End-values (and optional lambda-derivatives / samples) of the canonical
/// fundamental pair at `x = 1`.
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    /// Spectral parameter of the full operator (mean shift included).
    pub lambda: Complex64,
    /// `theta(1, lambda)`.
    pub theta1: Complex64,
    /// `phi(1, lambda)`.
    pub phi1: Complex64,
    /// `theta'(1, lambda)` (x-derivative).
    pub dtheta1: Complex64,
    /// `phi'(1, lambda)` (x-derivative).
    pub dphi1: Complex64,
    /// `d/d lambda` of `theta(1, lambda)`, if requested.
    pub dlambda_theta1: Option<Complex64>,
    /// `d/d lambda` of `phi(1, lambda)`, if requested.
    pub dlambda_phi1: Option<Complex64>,
    /// `d/d lambda` of `theta'(1, lambda)`, if requested.
    pub dlambda_dtheta1: Option<Complex64>,
    /// `d/d lambda` of `phi'(1, lambda)`, if requested.
    pub dlambda_dphi1: Option<Complex64>,
    /// Dense samples on `[0, 1]`, if requested.
    pub samples: Option<SolutionSamples>,
    /// Local error tolerance enforced per integration step.
    pub tol_used: f64,
}

impl FundamentalPair {
    /// The Hill discriminant `F(lambda) = theta(1) + phi'(1)`.
    pub fn discriminant(&self) -> Complex64 {
        self.theta1 + self.dphi1
    }

    /// `F'(lambda)`, when the lambda-derivative fields are present.
    pub fn discriminant_dlambda(&self) -> Option<Complex64> {
        Some(self.dlambda_theta1? + self.dlambda_dphi1?)
    }

    /// `|theta(1) phi'(1) - phi(1) theta'(1) - 1|`: deviation from the exact
    /// Wronskian identity, a direct measure of integration quality.
    pub fn wronskian_defect(&self) -> f64 {
        (self.theta1 * self.dphi1 - self.phi1 * self.dtheta1 - ONE).norm()
    }

    /// Monodromy matrix `[[theta(1), phi(1)], [theta'(1), phi'(1)]]` acting
    /// on Cauchy data `(y(0), y'(0))`.
    pub fn monodromy_matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.theta1, self.phi1], [self.dtheta1, self.dphi1]]
    }
}

// ======================================================================
// Fast potential evaluator for the ODE right-hand side
// ======================================================================

/// Coefficients of the mean-zero part laid out for Horner-style evaluation:
/// one `sincos` per point irrespective of mode count.
struct QEval {
    /// `pos[p-1]` = coefficient of `e^{i 2 pi p x}`, `p = 1..=pmax`.
    pos: Vec<Complex64>,
    /// `neg[p-1]` = coefficient of `e^{-i 2 pi p x}`.
    neg: Vec<Complex64>,
}

impl QEval {
    fn new(q: &Potential) -> Self {
        let pmax = q.max_mode().max(0) as usize;
        let mut pos = vec![ZERO; pmax];
        let mut neg = vec![ZERO; pmax];
        for &(m, c) in q.modes() {
            if m > 0 {
                pos[(m - 1) as usize] = c;
            } else {
                neg[(-m - 1) as usize] = c;
            }
        }
        QEval { pos, neg }
    }

    #[inline]
    fn eval(&self, x: f64) -> Complex64 {
        if self.pos.is_empty() && self.neg.is_empty() {
            return ZERO;
        }
        let angle = std::f64::consts::TAU * x;
        let (s, c) = angle.sin_cos();
        let z = Complex64::new(c, s);
        let zbar = z.conj();
        let mut zp = ONE;
        let mut zn = ONE;
        let mut acc = ZERO;
        for k in 0..self.pos.len().max(self.neg.len()) {
            zp *= z;
            zn *= zbar;
            if let Some(&cp) = self.pos.get(k) {
                acc += cp * zp;
            }
            if let Some(&cn) = self.neg.get(k) {
                acc += cn * zn;
            }
        }
        acc
    }
}

// ======================================================================
// Closed-form free propagator
// ======================================================================

/// `(theta, theta', phi, phi')` of the free equation `-y'' = mu y` at `x`,
/// using series near `mu = 0` to avoid the removable singularity in
/// `sin(w x)/w`.
fn free_end_values(mu: Complex64, x: f64) -> [Complex64; 4] {
    if mu.norm() < 1e-6 {
        // theta = cos(w x) = 1 - mu x^2/2 + mu^2 x^4/24 - mu^3 x^6/720
        // phi   = sin(w x)/w = x (1 - mu x^2/6 + mu^2 x^4/120 - mu^3 x^6/5040)
        let x2 = x * x;
        let theta = ONE - mu * (x2 / 2.0) + mu * mu * (x2 * x2 / 24.0)
            - mu * mu * mu * (x2 * x2 * x2 / 720.0);
        let phi = (ONE - mu * (x2 / 6.0) + mu * mu * (x2 * x2 / 120.0)
            - mu * mu * mu * (x2 * x2 * x2 / 5040.0))
            * x;
        // theta' = -mu phi;  phi' = theta  (free-case identities)
        [theta, -mu * phi, phi, theta]
    } else {
        let w = mu.sqrt();
        let wx = w * x;
        let cos = wx.cos();
        let sin = wx.sin();
        [cos, -w * sin, sin / w, cos]
    }
}

/// Lambda-derivatives of the four free end-values at `x = 1`:
/// `d/d mu [cos w, -w sin w, sin(w)/w, cos w]` with `w = sqrt(mu)`.
fn free_dlambda_end_values(mu: Complex64) -> [Complex64; 4] {
    if mu.norm() < 1e-4 {
        let d_theta = -(ONE - mu / 6.0 + mu * mu / 120.0) * 0.5;
        let d_dtheta = -ONE + mu / 3.0 - mu * mu / 40.0;
        let d_phi = -ONE / 6.0 + mu / 60.0 - mu * mu / 1680.0;
        [d_theta, d_dtheta, d_phi, d_theta]
    } else {
        let w = mu.sqrt();
        let sin = w.sin();
        let cos = w.cos();
        let d_theta = -sin / (2.0 * w);
        let d_dtheta = -(sin + w * cos) / (2.0 * w);
        let d_phi = (w * cos - sin) / (2.0 * w * w * w);
        [d_theta, d_dtheta, d_phi, d_theta]
    }
}

/// `F''(lambda)` of the free discriminant `F = 2 cos sqrt(lambda)`.
fn free_discriminant_d2(mu: Complex64) -> Complex64 {
    if mu.norm() < 1e-4 {
        Complex64::new(1.0 / 6.0, 0.0) - mu / 60.0
    } else {
        let w = mu.sqrt();
        (w.sin() - w * w.cos()) / (2.0 * w * w * w)
    }
}

// ======================================================================
// Core integration
// ======================================================================

fn check_lambda(lambda: Complex64, mu: Complex64) -> Result<()> {
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::Integration(format!(
            "spectral parameter must be finite, got {lambda}"
        )));
    }
    if lambda.norm() > LAMBDA_OVERFLOW_GUARD || mu.norm() > LAMBDA_OVERFLOW_GUARD {
        return Err(Error::Integration(format!(
            "|lambda| = {:.3e} exceeds the overflow guard {LAMBDA_OVERFLOW_GUARD:.0e}",
            lambda.norm()
        )));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Integration(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    Ok(tol)
}

fn ode_options(tol: f64) -> OdeOptions {
    OdeOptions {
        rtol: tol,
        atol: tol * 1e-2,
        h0: None,
        max_step: 0.5,
        max_steps: 400_000,
    }
}

/// Wronskian tolerance consistent with the requested local error.
fn wronskian_bound(tol: f64) -> f64 {
    WRONSKIAN_TOL.max(200.0 * tol)
}

/// How much of the variational hierarchy to integrate.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Depth {
    /// `(theta, theta', phi, phi')` only.
    Values,
    /// Plus first lambda-derivatives.
    First,
    /// Plus second lambda-derivatives.
    Second,
}

/// Shared driver: integrates the requested depth of the hierarchy, checks
/// the Wronskian, assembles a [`FundamentalPair`], and returns the second
/// lambda-derivative end-values when `depth == Second`.
fn run(
    q: &Potential,
    lambda: Complex64,
    tol: f64,
    depth: Depth,
    xs: Option<&[f64]>,
) -> Result<(FundamentalPair, Option<[Complex64; 4]>)> {
    let tol = check_tol(tol)?;
    let mu = lambda - q.mean_shift();
    check_lambda(lambda, mu)?;

    if q.is_free() {
        return free_run(lambda, mu, tol, depth, xs);
    }

    let qe = QEval::new(q);
    let opts = ode_options(tol);
    let sample_xs = xs.unwrap_or(&[]);

    let (end, raw_samples, d2) = match depth {
        Depth::Values => {
            let y0 = [ONE, ZERO, ZERO, ONE];
            let rhs = |x: f64, y: &[Complex64; 4]| {
                let r = qe.eval(x) - mu;
                [y[1], r * y[0], y[3], r * y[2]]
            };
            let (end, samples) = integrate(rhs, 0.0, 1.0, y0, &opts, sample_xs)?;
            (end.to_vec(), samples.iter().map(|s| s.to_vec()).collect::<Vec<_>>(), None)
        }
        Depth::First => {
            let mut y0 = [ZERO; 8];
            y0[0] = ONE;
            y0[3] = ONE;
            let rhs = |x: f64, y: &[Complex64; 8]| {
                let r = qe.eval(x) - mu;
                [
                    y[1],
                    r * y[0],
                    y[3],
                    r * y[2],
                    y[5],
                    r * y[4] - y[0],
                    y[7],
                    r * y[6] - y[2],
                ]
            };
            let (end, samples) = integrate(rhs, 0.0, 1.0, y0, &opts, sample_xs)?;
            (end.to_vec(), samples.iter().map(|s| s.to_vec()).collect::<Vec<_>>(), None)
        }
        Depth::Second => {
            let mut y0 = [ZERO; 12];
            y0[0] = ONE;
            y0[3] = ONE;
            let rhs = |x: f64, y: &[Complex64; 12]| {
                let r = qe.eval(x) - mu;
                [
                    y[1],
                    r * y[0],
                    y[3],
                    r * y[2],
                    y[5],
                    r * y[4] - y[0],
                    y[7],
                    r * y[6] - y[2],
                    y[9],
                    r * y[8] - 2.0 * y[4],
                    y[11],
                    r * y[10] - 2.0 * y[6],
                ]
            };
            let (end, samples) = integrate(rhs, 0.0, 1.0, y0, &opts, sample_xs)?;
            let d2 = [end[8], end[9], end[10], end[11]];
            (
                end.to_vec(),
                samples.iter().map(|s| s.to_vec()).collect::<Vec<_>>(),
                Some(d2),
            )
        }
    };

    // State layout: [theta, theta', phi, phi', (lambda-derivatives...)]
    let mut pair = FundamentalPair {
        lambda,
        theta1: end[0],
        dtheta1: end[1],
        phi1: end[2],
        dphi1: end[3],
        dlambda_theta1: None,
        dlambda_phi1: None,
        dlambda_dtheta1: None,
        dlambda_dphi1: None,
        samples: None,
        tol_used: tol,
    };
    if depth != Depth::Values {
        pair.dlambda_theta1 = Some(end[4]);
        pair.dlambda_dtheta1 = Some(end[5]);
        pair.dlambda_phi1 = Some(end[6]);
        pair.dlambda_dphi1 = Some(end[7]);
    }
    if let Some(xs) = xs {
        pair.samples = Some(SolutionSamples {
            xs: xs.to_vec(),
            theta: raw_samples.iter().map(|s| s[0]).collect(),
            dtheta: raw_samples.iter().map(|s| s[1]).collect(),
            phi: raw_samples.iter().map(|s| s[2]).collect(),
            dphi: raw_samples.iter().map(|s| s[3]).collect(),
        });
    }

    let defect = pair.wronskian_defect();
    // Cancellation in theta1*dphi1 - phi1*dtheta1 scales with the square of
    // the solution magnitude; the enforceable bound must scale with it too.
    let max_end = [pair.theta1, pair.phi1, pair.dtheta1, pair.dphi1]
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    let bound = wronskian_bound(tol) * (1.0 + max_end)
        + 100.0 * f64::EPSILON * (1.0 + max_end * max_end);
    if !(defect <= bound) {
        return Err(Error::Integration(format!(
            "Wronskian defect {defect:.3e} exceeds {bound:.3e} at lambda = {lambda} \
             (solution quality insufficient at this tolerance)"
        )));
    }
    // Reorder d2 to [theta, theta', phi, phi'] layout already used above.
    let d2 = d2.map(|d| [d[0], d[1], d[2], d[3]]);
    Ok((pair, d2))
}

/// Closed-form branch of [`run`] for the free operator.
fn free_run(
    lambda: Complex64,
    mu: Complex64,
    tol: f64,
    depth: Depth,
    xs: Option<&[f64]>,
) -> Result<(FundamentalPair, Option<[Complex64; 4]>)> {
    let [theta1, dtheta1, phi1, dphi1] = free_end_values(mu, 1.0);
    let mut pair = FundamentalPair {
        lambda,
        theta1,
        phi1,
        dtheta1,
        dphi1,
        dlambda_theta1: None,
        dlambda_phi1: None,
        dlambda_dtheta1: None,
        dlambda_dphi1: None,
        samples: None,
        tol_used: tol,
    };
    if depth != Depth::Values {
        let [d_theta, d_dtheta, d_phi, d_dphi] = free_dlambda_end_values(mu);
        pair.dlambda_theta1 = Some(d_theta);
        pair.dlambda_dtheta1 = Some(d_dtheta);
        pair.dlambda_phi1 = Some(d_phi);
        pair.dlambda_dphi1 = Some(d_dphi);
    }
    if let Some(xs) = xs {
        let mut theta = Vec::with_capacity(xs.len());
        let mut dtheta = Vec::with_capacity(xs.len());
        let mut phi = Vec::with_capacity(xs.len());
        let mut dphi = Vec::with_capacity(xs.len());
        for &x in xs {
            let [th, dth, ph, dph] = free_end_values(mu, x);
            theta.push(th);
            dtheta.push(dth);
            phi.push(ph);
            dphi.push(dph);
        }
        pair.samples = Some(SolutionSamples {
            xs: xs.to_vec(),
            theta,
            dtheta,
            phi,
            dphi,
        });
    }
    let d2 = if depth == Depth::Second {
        // Only the discriminant's second derivative is consumed downstream;
        // attribute it entirely to the theta-component slot so that
        // d2_theta + d2_dphi = F''.
        let f2 = free_discriminant_d2(mu);
        Some([f2 * 0.5, ZERO, ZERO, f2 * 0.5])
    } else {
        None
    };
    Ok((pair, d2))
}

// ======================================================================
// Public entry points
// ======================================================================

/// Integrate the fundamental pair, returning end-values at `x = 1`.
///
/// # Arguments
/// * `tol` — local error tolerance per step (relative; absolute is `tol/100`).
///
/// # Errors
/// [`Error::Integration`] on step underflow, budget exhaustion, state
/// overflow, `|lambda|` beyond [`LAMBDA_OVERFLOW_GUARD`], or a Wronskian
/// defect exceeding `max(1e-9, 200 tol)`.
pub fn integrate_fundamental(q: &Potential, lambda: Complex64, tol: f64) -> Result<FundamentalPair> {
    run(q, lambda, tol, Depth::Values, None).map(|(p, _)| p)
}

/// Like [`integrate_fundamental`] but also fills the four
/// `dlambda_*` fields by integrating the first variational system.
pub fn integrate_with_lambda_derivative(
    q: &Potential,
    lambda: Complex64,
    tol: f64,
) -> Result<FundamentalPair> {
    run(q, lambda, tol, Depth::First, None).map(|(p, _)| p)
}

/// End-values plus dense samples of `(theta, theta', phi, phi')` on an
/// ascending grid `xs` inside `[0, 1]`.
pub fn fundamental_with_samples(
    q: &Potential,
    lambda: Complex64,
    tol: f64,
    xs: &[f64],
) -> Result<FundamentalPair> {
    if xs.windows(2).any(|p| p[0] > p[1]) {
        return Err(Error::InvalidGrid("sample grid must be ascending".into()));
    }
    if xs.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidGrid(
            "sample grid must lie inside [0, 1]".into(),
        ));
    }
    run(q, lambda, tol, Depth::Values, Some(xs)).map(|(p, _)| p)
}

/// Dense samples `(theta(x_i), phi(x_i))` on a grid in `[0, 1]`.
pub fn sample_solutions(
    q: &Potential,
    lambda: Complex64,
    xs: &[f64],
    tol: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let pair = fundamental_with_samples(q, lambda, tol, xs)?;
    let s = pair.samples.expect("samples requested");
    Ok((s.theta, s.phi))
}

/// End-values with first derivatives plus `F''(lambda)`, via the second
/// variational system.
pub(crate) fn fundamental_with_second_derivative(
    q: &Potential,
    lambda: Complex64,
    tol: f64,
) -> Result<(FundamentalPair, Complex64)> {
    let (pair, d2) = run(q, lambda, tol, Depth::Second, None)?;
    let d2 = d2.expect("second derivatives requested");
    // F'' = d2(theta(1)) + d2(phi'(1)); layout [theta, theta', phi, phi'].
    Ok((pair, d2[0] + d2[3]))
}

/// ODE-path integration that ignores the closed-form free shortcut; used by
/// tests to validate the integrator against the exact free solution.
#[cfg(test)]
pub(crate) fn integrate_fundamental_ode(
    q: &Potential,
    lambda: Complex64,
    tol: f64,
) -> Result<FundamentalPair> {
    let tol = check_tol(tol)?;
    let mu = lambda - q.mean_shift();
    check_lambda(lambda, mu)?;
    let qe = QEval::new(q);
    let rhs = |x: f64, y: &[Complex64; 4]| {
        let r = qe.eval(x) - mu;
        [y[1], r * y[0], y[3], r * y[2]]
    };
    let y0 = [ONE, ZERO, ZERO, ONE];
    let (end, _) = integrate(rhs, 0.0, 1.0, y0, &ode_options(tol), &[])?;
    Ok(FundamentalPair {
        lambda,
        theta1: end[0],
        dtheta1: end[1],
        phi1: end[2],
        dphi1: end[3],
        dlambda_theta1: None,
        dlambda_phi1: None,
        dlambda_dtheta1: None,
        dlambda_dphi1: None,
        samples: None,
        tol_used: tol,
    })
}

// ======================================================================
// Whole-line extension through the monodromy matrix
// ======================================================================

type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// `theta` and `phi` extended from `[0, 1]` to a window of unit cells by
/// powers of the monodromy matrix:
///
/// ```text
///   (y(m + u), y'(m + u))^T = Phi(u) M^m (y(0), y'(0))^T,   u in [0, 1),
/// ```
///
/// where `Phi(u)` is the fundamental matrix at `u` and `M = Phi(1)`. The
/// inverse power uses `M^{-1} = [[phi', -phi], [-theta', theta]]`, exact
/// because `det M = 1` (Wronskian).
#[derive(Debug, Clone)]
pub struct LineSolutions {
    xs: Vec<f64>,
    theta: Vec<Complex64>,
    phi: Vec<Complex64>,
    /// `powers[i] = M^(m_min + i)` for `i = 0..=(m_max - m_min)`.
    powers: Vec<Mat2>,
    m_min: i32,
    m_max: i32,
}

impl LineSolutions {
    /// Build the extension for cells `m_min ..= m_max` from a pair carrying
    /// dense samples on a grid that starts at 0 and ends at 1.
    pub fn new(pair: &FundamentalPair, m_min: i32, m_max: i32) -> Result<Self> {
        let s = pair.samples.as_ref().ok_or_else(|| {
            Error::InvalidGrid("whole-line extension needs dense samples on [0, 1]".into())
        })?;
        if s.xs.first() != Some(&0.0) || s.xs.last() != Some(&1.0) {
            return Err(Error::InvalidGrid(
                "sample grid must start at 0 and end at 1 for whole-line extension".into(),
            ));
        }
        if m_min > m_max {
            return Err(Error::InvalidGrid(format!(
                "empty cell range {m_min}..={m_max}"
            )));
        }
        let m = pair.monodromy_matrix();
        let m_inv: Mat2 = [
            [pair.dphi1, -pair.phi1],
            [-pair.dtheta1, pair.theta1],
        ];
        let identity: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
        let count = (m_max - m_min + 1) as usize;
        let mut powers = vec![identity; count];
        // Fill outward from m = 0 (clamped into the range) by repeated
        // multiplication, so each power is one product away from its
        // neighbor.
        let zero_idx = (-m_min).clamp(0, count as i32 - 1) as usize;
        let zero_m = m_min + zero_idx as i32;
        let mut acc = identity;
        for _ in 0..zero_m.abs() {
            acc = if zero_m > 0 {
                mat_mul(&acc, &m)
            } else {
                mat_mul(&acc, &m_inv)
            };
        }
        powers[zero_idx] = acc;
        for i in (zero_idx + 1)..count {
            powers[i] = mat_mul(&powers[i - 1], &m);
        }
        for i in (0..zero_idx).rev() {
            powers[i] = mat_mul(&powers[i + 1], &m_inv);
        }
        Ok(LineSolutions {
            xs: s.xs.clone(),
            theta: s.theta.clone(),
            phi: s.phi.clone(),
            powers,
            m_min,
            m_max,
        })
    }

    /// Sample grid on the base cell `[0, 1]`.
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Cell range covered by the extension.
    pub fn cells(&self) -> (i32, i32) {
        (self.m_min, self.m_max)
    }

    /// `(theta, phi)` at `x = m + xs[idx]`.
    ///
    /// # Panics
    /// If `m` is outside the covered cell range or `idx` outside the grid.
    pub fn theta_phi(&self, m: i32, idx: usize) -> (Complex64, Complex64) {
        assert!(
            (self.m_min..=self.m_max).contains(&m),
            "cell {m} outside covered range {}..={}",
            self.m_min,
            self.m_max
        );
        let p = &self.powers[(m - self.m_min) as usize];
        let (tu, pu) = (self.theta[idx], self.phi[idx]);
        // Columns of M^m are the Cauchy data of the extended theta and phi.
        (
            tu * p[0][0] + pu * p[1][0],
            tu * p[0][1] + pu * p[1][1],
        )
    }
}

// ======================================================================
// Tests
// ======================================================================
