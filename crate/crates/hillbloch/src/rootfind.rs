//! Complex root finding for entire functions: Newton polish and an
//! argument-principle search over rectangles.
//!
//! The discriminant `F(lambda)` and its derivative are entire functions
//! evaluated through ODE solves, so root finding must be frugal with
//! evaluations and must certify *completeness*: the number of zeros inside
//! a rectangle equals the boundary winding number
//!
//! ```text
//!   (1 / 2 pi i) closed-integral f'(z)/f(z) dz  =  #zeros (with multiplicity),
//! ```
//!
//! computed here as the total argument change of `f` along the boundary.
//! The search subdivides a rectangle until each zero cluster is isolated,
//! polishes zeros by (multiplicity-aware) Newton iteration, and reports
//! [`Error::IncompleteSearch`] if the multiplicities it located do not add
//! up to the winding number of the original region.
//!
//! Boundary walks refuse to cross segments where the argument cannot be
//! continued unambiguously (a sign that the boundary passes through or very
//! near a zero); in that case the rectangle is retried with a deterministic
//! sequence of jittered boundaries.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    /// Construct, validating orientation.
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max)
            || !re_min.is_finite()
            || !re_max.is_finite()
            || !im_min.is_finite()
            || !im_max.is_finite()
        {
            return Err(Error::InvalidConfig(format!(
                "degenerate search rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    /// Longest side, the subdivision progress measure.
    pub fn diameter(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn contains(&self, z: Complex64, margin: f64) -> bool {
        z.re >= self.re_min - margin
            && z.re <= self.re_max + margin
            && z.im >= self.im_min - margin
            && z.im <= self.im_max + margin
    }

    /// Corners in counterclockwise order starting at the bottom-left.
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

// ======================================================================
// Newton iteration
// ======================================================================

/// Outcome of a Newton polish.
#[derive(Debug, Clone, Copy)]
pub struct NewtonResult {
    /// Converged location.
    pub z: Complex64,
    /// `f(z)` at the converged location.
    pub f: Complex64,
    /// `f'(z)` at the converged location.
    pub df: Complex64,
    /// Iterations consumed.
    pub iterations: usize,
}

/// Newton iteration `z <- z - m f / f'` for a zero of known multiplicity
/// `m` (use `m = 1` for simple zeros).
///
/// Converges when the step shrinks below `tol * (1 + |z|)`.
///
/// # Errors
/// [`Error::RootNotFound`] if the derivative collapses or the budget is
/// exhausted before convergence.
pub fn newton_polish<F>(
    f: &mut F,
    z0: Complex64,
    multiplicity: usize,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonResult>
where
    F: FnMut(Complex64) -> Result<(Complex64, Complex64)>,
{
    let m = multiplicity.max(1) as f64;
    let mut z = z0;
    let mut last_step = f64::INFINITY;
    for it in 0..max_iter {
        let (fz, dfz) = f(z)?;
        if fz.norm() == 0.0 {
            // Landed exactly on the zero (happens for multiplicity-aware
            // steps on polynomially exact inputs).
            return Ok(NewtonResult {
                z,
                f: fz,
                df: dfz,
                iterations: it,
            });
        }
        if dfz.norm() <= 1e-300 * (1.0 + fz.norm()) {
            return Err(Error::RootNotFound(format!(
                "Newton derivative collapsed at z = {z} (|f| = {:.3e})",
                fz.norm()
            )));
        }
        let step = fz / dfz * m;
        z -= step;
        let size = step.norm();
        if size <= tol * (1.0 + z.norm()) {
            let (fz, dfz) = f(z)?;
            return Ok(NewtonResult {
                z,
                f: fz,
                df: dfz,
                iterations: it + 1,
            });
        }
        // Divergence guard: a step that keeps growing after a few iterations
        // means the start was outside any basin.
        if it > 6 && size > 4.0 * last_step && size > 1.0 {
            return Err(Error::RootNotFound(format!(
                "Newton iteration diverging from z0 = {z0}"
            )));
        }
        last_step = size;
    }
    Err(Error::RootNotFound(format!(
        "Newton iteration did not converge within {max_iter} steps from z0 = {z0}"
    )))
}

// ======================================================================
// Winding numbers along rectangle boundaries
// ======================================================================

/// Deterministic relative offsets used to jitter rectangle boundaries away
/// from zeros.
const JITTER: [f64; 8] = [
    0.0, 3.7e-3, -4.1e-3, 7.9e-3, -8.9e-3, 1.33e-2, -1.57e-2, 2.11e-2,
];

/// Accumulated argument change of `f` along the segment `[a, b]`, given the
/// already-computed values at both ends. Subdivides until each piece turns
/// by less than `pi/2`.
fn segment_arg_change<F>(
    f: &mut F,
    a: Complex64,
    fa: Complex64,
    b: Complex64,
    fb: Complex64,
    depth: usize,
) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    if fa.norm() == 0.0 || fb.norm() == 0.0 || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::RootNotFound(
            "boundary walk hit a zero of the function".into(),
        ));
    }
    let ratio = fb / fa;
    if ratio.re > 0.0 {
        return Ok(ratio.im.atan2(ratio.re));
    }
    if depth == 0 {
        return Err(Error::RootNotFound(
            "argument continuation exhausted subdivision depth (zero on or \
             extremely near the boundary)"
                .into(),
        ));
    }
    let mid = (a + b) * 0.5;
    let fm = f(mid)?;
    Ok(segment_arg_change(f, a, fa, mid, fm, depth - 1)?
        + segment_arg_change(f, mid, fm, b, fb, depth - 1)?)
}

/// Winding number of `f` around the boundary of `rect`, i.e. the number of
/// zeros inside counted with multiplicity (for `f` analytic inside).
///
/// `samples_per_edge` sets the initial boundary resolution; segments are
/// refined adaptively afterwards.
pub fn winding_number<F>(f: &mut F, rect: &Rect, samples_per_edge: usize) -> Result<i64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let n = samples_per_edge.max(2);
    let corners = rect.corners();
    let mut pts: Vec<Complex64> = Vec::with_capacity(4 * n);
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        for j in 0..n {
            let s = j as f64 / n as f64;
            pts.push(a + (b - a) * s);
        }
    }
    let vals: Vec<Complex64> = pts.iter().map(|&z| f(z)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for j in 0..pts.len() {
        let k = (j + 1) % pts.len();
        total += segment_arg_change(f, pts[j], vals[j], pts[k], vals[k], 44)?;
    }
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.25 {
        return Err(Error::RootNotFound(format!(
            "winding number {turns:.4} is not close to an integer; boundary too \
             close to a zero"
        )));
    }
    Ok(rounded as i64)
}

/// [`winding_number`] with deterministic boundary jitter: when the walk hits
/// a zero on the boundary, the rectangle is expanded by successive relative
/// offsets until the walk succeeds.
///
/// Returns the winding number together with the rectangle actually used.
pub fn winding_number_jittered<F>(
    f: &mut F,
    rect: &Rect,
    samples_per_edge: usize,
) -> Result<(i64, Rect)>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let scale = rect.diameter();
    let mut last_err = None;
    for &j in &JITTER {
        let grown = Rect {
            re_min: rect.re_min - j * scale,
            re_max: rect.re_max + j * scale,
            im_min: rect.im_min - j * scale,
            im_max: rect.im_max + j * scale,
        };
        if grown.re_min >= grown.re_max || grown.im_min >= grown.im_max {
            continue;
        }
        match winding_number(f, &grown, samples_per_edge) {
            Ok(w) => return Ok((w, grown)),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::RootNotFound("winding number failed".into())))
}

// ======================================================================
// Complete zero search by subdivision
// ======================================================================

/// Tuning knobs for [`find_zeros`].
#[derive(Debug, Clone)]
pub struct ZeroSearchOptions {
    /// Initial boundary samples per rectangle edge.
    pub boundary_samples: usize,
    /// Maximum subdivision depth before a cluster is declared inseparable.
    pub max_depth: usize,
    /// Rectangles smaller than this are treated as a single zero cluster of
    /// the rectangle's full winding multiplicity.
    pub cluster_tol: f64,
    /// Newton convergence tolerance (relative).
    pub newton_tol: f64,
}

impl Default for ZeroSearchOptions {
    fn default() -> Self {
        ZeroSearchOptions {
            boundary_samples: 16,
            max_depth: 40,
            cluster_tol: 1e-7,
            newton_tol: 1e-12,
        }
    }
}

/// All zeros of an analytic function inside `rect`, with multiplicities.
///
/// `f` returns `(f(z), f'(z))`. The result is sorted by real part, then
/// imaginary part, and the sum of multiplicities is certified against the
/// boundary winding number of the (possibly jittered) search rectangle.
///
/// # Errors
/// * [`Error::RootNotFound`] — boundary walks kept hitting zeros even after
///   jittering, or a cluster failed to converge.
/// * [`Error::IncompleteSearch`] — located multiplicities do not add up to
///   the region's winding number.
pub fn find_zeros<F>(
    f: &mut F,
    rect: &Rect,
    opts: &ZeroSearchOptions,
) -> Result<Vec<(Complex64, usize)>>
where
    F: FnMut(Complex64) -> Result<(Complex64, Complex64)>,
{
    let mut fv = |z: Complex64| f(z).map(|(v, _)| v);
    let (expected, outer) = winding_number_jittered(&mut fv, rect, opts.boundary_samples)?;
    if expected < 0 {
        return Err(Error::RootNotFound(format!(
            "negative winding number {expected}: function is not analytic in the region"
        )));
    }
    let mut zeros = Vec::new();
    subdivide(f, &outer, expected as usize, opts, 0, &mut zeros)?;
    let found: usize = zeros.iter().map(|&(_, m)| m).sum();
    if found != expected as usize {
        return Err(Error::IncompleteSearch {
            found,
            expected: expected as usize,
        });
    }
    zeros.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .expect("finite zero coordinates")
    });
    Ok(zeros)
}

fn subdivide<F>(
    f: &mut F,
    rect: &Rect,
    winding: usize,
    opts: &ZeroSearchOptions,
    depth: usize,
    out: &mut Vec<(Complex64, usize)>,
) -> Result<()>
where
    F: FnMut(Complex64) -> Result<(Complex64, Complex64)>,
{
    if winding == 0 {
        return Ok(());
    }
    // A tiny rectangle with nonzero winding is one zero cluster: polish it
    // as a single zero of the full multiplicity.
    if rect.diameter() <= opts.cluster_tol {
        let polished = newton_polish(f, rect.center(), winding, opts.newton_tol, 60)
            .map(|r| r.z)
            .unwrap_or_else(|_| rect.center());
        out.push((polished, winding));
        return Ok(());
    }
    // An isolated simple zero usually yields to Newton directly; accept the
    // result only if it stayed inside this rectangle.
    if winding == 1 {
        if let Ok(res) = newton_polish(f, rect.center(), 1, opts.newton_tol, 30) {
            if rect.contains(res.z, 0.0) {
                out.push((res.z, 1));
                return Ok(());
            }
        }
    }
    if depth >= opts.max_depth {
        return Err(Error::RootNotFound(format!(
            "zero cluster of multiplicity {winding} could not be separated at depth {depth} \
             near {}",
            rect.center()
        )));
    }
    // Quadrisect with jittered split lines so the new interior boundaries
    // avoid zeros.
    let mut fv = |z: Complex64| f(z).map(|(v, _)| v);
    let scale = rect.diameter();
    'attempt: for &j in &JITTER {
        let cx = 0.5 * (rect.re_min + rect.re_max) + j * scale;
        let cy = 0.5 * (rect.im_min + rect.im_max) + j * scale;
        if cx <= rect.re_min || cx >= rect.re_max || cy <= rect.im_min || cy >= rect.im_max {
            continue;
        }
        let children = [
            Rect { re_min: rect.re_min, re_max: cx, im_min: rect.im_min, im_max: cy },
            Rect { re_min: cx, re_max: rect.re_max, im_min: rect.im_min, im_max: cy },
            Rect { re_min: rect.re_min, re_max: cx, im_min: cy, im_max: rect.im_max },
            Rect { re_min: cx, re_max: rect.re_max, im_min: cy, im_max: rect.im_max },
        ];
        let mut windings = [0usize; 4];
        let mut total = 0usize;
        for (i, child) in children.iter().enumerate() {
            match winding_number(&mut fv, child, opts.boundary_samples) {
                Ok(w) if w >= 0 => {
                    windings[i] = w as usize;
                    total += w as usize;
                }
                // A failed child walk means this split grazes a zero: try
                // the next jitter offset.
                _ => continue 'attempt,
            }
        }
        if total != winding {
            // Boundary imprecision (a zero straddling the split); retry.
            continue 'attempt;
        }
        for (child, w) in children.iter().zip(windings) {
            subdivide(f, child, w, opts, depth + 1, out)?;
        }
        return Ok(());
    }
    Err(Error::RootNotFound(format!(
        "could not find a subdivision of the region near {} avoiding zeros",
        rect.center()
    )))
}
