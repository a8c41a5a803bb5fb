//! Adaptive Dormand–Prince 5(4) integration for small complex ODE systems.
//!
//! The Hill equation and its variational extensions are initial-value
//! problems for vectors of 4, 8, or 12 complex components:
//!
//! ```text
//!   -y'' + q(x) y = lambda y      rewritten as      y' = v, v' = (q - lambda) y
//! ```
//!
//! with smooth right-hand sides, so an explicit embedded Runge–Kutta pair
//! with error-based step control is the right tool. This module implements
//! the classic 7-stage Dormand–Prince 5(4) scheme with:
//!
//! * FSAL (first-same-as-last) stage reuse,
//! * a fifth-order error estimate driving proportional step control,
//! * the quartic dense-output interpolant, used to read solutions off on a
//!   caller-supplied sample grid without constraining the step sequence.
//!
//! State vectors are fixed-size arrays `[Complex64; N]` on the stack, so the
//! hot loop performs no allocation. All arithmetic is deterministic: the
//! step sequence depends only on the initial data, tolerances, and
//! right-hand side.

use num_complex::Complex64;

use crate::error::{Error, Result};

// ======================================================================
// Dormand–Prince 5(4) tableau
// ======================================================================

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order solution weights (also row 7 of A; b7 = 0).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients for the quartic interpolant.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
/// State magnitude beyond which the trajectory is declared divergent.
const OVERFLOW_GUARD: f64 = 1e12;

// ======================================================================
// Options and helpers
// ======================================================================

/// Step-control options for [`integrate`].
#[derive(Debug, Clone)]
pub struct OdeOptions {
    /// Relative error tolerance per step.
    pub rtol: f64,
    /// Absolute error tolerance per step.
    pub atol: f64,
    /// Initial step size; `None` selects one automatically from the
    /// right-hand side magnitude.
    pub h0: Option<f64>,
    /// Upper bound on the step size.
    pub max_step: f64,
    /// Budget of accepted + rejected steps before giving up.
    pub max_steps: usize,
}

impl OdeOptions {
    /// Options with `rtol = tol`, `atol = tol * 1e-2`, and generous budgets.
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol * 1e-2,
            h0: None,
            max_step: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

#[inline]
fn axpy<const N: usize>(
    y: &[Complex64; N],
    h: f64,
    terms: &[(f64, &[Complex64; N])],
) -> [Complex64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let ch = h * c;
        for i in 0..N {
            out[i] += k[i] * ch;
        }
    }
    out
}

/// Scaled RMS norm used for step acceptance.
#[inline]
fn error_norm<const N: usize>(
    err: &[Complex64; N],
    y0: &[Complex64; N],
    y1: &[Complex64; N],
    atol: f64,
    rtol: f64,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y0[i].norm().max(y1[i].norm());
        let r = err[i].norm() / sc;
        acc += r * r;
    }
    (acc / N as f64).sqrt()
}

fn scaled_rms<const N: usize>(v: &[Complex64; N], sc: &[f64; N]) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let r = v[i].norm() / sc[i];
        acc += r * r;
    }
    (acc / N as f64).sqrt()
}

/// Classic two-probe starting-step heuristic.
fn initial_step<const N: usize, F>(
    f: &mut F,
    x0: f64,
    y0: &[Complex64; N],
    f0: &[Complex64; N],
    span: f64,
    opts: &OdeOptions,
) -> f64
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    let mut sc = [0.0; N];
    for i in 0..N {
        sc[i] = opts.atol + opts.rtol * y0[i].norm();
    }
    let d0 = scaled_rms(y0, &sc);
    let d1 = scaled_rms(f0, &sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = f(x0 + h0, &y1);
    let mut diff = [Complex64::new(0.0, 0.0); N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = scaled_rms(&diff, &sc) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(opts.max_step)
}

// ======================================================================
// Integration with dense sampling
// ======================================================================

/// Integrate `y' = f(x, y)` from `x0` to `x1 > x0`.
///
/// # Arguments
/// * `f` — right-hand side, returning the derivative array.
/// * `sample_xs` — ascending abscissae in `[x0, x1]` at which the dense
///   interpolant is evaluated; pass `&[]` when only the endpoint is needed.
///
/// # Returns
/// The state at `x1` and the interpolated states at `sample_xs` (same
/// length and order).
///
/// # Errors
/// [`Error::Integration`] when the step budget is exhausted, the state
/// exceeds the overflow guard, or the error estimate turns non-finite.
pub fn integrate<const N: usize, F>(
    mut f: F,
    x0: f64,
    x1: f64,
    y0: [Complex64; N],
    opts: &OdeOptions,
    sample_xs: &[f64],
) -> Result<([Complex64; N], Vec<[Complex64; N]>)>
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    if !(x1 > x0) {
        return Err(Error::Integration(format!(
            "integration interval must be increasing, got [{x0}, {x1}]"
        )));
    }
    debug_assert!(
        sample_xs.windows(2).all(|p| p[0] <= p[1]),
        "sample grid must be ascending"
    );
    let span = x1 - x0;
    let mut samples: Vec<[Complex64; N]> = Vec::with_capacity(sample_xs.len());
    let mut cursor = 0;
    // Samples at (or numerically before) the left endpoint.
    while cursor < sample_xs.len() && sample_xs[cursor] <= x0 {
        samples.push(y0);
        cursor += 1;
    }

    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let mut h = match opts.h0 {
        Some(h0) if h0 > 0.0 => h0.min(span).min(opts.max_step),
        _ => initial_step(&mut f, x0, &y0, &k1, span, opts),
    };
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::Integration(format!(
                "step budget {} exhausted at x = {x:.6} (rtol = {:.1e})",
                opts.max_steps, opts.rtol
            )));
        }
        steps += 1;
        let mut last = false;
        if x + 1.01 * h >= x1 {
            h = x1 - x;
            last = true;
        }

        let k2 = f(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(x + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            x + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = f(x + h, &y_new);

        let mut err_vec = [Complex64::new(0.0, 0.0); N];
        for i in 0..N {
            err_vec[i] = (k1[i] * E1
                + k3[i] * E3
                + k4[i] * E4
                + k5[i] * E5
                + k6[i] * E6
                + k7[i] * E7)
                * h;
        }
        let err = error_norm(&err_vec, &y, &y_new, opts.atol, opts.rtol);

        if !err.is_finite() {
            // Stage values overflowed; retry with a much smaller step.
            h *= 0.1;
            if h < 1e-14 * span {
                return Err(Error::Integration(
                    "step size underflow after non-finite error estimate".into(),
                ));
            }
            continue;
        }

        if err <= 1.0 {
            // --- accept ---
            let x_new = if last { x1 } else { x + h };
            if y_new.iter().any(|c| c.norm() > OVERFLOW_GUARD) {
                return Err(Error::Integration(format!(
                    "state magnitude exceeded {OVERFLOW_GUARD:.0e} at x = {x_new:.6}"
                )));
            }
            // Dense output over (x, x_new].
            if cursor < sample_xs.len() && sample_xs[cursor] <= x_new {
                let ydiff = {
                    let mut d = [Complex64::new(0.0, 0.0); N];
                    for i in 0..N {
                        d[i] = y_new[i] - y[i];
                    }
                    d
                };
                let mut rcont3 = [Complex64::new(0.0, 0.0); N];
                let mut rcont4 = [Complex64::new(0.0, 0.0); N];
                let mut rcont5 = [Complex64::new(0.0, 0.0); N];
                for i in 0..N {
                    let bspl = k1[i] * h - ydiff[i];
                    rcont3[i] = bspl;
                    rcont4[i] = ydiff[i] - k7[i] * h - bspl;
                    rcont5[i] = (k1[i] * D1
                        + k3[i] * D3
                        + k4[i] * D4
                        + k5[i] * D5
                        + k6[i] * D6
                        + k7[i] * D7)
                        * h;
                }
                while cursor < sample_xs.len() && sample_xs[cursor] <= x_new {
                    let theta = ((sample_xs[cursor] - x) / h).clamp(0.0, 1.0);
                    let th1 = 1.0 - theta;
                    let mut val = [Complex64::new(0.0, 0.0); N];
                    for i in 0..N {
                        val[i] = y[i]
                            + (ydiff[i]
                                + (rcont3[i] + (rcont4[i] + rcont5[i] * th1) * theta) * th1)
                                * theta;
                    }
                    samples.push(val);
                    cursor += 1;
                }
            }
            y = y_new;
            x = x_new;
            k1 = k7; // FSAL
            if last {
                break;
            }
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
            h = (h * fac).min(opts.max_step);
        } else {
            // --- reject ---
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            h *= fac;
            if h < 1e-14 * span {
                return Err(Error::Integration(format!(
                    "step size underflow at x = {x:.6} (rtol = {:.1e})",
                    opts.rtol
                )));
            }
        }
    }

    // Any trailing samples numerically equal to x1 (guarded above by <=).
    while cursor < sample_xs.len() && sample_xs[cursor] <= x1 + 1e-14 * (1.0 + x1.abs()) {
        samples.push(y);
        cursor += 1;
    }
    if cursor != sample_xs.len() {
        return Err(Error::Integration(format!(
            "sample grid extends beyond the integration interval (first uncovered x = {})",
            sample_xs[cursor]
        )));
    }

    Ok((y, samples))
}
