//! Periodic potentials, compactly supported test functions, and grids.
//!
//! The operator under study is the Hill operator
//!
//! ```text
//!   (H y)(x) = -y''(x) + q(x) y(x),        q(x + 1) = q(x),
//! ```
//!
//! with a complex-valued trigonometric-polynomial potential
//!
//! ```text
//!   q(x) = sum_m  c_m e^{i 2 pi m x},       finitely many modes m.
//! ```
//!
//! Restricting to finite Fourier series keeps every quantity entire in the
//! spectral parameter and makes evaluation exact up to rounding. The mean
//! coefficient `c_0` commutes with everything: `-y'' + q y = lambda y` is the
//! same equation as `-y'' + (q - c_0) y = (lambda - c_0) y`, so [`Potential`]
//! stores the mean separately as a *spectral shift* and evaluates only the
//! mean-zero part. Downstream eigenvalue solvers work with the mean-zero
//! operator and add the shift back to every reported eigenvalue.
//!
//! [`TestFunction`] models the compactly supported continuous functions that
//! the expansion machinery analyzes and reconstructs: a C-infinity bump, a
//! cubic B-spline, or user-supplied samples with linear interpolation. All
//! three are exactly zero outside their support interval.
//!
//! [`GridSpec`] fixes the deterministic sample grids: a uniform grid on
//! `[0, 1]` for eigenfunction sampling and a half-step-offset quasimomentum
//! grid on `(0, 2 pi)` that never touches the exceptional points `0` and `pi`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ======================================================================
// Potential
// ======================================================================

/// A 1-periodic trigonometric-polynomial potential with its mean split off
/// as a spectral shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    /// Nonzero-mode coefficients `(m, c_m)` with `m != 0`, sorted by `m`.
    coeffs: Vec<(i32, Complex64)>,
    /// Mean coefficient `c_0`, reported as a shift of the spectral parameter.
    mean: Complex64,
}

impl Potential {
    /// The free operator, `q = 0`.
    pub fn zero() -> Self {
        Potential {
            coeffs: Vec::new(),
            mean: Complex64::new(0.0, 0.0),
        }
    }

    /// Build a potential from Fourier coefficients `(m, c_m)`.
    ///
    /// Duplicate modes are accumulated (map semantics); coefficients that
    /// cancel to exactly zero are dropped. The `m = 0` coefficient is stored
    /// as [`mean_shift`](Self::mean_shift) and excluded from
    /// [`eval`](Self::eval).
    ///
    /// # Errors
    /// [`Error::InvalidPotential`] if any coefficient is non-finite.
    pub fn from_modes<I>(modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i32, Complex64)>,
    {
        let mut map: std::collections::BTreeMap<i32, Complex64> = std::collections::BTreeMap::new();
        for (m, c) in modes {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidPotential(format!(
                    "coefficient for mode {m} is not finite: {c}"
                )));
            }
            *map.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let mean = map.remove(&0).unwrap_or(Complex64::new(0.0, 0.0));
        let coeffs: Vec<(i32, Complex64)> = map
            .into_iter()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .collect();
        Ok(Potential { coeffs, mean })
    }

    /// Evaluate the *mean-zero part* of the potential at `x`.
    ///
    /// The full potential is `eval(x) + mean_shift()`; solvers use the
    /// mean-zero part and shift eigenvalues instead.
    pub fn eval(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(m, c) in &self.coeffs {
            let angle = TAU * m as f64 * x;
            acc += c * Complex64::new(angle.cos(), angle.sin());
        }
        acc
    }

    /// The mean coefficient `c_0`, to be added to eigenvalues of the
    /// mean-zero operator when reporting spectra of the full operator.
    pub fn mean_shift(&self) -> Complex64 {
        self.mean
    }

    /// Sorted nonzero-mode coefficients `(m, c_m)`, `m != 0`.
    pub fn modes(&self) -> &[(i32, Complex64)] {
        &self.coeffs
    }

    /// Largest `|m|` among nonzero modes (0 for the free operator).
    pub fn max_mode(&self) -> i32 {
        self.coeffs
            .iter()
            .map(|&(m, _)| m.abs())
            .max()
            .unwrap_or(0)
    }

    /// `sum |c_m|` over nonzero modes: a sup-norm bound for the mean-zero part.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|&(_, c)| c.norm()).sum()
    }

    /// Whether the mean-zero part vanishes identically.
    pub fn is_free(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Whether the potential is real-valued: `c_{-m} = conj(c_m)` for every
    /// mode and the mean is real.
    pub fn is_real(&self) -> bool {
        if self.mean.im != 0.0 {
            return false;
        }
        self.coeffs.iter().all(|&(m, c)| {
            let mirror = self
                .coeffs
                .iter()
                .find(|&&(mm, _)| mm == -m)
                .map(|&(_, cc)| cc)
                .unwrap_or(Complex64::new(0.0, 0.0));
            (mirror - c.conj()).norm() <= 1e-15 * (1.0 + c.norm())
        })
    }
}

/// Build a [`Potential`] from a frequency-to-coefficient map.
///
/// Free-function form of [`Potential::from_modes`].
pub fn make_fourier_potential<I>(coeffs: I) -> Result<Potential>
where
    I: IntoIterator<Item = (i32, Complex64)>,
{
    Potential::from_modes(coeffs)
}

/// Evaluate the mean-zero part of `q` at `x` (see [`Potential::eval`]).
pub fn eval_potential(q: &Potential, x: f64) -> Complex64 {
    q.eval(x)
}

// --- JSON form: {"coeffs": [[m, re, im], ...]} ------------------------

#[derive(Serialize, Deserialize)]
struct PotentialJson {
    coeffs: Vec<(i32, f64, f64)>,
}

impl Serialize for Potential {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut coeffs: Vec<(i32, f64, f64)> = Vec::new();
        if self.mean != Complex64::new(0.0, 0.0) {
            coeffs.push((0, self.mean.re, self.mean.im));
        }
        coeffs.extend(self.coeffs.iter().map(|&(m, c)| (m, c.re, c.im)));
        coeffs.sort_by_key(|&(m, _, _)| m);
        PotentialJson { coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Potential {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PotentialJson::deserialize(d)?;
        Potential::from_modes(
            raw.coeffs
                .into_iter()
                .map(|(m, re, im)| (m, Complex64::new(re, im))),
        )
        .map_err(serde::de::Error::custom)
    }
}

// ======================================================================
// Test functions
// ======================================================================

/// Which rule a [`TestFunction`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunctionKind {
    /// `amplitude * exp(-1 / (1 - u^2))` on the support, `u` the affine map
    /// of `[a, b]` onto `[-1, 1]`; smooth with all derivatives vanishing at
    /// the endpoints. Peak value `amplitude * e^{-1}` at the midpoint.
    Bump,
    /// The cardinal cubic B-spline rescaled to the support; `C^2`, peak value
    /// `amplitude * 2/3` at the midpoint.
    Spline,
    /// Piecewise-linear interpolation of user samples that vanish at both
    /// support endpoints.
    UserSampled,
}

/// A continuous, compactly supported, complex-valued function on the line.
///
/// The evaluator returns exactly `0.0 + 0.0i` outside the closed support
/// `[a, b]`, including at the endpoints, so the function is continuous on
/// all of the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    kind: TestFunctionKind,
    a: f64,
    b: f64,
    amplitude: Complex64,
    /// Present only for `UserSampled`: ascending abscissae in `[a, b]` with
    /// matching values; endpoints carry zero values.
    samples: Option<(Vec<f64>, Vec<Complex64>)>,
}

impl TestFunction {
    fn check_support(a: f64, b: f64) -> Result<()> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidTestFunction(format!(
                "support must be a finite interval [a, b] with a < b, got [{a}, {b}]"
            )));
        }
        Ok(())
    }

    /// Smooth bump on `[a, b]` with amplitude 1.
    pub fn bump(a: f64, b: f64) -> Result<Self> {
        Self::bump_scaled(a, b, Complex64::new(1.0, 0.0))
    }

    /// Smooth bump on `[a, b]` scaled by `amplitude`.
    pub fn bump_scaled(a: f64, b: f64, amplitude: Complex64) -> Result<Self> {
        Self::check_support(a, b)?;
        Ok(TestFunction {
            kind: TestFunctionKind::Bump,
            a,
            b,
            amplitude,
            samples: None,
        })
    }

    /// Cubic B-spline on `[a, b]` with amplitude 1.
    pub fn spline(a: f64, b: f64) -> Result<Self> {
        Self::spline_scaled(a, b, Complex64::new(1.0, 0.0))
    }

    /// Cubic B-spline on `[a, b]` scaled by `amplitude`.
    pub fn spline_scaled(a: f64, b: f64, amplitude: Complex64) -> Result<Self> {
        Self::check_support(a, b)?;
        Ok(TestFunction {
            kind: TestFunctionKind::Spline,
            a,
            b,
            amplitude,
            samples: None,
        })
    }

    /// Piecewise-linear function through `(xs_i, values_i)`.
    ///
    /// `xs` must be strictly ascending inside `[a, b]`; samples at the
    /// support endpoints (if present) must be zero to within `1e-12`, and
    /// zero endpoint samples are added when missing so the function is
    /// continuous across the support boundary.
    pub fn from_samples(
        a: f64,
        b: f64,
        xs: Vec<f64>,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        Self::check_support(a, b)?;
        if xs.len() != values.len() {
            return Err(Error::InvalidTestFunction(format!(
                "{} abscissae but {} values",
                xs.len(),
                values.len()
            )));
        }
        if xs.is_empty() {
            return Err(Error::InvalidTestFunction("no samples given".into()));
        }
        if !xs.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::InvalidTestFunction(
                "sample abscissae must be strictly ascending".into(),
            ));
        }
        if xs[0] < a || *xs.last().unwrap() > b {
            return Err(Error::InvalidTestFunction(format!(
                "samples extend outside the support [{a}, {b}]"
            )));
        }
        let mut xs = xs;
        let mut values = values;
        for (endpoint, at_front) in [(a, true), (b, false)] {
            let (x_edge, v_edge) = if at_front {
                (xs[0], values[0])
            } else {
                (*xs.last().unwrap(), *values.last().unwrap())
            };
            if x_edge == endpoint {
                if v_edge.norm() > 1e-12 {
                    return Err(Error::InvalidTestFunction(format!(
                        "sample at the support endpoint x = {endpoint} must vanish, got {v_edge}"
                    )));
                }
                // Pin exactly to zero for continuity with the exterior.
                if at_front {
                    values[0] = Complex64::new(0.0, 0.0);
                } else {
                    let last = values.len() - 1;
                    values[last] = Complex64::new(0.0, 0.0);
                }
            } else if at_front {
                xs.insert(0, endpoint);
                values.insert(0, Complex64::new(0.0, 0.0));
            } else {
                xs.push(endpoint);
                values.push(Complex64::new(0.0, 0.0));
            }
        }
        Ok(TestFunction {
            kind: TestFunctionKind::UserSampled,
            a,
            b,
            amplitude: Complex64::new(1.0, 0.0),
            samples: Some((xs, values)),
        })
    }

    /// Support interval `(a, b)`.
    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Which evaluation rule this function uses.
    pub fn kind(&self) -> TestFunctionKind {
        self.kind
    }

    /// Evaluate at `x`; exactly zero outside the open support `(a, b)`.
    pub fn eval(&self, x: f64) -> Complex64 {
        if !(x > self.a && x < self.b) {
            return Complex64::new(0.0, 0.0);
        }
        match self.kind {
            TestFunctionKind::Bump => {
                let u = 2.0 * (x - self.a) / (self.b - self.a) - 1.0;
                let d = 1.0 - u * u;
                if d <= 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    self.amplitude * (-1.0 / d).exp()
                }
            }
            TestFunctionKind::Spline => {
                let s = 4.0 * (x - self.a) / (self.b - self.a);
                self.amplitude * cardinal_cubic_bspline(s)
            }
            TestFunctionKind::UserSampled => {
                let (xs, vals) = self.samples.as_ref().expect("samples present by construction");
                // Binary search for the segment containing x.
                let j = xs.partition_point(|&xi| xi <= x);
                if j == 0 || j >= xs.len() {
                    return Complex64::new(0.0, 0.0);
                }
                let (x0, x1) = (xs[j - 1], xs[j]);
                let w = (x - x0) / (x1 - x0);
                vals[j - 1] * (1.0 - w) + vals[j] * w
            }
        }
    }
}

/// The cardinal cubic B-spline on `[0, 4]`: `C^2`, peak `2/3` at `s = 2`.
fn cardinal_cubic_bspline(s: f64) -> f64 {
    if s <= 0.0 || s >= 4.0 {
        0.0
    } else if s < 1.0 {
        s * s * s / 6.0
    } else if s < 2.0 {
        (-3.0 * s * s * s + 12.0 * s * s - 12.0 * s + 4.0) / 6.0
    } else if s < 3.0 {
        (3.0 * s * s * s - 24.0 * s * s + 60.0 * s - 44.0) / 6.0
    } else {
        let r = 4.0 - s;
        r * r * r / 6.0
    }
}

/// Build a [`TestFunction`] from its JSON-style description.
///
/// `kind` is one of `"bump"`, `"spline"`, `"user-sampled"`. `params` may
/// carry `"amplitude"` (number or `[re, im]`) for the built-ins, and must
/// carry `"xs"` and `"values"` (list of `[re, im]`) for `"user-sampled"`.
pub fn make_test_function(
    kind: &str,
    support: (f64, f64),
    params: &serde_json::Value,
) -> Result<TestFunction> {
    let (a, b) = support;
    let amplitude = match params.get("amplitude") {
        None => Complex64::new(1.0, 0.0),
        Some(v) => parse_complex(v).ok_or_else(|| {
            Error::InvalidTestFunction(format!("bad amplitude parameter: {v}"))
        })?,
    };
    match kind {
        "bump" => TestFunction::bump_scaled(a, b, amplitude),
        "spline" => TestFunction::spline_scaled(a, b, amplitude),
        "user-sampled" => {
            let xs: Vec<f64> = params
                .get("xs")
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .ok_or_else(|| {
                    Error::InvalidTestFunction("user-sampled needs a numeric \"xs\" list".into())
                })?;
            let raw: Vec<(f64, f64)> = params
                .get("values")
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .ok_or_else(|| {
                    Error::InvalidTestFunction(
                        "user-sampled needs a \"values\" list of [re, im] pairs".into(),
                    )
                })?;
            let values = raw
                .into_iter()
                .map(|(re, im)| Complex64::new(re, im))
                .collect();
            TestFunction::from_samples(a, b, xs, values)
        }
        other => Err(Error::InvalidTestFunction(format!(
            "unknown test-function kind {other:?} (expected bump | spline | user-sampled)"
        ))),
    }
}

fn parse_complex(v: &serde_json::Value) -> Option<Complex64> {
    if let Some(x) = v.as_f64() {
        return Some(Complex64::new(x, 0.0));
    }
    let arr = v.as_array()?;
    if arr.len() == 2 {
        Some(Complex64::new(arr[0].as_f64()?, arr[1].as_f64()?))
    } else {
        None
    }
}

// --- JSON form: {"kind", "support": [a, b], "params"} -----------------

#[derive(Serialize, Deserialize)]
struct TestFunctionJson {
    kind: String,
    support: (f64, f64),
    #[serde(default)]
    params: serde_json::Value,
}

impl Serialize for TestFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, params) = match self.kind {
            TestFunctionKind::Bump => (
                "bump",
                serde_json::json!({ "amplitude": [self.amplitude.re, self.amplitude.im] }),
            ),
            TestFunctionKind::Spline => (
                "spline",
                serde_json::json!({ "amplitude": [self.amplitude.re, self.amplitude.im] }),
            ),
            TestFunctionKind::UserSampled => {
                let (xs, vals) = self.samples.as_ref().expect("samples present");
                let values: Vec<(f64, f64)> = vals.iter().map(|c| (c.re, c.im)).collect();
                ("user-sampled", serde_json::json!({ "xs": xs, "values": values }))
            }
        };
        TestFunctionJson {
            kind: kind.to_string(),
            support: (self.a, self.b),
            params,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TestFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = TestFunctionJson::deserialize(d)?;
        make_test_function(&raw.kind, raw.support, &raw.params).map_err(serde::de::Error::custom)
    }
}

// ======================================================================
// Grids
// ======================================================================

/// Deterministic sample-grid sizes shared by the spectral routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of uniform samples on `[0, 1]` (inclusive endpoints) used for
    /// eigenfunction quadrature. Even values are rounded up to the next odd
    /// value so the composite Simpson rule applies.
    pub x_points: usize,
    /// Number of quasimomentum nodes on `(0, 2 pi)`; must be even so the
    /// half-step-offset grid avoids `0` and `pi` exactly.
    pub t_points: usize,
    /// Gauss–Legendre order per quasimomentum panel in integrals over `t`.
    pub quad_order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_points: 513,
            t_points: 512,
            quad_order: 16,
        }
    }
}

impl GridSpec {
    /// Check the invariants: counts at least 2, even `t_points`, quadrature
    /// order within the supported range.
    pub fn validate(&self) -> Result<()> {
        if self.x_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "x_points must be >= 2, got {}",
                self.x_points
            )));
        }
        if self.t_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "t_points must be >= 2, got {}",
                self.t_points
            )));
        }
        if self.t_points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "t_points must be even so the half-step grid avoids pi exactly, got {}",
                self.t_points
            )));
        }
        if self.quad_order == 0 || self.quad_order > crate::quad::GaussLegendre::MAX_ORDER {
            return Err(Error::InvalidGrid(format!(
                "quad_order must be in 1..=64, got {}",
                self.quad_order
            )));
        }
        Ok(())
    }

    /// Number of x-samples actually used: `x_points` rounded up to odd.
    pub fn x_count(&self) -> usize {
        if self.x_points % 2 == 0 {
            self.x_points + 1
        } else {
            self.x_points
        }
    }

    /// Uniform inclusive grid `0 = x_0 < ... < x_{n-1} = 1` with
    /// [`x_count`](Self::x_count) samples.
    pub fn x_grid(&self) -> Vec<f64> {
        let n = self.x_count();
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    /// Composite Simpson weights matching [`x_grid`](Self::x_grid).
    pub fn x_weights(&self) -> Vec<f64> {
        crate::quad::simpson_weights(self.x_count(), 1.0).expect("x_count made odd")
    }

    /// Half-step-offset quasimomentum nodes `t_j = 2 pi (j + 1/2)/t_points`,
    /// ascending in `(0, 2 pi)` and avoiding `0` and `pi` exactly.
    pub fn t_grid(&self) -> Vec<f64> {
        (0..self.t_points)
            .map(|j| TAU * (j as f64 + 0.5) / self.t_points as f64)
            .collect()
    }
}
