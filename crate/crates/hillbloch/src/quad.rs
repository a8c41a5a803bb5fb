//! Deterministic quadrature rules used throughout the crate.
//!
//! Two rules cover every integral we need:
//!
//! * **Gauss–Legendre panels** for quasimomentum integrals and for integrals
//!   along eigenvalue arcs. Nodes and weights are generated by Newton
//!   iteration on the Legendre recurrence, so the crate has no baked-in
//!   tables and any order up to 64 is available.
//! * **Composite Simpson weights** on uniform grids for spatial integrals
//!   `integral_0^1 f(x) conj(g(x)) dx` of sampled eigenfunctions. Sampling on a
//!   fixed uniform grid lets many pairings reuse one set of ODE solves.
//!
//! All routines are pure functions of their arguments; repeated calls are
//! bitwise reproducible.

use num_complex::Complex64;

use crate::error::{Error, Result};

// ======================================================================
// Gauss–Legendre rule on [-1, 1]
// ======================================================================

/// Gauss–Legendre rule of a given order on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Maximum supported rule order.
    pub const MAX_ORDER: usize = 64;

    /// Build the `n`-point rule. `n` must lie in `1..=MAX_ORDER`.
    ///
    /// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
    /// iteration from the Chebyshev-like initial guess
    /// `cos(pi (i - 1/4) / (n + 1/2))`; weights are `2 / ((1 - x^2) P_n'(x)^2)`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > Self::MAX_ORDER {
            return Err(Error::InvalidGrid(format!(
                "Gauss-Legendre order must be in 1..={}, got {n}",
                Self::MAX_ORDER
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 1..=m {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j as f64 - 1.0) * x * p2 - (j as f64 - 1.0) * p3) / j as f64;
                }
                dp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i - 1] = -x;
            nodes[n - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i - 1] = w;
            weights[n - i] = w;
        }
        if n % 2 == 1 {
            // Middle node of an odd rule is exactly zero by symmetry.
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Rule order (number of nodes).
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes on `[-1, 1]`, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`nodes`](Self::nodes); all positive, summing to 2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely to `[a, b]` (ascending in the node
    /// coordinate when `a < b`).
    pub fn mapped_to(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (mid + half * x, half * w))
            .collect()
    }

    /// Integrate a complex-valued function over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * x) * w;
        }
        acc * half
    }
}

/// Nodes and weights of a composite Gauss–Legendre rule: `panels` equal
/// subintervals of `[a, b]`, each carrying an `order`-point rule.
///
/// Returned pairs are ascending in the node coordinate (for `a < b`), so a
/// caller can evaluate an integrand once per node and keep deterministic
/// summation order.
pub fn gauss_panels(a: f64, b: f64, panels: usize, order: usize) -> Result<Vec<(f64, f64)>> {
    if panels == 0 {
        return Err(Error::InvalidGrid("panel count must be positive".into()));
    }
    let rule = GaussLegendre::new(order)?;
    let mut out = Vec::with_capacity(panels * order);
    let width = (b - a) / panels as f64;
    for p in 0..panels {
        let pa = a + width * p as f64;
        let pb = if p + 1 == panels { b } else { a + width * (p + 1) as f64 };
        out.extend(rule.mapped_to(pa, pb));
    }
    Ok(out)
}

// ======================================================================
// Composite Simpson rule on uniform grids
// ======================================================================

/// Composite Simpson weights for a uniform grid of `npoints` samples on an
/// interval of length `len`. `npoints` must be odd and at least 3.
///
/// The returned weights `w_i` satisfy
/// `integral f ~ sum_i w_i f(x_i)` with `x_i = x_0 + i len/(npoints-1)`,
/// exact for cubics and fourth-order accurate in general.
pub fn simpson_weights(npoints: usize, len: f64) -> Result<Vec<f64>> {
    if npoints < 3 || npoints % 2 == 0 {
        return Err(Error::InvalidGrid(format!(
            "composite Simpson needs an odd point count >= 3, got {npoints}"
        )));
    }
    let h = len / (npoints - 1) as f64;
    let mut w = vec![0.0; npoints];
    w[0] = h / 3.0;
    w[npoints - 1] = h / 3.0;
    for (i, wi) in w.iter_mut().enumerate().take(npoints - 1).skip(1) {
        *wi = if i % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
    }
    Ok(w)
}

/// Dot product `sum_i w_i v_i` of sampled complex values against real
/// quadrature weights.
pub fn weighted_sum(values: &[Complex64], weights: &[f64]) -> Complex64 {
    debug_assert_eq!(values.len(), weights.len());
    values
        .iter()
        .zip(weights)
        .fold(Complex64::new(0.0, 0.0), |acc, (v, &w)| acc + v * w)
}

/// `integral f conj(g)` on a shared grid with the given weights.
pub fn weighted_inner(f: &[Complex64], g: &[Complex64], weights: &[f64]) -> Complex64 {
    debug_assert_eq!(f.len(), g.len());
    debug_assert_eq!(f.len(), weights.len());
    f.iter()
        .zip(g)
        .zip(weights)
        .fold(Complex64::new(0.0, 0.0), |acc, ((a, b), &w)| {
            acc + a * b.conj() * w
        })
}

/// `sqrt(integral |f|^2)` on a grid with the given weights.
pub fn weighted_l2_norm(f: &[Complex64], weights: &[f64]) -> f64 {
    f.iter()
        .zip(weights)
        .fold(0.0, |acc, (v, &w)| acc + v.norm_sqr() * w)
        .max(0.0)
        .sqrt()
}
