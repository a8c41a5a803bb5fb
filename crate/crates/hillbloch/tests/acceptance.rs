//! End-to-end acceptance gate: one test per shipped guarantee, each ending
//! in a single `ACCEPTANCE NN <name>: PASS (<measured margin>)` line (visible
//! with `--nocapture`; the harness line itself is the pass/fail signal).
//!
//! Every numeric tolerance is pinned as a named constant next to the test
//! that enforces it. Where a closed form exists (free operator, one-sided
//! exponential potentials, spline transforms) the computed values are checked
//! against oracles implemented independently in this file, not against the
//! library's own internals.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hillbloch::bloch::{floquet_overlap, normalized_pair};
use hillbloch::discriminant::{
    find_multiple_points, hill_discriminant, locate_band_point, trace_band, NodeFlag,
};
use hillbloch::expansion::{lambda_domain_term, synthesize, t_domain_term, ExpansionPlan};
use hillbloch::monodromy::integrate_fundamental;
use hillbloch::potential::{GridSpec, Potential, TestFunction};
use hillbloch::rootfind::Rect;
use hillbloch::singularity::{build_index_sets, classify_point, Classification};
use hillbloch::Error;

/// ODE tolerance used throughout unless a check needs a tighter one.
const TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn free_q() -> Potential {
    Potential::from_modes([]).expect("free potential")
}

/// `q = e^{i 2 pi x}`: one-sided exponential, every gap closed into a
/// Jordan double point.
fn one_sided_unit() -> Potential {
    Potential::from_modes([(1, c(1.0, 0.0))]).expect("potential")
}

/// `q = 0.3 e^{i 2 pi x}`: small one-sided perturbation.
fn one_sided_03() -> Potential {
    Potential::from_modes([(1, c(0.3, 0.0))]).expect("potential")
}

/// `q = 0.5 e^{i 2 pi x} + 0.2 e^{-i 2 pi x}`.
fn two_sided() -> Potential {
    Potential::from_modes([(1, c(0.5, 0.0)), (-1, c(0.2, 0.0))]).expect("potential")
}

/// `q = 2 cos 2 pi x`: real even potential, self-adjoint operator.
fn cosine_2() -> Potential {
    Potential::from_modes([(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).expect("potential")
}

/// Random trigonometric potential with one to three modes, `|m| <= 2`,
/// coefficient magnitudes below 0.8.
fn random_potential(rng: &mut ChaCha8Rng) -> Potential {
    let n_modes = rng.random_range(1..=3usize);
    let mut modes = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        let m = loop {
            let m = rng.random_range(-2..=2i32);
            if m != 0 {
                break m;
            }
        };
        let amp = 0.8 * rng.random::<f64>();
        let ph = TAU * rng.random::<f64>();
        modes.push((m, c(amp * ph.cos(), amp * ph.sin())));
    }
    Potential::from_modes(modes).expect("random potential")
}

/// Spectral-parameter draws stay in the parabolic neighborhood of the
/// positive real axis where every production solve lives; far below it the
/// fundamental solutions reach ~1e7 and double precision cannot certify
/// identity defects at 1e-9 regardless of integrator quality.
fn random_lambda(rng: &mut ChaCha8Rng) -> Complex64 {
    let re = -5.0 + 405.0 * rng.random::<f64>();
    let im = -8.0 + 16.0 * rng.random::<f64>();
    c(re, im)
}

/// Argument-principle root count of `g` inside `|z - center| = radius`,
/// from direct contour sampling with adaptive refinement. Implemented here
/// so the count is independent of the library's zero search.
fn winding_count<G: FnMut(Complex64) -> Complex64>(
    mut g: G,
    center: Complex64,
    radius: f64,
) -> i64 {
    let mut n = 64usize;
    loop {
        let vals: Vec<Complex64> = (0..=n)
            .map(|j| {
                let ang = TAU * j as f64 / n as f64;
                g(center + radius * c(ang.cos(), ang.sin()))
            })
            .collect();
        let mut total = 0.0f64;
        let mut resolved = true;
        for w in vals.windows(2) {
            let d = (w[1] / w[0]).arg();
            if d.abs() > 1.0 {
                resolved = false;
                break;
            }
            total += d;
        }
        if resolved {
            return (total / TAU).round() as i64;
        }
        n *= 2;
        assert!(n <= 8192, "contour sampling failed to resolve the winding");
    }
}

/// Path of the compiled command-line binary (built by the test harness).
fn cli_bin() -> &'static str {
    env!("CARGO_BIN_EXE_hillbloch")
}

fn run_cli(config: &Path, out: &Path, extra: &[&str], sub: &str) -> std::process::Output {
    Command::new(cli_bin())
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .arg(sub)
        .output()
        .expect("binary invocation")
}

/// All parsed JSON lines of a run's structured log.
fn log_events(out: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(out.join("log.jsonl"))
        .expect("log.jsonl present")
        .lines()
        .map(|l| serde_json::from_str(l).expect("valid JSON log line"))
        .collect()
}

/// Byte snapshot of every regular file directly inside `dir`.
fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("output directory readable") {
        let e = entry.expect("directory entry");
        if e.file_type().expect("file type").is_file() {
            map.insert(
                e.file_name().into_string().expect("utf8 file name"),
                std::fs::read(e.path()).expect("file readable"),
            );
        }
    }
    map
}

// ======================================================================
// 1. Free-discriminant exactness
// ======================================================================

const C01_DEFECT_TOL: f64 = 1e-9;
const C01_TIME_BUDGET: f64 = 10.0;

#[test]
fn criterion_01_free_discriminant_matches_cosine() {
    let start = Instant::now();
    let q = free_q();
    let mut worst = 0.0f64;
    for j in 0..200 {
        let lam = 1000.0 * j as f64 / 199.0;
        let d = hill_discriminant(&q, c(lam, 0.0), TOL).expect("discriminant");
        let exact = 2.0 * lam.sqrt().cos();
        worst = worst.max((d.f - c(exact, 0.0)).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(
        worst <= C01_DEFECT_TOL,
        "max |F - 2 cos sqrt(lambda)| = {worst:.3e} exceeds {C01_DEFECT_TOL:.0e}"
    );
    assert!(secs < C01_TIME_BUDGET, "sweep took {secs:.1}s, budget {C01_TIME_BUDGET}s");
    println!("ACCEPTANCE 01 free discriminant: PASS (max defect {worst:.3e}, {secs:.2}s)");
}

// ======================================================================
// 2. Wronskian of the fundamental pair
// ======================================================================

const C02_DEFECT_TOL: f64 = 1e-9;
/// Tight integration tolerance: the Wronskian certificate must bound the
/// integrator's own error, not the acceptance threshold.
const C02_ODE_TOL: f64 = 1e-12;

#[test]
fn criterion_02_fundamental_pair_wronskian_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = random_potential(&mut rng);
        let lam = random_lambda(&mut rng);
        let pair = integrate_fundamental(&q, lam, C02_ODE_TOL).expect("integration");
        worst = worst.max(pair.wronskian_defect());
    }
    assert!(
        worst <= C02_DEFECT_TOL,
        "max Wronskian defect {worst:.3e} exceeds {C02_DEFECT_TOL:.0e}"
    );
    println!("ACCEPTANCE 02 Wronskian identity: PASS (max |W - 1| = {worst:.3e} over 100 cases)");
}

// ======================================================================
// 3. Floquet overlap identity at simple band points
// ======================================================================

const C03_REL_TOL: f64 = 1e-6;

#[test]
fn criterion_03_floquet_overlap_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let grid = GridSpec {
        x_points: 513,
        t_points: 64,
        quad_order: 16,
    };
    let pool = [free_q(), one_sided_03(), two_sided(), cosine_2()];
    let mut done = 0usize;
    let mut attempts = 0usize;
    let mut worst = 0.0f64;
    while done < 50 {
        attempts += 1;
        assert!(attempts < 400, "too many degenerate draws");
        let extra: Potential;
        let q: &Potential = if attempts % 5 == 0 {
            extra = random_potential(&mut rng);
            &extra
        } else {
            &pool[attempts % 5 - 1]
        };
        let k = rng.random_range(1..=10i32) * if rng.random::<bool>() { 1 } else { -1 };
        // Stay clear of the band edges; exceptional points are window
        // business, not simple-point business.
        let u = 0.15 + (PI - 0.3) * rng.random::<f64>();
        let t = if rng.random::<bool>() { u } else { TAU - u };
        let disc = match locate_band_point(q, k, t, TOL) {
            Ok(d) => d,
            Err(Error::NearMultiple { .. }) => continue,
            Err(e) => panic!("band-point location failed: {e}"),
        };
        let (quadrature, closed) = match floquet_overlap(q, &disc, t, &grid, TOL) {
            Ok(v) => v,
            Err(Error::FormulaInapplicable(_)) | Err(Error::DegeneratePair(_)) => continue,
            Err(e) => panic!("overlap evaluation failed: {e}"),
        };
        let rel = (quadrature - closed).norm() / closed.norm();
        worst = worst.max(rel);
        done += 1;
    }
    assert!(
        worst <= C03_REL_TOL,
        "max relative overlap defect {worst:.3e} exceeds {C03_REL_TOL:.0e}"
    );
    println!(
        "ACCEPTANCE 03 overlap identity: PASS (max rel defect {worst:.3e} over 50 band points)"
    );
}

// ======================================================================
// 4. Characteristic-equation residual across a band sweep
// ======================================================================

const C04_RESIDUAL_TOL: f64 = 1e-8;

#[test]
fn criterion_04_band_sweep_satisfies_characteristic_equation() {
    let q = one_sided_03();
    let grid = GridSpec {
        x_points: 129,
        t_points: 32,
        quad_order: 16,
    };
    let nodes = grid.t_grid();
    let mut worst = 0.0f64;
    for k in -8..=8 {
        let band = trace_band(&q, k, &nodes, TOL).expect("band trace");
        assert!(
            band.flags.iter().all(|f| matches!(f, NodeFlag::Simple)),
            "non-simple node in band {k}"
        );
        worst = worst.max(band.max_residual(&q, TOL).expect("residual sweep"));
    }
    assert!(
        worst <= C04_RESIDUAL_TOL,
        "max |F(lambda_k(t)) - 2 cos t| = {worst:.3e} exceeds {C04_RESIDUAL_TOL:.0e}"
    );
    println!(
        "ACCEPTANCE 04 eigenvalue residual: PASS (max residual {worst:.3e}, 17 bands x 32 nodes)"
    );
}

// ======================================================================
// 5. Free bands and the t <-> 2 pi - t symmetry
// ======================================================================

const C05_TOL: f64 = 1e-8;

#[test]
fn criterion_05_free_bands_match_parabolas_and_mirror_symmetry() {
    let q = free_q();
    let ts: Vec<f64> = (0..10).map(|i| 0.15 + i as f64 * (PI - 0.3) / 9.0).collect();
    let mut worst_free = 0.0f64;
    let mut worst_sym = 0.0f64;
    for &t in &ts {
        let mut at_t: Vec<Complex64> = Vec::new();
        let mut at_mirror: Vec<Complex64> = Vec::new();
        for k in -20..=20 {
            let la = locate_band_point(&q, k, t, TOL).expect("free locate").lambda;
            let lb = locate_band_point(&q, k, TAU - t, TOL)
                .expect("free locate")
                .lambda;
            let rho_a = TAU * k as f64 + t;
            let rho_b = TAU * k as f64 + (TAU - t);
            worst_free = worst_free.max((la - c(rho_a * rho_a, 0.0)).norm());
            worst_free = worst_free.max((lb - c(rho_b * rho_b, 0.0)).norm());
            at_t.push(la);
            at_mirror.push(lb);
        }
        let by_value = |x: &Complex64, y: &Complex64| {
            (x.re, x.im).partial_cmp(&(y.re, y.im)).expect("finite eigenvalues")
        };
        at_t.sort_by(by_value);
        at_mirror.sort_by(by_value);
        // The index window |k| <= 20 clips the two multisets differently at
        // the top (the mirror of the largest branch lies one index outside
        // the window), so the comparison covers the common bulk and drops
        // the top two entries.
        for (x, y) in at_t.iter().zip(&at_mirror).take(at_t.len() - 2) {
            worst_sym = worst_sym.max((x - y).norm());
        }
    }
    assert!(
        worst_free <= C05_TOL,
        "max |lambda_k(t) - (2 pi k + t)^2| = {worst_free:.3e} exceeds {C05_TOL:.0e}"
    );
    assert!(
        worst_sym <= C05_TOL,
        "max multiset mismatch between t and 2 pi - t = {worst_sym:.3e} exceeds {C05_TOL:.0e}"
    );
    println!(
        "ACCEPTANCE 05 free bands + symmetry: PASS (parabola defect {worst_free:.3e}, \
         mirror defect {worst_sym:.3e})"
    );
}

// ======================================================================
// 6. High-band deviation shows no growth
// ======================================================================

/// Largest allowed growth of the band deviation across the index range,
/// relative to its value at the start of the range.
const C06_GROWTH_RATIO: f64 = 3.0;

#[test]
fn criterion_06_band_deviation_does_not_grow_with_index() {
    let q = two_sided();
    let grid = GridSpec {
        x_points: 129,
        t_points: 32,
        quad_order: 16,
    };
    let nodes = grid.t_grid();
    let mut devs: BTreeMap<i32, f64> = BTreeMap::new();
    for k in (5..=20).chain(-20..=-5) {
        let band = trace_band(&q, k, &nodes, TOL).expect("band trace");
        let mut d = 0.0f64;
        for (&t, &lam) in band.t_nodes.iter().zip(&band.lambda_vals) {
            let rho = TAU * k as f64 + t;
            d = d.max((lam - c(rho * rho, 0.0)).norm());
        }
        devs.insert(k, d);
    }
    let baseline = devs[&5].max(devs[&-5]);
    let max_dev = devs.values().fold(0.0f64, |m, &v| m.max(v));
    let min_dev = devs.values().fold(f64::INFINITY, |m, &v| m.min(v));
    assert!(
        max_dev <= C06_GROWTH_RATIO * baseline,
        "deviation grows along the index range: max {max_dev:.3e} vs baseline {baseline:.3e} \
         at |k| = 5 (ratio {:.2}, allowed {C06_GROWTH_RATIO})",
        max_dev / baseline
    );
    println!(
        "ACCEPTANCE 06 band asymptotics: PASS (sup-deviation {max_dev:.3e} at the range start, \
         min {min_dev:.3e}; no growth over 5 <= |k| <= 20)"
    );
}

// ======================================================================
// 7. Real even potential: no singular records, alpha bounded below
// ======================================================================

const C07_ALPHA_FLOOR: f64 = 0.1;

#[test]
fn criterion_07_selfadjoint_case_has_no_singular_records() {
    let start = Instant::now();
    let q = cosine_2();
    // All derivative zeros of the discriminant are real for this potential;
    // the box bounds |lambda| <= 400 within the region where zeros can lie
    // (below the spectrum the discriminant is strictly decreasing).
    let rect = Rect::new(-10.0, 400.0, -6.0, 6.0).expect("rect");
    let cps = find_multiple_points(&q, &rect, TOL).expect("zero search");
    assert!(
        !cps.is_empty(),
        "gap extrema expected inside the box (the search found none)"
    );
    let mut singular = 0usize;
    let mut essential = 0usize;
    let mut spectral = 0usize;
    for cp in &cps {
        // Points with the discriminant off [-2, 2] never meet the spectrum.
        if cp.t0.is_none() {
            continue;
        }
        spectral += 1;
        let rec = classify_point(&q, cp, &GridSpec::default(), TOL).expect("classification");
        match rec.classification {
            Classification::SpectralSingularity => singular += 1,
            Classification::EssentialSpectralSingularity => essential += 1,
            Classification::RegularMultiple => {}
        }
    }
    assert_eq!(singular, 0, "self-adjoint operator produced a spectral singularity");
    assert_eq!(essential, 0, "self-adjoint operator produced an essential singularity");

    let grid = GridSpec {
        x_points: 257,
        t_points: 24,
        quad_order: 16,
    };
    let mut min_alpha = f64::INFINITY;
    for k in -5..=5 {
        for &t in &grid.t_grid() {
            let pair = normalized_pair(&q, k, t, &grid, TOL).expect("band pair");
            min_alpha = min_alpha.min(pair.alpha.norm());
        }
    }
    assert!(
        min_alpha >= C07_ALPHA_FLOOR,
        "pair angle dipped to {min_alpha:.3} (floor {C07_ALPHA_FLOOR})"
    );
    let secs = start.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE 07 self-adjoint null result: PASS ({} derivative zeros, {} on the spectrum, \
         0 singular; min |alpha| = {min_alpha:.3}, {secs:.1}s)",
        cps.len(),
        spectral
    );
}

// ======================================================================
// 8. One-sided exponential potential: Jordan doubles, beta >= 0.9
// ======================================================================

const C08_BETA_MIN: f64 = 0.9;
const C08_TIME_BUDGET: f64 = 300.0;
/// Independent location check: these potentials keep the free discriminant,
/// so the double points must land on the free double eigenvalues.
const C08_LOCATION_REL: f64 = 1e-5;
/// Off-diagonal Jordan certificate: a hundred-fold margin over the
/// tight-tolerance integration noise floor (~1e-11 relative).
const C08_OFFDIAG_FLOOR: f64 = 1e-9;

#[test]
fn criterion_08_one_sided_exponential_doubles_are_jordan() {
    let start = Instant::now();
    let q = one_sided_unit();
    let rect = Rect::new(0.0, 100.0, -5.0, 5.0).expect("rect");
    let mut cps: Vec<_> = find_multiple_points(&q, &rect, TOL)
        .expect("zero search")
        .into_iter()
        .filter(|cp| cp.t0.is_some())
        .collect();
    cps.sort_by(|a, b| {
        a.lambda0
            .re
            .partial_cmp(&b.lambda0.re)
            .expect("finite locations")
    });
    assert_eq!(cps.len(), 3, "expected exactly three double points below 100");

    let mut betas = Vec::new();
    for (n, cp) in cps.iter().enumerate() {
        let exact = (PI * (n + 1) as f64).powi(2);
        assert!(
            (cp.lambda0 - c(exact, 0.0)).norm() <= C08_LOCATION_REL * (1.0 + exact),
            "double point {} at {} is off the free location {exact:.6}",
            n + 1,
            cp.lambda0
        );
        assert_eq!(cp.algebraic_multiplicity, 2, "double point expected");

        // Contour oracle, implemented in this file: the discriminant takes
        // its critical value twice inside the circle, and its derivative
        // vanishes exactly once.
        let f0 = cp.f0;
        let roots_f = winding_count(
            |z| hill_discriminant(&q, z, TOL).expect("contour eval").f - f0,
            cp.lambda0,
            0.8,
        );
        let roots_df = winding_count(
            |z| hill_discriminant(&q, z, TOL).expect("contour eval").df,
            cp.lambda0,
            0.8,
        );
        assert_eq!(roots_f, 2, "contour count of F - F0 disagrees");
        assert_eq!(roots_df, 1, "contour count of F' disagrees");

        // Jordan oracle: tight-tolerance end values; a nonzero off-diagonal
        // monodromy entry rules out a two-dimensional eigenspace.
        let pair = integrate_fundamental(&q, cp.lambda0, 1e-12).expect("tight integration");
        let off = pair.phi1.norm().max(pair.dtheta1.norm());
        assert!(
            off >= C08_OFFDIAG_FLOOR * (1.0 + exact),
            "off-diagonal {off:.3e} indistinguishable from zero at lambda0 = {exact:.4}"
        );

        let rec = classify_point(&q, cp, &GridSpec::default(), TOL).expect("classification");
        assert_eq!(rec.geometric_multiplicity, 1, "Jordan block expected");
        assert!(
            matches!(rec.classification, Classification::EssentialSpectralSingularity),
            "expected an essential spectral singularity, got {:?}",
            rec.classification
        );
        let fit = rec.alpha_exponent.expect("exponent fit present");
        assert!(fit.conclusive, "exponent fit inconclusive at {exact:.4}");
        assert!(
            fit.beta >= C08_BETA_MIN,
            "fitted exponent {:.4} below {C08_BETA_MIN} at {exact:.4}",
            fit.beta
        );
        betas.push(fit.beta);
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < C08_TIME_BUDGET, "took {secs:.1}s, budget {C08_TIME_BUDGET}s");
    println!(
        "ACCEPTANCE 08 Jordan doubles: PASS (3 points at (pi n)^2, geometric multiplicity 1, \
         betas {:.4}/{:.4}/{:.4}, {secs:.1}s)",
        betas[0], betas[1], betas[2]
    );
}

// ======================================================================
// 9. Free reconstruction: accuracy, monotonicity, oracle agreement
// ======================================================================

const C09_L2_TOL: f64 = 1e-4;
const C09_TIME_BUDGET: f64 = 300.0;
/// Pointwise agreement with the independent truncated-inversion oracle
/// (closed-form transform of the spline, dense quadrature in this file).
const C09_ORACLE_TOL: f64 = 1e-5;

/// Truncated inversion of the spline transform over `|rho| <= omega`:
/// `(1/2 pi) integral fhat(rho) e^{i rho x} d rho` by composite Simpson.
/// The transform of the cardinal cubic B-spline on `[a, a + w]` is
/// `(w/4) e^{-i rho (a + w/2)} sinc^4(rho w / 8)`.
fn spline_truncated_inversion(a: f64, w: f64, omega: f64, xs: &[f64]) -> Vec<Complex64> {
    let n = 32_768usize;
    let dr = 2.0 * omega / n as f64;
    let sinc = |v: f64| if v.abs() < 1e-4 { 1.0 - v * v / 6.0 } else { v.sin() / v };
    let mut out = vec![c(0.0, 0.0); xs.len()];
    for j in 0..=n {
        let rho = -omega + j as f64 * dr;
        let simpson = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let fhat = 0.25 * w * sinc(rho * w / 8.0).powi(4) * c(0.0, -rho * (a + 0.5 * w)).exp();
        let coef = fhat * (simpson * dr / (3.0 * TAU));
        for (o, &x) in out.iter_mut().zip(xs) {
            *o += coef * c(0.0, rho * x).exp();
        }
    }
    out
}

#[test]
fn criterion_09_free_reconstruction_converges_monotonically() {
    let start = Instant::now();
    let q = free_q();
    let f = TestFunction::spline(0.0, 3.0).expect("spline");
    let grid = GridSpec::default(); // 513 x-samples, 512 t-nodes
    let sets = build_index_sets(&q, 0.02, 64, &[], &grid, TOL).expect("index sets");
    let plan = ExpansionPlan::new(sets, (-1.0, 4.0), grid, TOL);
    assert_eq!(plan.k_snapshots, vec![16, 32, 64]);
    let rep = synthesize(&q, &f, &plan).expect("synthesis");
    assert!(rep.fast_path, "free potential should pass the tameness scan");
    assert!(
        rep.l2_error <= C09_L2_TOL,
        "L2 error {:.3e} exceeds {C09_L2_TOL:.0e}",
        rep.l2_error
    );
    let cutoffs: Vec<i32> = rep.k_max_errors.iter().map(|&(k, _)| k).collect();
    let errs: Vec<f64> = rep.k_max_errors.iter().map(|&(_, e)| e).collect();
    assert_eq!(cutoffs, vec![16, 32, 64]);
    for w in errs.windows(2) {
        assert!(
            w[1] <= w[0] * (1.0 + 1e-9),
            "error increased under cutoff refinement: {errs:?}"
        );
    }

    // Independent oracle: the reconstruction with cutoff 64 equals the
    // inverse transform truncated to |rho| < 2 pi * 65.
    let stride = 8;
    let xs: Vec<f64> = rep.x_eval.iter().copied().step_by(stride).collect();
    let oracle = spline_truncated_inversion(0.0, 3.0, TAU * 65.0, &xs);
    let mut worst_oracle = 0.0f64;
    for (i, o) in oracle.iter().enumerate() {
        worst_oracle = worst_oracle.max((rep.f_rec[i * stride] - o).norm());
    }
    assert!(
        worst_oracle <= C09_ORACLE_TOL,
        "truncated-inversion oracle disagrees by {worst_oracle:.3e}"
    );

    let secs = start.elapsed().as_secs_f64();
    assert!(secs < C09_TIME_BUDGET, "took {secs:.1}s, budget {C09_TIME_BUDGET}s");
    println!(
        "ACCEPTANCE 09 free reconstruction: PASS (L2 {:.3e}; errors {:.3e}/{:.3e}/{:.3e} \
         nonincreasing; oracle defect {worst_oracle:.3e}; {secs:.1}s)",
        rep.l2_error, errs[0], errs[1], errs[2]
    );
}

// ======================================================================
// 10. Perturbed reconstruction and the pairing dichotomy
// ======================================================================

const C10_L2_TOL: f64 = 1e-3;
const C10_GROWTH_MIN: f64 = 0.8;
const C10_STABLE_REL: f64 = 1e-4;

#[test]
fn criterion_10_pairing_restores_convergence() {
    // (a) Small one-sided perturbation, pairing enabled: the reconstruction
    // converges and every window limit settles.
    let q = one_sided_03();
    let f = TestFunction::spline(0.0, 3.0).expect("spline");
    let grid = GridSpec {
        x_points: 257,
        t_points: 256,
        quad_order: 16,
    };
    let sets = build_index_sets(&q, 0.02, 16, &[], &grid, TOL).expect("index sets");
    let plan = ExpansionPlan::new(sets, (-1.0, 4.0), grid, TOL);
    assert!(plan.pairing);
    let rep = synthesize(&q, &f, &plan).expect("synthesis");
    assert!(!rep.fast_path, "every gap is closed; the windowed path is mandatory");
    assert!(!rep.nonconvergent, "paired window limits must settle");
    assert!(
        rep.l2_error <= C10_L2_TOL,
        "paired L2 error {:.3e} exceeds {C10_L2_TOL:.0e}",
        rep.l2_error
    );
    let worst_tail_lib = rep
        .bundles
        .iter()
        .map(|b| b.tail_rel_change)
        .fold(0.0f64, f64::max);
    assert!(
        worst_tail_lib <= C10_STABLE_REL,
        "a paired window value still moved by {worst_tail_lib:.3e} on the last ring"
    );

    // (b) Pure one-sided exponential through the binary: without pairing the
    // single-band window integrals grow like 1/delta and the run reports
    // nonconvergence (exit 4); with pairing the sum stabilizes (exit 0).
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{
  "potential": {"coeffs": [[1, 1.0, 0.0]]},
  "grid": {"x_points": 129, "t_points": 64, "quad_order": 16},
  "k_max": 2,
  "eval_interval": [-1.0, 2.0],
  "test_function": {"kind": "spline", "support": [0.0, 1.0], "params": {"amplitude": [1.0, 0.0]}}
}"#,
    )
    .expect("config written");

    let out_unpaired = dir.path().join("unpaired");
    let run = run_cli(&cfg_path, &out_unpaired, &["--no-pairing"], "expand");
    assert_eq!(
        run.status.code(),
        Some(4),
        "unpaired run should report nonconvergence; stderr: {}",
        String::from_utf8_lossy(&run.stderr)
    );
    let growth: Vec<f64> = log_events(&out_unpaired)
        .iter()
        .filter(|e| e["event"] == "bundle")
        .map(|e| e["growth_exponent"].as_f64().expect("numeric growth"))
        .collect();
    assert!(!growth.is_empty(), "no bundle diagnostics in the log");
    let max_growth = growth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        max_growth >= C10_GROWTH_MIN,
        "no single-band window integral shows pole-like growth (max exponent {max_growth:.2})"
    );

    let out_paired = dir.path().join("paired");
    let run = run_cli(&cfg_path, &out_paired, &[], "expand");
    assert_eq!(
        run.status.code(),
        Some(0),
        "paired run should converge; stderr: {}",
        String::from_utf8_lossy(&run.stderr)
    );
    let tails: Vec<f64> = log_events(&out_paired)
        .iter()
        .filter(|e| e["event"] == "bundle")
        .map(|e| e["tail_rel_change"].as_f64().expect("numeric tail"))
        .collect();
    assert!(!tails.is_empty(), "no bundle diagnostics in the paired log");
    let worst_tail = tails.iter().copied().fold(0.0f64, f64::max);
    assert!(
        worst_tail <= C10_STABLE_REL,
        "paired window value still moved by {worst_tail:.3e} over the last ladder step"
    );
    let conv = std::fs::read_to_string(out_paired.join("convergence.csv")).expect("table");
    let last = conv.lines().last().expect("nonempty table");
    assert!(
        last.ends_with(",1"),
        "innermost ladder row not flagged stabilized: {last}"
    );

    println!(
        "ACCEPTANCE 10 pairing dichotomy: PASS (paired L2 {:.3e}; unpaired growth exponent \
         {max_growth:.2} >= {C10_GROWTH_MIN}; paired tail {worst_tail:.2e} <= {C10_STABLE_REL:.0e})",
        rep.l2_error
    );
}

// ======================================================================
// 11. Quasimomentum-domain and eigenvalue-domain window integrals agree
// ======================================================================

const C11_REL_TOL: f64 = 1e-5;
/// A window term whose supremum sits below this is zero to working
/// precision (e.g. the test function's transform has a zero on the band),
/// so a relative comparison degenerates to roundoff-over-roundoff; such
/// draws are replaced.
const C11_DEGENERATE_FLOOR: f64 = 1e-13;

#[test]
fn criterion_11_window_integral_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC11);
    let grid = GridSpec {
        x_points: 129,
        t_points: 64,
        quad_order: 16,
    };
    let f = TestFunction::spline(0.0, 0.9).expect("spline");
    let eval = (-1.0, 2.0);
    let pool = [free_q(), one_sided_03(), two_sided(), one_sided_unit()];
    let h = 0.02;
    let mut worst = 0.0f64;
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < 10 {
        attempts += 1;
        assert!(attempts < 40, "too many degenerate window terms");
        let q = &pool[attempts % pool.len()];
        let k = rng.random_range(1..=5i32);
        let s_hi = h * (0.34 + 0.66 * rng.random::<f64>());
        let s_lo = s_hi * (0.15 + 0.35 * rng.random::<f64>());
        let tv = t_domain_term(q, &f, k, (s_lo, s_hi), eval, &grid, TOL)
            .expect("quasimomentum route");
        let lv = lambda_domain_term(q, &f, k, (s_lo, s_hi), eval, &grid, TOL)
            .expect("eigenvalue route");
        let sup = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        let scale = sup(&tv).max(sup(&lv));
        if scale < C11_DEGENERATE_FLOOR {
            continue;
        }
        let diff = tv
            .iter()
            .zip(&lv)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        eprintln!(
            "case {done}: pool {} k {k} s [{s_lo:.5}, {s_hi:.5}] rel {:.3e}",
            attempts % pool.len(),
            diff / scale
        );
        worst = worst.max(diff / scale);
        done += 1;
    }
    assert!(
        worst <= C11_REL_TOL,
        "routes disagree by {worst:.3e} relative (allowed {C11_REL_TOL:.0e})"
    );
    println!(
        "ACCEPTANCE 11 route agreement: PASS (max relative gap {worst:.3e} over 10 window terms)"
    );
}

// ======================================================================
// 12. Determinism of the full pipeline
// ======================================================================

#[test]
fn criterion_12_repeated_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().expect("temp dir");
    let out: PathBuf = dir.path().join("out");
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{
  "potential": {"coeffs": [[1, 1.0, 0.0]]},
  "grid": {"x_points": 65, "t_points": 32, "quad_order": 16},
  "k_max": 2,
  "lambda_window": [0.0, 50.0],
  "lambda_points": 41,
  "im_half": 5.0,
  "eval_interval": [-1.0, 2.0],
  "test_function": {"kind": "spline", "support": [0.0, 1.0], "params": {"amplitude": [1.0, 0.0]}},
  "seed": 11
}"#,
    )
    .expect("config written");

    let run_pipeline = || {
        for sub in ["discriminant", "bands", "singularities", "expand", "verify"] {
            let run = run_cli(&cfg_path, &out, &[], sub);
            assert_eq!(
                run.status.code(),
                Some(0),
                "{sub} failed; stderr: {}",
                String::from_utf8_lossy(&run.stderr)
            );
        }
    };

    run_pipeline();
    let first = dir_bytes(&out);
    assert!(
        first.len() >= 10,
        "expected a full artifact set, found {} files",
        first.len()
    );
    run_pipeline();
    let second = dir_bytes(&out);

    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>(),
        "artifact sets differ between runs"
    );
    for (name, bytes) in &first {
        assert!(
            second[name] == *bytes,
            "artifact {name} changed between identical runs"
        );
    }
    println!(
        "ACCEPTANCE 12 determinism: PASS ({} artifacts bitwise-identical across repeated \
         full-pipeline runs)",
        first.len()
    );
}
