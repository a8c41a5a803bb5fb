//! Temporary diagnostic probe (not part of the suite).

use hillbloch::discriminant::{find_multiple_points, hill_discriminant};
use hillbloch::monodromy::integrate_fundamental;
use hillbloch::potential::{GridSpec, Potential};
use hillbloch::rootfind::Rect;
use hillbloch::singularity::classify_point;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn probe_selfadjoint_points() {
    let q = Potential::from_modes([(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).unwrap();
    let rect = Rect::new(-10.0, 400.0, -6.0, 6.0).unwrap();
    let cps = find_multiple_points(&q, &rect, 1e-10).unwrap();
    eprintln!("{} derivative zeros", cps.len());
    for cp in &cps {
        let d = hill_discriminant(&q, cp.lambda0, 1e-12).unwrap();
        let pair = integrate_fundamental(&q, cp.lambda0, 1e-12).unwrap();
        eprintln!(
            "lambda0 {:?}  F0 {:?}  |F0|-2 {:.3e}  t0 {:?}  am {}  |F'| {:.2e}  |phi1| {:.2e}  |dtheta1| {:.2e}",
            cp.lambda0,
            cp.f0,
            cp.f0.norm() - 2.0,
            cp.t0,
            cp.algebraic_multiplicity,
            d.df.norm(),
            pair.phi1.norm(),
            pair.dtheta1.norm(),
        );
        if cp.t0.is_some() {
            match classify_point(&q, cp, &GridSpec::default(), 1e-10) {
                Ok(rec) => eprintln!(
                    "   -> class {:?} gm {} beta {:?} conclusive {:?} bands {:?}",
                    rec.classification,
                    rec.geometric_multiplicity,
                    rec.alpha_exponent.as_ref().map(|f| f.beta),
                    rec.alpha_exponent.as_ref().map(|f| f.conclusive),
                    rec.involved_bands
                ),
                Err(e) => eprintln!("   -> classify error: {e}"),
            }
        }
    }
}
