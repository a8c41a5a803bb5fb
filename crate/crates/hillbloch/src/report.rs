//! Artifact writers: CSV tables, JSON reports, and the structured run log.
//!
//! Every writer is deterministic — fixed column orders, fixed key orders,
//! shortest round-trip float formatting, no timestamps and no absolute
//! paths — so two runs with the same configuration produce byte-identical
//! files.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::discriminant::{Band, DiscriminantValue, NodeFlag};
use crate::error::Result;
use crate::expansion::{ConvergenceRow, ReconstructionReport};
use crate::singularity::{IndexSets, KGroup, SingularityRecord};

/// Shortest decimal form that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

// ======================================================================
// CSV tables
// ======================================================================

/// Discriminant sweep: `lambda, re_f, im_f, re_df, im_df, re_p, im_p`.
pub fn write_discriminant_csv(path: &Path, rows: &[(f64, DiscriminantValue)]) -> Result<()> {
    let mut out = String::from("lambda,re_f,im_f,re_df,im_df,re_p,im_p\n");
    for (lam, d) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(*lam),
            num(d.f.re),
            num(d.f.im),
            num(d.df.re),
            num(d.df.im),
            num(d.p.re),
            num(d.p.im),
        );
    }
    write_atomic(path, &out)
}

/// One traced band: `k, t, re_lambda, im_lambda, re_alpha, im_alpha, flag`.
///
/// `alpha_vals` must be filled (same length as the nodes); the flag column
/// is `simple` or `near_multiple`.
pub fn write_band_csv(path: &Path, band: &Band) -> Result<()> {
    let mut out = String::from("k,t,re_lambda,im_lambda,re_alpha,im_alpha,flag\n");
    for (i, &t) in band.t_nodes.iter().enumerate() {
        let lam = band.lambda_vals[i];
        let alpha = band
            .alpha_vals
            .get(i)
            .copied()
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let flag = match band.flags[i] {
            NodeFlag::Simple => "simple",
            NodeFlag::NearMultiple => "near_multiple",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            band.k,
            num(t),
            num(lam.re),
            num(lam.im),
            num(alpha.re),
            num(alpha.im),
            flag,
        );
    }
    write_atomic(path, &out)
}

/// Deterministic per-band file name: `band_+003.csv`, `band_-012.csv`.
pub fn band_file_name(k: i32) -> String {
    format!("band_{}{:03}.csv", if k < 0 { '-' } else { '+' }, k.abs())
}

/// Reconstruction samples: `x, re_f, im_f, re_frec, im_frec, abs_err`.
pub fn write_reconstruction_csv(path: &Path, rep: &ReconstructionReport) -> Result<()> {
    let mut out = String::from("x,re_f,im_f,re_frec,im_frec,abs_err\n");
    for (i, &x) in rep.x_eval.iter().enumerate() {
        let ft = rep.f_true[i];
        let fr = rep.f_rec[i];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(x),
            num(ft.re),
            num(ft.im),
            num(fr.re),
            num(fr.im),
            num((fr - ft).norm()),
        );
    }
    write_atomic(path, &out)
}

/// Convergence table: `k_max, delta, l2_error, stabilized` (0/1).
pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut out = String::from("k_max,delta,l2_error,stabilized\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.k_max,
            num(r.delta),
            num(r.l2_error),
            u8::from(r.stabilized),
        );
    }
    write_atomic(path, &out)
}

// ======================================================================
// Singularity JSON report
// ======================================================================

/// One classified multiple point, in report form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularityRecordJson {
    pub re_lambda0: f64,
    pub im_lambda0: f64,
    /// Quasimomentum in `[0, pi]` (the mirror point `2 pi - t0` carries
    /// the same eigenvalue).
    pub t0: f64,
    pub alg_mult: usize,
    pub geo_mult: u8,
    /// `regular_multiple` | `spectral_singularity` |
    /// `essential_spectral_singularity`.
    pub class: String,
    /// Fitted `|alpha|` decay exponent on the lowest involved band.
    pub beta: Option<f64>,
    /// Largest tail-slope deviation of the exponent fit.
    pub beta_residual: Option<f64>,
    /// `beta >= 1 - fit_slack` on a conclusive fit: the reciprocal
    /// pairing is nonintegrable across this point.
    pub nonintegrable: Option<bool>,
    /// Band indices whose traced eigenvalues converge to this point.
    pub bands: Vec<i32>,
    /// The asymptotic classification theorems do not reach this low an
    /// index; the record rests on the numerics alone.
    pub low_index_unproven: bool,
}

impl SingularityRecordJson {
    /// Flatten a classified record, applying the configured exponent
    /// slack.
    pub fn from_record(r: &SingularityRecord, fit_slack: f64) -> Self {
        let fit = r.alpha_exponent.as_ref();
        SingularityRecordJson {
            re_lambda0: r.lambda0.re,
            im_lambda0: r.lambda0.im,
            t0: r.t0,
            alg_mult: r.algebraic_multiplicity,
            geo_mult: r.geometric_multiplicity,
            class: r.classification.as_str().to_string(),
            beta: fit.map(|f| f.beta),
            beta_residual: fit.map(|f| f.residual),
            nonintegrable: fit.map(|f| f.conclusive && f.beta >= 1.0 - fit_slack),
            bands: r.involved_bands.clone(),
            low_index_unproven: r.low_index_unproven,
        }
    }
}

/// One group of bands sharing a singular edge limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KGroupJson {
    pub re_lambda0: f64,
    pub im_lambda0: f64,
    pub members: Vec<i32>,
}

impl From<&KGroup> for KGroupJson {
    fn from(g: &KGroup) -> Self {
        KGroupJson {
            re_lambda0: g.lambda0.re,
            im_lambda0: g.lambda0.im,
            members: g.members.clone(),
        }
    }
}

/// Summary of the low-index bookkeeping behind the paired expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexSetsJson {
    pub h: f64,
    pub k_max: i32,
    pub n0: i32,
    pub npi: i32,
    pub set_n0: Vec<i32>,
    pub set_npi: Vec<i32>,
    pub s0h: Vec<i32>,
    pub spih: Vec<i32>,
    pub k_groups_0: Vec<KGroupJson>,
    pub k_groups_pi: Vec<KGroupJson>,
    pub pair_map_0: Vec<(i32, i32)>,
    pub pair_map_pi: Vec<(i32, i32)>,
}

impl From<&IndexSets> for IndexSetsJson {
    fn from(s: &IndexSets) -> Self {
        IndexSetsJson {
            h: s.h,
            k_max: s.k_max,
            n0: s.n0,
            npi: s.npi,
            set_n0: s.set_n0.clone(),
            set_npi: s.set_npi.clone(),
            s0h: s.s0h.clone(),
            spih: s.spih.clone(),
            k_groups_0: s.k_groups_0.iter().map(KGroupJson::from).collect(),
            k_groups_pi: s.k_groups_pi.iter().map(KGroupJson::from).collect(),
            pair_map_0: s.pair_map_0.clone(),
            pair_map_pi: s.pair_map_pi.clone(),
        }
    }
}

/// The `singularities` command output: classified points plus the index
/// sets they induce.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularityReportJson {
    pub records: Vec<SingularityRecordJson>,
    pub index_sets: IndexSetsJson,
}

/// Serialize a singularity report (pretty JSON, fixed field order).
pub fn write_singularity_json(path: &Path, report: &SingularityReportJson) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_atomic(path, &text)
}

// ======================================================================
// Structured log
// ======================================================================

/// Append-only structured log, written as JSON lines.
///
/// Events carry no timestamps and no absolute paths, so the log is part
/// of the deterministic artifact set.
#[derive(Debug, Default)]
pub struct RunLog {
    events: Vec<serde_json::Value>,
}

impl RunLog {
    pub fn new() -> Self {
        RunLog::default()
    }

    /// Record an event; `fields` must be a JSON object.
    pub fn event(&mut self, kind: &str, fields: serde_json::Value) {
        let mut obj = json!({ "event": kind });
        if let (Some(dst), Some(src)) = (obj.as_object_mut(), fields.as_object()) {
            for (k, v) in src {
                dst.insert(k.clone(), v.clone());
            }
        }
        self.events.push(obj);
    }

    /// Record a warning diagnostic.
    pub fn warning(&mut self, message: &str) {
        self.event("warning", json!({ "message": message }));
    }

    /// Record an artifact by file name (never by absolute path).
    pub fn artifact(&mut self, name: &str) {
        self.event("artifact_written", json!({ "file": name }));
    }

    /// Number of recorded events.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// True when nothing has been recorded.
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Write all events as JSON lines.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{e}");
        }
        write_atomic(path, &out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cpx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[
            0.0,
            1.0,
            -1.5,
            39.47841760435743,
            1e-300,
            -2.718281828459045e8,
            f64::MIN_POSITIVE,
        ] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(!s.contains(','));
        }
    }

    #[test]
    fn discriminant_csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let rows = vec![(
            1.5,
            DiscriminantValue {
                lambda: cpx(1.5, 0.0),
                f: cpx(0.7, -0.1),
                df: cpx(-0.9, 0.0),
                p: cpx(1.87, 0.04),
            },
        )];
        write_discriminant_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "lambda,re_f,im_f,re_df,im_df,re_p,im_p"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 7);
        assert_eq!(row[0], "1.5");
        assert_eq!(row[2], "-0.1");
        assert!(lines.next().is_none());
    }

    #[test]
    fn band_file_names_sort_by_index() {
        assert_eq!(band_file_name(3), "band_+003.csv");
        assert_eq!(band_file_name(-12), "band_-012.csv");
        assert_eq!(band_file_name(0), "band_+000.csv");
    }

    #[test]
    fn log_is_deterministic_and_timestamp_free() {
        let mut a = RunLog::new();
        a.event("start", json!({"cmd": "bands"}));
        a.warning("w");
        a.artifact("band_+000.csv");
        let mut b = RunLog::new();
        b.event("start", json!({"cmd": "bands"}));
        b.warning("w");
        b.artifact("band_+000.csv");
        let dir = tempfile::tempdir().unwrap();
        let (pa, pb) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        a.write(&pa).unwrap();
        b.write(&pb).unwrap();
        let (ta, tb) = (
            std::fs::read_to_string(&pa).unwrap(),
            std::fs::read_to_string(&pb).unwrap(),
        );
        assert_eq!(ta, tb);
        assert_eq!(ta.lines().count(), 3);
        for line in ta.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("event").is_some());
            assert!(v.get("time").is_none());
        }
    }
}
