//! Run configuration for the command-line driver.
//!
//! A [`RunConfig`] is one JSON file describing everything a command needs:
//! the potential, the grids, the tolerances, the expansion window geometry,
//! the test function, and the output directory. Every field has a default,
//! so an empty object `{}` is a valid configuration; command-line flags
//! (`--out`, `--k-max`, `--h`, `--no-pairing`, `--seed`) override the file.
//!
//! Each command echoes the fully resolved configuration as
//! `effective_config.json` into the output directory; re-running any
//! command from that echo reproduces the run byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{GridSpec, Potential, TestFunction};
use crate::singularity::{DEFAULT_H, FIT_SLACK};

/// Driver configuration: JSON on disk, one file per run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// The periodic potential `q` (mean mode plus oscillating Fourier
    /// modes); defaults to the free operator `q = 0`.
    pub potential: Potential,
    /// Sample-grid sizes shared by all spectral routines.
    pub grid: GridSpec,
    /// ODE integration tolerance threaded through every solve.
    pub tol: f64,
    /// Scale, per unit `1 + |lambda|`, below which `|F'|` counts as
    /// critical (multiple-point threshold).
    pub crit_tol: f64,
    /// Scale, per unit `1 + |lambda|`, for the monodromy off-diagonal
    /// entries deciding geometric multiplicity 2 at a double eigenvalue.
    pub gm_tol: f64,
    /// Slack around the exponent threshold 1: a fitted `|alpha|` decay
    /// exponent `beta >= 1 - fit_slack` marks the reciprocal pairing
    /// nonintegrable.
    pub fit_slack: f64,
    /// Half-width of the edge windows around the quasimomenta `0` and
    /// `pi`.
    pub h: f64,
    /// Band cutoff: indices `|k| <= k_max` enter sweeps and expansions.
    pub k_max: i32,
    /// Excision radii for the shrinking-window limits; `None` selects the
    /// dyadic default `h * 2^{-j}`, `j = 1..=8`.
    pub delta_ladder: Option<Vec<f64>>,
    /// Compactly supported function to expand and reconstruct.
    pub test_function: TestFunction,
    /// Directory receiving all artifacts (created if missing).
    pub out_dir: PathBuf,
    /// Real interval sampled by the `discriminant` command; also the real
    /// extent of the multiple-point search region for `singularities`.
    pub lambda_window: (f64, f64),
    /// Number of uniform sample rows in the discriminant sweep.
    pub lambda_points: usize,
    /// Imaginary half-height of the multiple-point search rectangle.
    pub im_half: f64,
    /// Target interval `[a, b]` for reconstruction errors.
    pub eval_interval: (f64, f64),
    /// Group `{k, -k}` / `{k, -(k+1)}` edge windows before taking the
    /// shrinking-excision limit (the convergent summation order); the
    /// `--no-pairing` flag forces this off to expose the divergence.
    pub pairing: bool,
    /// Seed for the randomized invariant checks of the `verify` command.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            potential: Potential::zero(),
            grid: GridSpec::default(),
            tol: 1e-10,
            crit_tol: 1e-8,
            gm_tol: 1e-7,
            fit_slack: FIT_SLACK,
            h: DEFAULT_H,
            k_max: 8,
            delta_ladder: None,
            test_function: TestFunction::spline(0.0, 3.0).expect("default spline is valid"),
            out_dir: PathBuf::from("out"),
            lambda_window: (0.0, 100.0),
            lambda_points: 201,
            im_half: 10.0,
            eval_interval: (-1.0, 4.0),
            pairing: true,
            seed: 7,
        }
    }
}

impl RunConfig {
    /// Parse a configuration file (strict JSON; unknown fields rejected).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The excision ladder: configured list, or the dyadic default
    /// `h * 2^{-j}`, `j = 1..=8`.
    pub fn resolved_ladder(&self) -> Vec<f64> {
        match &self.delta_ladder {
            Some(l) => l.clone(),
            None => (1..=8).map(|j| self.h * 0.5f64.powi(j)).collect(),
        }
    }

    /// Check every invariant a command relies on.
    ///
    /// # Errors
    /// [`Error::InvalidConfig`] (or a grid error) naming the violated
    /// bound.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        for (name, v) in [
            ("tol", self.tol),
            ("crit_tol", self.crit_tol),
            ("gm_tol", self.gm_tol),
            ("fit_slack", self.fit_slack),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "tolerance {name} = {v} must be positive and finite"
                )));
            }
        }
        if self.fit_slack >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "fit_slack = {} must be below 1 (it is a slack around the exponent threshold 1)",
                self.fit_slack
            )));
        }
        if !(self.h > 0.0 && self.h < 1.0 / 32.0) {
            return Err(Error::InvalidConfig(format!(
                "window half-width h = {} must lie in (0, 1/32)",
                self.h
            )));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidConfig(format!(
                "k_max = {} must be at least 1",
                self.k_max
            )));
        }
        if let Some(ladder) = &self.delta_ladder {
            if ladder.is_empty() {
                return Err(Error::InvalidConfig("delta_ladder must be nonempty".into()));
            }
            if ladder.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
                return Err(Error::InvalidConfig(
                    "delta_ladder entries must be positive and finite".into(),
                ));
            }
            if !ladder.windows(2).all(|w| w[1] < w[0]) {
                return Err(Error::InvalidConfig(
                    "delta_ladder must be strictly decreasing".into(),
                ));
            }
            if ladder[0] >= self.h {
                return Err(Error::InvalidConfig(format!(
                    "delta_ladder starts at {} but must stay inside the window h = {}",
                    ladder[0], self.h
                )));
            }
        }
        let (w0, w1) = self.lambda_window;
        if !(w0.is_finite() && w1.is_finite() && w0 < w1) {
            return Err(Error::InvalidConfig(format!(
                "lambda_window ({w0}, {w1}) must be an ordered finite interval"
            )));
        }
        if self.lambda_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "lambda_points = {} must be at least 2",
                self.lambda_points
            )));
        }
        if !(self.im_half > 0.0 && self.im_half.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "im_half = {} must be positive and finite",
                self.im_half
            )));
        }
        let (a, b) = self.eval_interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidConfig(format!(
                "eval_interval ({a}, {b}) must be an ordered finite interval"
            )));
        }
        Ok(())
    }
}
