//! TOML experiment configuration.
//!
//! ```toml
//! [grid]
//! cell_width = 0.01
//! a_max = 10.0
//! p = 2.0
//!
//! [model]
//! species = 1
//! kappa = 1.0
//! a_dagger = 2.0
//! beta = 1.5                                   # constant on [0, a_dagger)
//! mu = { ages = [0.0, 5.0], values = [0.5, 0.8] }
//!
//! [scheme]
//! epsilon = 0.05
//! tau = 2.0
//!
//! [run]
//! seed = 7
//! ```
//!
//! Rate tables are piecewise constant: `values[i]` holds on
//! `[ages[i], ages[i + 1])` and the last value extends to `a_max`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist_to_c, AgeGrid, GridFunction};
use crate::model::{bump, ModelParams, MEMBERSHIP_TOL};
use crate::scheme::SchemeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    pub model: ModelSection,
    pub scheme: SchemeSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cell_width: f64,
    pub a_max: f64,
    #[serde(default = "default_p")]
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_species")]
    pub species: usize,
    pub kappa: f64,
    pub a_dagger: f64,
    pub beta: Rate,
    pub mu: Rate,
}

/// A rate given as one number or as a piecewise-constant table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rate {
    Constant(f64),
    Table { ages: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub epsilon: f64,
    pub tau: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_min: Option<f64>,
    #[serde(default = "default_max_knots")]
    pub max_knots: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Random forcings per horizon when tabulating `delta`.
    #[serde(default = "default_delta_trials")]
    pub delta_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Initial state: `x0_amplitude * sin^2` on `[x0_start, x0_end]`.
    #[serde(default = "default_x0_amplitude")]
    pub x0_amplitude: f64,
    #[serde(default = "default_x0_start")]
    pub x0_start: f64,
    #[serde(default = "default_x0_end")]
    pub x0_end: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Coarsest epsilon of `convergence`; later levels halve it.
    #[serde(default = "default_convergence_epsilon")]
    pub convergence_epsilon: f64,
    #[serde(default = "default_picard_iters")]
    pub picard_iters: usize,
    #[serde(default = "default_subtangency_steps")]
    pub subtangency_steps: Vec<f64>,
    /// Random states drawn by `subtangency` and `invariance-report`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_p() -> f64 {
    2.0
}
fn default_species() -> usize {
    1
}
fn default_max_knots() -> usize {
    100_000
}
fn default_probes() -> usize {
    8
}
fn default_delta_trials() -> usize {
    8
}
fn default_x0_amplitude() -> f64 {
    0.02
}
fn default_x0_start() -> f64 {
    0.5
}
fn default_x0_end() -> f64 {
    4.0
}
fn default_levels() -> usize {
    4
}
fn default_convergence_epsilon() -> f64 {
    0.1
}
fn default_picard_iters() -> usize {
    50
}
fn default_subtangency_steps() -> Vec<f64> {
    vec![0.08, 0.04, 0.02, 0.01]
}
fn default_samples() -> usize {
    10
}

/// The reference experiment: one species, `kappa = 1`, `beta = 1.5` on
/// `[0, 2)`, `mu = 0.5`, `p = 2`, ages `[0, 10)` with `da = 0.01`,
/// `eps = 0.05`, `tau = 2`.
pub const DEFAULT_CONFIG: &str = r#"[grid]
cell_width = 0.01
a_max = 10.0
p = 2.0

[model]
species = 1
kappa = 1.0
a_dagger = 2.0
beta = 1.5
mu = 0.5

[scheme]
epsilon = 0.05
tau = 2.0

[run]
seed = 7
"#;

fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

impl Config {
    pub fn default_experiment() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("built-in config is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates; errors name the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let reason = e.message().to_string();
            let key = reason
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".into());
            config_error(&key, reason)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<AgeGrid> {
        AgeGrid::with_horizon(self.grid.cell_width, self.grid.a_max, self.grid.p)
            .map_err(|e| config_error("grid", e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams> {
        let grid = self.grid()?;
        let m = &self.model;
        let beta = sample_rate(&grid, &m.beta, Some(m.a_dagger));
        let mu = sample_rate(&grid, &m.mu, None);
        ModelParams::new(grid, m.species, m.kappa, beta, mu, m.a_dagger)
            .map_err(|e| config_error("model", e.to_string()))
    }

    pub fn scheme(&self) -> SchemeConfig {
        let s = &self.scheme;
        SchemeConfig {
            epsilon: s.epsilon,
            tau: s.tau,
            gamma: s.gamma,
            rho: s.rho,
            eta_min: s.eta_min,
            max_knots: s.max_knots,
            probes: s.probes,
            seed: self.run.seed,
        }
    }

    pub fn initial_state(&self) -> Result<GridFunction> {
        let r = &self.run;
        Ok(bump(&self.grid()?, self.model.species, r.x0_amplitude, r.x0_start, r.x0_end))
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let aligned = |key: &str, t: f64| {
            grid.steps(t)
                .map_err(|_| config_error(key, format!("{t} is not a multiple of cell_width = {}", grid.cell_width())))
        };
        let m = &self.model;
        if m.species == 0 {
            return Err(config_error("model.species", "must be at least 1"));
        }
        if !(m.kappa > 0.0 && m.kappa.is_finite()) {
            return Err(config_error("model.kappa", "must be positive"));
        }
        aligned("model.a_dagger", m.a_dagger)?;
        check_rate("model.beta", &m.beta, |v| v >= 0.0, "must be non-negative")?;
        check_rate("model.mu", &m.mu, |v| v > 0.0, "must be positive")?;

        let s = &self.scheme;
        if !(s.epsilon > 0.0 && s.epsilon < 1.0) {
            return Err(config_error("scheme.epsilon", "must lie in (0, 1)"));
        }
        if aligned("scheme.tau", s.tau)? == 0 {
            return Err(config_error("scheme.tau", "must be positive"));
        }
        if !(s.gamma >= 0.0 && s.gamma.is_finite()) {
            return Err(config_error("scheme.gamma", "must be non-negative"));
        }
        if let Some(rho) = s.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(config_error("scheme.rho", "must be positive"));
            }
        }
        if let Some(eta) = s.eta_min {
            if aligned("scheme.eta_min", eta)? == 0 {
                return Err(config_error("scheme.eta_min", "must be at least one cell"));
            }
        }
        if s.max_knots == 0 {
            return Err(config_error("scheme.max_knots", "must be positive"));
        }
        if s.delta_trials == 0 {
            return Err(config_error("scheme.delta_trials", "must be positive"));
        }
        let needed = m.a_dagger + s.tau;
        if grid.time(grid.n_cells()) < needed * (1.0 - 1e-12) {
            return Err(config_error(
                "grid.a_max",
                format!("must cover a_dagger + tau = {needed} so births stay on the grid"),
            ));
        }

        let r = &self.run;
        if !(r.x0_start < r.x0_end) || r.x0_start < 0.0 {
            return Err(config_error("run.x0_start", "need 0 <= x0_start < x0_end"));
        }
        if r.levels < 2 {
            return Err(config_error("run.levels", "at least 2 levels are needed"));
        }
        if !(r.convergence_epsilon > 0.0 && r.convergence_epsilon < 1.0) {
            return Err(config_error("run.convergence_epsilon", "must lie in (0, 1)"));
        }
        if r.picard_iters == 0 {
            return Err(config_error("run.picard_iters", "must be positive"));
        }
        if r.samples == 0 {
            return Err(config_error("run.samples", "must be positive"));
        }
        if r.subtangency_steps.is_empty() {
            return Err(config_error("run.subtangency_steps", "must not be empty"));
        }
        for &h in &r.subtangency_steps {
            if aligned("run.subtangency_steps", h)? == 0 {
                return Err(config_error("run.subtangency_steps", "steps must be at least one cell"));
            }
        }
        let x0 = self.initial_state()?;
        let d = dist_to_c(&x0, m.kappa);
        if d > MEMBERSHIP_TOL {
            return Err(config_error(
                "run.x0_amplitude",
                format!("initial state lies {d:e} outside the invariant set"),
            ));
        }
        Ok(())
    }
}

fn check_rate(key: &str, rate: &Rate, ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    match rate {
        Rate::Constant(v) => {
            if !(v.is_finite() && ok(*v)) {
                return Err(config_error(key, format!("{what}, got {v}")));
            }
        }
        Rate::Table { ages, values } => {
            if ages.is_empty() || ages.len() != values.len() {
                return Err(config_error(key, "ages and values must be non-empty and of equal length"));
            }
            if ages[0] != 0.0 {
                return Err(config_error(key, "the first age must be 0"));
            }
            if ages.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(config_error(key, "ages must be strictly increasing"));
            }
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && ok(**v))) {
                return Err(config_error(key, format!("{what}, got {v}")));
            }
        }
    }
    Ok(())
}

/// Per-cell rate at the cell centers, zero from `cutoff` on.
fn sample_rate(grid: &AgeGrid, rate: &Rate, cutoff: Option<f64>) -> Vec<f64> {
    let edge_tol = 1e-9 * grid.cell_width();
    (0..grid.n_cells())
        .map(|i| {
            if cutoff.is_some_and(|c| grid.time(i) >= c - edge_tol) {
                return 0.0;
            }
            let a = grid.center(i);
            match rate {
                Rate::Constant(v) => *v,
                Rate::Table { ages, values } => values[ages.partition_point(|&x| x <= a) - 1],
            }
        })
        .collect()
}
