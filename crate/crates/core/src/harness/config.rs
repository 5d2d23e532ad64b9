//! Scenario files: flat `key = value` text grouped in sections (TOML).
//!
//! ```toml
//! name = "shallow-water-bump"
//!
//! [params]
//! alpha = 1.0
//! gamma = 2.0
//! eps = 0.125          # default 0.125; also a = 1, mu = 1
//!
//! [grid]
//! L = 10.0             # default 10
//! N = 1024             # default 1024
//!
//! [initial]
//! family = "gaussian-bump"
//! rho_minus = 1.0
//! rho_plus = 1.0
//! amplitude = 0.5
//!
//! [run]
//! T = 1.0
//! output_dt = 0.1
//! form = "both"        # U | V | both
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::{validate_params, Params, ValidationReport};
use crate::error::{Error, Result};
use crate::mesh::{background_profile, build_mesh, mollify, BackgroundProfile, Mesh};
use crate::solver::{FlowState, Form, RunConfig, CLAMPED_CELLS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitFamily {
    /// `rho_0 = rho_bar` with `rho_minus != rho_plus`, compactly supported velocity bump.
    HoffStep,
    /// `rho_0 = rho_bar + A exp(-x^2/w^2)`, optional velocity bump of the same shape.
    GaussianBump,
    /// Gaussian bump with negative amplitude.
    NearVacuum,
    /// `x, rho, u` columns read from a CSV file and interpolated linearly.
    CustomTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverForm {
    U,
    V,
    #[serde(alias = "both")]
    Both,
}

impl SolverForm {
    pub fn forms(self) -> Vec<Form> {
        match self {
            SolverForm::U => vec![Form::U],
            SolverForm::V => vec![Form::V],
            SolverForm::Both => vec![Form::U, Form::V],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L", default = "default_half_width")]
    pub half_width: f64,
    #[serde(rename = "N", default = "default_cells")]
    pub cells: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { half_width: default_half_width(), cells: default_cells() }
    }
}

fn default_half_width() -> f64 {
    10.0
}

fn default_cells() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub family: InitFamily,
    #[serde(default = "one")]
    pub rho_minus: f64,
    #[serde(default = "one")]
    pub rho_plus: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    /// Velocity bump size for `gaussian-bump`.
    #[serde(default)]
    pub u_amplitude: f64,
    /// Table for `custom-table`, relative to the scenario file.
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub mollify_n: Option<u32>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "default_output_dt")]
    pub output_dt: f64,
    #[serde(default = "default_form")]
    pub form: SolverForm,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_moments")]
    pub moments: Vec<u32>,
    #[serde(default = "default_slack")]
    pub gronwall_slack: f64,
    /// Write `fields_<t>.csv` snapshots.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

fn default_output_dt() -> f64 {
    0.1
}

fn default_form() -> SolverForm {
    SolverForm::U
}

fn default_safety() -> f64 {
    0.4
}

fn default_moments() -> Vec<u32> {
    vec![0, 2, 8, 30]
}

fn default_slack() -> f64 {
    0.10
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub params: Params,
    #[serde(default)]
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub run: RunSection,
    /// Directory that relative table paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A scenario together with its parameter validation outcome.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub report: ValidationReport,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        let report = validate_params(&self.params)?;
        self.run_config(Form::U).validate()?;
        if !(self.run.gronwall_slack >= 0.0) {
            return Err(Error::config(format!("gronwall_slack must be >= 0, got {}", self.run.gronwall_slack)));
        }
        let mesh = self.mesh()?;
        let profile = self.profile(&mesh)?;
        if !(self.initial.width > 0.0) {
            return Err(Error::config(format!("initial.width must be positive, got {}", self.initial.width)));
        }
        match self.initial.family {
            InitFamily::NearVacuum if !(self.initial.amplitude < 0.0) => {
                return Err(Error::config("near-vacuum data needs a negative amplitude"));
            }
            InitFamily::CustomTable if self.initial.table.is_none() => {
                return Err(Error::config("custom-table data needs initial.table"));
            }
            _ => {}
        }
        self.initial_state(&mesh, &profile, Form::U)?;
        Ok(report)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        build_mesh(self.grid.half_width, self.grid.cells)
    }

    pub fn profile(&self, mesh: &Mesh) -> Result<BackgroundProfile> {
        background_profile(mesh, self.initial.rho_minus, self.initial.rho_plus)
    }

    pub fn run_config(&self, form: Form) -> RunConfig {
        RunConfig {
            t_end: self.run.t_end,
            output_dt: self.run.output_dt,
            safety: self.run.safety,
            form,
            moments: self.run.moments.clone(),
            ..RunConfig::default()
        }
    }

    /// Builds `(rho_0, u_0)`, applies the optional mollifier to
    /// `(rho_0 - rho_bar, u_0)`, pins the far-field cells and converts to `form`.
    pub fn initial_state(&self, mesh: &Mesh, profile: &BackgroundProfile, form: Form) -> Result<FlowState> {
        let init = &self.initial;
        let x = mesh.x();
        let w = init.width;
        let (mut drho, mut u): (Vec<f64>, Vec<f64>) = match init.family {
            InitFamily::GaussianBump | InitFamily::NearVacuum => x
                .iter()
                .map(|&x| {
                    let g = (-(x * x) / (w * w)).exp();
                    (init.amplitude * g, init.u_amplitude * g)
                })
                .unzip(),
            InitFamily::HoffStep => x.iter().map(|&x| (0.0, init.amplitude * compact_bump(x / w))).unzip(),
            InitFamily::CustomTable => {
                let path = init.table.as_ref().ok_or_else(|| Error::config("custom-table data needs initial.table"))?;
                let path = if path.is_absolute() { path.clone() } else { self.base_dir.join(path) };
                let (rho, u) = read_table(&path, x)?;
                (rho.iter().zip(&profile.values).map(|(r, b)| r - b).collect(), u)
            }
        };
        if let Some(n) = init.mollify_n {
            drho = mollify(&drho, mesh, n)?;
            u = mollify(&u, mesh, n)?;
        }
        let mut rho: Vec<f64> = profile.values.iter().zip(&drho).map(|(b, d)| b + d).collect();
        let len = rho.len();
        for i in 0..CLAMPED_CELLS {
            rho[i] = profile.rho_minus;
            rho[len - 1 - i] = profile.rho_plus;
            u[i] = 0.0;
            u[len - 1 - i] = 0.0;
        }
        let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::config(format!("initial density must stay positive, minimum is {min}")));
        }
        if rho.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(Error::config("initial data is not finite"));
        }
        FlowState::new(rho, u, Form::U, 0.0)?.to_form(form, mesh, &self.params)
    }
}

/// `exp(1 - 1/(1 - s^2))` on `|s| < 1`, peak 1 at the origin.
fn compact_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn read_table(path: &Path, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::config(format!("cannot read table {}: {e}", path.display())))?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (line, rec) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        let rec = rec.map_err(|e| Error::config(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        rows.push(rec);
    }
    if rows.len() < 2 {
        return Err(Error::config(format!("{}: need at least two rows", path.display())));
    }
    if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::config(format!("{}: x column must be strictly increasing", path.display())));
    }
    let interp = |xq: f64, col: fn(&(f64, f64, f64)) -> f64| {
        let k = rows.partition_point(|r| r.0 <= xq);
        if k == 0 {
            col(&rows[0])
        } else if k == rows.len() {
            col(&rows[rows.len() - 1])
        } else {
            let (a, b) = (&rows[k - 1], &rows[k]);
            let s = (xq - a.0) / (b.0 - a.0);
            col(a) + s * (col(b) - col(a))
        }
    };
    let rho = x.iter().map(|&xq| interp(xq, |r| r.1)).collect();
    let u = x.iter().map(|&xq| interp(xq, |r| r.2)).collect();
    Ok((rho, u))
}

/// Reads and validates a scenario file. Parameters outside the theorem
/// region are accepted with a warning.
pub fn load_config(path: &Path) -> Result<LoadedScenario> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let mut scenario = Scenario::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    scenario.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let report = scenario.validate()?;
    if !report.inside_theorem {
        log::warn!(
            "scenario '{}' lies outside the existence region: {}",
            scenario.name,
            report.violations().join(", ")
        );
    }
    Ok(LoadedScenario { scenario, report })
}
