//! Run configuration: strict JSON schema, defaults, validation.
//!
//! Molecular rates and frequencies are in units of `nu_g`; a cavity block
//! uses its own unit (usually `kappa = 1`) and then the molecule block must
//! be written in that unit as well. `units` records which one applies.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vibronica::model::{CavityParams, MoleculeParams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_units")]
    pub units: String,
    pub molecule: MoleculeBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanAxis>,
    /// Second axis for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<ScanAxis>,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_units() -> String {
    "nu_g".into()
}

/// Either `nu_e` or `lambda2` fixes the excited-state curvature; giving
/// both is allowed only if they agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeBlock {
    #[serde(default = "one")]
    pub nu_g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_e: Option<f64>,
    #[serde(default)]
    pub lambda1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub omega_00: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_big_gamma", rename = "Gamma")]
    pub big_gamma: f64,
    #[serde(default)]
    pub eta_l: f64,
    #[serde(default)]
    pub omega_l: f64,
}

fn one() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.01
}
fn default_big_gamma() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityBlock {
    #[serde(default)]
    pub omega_c: f64,
    pub g: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    #[serde(default = "default_eta_c")]
    pub eta_c: f64,
    #[serde(default = "default_n")]
    pub n_molecules: u32,
}

fn default_eta_c() -> f64 {
    0.001
}
fn default_n() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanAxis {
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_fock")]
    pub fock_dim: usize,
    #[serde(default = "default_photon")]
    pub photon_dim: usize,
    #[serde(default = "default_vib")]
    pub vib_dim: usize,
    #[serde(default = "default_tail")]
    pub tail_tol: f64,
    #[serde(default = "default_ode")]
    pub ode_tol: f64,
    /// Run the master-equation cavity oracle alongside the analytic scan.
    #[serde(default = "yes")]
    pub cavity_numeric: bool,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    #[serde(default = "default_tau_points")]
    pub tau_points: usize,
}

fn default_fock() -> usize {
    12
}
fn default_photon() -> usize {
    4
}
fn default_vib() -> usize {
    10
}
fn default_tail() -> f64 {
    1e-10
}
fn default_ode() -> f64 {
    1e-9
}
fn yes() -> bool {
    true
}
fn default_tau_max() -> f64 {
    50.0
}
fn default_tau_points() -> usize {
    501
}

impl Default for NumericsBlock {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all numerics fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default = "yes")]
    pub plot_scripts: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputBlock {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all output fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Scan variables understood by the subcommands.
pub const SCAN_VARIABLES: &[&str] = &["omega", "omega_l", "detuning"];
/// Second-axis variables for `sweep`.
pub const SWEEP_VARIABLES: &[&str] = &["n_molecules", "g", "lambda1", "eta_l", "Gamma", "gamma"];

impl ScanAxis {
    pub fn validate(&self, allowed: &[&str], block: &str) -> Result<(), CliError> {
        if !allowed.contains(&self.variable.as_str()) {
            return Err(CliError::config(format!(
                "{block}.variable `{}` is not one of {allowed:?}",
                self.variable
            )));
        }
        if self.points < 2 {
            return Err(CliError::config(format!("{block}.points must be at least 2")));
        }
        if !(self.start < self.stop) {
            return Err(CliError::config(format!("{block}.start must be below {block}.stop")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        vibronica::spectrum::linspace(self.start, self.stop, self.points)
    }
}

impl MoleculeBlock {
    pub fn to_params(&self) -> Result<MoleculeParams, CliError> {
        let base = match (self.nu_e, self.lambda2) {
            (Some(nu_e), None) => MoleculeParams::new(self.nu_g, nu_e, self.lambda1),
            (None, Some(l2)) => MoleculeParams::from_couplings(self.nu_g, self.lambda1, l2),
            (None, None) => MoleculeParams::new(self.nu_g, self.nu_g, self.lambda1),
            (Some(nu_e), Some(l2)) => {
                let p = MoleculeParams::new(self.nu_g, nu_e, self.lambda1)
                    .map_err(|e| CliError::config(format!("molecule: {e}")))?;
                if (p.lambda2() - l2).abs() > 1e-12 * (1.0 + l2.abs()) {
                    return Err(CliError::config(format!(
                        "molecule.lambda2 = {l2} is inconsistent with nu_e/nu_g (which give {})",
                        p.lambda2()
                    )));
                }
                Ok(p)
            }
        };
        base.and_then(|p| p.with_omega_00(self.omega_00))
            .and_then(|p| p.with_rates(self.gamma, self.big_gamma))
            .and_then(|p| p.with_drive(self.eta_l, self.omega_l))
            .map_err(|e| CliError::config(format!("molecule: {e}")))
    }
}

impl CavityBlock {
    pub fn to_params(&self) -> Result<CavityParams, CliError> {
        let c = CavityParams {
            omega_c: self.omega_c,
            g: self.g,
            kappa1: self.kappa1,
            kappa2: self.kappa2,
            eta_c: self.eta_c,
            n_molecules: self.n_molecules,
        };
        c.validate().map_err(|e| CliError::config(format!("cavity: {e}")))?;
        Ok(c)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !["nu_g", "kappa"].contains(&self.units.as_str()) {
            return Err(CliError::config(format!(
                "units `{}` is not one of [\"nu_g\", \"kappa\"]",
                self.units
            )));
        }
        self.molecule.to_params()?;
        if let Some(c) = &self.cavity {
            c.to_params()?;
        }
        // the named unit must actually be one
        match (self.units.as_str(), &self.cavity) {
            ("nu_g", _) if (self.molecule.nu_g - 1.0).abs() > 1e-12 => {
                return Err(CliError::config(format!(
                    "units = \"nu_g\" requires molecule.nu_g = 1, got {}",
                    self.molecule.nu_g
                )));
            }
            ("kappa", None) => {
                return Err(CliError::config("units = \"kappa\" requires a cavity block"));
            }
            ("kappa", Some(c)) if (c.kappa1 + c.kappa2 - 1.0).abs() > 1e-12 => {
                return Err(CliError::config(format!(
                    "units = \"kappa\" requires cavity.kappa1 + cavity.kappa2 = 1, got {}",
                    c.kappa1 + c.kappa2
                )));
            }
            _ => {}
        }
        if let Some(s) = &self.scan {
            s.validate(SCAN_VARIABLES, "scan")?;
        }
        if let Some(s) = &self.sweep {
            s.validate(SWEEP_VARIABLES, "sweep")?;
        }
        let n = &self.numerics;
        if n.fock_dim < 2 || n.vib_dim < 2 {
            return Err(CliError::config("numerics.fock_dim and numerics.vib_dim must be at least 2"));
        }
        if !(1e-14..=1e-6).contains(&n.tail_tol) {
            return Err(CliError::config("numerics.tail_tol must lie in [1e-14, 1e-6]"));
        }
        if !(1e-12..=1e-4).contains(&n.ode_tol) {
            return Err(CliError::config("numerics.ode_tol must lie in [1e-12, 1e-4]"));
        }
        if !(n.tau_max > 0.0) || n.tau_points < 2 {
            return Err(CliError::config("numerics.tau_max must be positive and tau_points at least 2"));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::config("output.formats must name at least one format"));
        }
        Ok(())
    }

    /// Laser frequencies of the scan axis, absolute.
    pub fn laser_grid(&self) -> Result<Vec<f64>, CliError> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| CliError::usage("this subcommand needs a `scan` block"))?;
        let values = scan.values();
        Ok(match scan.variable.as_str() {
            "detuning" => values.iter().map(|d| d + self.molecule.omega_00).collect(),
            _ => values,
        })
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}
