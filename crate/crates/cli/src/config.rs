//! Run configuration: JSON file, command-line overrides and defaults.

use std::f64::consts::PI;
use std::path::Path;

use para_ep::dynamics::{Axis, SimSettings};
use para_ep::ep::SearchBox;
use para_ep::floquet::EncircleOptions;
use para_ep::model::{linspace, DriveSchedule, LoopDirection, SweepVariable, SystemParams};
use para_ep::squeezing::{MonteCarloSettings, Port};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Sweep axis with the variable given by its label (`g`, `f`, `g=f`,
/// `f=2g`, `phi`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub variable: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn new(variable: &str, lo: f64, hi: f64, n: usize) -> Self {
        AxisSpec {
            variable: variable.to_string(),
            lo,
            hi,
            n,
        }
    }

    pub fn variable(&self) -> Result<SweepVariable, CliError> {
        SweepVariable::parse(&self.variable).ok_or_else(|| CliError::Usage(format!("unknown sweep variable `{}`", self.variable)))
    }

    pub fn axis(&self) -> Result<Axis, CliError> {
        self.validate()?;
        Ok(Axis::new(self.variable()?, self.lo, self.hi, self.n))
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.variable()?;
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.n == 0 {
            return Err(CliError::Usage(format!("sweep `{}` needs finite bounds and n >= 1", self.variable)));
        }
        Ok(())
    }
}

/// Uniform grid of a plain scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n)
    }

    fn validate(&self, what: &str) -> Result<(), CliError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.n == 0 || self.lo > self.hi {
            return Err(CliError::Usage(format!("{what} grid needs finite lo <= hi and n >= 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpConfig {
    /// 2 or 4.
    pub order: u8,
    /// `f / g` of the searched family.
    pub ratio: f64,
    pub search: SearchBox,
    /// Detuning offsets of the scaling fit; default grid when absent.
    pub offsets: Option<Vec<f64>>,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            order: 2,
            ratio: 1.0,
            search: SearchBox::default(),
            offsets: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetConfig {
    /// Modulation depths; more than one triggers the F-EP sweep.
    pub depths: Vec<f64>,
    pub omega: f64,
    pub g0: GridSpec,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        FloquetConfig {
            depths: vec![5.0],
            omega: 10.0,
            g0: GridSpec { lo: 0.5, hi: 2.0, n: 151 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncircleConfig {
    pub g0: f64,
    pub radius: f64,
    pub omega: f64,
    pub directions: Vec<LoopDirection>,
    pub start_mode: usize,
    pub options: EncircleOptions,
}

impl Default for EncircleConfig {
    fn default() -> Self {
        EncircleConfig {
            g0: 1.0,
            radius: 0.2,
            omega: 2.0 * PI / 3000.0,
            directions: vec![LoopDirection::Ccw, LoopDirection::Cw],
            start_mode: 1,
            options: EncircleOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqueezeConfig {
    pub port: Port,
    pub omega: GridSpec,
    /// Number of quadrature angles on `[0, π)` for the angle-resolved table; 0 skips it.
    pub thetas: usize,
}

impl Default for SqueezeConfig {
    fn default() -> Self {
        SqueezeConfig {
            port: Port::One,
            omega: GridSpec { lo: 0.0, hi: 3.0, n: 301 },
            thetas: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: String,
    pub params: SystemParams,
    pub drive: DriveSchedule,
    pub sweep: Option<AxisSpec>,
    pub sweep2: Option<AxisSpec>,
    /// Fixed pump phase of a transition scan; switches `phase-diagram` to a
    /// one-dimensional `f = g` scan.
    pub scan_phi: Option<f64>,
    pub threshold_tolerance: f64,
    pub sim: SimSettings,
    /// Start from the zero state instead of a random seed.
    pub zero_init: bool,
    pub ep: EpConfig,
    pub floquet: FloquetConfig,
    pub encircle: EncircleConfig,
    pub squeeze: SqueezeConfig,
    pub monte_carlo: MonteCarloSettings,
    pub seed: u64,
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: String::new(),
            params: SystemParams::default(),
            drive: DriveSchedule::Constant,
            sweep: None,
            sweep2: None,
            scan_phi: None,
            threshold_tolerance: 1e-10,
            sim: SimSettings::default(),
            zero_init: false,
            ep: EpConfig::default(),
            floquet: FloquetConfig::default(),
            encircle: EncircleConfig::default(),
            squeeze: SqueezeConfig::default(),
            monte_carlo: MonteCarloSettings::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Checks everything that does not depend on the experiment and copies
    /// the top-level seed into the simulation settings.
    pub fn normalize(&mut self) -> Result<(), CliError> {
        self.sim.seed = self.seed;
        self.params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.drive.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        for s in self.sweep.iter().chain(self.sweep2.iter()) {
            s.validate()?;
        }
        self.floquet.g0.validate("floquet g0")?;
        self.squeeze.omega.validate("squeeze omega")?;
        if !(self.threshold_tolerance > 0.0) {
            return Err(CliError::Usage("threshold_tolerance must be positive".into()));
        }
        if !matches!(self.ep.order, 2 | 4) {
            return Err(CliError::Usage(format!("ep.order must be 2 or 4, got {}", self.ep.order)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
