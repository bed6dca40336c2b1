//! Run configuration: a single JSON document fully determines an experiment.
//! Bundled presets reproduce the published table and figure parameter sets.

use crate::error::{Error, Result};
use crate::models::{Family, ForcingSpec, ModelSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Integrate the solitary-wave problem and report error norms against the
    /// exact profile at selected times.
    ValidateSoliton,
    /// Linearize the semi-discrete operator and test its scaled spectrum
    /// against the RK4 stability region.
    Spectrum,
    /// Drive the channel with periodic boundary forcing and detect eventual
    /// periodicity at the probe points.
    Periodicity,
}

/// How the kernel shape parameter is chosen. `absolute` uses the value as-is;
/// `proportional` multiplies it by the node spacing h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ShapeRule {
    Absolute { value: f64 },
    Proportional { value: f64 },
}

impl ShapeRule {
    pub fn value(&self) -> f64 {
        match *self {
            ShapeRule::Absolute { value } | ShapeRule::Proportional { value } => value,
        }
    }

    pub fn shape_for(&self, spacing_h: f64) -> f64 {
        match *self {
            ShapeRule::Absolute { value } => value,
            ShapeRule::Proportional { value } => value * spacing_h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonConfig {
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Linearization {
    #[default]
    Zero,
    Soliton,
}

fn default_snapshot_stride() -> usize {
    100
}

fn default_periodicity_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub interval: (f64, f64),
    pub num_nodes: usize,
    pub stencil_size: usize,
    pub shape: ShapeRule,
    pub model: ModelSpec,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    #[serde(default)]
    pub soliton: Option<SolitonConfig>,
    pub dt: f64,
    pub t_max: f64,
    #[serde(default)]
    pub probes: Vec<f64>,
    #[serde(default = "default_snapshot_stride")]
    pub snapshot_stride: usize,
    /// Overrides the family default for the extra u_x = 0 condition at the
    /// right end (on for third-derivative families, off for BBM-type).
    #[serde(default)]
    pub neumann_right: Option<bool>,
    /// Times at which validation error norms are reported.
    #[serde(default)]
    pub error_times: Vec<f64>,
    #[serde(default)]
    pub linearization: Linearization,
    #[serde(default = "default_periodicity_tol")]
    pub periodicity_tol: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::BadInterval(a, b));
        }
        if self.num_nodes < 4 {
            return Err(Error::TooFewNodes(self.num_nodes));
        }
        if self.stencil_size < 4 || self.stencil_size > self.num_nodes {
            return Err(Error::BadStencilSize {
                n: self.stencil_size,
                n_nodes: self.num_nodes,
                min: 4,
            });
        }
        let c = self.shape.value();
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Config(format!("shape parameter {c} must be positive")));
        }
        self.model.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::BadTimeStep(self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::Config(format!("t_max = {} must be >= 0", self.t_max)));
        }
        if !(self.periodicity_tol.is_finite() && self.periodicity_tol > 0.0) {
            return Err(Error::Config(format!(
                "periodicity_tol = {} must be positive",
                self.periodicity_tol
            )));
        }
        if let Some(f) = &self.forcing {
            f.validate()?;
        }
        match self.experiment {
            Experiment::ValidateSoliton => {
                if self.model.family != Family::KdvClassic {
                    return Err(Error::Config(format!(
                        "validate-soliton runs the kdv-classic family, not {}",
                        self.model.family.name()
                    )));
                }
                if self.soliton.is_none() {
                    return Err(Error::Config(
                        "validate-soliton needs a soliton block (speed)".into(),
                    ));
                }
                if self.forcing.is_some() {
                    return Err(Error::Config(
                        "validate-soliton takes boundary data from the exact solution; \
                         remove the forcing block"
                            .into(),
                    ));
                }
            }
            Experiment::Spectrum => {
                if self.linearization == Linearization::Soliton && self.soliton.is_none() {
                    return Err(Error::Config(
                        "spectrum with soliton linearization needs a soliton block".into(),
                    ));
                }
            }
            Experiment::Periodicity => {
                if self.forcing.is_none() {
                    return Err(Error::Config(
                        "periodicity runs need a forcing block".into(),
                    ));
                }
                if self.soliton.is_some() {
                    return Err(Error::Config(
                        "periodicity runs start from rest; remove the soliton block".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Canonical serialized form; the same bytes are echoed into meta.json.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: RunConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Probe coordinates used throughout the forced-channel figures.
pub const CHANNEL_PROBES: [f64; 6] =
    [-0.950670, -0.808460, -0.587280, -0.308720, 0.0, 0.999650];

pub const PRESET_NAMES: [&str; 12] = [
    "table1", "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10",
    "toy-advection",
];

fn soliton_validation(experiment: Experiment, linearization: Linearization) -> RunConfig {
    RunConfig {
        experiment,
        interval: (0.0, 40.0),
        num_nodes: 200,
        stencil_size: 25,
        shape: ShapeRule::Absolute { value: 1.2 },
        model: ModelSpec::kdv_classic(6.0, 1.0).unwrap(),
        forcing: None,
        soliton: Some(SolitonConfig { speed: 0.5 }),
        dt: 0.001,
        t_max: 5.0,
        probes: vec![],
        snapshot_stride: 0,
        neumann_right: None,
        error_times: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        linearization,
        periodicity_tol: default_periodicity_tol(),
        out_dir: None,
    }
}

fn channel(model: ModelSpec, t_max: f64) -> RunConfig {
    RunConfig {
        experiment: Experiment::Periodicity,
        interval: (-1.0, 1.0),
        num_nodes: 200,
        stencil_size: 25,
        shape: ShapeRule::Absolute { value: 0.001 },
        model,
        forcing: Some(ForcingSpec::SinTanh),
        soliton: None,
        dt: 0.001,
        t_max,
        probes: CHANNEL_PROBES.to_vec(),
        snapshot_stride: default_snapshot_stride(),
        neumann_right: None,
        error_times: vec![],
        linearization: Linearization::Zero,
        periodicity_tol: default_periodicity_tol(),
        out_dir: None,
    }
}

/// Bundled parameter sets, transcribed from the published table and figure
/// captions. Returns None for unknown names.
pub fn preset(name: &str) -> Option<RunConfig> {
    let cfg = match name {
        "table1" => soliton_validation(Experiment::ValidateSoliton, Linearization::Soliton),
        "fig1" => soliton_validation(Experiment::Spectrum, Linearization::Soliton),
        "fig2" => channel(ModelSpec::bbm(1.0, 0.0, 1e-6).unwrap(), 1.8),
        "fig3" => channel(ModelSpec::bbm_burgers(1.0, 0.0, 1e-6, 1e-5).unwrap(), 1.8),
        "fig4" => channel(ModelSpec::bbm(1.0, 0.05, 1e-6).unwrap(), 1.8),
        "fig5" => channel(ModelSpec::bbm_burgers(1.0, 0.05, 1e-6, 1e-5).unwrap(), 1.8),
        "fig6" => channel(ModelSpec::kdv(1.0, 0.0, 1e-5).unwrap(), 1.8),
        "fig7" => channel(ModelSpec::kdv_burgers(1.0, 0.0, 1e-5, 1e-4).unwrap(), 1.8),
        "fig8" => channel(ModelSpec::kdv(1.0, 0.05, 1e-5).unwrap(), 1.8),
        "fig9" => channel(ModelSpec::kdv_burgers(1.0, 0.05, 1e-5, 1e-4).unwrap(), 1.8),
        "fig10" => channel(ModelSpec::kdv_damped(1.0, 0.05, 1e-4, 4.5).unwrap(), 3.0),
        // tiny pure-advection spectrum case, handy for smoke checks
        "toy-advection" => RunConfig {
            experiment: Experiment::Spectrum,
            interval: (-1.0, 1.0),
            num_nodes: 8,
            stencil_size: 4,
            shape: ShapeRule::Proportional { value: 0.4 },
            model: ModelSpec::bbm_identity_mass(1.0, 0.0).unwrap(),
            forcing: Some(ForcingSpec::Zero),
            soliton: None,
            dt: 0.001,
            t_max: 0.0,
            probes: vec![],
            snapshot_stride: 0,
            neumann_right: None,
            error_times: vec![],
            linearization: Linearization::Zero,
            periodicity_tol: default_periodicity_tol(),
            out_dir: None,
        },
        _ => return None,
    };
    Some(cfg)
}
