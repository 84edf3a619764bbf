//! Scenario configuration file (TOML) and its translation into a simulation setup.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ptstring::simulator::{Profile, Scenario, SimulationSetup};
use ptstring::{PtConfig64, StringParams64};
use serde::{Deserialize, Serialize};

/// Which runs a config requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Open,
    Closed,
    Target,
    Baseline,
    /// Closed loop for every profile in `scenario.sweep` plus a PT-versus-baseline comparison.
    Sweep,
}

impl ScenarioKind {
    /// Scenario whose preconditions govern validation.
    pub fn governing(self) -> Scenario {
        match self {
            Self::Open => Scenario::OpenLoop,
            Self::Closed | Self::Sweep => Scenario::ClosedLoop,
            Self::Target => Scenario::Target,
            Self::Baseline => Scenario::Baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub rho0: f64,
    pub tension: f64,
    pub tip_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub horizon: f64,
    pub mu0: f64,
    pub eps_stop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub kernel_n: usize,
    /// Plant step as a fraction of `dx / c`.
    pub plant_dt_factor: f64,
    /// Kernel transverse step as a fraction of `h / c`.
    pub kernel_dt_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub initial: String,
    #[serde(default = "zero_profile")]
    pub initial_velocity: String,
    pub snapshot_stride: usize,
    /// Defaults to `T - eps_stop`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Profiles of a `sweep` run.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// Complete scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantSection,
    pub control: ControlSection,
    pub grid: GridSection,
    pub scenario: ScenarioSection,
    pub output: OutputSection,
}

fn zero_profile() -> String {
    Profile::Zero.name().into()
}

fn default_sweep() -> Vec<String> {
    ["parabola", "quarter_sine", "cubic"].iter().map(|s| s.to_string()).collect()
}

impl Default for ScenarioConfig {
    /// Reference string, gain and resolution, closed loop from the parabola.
    fn default() -> Self {
        let s = SimulationSetup::<f64>::reference();
        Self {
            plant: PlantSection { rho0: s.params.rho0(), tension: s.params.tension(), tip_mass: s.params.tip_mass() },
            control: ControlSection { horizon: s.pt.horizon(), mu0: s.pt.mu0(), eps_stop: s.pt.eps_stop() },
            grid: GridSection {
                nx: s.nx,
                kernel_n: s.kernel_n,
                plant_dt_factor: s.plant_dt_factor,
                kernel_dt_factor: s.kernel_dt_factor,
            },
            scenario: ScenarioSection {
                kind: ScenarioKind::Closed,
                initial: s.initial.name().into(),
                initial_velocity: s.initial_velocity.name().into(),
                snapshot_stride: s.snapshot_stride,
                t_end: None,
                sweep: default_sweep(),
            },
            output: OutputSection { dir: PathBuf::from("out") },
        }
    }
}

fn profile(name: &str, field: &str) -> Result<Profile> {
    Profile::parse(name)
        .with_context(|| format!("unknown profile {name:?} in scenario.{field} (expected zero, parabola, quarter_sine or cubic)"))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid scenario config")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serialising scenario config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Simulation setup for `initial`, checked against the plant and schedule constructors.
    pub fn setup_for(&self, initial: Profile) -> Result<SimulationSetup<f64>> {
        let params = StringParams64::new(self.plant.rho0, self.plant.tension, self.plant.tip_mass)?;
        let pt = PtConfig64::new(&params, self.control.horizon, self.control.mu0, self.control.eps_stop)?;
        let t_end = self.scenario.t_end.unwrap_or_else(|| pt.stop_time());
        Ok(SimulationSetup {
            params,
            pt,
            nx: self.grid.nx,
            kernel_n: self.grid.kernel_n,
            plant_dt_factor: self.grid.plant_dt_factor,
            kernel_dt_factor: self.grid.kernel_dt_factor,
            t_end,
            snapshot_stride: self.scenario.snapshot_stride,
            initial,
            initial_velocity: profile(&self.scenario.initial_velocity, "initial_velocity")?,
        })
    }

    pub fn setup(&self) -> Result<SimulationSetup<f64>> {
        self.setup_for(profile(&self.scenario.initial, "initial")?)
    }

    /// Profiles of a sweep, parsed.
    pub fn sweep_profiles(&self) -> Result<Vec<Profile>> {
        if self.scenario.sweep.is_empty() {
            bail!("scenario.sweep must list at least one profile");
        }
        self.scenario.sweep.iter().map(|s| profile(s, "sweep")).collect()
    }

    /// Checks every precondition of the requested runs; nothing is solved here.
    pub fn validate(&self) -> Result<SimulationSetup<f64>> {
        let setup = self.setup()?;
        setup.validate(self.scenario.kind.governing()).context("scenario preconditions")?;
        if self.scenario.kind == ScenarioKind::Sweep {
            self.sweep_profiles()?;
            setup.validate(Scenario::Baseline).context("baseline preconditions")?;
        }
        Ok(setup)
    }
}
