//! Experiment configuration, stored as TOML.

use crate::scenarios::Scenario;
use crate::CliError;
use phasediff::dynamics::EvolutionConfig;
use phasediff::{ConfigGrid, HamiltonianSpec, ModelParams, PhaseGrid, Potential};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub hbar: f64,
    pub mass: f64,
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl ParamsSpec {
    pub fn build(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(self.hbar, self.mass, self.a, self.b, self.n)?)
    }
}

/// A phase grid of `npts` points per axis. Without `dx` the grid is
/// square (dx = dp = sqrt(2 pi hbar / npts)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub npts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
}

impl GridSpec {
    pub fn phase(&self, n: usize, hbar: f64) -> Result<PhaseGrid, CliError> {
        Ok(match self.dx {
            Some(dx) => PhaseGrid::new(n, self.npts, dx, hbar)?,
            None => PhaseGrid::square(n, self.npts, hbar)?,
        })
    }

    pub fn config(&self, n: usize, hbar: f64) -> Result<ConfigGrid, CliError> {
        Ok(self.phase(n, hbar)?.config())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    /// free, harmonic, quartic, regularized-coulomb-1d, constant
    pub name: String,
    pub mass: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub strength: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub value: f64,
}

pub const HAMILTONIANS: [&str; 5] = ["free", "harmonic", "quartic", "regularized-coulomb-1d", "constant"];

impl HamiltonianConfig {
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        HamiltonianConfig { name: "harmonic".into(), mass, omega, lambda: 0.0, strength: 0.0, eps: 0.0, value: 0.0 }
    }

    pub fn build(&self) -> Result<HamiltonianSpec, CliError> {
        let (kinetic, potential) = match self.name.as_str() {
            "free" => (true, Potential::Zero),
            "harmonic" => (true, Potential::Harmonic { omega: self.omega }),
            "quartic" => (true, Potential::Quartic { lambda: self.lambda }),
            "regularized-coulomb-1d" => (true, Potential::SoftCoulomb { strength: self.strength, eps: self.eps }),
            "constant" => (false, Potential::Constant(self.value)),
            other => return Err(CliError::Config(format!("unknown hamiltonian '{other}', expected one of {HAMILTONIANS:?}"))),
        };
        Ok(HamiltonianSpec::new(self.mass, kinetic, potential)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub substeps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermite_cutoff: Option<usize>,
    #[serde(default)]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl EvolutionSpec {
    pub fn build(&self) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.dt,
            t_end: self.t_end,
            substeps: self.substeps,
            hermite_cutoff: self.hermite_cutoff,
            record_every: self.record_every,
            ..EvolutionConfig::default()
        }
    }
}

/// Scenario knobs; each scenario reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    /// random fields, seeds or states per check
    pub samples: usize,
    /// relaxation threshold for the rapid-motion transition time
    pub epsilon: f64,
    /// required ab/hbar over the classical frequency
    pub separation: f64,
    /// number of times the control parameter is halved or doubled
    pub refinements: usize,
    /// temperature in K for the thermal coefficients
    pub temperature: f64,
    /// measured n = 2 level shift in MHz
    pub level_shift_mhz: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions { samples: 10, epsilon: 0.01, separation: 50.0, refinements: 2, temperature: 1.0, level_shift_mhz: 1058.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub out_dir: String,
    pub params: ParamsSpec,
    pub grid: GridSpec,
    pub hamiltonian: HamiltonianConfig,
    pub evolution: EvolutionSpec,
    pub options: ScenarioOptions,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        Scenario::from_name(&self.scenario)?;
        self.params.build()?;
        self.grid.phase(self.params.n, self.params.hbar)?;
        self.hamiltonian.build()?;
        self.evolution.build().validate()?;
        if self.options.samples == 0 {
            return Err(CliError::Config("options.samples must be >= 1".into()));
        }
        Ok(())
    }

    /// The defaults that reproduce each acceptance check.
    pub fn default_for(scenario: Scenario) -> Self {
        let base = ExperimentConfig {
            scenario: scenario.name().into(),
            seed: 7,
            out_dir: "out".into(),
            params: ParamsSpec { hbar: 1.0, mass: 1.0, a: 1.0, b: 2.0, n: 1 },
            grid: GridSpec { npts: 128, dx: None },
            hamiltonian: HamiltonianConfig { name: "constant".into(), mass: 1.0, omega: 0.0, lambda: 0.0, strength: 0.0, eps: 0.0, value: 0.0 },
            evolution: EvolutionSpec { dt: 0.01, t_end: 1.0, substeps: 1, hermite_cutoff: None, record_every: 0 },
            options: ScenarioOptions::default(),
        };
        match scenario {
            Scenario::Appendix3Constants | Scenario::LemmaIntegrals => base,
            Scenario::ProjectorLaws => ExperimentConfig { options: ScenarioOptions { samples: 20, ..base.options.clone() }, ..base },
            // dt and t_end in units of hbar/(ab)
            Scenario::RapidMotion => ExperimentConfig { evolution: EvolutionSpec { dt: 0.05, t_end: 8.0, record_every: 1, ..base.evolution.clone() }, ..base },
            Scenario::Nonnegativity => base,
            Scenario::EffectiveHamiltonian => ExperimentConfig {
                hamiltonian: HamiltonianConfig { lambda: 0.1, ..HamiltonianConfig::harmonic(1.0, 1.0) },
                ..base
            },
            // ab/hbar = 50 omega with a/b = 1/2; dt scales with hbar/(ab)
            Scenario::SlowDynamics => ExperimentConfig {
                params: ParamsSpec { a: 5.0, b: 10.0, ..base.params.clone() },
                grid: GridSpec { npts: 64, dx: None },
                hamiltonian: HamiltonianConfig::harmonic(1.0, 1.0),
                evolution: EvolutionSpec { dt: 0.0025, t_end: 2.0 * std::f64::consts::PI, record_every: 100, ..base.evolution.clone() },
                ..base
            },
            Scenario::OracleEquivalence => ExperimentConfig {
                params: ParamsSpec { b: 1.0, ..base.params.clone() },
                grid: GridSpec { npts: 16, dx: None },
                hamiltonian: HamiltonianConfig::harmonic(1.0, 1.0),
                evolution: EvolutionSpec { dt: 0.0025, t_end: 0.5, ..base.evolution.clone() },
                options: ScenarioOptions { samples: 20, ..base.options.clone() },
                ..base
            },
            Scenario::AveragingLimits => base,
        }
    }
}
