//! Built-in configurations reproducing the reference experiments.

use crate::config::{self, ExperimentConfig, SweepConfig, TheoryConfig};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Run,
    Sweep,
    Theory,
}

impl PresetKind {
    /// Subcommand that consumes this preset.
    pub fn command(self) -> &'static str {
        match self {
            PresetKind::Run => "run",
            PresetKind::Sweep => "sweep",
            PresetKind::Theory => "theory",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub kind: PresetKind,
    pub toml: &'static str,
}

macro_rules! preset {
    ($name:literal, $kind:ident) => {
        Preset {
            name: $name,
            kind: PresetKind::$kind,
            toml: include_str!(concat!("../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("gaussian-arwp-hb", Run),
    preset!("gaussian-arwp-nesterov", Run),
    preset!("gaussian-brwp", Run),
    preset!("gaussian-ila", Run),
    preset!("gaussian-klmc", Run),
    preset!("gaussian-mala", Run),
    preset!("gaussian-ula", Run),
    preset!("gmm-arwp-hb", Run),
    preset!("gmm-arwp-nesterov", Run),
    preset!("gmm-brwp", Run),
    preset!("gmm-ila", Run),
    preset!("gmm-klmc", Run),
    preset!("gmm-mala", Run),
    preset!("gmm-ula", Run),
    preset!("rosenbrock-arwp-hb-t0.02-a15", Run),
    preset!("rosenbrock-arwp-hb-t0.02-a2", Run),
    preset!("rosenbrock-arwp-hb-t0.02-a5", Run),
    preset!("rosenbrock-arwp-hb-t0.05-a15", Run),
    preset!("rosenbrock-arwp-hb-t0.05-a2", Run),
    preset!("rosenbrock-arwp-hb-t0.05-a5", Run),
    preset!("rosenbrock-arwp-hb-t0.1-a15", Run),
    preset!("rosenbrock-arwp-hb-t0.1-a2", Run),
    preset!("rosenbrock-arwp-hb-t0.1-a5", Run),
    preset!("rosenbrock-arwp-nesterov", Run),
    preset!("rosenbrock-brwp", Run),
    preset!("rosenbrock-ila", Run),
    preset!("rosenbrock-klmc", Run),
    preset!("rosenbrock-ula", Run),
    preset!("sweep-large-init", Sweep),
    preset!("sweep-small-init", Sweep),
    preset!("theory-table", Theory),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    /// The `description` line of the preset.
    pub fn description(&self) -> &'static str {
        self.toml
            .lines()
            .find_map(|l| l.strip_prefix("description = \""))
            .and_then(|l| l.strip_suffix('"'))
            .unwrap_or("")
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        config::parse(self.toml, self.name)
    }

    pub fn sweep(&self) -> Result<SweepConfig> {
        config::parse(self.toml, self.name)
    }

    pub fn theory(&self) -> Result<TheoryConfig> {
        config::parse(self.toml, self.name)
    }
}
