//! One-step sampler updates. Each maps an ensemble to the next one.

mod arwp;
mod kinetic;
mod langevin;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use arwp::{arwp_step, arwp_step_with_score, brwp_step, brwp_step_with_score, proximal_score};
pub use kinetic::{
    ila_coefficients, ila_step, ila_update, klmc_coefficients, klmc_step, IlaCoefficients, KlmcCoefficients,
};
pub use langevin::{mala_log_acceptance, mala_step, mala_step_counted, ula_step};

use crate::config::{DampingSchedule, SamplerConfig};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::potentials::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    #[serde(rename = "arwp-hb")]
    ArwpHeavyBall,
    ArwpNesterov,
    Brwp,
    Ula,
    Mala,
    Ila,
    Klmc,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 7] = [
        SamplerKind::ArwpHeavyBall,
        SamplerKind::ArwpNesterov,
        SamplerKind::Brwp,
        SamplerKind::Ula,
        SamplerKind::Mala,
        SamplerKind::Ila,
        SamplerKind::Klmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::ArwpHeavyBall => "arwp-hb",
            SamplerKind::ArwpNesterov => "arwp-nesterov",
            SamplerKind::Brwp => "brwp",
            SamplerKind::Ula => "ula",
            SamplerKind::Mala => "mala",
            SamplerKind::Ila => "ila",
            SamplerKind::Klmc => "klmc",
        }
    }

    /// Whether particles interact through the proximal score.
    pub fn is_interacting(self) -> bool {
        matches!(
            self,
            SamplerKind::ArwpHeavyBall | SamplerKind::ArwpNesterov | SamplerKind::Brwp
        )
    }

    /// Checks that `cfg` carries what this sampler needs.
    pub fn validate(self, cfg: &SamplerConfig) -> Result<()> {
        cfg.validate()?;
        match self {
            SamplerKind::ArwpHeavyBall | SamplerKind::Klmc if cfg.damping.constant().is_none() => {
                Err(Error::config(format!("{} needs constant damping", self.name())))
            }
            SamplerKind::ArwpHeavyBall | SamplerKind::ArwpNesterov | SamplerKind::Brwp | SamplerKind::Mala
                if !cfg.beta.is_finite() =>
            {
                Err(Error::config(format!("{} needs a finite beta", self.name())))
            }
            _ => Ok(()),
        }
    }

    pub fn step<P: Potential + ?Sized>(
        self,
        e: &ParticleEnsemble,
        p: &P,
        cfg: &SamplerConfig,
    ) -> Result<ParticleEnsemble> {
        match self {
            SamplerKind::ArwpHeavyBall => arwp_step(e, p, cfg),
            SamplerKind::ArwpNesterov => {
                let c = SamplerConfig {
                    damping: DampingSchedule::Nesterov,
                    ..cfg.clone()
                };
                arwp_step(e, p, &c)
            }
            SamplerKind::Brwp => brwp_step(e, p, cfg),
            SamplerKind::Ula => ula_step(e, p, cfg),
            SamplerKind::Mala => mala_step(e, p, cfg),
            SamplerKind::Ila => ila_step(e, p, cfg),
            SamplerKind::Klmc => klmc_step(e, p, cfg),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown sampler `{s}`")))
    }
}

/// Rejects a step whose result contains a non-finite entry.
pub(crate) fn check_finite(e: ParticleEnsemble) -> Result<ParticleEnsemble> {
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::Diverged { iteration: e.iteration })
    }
}
