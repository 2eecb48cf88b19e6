//! Fourier-transform surrogates.
//!
//! An FT surrogate keeps the one-sided Fourier amplitudes of a signal and
//! replaces every phase except DC (and Nyquist, for even lengths) with an
//! independent uniform draw from `[0, 2 pi)`. IAAFT surrogates additionally
//! match the time-domain value distribution. Partial surrogates replace only
//! a window, with content drawn from the rest of the signal.
//!
//! Phases are drawn from `ChaCha8Rng` (see [`crate::rng`]) in order of
//! increasing bin index.

mod ft;
mod iaaft;
mod partial;

pub use ft::{ft_surrogate, ft_surrogate_with_residue, randomize_phases};
pub use iaaft::{iaaft_surrogate, rank_order, IaaftReport, IaaftStop};
pub use partial::{
    crossfade_ramp, partial_ft_surrogate, splice_replace, splice_surrogate, PartialSurrogateSpec,
    Splice,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::signal::Epoch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    #[default]
    Ft,
    Iaaft,
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurrogateKind::Ft => "ft",
            SurrogateKind::Iaaft => "iaaft",
        })
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ft" => Ok(SurrogateKind::Ft),
            "iaaft" => Ok(SurrogateKind::Iaaft),
            other => Err(Error::invalid(format!("unknown surrogate kind `{other}`"))),
        }
    }
}

/// How the channels of one epoch draw their phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseSharing {
    /// Channel `i` uses a seed derived from `(seed, i)`.
    #[default]
    Independent,
    /// All channels use the same seed, hence the same phase draws.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub iaaft_max_iters: usize,
    /// Relative change of the spectral discrepancy between two iterations
    /// below which IAAFT stops.
    pub iaaft_tolerance: f64,
    pub seed: u64,
    pub phase_sharing: PhaseSharing,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::Ft,
            iaaft_max_iters: 100,
            iaaft_tolerance: 1e-8,
            seed: 0,
            phase_sharing: PhaseSharing::Independent,
        }
    }
}

impl SurrogateConfig {
    pub fn ft(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn iaaft(seed: u64) -> Self {
        Self {
            kind: SurrogateKind::Iaaft,
            seed,
            ..Self::default()
        }
    }

    pub fn with_kind(mut self, kind: SurrogateKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iaaft_max_iters == 0 {
            return Err(Error::invalid("iaaft_max_iters must be at least 1"));
        }
        if !(self.iaaft_tolerance.is_finite() && self.iaaft_tolerance >= 0.0) {
            return Err(Error::invalid("iaaft_tolerance must be a non-negative number"));
        }
        Ok(())
    }
}

/// Seed used for channel `index` of an epoch surrogate.
pub fn channel_seed(seed: u64, index: usize, sharing: PhaseSharing) -> u64 {
    match sharing {
        PhaseSharing::Independent => derive_seed(seed, &[index as u64]),
        PhaseSharing::Shared => derive_seed(seed, &[0]),
    }
}

/// Replaces every channel by its surrogate. The label is kept. IAAFT reports
/// are returned per channel (empty for FT).
pub fn epoch_surrogate_with_reports(
    epoch: &Epoch,
    config: &SurrogateConfig,
    seed: u64,
) -> Result<(Epoch, Vec<IaaftReport>)> {
    config.validate()?;
    let mut channels = Vec::with_capacity(epoch.n_channels());
    let mut reports = Vec::new();
    for (i, ch) in epoch.channels().iter().enumerate() {
        let s = channel_seed(seed, i, config.phase_sharing);
        match config.kind {
            SurrogateKind::Ft => channels.push(ft_surrogate(ch, s)),
            SurrogateKind::Iaaft => {
                let cfg = SurrogateConfig { seed: s, ..*config };
                let (sur, report) = iaaft_surrogate(ch, &cfg)?;
                channels.push(sur);
                reports.push(report);
            }
        }
    }
    let out = Epoch::new(channels, epoch.roles().to_vec(), epoch.label())?;
    Ok((out, reports))
}

pub fn epoch_surrogate(epoch: &Epoch, config: &SurrogateConfig, seed: u64) -> Result<Epoch> {
    epoch_surrogate_with_reports(epoch, config, seed).map(|(e, _)| e)
}
