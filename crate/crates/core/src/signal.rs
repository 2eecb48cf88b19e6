//! Uniformly sampled channels and labeled multichannel epochs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One uniformly sampled real-valued channel.
///
/// Always holds at least two finite samples and a positive, finite rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "a signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Skips validation. Callers guarantee the invariants.
    pub(crate) fn from_trusted(samples: Vec<f64>, sample_rate_hz: f64) -> Self {
        debug_assert!(samples.len() >= 2);
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Same rate, new samples. Validates the new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz)
    }
}

/// Role of a channel within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelRole {
    #[serde(rename = "EEG1")]
    Eeg1,
    #[serde(rename = "EEG2")]
    Eeg2,
    #[serde(rename = "EOG")]
    Eog,
    #[serde(rename = "EMG")]
    Emg,
}

impl ChannelRole {
    /// Conventional channel order: two EEG, one EOG, one EMG.
    pub const STANDARD: [ChannelRole; 4] = [
        ChannelRole::Eeg1,
        ChannelRole::Eeg2,
        ChannelRole::Eog,
        ChannelRole::Emg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelRole::Eeg1 => "EEG1",
            ChannelRole::Eeg2 => "EEG2",
            ChannelRole::Eog => "EOG",
            ChannelRole::Emg => "EMG",
        }
    }
}

impl fmt::Display for ChannelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EEG1" => Ok(ChannelRole::Eeg1),
            "EEG2" => Ok(ChannelRole::Eeg2),
            "EOG" => Ok(ChannelRole::Eog),
            "EMG" => Ok(ChannelRole::Emg),
            other => Err(Error::invalid(format!("unknown channel role `{other}`"))),
        }
    }
}

/// A fixed-duration multichannel example with a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    channels: Vec<Signal>,
    roles: Vec<ChannelRole>,
    label: usize,
}

impl Epoch {
    pub fn new(channels: Vec<Signal>, roles: Vec<ChannelRole>, label: usize) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("an epoch needs at least one channel"));
        }
        if channels.len() != roles.len() {
            return Err(Error::invalid(format!(
                "{} channels but {} channel roles",
                channels.len(),
                roles.len()
            )));
        }
        let (len, rate) = (channels[0].len(), channels[0].sample_rate_hz());
        for (i, ch) in channels.iter().enumerate().skip(1) {
            if ch.len() != len || ch.sample_rate_hz() != rate {
                return Err(Error::invalid(format!(
                    "channel {i} has {} samples at {} Hz, channel 0 has {len} at {rate} Hz",
                    ch.len(),
                    ch.sample_rate_hz()
                )));
            }
        }
        Ok(Self {
            channels,
            roles,
            label,
        })
    }

    pub fn channels(&self) -> &[Signal] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> &Signal {
        &self.channels[index]
    }

    pub fn roles(&self) -> &[ChannelRole] {
        &self.roles
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.channels[0].sample_rate_hz()
    }

    pub fn duration_s(&self) -> f64 {
        self.channels[0].duration_s()
    }

    /// Replaces one channel. The replacement must match length and rate.
    pub fn replace_channel(&mut self, index: usize, signal: Signal) -> Result<()> {
        if index >= self.channels.len() {
            return Err(Error::invalid(format!("channel index {index} out of range")));
        }
        if signal.len() != self.len() || signal.sample_rate_hz() != self.sample_rate_hz() {
            return Err(Error::invalid("replacement channel does not match the epoch"));
        }
        self.channels[index] = signal;
        Ok(())
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }

    pub fn into_channels(self) -> Vec<Signal> {
        self.channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(Signal::new(vec![1.0], 32.0).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN], 32.0).is_err());
        assert!(Signal::new(vec![1.0, f64::INFINITY], 32.0).is_err());
        assert!(Signal::new(vec![1.0, 2.0], 0.0).is_err());
        assert!(Signal::new(vec![1.0, 2.0], 32.0).is_ok());
    }

    #[test]
    fn epoch_requires_matching_channels() {
        let a = Signal::new(vec![0.0; 8], 32.0).unwrap();
        let b = Signal::new(vec![0.0; 9], 32.0).unwrap();
        let c = Signal::new(vec![0.0; 8], 64.0).unwrap();
        let roles = vec![ChannelRole::Eeg1, ChannelRole::Eeg2];
        assert!(Epoch::new(vec![a.clone(), b], roles.clone(), 0).is_err());
        assert!(Epoch::new(vec![a.clone(), c], roles.clone(), 0).is_err());
        assert!(Epoch::new(vec![a.clone()], roles.clone(), 0).is_err());
        assert!(Epoch::new(vec![a.clone(), a], roles, 0).is_ok());
    }

    #[test]
    fn role_parsing_round_trips() {
        for role in ChannelRole::STANDARD {
            assert_eq!(role.as_str().parse::<ChannelRole>().unwrap(), role);
        }
        assert!("ECG".parse::<ChannelRole>().is_err());
    }
}
