//! Labeled synthetic epochs from stationary autoregressive backgrounds with
//! optional injected transients.
//!
//! Each class gives every channel an AR process (directly, or as a product of
//! resonant second-order sections, one per spectral peak) scaled to a target
//! standard deviation. A class may also inject transient events at random
//! positions. Stationary classes are exactly the processes FT surrogates
//! model; transient-bearing classes are not.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::filter::butterworth_lowpass;
use crate::resample::resample;
use crate::rng::{rng_for, stream, Rng};
use crate::signal::{ChannelRole, Epoch, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_hz: f64,
    /// Pole radius in [0, 1); closer to 1 gives a narrower peak.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProcess {
    /// Resonances; ignored when `ar` is given.
    #[serde(default)]
    pub peaks: Vec<Peak>,
    /// `x[t] = sum_k ar[k] * x[t-1-k] + e[t]`.
    #[serde(default)]
    pub ar: Option<Vec<f64>>,
    pub std_uv: f64,
    /// Per-epoch log-normal spread of the standard deviation.
    #[serde(default)]
    pub std_jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Waveform {
    /// One full sine cycle: a positive then a negative half-wave.
    Biphasic,
    /// Hann-windowed oscillation.
    Burst { freq_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientSpec {
    pub waveform: Waveform,
    pub duration_s: f64,
    pub amplitude_uv: f64,
    /// Events per affected epoch.
    pub count: usize,
    /// Chance that an epoch of the class carries the events.
    #[serde(default = "one")]
    pub probability: f64,
    pub channels: Vec<ChannelRole>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub prevalence: f64,
    /// One process per channel role, or a single one shared by all channels.
    pub channels: Vec<ChannelProcess>,
    #[serde(default)]
    pub transients: Vec<TransientSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClassSpec {
    pub sample_rate_hz: f64,
    /// When set, epochs are generated at this rate, low-pass filtered
    /// (4th-order Butterworth at 13 Hz) and resampled to `sample_rate_hz`.
    #[serde(default)]
    pub source_rate_hz: Option<f64>,
    pub epoch_len_s: f64,
    pub channel_roles: Vec<ChannelRole>,
    pub n_records: usize,
    pub n_groups: usize,
    pub classes: Vec<ClassSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEvent {
    pub epoch: usize,
    pub channel: ChannelRole,
    pub onset_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub events: Vec<SyntheticEvent>,
    /// Record id to group id.
    pub groups: BTreeMap<String, String>,
}

const BUNDLED: [(&str, &str); 2] = [
    ("sleep6", include_str!("../specs/sleep6.json")),
    ("stationary6", include_str!("../specs/stationary6.json")),
];

const PREFILTER_CUTOFF_HZ: f64 = 13.0;
const PREFILTER_ORDER: usize = 4;
const BURN_IN: usize = 500;

/// Lag-polynomial coefficients `c` of `1 + c1 z^-1 + ...` from AR coefficients.
fn lag_polynomial(ar: &[f64]) -> Vec<f64> {
    ar.iter().map(|a| -a).collect()
}

/// True when all roots of `1 - sum a_k z^-k` lie strictly inside the unit
/// circle, by the step-down recursion on reflection coefficients.
pub fn ar_is_stable(ar: &[f64]) -> bool {
    let mut c = lag_polynomial(ar);
    while let Some(&k) = c.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let m = c.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..m - 1).map(|i| (c[i] - k * c[m - 2 - i]) / denom).collect();
        c = next;
    }
    true
}

/// AR coefficients whose spectrum peaks at each given frequency.
pub fn peaks_to_ar(peaks: &[Peak], sample_rate_hz: f64) -> Vec<f64> {
    // Multiply the lag polynomials 1 - 2 r cos(w) z^-1 + r^2 z^-2.
    let mut poly = vec![1.0];
    for p in peaks {
        let w = 2.0 * PI * p.freq_hz / sample_rate_hz;
        let sec = [1.0, -2.0 * p.radius * w.cos(), p.radius * p.radius];
        let mut next = vec![0.0; poly.len() + 2];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in sec.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c).collect()
}

/// Stationary variance of the AR process driven by unit-variance noise.
fn unit_noise_variance(ar: &[f64]) -> f64 {
    let p = ar.len();
    let mut h = vec![0.0; p];
    let mut total = 0.0;
    for t in 0..100_000 {
        let v = if t == 0 { 1.0 } else { 0.0 } + (0..p).map(|k| ar[k] * h[k]).sum::<f64>();
        if p > 0 {
            h.rotate_right(1);
            h[0] = v;
        }
        total += v * v;
        if t > 10 * p.max(1) && v.abs() < 1e-12 && h.iter().all(|x| x.abs() < 1e-12) {
            break;
        }
    }
    total
}

impl ChannelProcess {
    fn coefficients(&self, rate: f64) -> Vec<f64> {
        match &self.ar {
            Some(a) => a.clone(),
            None => peaks_to_ar(&self.peaks, rate),
        }
    }
}

struct Prepared {
    coeffs: Vec<f64>,
    noise_std: f64,
    jitter: f64,
}

fn validate(spec: &SyntheticClassSpec) -> Result<()> {
    let bad = |m: String| Err(Error::invalid(m));
    if !(spec.sample_rate_hz.is_finite() && spec.sample_rate_hz > 0.0) {
        return bad("sample rate must be positive".into());
    }
    if let Some(r) = spec.source_rate_hz {
        if !(r.is_finite() && r > 2.0 * PREFILTER_CUTOFF_HZ) {
            return bad(format!("source rate must exceed {} Hz", 2.0 * PREFILTER_CUTOFF_HZ));
        }
    }
    if !(spec.epoch_len_s * spec.sample_rate_hz >= 2.0) {
        return bad("epochs must span at least two samples".into());
    }
    if spec.channel_roles.is_empty() {
        return bad("no channels".into());
    }
    for (i, r) in spec.channel_roles.iter().enumerate() {
        if spec.channel_roles[..i].contains(r) {
            return bad(format!("channel role {r} listed twice"));
        }
    }
    if spec.n_records == 0 || spec.n_groups == 0 || spec.n_groups > spec.n_records {
        return bad("need 1 <= n_groups <= n_records".into());
    }
    if spec.classes.is_empty() {
        return bad("no classes".into());
    }
    let rate = spec.source_rate_hz.unwrap_or(spec.sample_rate_hz);
    for c in &spec.classes {
        if !(c.prevalence.is_finite() && c.prevalence > 0.0) {
            return bad(format!("class `{}` needs a positive prevalence", c.name));
        }
        if c.channels.len() != 1 && c.channels.len() != spec.channel_roles.len() {
            return bad(format!(
                "class `{}` gives {} channel processes for {} channels",
                c.name,
                c.channels.len(),
                spec.channel_roles.len()
            ));
        }
        for p in &c.channels {
            for pk in &p.peaks {
                if !(pk.freq_hz > 0.0 && pk.freq_hz < rate / 2.0 && (0.0..1.0).contains(&pk.radius)) {
                    return bad(format!("class `{}` has an invalid peak {pk:?}", c.name));
                }
            }
            if !(p.std_uv.is_finite() && p.std_uv >= 0.0 && p.std_jitter.is_finite() && p.std_jitter >= 0.0) {
                return bad(format!("class `{}` has an invalid standard deviation", c.name));
            }
            let coeffs = p.coefficients(rate);
            if coeffs.iter().any(|a| !a.is_finite()) || !ar_is_stable(&coeffs) {
                return bad(format!("class `{}` has an unstable AR process {coeffs:?}", c.name));
            }
        }
        for t in &c.transients {
            if !(t.duration_s > 0.0 && t.duration_s < spec.epoch_len_s) {
                return bad(format!("class `{}`: transient duration must fit in the epoch", c.name));
            }
            if !(0.0..=1.0).contains(&t.probability) || !t.amplitude_uv.is_finite() {
                return bad(format!("class `{}`: invalid transient probability or amplitude", c.name));
            }
            if let Some(r) = t.channels.iter().find(|r| !spec.channel_roles.contains(r)) {
                return bad(format!("class `{}`: transient on missing channel {r}", c.name));
            }
            if let Waveform::Burst { freq_hz } = t.waveform {
                if !(freq_hz > 0.0 && freq_hz < spec.sample_rate_hz / 2.0) {
                    return bad(format!("class `{}`: burst frequency out of range", c.name));
                }
            }
        }
    }
    Ok(())
}

impl SyntheticClassSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        validate(&spec)?;
        Ok(spec)
    }

    /// A spec shipped with the crate: `sleep6` (stationary classes plus a
    /// transient-defined minority class) or `stationary6` (six classes with
    /// disjoint spectral peaks).
    pub fn bundled(name: &str) -> Result<Self> {
        let text = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::invalid(format!("no bundled spec named `{name}`")))?;
        Self::from_json(text)
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn epoch_len_samples(&self) -> usize {
        (self.epoch_len_s * self.sample_rate_hz).round() as usize
    }
}

fn waveform(w: Waveform, n: usize, rate: f64, amplitude: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let u = (j as f64 + 0.5) / n as f64;
            match w {
                Waveform::Biphasic => amplitude * (2.0 * PI * u).sin(),
                Waveform::Burst { freq_hz } => {
                    let hann = (PI * u).sin().powi(2);
                    amplitude * hann * (2.0 * PI * freq_hz * j as f64 / rate).sin()
                }
            }
        })
        .collect()
}

fn ar_series(p: &Prepared, n: usize, rng: &mut Rng) -> Vec<f64> {
    let order = p.coeffs.len();
    let scale = if p.jitter > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        (p.jitter * z).exp()
    } else {
        1.0
    };
    let sigma = p.noise_std * scale;
    let mut x = vec![0.0; BURN_IN + n];
    for t in 0..x.len() {
        let e: f64 = StandardNormal.sample(rng);
        let mut v = sigma * e;
        for k in 0..order.min(t) {
            v += p.coeffs[k] * x[t - 1 - k];
        }
        x[t] = v;
    }
    x.split_off(BURN_IN)
}

/// Generates `n_epochs` labeled epochs. Labels are drawn independently with
/// the class prevalences as weights; epoch `i` belongs to record
/// `floor(i * n_records / n_epochs)`, and record `r` to group `r % n_groups`.
pub fn generate_synthetic(spec: &SyntheticClassSpec, n_epochs: usize, seed: u64) -> Result<SyntheticDataset> {
    validate(spec)?;
    let gen_rate = spec.source_rate_hz.unwrap_or(spec.sample_rate_hz);
    let n_out = spec.epoch_len_samples();
    let n_gen = (spec.epoch_len_s * gen_rate).round() as usize;
    let n_ch = spec.channel_roles.len();

    let prepared: Vec<Vec<Prepared>> = spec
        .classes
        .iter()
        .map(|c| {
            (0..n_ch)
                .map(|ch| {
                    let p = &c.channels[if c.channels.len() == 1 { 0 } else { ch }];
                    let coeffs = p.coefficients(gen_rate);
                    Prepared {
                        noise_std: p.std_uv / unit_noise_variance(&coeffs).sqrt(),
                        coeffs,
                        jitter: p.std_jitter,
                    }
                })
                .collect()
        })
        .collect();

    let total: f64 = spec.classes.iter().map(|c| c.prevalence).sum();
    let mut label_rng = rng_for(seed, &[stream::SYNTH]);
    let labels: Vec<usize> = (0..n_epochs)
        .map(|_| {
            let mut u = label_rng.random::<f64>() * total;
            for (k, c) in spec.classes.iter().enumerate() {
                if u < c.prevalence {
                    return k;
                }
                u -= c.prevalence;
            }
            spec.classes.len() - 1
        })
        .collect();

    let generated: Vec<(Epoch, Vec<SyntheticEvent>)> = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let class = &spec.classes[label];
            let mut rng = rng_for(seed, &[stream::SYNTH, i as u64 + 1]);
            let mut data: Vec<Vec<f64>> = match spec.source_rate_hz {
                None => prepared[label].iter().map(|p| ar_series(p, n_out, &mut rng)).collect(),
                // Background at the source rate, then the recording chain.
                Some(_) => prepared[label]
                    .iter()
                    .map(|p| {
                        let raw = Signal::from_trusted(ar_series(p, n_gen, &mut rng), gen_rate);
                        let filtered = butterworth_lowpass(&raw, PREFILTER_CUTOFF_HZ, PREFILTER_ORDER)?;
                        Ok(resample(&filtered, spec.sample_rate_hz)?.into_samples())
                    })
                    .collect::<Result<_>>()?,
            };
            if data.iter().any(|x| x.len() != n_out) {
                return Err(Error::invalid("source and target rates give inconsistent epoch lengths"));
            }
            let mut events = Vec::new();
            for t in &class.transients {
                if rng.random::<f64>() >= t.probability {
                    continue;
                }
                let len = ((t.duration_s * spec.sample_rate_hz).round() as usize).max(1);
                let shape = waveform(t.waveform, len, spec.sample_rate_hz, t.amplitude_uv);
                for _ in 0..t.count {
                    let onset = rng.random_range(0..=n_out - len);
                    for role in &t.channels {
                        let ch = spec.channel_roles.iter().position(|r| r == role).expect("validated");
                        data[ch][onset..onset + len]
                            .iter_mut()
                            .zip(&shape)
                            .for_each(|(a, b)| *a += b);
                        events.push(SyntheticEvent {
                            epoch: i,
                            channel: *role,
                            onset_s: onset as f64 / spec.sample_rate_hz,
                            duration_s: len as f64 / spec.sample_rate_hz,
                        });
                    }
                }
            }
            let channels = data
                .into_iter()
                .map(|x| Signal::new(x, spec.sample_rate_hz))
                .collect::<Result<_>>()?;
            Ok((Epoch::new(channels, spec.channel_roles.clone(), label)?, events))
        })
        .collect::<Result<_>>()?;

    let record = |i: usize| format!("rec{:03}", i * spec.n_records / n_epochs.max(1));
    let record_ids: Vec<String> = (0..n_epochs).map(record).collect();
    let groups = (0..spec.n_records)
        .map(|r| (format!("rec{r:03}"), format!("group{}", r % spec.n_groups)))
        .collect();
    let (epochs, events): (Vec<Epoch>, Vec<Vec<SyntheticEvent>>) = generated.into_iter().unzip();
    let vocabulary = spec.classes.iter().map(|c| c.name.clone()).collect();
    Ok(SyntheticDataset {
        dataset: Dataset::new(epochs, record_ids, vocabulary)?,
        events: events.into_iter().flatten().collect(),
        groups,
    })
}
