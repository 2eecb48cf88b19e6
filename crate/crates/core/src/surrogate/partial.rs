use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ft::ft_surrogate_samples;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Rng};
use crate::signal::Signal;

/// A window to replace, in seconds from the start of the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSurrogateSpec {
    pub window_start_s: f64,
    pub window_len_s: f64,
    /// Length of each cosine crossfade flanking the window.
    pub crossfade_s: f64,
}

impl PartialSurrogateSpec {
    pub fn new(window_start_s: f64, window_len_s: f64) -> Self {
        Self {
            window_start_s,
            window_len_s,
            crossfade_s: 0.5,
        }
    }
}

/// A replaced window in samples: the core `[start, start + len)` plus
/// crossfades of `fade_before` samples before it and `fade_after` after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Splice {
    pub start: usize,
    pub len: usize,
    pub fade_before: usize,
    pub fade_after: usize,
}

fn to_samples(seconds: f64, rate: f64, what: &str) -> Result<usize> {
    if !(seconds.is_finite() && seconds >= 0.0) {
        return Err(Error::invalid(format!("{what} must be a non-negative number of seconds")));
    }
    Ok((seconds * rate).round() as usize)
}

impl Splice {
    /// Converts a spec, requiring the crossfades to fit inside the signal.
    pub fn from_spec(spec: &PartialSurrogateSpec, sample_rate_hz: f64, n: usize) -> Result<Self> {
        let start = to_samples(spec.window_start_s, sample_rate_hz, "window start")?;
        let len = to_samples(spec.window_len_s, sample_rate_hz, "window length")?;
        let fade = to_samples(spec.crossfade_s, sample_rate_hz, "crossfade")?;
        if start < fade || start + len + fade > n {
            return Err(Error::invalid(format!(
                "window [{start}, {}) with {fade}-sample crossfades exceeds the {n}-sample signal",
                start + len
            )));
        }
        Ok(Self {
            start,
            len,
            fade_before: fade,
            fade_after: fade,
        })
    }

    /// Window with crossfades shortened where they would leave the signal.
    pub fn clipped(start: usize, len: usize, fade: usize, n: usize) -> Result<Self> {
        if start + len > n {
            return Err(Error::invalid(format!(
                "window [{start}, {}) exceeds the {n}-sample signal",
                start + len
            )));
        }
        Ok(Self {
            start,
            len,
            fade_before: fade.min(start),
            fade_after: fade.min(n - start - len),
        })
    }

    /// First sample that may differ from the input.
    pub fn region_start(&self) -> usize {
        self.start - self.fade_before
    }

    /// One past the last sample that may differ from the input.
    pub fn region_end(&self) -> usize {
        self.start + self.len + self.fade_after
    }

    pub fn region_len(&self) -> usize {
        self.region_end() - self.region_start()
    }

    /// Weight of the replacement at each sample of the region; the original
    /// gets `1 - w`.
    pub fn replacement_weights(&self) -> Vec<f64> {
        let mut w = crossfade_ramp(self.fade_before);
        w.extend(std::iter::repeat_n(1.0, self.len));
        let mut down = crossfade_ramp(self.fade_after);
        down.reverse();
        w.extend(down);
        w
    }
}

/// Rising cosine half-wave, `sin^2(pi t / (2 T))` sampled at
/// `t = (j + 1) T / (f + 1)` for `j in 0..f`. Values lie strictly in (0, 1),
/// so the ramp connects the untouched samples to the fully replaced core.
pub fn crossfade_ramp(f: usize) -> Vec<f64> {
    (0..f)
        .map(|j| {
            let t = (j + 1) as f64 / (f + 1) as f64;
            (PI * t / 2.0).sin().powi(2)
        })
        .collect()
}

/// Blends `replacement` (one value per region sample) into `samples`.
/// Samples outside the region are copied unchanged.
pub fn splice_replace(samples: &[f64], splice: &Splice, replacement: &[f64]) -> Vec<f64> {
    assert_eq!(replacement.len(), splice.region_len());
    let mut out = samples.to_vec();
    let r0 = splice.region_start();
    for (j, (&w, &r)) in splice.replacement_weights().iter().zip(replacement).enumerate() {
        let i = r0 + j;
        out[i] = if w == 1.0 { r } else { (1.0 - w) * samples[i] + w * r };
    }
    out
}

/// Replaces the window with a stretch of an FT surrogate of the rest of the
/// signal.
///
/// The two flanks outside the core window are joined end to end, an FT
/// surrogate of the joined remainder is drawn, and a stretch as long as the
/// whole region is read from it starting at a random offset. FT surrogates
/// are periodic, so the read wraps around.
pub fn splice_surrogate(samples: &[f64], splice: &Splice, rng: &mut Rng) -> Result<Vec<f64>> {
    let n = samples.len();
    if splice.region_len() == 0 {
        return Ok(samples.to_vec());
    }
    let mut remainder = Vec::with_capacity(n - splice.len);
    remainder.extend_from_slice(&samples[..splice.start]);
    remainder.extend_from_slice(&samples[splice.start + splice.len..]);
    if remainder.len() < 2 {
        return Err(Error::invalid(format!(
            "window leaves {} samples to draw a surrogate from",
            remainder.len()
        )));
    }
    let surrogate = ft_surrogate_samples(&remainder, rng);
    let offset = rng.random_range(0..surrogate.len());
    let replacement: Vec<f64> = (0..splice.region_len())
        .map(|j| surrogate[(offset + j) % surrogate.len()])
        .collect();
    Ok(splice_replace(samples, splice, &replacement))
}

/// Partial FT surrogate of one signal.
pub fn partial_ft_surrogate(signal: &Signal, spec: &PartialSurrogateSpec, seed: u64) -> Result<Signal> {
    let splice = Splice::from_spec(spec, signal.sample_rate_hz(), signal.len())?;
    let mut rng = rng_for(seed, &[]);
    let out = splice_surrogate(signal.samples(), &splice, &mut rng)?;
    Ok(Signal::from_trusted(out, signal.sample_rate_hz()))
}
