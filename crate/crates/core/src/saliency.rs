//! Saliency maps from moving-window perturbations.
//!
//! A window slides over the epoch. At every position the window of each
//! target channel is replaced, the perturbed epoch is classified, and the
//! class probabilities are recorded. [`surrogate_saliency`] fills the window
//! with partial FT surrogates and averages many replacements;
//! [`zero_out_saliency`] blends the window to zero once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Classifier;
use crate::rng::{rng_for, stream};
use crate::signal::{ChannelRole, Epoch, Signal};
use crate::surrogate::{splice_replace, splice_surrogate, Splice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencySpec {
    pub window_len_s: f64,
    pub step_s: f64,
    pub crossfade_s: f64,
    pub n_replacements: usize,
    /// Channels perturbed together; the others are left untouched.
    pub target_channels: Vec<ChannelRole>,
    pub seed: u64,
}

impl Default for SaliencySpec {
    fn default() -> Self {
        Self {
            window_len_s: 5.0,
            step_s: 0.5,
            crossfade_s: 0.5,
            n_replacements: 500,
            target_channels: vec![ChannelRole::Eeg1, ChannelRole::Eeg2],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaliencyMap {
    /// Window start times in seconds.
    pub positions: Vec<f64>,
    pub window_len_s: f64,
    pub mean_probabilities: Vec<Vec<f64>>,
    /// Standard error of each mean (zero for single evaluations).
    pub standard_errors: Vec<Vec<f64>>,
    pub baseline_probabilities: Vec<f64>,
}

impl SaliencyMap {
    /// Mean minus baseline at every position.
    pub fn changes(&self) -> Vec<Vec<f64>> {
        self.mean_probabilities
            .iter()
            .map(|m| m.iter().zip(&self.baseline_probabilities).map(|(a, b)| a - b).collect())
            .collect()
    }
}

struct Grid {
    starts: Vec<usize>,
    win: usize,
    fade: usize,
    targets: Vec<usize>,
}

fn samples(seconds: f64, rate: f64, what: &str) -> Result<usize> {
    if !(seconds.is_finite() && seconds >= 0.0) {
        return Err(Error::invalid(format!("{what} must be a non-negative number of seconds")));
    }
    Ok((seconds * rate).round() as usize)
}

fn grid(epoch: &Epoch, spec: &SaliencySpec) -> Result<Grid> {
    let rate = epoch.sample_rate_hz();
    let n = epoch.len();
    let win = samples(spec.window_len_s, rate, "window length")?;
    let step = samples(spec.step_s, rate, "window step")?;
    let fade = samples(spec.crossfade_s, rate, "crossfade")?;
    if win == 0 || step == 0 {
        return Err(Error::invalid("window length and step must span at least one sample"));
    }
    if win > n {
        return Err(Error::invalid(format!(
            "{} s window is longer than the {} s epoch",
            spec.window_len_s,
            epoch.duration_s()
        )));
    }
    if spec.n_replacements == 0 {
        return Err(Error::invalid("need at least one replacement"));
    }
    if spec.target_channels.is_empty() {
        return Err(Error::invalid("no target channels"));
    }
    let targets = spec
        .target_channels
        .iter()
        .map(|r| {
            epoch
                .roles()
                .iter()
                .position(|x| x == r)
                .ok_or_else(|| Error::invalid(format!("epoch has no {r} channel")))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = (n - win) / step + 1;
    Ok(Grid {
        starts: (0..count).map(|i| i * step).collect(),
        win,
        fade,
        targets,
    })
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.c
    }
}

/// Mean and standard error of the mean per class, summed in input order.
fn mean_and_se(draws: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = draws.len();
    let k = draws[0].len();
    let mut mean = vec![0.0; k];
    let mut se = vec![0.0; k];
    for c in 0..k {
        let mut s = Compensated::default();
        for d in draws {
            s.add(d[c]);
        }
        let m = s.value() / n as f64;
        mean[c] = m;
        if n > 1 {
            let mut v = Compensated::default();
            for d in draws {
                v.add((d[c] - m).powi(2));
            }
            se[c] = (v.value() / (n - 1) as f64 / n as f64).sqrt();
        }
    }
    (mean, se)
}

fn with_channels(epoch: &Epoch, targets: &[usize], f: impl Fn(usize, &[f64]) -> Result<Vec<f64>>) -> Result<Epoch> {
    let mut out = epoch.clone();
    for &c in targets {
        let x = f(c, epoch.channel(c).samples())?;
        out.replace_channel(c, Signal::from_trusted(x, epoch.sample_rate_hz()))?;
    }
    Ok(out)
}

fn finish(positions: Vec<f64>, spec: &SaliencySpec, per_position: Vec<(Vec<f64>, Vec<f64>)>, baseline: Vec<f64>) -> SaliencyMap {
    let (mean_probabilities, standard_errors) = per_position.into_iter().unzip();
    SaliencyMap {
        positions,
        window_len_s: spec.window_len_s,
        mean_probabilities,
        standard_errors,
        baseline_probabilities: baseline,
    }
}

/// Averages class probabilities over `n_replacements` partial FT surrogates
/// per window position. Replacement `r` of channel `c` at position `p` draws
/// from a generator seeded by `(seed, p, r, c)`.
pub fn surrogate_saliency<C: Classifier + ?Sized>(clf: &C, epoch: &Epoch, spec: &SaliencySpec) -> Result<SaliencyMap> {
    let g = grid(epoch, spec)?;
    let n = epoch.len();
    let baseline = clf.predict(epoch)?;
    let reps = spec.n_replacements;
    let draws: Vec<Vec<f64>> = (0..g.starts.len() * reps)
        .into_par_iter()
        .map(|job| {
            let (p, r) = (job / reps, job % reps);
            let splice = Splice::clipped(g.starts[p], g.win, g.fade, n)?;
            let perturbed = with_channels(epoch, &g.targets, |c, x| {
                let mut rng = rng_for(spec.seed, &[stream::SALIENCY, p as u64, r as u64, c as u64]);
                splice_surrogate(x, &splice, &mut rng)
            })?;
            clf.predict(&perturbed)
        })
        .collect::<Result<_>>()?;
    let per_position = draws.chunks(reps).map(mean_and_se).collect();
    let positions = g.starts.iter().map(|&s| s as f64 / epoch.sample_rate_hz()).collect();
    Ok(finish(positions, spec, per_position, baseline))
}

/// Blends each window to zero with the same crossfades; one evaluation per
/// position, so `n_replacements` is ignored beyond validation.
pub fn zero_out_saliency<C: Classifier + ?Sized>(clf: &C, epoch: &Epoch, spec: &SaliencySpec) -> Result<SaliencyMap> {
    let g = grid(epoch, spec)?;
    let n = epoch.len();
    let baseline = clf.predict(epoch)?;
    let per_position: Vec<(Vec<f64>, Vec<f64>)> = g
        .starts
        .par_iter()
        .map(|&start| {
            let splice = Splice::clipped(start, g.win, g.fade, n)?;
            let zeros = vec![0.0; splice.region_len()];
            let perturbed = with_channels(epoch, &g.targets, |_, x| Ok(splice_replace(x, &splice, &zeros)))?;
            let p = clf.predict(&perturbed)?;
            let se = vec![0.0; p.len()];
            Ok((p, se))
        })
        .collect::<Result<_>>()?;
    let positions = g.starts.iter().map(|&s| s as f64 / epoch.sample_rate_hz()).collect();
    Ok(finish(positions, spec, per_position, baseline))
}
