use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::ft::ft_surrogate_samples;
use super::SurrogateConfig;
use crate::dft::{irfft, rfft};
use crate::error::Result;
use crate::rng::rng_from_seed;
use crate::signal::Signal;

/// Why the iteration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IaaftStop {
    /// Relative improvement fell below the tolerance, or the spectrum matched.
    Converged,
    /// The next rank-ordering step would have increased the discrepancy; the
    /// previous iterate was kept.
    Stalled,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IaaftReport {
    /// Number of accepted rank-ordering steps.
    pub iterations: usize,
    /// Relative L2 distance between the output's one-sided amplitude spectrum
    /// and the original's.
    pub discrepancy: f64,
    /// Discrepancy after each accepted step; non-increasing.
    pub history: Vec<f64>,
    pub stop: IaaftStop,
}

/// Rearranges `sorted_values` into the rank order of `template`.
///
/// Ties in `template` are broken by position, so the result is a
/// deterministic permutation of `sorted_values`.
pub fn rank_order(template: &[f64], sorted_values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(template.len(), sorted_values.len());
    let mut idx: Vec<usize> = (0..template.len()).collect();
    idx.sort_by(|&a, &b| template[a].total_cmp(&template[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; template.len()];
    for (rank, &i) in idx.iter().enumerate() {
        out[i] = sorted_values[rank];
    }
    out
}

fn relative_distance(bins: &[Complex64], target: &[f64], target_norm: f64) -> f64 {
    if target_norm == 0.0 {
        return 0.0;
    }
    let sq: f64 = bins
        .iter()
        .zip(target)
        .map(|(c, &a)| {
            let d = c.norm() - a;
            d * d
        })
        .sum();
    sq.sqrt() / target_norm
}

/// IAAFT surrogate.
///
/// Starts from an FT surrogate, then alternates rank-ordering onto the
/// original values with restoring the original Fourier amplitudes. The
/// output is always the result of a rank-ordering step, so its sorted samples
/// are exactly the sorted input.
pub fn iaaft_surrogate(signal: &Signal, config: &SurrogateConfig) -> Result<(Signal, IaaftReport)> {
    config.validate()?;
    let x = signal.samples();
    let n = x.len();
    let target: Vec<f64> = rfft(x).iter().map(|c| c.norm()).collect();
    let target_norm = target.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut rng = rng_from_seed(config.seed);
    let mut candidate = ft_surrogate_samples(x, &mut rng);
    let mut best: Vec<f64> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut stop = IaaftStop::MaxIters;

    for it in 1..=config.iaaft_max_iters {
        let ordered = rank_order(&candidate, &sorted);
        let bins = rfft(&ordered);
        let d = relative_distance(&bins, &target, target_norm);
        if let Some(&prev) = history.last() {
            if d > prev {
                stop = IaaftStop::Stalled;
                break;
            }
        }
        let improvement = history.last().map(|&prev| prev - d);
        history.push(d);
        best = ordered;
        let converged = d == 0.0
            || improvement.is_some_and(|imp| imp <= config.iaaft_tolerance * history[it - 2]);
        if converged {
            stop = IaaftStop::Converged;
            break;
        }
        if it == config.iaaft_max_iters {
            break;
        }
        let adjusted: Vec<Complex64> = bins
            .iter()
            .zip(&target)
            .map(|(c, &a)| {
                let norm = c.norm();
                if norm > 0.0 {
                    c * (a / norm)
                } else {
                    Complex64::new(a, 0.0)
                }
            })
            .collect();
        candidate = irfft(&adjusted, n);
    }

    let report = IaaftReport {
        iterations: history.len(),
        discrepancy: *history.last().expect("at least one iteration runs"),
        history,
        stop,
    };
    Ok((Signal::from_trusted(best, signal.sample_rate_hz()), report))
}
