use std::f64::consts::PI;

use rand::Rng as _;
use rustfft::num_complex::Complex64;

use crate::dft::{irfft, irfft_with_residue, rfft};
use crate::rng::{rng_from_seed, Rng};
use crate::signal::Signal;

/// Replaces the phase of every bin except DC and Nyquist with a uniform draw
/// from `[0, 2 pi)`, keeping the magnitudes. `n` is the real signal length.
pub fn randomize_phases(bins: &mut [Complex64], n: usize, rng: &mut Rng) {
    for (k, bin) in bins.iter_mut().enumerate().skip(1) {
        if 2 * k == n {
            continue;
        }
        let phase = rng.random::<f64>() * 2.0 * PI;
        *bin = Complex64::from_polar(bin.norm(), phase);
    }
}

pub(crate) fn ft_surrogate_samples(samples: &[f64], rng: &mut Rng) -> Vec<f64> {
    let mut bins = rfft(samples);
    randomize_phases(&mut bins, samples.len(), rng);
    irfft(&bins, samples.len())
}

/// FT surrogate: same amplitude spectrum and mean, random phases.
pub fn ft_surrogate(signal: &Signal, seed: u64) -> Signal {
    let mut rng = rng_from_seed(seed);
    let out = ft_surrogate_samples(signal.samples(), &mut rng);
    Signal::from_trusted(out, signal.sample_rate_hz())
}

/// [`ft_surrogate`] plus the largest imaginary residue of the inverse
/// transform, which is discarded from the output.
pub fn ft_surrogate_with_residue(signal: &Signal, seed: u64) -> (Signal, f64) {
    let mut rng = rng_from_seed(seed);
    let mut bins = rfft(signal.samples());
    randomize_phases(&mut bins, signal.len(), &mut rng);
    let (out, residue) = irfft_with_residue(&bins, signal.len());
    (Signal::from_trusted(out, signal.sample_rate_hz()), residue)
}
