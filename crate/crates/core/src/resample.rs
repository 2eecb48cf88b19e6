//! Fourier-domain rate conversion.
//!
//! The one-sided spectrum is truncated (downsampling) or zero-padded
//! (upsampling) to the new length. Content above the new Nyquist frequency is
//! discarded, so callers low-pass filter first.

use rustfft::num_complex::Complex64;

use crate::dft::{irfft, one_sided_len, rfft};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// Output length for a rate change, `round(len * target / source)`.
pub fn resampled_len(len: usize, source_rate_hz: f64, target_rate_hz: f64) -> usize {
    (len as f64 * target_rate_hz / source_rate_hz).round() as usize
}

pub fn resample(signal: &Signal, target_rate_hz: f64) -> Result<Signal> {
    if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
        return Err(Error::invalid(format!(
            "target rate must be positive, got {target_rate_hz}"
        )));
    }
    let n = signal.len();
    let m = resampled_len(n, signal.sample_rate_hz(), target_rate_hz);
    if m == n {
        return Signal::new(signal.samples().to_vec(), target_rate_hz);
    }
    if m < 2 {
        return Err(Error::invalid(format!(
            "resampling {n} samples to {target_rate_hz} Hz leaves {m} samples"
        )));
    }
    let src = rfft(signal.samples());
    let scale = m as f64 / n as f64;
    let mut dst = vec![Complex64::new(0.0, 0.0); one_sided_len(m)];
    let shared = dst.len().min(src.len());
    for k in 0..shared {
        let mut c = src[k];
        if k > 0 && 2 * k == n && m > n {
            // The source Nyquist bin stands for +f and -f at once; split it.
            c *= 0.5;
        } else if k > 0 && 2 * k == m && m < n {
            // The new Nyquist bin receives the bin and its mirror image.
            c = Complex64::new(2.0 * c.re, 0.0);
        }
        dst[k] = c * scale;
    }
    Signal::new(irfft(&dst, m), target_rate_hz)
}
