//! Periodogram band power and its Gaussian differential-entropy form.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::EPS;
use crate::error::{Error, Result};

/// Gaussian differential entropy `0.5 ln(2 pi e var)` in nats, with the
/// unbiased sample variance floored at [`EPS`].
pub fn differential_entropy(segment: &[f64]) -> f64 {
    let n = segment.len();
    let var = if n < 2 {
        0.0
    } else {
        let mean = segment.iter().sum::<f64>() / n as f64;
        segment.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    entropy_of_variance(var)
}

/// `0.5 ln(2 pi e max(var, EPS))`.
pub fn entropy_of_variance(var: f64) -> f64 {
    0.5 * (2.0 * PI * E * var.max(EPS)).ln()
}

/// `count` equal-width bands partitioning `[lo, hi)`.
pub fn equal_bands(lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / count as f64;
    (0..count)
        .map(|i| {
            let a = lo + width * i as f64;
            let b = if i + 1 == count {
                hi
            } else {
                lo + width * (i + 1) as f64
            };
            (a, b)
        })
        .collect()
}

/// One-sided periodogram over fixed-length segments, integrated over bands.
///
/// Bin `k` is treated as a constant density over
/// `[k df - df/2, k df + df/2)`; a band collects each bin's density times
/// the length of its overlap with `[lo, hi)`. For a flat spectrum every band
/// therefore receives power proportional to its width, regardless of how
/// the band edges fall relative to the bin grid.
pub struct BandPower {
    fft: Arc<dyn Fft<f64>>,
    seg_samples: usize,
    fs: f64,
    /// `bins x bands` overlap lengths in Hz.
    weights: Array2<f64>,
    n_bands: usize,
}

impl BandPower {
    pub fn new(fs: f64, seg_samples: usize, bands: &[(f64, f64)]) -> Result<Self> {
        if seg_samples < 2 {
            return Err(Error::InvalidArgument(format!(
                "segment must hold at least 2 samples, got {seg_samples}"
            )));
        }
        if bands.is_empty() {
            return Err(Error::Empty("band list"));
        }
        for &(lo, hi) in bands {
            if !(lo > 0.0 && lo < hi && hi <= fs / 2.0) {
                return Err(Error::InvalidBand { lo, hi, fs });
            }
        }
        let n_bins = seg_samples / 2 + 1;
        let df = fs / seg_samples as f64;
        let weights = Array2::from_shape_fn((n_bins, bands.len()), |(k, b)| {
            let (lo, hi) = bands[b];
            let centre = k as f64 * df;
            let (a, z) = (centre - df / 2.0, centre + df / 2.0);
            (z.min(hi) - a.max(lo)).max(0.0)
        });
        let fft = FftPlanner::new().plan_fft_forward(seg_samples);
        Ok(Self {
            fft,
            seg_samples,
            fs,
            weights,
            n_bands: bands.len(),
        })
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    /// One-sided power spectral density of a single segment.
    pub fn psd(&self, segment: &[f64]) -> Vec<f64> {
        let n = self.seg_samples;
        let mut buf: Vec<Complex64> = segment.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.fs * n as f64);
        (0..=n / 2)
            .map(|k| {
                let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) {
                    1.0
                } else {
                    2.0
                };
                one_sided * buf[k].norm_sqr() * scale
            })
            .collect()
    }

    /// Band powers of one segment.
    pub fn band_powers(&self, segment: &[f64]) -> Vec<f64> {
        let psd = self.psd(segment);
        (0..self.n_bands)
            .map(|b| {
                psd.iter()
                    .zip(self.weights.column(b))
                    .map(|(p, w)| p * w)
                    .sum()
            })
            .collect()
    }

    /// `channels x bands x segments` band powers of a `channels x samples`
    /// trial. The sample count must be a whole number of segments.
    pub fn trial_powers(&self, samples: ArrayView2<f64>) -> Result<Array3<f64>> {
        let (n_ch, n_samples) = samples.dim();
        if n_samples % self.seg_samples != 0 || n_samples == 0 {
            return Err(Error::InvalidArgument(format!(
                "{n_samples} samples do not split into segments of {}",
                self.seg_samples
            )));
        }
        let n_seg = n_samples / self.seg_samples;
        let mut out = Array3::zeros((n_ch, self.n_bands, n_seg));
        let mut seg = vec![0.0; self.seg_samples];
        for c in 0..n_ch {
            let row = samples.row(c);
            for s in 0..n_seg {
                for (dst, &v) in seg
                    .iter_mut()
                    .zip(row.iter().skip(s * self.seg_samples))
                {
                    *dst = v;
                }
                for (b, p) in self.band_powers(&seg).into_iter().enumerate() {
                    out[[c, b, s]] = p;
                }
            }
        }
        Ok(out)
    }
}
