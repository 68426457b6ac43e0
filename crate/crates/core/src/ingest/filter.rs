//! Zero-phase Butterworth band-pass filtering.
//!
//! The filter is designed in the analog domain (Butterworth low-pass
//! prototype, low-pass to band-pass transform), mapped to the z-plane with
//! the pre-warped bilinear transform and realized as a cascade of biquads.
//! [`BandpassFilter::apply_zero_phase`] runs the cascade forward and
//! backward over an odd-reflected extension of the input.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Direct form II transposed, zero initial state.
    fn run(&self, signal: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for x in signal.iter_mut() {
            let input = *x;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *x = y;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandpassFilter {
    sections: Vec<Biquad>,
    /// Band-pass order (twice the prototype order).
    order: usize,
}

impl BandpassFilter {
    /// Designs a Butterworth band-pass with an `order`-pole low-pass
    /// prototype. `order` must be even.
    pub fn design(lo: f64, hi: f64, fs: f64, order: usize) -> Result<Self> {
        if !(fs > 0.0 && lo > 0.0 && lo < hi && hi < fs / 2.0) {
            return Err(Error::InvalidBand { lo, hi, fs });
        }
        if order == 0 || order % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "butterworth prototype order must be even and positive, got {order}"
            )));
        }

        let fs2 = 2.0 * fs;
        let w_lo = fs2 * (PI * lo / fs).tan();
        let w_hi = fs2 * (PI * hi / fs).tan();
        let bw = w_hi - w_lo;
        let w0 = (w_lo * w_hi).sqrt();

        let mut sections = Vec::with_capacity(order);
        // Upper-half-plane prototype poles; their conjugates give the other half.
        for k in 0..order / 2 {
            let angle = PI * (2 * k + 1 + order) as f64 / (2 * order) as f64;
            let proto = Complex64::from_polar(1.0, angle);
            let half = proto * (bw / 2.0);
            let root = (half * half - w0 * w0).sqrt();
            for analog in [half + root, half - root] {
                let digital = (fs2 + analog) / (fs2 - analog);
                sections.push(Biquad {
                    // zeros at z = +1 and z = -1
                    b: [1.0, 0.0, -1.0],
                    a: [-2.0 * digital.re, digital.norm_sqr()],
                });
            }
        }

        // Unit gain at the digital image of the geometric centre frequency.
        let omega = 2.0 * (w0 / fs2).atan();
        let z_inv = Complex64::from_polar(1.0, -omega);
        let gain = sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
            .norm();
        for coef in sections[0].b.iter_mut() {
            *coef /= gain;
        }

        Ok(Self {
            sections,
            order: 2 * order,
        })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Magnitude response at `freq` Hz for sampling rate `fs`.
    pub fn magnitude(&self, freq: f64, fs: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
            .norm()
    }

    /// Reflection padding length used on each side.
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }

    /// Single causal pass through the cascade.
    pub fn apply_causal(&self, signal: &mut [f64]) {
        for section in &self.sections {
            section.run(signal);
        }
    }

    /// Forward-backward filtering; the output has the input's length.
    pub fn apply_zero_phase(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (signal[0], signal[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

        self.apply_causal(&mut ext);
        ext.reverse();
        self.apply_causal(&mut ext);
        ext.reverse();

        ext[pad..pad + n].to_vec()
    }
}
