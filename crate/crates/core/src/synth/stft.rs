use std::f64::consts::TAU;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic window coefficients.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 * (1.0 - (TAU * n as f64 / len as f64).cos()))
                .collect(),
        }
    }
}

/// Number of full frames.
pub fn frame_count(len: usize, window_len: usize, hop: usize) -> usize {
    if window_len == 0 || hop == 0 || window_len > len {
        0
    } else {
        (len - window_len) / hop + 1
    }
}

/// Row of the zero-frequency bin after centering.
pub fn centered_bin(k: usize, window_len: usize) -> usize {
    (k + window_len / 2) % window_len
}

/// Short-time spectrum, `frames x window_len`, unitary scaling, zero frequency at
/// column `window_len / 2`.
pub fn stft_dfs(x: &[C64], window_len: usize, hop: usize, window: Window) -> Result<CMatrix> {
    if window_len == 0 || hop == 0 {
        return Err(Error::InvalidSpec("window_len and hop must be >= 1".into()));
    }
    if window_len > x.len() {
        return Err(Error::InvalidSpec(format!(
            "window_len {window_len} exceeds signal length {}",
            x.len()
        )));
    }
    let frames = frame_count(x.len(), window_len, hop);
    let coeffs = window.coefficients(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_len);
    let scale = 1.0 / (window_len as f64).sqrt();
    let mut out = CMatrix::zeros(frames, window_len);
    let mut buf = vec![C64::new(0.0, 0.0); window_len];
    for f in 0..frames {
        for (n, b) in buf.iter_mut().enumerate() {
            *b = x[f * hop + n] * coeffs[n];
        }
        fft.process(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            out[(f, centered_bin(k, window_len))] = v * scale;
        }
    }
    Ok(out)
}
