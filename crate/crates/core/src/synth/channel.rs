use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// One propagation path with a linearly drifting delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub gain: f64,
    /// Delay at `t = 0`, seconds.
    pub delay: f64,
    /// Delay drift, seconds per second.
    #[serde(default)]
    pub delay_velocity: f64,
    /// Initial phase, radians.
    #[serde(default)]
    pub phase: f64,
}

impl PathSpec {
    pub fn delay_at(&self, t: f64) -> f64 {
        self.delay + self.delay_velocity * t
    }

    /// Complex coefficient `gain e^{j phase} e^{-j 2 pi f tau(t)}` at absolute frequency `f`.
    pub fn coefficient(&self, f: f64, t: f64) -> C64 {
        C64::from_polar(self.gain, self.phase - TAU * f * self.delay_at(t))
    }
}

/// Multipath scene sampled on a delay grid (impulse response) or a frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub paths: Vec<PathSpec>,
    pub carrier_freq: f64,
    pub noise_std: f64,
    pub sample_rate: f64,
    pub duration: f64,
    /// Baseband frequency offsets for the frequency response, Hz.
    pub freq_grid: Vec<f64>,
    /// Tap spacing of the impulse-response grid, seconds.
    pub delay_resolution: f64,
    pub num_taps: usize,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !(self.duration > 0.0) {
            return Err(Error::InvalidSpec("sample_rate and duration must be > 0".into()));
        }
        if !(self.delay_resolution > 0.0) || self.num_taps == 0 {
            return Err(Error::InvalidSpec("delay grid must have positive spacing and >= 1 tap".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidSpec("noise_std must be >= 0".into()));
        }
        Ok(())
    }

    /// Sampling instants `n / sample_rate` covering `duration`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.duration * self.sample_rate).floor().max(1.0) as usize;
        (0..n).map(|i| i as f64 / self.sample_rate).collect()
    }
}

fn noise<R: Rng + ?Sized>(std: f64, rng: &mut R) -> C64 {
    if std == 0.0 {
        return ZERO;
    }
    CMatrix::complex_gaussian(1, 1, std, rng)[(0, 0)]
}

/// Impulse-response taps at time `t`; each path lands on its nearest tap.
pub fn gen_cir<R: Rng + ?Sized>(spec: &ChannelSpec, t: f64, rng: &mut R) -> Result<Vec<C64>> {
    spec.validate()?;
    let mut taps = vec![ZERO; spec.num_taps];
    for path in &spec.paths {
        let idx = (path.delay_at(t) / spec.delay_resolution).round();
        if idx >= 0.0 && (idx as usize) < spec.num_taps {
            taps[idx as usize] += path.coefficient(spec.carrier_freq, t);
        }
    }
    for tap in &mut taps {
        *tap += noise(spec.noise_std, rng);
    }
    Ok(taps)
}

/// Frequency response at time `t` over `freq_grid`.
pub fn gen_cfr<R: Rng + ?Sized>(spec: &ChannelSpec, t: f64, rng: &mut R) -> Result<Vec<C64>> {
    spec.validate()?;
    if spec.freq_grid.is_empty() {
        return Err(Error::InvalidSpec("freq_grid is empty".into()));
    }
    let mut out = Vec::with_capacity(spec.freq_grid.len());
    for &f in &spec.freq_grid {
        let h: C64 = spec
            .paths
            .iter()
            .map(|p| p.coefficient(f + spec.carrier_freq, t))
            .sum();
        out.push(h + noise(spec.noise_std, rng));
    }
    Ok(out)
}

/// Fourier transform of impulse-response taps evaluated at baseband offsets.
pub fn cir_to_cfr(taps: &[C64], delay_resolution: f64, freqs: &[f64]) -> Vec<C64> {
    freqs
        .iter()
        .map(|&f| {
            taps.iter()
                .enumerate()
                .map(|(n, &h)| h * C64::from_polar(1.0, -TAU * f * n as f64 * delay_resolution))
                .sum()
        })
        .collect()
}

/// Frequency responses over all sample times, `times x freqs`.
pub fn cfr_series<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> Result<CMatrix> {
    let times = spec.sample_times();
    let mut out = CMatrix::zeros(times.len(), spec.freq_grid.len());
    for (i, &t) in times.iter().enumerate() {
        for (j, h) in gen_cfr(spec, t, rng)?.into_iter().enumerate() {
            out[(i, j)] = h;
        }
    }
    Ok(out)
}

/// `H1 * conj(H2)` elementwise.
pub fn csi_conjugate_mult(h1: &[C64], h2: &[C64]) -> Result<Vec<C64>> {
    if h1.len() != h2.len() {
        return Err(Error::LengthMismatch { left: h1.len(), right: h2.len() });
    }
    Ok(h1.iter().zip(h2).map(|(a, b)| a * b.conj()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;

    fn spec(paths: Vec<PathSpec>, noise_std: f64) -> ChannelSpec {
        ChannelSpec {
            paths,
            carrier_freq: 5.8e9,
            noise_std,
            sample_rate: 1000.0,
            duration: 0.1,
            freq_grid: (0..30).map(|k| k as f64 * 312.5e3).collect(),
            delay_resolution: 5e-9,
            num_taps: 64,
        }
    }

    fn path(gain: f64, delay: f64, velocity: f64) -> PathSpec {
        PathSpec { gain, delay, delay_velocity: velocity, phase: 0.3 }
    }

    #[test]
    fn static_path_has_constant_tap() {
        let s = spec(vec![path(0.7, 20e-9, 0.0)], 0.0);
        let mut rng = seeded_rng(1);
        for t in s.sample_times() {
            let taps = gen_cir(&s, t, &mut rng).unwrap();
            assert!((taps[4].norm() - 0.7).abs() < 1e-12);
            let cfr = gen_cfr(&s, t, &mut rng).unwrap();
            assert!(cfr.iter().all(|h| (h.norm() - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn empty_scene_is_noise() {
        let s = spec(vec![], 0.2);
        let mut rng = seeded_rng(2);
        let mut power = 0.0;
        let mut count = 0;
        while count < 10_000 {
            for h in gen_cir(&s, 0.0, &mut rng).unwrap() {
                power += h.norm_sqr();
                count += 1;
            }
        }
        let std = (power / count as f64).sqrt();
        assert!((std / 0.2 - 1.0).abs() < 0.1);
    }

    #[test]
    fn drifting_delay_rotates_phase_linearly() {
        let v = 1e-9;
        let s = spec(vec![path(1.0, 20e-9, v)], 0.0);
        let mut rng = seeded_rng(3);
        let times = s.sample_times();
        let phases: Vec<f64> = times
            .iter()
            .map(|&t| gen_cir(&s, t, &mut rng).unwrap()[4].arg())
            .collect();
        let mut unwrapped = vec![phases[0]];
        for w in phases.windows(2) {
            let mut d = w[1] - w[0];
            d -= TAU * (d / TAU).round();
            unwrapped.push(unwrapped.last().unwrap() + d);
        }
        let n = times.len() as f64;
        let (mt, mp) = (times.iter().sum::<f64>() / n, unwrapped.iter().sum::<f64>() / n);
        let cov: f64 = times.iter().zip(&unwrapped).map(|(t, p)| (t - mt) * (p - mp)).sum();
        let var: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
        let expected = -TAU * s.carrier_freq * v;
        assert!((cov / var / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn on_grid_cfr_is_fourier_of_cir() {
        let s = spec(vec![path(1.0, 10e-9, 0.0), path(0.4, 45e-9, 0.0)], 0.0);
        let mut rng = seeded_rng(4);
        let cir = gen_cir(&s, 0.0, &mut rng).unwrap();
        let cfr = gen_cfr(&s, 0.0, &mut rng).unwrap();
        let dft = cir_to_cfr(&cir, s.delay_resolution, &s.freq_grid);
        for (a, b) in cfr.iter().zip(&dft) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn two_path_nulls_are_spaced_by_inverse_delay_gap() {
        let gap = 50e-9;
        let mut s = spec(vec![path(1.0, 0.0, 0.0), path(1.0, gap, 0.0)], 0.0);
        s.freq_grid = (0..200_000).map(|k| k as f64 * 500.0).collect();
        let h = gen_cfr(&s, 0.0, &mut seeded_rng(5)).unwrap();
        let mut nulls = Vec::new();
        for i in 1..h.len() - 1 {
            if h[i].norm() < h[i - 1].norm() && h[i].norm() < h[i + 1].norm() {
                nulls.push(s.freq_grid[i]);
            }
        }
        assert!(nulls.len() >= 3);
        for w in nulls.windows(2) {
            assert!(((w[1] - w[0]) * gap - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn conjugate_product_cancels_common_phase() {
        let mut rng = seeded_rng(6);
        let h1 = CMatrix::complex_gaussian(50, 1, 1.0, &mut rng).into_vec();
        let h2 = CMatrix::complex_gaussian(50, 1, 1.0, &mut rng).into_vec();
        let base = csi_conjugate_mult(&h1, &h2).unwrap();
        let theta: Vec<C64> = (0..50).map(|i| C64::from_polar(1.0, 0.37 * i as f64 + 1.1)).collect();
        let r1: Vec<C64> = h1.iter().zip(&theta).map(|(a, b)| a * b).collect();
        let r2: Vec<C64> = h2.iter().zip(&theta).map(|(a, b)| a * b).collect();
        let rotated = csi_conjugate_mult(&r1, &r2).unwrap();
        for (a, b) in base.iter().zip(&rotated) {
            assert!((a - b).norm() < 1e-12);
        }
        let self_prod = csi_conjugate_mult(&h1, &h1).unwrap();
        assert!(self_prod.iter().zip(&h1).all(|(p, h)| p.im == 0.0 && (p.re - h.norm_sqr()).abs() < 1e-12));
        assert!(matches!(csi_conjugate_mult(&h1, &h2[..3]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(vec![], 0.0);
        s.sample_rate = 0.0;
        assert!(gen_cir(&s, 0.0, &mut seeded_rng(0)).is_err());
        let mut s = spec(vec![], 0.0);
        s.freq_grid.clear();
        assert!(gen_cfr(&s, 0.0, &mut seeded_rng(0)).is_err());
    }
}
