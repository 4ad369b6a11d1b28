use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{cfr_series, csi_conjugate_mult, ChannelSpec, PathSpec};
use super::dataset::Dataset;
use super::stft::{frame_count, stft_dfs, Window};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::ComplexArray;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Conjugate-multiplied CSI, `time x subcarrier`.
    #[default]
    Raw,
    /// Per-subcarrier short-time spectra, `frame x bin x subcarrier`.
    Dfs,
}

/// Two-antenna scenes where each class moves one reflector at its own Doppler rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipathSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    pub seed: u64,
    pub carrier_freq: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub subcarriers: usize,
    pub subcarrier_spacing: f64,
    pub noise_std: f64,
    /// Largest class Doppler shift as a fraction of the sample rate.
    pub max_doppler_fraction: f64,
    /// Per-sample std of the common phase random walk, radians.
    pub phase_jitter: f64,
    pub representation: Representation,
    pub window_len: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: Window,
}

impl MultipathSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.subcarriers == 0 {
            return Err(Error::InvalidSpec("classes and subcarriers must be >= 1".into()));
        }
        if !(self.sample_rate > 0.0 && self.duration > 0.0 && self.carrier_freq > 0.0) {
            return Err(Error::InvalidSpec("rates, duration and carrier must be > 0".into()));
        }
        if !(self.max_doppler_fraction > 0.0 && self.max_doppler_fraction < 0.5) {
            return Err(Error::InvalidSpec("max_doppler_fraction must lie in (0, 0.5)".into()));
        }
        if self.representation == Representation::Dfs
            && frame_count(self.num_times(), self.window_len, self.hop) == 0
        {
            return Err(Error::InvalidSpec(format!(
                "window {} / hop {} yield no frames over {} samples",
                self.window_len,
                self.hop,
                self.num_times()
            )));
        }
        Ok(())
    }

    fn num_times(&self) -> usize {
        (self.duration * self.sample_rate).floor().max(1.0) as usize
    }

    /// Doppler shift, Hz, assigned to `class`: magnitude `max (c + 1) / classes`
    /// with alternating sign, never zero.
    pub fn class_doppler(&self, class: usize) -> f64 {
        let max = self.max_doppler_fraction * self.sample_rate;
        let sign = if class % 2 == 0 { 1.0 } else { -1.0 };
        sign * max * (class + 1) as f64 / self.classes as f64
    }

    fn channel(&self, paths: Vec<PathSpec>) -> ChannelSpec {
        ChannelSpec {
            paths,
            carrier_freq: self.carrier_freq,
            noise_std: self.noise_std,
            sample_rate: self.sample_rate,
            duration: self.duration,
            freq_grid: (0..self.subcarriers).map(|k| k as f64 * self.subcarrier_spacing).collect(),
            delay_resolution: 1e-9,
            num_taps: 1,
        }
    }
}

fn random_static<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<PathSpec> {
    (0..count)
        .map(|_| PathSpec {
            gain: rng.random_range(0.5..1.0),
            delay: rng.random_range(5e-9..100e-9),
            delay_velocity: 0.0,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect()
}

fn sample<R: Rng + ?Sized>(spec: &MultipathSpec, class: usize, rng: &mut R) -> Result<ComplexArray> {
    let doppler = spec.class_doppler(class) * rng.random_range(0.95..1.05);
    let mut paths1 = random_static(rng, 2);
    paths1.push(PathSpec {
        gain: rng.random_range(0.3..0.6),
        delay: rng.random_range(20e-9..80e-9),
        // f_D = -f_c * dtau/dt
        delay_velocity: -doppler / spec.carrier_freq,
        phase: rng.random_range(0.0..std::f64::consts::TAU),
    });
    let paths2 = random_static(rng, 2);
    let h1 = cfr_series(&spec.channel(paths1), rng)?;
    let h2 = cfr_series(&spec.channel(paths2), rng)?;

    let (t, f) = h1.shape();
    let mut theta = 0.0;
    let offsets: Vec<C64> = (0..t)
        .map(|_| {
            theta += spec.phase_jitter * rng.random_range(-1.0..1.0);
            C64::from_polar(1.0, theta)
        })
        .collect();
    let rotate = |h: &CMatrix| CMatrix::from_fn(t, f, |i, j| h[(i, j)] * offsets[i]);
    let x = csi_conjugate_mult(rotate(&h1).as_slice(), rotate(&h2).as_slice())?;
    let x = CMatrix::from_vec(t, f, x)?;

    match spec.representation {
        Representation::Raw => Ok(ComplexArray::from_matrix(&x)),
        Representation::Dfs => {
            let frames = frame_count(t, spec.window_len, spec.hop);
            let bins = spec.window_len;
            let mut data = vec![C64::new(0.0, 0.0); frames * bins * f];
            for j in 0..f {
                let series: Vec<C64> = (0..t).map(|i| x[(i, j)]).collect();
                let s = stft_dfs(&series, spec.window_len, spec.hop, spec.window)?;
                for fr in 0..frames {
                    for b in 0..bins {
                        data[(fr * bins + b) * f + j] = s[(fr, b)];
                    }
                }
            }
            ComplexArray::new(vec![frames, bins, f], data)
        }
    }
}

pub fn gen_multipath_dataset(spec: &MultipathSpec) -> Result<Dataset> {
    spec.validate()?;
    let total = spec.classes * spec.samples_per_class;
    let samples = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64 + 1);
            sample(spec, i / spec.samples_per_class, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..total).map(|i| (i / spec.samples_per_class) as i32).collect();
    Dataset::new(samples, labels)
}
