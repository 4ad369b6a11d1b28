use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// Row-major complex tensor of arbitrary rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexArray {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl ComplexArray {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() || shape.is_empty() {
            return Err(Error::shape(
                format!("{expected} entries for shape {shape:?}"),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![ZERO; n] }
    }

    /// A `rows x cols` array holding the entries of `m`.
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for a in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchMode {
    /// Sliding window along axis 0; remaining axes are flattened into each patch.
    TimeSeries { window: usize, stride: usize },
    /// Non-overlapping tiles over the leading axes; trailing axes are flattened into each patch.
    ImageLike { patch: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub mode: PatchMode,
    pub input_shape: Vec<usize>,
}

impl PatchSpec {
    pub fn time_series(input_shape: Vec<usize>, window: usize, stride: usize) -> Self {
        Self { mode: PatchMode::TimeSeries { window, stride }, input_shape }
    }

    pub fn image_like(input_shape: Vec<usize>, patch: Vec<usize>) -> Self {
        Self { mode: PatchMode::ImageLike { patch }, input_shape }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::InvalidSpec(format!("bad input shape {:?}", self.input_shape)));
        }
        match &self.mode {
            PatchMode::TimeSeries { window, stride } => {
                if *window == 0 || *stride == 0 {
                    return Err(Error::InvalidSpec("window and stride must be >= 1".into()));
                }
                if *window > self.input_shape[0] {
                    return Err(Error::InvalidSpec(format!(
                        "window {window} exceeds series length {}",
                        self.input_shape[0]
                    )));
                }
            }
            PatchMode::ImageLike { patch } => {
                if patch.is_empty() || patch.len() > self.input_shape.len() || patch.contains(&0) {
                    return Err(Error::InvalidSpec(format!(
                        "patch {patch:?} does not fit input shape {:?}",
                        self.input_shape
                    )));
                }
            }
        }
        Ok(())
    }

    fn channels(&self, leading: usize) -> usize {
        self.input_shape[leading..].iter().product()
    }

    /// Entries per flattened patch.
    pub fn patch_len(&self) -> usize {
        match &self.mode {
            PatchMode::TimeSeries { window, .. } => window * self.channels(1),
            PatchMode::ImageLike { patch } => patch.iter().product::<usize>() * self.channels(patch.len()),
        }
    }

    /// Patches per sample.
    pub fn num_patches(&self) -> usize {
        match &self.mode {
            PatchMode::TimeSeries { window, stride } => {
                let t = self.input_shape[0];
                (t.saturating_sub(*window)).div_ceil(*stride) + 1
            }
            PatchMode::ImageLike { patch } => patch
                .iter()
                .zip(&self.input_shape)
                .map(|(p, s)| s.div_ceil(*p))
                .product(),
        }
    }
}

/// Flattened patches as the columns of a `patch_len x num_patches` matrix.
pub fn patchify(x: &ComplexArray, spec: &PatchSpec) -> Result<CMatrix> {
    spec.validate()?;
    if x.shape() != spec.input_shape.as_slice() {
        return Err(Error::shape(format!("{:?}", spec.input_shape), format!("{:?}", x.shape())));
    }
    let (plen, count) = (spec.patch_len(), spec.num_patches());
    let mut out = CMatrix::zeros(plen, count);
    match &spec.mode {
        PatchMode::TimeSeries { window, stride } => {
            let t = spec.input_shape[0];
            let c = spec.channels(1);
            for n in 0..count {
                for w in 0..*window {
                    let row = n * stride + w;
                    if row >= t {
                        break;
                    }
                    for ch in 0..c {
                        out[(w * c + ch, n)] = x.data()[row * c + ch];
                    }
                }
            }
        }
        PatchMode::ImageLike { patch } => {
            let lead = patch.len();
            let strides = x.strides();
            let c = spec.channels(lead);
            let grid: Vec<usize> = patch
                .iter()
                .zip(&spec.input_shape)
                .map(|(p, s)| s.div_ceil(*p))
                .collect();
            let inner: usize = patch.iter().product();
            for n in 0..count {
                let tile = unravel(n, &grid);
                for q in 0..inner {
                    let offset = unravel(q, patch);
                    let mut flat = 0;
                    let mut inside = true;
                    for a in 0..lead {
                        let coord = tile[a] * patch[a] + offset[a];
                        if coord >= spec.input_shape[a] {
                            inside = false;
                            break;
                        }
                        flat += coord * strides[a];
                    }
                    if !inside {
                        continue;
                    }
                    for ch in 0..c {
                        out[(q * c + ch, n)] = x.data()[flat + ch];
                    }
                }
            }
        }
    }
    Ok(out)
}

fn unravel(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut coords = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        coords[a] = index % dims[a];
        index /= dims[a];
    }
    coords
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;

    fn seq(shape: Vec<usize>) -> ComplexArray {
        let n: usize = shape.iter().product();
        ComplexArray::new(shape, (0..n).map(|i| C64::new(i as f64, -(i as f64))).collect()).unwrap()
    }

    #[test]
    fn time_series_count() {
        let spec = PatchSpec::time_series(vec![10], 5, 5);
        assert_eq!(spec.num_patches(), 2);
        assert_eq!(patchify(&seq(vec![10]), &spec).unwrap().shape(), (5, 2));
        assert_eq!(PatchSpec::time_series(vec![10], 4, 3).num_patches(), 3);
        assert_eq!(PatchSpec::time_series(vec![11], 4, 3).num_patches(), 4);
    }

    #[test]
    fn image_count() {
        let spec = PatchSpec::image_like(vec![8, 8, 3], vec![4, 4]);
        assert_eq!(spec.num_patches(), 4);
        assert_eq!(spec.patch_len(), 48);
        let p = patchify(&seq(vec![8, 8, 3]), &spec).unwrap();
        assert_eq!(p.shape(), (48, 4));
        // second tile starts at column 4 of row 0
        assert_eq!(p[(0, 1)], C64::new(12.0, -12.0));
    }

    #[test]
    fn window_too_long() {
        let spec = PatchSpec::time_series(vec![4, 2], 5, 1);
        assert!(matches!(patchify(&seq(vec![4, 2]), &spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn shape_must_match() {
        let spec = PatchSpec::time_series(vec![4, 2], 2, 1);
        assert!(patchify(&seq(vec![4, 3]), &spec).is_err());
    }

    #[test]
    fn non_overlapping_windows_reassemble_padded_input() {
        let m = CMatrix::complex_gaussian(7, 3, 1.0, &mut seeded_rng(1));
        let x = ComplexArray::from_matrix(&m);
        let spec = PatchSpec::time_series(vec![7, 3], 3, 3);
        let p = patchify(&x, &spec).unwrap();
        let mut flat = Vec::new();
        for n in 0..p.cols() {
            flat.extend(p.column(n).into_vec());
        }
        let mut padded = m.into_vec();
        padded.resize(9 * 3, ZERO);
        assert_eq!(flat, padded);
    }

    #[test]
    fn tiles_reassemble_padded_image() {
        let m = CMatrix::complex_gaussian(5, 6, 1.0, &mut seeded_rng(2));
        let spec = PatchSpec::image_like(vec![5, 6], vec![2, 3]);
        let p = patchify(&ComplexArray::from_matrix(&m), &spec).unwrap();
        assert_eq!(p.shape(), (6, 6));
        let mut rebuilt = CMatrix::zeros(6, 6);
        for n in 0..6 {
            let (ti, tj) = (n / 2, n % 2);
            for q in 0..6 {
                rebuilt[(ti * 2 + q / 3, tj * 3 + q % 3)] = p[(q, n)];
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i < 5 { m[(i, j)] } else { ZERO };
                assert_eq!(rebuilt[(i, j)], expect);
            }
        }
    }
}
