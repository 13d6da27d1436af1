//! Conditioning features for a learned corrector, patch extraction, and the
//! `LFT1` tensor file format.
//!
//! Channel layout of a [`FeatureTensor`] (channel-last):
//!
//! | channels | content                                       |
//! |----------|-----------------------------------------------|
//! | 0..3     | fine superpixel render minus averaged render  |
//! | 3..6     | coarse superpixel render minus averaged render|
//! | 6        | filled label map mapped to `[1/L - 0.5, 0.5]` |
//!
//! `LFT1` layout: magic `LFT1`, `u32` LE rank, rank x `u32` LE dims, then
//! `f32` LE payload in row-major order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_dims, Image, LabelMap, Mask};

pub const FEATURE_CHANNELS: usize = 7;
pub const DEFAULT_PATCH: usize = 128;
pub const DEFAULT_STRIDE: usize = 64;

const MAGIC: &[u8; 4] = b"LFT1";
const MAX_RANK: usize = 8;

/// A dense `f32` tensor as stored in `LFT1` files.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::InvalidArgument(format!(
                "tensor dims {dims:?} hold {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_image(image: &Image) -> Self {
        Self {
            dims: vec![image.height(), image.width(), image.channels()],
            data: image.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_mask(mask: &Mask) -> Self {
        Self {
            dims: vec![mask.height(), mask.width(), 1],
            data: mask.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValues(i));
        }
        if self.dims.is_empty() || self.dims.len() > MAX_RANK {
            return Err(Error::UnsupportedFormat(format!("tensor rank {}", self.dims.len())));
        }
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::UnsupportedFormat(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |pos: usize| -> Result<u32> {
            bytes
                .get(pos..pos + 4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
                .ok_or_else(|| Error::CorruptHeader("truncated header".into()))
        };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::CorruptHeader("bad magic".into()));
        }
        let rank = word(4)? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::UnsupportedFormat(format!("tensor rank {rank}")));
        }
        let dims = (0..rank)
            .map(|k| word(8 + 4 * k).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let start = 8 + 4 * rank;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::CorruptHeader("dimension product overflows".into()))?;
        let payload = &bytes[start..];
        if payload.len() != count * 4 {
            return Err(Error::CorruptHeader(format!(
                "dims {dims:?} need {} payload bytes, found {}",
                count * 4,
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { dims, data })
    }
}

pub fn write_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let bytes = tensor.to_bytes()?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Tensor::from_bytes(&fs::read(path)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    width: usize,
    height: usize,
    data: Vec<f64>,
    /// Pixels that are gaps in every rendering; the completion targets.
    pub gap_mask: Mask,
    /// The averaged render, added back to a predicted residual.
    pub base: Image,
}

impl FeatureTensor {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * FEATURE_CHANNELS + c]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor {
            dims: vec![self.height, self.width, FEATURE_CHANNELS],
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    fn crop(&self, x0: usize, y0: usize, size: usize) -> Self {
        let mut data = Vec::with_capacity(size * size * FEATURE_CHANNELS);
        for y in y0..y0 + size {
            let start = (y * self.width + x0) * FEATURE_CHANNELS;
            data.extend_from_slice(&self.data[start..start + size * FEATURE_CHANNELS]);
        }
        Self {
            width: size,
            height: size,
            data,
            gap_mask: Mask::from_fn(size, size, |x, y| self.gap_mask.get(x0 + x, y0 + y)),
            base: crop_image(&self.base, x0, y0, size),
        }
    }
}

pub fn crop_image(image: &Image, x0: usize, y0: usize, size: usize) -> Image {
    Image::from_fn(size, size, image.channels(), |x, y, c| image.get(x0 + x, y0 + y, c))
}

/// Builds the 7-channel conditioning stack from the averaged render, the two
/// superpixel renders and the filled label map. Gap pixels enter the
/// differences as 0.
pub fn assemble(
    averaged: (&Image, &Mask),
    fine: (&Image, &Mask),
    coarse: (&Image, &Mask),
    filled_labels: &LabelMap,
) -> Result<FeatureTensor> {
    let dims = averaged.0.dims();
    for (img, m) in [averaged, fine, coarse] {
        ensure_dims(dims, img.dims())?;
        ensure_dims(dims, m.dims())?;
    }
    ensure_dims(dims, filled_labels.dims())?;
    if filled_labels.ambiguous_count() > 0 {
        return Err(Error::UnfilledLabels);
    }
    let l = filled_labels.layer_count() as f64;
    let (w, h) = dims;
    let rgb = |(img, m): (&Image, &Mask)| img.to_rgb().masked(m);
    let (vd, v1, v2) = (rgb(averaged), rgb(fine), rgb(coarse));

    let mut data = Vec::with_capacity(w * h * FEATURE_CHANNELS);
    for y in 0..h {
        for x in 0..w {
            let base = vd.pixel(x, y);
            data.extend(v1.pixel(x, y).iter().zip(base).map(|(a, b)| a - b));
            data.extend(v2.pixel(x, y).iter().zip(base).map(|(a, b)| a - b));
            data.push(filled_labels.get(x, y) as f64 / l - 0.5);
        }
    }
    let gap_mask = Mask::from_fn(w, h, |x, y| {
        !averaged.1.get(x, y) && !fine.1.get(x, y) && !coarse.1.get(x, y)
    });
    Ok(FeatureTensor {
        width: w,
        height: h,
        data,
        gap_mask,
        base: vd,
    })
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub x: usize,
    pub y: usize,
    pub features: FeatureTensor,
    pub ground_truth: Image,
    pub base: Image,
}

/// Square crops on a `stride` grid starting at the origin.
pub fn extract_patches(tensor: &FeatureTensor, ground_truth: &Image, size: usize, stride: usize) -> Result<Vec<Patch>> {
    ensure_dims((tensor.width, tensor.height), ground_truth.dims())?;
    if size == 0 || stride == 0 {
        return Err(Error::InvalidArgument("patch size and stride must be positive".into()));
    }
    if size > tensor.width.min(tensor.height) {
        return Err(Error::PatchTooLarge {
            size,
            width: tensor.width,
            height: tensor.height,
        });
    }
    let mut patches = Vec::new();
    for y in (0..=tensor.height - size).step_by(stride) {
        for x in (0..=tensor.width - size).step_by(stride) {
            let features = tensor.crop(x, y, size);
            patches.push(Patch {
                x,
                y,
                base: features.base.clone(),
                ground_truth: crop_image(ground_truth, x, y, size),
                features,
            });
        }
    }
    Ok(patches)
}

/// One training/evaluation sample as listed in `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub tensor: String,
    pub ground_truth: Option<String>,
    pub vd: String,
    pub scene: String,
    pub t: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[usize; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}
