//! File I/O: PNG images, masks and label maps, PFM disparity and confidence
//! maps, and the `view_{v}.png` / `disp_{v}.pfm` / `conf_{v}.pfm` dataset
//! directory layout.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};
use crate::raster::{ensure_dims, ConfidenceMap, DisparityMap, Grid, Image, LabelMap, LightField, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

fn check_exists(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(())
}

fn decode_png(path: &Path) -> Result<DynamicImage> {
    check_exists(path)?;
    let reader = ImageReader::open(path)?
        .with_guessed_format()
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(Error::UnsupportedFormat(format!(
            "{}: not a PNG file",
            path.display()
        )));
    }
    reader
        .decode()
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))
}

/// Loads an 8- or 16-bit grayscale or RGB PNG, scaling intensities to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = decode_png(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => {
            (1, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb16(b) => {
            (3, b.into_raw().iter().map(|&v| v as f64 / 65535.0).collect())
        }
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: pixel layout {:?} (expected gray or RGB)",
                path.display(),
                other.color()
            )))
        }
    };
    Image::new(w, h, channels, data)
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Writes an image as PNG, clamping to `[0, 1]` and rounding to the nearest
/// code value.
pub fn save_image(image: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let dynimg = match (image.channels(), depth) {
        (1, BitDepth::Eight) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, to_u8(image.data())).expect("sized"),
        ),
        (3, BitDepth::Eight) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, to_u8(image.data())).expect("sized"),
        ),
        (1, BitDepth::Sixteen) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, to_u16(image.data())).expect("sized"),
        ),
        (_, BitDepth::Sixteen) => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, to_u16(image.data())).expect("sized"),
        ),
        _ => unreachable!("Image guarantees 1 or 3 channels"),
    };
    write_png(&dynimg, path.as_ref())
}

fn to_u8(data: &[f64]) -> Vec<u8> {
    data.iter().map(|&v| quantize(v, 255.0) as u8).collect()
}

fn to_u16(data: &[f64]) -> Vec<u16> {
    data.iter().map(|&v| quantize(v, 65535.0) as u16).collect()
}

fn write_png(img: &DynamicImage, path: &Path) -> Result<()> {
    img.save_with_format(path, ImageFormat::Png).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::UnsupportedFormat(other.to_string()),
    })
}

/// Masks are stored as 8-bit PNG, 255 for set pixels.
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let bytes = mask.data().iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(mask.width() as u32, mask.height() as u32, bytes)
        .expect("sized");
    write_png(&DynamicImage::ImageLuma8(buf), path.as_ref())
}

/// Any non-zero gray level counts as set.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = load_image(path)?;
    let gray = img.to_gray();
    Ok(gray.map(|v| v > 0.0))
}

/// Writes raw label values as 8-bit gray. Requires `layer_count <= 255`.
pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    save_labels_scaled(labels, path, 1)
}

/// Writes `label * floor(255 / L)` for viewing.
pub fn save_labels_visual(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let scale = 255 / labels.layer_count().max(1);
    save_labels_scaled(labels, path, scale)
}

fn save_labels_scaled(labels: &LabelMap, path: impl AsRef<Path>, scale: usize) -> Result<()> {
    if labels.layer_count() > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "{} layers do not fit 8-bit label storage",
            labels.layer_count()
        )));
    }
    let bytes = labels
        .labels()
        .data()
        .iter()
        .map(|&l| (l as usize * scale) as u8)
        .collect();
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(labels.width() as u32, labels.height() as u32, bytes)
        .expect("sized");
    write_png(&DynamicImage::ImageLuma8(buf), path.as_ref())
}

/// Reads raw 8-bit labels written by [`save_labels`].
pub fn load_labels(path: impl AsRef<Path>, layer_count: usize) -> Result<LabelMap> {
    let path = path.as_ref();
    match decode_png(path)? {
        DynamicImage::ImageLuma8(b) => {
            let (w, h) = (b.width() as usize, b.height() as usize);
            let grid = Grid::new(w, h, b.into_raw().into_iter().map(u16::from).collect())?;
            LabelMap::new(grid, layer_count)
        }
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: label maps must be 8-bit gray",
            path.display()
        ))),
    }
}

/// Superpixel ids as 16-bit gray PNG.
pub fn save_segment_ids(ids: &Grid<u32>, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<u16> = ids
        .data()
        .iter()
        .map(|&id| u16::try_from(id).map_err(|_| Error::UnsupportedFormat(format!("segment id {id} exceeds 16 bits"))))
        .collect::<Result<_>>()?;
    let buf = ImageBuffer::<Luma<u16>, _>::from_raw(ids.width() as u32, ids.height() as u32, data)
        .expect("sized");
    write_png(&DynamicImage::ImageLuma16(buf), path.as_ref())
}

/// Reads a single-channel PFM. Rows are stored bottom-to-top; a negative
/// scale means little-endian payload.
pub fn load_disparity(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let path = path.as_ref();
    check_exists(path)?;
    let bytes = fs::read(path)?;
    let map = parse_pfm(&bytes).map_err(|msg| Error::UnsupportedFormat(format!("{}: {msg}", path.display())))?;
    map.ensure_finite()?;
    Ok(map)
}

/// Loads a PFM confidence map and checks values lie in `[0, 1]`.
pub fn load_confidence(path: impl AsRef<Path>) -> Result<ConfidenceMap> {
    let map = load_disparity(path.as_ref())?;
    if let Some(v) = map.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::UnsupportedFormat(format!(
            "{}: confidence {v} outside [0, 1]",
            path.as_ref().display()
        )));
    }
    Ok(map)
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<DisparityMap, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    match token()?.as_str() {
        "Pf" => {}
        "PF" => return Err("three-channel PFM; expected single channel".into()),
        other => return Err(format!("bad magic {other:?}")),
    }
    let width: usize = token()?.parse().map_err(|_| "bad width")?;
    let height: usize = token()?.parse().map_err(|_| "bad height")?;
    let scale: f32 = token()?.parse().map_err(|_| "bad scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("scale must be finite and non-zero".into());
    }
    // exactly one whitespace byte separates header from payload
    pos += 1;
    let need = width * height * 4;
    if bytes.len() < pos + need {
        return Err(format!(
            "payload holds {} bytes, expected {need}",
            bytes.len().saturating_sub(pos)
        ));
    }
    let little = scale < 0.0;
    let payload = &bytes[pos..pos + need];
    let mut data = vec![0.0; width * height];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().expect("4-byte chunk");
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, col) = (i / width, i % width);
        data[(height - 1 - row) * width + col] = v as f64;
    }
    DisparityMap::new(width, height, data).map_err(|e| e.to_string())
}

/// Writes a little-endian single-channel PFM. Values are narrowed to `f32`.
pub fn write_disparity(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    map.ensure_finite()?;
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write!(out, "Pf\n{} {}\n-1.0\n", map.width(), map.height())?;
    for y in (0..map.height()).rev() {
        for &v in map.row(y) {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn view_path(dir: &Path, v: i32) -> PathBuf {
    dir.join(format!("view_{v}.png"))
}

pub fn disparity_path(dir: &Path, v: i32) -> PathBuf {
    dir.join(format!("disp_{v}.pfm"))
}

pub fn confidence_path(dir: &Path, v: i32) -> PathBuf {
    dir.join(format!("conf_{v}.pfm"))
}

/// Loads `view_{-M}.png ..= view_{M}.png` from `dir`.
pub fn load_lightfield(dir: impl AsRef<Path>, radius: usize) -> Result<LightField> {
    let dir = dir.as_ref();
    let r = radius as i32;
    let mut views = Vec::with_capacity(2 * radius + 1);
    for v in -r..=r {
        let path = view_path(dir, v);
        if !path.is_file() {
            return Err(Error::MissingView(v));
        }
        views.push((v, load_image(&path)?));
    }
    LightField::new(radius, views)
}

/// Largest `M` such that `view_{-M}.png ..= view_{M}.png` all exist, or
/// `None` if `view_0.png` is missing.
pub fn detect_radius(dir: impl AsRef<Path>) -> Option<usize> {
    let dir = dir.as_ref();
    if !view_path(dir, 0).is_file() {
        return None;
    }
    let mut m = 0usize;
    while view_path(dir, m as i32 + 1).is_file() && view_path(dir, -(m as i32) - 1).is_file() {
        m += 1;
    }
    Some(m)
}

/// A light field with per-view disparity and confidence, aligned by view.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub lightfield: LightField,
    pub disparities: Vec<DisparityMap>,
    pub confidences: Vec<ConfidenceMap>,
}

impl Dataset {
    pub fn new(
        lightfield: LightField,
        disparities: Vec<DisparityMap>,
        confidences: Vec<ConfidenceMap>,
    ) -> Result<Self> {
        let n = lightfield.views().len();
        if disparities.len() != n || confidences.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} disparity and confidence maps, got {} and {}",
                disparities.len(),
                confidences.len()
            )));
        }
        let dims = lightfield.dims();
        for m in disparities.iter().chain(&confidences) {
            ensure_dims(dims, m.dims())?;
        }
        Ok(Self {
            lightfield,
            disparities,
            confidences,
        })
    }

    /// Position of view `v` in the aligned vectors.
    pub fn slot(&self, v: i32) -> Option<usize> {
        self.lightfield.views().iter().position(|(i, _)| *i == v)
    }

    pub fn center_disparity(&self) -> &DisparityMap {
        &self.disparities[self.slot(0).expect("view 0 present")]
    }

    pub fn center_confidence(&self) -> &ConfidenceMap {
        &self.confidences[self.slot(0).expect("view 0 present")]
    }

    pub fn load(dir: impl AsRef<Path>, radius: usize) -> Result<Self> {
        let dir = dir.as_ref();
        let lightfield = load_lightfield(dir, radius)?;
        let mut disparities = Vec::new();
        let mut confidences = Vec::new();
        for (v, _) in lightfield.views() {
            disparities.push(load_disparity(disparity_path(dir, *v))?);
            confidences.push(load_confidence(confidence_path(dir, *v))?);
        }
        Self::new(lightfield, disparities, confidences)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (k, (v, img)) in self.lightfield.views().iter().enumerate() {
            save_image(img, view_path(dir, *v), BitDepth::Eight)?;
            write_disparity(&self.disparities[k], disparity_path(dir, *v))?;
            write_disparity(&self.confidences[k], confidence_path(dir, *v))?;
        }
        Ok(())
    }
}
