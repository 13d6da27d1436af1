//! Core raster types: images, per-pixel maps, masks, label maps and the
//! horizontal light field.
//!
//! Every raster is row-major. Images are channel-interleaved. Values are kept
//! in `f64` regardless of the bit depth they were loaded from.

use crate::error::{Error, Result};

/// A dense `width x height` grid of per-pixel values.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Per-pixel validity; `true` means the pixel carries known content.
pub type Mask = Grid<bool>;

/// Signed horizontal disparity in pixels per unit angular step.
///
/// Content at `x` in view `v` appears at `x + (t - v) * d` in view `t`.
pub type DisparityMap = Grid<f64>;

/// Per-pixel disparity confidence in `[0, 1]`.
pub type ConfidenceMap = Grid<f64>;

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        ensure_dims(dims, self.dims())
    }
}

impl Grid<f64> {
    /// Returns `NonFiniteValues` with the first offending index.
    pub fn ensure_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFiniteValues(i)),
            None => Ok(()),
        }
    }

    /// Minimum and maximum over pixels where `mask` is set, if any.
    pub fn masked_range(&self, mask: Option<&Mask>) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for (i, &v) in self.data.iter().enumerate() {
            if mask.is_some_and(|m| !m.data[i]) {
                continue;
            }
            range = Some(match range {
                None => (v, v),
                Some((lo, hi)) => (lo.min(v), hi.max(v)),
            });
        }
        range
    }
}

impl Grid<bool> {
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

pub(crate) fn ensure_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// An `H x W x C` raster with `C` in `{1, 3}`.
///
/// Loaders clamp to `[0, 1]`. Values produced inside the pipeline may leave
/// that range slightly (negative bicubic lobes) and are only clamped on export.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedFormat(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "image data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValues(i));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::zeros(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        img
    }

    /// Wraps a scalar map as a single-channel image, e.g. to push a
    /// disparity map through the same rendering path as colour.
    pub fn from_grid(grid: &Grid<f64>) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            channels: 1,
            data: grid.data().to_vec(),
        }
    }

    /// Inverse of [`Image::from_grid`]; uses channel 0.
    pub fn to_grid(&self) -> Grid<f64> {
        Grid::from_fn(self.width, self.height, |x, y| self.get(x, y, 0))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[f64] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    pub fn clamped(&self) -> Self {
        Self {
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }

    /// Channel mean; identity for single-channel images.
    pub fn to_gray(&self) -> Grid<f64> {
        let c = self.channels as f64;
        Grid::from_fn(self.width, self.height, |x, y| {
            self.pixel(x, y).iter().sum::<f64>() / c
        })
    }

    /// Replicates a single-channel image to three channels.
    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        Self::from_fn(self.width, self.height, 3, |x, y, _| self.get(x, y, 0))
    }

    /// Zeroes every pixel where `mask` is unset.
    pub fn masked(&self, mask: &Mask) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                if !mask.get(x, y) {
                    out.pixel_mut(x, y).fill(0.0);
                }
            }
        }
        out
    }

    pub fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        ensure_dims(self.dims(), other.dims())?;
        if self.channels != other.channels {
            return Err(Error::InvalidArgument(format!(
                "channel mismatch: {} vs {}",
                self.channels, other.channels
            )));
        }
        Ok(())
    }
}

/// Quantized disparity labels. `0` marks an ambiguous pixel; `1` is the
/// nearest layer and `layer_count` the furthest.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    labels: Grid<u16>,
    layer_count: usize,
}

impl LabelMap {
    pub fn new(labels: Grid<u16>, layer_count: usize) -> Result<Self> {
        if layer_count < 1 {
            return Err(Error::InvalidLayerCount(layer_count));
        }
        if let Some(&bad) = labels.data().iter().find(|&&l| l as usize > layer_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} exceeds layer count {layer_count}"
            )));
        }
        Ok(Self {
            labels,
            layer_count,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn labels(&self) -> &Grid<u16> {
        &self.labels
    }

    pub fn into_labels(self) -> Grid<u16> {
        self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels.get(x, y)
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn ambiguous_count(&self) -> usize {
        self.labels.data().iter().filter(|&&l| l == 0).count()
    }
}

/// A horizontal array of `2M + 1` sub-aperture views indexed `-M..=M`.
#[derive(Clone, Debug)]
pub struct LightField {
    radius: usize,
    views: Vec<(i32, Image)>,
}

impl LightField {
    /// Views may arrive in any order; they are stored sorted by index.
    pub fn new(radius: usize, mut views: Vec<(i32, Image)>) -> Result<Self> {
        views.sort_by_key(|(v, _)| *v);
        let r = radius as i32;
        for v in -r..=r {
            if views.binary_search_by_key(&v, |(i, _)| *i).is_err() {
                return Err(Error::MissingView(v));
            }
        }
        if views.len() != 2 * radius + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected exactly {} views with indices -{radius}..={radius}, got {}",
                2 * radius + 1,
                views.len()
            )));
        }
        let dims = views[0].1.dims();
        for (_, img) in &views[1..] {
            ensure_dims(dims, img.dims())?;
        }
        Ok(Self { radius, views })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn views(&self) -> &[(i32, Image)] {
        &self.views
    }

    pub fn view(&self, index: i32) -> Option<&Image> {
        self.views
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|k| &self.views[k].1)
    }

    pub fn center(&self) -> &Image {
        self.view(0).expect("light field always holds view 0")
    }

    pub fn dims(&self) -> (usize, usize) {
        self.views[0].1.dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize) -> Image {
        Image::zeros(w, h, 3)
    }

    #[test]
    fn lightfield_rejects_wrong_index_set() {
        let views = vec![(-1, img(4, 4)), (1, img(4, 4)), (2, img(4, 4))];
        assert!(matches!(
            LightField::new(1, views),
            Err(Error::MissingView(0))
        ));
        let views = vec![(-1, img(4, 4)), (0, img(4, 4)), (1, img(4, 4)), (2, img(4, 4))];
        assert!(LightField::new(1, views).is_err());
    }

    #[test]
    fn lightfield_sorts_and_checks_dims() {
        let views = vec![(1, img(4, 4)), (-1, img(4, 4)), (0, img(4, 4))];
        let lf = LightField::new(1, views).unwrap();
        let order: Vec<i32> = lf.views().iter().map(|(v, _)| *v).collect();
        assert_eq!(order, vec![-1, 0, 1]);

        let views = vec![(-1, img(4, 4)), (0, img(2, 2)), (1, img(4, 4))];
        assert!(matches!(
            LightField::new(1, views),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn image_rejects_bad_shapes() {
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(matches!(
            Image::new(1, 1, 1, vec![f64::NAN]),
            Err(Error::NonFiniteValues(0))
        ));
    }

    #[test]
    fn label_map_bounds() {
        let g = Grid::new(2, 1, vec![0u16, 3]).unwrap();
        assert!(LabelMap::new(g.clone(), 2).is_err());
        let lm = LabelMap::new(g, 3).unwrap();
        assert_eq!(lm.ambiguous_count(), 1);
    }

    #[test]
    fn masked_range_skips_unset() {
        let g = Grid::new(3, 1, vec![5.0, -1.0, 2.0]).unwrap();
        let m = Grid::new(3, 1, vec![true, false, true]).unwrap();
        assert_eq!(g.masked_range(Some(&m)), Some((2.0, 5.0)));
        assert_eq!(g.masked_range(None), Some((-1.0, 5.0)));
        let none = Grid::filled(3, 1, false);
        assert_eq!(g.masked_range(Some(&none)), None);
    }
}
