//! Stratified disparity rendering.
//!
//! The reference disparity range is cut into `L` equal intervals. Each
//! interval's pixels are splatted to the target view on their own, then the
//! per-layer results are fused nearest-first so that a nearer surface always
//! replaces a further one. Layer `1` is the nearest (highest disparity)
//! interval and layer `L` the furthest.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{ensure_dims, DisparityMap, Grid, Image, LabelMap, Mask};
use crate::warp::{forward_splat, WarpResult};

pub const DEFAULT_LAYERS: usize = 16;

/// Interval rule shared by [`stratify`] and [`quantize_labels`].
///
/// Returns `clamp(L - floor((d - lo) / width), 1, L)`, or `1` when the range
/// is degenerate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerBins {
    pub layer_count: usize,
    pub d_min: f64,
    pub d_max: f64,
}

impl LayerBins {
    pub fn new(layer_count: usize, d_min: f64, d_max: f64) -> Result<Self> {
        if layer_count < 1 {
            return Err(Error::InvalidLayerCount(layer_count));
        }
        Ok(Self {
            layer_count,
            d_min,
            d_max,
        })
    }

    pub fn interval(&self) -> f64 {
        (self.d_max - self.d_min) / self.layer_count as f64
    }

    pub fn layer_of(&self, d: f64) -> usize {
        let width = self.interval();
        if width <= 0.0 {
            return 1;
        }
        let l = self.layer_count as f64 - ((d - self.d_min) / width).floor();
        l.clamp(1.0, self.layer_count as f64) as usize
    }
}

#[derive(Clone, Debug)]
pub struct Stratification {
    pub bins: LayerBins,
    /// Per-pixel layer in `1..=L`.
    pub layer_index: Grid<u16>,
    /// `S^l`: the disparity where the pixel belongs to layer `l`, else 0.
    pub layered_disparity: Vec<DisparityMap>,
    /// `Omega^l`.
    pub layer_masks: Vec<Mask>,
}

impl Stratification {
    pub fn layer_count(&self) -> usize {
        self.bins.layer_count
    }

    pub fn layer_mask(&self, l: usize) -> &Mask {
        &self.layer_masks[l - 1]
    }

    pub fn layered_disparity(&self, l: usize) -> &DisparityMap {
        &self.layered_disparity[l - 1]
    }
}

pub fn stratify(disparity: &DisparityMap, layer_count: usize) -> Result<Stratification> {
    if layer_count < 1 {
        return Err(Error::InvalidLayerCount(layer_count));
    }
    disparity.ensure_finite()?;
    let (w, h) = disparity.dims();
    let (d_min, d_max) = disparity.masked_range(None).unwrap_or((0.0, 0.0));
    let bins = LayerBins::new(layer_count, d_min, d_max)?;

    let layer_index = Grid::from_fn(w, h, |x, y| bins.layer_of(disparity.get(x, y)) as u16);
    let mut layered_disparity = vec![DisparityMap::filled(w, h, 0.0); layer_count];
    let mut layer_masks = vec![Mask::filled(w, h, false); layer_count];
    for y in 0..h {
        for x in 0..w {
            let l = layer_index.get(x, y) as usize - 1;
            layered_disparity[l].set(x, y, disparity.get(x, y));
            layer_masks[l].set(x, y, true);
        }
    }
    Ok(Stratification {
        bins,
        layer_index,
        layered_disparity,
        layer_masks,
    })
}

/// Splats only the pixels of layer `l` using that layer's disparity.
pub fn warp_layer(image: &Image, strat: &Stratification, l: usize, shift: f64) -> Result<WarpResult> {
    if l < 1 || l > strat.layer_count() {
        return Err(Error::LayerOutOfRange {
            layer: l,
            layer_count: strat.layer_count(),
        });
    }
    let mask = strat.layer_mask(l);
    if mask.count_set() == 0 {
        return Ok(WarpResult::empty(image.width(), image.height(), image.channels()));
    }
    forward_splat(image, strat.layered_disparity(l), shift, mask)
}

/// One-hot per-pixel layer selection `R(x, y, l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionMask {
    layer_count: usize,
    /// Selected layer per pixel, 0 where nothing contributed.
    selected: Grid<u16>,
}

impl FusionMask {
    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    /// `R(x, y, l)` for `l` in `1..=L`.
    pub fn get(&self, x: usize, y: usize, l: usize) -> bool {
        self.selected.get(x, y) as usize == l
    }

    pub fn selected(&self) -> &Grid<u16> {
        &self.selected
    }

    /// `sum_l R(x, y, l)`.
    pub fn sum_at(&self, x: usize, y: usize) -> usize {
        (1..=self.layer_count).filter(|&l| self.get(x, y, l)).count()
    }
}

/// Nearest-wins composition of per-layer warps; `layers[0]` is layer 1.
pub fn fuse(layers: &[WarpResult]) -> Result<(Image, Mask, FusionMask)> {
    let first = layers.first().ok_or(Error::EmptyInput)?;
    let (w, h, c) = (first.image.width(), first.image.height(), first.image.channels());
    for layer in layers {
        ensure_dims((w, h), layer.image.dims())?;
        ensure_dims((w, h), layer.mask.dims())?;
        if layer.image.channels() != c {
            return Err(Error::InvalidArgument("layer channel counts differ".into()));
        }
    }
    let mut image = Image::zeros(w, h, c);
    let mut mask = Mask::filled(w, h, false);
    let mut selected = Grid::filled(w, h, 0u16);
    for y in 0..h {
        for x in 0..w {
            if let Some(l) = layers.iter().position(|r| r.mask.get(x, y)) {
                image.pixel_mut(x, y).copy_from_slice(layers[l].image.pixel(x, y));
                mask.set(x, y, true);
                selected.set(x, y, (l + 1) as u16);
            }
        }
    }
    Ok((
        image,
        mask,
        FusionMask {
            layer_count: layers.len(),
            selected,
        },
    ))
}

/// The full operator: stratify, warp every layer, fuse.
pub fn sdr_render(
    image: &Image,
    disparity: &DisparityMap,
    shift: f64,
    layer_count: usize,
) -> Result<(Image, Mask)> {
    ensure_dims(image.dims(), disparity.dims())?;
    let strat = stratify(disparity, layer_count)?;
    let layers = (1..=layer_count)
        .into_par_iter()
        .map(|l| warp_layer(image, &strat, l, shift))
        .collect::<Result<Vec<_>>>()?;
    let (image, mask, _) = fuse(&layers)?;
    Ok((image, mask))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AverageMode {
    /// Plain sum over all predictions divided by their count; gaps count as 0.
    Uniform,
    /// Per-pixel mean over the predictions that reached the pixel.
    #[default]
    Masked,
}

/// Combines the per-reference predictions of one target view.
pub fn average_predictions(predictions: &[(Image, Mask)], mode: AverageMode) -> Result<(Image, Mask)> {
    let (first, _) = predictions.first().ok_or(Error::EmptyInput)?;
    let (w, h, c) = (first.width(), first.height(), first.channels());
    for (img, m) in predictions {
        first.ensure_same_shape(img)?;
        ensure_dims((w, h), m.dims())?;
    }
    let n = predictions.len() as f64;
    let mut out = Image::zeros(w, h, c);
    let mut mask = Mask::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let mut hits = 0usize;
            let px = out.pixel_mut(x, y);
            let reached = predictions.iter().filter(|(_, m)| m.get(x, y));
            match mode {
                AverageMode::Uniform => {
                    for (img, _) in reached {
                        hits += 1;
                        for (o, v) in px.iter_mut().zip(img.pixel(x, y)) {
                            *o += v;
                        }
                    }
                    px.iter_mut().for_each(|v| *v /= n);
                }
                AverageMode::Masked => {
                    // offsets from the first hit, so agreeing references
                    // reproduce their value exactly
                    let mut anchor: &[f64] = &[];
                    for (img, _) in reached {
                        let p = img.pixel(x, y);
                        if hits == 0 {
                            anchor = p;
                        }
                        hits += 1;
                        for ((o, v), a) in px.iter_mut().zip(p).zip(anchor) {
                            *o += v - a;
                        }
                    }
                    for (o, a) in px.iter_mut().zip(anchor) {
                        *o = a + *o / hits as f64;
                    }
                }
            }
            if hits > 0 {
                mask.set(x, y, true);
            }
        }
    }
    Ok((out, mask))
}

/// Renders the target-view disparity by pushing `D0` through the same
/// operator with itself as payload.
pub fn render_target_disparity(
    disparity: &DisparityMap,
    t: f64,
    layer_count: usize,
) -> Result<(DisparityMap, Mask)> {
    let payload = Image::from_grid(disparity);
    let (img, mask) = sdr_render(&payload, disparity, t, layer_count)?;
    Ok((img.to_grid(), mask))
}

/// Quantizes the valid pixels of `W` into `L` labels over their own range;
/// invalid pixels get label 0.
pub fn quantize_labels(target: &DisparityMap, mask: &Mask, layer_count: usize) -> Result<LabelMap> {
    ensure_dims(target.dims(), mask.dims())?;
    let (w, h) = target.dims();
    let labels = match target.masked_range(Some(mask)) {
        None => Grid::filled(w, h, 0u16),
        Some((lo, hi)) => {
            let bins = LayerBins::new(layer_count, lo, hi)?;
            Grid::from_fn(w, h, |x, y| {
                if mask.get(x, y) {
                    bins.layer_of(target.get(x, y)) as u16
                } else {
                    0
                }
            })
        }
    };
    LabelMap::new(labels, layer_count)
}
