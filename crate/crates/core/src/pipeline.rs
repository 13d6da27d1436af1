//! End-to-end target-view rendering from a loaded dataset.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{assemble, FeatureTensor};
use crate::io::Dataset;
use crate::labelfill::{dilate_fill, surface_fill_rgb, DilationOutcome, DEFAULT_WINDOW};
use crate::raster::{DisparityMap, Image, LabelMap, Mask};
use crate::sdr::{average_predictions, quantize_labels, render_target_disparity, sdr_render, AverageMode, DEFAULT_LAYERS};
use crate::superpixel::{segment, sp_disparity, sp_render, SpDisparityParams, DEFAULT_SP_SIZES};
use crate::warp::backward_warp;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderConfig {
    pub layers: usize,
    /// Exactly two superpixel target sizes, fine then coarse.
    pub sp_sizes: [usize; 2],
    pub avg_mode: AverageMode,
    pub window: usize,
    pub conf_threshold: f64,
    /// Dilation iteration cap; `None` means `W + H`.
    pub max_iters: Option<usize>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            layers: DEFAULT_LAYERS,
            sp_sizes: DEFAULT_SP_SIZES,
            avg_mode: AverageMode::Masked,
            window: DEFAULT_WINDOW,
            conf_threshold: SpDisparityParams::default().conf_threshold,
            max_iters: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuperpixelRender {
    pub target_size: usize,
    pub segments: usize,
    pub disparity: DisparityMap,
    pub image: Image,
    pub mask: Mask,
}

#[derive(Clone, Debug)]
pub struct RenderOutputs {
    pub t: f64,
    /// Multi-reference average in the configured mode.
    pub vd: Image,
    pub vd_mask: Mask,
    pub superpixel: [SuperpixelRender; 2],
    pub target_disparity: DisparityMap,
    pub target_mask: Mask,
    pub labels: LabelMap,
    pub filled: DilationOutcome,
    /// Label-guided fill of the mask-aware average.
    pub completed: Image,
    pub features: FeatureTensor,
}

/// Predictions of target `t` from every reference view.
pub fn reference_predictions(dataset: &Dataset, t: f64, layers: usize) -> Result<Vec<(Image, Mask)>> {
    dataset
        .lightfield
        .views()
        .par_iter()
        .zip(dataset.disparities.par_iter())
        .map(|((v, img), d)| sdr_render(img, d, t - *v as f64, layers))
        .collect()
}

/// Naive single-reference comparison: the centre view gathered through its
/// own disparity.
pub fn baseline_render(dataset: &Dataset, t: f64) -> Result<(Image, Mask)> {
    let r = backward_warp(dataset.lightfield.center(), dataset.center_disparity(), -t)?;
    Ok((r.image, r.mask))
}

pub fn render_target(dataset: &Dataset, t: f64, cfg: &RenderConfig) -> Result<RenderOutputs> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("target position {t} is not finite")));
    }
    let preds = reference_predictions(dataset, t, cfg.layers)?;
    let (masked_vd, masked_mask) = average_predictions(&preds, AverageMode::Masked)?;
    let (vd, vd_mask) = match cfg.avg_mode {
        AverageMode::Masked => (masked_vd.clone(), masked_mask.clone()),
        mode => average_predictions(&preds, mode)?,
    };

    let d0 = dataset.center_disparity();
    let (target_disparity, target_mask) = render_target_disparity(d0, t, cfg.layers)?;
    let labels = quantize_labels(&target_disparity, &target_mask, cfg.layers)?;
    let max_iters = cfg.max_iters.unwrap_or(labels.width() + labels.height());
    let filled = dilate_fill(&labels, cfg.window, max_iters)?;
    if !filled.converged {
        return Err(Error::UnfilledLabels);
    }

    let center = dataset.lightfield.center();
    let params = SpDisparityParams {
        conf_threshold: cfg.conf_threshold,
        layer_count: cfg.layers,
    };
    let sp = cfg
        .sp_sizes
        .par_iter()
        .map(|&size| {
            let seg = segment(center, size)?;
            let disparity = sp_disparity(d0, dataset.center_confidence(), &seg, &params)?;
            let (image, mask) = sp_render(center, &disparity, t, cfg.layers)?;
            Ok(SuperpixelRender {
                target_size: size,
                segments: seg.count(),
                disparity,
                image,
                mask,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let superpixel: [SuperpixelRender; 2] = sp.try_into().expect("two sizes");

    let completed = surface_fill_rgb(&masked_vd, &masked_mask, &filled.labels)?;
    let features = assemble(
        (&vd, &vd_mask),
        (&superpixel[0].image, &superpixel[0].mask),
        (&superpixel[1].image, &superpixel[1].mask),
        &filled.labels,
    )?;
    Ok(RenderOutputs {
        t,
        vd,
        vd_mask,
        superpixel,
        target_disparity,
        target_mask,
        labels,
        filled,
        completed,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_lightfield, Plane, Region, SceneSpec, Texture};

    fn two_plane() -> SceneSpec {
        SceneSpec {
            name: Some("two".into()),
            width: 48,
            height: 40,
            planes: vec![
                Plane {
                    disparity: 0.0,
                    region: Region::Full,
                    texture: Texture::Noise { seed: 3, scale: 5.0 },
                },
                Plane {
                    disparity: 1.0,
                    region: Region::Rect { x: 16, y: 12, width: 12, height: 14 },
                    texture: Texture::Constant { color: [0.9, 0.3, 0.2] },
                },
            ],
        }
    }

    #[test]
    fn t_zero_reproduces_center() {
        let ds = generate_lightfield(&two_plane(), 2).unwrap();
        let out = render_target(&ds, 0.0, &RenderConfig::default()).unwrap();
        let center = ds.lightfield.center();
        for (a, b) in out.completed.data().iter().zip(center.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(out.labels.ambiguous_count(), 0);
    }

    #[test]
    fn ambiguity_grows_with_baseline() {
        let ds = generate_lightfield(&two_plane(), 2).unwrap();
        let cfg = RenderConfig::default();
        let near = render_target(&ds, 6.0, &cfg).unwrap();
        let far = render_target(&ds, 12.0, &cfg).unwrap();
        assert!(far.labels.ambiguous_count() >= near.labels.ambiguous_count());
        assert!(near.labels.ambiguous_count() > 0);
        assert_eq!(near.features.to_tensor().dims, vec![40, 48, 7]);
    }

    #[test]
    fn uniform_mode_changes_only_vd() {
        let ds = generate_lightfield(&two_plane(), 2).unwrap();
        let masked = render_target(&ds, 8.0, &RenderConfig::default()).unwrap();
        let cfg = RenderConfig {
            avg_mode: AverageMode::Uniform,
            ..RenderConfig::default()
        };
        let uniform = render_target(&ds, 8.0, &cfg).unwrap();
        assert_eq!(masked.completed, uniform.completed);
        assert_eq!(masked.vd_mask, uniform.vd_mask);
        assert!(masked.vd != uniform.vd);
    }
}
