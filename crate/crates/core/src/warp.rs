//! Horizontal sub-pixel resampling with the Keys cubic kernel (`a = -0.5`),
//! in gather ([`backward_warp`]) and scatter ([`forward_splat`]) form.
//!
//! Only `x` is resampled: the angular domain is a horizontal array of views,
//! so disparity displaces content along rows and rows never interact. Both
//! warps are therefore computed row by row in parallel with a fixed
//! per-row accumulation order, which keeps results bit-reproducible.

use rayon::prelude::*;

use crate::error::Result;
use crate::raster::{ensure_dims, DisparityMap, Grid, Image, Mask};

/// Accumulated splat weight at or below this counts as "not reached".
pub const WEIGHT_EPSILON: f64 = 1e-6;

const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn keys_kernel(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        ((KEYS_A + 2.0) * s - (KEYS_A + 3.0)) * s * s + 1.0
    } else if s < 2.0 {
        ((KEYS_A * s - 5.0 * KEYS_A) * s + 8.0 * KEYS_A) * s - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Tap weights for a sample at `x0 + frac`, for taps `x0-1, x0, x0+1, x0+2`.
pub fn bicubic_weights(frac: f64) -> [f64; 4] {
    if frac == 0.0 {
        return [0.0, 1.0, 0.0, 0.0];
    }
    [
        keys_kernel(-1.0 - frac),
        keys_kernel(-frac),
        keys_kernel(1.0 - frac),
        keys_kernel(2.0 - frac),
    ]
}

/// Splits a real abscissa into its floor and fractional part.
#[inline]
fn split(pos: f64) -> (i64, f64) {
    let base = pos.floor();
    (base as i64, pos - base)
}

#[derive(Clone, Debug)]
pub struct WarpResult {
    pub image: Image,
    /// `false` where the output carries no contribution; the image is 0 there.
    pub mask: Mask,
    /// Signed accumulated splat weight; `None` for gather warps.
    pub weight: Option<Grid<f64>>,
}

impl WarpResult {
    pub fn empty(width: usize, height: usize, channels: usize) -> Self {
        Self {
            image: Image::zeros(width, height, channels),
            mask: Mask::filled(width, height, false),
            weight: Some(Grid::filled(width, height, 0.0)),
        }
    }
}

/// Gathers `out(x, y) = I(x + shift * D(x, y), y)` with the cubic kernel.
///
/// A sample is invalid when any tap with non-zero weight falls outside the
/// row; on-grid samples therefore only need their own pixel.
pub fn backward_warp(image: &Image, disparity: &DisparityMap, shift: f64) -> Result<WarpResult> {
    ensure_dims(image.dims(), disparity.dims())?;
    let (w, h, c) = (image.width(), image.height(), image.channels());

    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let src = image.row(y);
            let mut values = vec![0.0; w * c];
            let mut valid = vec![false; w];
            for x in 0..w {
                let (x0, frac) = split(x as f64 + shift * disparity.get(x, y));
                let weights = bicubic_weights(frac);
                let in_row = weights.iter().enumerate().all(|(k, &wk)| {
                    let tx = x0 - 1 + k as i64;
                    wk == 0.0 || (0..w as i64).contains(&tx)
                });
                if !in_row {
                    continue;
                }
                valid[x] = true;
                for (k, &wk) in weights.iter().enumerate() {
                    if wk == 0.0 {
                        continue;
                    }
                    let tx = (x0 - 1 + k as i64) as usize;
                    for ch in 0..c {
                        values[x * c + ch] += wk * src[tx * c + ch];
                    }
                }
            }
            (values, valid)
        })
        .collect();

    let mut data = Vec::with_capacity(w * h * c);
    let mut mask = Vec::with_capacity(w * h);
    for (values, valid) in rows {
        data.extend(values);
        mask.extend(valid);
    }
    Ok(WarpResult {
        image: Image::new(w, h, c, data)?,
        mask: Mask::new(w, h, mask)?,
        weight: None,
    })
}

/// Scatters every `valid` source pixel to `x + shift * D(x, y)` over the
/// cubic 4-tap footprint and normalises by the accumulated weight.
///
/// A target pixel counts as reached when its accumulated positive weight
/// exceeds [`WEIGHT_EPSILON`]. Reached pixels are normalised by the signed
/// weight sum; if negative lobes cancel that sum below the threshold, only
/// the positive contributions are used.
pub fn forward_splat(
    image: &Image,
    disparity: &DisparityMap,
    shift: f64,
    valid: &Mask,
) -> Result<WarpResult> {
    ensure_dims(image.dims(), disparity.dims())?;
    ensure_dims(image.dims(), valid.dims())?;
    let (w, h, c) = (image.width(), image.height(), image.channels());

    let rows: Vec<(Vec<f64>, Vec<bool>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let src = image.row(y);
            let mut acc = vec![0.0; w * c];
            let mut acc_pos = vec![0.0; w * c];
            let mut wsum = vec![0.0; w];
            let mut wpos = vec![0.0; w];
            for x in 0..w {
                if !valid.get(x, y) {
                    continue;
                }
                let (x0, frac) = split(x as f64 + shift * disparity.get(x, y));
                for (k, wk) in bicubic_weights(frac).into_iter().enumerate() {
                    let tx = x0 - 1 + k as i64;
                    if wk == 0.0 || tx < 0 || tx >= w as i64 {
                        continue;
                    }
                    let tx = tx as usize;
                    wsum[tx] += wk;
                    for ch in 0..c {
                        acc[tx * c + ch] += wk * src[x * c + ch];
                    }
                    if wk > 0.0 {
                        wpos[tx] += wk;
                        for ch in 0..c {
                            acc_pos[tx * c + ch] += wk * src[x * c + ch];
                        }
                    }
                }
            }
            let mut reached = vec![false; w];
            let mut values = vec![0.0; w * c];
            for tx in 0..w {
                if wpos[tx] <= WEIGHT_EPSILON {
                    continue;
                }
                reached[tx] = true;
                let (num, den) = if wsum[tx] > WEIGHT_EPSILON {
                    (&acc, wsum[tx])
                } else {
                    (&acc_pos, wpos[tx])
                };
                for ch in 0..c {
                    values[tx * c + ch] = num[tx * c + ch] / den;
                }
            }
            (values, reached, wsum)
        })
        .collect();

    let mut data = Vec::with_capacity(w * h * c);
    let mut mask = Vec::with_capacity(w * h);
    let mut weight = Vec::with_capacity(w * h);
    for (values, reached, wsum) in rows {
        data.extend(values);
        mask.extend(reached);
        weight.extend(wsum);
    }
    Ok(WarpResult {
        image: Image::new(w, h, c, data)?,
        mask: Mask::new(w, h, mask)?,
        weight: Some(Grid::new(w, h, weight)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize) -> Image {
        Image::from_fn(w, 1, 1, |x, _, _| x as f64 / (w - 1) as f64)
    }

    #[test]
    fn weights_on_grid_and_half() {
        assert_eq!(bicubic_weights(0.0), [0.0, 1.0, 0.0, 0.0]);
        let half = bicubic_weights(0.5);
        let expect = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];
        for (a, b) in half.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_zero_at_integers() {
        assert_eq!(keys_kernel(0.0), 1.0);
        assert_eq!(keys_kernel(1.0), 0.0);
        assert_eq!(keys_kernel(-1.0), 0.0);
        assert_eq!(keys_kernel(2.0), 0.0);
        assert_eq!(keys_kernel(3.5), 0.0);
    }

    #[test]
    fn backward_identity_for_zero_disparity() {
        let img = Image::from_fn(5, 3, 3, |x, y, c| (x + 2 * y + c) as f64 / 20.0);
        let d = DisparityMap::filled(5, 3, 0.0);
        let out = backward_warp(&img, &d, 7.3).unwrap();
        assert_eq!(out.image, img);
        assert_eq!(out.mask.count_set(), 15);
    }

    #[test]
    fn backward_integer_shift_on_ramp() {
        let img = ramp(8);
        let d = DisparityMap::filled(8, 1, 1.0);
        let out = backward_warp(&img, &d, 2.0).unwrap();
        for x in 0..8 {
            if x <= 5 {
                assert!(out.mask.get(x, 0));
                assert!((out.image.get(x, 0, 0) - img.get(x + 2, 0, 0)).abs() <= 1e-12);
            } else {
                assert!(!out.mask.get(x, 0));
                assert_eq!(out.image.get(x, 0, 0), 0.0);
            }
        }
    }

    #[test]
    fn backward_half_shift_reproduces_linear() {
        let img = ramp(8);
        let d = DisparityMap::filled(8, 1, 0.5);
        let out = backward_warp(&img, &d, 1.0).unwrap();
        // taps x-1..x+2 must be inside: x in 1..=5
        for x in 0..8 {
            let interior = (1..=5).contains(&x);
            assert_eq!(out.mask.get(x, 0), interior, "x={x}");
            if interior {
                let expect = (x as f64 + 0.5) / 7.0;
                assert!((out.image.get(x, 0, 0) - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn splat_identity_for_zero_disparity() {
        let img = Image::from_fn(6, 2, 1, |x, y, _| (x * y) as f64 / 10.0);
        let d = DisparityMap::filled(6, 2, 0.0);
        let mut valid = Mask::filled(6, 2, true);
        valid.set(3, 1, false);
        let out = forward_splat(&img, &d, 4.0, &valid).unwrap();
        assert_eq!(out.mask, valid);
        assert_eq!(out.image, img.masked(&valid));
    }

    #[test]
    fn splat_single_pixel_lands_at_integer_target() {
        let img = Image::from_fn(16, 1, 1, |x, _, _| if x == 4 { 0.7 } else { 0.2 });
        let d = DisparityMap::filled(16, 1, 2.0);
        let mut valid = Mask::filled(16, 1, false);
        valid.set(4, 0, true);
        let out = forward_splat(&img, &d, 3.0, &valid).unwrap();
        assert_eq!(out.mask.count_set(), 1);
        assert!(out.mask.get(10, 0));
        assert_eq!(out.image.get(10, 0, 0), 0.7);
    }

    #[test]
    fn splat_empty_valid() {
        let img = Image::from_fn(4, 4, 3, |_, _, _| 0.5);
        let d = DisparityMap::filled(4, 4, 1.0);
        let out = forward_splat(&img, &d, 1.0, &Mask::filled(4, 4, false)).unwrap();
        assert_eq!(out.mask.count_set(), 0);
        assert!(out.image.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let img = Image::zeros(4, 4, 1);
        let d = DisparityMap::filled(3, 4, 0.0);
        assert!(backward_warp(&img, &d, 1.0).is_err());
        assert!(forward_splat(&img, &d, 1.0, &Mask::filled(4, 4, true)).is_err());
    }

    proptest! {
        #[test]
        fn weights_partition_of_unity(frac in 0.0f64..1.0) {
            let s: f64 = bicubic_weights(frac).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn splat_and_gather_agree_on_integer_shifts(
            width in 4usize..24,
            disp in -2i32..=2,
            shift in -3i32..=3,
            seed in any::<u64>(),
        ) {
            let mut state = seed;
            let img = Image::from_fn(width, 2, 3, |_, _, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            });
            let d = DisparityMap::filled(width, 2, disp as f64);
            let fwd = forward_splat(&img, &d, shift as f64, &Mask::filled(width, 2, true)).unwrap();
            let bwd = backward_warp(&img, &d, -shift as f64).unwrap();
            for y in 0..2 {
                for x in 0..width {
                    if fwd.mask.get(x, y) && bwd.mask.get(x, y) {
                        for c in 0..3 {
                            prop_assert!((fwd.image.get(x, y, c) - bwd.image.get(x, y, c)).abs() <= 1e-9);
                        }
                    }
                }
            }
        }

        #[test]
        fn splat_coverage_monotone_in_valid(
            disps in prop::collection::vec(-3.0f64..3.0, 16),
            small in prop::collection::vec(any::<bool>(), 16),
            extra in prop::collection::vec(any::<bool>(), 16),
            shift in -4.0f64..4.0,
        ) {
            let img = Image::from_fn(16, 1, 1, |x, _, _| (x % 5) as f64 / 4.0);
            let d = DisparityMap::new(16, 1, disps).unwrap();
            let a = Mask::new(16, 1, small.clone()).unwrap();
            let b = Mask::new(16, 1, small.iter().zip(&extra).map(|(p, q)| *p || *q).collect()).unwrap();
            let ra = forward_splat(&img, &d, shift, &a).unwrap();
            let rb = forward_splat(&img, &d, shift, &b).unwrap();
            for x in 0..16 {
                prop_assert!(!ra.mask.get(x, 0) || rb.mask.get(x, 0));
            }
        }

        #[test]
        fn splat_constant_reproduces_one(
            width in 8usize..40,
            disp in -2.0f64..2.0,
            shift in -5.0f64..5.0,
        ) {
            let img = Image::from_fn(width, 1, 1, |_, _, _| 1.0);
            let d = DisparityMap::filled(width, 1, disp);
            let out = forward_splat(&img, &d, shift, &Mask::filled(width, 1, true)).unwrap();
            // interior: every tap of the neighbouring sources landed inside the row
            for x in 0..width {
                if out.mask.get(x, 0) {
                    let src = x as f64 - shift * disp;
                    if src >= 2.0 && src <= width as f64 - 3.0 {
                        prop_assert!((out.image.get(x, 0, 0) - 1.0).abs() <= 1e-9);
                    }
                }
            }
        }
    }
}
