//! Completion of the quantized target label map and a classical
//! label-guided colour fill.
//!
//! Ambiguous regions are assumed to belong to the furthest surface next to
//! them, so dilation propagates the largest (most distant) label.

use crate::error::{Error, Result};
use crate::raster::{ensure_dims, Grid, Image, LabelMap, Mask};

pub const DEFAULT_WINDOW: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct DilationOutcome {
    pub labels: LabelMap,
    pub iterations: usize,
    /// `false` if ambiguous pixels remained after `max_iters`.
    pub converged: bool,
}

/// Iterative max-label dilation into ambiguous (0) pixels.
///
/// Each iteration reads the previous state only, so the result does not
/// depend on scan order. Known labels never change.
pub fn dilate_fill(labels: &LabelMap, window: usize, max_iters: usize) -> Result<DilationOutcome> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "dilation window {window} must be odd and >= 3"
        )));
    }
    if labels.labels().data().iter().all(|&l| l == 0) {
        return Err(Error::NoKnownLabels);
    }
    let (w, h) = labels.dims();
    let r = (window / 2) as i64;
    let mut cur = labels.labels().clone();
    let mut iterations = 0;
    while iterations < max_iters && cur.data().contains(&0) {
        let prev = cur.clone();
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if prev.get(x, y) != 0 {
                    continue;
                }
                let mut best = 0u16;
                for dy in -r..=r {
                    let ny = y as i64 + dy;
                    if ny < 0 || ny >= h as i64 {
                        continue;
                    }
                    for dx in -r..=r {
                        let nx = x as i64 + dx;
                        if nx < 0 || nx >= w as i64 {
                            continue;
                        }
                        best = best.max(prev.get(nx as usize, ny as usize));
                    }
                }
                if best != 0 {
                    cur.set(x, y, best);
                    changed = true;
                }
            }
        }
        iterations += 1;
        if !changed {
            break;
        }
    }
    let converged = !cur.data().contains(&0);
    Ok(DilationOutcome {
        labels: LabelMap::new(cur, labels.layer_count())?,
        iterations,
        converged,
    })
}

/// Default iteration cap: `H + W`.
pub fn default_max_iters(labels: &LabelMap) -> usize {
    labels.width() + labels.height()
}

/// Nearest pixel (Euclidean, ties by smallest `y` then `x`) accepted by
/// `accept`, found by growing square rings around `(x, y)`.
fn nearest(w: usize, h: usize, x: usize, y: usize, accept: impl Fn(usize, usize) -> bool) -> Option<(usize, usize)> {
    let mut best: Option<(i64, usize, usize)> = None;
    let max_r = w.max(h) as i64;
    let (cx, cy) = (x as i64, y as i64);
    let visit = |px: i64, py: i64, best: &mut Option<(i64, usize, usize)>| {
        if px < 0 || py < 0 || px >= w as i64 || py >= h as i64 {
            return;
        }
        let (ux, uy) = (px as usize, py as usize);
        if !accept(ux, uy) {
            return;
        }
        let d2 = (px - cx).pow(2) + (py - cy).pow(2);
        let cand = (d2, uy, ux);
        if best.is_none_or(|b| cand < b) {
            *best = Some(cand);
        }
    };
    for r in 0..=max_r {
        if let Some((d2, _, _)) = best {
            if r * r > d2 {
                break;
            }
        }
        if r == 0 {
            visit(cx, cy, &mut best);
            continue;
        }
        for dx in -r..=r {
            visit(cx + dx, cy - r, &mut best);
            visit(cx + dx, cy + r, &mut best);
        }
        for dy in -r + 1..r {
            visit(cx - r, cy + dy, &mut best);
            visit(cx + r, cy + dy, &mut best);
        }
    }
    best.map(|(_, y, x)| (x, y))
}

/// Fills every unmasked pixel from the nearest masked pixel with the same
/// label. Without such a pixel it falls back to the nearest masked pixel with
/// a strictly larger (further) label, then to the nearest masked pixel.
pub fn surface_fill_rgb(image: &Image, mask: &Mask, labels: &LabelMap) -> Result<Image> {
    ensure_dims(image.dims(), mask.dims())?;
    ensure_dims(image.dims(), labels.dims())?;
    if labels.ambiguous_count() > 0 {
        return Err(Error::UnfilledLabels);
    }
    if mask.count_set() == 0 {
        return Err(Error::NoValidPixels);
    }
    let (w, h) = image.dims();
    let lmax = labels.layer_count();
    let mut present = vec![false; lmax + 2];
    for (i, &valid) in mask.data().iter().enumerate() {
        if valid {
            present[labels.labels().data()[i] as usize] = true;
        }
    }
    // further_present[l]: some valid pixel carries a label > l
    let mut further_present = vec![false; lmax + 2];
    for l in (0..=lmax).rev() {
        further_present[l] = further_present[l + 1] || present[l + 1];
    }

    let lab: &Grid<u16> = labels.labels();
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                continue;
            }
            let own = lab.get(x, y);
            let source = if present[own as usize] {
                nearest(w, h, x, y, |px, py| mask.get(px, py) && lab.get(px, py) == own)
            } else if further_present[own as usize] {
                nearest(w, h, x, y, |px, py| mask.get(px, py) && lab.get(px, py) > own)
            } else {
                nearest(w, h, x, y, |px, py| mask.get(px, py))
            };
            let (sx, sy) = source.expect("a valid pixel exists");
            let value = image.pixel(sx, sy).to_vec();
            out.pixel_mut(x, y).copy_from_slice(&value);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lm(w: usize, h: usize, data: Vec<u16>, l: usize) -> LabelMap {
        LabelMap::new(Grid::new(w, h, data).unwrap(), l).unwrap()
    }

    #[test]
    fn center_takes_largest_neighbor() {
        let w = lm(3, 3, vec![1, 2, 1, 1, 0, 1, 2, 1, 1], 2);
        let out = dilate_fill(&w, 3, 6).unwrap();
        assert_eq!(out.labels.get(1, 1), 2);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn full_map_is_fixed_point() {
        let w = lm(2, 2, vec![1, 2, 3, 1], 3);
        let out = dilate_fill(&w, 3, 4).unwrap();
        assert_eq!(out.labels, w);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn dilate_errors_and_unconverged() {
        let zero = lm(3, 1, vec![0, 0, 0], 2);
        assert!(matches!(dilate_fill(&zero, 3, 10), Err(Error::NoKnownLabels)));
        let w = lm(6, 1, vec![1, 0, 0, 0, 0, 0], 2);
        assert!(dilate_fill(&w, 4, 10).is_err());
        assert!(dilate_fill(&w, 1, 10).is_err());
        let out = dilate_fill(&w, 3, 2).unwrap();
        assert!(!out.converged);
        assert_eq!(out.labels.labels().data(), &[1, 1, 1, 0, 0, 0]);
        let out = dilate_fill(&w, 5, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 3);
    }

    #[test]
    fn fill_full_mask_is_identity() {
        let img = Image::from_fn(4, 3, 3, |x, y, c| (x + y + c) as f64 / 10.0);
        let labels = lm(4, 3, vec![1; 12], 1);
        let out = surface_fill_rgb(&img, &Mask::filled(4, 3, true), &labels).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn fill_errors() {
        let img = Image::zeros(2, 1, 1);
        let labels = lm(2, 1, vec![1, 0], 1);
        assert!(matches!(
            surface_fill_rgb(&img, &Mask::filled(2, 1, true), &labels),
            Err(Error::UnfilledLabels)
        ));
        let labels = lm(2, 1, vec![1, 1], 1);
        assert!(matches!(
            surface_fill_rgb(&img, &Mask::filled(2, 1, false), &labels),
            Err(Error::NoValidPixels)
        ));
    }

    #[test]
    fn fill_stays_on_surface() {
        // near plane (label 1) on the left, far plane (label 2) on the right,
        // a gap at the boundary labelled far
        let w = 10;
        let near = [0.9, 0.1, 0.1];
        let far = [0.1, 0.2, 0.7];
        let img = Image::from_fn(w, 4, 3, |x, _, c| if x < 4 { near[c] } else { far[c] });
        let mask = Mask::from_fn(w, 4, |x, _| !(4..7).contains(&x));
        let img = img.masked(&mask);
        let labels = lm(w, 4, (0..4 * w).map(|i| if i % w < 4 { 1 } else { 2 }).collect(), 2);
        let out = surface_fill_rgb(&img, &mask, &labels).unwrap();
        for y in 0..4 {
            for x in 4..7 {
                assert_eq!(out.pixel(x, y), &far);
            }
        }
    }

    #[test]
    fn fill_falls_back_to_further_label() {
        // label 2 gap with no valid label-2 pixels: uses label 3, never label 1
        let img = Image::from_fn(5, 1, 1, |x, _, _| [0.1, 0.0, 0.0, 0.0, 0.8][x]);
        let mask = Mask::new(5, 1, vec![true, false, false, false, true]).unwrap();
        let labels = lm(5, 1, vec![1, 2, 2, 2, 3], 3);
        let out = surface_fill_rgb(&img, &mask, &labels).unwrap();
        assert_eq!(out.data(), &[0.1, 0.8, 0.8, 0.8, 0.8]);
    }

    #[test]
    fn fill_tie_breaks_by_scanline() {
        let img = Image::from_fn(3, 3, 1, |x, y, _| (y * 3 + x) as f64 / 10.0);
        let mask = Mask::from_fn(3, 3, |x, y| (x, y) != (1, 1) && (x + y) % 2 == 1);
        let labels = lm(3, 3, vec![1; 9], 1);
        let out = surface_fill_rgb(&img, &mask, &labels).unwrap();
        // four equidistant candidates; (1, 0) comes first in scanline order
        assert_eq!(out.get(1, 1, 0), img.get(1, 0, 0));
    }

    #[test]
    fn nearest_matches_brute_force() {
        let (w, h) = (9, 7);
        let accept = |x: usize, y: usize| (x * 7 + y * 3) % 11 == 0;
        for y in 0..h {
            for x in 0..w {
                let mut best: Option<(i64, usize, usize)> = None;
                for py in 0..h {
                    for px in 0..w {
                        if accept(px, py) {
                            let d = (px as i64 - x as i64).pow(2) + (py as i64 - y as i64).pow(2);
                            let c = (d, py, px);
                            if best.is_none_or(|b| c < b) {
                                best = Some(c);
                            }
                        }
                    }
                }
                assert_eq!(nearest(w, h, x, y, accept), best.map(|(_, py, px)| (px, py)));
            }
        }
    }

    proptest! {
        #[test]
        fn dilation_monotone(data in prop::collection::vec(0u16..4, 36)) {
            prop_assume!(data.iter().any(|&l| l != 0));
            let w = lm(6, 6, data.clone(), 3);
            let out = dilate_fill(&w, 3, 12).unwrap();
            prop_assert!(out.converged);
            prop_assert!(out.iterations <= 12);
            for (i, &l) in data.iter().enumerate() {
                let o = out.labels.labels().data()[i];
                prop_assert!(o >= l);
                if l != 0 {
                    prop_assert_eq!(o, l);
                }
            }
        }
    }
}
