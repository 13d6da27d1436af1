//! PSNR and single-scale SSIM on images with peak value 1.

use crate::error::{Error, Result};
use crate::raster::{ensure_dims, Grid, Image, Mask};

/// Reported when the two images agree exactly.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// `10 log10(1 / MSE)` over the masked pixels (all channels), capped at
/// [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image, mask: Option<&Mask>) -> Result<f64> {
    a.ensure_same_shape(b)?;
    if let Some(m) = mask {
        ensure_dims(a.dims(), m.dims())?;
    }
    let c = a.channels();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (pa, pb)) in a.data().chunks_exact(c).zip(b.data().chunks_exact(c)).enumerate() {
        if mask.is_some_and(|m| !m.data()[i]) {
            continue;
        }
        sum += pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        count += c;
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Normalized 1-D Gaussian taps of the SSIM window.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - r;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Valid-mode separable Gaussian filter.
fn filter_valid(g: &Grid<f64>, taps: &[f64; SSIM_WINDOW]) -> Grid<f64> {
    let (w, h) = g.dims();
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let rows = Grid::from_fn(ow, h, |x, y| {
        let r = &g.row(y)[x..x + SSIM_WINDOW];
        r.iter().zip(taps).map(|(v, t)| v * t).sum::<f64>()
    });
    Grid::from_fn(ow, oh, |x, y| (0..SSIM_WINDOW).map(|k| rows.get(x, y + k) * taps[k]).sum::<f64>())
}

/// Mean SSIM over every valid window position of the channel-mean grey
/// images.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageSmallerThanWindow {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let (ga, gb) = (a.to_gray(), b.to_gray());
    let taps = gaussian_taps();
    let prod = |p: &Grid<f64>, q: &Grid<f64>| {
        Grid::new(w, h, p.data().iter().zip(q.data()).map(|(x, y)| x * y).collect()).expect("same dims")
    };
    let mu_a = filter_valid(&ga, &taps);
    let mu_b = filter_valid(&gb, &taps);
    let e_aa = filter_valid(&prod(&ga, &ga), &taps);
    let e_bb = filter_valid(&prod(&gb, &gb), &taps);
    let e_ab = filter_valid(&prod(&ga, &gb), &taps);

    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a.data()[i], mu_b.data()[i]);
        let va = e_aa.data()[i] - ma * ma;
        let vb = e_bb.data()[i] - mb * mb;
        let cov = e_ab.data()[i] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
        total += num / den;
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noise(w: usize, h: usize, c: usize, seed: u64) -> Image {
        let mut s = seed;
        Image::from_fn(w, h, c, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    /// Direct 2-D window sums, no separability, no shared helpers.
    fn ssim_oracle(a: &Image, b: &Image) -> f64 {
        let gray = |img: &Image, x: usize, y: usize| {
            let p = img.pixel(x, y);
            p.iter().sum::<f64>() / p.len() as f64
        };
        let mut k = [[0.0; 11]; 11];
        let mut ks = 0.0;
        for (i, row) in k.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(dx * dx + dy * dy) / 4.5).exp();
                ks += *v;
            }
        }
        let (w, h) = a.dims();
        let mut acc = 0.0;
        let mut n = 0.0;
        for y0 in 0..=h - 11 {
            for x0 in 0..=w - 11 {
                let (mut ma, mut mb) = (0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wt = k[i][j] / ks;
                        ma += wt * gray(a, x0 + j, y0 + i);
                        mb += wt * gray(b, x0 + j, y0 + i);
                    }
                }
                let (mut va, mut vb, mut cv) = (0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wt = k[i][j] / ks;
                        let da = gray(a, x0 + j, y0 + i) - ma;
                        let db = gray(b, x0 + j, y0 + i) - mb;
                        va += wt * da * da;
                        vb += wt * db * db;
                        cv += wt * da * db;
                    }
                }
                acc += ((2.0 * ma * mb + 1e-4) * (2.0 * cv + 9e-4))
                    / ((ma * ma + mb * mb + 1e-4) * (va + vb + 9e-4));
                n += 1.0;
            }
        }
        acc / n
    }

    #[test]
    fn psnr_reference_values() {
        let a = Image::new(1, 1, 1, vec![0.0]).unwrap();
        let b = Image::new(1, 1, 1, vec![0.5]).unwrap();
        assert!((psnr(&a, &b, None).unwrap() - 6.020599913279624).abs() < 1e-12);
        assert_eq!(psnr(&a, &a, None).unwrap(), PSNR_CAP);
    }

    #[test]
    fn psnr_mask() {
        let a = Image::new(2, 1, 1, vec![0.0, 0.3]).unwrap();
        let b = Image::new(2, 1, 1, vec![0.0, 0.9]).unwrap();
        let m = Mask::new(2, 1, vec![true, false]).unwrap();
        assert_eq!(psnr(&a, &b, Some(&m)).unwrap(), PSNR_CAP);
        let none = Mask::filled(2, 1, false);
        assert!(matches!(psnr(&a, &b, Some(&none)), Err(Error::EmptyMask)));
        let c = Image::zeros(3, 1, 1);
        assert!(matches!(psnr(&a, &c, None), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ssim_identity_and_constants() {
        let a = noise(20, 16, 3, 1);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let c = Image::from_fn(12, 12, 1, |_, _, _| 0.5);
        assert_eq!(ssim(&c, &c).unwrap(), 1.0);
        let small = Image::zeros(10, 20, 1);
        assert!(matches!(ssim(&small, &small), Err(Error::ImageSmallerThanWindow { .. })));
    }

    #[test]
    fn ssim_matches_direct_oracle() {
        for seed in 0..4 {
            let a = noise(32, 32, 3, seed);
            let b = noise(32, 32, 3, seed + 100);
            let blend = Image::from_fn(32, 32, 3, |x, y, c| 0.7 * a.get(x, y, c) + 0.3 * b.get(x, y, c));
            for (p, q) in [(&a, &b), (&a, &blend)] {
                let fast = ssim(p, q).unwrap();
                assert!((fast - ssim_oracle(p, q)).abs() < 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn gaussian_taps_normalized() {
        let t = gaussian_taps();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(t[0], t[10]);
    }

    proptest! {
        #[test]
        fn symmetric(seed in 0u64..1000) {
            let a = noise(12, 13, 1, seed);
            let b = noise(12, 13, 1, seed ^ 0xabc);
            prop_assert_eq!(psnr(&a, &b, None).unwrap(), psnr(&b, &a, None).unwrap());
            prop_assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        }

        #[test]
        fn psnr_decreases_with_perturbation(e1 in 0.001f64..0.2, extra in 0.001f64..0.2) {
            let a = noise(6, 6, 3, 5);
            let bump = |e: f64| {
                let mut b = a.clone();
                b.set(2, 3, 1, a.get(2, 3, 1) + e);
                b
            };
            let p1 = psnr(&a, &bump(e1), None).unwrap();
            let p2 = psnr(&a, &bump(e1 + extra), None).unwrap();
            prop_assert!(p2 < p1);
        }
    }
}
