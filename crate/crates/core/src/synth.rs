//! Synthetic layered scenes and a brute-force z-buffer renderer used as
//! ground truth.
//!
//! A scene is a stack of fronto-parallel planes, each with a constant
//! disparity, an axis-aligned region in reference-view coordinates, and a
//! procedural texture. The renderer evaluates textures directly at real
//! source coordinates and never resamples an image, so it shares no code
//! with the warping path it is used to check.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::raster::{ConfidenceMap, DisparityMap, Image, LightField, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Full,
    Rect {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
}

impl Region {
    fn contains(&self, sx: f64, y: f64) -> bool {
        match *self {
            Region::Full => true,
            Region::Rect {
                x: rx,
                y: ry,
                width,
                height,
            } => {
                let (x0, y0) = (rx as f64, ry as f64);
                sx >= x0 && sx < x0 + width as f64 && y >= y0 && y < y0 + height as f64
            }
        }
    }
}

fn default_checker_colors() -> [[f64; 3]; 2] {
    [[0.15, 0.15, 0.15], [0.85, 0.85, 0.85]]
}

fn default_noise_scale() -> f64 {
    4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    Constant {
        color: [f64; 3],
    },
    Checker {
        period: f64,
        #[serde(default = "default_checker_colors")]
        colors: [[f64; 3]; 2],
    },
    /// Smooth value noise on a lattice of `scale` pixels.
    Noise {
        seed: u64,
        #[serde(default = "default_noise_scale")]
        scale: f64,
    },
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64, c: usize) -> f64 {
    let h = splitmix(seed ^ splitmix((ix as u64).wrapping_mul(0x1_0000_0001) ^ splitmix(iy as u64 ^ ((c as u64) << 56))));
    0.1 + 0.8 * ((h >> 11) as f64 / (1u64 << 53) as f64)
}

impl Texture {
    /// Colour at reference-view coordinates `(sx, y)`.
    pub fn sample(&self, sx: f64, y: f64, c: usize) -> f64 {
        match *self {
            Texture::Constant { color } => color[c],
            Texture::Checker { period, colors } => {
                let cell = (sx / period).floor() as i64 + (y / period).floor() as i64;
                colors[cell.rem_euclid(2) as usize][c]
            }
            Texture::Noise { seed, scale } => {
                let (u, v) = (sx / scale, y / scale);
                let (iu, iv) = (u.floor(), v.floor());
                let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
                let (fu, fv) = (smooth(u - iu), smooth(v - iv));
                let (iu, iv) = (iu as i64, iv as i64);
                let top = lattice(seed, iu, iv, c) * (1.0 - fu) + lattice(seed, iu + 1, iv, c) * fu;
                let bottom = lattice(seed, iu, iv + 1, c) * (1.0 - fu) + lattice(seed, iu + 1, iv + 1, c) * fu;
                top * (1.0 - fv) + bottom * fv
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub disparity: f64,
    pub region: Region,
    pub texture: Texture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Plane>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene("empty frame".into()));
        }
        if !self.planes.iter().any(|p| p.region == Region::Full) {
            return Err(Error::InvalidScene("no full-frame background plane".into()));
        }
        for (i, a) in self.planes.iter().enumerate() {
            if !a.disparity.is_finite() {
                return Err(Error::InvalidScene(format!("plane {i} has non-finite disparity")));
            }
            if let Texture::Checker { period, .. } = a.texture {
                if period <= 0.0 {
                    return Err(Error::InvalidScene(format!("plane {i} has checker period {period}")));
                }
            }
            if let Texture::Noise { scale, .. } = a.texture {
                if scale <= 0.0 {
                    return Err(Error::InvalidScene(format!("plane {i} has noise scale {scale}")));
                }
            }
            for b in &self.planes[i + 1..] {
                if a.disparity == b.disparity {
                    return Err(Error::InvalidScene(format!(
                        "duplicate plane disparity {}",
                        a.disparity
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let spec: SceneSpec = serde_json::from_slice(&fs::read(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// The rendered view, its exact disparity, and which pixels are defined.
#[derive(Clone, Debug)]
pub struct OracleView {
    pub image: Image,
    pub disparity: DisparityMap,
    pub mask: Mask,
}

/// Brute-force z-buffer render at angular position `view`.
///
/// A plane covers target `x` when `x - view * d` lies in its region; the
/// covering plane with the largest disparity wins. Where the winner's source
/// point falls outside the reference frame the pixel is marked undefined,
/// though the procedural texture value is still written.
pub fn oracle_render(spec: &SceneSpec, view: f64) -> OracleView {
    let (w, h) = (spec.width, spec.height);
    let mut image = Image::zeros(w, h, 3);
    let mut disparity = DisparityMap::filled(w, h, 0.0);
    let mut mask = Mask::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let yf = y as f64;
            let winner = spec
                .planes
                .iter()
                .filter(|p| p.region.contains(x as f64 - view * p.disparity, yf))
                .max_by(|a, b| a.disparity.total_cmp(&b.disparity));
            let Some(plane) = winner else { continue };
            let sx = x as f64 - view * plane.disparity;
            for c in 0..3 {
                image.set(x, y, c, plane.texture.sample(sx, yf, c));
            }
            disparity.set(x, y, plane.disparity);
            mask.set(x, y, sx >= 0.0 && sx <= (w - 1) as f64);
        }
    }
    OracleView {
        image,
        disparity,
        mask,
    }
}

/// Renders views `-M..=M` with exact disparity and unit confidence.
pub fn generate_lightfield(spec: &SceneSpec, radius: usize) -> Result<Dataset> {
    spec.validate()?;
    let r = radius as i32;
    let mut views = Vec::new();
    let mut disparities = Vec::new();
    let mut confidences = Vec::new();
    for v in -r..=r {
        let o = oracle_render(spec, v as f64);
        views.push((v, o.image));
        disparities.push(o.disparity);
        confidences.push(ConfidenceMap::filled(spec.width, spec.height, 1.0));
    }
    Dataset::new(LightField::new(radius, views)?, disparities, confidences)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomSceneConfig {
    pub width: usize,
    pub height: usize,
    pub min_planes: usize,
    pub max_planes: usize,
    /// Disparities are distinct integers in `0..=max_disparity`.
    pub max_disparity: u32,
    /// Foreground rectangles stay disjoint in every view `-radius..=radius`.
    pub radius: usize,
}

impl Default for RandomSceneConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            min_planes: 2,
            max_planes: 4,
            max_disparity: 3,
            radius: 4,
        }
    }
}

fn random_texture(rng: &mut ChaCha8Rng) -> Texture {
    let color = |rng: &mut ChaCha8Rng| [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
    match rng.gen_range(0..3) {
        0 => Texture::Constant { color: color(rng) },
        1 => {
            let colors = [color(rng), color(rng)];
            Texture::Checker {
                period: rng.gen_range(3..9) as f64,
                colors,
            }
        }
        _ => Texture::Noise {
            seed: rng.gen(),
            scale: rng.gen_range(3..8) as f64,
        },
    }
}

/// Seeded random layered scene. The lowest disparity is a full-frame
/// background (at most 1, so some background stays in frame at large
/// shifts); the rest are rectangles that never overlap one another in any
/// reference view, so every plane is fully visible in every reference.
pub fn random_scene(seed: u64, cfg: &RandomSceneConfig) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_planes = cfg.max_planes.min(cfg.max_disparity as usize + 1).max(cfg.min_planes);
    let n = rng.gen_range(cfg.min_planes..=max_planes);
    let mut pool: Vec<u32> = (0..=cfg.max_disparity).collect();
    let disparities = loop {
        pool.shuffle(&mut rng);
        let mut pick = pool[..n].to_vec();
        pick.sort_unstable();
        if pick[0] <= 1 {
            break pick;
        }
    };

    let mut planes = vec![Plane {
        disparity: disparities[0] as f64,
        region: Region::Full,
        texture: random_texture(&mut rng),
    }];
    let r = cfg.radius as i64;
    let mut placed: Vec<(i64, i64, i64, i64, i64)> = Vec::new();
    for &d in &disparities[1..] {
        let d = d as i64;
        for _ in 0..500 {
            let rw: i64 = rng.gen_range(8..=20.min(cfg.width as i64 - 2).max(8));
            let rh: i64 = rng.gen_range(8..=20.min(cfg.height as i64 - 2).max(8));
            if rw >= cfg.width as i64 || rh >= cfg.height as i64 {
                break;
            }
            let x = rng.gen_range(1..cfg.width as i64 - rw);
            let y = rng.gen_range(1..cfg.height as i64 - rh);
            let clear = placed.iter().all(|&(px, py, pw, ph, pd)| {
                // keep a one-pixel gap between rectangles
                let rows_apart = y + rh < py || py + ph < y;
                rows_apart
                    || (-r..=r).all(|v| {
                        let (ax, bx) = (x + v * d, px + v * pd);
                        ax + rw < bx || bx + pw < ax
                    })
            });
            if clear {
                placed.push((x, y, rw, rh, d));
                planes.push(Plane {
                    disparity: d as f64,
                    region: Region::Rect {
                        x,
                        y,
                        width: rw as usize,
                        height: rh as usize,
                    },
                    texture: random_texture(&mut rng),
                });
                break;
            }
        }
    }
    SceneSpec {
        name: Some(format!("random-{seed}")),
        width: cfg.width,
        height: cfg.height,
        planes,
    }
}
