//! Superpixel segmentation (SLIC) and piecewise-constant superpixel
//! disparity.
//!
//! Rendering with a disparity that is constant over each superpixel moves
//! every superpixel rigidly, so texture inside a segment survives large
//! shifts undistorted.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::raster::{ensure_dims, ConfidenceMap, DisparityMap, Grid, Image, Mask};
use crate::sdr::{sdr_render, DEFAULT_LAYERS};

/// The two granularities used by the pipeline, in pixels per superpixel.
pub const DEFAULT_SP_SIZES: [usize; 2] = [100, 400];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlicParams {
    pub iterations: usize,
    pub compactness: f64,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            iterations: 10,
            compactness: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperpixelMap {
    labels: Grid<u32>,
    count: usize,
    target_size: usize,
}

impl SuperpixelMap {
    /// Wraps an existing partition. Ids must cover `0..count` without gaps.
    pub fn from_labels(labels: Grid<u32>, target_size: usize) -> Result<Self> {
        let count = labels.data().iter().max().map_or(0, |&m| m as usize + 1);
        let mut seen = vec![false; count];
        for &l in labels.data() {
            seen[l as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("superpixel ids are not contiguous".into()));
        }
        Ok(Self {
            labels,
            count,
            target_size,
        })
    }

    pub fn labels(&self) -> &Grid<u32> {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels.get(x, y)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in self.labels.data() {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Sorted ids of 4-adjacent superpixels, per superpixel.
    pub fn adjacency(&self) -> Vec<BTreeSet<u32>> {
        let mut adj = vec![BTreeSet::new(); self.count];
        let (w, h) = self.dims();
        for y in 0..h {
            for x in 0..w {
                let a = self.get(x, y);
                if x + 1 < w {
                    let b = self.get(x + 1, y);
                    if a != b {
                        adj[a as usize].insert(b);
                        adj[b as usize].insert(a);
                    }
                }
                if y + 1 < h {
                    let b = self.get(x, y + 1);
                    if a != b {
                        adj[a as usize].insert(b);
                        adj[b as usize].insert(a);
                    }
                }
            }
        }
        adj
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB in `[0, 1]` to CIELAB under D65.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let (fx, fy, fz) = (lab_f(x / 0.95047), lab_f(y), lab_f(z / 1.08883));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn lab_image(image: &Image) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(image.width() * image.height());
    for y in 0..image.height() {
        for x in 0..image.width() {
            let p = image.pixel(x, y);
            let rgb = if p.len() == 3 { [p[0], p[1], p[2]] } else { [p[0]; 3] };
            out.push(rgb_to_lab(rgb));
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

fn lab_dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

pub fn segment(image: &Image, target_size: usize) -> Result<SuperpixelMap> {
    segment_with(image, target_size, &SlicParams::default())
}

/// Grid-seeded SLIC followed by connectivity enforcement.
pub fn segment_with(image: &Image, target_size: usize, params: &SlicParams) -> Result<SuperpixelMap> {
    if target_size < 4 {
        return Err(Error::InvalidArgument(format!(
            "superpixel size {target_size} must be at least 4"
        )));
    }
    let (w, h) = image.dims();
    let n = w * h;
    if n < target_size {
        return Err(Error::ImageTooSmall {
            pixels: n,
            target_size,
        });
    }
    let lab = lab_image(image);
    let k = ((n as f64 / target_size as f64).round() as usize).max(1);
    let step = (n as f64 / k as f64).sqrt();
    let nx = ((w as f64 / step).round() as usize).clamp(1, w);
    let ny = ((h as f64 / step).round() as usize).clamp(1, h);
    let step = (n as f64 / (nx * ny) as f64).sqrt();

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let sx = (((i as f64 + 0.5) * w as f64 / nx as f64) as usize).min(w - 1);
            let sy = (((j as f64 + 0.5) * h as f64 / ny as f64) as usize).min(h - 1);
            let (sx, sy) = lowest_gradient(&lab, w, h, sx, sy);
            centers.push(Center {
                lab: lab[sy * w + sx],
                x: sx as f64,
                y: sy as f64,
            });
        }
    }

    let spatial = (params.compactness / step).powi(2);
    let mut assign = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.iterations.max(1) {
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c.x - step).floor().max(0.0) as usize;
            let x1 = ((c.x + step).ceil() as usize).min(w - 1);
            let y0 = (c.y - step).floor().max(0.0) as usize;
            let y1 = ((c.y + step).ceil() as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    let ds2 = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = lab_dist2(&lab[i], &c.lab) + ds2 * spatial;
                    if d < dist[i] {
                        dist[i] = d;
                        assign[i] = ci as u32;
                    }
                }
            }
        }
        for i in 0..n {
            if dist[i].is_infinite() {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let best = centers
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| {
                        let ds2 = (x - c.x).powi(2) + (y - c.y).powi(2);
                        (lab_dist2(&lab[i], &c.lab) + ds2 * spatial, ci)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .expect("at least one center");
                assign[i] = best.1 as u32;
            }
        }
        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for i in 0..n {
            let s = &mut sums[assign[i] as usize];
            s[0] += lab[i][0];
            s[1] += lab[i][1];
            s[2] += lab[i][2];
            s[3] += (i % w) as f64;
            s[4] += (i / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                c.lab = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
                c.x = s[3] / s[5];
                c.y = s[4] / s[5];
            }
        }
    }

    let labels = Grid::new(w, h, assign)?;
    let labels = enforce_connectivity(labels);
    let (labels, count) = compact_labels(labels);
    Ok(SuperpixelMap {
        labels,
        count,
        target_size,
    })
}

fn lowest_gradient(lab: &[[f64; 3]], w: usize, h: usize, sx: usize, sy: usize) -> (usize, usize) {
    let grad = |x: usize, y: usize| -> f64 {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return f64::INFINITY;
        }
        lab_dist2(&lab[y * w + x + 1], &lab[y * w + x - 1])
            + lab_dist2(&lab[(y + 1) * w + x], &lab[(y - 1) * w + x])
    };
    let mut best = (sx, sy);
    let mut best_g = grad(sx, sy);
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (x, y) = (sx as i64 + dx, sy as i64 + dy);
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                continue;
            }
            let g = grad(x as usize, y as usize);
            if g < best_g {
                best_g = g;
                best = (x as usize, y as usize);
            }
        }
    }
    best
}

/// 4-connected components of equal-label regions: `(component id per pixel,
/// label per component, size per component)`.
fn components(labels: &Grid<u32>) -> (Vec<usize>, Vec<u32>, Vec<usize>) {
    let (w, h) = labels.dims();
    let mut comp = vec![usize::MAX; w * h];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let label = labels.data()[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels.data()[j] == label {
                    comp[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        comp_label.push(label);
        comp_size.push(size);
    }
    (comp, comp_label, comp_size)
}

/// Merges every stray fragment of a label into the largest adjacent
/// superpixel until each label is a single 4-connected region.
fn enforce_connectivity(mut labels: Grid<u32>) -> Grid<u32> {
    let (w, h) = labels.dims();
    loop {
        let (comp, comp_label, comp_size) = components(&labels);
        let max_label = comp_label.iter().copied().max().unwrap_or(0) as usize;
        let mut main = vec![usize::MAX; max_label + 1];
        for (id, &l) in comp_label.iter().enumerate() {
            let m = &mut main[l as usize];
            if *m == usize::MAX || comp_size[id] > comp_size[*m] {
                *m = id;
            }
        }
        let is_orphan = |id: usize| main[comp_label[id] as usize] != id;
        if !(0..comp_label.len()).any(is_orphan) {
            return labels;
        }
        // orphans only merge into main components, which keeps the result
        // connected and guarantees progress every round
        let mut best: Vec<Option<usize>> = vec![None; comp_label.len()];
        for y in 0..h {
            for x in 0..w {
                let a = comp[y * w + x];
                let mut consider = |b: usize| {
                    if a == b {
                        return;
                    }
                    for (from, to) in [(a, b), (b, a)] {
                        if is_orphan(from) && !is_orphan(to) {
                            let slot = &mut best[from];
                            let better = match *slot {
                                None => true,
                                Some(cur) => {
                                    comp_size[to] > comp_size[cur]
                                        || (comp_size[to] == comp_size[cur] && comp_label[to] < comp_label[cur])
                                }
                            };
                            if better {
                                *slot = Some(to);
                            }
                        }
                    }
                };
                if x + 1 < w {
                    consider(comp[y * w + x + 1]);
                }
                if y + 1 < h {
                    consider(comp[(y + 1) * w + x]);
                }
            }
        }
        for (i, l) in labels.data_mut().iter_mut().enumerate() {
            if let Some(target) = best[comp[i]] {
                *l = comp_label[target];
            }
        }
    }
}

/// Renumbers labels `0..K` in scanline order of first appearance.
fn compact_labels(labels: Grid<u32>) -> (Grid<u32>, usize) {
    let mut remap = std::collections::HashMap::new();
    let out = labels.map(|l| {
        let next = remap.len() as u32;
        *remap.entry(l).or_insert(next)
    });
    (out, remap.len())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpDisparityParams {
    /// Pixels with confidence at or above this enter the per-segment median.
    pub conf_threshold: f64,
    /// Sets the stratification interval used by the outlier pass.
    pub layer_count: usize,
}

impl Default for SpDisparityParams {
    fn default() -> Self {
        Self {
            conf_threshold: 0.5,
            layer_count: DEFAULT_LAYERS,
        }
    }
}

/// Per-superpixel disparity: the median of confident members (all members
/// if none is confident), then one simultaneous pass that replaces any
/// segment differing from every neighbour by more than one stratification
/// interval with the median of its neighbours.
pub fn sp_disparity(
    disparity: &DisparityMap,
    confidence: &ConfidenceMap,
    sp: &SuperpixelMap,
    params: &SpDisparityParams,
) -> Result<DisparityMap> {
    ensure_dims(disparity.dims(), confidence.dims())?;
    ensure_dims(disparity.dims(), sp.dims())?;
    if params.layer_count < 1 {
        return Err(Error::InvalidLayerCount(params.layer_count));
    }
    let mut confident = vec![Vec::new(); sp.count()];
    let mut all = vec![Vec::new(); sp.count()];
    for (i, &l) in sp.labels().data().iter().enumerate() {
        let d = disparity.data()[i];
        all[l as usize].push(d);
        if confidence.data()[i] >= params.conf_threshold {
            confident[l as usize].push(d);
        }
    }
    let initial: Vec<f64> = confident
        .iter_mut()
        .zip(all.iter_mut())
        .map(|(c, a)| if c.is_empty() { median(a) } else { median(c) })
        .collect();

    let interval = disparity
        .masked_range(None)
        .map_or(0.0, |(lo, hi)| (hi - lo) / params.layer_count as f64);
    let adjacency = sp.adjacency();
    let smoothed: Vec<f64> = initial
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let nb = &adjacency[k];
            if nb.is_empty() {
                return v;
            }
            let isolated = nb.iter().all(|&j| (v - initial[j as usize]).abs() > interval);
            if isolated {
                let mut vals: Vec<f64> = nb.iter().map(|&j| initial[j as usize]).collect();
                median(&mut vals)
            } else {
                v
            }
        })
        .collect();

    let (w, h) = disparity.dims();
    Ok(DisparityMap::from_fn(w, h, |x, y| smoothed[sp.get(x, y) as usize]))
}

/// Renders the centre view with a superpixel disparity map.
pub fn sp_render(center: &Image, sp_disparity: &DisparityMap, t: f64, layer_count: usize) -> Result<(Image, Mask)> {
    sdr_render(center, sp_disparity, t, layer_count)
}
