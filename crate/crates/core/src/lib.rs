//! Light-field view extrapolation far outside the captured baseline.
//!
//! A horizontal light field of `2M + 1` views is re-rendered at a distant
//! angular position `t` by warping each reference one disparity layer at a
//! time and keeping the nearest layer per pixel. Holes are then classified
//! by a dilated target label map and filled from the matching surface.
//!
//! Disparity convention: a point at `x` in view `v` with disparity `d`
//! appears at `x + (t - v) * d` in view `t`.

pub mod cli;
pub mod error;
pub mod features;
pub mod io;
pub mod labelfill;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod sdr;
pub mod superpixel;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
pub use io::Dataset;
pub use raster::{ConfidenceMap, DisparityMap, Grid, Image, LabelMap, LightField, Mask};
pub use sdr::{sdr_render, AverageMode};
pub use warp::{backward_warp, forward_splat, WarpResult};
