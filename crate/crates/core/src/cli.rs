//! The `lfx` command line: dataset synthesis, target-view rendering and
//! evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::Error;
use crate::features::{extract_patches, write_tensor, Manifest, ManifestEntry, Tensor, DEFAULT_STRIDE};
use crate::io::{
    detect_radius, load_image, load_mask, save_image, save_labels, save_labels_visual, save_mask, write_disparity,
    BitDepth, Dataset,
};
use crate::metrics::{psnr, ssim};
use crate::pipeline::{baseline_render, render_target, RenderConfig};
use crate::sdr::AverageMode;
use crate::synth::{generate_lightfield, oracle_render, random_scene, RandomSceneConfig, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const EVAL_HEADER: &str = "scene,t,alpha,method,psnr_db,ssim";

/// Rendered images compared by `eval`, in output order.
pub const EVAL_METHODS: [(&str, &str); 4] = [
    ("baseline", "baseline.png"),
    ("vd", "vd.png"),
    ("completed", "completed.png"),
    ("learned", "learned.png"),
];

#[derive(Parser, Debug)]
#[command(name = "lfx", version, about = "Light-field view extrapolation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic light-field dataset from a scene description.
    Synth(SynthArgs),
    /// Render an extrapolated target view from a dataset.
    Render(RenderArgs),
    /// Compare rendered views against ground truth and print CSV.
    Eval(EvalArgs),
}

#[derive(clap::Args, Debug)]
pub struct SynthArgs {
    /// Scene description (JSON). Mutually exclusive with --random.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub scene: Option<PathBuf>,
    /// Generate a random 64x64 layered scene from this seed instead.
    #[arg(long, value_name = "SEED")]
    pub random: Option<u64>,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Angular radius M: views -M..=M are written.
    #[arg(long, default_value_t = 4)]
    pub radius: usize,
    /// Also write ground-truth views gt_<t>.png and gt_mask_<t>.png.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gt: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgMode {
    /// Divide by the number of references; gaps count as zero.
    Paper,
    /// Average only the references that reach each pixel.
    Masked,
}

impl From<AvgMode> for AverageMode {
    fn from(m: AvgMode) -> Self {
        match m {
            AvgMode::Paper => AverageMode::Uniform,
            AvgMode::Masked => AverageMode::Masked,
        }
    }
}

#[derive(clap::Args, Debug, Default)]
pub struct RenderArgs {
    /// Dataset directory (view_<v>.png, disp_<v>.pfm, conf_<v>.pfm).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Target angular position.
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Angular radius; detected from the files when omitted.
    #[arg(long)]
    pub radius: Option<usize>,
    /// TOML file with defaults for the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of disparity layers [default: 16].
    #[arg(long)]
    pub layers: Option<usize>,
    /// Fine and coarse superpixel sizes [default: 100,400].
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub sp_sizes: Option<Vec<usize>>,
    /// Multi-reference averaging [default: masked].
    #[arg(long, value_enum)]
    pub avg_mode: Option<AvgMode>,
    /// Dilation window (odd, >= 3) [default: 3].
    #[arg(long)]
    pub window: Option<usize>,
    /// Confidence threshold for superpixel medians [default: 0.5].
    #[arg(long)]
    pub conf_threshold: Option<f64>,
    /// Scene name recorded in the manifest [default: dataset directory name].
    #[arg(long)]
    pub scene: Option<String>,
    /// Ground-truth target image, exported alongside the features.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Also export square training patches of this size (needs --ground-truth).
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Patch stride [default: 64].
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    /// Render output directories (each with a manifest.json).
    #[arg(long, num_args = 1.., required = true)]
    pub rendered: Vec<PathBuf>,
    /// Directory holding gt_<t>.png and optionally gt_mask_<t>.png.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Settings readable from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderFileConfig {
    pub layers: Option<usize>,
    pub sp_sizes: Option<Vec<usize>>,
    pub avg_mode: Option<AvgMode>,
    pub window: Option<usize>,
    pub conf_threshold: Option<f64>,
    pub patch_size: Option<usize>,
    pub stride: Option<usize>,
}

pub fn gt_view_path(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("gt_{t}.png"))
}

pub fn gt_mask_path(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("gt_mask_{t}.png"))
}

/// Extension ratio `|t| / M` (just `|t|` for a single-view dataset).
pub fn alpha(t: f64, radius: usize) -> f64 {
    t.abs() / radius.max(1) as f64
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = match (&args.scene, args.random) {
        (Some(path), _) => SceneSpec::load(path).with_context(|| format!("reading scene {}", path.display()))?,
        (None, Some(seed)) => random_scene(
            seed,
            &RandomSceneConfig {
                radius: args.radius,
                ..RandomSceneConfig::default()
            },
        ),
        (None, None) => bail!(Error::InvalidArgument("--scene or --random is required".into())),
    };
    let dataset = generate_lightfield(&spec, args.radius)?;
    dataset.save(&args.out)?;
    spec.save(args.out.join("scene.json"))?;
    for &t in &args.gt {
        let o = oracle_render(&spec, t);
        save_image(&o.image, gt_view_path(&args.out, t), BitDepth::Eight)?;
        save_mask(&o.mask, gt_mask_path(&args.out, t))?;
    }
    Ok(())
}

fn resolve_config(args: &RenderArgs) -> anyhow::Result<(RenderConfig, Option<(usize, usize)>)> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<RenderFileConfig>(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RenderFileConfig::default(),
    };
    let d = RenderConfig::default();
    let sizes = args.sp_sizes.clone().or(file.sp_sizes).unwrap_or(d.sp_sizes.to_vec());
    let sp_sizes: [usize; 2] = sizes
        .try_into()
        .map_err(|s: Vec<usize>| Error::InvalidArgument(format!("expected two superpixel sizes, got {}", s.len())))?;
    let cfg = RenderConfig {
        layers: args.layers.or(file.layers).unwrap_or(d.layers),
        sp_sizes,
        avg_mode: args.avg_mode.or(file.avg_mode).map(Into::into).unwrap_or(d.avg_mode),
        window: args.window.or(file.window).unwrap_or(d.window),
        conf_threshold: args.conf_threshold.or(file.conf_threshold).unwrap_or(d.conf_threshold),
        max_iters: None,
    };
    if cfg.layers == 0 || cfg.layers > 255 {
        bail!(Error::InvalidLayerCount(cfg.layers));
    }
    let patches = args.patch_size.or(file.patch_size).map(|size| {
        let stride = args.stride.or(file.stride).unwrap_or(DEFAULT_STRIDE);
        (size, stride)
    });
    Ok((cfg, patches))
}

pub fn cmd_render(args: &RenderArgs) -> anyhow::Result<()> {
    let (cfg, patches) = resolve_config(args)?;
    let radius = match args.radius {
        Some(r) => r,
        None => detect_radius(&args.dataset)
            .ok_or_else(|| Error::MissingFile(crate::io::view_path(&args.dataset, 0)))?,
    };
    let dataset = Dataset::load(&args.dataset, radius)?;
    let scene = match &args.scene {
        Some(s) => s.clone(),
        None => scene_name(&args.dataset),
    };
    let gt = args.ground_truth.as_ref().map(load_image).transpose()?;
    if patches.is_some() && gt.is_none() {
        bail!(Error::InvalidArgument("--patch-size needs --ground-truth".into()));
    }

    let t = args.t;
    let out = render_target(&dataset, t, &cfg)?;
    let (baseline, baseline_mask) = baseline_render(&dataset, t)?;

    let dir = &args.out;
    fs::create_dir_all(dir)?;
    let img16 = |img: &crate::raster::Image, name: &str| save_image(img, dir.join(name), BitDepth::Sixteen);
    img16(&out.vd, "vd.png")?;
    save_mask(&out.vd_mask, dir.join("vd_mask.png"))?;
    for (k, sp) in out.superpixel.iter().enumerate() {
        img16(&sp.image, &format!("vsp{}.png", k + 1))?;
        save_mask(&sp.mask, dir.join(format!("vsp{}_mask.png", k + 1)))?;
        write_disparity(&sp.disparity, dir.join(format!("sp{}_disparity.pfm", k + 1)))?;
    }
    write_disparity(&out.target_disparity, dir.join("wt.pfm"))?;
    save_mask(&out.target_mask, dir.join("wt_mask.png"))?;
    save_labels(&out.labels, dir.join("labels.png"))?;
    save_labels(&out.filled.labels, dir.join("labels_filled.png"))?;
    save_labels_visual(&out.filled.labels, dir.join("labels_filled_vis.png"))?;
    save_mask(&out.features.gap_mask, dir.join("gap_mask.png"))?;
    img16(&out.completed, "completed.png")?;
    img16(&baseline, "baseline.png")?;
    save_mask(&baseline_mask, dir.join("baseline_mask.png"))?;

    write_tensor(&out.features.to_tensor(), dir.join("features.lft"))?;
    write_tensor(&Tensor::from_image(&out.features.base), dir.join("vd.lft"))?;
    write_tensor(&Tensor::from_mask(&out.features.gap_mask), dir.join("gap_mask.lft"))?;
    let alpha = alpha(t, radius);
    let mut entries = vec![ManifestEntry {
        tensor: "features.lft".into(),
        ground_truth: None,
        vd: "vd.lft".into(),
        scene: scene.clone(),
        t,
        alpha,
        gap_mask: Some("gap_mask.lft".into()),
        origin: None,
    }];
    if let Some(gt) = &gt {
        write_tensor(&Tensor::from_image(&gt.to_rgb()), dir.join("gt.lft"))?;
        entries[0].ground_truth = Some("gt.lft".into());
    }
    if let (Some((size, stride)), Some(gt)) = (patches, &gt) {
        let pdir = dir.join("patches");
        fs::create_dir_all(&pdir)?;
        for p in extract_patches(&out.features, &gt.to_rgb(), size, stride)? {
            let stem = format!("patches/p_{}_{}", p.y, p.x);
            write_tensor(&p.features.to_tensor(), dir.join(format!("{stem}_features.lft")))?;
            write_tensor(&Tensor::from_image(&p.base), dir.join(format!("{stem}_vd.lft")))?;
            write_tensor(&Tensor::from_image(&p.ground_truth), dir.join(format!("{stem}_gt.lft")))?;
            write_tensor(&Tensor::from_mask(&p.features.gap_mask), dir.join(format!("{stem}_gap.lft")))?;
            entries.push(ManifestEntry {
                tensor: format!("{stem}_features.lft"),
                ground_truth: Some(format!("{stem}_gt.lft")),
                vd: format!("{stem}_vd.lft"),
                scene: scene.clone(),
                t,
                alpha,
                gap_mask: Some(format!("{stem}_gap.lft")),
                origin: Some([p.x, p.y]),
            });
        }
    }
    Manifest { entries }.save(dir.join("manifest.json"))?;
    Ok(())
}

fn scene_name(dataset: &Path) -> String {
    if let Ok(spec) = SceneSpec::load(dataset.join("scene.json")) {
        if let Some(name) = spec.name {
            return name;
        }
    }
    dataset
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "scene".into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub scene: String,
    pub t: f64,
    pub alpha: f64,
    pub method: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn evaluate(rendered: &[PathBuf], ground_truth: &Path) -> anyhow::Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for dir in rendered {
        let manifest = Manifest::load(dir.join("manifest.json"))?;
        let entry = manifest
            .entries
            .iter()
            .find(|e| e.origin.is_none())
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no full-frame manifest entry", dir.display())))?;
        let gt = load_image(gt_view_path(ground_truth, entry.t))?.to_rgb();
        let mask_path = gt_mask_path(ground_truth, entry.t);
        let mask = if mask_path.is_file() { Some(load_mask(mask_path)?) } else { None };
        for (method, file) in EVAL_METHODS {
            let path = dir.join(file);
            if !path.is_file() {
                continue;
            }
            let img = load_image(&path)?.to_rgb();
            rows.push(EvalRow {
                scene: entry.scene.clone(),
                t: entry.t,
                alpha: entry.alpha,
                method: method.into(),
                psnr_db: psnr(&img, &gt, mask.as_ref())?,
                ssim: ssim(&img, &gt)?,
            });
        }
    }
    // stable: methods keep their listed order within a (scene, alpha, t) group
    rows.sort_by(|a, b| {
        a.scene
            .cmp(&b.scene)
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.t.total_cmp(&b.t))
    });
    Ok(rows)
}

pub fn eval_csv(rows: &[EvalRow]) -> anyhow::Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(EVAL_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.scene.clone(),
            format!("{}", r.t),
            format!("{:.4}", r.alpha),
            r.method.clone(),
            format!("{:.4}", r.psnr_db),
            format!("{:.6}", r.ssim),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let text = eval_csv(&evaluate(&args.rendered, &args.ground_truth)?)?;
    match &args.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Render(a) => cmd_render(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DEFAULT_PATCH;

    #[test]
    fn config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "layers = 8\nwindow = 5\navg_mode = \"paper\"\n").unwrap();
        let args = RenderArgs {
            config: Some(path.clone()),
            layers: Some(4),
            ..RenderArgs::default()
        };
        let (cfg, patches) = resolve_config(&args).unwrap();
        assert_eq!(cfg.layers, 4);
        assert_eq!(cfg.window, 5);
        assert_eq!(cfg.avg_mode, AverageMode::Uniform);
        assert_eq!(cfg.sp_sizes, [100, 400]);
        assert!(patches.is_none());

        fs::write(&path, "bogus = 1\n").unwrap();
        assert!(resolve_config(&args).is_err());
    }

    #[test]
    fn patch_defaults() {
        let args = RenderArgs {
            patch_size: Some(DEFAULT_PATCH),
            ..RenderArgs::default()
        };
        assert_eq!(resolve_config(&args).unwrap().1, Some((128, 64)));
    }

    #[test]
    fn sp_sizes_must_be_pair() {
        let args = RenderArgs {
            sp_sizes: Some(vec![100]),
            ..RenderArgs::default()
        };
        assert!(resolve_config(&args).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["lfx", "render", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["lfx"]), EXIT_USAGE);
        assert_eq!(run(["lfx", "--help"]), EXIT_OK);
    }

    #[test]
    fn alpha_ratio() {
        assert_eq!(alpha(-30.0, 4), 7.5);
        assert_eq!(alpha(3.0, 0), 3.0);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![EvalRow {
            scene: "a,b".into(),
            t: 20.0,
            alpha: 5.0,
            method: "vd".into(),
            psnr_db: 99.0,
            ssim: 1.0,
        }];
        let text = eval_csv(&rows).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(EVAL_HEADER));
        assert_eq!(lines.next(), Some("\"a,b\",20,5.0000,vd,99.0000,1.000000"));
    }
}
