use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use persyn::ann::QueryBudget;
use persyn::neighborhood::PatchSpec;
use persyn::pipeline::SynthesisMode;
use persyn::{OptimizerConfig, SearchMethod};

#[derive(Debug, Parser)]
#[command(name = "persyn", version, about = "Perspective-aware example-based texture synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a texture from an exemplar.
    Synth(SynthArgs),
    /// Write the scale map for a view as PSM1 plus a grayscale preview.
    Scalemap(ScalemapArgs),
    /// Time the three synthesis modes over several sizes and seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    /// Slant in degrees, [0, 90).
    #[arg(long, value_parser = parse_sigma)]
    pub sigma: f64,
    /// Tilt in degrees, [0, 360).
    #[arg(long, value_parser = parse_tau)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Exemplar image (PNG or PPM).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub view: ViewArgs,
    /// Output size as WxH.
    #[arg(long, value_parser = parse_size)]
    pub out_size: (usize, usize),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output image (PNG or PPM, by extension).
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Energy trace path, one JSON record per line.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Directory receiving exemplar and output scale maps.
    #[arg(long)]
    pub emit_scalemaps: Option<PathBuf>,
    #[command(flatten)]
    pub opt: OptimizerArgs,
}

#[derive(Debug, Args)]
pub struct ScalemapArgs {
    /// Map size as WxH.
    #[arg(long, value_parser = parse_size)]
    pub size: (usize, usize),
    #[command(flatten)]
    pub view: ViewArgs,
    /// PSM1 output path.
    #[arg(long)]
    pub out: PathBuf,
    /// PNG preview path; defaults to the output path with a .png extension.
    #[arg(long)]
    pub preview: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 30.0, value_parser = parse_sigma)]
    pub sigma: f64,
    #[arg(long, default_value_t = 18.0, value_parser = parse_tau)]
    pub tau: f64,
    /// Comma-separated WxH sizes.
    #[arg(long, value_delimiter = ',', value_parser = parse_size, default_value = "128x128")]
    pub sizes: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// First seed; repetition i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of pixel+brute, pixel+tree, patch+tree+pca.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    pub modes: Vec<SynthesisMode>,
    /// CSV of per-cell mean and standard deviation; stdout when neither output is given.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON with cells and every individual run.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub opt: OptimizerArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchArg {
    Brute,
    Tree,
    TreePca,
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    /// Pyramid levels.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=8))]
    pub levels: u64,
    /// Robust exponent, (0, 2).
    #[arg(long, default_value_t = 0.8)]
    pub r: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iterations: usize,
    /// Stop when fewer than this fraction of anchors change.
    #[arg(long, default_value_t = 0.01)]
    pub convergence: f64,
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
    /// Disable histogram-matching reweighting.
    #[arg(long)]
    pub no_histogram: bool,
    #[arg(long, default_value_t = 1.0 / 255.0)]
    pub active_tolerance: f64,
    /// Neighborhood width.
    #[arg(long, default_value_t = 8)]
    pub nbhd_width: usize,
    /// Anchor spacing.
    #[arg(long, default_value_t = 2)]
    pub spacing: usize,
    /// Update patch width.
    #[arg(long, default_value_t = 2)]
    pub patch_width: usize,
    #[arg(long, value_enum, default_value_t = SearchArg::TreePca)]
    pub search: SearchArg,
    /// greedy, exact, or backtrack:N.
    #[arg(long, default_value = "backtrack:4", value_parser = parse_budget)]
    pub budget: QueryBudget,
    /// PCA retained-variance target, (0, 1].
    #[arg(long, default_value_t = 0.95)]
    pub variance: f64,
    /// Tree branching factor.
    #[arg(long, default_value_t = 4)]
    pub branching: usize,
}

impl OptimizerArgs {
    pub fn to_config(&self) -> Result<OptimizerConfig, String> {
        let mut cfg = OptimizerConfig {
            r: self.r,
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            convergence_fraction: self.convergence,
            histogram_bins: self.bins,
            histogram_matching: !self.no_histogram,
            active_tolerance: self.active_tolerance,
            patch: PatchSpec::new(self.patch_width),
            nbhd_width: self.nbhd_width,
            spacing: self.spacing,
            ..OptimizerConfig::default()
        };
        cfg.search.method = match self.search {
            SearchArg::Brute => SearchMethod::Brute,
            SearchArg::Tree => SearchMethod::Tree { pca: false },
            SearchArg::TreePca => SearchMethod::Tree { pca: true },
        };
        cfg.search.budget = self.budget;
        cfg.search.branching = self.branching;
        cfg.search.leaf_threshold = self.branching;
        cfg.search.variance_target = self.variance;
        if !(self.variance > 0.0 && self.variance <= 1.0) {
            return Err(format!("--variance {} must lie in (0, 1]", self.variance));
        }
        if self.branching < 2 {
            return Err(format!("--branching {} must be at least 2", self.branching));
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err(format!("size {s:?} has a zero side"));
    }
    Ok((w, h))
}

fn parse_angle(s: &str, hi: f64, what: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{what} {s:?} is not a number"))?;
    if !(v >= 0.0 && v < hi) {
        return Err(format!("{what} {v} must lie in [0, {hi}) degrees"));
    }
    Ok(v)
}

fn parse_sigma(s: &str) -> Result<f64, String> {
    parse_angle(s, 90.0, "slant")
}

fn parse_tau(s: &str) -> Result<f64, String> {
    parse_angle(s, 360.0, "tilt")
}

fn parse_mode(s: &str) -> Result<SynthesisMode, String> {
    SynthesisMode::from_name(s.trim()).ok_or_else(|| {
        format!("unknown mode {s:?}; expected pixel+brute, pixel+tree, or patch+tree+pca")
    })
}

fn parse_budget(s: &str) -> Result<QueryBudget, String> {
    match s.trim() {
        "greedy" => Ok(QueryBudget::Greedy),
        "exact" => Ok(QueryBudget::Exact),
        other => {
            let n = other
                .strip_prefix("backtrack:")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("budget {s:?}: expected greedy, exact, or backtrack:N with N > 0"))?;
            Ok(QueryBudget::Backtrack { max_leaves: n })
        }
    }
}
