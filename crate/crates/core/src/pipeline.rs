//! End-to-end synthesis: scale maps, scale-matched initialization, and
//! coarse-to-fine optimization.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ann::{QueryBudget, SearchIndex, SearchMethod};
use crate::error::{Error, Result};
use crate::neighborhood::{extract_all, GridSpec, PatchSpec};
use crate::optimizer::{optimize_level, EnergyTrace, OptimizerConfig};
use crate::raster::{attach_scale_channel, Channel, RasterImage, RgbsImage};
use crate::scalar::Scalar;
use crate::scale_map::{compute_scale_map, ScaleMap, ViewAngles};

/// Scale tolerance for matching output pixels to exemplar pixels.
pub const SCALE_MATCH_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SynthesisRequest<T> {
    pub exemplar: RasterImage<T>,
    pub view: ViewAngles<T>,
    pub out_width: usize,
    pub out_height: usize,
    pub cfg: OptimizerConfig,
    pub levels: usize,
    pub seed: u64,
}

impl<T: Scalar> SynthesisRequest<T> {
    pub fn new(exemplar: RasterImage<T>, view: ViewAngles<T>, out_width: usize, out_height: usize) -> Self {
        SynthesisRequest { exemplar, view, out_width, out_height, cfg: OptimizerConfig::default(), levels: 2, seed: 0 }
    }
}

/// Inputs prepared for one resolution level.
#[derive(Debug, Clone)]
pub struct LevelPlan<T> {
    pub exemplar: RgbsImage<T>,
    pub out_smap: ScaleMap<T>,
}

impl<T: Scalar> LevelPlan<T> {
    pub fn out_width(&self) -> usize {
        self.out_smap.width()
    }

    pub fn out_height(&self) -> usize {
        self.out_smap.height()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub width: usize,
    pub height: usize,
    pub exemplar_width: usize,
    pub exemplar_height: usize,
    pub candidates: usize,
    pub search_dim: usize,
    pub millis: f64,
    pub trace: EnergyTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub sigma: f64,
    pub tau: f64,
    pub out_width: usize,
    pub out_height: usize,
    pub levels: usize,
    pub seed: u64,
    pub r: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub convergence_fraction: f64,
    pub histogram_matching: bool,
    pub histogram_bins: usize,
    pub histogram_channels: Vec<&'static str>,
    pub active_tolerance: f64,
    pub nbhd_width: usize,
    pub spacing: usize,
    pub patch_width: usize,
    pub search: String,
    pub budget: String,
    pub variance_target: f64,
}

impl ConfigEcho {
    fn of<T: Scalar>(req: &SynthesisRequest<T>) -> Self {
        let cfg = &req.cfg;
        ConfigEcho {
            sigma: req.view.sigma().as_f64(),
            tau: req.view.tau().as_f64(),
            out_width: req.out_width,
            out_height: req.out_height,
            levels: req.levels,
            seed: req.seed,
            r: cfg.r,
            epsilon: cfg.epsilon,
            max_iterations: cfg.max_iterations,
            convergence_fraction: cfg.convergence_fraction,
            histogram_matching: cfg.histogram_matching,
            histogram_bins: cfg.histogram_bins,
            histogram_channels: cfg.histogram_channels.iter().map(|c| c.name()).collect(),
            active_tolerance: cfg.active_tolerance,
            nbhd_width: cfg.nbhd_width,
            spacing: cfg.spacing,
            patch_width: cfg.patch.patch_width,
            search: method_name(cfg.search.method).to_string(),
            budget: match cfg.search.budget {
                QueryBudget::Greedy => "greedy".to_string(),
                QueryBudget::Backtrack { max_leaves } => format!("backtrack({max_leaves})"),
                QueryBudget::Exact => "exact".to_string(),
            },
            variance_target: cfg.search.variance_target,
        }
    }
}

fn method_name(m: SearchMethod) -> &'static str {
    match m {
        SearchMethod::Brute => "brute",
        SearchMethod::Tree { pca: false } => "tree",
        SearchMethod::Tree { pca: true } => "tree+pca",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub levels: Vec<LevelReport>,
    /// Scale maps and initialization.
    pub part1_millis: f64,
    /// Neighborhood extraction, indexing, and optimization.
    pub part2_millis: f64,
    pub total_nn_calls: usize,
    pub config: ConfigEcho,
}

impl SynthesisReport {
    pub fn final_energy(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.trace.final_energy())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Seeds an output of `out_smap`'s size by copying, per pixel, an exemplar
/// pixel of matching scale: uniformly among those within tolerance, else
/// the nearest in scale. The output S plane is `out_smap` normalized.
pub fn initialize_output<T: Scalar, R: Rng>(
    exemplar: &RgbsImage<T>,
    out_smap: &ScaleMap<T>,
    rng: &mut R,
) -> Result<RgbsImage<T>> {
    let b = out_smap.bounds();
    let scales: Vec<f64> = exemplar
        .scale_plane()
        .iter()
        .map(|s| if b.s_max > b.s_min { (b.s_min + *s * b.s_delta).as_f64() } else { b.s_max.as_f64() })
        .collect();
    let mut order: Vec<usize> = (0..scales.len()).collect();
    order.sort_by(|&i, &j| scales[i].total_cmp(&scales[j]).then(i.cmp(&j)));
    let sorted: Vec<f64> = order.iter().map(|&i| scales[i]).collect();

    let n = out_smap.width() * out_smap.height();
    let mut picks = Vec::with_capacity(n);
    for s in out_smap.values() {
        let s = s.as_f64();
        let lo = sorted.partition_point(|v| *v < s - SCALE_MATCH_TOLERANCE);
        let hi = sorted.partition_point(|v| *v <= s + SCALE_MATCH_TOLERANCE);
        let pick = if hi > lo {
            order[rng.gen_range(lo..hi)]
        } else {
            // first entry of each equal-scale run carries its lowest index
            let run_start = |k: usize| sorted.partition_point(|v| *v < sorted[k]);
            let below = (lo > 0).then(|| order[run_start(lo - 1)]);
            let above = (lo < sorted.len()).then(|| order[lo]);
            match (below, above) {
                (Some(a), Some(c)) => {
                    let (da, dc) = ((s - scales[a]).abs(), (scales[c] - s).abs());
                    if da < dc || (da == dc && a < c) {
                        a
                    } else {
                        c
                    }
                }
                (Some(a), None) => a,
                (None, Some(c)) => c,
                (None, None) => return Err(Error::domain("exemplar has no pixels")),
            }
        };
        picks.push(pick);
    }
    let src = exemplar.base();
    let planes = Channel::RGB.map(|ch| {
        let p = src.plane(ch);
        picks.iter().map(|&i| p[i]).collect::<Vec<T>>()
    });
    let base = RasterImage::new(out_smap.width(), out_smap.height(), planes)?;
    RgbsImage::new(base, out_smap.normalized_values())
}

fn check_request<T: Scalar>(req: &SynthesisRequest<T>) -> Result<()> {
    req.cfg.validate()?;
    if req.levels == 0 {
        return Err(Error::domain("at least one level is required"));
    }
    let w = req.cfg.nbhd_width;
    let f = 1usize.checked_shl((req.levels - 1) as u32).unwrap_or(usize::MAX);
    let (ew, eh) = (req.exemplar.width() / f, req.exemplar.height() / f);
    let (ow, oh) = (req.out_width / f, req.out_height / f);
    if ew < w || eh < w {
        return Err(Error::domain(format!(
            "exemplar {}x{} is too small for {} levels of {w}x{w} neighborhoods",
            req.exemplar.width(),
            req.exemplar.height(),
            req.levels
        )));
    }
    if ow < w || oh < w {
        return Err(Error::domain(format!(
            "output {}x{} is too small for {} levels of {w}x{w} neighborhoods",
            req.out_width, req.out_height, req.levels
        )));
    }
    Ok(())
}

/// Exemplars and output scale maps for every level, coarsest first.
pub fn plan_levels<T: Scalar>(req: &SynthesisRequest<T>) -> Result<Vec<LevelPlan<T>>> {
    check_request(req)?;
    (0..req.levels)
        .map(|l| {
            let f = 1usize << (req.levels - 1 - l);
            let ex = if f == 1 { req.exemplar.clone() } else { req.exemplar.downsample(f)? };
            let in_smap = compute_scale_map(ex.width(), ex.height(), req.view)?;
            let exemplar = attach_scale_channel(&ex, &in_smap)?;
            let out_smap = compute_scale_map(req.out_width / f, req.out_height / f, req.view)?;
            Ok(LevelPlan { exemplar, out_smap })
        })
        .collect()
}

/// Runs the full procedure and returns the RGB result.
pub fn synthesize<T: Scalar>(req: &SynthesisRequest<T>) -> Result<(RasterImage<T>, SynthesisReport)> {
    let (img, report) = synthesize_rgbs(req)?;
    Ok((img.into_base(), report))
}

/// As [`synthesize`], keeping the final S plane.
pub fn synthesize_rgbs<T: Scalar>(req: &SynthesisRequest<T>) -> Result<(RgbsImage<T>, SynthesisReport)> {
    let part1 = Instant::now();
    let plans = plan_levels(req)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut current = initialize_output(&plans[0].exemplar, &plans[0].out_smap, &mut rng)?;
    let part1_millis = part1.elapsed().as_secs_f64() * 1e3;

    let part2 = Instant::now();
    let mut levels = Vec::with_capacity(plans.len());
    let mut total_nn_calls = 0;
    for (l, plan) in plans.iter().enumerate() {
        let started = Instant::now();
        if l > 0 {
            current = current
                .resize_bilinear(plan.out_width(), plan.out_height())?
                .with_scale_plane(plan.out_smap.normalized_values())?;
        }
        let mut cfg = req.cfg.clone();
        cfg.seed = req.seed;
        cfg.search.seed = req.seed.wrapping_add(l as u64);
        let input_grid = GridSpec {
            nbhd_width: cfg.nbhd_width,
            spacing: 1,
            image_width: plan.exemplar.width(),
            image_height: plan.exemplar.height(),
        };
        let input = extract_all(&plan.exemplar, &input_grid)?;
        let index = SearchIndex::build(&input, &cfg.search)?;
        let (next, trace) = optimize_level(current, &plan.exemplar, &input, &index, &cfg)?;
        current = next;
        total_nn_calls += trace.nn_calls();
        levels.push(LevelReport {
            width: plan.out_width(),
            height: plan.out_height(),
            exemplar_width: plan.exemplar.width(),
            exemplar_height: plan.exemplar.height(),
            candidates: input.len(),
            search_dim: index.search_dim(),
            millis: started.elapsed().as_secs_f64() * 1e3,
            trace,
        });
    }
    let part2_millis = part2.elapsed().as_secs_f64() * 1e3;
    let report = SynthesisReport { levels, part1_millis, part2_millis, total_nn_calls, config: ConfigEcho::of(req) };
    Ok((current, report))
}

/// A scheduling and search combination to compare.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisMode {
    pub name: &'static str,
    pub patch_width: usize,
    pub method: SearchMethod,
}

impl SynthesisMode {
    pub const PIXEL_BRUTE: SynthesisMode =
        SynthesisMode { name: "pixel+brute", patch_width: 1, method: SearchMethod::Brute };
    pub const PIXEL_TREE: SynthesisMode =
        SynthesisMode { name: "pixel+tree", patch_width: 1, method: SearchMethod::Tree { pca: false } };
    pub const PATCH_TREE_PCA: SynthesisMode =
        SynthesisMode { name: "patch+tree+pca", patch_width: 2, method: SearchMethod::Tree { pca: true } };

    pub fn all() -> [SynthesisMode; 3] {
        [Self::PIXEL_BRUTE, Self::PIXEL_TREE, Self::PATCH_TREE_PCA]
    }

    pub fn from_name(name: &str) -> Option<SynthesisMode> {
        Self::all().into_iter().find(|m| m.name == name)
    }

    pub fn apply(&self, cfg: &mut OptimizerConfig) {
        cfg.patch = PatchSpec::new(self.patch_width);
        cfg.search.method = self.method;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeResult {
    pub mode: &'static str,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub wall_millis: f64,
    pub part1_millis: f64,
    pub part2_millis: f64,
    pub nn_calls: usize,
    pub points_scanned: u64,
    pub final_energy: f64,
}

/// Runs `req` once per mode with identical seeds.
pub fn compare_modes<T: Scalar>(req: &SynthesisRequest<T>, modes: &[SynthesisMode]) -> Result<Vec<ModeResult>> {
    if modes.is_empty() {
        return Err(Error::domain("no modes to compare"));
    }
    modes
        .iter()
        .map(|mode| {
            let mut r = req.clone();
            mode.apply(&mut r.cfg);
            let started = Instant::now();
            let (_, report) = synthesize(&r)?;
            Ok(ModeResult {
                mode: mode.name,
                width: r.out_width,
                height: r.out_height,
                seed: r.seed,
                wall_millis: started.elapsed().as_secs_f64() * 1e3,
                part1_millis: report.part1_millis,
                part2_millis: report.part2_millis,
                nn_calls: report.total_nn_calls,
                points_scanned: report.levels.iter().map(|l| l.trace.points_scanned).sum(),
                final_energy: report.final_energy(),
            })
        })
        .collect()
}

pub fn mode_results_csv(rows: &[ModeResult]) -> String {
    let mut out = String::from("mode,width,height,seed,wall_millis,part1_millis,part2_millis,nn_calls,points_scanned,final_energy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{},{},{:.6}\n",
            r.mode, r.width, r.height, r.seed, r.wall_millis, r.part1_millis, r.part2_millis, r.nn_calls,
            r.points_scanned, r.final_energy
        ));
    }
    out
}

/// Mean and sample standard deviation of timings per (size, mode) cell.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub mode: &'static str,
    pub width: usize,
    pub height: usize,
    pub reps: usize,
    pub mean_millis: f64,
    pub stddev_millis: f64,
    pub mean_part2_millis: f64,
    pub mean_nn_calls: f64,
}

/// Repeats [`compare_modes`] over sizes and `reps` consecutive seeds
/// starting at `req.seed`, running every repetition sequentially.
pub fn benchmark<T: Scalar>(
    req: &SynthesisRequest<T>,
    sizes: &[(usize, usize)],
    modes: &[SynthesisMode],
    reps: usize,
) -> Result<(Vec<BenchCell>, Vec<ModeResult>)> {
    if reps == 0 {
        return Err(Error::domain("at least one repetition is required"));
    }
    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for &(w, h) in sizes {
        let mut per_mode: Vec<Vec<ModeResult>> = vec![Vec::new(); modes.len()];
        for rep in 0..reps {
            let mut r = req.clone();
            r.out_width = w;
            r.out_height = h;
            r.seed = req.seed.wrapping_add(rep as u64);
            for (k, res) in compare_modes(&r, modes)?.into_iter().enumerate() {
                per_mode[k].push(res);
            }
        }
        for (mode, rows) in modes.iter().zip(per_mode) {
            let times: Vec<f64> = rows.iter().map(|r| r.wall_millis).collect();
            let (mean, sd) = mean_and_sd(&times);
            cells.push(BenchCell {
                mode: mode.name,
                width: w,
                height: h,
                reps,
                mean_millis: mean,
                stddev_millis: sd,
                mean_part2_millis: rows.iter().map(|r| r.part2_millis).sum::<f64>() / reps as f64,
                mean_nn_calls: rows.iter().map(|r| r.nn_calls as f64).sum::<f64>() / reps as f64,
            });
            runs.extend(rows);
        }
    }
    Ok((cells, runs))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn bench_csv(cells: &[BenchCell]) -> String {
    let mut out = String::from("mode,width,height,reps,mean_millis,stddev_millis,mean_part2_millis,mean_nn_calls\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.1}\n",
            c.mode, c.width, c.height, c.reps, c.mean_millis, c.stddev_millis, c.mean_part2_millis, c.mean_nn_calls
        ));
    }
    out
}
