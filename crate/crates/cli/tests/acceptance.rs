use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use persyn::ann::{brute_force_nearest, build_tree, fit_pca, QueryBudget, QueryStats};
use persyn::io::load_image;
use persyn::neighborhood::{extract_all, sparse_grid_anchors, SparseGrid};
use persyn::optimizer::{quadratic_energy, update_step};
use persyn::pipeline::{compare_modes, synthesize_rgbs, ModeResult, SynthesisMode};
use persyn::{
    attach_scale_channel, compute_scale_map, containing_anchors, Channel, GridSpec, OptimizerConfig,
    PatchSpec, RasterImage, RgbsImage, SynthesisRequest, Tile, ViewAngles,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn load(name: &str) -> RasterImage<f64> {
    load_image(data(name)).expect("test exemplar loads")
}

fn tilted_view() -> ViewAngles<f64> {
    ViewAngles::new(30.0, 18.0).unwrap()
}

fn scale_map_correctness() -> Check {
    let started = Instant::now();
    let m = compute_scale_map(105, 105, tilted_view()).map_err(|e| e.to_string())?;
    let (lo, hi) = (0.866025 - 1e-6, 1.154701 + 1e-6);
    let bad = m.values().iter().filter(|v| !(lo..=hi).contains(*v)).count();
    ensure(bad == 0, || format!("{bad} values outside [0.866025, 1.154701]"))?;
    let (dx, dy) = (18f64.to_radians().sin(), 18f64.to_radians().cos());
    let mut order: Vec<(f64, f64)> = (0..105)
        .flat_map(|y| (0..105).map(move |x| (x, y)))
        .map(|(x, y)| (x as f64 * dx + y as f64 * dy, m.get(x, y)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rises = order.windows(2).filter(|w| w[1].1 > w[0].1 + 1e-12).count();
    ensure(rises == 0, || format!("{rises} increases along the tilt direction"))?;
    let flat = compute_scale_map(105, 105, ViewAngles::new(0.0, 18.0).unwrap()).map_err(|e| e.to_string())?;
    ensure(flat.values().iter().all(|v| *v == 1.0), || "sigma = 0 map is not all ones".into())?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.3} s"))?;
    Ok(format!("range [{:.6}, {:.6}], {secs:.3} s", m.min_value(), m.max_value()))
}

fn containing_by_scan(tile: Tile, spec: &GridSpec) -> usize {
    let w = spec.nbhd_width;
    sparse_grid_anchors(spec)
        .unwrap()
        .iter()
        .filter(|a| tile.pixels().all(|p| p.x >= a.x && p.x < a.x + w && p.y >= a.y && p.y < a.y + w))
        .count()
}

fn window_counts() -> Check {
    let spec = GridSpec { nbhd_width: 8, spacing: 2, image_width: 64, image_height: 64 };
    let lattice = SparseGrid::new(spec).map_err(|e| e.to_string())?;
    let phase = PatchSpec::new(2).centered_phase(&spec);
    let pixel = Tile { x: 31, y: 30, size: 1 };
    let patch = Tile { x: 32 + phase, y: 32 + phase, size: 2 };
    let counts = [
        containing_anchors(pixel, &spec).map_err(|e| e.to_string())?.len(),
        lattice.containing(pixel).len(),
        containing_by_scan(pixel, &spec),
        containing_anchors(patch, &spec).map_err(|e| e.to_string())?.len(),
        lattice.containing(patch).len(),
        containing_by_scan(patch, &spec),
    ];
    ensure(counts == [16, 16, 16, 9, 9, 9], || format!("counts {counts:?}"))?;
    Ok("pixel 16, 2x2 patch 9 (closed form and enumeration)".into())
}

fn ann_exactness() -> Check {
    let started = Instant::now();
    let (n, dim) = (1000, 20);
    let mut agree = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let points: Vec<f64> = (0..n * dim).map(|_| rng.gen()).collect();
        let tree = build_tree(&points, dim, 4, 4, seed).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let q: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
            let mut stats = QueryStats::default();
            let got = tree.query(&points, &q, QueryBudget::Exact, &mut stats).map_err(|e| e.to_string())?;
            if got == brute_force_nearest(&points, dim, &q).map_err(|e| e.to_string())? {
                agree += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(agree == 1000, || format!("{agree}/1000 queries agree"))?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("1000/1000 agree, {secs:.2} s"))
}

fn pca_band() -> Check {
    let ex = load("wood_105.png");
    let smap = compute_scale_map(ex.width(), ex.height(), tilted_view()).map_err(|e| e.to_string())?;
    let rgbs = attach_scale_channel(&ex, &smap).map_err(|e| e.to_string())?;
    let grid = GridSpec { nbhd_width: 8, spacing: 1, image_width: ex.width(), image_height: ex.height() };
    let rows = extract_all(&rgbs, &grid).map_err(|e| e.to_string())?;
    let model = fit_pca(&rows, 0.95).map_err(|e| e.to_string())?;
    let d = model.retained_dim();
    ensure((10..=64).contains(&d), || format!("retained dimension {d}"))?;

    let dim = rows.dim();
    let mut mean = vec![0.0; dim];
    for r in rows.rows() {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    let (mut total, mut residual) = (0.0, 0.0);
    for r in rows.rows() {
        let back = model.reconstruct(&model.project(r).map_err(|e| e.to_string())?);
        total += r.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>();
        residual += r.iter().zip(&back).map(|(v, b)| (v - b) * (v - b)).sum::<f64>();
    }
    let recon = 1.0 - residual / total;
    let eig = model.explained_ratio();
    ensure(recon >= 0.95, || format!("reconstruction keeps {recon:.6} of the variance"))?;
    ensure((recon - eig).abs() <= 1e-6, || format!("reconstruction {recon:.9} vs eigenvalues {eig:.9}"))?;
    Ok(format!("dimension {d} of {dim}, retained variance {recon:.6}"))
}

fn energy_monotonicity() -> Check {
    let started = Instant::now();
    let ex = load("wood_64.png");
    let mut req = SynthesisRequest::new(ex, tilted_view(), 64, 64);
    req.levels = 1;
    req.seed = 7;
    req.cfg = OptimizerConfig { convergence_fraction: 1e-9, ..OptimizerConfig::default() };
    let (_, report) = synthesize_rgbs(&req).map_err(|e| e.to_string())?;
    let trace = &report.levels[0].trace;
    let iters = trace.iterations().len();
    ensure(iters >= 5, || format!("only {iters} iterations"))?;
    let rising = trace.updates.iter().filter(|u| !(u.after < u.before)).count();
    ensure(rising == 0, || format!("{rising} updates did not lower the quadratic energy"))?;
    let e: Vec<f64> = trace.records.iter().map(|r| r.energy).collect();
    let up = e.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-9)).count();
    ensure(up == 0, || format!("robust energy rose {up} times: {e:?}"))?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{iters} iterations, energy {:.3} -> {:.3}, {secs:.2} s", e[0], e[e.len() - 1]))
}

fn random_rgbs(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbsImage<f64> {
    let base = RasterImage::from_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap();
    let s = (0..w * h).map(|_| rng.gen()).collect();
    RgbsImage::new(base, s).unwrap()
}

fn with_sample(img: &RgbsImage<f64>, ch: Channel, i: usize, v: f64) -> RgbsImage<f64> {
    if ch == Channel::S {
        let mut s = img.scale_plane().to_vec();
        s[i] = v;
        return img.clone().with_scale_plane(s).unwrap();
    }
    let base = img.base();
    let mut planes = base.planes().clone();
    planes[ch.index()][i] = v;
    let base = RasterImage::new(base.width(), base.height(), planes).unwrap();
    RgbsImage::new(base, img.scale_plane().to_vec()).unwrap()
}

fn update_optimality() -> Check {
    let mut probes = 0;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let ex = random_rgbs(14, 14, &mut rng);
        let input = extract_all(&ex, &GridSpec { nbhd_width: 8, spacing: 1, image_width: 14, image_height: 14 })
            .map_err(|e| e.to_string())?;
        let grid = SparseGrid::new(GridSpec { nbhd_width: 8, spacing: 2, image_width: 16, image_height: 16 })
            .map_err(|e| e.to_string())?;
        let assign: Vec<usize> = (0..grid.len()).map(|_| rng.gen_range(0..input.len())).collect();
        let weights: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.05..5.0)).collect();
        let mut out = random_rgbs(16, 16, &mut rng);
        update_step(&assign, &weights, &grid, &input, &mut out);
        let best = quadratic_energy(&out, &input, &grid, &assign, &weights);
        for ch in Channel::RGBS {
            for i in 0..16 * 16 {
                let v = out.plane(ch)[i];
                for delta in [1e-3, -1e-3] {
                    if !(0.0..=1.0).contains(&(v + delta)) {
                        continue;
                    }
                    let e = quadratic_energy(&with_sample(&out, ch, i, v + delta), &input, &grid, &assign, &weights);
                    probes += 1;
                    ensure(e >= best, || format!("seed {seed}: perturbing {ch:?}[{i}] by {delta} lowered energy"))?;
                }
            }
        }
    }
    Ok(format!("{probes} single-sample perturbations, none lowered the energy"))
}

fn efficiency_runs() -> Result<Vec<ModeResult>, String> {
    let ex = load("wood_105.png");
    let mut rows = Vec::new();
    for size in [128, 256] {
        let mut req = SynthesisRequest::new(ex.clone(), tilted_view(), size, size);
        req.seed = 7;
        rows.extend(compare_modes(&req, &SynthesisMode::all()).map_err(|e| e.to_string())?);
    }
    Ok(rows)
}

fn find<'a>(rows: &'a [ModeResult], mode: &str, size: usize) -> &'a ModeResult {
    rows.iter().find(|r| r.mode == mode && r.width == size).expect("mode was run")
}

fn efficiency_ordering(rows: &[ModeResult]) -> Check {
    let brute = find(rows, "pixel+brute", 128);
    let ours = find(rows, "patch+tree+pca", 128);
    let speedup = brute.wall_millis / ours.wall_millis;
    ensure(speedup >= 1.5, || format!("speedup {speedup:.2}x at 128x128"))?;
    ensure(ours.nn_calls < brute.nn_calls, || {
        format!("NN calls {} (patch) vs {} (pixel+brute)", ours.nn_calls, brute.nn_calls)
    })?;
    for mode in SynthesisMode::all() {
        let (small, large) = (find(rows, mode.name, 128), find(rows, mode.name, 256));
        ensure(large.wall_millis > small.wall_millis, || {
            format!("{}: 256x256 {:.0} ms not slower than 128x128 {:.0} ms", mode.name, large.wall_millis, small.wall_millis)
        })?;
    }
    let summary: Vec<String> = rows
        .iter()
        .map(|r| format!("{} {}: {:.0} ms / {} calls", r.mode, r.width, r.wall_millis, r.nn_calls))
        .collect();
    Ok(format!("speedup {speedup:.1}x; {}", summary.join("; ")))
}

fn rgb_histograms(img: &RgbsImage<f64>, bins: usize) -> Vec<Vec<f64>> {
    Channel::RGB
        .iter()
        .map(|&c| {
            let plane = img.plane(c);
            let mut h = vec![0.0; bins];
            for v in plane {
                h[((v * bins as f64) as usize).min(bins - 1)] += 1.0;
            }
            h.iter_mut().for_each(|m| *m /= plane.len() as f64);
            h
        })
        .collect()
}

fn histogram_l1(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let per: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum()).collect();
    per.iter().sum::<f64>() / per.len() as f64
}

fn histogram_effect() -> Check {
    let ex = load("wood_105.png");
    let smap = compute_scale_map(ex.width(), ex.height(), tilted_view()).map_err(|e| e.to_string())?;
    let target = rgb_histograms(&attach_scale_channel(&ex, &smap).map_err(|e| e.to_string())?, 16);
    let mut dist = [0.0; 2];
    for seed in [7u64, 8, 9] {
        for (k, on) in [true, false].into_iter().enumerate() {
            let mut req = SynthesisRequest::new(ex.clone(), tilted_view(), 128, 128);
            req.seed = seed;
            req.cfg.histogram_matching = on;
            let (out, _) = synthesize_rgbs(&req).map_err(|e| e.to_string())?;
            dist[k] += histogram_l1(&rgb_histograms(&out, 16), &target) / 3.0;
        }
    }
    ensure(dist[0] <= dist[1], || format!("L1 with matching {:.5} > without {:.5}", dist[0], dist[1]))?;
    Ok(format!("mean L1 {:.5} with matching, {:.5} without", dist[0], dist[1]))
}

fn strip_millis(trace: &str) -> Result<Vec<serde_json::Value>, String> {
    trace
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
            v.as_object_mut().ok_or("trace line is not an object")?.remove("millis");
            Ok(v)
        })
        .collect()
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let img = dir.path().join(format!("{tag}.png"));
        let trace = dir.path().join(format!("{tag}.jsonl"));
        let status = Command::new(env!("CARGO_BIN_EXE_persyn"))
            .args(["synth", "--in"])
            .arg(data("wood_105.png"))
            .args(["--sigma", "30", "--tau", "18", "--out-size", "128x128", "--seed", "7", "--out"])
            .arg(&img)
            .arg("--trace")
            .arg(&trace)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("synth exited with {status}"))?;
        let bytes = std::fs::read(&img).map_err(|e| e.to_string())?;
        let lines = std::fs::read_to_string(&trace).map_err(|e| e.to_string())?;
        outputs.push((bytes, strip_millis(&lines)?));
    }
    ensure(outputs[0].0 == outputs[1].0, || "output images differ".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "energy traces differ".into())?;
    Ok(format!("{} image bytes and {} trace records identical", outputs[0].0.len(), outputs[0].1.len()))
}

fn part_split(rows: &[ModeResult]) -> Check {
    for r in rows {
        ensure(r.part1_millis < r.part2_millis, || {
            format!("{} {}: part 1 {:.1} ms, part 2 {:.1} ms", r.mode, r.width, r.part1_millis, r.part2_millis)
        })?;
    }
    let worst = rows.iter().map(|r| r.part1_millis / r.part2_millis).fold(0.0, f64::max);
    Ok(format!("{} runs, largest part1/part2 ratio {worst:.4}", rows.len()))
}

fn run(id: usize, name: &str, check: impl FnOnce() -> Check) -> bool {
    let started = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {id:>2} {name} ({secs:.1} s): {detail}");
            true
        }
        Err(why) => {
            println!("FAIL {id:>2} {name} ({secs:.1} s): {why}");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= run(1, "scale map correctness", scale_map_correctness);
    ok &= run(2, "containing-window counts", window_counts);
    ok &= run(3, "exact tree search", ann_exactness);
    ok &= run(4, "PCA dimension band", pca_band);
    ok &= run(5, "energy monotonicity", energy_monotonicity);
    ok &= run(6, "update step optimality", update_optimality);
    let rows = efficiency_runs();
    ok &= run(7, "efficiency ordering", || efficiency_ordering(rows.as_ref().map_err(Clone::clone)?));
    ok &= run(8, "histogram matching effect", histogram_effect);
    ok &= run(9, "determinism", determinism);
    ok &= run(10, "part split", || part_split(rows.as_ref().map_err(Clone::clone)?));
    if !ok {
        std::process::exit(1);
    }
}
