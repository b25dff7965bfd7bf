use std::fs;
use std::path::Path;

use persyn::io::{load_image, save_gray_png, save_image};
use persyn::pipeline::{bench_csv, benchmark, synthesize, SynthesisMode};
use persyn::scale_map::save_scale_map;
use persyn::{compute_scale_map, RasterImage, ScaleMap, SynthesisRequest, ViewAngles};
use serde::Serialize;

use crate::args::{BenchArgs, ScalemapArgs, SynthArgs, ViewArgs};
use crate::Failure;

type Outcome = Result<(), Failure>;

fn view(a: &ViewArgs) -> Result<ViewAngles<f64>, Failure> {
    ViewAngles::new(a.sigma, a.tau).map_err(|e| Failure::Usage(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_scalemap(smap: &ScaleMap<f64>, psm: &Path, png: &Path) -> Outcome {
    save_scale_map(smap, psm)?;
    save_gray_png(smap.width(), smap.height(), &smap.preview_gray8(), png)?;
    Ok(())
}

fn load_exemplar(path: &Path) -> Result<RasterImage<f64>, Failure> {
    load_image(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

pub fn synth(a: &SynthArgs) -> Outcome {
    let cfg = a.opt.to_config().map_err(Failure::Usage)?;
    let view = view(&a.view)?;
    let exemplar = load_exemplar(&a.input)?;
    let (w, h) = a.out_size;
    let mut req = SynthesisRequest::new(exemplar, view, w, h);
    req.cfg = cfg;
    req.levels = a.opt.levels as usize;
    req.seed = a.seed;
    let (out, report) = synthesize(&req)?;
    save_image(&out, &a.out)?;
    if let Some(path) = &a.report {
        write_text(path, &report.to_json())?;
    }
    if let Some(path) = &a.trace {
        let lines: String = report.levels.iter().map(|l| l.trace.to_json_lines()).collect();
        write_text(path, &lines)?;
    }
    if let Some(dir) = &a.emit_scalemaps {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let ex = &req.exemplar;
        write_scalemap(
            &compute_scale_map(ex.width(), ex.height(), view)?,
            &dir.join("exemplar.psm"),
            &dir.join("exemplar.png"),
        )?;
        write_scalemap(&compute_scale_map(w, h, view)?, &dir.join("output.psm"), &dir.join("output.png"))?;
    }
    Ok(())
}

pub fn scalemap(a: &ScalemapArgs) -> Outcome {
    let view = view(&a.view)?;
    let (w, h) = a.size;
    let smap = compute_scale_map(w, h, view)?;
    let preview = a.preview.clone().unwrap_or_else(|| a.out.with_extension("png"));
    if preview == a.out {
        return Err(Failure::Usage("preview path must differ from the scale map path".into()));
    }
    write_scalemap(&smap, &a.out, &preview)
}

#[derive(Serialize)]
struct BenchDoc<'a> {
    cells: &'a [persyn::pipeline::BenchCell],
    runs: &'a [persyn::pipeline::ModeResult],
}

pub fn bench(a: &BenchArgs) -> Outcome {
    let cfg = a.opt.to_config().map_err(Failure::Usage)?;
    let view = ViewAngles::new(a.sigma, a.tau).map_err(|e| Failure::Usage(e.to_string()))?;
    let exemplar = load_exemplar(&a.input)?;
    let modes: Vec<SynthesisMode> = if a.modes.is_empty() { SynthesisMode::all().to_vec() } else { a.modes.clone() };
    let mut req = SynthesisRequest::new(exemplar, view, a.sizes[0].0, a.sizes[0].1);
    req.cfg = cfg;
    req.levels = a.opt.levels as usize;
    req.seed = a.seed;
    let (cells, runs) = benchmark(&req, &a.sizes, &modes, a.reps as usize)?;
    let csv = bench_csv(&cells);
    if let Some(path) = &a.csv {
        write_text(path, &csv)?;
    }
    if let Some(path) = &a.json {
        let doc = serde_json::to_string_pretty(&BenchDoc { cells: &cells, runs: &runs })
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        write_text(path, &doc)?;
    }
    if a.csv.is_none() && a.json.is_none() {
        print!("{csv}");
    }
    Ok(())
}
