use persyn::io::load_image;
use persyn::pipeline::{
    compare_modes, initialize_output, plan_levels, synthesize_rgbs, SynthesisMode,
};
use persyn::{
    attach_scale_channel, compute_scale_map, synthesize, Channel, OptimizerConfig, RasterImage, SynthesisRequest,
    ViewAngles,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn wood() -> RasterImage<f64> {
    load_image(format!("{}/tests/data/wood_105.png", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn quick(mut req: SynthesisRequest<f64>) -> SynthesisRequest<f64> {
    req.cfg = OptimizerConfig { max_iterations: 3, ..req.cfg };
    req
}

#[test]
fn flat_view_init_follows_exemplar_histogram() {
    // four colours with frequencies 1/2, 1/4, 1/8, 1/8
    let palette = [0.1, 0.4, 0.7, 0.9];
    let ex = RasterImage::from_fn(8, 8, |x, y| {
        let k = match (y * 8 + x) % 8 {
            0..=3 => 0,
            4 | 5 => 1,
            6 => 2,
            _ => 3,
        };
        [palette[k]; 3]
    })
    .unwrap();
    let view = ViewAngles::new(0.0, 0.0).unwrap();
    let ex = attach_scale_channel(&ex, &compute_scale_map(8, 8, view).unwrap()).unwrap();
    let out_smap = compute_scale_map(200, 200, view).unwrap();
    let out = initialize_output(&ex, &out_smap, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let n = 40_000.0;
    let expected = [0.5 * n, 0.25 * n, 0.125 * n, 0.125 * n];
    let mut observed = [0.0; 4];
    for v in out.plane(Channel::R) {
        let k = palette.iter().position(|p| p == v).unwrap();
        observed[k] += 1.0;
    }
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    // 3 degrees of freedom; 16.27 is the 0.1% critical value
    assert!(chi2 < 16.27, "chi-square {chi2}");
}

#[test]
fn init_scale_plane_is_the_analytic_map() {
    let mut req = SynthesisRequest::new(wood(), ViewAngles::new(30.0, 18.0).unwrap(), 70, 50);
    req.levels = 2;
    let plans = plan_levels(&req).unwrap();
    assert_eq!((plans[0].out_width(), plans[0].out_height()), (35, 25));
    assert_eq!((plans[1].out_width(), plans[1].out_height()), (70, 50));
    assert_eq!((plans[0].exemplar.width(), plans[1].exemplar.width()), (52, 105));
    let init = initialize_output(&plans[0].exemplar, &plans[0].out_smap, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(init.scale_plane(), plans[0].out_smap.normalized_values().as_slice());
    // init colours are copied from exemplar pixels of matching scale
    let s_in = plans[0].exemplar.scale_plane();
    for (i, s) in init.scale_plane().iter().enumerate() {
        let r = init.plane(Channel::R)[i];
        let g = init.plane(Channel::G)[i];
        let matches = (0..s_in.len()).any(|j| {
            plans[0].exemplar.plane(Channel::R)[j] == r
                && plans[0].exemplar.plane(Channel::G)[j] == g
                && (s_in[j] - s).abs() < 0.02
        });
        assert!(matches, "pixel {i}");
    }
}

#[test]
fn output_has_requested_size_and_is_reproducible() {
    let req = quick(SynthesisRequest::new(wood(), ViewAngles::new(30.0, 18.0).unwrap(), 37, 29));
    let (a, ra) = synthesize(&req).unwrap();
    let (b, rb) = synthesize(&req).unwrap();
    assert_eq!((a.width(), a.height()), (37, 29));
    assert_eq!(a, b);
    assert_eq!(ra.total_nn_calls, rb.total_nn_calls);
    assert_eq!(ra.levels.len(), 2);
    let json: serde_json::Value = serde_json::from_str(&ra.to_json()).unwrap();
    assert_eq!(json["config"]["sigma"], 30.0);
    assert!(json["levels"][1]["trace"]["records"].as_array().unwrap().len() >= 2);
}

#[test]
fn tilted_geometry_run() {
    let mut req = SynthesisRequest::new(wood(), ViewAngles::new(30.0, 18.0).unwrap(), 128, 128);
    req.seed = 3;
    let (out, report) = synthesize_rgbs(&req).unwrap();
    assert!(report.part1_millis < report.part2_millis);
    for level in &report.levels {
        let e: Vec<f64> = level.trace.records.iter().map(|r| r.energy).collect();
        assert!(e.iter().all(|v| v.is_finite()));
        assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }
    // the synthesized scale plane still falls along the tilt direction
    let target = compute_scale_map(128, 128, req.view).unwrap().normalized_values();
    let s = out.scale_plane();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ms, mt) = (mean(s), mean(&target));
    let cov: f64 = s.iter().zip(&target).map(|(a, b)| (a - ms) * (b - mt)).sum();
    let vs: f64 = s.iter().map(|a| (a - ms).powi(2)).sum();
    let vt: f64 = target.iter().map(|b| (b - mt).powi(2)).sum();
    assert!(cov / (vs * vt).sqrt() > 0.9);
}

#[test]
fn compare_modes_shapes() {
    let req = quick(SynthesisRequest::new(wood(), ViewAngles::new(30.0, 18.0).unwrap(), 32, 32));
    let one = compare_modes(&req, &[SynthesisMode::PATCH_TREE_PCA]).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].mode, "patch+tree+pca");
    assert!(compare_modes(&req, &[]).is_err());
    let two = compare_modes(&req, &[SynthesisMode::PIXEL_TREE, SynthesisMode::PATCH_TREE_PCA]).unwrap();
    assert_eq!(two.iter().map(|r| r.mode).collect::<Vec<_>>(), ["pixel+tree", "patch+tree+pca"]);
}
