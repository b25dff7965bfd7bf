use persyn::scale_map::{scale_bounds, ScaleField};
use persyn::{compute_scale_map, ViewAngles};
use proptest::prelude::*;

fn view(s: f64, t: f64) -> ViewAngles<f64> {
    ViewAngles::new(s, t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn values_within_bounds(w in 1usize..40, h in 1usize..40, s in 0.0f64..89.0, t in 0.0f64..360.0) {
        let m = compute_scale_map(w, h, view(s, t)).unwrap();
        let b = m.bounds();
        prop_assert!(m.values().iter().all(|v| *v >= b.s_min - 1e-12 && *v <= b.s_max + 1e-12));
        prop_assert!(m.normalized_values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn decreasing_along_tilt(w in 2usize..40, h in 2usize..40, s in 0.0f64..89.0, t in 0.0f64..360.0) {
        let v = view(s, t);
        let m = compute_scale_map(w, h, v).unwrap();
        let (st, ct) = v.tilt_direction();
        for y in 0..h {
            for x in 0..w {
                let here = m.get(x, y);
                if x + 1 < w {
                    prop_assert!((m.get(x + 1, y) - here) * st <= 1e-12);
                }
                if y + 1 < h {
                    prop_assert!((m.get(x, y + 1) - here) * ct <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn opposite_tilt_reflects(w in 1usize..40, h in 1usize..40, s in 0.0f64..89.0, t in 0.0f64..360.0,
                              fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
        let v = view(s, t);
        let a = ScaleField::new(w, h, &v);
        let b = ScaleField::new(w, h, &v.opposite_tilt());
        let (x, y) = (fx * w as f64, fy * h as f64);
        prop_assert!((a.at(x, y) - b.at(w as f64 - x, h as f64 - y)).abs() < 1e-9);
    }

    #[test]
    fn flat_limit(w in 1usize..30, h in 1usize..30, t in 0.0f64..360.0) {
        let m = compute_scale_map(w, h, view(1e-6, t)).unwrap();
        prop_assert!(m.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }
}

#[test]
fn tilted_view_on_105() {
    let m = compute_scale_map(105, 105, view(30.0, 18.0)).unwrap();
    let b = scale_bounds(&view(30.0f64, 18.0));
    assert!((b.s_min - 0.866025).abs() < 1e-6 && (b.s_max - 1.154701).abs() < 1e-6);
    assert!((m.min_value() - 0.866025).abs() < 1e-6);
    assert!((m.max_value() - 1.154701).abs() < 1e-6);
    let flat = compute_scale_map(105, 105, view(0.0, 18.0)).unwrap();
    assert!(flat.values().iter().all(|v| *v == 1.0));
}

#[test]
fn f32_matches_f64() {
    let a = compute_scale_map(33, 21, ViewAngles::new(45.0f32, 200.0).unwrap()).unwrap();
    let b = compute_scale_map(33, 21, view(45.0, 200.0)).unwrap();
    for (p, q) in a.values().iter().zip(b.values()) {
        assert!((*p as f64 - q).abs() < 1e-5);
    }
}
