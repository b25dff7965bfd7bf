use crate::neighborhood::{extract_into, NeighborhoodMatrix, SparseGrid, RGBS_CHANNELS};
use crate::raster::{clamp_unit, Channel, RgbsImage};
use crate::scalar::{squared_distance, Scalar};

/// Replaces every output sample with the weighted mean of the assigned
/// exemplar samples over all windows covering it, accumulating in
/// ascending anchor order.
///
/// # Panics
/// If a pixel is covered by no window or the slices disagree in length.
pub fn update_step<T: Scalar>(
    assignments: &[usize],
    weights: &[f64],
    grid: &SparseGrid,
    input: &NeighborhoodMatrix<T>,
    out: &mut RgbsImage<T>,
) {
    assert_eq!(assignments.len(), grid.len(), "one assignment per anchor");
    assert_eq!(weights.len(), grid.len(), "one weight per anchor");
    let spec = grid.spec();
    let (iw, w) = (spec.image_width, spec.nbhd_width);
    let n = iw * spec.image_height;
    let mut num = vec![T::zero(); n * RGBS_CHANNELS];
    let mut den = vec![T::zero(); n];
    for (a, (&row, &wt)) in assignments.iter().zip(weights).enumerate() {
        let wt = T::of(wt);
        let z = input.row(row);
        let anchor = grid.anchor(a);
        let mut k = 0;
        for y in anchor.y..anchor.y + w {
            for x in anchor.x..anchor.x + w {
                let i = y * iw + x;
                den[i] += wt;
                for c in 0..RGBS_CHANNELS {
                    num[i * RGBS_CHANNELS + c] += wt * z[k + c];
                }
                k += RGBS_CHANNELS;
            }
        }
    }
    for ch in Channel::RGBS {
        let plane = out.plane_mut(ch);
        for (i, v) in plane.iter_mut().enumerate() {
            assert!(den[i] > T::zero(), "pixel {i} is not covered by any weighted window");
            *v = clamp_unit(num[i * RGBS_CHANNELS + ch.index()] / den[i]);
        }
    }
}

/// `sum_p W_p |x_p - z_p|^2` evaluated on the output image.
pub fn quadratic_energy<T: Scalar>(
    out: &RgbsImage<T>,
    input: &NeighborhoodMatrix<T>,
    grid: &SparseGrid,
    assignments: &[usize],
    weights: &[f64],
) -> f64 {
    let spec = grid.spec();
    let mut buf = vec![T::zero(); spec.vector_len()];
    let mut total = 0.0;
    for (a, (&row, &wt)) in assignments.iter().zip(weights).enumerate() {
        extract_into(out, grid.anchor(a), spec.nbhd_width, &mut buf);
        total += wt * squared_distance(&buf, input.row(row)).as_f64();
    }
    total
}
