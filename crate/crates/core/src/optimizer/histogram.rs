use crate::error::{Error, Result};
use crate::neighborhood::RGBS_CHANNELS;
use crate::raster::{Channel, RgbsImage};
use crate::scalar::Scalar;

/// Normalized per-channel histograms over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSet {
    bins: usize,
    channels: Vec<Channel>,
    /// One histogram per entry of `channels`.
    masses: Vec<Vec<f64>>,
}

impl HistogramSet {
    /// Builds a set from explicit bin masses; each histogram must have
    /// `bins` entries summing to 1.
    pub fn from_masses(channels: Vec<Channel>, bins: usize, masses: Vec<Vec<f64>>) -> Result<Self> {
        if bins < 2 || channels.len() != masses.len() {
            return Err(Error::shape("histogram set needs one histogram of at least 2 bins per channel"));
        }
        for h in &masses {
            if h.len() != bins || (h.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::shape(format!("histogram must have {bins} bins summing to 1")));
            }
        }
        Ok(HistogramSet { bins, channels, masses })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn masses(&self, j: usize) -> &[f64] {
        &self.masses[j]
    }

    /// Bin of sample `c`: `floor(c * bins)` clamped into range.
    pub fn bin<T: Scalar>(&self, c: T) -> usize {
        bin_of(c.as_f64(), self.bins)
    }

    /// Mean L1 distance between corresponding channel histograms.
    pub fn l1_distance(&self, other: &HistogramSet) -> f64 {
        let per: Vec<f64> = self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
            .collect();
        per.iter().sum::<f64>() / per.len().max(1) as f64
    }
}

fn bin_of(c: f64, bins: usize) -> usize {
    let b = (c * bins as f64).floor();
    if b.is_nan() || b < 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

pub fn build_histograms<T: Scalar>(img: &RgbsImage<T>, channels: &[Channel], bins: usize) -> Result<HistogramSet> {
    if bins < 2 {
        return Err(Error::domain(format!("histogram needs at least 2 bins, got {bins}")));
    }
    let n = (img.width() * img.height()) as f64;
    let masses = channels
        .iter()
        .map(|&ch| {
            let mut h = vec![0.0; bins];
            for v in img.plane(ch) {
                h[bin_of(v.as_f64(), bins)] += 1.0;
            }
            h.iter_mut().for_each(|m| *m /= n);
            h
        })
        .collect();
    Ok(HistogramSet { bins, channels: channels.to_vec(), masses })
}

/// Over-representation penalty of a neighborhood vector `z` (interleaved
/// RGBS): the mean over its pixels of `sum_j max(0, H_x,j(b) - H_z,j(b))`.
pub fn histogram_penalty<T: Scalar>(z: &[T], hx: &HistogramSet, hz: &HistogramSet) -> f64 {
    let pixels = z.len() / RGBS_CHANNELS;
    if pixels == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for px in z.chunks_exact(RGBS_CHANNELS) {
        for (j, ch) in hx.channels.iter().enumerate() {
            let b = hx.bin(px[ch.index()]);
            total += (hx.masses[j][b] - hz.masses[j][b]).max(0.0);
        }
    }
    total / pixels as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterImage;

    fn rgbs(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> RgbsImage<f64> {
        let base = RasterImage::from_fn(w, h, |x, y| [f(x, y); 3]).unwrap();
        RgbsImage::new(base, vec![0.5; w * h]).unwrap()
    }

    #[test]
    fn constant_zero_fills_first_bin() {
        let h = build_histograms(&rgbs(4, 4, |_, _| 0.0), &Channel::RGB, 16).unwrap();
        for j in 0..3 {
            assert_eq!(h.masses(j)[0], 1.0);
        }
        assert_eq!(h.bin(1.0f64), 15);
    }

    #[test]
    fn ramp_is_near_uniform() {
        let bins = 16;
        let img = rgbs(100, 10, |x, y| (y * 100 + x) as f64 / 999.0);
        let h = build_histograms(&img, &[Channel::R], bins).unwrap();
        let s: f64 = h.masses(0).iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(h.masses(0).iter().all(|m| (m - 1.0 / bins as f64).abs() < 2.0 / bins as f64));
    }

    #[test]
    fn penalty_examples() {
        let hz = HistogramSet::from_masses(vec![Channel::R], 2, vec![vec![0.5, 0.5]]).unwrap();
        let hx = HistogramSet::from_masses(vec![Channel::R], 2, vec![vec![0.8, 0.2]]).unwrap();
        let z: Vec<f64> = (0..16).flat_map(|_| [0.1, 0.9, 0.9, 0.5]).collect();
        assert_eq!(histogram_penalty(&z, &hz, &hz), 0.0);
        assert!((histogram_penalty(&z, &hx, &hz) - 0.3).abs() < 1e-12);
        let z: Vec<f64> = (0..16).flat_map(|_| [0.7, 0.1, 0.1, 0.5]).collect();
        assert_eq!(histogram_penalty(&z, &hx, &hz), 0.0);
    }
}
