use crate::ann::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::neighborhood::NeighborhoodMatrix;
use crate::scalar::Scalar;

/// Principal components of a point set, truncated to the smallest
/// dimension that keeps the requested share of variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    mean: Vec<T>,
    /// All `D` components, row-major, ordered by descending variance.
    components: Vec<T>,
    variances: Vec<T>,
    retained_dim: usize,
}

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.95;

pub fn fit_pca<T: Scalar>(points: &NeighborhoodMatrix<T>, variance_target: f64) -> Result<PcaModel<T>> {
    fit_pca_rows(points.as_flat(), points.dim(), variance_target)
}

/// As [`fit_pca`] over a flat row-major buffer of `dim`-vectors.
pub fn fit_pca_rows<T: Scalar>(data: &[T], dim: usize, variance_target: f64) -> Result<PcaModel<T>> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::shape(format!("{} values do not form rows of length {dim}", data.len())));
    }
    let n = data.len() / dim;
    if n < 2 {
        return Err(Error::domain(format!("PCA needs at least 2 points, got {n}")));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::domain(format!("variance target {variance_target} must lie in (0, 1]")));
    }

    let mut mean = vec![T::zero(); dim];
    for row in data.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v;
        }
    }
    let inv_n = T::one() / T::of_usize(n);
    mean.iter_mut().for_each(|m| *m *= inv_n);

    // lower triangle of the sample covariance
    let mut cov = vec![T::zero(); dim * dim];
    let mut centered = vec![T::zero(); dim];
    for row in data.chunks_exact(dim) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = *v - *m;
        }
        for i in 0..dim {
            let ci = centered[i];
            if ci == T::zero() {
                continue;
            }
            let out = &mut cov[i * dim..i * dim + i + 1];
            for (o, cj) in out.iter_mut().zip(&centered[..=i]) {
                *o += ci * *cj;
            }
        }
    }
    let inv = T::one() / T::of_usize(n - 1);
    cov.iter_mut().for_each(|c| *c *= inv);

    let eig = symmetric_eigen(&cov, dim);
    let variances: Vec<T> = eig.values.iter().map(|v| v.max(T::zero())).collect();
    let mut components = eig.vectors;
    for k in 0..dim {
        let row = &mut components[k * dim..(k + 1) * dim];
        let mut pivot = 0;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[pivot].abs() {
                pivot = i;
            }
        }
        if row[pivot] < T::zero() {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }

    // variance at the level of rounding noise in the mean counts as none
    let magnitude: f64 = mean.iter().map(|m| m.as_f64() * m.as_f64()).sum::<f64>() + dim as f64;
    let noise = (T::epsilon().as_f64() * 8.0).powi(2) * magnitude;
    let total: f64 = variances.iter().map(|v| v.as_f64()).sum();
    let retained_dim = if total <= noise { 0 } else { retained_for(&variances, variance_target) };
    Ok(PcaModel { mean, components, variances, retained_dim })
}

/// Smallest `d` whose leading variances reach `target` of the total.
fn retained_for<T: Scalar>(variances: &[T], target: f64) -> usize {
    let total: f64 = variances.iter().map(|v| v.as_f64()).sum();
    if total <= 0.0 {
        return 0;
    }
    let goal = target * total - total * 1e-12;
    let mut acc = 0.0;
    for (k, v) in variances.iter().enumerate() {
        acc += v.as_f64();
        if acc >= goal {
            return k + 1;
        }
    }
    variances.len()
}

impl<T: Scalar> PcaModel<T> {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn retained_dim(&self) -> usize {
        self.retained_dim
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Component `k` as a unit vector of the input dimension.
    pub fn component(&self, k: usize) -> &[T] {
        let d = self.input_dim();
        &self.components[k * d..(k + 1) * d]
    }

    /// The retained components.
    pub fn basis(&self) -> impl Iterator<Item = &[T]> {
        (0..self.retained_dim).map(move |k| self.component(k))
    }

    /// Per-component variances, descending.
    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    /// Share of total variance carried by the retained components.
    pub fn explained_ratio(&self) -> f64 {
        let total: f64 = self.variances.iter().map(|v| v.as_f64()).sum();
        if total <= 0.0 {
            return 1.0;
        }
        self.variances[..self.retained_dim].iter().map(|v| v.as_f64()).sum::<f64>() / total
    }

    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "vector has dimension {}, model expects {}",
                v.len(),
                self.input_dim()
            )));
        }
        let mut out = vec![T::zero(); self.retained_dim];
        self.project_into(v, &mut out);
        Ok(out)
    }

    /// Projection without the dimension check; `out.len()` must equal the
    /// retained dimension.
    pub fn project_into(&self, v: &[T], out: &mut [T]) {
        for (k, o) in out.iter_mut().enumerate() {
            let comp = self.component(k);
            let mut acc = T::zero();
            for ((x, m), c) in v.iter().zip(&self.mean).zip(comp) {
                acc += (*x - *m) * *c;
            }
            *o = acc;
        }
    }

    /// Projects every row of a flat buffer.
    pub fn project_rows(&self, data: &[T]) -> Vec<T> {
        let d = self.retained_dim;
        let dim = self.input_dim();
        let n = data.len() / dim;
        let mut out = vec![T::zero(); n * d];
        if d > 0 {
            for (row, o) in data.chunks_exact(dim).zip(out.chunks_exact_mut(d)) {
                self.project_into(row, o);
            }
        }
        out
    }

    /// Maps retained coordinates back into the input space.
    pub fn reconstruct(&self, coords: &[T]) -> Vec<T> {
        let mut out = self.mean.clone();
        for (k, c) in coords.iter().enumerate().take(self.retained_dim) {
            for (o, b) in out.iter_mut().zip(self.component(k)) {
                *o += *c * *b;
            }
        }
        out
    }
}
