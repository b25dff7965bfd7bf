//! Nearest-neighbor search over exemplar neighborhoods.

mod eigen;
mod kmtree;
mod pca;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use kmtree::{build_tree, build_tree_n, KmTree, QueryBudget, QueryStats, DEFAULT_BRANCHING};
pub use pca::{fit_pca, fit_pca_rows, PcaModel, DEFAULT_VARIANCE_TARGET};

use crate::error::{Error, Result};
use crate::neighborhood::NeighborhoodMatrix;
use crate::scalar::{squared_distance_below, Scalar};

/// Exhaustive nearest neighbor over a flat buffer of `dim`-vectors.
/// Ties go to the lowest index.
pub fn brute_force_nearest<T: Scalar>(points: &[T], dim: usize, q: &[T]) -> Result<usize> {
    if points.is_empty() || dim == 0 {
        return Err(Error::domain("nearest neighbor over an empty point set"));
    }
    if q.len() != dim || points.len() % dim != 0 {
        return Err(Error::shape(format!("query has dimension {}, points have {dim}", q.len())));
    }
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, p) in points.chunks_exact(dim).enumerate() {
        if let Some(d) = squared_distance_below(q, p, best_d) {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// How candidates are located during synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    /// Full-dimension exhaustive scan.
    Brute,
    /// k-means tree, optionally over a PCA projection.
    Tree { pca: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    pub method: SearchMethod,
    pub budget: QueryBudget,
    pub variance_target: f64,
    pub branching: usize,
    pub leaf_threshold: usize,
    pub seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            method: SearchMethod::Tree { pca: true },
            budget: QueryBudget::default(),
            variance_target: DEFAULT_VARIANCE_TARGET,
            branching: DEFAULT_BRANCHING,
            leaf_threshold: DEFAULT_BRANCHING,
            seed: 0,
        }
    }
}

/// Read-only index over the rows of a [`NeighborhoodMatrix`].
#[derive(Debug, Clone)]
pub struct SearchIndex<T> {
    budget: QueryBudget,
    pca: Option<PcaModel<T>>,
    tree: Option<(KmTree<T>, Vec<T>)>,
    dim: usize,
    len: usize,
}

impl<T: Scalar> SearchIndex<T> {
    pub fn build(points: &NeighborhoodMatrix<T>, cfg: &IndexConfig) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("cannot index an empty neighborhood set"));
        }
        let (pca, tree) = match cfg.method {
            SearchMethod::Brute => (None, None),
            SearchMethod::Tree { pca: use_pca } => {
                let pca = if use_pca && points.len() >= 2 {
                    Some(fit_pca(points, cfg.variance_target)?)
                } else {
                    None
                };
                let (buf, dim) = match &pca {
                    Some(m) => (m.project_rows(points.as_flat()), m.retained_dim()),
                    None => (points.as_flat().to_vec(), points.dim()),
                };
                let tree = build_tree_n(&buf, dim, points.len(), cfg.branching, cfg.leaf_threshold, cfg.seed)?;
                (pca, Some((tree, buf)))
            }
        };
        Ok(SearchIndex { budget: cfg.budget, pca, tree, dim: points.dim(), len: points.len() })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pca(&self) -> Option<&PcaModel<T>> {
        self.pca.as_ref()
    }

    pub fn tree(&self) -> Option<&KmTree<T>> {
        self.tree.as_ref().map(|(t, _)| t)
    }

    /// Dimension the search actually compares in.
    pub fn search_dim(&self) -> usize {
        match (&self.pca, &self.tree) {
            (Some(m), _) => m.retained_dim(),
            _ => self.dim,
        }
    }

    /// Candidate row for the full-dimension query `q`. `points` must be the
    /// matrix the index was built from.
    pub fn query(&self, points: &NeighborhoodMatrix<T>, q: &[T], stats: &mut QueryStats) -> Result<usize> {
        if q.len() != self.dim {
            return Err(Error::shape(format!("query has dimension {}, index expects {}", q.len(), self.dim)));
        }
        match &self.tree {
            None => {
                stats.leaves_visited += 1;
                stats.points_scanned += self.len;
                brute_force_nearest(points.as_flat(), self.dim, q)
            }
            Some((tree, buf)) => match &self.pca {
                Some(m) => {
                    let mut pq = vec![T::zero(); m.retained_dim()];
                    m.project_into(q, &mut pq);
                    tree.query(buf, &pq, self.budget, stats)
                }
                None => tree.query(buf, q, self.budget, stats),
            },
        }
    }
}
