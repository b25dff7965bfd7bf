use crate::ann::{IndexConfig, QueryBudget, SearchMethod};
use crate::error::{Error, Result};
use crate::neighborhood::{GridSpec, PatchSpec};
use crate::raster::Channel;

/// Parameters of one optimization level.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Robust norm exponent.
    pub r: f64,
    /// Regularizer added to squared distances before reweighting.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once fewer than this share of anchors change assignment.
    pub convergence_fraction: f64,
    pub histogram_bins: usize,
    pub histogram_channels: Vec<Channel>,
    pub histogram_matching: bool,
    /// A tile is searched again only if one of its samples moved by more
    /// than this since its last search.
    pub active_tolerance: f64,
    pub patch: PatchSpec,
    pub nbhd_width: usize,
    pub spacing: usize,
    pub search: IndexConfig,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            r: 0.8,
            epsilon: 1e-4,
            max_iterations: 20,
            convergence_fraction: 0.01,
            histogram_bins: 16,
            histogram_channels: Channel::RGB.to_vec(),
            histogram_matching: true,
            active_tolerance: 1.0 / 255.0,
            patch: PatchSpec::default(),
            nbhd_width: 8,
            spacing: 2,
            search: IndexConfig::default(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    /// Per-pixel scheduling over a full-dimension exhaustive scan.
    pub fn pixel_brute() -> Self {
        let mut cfg = Self::default();
        cfg.patch = PatchSpec::new(1);
        cfg.search.method = SearchMethod::Brute;
        cfg
    }

    /// Per-pixel scheduling over a tree in full dimension.
    pub fn pixel_tree() -> Self {
        let mut cfg = Self::default();
        cfg.patch = PatchSpec::new(1);
        cfg.search.method = SearchMethod::Tree { pca: false };
        cfg
    }

    /// Patch scheduling over a tree in PCA space (the default).
    pub fn patch_tree_pca() -> Self {
        Self::default()
    }

    pub fn with_budget(mut self, budget: QueryBudget) -> Self {
        self.search.budget = budget;
        self
    }

    pub fn grid(&self, width: usize, height: usize) -> GridSpec {
        GridSpec { nbhd_width: self.nbhd_width, spacing: self.spacing, image_width: width, image_height: height }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 2.0) {
            return Err(Error::domain(format!("robust exponent r = {} must lie in (0, 2)", self.r)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !(self.convergence_fraction > 0.0 && self.convergence_fraction < 1.0) {
            return Err(Error::domain(format!(
                "convergence fraction {} must lie in (0, 1)",
                self.convergence_fraction
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("at least one iteration is required"));
        }
        if self.histogram_bins < 2 {
            return Err(Error::domain(format!("histogram needs at least 2 bins, got {}", self.histogram_bins)));
        }
        if !(self.active_tolerance >= 0.0) {
            return Err(Error::domain("active tolerance must be non-negative"));
        }
        if let QueryBudget::Backtrack { max_leaves: 0 } = self.search.budget {
            return Err(Error::domain("backtracking budget must visit at least one leaf"));
        }
        let probe = self.grid(self.nbhd_width, self.nbhd_width);
        probe.validate()?;
        self.patch.validate(&probe)
    }
}
