//! Alternating search and reweighted least-squares updates for one level.

mod config;
mod energy;
mod histogram;
mod search;
mod trace;
mod update;

pub use config::OptimizerConfig;
pub use energy::{irls_weight, robust_energy, texture_energy, weighted_energy};
pub use histogram::{build_histograms, histogram_penalty, HistogramSet};
pub use search::{
    anchors_for_tiles, query_anchors, schedule_tiles, search_step, AssignmentMap, SearchOutcome, TileScheduler,
};
pub use trace::{EnergyTrace, IterationRecord, UpdateEnergy};
pub use update::{quadratic_energy, update_step};

use std::time::Instant;

use crate::ann::SearchIndex;
use crate::error::{Error, Result};
use crate::neighborhood::{NeighborhoodMatrix, SparseGrid};
use crate::raster::RgbsImage;
use crate::scalar::Scalar;

/// Per-anchor weights for one update.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub irls: Vec<f64>,
    pub penalty: Vec<f64>,
}

impl WeightMap {
    pub fn effective(&self) -> Vec<f64> {
        self.irls.iter().zip(&self.penalty).map(|(w, p)| w / (1.0 + p)).collect()
    }
}

/// IRLS weights from the current distances, divided by the histogram
/// penalty of each assigned neighborhood when `hist` is given.
pub fn compute_weights<T: Scalar>(
    map: &AssignmentMap<T>,
    input: &NeighborhoodMatrix<T>,
    cfg: &OptimizerConfig,
    hist: Option<(&HistogramSet, &HistogramSet)>,
) -> WeightMap {
    let irls = map.distances.iter().map(|d| irls_weight(d.as_f64(), cfg.r, cfg.epsilon)).collect();
    let penalty = match hist {
        Some((hx, hz)) => map.indices.iter().map(|&i| histogram_penalty(input.row(i), hx, hz)).collect(),
        None => vec![0.0; map.len()],
    };
    WeightMap { irls, penalty }
}

/// Optimizes `init` against the exemplar neighborhoods `input` (rows of
/// `index`) until assignments settle or the iteration cap is reached.
pub fn optimize_level<T: Scalar>(
    init: RgbsImage<T>,
    exemplar: &RgbsImage<T>,
    input: &NeighborhoodMatrix<T>,
    index: &SearchIndex<T>,
    cfg: &OptimizerConfig,
) -> Result<(RgbsImage<T>, EnergyTrace)> {
    cfg.validate()?;
    if input.dim() != cfg.grid(cfg.nbhd_width, cfg.nbhd_width).vector_len() {
        return Err(Error::shape(format!(
            "exemplar vectors have dimension {}, configuration expects {}",
            input.dim(),
            cfg.grid(cfg.nbhd_width, cfg.nbhd_width).vector_len()
        )));
    }
    let grid = SparseGrid::new(cfg.grid(init.width(), init.height()))?;
    let mut scheduler = TileScheduler::new(&grid, cfg.patch, cfg.active_tolerance)?;
    let hz = if cfg.histogram_matching {
        Some(build_histograms(exemplar, &cfg.histogram_channels, cfg.histogram_bins)?)
    } else {
        None
    };

    let mut out = init;
    let mut trace = EnergyTrace::default();
    let mut map = AssignmentMap::unassigned(grid.len());

    let started = Instant::now();
    let (active, anchors) = scheduler.select(&out);
    let first = query_anchors(&out, input, index, &grid, &anchors, &mut map)?;
    scheduler.mark(&out, &active);
    trace.points_scanned += first.stats.points_scanned as u64;
    trace.records.push(IterationRecord {
        iter: 0,
        energy: robust_energy(&map.distances, cfg.r),
        changed: first.changed,
        nn_calls: first.nn_calls,
        millis: started.elapsed().as_secs_f64() * 1e3,
    });

    for iter in 1..=cfg.max_iterations {
        let started = Instant::now();
        let hx = match &hz {
            Some(_) => Some(build_histograms(&out, &cfg.histogram_channels, cfg.histogram_bins)?),
            None => None,
        };
        let weights = compute_weights(&map, input, cfg, hx.as_ref().zip(hz.as_ref())).effective();
        let before = quadratic_energy(&out, input, &grid, &map.indices, &weights);
        update_step(&map.indices, &weights, &grid, input, &mut out);
        let after = quadratic_energy(&out, input, &grid, &map.indices, &weights);
        trace.updates.push(UpdateEnergy { before, after });

        map.refresh(&out, input, &grid);
        let (active, anchors) = scheduler.select(&out);
        let pass = query_anchors(&out, input, index, &grid, &anchors, &mut map)?;
        scheduler.mark(&out, &active);
        trace.points_scanned += pass.stats.points_scanned as u64;
        trace.records.push(IterationRecord {
            iter,
            energy: robust_energy(&map.distances, cfg.r),
            changed: pass.changed,
            nn_calls: pass.nn_calls,
            millis: started.elapsed().as_secs_f64() * 1e3,
        });
        if (pass.changed as f64) < cfg.convergence_fraction * grid.len() as f64 {
            break;
        }
    }
    Ok((out, trace))
}
