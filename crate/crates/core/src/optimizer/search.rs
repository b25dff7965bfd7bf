use rayon::prelude::*;

use crate::ann::{QueryStats, SearchIndex};
use crate::error::Result;
use crate::neighborhood::{extract_into, patch_tiles_with_phase, GridSpec, NeighborhoodMatrix, PatchSpec, SparseGrid, Tile};
use crate::raster::{Channel, RgbsImage};
use crate::scalar::{squared_distance, Scalar};

/// Assigned exemplar row and full-dimension distance per output anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMap<T> {
    pub indices: Vec<usize>,
    pub distances: Vec<T>,
}

impl<T: Scalar> AssignmentMap<T> {
    /// A map with no candidate yet; every anchor accepts its first result.
    pub fn unassigned(len: usize) -> Self {
        AssignmentMap { indices: vec![usize::MAX; len], distances: vec![T::infinity(); len] }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Recomputes every distance against the current output.
    pub fn refresh(&mut self, out: &RgbsImage<T>, input: &NeighborhoodMatrix<T>, grid: &SparseGrid) {
        let w = grid.spec().nbhd_width;
        let dim = grid.spec().vector_len();
        let fresh: Vec<T> = (0..self.len())
            .into_par_iter()
            .map_init(
                || vec![T::zero(); dim],
                |buf, a| {
                    extract_into(out, grid.anchor(a), w, buf);
                    squared_distance(buf, input.row(self.indices[a])).sqrt()
                },
            )
            .collect();
        self.distances = fresh;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchOutcome {
    pub changed: usize,
    pub nn_calls: usize,
    pub stats: QueryStats,
}

/// Queries each anchor in `anchors` (ascending, distinct) and keeps a
/// candidate only when it is strictly closer in full dimension.
pub fn query_anchors<T: Scalar>(
    out: &RgbsImage<T>,
    input: &NeighborhoodMatrix<T>,
    index: &SearchIndex<T>,
    grid: &SparseGrid,
    anchors: &[usize],
    map: &mut AssignmentMap<T>,
) -> Result<SearchOutcome> {
    let w = grid.spec().nbhd_width;
    let dim = grid.spec().vector_len();
    let current = &*map;
    let found: Vec<(usize, T, T, QueryStats)> = anchors
        .par_iter()
        .map_init(
            || vec![T::zero(); dim],
            |buf, &a| {
                extract_into(out, grid.anchor(a), w, buf);
                let mut stats = QueryStats::default();
                let cand = index.query(input, buf, &mut stats)?;
                let d_cand = squared_distance(buf, input.row(cand));
                let d_cur = match current.indices[a] {
                    usize::MAX => T::infinity(),
                    i => squared_distance(buf, input.row(i)),
                };
                Ok((cand, d_cand, d_cur, stats))
            },
        )
        .collect::<Result<_>>()?;

    let mut outcome = SearchOutcome { nn_calls: anchors.len(), ..SearchOutcome::default() };
    for (&a, (cand, d_cand, d_cur, stats)) in anchors.iter().zip(found) {
        outcome.stats += stats;
        let prev = map.indices[a];
        if d_cand < d_cur {
            if prev != usize::MAX && prev != cand {
                outcome.changed += 1;
            }
            map.indices[a] = cand;
            map.distances[a] = d_cand.sqrt();
        } else {
            map.distances[a] = d_cur.sqrt();
        }
    }
    Ok(outcome)
}

/// Tiles for `patch` laid over the output, centered on window centers.
pub fn schedule_tiles(grid: &GridSpec, patch: PatchSpec) -> Result<Vec<Tile>> {
    patch.validate(grid)?;
    patch_tiles_with_phase(grid.image_width, grid.image_height, patch, patch.centered_phase(grid))
}

/// Deduplicated, ascending union of the anchors containing any of `tiles`.
pub fn anchors_for_tiles(grid: &SparseGrid, tiles: impl IntoIterator<Item = Tile>) -> Vec<usize> {
    let mut hit = vec![false; grid.len()];
    for t in tiles {
        for a in grid.containing(t) {
            hit[a] = true;
        }
    }
    hit.iter().enumerate().filter_map(|(i, h)| h.then_some(i)).collect()
}

/// One full search pass: every anchor containing some tile is queried
/// once. Returns the new assignments and the number of queries issued.
pub fn search_step<T: Scalar>(
    out: &RgbsImage<T>,
    input: &NeighborhoodMatrix<T>,
    index: &SearchIndex<T>,
    grid: &GridSpec,
    patch: PatchSpec,
    previous: Option<&AssignmentMap<T>>,
) -> Result<(AssignmentMap<T>, usize)> {
    let lattice = SparseGrid::new(*grid)?;
    let tiles = schedule_tiles(grid, patch)?;
    let anchors = anchors_for_tiles(&lattice, tiles);
    let mut map = previous.cloned().unwrap_or_else(|| AssignmentMap::unassigned(lattice.len()));
    let outcome = query_anchors(out, input, index, &lattice, &anchors, &mut map)?;
    Ok((map, outcome.nn_calls))
}

/// Tracks which tiles moved since they were last searched.
#[derive(Debug, Clone)]
pub struct TileScheduler<T> {
    tiles: Vec<Tile>,
    members: Vec<Vec<usize>>,
    reference: Option<[Vec<T>; 4]>,
    tolerance: T,
    width: usize,
    anchors: usize,
}

impl<T: Scalar> TileScheduler<T> {
    pub fn new(grid: &SparseGrid, patch: PatchSpec, tolerance: f64) -> Result<Self> {
        let tiles = schedule_tiles(grid.spec(), patch)?;
        let members = tiles.iter().map(|t| grid.containing(*t)).collect();
        Ok(TileScheduler {
            tiles,
            members,
            reference: None,
            tolerance: T::of(tolerance),
            width: grid.spec().image_width,
            anchors: grid.len(),
        })
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    /// Whether the mean absolute change of any channel over the tile
    /// exceeds the tolerance.
    fn moved(&self, reference: &[Vec<T>; 4], out: &RgbsImage<T>, tile: &Tile) -> bool {
        let limit = self.tolerance * T::of_usize(tile.size * tile.size);
        Channel::RGBS.iter().any(|&ch| {
            let now = out.plane(ch);
            let then = &reference[ch.index()];
            let total: T = tile
                .pixels()
                .map(|p| {
                    let i = p.y * self.width + p.x;
                    (now[i] - then[i]).abs()
                })
                .sum();
            total > limit
        })
    }

    /// Active tiles and the anchors they require, ascending. Every tile is
    /// active before the first [`TileScheduler::mark`].
    pub fn select(&self, out: &RgbsImage<T>) -> (Vec<usize>, Vec<usize>) {
        let active: Vec<usize> = match &self.reference {
            None => (0..self.tiles.len()).collect(),
            Some(r) => (0..self.tiles.len()).filter(|&t| self.moved(r, out, &self.tiles[t])).collect(),
        };
        let mut hit = vec![false; self.anchors];
        for &t in &active {
            for &a in &self.members[t] {
                hit[a] = true;
            }
        }
        let anchors = hit.iter().enumerate().filter_map(|(i, h)| h.then_some(i)).collect();
        (active, anchors)
    }

    /// Records the current samples of the given tiles as searched.
    pub fn mark(&mut self, out: &RgbsImage<T>, active: &[usize]) {
        let reference = self
            .reference
            .get_or_insert_with(|| Channel::RGBS.map(|ch| out.plane(ch).to_vec()));
        for &t in active {
            for p in self.tiles[t].pixels() {
                let i = p.y * self.width + p.x;
                for ch in Channel::RGBS {
                    reference[ch.index()][i] = out.plane(ch)[i];
                }
            }
        }
    }
}
