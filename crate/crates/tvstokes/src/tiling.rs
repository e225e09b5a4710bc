//! Disjoint rectangular tilings used by the localized projection.
//!
//! A [`TileGrid`] is a product of two axis partitions, so tiles are pairwise
//! disjoint and cover the grid by construction. A [`TilingTriple`] bundles the
//! three tilings needed to evaluate a restricted global operator: one aligned
//! with the source subdomain, one free family the spectral diagonal acts on,
//! and one aligned with the target subdomain.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SubdomainRect};

/// Partition of `0..n` into consecutive inclusive ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisPartition {
    ranges: Vec<(usize, usize)>,
}

impl AxisPartition {
    pub fn new(ranges: Vec<(usize, usize)>, n: usize) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Tiling("empty axis partition".into()));
        }
        let mut next = 0usize;
        for &(s, e) in &ranges {
            if s != next || e < s {
                return Err(Error::Tiling(format!(
                    "axis ranges must be consecutive, got ({s}, {e}) where {next} expected"
                )));
            }
            next = e + 1;
        }
        if next != n {
            return Err(Error::Tiling(format!(
                "axis partition covers 0..{next}, grid axis has {n} points"
            )));
        }
        Ok(Self { ranges })
    }

    /// Near-uniform partition of `0..n` into `parts` ranges.
    pub fn uniform(n: usize, parts: usize) -> Result<Self> {
        if parts == 0 || parts > n {
            return Err(Error::Tiling(format!(
                "cannot split axis of {n} points into {parts} parts"
            )));
        }
        let base = n / parts;
        let rem = n % parts;
        let mut ranges = Vec::with_capacity(parts);
        let mut start = 0;
        for k in 0..parts {
            let size = base + usize::from(k < rem);
            ranges.push((start, start + size - 1));
            start += size;
        }
        Ok(Self { ranges })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn range(&self, k: usize) -> (usize, usize) {
        self.ranges[k]
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    rows: AxisPartition,
    cols: AxisPartition,
}

impl TileGrid {
    pub fn new(rows: AxisPartition, cols: AxisPartition) -> Self {
        Self { rows, cols }
    }

    pub fn uniform(grid: &GridSpec, parts_y: usize, parts_x: usize) -> Result<Self> {
        Ok(Self {
            rows: AxisPartition::uniform(grid.rows, parts_y)?,
            cols: AxisPartition::uniform(grid.cols, parts_x)?,
        })
    }

    pub fn tiles_y(&self) -> usize {
        self.rows.len()
    }

    pub fn tiles_x(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> &AxisPartition {
        &self.rows
    }

    pub fn cols(&self) -> &AxisPartition {
        &self.cols
    }

    pub fn rect(&self, ky: usize, kx: usize) -> SubdomainRect {
        let (rs, re) = self.rows.range(ky);
        let (cs, ce) = self.cols.range(kx);
        SubdomainRect {
            row_start: rs,
            row_end: re,
            col_start: cs,
            col_end: ce,
        }
    }

    pub fn max_tile_area(&self) -> usize {
        let ry = self
            .rows
            .ranges()
            .iter()
            .map(|(s, e)| e - s + 1)
            .max()
            .unwrap_or(0);
        let rx = self
            .cols
            .ranges()
            .iter()
            .map(|(s, e)| e - s + 1)
            .max()
            .unwrap_or(0);
        ry * rx
    }

    pub fn min_tile_area(&self) -> usize {
        let ry = self
            .rows
            .ranges()
            .iter()
            .map(|(s, e)| e - s + 1)
            .min()
            .unwrap_or(0);
        let rx = self
            .cols
            .ranges()
            .iter()
            .map(|(s, e)| e - s + 1)
            .min()
            .unwrap_or(0);
        ry * rx
    }
}

/// The three disjoint tilings for evaluating a localized operator from source
/// subdomain `source_index` to target subdomain `target_index`. The source
/// (target) tiling's distinguished tile shrinks back to the source (target)
/// halo rectangle, which is what makes divergence and gradient exact under
/// zero extension.
#[derive(Debug, Clone)]
pub struct TilingTriple {
    pub source: TileGrid,
    pub spectral: TileGrid,
    pub target: TileGrid,
    pub source_index: (usize, usize),
    pub target_index: (usize, usize),
}

impl TilingTriple {
    /// Checks the shrink conditions against the padded subdomain rectangles.
    pub fn validate(
        &self,
        grid: &GridSpec,
        source_halo: &SubdomainRect,
        target_halo: &SubdomainRect,
    ) -> Result<()> {
        let a = self.source.rect(self.source_index.0, self.source_index.1);
        let b = self.target.rect(self.target_index.0, self.target_index.1);
        if a.shrink_rb(grid)? != *source_halo {
            return Err(Error::Tiling(format!(
                "source tile {a} does not shrink to halo {source_halo}"
            )));
        }
        if b.shrink_rb(grid)? != *target_halo {
            return Err(Error::Tiling(format!(
                "target tile {b} does not shrink to halo {target_halo}"
            )));
        }
        Ok(())
    }

    pub fn source_rect(&self) -> SubdomainRect {
        self.source.rect(self.source_index.0, self.source_index.1)
    }

    pub fn target_rect(&self) -> SubdomainRect {
        self.target.rect(self.target_index.0, self.target_index.1)
    }
}
