//! Overlapping domain decomposition: subdomain layout, partition of unity,
//! relaxation weight, and the disjoint tilings feeding the localized
//! projection.

mod solve;

pub use solve::{
    assemble_local_data, dd_solve_ir, dd_solve_tfs, inner_ir, inner_ir_iterates, inner_tfs_local,
    inner_tfs_local_iterates, DdConfig,
};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{GridSpec, SubdomainRect};
use crate::tiling::{AxisPartition, TileGrid, TilingTriple};

/// Relaxation weight from subdomain coloring: non-overlapping same-color
/// groups allow a full step along each color.
pub fn alpha_hat_for(m1: usize, m2: usize) -> f64 {
    match (m1, m2) {
        (1, 1) => 1.0,
        (1, _) | (_, 1) => 0.5,
        _ => 0.25,
    }
}

/// Overlapping rectangular subdomain layout over a grid. Adjacent subdomains
/// overlap by exactly the configured widths; the union covers the grid.
#[derive(Debug, Clone)]
pub struct DdLayout {
    grid: GridSpec,
    row_ranges: Vec<(usize, usize)>,
    col_ranges: Vec<(usize, usize)>,
    overlap_y: usize,
    overlap_x: usize,
}

fn overlapping_axis(len: usize, parts: usize, overlap: usize) -> Result<Vec<(usize, usize)>> {
    if parts == 0 {
        return Err(Error::Layout("subdomain count must be >= 1".into()));
    }
    if parts == 1 {
        return Ok(vec![(0, len - 1)]);
    }
    if overlap < 2 {
        return Err(Error::Layout(format!(
            "overlap must be >= 2 grid points, got {overlap}"
        )));
    }
    let total = len + overlap * (parts - 1);
    let base = total / parts;
    let rem = total % parts;
    let mut ranges = Vec::with_capacity(parts);
    let mut start = 0usize;
    for k in 0..parts {
        let size = base + usize::from(k < rem);
        if size < overlap + 2 {
            return Err(Error::Layout(format!(
                "axis of {len} points split {parts} ways gives subdomain size {size} < overlap {overlap} + 2"
            )));
        }
        let end = start + size - 1;
        ranges.push((start, end));
        start = end + 1 - overlap;
    }
    debug_assert_eq!(ranges.last().unwrap().1, len - 1);
    Ok(ranges)
}

impl DdLayout {
    /// `m2 x m1` near-uniform subdomains of `grid` with exact overlaps
    /// `overlap_y`/`overlap_x` between vertical/horizontal neighbors.
    pub fn build(
        grid: GridSpec,
        m2: usize,
        m1: usize,
        overlap_y: usize,
        overlap_x: usize,
    ) -> Result<Self> {
        Ok(Self {
            row_ranges: overlapping_axis(grid.rows, m2, overlap_y)?,
            col_ranges: overlapping_axis(grid.cols, m1, overlap_x)?,
            grid,
            overlap_y,
            overlap_x,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `(m2, m1)`: subdomain counts along rows and columns.
    pub fn counts(&self) -> (usize, usize) {
        (self.row_ranges.len(), self.col_ranges.len())
    }

    pub fn subdomain_count(&self) -> usize {
        self.row_ranges.len() * self.col_ranges.len()
    }

    pub fn overlaps(&self) -> (usize, usize) {
        (self.overlap_y, self.overlap_x)
    }

    pub fn subdomain(&self, my: usize, mx: usize) -> SubdomainRect {
        let (rs, re) = self.row_ranges[my];
        let (cs, ce) = self.col_ranges[mx];
        SubdomainRect {
            row_start: rs,
            row_end: re,
            col_start: cs,
            col_end: ce,
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m1 = self.col_ranges.len();
        (0..self.subdomain_count()).map(move |i| (i / m1, i % m1))
    }

    pub fn flat_index(&self, m: (usize, usize)) -> usize {
        m.0 * self.col_ranges.len() + m.1
    }

    /// The same splitting intersected with a smaller grid (each end clamped).
    /// Used to reuse the extended-grid layout on the image grid.
    pub fn induced(&self, grid: GridSpec) -> Result<DdLayout> {
        if grid.rows > self.grid.rows || grid.cols > self.grid.cols {
            return Err(Error::Layout(format!(
                "induced grid {}x{} exceeds parent {}x{}",
                grid.rows, grid.cols, self.grid.rows, self.grid.cols
            )));
        }
        let clamp = |ranges: &[(usize, usize)], n: usize| -> Result<Vec<(usize, usize)>> {
            ranges
                .iter()
                .map(|&(s, e)| {
                    if s >= n {
                        Err(Error::Layout(format!(
                            "subdomain starting at {s} vanishes on induced axis of {n} points"
                        )))
                    } else {
                        Ok((s, e.min(n - 1)))
                    }
                })
                .collect()
        };
        Ok(DdLayout {
            row_ranges: clamp(&self.row_ranges, grid.rows)?,
            col_ranges: clamp(&self.col_ranges, grid.cols)?,
            grid,
            overlap_y: self.overlap_y,
            overlap_x: self.overlap_x,
        })
    }
}

/// Nonnegative weights summing to one pointwise, each supported on its
/// subdomain, with linear ramps across the overlap bands.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    thetas: Vec<ScalarField>,
    m1: usize,
}

impl PartitionOfUnity {
    pub fn theta(&self, m: (usize, usize)) -> &ScalarField {
        &self.thetas[m.0 * self.m1 + m.1]
    }

    pub fn thetas(&self) -> &[ScalarField] {
        &self.thetas
    }
}

fn axis_ramp(ranges: &[(usize, usize)], k: usize, n: usize) -> Vec<f64> {
    let (start, end) = ranges[k];
    let left_band = if k > 0 {
        ranges[k - 1].1 - start + 1
    } else {
        0
    };
    let right_band = if k + 1 < ranges.len() {
        end - ranges[k + 1].0 + 1
    } else {
        0
    };
    let mut ramp = vec![0.0; n];
    for (x, r) in ramp.iter_mut().enumerate().take(end + 1).skip(start) {
        let mut v: f64 = 1.0;
        if left_band > 0 && x < start + left_band {
            v = v.min((x - start + 1) as f64 / (left_band + 1) as f64);
        }
        if right_band > 0 && x + right_band > end {
            v = v.min((end - x + 1) as f64 / (right_band + 1) as f64);
        }
        *r = v;
    }
    ramp
}

/// Builds the separable partition of unity for a layout: per-axis linear
/// ramps over each overlap band, multiplied and normalized pointwise.
pub fn build_partition_of_unity(layout: &DdLayout) -> PartitionOfUnity {
    let g = *layout.grid();
    let (m2, m1) = layout.counts();
    let row_ramps: Vec<Vec<f64>> = (0..m2)
        .map(|k| axis_ramp(&layout.row_ranges, k, g.rows))
        .collect();
    let col_ramps: Vec<Vec<f64>> = (0..m1)
        .map(|k| axis_ramp(&layout.col_ranges, k, g.cols))
        .collect();

    let mut thetas: Vec<ScalarField> = Vec::with_capacity(m2 * m1);
    for row_ramp in &row_ramps {
        for col_ramp in &col_ramps {
            thetas.push(ScalarField::from_fn(g, |i, j| row_ramp[i] * col_ramp[j]));
        }
    }
    let mut total = ScalarField::zeros(g);
    for t in &thetas {
        total = total.add(t).expect("same grid");
    }
    for t in &mut thetas {
        *t = t.zip_map(&total, |a, s| a / s).expect("same grid");
    }
    PartitionOfUnity { thetas, m1 }
}

/// Per-axis partition with a forced interval: the tile at `idx` must shrink
/// back to `halo`; the remaining space left and right is split near-uniformly
/// into `idx` and `parts - 1 - idx` tiles.
fn axis_forced_partition(
    n: usize,
    parts: usize,
    idx: usize,
    halo: (usize, usize),
) -> Result<AxisPartition> {
    let (hs, he) = halo;
    let forced_end = if he == n - 1 {
        n - 1
    } else if he + 1 < n - 1 {
        he + 1
    } else {
        // A tile ending at n-1 keeps its last stripe under shrinking, so no
        // tile can shrink back to a halo ending at n-2.
        return Err(Error::Tiling(format!(
            "halo ending at {he} on an axis of {n} points admits no covering tile"
        )));
    };
    let left = hs; // points 0..hs-1
    let right = n - 1 - forced_end;
    if left < idx {
        return Err(Error::Tiling(format!(
            "{left} points left of the forced tile cannot host {idx} tiles"
        )));
    }
    if right < parts - 1 - idx {
        return Err(Error::Tiling(format!(
            "{right} points right of the forced tile cannot host {} tiles",
            parts - 1 - idx
        )));
    }
    let mut ranges = Vec::with_capacity(parts);
    if idx > 0 {
        for (s, e) in AxisPartition::uniform(left, idx)?.ranges() {
            ranges.push((*s, *e));
        }
    }
    ranges.push((hs, forced_end));
    if parts - 1 - idx > 0 {
        for (s, e) in AxisPartition::uniform(right, parts - 1 - idx)?.ranges() {
            ranges.push((s + forced_end + 1, e + forced_end + 1));
        }
    }
    AxisPartition::new(ranges, n)
}

/// Builds the three disjoint tilings for the localized projection between
/// subdomains `k` (source) and `m` (target): the source and target tilings
/// have their distinguished tiles forced so they shrink back to the padded
/// subdomains, and the free middle tiling is near-uniform.
pub fn build_tilings(
    layout: &DdLayout,
    k: (usize, usize),
    m: (usize, usize),
) -> Result<TilingTriple> {
    let g = layout.grid();
    let (m2, m1) = layout.counts();
    let halo_of = |idx: (usize, usize)| layout.subdomain(idx.0, idx.1).grow_rb(g);
    let k_halo = halo_of(k);
    let m_halo = halo_of(m);

    let source = TileGrid::new(
        axis_forced_partition(g.rows, m2, k.0, (k_halo.row_start, k_halo.row_end))?,
        axis_forced_partition(g.cols, m1, k.1, (k_halo.col_start, k_halo.col_end))?,
    );
    let target = TileGrid::new(
        axis_forced_partition(g.rows, m2, m.0, (m_halo.row_start, m_halo.row_end))?,
        axis_forced_partition(g.cols, m1, m.1, (m_halo.col_start, m_halo.col_end))?,
    );
    let spectral = TileGrid::uniform(g, m2, m1)?;

    let triple = TilingTriple {
        source,
        spectral,
        target,
        source_index: k,
        target_index: m,
    };
    triple.validate(g, &k_halo, &m_halo)?;
    Ok(triple)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize) -> GridSpec {
        GridSpec::new(rows, cols, 1.0).unwrap()
    }

    #[test]
    fn alpha_hat_table() {
        assert_eq!(alpha_hat_for(1, 1), 1.0);
        assert_eq!(alpha_hat_for(1, 4), 0.5);
        assert_eq!(alpha_hat_for(4, 1), 0.5);
        assert_eq!(alpha_hat_for(3, 3), 0.25);
        assert_eq!(alpha_hat_for(2, 5), 0.25);
    }

    #[test]
    fn single_subdomain_is_full_grid() {
        let g = grid(8, 8);
        let l = DdLayout::build(g, 1, 1, 2, 2).unwrap();
        assert_eq!(l.subdomain(0, 0), g.full_rect());
    }

    #[test]
    fn hand_layout_ten_wide_two_parts_overlap_two() {
        // 10-point axis, 2 parts, overlap 2: columns 0..=5 and 4..=9.
        let g = grid(10, 10);
        let l = DdLayout::build(g, 1, 2, 2, 2).unwrap();
        assert_eq!(l.subdomain(0, 0).col_start, 0);
        assert_eq!(l.subdomain(0, 0).col_end, 5);
        assert_eq!(l.subdomain(0, 1).col_start, 4);
        assert_eq!(l.subdomain(0, 1).col_end, 9);
    }

    #[test]
    fn layouts_cover_grid_with_exact_overlaps() {
        for (rows, cols, m2, m1, sy, sx) in [
            (17, 20, 2, 3, 2, 2),
            (33, 33, 3, 3, 4, 3),
            (12, 25, 2, 4, 3, 2),
        ] {
            let g = grid(rows, cols);
            let l = DdLayout::build(g, m2, m1, sy, sx).unwrap();
            let mut covered = vec![false; g.rows * g.cols];
            for (my, mx) in l.indices() {
                let r = l.subdomain(my, mx);
                for i in r.row_start..=r.row_end {
                    for j in r.col_start..=r.col_end {
                        covered[i * g.cols + j] = true;
                    }
                }
            }
            assert!(covered.iter().all(|&c| c));
            for w in l.row_ranges.windows(2) {
                assert_eq!(w[0].1 - w[1].0 + 1, sy);
            }
            for w in l.col_ranges.windows(2) {
                assert_eq!(w[0].1 - w[1].0 + 1, sx);
            }
        }
    }

    #[test]
    fn layout_rejects_infeasible_overlap() {
        assert!(DdLayout::build(grid(6, 6), 3, 1, 4, 2).is_err());
        assert!(DdLayout::build(grid(8, 8), 2, 2, 1, 1).is_err());
    }

    #[test]
    fn induced_layout_clamps_to_primal() {
        let ext = grid(11, 11);
        let l = DdLayout::build(ext, 2, 2, 2, 2).unwrap();
        let prim = l.induced(grid(10, 10)).unwrap();
        for (my, mx) in l.indices() {
            let want = l
                .subdomain(my, mx)
                .intersect(&grid(10, 10).full_rect())
                .unwrap();
            assert_eq!(prim.subdomain(my, mx), want);
        }
    }

    #[test]
    fn partition_of_unity_single_subdomain() {
        let l = DdLayout::build(grid(6, 7), 1, 1, 2, 2).unwrap();
        let pou = build_partition_of_unity(&l);
        for v in pou.theta((0, 0)).values().iter() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn partition_of_unity_overlap_two_values() {
        // Two subdomains, overlap 2: the band carries weights {2/3, 1/3},
        // mirrored between the neighbors.
        let g = grid(4, 10);
        let l = DdLayout::build(g, 1, 2, 2, 2).unwrap();
        let pou = build_partition_of_unity(&l);
        let t0 = pou.theta((0, 0));
        let t1 = pou.theta((0, 1));
        assert!((t0.values()[[0, 4]] - 2.0 / 3.0).abs() < 1e-14);
        assert!((t0.values()[[0, 5]] - 1.0 / 3.0).abs() < 1e-14);
        assert!((t1.values()[[0, 4]] - 1.0 / 3.0).abs() < 1e-14);
        assert!((t1.values()[[0, 5]] - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(t0.values()[[0, 6]], 0.0);
    }

    #[test]
    fn partition_of_unity_properties() {
        let g = grid(21, 19);
        let l = DdLayout::build(g, 2, 3, 4, 3).unwrap();
        let pou = build_partition_of_unity(&l);
        let mut total = ScalarField::zeros(g);
        for (my, mx) in l.indices() {
            let t = pou.theta((my, mx));
            let r = l.subdomain(my, mx);
            for ((i, j), v) in t.values().indexed_iter() {
                assert!(*v >= 0.0);
                if !r.contains_point(i, j) {
                    assert_eq!(*v, 0.0, "support leaks outside subdomain at ({i},{j})");
                }
            }
            total = total.add(t).unwrap();
        }
        for v in total.values().iter() {
            assert!((v - 1.0).abs() < 1e-14);
        }
        // Gradient bound C0 / s with C0 independent of the overlap width.
        let (sy, sx) = l.overlaps();
        for t in pou.thetas() {
            let gmax = crate::ops::grad(t).magnitude().max_abs();
            assert!(gmax <= 2.0 / sy.min(sx) as f64 + 1e-12);
        }
    }

    #[test]
    fn tilings_degenerate_single_subdomain() {
        let g = grid(9, 9);
        let l = DdLayout::build(g, 1, 1, 2, 2).unwrap();
        let t = build_tilings(&l, (0, 0), (0, 0)).unwrap();
        assert_eq!(t.source_rect(), g.full_rect());
        assert_eq!(t.target_rect(), g.full_rect());
    }

    #[test]
    fn tilings_valid_for_all_pairs() {
        let g = grid(9, 9);
        let l = DdLayout::build(g, 2, 2, 2, 2).unwrap();
        for k in l.indices() {
            for m in l.indices() {
                let t = build_tilings(&l, k, m).unwrap();
                let k_halo = l.subdomain(k.0, k.1).grow_rb(&g);
                let m_halo = l.subdomain(m.0, m.1).grow_rb(&g);
                t.validate(&g, &k_halo, &m_halo).unwrap();
            }
        }
    }

    #[test]
    fn tiling_spread_is_bounded_for_near_square_layouts() {
        // The distinguished tiles are pinned by the shrink condition, which
        // fixes the whole axis partition for interior subdomains; on a 25x25
        // grid with a 3x3 layout the worst attainable area ratio is 5.76.
        let g = grid(25, 25);
        let l = DdLayout::build(g, 3, 3, 3, 3).unwrap();
        for k in l.indices() {
            for m in l.indices() {
                let t = build_tilings(&l, k, m).unwrap();
                for tg in [&t.source, &t.target] {
                    let spread = tg.max_tile_area() as f64 / tg.min_tile_area() as f64;
                    assert!(spread <= 6.0, "tile spread {spread} too large");
                }
            }
        }
    }
}
