//! Generated grayscale test images in `[0, 1]`.

use crate::field::ScalarField;
use crate::grid::GridSpec;

/// Piecewise-constant phantom: a bright disk and two stripes on a dark
/// background. Strong edges, no texture.
pub fn phantom_shapes(rows: usize, cols: usize) -> ScalarField {
    let grid = GridSpec { rows, cols, h: 1.0 };
    let cy = 0.42 * rows as f64;
    let cx = 0.38 * cols as f64;
    let r = 0.22 * rows.min(cols) as f64;
    ScalarField::from_fn(grid, |i, j| {
        let (y, x) = (i as f64, j as f64);
        let mut v = 0.15;
        if j >= (0.68 * cols as f64) as usize && j < (0.80 * cols as f64) as usize {
            v = 0.55;
        }
        if i >= (0.74 * rows as f64) as usize && i < (0.86 * rows as f64) as usize {
            v = 0.35;
        }
        if (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r {
            v = 0.85;
        }
        v
    })
}

/// Smooth diagonal ramp with a bright square and a dark disk on top.
/// Exercises gradients and edges together.
pub fn phantom_ramp_edges(rows: usize, cols: usize) -> ScalarField {
    let grid = GridSpec { rows, cols, h: 1.0 };
    let sq0 = (0.15 * rows as f64) as usize;
    let sq1 = (0.45 * rows as f64) as usize;
    let cy = 0.70 * rows as f64;
    let cx = 0.30 * cols as f64;
    let r = 0.14 * rows.min(cols) as f64;
    ScalarField::from_fn(grid, |i, j| {
        let ramp = 0.1 + 0.6 * (i + j) as f64 / (rows + cols - 2).max(1) as f64;
        let (y, x) = (i as f64, j as f64);
        let in_square = i >= sq0
            && i < sq1
            && j >= (0.55 * cols as f64) as usize
            && j < (0.85 * cols as f64) as usize;
        let in_disk = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
        if in_square {
            0.95
        } else if in_disk {
            0.05
        } else {
            ramp
        }
    })
}
