//! Pixel grids and rectangular index algebra.
//!
//! Images live on a `rows x cols` grid of equidistant pixel centers with mesh
//! width `h`. The dual quantities live on the extended grid with one extra row
//! and column. All indices in this crate are 0-based and inclusive.

use crate::error::{Error, Result};

/// Rectangular pixel grid: `rows x cols` points with mesh width `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, h: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid must be non-empty, got {rows}x{cols}"
            )));
        }
        if h.is_nan() || h <= 0.0 || h.is_infinite() {
            return Err(Error::InvalidGrid(format!(
                "mesh width must be > 0, got {h}"
            )));
        }
        Ok(Self { rows, cols, h })
    }

    /// The extended grid, one extra row and column.
    pub fn extended(&self) -> GridSpec {
        GridSpec {
            rows: self.rows + 1,
            cols: self.cols + 1,
            h: self.h,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Full-grid rectangle.
    pub fn full_rect(&self) -> SubdomainRect {
        SubdomainRect {
            row_start: 0,
            row_end: self.rows - 1,
            col_start: 0,
            col_end: self.cols - 1,
        }
    }
}

/// Inclusive index rectangle inside a parent grid. 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubdomainRect {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl SubdomainRect {
    pub fn new(row_start: usize, row_end: usize, col_start: usize, col_end: usize) -> Result<Self> {
        if row_end < row_start || col_end < col_start {
            return Err(Error::DegenerateRect(format!(
                "rows {row_start}..={row_end}, cols {col_start}..={col_end}"
            )));
        }
        Ok(Self {
            row_start,
            row_end,
            col_start,
            col_end,
        })
    }

    pub fn rows(&self) -> usize {
        self.row_end - self.row_start + 1
    }

    pub fn cols(&self) -> usize {
        self.col_end - self.col_start + 1
    }

    pub fn area(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn fits_in(&self, grid: &GridSpec) -> bool {
        self.row_end < grid.rows && self.col_end < grid.cols
    }

    pub fn contains(&self, other: &SubdomainRect) -> bool {
        self.row_start <= other.row_start
            && other.row_end <= self.row_end
            && self.col_start <= other.col_start
            && other.col_end <= self.col_end
    }

    pub fn contains_point(&self, i: usize, j: usize) -> bool {
        self.row_start <= i && i <= self.row_end && self.col_start <= j && j <= self.col_end
    }

    pub fn intersect(&self, other: &SubdomainRect) -> Option<SubdomainRect> {
        let row_start = self.row_start.max(other.row_start);
        let row_end = self.row_end.min(other.row_end);
        let col_start = self.col_start.max(other.col_start);
        let col_end = self.col_end.min(other.col_end);
        if row_start <= row_end && col_start <= col_end {
            Some(SubdomainRect {
                row_start,
                row_end,
                col_start,
                col_end,
            })
        } else {
            None
        }
    }

    /// Appends the one-pixel stripe below (`row_end + 1`) and to the right
    /// (`col_end + 1`) whenever those stripes exist inside `parent`. The four
    /// boundary cases: a rectangle touching the bottom (right) edge keeps its
    /// row (column) extent.
    pub fn grow_rb(&self, parent: &GridSpec) -> SubdomainRect {
        debug_assert!(self.fits_in(parent));
        SubdomainRect {
            row_start: self.row_start,
            row_end: if self.row_end + 1 < parent.rows {
                self.row_end + 1
            } else {
                self.row_end
            },
            col_start: self.col_start,
            col_end: if self.col_end + 1 < parent.cols {
                self.col_end + 1
            } else {
                self.col_end
            },
        }
    }

    /// Removes the last row and column stripes under the same case split as
    /// [`grow_rb`](Self::grow_rb): a stripe is removed only when the rectangle
    /// does not touch the corresponding parent edge. Errors when removal would
    /// leave an empty rectangle.
    pub fn shrink_rb(&self, parent: &GridSpec) -> Result<SubdomainRect> {
        debug_assert!(self.fits_in(parent));
        let row_end = if self.row_end + 1 < parent.rows {
            if self.row_end == self.row_start {
                return Err(Error::DegenerateRect(format!(
                    "cannot remove last row stripe from single-row rect rows {}..={}",
                    self.row_start, self.row_end
                )));
            }
            self.row_end - 1
        } else {
            self.row_end
        };
        let col_end = if self.col_end + 1 < parent.cols {
            if self.col_end == self.col_start {
                return Err(Error::DegenerateRect(format!(
                    "cannot remove last column stripe from single-column rect cols {}..={}",
                    self.col_start, self.col_end
                )));
            }
            self.col_end - 1
        } else {
            self.col_end
        };
        Ok(SubdomainRect {
            row_start: self.row_start,
            row_end,
            col_start: self.col_start,
            col_end,
        })
    }

    /// Expands by one pixel on every side, clamped to the parent grid.
    pub fn grow_halo(&self, parent: &GridSpec) -> SubdomainRect {
        SubdomainRect {
            row_start: self.row_start.saturating_sub(1),
            row_end: (self.row_end + 1).min(parent.rows - 1),
            col_start: self.col_start.saturating_sub(1),
            col_end: (self.col_end + 1).min(parent.cols - 1),
        }
    }
}

impl std::fmt::Display for SubdomainRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}..={}, {}..={}]",
            self.row_start, self.row_end, self.col_start, self.col_end
        )
    }
}
