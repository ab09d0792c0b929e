use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{GridSpec, ObstacleMask};
use crate::error::{Error, Result};

/// Plain-text obstacle raster.
///
/// ```text
/// cols rows x1origin x2origin cellsize
/// 0 0 1 1 ...
/// ```
///
/// Rows run north to south (the first row has the largest `x2`). The origin
/// is the center of the south-west cell, so cell `(c, r)` counted from the
/// south-west sits at `origin + (c, r) · cellsize`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFile {
    pub cols: usize,
    pub rows: usize,
    pub origin: [f64; 2],
    pub cellsize: f64,
    /// South-to-north, west-to-east (row 0 is the southern edge).
    pub cells: Vec<bool>,
}

impl MaskFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::parse(origin, "empty mask file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 {
            return Err(Error::parse(origin, "header must be `cols rows x1origin x2origin cellsize`"));
        }
        let bad = |what: &str| Error::parse(origin, format!("malformed header field {what}"));
        let cols: usize = h[0].parse().map_err(|_| bad("cols"))?;
        let rows: usize = h[1].parse().map_err(|_| bad("rows"))?;
        let x0: f64 = h[2].parse().map_err(|_| bad("x1origin"))?;
        let y0: f64 = h[3].parse().map_err(|_| bad("x2origin"))?;
        let cellsize: f64 = h[4].parse().map_err(|_| bad("cellsize"))?;
        if !(cellsize > 0.0) || !cellsize.is_finite() {
            return Err(Error::parse(origin, "cellsize must be positive"));
        }
        let mut north_up = Vec::with_capacity(cols * rows);
        for line in lines {
            for tok in line.split_whitespace() {
                north_up.push(match tok {
                    "0" => false,
                    "1" => true,
                    other => return Err(Error::parse(origin, format!("unexpected token {other:?}"))),
                });
            }
        }
        if north_up.len() != cols * rows {
            return Err(Error::parse(
                origin,
                format!("expected {} tokens, found {}", cols * rows, north_up.len()),
            ));
        }
        let mut cells = Vec::with_capacity(cols * rows);
        for r in (0..rows).rev() {
            cells.extend_from_slice(&north_up[r * cols..(r + 1) * cols]);
        }
        Ok(MaskFile {
            cols,
            rows,
            origin: [x0, y0],
            cellsize,
            cells,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Node-aligned raster of a mask. Requires equal `x1` and `x2` steps.
    pub fn from_mask(mask: &ObstacleMask) -> Result<Self> {
        if (mask.x1.step - mask.x2.step).abs() > 1e-12 * mask.x1.step {
            return Err(Error::parse("obstacles", "mask export needs equal x1 and x2 steps"));
        }
        let (cols, rows) = mask.dims();
        Ok(MaskFile {
            cols,
            rows,
            origin: [mask.x1.min, mask.x2.min],
            cellsize: mask.x1.step,
            cells: mask.cells.clone(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {:?} {:?} {:?}\n",
            self.cols, self.rows, self.origin[0], self.origin[1], self.cellsize
        );
        for r in (0..self.rows).rev() {
            let row: Vec<&str> = self.cells[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(|&c| if c { "1" } else { "0" })
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Whether the cell nearest to `(x1, x2)` is blocked; points outside the
    /// raster are free.
    pub fn blocked_at(&self, x1: f64, x2: f64) -> bool {
        let c = ((x1 - self.origin[0]) / self.cellsize).round();
        let r = ((x2 - self.origin[1]) / self.cellsize).round();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return false;
        }
        self.cells[r as usize * self.cols + c as usize]
    }

    /// Nearest-cell resampling onto the `(x1, x2)` nodes of `grid`.
    pub fn resample(&self, grid: &GridSpec) -> ObstacleMask {
        ObstacleMask::from_fn(*grid.x1(), *grid.x2(), |x1, x2| self.blocked_at(x1, x2))
    }
}
