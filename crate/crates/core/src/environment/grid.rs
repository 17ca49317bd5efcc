use crate::error::{Error, Result};
use crate::geometry::Point;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Sidecar metadata for a PGM map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    /// Cell edge length (m).
    pub resolution: f64,
    /// World position of the lower-left corner of cell (0, 0).
    pub origin: [f64; 2],
}

/// Boolean occupancy grid; `true` marks a static obstacle.
///
/// Cells are stored row-major with row 0 at the lowest `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Point,
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, origin: Point, width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidGrid(format!("resolution must be positive, got {resolution}")));
        }
        if cells.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "expected {} cells for {width}x{height}, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            cells,
        })
    }

    pub fn empty(resolution: f64, origin: Point, width: usize, height: usize) -> Result<Self> {
        Self::new(resolution, origin, width, height, vec![false; width * height])
    }

    /// Grid whose occupied cells are those with centers inside any of the
    /// axis-aligned rectangles `[x_min, y_min, x_max, y_max]`.
    pub fn from_rects(
        resolution: f64,
        origin: Point,
        width: usize,
        height: usize,
        rects: &[[f64; 4]],
    ) -> Result<Self> {
        let mut grid = Self::empty(resolution, origin, width, height)?;
        for iy in 0..height {
            for ix in 0..width {
                let c = grid.cell_center(ix, iy);
                if rects
                    .iter()
                    .any(|r| c.x >= r[0] && c.x <= r[2] && c.y >= r[1] && c.y <= r[3])
                {
                    grid.cells[iy * width + ix] = true;
                }
            }
        }
        Ok(grid)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn set(&mut self, ix: usize, iy: usize, occupied: bool) {
        self.cells[iy * self.width + ix] = occupied;
    }

    pub fn is_occupied(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.width + ix]
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// World-frame bounds `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        let extent = Point::new(self.width as f64, self.height as f64) * self.resolution;
        (self.origin, self.origin + extent)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.cell_of(p).is_some()
    }

    pub fn cell_of(&self, p: &Point) -> Option<(usize, usize)> {
        let rel = (p - self.origin) / self.resolution;
        if !(rel.x >= 0.0 && rel.y >= 0.0) {
            return None;
        }
        let (ix, iy) = (rel.x.floor() as usize, rel.y.floor() as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        self.origin + Point::new(ix as f64 + 0.5, iy as f64 + 0.5) * self.resolution
    }

    /// Lower-left and upper-right corners of a cell.
    pub fn cell_bounds(&self, ix: usize, iy: usize) -> (Point, Point) {
        let lo = self.origin + Point::new(ix as f64, iy as f64) * self.resolution;
        (lo, lo + Point::new(self.resolution, self.resolution))
    }

    /// `Some(true)` if `p` falls in an occupied cell, `None` outside the grid.
    pub fn occupied_at(&self, p: &Point) -> Option<bool> {
        self.cell_of(p).map(|(ix, iy)| self.is_occupied(ix, iy))
    }

    /// Closest point of a cell square to `p`.
    pub fn closest_point_in_cell(&self, ix: usize, iy: usize, p: &Point) -> Point {
        let (lo, hi) = self.cell_bounds(ix, iy);
        Point::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y))
    }

    /// True if any occupied cell lies within `radius` of `center`
    /// (touching counts).
    pub fn disc_hits_obstacle(&self, center: &Point, radius: f64) -> bool {
        let lo = (center - Point::new(radius, radius) - self.origin) / self.resolution;
        let hi = (center + Point::new(radius, radius) - self.origin) / self.resolution;
        if hi.x < 0.0 || hi.y < 0.0 {
            return false;
        }
        let x0 = lo.x.floor().max(0.0) as usize;
        let y0 = lo.y.floor().max(0.0) as usize;
        let x1 = (hi.x.floor() as usize).min(self.width.saturating_sub(1));
        let y1 = (hi.y.floor() as usize).min(self.height.saturating_sub(1));
        if x0 >= self.width || y0 >= self.height {
            return false;
        }
        let r2 = radius * radius;
        (y0..=y1).any(|iy| {
            (x0..=x1).any(|ix| {
                self.is_occupied(ix, iy)
                    && (self.closest_point_in_cell(ix, iy, center) - center).norm_squared() <= r2
            })
        })
    }

    /// Parses a binary (P5) PGM. Pixel values below 128 are occupied; the
    /// first image row is the top (largest `y`) of the map.
    pub fn from_pgm(bytes: &[u8], meta: GridMeta) -> Result<Self> {
        let (width, height, maxval, data) = parse_pgm(bytes)?;
        if maxval > 255 {
            return Err(Error::InvalidGrid("16-bit PGM is not supported".into()));
        }
        if data.len() < width * height {
            return Err(Error::InvalidGrid(format!(
                "PGM truncated: expected {} pixels, found {}",
                width * height,
                data.len()
            )));
        }
        let mut cells = vec![false; width * height];
        for row in 0..height {
            let iy = height - 1 - row;
            for ix in 0..width {
                cells[iy * width + ix] = data[row * width + ix] < 128;
            }
        }
        Self::new(
            meta.resolution,
            Point::new(meta.origin[0], meta.origin[1]),
            width,
            height,
            cells,
        )
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in 0..self.height {
            let iy = self.height - 1 - row;
            out.extend((0..self.width).map(|ix| if self.is_occupied(ix, iy) { 0u8 } else { 255u8 }));
        }
        out
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            resolution: self.resolution,
            origin: [self.origin.x, self.origin.y],
        }
    }

    /// Loads a PGM map together with its JSON sidecar.
    pub fn load_pgm(pgm: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(&pgm).map_err(|e| Error::io(&pgm, e))?;
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: GridMeta = serde_json::from_str(&text)?;
        Self::from_pgm(&bytes, meta)
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::InvalidGrid("PGM header truncated".into()));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or(""));
    }
    if tokens[0] != "P5" {
        return Err(Error::InvalidGrid(format!("expected P5 magic, found {:?}", tokens[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::InvalidGrid(format!("bad PGM header field {s:?}")))
    };
    let (w, h, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    Ok((w, h, maxval, bytes.get(pos..).unwrap_or(&[])))
}
