use serde::{Deserialize, Serialize};

use super::scenario::{ParticipantKind, LANE_WIDTH, ROAD_WIDTH};
use super::world::{Aabb, WorldState};
use crate::error::{Error, Result};

/// Cell categories; the palette value is `code × 0.2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Category {
    Free = 0,
    LaneMarking = 1,
    Ego = 2,
    Vehicle = 3,
    Pedestrian = 4,
    Offroad = 5,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Free,
        Category::LaneMarking,
        Category::Ego,
        Category::Vehicle,
        Category::Pedestrian,
        Category::Offroad,
    ];

    pub fn value(self) -> f64 {
        PALETTE[self as usize]
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

pub const PALETTE: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Raster window anchored to the ego: `behind` metres behind its centre to
/// `ahead` metres in front, `width` metres centred on the road.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub ahead: f64,
    pub behind: f64,
    pub width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { rows: 80, cols: 45, ahead: 35.0, behind: 5.0, width: 11.25 }
    }
}

impl GridSpec {
    /// Same physical window, fewer cells.
    pub fn reduced(rows: usize, cols: usize) -> Self {
        Self { rows, cols, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.width <= 0.0 || self.ahead + self.behind <= 0.0 {
            return Err(Error::Config(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_length(&self) -> f64 {
        (self.ahead + self.behind) / self.rows as f64
    }

    pub fn cell_width(&self) -> f64 {
        self.width / self.cols as f64
    }

    pub fn x_min(&self) -> f64 {
        ROAD_WIDTH / 2.0 - self.width / 2.0
    }

    /// Lateral extent `[x0, x1)` of column `c`.
    pub fn col_span(&self, c: usize) -> (f64, f64) {
        let w = self.cell_width();
        (self.x_min() + c as f64 * w, self.x_min() + (c + 1) as f64 * w)
    }

    /// Longitudinal extent `[y0, y1)` of row `r`; row 0 is the farthest ahead.
    pub fn row_span(&self, r: usize, ego_y: f64) -> (f64, f64) {
        let h = self.cell_length();
        let top = ego_y + self.ahead;
        (top - (r + 1) as f64 * h, top - r as f64 * h)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SemanticGrid {
    pub rows: usize,
    pub cols: usize,
    pub codes: Vec<u8>,
}

impl SemanticGrid {
    pub fn get(&self, r: usize, c: usize) -> Category {
        Category::from_code(self.codes[r * self.cols + c]).expect("grid holds valid codes")
    }

    pub fn value(&self, r: usize, c: usize) -> f64 {
        self.get(r, c).value()
    }

    pub fn values(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| PALETTE[c as usize]).collect()
    }

    pub fn count(&self, cat: Category) -> usize {
        self.codes.iter().filter(|&&c| c == cat as u8).count()
    }

    /// Cells of `cat` as `(row, col)` pairs in raster order.
    pub fn cells_of(&self, cat: Category) -> Vec<(usize, usize)> {
        self.codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cat as u8)
            .map(|(i, _)| (i / self.cols, i % self.cols))
            .collect()
    }
}

fn span_overlaps(a: (f64, f64), lo: f64, hi: f64) -> bool {
    a.0 < hi && lo < a.1
}

fn paint(grid: &mut SemanticGrid, spec: &GridSpec, ego_y: f64, b: &Aabb, cat: Category) {
    for r in 0..spec.rows {
        if !span_overlaps(spec.row_span(r, ego_y), b.y0, b.y1) {
            continue;
        }
        for c in 0..spec.cols {
            if span_overlaps(spec.col_span(c), b.x0, b.x1) {
                grid.codes[r * spec.cols + c] = cat as u8;
            }
        }
    }
}

/// Rasterizes the window around the ego. Static layers come first, then
/// traffic, then the ego on top; an object marks every cell it overlaps.
pub fn render_grid(world: &WorldState, spec: &GridSpec) -> SemanticGrid {
    let mut grid = SemanticGrid { rows: spec.rows, cols: spec.cols, codes: vec![0; spec.len()] };
    let mut column = vec![Category::Free; spec.cols];
    for (c, cat) in column.iter_mut().enumerate() {
        let (x0, x1) = spec.col_span(c);
        let centre = (x0 + x1) / 2.0;
        *cat = if !(0.0..=ROAD_WIDTH).contains(&centre) {
            Category::Offroad
        } else if x0 <= LANE_WIDTH && LANE_WIDTH < x1 {
            Category::LaneMarking
        } else {
            Category::Free
        };
    }
    for row in grid.codes.chunks_mut(spec.cols) {
        for (cell, cat) in row.iter_mut().zip(&column) {
            *cell = *cat as u8;
        }
    }
    let ego_y = world.ego.y;
    for p in &world.traffic {
        let cat = if p.kind == ParticipantKind::Pedestrian { Category::Pedestrian } else { Category::Vehicle };
        paint(&mut grid, spec, ego_y, &p.aabb(), cat);
    }
    paint(&mut grid, spec, ego_y, &world.ego.aabb(), Category::Ego);
    grid
}
