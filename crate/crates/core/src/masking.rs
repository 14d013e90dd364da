//! Quarter-block masking geometry.
//!
//! One quarter of the grid stays visible, either at a corner (prediction
//! offsets of half the grid) or at the center (offsets of a quarter, with the
//! visible block split into four sub-blocks that each predict outward). The
//! other three quarters, 75% of the cells, are masked.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("{height}x{width} grid does not divide evenly for a {position} layout")]
    Indivisible {
        height: usize,
        width: usize,
        position: Position,
    },
    #[error("direction {direction} has no masked target in a {position} layout")]
    InapplicableDirection {
        direction: Direction,
        position: Position,
    },
    #[error("unknown {kind} '{value}'")]
    Unknown { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Position {
    #[serde(rename = "tl")]
    TopLeft,
    #[serde(rename = "tr")]
    TopRight,
    #[serde(rename = "bl")]
    BottomLeft,
    #[serde(rename = "br")]
    BottomRight,
    #[serde(rename = "center")]
    Center,
}

impl Position {
    pub const ALL: [Position; 5] = [
        Position::TopLeft,
        Position::TopRight,
        Position::BottomLeft,
        Position::BottomRight,
        Position::Center,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Position::TopLeft => "tl",
            Position::TopRight => "tr",
            Position::BottomLeft => "bl",
            Position::BottomRight => "br",
            Position::Center => "center",
        }
    }

    pub fn is_corner(self) -> bool {
        self != Position::Center
    }

    /// Corners predict over half the grid, the center over a quarter.
    pub fn scale(self) -> Scale {
        if self.is_corner() {
            Scale::Half
        } else {
            Scale::Quarter
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Position {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Position::ALL
            .into_iter()
            .find(|p| p.tag() == s)
            .ok_or_else(|| MaskError::Unknown {
                kind: "position",
                value: s.to_string(),
            })
    }
}

/// Prediction scale: the offset as a fraction of the grid extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Quarter,
    Half,
}

impl Scale {
    pub fn tag(self) -> &'static str {
        match self {
            Scale::Quarter => "quarter",
            Scale::Half => "half",
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// The eight prediction directions. `Down` is increasing row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Right,
    Down,
    Left,
    Up,
    DownRight,
    DownLeft,
    UpRight,
    UpLeft,
}

impl Direction {
    /// Tag order; also the tie-break order for cell assignment.
    pub const ALL: [Direction; 8] = [
        Direction::Right,
        Direction::Down,
        Direction::Left,
        Direction::Up,
        Direction::DownRight,
        Direction::DownLeft,
        Direction::UpRight,
        Direction::UpLeft,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Direction::Right => "right",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Up => "up",
            Direction::DownRight => "down-right",
            Direction::DownLeft => "down-left",
            Direction::UpRight => "up-right",
            Direction::UpLeft => "up-left",
        }
    }

    /// `(sx, sy)`: sign of the column step and of the row step.
    pub fn signs(self) -> (i32, i32) {
        match self {
            Direction::Right => (1, 0),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Up => (0, -1),
            Direction::DownRight => (1, 1),
            Direction::DownLeft => (-1, 1),
            Direction::UpRight => (1, -1),
            Direction::UpLeft => (-1, -1),
        }
    }

    pub fn from_signs(sx: i32, sy: i32) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.signs() == (sx, sy))
    }

    pub fn is_diagonal(self) -> bool {
        let (sx, sy) = self.signs();
        sx != 0 && sy != 0
    }

    /// Signed `(row, col)` step for the given cell offsets.
    pub fn offset(self, dx_cells: usize, dy_cells: usize) -> (isize, isize) {
        let (sx, sy) = self.signs();
        (
            sy as isize * dy_cells as isize,
            sx as isize * dx_cells as isize,
        )
    }

    pub fn mirrored_horizontally(self) -> Direction {
        let (sx, sy) = self.signs();
        Direction::from_signs(-sx, sy).expect("eight directions are closed under mirroring")
    }

    pub fn mirrored_vertically(self) -> Direction {
        let (sx, sy) = self.signs();
        Direction::from_signs(sx, -sy).expect("eight directions are closed under mirroring")
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Direction {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Direction::ALL
            .into_iter()
            .find(|d| d.tag() == s)
            .ok_or_else(|| MaskError::Unknown {
                kind: "direction",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellPair {
    pub source: Cell,
    pub target: Cell,
}

/// Half-open cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row..self.row + self.height).contains(&row)
            && (self.col..self.col + self.width).contains(&col)
    }

    pub fn cell_count(&self) -> usize {
        self.height * self.width
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.row..self.row + self.height)
            .flat_map(move |r| (self.col..self.col + self.width).map(move |c| Cell::new(r, c)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuarterLayout {
    height: usize,
    width: usize,
    position: Position,
    dx_cells: usize,
    dy_cells: usize,
    unmasked: Rect,
    sub_blocks: Vec<Rect>,
}

pub fn make_layout(
    height: usize,
    width: usize,
    position: Position,
) -> Result<QuarterLayout, MaskError> {
    let divisor = if position.is_corner() { 2 } else { 4 };
    if height == 0
        || width == 0
        || !height.is_multiple_of(divisor)
        || !width.is_multiple_of(divisor)
    {
        return Err(MaskError::Indivisible {
            height,
            width,
            position,
        });
    }
    let (hh, hw) = (height / 2, width / 2);
    let (row, col) = match position {
        Position::TopLeft => (0, 0),
        Position::TopRight => (0, hw),
        Position::BottomLeft => (hh, 0),
        Position::BottomRight => (hh, hw),
        Position::Center => (height / 4, width / 4),
    };
    let unmasked = Rect {
        row,
        col,
        height: hh,
        width: hw,
    };
    let (dx_cells, dy_cells, sub_blocks) = if position.is_corner() {
        (hw, hh, vec![unmasked])
    } else {
        let (qh, qw) = (height / 4, width / 4);
        let subs = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .into_iter()
            .map(|(i, j)| Rect {
                row: row + i * qh,
                col: col + j * qw,
                height: qh,
                width: qw,
            })
            .collect();
        (qw, qh, subs)
    };
    Ok(QuarterLayout {
        height,
        width,
        position,
        dx_cells,
        dy_cells,
        unmasked,
        sub_blocks,
    })
}

impl QuarterLayout {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn scale(&self) -> Scale {
        self.position.scale()
    }

    pub fn dx_cells(&self) -> usize {
        self.dx_cells
    }

    pub fn dy_cells(&self) -> usize {
        self.dy_cells
    }

    pub fn unmasked(&self) -> Rect {
        self.unmasked
    }

    /// Source blocks: the visible quarter for corners, its four
    /// sub-blocks (TL, TR, BL, BR) for the center.
    pub fn sub_blocks(&self) -> &[Rect] {
        &self.sub_blocks
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width && !self.unmasked.contains(row, col)
    }

    pub fn masked_cell_count(&self) -> usize {
        self.height * self.width - self.unmasked.cell_count()
    }

    /// Picks the (direction, source) predicting a masked cell: the smallest
    /// offset magnitude wins, ties go to the earlier direction tag.
    fn assign(&self, target: Cell) -> Option<(Direction, Cell)> {
        let mut best: Option<(usize, Direction, Cell)> = None;
        for direction in Direction::ALL {
            let (dr, dc) = direction.offset(self.dx_cells, self.dy_cells);
            let (Some(row), Some(col)) = (
                target.row.checked_add_signed(-dr),
                target.col.checked_add_signed(-dc),
            ) else {
                continue;
            };
            if !self.sub_blocks.iter().any(|b| b.contains(row, col)) {
                continue;
            }
            let magnitude = (dr * dr + dc * dc) as usize;
            if best.is_none_or(|(m, _, _)| magnitude < m) {
                best = Some((magnitude, direction, Cell::new(row, col)));
            }
        }
        best.map(|(_, d, s)| (d, s))
    }

    /// Every masked cell with its assigned direction and source, row-major
    /// over targets.
    pub fn assignments(&self) -> Vec<(Direction, CellPair)> {
        let mut out = Vec::with_capacity(self.masked_cell_count());
        for row in 0..self.height {
            for col in 0..self.width {
                if !self.is_masked(row, col) {
                    continue;
                }
                let target = Cell::new(row, col);
                if let Some((direction, source)) = self.assign(target) {
                    out.push((direction, CellPair { source, target }));
                }
            }
        }
        out
    }

    /// Directions with at least one assigned pair, in tag order.
    pub fn applicable_directions(&self) -> Vec<Direction> {
        let used: Vec<Direction> = self.assignments().into_iter().map(|(d, _)| d).collect();
        Direction::ALL
            .into_iter()
            .filter(|d| used.contains(d))
            .collect()
    }
}

/// Source→target pairs predicted along `direction`, sorted by source cell
/// (row-major).
pub fn pair_indices(
    layout: &QuarterLayout,
    direction: Direction,
) -> Result<Vec<CellPair>, MaskError> {
    let mut pairs: Vec<CellPair> = layout
        .assignments()
        .into_iter()
        .filter(|(d, _)| *d == direction)
        .map(|(_, p)| p)
        .collect();
    if pairs.is_empty() {
        return Err(MaskError::InapplicableDirection {
            direction,
            position: layout.position,
        });
    }
    pairs.sort();
    Ok(pairs)
}

#[derive(Serialize, Deserialize)]
struct LayoutRecord {
    position: Position,
    #[serde(rename = "H")]
    height: usize,
    #[serde(rename = "W")]
    width: usize,
    dx_cells: usize,
    dy_cells: usize,
}

impl Serialize for QuarterLayout {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        LayoutRecord {
            position: self.position,
            height: self.height,
            width: self.width,
            dx_cells: self.dx_cells,
            dy_cells: self.dy_cells,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuarterLayout {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rec = LayoutRecord::deserialize(deserializer)?;
        let layout =
            make_layout(rec.height, rec.width, rec.position).map_err(serde::de::Error::custom)?;
        if (layout.dx_cells, layout.dy_cells) != (rec.dx_cells, rec.dy_cells) {
            return Err(serde::de::Error::custom(format!(
                "offsets ({}, {}) inconsistent with a {}x{} {} layout",
                rec.dx_cells, rec.dy_cells, rec.height, rec.width, rec.position
            )));
        }
        Ok(layout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_tl_geometry() {
        let l = make_layout(16, 16, Position::TopLeft).unwrap();
        assert_eq!(
            l.unmasked(),
            Rect {
                row: 0,
                col: 0,
                height: 8,
                width: 8
            }
        );
        assert_eq!((l.dx_cells(), l.dy_cells()), (8, 8));
        assert_eq!(
            l.applicable_directions(),
            vec![Direction::Right, Direction::Down, Direction::DownRight]
        );
    }

    #[test]
    fn center_geometry() {
        let l = make_layout(16, 16, Position::Center).unwrap();
        assert_eq!(
            l.unmasked(),
            Rect {
                row: 4,
                col: 4,
                height: 8,
                width: 8
            }
        );
        assert_eq!((l.dx_cells(), l.dy_cells()), (4, 4));
        assert_eq!(l.sub_blocks().len(), 4);
        assert!(l.sub_blocks().iter().all(|b| b.height == 4 && b.width == 4));
        assert_eq!(l.applicable_directions(), Direction::ALL.to_vec());
    }

    #[test]
    fn divisibility() {
        assert!(matches!(
            make_layout(15, 16, Position::TopLeft),
            Err(MaskError::Indivisible { .. })
        ));
        assert!(matches!(
            make_layout(18, 16, Position::Center),
            Err(MaskError::Indivisible { .. })
        ));
        assert!(make_layout(18, 16, Position::BottomRight).is_ok());
    }

    #[test]
    fn tl_right_and_diagonal_pairs() {
        let l = make_layout(16, 16, Position::TopLeft).unwrap();
        let right = pair_indices(&l, Direction::Right).unwrap();
        assert_eq!(right.len(), 64);
        let mut expect = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                expect.push(CellPair {
                    source: Cell::new(i, j),
                    target: Cell::new(i, j + 8),
                });
            }
        }
        assert_eq!(right, expect);
        let diag = pair_indices(&l, Direction::DownRight).unwrap();
        assert_eq!(diag.len(), 64);
        assert!(diag
            .iter()
            .all(|p| p.target == Cell::new(p.source.row + 8, p.source.col + 8)));
    }

    #[test]
    fn tl_left_is_inapplicable() {
        let l = make_layout(16, 16, Position::TopLeft).unwrap();
        assert_eq!(
            pair_indices(&l, Direction::Left),
            Err(MaskError::InapplicableDirection {
                direction: Direction::Left,
                position: Position::TopLeft
            })
        );
    }

    #[test]
    fn center_left_comes_from_two_sub_blocks() {
        let l = make_layout(16, 16, Position::Center).unwrap();
        let left = pair_indices(&l, Direction::Left).unwrap();
        assert_eq!(left.len(), 32);
        assert!(left
            .iter()
            .all(|p| p.source.col >= 4 && p.source.col < 8 && p.target.col == p.source.col - 4));
    }

    #[test]
    fn parse_tags() {
        assert_eq!("center".parse::<Position>().unwrap(), Position::Center);
        assert_eq!("up-left".parse::<Direction>().unwrap(), Direction::UpLeft);
        assert!("diagonal".parse::<Direction>().is_err());
    }

    #[test]
    fn layout_json_shape() {
        let l = make_layout(8, 12, Position::BottomLeft).unwrap();
        let rec = LayoutRecord {
            position: l.position(),
            height: l.height(),
            width: l.width(),
            dx_cells: l.dx_cells(),
            dy_cells: l.dy_cells(),
        };
        assert_eq!((rec.dx_cells, rec.dy_cells), (6, 4));
    }
}
