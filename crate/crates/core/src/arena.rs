//! Tiled black/white environments the robots observe.
//!
//! An arena is a rectangular grid of tiles with a physical side length per
//! tile. Grids are either generated from a target fill ratio (exact-count,
//! seeded) or loaded from a text file of `B`/`W` rows, which covers
//! externally measured surfaces such as QR-style patterns.

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Color of a single floor tile, doubling as the observation value
/// (`Black` = 1, `White` = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileColor {
    Black,
    White,
}

/// Default physical tile side in meters: the tile diagonal equals the
/// distance covered in one tick at maximum speed (0.14 m), so the side is
/// 0.14 / sqrt(2) ~= 0.0990 m.
pub const DEFAULT_TILE_SIDE: f64 = 0.14 / std::f64::consts::SQRT_2;

#[derive(Debug, Error, PartialEq)]
pub enum ArenaError {
    #[error("arena must have at least one tile per side")]
    EmptyGrid,
    #[error("fill ratio {0} outside [0, 1]")]
    InvalidFillRatio(f64),
    #[error("tile side {0} must be positive and finite")]
    InvalidTileSide(f64),
    #[error("line {line}: row has {got} tiles, expected {expected}")]
    RaggedRow {
        line: usize,
        got: usize,
        expected: usize,
    },
    #[error("line {line}, column {column}: unexpected character {found:?} (expected 'B' or 'W')")]
    BadTileChar {
        line: usize,
        column: usize,
        found: char,
    },
    #[error("position ({x}, {y}) outside arena bounds {width} x {height} m")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
}

/// Immutable grid of black/white tiles with physical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Arena {
    width_tiles: usize,
    height_tiles: usize,
    tile_side: f64,
    /// Row-major; row 0 is the first text line, y grows with the row index.
    tiles: Vec<TileColor>,
}

impl Arena {
    /// Generates a square arena containing exactly `round(fill_ratio * n^2)`
    /// black tiles, placed by a seeded shuffle. Deterministic per seed.
    pub fn generate(
        side_tiles: usize,
        fill_ratio: f64,
        tile_side: f64,
        seed: u64,
    ) -> Result<Self, ArenaError> {
        if side_tiles == 0 {
            return Err(ArenaError::EmptyGrid);
        }
        if !(0.0..=1.0).contains(&fill_ratio) || fill_ratio.is_nan() {
            return Err(ArenaError::InvalidFillRatio(fill_ratio));
        }
        if !tile_side.is_finite() || tile_side <= 0.0 {
            return Err(ArenaError::InvalidTileSide(tile_side));
        }
        let total = side_tiles * side_tiles;
        let black = (fill_ratio * total as f64).round() as usize;
        let mut tiles = vec![TileColor::White; total];
        tiles[..black].fill(TileColor::Black);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        tiles.shuffle(&mut rng);
        Ok(Self {
            width_tiles: side_tiles,
            height_tiles: side_tiles,
            tile_side,
            tiles,
        })
    }

    /// Parses a grid from lines of `B`/`W` characters. Rows must be equal
    /// length; a trailing newline is optional.
    pub fn from_grid_text(text: &str, tile_side: f64) -> Result<Self, ArenaError> {
        if !tile_side.is_finite() || tile_side <= 0.0 {
            return Err(ArenaError::InvalidTileSide(tile_side));
        }
        let mut lines: Vec<&str> = text.lines().collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        let mut tiles = Vec::new();
        let mut width = None;
        let mut height = 0usize;
        for (row, line) in lines.into_iter().enumerate() {
            let mut row_len = 0usize;
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    'B' => tiles.push(TileColor::Black),
                    'W' => tiles.push(TileColor::White),
                    other => {
                        return Err(ArenaError::BadTileChar {
                            line: row + 1,
                            column: col + 1,
                            found: other,
                        });
                    }
                }
                row_len += 1;
            }
            match width {
                None => width = Some(row_len),
                Some(expected) if expected != row_len => {
                    return Err(ArenaError::RaggedRow {
                        line: row + 1,
                        got: row_len,
                        expected,
                    });
                }
                Some(_) => {}
            }
            height += 1;
        }
        let width = width.ok_or(ArenaError::EmptyGrid)?;
        Ok(Self {
            width_tiles: width,
            height_tiles: height,
            tile_side,
            tiles,
        })
    }

    /// Renders the grid back to the text format accepted by
    /// [`Arena::from_grid_text`].
    pub fn to_grid_text(&self) -> String {
        let mut out = String::with_capacity((self.width_tiles + 1) * self.height_tiles);
        for row in 0..self.height_tiles {
            for col in 0..self.width_tiles {
                out.push(match self.tiles[row * self.width_tiles + col] {
                    TileColor::Black => 'B',
                    TileColor::White => 'W',
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn width_tiles(&self) -> usize {
        self.width_tiles
    }

    pub fn height_tiles(&self) -> usize {
        self.height_tiles
    }

    pub fn tile_side(&self) -> f64 {
        self.tile_side
    }

    /// Physical width in meters.
    pub fn width_m(&self) -> f64 {
        self.width_tiles as f64 * self.tile_side
    }

    /// Physical height in meters.
    pub fn height_m(&self) -> f64 {
        self.height_tiles as f64 * self.tile_side
    }

    /// Color of the tile containing the point `(x, y)` in meters. Cell
    /// membership follows the floor convention, so a point exactly on a tile
    /// boundary belongs to the cell starting there.
    pub fn color_at(&self, x: f64, y: f64) -> Result<TileColor, ArenaError> {
        let (w, h) = (self.width_m(), self.height_m());
        if !(x >= 0.0 && x < w && y >= 0.0 && y < h) {
            return Err(ArenaError::OutOfBounds {
                x,
                y,
                width: w,
                height: h,
            });
        }
        let col = (x / self.tile_side).floor() as usize;
        let row = (y / self.tile_side).floor() as usize;
        // Guard against x/tile_side rounding up to the tile count.
        let col = col.min(self.width_tiles - 1);
        let row = row.min(self.height_tiles - 1);
        Ok(self.tiles[row * self.width_tiles + col])
    }

    pub fn black_count(&self) -> usize {
        self.tiles
            .iter()
            .filter(|t| **t == TileColor::Black)
            .count()
    }

    /// Realized fill ratio: black tiles over total tiles.
    pub fn fill_ratio(&self) -> f64 {
        self.black_count() as f64 / self.tiles.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_exact_black_count() {
        let arena = Arena::generate(100, 0.55, 1.0, 7).unwrap();
        assert_eq!(arena.black_count(), 5500);
        assert_eq!(arena.fill_ratio(), 0.55);
    }

    #[test]
    fn generate_zero_ratio_all_white() {
        let arena = Arena::generate(10, 0.0, 1.0, 7).unwrap();
        assert_eq!(arena.black_count(), 0);
        assert!(arena.tiles.iter().all(|t| *t == TileColor::White));
    }

    #[test]
    fn generate_rounds_black_count() {
        // round(0.95 * 57^2) = round(3086.55) = 3087
        let arena = Arena::generate(57, 0.95, 1.0, 3).unwrap();
        assert_eq!(arena.black_count(), 3087);
    }

    #[test]
    fn generate_is_deterministic_per_seed() {
        let a = Arena::generate(40, 0.3, 0.5, 99).unwrap();
        let b = Arena::generate(40, 0.3, 0.5, 99).unwrap();
        let c = Arena::generate(40, 0.3, 0.5, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.tiles, c.tiles);
    }

    #[test]
    fn generate_rejects_bad_inputs() {
        assert_eq!(Arena::generate(0, 0.5, 1.0, 1), Err(ArenaError::EmptyGrid));
        assert!(matches!(
            Arena::generate(4, 1.5, 1.0, 1),
            Err(ArenaError::InvalidFillRatio(_))
        ));
        assert!(matches!(
            Arena::generate(4, 0.5, 0.0, 1),
            Err(ArenaError::InvalidTileSide(_))
        ));
    }

    #[test]
    fn load_small_grid() {
        let arena = Arena::from_grid_text("BW\nWB", 1.0).unwrap();
        assert_eq!(arena.width_tiles(), 2);
        assert_eq!(arena.height_tiles(), 2);
        assert_eq!(arena.fill_ratio(), 0.5);

        let all_black = Arena::from_grid_text("BBB\nBBB", 1.0).unwrap();
        assert_eq!(all_black.fill_ratio(), 1.0);
    }

    #[test]
    fn load_qr_style_fixture() {
        // 29x29 grid with exactly 377 black cells, realized ratio 377/841.
        let mut text = String::new();
        let mut placed = 0;
        for _ in 0..29 {
            for _ in 0..29 {
                if placed < 377 {
                    text.push('B');
                    placed += 1;
                } else {
                    text.push('W');
                }
            }
            text.push('\n');
        }
        let arena = Arena::from_grid_text(&text, 0.045).unwrap();
        assert_eq!(arena.black_count(), 377);
        assert_eq!(arena.fill_ratio(), 377.0 / 841.0);
        assert!((arena.fill_ratio() - 0.4483).abs() < 5e-5);
    }

    #[test]
    fn load_reports_ragged_and_foreign() {
        let err = Arena::from_grid_text("BW\nWBB", 1.0).unwrap_err();
        assert_eq!(
            err,
            ArenaError::RaggedRow {
                line: 2,
                got: 3,
                expected: 2
            }
        );

        let err = Arena::from_grid_text("BW\nWX", 1.0).unwrap_err();
        assert_eq!(
            err,
            ArenaError::BadTileChar {
                line: 2,
                column: 2,
                found: 'X'
            }
        );

        assert_eq!(Arena::from_grid_text("", 1.0), Err(ArenaError::EmptyGrid));

        // A blank interior line is a ragged (zero-width) row; trailing
        // newlines are tolerated.
        assert_eq!(
            Arena::from_grid_text("BW\n\nWB", 1.0),
            Err(ArenaError::RaggedRow {
                line: 2,
                got: 0,
                expected: 2
            })
        );
        assert!(Arena::from_grid_text("BW\nWB\n\n", 1.0).is_ok());
    }

    #[test]
    fn color_lookup_and_floor_boundary() {
        let arena = Arena::from_grid_text("BW\nWB", 1.0).unwrap();
        assert_eq!(arena.color_at(0.5, 0.5).unwrap(), TileColor::Black);
        assert_eq!(arena.color_at(1.5, 0.5).unwrap(), TileColor::White);
        // Boundary point goes to the cell starting at the boundary.
        assert_eq!(arena.color_at(1.0, 0.0).unwrap(), TileColor::White);
        assert!(matches!(
            arena.color_at(2.0, 0.5),
            Err(ArenaError::OutOfBounds { .. })
        ));
        assert!(matches!(
            arena.color_at(-0.1, 0.5),
            Err(ArenaError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn all_black_ratio_is_one() {
        let arena = Arena::from_grid_text("BBB\nBBB\nBBB", 1.0).unwrap();
        assert_eq!(arena.fill_ratio(), 1.0);
    }

    #[test]
    fn grid_text_round_trip() {
        let arena = Arena::generate(23, 0.4, 0.25, 11).unwrap();
        let text = arena.to_grid_text();
        let reloaded = Arena::from_grid_text(&text, 0.25).unwrap();
        assert_eq!(arena, reloaded);
    }

    #[test]
    fn exact_count_matches_rounding_rule() {
        for side in [3usize, 10, 57] {
            for f in [0.0, 0.1, 0.448, 0.55, 0.95, 1.0] {
                let arena = Arena::generate(side, f, 1.0, 5).unwrap();
                let total = (side * side) as f64;
                let expected = (f * total).round() / total;
                assert_eq!(arena.fill_ratio(), expected);
            }
        }
    }
}
