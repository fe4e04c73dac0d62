//! Nine-room grid world with trap rooms that can only be left through a
//! marked exit cell.
//!
//! Layout format: a `(2H + 1) x (2W + 1)` character grid. Cells sit at odd
//! row and column positions and are one of `.` (free), `T` (trap), `E` (trap
//! exit) or `G` (goal). The character between two horizontally or vertically
//! adjacent cells is `#` for a wall or `.` for an opening. Characters at even
//! row and even column positions are ignored.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, RewardFunction};

pub const DISCOUNT: f64 = 0.95;

/// The shipped 30x30 layout.
pub const DEFAULT_LAYOUT: &str = include_str!("../../data/trap_world.txt");

/// Actions: 0 up, 1 down, 2 left, 3 right. Row 0 is the top of the layout.
pub const DIRECTIONS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Free,
    Trap,
    Exit,
    Goal,
}

#[derive(Clone, Debug)]
pub struct TrapLayout {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    // Openness of the edge leaving each cell in each direction.
    open: Vec<[bool; 4]>,
}

impl TrapLayout {
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&[u8]> = text.lines().map(str::as_bytes).filter(|l| !l.is_empty()).collect();
        let err = |line: usize, message: String| Error::Layout { line, message };
        if lines.len() < 3 || lines.len().is_multiple_of(2) {
            return Err(err(
                lines.len(),
                format!("expected an odd number (>= 3) of rows, got {}", lines.len()),
            ));
        }
        let cols = lines[0].len();
        if cols < 3 || cols.is_multiple_of(2) {
            return Err(err(1, format!("expected an odd row width (>= 3), got {cols}")));
        }
        if let Some(i) = lines.iter().position(|l| l.len() != cols) {
            return Err(err(i + 1, format!("row width {} differs from {cols}", lines[i].len())));
        }
        let (height, width) = (lines.len() / 2, cols / 2);
        let mut cells = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                let ch = lines[2 * r + 1][2 * c + 1];
                cells.push(match ch {
                    b'.' => Cell::Free,
                    b'T' => Cell::Trap,
                    b'E' => Cell::Exit,
                    b'G' => Cell::Goal,
                    _ => return Err(err(2 * r + 2, format!("unexpected cell character '{}'", ch as char))),
                });
            }
        }
        if !cells.contains(&Cell::Goal) {
            return Err(err(0, "layout has no goal cell".into()));
        }
        let edge = |row: usize, col: usize| -> Result<bool> {
            match lines[row][col] {
                b'#' => Ok(false),
                b'.' => Ok(true),
                ch => Err(err(row + 1, format!("unexpected edge character '{}'", ch as char))),
            }
        };
        let mut open = vec![[false; 4]; height * width];
        for r in 0..height {
            for c in 0..width {
                let (lr, lc) = (2 * r + 1, 2 * c + 1);
                let o = &mut open[r * width + c];
                o[0] = r > 0 && edge(lr - 1, lc)?;
                o[1] = r + 1 < height && edge(lr + 1, lc)?;
                o[2] = c > 0 && edge(lr, lc - 1)?;
                o[3] = c + 1 < width && edge(lr, lc + 1)?;
            }
        }
        Ok(TrapLayout {
            height,
            width,
            cells,
            open,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_states(&self) -> usize {
        self.height * self.width
    }

    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn cell(&self, s: usize) -> Cell {
        self.cells[s]
    }

    /// Deterministic successor of `s` under action `a`.
    pub fn next_state(&self, s: usize, a: usize) -> usize {
        if self.cells[s] == Cell::Goal || !self.open[s][a] {
            return s;
        }
        let (r, c) = ((s / self.width) as i64, (s % self.width) as i64);
        let (dr, dc) = DIRECTIONS[a];
        let t = self.state((r + dr) as usize, (c + dc) as usize);
        // Leaving a trap room is only possible through its exit.
        if self.cells[s] == Cell::Trap && !matches!(self.cells[t], Cell::Trap | Cell::Exit) {
            return s;
        }
        t
    }

    pub fn mdp(&self) -> Result<Mdp> {
        let n = self.num_states();
        let rows = (0..4)
            .flat_map(|a| (0..n).map(move |s| (a, s)))
            .map(|(a, s)| vec![(self.next_state(s, a), 1.0)])
            .collect();
        Mdp::from_rows(n, 4, rows, DISCOUNT)
    }

    /// `1` on goal cells, `0` elsewhere.
    pub fn reward(&self) -> Result<RewardFunction> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .map(|&c| if c == Cell::Goal { 1.0 } else { 0.0 })
            .collect();
        RewardFunction::from_state(&values, 4)
    }
}

pub fn default_layout() -> TrapLayout {
    TrapLayout::parse(DEFAULT_LAYOUT).expect("shipped layout is valid")
}
