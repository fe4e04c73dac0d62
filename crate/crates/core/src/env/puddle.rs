//! 20x20 puddle world with a stochastic multi-cell step.

use crate::error::Result;
use crate::mdp::{Mdp, RewardFunction};

pub const SIZE: usize = 20;
pub const DISCOUNT: f64 = 0.95;

/// Displacements along the chosen direction and their probabilities.
pub const STEP_DISTRIBUTION: [(i64, f64); 5] = [(-1, 0.06), (0, 0.24), (1, 0.4), (2, 0.24), (3, 0.06)];

const PUDDLE_RADIUS: f64 = 0.1;
const PUDDLES: [((f64, f64), (f64, f64)); 2] = [((0.1, 0.75), (0.45, 0.75)), ((0.45, 0.4), (0.45, 0.8))];

/// Actions: 0 up, 1 down, 2 left, 3 right. State index `y * 20 + x`, `y` up.
pub const DIRECTIONS: [(i64, i64); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

pub fn state(x: usize, y: usize) -> usize {
    y * SIZE + x
}

pub fn goal() -> usize {
    state(SIZE - 1, SIZE - 1)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Depth inside the deepest puddle at the center of cell `(x, y)`.
fn puddle_depth(x: usize, y: usize) -> f64 {
    let p = ((x as f64 + 0.5) / SIZE as f64, (y as f64 + 0.5) / SIZE as f64);
    PUDDLES
        .iter()
        .map(|&(a, b)| (PUDDLE_RADIUS - segment_distance(p, a, b)).max(0.0))
        .fold(0.0, f64::max)
}

pub fn puddle_mdp() -> Result<Mdp> {
    let n = SIZE * SIZE;
    let mut rows = Vec::with_capacity(4 * n);
    for &(dx, dy) in &DIRECTIONS {
        for y in 0..SIZE {
            for x in 0..SIZE {
                if state(x, y) == goal() {
                    rows.push(vec![(goal(), 1.0)]);
                    continue;
                }
                let mut row: Vec<(usize, f64)> = Vec::new();
                for &(k, p) in &STEP_DISTRIBUTION {
                    let nx = (x as i64 + k * dx).clamp(0, SIZE as i64 - 1) as usize;
                    let ny = (y as i64 + k * dy).clamp(0, SIZE as i64 - 1) as usize;
                    let s = state(nx, ny);
                    match row.iter_mut().find(|(t, _)| *t == s) {
                        Some(e) => e.1 += p,
                        None => row.push((s, p)),
                    }
                }
                rows.push(row);
            }
        }
    }
    Mdp::from_rows(n, 4, rows, DISCOUNT)
}

/// `+1` at the goal, `-(depth / max_depth)^2` inside puddles.
pub fn puddle_reward() -> Result<RewardFunction> {
    let depths: Vec<f64> = (0..SIZE * SIZE).map(|s| puddle_depth(s % SIZE, s / SIZE)).collect();
    let max_depth = depths.iter().copied().fold(0.0, f64::max);
    let mut values: Vec<f64> = depths
        .iter()
        .map(|&d| if d > 0.0 { -(d / max_depth).powi(2) } else { 0.0 })
        .collect();
    values[goal()] = 1.0;
    RewardFunction::from_state(&values, 4)
}
