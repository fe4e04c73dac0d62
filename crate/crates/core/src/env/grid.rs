//! Open 19x10 grid with the goal in the top-right corner.

use crate::error::Result;
use crate::mdp::{Mdp, RewardFunction};

pub const WIDTH: usize = 19;
pub const HEIGHT: usize = 10;
pub const DISCOUNT: f64 = 0.95;

/// Actions: 0 up, 1 down, 2 left, 3 right. State index `y * 19 + x`, `y` up.
pub const DIRECTIONS: [(i64, i64); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

pub fn state(x: usize, y: usize) -> usize {
    y * WIDTH + x
}

pub fn goal() -> usize {
    state(WIDTH - 1, HEIGHT - 1)
}

fn goal_distance(s: usize) -> usize {
    (WIDTH - 1 - s % WIDTH) + (HEIGHT - 1 - s / WIDTH)
}

pub fn grid_mdp() -> Result<Mdp> {
    let n = WIDTH * HEIGHT;
    let mut rows = Vec::with_capacity(4 * n);
    for &(dx, dy) in &DIRECTIONS {
        for s in 0..n {
            let (x, y) = ((s % WIDTH) as i64, (s / WIDTH) as i64);
            let next = if s == goal() {
                s
            } else {
                let nx = (x + dx).clamp(0, WIDTH as i64 - 1) as usize;
                let ny = (y + dy).clamp(0, HEIGHT as i64 - 1) as usize;
                state(nx, ny)
            };
            rows.push(vec![(next, 1.0)]);
        }
    }
    Mdp::from_rows(n, 4, rows, DISCOUNT)
}

/// `1` at the goal, `0` elsewhere.
pub fn sparse_reward() -> Result<RewardFunction> {
    let mut values = vec![0.0; WIDTH * HEIGHT];
    values[goal()] = 1.0;
    RewardFunction::from_state(&values, 4)
}

/// Sparse reward plus the potential `-(distance to goal) / max distance`.
///
/// Every step along a shortest path lowers the distance by one, which is the
/// most any path can achieve, so shortest paths stay exactly the optimal ones.
pub fn shaped_reward() -> Result<RewardFunction> {
    let max = (WIDTH - 1 + HEIGHT - 1) as f64;
    let mut values: Vec<f64> = (0..WIDTH * HEIGHT).map(|s| -(goal_distance(s) as f64) / max).collect();
    values[goal()] += 1.0;
    RewardFunction::from_state(&values, 4)
}
