//! Highway driving domain with five lanes and three tracked cars.
//!
//! A state is the agent's lane (0..5, lanes 0 and 4 are shoulders) and, for
//! each of three cars, a code `(lane - 1) * 5 + row` with the car in lane
//! 1..=3 and `row` in 0..5 counting down to the agent's position at row 0.
//! The action picks the agent's lane for the next step.

use crate::error::Result;
use crate::mdp::{Mdp, RewardFunction};

pub const LANES: usize = 5;
pub const ROWS: usize = 5;
pub const CAR_CODES: usize = 15;
pub const NUM_CARS: usize = 3;
pub const NUM_STATES: usize = LANES * CAR_CODES * CAR_CODES * CAR_CODES;
pub const DISCOUNT: f64 = 0.95;

pub const CRASH_PENALTY: f64 = -10.0;
pub const SHOULDER_PENALTY: f64 = -1.0;
pub const LANE_CHANGE_PENALTY: f64 = -0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Car {
    pub lane: usize,
    pub row: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DriverState {
    pub agent_lane: usize,
    pub cars: [Car; NUM_CARS],
}

impl DriverState {
    pub fn index(&self) -> usize {
        self.cars
            .iter()
            .fold(self.agent_lane, |acc, c| acc * CAR_CODES + (c.lane - 1) * ROWS + c.row)
    }

    pub fn from_index(mut s: usize) -> Self {
        let mut cars = [Car { lane: 1, row: 0 }; NUM_CARS];
        for car in cars.iter_mut().rev() {
            let code = s % CAR_CODES;
            s /= CAR_CODES;
            *car = Car {
                lane: code / ROWS + 1,
                row: code % ROWS,
            };
        }
        DriverState { agent_lane: s, cars }
    }

    pub fn crashed(&self) -> bool {
        self.cars.iter().any(|c| c.row == 0 && c.lane == self.agent_lane)
    }

    /// Cars advance one row toward the agent; a car leaving row 0 reappears
    /// at the far row in the next lane (1 -> 2 -> 3 -> 1).
    pub fn step(&self, a: usize) -> Self {
        let mut next = *self;
        next.agent_lane = a;
        for c in next.cars.iter_mut() {
            if c.row == 0 {
                c.row = ROWS - 1;
                c.lane = c.lane % 3 + 1;
            } else {
                c.row -= 1;
            }
        }
        next
    }
}

pub fn driver_mdp() -> Result<Mdp> {
    let rows = (0..LANES)
        .flat_map(|a| (0..NUM_STATES).map(move |s| vec![(DriverState::from_index(s).step(a).index(), 1.0)]))
        .collect();
    Mdp::from_rows(NUM_STATES, LANES, rows, DISCOUNT)
}

pub fn driver_reward() -> Result<RewardFunction> {
    let mut values = Vec::with_capacity(NUM_STATES * LANES);
    for s in 0..NUM_STATES {
        let st = DriverState::from_index(s);
        let mut base = 0.0;
        if st.crashed() {
            base += CRASH_PENALTY;
        }
        if st.agent_lane == 0 || st.agent_lane == LANES - 1 {
            base += SHOULDER_PENALTY;
        }
        for a in 0..LANES {
            values.push(if a == st.agent_lane {
                base
            } else {
                base + LANE_CHANGE_PENALTY
            });
        }
    }
    RewardFunction::from_state_action(NUM_STATES, LANES, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_round_trips() {
        assert_eq!(NUM_STATES, 16875);
        for s in [0, 1, 224, 3374, 3375, 16874] {
            assert_eq!(DriverState::from_index(s).index(), s);
        }
    }

    #[test]
    fn reward_terms() {
        let r = driver_reward().unwrap();
        let crash = DriverState {
            agent_lane: 2,
            cars: [
                Car { lane: 2, row: 0 },
                Car { lane: 1, row: 3 },
                Car { lane: 3, row: 4 },
            ],
        };
        assert_eq!(r.get(crash.index(), 2), -10.0);
        let calm = DriverState {
            agent_lane: 2,
            cars: [
                Car { lane: 1, row: 0 },
                Car { lane: 2, row: 3 },
                Car { lane: 3, row: 4 },
            ],
        };
        assert_eq!(r.get(calm.index(), 2), 0.0);
        assert!((r.get(calm.index(), 1) + 0.1).abs() < 1e-15);
        let shoulder = DriverState { agent_lane: 0, ..calm };
        assert!((r.get(shoulder.index(), 1) + 1.1).abs() < 1e-12);
    }

    #[test]
    fn dynamics_are_deterministic() {
        let s = DriverState {
            agent_lane: 2,
            cars: [
                Car { lane: 3, row: 0 },
                Car { lane: 2, row: 1 },
                Car { lane: 1, row: 4 },
            ],
        };
        let t = s.step(4);
        assert_eq!(t.agent_lane, 4);
        assert_eq!(t.cars[0], Car { lane: 1, row: 4 });
        assert_eq!(t.cars[1], Car { lane: 2, row: 0 });
        assert_eq!(t.cars[2], Car { lane: 1, row: 3 });
    }
}
