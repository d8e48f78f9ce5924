//! Target-hole selection, tour ordering, goal points, motion, and the
//! stay/advance decision.

use std::fmt;

use crate::ergodic::stay_bound;
use crate::error::{Error, Result};
use crate::field::{GridSpec, Point, ScalarField};
use crate::gaussian::MixtureModel;
use crate::mask::RegionMask;

/// Largest hole count for which the tour is found by exhaustive search.
pub const EXACT_TOUR_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Point,
    pub v_max: f64,
}

impl RobotState {
    pub fn new(position: Point, v_max: f64) -> Result<Self> {
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::InvalidArgument(format!("v_max {v_max} must be positive")));
        }
        Ok(RobotState { position, v_max })
    }

    pub fn step_toward(&mut self, goal: &Point) {
        self.position = motion_step(self, goal);
    }
}

/// Moves `v_max` along the straight line to `goal`, landing on it when it is
/// within reach.
pub fn motion_step(robot: &RobotState, goal: &Point) -> Point {
    let d = goal - robot.position;
    let dist = d.norm();
    if dist <= robot.v_max {
        *goal
    } else {
        robot.position + d * (robot.v_max / dist)
    }
}

/// The hole whose `sigma_level` ellipse is nearest to the robot. A robot
/// already inside a hole (by mask) targets that hole. Ties go to the lowest
/// index.
pub fn initial_target(robot: &RobotState, masks: &RegionMask, model: &MixtureModel, sigma_level: f64) -> usize {
    if let Some(h) = masks.spec().cell_of(&robot.position).and_then(|c| masks.hole_of(c)) {
        return h;
    }
    let mut best = (f64::INFINITY, 0);
    for (i, c) in model.components().iter().enumerate() {
        let d = c.gaussian.distance_to_ellipse(&robot.position, sigma_level);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Shortest closed tour over the hole means, starting at `first`.
///
/// Exhaustive for up to [`EXACT_TOUR_LIMIT`] holes; among tours of equal
/// length (within 1e-9 relative, e.g. a tour and its reverse) the
/// lexicographically smallest order wins. Larger models fall back to the
/// nearest-neighbor heuristic.
pub fn tour_order(model: &MixtureModel, first: usize) -> Result<Vec<usize>> {
    let m = model.len();
    if first >= m {
        return Err(Error::InvalidHole { index: first, count: m });
    }
    let means: Vec<Point> = model.components().iter().map(|c| *c.gaussian.mean()).collect();
    let dist = |a: usize, b: usize| (means[a] - means[b]).norm();
    if m > EXACT_TOUR_LIMIT {
        return Ok(nearest_neighbor_tour(m, first, dist));
    }
    let mut rest: Vec<usize> = (0..m).filter(|&i| i != first).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    // `rest` starts sorted, so permutations come in lexicographic order and
    // the first tour found at a given length is the smallest one.
    loop {
        let mut tour = Vec::with_capacity(m);
        tour.push(first);
        tour.extend_from_slice(&rest);
        let len: f64 = (0..m).map(|i| dist(tour[i], tour[(i + 1) % m])).sum();
        match &best {
            Some((b, _)) if len >= *b - 1e-9 * b.max(1.0) => {}
            _ => best = Some((len, tour)),
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    Ok(best.map(|(_, t)| t).unwrap_or_else(|| vec![first]))
}

fn nearest_neighbor_tour(m: usize, first: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut visited = vec![false; m];
    let mut tour = vec![first];
    visited[first] = true;
    let mut cur = first;
    while tour.len() < m {
        let next = (0..m)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| dist(cur, a).total_cmp(&dist(cur, b)))
            .expect("unvisited hole remains");
        visited[next] = true;
        tour.push(next);
        cur = next;
    }
    tour
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Cell (from `cells`, scanned in order) with the smallest `value`; ties
/// keep the earliest cell.
pub(crate) fn argmin_cell(cells: &[usize], mut value: impl FnMut(usize) -> f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &c in cells {
        let v = value(c);
        match best {
            Some((b, _)) if v >= b => {}
            _ => best = Some((v, c)),
        }
    }
    best.map(|(_, c)| c)
}

/// Center of the cell in `hole` where `phi` is smallest.
pub fn goal_point(phi: &ScalarField, masks: &RegionMask, hole: usize) -> Result<Point> {
    if phi.spec() != masks.spec() {
        return Err(Error::GridMismatch);
    }
    let cells = masks.hole_cells(hole)?;
    let cell = argmin_cell(cells, |c| phi.values()[c])
        .ok_or_else(|| Error::Degenerate(format!("hole {} covers no grid cells", hole + 1)))?;
    Ok(phi.spec().center_of(cell))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Transit,
    Dwell,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Transit => "transit",
            Phase::Dwell => "dwell",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Stay,
    /// Leave for the hole at this tour position.
    Advance {
        next: usize,
    },
}

/// Where the robot is in its cyclic tour of the holes.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionPlan {
    pub tour: Vec<usize>,
    /// Position of the current target within `tour`.
    pub tour_pos: usize,
    pub phase: Phase,
    pub phase_start_k: u64,
    /// Steps spent outside the target hole during the current (or last) transit.
    pub transit_h: u64,
    /// Deposits made in the hole since arrival; zero on the arrival step.
    pub dwell_elapsed: u64,
    /// Time-averaged hole mass at the start of the current leg.
    pub leg_a: f64,
    /// `leg_a` of the leg that led into the current dwell.
    pub frozen_a: f64,
    /// First dwell step satisfying the stay bound.
    pub h_bar_prime: u64,
    /// First dwell step at which the residual dropped to the threshold.
    pub h_bar_dprime: Option<u64>,
    pub cycle: u64,
    /// Whether the first hole of the tour has been reached at least once.
    pub started: bool,
}

impl MissionPlan {
    /// `start_a` is the hole mass of the time average at `start_k`.
    pub fn new(tour: Vec<usize>, start_k: u64, start_a: f64) -> Self {
        MissionPlan {
            tour,
            tour_pos: 0,
            phase: Phase::Transit,
            phase_start_k: start_k,
            transit_h: 0,
            dwell_elapsed: 0,
            leg_a: start_a,
            frozen_a: start_a,
            h_bar_prime: 0,
            h_bar_dprime: None,
            cycle: 0,
            started: false,
        }
    }

    pub fn target(&self) -> usize {
        self.tour[self.tour_pos]
    }

    pub fn successor(&self) -> usize {
        (self.tour_pos + 1) % self.tour.len()
    }

    /// Switches to DWELL at step `k`, freezing the leg's hole mass. Re-entering
    /// the tour's first hole closes a cycle.
    pub fn arrive(&mut self, k: u64) -> Result<()> {
        let frozen_a = self.leg_a;
        if self.tour_pos == 0 {
            if self.started {
                self.cycle += 1;
            }
            self.started = true;
        }
        self.phase = Phase::Dwell;
        self.phase_start_k = k;
        self.dwell_elapsed = 0;
        self.frozen_a = frozen_a;
        self.h_bar_prime = min_dwell_steps(self.transit_h, frozen_a)?;
        self.h_bar_dprime = None;
        Ok(())
    }

    /// Switches to TRANSIT toward tour position `next`; `a` is the hole mass
    /// of the time average at step `k`.
    pub fn depart(&mut self, k: u64, next: usize, a: f64) {
        self.leg_a = a;
        self.tour_pos = next;
        self.phase = Phase::Transit;
        self.phase_start_k = k;
        self.transit_h = 0;
    }
}

/// Smallest integer dwell strictly above the stay bound:
/// `floor(h a / (1 - a)) + 1`. With no transit there is nothing to repay and
/// a single step suffices, even when all mass already sits in holes.
pub fn min_dwell_steps(h: u64, a: f64) -> Result<u64> {
    if h == 0 {
        return Ok(1);
    }
    Ok(stay_bound(h, a)?.floor() as u64 + 1)
}

/// Advance once the dwell has lasted `max(h_bar_prime, h_bar_dprime)` steps;
/// until the residual has reached the threshold, `h_bar_dprime` is unknown
/// and the robot stays.
pub fn departure_decision(
    plan: &MissionPlan,
    dwell_elapsed: u64,
    h_bar_prime: u64,
    h_bar_dprime: Option<u64>,
) -> Decision {
    if plan.phase != Phase::Dwell {
        return Decision::Stay;
    }
    match h_bar_dprime {
        Some(dp) if dwell_elapsed >= h_bar_prime.max(dp) => Decision::Advance { next: plan.successor() },
        _ => Decision::Stay,
    }
}

/// Whether `p` lies in the cell set of `hole`.
pub fn in_hole(spec: &GridSpec, masks: &RegionMask, p: &Point, hole: usize) -> bool {
    spec.cell_of(p).and_then(|c| masks.hole_of(c)) == Some(hole)
}
