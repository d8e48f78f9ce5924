//! The exploration loop: deposit, goal update, motion, timing bookkeeping and
//! phase transitions, with every step recorded in a [`SimTrace`].
//!
//! A run is fully deterministic. Step `k = 0` deposits `f_0` at the start
//! position; each later step picks the goal from `phi_{k-1}`, moves, deposits
//! `f_k`, updates the hole bookkeeping and only then decides whether to leave.

use std::fmt;

use crate::ergodic::{compute_phi, departure_threshold, MassAccumulator, TimingParams};
use crate::error::{Error, Result, ValidationError, Violation};
use crate::field::{GridSpec, Point, ScalarField};
use crate::gaussian::{check_spd, rasterize_mixture, Cov, GaussianComponent, MixtureModel, DEFAULT_STAMP_RADIUS};
use crate::mask::{build_hole_masks, RegionMask, DEFAULT_SIGMA_LEVEL};
use crate::planner::{
    argmin_cell, departure_decision, in_hole, initial_target, tour_order, Decision, MissionPlan, Phase, RobotState,
};

/// Fractions of `max_steps` at which `phi` snapshots are taken by default.
pub const DEFAULT_SNAPSHOT_FRACTIONS: [f64; 6] = [0.0, 0.05, 0.25, 0.5, 0.75, 1.0];

/// Raw parameters of one mixture component, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleConfig {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl HoleConfig {
    pub fn cov_matrix(&self) -> Cov {
        Cov::new(self.cov[0][0], self.cov[0][1], self.cov[1][0], self.cov[1][1])
    }
}

/// Every free parameter of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub holes: Vec<HoleConfig>,
    pub grid: GridSpec,
    pub start: [f64; 2],
    pub sigma_r: [[f64; 2]; 2],
    pub v_max: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma_level: f64,
    pub stamp_radius: f64,
    pub v_every: u64,
    pub max_steps: u64,
    /// Explicit snapshot steps; `None` uses [`DEFAULT_SNAPSHOT_FRACTIONS`].
    pub snapshots: Option<Vec<u64>>,
}

impl SimConfig {
    /// Defaults for everything except the mixture and the start point.
    pub fn with_model(holes: Vec<HoleConfig>, start: [f64; 2]) -> Self {
        SimConfig {
            holes,
            grid: GridSpec {
                x_min: 0.0,
                x_max: 400.0,
                y_min: 0.0,
                y_max: 400.0,
                nx: 400,
                ny: 400,
            },
            start,
            sigma_r: [[3.0, 0.0], [0.0, 3.0]],
            v_max: 10.0,
            beta: TimingParams::DEFAULT_BETA,
            gamma: TimingParams::DEFAULT_GAMMA,
            sigma_level: DEFAULT_SIGMA_LEVEL,
            stamp_radius: DEFAULT_STAMP_RADIUS,
            v_every: 100,
            max_steps: 200_000,
            snapshots: None,
        }
    }

    /// The three-hole scenario used throughout the tests and the bundled config.
    pub fn three_holes() -> Self {
        let hole = |weight, mean, cov| HoleConfig { weight, mean, cov };
        SimConfig::with_model(
            vec![
                hole(0.2, [80.0, 250.0], [[15.0, 0.0], [0.0, 20.0]]),
                hole(0.3, [230.0, 60.0], [[30.0, 0.0], [0.0, 15.0]]),
                hole(0.5, [300.0, 310.0], [[15.0, 0.0], [0.0, 15.0]]),
            ],
            [180.0, 175.0],
        )
    }

    pub fn sigma_r_matrix(&self) -> Cov {
        Cov::new(
            self.sigma_r[0][0],
            self.sigma_r[0][1],
            self.sigma_r[1][0],
            self.sigma_r[1][1],
        )
    }

    pub fn start_point(&self) -> Point {
        Point::new(self.start[0], self.start[1])
    }

    /// Every violation in one pass; an empty list means the config is runnable.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = self.grid.violations();
        if self.holes.is_empty() {
            out.push(Violation::new("hole", "at least one hole is required"));
        }
        let mut total = 0.0;
        for (i, h) in self.holes.iter().enumerate() {
            let n = i + 1;
            total += h.weight;
            if !(h.weight > 0.0 && h.weight <= 1.0) {
                out.push(Violation::new(
                    format!("hole.{n}.weight"),
                    format!("weight {} must lie in (0, 1]", h.weight),
                ));
            }
            if let Err(e) = check_spd(&h.cov_matrix()) {
                out.push(Violation::new(format!("hole.{n}.cov"), e));
            }
            let m = Point::new(h.mean[0], h.mean[1]);
            if !self.grid.contains(&m) {
                out.push(Violation::new(format!("hole.{n}.mean"), "mean lies outside the domain"));
            }
        }
        if !self.holes.is_empty() && (total - 1.0).abs() > 1e-12 {
            let ws: Vec<String> = self.holes.iter().map(|h| h.weight.to_string()).collect();
            out.push(Violation::new(
                "hole.*.weight",
                format!("weights [{}] sum to {total}, expected 1", ws.join(", ")),
            ));
        }
        if !self.grid.contains(&self.start_point()) {
            out.push(Violation::new("robot.start", "start position lies outside the domain"));
        }
        if let Err(e) = check_spd(&self.sigma_r_matrix()) {
            out.push(Violation::new("robot.cov", e));
        }
        if !(self.v_max > 0.0) || !self.v_max.is_finite() {
            out.push(Violation::new(
                "robot.v_max",
                format!("v_max {} must be positive", self.v_max),
            ));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            out.push(Violation::new(
                "timing.beta",
                format!("beta {} must be positive", self.beta),
            ));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            out.push(Violation::new(
                "timing.gamma",
                format!("gamma {} must be non-negative", self.gamma),
            ));
        }
        if !(self.sigma_level > 0.0) || !self.sigma_level.is_finite() {
            out.push(Violation::new("masks.sigma_level", "sigma level must be positive"));
        }
        if !(self.stamp_radius >= 3.0) || !self.stamp_radius.is_finite() {
            out.push(Violation::new("stamp.radius_sigmas", "stamp radius must be at least 3"));
        }
        if self.v_every == 0 {
            out.push(Violation::new("sim.v_every", "cadence must be at least 1"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { violations })
        }
    }

    pub fn model(&self) -> Result<MixtureModel> {
        let comps = self
            .holes
            .iter()
            .map(|h| GaussianComponent::new(h.weight, Point::new(h.mean[0], h.mean[1]), h.cov_matrix()))
            .collect::<Result<Vec<_>>>()?;
        MixtureModel::new(comps)
    }

    /// Snapshot steps, sorted and deduplicated.
    pub fn snapshot_steps(&self) -> Vec<u64> {
        let mut steps: Vec<u64> = match &self.snapshots {
            Some(s) => s.iter().copied().filter(|&k| k <= self.max_steps).collect(),
            None => DEFAULT_SNAPSHOT_FRACTIONS
                .iter()
                .map(|f| (f * self.max_steps as f64).round() as u64)
                .collect(),
        };
        steps.sort_unstable();
        steps.dedup();
        steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub k: u64,
    pub v: f64,
    pub target: usize,
    pub phase: Phase,
    pub cycle: u64,
    /// Integral of the time average; not exported, kept for checks.
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub k: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Start,
    Arrive,
    Depart,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Start => "start",
            EventKind::Arrive => "arrive",
            EventKind::Depart => "depart",
        })
    }
}

/// A phase transition. Fields that do not apply to the event kind are
/// `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRow {
    pub k: u64,
    pub kind: EventKind,
    pub hole: usize,
    /// Transit steps of the leg that led into `hole` (`h_ij`).
    pub h: Option<u64>,
    pub h_bar_prime: Option<u64>,
    pub h_bar_dprime: Option<u64>,
    pub frozen_a: Option<f64>,
    /// Integral of `|phi|` over `hole` at this step.
    pub residual: Option<f64>,
    pub cycle: u64,
    /// Dwell steps completed, on departures.
    pub dwell: Option<u64>,
    /// Departure threshold in force, on departures.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub metrics: Vec<MetricRow>,
    pub trajectory: Vec<TrajectoryRow>,
    pub events: Vec<EventRow>,
    pub snapshots: Vec<(u64, ScalarField)>,
    pub tour: Vec<usize>,
    pub warnings: Vec<String>,
}

impl SimTrace {
    pub fn final_v(&self) -> Option<f64> {
        self.metrics.last().map(|m| m.v)
    }

    pub fn initial_v(&self) -> Option<f64> {
        self.metrics.first().map(|m| m.v)
    }

    pub fn cycles(&self) -> u64 {
        self.metrics.last().map(|m| m.cycle).unwrap_or(0)
    }

    pub fn v_at(&self, k: u64) -> Option<f64> {
        self.metrics
            .binary_search_by_key(&k, |m| m.k)
            .ok()
            .map(|i| self.metrics[i].v)
    }
}

/// `V` each time the robot closes a cycle by re-entering the first hole of
/// the tour, as `(cycle, V)`.
pub fn end_of_cycle_values(trace: &SimTrace) -> Result<Vec<(u64, f64)>> {
    let Some(&first) = trace.tour.first() else {
        return Err(Error::TooFewCycles { found: 0, needed: 2 });
    };
    let out: Vec<(u64, f64)> = trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Arrive && e.hole == first && e.cycle >= 1)
        .filter_map(|e| trace.v_at(e.k).map(|v| (e.cycle, v)))
        .collect();
    if out.len() < 2 {
        return Err(Error::TooFewCycles {
            found: out.len(),
            needed: 2,
        });
    }
    Ok(out)
}

/// A simulation in progress. [`run`] drives one to completion.
pub struct Simulation {
    config: SimConfig,
    model: MixtureModel,
    rho_star: ScalarField,
    masks: RegionMask,
    acc: MassAccumulator,
    robot: RobotState,
    plan: MissionPlan,
    timing: TimingParams,
    snapshot_steps: Vec<u64>,
    k: u64,
    trace: SimTrace,
}

impl Simulation {
    /// Validates `config`, rasterizes the reference, and performs step 0.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model()?;
        let spec = config.grid;
        let (_, warnings) = model.check_fit(&spec);
        let rho_star = rasterize_mixture(&model, &spec)?;
        let masks = build_hole_masks(&model, &spec, config.sigma_level)?;
        for h in 0..model.len() {
            if masks.hole_cells(h)?.is_empty() {
                return Err(ValidationError {
                    violations: vec![Violation::new(
                        format!("hole.{}.cov", h + 1),
                        "hole covers no grid cells",
                    )],
                }
                .into());
            }
        }
        let mut acc = MassAccumulator::new(spec, config.sigma_r_matrix(), config.stamp_radius)?;
        let robot = RobotState::new(config.start_point(), config.v_max)?;
        let timing = TimingParams::new(config.beta, config.gamma, 0)?;
        let first = initial_target(&robot, &masks, &model, config.sigma_level);
        let tour = tour_order(&model, first)?;
        acc.deposit(&robot.position)?;
        let plan = MissionPlan::new(tour.clone(), 0, acc.hole_mass(&masks));
        let snapshot_steps = config.snapshot_steps();

        let mut sim = Simulation {
            config,
            model,
            rho_star,
            masks,
            acc,
            robot,
            plan,
            timing,
            snapshot_steps,
            k: 0,
            trace: SimTrace {
                tour,
                warnings,
                ..SimTrace::default()
            },
        };
        sim.record_position();
        let mut transition = false;
        if in_hole(&spec, &sim.masks, &sim.robot.position, first) {
            sim.arrive()?;
            sim.check_dwell()?;
            transition = true;
        } else {
            sim.trace.events.push(EventRow {
                k: 0,
                kind: EventKind::Start,
                hole: first,
                h: None,
                h_bar_prime: None,
                h_bar_dprime: None,
                frozen_a: None,
                residual: None,
                cycle: 0,
                dwell: None,
                threshold: None,
            });
        }
        sim.finish_step(transition)?;
        Ok(sim)
    }

    pub fn step_index(&self) -> u64 {
        self.k
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn plan(&self) -> &MissionPlan {
        &self.plan
    }

    pub fn accumulator(&self) -> &MassAccumulator {
        &self.acc
    }

    pub fn rho_star(&self) -> &ScalarField {
        &self.rho_star
    }

    pub fn masks(&self) -> &RegionMask {
        &self.masks
    }

    pub fn model(&self) -> &MixtureModel {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn trace(&self) -> &SimTrace {
        &self.trace
    }

    /// Current goal: the minimum of `phi` inside the target hole.
    pub fn goal(&self) -> Result<Point> {
        let target = self.plan.target();
        let cells = self.masks.hole_cells(target)?;
        let cell = argmin_cell(cells, |c| self.acc.phi_at(&self.rho_star, c))
            .ok_or_else(|| Error::Degenerate(format!("hole {} covers no grid cells", target + 1)))?;
        Ok(self.config.grid.center_of(cell))
    }

    /// Advances one step. Returns `false` once `max_steps` has been reached.
    pub fn step(&mut self) -> Result<bool> {
        if self.k >= self.config.max_steps {
            return Ok(false);
        }
        self.k += 1;
        let goal = self.goal()?;
        self.robot.step_toward(&goal);
        self.acc.deposit(&self.robot.position)?;
        self.record_position();

        let mut transition = false;
        match self.plan.phase {
            Phase::Transit => {
                if in_hole(&self.config.grid, &self.masks, &self.robot.position, self.plan.target()) {
                    self.arrive()?;
                    transition = true;
                    transition |= self.check_dwell()?;
                } else {
                    self.plan.transit_h += 1;
                }
            }
            Phase::Dwell => {
                self.plan.dwell_elapsed += 1;
                transition = self.check_dwell()?;
            }
        }
        self.finish_step(transition)?;
        Ok(true)
    }

    fn threshold(&self) -> f64 {
        departure_threshold(&self.timing.with_cycle(self.plan.cycle))
    }

    fn target_residual(&self) -> Result<f64> {
        self.acc.hole_residual(&self.rho_star, &self.masks, self.plan.target())
    }

    fn arrive(&mut self) -> Result<()> {
        let h = self.plan.transit_h;
        self.plan.arrive(self.k)?;
        let a = self.plan.frozen_a;
        let residual = self.target_residual()?;
        self.trace.events.push(EventRow {
            k: self.k,
            kind: EventKind::Arrive,
            hole: self.plan.target(),
            h: Some(h),
            h_bar_prime: Some(self.plan.h_bar_prime),
            h_bar_dprime: None,
            frozen_a: Some(a),
            residual: Some(residual),
            cycle: self.plan.cycle,
            dwell: None,
            threshold: Some(self.threshold()),
        });
        Ok(())
    }

    /// Residual bookkeeping and the departure decision for a dwell step.
    /// Returns whether the robot left the hole.
    fn check_dwell(&mut self) -> Result<bool> {
        let residual = self.target_residual()?;
        let threshold = self.threshold();
        if self.plan.h_bar_dprime.is_none() && residual <= threshold {
            self.plan.h_bar_dprime = Some(self.plan.dwell_elapsed);
        }
        let decision = departure_decision(
            &self.plan,
            self.plan.dwell_elapsed,
            self.plan.h_bar_prime,
            self.plan.h_bar_dprime,
        );
        match decision {
            Decision::Stay => Ok(false),
            Decision::Advance { next } => {
                self.trace.events.push(EventRow {
                    k: self.k,
                    kind: EventKind::Depart,
                    hole: self.plan.target(),
                    h: Some(self.plan.transit_h),
                    h_bar_prime: Some(self.plan.h_bar_prime),
                    h_bar_dprime: self.plan.h_bar_dprime,
                    frozen_a: Some(self.plan.frozen_a),
                    residual: Some(residual),
                    cycle: self.plan.cycle,
                    dwell: Some(self.plan.dwell_elapsed),
                    threshold: Some(threshold),
                });
                let a = self.acc.hole_mass(&self.masks);
                self.plan.depart(self.k, next, a);
                Ok(true)
            }
        }
    }

    fn record_position(&mut self) {
        self.trace.trajectory.push(TrajectoryRow {
            k: self.k,
            x: self.robot.position.x,
            y: self.robot.position.y,
        });
    }

    fn finish_step(&mut self, transition: bool) -> Result<()> {
        let k = self.k;
        if transition || k.is_multiple_of(self.config.v_every) || k == self.config.max_steps {
            let v = self.acc.ergodic_value(&self.rho_star)?;
            self.trace.metrics.push(MetricRow {
                k,
                v,
                target: self.plan.target(),
                phase: self.plan.phase,
                cycle: self.plan.cycle,
                mass: self.acc.mass(),
            });
        }
        if self.snapshot_steps.binary_search(&k).is_ok() {
            let phi = compute_phi(&self.acc.time_average(), &self.rho_star)?;
            self.trace.snapshots.push((k, phi));
        }
        Ok(())
    }

    pub fn into_trace(self) -> SimTrace {
        self.trace
    }
}

/// Runs `config` for `max_steps` steps.
pub fn run(config: SimConfig) -> Result<SimTrace> {
    let mut sim = Simulation::new(config)?;
    while sim.step()? {}
    Ok(sim.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_three_holes(max_steps: u64) -> SimConfig {
        let mut c = SimConfig::three_holes();
        c.grid.nx = 200;
        c.grid.ny = 200;
        c.max_steps = max_steps;
        c
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut c = SimConfig::three_holes();
        c.holes[0].weight = 0.1;
        c.v_max = 0.0;
        c.start = [-5.0, 3.0];
        c.holes[1].cov = [[1.0, 2.0], [2.0, 1.0]];
        let err = c.validate().unwrap_err();
        let keys: Vec<&str> = err.violations.iter().map(|v| v.key.as_str()).collect();
        assert!(keys.contains(&"hole.*.weight"));
        assert!(keys.contains(&"robot.v_max"));
        assert!(keys.contains(&"robot.start"));
        assert!(keys.contains(&"hole.2.cov"));
        assert!(run(c).is_err());
    }

    #[test]
    fn zero_steps_is_one_deposit() {
        let trace = run(small_three_holes(0)).unwrap();
        assert_eq!(trace.trajectory.len(), 1);
        assert_eq!(trace.metrics.len(), 1);
        let v0 = trace.metrics[0].v;
        assert!(v0 > 1.99 && v0 <= 2.0 + 2e-3, "V0 = {v0}");
        assert_eq!(trace.events[0].kind, EventKind::Start);
        assert_eq!(trace.events[0].hole, 0);
        assert_eq!(trace.snapshots.len(), 1);
    }

    #[test]
    fn default_snapshot_schedule() {
        let c = SimConfig::three_holes();
        assert_eq!(c.snapshot_steps(), vec![0, 10_000, 50_000, 100_000, 150_000, 200_000]);
        let c = small_three_holes(20_000);
        assert_eq!(c.snapshot_steps(), vec![0, 1_000, 5_000, 10_000, 15_000, 20_000]);
    }

    #[test]
    fn end_of_cycle_needs_cycles() {
        assert!(end_of_cycle_values(&SimTrace::default()).is_err());
        let trace = run(small_three_holes(50)).unwrap();
        assert!(matches!(end_of_cycle_values(&trace), Err(Error::TooFewCycles { .. })));
    }

    #[test]
    fn first_leg_heads_for_hole_one() {
        let trace = run(small_three_holes(40)).unwrap();
        let arrive = trace.events.iter().find(|e| e.kind == EventKind::Arrive).unwrap();
        assert_eq!(arrive.hole, 0);
        assert_eq!(trace.tour, vec![0, 1, 2]);
    }
}
