//! Helpers shared by the integration tests: independent reference
//! computations and a two-region synthetic setup.
#![allow(dead_code)]

use ergodic_explore::ergodic::MassAccumulator;
use ergodic_explore::{Cov, GridSpec, Point, RegionMask, ScalarField, SimConfig};

/// Truncated Gaussian density written out by hand: zero where the squared
/// Mahalanobis distance exceeds `r^2`.
pub fn truncated_density(x: f64, y: f64, mx: f64, my: f64, cov: [[f64; 2]; 2], r: f64) -> f64 {
    let [[a, b], [c, d]] = cov;
    let det = a * d - b * c;
    let (dx, dy) = (x - mx, y - my);
    let q = (d * dx * dx - (b + c) * dx * dy + a * dy * dy) / det;
    if q <= r * r {
        (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    } else {
        0.0
    }
}

/// Time average of stamps at `positions`, summed directly per cell.
pub fn direct_time_average(spec: &GridSpec, positions: &[(f64, f64)], cov: [[f64; 2]; 2], r: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.len());
    let (dx, dy) = (spec.dx(), spec.dy());
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let x = spec.x_min + (i as f64 + 0.5) * dx;
            let y = spec.y_min + (j as f64 + 0.5) * dy;
            let s: f64 = positions
                .iter()
                .map(|&(mx, my)| truncated_density(x, y, mx, my, cov, r))
                .sum();
            out.push(s / positions.len() as f64);
        }
    }
    out
}

/// Largest cellwise relative difference; cells where both are zero count as
/// equal, and a zero on one side only counts as a relative error of 1.
pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(&g, &w)| {
            if g == w {
                0.0
            } else {
                (g - w).abs() / g.abs().max(w.abs())
            }
        })
        .fold(0.0, f64::max)
}

pub fn cov(m: [[f64; 2]; 2]) -> Cov {
    Cov::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

/// The three-hole scenario on a 200 x 200 grid.
pub fn scaled_three_holes(max_steps: u64) -> SimConfig {
    let mut c = SimConfig::three_holes();
    c.grid.nx = 200;
    c.grid.ny = 200;
    c.max_steps = max_steps;
    c
}

/// Two regions on [0,400] x [0,200], 200 x 100 cells: the left half is the
/// hole, with a uniform unit-mass target; the right half has no target.
/// The running average starts out smooth: mass `a` spread evenly over the
/// hole and `1 - a` evenly over the rest, as if `k + 1` deposits made it.
pub struct TwoRegion {
    pub rho_star: ScalarField,
    pub mask: RegionMask,
    pub acc: MassAccumulator,
    pub k: u64,
    pub a: f64,
}

pub const ROBOT_COV: [[f64; 2]; 2] = [[3.0, 0.0], [0.0, 3.0]];

impl TwoRegion {
    pub fn new(k: u64, a: f64) -> Self {
        let spec = GridSpec::new(0.0, 400.0, 0.0, 200.0, 200, 100).unwrap();
        let half_area = 200.0 * 200.0;
        let mask = RegionMask::from_labels(spec, 1, |c| (spec.coords(c).0 < spec.nx / 2).then_some(0)).unwrap();
        let rho_star = ScalarField::from_fn(spec, |p| if p.x < 200.0 { 1.0 / half_area } else { 0.0 });
        let n = (k + 1) as f64;
        let sum = ScalarField::from_fn(spec, |p| {
            if p.x < 200.0 {
                n * a / half_area
            } else {
                n * (1.0 - a) / half_area
            }
        });
        let acc = MassAccumulator::from_sum(sum, k + 1, cov(ROBOT_COV), 5.0).unwrap();
        TwoRegion {
            rho_star,
            mask,
            acc,
            k,
            a,
        }
    }

    pub fn v(&self) -> f64 {
        self.acc.ergodic_value(&self.rho_star).unwrap()
    }

    /// Stamp sites 11 apart, at least 10 from every region boundary, so
    /// stamps never overlap and never cross into the other region.
    pub fn sites(inside_hole: bool) -> Vec<Point> {
        let x0 = if inside_hole { 10.5 } else { 210.5 };
        let mut out = Vec::new();
        for j in 0..17 {
            for i in 0..17 {
                out.push(Point::new(x0 + 11.0 * i as f64, 10.5 + 11.0 * j as f64));
            }
        }
        out
    }

    /// Deposits `n` stamps at distinct sites of one region.
    pub fn deposit(&mut self, inside_hole: bool, n: usize) {
        let sites = Self::sites(inside_hole);
        assert!(n <= sites.len(), "{n} stamps do not fit on {} sites", sites.len());
        for p in &sites[..n] {
            self.acc.deposit(p).unwrap();
        }
    }

    /// `phi <= 0` on the hole and `phi >= 0` outside: the sign pattern the
    /// closed-form predictions rely on.
    pub fn signs_hold(&self) -> bool {
        let spec = *self.acc.spec();
        (0..spec.len()).all(|c| {
            let phi = self.acc.phi_at(&self.rho_star, c);
            if self.mask.in_holes(c) {
                phi <= 0.0
            } else {
                phi >= 0.0
            }
        })
    }
}
