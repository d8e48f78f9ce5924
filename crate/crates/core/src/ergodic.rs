//! Time-averaged trajectory mass, the ergodic error and ergodic function, and
//! the timing quantities that govern how long the robot stays in a hole.
//!
//! The accumulator keeps the unnormalized sum `S_k = f_0 + ... + f_k` of the
//! robot's deposited Gaussians. The time average is `S_k / (k + 1)`, which is
//! the recursive update `rho_k = (k rho_{k-1} + f_k) / (k + 1)` without ever
//! rescaling the whole grid.

use crate::error::{Error, Result};
use crate::field::{compensated_sum, GridSpec, Point, ScalarField};
use crate::gaussian::{Cov, StampKernel};
use crate::mask::RegionMask;

#[derive(Debug, Clone)]
pub struct MassAccumulator {
    sum: ScalarField,
    /// Number of deposits so far; the current step is `deposits - 1`.
    deposits: u64,
    kernel: StampKernel,
}

impl MassAccumulator {
    pub fn new(spec: GridSpec, sigma_r: Cov, radius_sigmas: f64) -> Result<Self> {
        Ok(MassAccumulator {
            sum: ScalarField::zeros(spec),
            deposits: 0,
            kernel: StampKernel::new(sigma_r, radius_sigmas)?,
        })
    }

    /// Starts from an arbitrary running sum, as if `steps` deposits had
    /// already produced it. Used to set up synthetic states.
    pub fn from_sum(sum: ScalarField, steps: u64, sigma_r: Cov, radius_sigmas: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("a prepared sum needs at least one step".into()));
        }
        Ok(MassAccumulator {
            sum,
            deposits: steps,
            kernel: StampKernel::new(sigma_r, radius_sigmas)?,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        self.sum.spec()
    }

    pub fn kernel(&self) -> &StampKernel {
        &self.kernel
    }

    /// Current discrete step `k`, or `None` before the first deposit.
    pub fn step(&self) -> Option<u64> {
        self.deposits.checked_sub(1)
    }

    pub fn deposits(&self) -> u64 {
        self.deposits
    }

    pub fn sum_field(&self) -> &ScalarField {
        &self.sum
    }

    /// Deposits the robot's skinny Gaussian at `robot_pos` and advances `k`.
    pub fn deposit(&mut self, robot_pos: &Point) -> Result<()> {
        self.kernel.apply(&mut self.sum, robot_pos)?;
        self.deposits += 1;
        Ok(())
    }

    /// Adds an arbitrary unit-mass field as the next step's deposit.
    pub fn deposit_field(&mut self, f: &ScalarField) -> Result<()> {
        self.sum.add_assign(f)?;
        self.deposits += 1;
        Ok(())
    }

    /// The stamp that `deposit(robot_pos)` would add, on a zero field.
    pub fn stamp_at(&self, robot_pos: &Point) -> Result<ScalarField> {
        let mut f = ScalarField::zeros(*self.spec());
        self.kernel.apply(&mut f, robot_pos)?;
        Ok(f)
    }

    /// Scale that turns the running sum into the time average.
    #[inline]
    pub fn inv_count(&self) -> f64 {
        1.0 / self.deposits.max(1) as f64
    }

    /// `rho_k = S_k / (k + 1)`.
    pub fn time_average(&self) -> ScalarField {
        self.sum.scaled(self.inv_count())
    }

    /// Integral of the time average, without materializing it.
    pub fn mass(&self) -> f64 {
        self.sum.integrate() * self.inv_count()
    }

    /// Integral of the time average over the union of holes.
    pub fn hole_mass(&self, mask: &RegionMask) -> f64 {
        self.sum.integrate_where(|c| mask.in_holes(c)) * self.inv_count()
    }

    /// `phi_k` evaluated at one cell.
    #[inline]
    pub fn phi_at(&self, rho_star: &ScalarField, cell: usize) -> f64 {
        self.sum.values()[cell] * self.inv_count() - rho_star.values()[cell]
    }

    /// `V_k`, computed without materializing `phi_k`.
    pub fn ergodic_value(&self, rho_star: &ScalarField) -> Result<f64> {
        if rho_star.spec() != self.spec() {
            return Err(Error::GridMismatch);
        }
        let scale = self.inv_count();
        let sum = compensated_sum(
            self.sum
                .values()
                .iter()
                .zip(rho_star.values())
                .map(|(s, r)| (s * scale - r).abs()),
        );
        Ok(sum * self.spec().cell_area())
    }

    /// Integral of `|phi_k|` over one hole's cells.
    pub fn hole_residual(&self, rho_star: &ScalarField, mask: &RegionMask, hole: usize) -> Result<f64> {
        if rho_star.spec() != self.spec() || mask.spec() != self.spec() {
            return Err(Error::GridMismatch);
        }
        let cells = mask.hole_cells(hole)?;
        let sum = compensated_sum(cells.iter().map(|&c| self.phi_at(rho_star, c).abs()));
        Ok(sum * self.spec().cell_area())
    }
}

/// `phi_k = rho_k - rho*`, cellwise.
pub fn compute_phi(rho_k: &ScalarField, rho_star: &ScalarField) -> Result<ScalarField> {
    rho_k.zip_with(rho_star, |a, b| a - b)
}

/// `V = integral of |phi|`.
pub fn ergodic_value(phi: &ScalarField) -> f64 {
    compensated_sum(phi.values().iter().map(|v| v.abs())) * phi.spec().cell_area()
}

/// Integral of `|phi|` over the cells of `hole`.
pub fn hole_residual(phi: &ScalarField, mask: &RegionMask, hole: usize) -> Result<f64> {
    if phi.spec() != mask.spec() {
        return Err(Error::GridMismatch);
    }
    let cells = mask.hole_cells(hole)?;
    Ok(compensated_sum(cells.iter().map(|&c| phi.values()[c].abs())) * phi.spec().cell_area())
}

/// Snapshot of the ergodic error at one step.
#[derive(Debug, Clone)]
pub struct ErgodicState {
    pub phi: ScalarField,
    pub value: f64,
    /// Integral of `|phi|` over each hole's cells.
    pub hole_residuals: Vec<f64>,
}

impl ErgodicState {
    pub fn evaluate(acc: &MassAccumulator, rho_star: &ScalarField, mask: &RegionMask) -> Result<Self> {
        let phi = compute_phi(&acc.time_average(), rho_star)?;
        let value = ergodic_value(&phi);
        let hole_residuals = (0..mask.hole_count())
            .map(|h| hole_residual(&phi, mask, h))
            .collect::<Result<_>>()?;
        Ok(ErgodicState {
            phi,
            value,
            hole_residuals,
        })
    }
}

/// Change of the time average over the next `stamps.len()` steps, in closed
/// form: `(sum f_i - h rho_k) / (k + h + 1)`.
pub fn delta_rho_oracle(acc: &MassAccumulator, stamps: &[ScalarField]) -> Result<ScalarField> {
    let Some(k) = acc.step() else {
        return Err(Error::InvalidArgument("accumulator has no deposits".into()));
    };
    if stamps.is_empty() {
        return Err(Error::InvalidArgument("need at least one future stamp".into()));
    }
    let h = stamps.len() as f64;
    let rho_k = acc.time_average();
    let mut total = ScalarField::zeros(*acc.spec());
    for f in stamps {
        total.add_assign(f)?;
    }
    let denom = k as f64 + h + 1.0;
    total.zip_with(&rho_k, |s, r| (s - h * r) / denom)
}

/// Lower bound on the dwell time after `h` transit steps: `h a / (1 - a)`,
/// with `a` the time-averaged mass inside the holes. The robot must stay
/// strictly longer.
pub fn stay_bound(h: u64, a: f64) -> Result<f64> {
    if !(a < 1.0) {
        return Err(Error::Degenerate(format!(
            "hole mass fraction {a} leaves no mass outside the holes"
        )));
    }
    if !(a >= 0.0) {
        return Err(Error::InvalidArgument(format!("hole mass fraction {a} is negative")));
    }
    Ok(h as f64 * a / (1.0 - a))
}

/// Idealized rise of `V` over `h` transit steps starting at step `k`:
/// `2 h a / (k + h + 1)`.
pub fn predict_v_rise(k: u64, h: u64, a: f64) -> f64 {
    2.0 * h as f64 * a / (k as f64 + h as f64 + 1.0)
}

/// Idealized fall of `V` over `h_prime` dwell steps that follow `h` transit
/// steps from step `k`: `2 h' (1 - a (k + 1) / (k + h + 1)) / (k + h + h' + 1)`.
pub fn predict_v_fall(k: u64, h: u64, h_prime: u64, a: f64) -> f64 {
    let (k, h, hp) = (k as f64, h as f64, h_prime as f64);
    2.0 * hp * (1.0 - (k + 1.0) / (k + h + 1.0) * a) / (k + h + hp + 1.0)
}

/// Departure-threshold parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    pub beta: f64,
    pub gamma: f64,
    pub cycle: u64,
}

impl TimingParams {
    pub const DEFAULT_BETA: f64 = 0.2;
    pub const DEFAULT_GAMMA: f64 = 0.1;

    pub fn new(beta: f64, gamma: f64, cycle: u64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta {beta} must be positive")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma {gamma} must be non-negative")));
        }
        Ok(TimingParams { beta, gamma, cycle })
    }

    pub fn with_cycle(self, cycle: u64) -> Self {
        TimingParams { cycle, ..self }
    }
}

/// `c_N = beta exp(-gamma N)`.
pub fn departure_threshold(params: &TimingParams) -> f64 {
    params.beta * (-params.gamma * params.cycle as f64).exp()
}
