//! Uniform rectangular grids and real-valued fields sampled on them.
//!
//! Samples live at cell centers and are stored row-major: the linear index of
//! cell `(i, j)` is `j * nx + i`, with `i` running along x and `j` along y.
//! Integration is the midpoint rule with a compensated, fixed-order sum, so
//! results do not depend on how the caller iterates.

use nalgebra::Vector2;

use crate::error::{Error, Result, ValidationError, Violation};

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        let spec = GridSpec {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        let violations = spec.violations();
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(ValidationError { violations }.into())
        }
    }

    /// Square domain `[0, size]^2` with `n x n` cells.
    pub fn square(size: f64, n: usize) -> Result<Self> {
        Self::new(0.0, size, 0.0, size, n, n)
    }

    pub(crate) fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            out.push(Violation::new("domain", "bounds must be finite"));
        }
        if !(self.x_max > self.x_min) {
            out.push(Violation::new("domain.x_max", "x_max must exceed x_min"));
        }
        if !(self.y_max > self.y_min) {
            out.push(Violation::new("domain.y_max", "y_max must exceed y_min"));
        }
        if self.nx < 2 {
            out.push(Violation::new("grid.nx", "need at least 2 cells"));
        }
        if self.ny < 2 {
            out.push(Violation::new("grid.ny", "need at least 2 cells"));
        }
        out
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.x_min + (i as f64 + 0.5) * self.dx(),
            self.y_min + (j as f64 + 0.5) * self.dy(),
        )
    }

    #[inline]
    pub fn center_of(&self, index: usize) -> Point {
        let (i, j) = self.coords(index);
        self.center(i, j)
    }

    /// Closed-domain membership test.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Cell containing `p`. Points on the upper boundary map to the last cell.
    pub fn cell_of(&self, p: &Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let i = (((p.x - self.x_min) / self.dx()).floor() as usize).min(self.nx - 1);
        let j = (((p.y - self.y_min) / self.dy()).floor() as usize).min(self.ny - 1);
        Some(self.index(i, j))
    }

    /// Inclusive index range of cells whose centers may lie within
    /// `[lo, hi]` along x. Padded by one cell; callers filter exactly.
    pub(crate) fn x_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        axis_range(lo, hi, self.x_min, self.dx(), self.nx)
    }

    pub(crate) fn y_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        axis_range(lo, hi, self.y_min, self.dy(), self.ny)
    }
}

fn axis_range(lo: f64, hi: f64, origin: f64, step: f64, n: usize) -> Option<(usize, usize)> {
    let a = ((lo - origin) / step - 0.5).floor() - 1.0;
    let b = ((hi - origin) / step - 0.5).ceil() + 1.0;
    if b < 0.0 || a > (n - 1) as f64 {
        return None;
    }
    let a = a.max(0.0) as usize;
    let b = (b.min((n - 1) as f64)) as usize;
    Some((a, b))
}

/// Neumaier-compensated summation over a fixed iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: GridSpec) -> Self {
        ScalarField {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        ScalarField {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = (0..spec.len()).map(|c| f(spec.center_of(c))).collect();
        ScalarField { spec, values }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field samples must be finite".into()));
        }
        Ok(ScalarField { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Midpoint-rule integral over the whole domain.
    pub fn integrate(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) * self.spec.cell_area()
    }

    /// Midpoint-rule integral over the cells selected by `keep`.
    pub fn integrate_where(&self, mut keep: impl FnMut(usize) -> bool) -> f64 {
        let sum = compensated_sum(
            self.values
                .iter()
                .enumerate()
                .filter(|(c, _)| keep(*c))
                .map(|(_, v)| *v),
        );
        sum * self.spec.cell_area()
    }

    /// Midpoint-rule integral over an explicit cell list, summed in list order.
    pub fn integrate_cells(&self, cells: &[usize]) -> f64 {
        compensated_sum(cells.iter().map(|&c| self.values[c])) * self.spec.cell_area()
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise `f(self, other)`; the grids must be identical.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &ScalarField) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest cellwise absolute difference.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grid() {
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 1, 4).is_err());
        assert!(GridSpec::new(1.0, 1.0, 0.0, 1.0, 4, 4).is_err());
        let err = GridSpec::new(2.0, 1.0, 3.0, 1.0, 1, 1).unwrap_err();
        match err {
            Error::Validation(v) => assert_eq!(v.violations.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn index_and_center_roundtrip() {
        let spec = GridSpec::new(-3.0, 5.0, 10.0, 14.0, 16, 8).unwrap();
        for c in 0..spec.len() {
            let p = spec.center_of(c);
            assert_eq!(spec.cell_of(&p), Some(c));
        }
        assert_eq!(spec.cell_of(&Point::new(5.0, 14.0)), Some(spec.len() - 1));
        assert_eq!(spec.cell_of(&Point::new(5.01, 14.0)), None);
    }

    #[test]
    fn integrate_constant() {
        let spec = GridSpec::square(1.0, 10).unwrap();
        let f = ScalarField::constant(spec, 1.0);
        assert!((f.integrate() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_half_domain() {
        let spec = GridSpec::square(1.0, 10).unwrap();
        let f = ScalarField::constant(spec, 2.0);
        let half = f.integrate_where(|c| spec.coords(c).0 < 5);
        assert!((half - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }

    #[test]
    fn zip_rejects_mismatch() {
        let a = ScalarField::zeros(GridSpec::square(1.0, 4).unwrap());
        let b = ScalarField::zeros(GridSpec::square(1.0, 5).unwrap());
        assert!(matches!(a.zip_with(&b, |x, y| x - y), Err(Error::GridMismatch)));
    }

    #[test]
    fn axis_range_covers_span() {
        let spec = GridSpec::square(10.0, 10).unwrap();
        let (a, b) = spec.x_range(2.2, 4.7).unwrap();
        assert!(a <= 1 && b >= 4);
        assert!(spec.x_range(-5.0, -3.0).is_none());
        assert!(spec.x_range(20.0, 30.0).is_none());
    }
}
