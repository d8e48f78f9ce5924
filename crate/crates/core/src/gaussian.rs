//! Bivariate Gaussians, the mixture reference distribution, and grid
//! rasterization / truncated stamping of Gaussian mass.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::error::{Error, Result, ValidationError, Violation};
use crate::field::{GridSpec, Point, ScalarField};

pub type Cov = Matrix2<f64>;

/// Default truncation radius for stamps, in Mahalanobis units.
pub const DEFAULT_STAMP_RADIUS: f64 = 5.0;

/// Density of `N(mean, cov)` at `x`.
///
/// `cov` must be symmetric positive definite; that is checked where models
/// are built ([`Gaussian::new`]), not here.
pub fn gaussian_density(x: &Point, mean: &Point, cov: &Cov) -> f64 {
    let det = cov.determinant();
    let d = x - mean;
    // 2x2 inverse, written out.
    let inv = Cov::new(cov[(1, 1)], -cov[(0, 1)], -cov[(1, 0)], cov[(0, 0)]) / det;
    let q = d.dot(&(inv * d));
    (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
}

pub(crate) fn check_spd(cov: &Cov) -> std::result::Result<(), String> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err("entries must be finite".into());
    }
    let scale = cov[(0, 1)].abs().max(cov[(1, 0)].abs()).max(1.0);
    if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 * scale {
        return Err("matrix is not symmetric".into());
    }
    if !(cov[(0, 0)] > 0.0) || !(cov.determinant() > 0.0) {
        return Err("matrix is not positive definite".into());
    }
    Ok(())
}

/// A validated bivariate Gaussian with its inverse covariance cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Point,
    cov: Cov,
    inv: Cov,
    norm: f64,
}

impl Gaussian {
    pub fn new(mean: Point, cov: Cov) -> Result<Self> {
        check_spd(&cov).map_err(Error::NotPositiveDefinite)?;
        if !(mean.x.is_finite() && mean.y.is_finite()) {
            return Err(Error::InvalidArgument("mean must be finite".into()));
        }
        let det = cov.determinant();
        let inv = Cov::new(cov[(1, 1)], -cov[(0, 1)], -cov[(1, 0)], cov[(0, 0)]) / det;
        Ok(Gaussian {
            mean,
            cov,
            inv,
            norm: 1.0 / (2.0 * PI * det.sqrt()),
        })
    }

    pub fn mean(&self) -> &Point {
        &self.mean
    }

    pub fn cov(&self) -> &Cov {
        &self.cov
    }

    /// Peak density, reached at the mean.
    pub fn peak(&self) -> f64 {
        self.norm
    }

    #[inline]
    pub fn mahalanobis_sq(&self, x: &Point) -> f64 {
        mahalanobis_sq(&self.inv, &(x - self.mean))
    }

    #[inline]
    pub fn density(&self, x: &Point) -> f64 {
        self.norm * (-0.5 * self.mahalanobis_sq(x)).exp()
    }

    /// Axis-aligned half extents of the `level`-sigma ellipse.
    pub fn half_extents(&self, level: f64) -> (f64, f64) {
        (level * self.cov[(0, 0)].sqrt(), level * self.cov[(1, 1)].sqrt())
    }

    /// Euclidean distance from `p` to the boundary of the `level`-sigma
    /// ellipse; zero when `p` lies inside it.
    pub fn distance_to_ellipse(&self, p: &Point, level: f64) -> f64 {
        if self.mahalanobis_sq(p) <= level * level {
            return 0.0;
        }
        let eig = self.cov.symmetric_eigen();
        let (u0, u1) = (eig.eigenvectors.column(0), eig.eigenvectors.column(1));
        let d = p - self.mean;
        let a = level * eig.eigenvalues[0].sqrt();
        let b = level * eig.eigenvalues[1].sqrt();
        let y0 = d.dot(&u0);
        let y1 = d.dot(&u1);
        if a >= b {
            point_ellipse_distance(a, b, y0.abs(), y1.abs())
        } else {
            point_ellipse_distance(b, a, y1.abs(), y0.abs())
        }
    }
}

#[inline]
fn mahalanobis_sq(inv: &Cov, d: &Point) -> f64 {
    inv[(0, 0)] * d.x * d.x + (inv[(0, 1)] + inv[(1, 0)]) * d.x * d.y + inv[(1, 1)] * d.y * d.y
}

/// Distance from `(y0, y1)` in the first quadrant, outside the ellipse with
/// semi-axes `e0 >= e1`, to that ellipse. Bisection on the root of the
/// closest-point parameter (Eberly, "Distance from a point to an ellipse").
fn point_ellipse_distance(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let r0 = (e0 / e1).powi(2);
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let n0 = r0 * z0;
            let mut s0 = z1 - 1.0;
            let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
            let mut s = 0.0;
            for _ in 0..200 {
                s = 0.5 * (s0 + s1);
                if s == s0 || s == s1 {
                    break;
                }
                let ratio0 = n0 / (s + r0);
                let ratio1 = z1 / (s + 1.0);
                let g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
                if g > 0.0 {
                    s0 = s;
                } else if g < 0.0 {
                    s1 = s;
                } else {
                    break;
                }
            }
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt()
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            ((x0 - y0).powi(2) + x1 * x1).sqrt()
        } else {
            (y0 - e0).abs()
        }
    }
}

/// One weighted term of the reference mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub gaussian: Gaussian,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Point, cov: Cov) -> Result<Self> {
        Ok(GaussianComponent {
            weight,
            gaussian: Gaussian::new(mean, cov)?,
        })
    }
}

/// Weighted mixture of Gaussians; the reference distribution to cover.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    components: Vec<GaussianComponent>,
}

impl MixtureModel {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let mut violations = Vec::new();
        if components.is_empty() {
            violations.push(Violation::new("hole", "mixture needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                violations.push(Violation::new(
                    format!("hole.{}.weight", i + 1),
                    format!("weight {} must lie in (0, 1]", c.weight),
                ));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !components.is_empty() && (total - 1.0).abs() > 1e-12 {
            violations.push(Violation::new(
                "hole.*.weight",
                format!("weights sum to {total}, expected 1"),
            ));
        }
        if !violations.is_empty() {
            return Err(ValidationError { violations }.into());
        }
        Ok(MixtureModel { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn density(&self, x: &Point) -> f64 {
        self.components.iter().map(|c| c.weight * c.gaussian.density(x)).sum()
    }

    /// Hard failures (a mean outside `spec`) and soft warnings (a 3-sigma
    /// ellipse crossing the boundary) for placing this model on `spec`.
    pub fn check_fit(&self, spec: &GridSpec) -> (Vec<Violation>, Vec<String>) {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            let m = c.gaussian.mean();
            if !spec.contains(m) {
                errors.push(Violation::new(
                    format!("hole.{}.mean", i + 1),
                    format!("mean ({}, {}) lies outside the domain", m.x, m.y),
                ));
                continue;
            }
            let (hx, hy) = c.gaussian.half_extents(3.0);
            if m.x - hx < spec.x_min || m.x + hx > spec.x_max || m.y - hy < spec.y_min || m.y + hy > spec.y_max {
                warnings.push(format!(
                    "hole {}: 3-sigma ellipse extends past the domain boundary; mass will be lost",
                    i + 1
                ));
            }
        }
        (errors, warnings)
    }
}

/// Samples the mixture density at every cell center of `spec`.
///
/// Fails when a component mean lies outside the domain; ellipses crossing the
/// boundary are only logged (see [`MixtureModel::check_fit`]).
pub fn rasterize_mixture(model: &MixtureModel, spec: &GridSpec) -> Result<ScalarField> {
    let (errors, warnings) = model.check_fit(spec);
    if !errors.is_empty() {
        return Err(ValidationError { violations: errors }.into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ScalarField::from_fn(*spec, |p| model.density(&p)))
}

/// A Gaussian truncated at a fixed Mahalanobis radius, reusable for many
/// stamps with the same covariance.
#[derive(Debug, Clone)]
pub struct StampKernel {
    cov: Cov,
    inv: Cov,
    norm: f64,
    radius_sq: f64,
    half_x: f64,
    half_y: f64,
}

impl StampKernel {
    pub fn new(cov: Cov, radius_sigmas: f64) -> Result<Self> {
        if !(radius_sigmas >= 3.0) || !radius_sigmas.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "stamp radius {radius_sigmas} must be at least 3 sigma"
            )));
        }
        let g = Gaussian::new(Point::zeros(), cov)?;
        let (half_x, half_y) = g.half_extents(radius_sigmas);
        Ok(StampKernel {
            cov,
            inv: g.inv,
            norm: g.norm,
            radius_sq: radius_sigmas * radius_sigmas,
            half_x,
            half_y,
        })
    }

    pub fn cov(&self) -> &Cov {
        &self.cov
    }

    pub fn radius_sigmas(&self) -> f64 {
        self.radius_sq.sqrt()
    }

    /// Whether a cell center at offset `d` from the stamp mean is covered.
    #[inline]
    pub fn covers(&self, d: &Point) -> bool {
        mahalanobis_sq(&self.inv, d) <= self.radius_sq
    }

    /// Adds the truncated density centered at `mean` to `field`, visiting
    /// covered cells in ascending linear index. Returns the number of
    /// cells touched.
    pub fn apply(&self, field: &mut ScalarField, mean: &Point) -> Result<usize> {
        let spec = *field.spec();
        if !spec.contains(mean) {
            return Err(Error::OutsideDomain { x: mean.x, y: mean.y });
        }
        let (Some((i0, i1)), Some((j0, j1))) = (
            spec.x_range(mean.x - self.half_x, mean.x + self.half_x),
            spec.y_range(mean.y - self.half_y, mean.y + self.half_y),
        ) else {
            return Ok(0);
        };
        let values = field.values_mut();
        let mut touched = 0;
        for j in j0..=j1 {
            for i in i0..=i1 {
                let d = spec.center(i, j) - mean;
                let q = mahalanobis_sq(&self.inv, &d);
                if q <= self.radius_sq {
                    values[spec.index(i, j)] += self.norm * (-0.5 * q).exp();
                    touched += 1;
                }
            }
        }
        Ok(touched)
    }
}

/// Adds `N(mean, cov)` truncated at `radius_sigmas` to `field`.
pub fn stamp_gaussian(field: &mut ScalarField, mean: &Point, cov: &Cov, radius_sigmas: f64) -> Result<()> {
    StampKernel::new(*cov, radius_sigmas)?.apply(field, mean).map(|_| ())
}
