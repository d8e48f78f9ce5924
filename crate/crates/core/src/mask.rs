//! Hole regions: the union of per-component sigma ellipses and its complement.

use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::gaussian::MixtureModel;

/// Default Mahalanobis radius that bounds a hole.
pub const DEFAULT_SIGMA_LEVEL: f64 = 3.0;

/// Per-cell hole membership. A cell belongs to at most one hole; overlapping
/// ellipses go to the lowest component index.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    spec: GridSpec,
    hole_id: Vec<Option<u32>>,
    hole_cells: Vec<Vec<usize>>,
}

impl RegionMask {
    /// Builds a mask from an explicit labelling. `label(cell)` returns the hole
    /// index, if any; labels must be below `holes`.
    pub fn from_labels(spec: GridSpec, holes: usize, mut label: impl FnMut(usize) -> Option<usize>) -> Result<Self> {
        let mut hole_id = Vec::with_capacity(spec.len());
        let mut hole_cells = vec![Vec::new(); holes];
        for c in 0..spec.len() {
            let id = label(c);
            if let Some(h) = id {
                if h >= holes {
                    return Err(Error::InvalidHole { index: h, count: holes });
                }
                hole_cells[h].push(c);
            }
            hole_id.push(id.map(|h| h as u32));
        }
        Ok(RegionMask {
            spec,
            hole_id,
            hole_cells,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn hole_count(&self) -> usize {
        self.hole_cells.len()
    }

    #[inline]
    pub fn hole_of(&self, cell: usize) -> Option<usize> {
        self.hole_id[cell].map(|h| h as usize)
    }

    /// Cell lies in some hole.
    #[inline]
    pub fn in_holes(&self, cell: usize) -> bool {
        self.hole_id[cell].is_some()
    }

    /// Cells of hole `hole`, in ascending linear index.
    pub fn hole_cells(&self, hole: usize) -> Result<&[usize]> {
        self.hole_cells.get(hole).map(Vec::as_slice).ok_or(Error::InvalidHole {
            index: hole,
            count: self.hole_count(),
        })
    }

    /// All cells outside every hole.
    pub fn outside_cells(&self) -> Vec<usize> {
        (0..self.spec.len()).filter(|&c| !self.in_holes(c)).collect()
    }
}

/// Labels each cell center `c` with the lowest `i` such that
/// `(c - mu_i)^T Sigma_i^{-1} (c - mu_i) <= sigma_level^2`.
pub fn build_hole_masks(model: &MixtureModel, spec: &GridSpec, sigma_level: f64) -> Result<RegionMask> {
    if !(sigma_level > 0.0) || !sigma_level.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma level {sigma_level} must be positive"
        )));
    }
    let limit = sigma_level * sigma_level;
    let comps = model.components();
    RegionMask::from_labels(*spec, comps.len(), |c| {
        let p = spec.center_of(c);
        comps.iter().position(|k| k.gaussian.mahalanobis_sq(&p) <= limit)
    })
}
