//! Grids, sampled scalar fields, discretized kernels and double-well potentials.

mod grid;
mod kernel;
mod potential;

pub use grid::{BoundaryMode, Grid, GridDef, Neighbor};
pub use kernel::{
    kernel_moments, sample_kernel, sample_kernel_in_frame, DiscreteKernel, Frame, KernelFamily,
    KernelSpec,
};
pub(crate) use kernel::exact_sin_cos;
pub use potential::{Potential, PotentialDef, PotentialTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convenience constructor mirroring [`Grid::new`].
pub fn make_grid(
    dim: usize,
    extents: &[f64],
    cells: &[usize],
    boundary: &[BoundaryMode],
) -> Result<Grid> {
    Grid::new(dim, extents, cells, boundary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    OrderParameter,
    Density,
}

/// Cell-centered values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    kind: FieldKind,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("values must be finite".into()));
        }
        if kind == FieldKind::Density {
            if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(Error::InvalidField(format!("density is negative ({v}) at cell {i}")));
            }
        }
        Ok(ScalarField { grid, values, kind })
    }

    pub fn constant(grid: &Grid, value: f64, kind: FieldKind) -> Result<Self> {
        ScalarField::new(grid.clone(), vec![value; grid.len()], kind)
    }

    pub fn from_fn(grid: &Grid, kind: FieldKind, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        ScalarField::new(grid.clone(), values, kind)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at an index that may lie outside the grid on periodic axes.
    pub fn at_wrapped(&self, idx: [isize; 2]) -> Option<f64> {
        match self.grid.resolve([0, 0], idx, false) {
            Neighbor::Cell(c) => Some(self.values[c]),
            _ => None,
        }
    }

    /// `Σ v · cell_volume`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ScalarField::new(self.grid.clone(), values, self.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_must_be_nonnegative() {
        let g = make_grid(1, &[1.0], &[4], &[BoundaryMode::Open]).unwrap();
        assert!(ScalarField::new(g.clone(), vec![0.0, 1.0, -0.1, 0.0], FieldKind::Density).is_err());
        assert!(ScalarField::new(g.clone(), vec![0.0, 1.0, -0.1, 0.0], FieldKind::OrderParameter).is_ok());
        assert!(ScalarField::new(g, vec![0.0; 3], FieldKind::OrderParameter).is_err());
    }

    #[test]
    fn periodic_reads_wrap() {
        let g = make_grid(1, &[1.0], &[5], &[BoundaryMode::Periodic]).unwrap();
        let f = ScalarField::from_fn(&g, FieldKind::OrderParameter, |x| x[0]).unwrap();
        for i in 0..5isize {
            assert_eq!(f.at_wrapped([i + 5, 0]), f.at_wrapped([i, 0]));
            assert_eq!(f.at_wrapped([i - 10, 0]), f.at_wrapped([i, 0]));
        }
    }
}
