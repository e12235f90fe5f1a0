use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How values are resolved for lattice points that fall outside the grid along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BoundaryMode {
    /// Index wraparound: the axis is a circle.
    Periodic,
    /// Fixed exterior values below the first cell and above the last cell.
    Clamped { lower: f64, upper: f64 },
    /// Nothing exists outside; offsets leaving the grid are dropped.
    Open,
}

impl BoundaryMode {
    /// Same exterior value on both sides.
    pub fn clamped(value: f64) -> Self {
        BoundaryMode::Clamped { lower: value, upper: value }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, BoundaryMode::Periodic)
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BoundaryMode::Periodic => write!(f, "periodic"),
            BoundaryMode::Open => write!(f, "open"),
            BoundaryMode::Clamped { lower, upper } if lower == upper => write!(f, "clamped:{lower}"),
            BoundaryMode::Clamped { lower, upper } => write!(f, "clamped:{lower},{upper}"),
        }
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    /// Accepts `periodic`, `open`, `clamped:V` or `clamped:LOWER,UPPER`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "periodic" => return Ok(BoundaryMode::Periodic),
            "open" => return Ok(BoundaryMode::Open),
            _ => {}
        }
        let bad = || Error::InvalidGrid(format!("unrecognized boundary mode `{s}`"));
        let rest = s.strip_prefix("clamped:").ok_or_else(bad)?;
        let vals: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match vals.as_slice() {
            [v] if v.is_finite() => Ok(BoundaryMode::clamped(*v)),
            [lo, hi] if lo.is_finite() && hi.is_finite() => {
                Ok(BoundaryMode::Clamped { lower: *lo, upper: *hi })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for BoundaryMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BoundaryMode> for String {
    fn from(b: BoundaryMode) -> String {
        b.to_string()
    }
}

/// Rectangular tensor-product grid in one or two dimensions.
///
/// Cells are indexed row-major with axis 0 slowest. Cell `i` along an axis has
/// its center at `origin + (i + 0.5) * spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDef", into = "GridDef")]
pub struct Grid {
    dim: usize,
    extents: Vec<f64>,
    cells: Vec<usize>,
    origin: Vec<f64>,
    boundary: Vec<BoundaryMode>,
    spacing: Vec<f64>,
}

/// Serialized form of [`Grid`]; spacings are derived on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDef {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
    pub boundary: Vec<BoundaryMode>,
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
}

impl TryFrom<GridDef> for Grid {
    type Error = Error;
    fn try_from(d: GridDef) -> Result<Self> {
        let origin = d.origin.unwrap_or_else(|| vec![0.0; d.dim]);
        Grid::with_origin(d.dim, &d.extents, &d.cells, &d.boundary, &origin)
    }
}

impl From<Grid> for GridDef {
    fn from(g: Grid) -> GridDef {
        GridDef {
            dim: g.dim,
            extents: g.extents,
            cells: g.cells,
            boundary: g.boundary,
            origin: Some(g.origin),
        }
    }
}

impl Grid {
    pub fn new(
        dim: usize,
        extents: &[f64],
        cells: &[usize],
        boundary: &[BoundaryMode],
    ) -> Result<Self> {
        Self::with_origin(dim, extents, cells, boundary, &vec![0.0; dim.max(1)])
    }

    pub fn with_origin(
        dim: usize,
        extents: &[f64],
        cells: &[usize],
        boundary: &[BoundaryMode],
        origin: &[f64],
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if extents.len() != dim || cells.len() != dim || boundary.len() != dim || origin.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} entries per axis (extents {}, cells {}, boundary {}, origin {})",
                extents.len(),
                cells.len(),
                boundary.len(),
                origin.len()
            )));
        }
        for (axis, (&e, &n)) in extents.iter().zip(cells).enumerate() {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::InvalidGrid(format!("extent on axis {axis} must be positive, got {e}")));
            }
            if n < 2 {
                return Err(Error::InvalidGrid(format!("axis {axis} needs at least 2 cells, got {n}")));
            }
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let mut grid = Grid {
            dim,
            extents: extents.to_vec(),
            cells: cells.to_vec(),
            origin: origin.to_vec(),
            boundary: boundary.to_vec(),
            spacing: Vec::new(),
        };
        grid.refresh();
        Ok(grid)
    }

    fn refresh(&mut self) {
        self.spacing = self.extents.iter().zip(&self.cells).map(|(e, &n)| e / n as f64).collect();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn boundary(&self) -> &[BoundaryMode] {
        &self.boundary
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn total_volume(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index to per-axis indices (unused axes are zero).
    #[inline]
    pub fn unravel(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            let n1 = self.cells[1];
            [flat / n1, flat % n1]
        }
    }

    #[inline]
    pub fn ravel(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.cells[1] + idx[1]
        }
    }

    /// Physical coordinates of a cell center.
    pub fn center(&self, flat: usize) -> [f64; 2] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 2];
        for axis in 0..self.dim {
            x[axis] = self.origin[axis] + (idx[axis] as f64 + 0.5) * self.spacing[axis];
        }
        x
    }

    /// True when both grids describe the same lattice (shape, spacing and boundary).
    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.cells == other.cells
            && self.boundary == other.boundary
            && self
                .spacing
                .iter()
                .zip(&other.spacing)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()))
    }

    /// Resolves the lattice point `idx + offset`.
    ///
    /// With `use_exterior` false only in-grid points (after periodic wrap) are
    /// returned; otherwise clamped axes supply their exterior value. When two
    /// clamped axes are exceeded at once, the lowest axis wins.
    #[inline]
    pub fn resolve(&self, idx: [usize; 2], offset: [isize; 2], use_exterior: bool) -> Neighbor {
        let mut out = [0usize; 2];
        let mut exterior: Option<f64> = None;
        for axis in 0..self.dim {
            let n = self.cells[axis] as isize;
            let j = idx[axis] as isize + offset[axis];
            if (0..n).contains(&j) {
                out[axis] = j as usize;
                continue;
            }
            match self.boundary[axis] {
                BoundaryMode::Periodic => out[axis] = j.rem_euclid(n) as usize,
                BoundaryMode::Open => return Neighbor::Outside,
                BoundaryMode::Clamped { lower, upper } => {
                    if !use_exterior {
                        return Neighbor::Outside;
                    }
                    if exterior.is_none() {
                        exterior = Some(if j < 0 { lower } else { upper });
                    }
                }
            }
        }
        match exterior {
            Some(v) => Neighbor::Exterior(v),
            None => Neighbor::Cell(self.ravel(out)),
        }
    }
}

/// Result of resolving a lattice point against a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighbor {
    Cell(usize),
    Exterior(f64),
    Outside,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_volume_1d() {
        let g = Grid::new(1, &[1.0], &[4], &[BoundaryMode::Periodic]).unwrap();
        assert_eq!(g.spacing(), &[0.25]);
        assert_eq!(g.cell_volume(), 0.25);
    }

    #[test]
    fn spacing_and_volume_2d() {
        let g = Grid::new(
            2,
            &[1.0, 2.0],
            &[4, 8],
            &[BoundaryMode::Periodic, BoundaryMode::clamped(1.0)],
        )
        .unwrap();
        assert_eq!(g.cell_volume(), 0.0625);
        assert_eq!(g.len(), 32);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(1, &[1.0], &[1], &[BoundaryMode::Open]).is_err());
        assert!(Grid::new(1, &[0.0], &[4], &[BoundaryMode::Open]).is_err());
        assert!(Grid::new(3, &[1.0; 3], &[4; 3], &[BoundaryMode::Open; 3]).is_err());
        assert!(Grid::new(2, &[1.0], &[4], &[BoundaryMode::Open]).is_err());
    }

    #[test]
    fn periodic_wraparound_is_identity() {
        let g = Grid::new(2, &[1.0, 1.0], &[5, 3], &[BoundaryMode::Periodic; 2]).unwrap();
        for flat in 0..g.len() {
            let idx = g.unravel(flat);
            assert_eq!(g.resolve(idx, [5, 0], false), Neighbor::Cell(flat));
            assert_eq!(g.resolve(idx, [-5, 3], false), Neighbor::Cell(flat));
            assert_eq!(g.resolve(idx, [10, -6], true), Neighbor::Cell(flat));
        }
    }

    #[test]
    fn clamped_and_open_resolution() {
        let g = Grid::new(
            1,
            &[1.0],
            &[4],
            &[BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }],
        )
        .unwrap();
        assert_eq!(g.resolve([0, 0], [-1, 0], true), Neighbor::Exterior(-1.0));
        assert_eq!(g.resolve([3, 0], [2, 0], true), Neighbor::Exterior(1.0));
        assert_eq!(g.resolve([3, 0], [2, 0], false), Neighbor::Outside);
        let o = Grid::new(1, &[1.0], &[4], &[BoundaryMode::Open]).unwrap();
        assert_eq!(o.resolve([3, 0], [1, 0], true), Neighbor::Outside);
    }

    #[test]
    fn boundary_mode_strings() {
        for s in ["periodic", "open", "clamped:1", "clamped:-1,1"] {
            let b: BoundaryMode = s.parse().unwrap();
            assert_eq!(b.to_string().parse::<BoundaryMode>().unwrap(), b);
        }
        assert!("clamped:x".parse::<BoundaryMode>().is_err());
        assert!("reflect".parse::<BoundaryMode>().is_err());
    }
}
