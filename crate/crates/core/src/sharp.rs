//! Sharp-interface energy `Σ_f σ(ν_f, γ_f) · area_f` of polyhedral phases.

use serde::{Deserialize, Serialize};

use crate::cell::{sigma_lookup, SurfaceTensionTable};
use crate::error::{Error, Result};

fn origin() -> [f64; 2] {
    [0.0, 0.0]
}

/// A flat interface piece: the segment (2D) or point (1D) through `position`
/// orthogonal to `normal`, of length `area` (1 in 1D), carrying surfactant
/// density `gamma` per unit area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Facet {
    pub normal: [f64; 2],
    pub area: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Center of the facet.
    #[serde(default = "origin")]
    pub position: [f64; 2],
}

impl Facet {
    pub fn new(normal: [f64; 2], area: f64, gamma: f64) -> Self {
        Facet { normal, area, gamma, position: [0.0, 0.0] }
    }

    pub fn at(mut self, position: [f64; 2]) -> Self {
        self.position = position;
        self
    }

    /// Unit tangent `(−ν_y, ν_x)`.
    pub fn tangent(&self) -> [f64; 2] {
        [-self.normal[1], self.normal[0]]
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let n = self.normal;
        if dim == 1 && n[1] != 0.0 {
            return Err(Error::InvalidPhase("1D facet normals are ±1".into()));
        }
        if !((n[0].hypot(n[1]) - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidPhase(format!("facet normal {n:?} is not a unit vector")));
        }
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(Error::InvalidPhase(format!("facet area must be positive, got {}", self.area)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidPhase(format!("facet density must be ≥ 0, got {}", self.gamma)));
        }
        if self.position.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPhase("facet position must be finite".into()));
        }
        Ok(())
    }

    /// Euclidean distance from `x` to the facet.
    pub fn distance(&self, dim: usize, x: [f64; 2]) -> f64 {
        let d = [x[0] - self.position[0], x[1] - self.position[1]];
        if dim == 1 {
            return d[0].abs();
        }
        let tau = self.tangent();
        let along = d[0] * tau[0] + d[1] * tau[1];
        let across = d[0] * self.normal[0] + d[1] * self.normal[1];
        let excess = (along.abs() - 0.5 * self.area).max(0.0);
        excess.hypot(across)
    }

    /// `n` equally spaced midpoints with their quadrature weight.
    pub fn midpoints(&self, dim: usize, n: usize) -> (Vec<[f64; 2]>, f64) {
        if dim == 1 {
            return (vec![self.position], self.area);
        }
        let tau = self.tangent();
        let h = self.area / n as f64;
        let pts = (0..n)
            .map(|k| {
                let s = -0.5 * self.area + (k as f64 + 0.5) * h;
                [self.position[0] + s * tau[0], self.position[1] + s * tau[1]]
            })
            .collect();
        (pts, h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracMass {
    pub location: [f64; 2],
    pub mass: f64,
}

/// Two-phase configuration with flat facets and point masses of surfactant
/// placed off the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralPhase {
    pub dim: usize,
    pub facets: Vec<Facet>,
    pub diracs: Vec<DiracMass>,
}

impl PolyhedralPhase {
    pub fn new(dim: usize, facets: Vec<Facet>, diracs: Vec<DiracMass>) -> Result<Self> {
        let p = PolyhedralPhase { dim, facets, diracs };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidPhase(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        for f in &self.facets {
            f.validate(self.dim)?;
        }
        for d in &self.diracs {
            if !(d.mass.is_finite() && d.mass >= 0.0) {
                return Err(Error::InvalidPhase(format!("Dirac mass must be ≥ 0, got {}", d.mass)));
            }
            if let Some(f) = self.facets.iter().find(|f| f.distance(self.dim, d.location) < 1e-12) {
                return Err(Error::InvalidPhase(format!(
                    "Dirac mass at {:?} lies on the facet through {:?}",
                    d.location, f.position
                )));
            }
        }
        Ok(())
    }

    /// Total surfactant mass `Σ β_i + Σ γ_f area_f`.
    pub fn surfactant_mass(&self) -> f64 {
        self.diracs.iter().map(|d| d.mass).sum::<f64>()
            + self.facets.iter().map(|f| f.gamma * f.area).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetEnergy {
    pub sigma: f64,
    pub area: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEnergy {
    pub total: f64,
    pub facets: Vec<FacetEnergy>,
}

/// `Σ_f σ(ν_f, γ_f) · area_f`. Point masses do not contribute.
pub fn limit_energy(phase: &PolyhedralPhase, table: &SurfaceTensionTable) -> Result<LimitEnergy> {
    phase.validate()?;
    if table.dim != phase.dim {
        return Err(Error::Table(format!("table is {}D, phase is {}D", table.dim, phase.dim)));
    }
    let facets = phase
        .facets
        .iter()
        .map(|f| {
            let sigma = sigma_lookup(table, f.normal, f.gamma)?;
            Ok(FacetEnergy { sigma, area: f.area, energy: sigma * f.area })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitEnergy { total: facets.iter().map(|f| f.energy).sum(), facets })
}

/// Sets `γ_f = mass_f / area_f`.
pub fn facet_density_from_measure(facets: &[Facet], masses: &[f64]) -> Result<Vec<Facet>> {
    if facets.len() != masses.len() {
        return Err(Error::InvalidPhase(format!("{} facets but {} masses", facets.len(), masses.len())));
    }
    facets
        .iter()
        .zip(masses)
        .map(|(f, m)| {
            if !(m.is_finite() && *m >= 0.0) {
                return Err(Error::InvalidPhase(format!("facet mass must be ≥ 0, got {m}")));
            }
            if !(f.area.is_finite() && f.area > 0.0) {
                return Err(Error::InvalidPhase("facet area must be positive".into()));
            }
            Ok(Facet { gamma: m / f.area, ..f.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::TableEntry;
    use std::f64::consts::PI;

    fn entry(s: f64) -> TableEntry {
        TableEntry { sigma: s, raw_sigma: s, valid: true, spread: 0.0, converged: true, error: None }
    }

    fn table() -> SurfaceTensionTable {
        SurfaceTensionTable::new(
            2,
            vec![0.0, 0.5 * PI, PI, 1.5 * PI],
            vec![0.0, 1.0],
            vec![
                vec![entry(2.0), entry(1.0)],
                vec![entry(3.0), entry(2.0)],
                vec![entry(2.0), entry(1.0)],
                vec![entry(3.0), entry(2.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_single_and_additive() {
        let t = table();
        let empty = PolyhedralPhase::new(2, vec![], vec![]).unwrap();
        assert_eq!(limit_energy(&empty, &t).unwrap().total, 0.0);

        let a = Facet::new([0.0, 1.0], 1.5, 0.0);
        let b = Facet::new([1.0, 0.0], 2.0, 0.5).at([3.0, 0.0]);
        let one = PolyhedralPhase::new(2, vec![a.clone()], vec![]).unwrap();
        assert_eq!(limit_energy(&one, &t).unwrap().total, 4.5);
        let both = PolyhedralPhase::new(2, vec![a.clone(), b.clone()], vec![]).unwrap();
        let solo_b = PolyhedralPhase::new(2, vec![b.clone()], vec![]).unwrap();
        let e = limit_energy(&both, &t).unwrap();
        assert_eq!(e.total, 4.5 + limit_energy(&solo_b, &t).unwrap().total);
        assert_eq!(e.facets.len(), 2);
        let swapped = PolyhedralPhase::new(2, vec![b, a], vec![]).unwrap();
        assert_eq!(limit_energy(&swapped, &t).unwrap().total, e.total);
    }

    #[test]
    fn diracs_contribute_nothing_and_must_be_off_facets() {
        let t = table();
        let f = Facet::new([0.0, 1.0], 1.0, 0.25);
        let bare = PolyhedralPhase::new(2, vec![f.clone()], vec![]).unwrap();
        let with = PolyhedralPhase::new(
            2,
            vec![f.clone()],
            vec![DiracMass { location: [0.0, 0.7], mass: 3.0 }],
        )
        .unwrap();
        assert_eq!(limit_energy(&bare, &t).unwrap(), limit_energy(&with, &t).unwrap());
        assert_eq!(with.surfactant_mass(), 3.25);
        let on = PolyhedralPhase::new(2, vec![f], vec![DiracMass { location: [0.2, 0.0], mass: 1.0 }]);
        assert!(on.is_err());
    }

    #[test]
    fn more_surfactant_never_raises_energy() {
        let t = table();
        let mut last = f64::INFINITY;
        for k in 0..=20 {
            let g = k as f64 * 0.1;
            let p = PolyhedralPhase::new(2, vec![Facet::new([0.6, 0.8], 1.0, g)], vec![]).unwrap();
            let e = limit_energy(&p, &t).unwrap().total;
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn densities_from_masses() {
        let f = [Facet::new([0.0, 1.0], 1.0, 0.0), Facet::new([0.0, 1.0], 1.0, 0.0), Facet::new([0.0, 1.0], 1.5, 0.0)];
        let g = facet_density_from_measure(&f, &[2.0, 0.0, 3.0]).unwrap();
        assert_eq!(g.iter().map(|f| f.gamma).collect::<Vec<_>>(), vec![2.0, 0.0, 2.0]);
        assert!(facet_density_from_measure(&f[..1], &[-1.0]).is_err());
        let mut z = f[0].clone();
        z.area = 0.0;
        assert!(facet_density_from_measure(&[z], &[1.0]).is_err());
    }

    #[test]
    fn distance_to_segment() {
        let f = Facet::new([0.0, 1.0], 2.0, 0.0);
        assert_eq!(f.distance(2, [0.5, 0.3]), 0.3);
        assert!((f.distance(2, [4.0, 4.0]) - 5.0).abs() < 1e-12);
        let (pts, w) = f.midpoints(2, 4);
        assert_eq!(w, 0.5);
        assert_eq!(pts.len(), 4);
        assert!((pts.iter().map(|p| p[0]).sum::<f64>()).abs() < 1e-12);
    }
}
