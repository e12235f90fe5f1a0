use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Double-well potential `W` with wells at ±1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialDef", into = "PotentialDef")]
pub enum Potential {
    /// `W(z) = (z² − 1)²`.
    QuarticDoubleWell,
    /// Piecewise-linear interpolation of samples, extended linearly with
    /// nonnegative growth outside the sampled range.
    Table(PotentialTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    z: Vec<f64>,
    w: Vec<f64>,
}

impl PotentialTable {
    /// Samples must be strictly increasing in `z`, nonnegative, and vanish exactly
    /// at ±1 and nowhere else.
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidPotential("table needs at least 3 samples".into()));
        }
        let z: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let w: Vec<f64> = samples.iter().map(|s| s.1).collect();
        if z.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("samples must be finite".into()));
        }
        if z.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidPotential("sample abscissae must be strictly increasing".into()));
        }
        if w.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidPotential("W must be nonnegative".into()));
        }
        for well in [-1.0, 1.0] {
            if !z.iter().zip(&w).any(|(zi, wi)| *zi == well && *wi == 0.0) {
                return Err(Error::InvalidPotential(format!("W({well}) must be sampled and equal 0")));
            }
        }
        if z.iter().zip(&w).any(|(zi, wi)| *wi == 0.0 && zi.abs() != 1.0) {
            return Err(Error::InvalidPotential("W may vanish only at ±1".into()));
        }
        if z[0] >= -1.0 || *z.last().unwrap() <= 1.0 {
            return Err(Error::InvalidPotential("samples must extend beyond both wells".into()));
        }
        Ok(PotentialTable { z, w })
    }

    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.z.iter().cloned().zip(self.w.iter().cloned()).collect()
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.z.len();
        let i = match self.z.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let slope = (self.w[i + 1] - self.w[i]) / (self.z[i + 1] - self.z[i]);
        (i, slope)
    }

    fn value(&self, x: f64) -> f64 {
        let n = self.z.len();
        if x <= self.z[0] {
            let (_, slope) = self.locate(self.z[0]);
            return self.w[0] + slope.abs() * (self.z[0] - x);
        }
        if x >= self.z[n - 1] {
            let (_, slope) = self.locate(self.z[n - 1]);
            return self.w[n - 1] + slope.abs() * (x - self.z[n - 1]);
        }
        let (i, slope) = self.locate(x);
        self.w[i] + slope * (x - self.z[i])
    }

    fn derivative(&self, x: f64) -> f64 {
        let n = self.z.len();
        let (_, slope) = self.locate(x);
        if x < self.z[0] {
            -slope.abs()
        } else if x > self.z[n - 1] {
            slope.abs()
        } else {
            slope
        }
    }
}

impl Potential {
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => {
                let a = z * z - 1.0;
                a * a
            }
            Potential::Table(t) => t.value(z),
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => 4.0 * z * (z * z - 1.0),
            Potential::Table(t) => t.derivative(z),
        }
    }

    /// Symmetric under `z ↦ −z`.
    pub fn is_even(&self) -> bool {
        match self {
            Potential::QuarticDoubleWell => true,
            Potential::Table(t) => t
                .z
                .iter()
                .zip(&t.w)
                .all(|(z, w)| t.z.iter().zip(&t.w).any(|(z2, w2)| *z2 == -z && w2 == w)),
        }
    }
}

/// TOML/JSON form: `family = "quartic"` or `family = "table"` with `samples = [[z, w], ...]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialDef {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
}

impl TryFrom<PotentialDef> for Potential {
    type Error = Error;
    fn try_from(d: PotentialDef) -> Result<Self> {
        match d.family.as_str() {
            "quartic" | "quartic_double_well" => {
                if d.samples.is_some() {
                    return Err(Error::InvalidPotential("quartic potential takes no samples".into()));
                }
                Ok(Potential::QuarticDoubleWell)
            }
            "table" | "user_table" => {
                let samples = d
                    .samples
                    .ok_or_else(|| Error::InvalidPotential("table potential needs `samples`".into()))?;
                let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s[0], s[1])).collect();
                Ok(Potential::Table(PotentialTable::new(&pairs)?))
            }
            other => Err(Error::InvalidPotential(format!("unknown potential family `{other}`"))),
        }
    }
}

impl From<Potential> for PotentialDef {
    fn from(p: Potential) -> Self {
        match p {
            Potential::QuarticDoubleWell => PotentialDef { family: "quartic".into(), samples: None },
            Potential::Table(t) => PotentialDef {
                family: "table".into(),
                samples: Some(t.samples().into_iter().map(|(z, w)| [z, w]).collect()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_wells_and_sign() {
        let w = Potential::QuarticDoubleWell;
        assert_eq!(w.value(1.0), 0.0);
        assert_eq!(w.value(-1.0), 0.0);
        assert_eq!(w.value(0.0), 1.0);
        for i in 0..=600 {
            let z = -3.0 + i as f64 * 0.01;
            assert!(w.value(z) >= 0.0);
            let fd = (w.value(z + 1e-6) - w.value(z - 1e-6)) / 2e-6;
            assert!((fd - w.derivative(z)).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn table_validation() {
        let ok = [(-2.0, 3.0), (-1.0, 0.0), (0.0, 1.0), (1.0, 0.0), (2.0, 3.0)];
        let t = Potential::Table(PotentialTable::new(&ok).unwrap());
        assert_eq!(t.value(0.5), 0.5);
        assert_eq!(t.value(3.0), 6.0);
        assert_eq!(t.value(-3.0), 6.0);
        assert_eq!(t.derivative(1.5), 3.0);
        assert!(t.is_even());

        let negative = [(-2.0, 3.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0), (2.0, 3.0)];
        assert!(PotentialTable::new(&negative).is_err());
        let extra_zero = [(-2.0, 3.0), (-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (2.0, 3.0)];
        assert!(PotentialTable::new(&extra_zero).is_err());
        let missing_well = [(-2.0, 3.0), (-1.0, 0.0), (0.0, 1.0), (2.0, 3.0)];
        assert!(PotentialTable::new(&missing_well).is_err());
    }

    #[test]
    fn serde_forms() {
        let p: Potential = toml::from_str("family = \"quartic\"").unwrap();
        assert_eq!(p, Potential::QuarticDoubleWell);
        let t: Potential =
            toml::from_str("family = \"table\"\nsamples = [[-2,3],[-1,0],[0,1],[1,0],[2,3]]").unwrap();
        assert!(matches!(t, Potential::Table(_)));
        assert!(toml::from_str::<Potential>("family = \"quartic\"\nextra = 1").is_err());
    }
}
