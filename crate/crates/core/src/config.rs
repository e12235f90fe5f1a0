//! TOML run configuration shared by every command.
//!
//! Sections are optional at parse time; each command asks for the ones it
//! needs and gets an [`Error::Config`] naming the missing key otherwise.
//! Unknown keys are rejected everywhere.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{CellProblem, SurfaceTensionTable};
use crate::energy::{DomainMode, EnergyParams, DEFAULT_SMOOTHING};
use crate::error::{Error, Result};
use crate::fields::{FieldKind, Grid, KernelSpec, Potential, ScalarField};
use crate::gamma::{CellProfile, RecoveryConfig, RecoveryDomain, ScanMode, ScanOptions};
use crate::io::DEFAULT_PRECISION;
use crate::optimize::{ConstraintSet, MassConstraint, MassMode, MinimizeOptions};
use crate::sharp::{DiracMass, Facet, PolyhedralPhase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Significant digits of printed reals.
    pub precision: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 0, threads: 0, output_dir: None, precision: DEFAULT_PRECISION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub epsilon: f64,
    /// Defaults to 0 (exact) for evaluation and to the standard `δ` for descent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default = "interior")]
    pub mode: DomainMode,
}

fn interior() -> DomainMode {
    DomainMode::Interior
}

/// Where an initial field comes from. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    Constant {
        value: f64,
    },
    /// `sign · tanh((x_axis − center)/width)`; `width` defaults to `ε`,
    /// `axis` to the last one.
    Tanh {
        #[serde(default)]
        axis: Option<usize>,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        width: Option<f64>,
        #[serde(default = "one")]
        sign: f64,
    },
    /// Independent uniform values in `[low, high)` drawn from the run seed.
    Random {
        low: f64,
        high: f64,
    },
    Csv {
        path: PathBuf,
    },
    Binary {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    pub u: FieldSource,
    pub rho: FieldSource,
}

/// Cells whose center has `from ≤ x_axis ≤ to` keep `u` fixed at `value`
/// (or at their initial value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenBand {
    pub axis: usize,
    pub from: f64,
    pub to: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default = "exactly")]
    pub mass_mode: MassMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen: Vec<FrozenBand>,
}

fn exactly() -> MassMode {
    MassMode::Exactly
}

/// Strip problem; kernel and potential come from their own sections, the
/// seed from `[run]` and descent options from `[optimize]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_mode: Option<MassMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    /// Explicit polar angles. Without them 1D uses `{0, π}` and 2D uses
    /// `directions` equally spaced angles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    /// Precomputed table CSV used by `sharp` and `scan-epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn default_directions() -> usize {
    8
}

fn default_gammas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0]
}

impl Default for TableSection {
    fn default() -> Self {
        TableSection { angles: None, directions: default_directions(), gammas: default_gammas(), path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub epsilons: Vec<f64>,
    #[serde(default = "recovery_only")]
    pub mode: ScanMode,
    pub longitudinal: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral: Option<[f64; 2]>,
    #[serde(default)]
    pub lateral_periodic: bool,
    #[serde(default = "interior")]
    pub domain_mode: DomainMode,
    /// `δ` of the minimize-each descents.
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

fn recovery_only() -> ScanMode {
    ScanMode::RecoveryOnly
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<FieldsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<MinimizeOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub facet: Vec<Facet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dirac: Vec<DiracMass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing `{key}`"))
}

fn bad(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {reason}"))
}

/// Sets a dotted key (`cell.gamma`) in a TOML document. The value is read as a
/// TOML literal when possible and as a string otherwise.
pub fn apply_override(doc: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut doc, k, v)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text, overrides)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        self.kernel.ok_or_else(|| missing("kernel"))
    }

    pub fn potential(&self) -> Potential {
        self.potential.clone().unwrap_or(Potential::QuarticDoubleWell)
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid.clone().ok_or_else(|| missing("grid"))
    }

    pub fn optimize(&self) -> MinimizeOptions {
        self.optimize.unwrap_or_default()
    }

    /// Spatial dimension from `[cell]`, else `[grid]`.
    pub fn dim(&self) -> Result<usize> {
        self.cell
            .as_ref()
            .map(|c| c.dim)
            .or_else(|| self.grid.as_ref().map(|g| g.dim()))
            .ok_or_else(|| missing("cell.dim"))
    }

    pub fn energy_params(&self, default_smoothing: f64) -> Result<EnergyParams> {
        let e = self.energy.as_ref().ok_or_else(|| missing("energy.epsilon"))?;
        if !(e.epsilon.is_finite() && e.epsilon > 0.0) {
            return Err(bad("energy.epsilon", "must be positive"));
        }
        let smoothing = e.smoothing.unwrap_or(default_smoothing);
        if !(smoothing.is_finite() && smoothing >= 0.0) {
            return Err(bad("energy.smoothing", "must be ≥ 0"));
        }
        Ok(EnergyParams { epsilon: e.epsilon, smoothing, mode: e.mode })
    }

    fn field(&self, key: &str, src: &FieldSource, grid: &Grid, kind: FieldKind, eps: f64, stream: u64) -> Result<ScalarField> {
        match src {
            FieldSource::Constant { value } => ScalarField::constant(grid, *value, kind),
            FieldSource::Tanh { axis, center, width, sign } => {
                let a = axis.unwrap_or(grid.dim() - 1);
                if a >= grid.dim() {
                    return Err(bad(&format!("{key}.axis"), format!("grid has {} axes", grid.dim())));
                }
                let w = width.unwrap_or(eps);
                if !(w.is_finite() && w > 0.0) {
                    return Err(bad(&format!("{key}.width"), "must be positive"));
                }
                ScalarField::from_fn(grid, kind, |x| sign * ((x[a] - center) / w).tanh())
            }
            FieldSource::Random { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(bad(&format!("{key}.low"), "need finite low < high"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
                rng.set_stream(stream);
                let v = (0..grid.len()).map(|_| rng.gen_range(*low..*high)).collect();
                ScalarField::new(grid.clone(), v, kind)
            }
            FieldSource::Csv { path } => crate::io::read_field_csv(&self.resolve_path(path), grid, kind),
            FieldSource::Binary { path } => {
                let f = crate::io::read_field_binary(&self.resolve_path(path))?;
                if !f.grid().same_lattice(grid) || f.kind() != kind {
                    return Err(bad(&format!("{key}.path"), "stored field does not match `grid`"));
                }
                Ok(f)
            }
        }
    }

    /// Initial `(u, ρ)` from `[fields]`; `ε` sets the default `tanh` width.
    pub fn initial_fields(&self, grid: &Grid, eps: f64) -> Result<(ScalarField, ScalarField)> {
        let f = self.fields.as_ref().ok_or_else(|| missing("fields"))?;
        let u = self.field("fields.u", &f.u, grid, FieldKind::OrderParameter, eps, 1)?;
        let rho = self.field("fields.rho", &f.rho, grid, FieldKind::Density, eps, 2)?;
        Ok((u, rho))
    }

    pub fn constraints(&self, u0: &ScalarField) -> Result<ConstraintSet> {
        let Some(c) = &self.constraints else {
            return Ok(ConstraintSet::default());
        };
        let grid = u0.grid();
        let mut set = ConstraintSet {
            frozen: None,
            mass: c.mass.map(|target| MassConstraint { target, mode: c.mass_mode }),
        };
        if !c.frozen.is_empty() {
            let mut mask = vec![None; grid.len()];
            for (b, band) in c.frozen.iter().enumerate() {
                if band.axis >= grid.dim() {
                    return Err(bad(&format!("constraints.frozen[{b}].axis"), format!("grid has {} axes", grid.dim())));
                }
                for (cell, slot) in mask.iter_mut().enumerate() {
                    let x = grid.center(cell)[band.axis];
                    if band.from <= x && x <= band.to {
                        *slot = Some(band.value.unwrap_or(u0.values()[cell]));
                    }
                }
            }
            set.frozen = Some(mask);
        }
        set.validate(grid).map_err(|e| bad("constraints", e))?;
        Ok(set)
    }

    pub fn cell_problem(&self) -> Result<CellProblem> {
        let c = self.cell.as_ref().ok_or_else(|| missing("cell"))?;
        let mut cp = CellProblem::new(c.dim, self.kernel()?, c.gamma);
        if let Some(a) = c.angle {
            cp.angle = a;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = c.$f { cp.$f = v; } )* };
        }
        set!(cross_side, half_length, resolution, smoothing, mass_mode, starts);
        cp.clamp_width = c.clamp_width;
        cp.potential = self.potential();
        cp.seed = self.run.seed;
        cp.options = self.optimize();
        cp.validate().map_err(|e| bad("cell", e))?;
        Ok(cp)
    }

    /// Table directions and `γ` values.
    pub fn table_axes(&self, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.table.clone().unwrap_or_default();
        let angles = match t.angles {
            Some(a) => a,
            None if dim == 1 => vec![0.0, PI],
            None => {
                if t.directions == 0 {
                    return Err(bad("table.directions", "must be positive"));
                }
                (0..t.directions).map(|k| 2.0 * PI * k as f64 / t.directions as f64).collect()
            }
        };
        if angles.is_empty() {
            return Err(bad("table.angles", "empty"));
        }
        if t.gammas.is_empty() {
            return Err(bad("table.gammas", "empty"));
        }
        Ok((angles, t.gammas))
    }

    /// Table loaded from `table.path`, if set.
    pub fn stored_table(&self, dim: usize) -> Result<Option<SurfaceTensionTable>> {
        match self.table.as_ref().and_then(|t| t.path.as_ref()) {
            Some(p) => crate::io::read_sigma_table_csv(&self.resolve_path(p), dim).map(Some),
            None => Ok(None),
        }
    }

    pub fn phase(&self) -> Result<PolyhedralPhase> {
        PolyhedralPhase::new(self.dim()?, self.facet.clone(), self.dirac.clone()).map_err(|e| bad("facet", e))
    }

    /// The single facet a recovery experiment is built around.
    pub fn recovery_facet(&self) -> Result<&Facet> {
        match self.facet.as_slice() {
            [f] => Ok(f),
            [] => Err(missing("facet")),
            _ => Err(bad("facet", "recovery experiments take exactly one facet")),
        }
    }

    pub fn recovery_config(&self, profile: CellProfile) -> Result<RecoveryConfig> {
        let s = self.scan.as_ref().ok_or_else(|| missing("scan"))?;
        let rc = RecoveryConfig {
            facet: self.recovery_facet()?.clone(),
            profile,
            epsilons: s.epsilons.clone(),
            diracs: self.dirac.clone(),
            domain: RecoveryDomain {
                lateral: s.lateral,
                lateral_periodic: s.lateral_periodic,
                longitudinal: s.longitudinal,
                mode: s.domain_mode,
            },
        };
        rc.validate().map_err(|e| bad("scan", e))?;
        Ok(rc)
    }

    pub fn scan_options(&self) -> Result<ScanOptions> {
        let s = self.scan.as_ref().ok_or_else(|| missing("scan"))?;
        Ok(ScanOptions { mode: s.mode, smoothing: s.smoothing, minimize: self.optimize() })
    }
}
