//! Recovery sequences built from a cell minimizer, scans over `ε`, and the
//! diagnostics used to watch diffuse energies approach the sharp limit.
//!
//! A recovery pair for a flat facet with normal `ν = s·e_N` through the plane
//! `x_N = p` is `u_ε(x) = v(t, ℓ)` and `ρ_ε(x) = ρ̃(t, ℓ)/ε`, with
//! `t = s (x_N − p)/ε` and `ℓ` the lateral position in units of `ε` taken
//! modulo the cell period. Cells beyond the strip take `u = sign(t)`, `ρ̃ = 0`.
//! A layer `{0 < s (x_N − p) < ε^{1/2}}` of height `(γ − m̃)/ε^{1/2}` restores the
//! facet's surfactant load, `m̃` being the cell mass per unit area, and every
//! point mass `β` becomes the ball `B(x_i, ε^{1/(2N)})` of height `β ω_N^{-1} ε^{-1/2}`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{build_strip, CellProblem, CellSolution, SurfaceTensionTable};
use crate::energy::{total_energy, DomainMode, EnergyBreakdown, EnergyParams};
use crate::error::{invalid_param, Error, Result};
use crate::fields::{sample_kernel, BoundaryMode, DiscreteKernel, FieldKind, Grid, ScalarField};
use crate::optimize::{minimize, ConstraintSet, MassConstraint, MassMode, MinimizeOptions, MinimizeResult};
use crate::sharp::{limit_energy, DiracMass, Facet, PolyhedralPhase};

/// Tolerance for lattice commensurability checks, in cells.
const LATTICE_TOL: f64 = 1e-6;
/// Fewest cells per `ε` accepted for a recovery grid.
pub const MIN_CELLS_PER_EPSILON: f64 = 4.0;

/// Cell profile `(v, ρ̃)` in strip coordinates together with the problem it solves.
#[derive(Debug, Clone)]
pub struct CellProfile {
    pub problem: CellProblem,
    pub u: ScalarField,
    pub rho: ScalarField,
}

impl CellProfile {
    pub fn new(problem: CellProblem, u: ScalarField, rho: ScalarField) -> Result<Self> {
        let strip = build_strip(&problem)?;
        if !strip.grid.same_lattice(u.grid()) || !strip.grid.same_lattice(rho.grid()) {
            return Err(Error::GridMismatch("profile does not live on the cell problem's strip".into()));
        }
        Ok(CellProfile { problem, u, rho })
    }

    pub fn from_solution(problem: &CellProblem, sol: &CellSolution) -> Result<Self> {
        CellProfile::new(problem.clone(), sol.u_star.clone(), sol.rho_star.clone())
    }

    /// `u = sign(t)`, `ρ̃ = 0`.
    pub fn sharp_step(problem: CellProblem) -> Result<Self> {
        let strip = build_strip(&problem)?;
        let u = strip.t.iter().map(|t| if *t > 0.0 { 1.0 } else { -1.0 }).collect();
        Ok(CellProfile {
            problem,
            u: ScalarField::new(strip.grid.clone(), u, FieldKind::OrderParameter)?,
            rho: ScalarField::constant(&strip.grid, 0.0, FieldKind::Density)?,
        })
    }

    /// Cell surfactant mass per unit cross-section.
    pub fn mass_per_area(&self) -> f64 {
        self.rho.integral() / self.problem.cross_area()
    }
}

fn default_mode() -> DomainMode {
    DomainMode::Interior
}

/// Box `A` on which recovery pairs are evaluated. The longitudinal axis is the
/// last one. In extended mode the longitudinal exterior carries the two phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryDomain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral: Option<[f64; 2]>,
    #[serde(default)]
    pub lateral_periodic: bool,
    pub longitudinal: [f64; 2],
    #[serde(default = "default_mode")]
    pub mode: DomainMode,
}

#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    pub facet: Facet,
    pub profile: CellProfile,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub diracs: Vec<DiracMass>,
    pub domain: RecoveryDomain,
}

/// Index mapping between a recovery grid and the strip.
struct Placement {
    dim: usize,
    sign: f64,
    /// `s (lo_N − p)/(ε h) + L/h`, an integer: strip face index of the first domain face.
    long_offset: isize,
    lat_offset: isize,
    strip_long: usize,
    strip_lat: usize,
}

fn near_integer(name: &str, v: f64) -> Result<isize> {
    let r = v.round();
    if (v - r).abs() > LATTICE_TOL {
        return Err(Error::Recovery(format!("{name} is not commensurate with the lattice ({v} cells)")));
    }
    Ok(r as isize)
}

impl RecoveryConfig {
    pub fn dim(&self) -> usize {
        self.profile.problem.dim
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        self.facet.validate(dim)?;
        let n = self.facet.normal;
        let normal_ok = if dim == 1 { n[0].abs() == 1.0 } else { n[0] == 0.0 && n[1].abs() == 1.0 };
        if !normal_ok {
            return Err(Error::Recovery("recovery facets must have normal ±e_N".into()));
        }
        let cp = &self.profile.problem;
        let cell_angle = cp.direction();
        if cell_angle[dim - 1] != n[dim - 1] {
            return Err(Error::Recovery(format!(
                "cell profile solved for direction {cell_angle:?}, facet normal is {n:?}"
            )));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(invalid_param("epsilons", "need a nonempty list of positive values"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid_param("epsilons", "must be strictly decreasing"));
        }
        if cp.resolution < MIN_CELLS_PER_EPSILON {
            return Err(Error::Recovery(format!(
                "{} cells per ε under-resolve the profile (need ≥ {MIN_CELLS_PER_EPSILON})",
                cp.resolution
            )));
        }
        let d = &self.domain;
        let [lo, hi] = d.longitudinal;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::Recovery(format!("empty longitudinal range {:?}", d.longitudinal)));
        }
        let p = self.facet.position[dim - 1];
        if !(lo < p && p < hi) {
            return Err(Error::Recovery("facet plane must lie inside the domain".into()));
        }
        if dim == 2 {
            let [a, b] = d
                .lateral
                .ok_or_else(|| Error::Recovery("2D domains need a lateral range".into()))?;
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::Recovery(format!("empty lateral range {:?}", [a, b])));
            }
            let f0 = self.facet.position[0] - 0.5 * self.facet.area;
            let f1 = self.facet.position[0] + 0.5 * self.facet.area;
            if (f0 - a).abs() > 1e-9 * (b - a) || (f1 - b).abs() > 1e-9 * (b - a) {
                return Err(Error::Recovery("the facet must span the domain's lateral range".into()));
            }
        }
        PolyhedralPhase::new(dim, vec![self.facet.clone()], self.diracs.clone())?;
        Ok(())
    }

    /// Recovery grid at `eps`: spacing `ε/resolution` on every axis.
    pub fn grid(&self, eps: f64) -> Result<Grid> {
        let dim = self.dim();
        let h = eps / self.profile.problem.resolution;
        let d = &self.domain;
        let [lo, hi] = d.longitudinal;
        let n_long = near_integer("longitudinal extent", (hi - lo) / h)?;
        let sign = self.facet.normal[dim - 1];
        let long_bnd = match d.mode {
            DomainMode::Interior => BoundaryMode::Open,
            DomainMode::Extended => BoundaryMode::Clamped { lower: -sign, upper: sign },
        };
        if dim == 1 {
            return Grid::with_origin(1, &[hi - lo], &[n_long as usize], &[long_bnd], &[lo]);
        }
        let [a, b] = d.lateral.unwrap();
        let n_lat = near_integer("lateral extent", (b - a) / h)?;
        let lat_bnd = if d.lateral_periodic { BoundaryMode::Periodic } else { BoundaryMode::Open };
        Grid::with_origin(2, &[b - a, hi - lo], &[n_lat as usize, n_long as usize], &[lat_bnd, long_bnd], &[a, lo])
    }

    fn placement(&self, eps: f64) -> Result<Placement> {
        let dim = self.dim();
        let cp = &self.profile.problem;
        let res = cp.resolution;
        let sign = self.facet.normal[dim - 1];
        let p = self.facet.position[dim - 1];
        let lo = self.domain.longitudinal[0];
        let long_offset = near_integer("facet plane", (sign * (lo - p) / eps + cp.half_length) * res)?;
        let strip_cells = self.profile.u.grid().cells();
        let (lat_offset, strip_lat) = if dim == 2 {
            let copies = self.facet.area / (eps * cp.cross_side);
            near_integer("facet length in cell periods", copies)?;
            let a = self.domain.lateral.unwrap()[0];
            let f0 = self.facet.position[0] - 0.5 * self.facet.area;
            (near_integer("facet start", (a - f0) / eps * res)?, strip_cells[0])
        } else {
            (0, 1)
        };
        Ok(Placement {
            dim,
            sign,
            long_offset,
            lat_offset,
            strip_long: *strip_cells.last().unwrap(),
            strip_lat,
        })
    }
}

impl Placement {
    /// Strip cell for domain cell `idx`, or the side (`±1`) when outside the strip.
    fn locate(&self, idx: [usize; 2]) -> std::result::Result<usize, f64> {
        let j = idx[self.dim - 1] as isize;
        // strip index of the domain cell center: for s = +1 it is offset + j,
        // for s = −1 the strip runs the other way
        let i = if self.sign > 0.0 { self.long_offset + j } else { self.long_offset - j - 1 };
        if i < 0 {
            return Err(-1.0);
        }
        if i >= self.strip_long as isize {
            return Err(1.0);
        }
        if self.dim == 1 {
            return Ok(i as usize);
        }
        let m = self.strip_lat as isize;
        // lateral strip axis points along (sin θ, −cos θ) = (s, 0)
        let l = idx[0] as isize + self.lat_offset;
        let l = if self.sign > 0.0 { l } else { -l - 1 };
        Ok(l.rem_euclid(m) as usize * self.strip_long + i as usize)
    }
}

/// Unit-ball volume `ω_N`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        _ => PI * 4.0 / 3.0,
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryFields {
    pub u: ScalarField,
    pub rho: ScalarField,
    /// Height of the correction layer.
    pub layer_height: f64,
}

/// Builds `(u_ε, ρ_ε)`. `with_diracs = false` omits the mollified balls.
pub fn recovery_fields_with(rc: &RecoveryConfig, eps: f64, with_diracs: bool) -> Result<RecoveryFields> {
    rc.validate()?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid_param("epsilon", format!("must be positive, got {eps}")));
    }
    let dim = rc.dim();
    let grid = rc.grid(eps)?;
    let place = rc.placement(eps)?;
    let v = rc.profile.u.values();
    let rt = rc.profile.rho.values();
    let mut u = Vec::with_capacity(grid.len());
    let mut rho = Vec::with_capacity(grid.len());
    for c in 0..grid.len() {
        match place.locate(grid.unravel(c)) {
            Ok(k) => {
                u.push(v[k]);
                rho.push(rt[k] / eps);
            }
            Err(side) => {
                u.push(side);
                rho.push(0.0);
            }
        }
    }

    let deficit = rc.facet.gamma - rc.profile.mass_per_area();
    let deficit = if deficit < 0.0 && deficit > -1e-12 * rc.facet.gamma.max(1.0) { 0.0 } else { deficit };
    if deficit < 0.0 {
        return Err(Error::Recovery(format!(
            "cell density carries {} per unit area, more than the facet load {}",
            rc.profile.mass_per_area(),
            rc.facet.gamma
        )));
    }
    let thickness = eps.sqrt();
    let layer_height = deficit / thickness;
    let sign = place.sign;
    let p = rc.facet.position[dim - 1];
    if layer_height > 0.0 {
        let [lo, hi] = rc.domain.longitudinal;
        let far = p + sign * thickness;
        if far <= lo || far >= hi {
            return Err(Error::Recovery(format!("correction layer of thickness {thickness} leaves the domain")));
        }
        for (c, r) in rho.iter_mut().enumerate() {
            let s = sign * (grid.center(c)[dim - 1] - p);
            if s > 0.0 && s < thickness {
                *r += layer_height;
            }
        }
    }

    if with_diracs {
        let radius = eps.powf(1.0 / (2.0 * dim as f64));
        let height_unit = 1.0 / (unit_ball_volume(dim) * eps.sqrt());
        for d in &rc.diracs {
            check_ball(rc, &grid, d, radius)?;
            let height = d.mass * height_unit;
            for (c, r) in rho.iter_mut().enumerate() {
                let x = grid.center(c);
                let mut dist2 = 0.0;
                for a in 0..dim {
                    dist2 += (x[a] - d.location[a]).powi(2);
                }
                if dist2 < radius * radius {
                    *r += height;
                }
            }
        }
    }

    Ok(RecoveryFields {
        u: ScalarField::new(grid.clone(), u, FieldKind::OrderParameter)?,
        rho: ScalarField::new(grid, rho, FieldKind::Density)?,
        layer_height,
    })
}

fn check_ball(rc: &RecoveryConfig, grid: &Grid, d: &DiracMass, radius: f64) -> Result<()> {
    let dim = rc.dim();
    for a in 0..dim {
        if grid.boundary()[a].is_periodic() {
            continue;
        }
        let lo = grid.origin()[a];
        let hi = lo + grid.extents()[a];
        if d.location[a] - radius < lo || d.location[a] + radius > hi {
            return Err(Error::Recovery(format!(
                "ball of radius {radius} around {:?} leaves the domain",
                d.location
            )));
        }
    }
    if rc.facet.distance(dim, d.location) <= radius {
        return Err(Error::Recovery(format!("ball of radius {radius} around {:?} meets the facet", d.location)));
    }
    Ok(())
}

pub fn recovery_fields(rc: &RecoveryConfig, eps: f64) -> Result<(ScalarField, ScalarField)> {
    let f = recovery_fields_with(rc, eps, true)?;
    Ok((f.u, f.rho))
}

/// Kernel for the recovery grid at `eps`.
pub fn recovery_kernel(rc: &RecoveryConfig, grid: &Grid, eps: f64) -> Result<DiscreteKernel> {
    sample_kernel(&rc.profile.problem.kernel, grid, eps)
}

/// Exact (`δ = 0`) energy of the recovery pair in the domain's mode.
pub fn recovery_energy(rc: &RecoveryConfig, eps: f64) -> Result<EnergyBreakdown> {
    let (u, rho) = recovery_fields(rc, eps)?;
    let k = recovery_kernel(rc, u.grid(), eps)?;
    total_energy(&u, &rho, &k, &rc.profile.problem.potential, &EnergyParams::exact(eps, rc.domain.mode))
}

/// Energy added by the mollified point masses: `E(with balls) − E(without)`.
pub fn dirac_contribution(rc: &RecoveryConfig, eps: f64) -> Result<f64> {
    let with = recovery_fields_with(rc, eps, true)?;
    let without = recovery_fields_with(rc, eps, false)?;
    let k = recovery_kernel(rc, with.u.grid(), eps)?;
    let p = EnergyParams::exact(eps, rc.domain.mode);
    let w = &rc.profile.problem.potential;
    Ok(total_energy(&with.u, &with.rho, &k, w, &p)?.total - total_energy(&without.u, &without.rho, &k, w, &p)?.total)
}

/// Energy of the recovery pair over one `ε`-scaled strip (lateral period `ε r`,
/// longitudinal span `ε [−L, L]` around the facet, clamped exterior, extended
/// mode) next to `ε^{N−1}` times the cell energy. The two agree up to rounding.
pub fn scaling_identity(profile: &CellProfile, normal: [f64; 2], eps: f64) -> Result<(f64, f64)> {
    let cp = &profile.problem;
    let dim = cp.dim;
    let l = cp.half_length * eps;
    let width = cp.cross_side * eps;
    let rc = RecoveryConfig {
        facet: Facet::new(normal, if dim == 1 { 1.0 } else { width }, profile.mass_per_area())
            .at(if dim == 1 { [0.0, 0.0] } else { [0.5 * width, 0.0] }),
        profile: profile.clone(),
        epsilons: vec![eps],
        diracs: vec![],
        domain: RecoveryDomain {
            lateral: (dim == 2).then_some([0.0, width]),
            lateral_periodic: true,
            longitudinal: [-l, l],
            mode: DomainMode::Extended,
        },
    };
    let tube = recovery_energy(&rc, eps)?.total;
    let k = crate::cell::strip_kernel(cp, profile.u.grid())?;
    let cell = total_energy(
        &profile.u,
        &profile.rho,
        &k,
        &cp.potential,
        &EnergyParams::exact(1.0, DomainMode::Extended),
    )?
    .total;
    Ok((tube, eps.powi(dim as i32 - 1) * cell))
}

/// Discrete total variation: `Σ |u_i − u_j|` over axis-neighbors times the face area.
pub fn total_variation(u: &ScalarField) -> f64 {
    let g = u.grid();
    let v = u.values();
    let dim = g.dim();
    let mut tv = 0.0;
    for axis in 0..dim {
        let face: f64 = (0..dim).filter(|a| *a != axis).map(|a| g.spacing()[a]).product();
        let mut off = [0isize; 2];
        off[axis] = 1;
        let mut acc = 0.0;
        for c in 0..g.len() {
            if let crate::fields::Neighbor::Cell(j) = g.resolve(g.unravel(c), off, false) {
                acc += (v[j] - v[c]).abs();
            }
        }
        tv += acc * face;
    }
    tv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    RecoveryOnly,
    MinimizeEach,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub mode: ScanMode,
    /// Smoothing used by `minimize_each` descents.
    pub smoothing: f64,
    pub minimize: MinimizeOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            mode: ScanMode::RecoveryOnly,
            smoothing: crate::energy::DEFAULT_SMOOTHING,
            minimize: MinimizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizedRow {
    /// Exact energy of the minimizer.
    pub energy: EnergyBreakdown,
    /// Smoothed energies of the minimizer and of the recovery pair it started from.
    pub smoothed: f64,
    pub recovery_smoothed: f64,
    pub ratio: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tv_u: f64,
    pub rho_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub epsilon: f64,
    pub energy: EnergyBreakdown,
    pub sharp_target: f64,
    pub ratio: f64,
    pub rho_mass: f64,
    pub tv_u: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimized: Option<MinimizedRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub mode: ScanMode,
    pub rows: Vec<ScanRow>,
}

/// Minimizes from the recovery pair with its total mass imposed exactly and
/// `u` frozen within one kernel support of both longitudinal ends.
pub fn minimize_from_recovery(
    rc: &RecoveryConfig,
    eps: f64,
    smoothing: f64,
    opts: &MinimizeOptions,
) -> Result<(MinimizeResult, f64)> {
    let (u, rho) = recovery_fields(rc, eps)?;
    let grid = u.grid().clone();
    let k = recovery_kernel(rc, &grid, eps)?;
    let dim = grid.dim();
    let band = rc.profile.problem.kernel.support_radius() * eps;
    let [lo, hi] = rc.domain.longitudinal;
    let frozen = (0..grid.len())
        .map(|c| {
            let x = grid.center(c)[dim - 1];
            (x - lo < band || hi - x < band).then_some(u.values()[c])
        })
        .collect();
    let c = ConstraintSet {
        frozen: Some(frozen),
        mass: Some(MassConstraint { target: rho.integral(), mode: MassMode::Exactly }),
    };
    let p = EnergyParams::smoothed(eps, smoothing, rc.domain.mode);
    let w = &rc.profile.problem.potential;
    let start = total_energy(&u, &rho, &k, w, &p)?.total;
    Ok((minimize(&u, &rho, &k, w, &p, &c, opts)?, start))
}

/// Evaluates each `ε` of the configuration and compares to the sharp energy of
/// the facet (with its point masses) looked up in `table`.
pub fn epsilon_scan(rc: &RecoveryConfig, table: &SurfaceTensionTable, opts: &ScanOptions) -> Result<ScanReport> {
    rc.validate()?;
    let phase = PolyhedralPhase::new(rc.dim(), vec![rc.facet.clone()], rc.diracs.clone())?;
    let target = limit_energy(&phase, table)?.total;
    let rows = rc
        .epsilons
        .par_iter()
        .map(|&eps| {
            let (u, rho) = recovery_fields(rc, eps)?;
            let k = recovery_kernel(rc, u.grid(), eps)?;
            let w = &rc.profile.problem.potential;
            let exact = EnergyParams::exact(eps, rc.domain.mode);
            let energy = total_energy(&u, &rho, &k, w, &exact)?;
            let minimized = match opts.mode {
                ScanMode::RecoveryOnly => None,
                ScanMode::MinimizeEach => {
                    let (m, start) = minimize_from_recovery(rc, eps, opts.smoothing, &opts.minimize)?;
                    let e = total_energy(&m.u, &m.rho, &k, w, &exact)?;
                    Some(MinimizedRow {
                        energy: e,
                        smoothed: m.energy.total,
                        recovery_smoothed: start,
                        ratio: e.total / target,
                        iterations: m.iterations,
                        converged: m.converged,
                        tv_u: total_variation(&m.u),
                        rho_mass: m.rho.integral(),
                    })
                }
            };
            Ok(ScanRow {
                epsilon: eps,
                energy,
                sharp_target: target,
                ratio: energy.total / target,
                rho_mass: rho.integral(),
                tv_u: total_variation(&u),
                minimized,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanReport { mode: opts.mode, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactnessRow {
    pub epsilon: f64,
    pub tv_u: f64,
    pub rho_mass: f64,
    pub energy: f64,
    /// Whether `tv_u` and `rho_mass` stay below ten times the largest energy of the sequence.
    pub within_bound: bool,
}

/// Total variation and surfactant mass along a sequence of minimizers.
pub fn compactness_diagnostic(results: &[(f64, MinimizeResult)]) -> Result<Vec<CompactnessRow>> {
    if results.is_empty() {
        return Err(invalid_param("results", "need at least one minimizer"));
    }
    let bound = 10.0 * results.iter().map(|(_, r)| r.energy.total).fold(0.0, f64::max);
    Ok(results
        .iter()
        .map(|(eps, r)| {
            let tv_u = total_variation(&r.u);
            let rho_mass = r.rho.integral();
            CompactnessRow {
                epsilon: *eps,
                tv_u,
                rho_mass,
                energy: r.energy.total,
                within_bound: tv_u <= bound && rho_mass <= bound,
            }
        })
        .collect())
}

/// Built-in smooth test functions for weak-star pairings.
pub fn test_functions() -> Vec<(&'static str, fn([f64; 2]) -> f64)> {
    vec![
        ("one", |_| 1.0),
        ("x", |x| x[0]),
        ("y", |x| x[1]),
        ("quadratic", |x| x[0] * x[0] + x[0] * x[1]),
        ("gaussian_bump", |x| (-(x[0] * x[0] + x[1] * x[1])).exp()),
        ("wave", |x| (2.0 * x[0] + x[1]).cos()),
    ]
}

/// Facet quadrature points used by [`weak_star_pairing`].
pub const FACET_QUADRATURE_POINTS: usize = 512;

/// Largest `|Σ ρ φ vol − ∫ φ dμ|` over [`test_functions`], where `μ` is the
/// facet density plus point masses of `target`.
pub fn weak_star_pairing(rho: &ScalarField, target: &PolyhedralPhase) -> Result<f64> {
    target.validate()?;
    if rho.grid().dim() != target.dim {
        return Err(Error::GridMismatch("density and phase dimensions differ".into()));
    }
    let g = rho.grid();
    let vol = g.cell_volume();
    let centers: Vec<[f64; 2]> = (0..g.len()).map(|c| g.center(c)).collect();
    let mut worst = 0.0f64;
    for (_, phi) in test_functions() {
        let lhs: f64 = rho.values().iter().zip(&centers).map(|(r, x)| r * phi(*x)).sum::<f64>() * vol;
        let mut rhs = 0.0;
        for f in &target.facets {
            let (pts, w) = f.midpoints(target.dim, FACET_QUADRATURE_POINTS);
            rhs += f.gamma * w * pts.iter().map(|x| phi(*x)).sum::<f64>();
        }
        for d in &target.diracs {
            rhs += d.mass * phi(d.location);
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// `E(A₁ ∪ A₂) − E(A₁) − E(A₂)` for the split of the grid at cell `split`
/// along `axis`, all in interior mode with open cut faces.
pub fn gluing_cross_term(
    u: &ScalarField,
    rho: &ScalarField,
    k: &DiscreteKernel,
    w: &crate::fields::Potential,
    eps: f64,
    axis: usize,
    split: usize,
) -> Result<f64> {
    let g = u.grid();
    if axis >= g.dim() || split == 0 || split >= g.cells()[axis] {
        return Err(invalid_param("split", "must cut the grid into two nonempty parts"));
    }
    let p = EnergyParams::exact(eps, DomainMode::Interior);
    let n = g.cells()[axis];
    let energy = |a: usize, b: usize| -> Result<f64> {
        Ok(total_energy(&sub_box(u, axis, a, b)?, &sub_box(rho, axis, a, b)?, k, w, &p)?.total)
    };
    let whole = energy(0, n)?;
    let parts = energy(0, split)? + energy(split, n)?;
    Ok(whole - parts)
}

/// Cells `[a, b)` along `axis`, with that axis made open.
fn sub_box(f: &ScalarField, axis: usize, a: usize, b: usize) -> Result<ScalarField> {
    let g = f.grid();
    let dim = g.dim();
    let h = g.spacing()[axis];
    let mut extents = g.extents().to_vec();
    let mut cells = g.cells().to_vec();
    let mut origin = g.origin().to_vec();
    let mut bnd = g.boundary().to_vec();
    extents[axis] = (b - a) as f64 * h;
    cells[axis] = b - a;
    origin[axis] += a as f64 * h;
    bnd[axis] = BoundaryMode::Open;
    let sub = Grid::with_origin(dim, &extents, &cells, &bnd, &origin)?;
    let vals = (0..sub.len())
        .map(|c| {
            let mut idx = sub.unravel(c);
            idx[axis] += a;
            f.values()[g.ravel(idx)]
        })
        .collect();
    ScalarField::new(sub, vals, f.kind())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::KernelSpec;

    fn step_config(dim: usize, gamma: f64) -> RecoveryConfig {
        let mut cp = CellProblem::new(dim, KernelSpec::gaussian(0.5), 0.0);
        cp.resolution = 8.0;
        cp.half_length = 6.0;
        let profile = CellProfile::sharp_step(cp).unwrap();
        RecoveryConfig {
            facet: Facet::new(if dim == 1 { [1.0, 0.0] } else { [0.0, 1.0] }, 1.0, gamma)
                .at(if dim == 1 { [0.0, 0.0] } else { [0.5, 0.0] }),
            profile,
            epsilons: vec![0.5, 0.25],
            diracs: vec![],
            domain: RecoveryDomain {
                lateral: (dim == 2).then_some([0.0, 1.0]),
                lateral_periodic: false,
                longitudinal: [-2.0, 2.0],
                mode: DomainMode::Interior,
            },
        }
    }

    #[test]
    fn sharp_step_profile_gives_sharp_step() {
        for dim in [1, 2] {
            let rc = step_config(dim, 0.0);
            let (u, rho) = recovery_fields(&rc, 0.25).unwrap();
            for c in 0..u.grid().len() {
                let x = u.grid().center(c)[dim - 1];
                assert_eq!(u.values()[c], x.signum());
            }
            assert!(rho.values().iter().all(|r| *r == 0.0));
        }
    }

    #[test]
    fn negative_normal_flips_profile() {
        let mut rc = step_config(1, 0.0);
        rc.facet.normal = [-1.0, 0.0];
        rc.profile.problem.angle = PI;
        let (u, _) = recovery_fields(&rc, 0.5).unwrap();
        for c in 0..u.grid().len() {
            assert_eq!(u.values()[c], -u.grid().center(c)[0].signum());
        }
    }

    #[test]
    fn layer_restores_facet_load() {
        let rc = step_config(1, 0.7);
        let f = recovery_fields_with(&rc, 0.25, false).unwrap();
        // ε^{1/2} = 0.5 is 16 cells of width 1/32 exactly
        assert!((f.rho.integral() - 0.7).abs() < 1e-12);
        assert_eq!(f.layer_height, 1.4);
    }

    #[test]
    fn incommensurate_and_invalid_inputs_are_rejected() {
        let mut rc = step_config(2, 0.0);
        rc.epsilons = vec![0.3];
        assert!(recovery_fields(&rc, 0.3).is_err());
        let mut rc = step_config(2, 0.0);
        rc.domain.lateral = Some([0.0, 0.0]);
        assert!(recovery_fields(&rc, 0.25).is_err());
        let mut rc = step_config(1, 0.0);
        rc.epsilons = vec![0.25, 0.5];
        assert!(rc.validate().is_err());
        let mut rc = step_config(1, 0.0);
        rc.diracs = vec![DiracMass { location: [1.9, 0.0], mass: 1.0 }];
        assert!(recovery_fields(&rc, 0.25).is_err());
    }

    #[test]
    fn tv_of_steps() {
        let rc = step_config(2, 0.0);
        let (u, _) = recovery_fields(&rc, 0.25).unwrap();
        assert!((total_variation(&u) - 2.0).abs() < 1e-12);
        let c = ScalarField::constant(u.grid(), 1.0, FieldKind::OrderParameter).unwrap();
        assert_eq!(total_variation(&c), 0.0);
    }

    #[test]
    fn pairing_bookkeeping() {
        let rc = step_config(1, 0.0);
        let (_, rho) = recovery_fields(&rc, 0.25).unwrap();
        let phase = PolyhedralPhase::new(1, vec![Facet::new([1.0, 0.0], 1.0, 2.0)], vec![]).unwrap();
        // ρ ≡ 0 against a load of 2 at x = 0: the largest pairing is |2 φ(0)| over the family
        let gap = weak_star_pairing(&rho, &phase).unwrap();
        assert!((gap - 2.0).abs() < 1e-12);
    }
}
