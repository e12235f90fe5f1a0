//! The periodic-strip cell problem defining the surface tension `σ(e, γ)`, and
//! tables of `σ` over directions and surfactant loads.
//!
//! The strip is solved at `ε = 1` in extended mode. Its last grid axis is the
//! coordinate `t = x·e` over `[−L, L]`; in 2D the first axis is the lateral
//! period `[0, r)`. Tails with `|t| ≥ L − clamp_width` are frozen at `sign(t)`
//! and the exterior is clamped to `±1`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_unchecked, DomainMode, EnergyBreakdown, EnergyParams, DEFAULT_SMOOTHING};
use crate::error::{invalid_param, Error, Result};
use crate::fields::{
    exact_sin_cos, sample_kernel_in_frame, BoundaryMode, DiscreteKernel, FieldKind, Frame, Grid,
    KernelSpec, Potential, ScalarField,
};
use crate::optimize::{minimize, ConstraintSet, MassConstraint, MassMode, MinimizeOptions, StopReason};

/// Largest row-monotonicity violation that the table repairs by isotonic regression.
pub const MONOTONE_TOLERANCE: f64 = 1e-3;
/// Relative spread between multi-start energies above which a solve is flagged.
pub const SPREAD_FLAG: f64 = 0.05;

fn default_starts() -> usize {
    3
}

fn default_cross_side() -> f64 {
    1.0
}

fn default_half_length() -> f64 {
    10.0
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

fn default_mass_mode() -> MassMode {
    MassMode::Exactly
}

/// One strip problem. `angle` is the polar angle of `e`; in 1D only `0`
/// (`e = +1`) and `π` (`e = −1`) are meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellProblem {
    pub dim: usize,
    #[serde(default)]
    pub angle: f64,
    #[serde(default = "default_cross_side")]
    pub cross_side: f64,
    #[serde(default = "default_half_length")]
    pub half_length: f64,
    /// Cells per unit length.
    pub resolution: f64,
    #[serde(default)]
    pub gamma: f64,
    pub kernel: KernelSpec,
    #[serde(default = "quartic")]
    pub potential: Potential,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    /// Width of each frozen tail; defaults to the kernel cutoff plus two cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp_width: Option<f64>,
    #[serde(default = "default_mass_mode")]
    pub mass_mode: MassMode,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: MinimizeOptions,
}

fn quartic() -> Potential {
    Potential::QuarticDoubleWell
}

impl CellProblem {
    /// Defaults: `r = 1`, `L = 10`, 32 cells per unit in 1D and 16 in 2D, three starts.
    pub fn new(dim: usize, kernel: KernelSpec, gamma: f64) -> Self {
        CellProblem {
            dim,
            angle: if dim == 1 { 0.0 } else { 0.5 * PI },
            cross_side: 1.0,
            half_length: 10.0,
            resolution: if dim == 1 { 32.0 } else { 16.0 },
            gamma,
            kernel,
            potential: Potential::QuarticDoubleWell,
            smoothing: DEFAULT_SMOOTHING,
            clamp_width: None,
            mass_mode: MassMode::Exactly,
            starts: 3,
            seed: 0,
            options: MinimizeOptions::default(),
        }
    }

    pub fn with_angle(mut self, angle: f64) -> Self {
        self.angle = angle;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Unit vector `e` (second component 0 in 1D).
    pub fn direction(&self) -> [f64; 2] {
        direction_vector(self.dim, self.angle)
    }

    /// Lateral cross-section measure `r^{N−1}`.
    pub fn cross_area(&self) -> f64 {
        self.cross_side.powi(self.dim as i32 - 1)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution
    }

    pub fn effective_clamp_width(&self) -> f64 {
        self.clamp_width
            .unwrap_or(self.kernel.support_radius() + 2.0 * self.spacing())
    }

    fn sign_1d(&self) -> f64 {
        if self.angle.cos() >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidCellProblem(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if !self.angle.is_finite() {
            return Err(invalid_param("angle", "must be finite"));
        }
        if self.dim == 1 && self.angle.sin().abs() > 1e-9 {
            return Err(Error::InvalidCellProblem(format!(
                "1D directions are angle 0 or π, got {}",
                self.angle
            )));
        }
        for (name, v) in [
            ("cross_side", self.cross_side),
            ("half_length", self.half_length),
            ("resolution", self.resolution),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid_param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(invalid_param("gamma", format!("must be nonnegative, got {}", self.gamma)));
        }
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return Err(invalid_param("smoothing", "cell solves need a positive smoothing parameter"));
        }
        if self.starts == 0 {
            return Err(invalid_param("starts", "need at least one start"));
        }
        self.kernel.validate()?;
        let clamp = self.effective_clamp_width();
        if !(clamp.is_finite() && clamp > 0.0) {
            return Err(invalid_param("clamp_width", format!("must be positive, got {clamp}")));
        }
        let cutoff = self.kernel.support_radius();
        if self.half_length < clamp + cutoff {
            return Err(Error::InvalidCellProblem(format!(
                "half_length {} is below clamp width {clamp} plus kernel cutoff {cutoff}",
                self.half_length
            )));
        }
        cell_count("half_length", 2.0 * self.half_length * self.resolution)?;
        if self.dim == 2 {
            cell_count("cross_side", self.cross_side * self.resolution)?;
        }
        Ok(())
    }
}

fn cell_count(name: &'static str, exact: f64) -> Result<usize> {
    let n = exact.round();
    if n < 1.0 || (exact - n).abs() > 1e-9 * n {
        return Err(invalid_param(
            name,
            format!("must span a whole number of cells at this resolution ({exact} cells)"),
        ));
    }
    Ok(n as usize)
}

pub fn direction_vector(dim: usize, angle: f64) -> [f64; 2] {
    if dim == 1 {
        return [if angle.cos() >= 0.0 { 1.0 } else { -1.0 }, 0.0];
    }
    let (s, c) = exact_sin_cos(angle);
    [c, s]
}

/// Polar angle in `[0, 2π)` of a direction; 1D directions map to `0` or `π`.
pub fn angle_of(dim: usize, nu: [f64; 2]) -> f64 {
    if dim == 1 {
        return if nu[0] >= 0.0 { 0.0 } else { PI };
    }
    nu[1].atan2(nu[0]).rem_euclid(TAU)
}

/// Strip geometry in strip coordinates (`t` increasing along `e`).
#[derive(Debug, Clone)]
pub struct Strip {
    pub grid: Grid,
    pub constraints: ConstraintSet,
    /// Longitudinal coordinate `t` of each cell.
    pub t: Vec<f64>,
}

/// Builds the strip grid, frozen tails and mass constraint `γ r^{N−1}`.
pub fn build_strip(cp: &CellProblem) -> Result<Strip> {
    cp.validate()?;
    let l = cp.half_length;
    let n = cell_count("half_length", 2.0 * l * cp.resolution)?;
    let grid = if cp.dim == 1 {
        Grid::with_origin(1, &[2.0 * l], &[n], &[BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }], &[-l])?
    } else {
        let m = cell_count("cross_side", cp.cross_side * cp.resolution)?;
        Grid::with_origin(
            2,
            &[cp.cross_side, 2.0 * l],
            &[m, n],
            &[BoundaryMode::Periodic, BoundaryMode::Clamped { lower: -1.0, upper: 1.0 }],
            &[0.0, -l],
        )?
    };
    let axis = cp.dim - 1;
    let t: Vec<f64> = (0..grid.len()).map(|i| grid.center(i)[axis]).collect();
    let edge = l - cp.effective_clamp_width();
    let frozen = t
        .iter()
        .map(|ti| {
            if *ti >= edge {
                Some(1.0)
            } else if *ti <= -edge {
                Some(-1.0)
            } else {
                None
            }
        })
        .collect();
    let constraints = ConstraintSet {
        frozen: Some(frozen),
        mass: Some(MassConstraint { target: cp.gamma * cp.cross_area(), mode: cp.mass_mode }),
    };
    Ok(Strip { grid, constraints, t })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartReport {
    /// Exact (`δ = 0`) energy of the start's final iterate.
    pub energy: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub sigma: f64,
    /// Exact (`δ = 0`) breakdown of the best start.
    pub energy: EnergyBreakdown,
    /// Breakdown with the descent's smoothing.
    pub smoothed_energy: EnergyBreakdown,
    /// Minimizer in strip coordinates.
    pub u_star: ScalarField,
    pub rho_star: ScalarField,
    pub mass_used: f64,
    pub starts: Vec<StartReport>,
    /// `(max − min) / min` of the start energies.
    pub spread: f64,
    pub spread_flagged: bool,
    pub converged: bool,
    pub best_start: usize,
}

impl CellSolution {
    pub fn iterations(&self) -> usize {
        self.starts[self.best_start].iterations
    }

    pub fn gradient_norm(&self) -> f64 {
        self.starts[self.best_start].gradient_norm
    }
}

/// Initial pair for start `k`, listed in strip order. Start 0 is `tanh(t)` with
/// uniform density; later starts use a ChaCha8 stream `k` seeded by `seed` to
/// draw an interface shift and width plus per-cell noise.
fn initial_state(cp: &CellProblem, strip: &Strip, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mass = cp.gamma * cp.cross_area();
    let n = strip.t.len();
    let vol = strip.grid.cell_volume();
    if k == 0 {
        let u = strip.t.iter().map(|t| t.tanh()).collect();
        let rho = vec![mass / strip.grid.total_volume(); n];
        return (u, rho);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cp.seed);
    rng.set_stream(k as u64);
    let free = cp.half_length - cp.effective_clamp_width();
    let shift = rng.gen_range(-0.2..=0.2) * free;
    let width = rng.gen_range(0.5..=2.0);
    let mut u = Vec::with_capacity(n);
    let mut bump = Vec::with_capacity(n);
    for t in &strip.t {
        let s = (t - shift) / width;
        u.push((s.tanh() + rng.gen_range(-0.05..=0.05)).clamp(-1.0, 1.0));
        let sech = 1.0 / s.cosh();
        bump.push(sech * sech + 0.1 * rng.gen_range(0.0..=1.0));
    }
    let total: f64 = bump.iter().sum::<f64>() * vol;
    let rho = bump.iter().map(|b| b * mass / total).collect();
    (u, rho)
}

/// Reverses the longitudinal axis (identity on the lateral one).
fn mirror(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let n = *grid.cells().last().unwrap();
    for (i, x) in v.iter().enumerate() {
        let mut idx = grid.unravel(i);
        let a = grid.dim() - 1;
        idx[a] = n - 1 - idx[a];
        out[grid.ravel(idx)] = *x;
    }
    out
}

/// Minimizes the strip energy from every start and keeps the lowest exact energy.
///
/// 1D problems with `e = −1` are solved on the mirrored lab-frame grid (clamps
/// `+1` below and `−1` above) and mapped back to strip coordinates, so `σ(e)`
/// and `σ(−e)` come from genuinely different discrete problems. 2D directions
/// rotate the kernel stencil and keep the strip lattice.
pub fn solve_cell(cp: &CellProblem) -> Result<CellSolution> {
    let strip = build_strip(cp)?;
    let flip = cp.dim == 1 && cp.sign_1d() < 0.0;
    let (grid, constraints) = if flip {
        let l = cp.half_length;
        let g = Grid::with_origin(
            1,
            &[2.0 * l],
            strip.grid.cells(),
            &[BoundaryMode::Clamped { lower: 1.0, upper: -1.0 }],
            &[-l],
        )?;
        let frozen = strip.constraints.frozen.as_ref().map(|f| {
            let vals: Vec<f64> = f.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            mirror(&strip.grid, &vals).into_iter().map(|v| (!v.is_nan()).then_some(v)).collect()
        });
        (g, ConstraintSet { frozen, mass: strip.constraints.mass })
    } else {
        (strip.grid.clone(), strip.constraints.clone())
    };
    let frame = if cp.dim == 1 { Frame::identity() } else { Frame::along(2, cp.angle) };
    let kernel = sample_kernel_in_frame(&cp.kernel, &grid, 1.0, &frame)?;
    let params = EnergyParams::smoothed(1.0, cp.smoothing, DomainMode::Extended);
    let exact = params.with_smoothing(0.0);

    let mut best: Option<(usize, f64, Vec<f64>, Vec<f64>, EnergyBreakdown)> = None;
    let mut reports = Vec::with_capacity(cp.starts);
    for k in 0..cp.starts {
        let (mut u0, mut r0) = initial_state(cp, &strip, k);
        if flip {
            u0 = mirror(&grid, &u0);
            r0 = mirror(&grid, &r0);
        }
        let u0 = ScalarField::new(grid.clone(), u0, FieldKind::OrderParameter)?;
        let r0 = ScalarField::new(grid.clone(), r0, FieldKind::Density)?;
        let res = minimize(&u0, &r0, &kernel, &cp.potential, &params, &constraints, &cp.options)?;
        let e = energy_unchecked(&grid, res.u.values(), res.rho.values(), &kernel, &cp.potential, &exact);
        reports.push(StartReport {
            energy: e.total,
            iterations: res.iterations,
            stop: res.stop,
            gradient_norm: res.gradient_norm,
        });
        if best.as_ref().is_none_or(|b| e.total < b.1) {
            best = Some((k, e.total, res.u.into_values(), res.rho.into_values(), res.energy));
        }
    }
    let (best_start, _, mut u, mut rho, smoothed_energy) = best.expect("at least one start");
    let energy = energy_unchecked(&grid, &u, &rho, &kernel, &cp.potential, &exact);
    if flip {
        u = mirror(&grid, &u);
        rho = mirror(&grid, &rho);
    }
    let lo = reports.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    let hi = reports.iter().map(|r| r.energy).fold(f64::NEG_INFINITY, f64::max);
    let spread = if lo > 0.0 { (hi - lo) / lo } else { 0.0 };
    let mass_used = rho.iter().sum::<f64>() * grid.cell_volume();
    Ok(CellSolution {
        sigma: energy.total / cp.cross_area(),
        energy,
        smoothed_energy,
        u_star: ScalarField::new(strip.grid.clone(), u, FieldKind::OrderParameter)?,
        rho_star: ScalarField::new(strip.grid.clone(), rho, FieldKind::Density)?,
        mass_used,
        converged: reports[best_start].stop == StopReason::Converged,
        starts: reports,
        spread,
        spread_flagged: spread > SPREAD_FLAG,
        best_start,
    })
}

/// Kernel of the strip problem, sampled in the problem's frame and oriented as
/// `u_star` (strip coordinates).
pub fn strip_kernel(cp: &CellProblem, grid: &Grid) -> Result<DiscreteKernel> {
    let frame = if cp.dim == 1 { Frame::identity() } else { Frame::along(2, cp.angle) };
    sample_kernel_in_frame(&cp.kernel, grid, 1.0, &frame)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub sigma: f64,
    /// Value before isotonic correction.
    pub raw_sigma: f64,
    pub valid: bool,
    pub spread: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `σ` sampled on a grid of directions (rows, sorted by angle in `[0, 2π)`)
/// and surfactant loads (columns, increasing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTensionTable {
    pub dim: usize,
    pub angles: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `entries[direction][gamma]`.
    pub entries: Vec<Vec<TableEntry>>,
}

impl SurfaceTensionTable {
    pub fn new(dim: usize, angles: Vec<f64>, gammas: Vec<f64>, entries: Vec<Vec<TableEntry>>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Table(format!("dimension must be 1 or 2, got {dim}")));
        }
        if angles.is_empty() || gammas.is_empty() {
            return Err(Error::Table("table needs at least one direction and one gamma".into()));
        }
        if gammas.windows(2).any(|w| w[1] <= w[0]) || gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::Table("gammas must be finite, nonnegative and strictly increasing".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) || angles.iter().any(|a| !(0.0..TAU).contains(a)) {
            return Err(Error::Table("angles must be strictly increasing in [0, 2π)".into()));
        }
        if entries.len() != angles.len() || entries.iter().any(|r| r.len() != gammas.len()) {
            return Err(Error::Table("entries do not match the direction × gamma grid".into()));
        }
        Ok(SurfaceTensionTable { dim, angles, gammas, entries })
    }

    pub fn len(&self) -> usize {
        self.angles.len() * self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sigma(&self, dir: usize, gamma: usize) -> f64 {
        self.entries[dir][gamma].sigma
    }

    /// Per `γ` column, the largest relative jump of `σ` between cyclically
    /// adjacent directions; a sampled continuity check.
    pub fn angular_jump(&self) -> Vec<f64> {
        let n = self.angles.len();
        (0..self.gammas.len())
            .map(|g| {
                if n < 2 {
                    return 0.0;
                }
                (0..n)
                    .map(|i| {
                        let a = self.entries[i][g].sigma;
                        let b = self.entries[(i + 1) % n][g].sigma;
                        let scale = a.abs().max(b.abs());
                        if scale > 0.0 {
                            (a - b).abs() / scale
                        } else {
                            0.0
                        }
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    fn value(&self, dir: usize, g: usize) -> Result<f64> {
        let e = &self.entries[dir][g];
        if !e.valid {
            return Err(Error::Table(format!(
                "entry (angle {}, gamma {}) is invalid",
                self.angles[dir], self.gammas[g]
            )));
        }
        Ok(e.sigma)
    }

    fn row_lookup(&self, dir: usize, gamma: f64) -> Result<f64> {
        let gs = &self.gammas;
        if gamma <= gs[0] {
            return self.value(dir, 0);
        }
        let last = gs.len() - 1;
        if gamma >= gs[last] {
            return self.value(dir, last);
        }
        let j = gs.partition_point(|g| *g <= gamma);
        let (g0, g1) = (gs[j - 1], gs[j]);
        if gamma == g0 {
            return self.value(dir, j - 1);
        }
        let s = (gamma - g0) / (g1 - g0);
        Ok(self.value(dir, j - 1)? * (1.0 - s) + self.value(dir, j)? * s)
    }
}

/// Isotonic (nonincreasing) least-squares fit by pool-adjacent-violators.
pub fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for v in values {
        blocks.push((*v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if b <= a {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Largest increase `σ_j − σ_i` over `i < j`.
pub fn max_increase(values: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut worst = 0.0f64;
    for v in values {
        worst = worst.max(v - lo);
        lo = lo.min(*v);
    }
    worst
}

/// Applies the row rule: violations up to [`MONOTONE_TOLERANCE`] are repaired by
/// isotonic regression; entries exceeding it are marked invalid and left as computed.
fn enforce_row(row: &mut [TableEntry]) {
    let ok: Vec<usize> = (0..row.len()).filter(|i| row[*i].error.is_none()).collect();
    let vals: Vec<f64> = ok.iter().map(|i| row[*i].raw_sigma).collect();
    let mut lo = f64::INFINITY;
    let mut bad = false;
    for (pos, i) in ok.iter().enumerate() {
        if vals[pos] - lo > MONOTONE_TOLERANCE {
            row[*i].valid = false;
            bad = true;
        }
        lo = lo.min(vals[pos]);
    }
    if !bad {
        for (i, v) in ok.iter().zip(isotonic_nonincreasing(&vals)) {
            row[*i].sigma = v;
        }
    }
}

/// Solves one cell problem per `(direction, γ)` in parallel and assembles the table.
///
/// Failed solves are recorded per entry rather than aborting the table.
pub fn sigma_table(angles: &[f64], gammas: &[f64], template: &CellProblem) -> Result<SurfaceTensionTable> {
    if angles.is_empty() || gammas.is_empty() {
        return Err(Error::Table("need at least one direction and one gamma".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Table("gammas must be strictly increasing".into()));
    }
    let mut dirs: Vec<f64> = angles.iter().map(|a| angle_of(template.dim, direction_vector(template.dim, *a))).collect();
    dirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if dirs.windows(2).any(|w| w[1] - w[0] < 1e-12) {
        return Err(Error::Table("directions must be distinct".into()));
    }
    let jobs: Vec<(usize, usize)> =
        (0..dirs.len()).flat_map(|d| (0..gammas.len()).map(move |g| (d, g))).collect();
    let solved: Vec<TableEntry> = jobs
        .par_iter()
        .map(|(d, g)| {
            let cp = template.clone().with_angle(dirs[*d]).with_gamma(gammas[*g]);
            match solve_cell(&cp) {
                Ok(s) => TableEntry {
                    sigma: s.sigma,
                    raw_sigma: s.sigma,
                    valid: s.converged,
                    spread: s.spread,
                    converged: s.converged,
                    error: None,
                },
                Err(e) => TableEntry {
                    sigma: f64::NAN,
                    raw_sigma: f64::NAN,
                    valid: false,
                    spread: f64::NAN,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut entries: Vec<Vec<TableEntry>> = solved.chunks(gammas.len()).map(|c| c.to_vec()).collect();
    for row in &mut entries {
        enforce_row(row);
    }
    SurfaceTensionTable::new(template.dim, dirs, gammas.to_vec(), entries)
}

/// `σ(ν, γ)`: linear in `γ` (constant beyond the sampled range) and linear in
/// angle between cyclically adjacent sampled directions. 1D tables must contain
/// the queried sign.
pub fn sigma_lookup(table: &SurfaceTensionTable, nu: [f64; 2], gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(invalid_param("gamma", format!("must be nonnegative, got {gamma}")));
    }
    let norm = nu[0].hypot(nu[1]);
    if !(norm.is_finite() && (norm - 1.0).abs() < 1e-9) {
        return Err(invalid_param("normal", "must be a unit vector"));
    }
    let theta = angle_of(table.dim, nu);
    let n = table.angles.len();
    if let Some(d) = table.angles.iter().position(|a| angular_distance(*a, theta) < 1e-12) {
        return table.row_lookup(d, gamma);
    }
    if table.dim == 1 {
        return Err(Error::Table(format!("1D table has no entry for direction {}", nu[0])));
    }
    if n == 1 {
        return table.row_lookup(0, gamma);
    }
    // bracketing rows, cyclically
    let j = table.angles.partition_point(|a| *a < theta);
    let (lo, hi) = if j == 0 || j == n { (n - 1, 0) } else { (j - 1, j) };
    let span = (table.angles[hi] - table.angles[lo]).rem_euclid(TAU);
    let s = (theta - table.angles[lo]).rem_euclid(TAU) / span;
    Ok(table.row_lookup(lo, gamma)? * (1.0 - s) + table.row_lookup(hi, gamma)? * s)
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
