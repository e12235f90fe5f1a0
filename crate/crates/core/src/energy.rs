//! Discrete three-term energy: double-well potential, squared non-local
//! exchange, and the surfactant mismatch between `ρ` and the non-local
//! inhomogeneity `I(x) = (1/ε) Σ_k w_k |u(x+h_k) − u(x)|`.
//!
//! All sums are midpoint quadratures over cells. Per-cell contributions are
//! computed in parallel and reduced sequentially in cell order, so results do
//! not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::fields::{DiscreteKernel, FieldKind, Grid, Neighbor, Potential, ScalarField};

/// Default `δ` of the smoothed absolute value: one percent of the phase gap.
pub const DEFAULT_SMOOTHING: f64 = 2e-2;

const PAR_MIN_LEN: usize = 64;

/// Which `y` enter the non-local integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    /// `x` and `y` both range over the grid (periodic axes wrap).
    Interior,
    /// `y` also ranges over the exterior defined by clamped boundary values.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub epsilon: f64,
    /// `δ ≥ 0` of the smoothed absolute value; 0 is the exact functional.
    pub smoothing: f64,
    pub mode: DomainMode,
}

impl EnergyParams {
    pub fn exact(epsilon: f64, mode: DomainMode) -> Self {
        EnergyParams { epsilon, smoothing: 0.0, mode }
    }

    pub fn smoothed(epsilon: f64, smoothing: f64, mode: DomainMode) -> Self {
        EnergyParams { epsilon, smoothing, mode }
    }

    pub fn with_smoothing(self, smoothing: f64) -> Self {
        EnergyParams { smoothing, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid_param("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(invalid_param("smoothing", format!("must be nonnegative, got {}", self.smoothing)));
        }
        Ok(())
    }

    #[inline]
    fn use_exterior(&self) -> bool {
        self.mode == DomainMode::Extended
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub potential: f64,
    pub exchange: f64,
    pub surfactant: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_terms(potential: f64, exchange: f64, surfactant: f64) -> Self {
        EnergyBreakdown { potential, exchange, surfactant, total: potential + exchange + surfactant }
    }
}

/// `sqrt(t² + δ²) − δ`; exactly `|t|` when `δ = 0`.
#[inline]
pub fn smoothed_abs(t: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        t.abs()
    } else {
        (t * t + delta * delta).sqrt() - delta
    }
}

/// Derivative of [`smoothed_abs`] in `t`; `sign(t)` (with 0 at 0) when `δ = 0`.
#[inline]
pub fn smoothed_abs_derivative(t: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        }
    } else {
        t / (t * t + delta * delta).sqrt()
    }
}

/// Visits every resolved neighbor value `u(x + h_k)` of cell `x`.
#[inline]
fn for_each_neighbor(
    grid: &Grid,
    kernel: &DiscreteKernel,
    u: &[f64],
    x: usize,
    use_exterior: bool,
    mut f: impl FnMut(usize, Option<usize>, f64),
) {
    let idx = grid.unravel(x);
    for (k, off) in kernel.offsets().iter().enumerate() {
        match grid.resolve(idx, *off, use_exterior) {
            Neighbor::Cell(j) => f(k, Some(j), u[j]),
            Neighbor::Exterior(v) => f(k, None, v),
            Neighbor::Outside => {}
        }
    }
}

fn check_pair(u: &ScalarField, rho: &ScalarField, k: &DiscreteKernel) -> Result<()> {
    k.check_grid(u.grid())?;
    if !u.grid().same_lattice(rho.grid()) {
        return Err(Error::GridMismatch("u and rho live on different grids".into()));
    }
    if rho.kind() != FieldKind::Density {
        return Err(Error::InvalidField("rho must be a density field".into()));
    }
    if let Some(v) = rho.values().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidField(format!("density is negative ({v})")));
    }
    Ok(())
}

fn inhomogeneity_values(u: &ScalarField, k: &DiscreteKernel, p: &EnergyParams) -> Vec<f64> {
    let grid = u.grid();
    let vals = u.values();
    let inv_eps = 1.0 / p.epsilon;
    let ext = p.use_exterior();
    let w = k.weights();
    (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|x| {
            let ux = vals[x];
            let mut acc = 0.0;
            for_each_neighbor(grid, k, vals, x, ext, |kk, _, uy| {
                acc += w[kk] * smoothed_abs(uy - ux, p.smoothing);
            });
            acc * inv_eps
        })
        .collect()
}

/// Non-local inhomogeneity `I(x)` of `u` (a density-kind field).
pub fn inhomogeneity(u: &ScalarField, k: &DiscreteKernel, p: &EnergyParams) -> Result<ScalarField> {
    p.validate()?;
    k.check_grid(u.grid())?;
    ScalarField::new(u.grid().clone(), inhomogeneity_values(u, k, p), FieldKind::Density)
}

/// Evaluates the discrete energy. With `δ = 0` this is the exact discrete
/// functional on the grid (interior mode) or on the grid with its exterior
/// (extended mode).
pub fn total_energy(
    u: &ScalarField,
    rho: &ScalarField,
    k: &DiscreteKernel,
    w: &Potential,
    p: &EnergyParams,
) -> Result<EnergyBreakdown> {
    p.validate()?;
    check_pair(u, rho, k)?;
    Ok(energy_unchecked(u.grid(), u.values(), rho.values(), k, w, p))
}

pub(crate) fn energy_unchecked(
    grid: &Grid,
    u: &[f64],
    rho: &[f64],
    k: &DiscreteKernel,
    pot: &Potential,
    p: &EnergyParams,
) -> EnergyBreakdown {
    let eps = p.epsilon;
    let inv_eps = 1.0 / eps;
    let ext = p.use_exterior();
    let wts = k.weights();
    let per_cell: Vec<[f64; 3]> = (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|x| {
            let ux = u[x];
            let mut lin = 0.0;
            let mut quad = 0.0;
            for_each_neighbor(grid, k, u, x, ext, |kk, _, uy| {
                let s = smoothed_abs(uy - ux, p.smoothing);
                lin += wts[kk] * s;
                quad += wts[kk] * s * s;
            });
            let i_x = lin * inv_eps;
            let mismatch = i_x - rho[x];
            [pot.value(ux) * inv_eps, quad * inv_eps, eps * mismatch * mismatch]
        })
        .collect();
    let vol = grid.cell_volume();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for t in &per_cell {
        a += t[0];
        b += t[1];
        c += t[2];
    }
    EnergyBreakdown::from_terms(a * vol, b * vol, c * vol)
}

/// Analytic gradient of [`total_energy`] with respect to every cell value of `u` and `ρ`.
///
/// Requires `δ > 0`; the exact functional is not differentiable where neighbors coincide.
pub fn energy_gradient(
    u: &ScalarField,
    rho: &ScalarField,
    k: &DiscreteKernel,
    w: &Potential,
    p: &EnergyParams,
) -> Result<(ScalarField, ScalarField)> {
    p.validate()?;
    if p.smoothing <= 0.0 {
        return Err(invalid_param("smoothing", "gradient requires a positive smoothing parameter"));
    }
    check_pair(u, rho, k)?;
    let (gu, grho) = gradient_unchecked(u.grid(), u.values(), rho.values(), k, w, p);
    Ok((
        ScalarField::new(u.grid().clone(), gu, FieldKind::OrderParameter)?,
        ScalarField::new(u.grid().clone(), grho, FieldKind::OrderParameter)?,
    ))
}

pub(crate) fn gradient_unchecked(
    grid: &Grid,
    u: &[f64],
    rho: &[f64],
    k: &DiscreteKernel,
    pot: &Potential,
    p: &EnergyParams,
) -> (Vec<f64>, Vec<f64>) {
    let eps = p.epsilon;
    let inv_eps = 1.0 / eps;
    let delta = p.smoothing;
    let ext = p.use_exterior();
    let wts = k.weights();
    let vol = grid.cell_volume();

    let i_vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|x| {
            let ux = u[x];
            let mut acc = 0.0;
            for_each_neighbor(grid, k, u, x, ext, |kk, _, uy| {
                acc += wts[kk] * smoothed_abs(uy - ux, delta);
            });
            acc * inv_eps
        })
        .collect();
    // residual r(x) = I(x) − ρ(x)
    let resid: Vec<f64> = i_vals.iter().zip(rho).map(|(i, r)| i - r).collect();

    // Every pair (x, k) contributes c·s'(d) with d = u(x+h_k) − u(x) and
    // c = w_k vol [(2/ε) s(d) + 2 r(x)], entering with +1 at the neighbor and
    // −1 at x. Gathering at j, the neighbor-side terms are the pairs (x, −k)
    // for each in-grid neighbor x of j, which carry d(x, −k) = −d(j, k).
    let gu: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|j| {
            let uj = u[j];
            let rj = resid[j];
            let mut acc = 0.0;
            for_each_neighbor(grid, k, u, j, ext, |kk, cell, uy| {
                let d = uy - uj;
                let s = smoothed_abs(d, delta);
                let ds = smoothed_abs_derivative(d, delta);
                let exch = 2.0 * inv_eps * s;
                acc -= wts[kk] * ds * (exch + 2.0 * rj);
                if let Some(x) = cell {
                    acc -= wts[kk] * ds * (exch + 2.0 * resid[x]);
                }
            });
            (acc + pot.derivative(uj) * inv_eps) * vol
        })
        .collect();
    let grho = resid.iter().map(|r| -2.0 * eps * r * vol).collect();
    (gu, grho)
}

/// Clamps `u` to `[−1, 1]` and caps `ρ` by the inhomogeneity of the clamped field.
///
/// The energy of the result never exceeds the energy of the input.
pub fn truncate(
    u: &ScalarField,
    rho: &ScalarField,
    k: &DiscreteKernel,
    p: &EnergyParams,
) -> Result<(ScalarField, ScalarField)> {
    p.validate()?;
    check_pair(u, rho, k)?;
    let ut = u.with_values(u.values().iter().map(|v| v.clamp(-1.0, 1.0)).collect())?;
    let it = inhomogeneity_values(&ut, k, p);
    let rt = rho.with_values(rho.values().iter().zip(&it).map(|(r, i)| r.min(*i)).collect())?;
    Ok((ut, rt))
}

/// `‖u − clamp(u)‖_{L¹}`, the asymptotic truncation gap (diagnostic only).
pub fn truncation_l1_gap(u: &ScalarField) -> f64 {
    u.values().iter().map(|v| (v - v.clamp(-1.0, 1.0)).abs()).sum::<f64>() * u.grid().cell_volume()
}
