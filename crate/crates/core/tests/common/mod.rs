#![allow(dead_code)]

use nlsurf::energy::{DomainMode, EnergyParams};
use nlsurf::fields::{BoundaryMode, FieldKind, Grid, KernelFamily, KernelSpec, ScalarField};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn random_pair(g: &Grid, rng: &mut ChaCha8Rng, u_amp: f64, rho_max: f64) -> (ScalarField, ScalarField) {
    let u = (0..g.len()).map(|_| rng.gen_range(-u_amp..u_amp)).collect();
    let r = (0..g.len()).map(|_| rng.gen_range(0.0..rho_max)).collect();
    (
        ScalarField::new(g.clone(), u, FieldKind::OrderParameter).unwrap(),
        ScalarField::new(g.clone(), r, FieldKind::Density).unwrap(),
    )
}

/// Radial kernel written out independently of the library (aspect 1 only).
pub fn kernel_value(spec: &KernelSpec, dim: usize, r: f64) -> f64 {
    let s = spec.width;
    let q = r / s;
    let cut = spec.cutoff.unwrap_or(match spec.family {
        KernelFamily::Tophat => 1.0,
        _ => 4.0,
    });
    if q > cut {
        return 0.0;
    }
    match (spec.family, dim) {
        (KernelFamily::Gaussian, 1) => (-q * q / 2.0).exp() / (2.0 * PI).sqrt() / s,
        (KernelFamily::Gaussian, _) => (-q * q / 2.0).exp() / (2.0 * PI) / (s * s),
        (KernelFamily::Exponential, 1) => (-q).exp() / 2.0 / s,
        (KernelFamily::Exponential, _) => (-q).exp() / (2.0 * PI) / (s * s),
        (KernelFamily::Tophat, 1) => if q <= 1.0 { 0.5 / s } else { 0.0 },
        (KernelFamily::Tophat, _) => if q <= 1.0 { 1.0 / (PI * s * s) } else { 0.0 },
    }
}

/// Value at lattice point `j` (unwrapped), or `None` when it does not enter.
fn lattice_value(u: &ScalarField, j: [isize; 2], extended: bool) -> Option<f64> {
    let g = u.grid();
    let mut idx = [0usize; 2];
    let mut ext = None;
    for a in 0..g.dim() {
        let n = g.cells()[a] as isize;
        if j[a] >= 0 && j[a] < n {
            idx[a] = j[a] as usize;
            continue;
        }
        match g.boundary()[a] {
            BoundaryMode::Periodic => idx[a] = j[a].rem_euclid(n) as usize,
            BoundaryMode::Open => return None,
            BoundaryMode::Clamped { lower, upper } => {
                if !extended {
                    return None;
                }
                ext.get_or_insert(if j[a] < 0 { lower } else { upper });
            }
        }
    }
    if ext.is_some() {
        return ext;
    }
    let flat = if g.dim() == 1 { idx[0] } else { idx[0] * g.cells()[1] + idx[1] };
    Some(u.values()[flat])
}

/// `[potential, exchange, surfactant]` by a direct loop over every lattice
/// point `y` within the kernel support of each cell `x`.
pub fn direct_energy(u: &ScalarField, rho: &ScalarField, spec: &KernelSpec, p: &EnergyParams) -> [f64; 3] {
    let g = u.grid();
    let dim = g.dim();
    let eps = p.epsilon;
    let h = g.spacing().to_vec();
    let vol: f64 = h.iter().product();
    let extended = p.mode == DomainMode::Extended;
    let reach: Vec<isize> = h.iter().map(|hh| (5.0 * spec.width * eps / hh).ceil() as isize + 1).collect();
    let sabs = |t: f64| if p.smoothing == 0.0 { t.abs() } else { (t * t + p.smoothing * p.smoothing).sqrt() - p.smoothing };
    let (mut pot, mut exch, mut surf) = (0.0, 0.0, 0.0);
    for x in 0..g.len() {
        let xi: [isize; 2] = if dim == 1 {
            [x as isize, 0]
        } else {
            [(x / g.cells()[1]) as isize, (x % g.cells()[1]) as isize]
        };
        let ux = u.values()[x];
        pot += (ux * ux - 1.0).powi(2) / eps * vol;
        let mut lin = 0.0;
        let mut quad = 0.0;
        let r1 = if dim == 2 { reach[1] } else { 0 };
        for a in -reach[0]..=reach[0] {
            for b in -r1..=r1 {
                if a == 0 && b == 0 {
                    continue;
                }
                let Some(uy) = lattice_value(u, [xi[0] + a, xi[1] + b], extended) else { continue };
                let dx = a as f64 * h[0];
                let dy = if dim == 2 { b as f64 * h[1] } else { 0.0 };
                let r = (dx / eps).hypot(dy / eps);
                let j = kernel_value(spec, dim, r) / eps.powi(dim as i32);
                let s = sabs(uy - ux);
                lin += j * s * vol;
                quad += j * s * s * vol;
            }
        }
        let i = lin / eps;
        exch += quad / eps * vol;
        surf += eps * (i - rho.values()[x]).powi(2) * vol;
    }
    [pot, exch, surf]
}
