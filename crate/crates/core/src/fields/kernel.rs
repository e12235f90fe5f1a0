use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Radial profile of the interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Exponential,
    #[serde(alias = "top-hat")]
    Tophat,
}

fn default_aspect() -> f64 {
    1.0
}

/// An even, nonnegative, unit-mass kernel `J`.
///
/// `width` is the Gaussian standard deviation, the exponential decay length, or
/// the top-hat radius. The support is truncated at `cutoff * width` in the
/// kernel's scaled radius. In 2D, `aspect` stretches the kernel along its first
/// axis (`aspect = 1` is radial) so that the resulting surface tension is
/// anisotropic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub width: f64,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default = "default_aspect")]
    pub aspect: f64,
}

impl KernelSpec {
    pub fn gaussian(width: f64) -> Self {
        KernelSpec { family: KernelFamily::Gaussian, width, cutoff: None, aspect: 1.0 }
    }

    pub fn exponential(width: f64) -> Self {
        KernelSpec { family: KernelFamily::Exponential, width, cutoff: None, aspect: 1.0 }
    }

    pub fn tophat(radius: f64) -> Self {
        KernelSpec { family: KernelFamily::Tophat, width: radius, cutoff: None, aspect: 1.0 }
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn with_aspect(mut self, aspect: f64) -> Self {
        self.aspect = aspect;
        self
    }

    /// Truncation radius as a multiple of `width`.
    pub fn cutoff_multiple(&self) -> f64 {
        self.cutoff.unwrap_or(match self.family {
            KernelFamily::Gaussian | KernelFamily::Exponential => 4.0,
            KernelFamily::Tophat => 1.0,
        })
    }

    /// Largest physical distance (at unit scale) at which `J` is nonzero after truncation.
    pub fn support_radius(&self) -> f64 {
        let support = match self.family {
            KernelFamily::Tophat => self.cutoff_multiple().min(1.0),
            _ => self.cutoff_multiple(),
        };
        support * self.width * self.aspect.max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidKernel(format!("width must be positive, got {}", self.width)));
        }
        let c = self.cutoff_multiple();
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidKernel(format!("cutoff must be positive, got {c}")));
        }
        if !(self.aspect.is_finite() && self.aspect > 0.0) {
            return Err(Error::InvalidKernel(format!("aspect must be positive, got {}", self.aspect)));
        }
        Ok(())
    }

    /// Evaluates the untruncated-normalized, truncated `J(h)` at a displacement
    /// given in the kernel's own frame.
    pub fn eval(&self, dim: usize, h: [f64; 2]) -> f64 {
        let s = self.width;
        let (r, norm_area) = if dim == 1 {
            (h[0].abs(), 1.0)
        } else {
            let hx = h[0] / self.aspect;
            ((hx * hx + h[1] * h[1]).sqrt(), self.aspect)
        };
        let q = r / s;
        if q > self.cutoff_multiple() {
            return 0.0;
        }
        match (self.family, dim) {
            (KernelFamily::Gaussian, 1) => (-0.5 * q * q).exp() / (s * (2.0 * PI).sqrt()),
            (KernelFamily::Gaussian, _) => (-0.5 * q * q).exp() / (2.0 * PI * s * s * norm_area),
            (KernelFamily::Exponential, 1) => (-q).exp() / (2.0 * s),
            (KernelFamily::Exponential, _) => (-q).exp() / (2.0 * PI * s * s * norm_area),
            (KernelFamily::Tophat, 1) => {
                if q <= 1.0 {
                    1.0 / (2.0 * s)
                } else {
                    0.0
                }
            }
            (KernelFamily::Tophat, _) => {
                if q <= 1.0 {
                    1.0 / (PI * s * s * norm_area)
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed-form mass of the truncated kernel; 1 minus this is the truncation deficit.
    pub fn analytic_mass(&self, dim: usize) -> f64 {
        let c = self.cutoff_multiple();
        match (self.family, dim) {
            (KernelFamily::Gaussian, 1) => libm::erf(c / 2f64.sqrt()),
            (KernelFamily::Gaussian, _) => 1.0 - (-0.5 * c * c).exp(),
            (KernelFamily::Exponential, 1) => 1.0 - (-c).exp(),
            (KernelFamily::Exponential, _) => 1.0 - (1.0 + c) * (-c).exp(),
            (KernelFamily::Tophat, _) => {
                if c >= 1.0 {
                    1.0
                } else if dim == 1 {
                    c
                } else {
                    c * c
                }
            }
        }
    }
}

/// Orthonormal map from grid (strip) coordinates to the kernel's lab frame.
///
/// In 2D the grid's second axis is mapped onto `e = (cos θ, sin θ)` and the first
/// onto `(sin θ, -cos θ)`; `θ = π/2` is the identity. In 1D the map is `x ↦ ±x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    cols: [[f64; 2]; 2],
}

impl Frame {
    pub fn identity() -> Self {
        Frame { cols: [[1.0, 0.0], [0.0, 1.0]] }
    }

    /// Frame whose last grid axis points along the direction with polar angle `angle`.
    pub fn along(dim: usize, angle: f64) -> Self {
        if dim == 1 {
            let sign = if angle.cos() >= 0.0 { 1.0 } else { -1.0 };
            return Frame { cols: [[sign, 0.0], [0.0, 1.0]] };
        }
        let (s, c) = exact_sin_cos(angle);
        Frame { cols: [[s, -c], [c, s]] }
    }

    #[inline]
    pub fn apply(&self, h: [f64; 2]) -> [f64; 2] {
        [
            h[0] * self.cols[0][0] + h[1] * self.cols[1][0],
            h[0] * self.cols[0][1] + h[1] * self.cols[1][1],
        ]
    }

    /// Inverse (transpose) map: lab frame to grid coordinates.
    #[inline]
    pub fn apply_inverse(&self, x: [f64; 2]) -> [f64; 2] {
        [
            x[0] * self.cols[0][0] + x[1] * self.cols[0][1],
            x[0] * self.cols[1][0] + x[1] * self.cols[1][1],
        ]
    }
}

/// `sin`/`cos` that return exact values at multiples of π/2, so axis-aligned
/// frames map lattices onto lattices.
pub(crate) fn exact_sin_cos(angle: f64) -> (f64, f64) {
    let quarter = angle / (0.5 * PI);
    let k = quarter.round();
    if (quarter - k).abs() < 1e-12 {
        match (k as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        angle.sin_cos()
    }
}

/// Truncated stencil quadrature of `J_ε(h) = ε^{-N} J(h/ε)` on a grid.
///
/// The zero offset is never stored. Offsets come in `±h` pairs with bit-equal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    dim: usize,
    spacing: Vec<f64>,
    epsilon: f64,
    offsets: Vec<[isize; 2]>,
    weights: Vec<f64>,
    m0: f64,
    m1: f64,
}

impl DiscreteKernel {
    /// Builds a kernel from explicit offsets and weights. Evenness is checked.
    pub fn from_parts(
        grid: &Grid,
        epsilon: f64,
        offsets: Vec<[isize; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != weights.len() {
            return Err(Error::InvalidKernel("offsets and weights differ in length".into()));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidKernel(format!("epsilon must be positive, got {epsilon}")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidKernel("weights must be finite and nonnegative".into()));
        }
        if offsets.contains(&[0, 0]) {
            return Err(Error::InvalidKernel("zero offset is not allowed".into()));
        }
        for (o, w) in offsets.iter().zip(&weights) {
            let mirror = [-o[0], -o[1]];
            let ok = offsets.iter().zip(&weights).any(|(p, v)| *p == mirror && v == w);
            if !ok {
                return Err(Error::InvalidKernel(format!("offset {o:?} has no mirrored partner")));
            }
        }
        let mut k = DiscreteKernel {
            dim: grid.dim(),
            spacing: grid.spacing().to_vec(),
            epsilon,
            offsets,
            weights,
            m0: 0.0,
            m1: 0.0,
        };
        let (m0, m1) = k.compute_moments();
        k.m0 = m0;
        k.m1 = m1;
        Ok(k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn offsets(&self) -> &[[isize; 2]] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    /// Physical length of offset `k`.
    pub fn offset_length(&self, k: usize) -> f64 {
        let o = self.offsets[k];
        let mut s = 0.0;
        for axis in 0..self.dim {
            let d = o[axis] as f64 * self.spacing[axis];
            s += d * d;
        }
        s.sqrt()
    }

    fn compute_moments(&self) -> (f64, f64) {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            m0 += w;
            m1 += w * self.offset_length(k);
        }
        (m0, m1)
    }

    /// Whether this kernel was sampled for the lattice of `grid`.
    pub fn matches(&self, grid: &Grid) -> bool {
        self.dim == grid.dim()
            && self
                .spacing
                .iter()
                .zip(grid.spacing())
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()))
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "kernel sampled for spacing {:?} (dim {}), field grid has spacing {:?} (dim {})",
                self.spacing,
                self.dim,
                grid.spacing(),
                grid.dim()
            )))
        }
    }
}

/// Samples `J_ε` on the lattice of `grid`.
pub fn sample_kernel(spec: &KernelSpec, grid: &Grid, epsilon: f64) -> Result<DiscreteKernel> {
    sample_kernel_in_frame(spec, grid, epsilon, &Frame::identity())
}

/// Samples `J_ε(R h)` where `R` maps grid displacements into the kernel's frame.
pub fn sample_kernel_in_frame(
    spec: &KernelSpec,
    grid: &Grid,
    epsilon: f64,
    frame: &Frame,
) -> Result<DiscreteKernel> {
    spec.validate()?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidKernel(format!("epsilon must be positive, got {epsilon}")));
    }
    let dim = grid.dim();
    let spacing = grid.spacing();
    let radius = spec.support_radius() * epsilon;
    let reach: Vec<isize> = spacing.iter().map(|h| (radius / h).floor() as isize + 1).collect();
    let scale = epsilon.powi(-(dim as i32));
    let vol = grid.cell_volume();

    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let (r0, r1) = (reach[0], if dim == 2 { reach[1] } else { 0 });
    for i in -r0..=r0 {
        for j in -r1..=r1 {
            if i == 0 && j == 0 {
                continue;
            }
            let h = [i as f64 * spacing[0], if dim == 2 { j as f64 * spacing[1] } else { 0.0 }];
            let lab = frame.apply(h);
            let w = spec.eval(dim, [lab[0] / epsilon, lab[1] / epsilon]);
            if w > 0.0 {
                offsets.push([i, j]);
                weights.push(scale * w * vol);
            }
        }
    }
    if offsets.is_empty() {
        return Err(Error::KernelUnderResolved {
            cutoff: radius,
            spacing: spacing.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    DiscreteKernel::from_parts_unchecked(grid, epsilon, offsets, weights)
}

impl DiscreteKernel {
    fn from_parts_unchecked(
        grid: &Grid,
        epsilon: f64,
        offsets: Vec<[isize; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut k = DiscreteKernel {
            dim: grid.dim(),
            spacing: grid.spacing().to_vec(),
            epsilon,
            offsets,
            weights,
            m0: 0.0,
            m1: 0.0,
        };
        let (m0, m1) = k.compute_moments();
        k.m0 = m0;
        k.m1 = m1;
        Ok(k)
    }
}

/// Zeroth and first moments `(Σ w_k, Σ w_k |h_k|)`.
pub fn kernel_moments(k: &DiscreteKernel) -> (f64, f64) {
    (k.m0(), k.m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BoundaryMode;
    use std::collections::HashMap;

    fn grid_1d(extent: f64, cells: usize) -> Grid {
        Grid::new(1, &[extent], &[cells], &[BoundaryMode::Periodic]).unwrap()
    }

    #[test]
    fn tophat_offsets_and_equal_weights() {
        let g = grid_1d(4.0, 8);
        let k = sample_kernel(&KernelSpec::tophat(1.0), &g, 1.0).unwrap();
        let mut offs: Vec<isize> = k.offsets().iter().map(|o| o[0]).collect();
        offs.sort();
        assert_eq!(offs, vec![-2, -1, 1, 2]);
        assert!(k.weights().iter().all(|w| *w == k.weights()[0]));
    }

    #[test]
    fn stencil_is_even_and_nonnegative() {
        let g = Grid::new(2, &[2.0, 2.0], &[20, 20], &[BoundaryMode::Periodic; 2]).unwrap();
        let spec = KernelSpec::gaussian(0.3).with_aspect(1.7);
        let k = sample_kernel_in_frame(&spec, &g, 0.5, &Frame::along(2, 0.4)).unwrap();
        let map: HashMap<[isize; 2], f64> =
            k.offsets().iter().cloned().zip(k.weights().iter().cloned()).collect();
        for (o, w) in &map {
            assert!(*w >= 0.0);
            assert_eq!(map[&[-o[0], -o[1]]].to_bits(), w.to_bits());
        }
        assert!(!map.contains_key(&[0, 0]));
    }

    #[test]
    fn cutoff_in_cells_scales_with_epsilon() {
        let g = grid_1d(8.0, 64);
        let spec = KernelSpec::gaussian(1.0);
        let reach = |eps: f64| {
            let k = sample_kernel(&spec, &g, eps).unwrap();
            k.offsets().iter().map(|o| o[0]).max().unwrap()
        };
        assert_eq!(reach(1.0), 32);
        assert_eq!(reach(0.5), 16);
        // ε equal to the spacing still leaves four cells of support
        assert_eq!(reach(0.125), 4);
    }

    #[test]
    fn under_resolved_kernel_is_rejected() {
        let g = grid_1d(8.0, 8);
        let err = sample_kernel(&KernelSpec::tophat(1.0), &g, 0.5).unwrap_err();
        assert!(matches!(err, Error::KernelUnderResolved { .. }));
    }

    #[test]
    fn moments_of_hand_built_kernels() {
        let g = grid_1d(8.0, 8);
        let k = DiscreteKernel::from_parts(&g, 1.0, vec![[1, 0], [-1, 0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(kernel_moments(&k), (1.0, 1.0));
        let z = DiscreteKernel::from_parts(&g, 1.0, vec![[1, 0], [-1, 0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(kernel_moments(&z), (0.0, 0.0));
        assert!(DiscreteKernel::from_parts(&g, 1.0, vec![[1, 0]], vec![0.5]).is_err());
    }

    #[test]
    fn axis_aligned_frames_are_exact() {
        let f = Frame::along(2, 0.5 * PI);
        assert_eq!(f.apply([0.3, -0.7]), [0.3, -0.7]);
        let g = Frame::along(2, 1.5 * PI);
        assert_eq!(g.apply([0.3, -0.7]), [-0.3, 0.7]);
        let r = Frame::along(2, 0.3);
        let x = r.apply_inverse(r.apply([0.3, -0.7]));
        assert!((x[0] - 0.3).abs() < 1e-15 && (x[1] + 0.7).abs() < 1e-15);
    }
}
