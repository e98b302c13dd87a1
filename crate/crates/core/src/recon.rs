//! Source recovery from the coefficient field: synthesize w(x, θ), evaluate
//! Δw + (Δu₀/u₀ + k²c₀)w + 2∇w·∇u₀/u₀ (which equals p for every θ) and
//! average over the angle interval; plus error metrics against a phantom.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::forward::IncidentWave;
use crate::grid::{AngleGrid, Grid2D, ScalarField2D};
use crate::qrm::VectorFieldW;

/// w(x, θ_l) on every node and angle node: entry `node * n_theta + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSamples {
    grid: Grid2D,
    angles: AngleGrid,
    values: Vec<Complex64>,
}

impl AngularSamples {
    pub fn new(grid: Grid2D, angles: AngleGrid, values: Vec<Complex64>) -> Result<Self> {
        let expected = grid.len() * angles.n_theta();
        if values.len() != expected {
            return Err(Error::ShapeMismatch { context: "angular samples", expected, actual: values.len() });
        }
        Ok(Self { grid, angles, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn angles(&self) -> &AngleGrid {
        &self.angles
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// The n_theta samples at one node.
    pub fn at(&self, node: usize) -> &[Complex64] {
        let nt = self.angles.n_theta();
        &self.values[node * nt..(node + 1) * nt]
    }
}

/// w_comp(x, θ_l) = Σₙ wₙ(x)Ψₙ(θ_l).
pub fn synthesize_w(w: &VectorFieldW, basis: &Basis) -> Result<AngularSamples> {
    if w.n() > basis.n() {
        return Err(Error::ShapeMismatch { context: "synthesize_w (N)", expected: basis.n(), actual: w.n() });
    }
    let grid = *w.grid();
    let nt = basis.angles().n_theta();
    let n = w.n();
    let table = basis.coarse_table();
    let bn = basis.n();
    let mut values = vec![Complex64::default(); grid.len() * nt];
    values.par_chunks_mut(nt).enumerate().for_each(|(node, out)| {
        let coeffs = w.at(node);
        for (l, o) in out.iter_mut().enumerate() {
            let row = &table[l * bn..l * bn + n];
            *o = coeffs.iter().zip(row).map(|(c, p)| c * p).sum();
        }
    });
    AngularSamples::new(grid, *basis.angles(), values)
}

/// First and second derivative along one axis at index `i` of a line of
/// `n` samples spaced `h`: centered inside, second-order one-sided at the ends.
fn axis_derivatives(v: impl Fn(usize) -> Complex64, i: usize, n: usize, h: f64) -> (Complex64, Complex64) {
    if i == 0 {
        (
            (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h),
            (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / (h * h),
        )
    } else if i == n - 1 {
        (
            (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h),
            (2.0 * v(n - 1) - 5.0 * v(n - 2) + 4.0 * v(n - 3) - v(n - 4)) / (h * h),
        )
    } else {
        ((v(i + 1) - v(i - 1)) / (2.0 * h), (v(i + 1) - 2.0 * v(i) + v(i - 1)) / (h * h))
    }
}

/// Recovered source: real part of the θ-averaged bracket, and the magnitude
/// of the discarded imaginary part.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub p_comp: ScalarField2D,
    pub p_imag_residual: ScalarField2D,
}

/// p(x) = 1/(θ̄−θ̲) ∫ [Δw + (Δu₀/u₀ + k²c₀)w + 2∇w·∇u₀/u₀] dθ with the
/// trapezoid rule in θ, 5-point Δ and centered ∇ (one-sided on ∂Ω).
pub fn recover_source(w: &AngularSamples, wave: &IncidentWave, c0: &ScalarField2D) -> Result<ReconstructionResult> {
    let grid = *w.grid();
    if *c0.grid() != grid {
        return Err(Error::invalid("c0 and w live on different grids"));
    }
    let nx = grid.n_x();
    if nx < 4 {
        return Err(Error::invalid("source recovery needs n_x ≥ 4"));
    }
    let angles = w.angles();
    let nt = angles.n_theta();
    let weights = angles.trapezoid_weights();
    let length = angles.length();
    let dx = grid.dx();
    let k2 = wave.k() * wave.k();
    let lap0 = wave.lap_ratio();
    let grads: Vec<[Complex64; 2]> = (0..nt).map(|l| wave.grad_ratio(angles.theta(l))).collect();

    let p: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let (i, j) = grid.ij(node);
            let zeta = lap0 + k2 * c0.values()[node].re;
            let mut acc = Complex64::default();
            for l in 0..nt {
                let at = |ii: usize, jj: usize| w.values()[grid.node(ii, jj) * nt + l];
                let (wx, wxx) = axis_derivatives(|t| at(t, j), i, nx, dx);
                let (wy, wyy) = axis_derivatives(|t| at(i, t), j, nx, dx);
                let [gx, gy] = grads[l];
                let bracket = wxx + wyy + zeta * at(i, j) + 2.0 * (wx * gx + wy * gy);
                acc += bracket * weights[l];
            }
            acc / length
        })
        .collect();
    let p_comp = ScalarField2D::new(grid, p.iter().map(|v| Complex64::new(v.re, 0.0)).collect())?;
    let p_imag_residual = ScalarField2D::new(grid, p.iter().map(|v| Complex64::new(v.im.abs(), 0.0)).collect())?;
    Ok(ReconstructionResult { p_comp, p_imag_residual })
}

/// Error measures of a reconstruction against the true source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// |max p_comp − max p_true| / |max p_true|
    pub rel_max_error: f64,
    /// ‖p_comp − p_true‖₂ / ‖p_true‖₂ over the grid
    pub rel_l2_error: f64,
    /// Jaccard index of {p_comp > ½ max p_comp} and {p_true > 0}
    pub jaccard: f64,
    pub max_comp: f64,
    pub max_true: f64,
}

impl Metrics {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        writeln!(s, "rel_max_error={}", self.rel_max_error).unwrap();
        writeln!(s, "rel_l2_error={}", self.rel_l2_error).unwrap();
        writeln!(s, "jaccard={}", self.jaccard).unwrap();
        writeln!(s, "max_p_comp={}", self.max_comp).unwrap();
        writeln!(s, "max_p_true={}", self.max_true).unwrap();
        s
    }
}

pub fn metrics(p_comp: &ScalarField2D, p_true: &ScalarField2D) -> Result<Metrics> {
    if p_comp.grid() != p_true.grid() {
        return Err(Error::invalid("metric fields live on different grids"));
    }
    let comp = p_comp.real_parts();
    let truth = p_true.real_parts();
    let max_true = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm_true = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if max_true == 0.0 || norm_true == 0.0 {
        return Err(Error::invalid("true source is identically zero; relative metrics undefined"));
    }
    let max_comp = comp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let diff = comp.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let half = 0.5 * max_comp;
    let (mut inter, mut union) = (0usize, 0usize);
    for (a, b) in comp.iter().zip(&truth) {
        let (x, y) = (*a > half, *b > 0.0);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(Metrics {
        rel_max_error: (max_comp - max_true).abs() / max_true.abs(),
        rel_l2_error: diff / norm_true,
        jaccard: if union == 0 { 1.0 } else { inter as f64 / union as f64 },
        max_comp,
        max_true,
    })
}
