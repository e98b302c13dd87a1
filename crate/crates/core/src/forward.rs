//! Data simulation: plane-wave incidence, finite-difference solution of
//! Δu + k²c₀u = −k²p u₀ in Ω with the impedance condition ∂_νu − iku = 0 on
//! ∂Ω, and extraction of the Cauchy pair (u, ∂_νu) on the boundary.
//!
//! The system matrix does not depend on θ (only the right-hand side does),
//! so [`ForwardSolver`] factors it once and reuses the factors for every
//! incidence angle.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::data::CauchyData;
use crate::error::{Error, Result};
use crate::grid::{AngleGrid, BoundaryDescriptor, Grid2D, ScalarField2D};
use crate::sparse::{BandedLu, SparseComplexSystem, SOLVE_TOLERANCE};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// The plane wave u₀(x, θ) = exp(ik x·ξ(θ)), ξ(θ) = (cos θ, sin θ), and the
/// ratios of its derivatives to itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    k: f64,
}

impl IncidentWave {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn xi(theta: f64) -> [f64; 2] {
        [theta.cos(), theta.sin()]
    }

    pub fn dxi(theta: f64) -> [f64; 2] {
        [-theta.sin(), theta.cos()]
    }

    pub fn value(&self, x: f64, y: f64, theta: f64) -> Complex64 {
        let [a, b] = Self::xi(theta);
        (I * self.k * (a * x + b * y)).exp()
    }

    /// ∇u₀/u₀ = ik ξ(θ).
    pub fn grad_ratio(&self, theta: f64) -> [Complex64; 2] {
        let [a, b] = Self::xi(theta);
        [I * self.k * a, I * self.k * b]
    }

    /// Δu₀/u₀ = −k².
    pub fn lap_ratio(&self) -> Complex64 {
        Complex64::new(-self.k * self.k, 0.0)
    }

    /// ∂_θ(∇u₀/u₀) = ik ξ'(θ).
    pub fn dtheta_grad_ratio(&self, theta: f64) -> [Complex64; 2] {
        let [a, b] = Self::dxi(theta);
        [I * self.k * a, I * self.k * b]
    }

    /// ∂_θ(Δu₀/u₀), identically zero for a plane wave.
    pub fn dtheta_lap_ratio(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    /// ∂_νu₀/u₀ = ik ξ(θ)·ν.
    pub fn normal_ratio(&self, theta: f64, normal: [f64; 2]) -> Complex64 {
        let [a, b] = Self::xi(theta);
        I * self.k * (a * normal[0] + b * normal[1])
    }
}

/// Background coefficient c₀ and true source p on a grid.
#[derive(Debug, Clone)]
pub struct ForwardProblem {
    grid: Grid2D,
    wave: IncidentWave,
    c0: ScalarField2D,
    p_true: ScalarField2D,
}

impl ForwardProblem {
    pub fn new(wave: IncidentWave, c0: ScalarField2D, p_true: ScalarField2D) -> Result<Self> {
        let grid = *c0.grid();
        if *p_true.grid() != grid {
            return Err(Error::invalid("c0 and source live on different grids"));
        }
        if let Some(v) = c0.values().iter().find(|v| !(v.re >= 1.0) || v.im != 0.0) {
            return Err(Error::invalid(format!("c0 must be real and at least 1, found {v}")));
        }
        if p_true.values().iter().any(|v| v.im != 0.0) {
            return Err(Error::invalid("source must be real-valued"));
        }
        check_margin(&p_true)?;
        Ok(Self { grid, wave, c0, p_true })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn wave(&self) -> &IncidentWave {
        &self.wave
    }

    pub fn c0(&self) -> &ScalarField2D {
        &self.c0
    }

    pub fn p_true(&self) -> &ScalarField2D {
        &self.p_true
    }

    /// Right-hand side −k²p u₀ at interior rows, 0 at boundary rows.
    pub fn rhs(&self, theta: f64) -> Vec<Complex64> {
        let k2 = self.wave.k * self.wave.k;
        (0..self.grid.len())
            .map(|node| {
                let p = self.p_true.values()[node];
                if self.grid.layer(node) == 0 || p == Complex64::default() {
                    return Complex64::default();
                }
                let (x, y) = self.grid.xy(node);
                -k2 * p * self.wave.value(x, y, theta)
            })
            .collect()
    }
}

/// Nodes closer than this many layers to ∂Ω must carry no source.
pub const SOURCE_MARGIN: usize = 2;

/// Rejects a field with nonzero values within [`SOURCE_MARGIN`] layers of ∂Ω.
pub fn check_margin(p: &ScalarField2D) -> Result<()> {
    let grid = p.grid();
    if let Some(node) = (0..grid.len()).find(|&n| grid.layer(n) < SOURCE_MARGIN && p.values()[n] != Complex64::default()) {
        let (x, y) = grid.xy(node);
        return Err(Error::invalid(format!(
            "source support reaches ({x:.4}, {y:.4}), inside the {SOURCE_MARGIN}-node boundary margin"
        )));
    }
    Ok(())
}

/// The Helmholtz operator with impedance rows and a zero right-hand side.
///
/// Interior rows: 5-point Laplacian + k²c₀. Boundary rows:
/// (3u₀ − 4u₁ + u₂)/(2dx) − iku₀ along the inward line of the owning edge.
pub fn assemble_operator(grid: &Grid2D, k: f64, c0: &ScalarField2D) -> SparseComplexSystem {
    let n = grid.n_x();
    let dx = grid.dx();
    let inv2 = 1.0 / (dx * dx);
    let mut trip = Vec::with_capacity(5 * grid.len());
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let r = grid.node(i, j);
            let diag = -4.0 * inv2 + k * k * c0.values()[r].re;
            trip.push((r, r, Complex64::new(diag, 0.0)));
            for nb in [grid.node(i - 1, j), grid.node(i + 1, j), grid.node(i, j - 1), grid.node(i, j + 1)] {
                trip.push((r, nb, Complex64::new(inv2, 0.0)));
            }
        }
    }
    for b in grid.boundary().nodes() {
        let r = b.node;
        let h = 1.0 / (2.0 * dx);
        trip.push((r, r, Complex64::new(3.0 * h, -k)));
        trip.push((r, b.inward(grid, 1), Complex64::new(-4.0 * h, 0.0)));
        trip.push((r, b.inward(grid, 2), Complex64::new(h, 0.0)));
    }
    SparseComplexSystem::from_triplets(grid.len(), trip, vec![Complex64::default(); grid.len()])
        .expect("stencil entries lie inside the grid")
}

pub fn assemble_helmholtz(problem: &ForwardProblem, theta: f64) -> SparseComplexSystem {
    let mut sys = assemble_operator(&problem.grid, problem.wave.k, &problem.c0);
    sys.set_rhs(problem.rhs(theta)).expect("rhs has one entry per node");
    sys
}

/// Outward normal derivative on ∂Ω by the one-sided stencil
/// (3u₀ − 4u₁ + u₂)/(2dx), in boundary traversal order.
pub fn normal_derivative(values: &[Complex64], boundary: &BoundaryDescriptor) -> Vec<Complex64> {
    let grid = boundary.grid();
    let h = 1.0 / (2.0 * grid.dx());
    boundary
        .nodes()
        .iter()
        .map(|b| (3.0 * values[b.node] - 4.0 * values[b.inward(grid, 1)] + values[b.inward(grid, 2)]) * h)
        .collect()
}

/// Cauchy data (f, g) from one solved field per angle node.
pub fn extract_cauchy(fields: &[ScalarField2D], angles: &AngleGrid, k: f64) -> Result<CauchyData> {
    if fields.len() != angles.n_theta() {
        return Err(Error::ShapeMismatch {
            context: "fields per angle",
            expected: angles.n_theta(),
            actual: fields.len(),
        });
    }
    let grid = *fields[0].grid();
    if fields.iter().any(|f| *f.grid() != grid) {
        return Err(Error::invalid("fields on different grids"));
    }
    let boundary = grid.boundary();
    let nt = angles.n_theta();
    let nb = boundary.len();
    let mut f = vec![Complex64::default(); nb * nt];
    let mut g = vec![Complex64::default(); nb * nt];
    for (l, field) in fields.iter().enumerate() {
        let flux = normal_derivative(field.values(), &boundary);
        for (b, bn) in boundary.nodes().iter().enumerate() {
            f[b * nt + l] = field.values()[bn.node];
            g[b * nt + l] = flux[b];
        }
    }
    CauchyData::new(boundary, *angles, k, f, g)
}

/// A factored forward problem, reusable across incidence angles.
#[derive(Debug)]
pub struct ForwardSolver {
    problem: ForwardProblem,
    operator: SparseComplexSystem,
    lu: BandedLu,
}

impl ForwardSolver {
    pub fn new(problem: ForwardProblem) -> Result<Self> {
        let operator = assemble_operator(&problem.grid, problem.wave.k, &problem.c0);
        let lu = operator.factor()?;
        Ok(Self { problem, operator, lu })
    }

    pub fn problem(&self) -> &ForwardProblem {
        &self.problem
    }

    /// Solves the operator against an arbitrary right-hand side (boundary rows
    /// carry impedance data), checking the relative residual.
    pub fn solve_rhs(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        if rhs.len() != self.operator.dim() {
            return Err(Error::ShapeMismatch {
                context: "forward right-hand side",
                expected: self.operator.dim(),
                actual: rhs.len(),
            });
        }
        let x = self.lu.solve(rhs);
        let ax = self.operator.matvec(&x);
        let num: f64 = ax.iter().zip(rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        let res = if den > 0.0 { num / den } else { num };
        if !(res <= SOLVE_TOLERANCE) {
            return Err(Error::NonConvergence { iterations: 1, residual: res, target: SOLVE_TOLERANCE });
        }
        Ok(x)
    }

    pub fn solve_angle(&self, theta: f64) -> Result<ScalarField2D> {
        let u = self.solve_rhs(&self.problem.rhs(theta))?;
        ScalarField2D::new(self.problem.grid, u)
    }

    /// One solve per angle node in parallel, merged by angle index.
    pub fn simulate_all(&self, angles: &AngleGrid) -> Result<CauchyData> {
        let fields: Vec<Result<ScalarField2D>> = (0..angles.n_theta())
            .into_par_iter()
            .map(|l| self.solve_angle(angles.theta(l)))
            .collect();
        self.collect(fields, angles)
    }

    /// Sequential variant visiting the angle nodes in `order`; the result is
    /// independent of the order.
    pub fn simulate_in_order(&self, angles: &AngleGrid, order: &[usize]) -> Result<CauchyData> {
        let mut slots: Vec<Option<Result<ScalarField2D>>> = (0..angles.n_theta()).map(|_| None).collect();
        for &l in order {
            slots[l] = Some(self.solve_angle(angles.theta(l)));
        }
        let fields = slots
            .into_iter()
            .enumerate()
            .map(|(l, s)| s.unwrap_or_else(|| Err(Error::invalid(format!("angle index {l} missing from order")))))
            .collect();
        self.collect(fields, angles)
    }

    fn collect(&self, fields: Vec<Result<ScalarField2D>>, angles: &AngleGrid) -> Result<CauchyData> {
        let mut ok = Vec::with_capacity(fields.len());
        for (l, f) in fields.into_iter().enumerate() {
            ok.push(f.map_err(|e| Error::AngleSolve { theta_index: l, source: Box::new(e) })?);
        }
        extract_cauchy(&ok, angles, self.problem.wave.k)
    }
}

/// Factors the problem and simulates Cauchy data for every angle node.
pub fn simulate_all(problem: &ForwardProblem, angles: &AngleGrid) -> Result<CauchyData> {
    ForwardSolver::new(problem.clone())?.simulate_all(angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn blob(grid: Grid2D) -> ScalarField2D {
        ScalarField2D::from_fn(grid, |x, y| c(if x * x + y * y < 0.25 { 2.0 } else { 0.0 }))
    }

    #[test]
    fn incident_wave_identities() {
        let w = IncidentWave::new(3.0 * PI).unwrap();
        for &(x, y, th) in &[(0.1, -0.7, 0.3), (1.0, 1.0, 5.9), (-0.4, 0.2, 2.0)] {
            assert!((w.value(x, y, th).norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(w.lap_ratio() + w.k() * w.k(), c(0.0));
        // ∇u₀/u₀ by centered differences
        let (x, y, th, h) = (0.3, -0.2, 1.1, 1e-6);
        let u = w.value(x, y, th);
        let gx = (w.value(x + h, y, th) - w.value(x - h, y, th)) / (2.0 * h) / u;
        let gy = (w.value(x, y + h, th) - w.value(x, y - h, th)) / (2.0 * h) / u;
        let [ax, ay] = w.grad_ratio(th);
        assert!((gx - ax).norm() < 1e-6 && (gy - ay).norm() < 1e-6);
        let [dx_, dy_] = w.dtheta_grad_ratio(th);
        let [px, py] = w.grad_ratio(th + h);
        let [qx, qy] = w.grad_ratio(th - h);
        assert!(((px - qx) / (2.0 * h) - dx_).norm() < 1e-6);
        assert!(((py - qy) / (2.0 * h) - dy_).norm() < 1e-6);
        assert!(IncidentWave::new(0.0).is_err());
    }

    #[test]
    fn interior_stencil_entries() {
        let grid = Grid2D::new(7).unwrap();
        let c0 = ScalarField2D::from_fn(grid, |x, _| c(1.0 + x * x));
        let k = 2.0;
        let sys = assemble_operator(&grid, k, &c0);
        let inv2 = 1.0 / (grid.dx() * grid.dx());
        let r = grid.node(2, 3);
        let (x, _) = grid.xy(r);
        assert!((sys.get(r, r) - c(-4.0 * inv2 + k * k * (1.0 + x * x))).norm() < 1e-12);
        for nb in [grid.node(1, 3), grid.node(3, 3), grid.node(2, 2), grid.node(2, 4)] {
            assert_eq!(sys.get(r, nb), c(inv2));
        }
        assert_eq!(sys.row(r).count(), 5);
    }

    #[test]
    fn margin_violation_is_rejected() {
        let grid = Grid2D::new(20).unwrap();
        let wave = IncidentWave::new(1.0).unwrap();
        let mut p = ScalarField2D::zeros(grid);
        p.values_mut()[grid.node(1, 10)] = c(1.0);
        assert!(ForwardProblem::new(wave, ScalarField2D::constant(grid, 1.0), p.clone()).is_err());
        p.values_mut()[grid.node(1, 10)] = c(0.0);
        p.values_mut()[grid.node(2, 10)] = c(1.0);
        assert!(ForwardProblem::new(wave, ScalarField2D::constant(grid, 1.0), p).is_ok());
        assert!(ForwardProblem::new(wave, ScalarField2D::constant(grid, 0.5), ScalarField2D::zeros(grid)).is_err());
    }

    #[test]
    fn zero_source_gives_zero_data() {
        let grid = Grid2D::new(12).unwrap();
        let prob = ForwardProblem::new(
            IncidentWave::new(3.0 * PI).unwrap(),
            ScalarField2D::constant(grid, 1.0),
            ScalarField2D::zeros(grid),
        )
        .unwrap();
        let sys = assemble_helmholtz(&prob, 0.7);
        assert!(sys.rhs().iter().all(|v| *v == c(0.0)));
        assert!(sys.solve().unwrap().iter().all(|v| *v == c(0.0)));
        let angles = AngleGrid::full(9).unwrap();
        let data = simulate_all(&prob, &angles).unwrap();
        assert_eq!(data.f().len(), (4 * 12 - 4) * 9);
        assert!(data.f().iter().chain(data.g()).all(|v| *v == c(0.0)));
    }

    #[test]
    fn one_sided_flux_is_exact_for_quadratics() {
        let grid = Grid2D::new(9).unwrap();
        let boundary = grid.boundary();
        let ones = vec![c(1.0); grid.len()];
        assert!(normal_derivative(&ones, &boundary).iter().all(|g| g.norm() < 1e-12));
        let u: Vec<Complex64> = (0..grid.len()).map(|n| c(grid.xy(n).0)).collect();
        let g = normal_derivative(&u, &boundary);
        for (b, bn) in boundary.nodes().iter().enumerate() {
            let expect = bn.normal_f64()[0];
            assert!((g[b] - c(expect)).norm() < 1e-12);
        }
        let q: Vec<Complex64> = (0..grid.len()).map(|n| { let (x, y) = grid.xy(n); c(x * x - 3.0 * x * y + y * y) }).collect();
        let g = normal_derivative(&q, &boundary);
        for (b, bn) in boundary.nodes().iter().enumerate() {
            let (x, y) = grid.xy(bn.node);
            let [nx, ny] = bn.normal_f64();
            let expect = (2.0 * x - 3.0 * y) * nx + (2.0 * y - 3.0 * x) * ny;
            assert!((g[b] - c(expect)).norm() < 1e-11);
        }
    }

    /// Max nodal error of the discrete solve for u* = exp(ik(0.3x + 0.9y))
    /// with the matching source and impedance data, plus the max flux error.
    fn manufactured_errors(n_x: usize) -> (f64, f64) {
        let grid = Grid2D::new(n_x).unwrap();
        let k = 3.0 * PI;
        let (a, b) = (0.3, 0.9);
        let exact = |x: f64, y: f64| (I * k * (a * x + b * y)).exp();
        let c0 = ScalarField2D::constant(grid, 1.0);
        let op = assemble_operator(&grid, k, &c0);
        let boundary = grid.boundary();
        let mut rhs: Vec<Complex64> = (0..grid.len())
            .map(|n| {
                let (x, y) = grid.xy(n);
                // Δu* + k²u* = k²(1 − a² − b²)u*
                k * k * (1.0 - a * a - b * b) * exact(x, y)
            })
            .collect();
        for bn in boundary.nodes() {
            let (x, y) = grid.xy(bn.node);
            let [nx, ny] = bn.normal_f64();
            rhs[bn.node] = (I * k * (a * nx + b * ny) - I * k) * exact(x, y);
        }
        let mut sys = op;
        sys.set_rhs(rhs).unwrap();
        let u = sys.solve().unwrap();
        let err = (0..grid.len())
            .map(|n| { let (x, y) = grid.xy(n); (u[n] - exact(x, y)).norm() })
            .fold(0.0, f64::max);
        let g = normal_derivative(&u, &boundary);
        let gerr = boundary
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, bn)| {
                let (x, y) = grid.xy(bn.node);
                let [nx, ny] = bn.normal_f64();
                (g[i] - I * k * (a * nx + b * ny) * exact(x, y)).norm()
            })
            .fold(0.0, f64::max);
        (err, gerr)
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let (e40, g40) = manufactured_errors(40);
        let (e80, g80) = manufactured_errors(80);
        let ratio = (79.0f64 / 39.0).ln();
        let order = (e40 / e80).ln() / ratio;
        assert!(order >= 1.8, "order {order} ({e40:.3e} -> {e80:.3e})");
        let gorder = (g40 / g80).ln() / ratio;
        assert!(gorder >= 1.5, "flux order {gorder} ({g40:.3e} -> {g80:.3e})");
    }

    #[test]
    fn linear_in_source() {
        let grid = Grid2D::new(16).unwrap();
        let wave = IncidentWave::new(5.0).unwrap();
        let c0 = ScalarField2D::constant(grid, 1.0);
        let p1 = blob(grid);
        let p2 = ScalarField2D::from_fn(grid, |x, y| c(if (x - 0.3).abs() < 0.2 && y.abs() < 0.4 { 1.5 } else { 0.0 }));
        let sum = ScalarField2D::new(grid, p1.values().iter().zip(p2.values()).map(|(a, b)| a + b).collect()).unwrap();
        let solve = |p: ScalarField2D| {
            ForwardSolver::new(ForwardProblem::new(wave, c0.clone(), p).unwrap()).unwrap().solve_angle(0.4).unwrap()
        };
        let (u1, u2, us) = (solve(p1), solve(p2), solve(sum));
        let scale = us.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for n in 0..grid.len() {
            assert!((u1.values()[n] + u2.values()[n] - us.values()[n]).norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn simulation_is_order_independent() {
        let grid = Grid2D::new(14).unwrap();
        let prob = ForwardProblem::new(IncidentWave::new(4.0).unwrap(), ScalarField2D::constant(grid, 1.0), blob(grid)).unwrap();
        let angles = AngleGrid::full(11).unwrap();
        let solver = ForwardSolver::new(prob).unwrap();
        let par = solver.simulate_all(&angles).unwrap();
        let rev: Vec<usize> = (0..11).rev().collect();
        let seq = solver.simulate_in_order(&angles, &rev).unwrap();
        assert_eq!(par.f(), seq.f());
        assert_eq!(par.g(), seq.g());
        assert!(solver.simulate_in_order(&angles, &rev[1..]).is_err());
    }
}
