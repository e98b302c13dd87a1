//! Quasi-reversibility solve for the coefficient field W = (w₁, …, w_N).
//!
//! Truncating w(x, θ) = Σ wₙ(x)Ψₙ(θ) and testing the θ-differentiated
//! equation against each Ψₘ gives the coupled system
//!
//! ```text
//! S ΔW + A(x) W + B(x)·∇W = 0   in Ω,   W = F,  ∂_νW = G  on ∂Ω,
//! ```
//!
//! solved here in the S-multiplied form (S⁻¹ is never formed). The Cauchy
//! problem is over-determined and unstable, so W is taken as the minimizer of
//!
//! ```text
//! J(W) = dx² Σ_rows |LW − h|² + κε dx² Σ_nodes (|W|² + |D₁W|² + |D₂W|²)
//! ```
//!
//! where L is the 5-point / centered-difference discretization of the
//! system, h an optional forcing (zero for data), D₁ all forward first
//! difference quotients and D₂ the centered xx, yy and forward xy second
//! difference quotients. Both sums are cell-area weighted, so J approximates
//! the continuous functional. The fixed factor κ = [`REGULARIZATION_SCALE`]
//! maps the configured ε onto this discretization: the S-multiplied residual
//! is far larger than the S⁻¹-form one the default ε = 10⁻⁵ was chosen for.
//! κ was set once by trial on Test 1 at δ = 5% and is not tuned per run.
//!
//! Boundary conditions are imposed by elimination: boundary nodes hold F and
//! first-layer nodes hold F − dx·G (first-order Neumann). The remaining
//! unknowns (nodes at least two layers inside) solve the normal equations by
//! preconditioned conjugate gradients. The preconditioner is the
//! constant-coefficient symbol of the normal operator, diagonalized by the
//! 2-D discrete sine transform on the unknown block.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::Basis;
use crate::data::IndirectData;
use crate::dense::{self, Block};
use crate::error::{Error, Result};
use crate::forward::IncidentWave;
use crate::grid::{Grid2D, ScalarField2D};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// κ in the functional: the default ε = 10⁻⁵ gives unit weight.
pub const REGULARIZATION_SCALE: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrmConfig {
    pub epsilon: f64,
    /// Target relative residual of the normal equations.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Also impose the residual at first-layer nodes whose stencil reaches an
    /// unknown (their remaining values come from the boundary data).
    pub layer1_rows: bool,
}

impl Default for QrmConfig {
    fn default() -> Self {
        Self { epsilon: 1e-5, tolerance: 1e-6, max_iterations: 20_000, layer1_rows: true }
    }
}

impl QrmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid(format!("solver tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Coefficients of the coupled system on a grid.
///
/// a(x) = P + ζ(x)·S with P = ∫ ∂_θ(Δu₀/u₀)ΨₙΨₘ dθ and ζ(x) = Δu₀/u₀ + k²c₀(x).
/// The factorization uses that Δu₀/u₀ = −k² does not depend on θ for a plane
/// wave, so (Δu₀/u₀ + k²c₀)Ψ'ₙ integrates to ζ(x)·sₘₙ. B = (Bx, By) is
/// x-independent.
#[derive(Debug, Clone)]
pub struct CoefficientFields {
    n: usize,
    grid: Grid2D,
    s: Vec<Complex64>,
    p: Vec<Complex64>,
    zeta: Vec<Complex64>,
    bx: Vec<Complex64>,
    by: Vec<Complex64>,
}

impl CoefficientFields {
    pub fn assemble(wave: &IncidentWave, c0: &ScalarField2D, basis: &Basis) -> Result<Self> {
        let n = basis.n();
        let (nodes, weights) = basis.quadrature();
        let mut s = vec![ZERO; n * n];
        let mut p = vec![ZERO; n * n];
        let mut bx = vec![ZERO; n * n];
        let mut by = vec![ZERO; n * n];
        let dlap = wave.dtheta_lap_ratio();
        for m in 0..n {
            let pm = basis.psi_fine(m);
            for k in 0..n {
                let pk = basis.psi_fine(k);
                let dk = basis.dpsi_fine(k);
                let (mut ss, mut pp, mut sx, mut sy) = (ZERO, ZERO, ZERO, ZERO);
                for l in 0..nodes.len() {
                    let w = weights[l] * pm[l];
                    let [gx, gy] = wave.grad_ratio(nodes[l]);
                    let [hx, hy] = wave.dtheta_grad_ratio(nodes[l]);
                    ss += w * dk[l];
                    pp += dlap * (w * pk[l]);
                    sx += (gx * dk[l] + hx * pk[l]) * w;
                    sy += (gy * dk[l] + hy * pk[l]) * w;
                }
                s[m * n + k] = ss;
                p[m * n + k] = pp;
                bx[m * n + k] = 2.0 * sx;
                by[m * n + k] = 2.0 * sy;
            }
        }
        let k2 = wave.k() * wave.k();
        let lap = wave.lap_ratio();
        if c0.values().iter().any(|v| v.im != 0.0) {
            return Err(Error::invalid("c0 must be real"));
        }
        let zeta = c0.values().iter().map(|c| lap + k2 * c.re).collect();
        Ok(Self { n, grid: *c0.grid(), s, p, zeta, bx, by })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn s(&self) -> &[Complex64] {
        &self.s
    }

    pub fn bx(&self) -> &[Complex64] {
        &self.bx
    }

    pub fn by(&self) -> &[Complex64] {
        &self.by
    }

    /// The N×N matrix a(x) at a grid node.
    pub fn a_at(&self, node: usize) -> Vec<Complex64> {
        let z = self.zeta[node];
        self.p.iter().zip(&self.s).map(|(p, s)| p + z * s).collect()
    }

    fn p_is_zero(&self) -> bool {
        self.p.iter().all(|v| *v == ZERO)
    }
}

/// The stacked coefficients wₙ at every node: entry `node * n + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldW {
    grid: Grid2D,
    n: usize,
    values: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
    pub epsilon: f64,
}

impl VectorFieldW {
    pub fn new(grid: Grid2D, n: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() * n {
            return Err(Error::ShapeMismatch { context: "vector field W", expected: grid.len() * n, actual: values.len() });
        }
        Ok(Self { grid, n, values, iterations: 0, residual: 0.0, epsilon: 0.0 })
    }

    pub fn zeros(grid: Grid2D, n: usize) -> Self {
        Self { grid, n, values: vec![ZERO; grid.len() * n], iterations: 0, residual: 0.0, epsilon: 0.0 }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn at(&self, node: usize) -> &[Complex64] {
        &self.values[node * self.n..(node + 1) * self.n]
    }
}

/// Discrete operator L on a grid, with the boundary elimination layout.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    coeffs: CoefficientFields,
    /// S, Bx, By, P and their adjoints in compact form.
    blocks: [Block; 4],
    adjoints: [Block; 4],
    has_p: bool,
    rows: Vec<usize>,
    row_of: Vec<Option<usize>>,
    /// Side length of the unknown block (nodes with layer ≥ 2).
    m: usize,
    /// For each first-layer node, the boundary index supplying F − dx·G.
    partners: Vec<(usize, usize)>,
}

impl DiscreteOperator {
    pub fn new(coeffs: CoefficientFields, layer1_rows: bool) -> Result<Self> {
        let grid = coeffs.grid;
        let nx = grid.n_x();
        if nx < 5 {
            return Err(Error::invalid(format!("the QRM solve needs n_x ≥ 5, got {nx}")));
        }
        let n = coeffs.n;
        let m = nx - 4;
        let mut rows = Vec::new();
        for node in 0..grid.len() {
            match grid.layer(node) {
                0 => {}
                1 => {
                    if layer1_rows {
                        let (i, j) = grid.ij(node);
                        let nbrs = [grid.node(i - 1, j), grid.node(i + 1, j), grid.node(i, j - 1), grid.node(i, j + 1)];
                        if nbrs.iter().any(|&q| grid.layer(q) >= 2) {
                            rows.push(node);
                        }
                    }
                }
                _ => rows.push(node),
            }
        }
        let mut row_of = vec![None; grid.len()];
        for (r, &node) in rows.iter().enumerate() {
            row_of[node] = Some(r);
        }
        let boundary = grid.boundary();
        let mut partners = Vec::new();
        let mut seen = vec![false; grid.len()];
        for (b, bn) in boundary.nodes().iter().enumerate() {
            if bn.is_corner(&grid) {
                continue;
            }
            let q = bn.inward(&grid, 1);
            if !seen[q] {
                seen[q] = true;
                partners.push((q, b));
            }
        }
        debug_assert_eq!(partners.len(), 4 * (nx - 2) - 4);
        let blocks = [&coeffs.s, &coeffs.bx, &coeffs.by, &coeffs.p].map(|a| Block::classify(a));
        Ok(Self {
            blocks: blocks.clone(),
            adjoints: blocks.map(|b| b.adjoint(n)),
            has_p: !coeffs.p_is_zero(),
            coeffs,
            rows,
            row_of,
            m,
            partners,
        })
    }

    pub fn coefficients(&self) -> &CoefficientFields {
        &self.coeffs
    }

    pub fn grid(&self) -> &Grid2D {
        &self.coeffs.grid
    }

    pub fn n(&self) -> usize {
        self.coeffs.n
    }

    /// Grid nodes carrying a residual row, in row order.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Grid nodes whose values are solved for (layer ≥ 2), in unknown order.
    pub fn unknown_nodes(&self) -> Vec<usize> {
        let grid = self.grid();
        (0..self.m * self.m).map(|u| grid.node(u % self.m + 2, u / self.m + 2)).collect()
    }

    /// (first-layer node, boundary index) pairs used by the Neumann elimination.
    pub fn partners(&self) -> &[(usize, usize)] {
        &self.partners
    }

    /// Unscaled residual (LW)_p at every row node: `out[r * n + m]`.
    pub fn residual(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.apply_scaled(w);
        let dx = self.grid().dx();
        out.iter_mut().for_each(|v| *v /= dx);
        out
    }

    /// dx·(LW) at row nodes.
    fn apply_scaled(&self, w: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let grid = *self.grid();
        let dx = grid.dx();
        let inv2 = 1.0 / (dx * dx);
        let half = 0.5 / dx;
        let mut out = vec![ZERO; self.rows.len() * n];
        out.par_chunks_mut(n).zip(self.rows.par_iter()).for_each_init(
            || vec![ZERO; 3 * n],
            |scratch, (o, &p)| {
                let (i, j) = grid.ij(p);
                let at = |q: usize| &w[q * n..(q + 1) * n];
                let (c, e, we, no, so) = (at(p), at(grid.node(i + 1, j)), at(grid.node(i - 1, j)), at(grid.node(i, j + 1)), at(grid.node(i, j - 1)));
                let z = self.coeffs.zeta[p];
                let (lap, rest) = scratch.split_at_mut(n);
                let (gx, gy) = rest.split_at_mut(n);
                for t in 0..n {
                    lap[t] = (e[t] + we[t] + no[t] + so[t] - 4.0 * c[t]) * inv2 + z * c[t];
                    gx[t] = (e[t] - we[t]) * half;
                    gy[t] = (no[t] - so[t]) * half;
                }
                let [s, bx, by, pb] = &self.blocks;
                s.matvec_add(lap, o);
                bx.matvec_add(gx, o);
                by.matvec_add(gy, o);
                if self.has_p {
                    pb.matvec_add(c, o);
                }
                o.iter_mut().for_each(|v| *v *= dx);
            },
        );
        out
    }

    /// Adjoint of [`Self::apply_scaled`]: row values → full field.
    fn adjoint_scaled(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let grid = *self.grid();
        let dx = grid.dx();
        let inv2 = 1.0 / (dx * dx);
        let half = 0.5 / dx;
        let nr = self.rows.len();
        // per row: Sᴴy, Bxᴴy, Byᴴy, Pᴴy, each times dx
        let mut t = vec![ZERO; nr * 4 * n];
        t.par_chunks_mut(4 * n).zip(y.par_chunks(n)).for_each(|(tr, yr)| {
            let (s, rest) = tr.split_at_mut(n);
            let (bx, rest) = rest.split_at_mut(n);
            let (by, pp) = rest.split_at_mut(n);
            let [sh, bxh, byh, ph] = &self.adjoints;
            sh.matvec_add(yr, s);
            bxh.matvec_add(yr, bx);
            byh.matvec_add(yr, by);
            if self.has_p {
                ph.matvec_add(yr, pp);
            }
            tr.iter_mut().for_each(|v| *v *= dx);
        });
        let mut out = vec![ZERO; grid.len() * n];
        let nx = grid.n_x();
        out.par_chunks_mut(n).enumerate().for_each(|(q, o)| {
            let (i, j) = grid.ij(q);
            let blk = |r: usize, k: usize| &t[(r * 4 + k) * n..(r * 4 + k + 1) * n];
            if let Some(r) = self.row_of[q] {
                let z = self.coeffs.zeta[q].conj();
                let (s, pp) = (blk(r, 0), blk(r, 3));
                for c in 0..n {
                    o[c] += s[c] * (z - 4.0 * inv2) + pp[c];
                }
            }
            // q is the east neighbour of p = q − x, etc.
            let mut nb = |pi: Option<usize>, pj: Option<usize>, k: usize, sign: f64| {
                let (Some(pi), Some(pj)) = (pi, pj) else { return };
                if pi >= nx || pj >= nx {
                    return;
                }
                if let Some(r) = self.row_of[grid.node(pi, pj)] {
                    let (s, b) = (blk(r, 0), blk(r, k));
                    for c in 0..n {
                        o[c] += s[c] * inv2 + b[c] * (sign * half);
                    }
                }
            };
            nb(i.checked_sub(1), Some(j), 1, 1.0);
            nb(Some(i + 1), Some(j), 1, -1.0);
            nb(Some(i), j.checked_sub(1), 2, 1.0);
            nb(Some(i), Some(j + 1), 2, -1.0);
        });
        out
    }

    /// Full field with boundary values F and first-layer values F − dx·G,
    /// zero elsewhere.
    pub fn known_layers(&self, data: &IndirectData) -> Result<Vec<Complex64>> {
        let n = self.n();
        let grid = *self.grid();
        if data.n() != n {
            return Err(Error::ShapeMismatch { context: "indirect data N", expected: n, actual: data.n() });
        }
        if data.boundary().grid() != &grid {
            return Err(Error::invalid("indirect data and operator use different grids"));
        }
        let dx = grid.dx();
        let mut w = vec![ZERO; grid.len() * n];
        for (b, bn) in data.boundary().nodes().iter().enumerate() {
            w[bn.node * n..(bn.node + 1) * n].copy_from_slice(data.f_row(b));
        }
        for &(q, b) in &self.partners {
            let (f, g) = (data.f_row(b), data.g_row(b));
            for c in 0..n {
                w[q * n + c] = f[c] - dx * g[c];
            }
        }
        Ok(w)
    }

    fn embed(&self, x: &[Complex64], base: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let mut w = base.to_vec();
        for (u, node) in self.unknown_nodes().into_iter().enumerate() {
            w[node * n..(node + 1) * n].copy_from_slice(&x[u * n..(u + 1) * n]);
        }
        w
    }

    fn restrict(&self, w: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let mut x = Vec::with_capacity(self.m * self.m * n);
        for node in self.unknown_nodes() {
            x.extend_from_slice(&w[node * n..(node + 1) * n]);
        }
        x
    }

    /// Weight multiplying the dx²-weighted discrete H² norm, relative to
    /// the dx²-weighted residual.
    pub fn regularization_weight(&self, epsilon: f64) -> f64 {
        REGULARIZATION_SCALE * epsilon
    }

    fn reg_weights(&self, epsilon: f64) -> [f64; 3] {
        [self.regularization_weight(epsilon); 3]
    }

    /// J(W) as documented at module level, for a full field and optional
    /// forcing (unscaled, one N-vector per row).
    pub fn objective(&self, w: &[Complex64], forcing: Option<&[Complex64]>, epsilon: f64) -> f64 {
        let dx = self.grid().dx();
        let mut lw = self.apply_scaled(w);
        if let Some(h) = forcing {
            lw.iter_mut().zip(h).for_each(|(v, h)| *v -= dx * h);
        }
        let res: f64 = lw.iter().map(|v| v.norm_sqr()).sum();
        let reg: f64 = regularizer_apply(self.grid(), self.n(), w, self.reg_weights(epsilon)).iter().map(|v| v.norm_sqr()).sum();
        dx * dx * (res + reg)
    }

    /// Minimizes J over fields matching the boundary elimination.
    pub fn solve(
        &self,
        data: &IndirectData,
        config: &QrmConfig,
        forcing: Option<&[Complex64]>,
        initial: Option<&[Complex64]>,
    ) -> Result<VectorFieldW> {
        config.validate()?;
        let n = self.n();
        let grid = *self.grid();
        let dx = grid.dx();
        if let Some(h) = forcing {
            if h.len() != self.rows.len() * n {
                return Err(Error::ShapeMismatch { context: "QRM forcing", expected: self.rows.len() * n, actual: h.len() });
            }
        }
        let nu = self.m * self.m * n;
        if let Some(x0) = initial {
            if x0.len() != grid.len() * n {
                return Err(Error::ShapeMismatch { context: "QRM initial field", expected: grid.len() * n, actual: x0.len() });
            }
        }
        let weights = self.reg_weights(config.epsilon);
        let known = self.known_layers(data)?;

        // b = Eᵀ[Lᴴ(h − L w_k) − ε Hᴴ H w_k]
        let mut r0 = self.apply_scaled(&known);
        r0.iter_mut().for_each(|v| *v = -*v);
        if let Some(h) = forcing {
            r0.iter_mut().zip(h).for_each(|(v, h)| *v += dx * h);
        }
        let mut rhs_full = self.adjoint_scaled(&r0);
        let reg = regularizer_normal(&grid, n, &known, weights);
        rhs_full.iter_mut().zip(&reg).for_each(|(v, r)| *v -= r);
        let b = self.restrict(&rhs_full);

        let zeros = vec![ZERO; grid.len() * n];
        let normal = |x: &[Complex64]| -> Vec<Complex64> {
            let w = self.embed(x, &zeros);
            let lw = self.apply_scaled(&w);
            let mut g = self.adjoint_scaled(&lw);
            let hw = regularizer_normal(&grid, n, &w, weights);
            g.iter_mut().zip(&hw).for_each(|(v, h)| *v += h);
            self.restrict(&g)
        };
        let precond = SinePreconditioner::new(self, weights)?;
        let x0 = initial.map(|w| self.restrict(w)).unwrap_or_else(|| vec![ZERO; nu]);
        let (x, iterations, residual) = pcg(normal, |r| precond.apply(r), &b, x0, config.tolerance, config.max_iterations)?;
        let mut out = VectorFieldW::new(grid, n, self.embed(&x, &known))?;
        out.iterations = iterations;
        out.residual = residual;
        out.epsilon = config.epsilon;
        Ok(out)
    }
}

/// Regularizer components dx·(W, D₁W, D₂W) on the full grid.
pub(crate) fn regularizer_apply(grid: &Grid2D, n: usize, w: &[Complex64], weights: [f64; 3]) -> Vec<Complex64> {
    let nx = grid.n_x();
    let dx = grid.dx();
    let a1 = weights[0].sqrt();
    let a2 = weights[1].sqrt() / dx;
    let a3 = weights[2].sqrt() / dx;
    let idx = |i: usize, j: usize, c: usize| (j * nx + i) * n + c;
    let mut out = Vec::with_capacity(6 * nx * nx * n);
    for v in w {
        out.push(v * (dx * a1));
    }
    for j in 0..nx {
        for i in 0..nx - 1 {
            for c in 0..n {
                out.push((w[idx(i + 1, j, c)] - w[idx(i, j, c)]) * a2 * dx);
            }
        }
    }
    for j in 0..nx - 1 {
        for i in 0..nx {
            for c in 0..n {
                out.push((w[idx(i, j + 1, c)] - w[idx(i, j, c)]) * a2 * dx);
            }
        }
    }
    for j in 0..nx {
        for i in 1..nx - 1 {
            for c in 0..n {
                out.push((w[idx(i + 1, j, c)] - 2.0 * w[idx(i, j, c)] + w[idx(i - 1, j, c)]) * a3);
            }
        }
    }
    for j in 1..nx - 1 {
        for i in 0..nx {
            for c in 0..n {
                out.push((w[idx(i, j + 1, c)] - 2.0 * w[idx(i, j, c)] + w[idx(i, j - 1, c)]) * a3);
            }
        }
    }
    for j in 0..nx - 1 {
        for i in 0..nx - 1 {
            for c in 0..n {
                out.push((w[idx(i + 1, j + 1, c)] - w[idx(i + 1, j, c)] - w[idx(i, j + 1, c)] + w[idx(i, j, c)]) * a3);
            }
        }
    }
    out
}

/// Hᴴ H W for the regularizer, as a per-component scalar stencil.
///
/// The differences of W are formed first, each stored at its lower-left node
/// with zeros where it is undefined, then gathered back transposed.
pub(crate) fn regularizer_normal(grid: &Grid2D, n: usize, w: &[Complex64], weights: [f64; 3]) -> Vec<Complex64> {
    let nx = grid.n_x();
    let dx = grid.dx();
    let c1 = weights[0] * dx * dx;
    let c2 = weights[1];
    let c3 = weights[2] / (dx * dx);
    let row = nx * n;
    let node = |i: usize, j: usize| &w[(j * nx + i) * n..(j * nx + i + 1) * n];

    // fx, fy forward first differences; sxx, syy centered second; sxy on cells
    let mut diffs = vec![ZERO; 5 * w.len()];
    diffs.par_chunks_mut(5 * row).enumerate().for_each(|(j, out)| {
        let (fx, rest) = out.split_at_mut(row);
        let (fy, rest) = rest.split_at_mut(row);
        let (sxx, rest) = rest.split_at_mut(row);
        let (syy, sxy) = rest.split_at_mut(row);
        for i in 0..nx {
            let v = node(i, j);
            let o = i * n..(i + 1) * n;
            if i + 1 < nx {
                let e = node(i + 1, j);
                fx[o.clone()].iter_mut().enumerate().for_each(|(c, d)| *d = e[c] - v[c]);
            }
            if j + 1 < nx {
                let no = node(i, j + 1);
                fy[o.clone()].iter_mut().enumerate().for_each(|(c, d)| *d = no[c] - v[c]);
            }
            if i >= 1 && i + 1 < nx {
                let (e, we) = (node(i + 1, j), node(i - 1, j));
                sxx[o.clone()].iter_mut().enumerate().for_each(|(c, d)| *d = e[c] - 2.0 * v[c] + we[c]);
            }
            if j >= 1 && j + 1 < nx {
                let (no, so) = (node(i, j + 1), node(i, j - 1));
                syy[o.clone()].iter_mut().enumerate().for_each(|(c, d)| *d = no[c] - 2.0 * v[c] + so[c]);
            }
            if i + 1 < nx && j + 1 < nx {
                let (e, no, ne) = (node(i + 1, j), node(i, j + 1), node(i + 1, j + 1));
                sxy[o].iter_mut().enumerate().for_each(|(c, d)| *d = ne[c] - e[c] - no[c] + v[c]);
            }
        }
    });

    let field = |k: usize, i: usize, j: usize| {
        let start = j * 5 * row + k * row + i * n;
        &diffs[start..start + n]
    };
    let (fx, fy, sxx, syy, sxy) = (0, 1, 2, 3, 4);
    let mut out = vec![ZERO; w.len()];
    out.par_chunks_mut(row).enumerate().for_each(|(j, orow)| {
        for i in 0..nx {
            let o = &mut orow[i * n..(i + 1) * n];
            o.iter_mut().zip(node(i, j)).for_each(|(ov, v)| *ov = v * c1);
            let mut add = |k: usize, ii: usize, jj: usize, wgt: f64| {
                let d = field(k, ii, jj);
                o.iter_mut().zip(d).for_each(|(ov, dv)| *ov += dv * wgt);
            };
            if i >= 1 {
                add(fx, i - 1, j, c2);
                add(sxx, i - 1, j, c3);
            }
            add(fx, i, j, -c2);
            add(sxx, i, j, -2.0 * c3);
            if i + 1 < nx {
                add(sxx, i + 1, j, c3);
            }
            if j >= 1 {
                add(fy, i, j - 1, c2);
                add(syy, i, j - 1, c3);
            }
            add(fy, i, j, -c2);
            add(syy, i, j, -2.0 * c3);
            if j + 1 < nx {
                add(syy, i, j + 1, c3);
            }
            add(sxy, i, j, c3);
            if i >= 1 {
                add(sxy, i - 1, j, -c3);
            }
            if j >= 1 {
                add(sxy, i, j - 1, -c3);
            }
            if i >= 1 && j >= 1 {
                add(sxy, i - 1, j - 1, c3);
            }
        }
    });
    out
}

/// Block-diagonal preconditioner in the 2-D sine basis of the unknown block.
///
/// For each sine mode (a, b) it holds the average of M(±a, ±b)⁻¹ over the
/// four sign choices, where M = lᴴl + ε h I is the symbol of the normal
/// operator with constant coefficients (ζ replaced by its mean over the
/// unknowns) and h the regularizer symbol. This equals periodic-symbol
/// inversion on the odd extension of the block, restricted back.
struct SinePreconditioner {
    m: usize,
    n: usize,
    sine: Vec<f64>,
    blocks: Vec<Complex64>,
}

impl SinePreconditioner {
    fn new(op: &DiscreteOperator, weights: [f64; 3]) -> Result<Self> {
        let (m, n) = (op.m, op.n());
        let dx = op.grid().dx();
        let coeffs = &op.coeffs;
        let unknown = op.unknown_nodes();
        let zeta_mean = unknown.iter().map(|&q| coeffs.zeta[q]).sum::<Complex64>() / unknown.len() as f64;
        let norm = (2.0 / (m + 1) as f64).sqrt();
        let mut sine = vec![0.0; m * m];
        for p in 0..m {
            for i in 0..m {
                sine[p * m + i] = norm * (std::f64::consts::PI * ((p + 1) * (i + 1)) as f64 / (m + 1) as f64).sin();
            }
        }
        let freq = |p: usize| std::f64::consts::PI * (p + 1) as f64 / (m + 1) as f64;
        let mut blocks = vec![ZERO; m * m * n * n];
        let i_unit = Complex64::new(0.0, 1.0);
        blocks.par_chunks_mut(n * n).enumerate().try_for_each(|(mode, out)| -> Result<()> {
            let (a, b) = (freq(mode % m), freq(mode / m));
            let sa = (a / 2.0).sin().powi(2);
            let sb = (b / 2.0).sin().powi(2);
            let lap = -4.0 / (dx * dx) * (sa + sb);
            let h = dx * dx
                * (weights[0]
                    + weights[1] * 4.0 * (sa + sb) / (dx * dx)
                    + weights[2] * 16.0 * (sa * sa + sb * sb + sa * sb) / dx.powi(4));
            for (ga, gb) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                let cx = i_unit * (ga * a.sin() / dx);
                let cy = i_unit * (gb * b.sin() / dx);
                let l: Vec<Complex64> = (0..n * n)
                    .map(|t| dx * (coeffs.s[t] * (lap + zeta_mean) + coeffs.p[t] + coeffs.bx[t] * cx + coeffs.by[t] * cy))
                    .collect();
                let mut mm = dense::gram(&l, n);
                for d in 0..n {
                    mm[d * n + d] += h;
                }
                let inv = dense::hpd_inverse(&mm, n)?;
                for (o, v) in out.iter_mut().zip(&inv) {
                    *o += 0.25 * v;
                }
            }
            Ok(())
        })?;
        Ok(Self { m, n, sine, blocks })
    }

    /// Orthonormal DST-I along both axes of the block (self-inverse).
    fn transform(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (m, n) = (self.m, self.n);
        let mut tmp = vec![ZERO; x.len()];
        // along x (index i within each row j)
        tmp.par_chunks_mut(m * n).zip(x.par_chunks(m * n)).for_each(|(o, row)| self.sine_axis(row, o, n, false));
        // along y
        let mut out = vec![ZERO; x.len()];
        self.sine_axis(&tmp, &mut out, m * n, true);
        out
    }

    /// Applies the sine matrix to m consecutive slabs of length `slab`.
    /// Rows satisfy sine[p][m−1−i] = (−1)ᵖ sine[p][i], so even rows only see
    /// the mirrored sums of the input and odd rows the differences.
    fn sine_axis(&self, src: &[Complex64], dst: &mut [Complex64], slab: usize, parallel: bool) {
        let m = self.m;
        let h = m / 2;
        let mut even = vec![ZERO; (m - h) * slab];
        let mut odd = vec![ZERO; h * slab];
        for i in 0..h {
            let (a, b) = (&src[i * slab..(i + 1) * slab], &src[(m - 1 - i) * slab..(m - i) * slab]);
            for t in 0..slab {
                even[i * slab + t] = a[t] + b[t];
                odd[i * slab + t] = a[t] - b[t];
            }
        }
        if m % 2 == 1 {
            even[h * slab..].copy_from_slice(&src[h * slab..(h + 1) * slab]);
        }
        let row = |(p, o): (usize, &mut [Complex64])| {
            let (len, folded) = if p % 2 == 0 { (m - h, &even) } else { (h, &odd) };
            for (i, si) in self.sine[p * m..p * m + len].iter().enumerate() {
                for (ov, fv) in o.iter_mut().zip(&folded[i * slab..(i + 1) * slab]) {
                    *ov += fv * *si;
                }
            }
        };
        if parallel {
            dst.par_chunks_mut(slab).enumerate().for_each(row);
        } else {
            dst.chunks_mut(slab).enumerate().for_each(row);
        }
    }

    fn apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let hat = self.transform(r);
        let mut z = vec![ZERO; r.len()];
        z.par_chunks_mut(n).enumerate().for_each(|(mode, zo)| {
            dense::matvec_add(&self.blocks[mode * n * n..(mode + 1) * n * n], &hat[mode * n..(mode + 1) * n], zo);
        });
        self.transform(&z)
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// operator. Returns (x, iterations, relative residual).
fn pcg(
    a: impl Fn(&[Complex64]) -> Vec<Complex64>,
    m: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    mut x: Vec<Complex64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, usize, f64)> {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![ZERO; b.len()], 0, 0.0));
    }
    let ax = a(&x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return Ok((x, 0, rel));
    }
    let mut z = m(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    for it in 1..=max_iter {
        let ap = a(&p);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) || !(rz > 0.0) {
            return Err(Error::NonConvergence { iterations: it, residual: rel, target: tol });
        }
        let alpha = rz / pap;
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((x, it, rel));
        }
        z = m(&r);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: rel, target: tol })
}

/// Builds coefficients and operator, then solves for W.
pub fn solve_qrm(
    wave: &IncidentWave,
    c0: &ScalarField2D,
    basis: &Basis,
    data: &IndirectData,
    config: &QrmConfig,
) -> Result<VectorFieldW> {
    let coeffs = CoefficientFields::assemble(wave, c0, basis)?;
    let op = DiscreteOperator::new(coeffs, config.layer1_rows)?;
    op.solve(data, config, None, None)
}
