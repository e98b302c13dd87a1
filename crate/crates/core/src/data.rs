//! Boundary measurements: the Cauchy pair (f, g) over ∂Ω × angles, noise
//! injection, the indirect data (F, G) for the coefficient field W, and the
//! truncation diagnostic φ(N).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::forward::IncidentWave;
use crate::grid::{AngleGrid, BoundaryDescriptor, Edge};

/// f(x, θ) = u and g(x, θ) = ∂_νu on ∂Ω × angle grid, stored boundary-major:
/// entry `b * n_theta + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    boundary: BoundaryDescriptor,
    angles: AngleGrid,
    k: f64,
    f: Vec<Complex64>,
    g: Vec<Complex64>,
    delta: f64,
    seed: Option<u64>,
}

impl CauchyData {
    pub fn new(
        boundary: BoundaryDescriptor,
        angles: AngleGrid,
        k: f64,
        f: Vec<Complex64>,
        g: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = boundary.len() * angles.n_theta();
        for (name, v) in [("Cauchy data f", &f), ("Cauchy data g", &g)] {
            if v.len() != expected {
                return Err(Error::ShapeMismatch { context: name, expected, actual: v.len() });
            }
        }
        Ok(Self { boundary, angles, k, f, g, delta: 0.0, seed: None })
    }

    pub(crate) fn with_noise_record(mut self, delta: f64, seed: Option<u64>) -> Self {
        self.delta = delta;
        self.seed = seed;
        self
    }

    pub fn boundary(&self) -> &BoundaryDescriptor {
        &self.boundary
    }

    pub fn angles(&self) -> &AngleGrid {
        &self.angles
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn f(&self) -> &[Complex64] {
        &self.f
    }

    pub fn g(&self) -> &[Complex64] {
        &self.g
    }

    pub fn f_at(&self, b: usize, l: usize) -> Complex64 {
        self.f[b * self.angles.n_theta() + l]
    }

    pub fn g_at(&self, b: usize, l: usize) -> Complex64 {
        self.g[b * self.angles.n_theta() + l]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// Multiplies every entry by (1 + δ·r) with r uniform on [−1, 1].
///
/// Draws come from ChaCha8 seeded with `seed`: first one per f entry in
/// storage order (boundary-major, then angle), then one per g entry in the
/// same order.
pub fn add_noise(clean: &CauchyData, delta: f64, seed: u64) -> Result<CauchyData> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("noise level must be non-negative, got {delta}")));
    }
    let mut out = clean.clone().with_noise_record(delta, Some(seed));
    if delta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.f.iter_mut().chain(out.g.iter_mut()) {
        let r: f64 = rng.gen_range(-1.0..=1.0);
        *v *= 1.0 + delta * r;
    }
    Ok(out)
}

/// Fourier coefficients of w = −u/(k²u₀) and of its normal derivative on
/// ∂Ω, stored boundary-major: entry `b * n + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndirectData {
    boundary: BoundaryDescriptor,
    n: usize,
    big_f: Vec<Complex64>,
    big_g: Vec<Complex64>,
}

impl IndirectData {
    pub fn new(boundary: BoundaryDescriptor, n: usize, big_f: Vec<Complex64>, big_g: Vec<Complex64>) -> Result<Self> {
        let expected = boundary.len() * n;
        for (name, v) in [("indirect data F", &big_f), ("indirect data G", &big_g)] {
            if v.len() != expected {
                return Err(Error::ShapeMismatch { context: name, expected, actual: v.len() });
            }
        }
        Ok(Self { boundary, n, big_f, big_g })
    }

    /// Zero data of the given size.
    pub fn zeros(boundary: BoundaryDescriptor, n: usize) -> Self {
        let len = boundary.len() * n;
        Self { boundary, n, big_f: vec![Complex64::default(); len], big_g: vec![Complex64::default(); len] }
    }

    pub fn boundary(&self) -> &BoundaryDescriptor {
        &self.boundary
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn big_f(&self) -> &[Complex64] {
        &self.big_f
    }

    pub fn big_g(&self) -> &[Complex64] {
        &self.big_g
    }

    /// The N coefficients of F at boundary index `b`.
    pub fn f_row(&self, b: usize) -> &[Complex64] {
        &self.big_f[b * self.n..(b + 1) * self.n]
    }

    pub fn g_row(&self, b: usize) -> &[Complex64] {
        &self.big_g[b * self.n..(b + 1) * self.n]
    }
}

fn check_angles(data: &CauchyData, basis: &Basis) -> Result<()> {
    if data.angles() != basis.angles() {
        return Err(Error::invalid("Cauchy data and basis use different angle grids"));
    }
    Ok(())
}

/// Fₙ(x) = ∫ f/(−k²u₀) Ψₙ dθ and Gₙ(x) = ∫ (g u₀ − f ∂_νu₀)/(−k²u₀²) Ψₙ dθ,
/// with ∂_νu₀ = ik(ξ·ν)u₀ and trapezoid quadrature on the angle grid.
pub fn compute_indirect(data: &CauchyData, wave: &IncidentWave, basis: &Basis) -> Result<IndirectData> {
    check_angles(data, basis)?;
    let boundary = data.boundary();
    let grid = boundary.grid();
    let nt = data.angles().n_theta();
    let n = basis.n();
    let k2 = wave.k() * wave.k();
    let thetas = data.angles().thetas();
    let mut big_f = Vec::with_capacity(boundary.len() * n);
    let mut big_g = Vec::with_capacity(boundary.len() * n);
    let mut wf = vec![Complex64::default(); nt];
    let mut wg = vec![Complex64::default(); nt];
    for (b, bn) in boundary.nodes().iter().enumerate() {
        let (x, y) = grid.xy(bn.node);
        let normal = bn.normal_f64();
        for l in 0..nt {
            let u0 = wave.value(x, y, thetas[l]);
            let f = data.f_at(b, l);
            let g = data.g_at(b, l);
            wf[l] = f / (-k2 * u0);
            // (g u₀ − f ∂_νu₀)/(−k²u₀²) = (g − f ∂_νu₀/u₀)/(−k²u₀)
            wg[l] = (g - f * wave.normal_ratio(thetas[l], normal)) / (-k2 * u0);
        }
        big_f.extend(basis.project(&wf)?);
        big_g.extend(basis.project(&wg)?);
    }
    IndirectData::new(boundary.clone(), n, big_f, big_g)
}

/// Truncation diagnostic on one edge Γ: φ(N) = max |w − Σₙ≤N wₙΨₙ| over
/// Γ × angle grid with w = f/(−k²u₀), plus the L² analogue and the full
/// deviation map for each N.
#[derive(Debug, Clone)]
pub struct CutoffDiagnostic {
    pub edge: Edge,
    /// Boundary indices of Γ, ordered along the edge.
    pub edge_nodes: Vec<usize>,
    pub n_list: Vec<usize>,
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
    /// `maps[i][q * n_theta + l]` is |w − partial sum| for `n_list[i]` at the
    /// q-th node of Γ and angle l.
    pub maps: Vec<Vec<f64>>,
}

pub fn cutoff_diagnostic(
    data: &CauchyData,
    wave: &IncidentWave,
    basis: &Basis,
    edge: Edge,
    n_list: &[usize],
) -> Result<CutoffDiagnostic> {
    check_angles(data, basis)?;
    if n_list.is_empty() {
        return Err(Error::invalid("cutoff diagnostic needs at least one N"));
    }
    if let Some(&bad) = n_list.iter().find(|&&m| m == 0 || m > basis.n()) {
        return Err(Error::invalid(format!("N = {bad} outside 1..={}", basis.n())));
    }
    let boundary = data.boundary();
    let edge_nodes = boundary.edge_indices(edge);
    if edge_nodes.is_empty() {
        return Err(Error::invalid(format!("edge {} has no nodes", edge.name())));
    }
    let grid = boundary.grid();
    let angles = data.angles();
    let nt = angles.n_theta();
    let tw = angles.trapezoid_weights();
    let k2 = wave.k() * wave.k();
    let last = edge_nodes.len() - 1;

    let mut maps = vec![vec![0.0; edge_nodes.len() * nt]; n_list.len()];
    let mut l2 = vec![0.0; n_list.len()];
    let mut w = vec![Complex64::default(); nt];
    for (q, &b) in edge_nodes.iter().enumerate() {
        let (x, y) = grid.xy(boundary.get(b).node);
        for (l, wl) in w.iter_mut().enumerate() {
            *wl = data.f_at(b, l) / (-k2 * wave.value(x, y, angles.theta(l)));
        }
        let coeffs = basis.project(&w)?;
        let along = if q == 0 || q == last { 0.5 * grid.dx() } else { grid.dx() };
        for (i, &m) in n_list.iter().enumerate() {
            for l in 0..nt {
                let dev = (w[l] - basis.synthesize(&coeffs[..m], l)?).norm();
                maps[i][q * nt + l] = dev;
                l2[i] += along * tw[l] * dev * dev;
            }
        }
    }
    let sup = maps.iter().map(|m| m.iter().copied().fold(0.0, f64::max)).collect();
    Ok(CutoffDiagnostic {
        edge,
        edge_nodes,
        n_list: n_list.to_vec(),
        sup,
        l2: l2.into_iter().map(f64::sqrt).collect(),
        maps,
    })
}
