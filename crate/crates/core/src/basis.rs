//! Orthonormal basis {Ψₘ} of L²(θ̲, θ̄) spanned by (θ−θ₀)^{m−1} e^{θ−θ₀},
//! and the derivative-coupling matrix S with sₘₙ = ∫ Ψₘ Ψ'ₙ dθ.
//!
//! Each Ψₘ is P_{m−1}(t)·eᵗ with t = θ − θ₀. The functions are produced by
//! Gram-Schmidt with one re-orthogonalization pass, seeding step m with
//! t·Ψ_{m−1} instead of the raw monomial t^{m−1}eᵗ. Both seed sequences span
//! the same nested spaces and have positive leading coefficients, so the
//! orthonormal output is the same; the raw monomials are numerically
//! dependent long before m = 35 while t·Ψ_{m−1} keeps every pivot O(1).
//!
//! Derivatives are carried through the same recurrence
//! (Ψ'ₘ = (Ψ_{m−1} + tΨ'_{m−1} − Σ cⱼ Ψ'ⱼ) / pivot), so they are exact up to
//! rounding, and the recurrence can be replayed at any θ.
//!
//! All inner products use the composite trapezoid rule on the construction
//! grid, which is the angle grid refined by `refine`. With `refine = 1` the
//! basis is orthonormal under the same rule `project` uses.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::AngleGrid;

/// Relative Gram-Schmidt pivot below which the basis is declared dependent.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
struct RecurrenceStep {
    /// Projection coefficients onto Ψ₁..Ψ_{m−1}, summed over both passes.
    coeffs: Vec<f64>,
    pivot: f64,
}

#[derive(Debug, Clone)]
pub struct Basis {
    n: usize,
    angles: AngleGrid,
    construction: AngleGrid,
    refine: usize,
    theta0: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `psi[m * n_fine + l]`
    psi: Vec<f64>,
    dpsi: Vec<f64>,
    steps: Vec<RecurrenceStep>,
}

impl Basis {
    pub fn build(n: usize, angles: &AngleGrid, refine: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("basis size N must be at least 1"));
        }
        let construction = angles.refined(refine)?;
        let theta0 = angles.theta0();
        let nodes = construction.thetas();
        let weights = construction.trapezoid_weights();
        let nf = nodes.len();
        let t: Vec<f64> = nodes.iter().map(|&th| th - theta0).collect();

        let ip = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(&weights).map(|((x, y), w)| w * x * y).sum()
        };

        let mut psi = vec![0.0; n * nf];
        let mut dpsi = vec![0.0; n * nf];
        let mut steps = Vec::with_capacity(n);

        for m in 0..n {
            let (mut v, mut dv): (Vec<f64>, Vec<f64>) = if m == 0 {
                let e: Vec<f64> = t.iter().map(|x| x.exp()).collect();
                (e.clone(), e)
            } else {
                let prev = &psi[(m - 1) * nf..m * nf];
                let dprev = &dpsi[(m - 1) * nf..m * nf];
                (
                    t.iter().zip(prev).map(|(x, p)| x * p).collect(),
                    t.iter().zip(prev).zip(dprev).map(|((x, p), dp)| p + x * dp).collect(),
                )
            };
            let seed_norm = ip(&v, &v).sqrt();
            let mut coeffs = vec![0.0; m];
            for _pass in 0..2 {
                for j in 0..m {
                    let pj = &psi[j * nf..(j + 1) * nf];
                    let dpj = &dpsi[j * nf..(j + 1) * nf];
                    let c = ip(&v, pj);
                    coeffs[j] += c;
                    for l in 0..nf {
                        v[l] -= c * pj[l];
                        dv[l] -= c * dpj[l];
                    }
                }
            }
            let pivot = ip(&v, &v).sqrt();
            if !(pivot > PIVOT_THRESHOLD * seed_norm) {
                return Err(Error::Conditioning {
                    index: m + 1,
                    pivot: pivot / seed_norm,
                    threshold: PIVOT_THRESHOLD,
                });
            }
            for l in 0..nf {
                psi[m * nf + l] = v[l] / pivot;
                dpsi[m * nf + l] = dv[l] / pivot;
            }
            steps.push(RecurrenceStep { coeffs, pivot });
        }

        Ok(Self {
            n,
            angles: *angles,
            construction,
            refine,
            theta0,
            nodes,
            weights,
            psi,
            dpsi,
            steps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn angles(&self) -> &AngleGrid {
        &self.angles
    }

    pub fn construction_grid(&self) -> &AngleGrid {
        &self.construction
    }

    pub fn refine(&self) -> usize {
        self.refine
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Construction-grid nodes and trapezoid weights.
    pub fn quadrature(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }

    /// Ψₘ sampled on the construction grid (`m` zero-based).
    pub fn psi_fine(&self, m: usize) -> &[f64] {
        let nf = self.nodes.len();
        &self.psi[m * nf..(m + 1) * nf]
    }

    pub fn dpsi_fine(&self, m: usize) -> &[f64] {
        let nf = self.nodes.len();
        &self.dpsi[m * nf..(m + 1) * nf]
    }

    /// Ψₘ at the coarse angle node `l`.
    pub fn psi_at(&self, m: usize, l: usize) -> f64 {
        self.psi[m * self.nodes.len() + l * self.refine]
    }

    pub fn dpsi_at(&self, m: usize, l: usize) -> f64 {
        self.dpsi[m * self.nodes.len() + l * self.refine]
    }

    /// Coarse-grid table `table[l * n + m] = Ψₘ(θ_l)`.
    pub fn coarse_table(&self) -> Vec<f64> {
        let nt = self.angles.n_theta();
        let mut out = vec![0.0; nt * self.n];
        for l in 0..nt {
            for m in 0..self.n {
                out[l * self.n + m] = self.psi_at(m, l);
            }
        }
        out
    }

    /// Replays the construction recurrence at an arbitrary angle, returning
    /// (Ψ₁..Ψ_N, Ψ'₁..Ψ'_N).
    pub fn evaluate(&self, theta: f64) -> (Vec<f64>, Vec<f64>) {
        let t = theta - self.theta0;
        let mut v = vec![0.0; self.n];
        let mut dv = vec![0.0; self.n];
        for (m, step) in self.steps.iter().enumerate() {
            let (mut a, mut da) = if m == 0 {
                (t.exp(), t.exp())
            } else {
                (t * v[m - 1], v[m - 1] + t * dv[m - 1])
            };
            for (j, c) in step.coeffs.iter().enumerate() {
                a -= c * v[j];
                da -= c * dv[j];
            }
            v[m] = a / step.pivot;
            dv[m] = da / step.pivot;
        }
        (v, dv)
    }

    /// Trapezoid inner product on the construction grid.
    pub fn inner_product(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| w * x * y).sum()
    }

    /// Gram matrix of the basis under the construction quadrature.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..=a {
                let v = self.inner_product(self.psi_fine(a), self.psi_fine(b));
                g[a * n + b] = v;
                g[b * n + a] = v;
            }
        }
        g
    }

    /// Fourier coefficients cₙ = ∫ v Ψₙ dθ of samples on the coarse angle grid.
    pub fn project(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        let nt = self.angles.n_theta();
        if samples.len() != nt {
            return Err(Error::ShapeMismatch {
                context: "project",
                expected: nt,
                actual: samples.len(),
            });
        }
        let w = self.angles.trapezoid_weights();
        Ok((0..self.n)
            .map(|m| {
                samples
                    .iter()
                    .zip(&w)
                    .enumerate()
                    .map(|(l, (s, wl))| s * (wl * self.psi_at(m, l)))
                    .sum()
            })
            .collect())
    }

    /// Partial sum Σ cₙ Ψₙ(θ_l) at coarse angle node `l`.
    pub fn synthesize(&self, coeffs: &[Complex64], l: usize) -> Result<Complex64> {
        if coeffs.len() > self.n {
            return Err(Error::ShapeMismatch {
                context: "synthesize (coefficient count)",
                expected: self.n,
                actual: coeffs.len(),
            });
        }
        if l >= self.angles.n_theta() {
            return Err(Error::invalid(format!(
                "angle index {l} out of range 0..{}",
                self.angles.n_theta()
            )));
        }
        Ok(coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c * self.psi_at(m, l))
            .sum())
    }

    pub fn s_matrix(&self) -> SMatrix {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for m in 0..n {
            for k in 0..n {
                entries[m * n + k] = self.inner_product(self.psi_fine(m), self.dpsi_fine(k));
            }
        }
        SMatrix { n, entries }
    }

    /// Diagnostic dump: θ, Ψ₁..Ψ_N, Ψ'₁..Ψ'_N on the construction grid.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "# basis N={} refine={}", self.n, self.refine).unwrap();
        let mut header = vec!["theta".to_string()];
        header.extend((1..=self.n).map(|m| format!("psi{m}")));
        header.extend((1..=self.n).map(|m| format!("dpsi{m}")));
        writeln!(out, "{}", header.join(",")).unwrap();
        for (l, th) in self.nodes.iter().enumerate() {
            write!(out, "{th}").unwrap();
            for m in 0..self.n {
                write!(out, ",{}", self.psi_fine(m)[l]).unwrap();
            }
            for m in 0..self.n {
                write!(out, ",{}", self.dpsi_fine(m)[l]).unwrap();
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// The N×N matrix sₘₙ = ∫ Ψₘ Ψ'ₙ dθ (row m, column n).
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.entries[m * self.n + k]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Pivots of an LU factorization with partial pivoting.
    pub fn lu_pivots(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.entries.clone();
        let mut pivots = Vec::with_capacity(n);
        let mut sign = 1.0;
        for col in 0..n {
            let p = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
                .unwrap();
            if p != col {
                for c in 0..n {
                    a.swap(p * n + c, col * n + c);
                }
                sign = -sign;
            }
            let d = a[col * n + col];
            pivots.push(d);
            if d == 0.0 {
                continue;
            }
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f != 0.0 {
                    for c in col..n {
                        a[r * n + c] -= f * a[col * n + c];
                    }
                }
            }
        }
        if let Some(first) = pivots.first_mut() {
            *first *= sign;
        }
        pivots
    }

    pub fn determinant(&self) -> f64 {
        self.lu_pivots().iter().product()
    }
}
