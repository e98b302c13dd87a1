//! Compressed sparse complex systems and a banded LU factorization with
//! partial pivoting for the forward Helmholtz solves.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative residual a forward solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// Square complex matrix in CSR layout together with a right-hand side.
#[derive(Debug, Clone)]
pub struct SparseComplexSystem {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl SparseComplexSystem {
    /// Builds the CSR layout from (row, col, value) triplets; duplicate
    /// positions are summed.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
        rhs: Vec<Complex64>,
    ) -> Result<Self> {
        if rhs.len() != dim {
            return Err(Error::ShapeMismatch {
                context: "sparse system right-hand side",
                expected: dim,
                actual: rhs.len(),
            });
        }
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(Error::invalid(format!("entry ({r},{c}) outside a {dim}x{dim} system")));
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { dim, row_ptr, cols, vals, rhs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn rhs(&self) -> &[Complex64] {
        &self.rhs
    }

    pub fn set_rhs(&mut self, rhs: Vec<Complex64>) -> Result<()> {
        if rhs.len() != self.dim {
            return Err(Error::ShapeMismatch {
                context: "sparse system right-hand side",
                expected: self.dim,
                actual: rhs.len(),
            });
        }
        self.rhs = rhs;
        Ok(())
    }

    /// Column/value pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// ‖Ax − b‖₂ / ‖b‖₂ (absolute norm when b = 0).
    pub fn relative_residual(&self, x: &[Complex64]) -> f64 {
        let ax = self.matvec(x);
        let num: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = self.rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }

    /// Lower and upper bandwidths of the sparsity pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.dim {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn factor(&self) -> Result<BandedLu> {
        BandedLu::factor(self)
    }

    /// Direct solve with a residual check against [`SOLVE_TOLERANCE`].
    pub fn solve(&self) -> Result<Vec<Complex64>> {
        let lu = self.factor()?;
        let x = lu.solve(&self.rhs);
        let res = self.relative_residual(&x);
        if !(res <= SOLVE_TOLERANCE) {
            return Err(Error::NonConvergence { iterations: 1, residual: res, target: SOLVE_TOLERANCE });
        }
        Ok(x)
    }
}

/// LU factors of a banded matrix, row interchanges applied as in LAPACK's
/// `gbtrf`: the multipliers of each column are kept apart from U so later
/// swaps never move them.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row r holds columns r−kl ..= r+kl+ku.
    width: usize,
    band: Vec<Complex64>,
    lower: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(system: &SparseComplexSystem) -> Result<Self> {
        let n = system.dim();
        let (kl, ku) = system.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut band = vec![Complex64::default(); n * width];
        for r in 0..n {
            for (c, v) in system.row(r) {
                band[r * width + c + kl - r] = v;
            }
        }
        let at = |r: usize, c: usize| r * width + c + kl - r;
        let mut lower = vec![Complex64::default(); n * kl.max(1)];
        let mut pivots = vec![0usize; n];

        for col in 0..n {
            let rmax = (col + kl).min(n - 1);
            let cmax = (col + kl + ku).min(n - 1);
            let mut p = col;
            let mut best = band[at(col, col)].norm();
            for r in col + 1..=rmax {
                let v = band[at(r, col)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular { column: col });
            }
            pivots[col] = p;
            if p != col {
                for c in col..=cmax {
                    band.swap(at(p, c), at(col, c));
                }
            }
            let d = band[at(col, col)];
            for r in col + 1..=rmax {
                let f = band[at(r, col)] / d;
                lower[col * kl + (r - col - 1)] = f;
                band[at(r, col)] = Complex64::default();
                if f != Complex64::default() {
                    let (src, dst) = (at(col, col + 1), at(r, col + 1));
                    let len = cmax - col;
                    for t in 0..len {
                        let u = band[src + t];
                        band[dst + t] -= f * u;
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, width, band, lower, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        let at = |r: usize, c: usize| r * width + c + kl - r;
        let mut x = rhs.to_vec();
        for col in 0..n {
            let p = self.pivots[col];
            if p != col {
                x.swap(p, col);
            }
            let xc = x[col];
            for r in col + 1..=(col + kl).min(n - 1) {
                x[r] -= self.lower[col * kl + (r - col - 1)] * xc;
            }
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in r + 1..=(r + kl + ku).min(n - 1) {
                s -= self.band[at(r, c)] * x[c];
            }
            x[r] = s / self.band[at(r, r)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed() {
        let s = SparseComplexSystem::from_triplets(
            2,
            vec![(0, 0, c(1.0, 0.0)), (1, 1, c(2.0, 0.0)), (0, 0, c(0.5, 1.0))],
            vec![c(0.0, 0.0); 2],
        )
        .unwrap();
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.get(0, 0), c(1.5, 1.0));
        assert_eq!(s.get(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn identity_system_returns_rhs() {
        let b: Vec<Complex64> = (0..7).map(|i| c(i as f64, -(i as f64) * 0.5)).collect();
        let s = SparseComplexSystem::from_triplets(7, (0..7).map(|i| (i, i, c(1.0, 0.0))).collect(), b.clone()).unwrap();
        assert_eq!(s.solve().unwrap(), b);
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let trip = vec![(0, 0, c(2.0, 0.0)), (0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 1.0)), (1, 1, c(3.0, 0.0))];
        let s = SparseComplexSystem::from_triplets(2, trip, vec![c(0.0, 0.0); 2]).unwrap();
        assert!(s.solve().unwrap().iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn singular_matrix_is_reported() {
        let trip = vec![(0, 0, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 1, c(4.0, 0.0))];
        let s = SparseComplexSystem::from_triplets(2, trip, vec![c(1.0, 0.0); 2]).unwrap();
        assert!(matches!(s.solve(), Err(Error::Singular { column: 1 })));
    }

    fn dense_oracle(n: usize, trip: &[(usize, usize, Complex64)], b: &[Complex64]) -> Vec<Complex64> {
        let mut a = nalgebra::DMatrix::<Complex64>::zeros(n, n);
        for &(r, col, v) in trip {
            a[(r, col)] += v;
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = a.lu().solve(&rhs).unwrap();
        x.iter().copied().collect()
    }

    #[test]
    fn random_banded_system_matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n: usize = 50;
        let mut trip = Vec::new();
        for r in 0..n {
            for c_ in r.saturating_sub(4)..(r + 6).min(n) {
                // weak diagonal so pivoting is exercised
                let scale = if r == c_ { 0.1 } else { 1.0 };
                trip.push((r, c_, scale * c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            }
        }
        let b: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let s = SparseComplexSystem::from_triplets(n, trip.clone(), b.clone()).unwrap();
        let x = s.solve().unwrap();
        let oracle = dense_oracle(n, &trip, &b);
        let err = x.iter().zip(&oracle).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let scale = oracle.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-8 * scale, "{err}");
    }

    #[test]
    fn random_dense_system_matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n: usize = 50;
        let mut trip = Vec::new();
        for r in 0..n {
            for c_ in 0..n {
                trip.push((r, c_, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            }
        }
        let b: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), 0.0)).collect();
        let s = SparseComplexSystem::from_triplets(n, trip.clone(), b.clone()).unwrap();
        let x = s.solve().unwrap();
        let oracle = dense_oracle(n, &trip, &b);
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).norm() <= 1e-8 * (1.0 + q.norm()));
        }
    }
}
