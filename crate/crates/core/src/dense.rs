//! Small dense complex kernels on row-major N×N blocks.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// y += A x
#[inline]
pub fn matvec_add(a: &[Complex64], x: &[Complex64], y: &mut [Complex64]) {
    let n = x.len();
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        let mut s = Complex64::default();
        for (aij, xj) in row.iter().zip(x) {
            s += aij * xj;
        }
        *yi += s;
    }
}

/// Conjugate transpose of a square block.
pub fn adjoint(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j].conj();
        }
    }
    out
}

/// A square block kept in the narrowest of three forms. The coupling blocks
/// of a plane-wave problem are exactly real (S) or exactly imaginary (B), and
/// a real×complex product is a quarter of the work of a complex one.
#[derive(Debug, Clone)]
pub enum Block {
    Real(Vec<f64>),
    /// Stores the imaginary parts; the block is i times this.
    Imag(Vec<f64>),
    General(Vec<Complex64>),
}

impl Block {
    pub fn classify(a: &[Complex64]) -> Self {
        if a.iter().all(|v| v.im == 0.0) {
            Block::Real(a.iter().map(|v| v.re).collect())
        } else if a.iter().all(|v| v.re == 0.0) {
            Block::Imag(a.iter().map(|v| v.im).collect())
        } else {
            Block::General(a.to_vec())
        }
    }

    pub fn adjoint(&self, n: usize) -> Self {
        let transpose = |a: &[f64], sign: f64| {
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    out[j * n + i] = sign * a[i * n + j];
                }
            }
            out
        };
        match self {
            Block::Real(a) => Block::Real(transpose(a, 1.0)),
            Block::Imag(a) => Block::Imag(transpose(a, -1.0)),
            Block::General(a) => Block::General(adjoint(a, n)),
        }
    }

    /// y += A x
    #[inline]
    pub fn matvec_add(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = x.len();
        match self {
            Block::General(a) => matvec_add(a, x, y),
            Block::Real(a) | Block::Imag(a) => {
                let imag = matches!(self, Block::Imag(_));
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &a[i * n..(i + 1) * n];
                    let (mut re, mut im) = (0.0, 0.0);
                    for (aij, xj) in row.iter().zip(x) {
                        re += aij * xj.re;
                        im += aij * xj.im;
                    }
                    *yi += if imag { Complex64::new(-im, re) } else { Complex64::new(re, im) };
                }
            }
        }
    }
}

/// C = Aᴴ A
pub fn gram(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); n * n];
    for k in 0..n {
        let row = &a[k * n..(k + 1) * n];
        for i in 0..n {
            let ci = row[i].conj();
            if ci == Complex64::default() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += ci * row[j];
            }
        }
    }
    out
}

/// Inverse of a Hermitian positive definite block via Cholesky.
pub fn hpd_inverse(a: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    // lower factor L with A = L Lᴴ
    let mut l = vec![Complex64::default(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::Singular { column: j });
        }
        let d = d.sqrt();
        l[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / d;
        }
    }
    // invert L (lower triangular), then A⁻¹ = L⁻ᴴ L⁻¹
    let mut li = vec![Complex64::default(); n * n];
    for j in 0..n {
        li[j * n + j] = Complex64::new(1.0, 0.0) / l[j * n + j];
        for i in j + 1..n {
            let mut s = Complex64::default();
            for k in j..i {
                s -= l[i * n + k] * li[k * n + j];
            }
            li[i * n + j] = s / l[i * n + i];
        }
    }
    let mut inv = vec![Complex64::default(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = Complex64::default();
            for k in i..n {
                s += li[k * n + i].conj() * li[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s.conj();
        }
    }
    Ok(inv)
}
