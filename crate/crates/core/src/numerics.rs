//! Block DFT in the `U_T ⊗ I_N` layout and small dense complex linear algebra.
//!
//! A [`ComplexBlockVector`] stores `T` consecutive sub-vectors of width `N`
//! (`data[i * N + t]` is entry `t` of block `i`). The block DFT applies one
//! unitary length-`T` transform per sub-channel index `t`, so a frame of
//! `T_c` chips on `N_T` antennas becomes `T_c` frequency bins of `N_T`
//! entries each.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a Cholesky pivot is treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

/// `T` blocks of `N` complex values, block-major.
#[derive(Clone, PartialEq)]
pub struct ComplexBlockVector {
    data: Vec<Complex64>,
    blocks: usize,
    width: usize,
}

impl fmt::Debug for ComplexBlockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexBlockVector")
            .field("blocks", &self.blocks)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl ComplexBlockVector {
    pub fn new(data: Vec<Complex64>, blocks: usize, width: usize) -> Result<Self> {
        if blocks == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "block vector needs T >= 1 and N >= 1, got T = {blocks}, N = {width}"
            )));
        }
        if data.len() != blocks * width {
            return Err(Error::BadLength {
                what: "block vector data",
                expected: blocks * width,
                got: data.len(),
            });
        }
        Ok(Self {
            data,
            blocks,
            width,
        })
    }

    pub fn zeros(blocks: usize, width: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); blocks * width], blocks, width)
            .expect("zero-sized block vector")
    }

    /// Number of blocks `T`.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Sub-vector width `N`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Block `i` as a slice of `N` values.
    pub fn block(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn get(&self, block: usize, t: usize) -> Complex64 {
        self.data[block * self.width + t]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(x: &ComplexBlockVector, direction: FftDirection) -> ComplexBlockVector {
    let (blocks, width) = (x.blocks, x.width);
    if blocks == 1 {
        return x.clone();
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(blocks, direction));
    let scale = 1.0 / (blocks as f64).sqrt();
    let mut column = vec![Complex64::new(0.0, 0.0); blocks];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = vec![Complex64::new(0.0, 0.0); blocks * width];
    for t in 0..width {
        for (i, c) in column.iter_mut().enumerate() {
            *c = x.data[i * width + t];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for (f, c) in column.iter().enumerate() {
            out[f * width + t] = c * scale;
        }
    }
    ComplexBlockVector {
        data: out,
        blocks,
        width,
    }
}

/// `x_f = (U_T ⊗ I_N) x` with `(U_T)_{m,n} = e^{-j 2π m n / T} / √T`.
pub fn block_dft(x: &ComplexBlockVector) -> ComplexBlockVector {
    transform(x, FftDirection::Forward)
}

/// Inverse of [`block_dft`].
pub fn block_idft(x_f: &ComplexBlockVector) -> ComplexBlockVector {
    transform(x_f, FftDirection::Inverse)
}

fn direct(x: &ComplexBlockVector, sign: f64) -> ComplexBlockVector {
    let (blocks, width) = (x.blocks, x.width);
    let scale = 1.0 / (blocks as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); blocks * width];
    for f in 0..blocks {
        for i in 0..blocks {
            // reduce f*i mod T first so the phase argument stays small
            let k = (f * i) % blocks;
            let w = Complex64::from_polar(scale, sign * 2.0 * PI * k as f64 / blocks as f64);
            for t in 0..width {
                out[f * width + t] += x.data[i * width + t] * w;
            }
        }
    }
    ComplexBlockVector {
        data: out,
        blocks,
        width,
    }
}

/// O(T²) direct-summation block DFT. Reference path for the fast transform.
pub fn block_dft_direct(x: &ComplexBlockVector) -> ComplexBlockVector {
    direct(x, -1.0)
}

/// O(T²) direct-summation inverse block DFT.
pub fn block_idft_direct(x_f: &ComplexBlockVector) -> ComplexBlockVector {
    direct(x_f, 1.0)
}

/// Dense row-major `rows × cols` complex matrix, sized for per-bin MIMO work.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}j ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadLength {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs.data[k * rhs.cols + c];
                }
            }
        }
        out
    }

    /// `self · v` for a column vector `v`.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `selfᴴ · v`.
    pub fn adjoint_matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.rows, v.len(), "adjoint matvec shape mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c] += self[(r, c)].conj() * v[r];
            }
        }
        out
    }

    /// Gram matrix `selfᴴ · self`.
    pub fn gram(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.cols);
        for a in 0..self.cols {
            for b in a..self.cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..self.rows {
                    acc += self[(r, a)].conj() * self[(r, b)];
                }
                out[(a, b)] = acc;
                out[(b, a)] = acc.conj();
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &CMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|self[(a,b)] - conj(self[(b,a)])|`.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for a in 0..self.rows {
            for b in 0..self.cols {
                worst = worst.max((self[(a, b)] - self[(b, a)].conj()).norm());
            }
        }
        worst
    }
}

/// A square matrix known to be Hermitian (within `1e-12` relative).
#[derive(Clone, Debug, PartialEq)]
pub struct SmallHermitianMatrix(CMatrix);

impl SmallHermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::ShapeMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let tol = 1e-12 * m.frobenius_norm().max(f64::MIN_POSITIVE);
        if m.hermitian_defect() > tol {
            return Err(Error::ShapeMismatch(format!(
                "matrix is not Hermitian (defect {:.3e})",
                m.hermitian_defect()
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller built as Hermitian by construction.
    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn order(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Lower-triangular Cholesky factor `L` with `A = L Lᴴ`.
    pub fn cholesky(&self) -> Result<CMatrix> {
        let a = &self.0;
        let n = a.rows;
        let threshold = PIVOT_TOLERANCE * a.frobenius_norm();
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > threshold) {
                return Err(Error::SingularMatrix {
                    pivot: d,
                    threshold,
                });
            }
            let d = d.sqrt();
            l[(j, j)] = Complex64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }
}

/// Solves `A X = B` for Hermitian positive definite `A` by Cholesky.
pub fn hermitian_solve(a: &SmallHermitianMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.order();
    if b.rows != n {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} rows, matrix order is {n}",
            b.rows
        )));
    }
    let l = a.cholesky()?;
    let mut x = b.clone();
    for c in 0..b.cols {
        // forward: L w = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
        // backward: Lᴴ x = w
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
    }
    Ok(x)
}

/// `A⁻¹` for Hermitian positive definite `A`.
pub fn hermitian_inverse(a: &SmallHermitianMatrix) -> Result<CMatrix> {
    hermitian_solve(a, &CMatrix::identity(a.order()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn dft_of_single_block_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ComplexBlockVector::new(random_vec(&mut rng, 5), 1, 5).unwrap();
        assert_eq!(block_dft(&x), x);
        assert_eq!(block_idft(&x), x);
    }

    #[test]
    fn constant_maps_to_dc() {
        let x = ComplexBlockVector::new(vec![c(1.0, 0.0); 4], 4, 1).unwrap();
        let xf = block_dft(&x);
        let want = [c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert!(max_diff(xf.as_slice(), &want) < 1e-14);
    }

    #[test]
    fn roundtrip_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(t, n) in &[(8, 2), (64, 4), (12, 3), (7, 1)] {
            let x = ComplexBlockVector::new(random_vec(&mut rng, t * n), t, n).unwrap();
            let fast = block_dft(&x);
            let slow = block_dft_direct(&x);
            assert!(max_diff(fast.as_slice(), slow.as_slice()) < 1e-10, "T={t}");
            let back = block_idft(&fast);
            assert!(max_diff(back.as_slice(), x.as_slice()) < 1e-12, "T={t}");
            let back_slow = block_idft_direct(&slow);
            assert!(max_diff(back_slow.as_slice(), x.as_slice()) < 1e-12);
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = ComplexBlockVector::new(random_vec(&mut rng, 32), 16, 2).unwrap();
        let xf = block_dft(&x);
        let rel = (xf.norm_sqr() - x.norm_sqr()).abs() / x.norm_sqr();
        assert!(rel < 1e-12);
        let xt = block_idft(&x);
        assert!((xt.norm_sqr() - x.norm_sqr()).abs() / x.norm_sqr() < 1e-12);
    }

    #[test]
    fn block_vector_rejects_bad_shape() {
        assert!(ComplexBlockVector::new(vec![c(0.0, 0.0); 5], 2, 2).is_err());
        assert!(ComplexBlockVector::new(vec![], 0, 2).is_err());
    }

    proptest! {
        #[test]
        fn dft_is_linear(seed in any::<u64>(), alpha_re in -2.0..2.0f64, beta_im in -2.0..2.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (t, n) = (16, 2);
            let x = random_vec(&mut rng, t * n);
            let y = random_vec(&mut rng, t * n);
            let alpha = c(alpha_re, 0.3);
            let beta = c(-0.7, beta_im);
            let combo: Vec<_> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = block_dft(&ComplexBlockVector::new(combo, t, n).unwrap());
            let fx = block_dft(&ComplexBlockVector::new(x, t, n).unwrap());
            let fy = block_dft(&ComplexBlockVector::new(y, t, n).unwrap());
            let rhs: Vec<_> = fx.as_slice().iter().zip(fy.as_slice()).map(|(a, b)| alpha * a + beta * b).collect();
            prop_assert!(max_diff(lhs.as_slice(), &rhs) < 1e-12);
        }

        #[test]
        fn dft_preserves_inner_products(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (t, n) = (32, 2);
            let x = random_vec(&mut rng, t * n);
            let y = random_vec(&mut rng, t * n);
            let ip = |a: &[Complex64], b: &[Complex64]| -> Complex64 { a.iter().zip(b).map(|(p, q)| p.conj() * q).sum() };
            let before = ip(&x, &y);
            let fx = block_dft(&ComplexBlockVector::new(x.clone(), t, n).unwrap());
            let fy = block_dft(&ComplexBlockVector::new(y.clone(), t, n).unwrap());
            let after = ip(fx.as_slice(), fy.as_slice());
            let scale = ip(&x, &x).re.sqrt() * ip(&y, &y).re.sqrt();
            prop_assert!((before - after).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = CMatrix::from_vec(2, 2, random_vec(&mut rng, 4)).unwrap();
        let eye = SmallHermitianMatrix::new(CMatrix::identity(2)).unwrap();
        let x = hermitian_solve(&eye, &b).unwrap();
        assert!(max_diff(x.as_slice(), b.as_slice()) < 1e-15);

        let a = SmallHermitianMatrix::new(CMatrix::from_diag(&[2.0, 4.0])).unwrap();
        let x = hermitian_solve(&a, &CMatrix::identity(2)).unwrap();
        let want = CMatrix::from_diag(&[0.5, 0.25]);
        assert!(max_diff(x.as_slice(), want.as_slice()) < 1e-15);
    }

    #[test]
    fn solve_random_pd_has_small_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = CMatrix::from_vec(4, 4, random_vec(&mut rng, 16)).unwrap();
            let a = m.gram().add(&CMatrix::identity(4));
            let b = CMatrix::from_vec(4, 4, random_vec(&mut rng, 16)).unwrap();
            let a = SmallHermitianMatrix::new(a).unwrap();
            let x = hermitian_solve(&a, &b).unwrap();
            let resid = a.matrix().matmul(&x).sub(&b).frobenius_norm() / b.frobenius_norm();
            assert!(resid < 1e-10, "residual {resid}");
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)])
            .unwrap();
        let a = SmallHermitianMatrix::new(m).unwrap();
        assert!(matches!(
            hermitian_solve(&a, &CMatrix::identity(2)),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(0.5, 0.1), c(0.5, 0.1), c(1.0, 0.0)])
            .unwrap();
        assert!(SmallHermitianMatrix::new(m).is_err());
    }
}
