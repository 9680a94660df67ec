//! Hermitian eigendecomposition, singular values and spectral weights.
//!
//! Two kernels live here. [`eigh`] runs cyclic Jacobi rotations on a dense
//! complex Hermitian matrix and returns the full decomposition; it is used for
//! symbol samples and small sections. [`band_spectrum`] reduces a Hermitian
//! band matrix to tridiagonal form with Givens rotations and finishes with
//! implicit QL, carrying only the basis vectors whose spectral weights are
//! requested. Large finite sections go through the band path.
//!
//! Eigenvalues are always reported in nonincreasing order.

mod band;
mod jacobi;
mod tridiagonal;

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::{Error, Result};

pub use band::{band_spectrum, BandMatrix, BandSpectrum};
pub use jacobi::{MAX_SWEEPS, TOLERANCE};

/// Eigenvalues closer than this fraction of the spectral norm are treated as
/// one eigenspace when reporting spectral weights.
pub const CLUSTER_TOLERANCE: f64 = 1e-9;

/// A dense complex Hermitian matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    order: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(order: usize) -> Self {
        Self { order, data: vec![Complex64::new(0.0, 0.0); order * order] }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.data[i * order + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from an entry rule and checks that it is Hermitian.
    pub fn from_fn(order: usize, mut entry: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut data = Vec::with_capacity(order * order);
        for i in 0..order {
            for j in 0..order {
                data.push(entry(i, j));
            }
        }
        Self::from_row_major(order, data)
    }

    pub fn from_real_fn(order: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_fn(order, |i, j| Complex64::new(entry(i, j), 0.0))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Wraps row-major data. Rejects non-finite entries and asymmetry larger
    /// than [`TOLERANCE`] relative to the Frobenius norm, then symmetrizes.
    pub fn from_row_major(order: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != order * order {
            return Err(Error::Contract(alloc::format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("matrix has non-finite entries".into()));
        }
        let mut m = Self { order, data };
        let asym = m.hermitian_defect();
        let scale = m.frobenius_norm();
        if asym > TOLERANCE * scale {
            return Err(Error::Contract(alloc::format!(
                "matrix is not Hermitian: max |H - H^*| = {asym:e}"
            )));
        }
        m.symmetrize();
        Ok(m)
    }

    fn symmetrize(&mut self) {
        let n = self.order;
        for i in 0..n {
            let d = self.data[i * n + i];
            self.data[i * n + i] = Complex64::new(d.re, 0.0);
            for j in i + 1..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.order + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|H - H^*|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.order;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// The leading `m x m` principal submatrix.
    pub fn leading(&self, m: usize) -> Self {
        let m = m.min(self.order);
        let mut out = Self::zeros(m);
        for i in 0..m {
            out.data[i * m..(i + 1) * m].copy_from_slice(&self.data[i * self.order..i * self.order + m]);
        }
        out
    }

    /// The principal submatrix on the given (sorted or not) index list.
    pub fn principal(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        let mut out = Self::zeros(m);
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                out.data[a * m + b] = self.get(i, j);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.order != other.order {
            return Err(Error::Contract("order mismatch".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { order: self.order, data })
    }

    pub fn add_diagonal(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.order {
            out.data[i * self.order + i] += shift;
        }
        out
    }

    /// `H^* H` (equal to `H^2` for Hermitian `H`).
    pub fn gram(&self) -> Self {
        let n = self.order;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.data[k * n + i].conj() * self.data[k * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
        out.symmetrize();
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.order;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

/// Eigenvalues in nonincreasing order with orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    values: Vec<f64>,
    /// Column-major: column `k` is the eigenvector of `values[k]`.
    vectors: Vec<Complex64>,
}

impl EigenDecomposition {
    pub(crate) fn new(values: Vec<f64>, vectors: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len() * values.len(), vectors.len());
        Self { values, vectors }
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `lambda_k`, top-indexed from 1.
    pub fn top(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    /// `lambda_{n+1-k}`, bottom-indexed from 1.
    pub fn bottom(&self, k: usize) -> f64 {
        self.values[self.values.len() - k]
    }

    /// Eigenvector of the `k`-th largest eigenvalue (0-based).
    pub fn vector(&self, k: usize) -> &[Complex64] {
        let n = self.order();
        &self.vectors[k * n..(k + 1) * n]
    }

    pub fn spectral_norm(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => a.abs().max(b.abs()),
            _ => 0.0,
        }
    }

    /// `V diag(lambda) V^*`.
    pub fn reconstruct(&self) -> HermitianMatrix {
        let n = self.order();
        let mut out = HermitianMatrix::zeros(n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let v = self.vector(k);
            for i in 0..n {
                let vi = v[i] * lambda;
                for j in 0..n {
                    out.data[i * n + j] += vi * v[j].conj();
                }
            }
        }
        out
    }
}

/// Full eigendecomposition by cyclic Jacobi rotations.
pub fn eigh(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    jacobi::cyclic_jacobi(h)
}

/// Singular values of a Hermitian matrix: the sorted moduli of its
/// eigenvalues. `s_1` is the spectral norm.
pub fn singular_values(h: &HermitianMatrix) -> Result<Vec<f64>> {
    let d = eigh(h)?;
    Ok(singular_values_of(d.values()))
}

pub(crate) fn singular_values_of(values: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral weights `w_k = <Q_k e_i, e_i>` for the 1-based basis index `i`.
///
/// Within a cluster of numerically equal eigenvalues the weight of the whole
/// eigenspace is split evenly among its members, so the result does not
/// depend on the arbitrary basis the solver picked inside the eigenspace.
pub fn spectral_weights(decomp: &EigenDecomposition, basis_index: usize) -> Result<Vec<f64>> {
    let n = decomp.order();
    if basis_index == 0 || basis_index > n {
        return Err(Error::IndexOutOfRange { index: basis_index, order: n });
    }
    let i = basis_index - 1;
    let raw: Vec<f64> = (0..n).map(|k| decomp.vector(k)[i].norm_sqr()).collect();
    Ok(pool_clusters(decomp.values(), &raw, CLUSTER_TOLERANCE * decomp.spectral_norm()))
}

/// Evenly redistributes `weights` inside runs of eigenvalues whose
/// consecutive differences are below `tol`. `values` must be sorted.
pub(crate) fn pool_clusters(values: &[f64], weights: &[f64], tol: f64) -> Vec<f64> {
    let mut out = weights.to_vec();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && (values[end - 1] - values[end]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            let total: f64 = weights[start..end].iter().sum();
            let share = total / (end - start) as f64;
            out[start..end].iter_mut().for_each(|w| *w = share);
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn two_by_two_with_nonnegative_coupling() {
        // [[b, 1+f], [1+f, b]] has eigenvalues b+1+f and b-1-f.
        for &(b, f) in &[(0.0, 0.0), (2.5, 0.3), (-1.0, 4.0)] {
            let h = HermitianMatrix::from_real_fn(2, |i, j| if i == j { b } else { 1.0 + f }).unwrap();
            let d = eigh(&h).unwrap();
            assert!((d.top(1) - (b + 1.0 + f)).abs() < 1e-13);
            assert!((d.top(2) - (b - 1.0 - f)).abs() < 1e-13);
        }
    }

    #[test]
    fn identity_is_unitary() {
        let d = eigh(&HermitianMatrix::identity(5)).unwrap();
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        for k in 0..5 {
            for l in 0..5 {
                let dot: Complex64 = d.vector(k).iter().zip(d.vector(l)).map(|(a, b)| a.conj() * b).sum();
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((dot - c(want)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let s = singular_values(&HermitianMatrix::from_diagonal(&[3.0, -5.0, 1.0])).unwrap();
        assert_eq!(s, vec![5.0, 3.0, 1.0]);
        let z = singular_values(&HermitianMatrix::zeros(4)).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weights_of_diagonal_and_swap() {
        let d = eigh(&HermitianMatrix::from_diagonal(&[2.0, 7.0, -1.0])).unwrap();
        let w = spectral_weights(&d, 1).unwrap();
        // basis vector e_1 carries eigenvalue 2, which is second largest.
        assert_eq!(w.iter().map(|x| (x * 1e12).round()).collect::<Vec<_>>(), vec![0.0, 1e12, 0.0]);

        let swap = HermitianMatrix::from_real_fn(2, |i, j| if i == j { 0.0 } else { 1.0 }).unwrap();
        let d = eigh(&swap).unwrap();
        let w = spectral_weights(&d, 1).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14);
        let avg: f64 = w.iter().zip(d.values()).map(|(w, l)| w * l).sum();
        assert!(avg.abs() < 1e-14);
    }

    #[test]
    fn weights_are_pooled_over_degenerate_eigenspace() {
        let d = eigh(&HermitianMatrix::identity(4)).unwrap();
        let w = spectral_weights(&d, 3).unwrap();
        assert!(w.iter().all(|&x| (x - 0.25).abs() < 1e-14));
    }

    #[test]
    fn index_out_of_range() {
        let d = eigh(&HermitianMatrix::identity(2)).unwrap();
        assert_eq!(spectral_weights(&d, 0).unwrap_err(), Error::IndexOutOfRange { index: 0, order: 2 });
        assert!(spectral_weights(&d, 3).is_err());
    }

    #[test]
    fn rejects_non_hermitian() {
        let data = vec![c(1.0), c(2.0), c(0.0), c(1.0)];
        assert!(matches!(HermitianMatrix::from_row_major(2, data), Err(Error::Contract(_))));
    }
}
