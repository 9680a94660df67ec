//! Hermitian band matrices: spectra by band-to-tridiagonal reduction and
//! shifted solves for inverse iteration.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use super::{pool_clusters, tridiagonal, HermitianMatrix, CLUSTER_TOLERANCE};
use crate::{Error, Result};

/// Hermitian matrix with `H[i][j] = 0` for `|i - j| > bandwidth`, stored as
/// its lower band.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    order: usize,
    bandwidth: usize,
    /// `lower[c * (bandwidth + 1) + d] = H[c + d][c]`.
    lower: Vec<Complex64>,
}

impl BandMatrix {
    /// Builds the matrix from its lower band. `entry(i, j)` is only called
    /// with `i >= j` and `i - j <= bandwidth`; diagonal imaginary parts are
    /// dropped.
    pub fn from_lower_fn(order: usize, bandwidth: usize, mut entry: impl FnMut(usize, usize) -> Complex64) -> Self {
        let stride = bandwidth + 1;
        let mut lower = vec![Complex64::new(0.0, 0.0); order * stride];
        for c in 0..order {
            for d in 0..stride {
                if c + d < order {
                    let mut z = entry(c + d, c);
                    if d == 0 {
                        z.im = 0.0;
                    }
                    lower[c * stride + d] = z;
                }
            }
        }
        Self { order, bandwidth, lower }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            let d = i - j;
            if d > self.bandwidth {
                Complex64::new(0.0, 0.0)
            } else {
                self.lower[j * (self.bandwidth + 1) + d]
            }
        } else {
            self.get(j, i).conj()
        }
    }

    pub fn is_real(&self) -> bool {
        self.lower.iter().all(|z| z.im == 0.0)
    }

    pub fn to_dense(&self) -> HermitianMatrix {
        HermitianMatrix::from_fn(self.order, |i, j| self.get(i, j)).expect("band matrix is Hermitian by construction")
    }

    /// Row sums for Gershgorin discs: `(center, radius)` per row.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.order;
        let w = self.bandwidth;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let center = self.get(i, i).re;
            let mut radius = 0.0;
            for j in i.saturating_sub(w)..(i + w + 1).min(n) {
                if j != i {
                    radius += self.get(i, j).norm();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        (lo, hi)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.order;
        let w = self.bandwidth;
        (0..n)
            .map(|i| {
                (i.saturating_sub(w)..(i + w + 1).min(n))
                    .map(|j| self.get(i, j) * x[j])
                    .sum()
            })
            .collect()
    }

    /// Solves `(H - shift I) x = rhs` by banded Gaussian elimination with
    /// partial pivoting. An exactly zero pivot is replaced by a tiny multiple
    /// of the matrix scale, which is what inverse iteration wants.
    pub fn solve_shifted(&self, shift: f64, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.order;
        let w = self.bandwidth;
        let width = 3 * w + 1;
        let zero = Complex64::new(0.0, 0.0);
        // Row i stores columns i - w ..= i + 2w at offset col + w - i.
        let mut a = vec![zero; n * width];
        let idx = |r: usize, c: usize| r * width + (c + w - r);
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in i.saturating_sub(w)..(i + w + 1).min(n) {
                let mut z = self.get(i, j);
                if i == j {
                    z -= shift;
                }
                scale = scale.max(z.norm());
                a[idx(i, j)] = z;
            }
        }
        let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut b = rhs.to_vec();
        for k in 0..n {
            let last = (k + w).min(n - 1);
            let right = (k + 2 * w).min(n - 1);
            let mut piv = k;
            for r in k + 1..=last {
                if a[idx(r, k)].norm() > a[idx(piv, k)].norm() {
                    piv = r;
                }
            }
            if piv != k {
                for c in k..=right {
                    a.swap(idx(k, c), idx(piv, c));
                }
                b.swap(k, piv);
            }
            if a[idx(k, k)].norm() == 0.0 {
                a[idx(k, k)] = Complex64::new(tiny, 0.0);
            }
            let pivot = a[idx(k, k)];
            for r in k + 1..=last {
                let l = a[idx(r, k)] / pivot;
                if l == zero {
                    continue;
                }
                a[idx(r, k)] = zero;
                for c in k + 1..=right {
                    let u = a[idx(k, c)];
                    a[idx(r, c)] -= l * u;
                }
                let bk = b[k];
                b[r] -= l * bk;
            }
        }
        let mut x = vec![zero; n];
        for k in (0..n).rev() {
            let right = (k + 2 * w).min(n - 1);
            let mut acc = b[k];
            for c in k + 1..=right {
                acc -= a[idx(k, c)] * x[c];
            }
            x[k] = acc / a[idx(k, k)];
        }
        x
    }

    /// Unit eigenvector for an eigenvalue known to high accuracy, by three
    /// steps of inverse iteration from a fixed start vector.
    pub fn eigenvector_near(&self, eigenvalue: f64) -> Vec<Complex64> {
        let n = self.order;
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + 0.5 * ((i * 7919) % 13) as f64 / 13.0, 0.0))
            .collect();
        normalize(&mut x);
        for _ in 0..3 {
            x = self.solve_shifted(eigenvalue, &x);
            normalize(&mut x);
        }
        x
    }
}

fn normalize(x: &mut [Complex64]) {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|z| *z /= norm);
    }
}

/// Eigenvalues of a band matrix plus spectral weights for selected basis
/// vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct BandSpectrum {
    /// Nonincreasing.
    pub values: Vec<f64>,
    /// `weights[t][k] = |<v_k, e_{track[t]}>|^2`, pooled over clusters.
    pub weights: Vec<Vec<f64>>,
}

/// Eigenvalues of `band` and the spectral weights of the 0-based basis
/// indices in `track`.
pub fn band_spectrum(band: &BandMatrix, track: &[usize]) -> Result<BandSpectrum> {
    let n = band.order();
    if let Some(&bad) = track.iter().find(|&&t| t >= n) {
        return Err(Error::IndexOutOfRange { index: bad + 1, order: n });
    }
    if n == 0 {
        return Ok(BandSpectrum { values: Vec::new(), weights: vec![Vec::new(); track.len()] });
    }
    let out = if band.is_real() {
        let rb = RealBand::from_fn(n, band.bandwidth(), |i, j| band.get(i, j).re);
        real_spectrum(rb, band.bandwidth(), track)?
    } else {
        // [[Re, -Im], [Im, Re]] interleaved: every eigenvalue appears twice and
        // the weight of e_i is split over the pair.
        let w2 = 2 * band.bandwidth() + 1;
        let rb = RealBand::from_fn(2 * n, w2, |i, j| {
            let z = band.get(i / 2, j / 2);
            match (i % 2, j % 2) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        });
        let doubled: Vec<usize> = track.iter().map(|&t| 2 * t).collect();
        let s = real_spectrum(rb, w2, &doubled)?;
        let values = (0..n).map(|k| 0.5 * (s.values[2 * k] + s.values[2 * k + 1])).collect();
        let weights = s
            .weights
            .iter()
            .map(|w| (0..n).map(|k| w[2 * k] + w[2 * k + 1]).collect())
            .collect();
        BandSpectrum { values, weights }
    };
    let norm = out.values.first().map_or(0.0, |a| a.abs()).max(out.values.last().map_or(0.0, |b| b.abs()));
    let weights = out.weights.iter().map(|w| pool_clusters(&out.values, w, CLUSTER_TOLERANCE * norm)).collect();
    Ok(BandSpectrum { values: out.values, weights })
}

fn real_spectrum(mut rb: RealBand, bandwidth: usize, track: &[usize]) -> Result<BandSpectrum> {
    let n = rb.order;
    let mut tracked: Vec<Vec<f64>> = track
        .iter()
        .map(|&t| {
            let mut y = vec![0.0; n];
            y[t] = 1.0;
            y
        })
        .collect();
    rb.reduce_to_tridiagonal(bandwidth, &mut tracked);
    let mut diag: Vec<f64> = (0..n).map(|i| rb.get(i, i)).collect();
    let mut off: Vec<f64> = (0..n).map(|i| if i + 1 < n { rb.get(i + 1, i) } else { 0.0 }).collect();
    tridiagonal::implicit_ql(&mut diag, &mut off, &mut tracked)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let weights = tracked.iter().map(|u| order.iter().map(|&i| u[i] * u[i]).collect()).collect();
    Ok(BandSpectrum { values, weights })
}

/// Real symmetric band storage with one extra diagonal of room for the bulge
/// created during reduction.
struct RealBand {
    order: usize,
    stored: usize,
    lower: Vec<f64>,
}

impl RealBand {
    fn from_fn(order: usize, bandwidth: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let stored = bandwidth + 1;
        let stride = stored + 1;
        let mut lower = vec![0.0; order * stride];
        for c in 0..order {
            for d in 0..=bandwidth {
                if c + d < order {
                    lower[c * stride + d] = entry(c + d, c);
                }
            }
        }
        Self { order, stored, lower }
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        let d = r - c;
        if d > self.stored {
            0.0
        } else {
            self.lower[c * (self.stored + 1) + d]
        }
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        let d = r - c;
        if d > self.stored {
            debug_assert!(v == 0.0, "fill outside band storage at ({r}, {c})");
            return;
        }
        self.lower[c * (self.stored + 1) + d] = v;
    }

    /// Similarity by the Givens rotation acting on rows/columns `k, k + 1`:
    /// new row k = c row_k + s row_{k+1}, new row k+1 = -s row_k + c row_{k+1}.
    fn rotate(&mut self, k: usize, c: f64, s: f64) {
        let n = self.order;
        let lo = k.saturating_sub(self.stored);
        let hi = (k + 1 + self.stored).min(n - 1);
        for m in lo..=hi {
            if m == k || m == k + 1 {
                continue;
            }
            let x = self.get(m, k);
            let y = self.get(m, k + 1);
            if x == 0.0 && y == 0.0 {
                continue;
            }
            self.set(m, k, c * x + s * y);
            self.set(m, k + 1, -s * x + c * y);
        }
        let x = self.get(k, k);
        let y = self.get(k + 1, k + 1);
        let z = self.get(k + 1, k);
        let cs = c * s;
        self.set(k, k, c * c * x + 2.0 * cs * z + s * s * y);
        self.set(k + 1, k + 1, s * s * x - 2.0 * cs * z + c * c * y);
        self.set(k + 1, k, cs * (y - x) + (c * c - s * s) * z);
    }

    /// Rutishauser-style reduction: annihilate each column's band entries
    /// from the outside in and chase the resulting bulge off the end.
    fn reduce_to_tridiagonal(&mut self, bandwidth: usize, tracked: &mut [Vec<f64>]) {
        let n = self.order;
        if bandwidth < 2 || n < 3 {
            return;
        }
        for j in 0..n - 2 {
            for d in (2..=bandwidth).rev() {
                if j + d >= n {
                    continue;
                }
                let mut col = j;
                let mut t = j + d;
                loop {
                    let b = self.get(t, col);
                    if b == 0.0 {
                        break;
                    }
                    let a = self.get(t - 1, col);
                    let r = a.hypot(b);
                    let (c, s) = (a / r, b / r);
                    self.rotate(t - 1, c, s);
                    self.set(t, col, 0.0);
                    self.set(t - 1, col, r);
                    for y in tracked.iter_mut() {
                        let (yk, yk1) = (y[t - 1], y[t]);
                        y[t - 1] = c * yk + s * yk1;
                        y[t] = -s * yk + c * yk1;
                    }
                    if t + bandwidth >= n {
                        break;
                    }
                    col = t - 1;
                    t += bandwidth;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{eigh, spectral_weights};
    use rand::{Rng, SeedableRng};

    fn random_band(n: usize, w: usize, complex: bool, rng: &mut impl Rng) -> BandMatrix {
        let entries: Vec<Complex64> = (0..n * (w + 1))
            .map(|_| {
                Complex64::new(rng.gen_range(-1.0..1.0), if complex { rng.gen_range(-1.0..1.0) } else { 0.0 })
            })
            .collect();
        BandMatrix::from_lower_fn(n, w, |i, j| entries[j * (w + 1) + (i - j)])
    }

    #[test]
    fn matches_dense_jacobi() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for &(n, w, complex) in &[
            (1, 0, false),
            (2, 1, false),
            (7, 0, false),
            (9, 1, false),
            (17, 2, false),
            (30, 3, false),
            (25, 6, false),
            (12, 11, false),
            (20, 2, true),
            (15, 4, true),
        ] {
            let band = random_band(n, w, complex, &mut rng);
            let dense = band.to_dense();
            let jac = eigh(&dense).unwrap();
            let track: Vec<usize> = (0..n).step_by(3).collect();
            let s = band_spectrum(&band, &track).unwrap();
            for (a, b) in s.values.iter().zip(jac.values()) {
                assert!((a - b).abs() < 1e-11, "n={n} w={w}: {a} vs {b}");
            }
            for (t, &i) in track.iter().enumerate() {
                let want = spectral_weights(&jac, i + 1).unwrap();
                for (a, b) in s.weights[t].iter().zip(&want) {
                    assert!((a - b).abs() < 1e-9, "weight n={n} w={w} i={i}: {a} vs {b}");
                }
                let total: f64 = s.weights[t].iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvector() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let band = random_band(40, 3, false, &mut rng);
        let s = band_spectrum(&band, &[]).unwrap();
        let lambda = s.values[4];
        let v = band.eigenvector_near(lambda);
        let hv = band.mul_vec(&v);
        let res: f64 = hv.iter().zip(&v).map(|(a, b)| (a - b * lambda).norm_sqr()).sum::<f64>().sqrt();
        assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn solve_matches_multiplication() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let band = random_band(33, 2, true, &mut rng);
        let x: Vec<Complex64> = (0..33).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut rhs = band.mul_vec(&x);
        rhs.iter_mut().zip(&x).for_each(|(r, xi)| *r -= xi * 0.3);
        let back = band.solve_shifted(0.3, &rhs);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-8);
        }
    }
}
