use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use super::{EigenDecomposition, HermitianMatrix};
use crate::{Error, Result};

/// Convergence target, relative to the Frobenius norm.
pub const TOLERANCE: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 30;

/// Cyclic-by-row complex Jacobi. Sweeps until the off-diagonal mass drops
/// below `1e-15 ||H||_F`; after [`MAX_SWEEPS`] a residual up to
/// `TOLERANCE ||H||_F` is still accepted.
pub(super) fn cyclic_jacobi(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = h.order();
    let mut a = h.clone();
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let scale = h.frobenius_norm();
    let target = 1e-15 * scale;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= target || off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            if off <= TOLERANCE * scale {
                break;
            }
            return Err(Error::NoConvergence { residual: off, sweeps });
        }
        sweeps += 1;
        let data = a.data_mut();
        for p in 0..n {
            for q in p + 1..n {
                let apq = data[p * n + q];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = data[p * n + p].re;
                let aqq = data[q * n + q].re;
                // Negligible against both diagonal entries after a few sweeps.
                if sweeps > 3 && app.abs() + 1e3 * r == app.abs() && aqq.abs() + 1e3 * r == aqq.abs() {
                    data[p * n + q] = Complex64::new(0.0, 0.0);
                    data[q * n + p] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J has J_pp = J_qq = c, J_pq = s e^{i phi}, J_qp = -s e^{-i phi}.
                let sp = phase * s;
                let spc = sp.conj();
                for r_ in 0..n {
                    if r_ == p || r_ == q {
                        continue;
                    }
                    let arp = data[r_ * n + p];
                    let arq = data[r_ * n + q];
                    let new_rp = arp * c - arq * spc;
                    let new_rq = arp * sp + arq * c;
                    data[r_ * n + p] = new_rp;
                    data[r_ * n + q] = new_rq;
                    data[p * n + r_] = new_rp.conj();
                    data[q * n + r_] = new_rq.conj();
                }
                data[p * n + p] = Complex64::new(app - t * r, 0.0);
                data[q * n + q] = Complex64::new(aqq + t * r, 0.0);
                data[p * n + q] = Complex64::new(0.0, 0.0);
                data[q * n + p] = Complex64::new(0.0, 0.0);
                for r_ in 0..n {
                    let vp = v[r_ * n + p];
                    let vq = v[r_ * n + q];
                    v[r_ * n + p] = vp * c - vq * spc;
                    v[r_ * n + q] = vp * sp + vq * c;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the rotation-determined order among exact ties.
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        for r in 0..n {
            vectors.push(v[r * n + k]);
        }
    }
    Ok(EigenDecomposition::new(values, vectors))
}

fn off_diagonal_norm(a: &HermitianMatrix) -> f64 {
    let n = a.order();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a.get(i, j).norm_sqr();
            }
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> HermitianMatrix {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                data[i * n + j] = z;
                data[j * n + i] = z.conj();
            }
        }
        HermitianMatrix::from_row_major(n, data).unwrap()
    }

    #[test]
    fn residuals_and_orthonormality() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in [1, 2, 3, 8, 25] {
            let h = random_hermitian(n, &mut rng);
            let d = cyclic_jacobi(&h).unwrap();
            let fro = h.frobenius_norm();
            for k in 0..n {
                let hv = h.mul_vec(d.vector(k));
                let res: f64 = hv
                    .iter()
                    .zip(d.vector(k))
                    .map(|(a, b)| (a - b * d.values()[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res <= TOLERANCE * fro, "residual {res}");
            }
            for k in 0..n {
                for l in 0..n {
                    let dot: Complex64 = d.vector(k).iter().zip(d.vector(l)).map(|(a, b)| a.conj() * b).sum();
                    let want = if k == l { 1.0 } else { 0.0 };
                    assert!((dot.re - want).abs() < TOLERANCE && dot.im.abs() < TOLERANCE);
                }
            }
            assert!(d.values().windows(2).all(|w| w[0] >= w[1]));
            let back = d.reconstruct();
            assert!(back.sub(&h).unwrap().max_abs() <= TOLERANCE * fro);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let h = random_hermitian(12, &mut rng);
        let a = cyclic_jacobi(&h).unwrap();
        let b = cyclic_jacobi(&h).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.vectors, b.vectors);
    }
}
