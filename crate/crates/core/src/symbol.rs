//! Band spectra of Laurent operators from their matrix symbols.
//!
//! The essential spectrum of a block Laurent operator is the union over
//! branches `j` of the ranges of `theta -> lambda_j(f(theta))`. Branches are
//! the pointwise sorted eigenvalues, which are continuous in `theta`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::eigen::{eigh, HermitianMatrix};
use crate::interval::IntervalUnion;
use crate::model::{schrodinger_symbol, MatrixSymbol, OperatorSpec, SchrodingerSpec};
use crate::{Error, Result};

pub const DEFAULT_GRID: usize = 2048;
pub const MIN_GRID: usize = 16;
/// Relative merge tolerance for band intervals.
pub const MERGE_TOLERANCE: f64 = 1e-9;

const GOLDEN_STEPS: usize = 60;

/// Range of one sorted branch over `[0, 2 pi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchExtrema {
    pub min: f64,
    pub max: f64,
    pub argmin: f64,
    pub argmax: f64,
    /// Largest change made by endpoint refinement over the raw grid value.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct BandSampling {
    pub grid_size: usize,
    /// `theta_m = 2 pi m / grid_size`.
    pub thetas: Vec<f64>,
    /// Eigenvalues at each grid point, nonincreasing.
    pub samples: Vec<Vec<f64>>,
    /// Branch `j` is the `j`-th largest eigenvalue.
    pub branches: Vec<BranchExtrema>,
    pub bands: IntervalUnion,
    pub residual: f64,
    pub merge_tol: f64,
}

impl BandSampling {
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.bands.gaps()
    }

    /// Every gap between band intervals, with the refinement residual.
    pub fn exact_certificates(&self) -> Vec<GapCertificate> {
        self.gaps()
            .into_iter()
            .map(|(lo, hi)| GapCertificate {
                lo,
                hi,
                provenance: Provenance::SymbolExact { grid_size: self.grid_size },
                residual: self.residual,
            })
            .collect()
    }
}

/// Sorted eigenvalues of `f(theta)`.
pub fn branch_values(symbol: &MatrixSymbol, theta: f64) -> Result<Vec<f64>> {
    let h = symbol.evaluate(theta)?;
    Ok(eigh(&h)?.values().to_vec())
}

/// Samples the symbol on a uniform grid and returns branch ranges and their
/// union. Each grid extremum is refined by a golden-section search on the
/// two neighbouring grid cells.
pub fn sample_bands(symbol: &MatrixSymbol, grid_size: usize) -> Result<BandSampling> {
    if grid_size < MIN_GRID {
        return Err(Error::Contract(format!("grid size must be at least {MIN_GRID}, got {grid_size}")));
    }
    let step = 2.0 * PI / grid_size as f64;
    let thetas: Vec<f64> = (0..grid_size).map(|m| m as f64 * step).collect();
    let samples = thetas
        .iter()
        .map(|&t| branch_values(symbol, t).map_err(|e| at_theta(e, t)))
        .collect::<Result<Vec<_>>>()?;
    bands_from_samples(symbol, thetas, samples)
}

/// Assembles branch ranges from precomputed grid samples (as produced by
/// [`branch_values`] on `theta_m = 2 pi m / G`).
pub fn bands_from_samples(symbol: &MatrixSymbol, thetas: Vec<f64>, samples: Vec<Vec<f64>>) -> Result<BandSampling> {
    let grid_size = thetas.len();
    let p = symbol.block_size();
    let step = 2.0 * PI / grid_size as f64;
    let mut branches = Vec::with_capacity(p);
    for j in 0..p {
        let (mut imin, mut imax) = (0, 0);
        for m in 1..grid_size {
            if samples[m][j] < samples[imin][j] {
                imin = m;
            }
            if samples[m][j] > samples[imax][j] {
                imax = m;
            }
        }
        let (argmin, min) = refine(symbol, j, thetas[imin], step, samples[imin][j], 1.0)?;
        let (argmax, max) = refine(symbol, j, thetas[imax], step, samples[imax][j], -1.0)?;
        let residual = (samples[imin][j] - min).abs().max((max - samples[imax][j]).abs());
        branches.push(BranchExtrema { min, max, argmin, argmax, residual });
    }
    let scale = branches.iter().map(|b| b.min.abs().max(b.max.abs())).fold(0.0, f64::max);
    let merge_tol = MERGE_TOLERANCE * if scale > 0.0 { scale } else { 1.0 };
    let bands = IntervalUnion::from_intervals(branches.iter().map(|b| (b.min, b.max)).collect(), merge_tol)?;
    let residual = branches.iter().map(|b| b.residual).fold(0.0, f64::max);
    Ok(BandSampling { grid_size, thetas, samples, branches, bands, residual, merge_tol })
}

fn at_theta(e: Error, theta: f64) -> Error {
    match e {
        Error::NoConvergence { .. } | Error::Contract(_) => Error::Contract(format!("symbol at theta = {theta}: {e}")),
        other => other,
    }
}

/// Golden-section search for the minimum of `sign * lambda_j` on
/// `[center - step, center + step]`. Never returns a value worse than the
/// grid sample.
fn refine(symbol: &MatrixSymbol, j: usize, center: f64, step: f64, raw: f64, sign: f64) -> Result<(f64, f64)> {
    let eval = |t: f64| -> Result<f64> { Ok(sign * branch_values(symbol, t).map_err(|e| at_theta(e, t))?[j]) };
    let ratio = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (center - step, center + step);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..GOLDEN_STEPS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2)?;
        }
    }
    let (t, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if f < sign * raw {
        Ok((t - 2.0 * PI * (t / (2.0 * PI)).floor(), sign * f))
    } else {
        Ok((center, raw))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    SymbolExact { grid_size: usize },
    PerturbationBound { rho: f64 },
    Kb1Evidence { delta: f64, cap: usize },
}

/// An open interval claimed free of essential spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct GapCertificate {
    pub lo: f64,
    pub hi: f64,
    pub provenance: Provenance,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BorgReport {
    pub connected: bool,
    pub diagonal_constant: bool,
    /// Whether the potential is nondecreasing; the theorem's hypothesis.
    pub ordered: bool,
    /// False only for a counterexample to the theorem, which would indicate a
    /// defect.
    pub consistent: bool,
}

/// Checks "ordered potential and connected bands imply constant potential"
/// on one spec.
pub fn borg_check(spec: &SchrodingerSpec, grid_size: usize) -> Result<BorgReport> {
    let sampling = sample_bands(&schrodinger_symbol(spec)?, grid_size)?;
    let connected = sampling.bands.is_connected();
    let (lo, hi) = spec.potential.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    let diagonal_constant = hi - lo <= 1e-12;
    let ordered = spec.is_nondecreasing();
    Ok(BorgReport { connected, diagonal_constant, ordered, consistent: !(ordered && connected && !diagonal_constant) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterlaceReport {
    pub eigs_p1: Vec<f64>,
    pub eigs_p2: Vec<f64>,
    pub all_equal: bool,
}

/// Eigenvalues of the leading and trailing `(p-1)`-principal submatrices of
/// the constant tridiagonal part of a Schrödinger-form symbol.
pub fn interlace_submatrices(symbol: &MatrixSymbol) -> Result<InterlaceReport> {
    let p = symbol.block_size();
    if p < 2 {
        return Err(Error::InvalidSpec("interlacing needs block size at least 2".into()));
    }
    let corner = |s: usize, t: usize| (s, t) == (0, p - 1) || (s, t) == (p - 1, 0);
    for (&k, _) in symbol.coeffs() {
        for s in 0..p {
            for t in 0..p {
                let z = symbol.coeff(k, s, t);
                let allowed = if k == 0 { s.abs_diff(t) <= 1 || corner(s, t) } else { corner(s, t) };
                if z != Complex64::new(0.0, 0.0) && !allowed {
                    return Err(Error::InvalidSpec(format!(
                        "symbol is not tridiagonal plus corners: block {k} entry ({}, {})",
                        s + 1,
                        t + 1
                    )));
                }
            }
        }
    }
    let a0 = HermitianMatrix::from_fn(p, |s, t| symbol.coeff(0, s, t))?;
    let eigs_p1 = eigh(&a0.principal(&(0..p - 1).collect::<Vec<_>>()))?.values().to_vec();
    let eigs_p2 = eigh(&a0.principal(&(1..p).collect::<Vec<_>>()))?.values().to_vec();
    let all_equal = eigs_p1.iter().zip(&eigs_p2).all(|(a, b)| (a - b).abs() <= 1e-10);
    Ok(InterlaceReport { eigs_p1, eigs_p2, all_equal })
}

/// Upper bound for `sup |f|` of `f(theta) = sum_k a_k e^{ik theta}`: grid
/// maximum plus `sum |k a_k| * step / 2`.
pub fn corner_sup_bound(corner: &BTreeMap<i64, f64>, grid_size: usize) -> f64 {
    let step = 2.0 * PI / grid_size as f64;
    let value = |t: f64| -> f64 { corner.iter().map(|(&k, &a)| Complex64::from_polar(a, k as f64 * t)).sum::<Complex64>().norm() };
    let grid_max = (0..grid_size).map(|m| value(m as f64 * step)).fold(0.0, f64::max);
    let slope: f64 = corner.iter().map(|(&k, &a)| (k as f64 * a).abs()).sum();
    grid_max + slope * step / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    /// Norm bound of the theta-dependent part of the symbol.
    pub rho: f64,
    /// Eigenvalues of the constant part, nonincreasing.
    pub constant_eigenvalues: Vec<f64>,
    pub certificates: Vec<GapCertificate>,
    /// `union_j [lambda_j - rho, lambda_j + rho]`, which contains the bands.
    pub inclusion: IntervalUnion,
}

/// Gap certificates from eigenvalue perturbation: the symbol is a constant
/// tridiagonal matrix plus a corner term of norm at most `rho`, so every
/// spacing of the constant part larger than `2 rho` leaves a gap.
pub fn perturbation_certificate(spec: &OperatorSpec, grid_size: usize) -> Result<CertificateReport> {
    if grid_size < MIN_GRID {
        return Err(Error::Contract(format!("grid size must be at least {MIN_GRID}, got {grid_size}")));
    }
    let (constant, rho) = match spec {
        OperatorSpec::Schrodinger(s) => {
            s.validate()?;
            let p = s.period();
            let h = HermitianMatrix::from_real_fn(p, |i, j| {
                if i == j {
                    s.potential[i]
                } else if i.abs_diff(j) == 1 {
                    1.0
                } else {
                    0.0
                }
            })?;
            (h, corner_sup_bound(&s.corner, grid_size))
        }
        OperatorSpec::Jacobi(j) => {
            let sym = crate::model::jacobi_symbol(j)?;
            let h = HermitianMatrix::from_fn(j.period(), |s, t| sym.coeff(0, s, t))?;
            (h, j.corner_coeff().abs())
        }
        _ => return Err(Error::InvalidSpec("perturbation certificates need a Schrödinger or Jacobi spec".into())),
    };
    let values = eigh(&constant)?.values().to_vec();
    let certificates = values
        .windows(2)
        .filter(|w| w[0] - w[1] > 2.0 * rho)
        .map(|w| GapCertificate {
            lo: w[1] + rho,
            hi: w[0] - rho,
            provenance: Provenance::PerturbationBound { rho },
            residual: 0.0,
        })
        .collect();
    let inclusion = IntervalUnion::from_intervals(values.iter().map(|&l| (l - rho, l + rho)).collect(), 0.0)?;
    Ok(CertificateReport { rho, constant_eigenvalues: values, certificates, inclusion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JacobiSpec, Lattice};
    use alloc::vec;
    use rand::{Rng, SeedableRng};

    fn nn(potential: Vec<f64>) -> SchrodingerSpec {
        SchrodingerSpec::nearest_neighbour(potential, Lattice::Full).unwrap()
    }

    #[test]
    fn one_two_three_bands() {
        let s = sample_bands(&schrodinger_symbol(&nn(vec![1.0, 2.0, 3.0])).unwrap(), DEFAULT_GRID).unwrap();
        let want = [(-0.2143, 0.3249), (1.4608, 2.5392), (3.6751, 4.2143)];
        assert_eq!(s.bands.len(), 3);
        for (got, want) in s.bands.intervals().iter().zip(want) {
            assert!((got.0 - want.0).abs() < 1e-3 && (got.1 - want.1).abs() < 1e-3, "{got:?}");
        }
        assert_eq!(s.gaps().len(), 2);
    }

    #[test]
    fn coupling_one_plus_f_opens_gap() {
        // [[b, 1 + f], [1 + conj f, b]] with f = 0.5 + 0.5 cos theta >= 0.
        let b = 0.7;
        let spec = SchrodingerSpec::new(vec![b, b], BTreeMap::from([(0, 0.5), (1, 0.25), (-1, 0.25)]), Lattice::Full).unwrap();
        let s = sample_bands(&schrodinger_symbol(&spec).unwrap(), 256).unwrap();
        let gaps = s.gaps();
        assert_eq!(gaps.len(), 1);
        assert!(gaps[0].0 < b && b < gaps[0].1);
    }

    #[test]
    fn counterexample_is_connected() {
        let spec = SchrodingerSpec::new(vec![1.0, 2.0, 2.0, 1.0], BTreeMap::from([(1, 5.0), (-1, 5.0)]), Lattice::Full).unwrap();
        let s = sample_bands(&schrodinger_symbol(&spec).unwrap(), DEFAULT_GRID).unwrap();
        assert!(s.bands.is_connected());
        let r = borg_check(&spec, DEFAULT_GRID).unwrap();
        assert!(r.connected && !r.diagonal_constant && !r.ordered && r.consistent);
    }

    #[test]
    fn small_grid_rejected() {
        let sym = schrodinger_symbol(&nn(vec![0.0, 0.0])).unwrap();
        assert!(sample_bands(&sym, 8).is_err());
    }

    #[test]
    fn borg_examples() {
        let r = borg_check(&nn(vec![2.0, 2.0, 2.0]), 512).unwrap();
        assert!(r.connected && r.diagonal_constant && r.consistent);
        let r = borg_check(&nn(vec![1.0, 2.0, 3.0]).with_ordered(true).unwrap(), 512).unwrap();
        assert!(!r.connected && !r.diagonal_constant && r.ordered && r.consistent);
    }

    #[test]
    fn interlacing_examples() {
        let r = interlace_submatrices(&schrodinger_symbol(&nn(vec![2.0; 3])).unwrap()).unwrap();
        assert!(r.all_equal);
        assert!((r.eigs_p1[0] - 3.0).abs() < 1e-14 && (r.eigs_p1[1] - 1.0).abs() < 1e-14);
        let r = interlace_submatrices(&schrodinger_symbol(&nn(vec![1.0, 2.0, 3.0])).unwrap()).unwrap();
        assert!(!r.all_equal);
        assert!((r.eigs_p1.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!((r.eigs_p2.iter().sum::<f64>() - 5.0).abs() < 1e-12);

        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let p = rng.gen_range(2..8);
            let b = rng.gen_range(-5.0..5.0);
            let mut corner = BTreeMap::new();
            corner.insert(rng.gen_range(-2..3), rng.gen_range(-2.0..2.0));
            let spec = SchrodingerSpec::new(vec![b; p], corner, Lattice::Full).unwrap();
            assert!(interlace_submatrices(&schrodinger_symbol(&spec).unwrap()).unwrap().all_equal);
        }
    }

    #[test]
    fn interlacing_rejects_dense_symbol() {
        let mut a0 = vec![Complex64::new(0.0, 0.0); 9];
        a0[2] = Complex64::new(1.0, 0.0);
        a0[6] = Complex64::new(1.0, 0.0);
        a0[5] = Complex64::new(1.0, 0.0);
        a0[7] = Complex64::new(1.0, 0.0);
        let mut a1 = vec![Complex64::new(0.0, 0.0); 9];
        a1[1] = Complex64::new(1.0, 0.0);
        let mut am1 = vec![Complex64::new(0.0, 0.0); 9];
        am1[3] = Complex64::new(1.0, 0.0);
        let sym = MatrixSymbol::new(3, BTreeMap::from([(0, a0), (1, a1), (-1, am1)])).unwrap();
        assert!(interlace_submatrices(&sym).is_err());
    }

    #[test]
    fn certificate_for_split_potential() {
        let spec = nn(vec![0.0, 10.0]);
        let r = perturbation_certificate(&spec.clone().into(), 1024).unwrap();
        let step = 2.0 * PI / 1024.0;
        assert!((r.rho - (1.0 + step / 2.0)).abs() < 1e-12);
        let (hi, lo) = (5.0 + 26f64.sqrt(), 5.0 - 26f64.sqrt());
        assert_eq!(r.certificates.len(), 1);
        let c = &r.certificates[0];
        assert!((c.lo - (lo + r.rho)).abs() < 1e-12 && (c.hi - (hi - r.rho)).abs() < 1e-12);
        assert!((c.lo - 0.901).abs() < 5e-3 && (c.hi - 9.099).abs() < 5e-3);
        let bands = sample_bands(&schrodinger_symbol(&spec).unwrap(), 2048).unwrap();
        assert!(!bands.bands.meets_open(c.lo, c.hi));
        assert!(bands.bands.is_subset_of(&r.inclusion, 0.0));
    }

    #[test]
    fn no_certificate_for_counterexample_or_constant() {
        let spec = SchrodingerSpec::new(vec![1.0, 2.0, 2.0, 1.0], BTreeMap::from([(1, 5.0), (-1, 5.0)]), Lattice::Full).unwrap();
        let r = perturbation_certificate(&spec.into(), 1024).unwrap();
        assert!(r.rho >= 10.0);
        assert!(r.certificates.is_empty());
        for p in 2..8 {
            let r = perturbation_certificate(&nn(vec![1.5; p]).into(), 1024).unwrap();
            assert!(r.certificates.is_empty());
        }
    }

    #[test]
    fn jacobi_bands_do_not_depend_on_rotation() {
        let spec = JacobiSpec::new(vec![1.0, 2.0, 0.5], vec![0.0, 3.0, -1.0], Lattice::Full).unwrap();
        let reference = sample_bands(&crate::model::jacobi_symbol(&spec).unwrap(), 1024).unwrap();
        for k in 1..3 {
            let s = sample_bands(&crate::model::jacobi_symbol(&spec.clone().with_rotation(k).unwrap()).unwrap(), 1024).unwrap();
            assert_eq!(s.bands.len(), reference.bands.len());
            for (a, b) in s.bands.intervals().iter().zip(reference.bands.intervals()) {
                assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            }
        }
        let r = perturbation_certificate(&spec.clone().into(), 1024).unwrap();
        assert_eq!(r.rho, 0.5);
        for c in &r.certificates {
            assert!(!reference.bands.meets_open(c.lo, c.hi));
        }
    }
}
