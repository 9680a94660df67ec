//! Eigenvalues of growing finite sections and what they say about the
//! operator: trajectories `n -> lambda_k(A_n)`, essential-bound estimates,
//! window counts, point classification and eigenvalues inside gaps.
//!
//! Sections are diagonalized through the band path of [`crate::eigen`], so
//! `n` in the thousands is cheap for band operators.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::eigen::{band_spectrum, singular_values_of};
use crate::model::{section_band, ExplicitBand, Operator, OperatorSpec};
use crate::{Error, Result};

pub const DEFAULT_N_LIST: [usize; 4] = [200, 400, 800, 1600];
pub const DEFAULT_GROWTH_FACTOR: f64 = 1.8;
pub const DEFAULT_CAP: usize = 8;
/// Relative tolerance below which a trajectory counts as stalled.
pub const STALL_TOLERANCE: f64 = 1e-6;
/// Relative tolerance within which trajectory limits form a cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-4;

/// Spectrum of one finite section, with spectral weights of selected basis
/// vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionSpectrum {
    pub n: usize,
    /// Nonincreasing.
    pub values: Vec<f64>,
    /// Basis index (1-based) to `w_k = <Q_k e_i, e_i>`, aligned with `values`.
    pub weights: BTreeMap<usize, Vec<f64>>,
}

/// Eigenvalues of `A_n` and the spectral weights of the 1-based basis
/// indices in `basis`.
pub fn section_spectrum(spec: &OperatorSpec, n: usize, basis: &[usize]) -> Result<SectionSpectrum> {
    operator_section_spectrum(&spec.prepare()?, n, basis)
}

pub(crate) fn operator_section_spectrum(op: &Operator, n: usize, basis: &[usize]) -> Result<SectionSpectrum> {
    if n == 0 {
        return Err(Error::Contract("section order must be positive".into()));
    }
    let section = section_band(op, n)?;
    let rows = basis.iter().map(|&i| section.row_of_basis(i)).collect::<Result<Vec<_>>>()?;
    let s = band_spectrum(&section.matrix, &rows)?;
    let weights = basis.iter().copied().zip(s.weights).collect();
    Ok(SectionSpectrum { n, values: s.values, weights })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `lambda_k(A_n)`, the `k`-th largest.
    Top,
    /// `lambda_{n+1-k}(A_n)`, the `k`-th smallest.
    Bottom,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Top => "top",
            Direction::Bottom => "bottom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenTrajectory {
    pub direction: Direction,
    pub rank: usize,
    /// `(n, lambda)` with `n` strictly increasing; only `n >= rank` appear.
    pub samples: Vec<(usize, f64)>,
}

impl EigenTrajectory {
    /// `|lambda(n_last) - lambda(n_prev)|`, if there are two samples.
    pub fn residual(&self) -> Option<f64> {
        let len = self.samples.len();
        (len >= 2).then(|| (self.samples[len - 1].1 - self.samples[len - 2].1).abs())
    }

    pub fn last(&self) -> Option<f64> {
        self.samples.last().map(|s| s.1)
    }

    /// Largest step against the interlacing direction (0 if monotone).
    pub fn monotonicity_defect(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| match self.direction {
                Direction::Top => w[0].1 - w[1].1,
                Direction::Bottom => w[1].1 - w[0].1,
            })
            .fold(0.0, f64::max)
    }
}

/// One row of a trajectory table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub n: usize,
    pub rank: usize,
    pub direction: Direction,
    pub lambda: f64,
    /// Change from the previous `n` in the list, if any.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectories {
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub top: Vec<EigenTrajectory>,
    pub bottom: Vec<EigenTrajectory>,
    /// All eigenvalues of the largest section, nonincreasing: a sample of the
    /// limit set of section eigenvalues.
    pub last_spectrum: Vec<f64>,
    /// Interval known to contain the spectrum.
    pub enclosure: (f64, f64),
}

impl Trajectories {
    /// Assembles trajectories from section spectra given in `n_list` order.
    pub fn from_spectra(n_list: &[usize], k_max: usize, spectra: &[Vec<f64>], enclosure: (f64, f64)) -> Result<Self> {
        check_n_list(n_list)?;
        if spectra.len() != n_list.len() || spectra.iter().zip(n_list).any(|(s, &n)| s.len() != n) {
            return Err(Error::Contract("one spectrum of length n per entry of n_list expected".into()));
        }
        if k_max == 0 || k_max > *n_list.last().unwrap() {
            return Err(Error::Contract(format!("k_max must lie in 1..={}", n_list.last().unwrap())));
        }
        let build = |direction: Direction| -> Vec<EigenTrajectory> {
            (1..=k_max)
                .map(|rank| EigenTrajectory {
                    direction,
                    rank,
                    samples: n_list
                        .iter()
                        .zip(spectra)
                        .filter(|(&n, _)| n >= rank)
                        .map(|(&n, s)| match direction {
                            Direction::Top => (n, s[rank - 1]),
                            Direction::Bottom => (n, s[n - rank]),
                        })
                        .collect(),
                })
                .collect()
        };
        Ok(Self {
            n_list: n_list.to_vec(),
            k_max,
            top: build(Direction::Top),
            bottom: build(Direction::Bottom),
            last_spectrum: spectra.last().unwrap().clone(),
            enclosure,
        })
    }

    /// `max(|m|, |M|)` of the enclosure, or 1 for the zero operator.
    pub fn scale(&self) -> f64 {
        let s = self.enclosure.0.abs().max(self.enclosure.1.abs());
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Rows ordered by `n`, then direction (top first), then rank.
    pub fn rows(&self) -> Vec<TrajectoryRow> {
        let mut rows = Vec::new();
        for &n in &self.n_list {
            for trajs in [&self.top, &self.bottom] {
                for t in trajs {
                    if let Some(pos) = t.samples.iter().position(|s| s.0 == n) {
                        let lambda = t.samples[pos].1;
                        let residual = pos.checked_sub(1).map(|p| (lambda - t.samples[p].1).abs());
                        rows.push(TrajectoryRow { n, rank: t.rank, direction: t.direction, lambda, residual });
                    }
                }
            }
        }
        rows
    }

    /// Largest violation of interlacing monotonicity over all trajectories.
    pub fn monotonicity_defect(&self) -> f64 {
        self.top.iter().chain(&self.bottom).map(|t| t.monotonicity_defect()).fold(0.0, f64::max)
    }
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list[0] == 0 {
        return Err(Error::Contract("n_list must be nonempty with positive entries".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("n_list must be strictly increasing".into()));
    }
    Ok(())
}

/// Top and bottom trajectories for ranks `1..=k_max` over `n_list`.
pub fn eigenvalue_trajectories(spec: &OperatorSpec, n_list: &[usize], k_max: usize) -> Result<Trajectories> {
    check_n_list(n_list)?;
    let op = spec.prepare()?;
    let spectra = n_list
        .iter()
        .map(|&n| operator_section_spectrum(&op, n, &[]).map(|s| s.values))
        .collect::<Result<Vec<_>>>()?;
    Trajectories::from_spectra(n_list, k_max, &spectra, op.enclosure())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTolerances {
    /// Discrete limits must sit further than this from the cluster value.
    pub stall_tol: f64,
    /// Consecutive trajectory limits closer than this form a cluster.
    pub cluster_tol: f64,
}

impl BoundTolerances {
    pub fn relative_to(scale: f64) -> Self {
        Self { stall_tol: STALL_TOLERANCE * scale, cluster_tol: CLUSTER_TOLERANCE * scale }
    }
}

/// A value with its convergence residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub mu_hat: Estimate,
    pub nu_hat: Estimate,
    /// Nonincreasing.
    pub discrete_above: Vec<Estimate>,
    /// Nondecreasing.
    pub discrete_below: Vec<Estimate>,
    /// All eigenvalues at the largest `n`, nonincreasing.
    pub lambda_set_sample: Vec<f64>,
    pub tolerances: BoundTolerances,
}

/// Estimates the essential bounds `mu`, `nu` and the discrete eigenvalues
/// outside them.
///
/// Each trajectory is taken at its largest `n`. Scanning `k` upwards, the
/// first run of at least three limits within `cluster_tol` of each other
/// (two if the run reaches `k_max`) marks the accumulation value. Neighbours
/// are compared with `cluster_tol` widened by their larger residual, since a
/// limit is only known to within its last change. Limits
/// before it that stand more than `stall_tol` apart from it are discrete.
pub fn estimate_bounds(trajs: &Trajectories, tol: BoundTolerances) -> Result<SpectralEstimate> {
    if trajs.n_list.len() < 2 {
        return Err(Error::InsufficientData("at least two section orders are needed".into()));
    }
    let (mu_hat, discrete_above) = one_side(&trajs.top, tol, 1.0)?;
    let (nu_hat, discrete_below) = one_side(&trajs.bottom, tol, -1.0)?;
    let nu_hat = if nu_hat.value > mu_hat.value {
        // Only possible when everything collapsed to one point within noise.
        Estimate { value: mu_hat.value, residual: nu_hat.residual.max(mu_hat.residual) }
    } else {
        nu_hat
    };
    Ok(SpectralEstimate {
        mu_hat,
        nu_hat,
        discrete_above,
        discrete_below,
        lambda_set_sample: trajs.last_spectrum.clone(),
        tolerances: tol,
    })
}

/// `sign = 1` for top trajectories, `-1` for bottom ones.
fn one_side(trajs: &[EigenTrajectory], tol: BoundTolerances, sign: f64) -> Result<(Estimate, Vec<Estimate>)> {
    let limits: Vec<Estimate> = trajs
        .iter()
        .map(|t| {
            Ok(Estimate {
                value: t.last().ok_or_else(|| Error::InsufficientData(format!("no samples for rank {}", t.rank)))?,
                residual: t.residual().unwrap_or(f64::INFINITY),
            })
        })
        .collect::<Result<_>>()?;
    let close = |k: usize| {
        let slack = limits[k].residual.max(limits[k + 1].residual);
        sign * (limits[k].value - limits[k + 1].value) <= tol.cluster_tol + slack
    };
    let len = limits.len();
    let start = (0..len.saturating_sub(2))
        .find(|&k| close(k) && close(k + 1))
        .or_else(|| (len >= 2 && close(len - 2)).then(|| len - 2))
        .ok_or_else(|| {
            Error::InsufficientData(format!(
                "{} trajectory limits do not cluster within {:e}; raise n or k_max",
                if sign > 0.0 { "top" } else { "bottom" },
                tol.cluster_tol
            ))
        })?;
    let accumulation = limits[start];
    let discrete = limits[..start]
        .iter()
        .copied()
        .filter(|l| sign * (l.value - accumulation.value) > tol.stall_tol)
        .collect();
    Ok((accumulation, discrete))
}

/// Number of eigenvalues in the open interval `(lo, hi)`.
pub fn count_in_values(values: &[f64], lo: f64, hi: f64) -> usize {
    values.iter().filter(|&&v| lo < v && v < hi).count()
}

/// Number of eigenvalues of `A_n` in the open interval `(lo, hi)`.
pub fn count_in_window(spec: &OperatorSpec, n: usize, lo: f64, hi: f64) -> Result<usize> {
    if !(lo < hi) {
        return Err(Error::Contract(format!("empty window ({lo}, {hi})")));
    }
    Ok(count_in_values(&section_spectrum(spec, n, &[])?.values, lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointKind {
    Essential,
    Transient,
    Undetermined,
}

/// Heuristic classification of a point from eigenvalue counts near it.
#[derive(Clone, Debug, PartialEq)]
pub struct PointClass {
    pub kind: PointKind,
    pub window: (f64, f64),
    /// `(n, N_n)`.
    pub counts: Vec<(usize, usize)>,
    pub cap: usize,
    pub growth_factor: f64,
}

/// Checks the preconditions of [`classify_point`].
pub fn check_classification_input(delta: f64, n_list: &[usize]) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::Contract(format!("window half-width must be positive, got {delta}")));
    }
    check_n_list(n_list)?;
    if n_list.len() < 3 || n_list[n_list.len() - 1] < 4 * n_list[0] {
        return Err(Error::Contract("classification needs at least three orders spanning a factor of 4".into()));
    }
    Ok(())
}

/// Essential if every count grows at least by `growth_factor` per doubling
/// of `n`; otherwise transient if all counts stay at or below `cap`;
/// otherwise undetermined.
pub fn classify_counts(counts: &[(usize, usize)], window: (f64, f64), cap: usize, growth_factor: f64) -> PointClass {
    let essential = counts.len() >= 2
        && counts.windows(2).all(|w| {
            let ((n0, c0), (n1, c1)) = (w[0], w[1]);
            let needed = growth_factor.powf((n1 as f64 / n0 as f64).log2());
            c0 > 0 && c1 as f64 >= needed * c0 as f64
        });
    let kind = if essential {
        PointKind::Essential
    } else if counts.iter().all(|&(_, c)| c <= cap) {
        PointKind::Transient
    } else {
        PointKind::Undetermined
    };
    PointClass { kind, window, counts: counts.to_vec(), cap, growth_factor }
}

pub fn classify_point(
    spec: &OperatorSpec,
    lambda0: f64,
    delta: f64,
    n_list: &[usize],
    cap: usize,
    growth_factor: f64,
) -> Result<PointClass> {
    check_classification_input(delta, n_list)?;
    let op = spec.prepare()?;
    let (lo, hi) = (lambda0 - delta, lambda0 + delta);
    let counts = n_list
        .iter()
        .map(|&n| Ok((n, count_in_values(&operator_section_spectrum(&op, n, &[])?.values, lo, hi))))
        .collect::<Result<Vec<_>>>()?;
    Ok(classify_counts(&counts, (lo, hi), cap, growth_factor))
}

/// An eigenvalue recovered inside a gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InGapEigenvalue {
    /// Rayleigh quotient of `A_n` at the recovered eigenvector.
    pub value: f64,
    /// Eigenvalue of `(A - lambda_0)^2` it came from.
    pub gamma: f64,
    /// `||(A_n - value) x||` for the unit eigenvector `x`; absent when
    /// `gamma` is double and both signs were taken.
    pub residual: Option<f64>,
}

/// The band operator `(A - shift)^2`, with entries computed by banded
/// multiplication over the lattice.
pub fn squared_shift(spec: &OperatorSpec, shift: f64) -> Result<ExplicitBand> {
    let op = spec.prepare()?;
    Ok(squared_shift_of(&op, shift))
}

fn squared_shift_of(op: &Operator, shift: f64) -> ExplicitBand {
    let lattice = op.lattice();
    let w = op.reach() as i64;
    let (m, big_m) = op.enclosure();
    let bound = (m - shift).abs().max((big_m - shift).abs());
    let op = op.clone();
    ExplicitBand::new(lattice, 2 * w as usize, bound * bound, move |i, j| {
        let shifted = |r: i64, c: i64| {
            let z = op.entry(r, c);
            if r == c {
                z - shift
            } else {
                z
            }
        };
        let from = i.min(j) - w;
        let from = if lattice == crate::model::Lattice::Half { from.max(0) } else { from };
        (from..=i.max(j) + w).map(|k| shifted(i, k) * shifted(k, j)).sum()
    })
}

/// Eigenvalues of the operator inside the gap `(a, b)` of its essential
/// spectrum, recovered from the discrete spectrum of `(A - lambda_0)^2`
/// below its essential bound, `lambda_0 = (a + b) / 2`.
///
/// The squared operator is truncated at `n / 2` and `n`. Each discrete
/// `gamma` gives candidates `lambda_0 +- sqrt(gamma)`; the sign is chosen by
/// the residual of `A_n` on the eigenvector of the squared section.
pub fn in_gap_eigenvalues(spec: &OperatorSpec, gap: (f64, f64), n: usize) -> Result<Vec<InGapEigenvalue>> {
    let (a, b) = gap;
    if !(a < b) {
        return Err(Error::Contract(format!("empty gap ({a}, {b})")));
    }
    if n < 8 {
        return Err(Error::InsufficientData(format!("section order {n} too small")));
    }
    let op = spec.prepare()?;
    let lambda0 = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let squared = Operator::Band(squared_shift_of(&op, lambda0));
    let n_list = [n / 2, n];
    let k_max = 32.min(n / 2);
    let spectra = n_list
        .iter()
        .map(|&m| operator_section_spectrum(&squared, m, &[]).map(|s| s.values))
        .collect::<Result<Vec<_>>>()?;
    let trajs = Trajectories::from_spectra(&n_list, k_max, &spectra, squared.enclosure())?;
    let estimate = estimate_bounds(&trajs, BoundTolerances::relative_to(trajs.scale()))?;
    let (m, big_m) = op.enclosure();
    let scale_a = m.abs().max(big_m.abs()).max(f64::MIN_POSITIVE);
    let slack = (half - 1e-3 * scale_a).max(0.0);
    if estimate.nu_hat.value < slack * slack {
        return Err(Error::Precondition(format!(
            "({a}, {b}) meets the essential spectrum: (A - {lambda0})^2 accumulates at {} < {}",
            estimate.nu_hat.value,
            half * half
        )));
    }

    let section_a = section_band(&op, n)?;
    let section_b = section_band(&squared, n)?;
    let gammas: Vec<f64> = estimate.discrete_below.iter().map(|e| e.value).filter(|&g| g < half * half).collect();
    let degenerate_tol = 1e-9 * trajs.scale();
    let mut found = Vec::new();
    let mut i = 0;
    while i < gammas.len() {
        let gamma = gammas[i];
        let paired = i + 1 < gammas.len() && gammas[i + 1] - gamma <= degenerate_tol;
        let root = gamma.max(0.0).sqrt();
        let mut candidates: Vec<f64> = if root <= 1e-7 * scale_a {
            vec![lambda0]
        } else {
            [lambda0 - root, lambda0 + root].into_iter().filter(|&beta| a < beta && beta < b).collect()
        };
        if paired {
            found.extend(candidates.iter().map(|&value| InGapEigenvalue { value, gamma, residual: None }));
            i += 2;
            continue;
        }
        let x = section_b.matrix.eigenvector_near(gamma);
        let ax = section_a.matrix.mul_vec(&x);
        let rayleigh: f64 = ax.iter().zip(&x).map(|(p, q)| (q.conj() * p).re).sum();
        let residual = |beta: f64| -> f64 { ax.iter().zip(&x).map(|(p, q)| (p - q * beta).norm_sqr()).sum::<f64>().sqrt() };
        candidates.sort_by(|p, q| residual(*p).total_cmp(&residual(*q)));
        if let Some(&best) = candidates.first() {
            if (rayleigh - best).abs() <= 1e-4 * scale_a && a < rayleigh && rayleigh < b {
                found.push(InGapEigenvalue { value: rayleigh, gamma, residual: Some(residual(rayleigh)) });
            }
        }
        i += 1;
    }
    found.sort_by(|p, q| p.value.total_cmp(&q.value));
    Ok(found)
}

/// `s_k(A_n)` at the largest `n` for each `k`, and the tail value as an
/// estimate of the essential norm.
#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub residual: f64,
    /// `(k, s_k(A_{n_max}))`.
    pub singular_values: Vec<(usize, f64)>,
}

pub fn essential_norm_estimate(spec: &OperatorSpec, n_list: &[usize], k_list: &[usize]) -> Result<NormEstimate> {
    check_n_list(n_list)?;
    if n_list.len() < 2 {
        return Err(Error::InsufficientData("at least two section orders are needed".into()));
    }
    if k_list.is_empty() || k_list[0] == 0 || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("k_list must be strictly increasing and positive".into()));
    }
    let n_prev = n_list[n_list.len() - 2];
    let k_last = *k_list.last().unwrap();
    if 2 * k_last > n_prev {
        return Err(Error::InsufficientData(format!("largest k = {k_last} needs n of at least {}", 2 * k_last)));
    }
    let op = spec.prepare()?;
    let s_last = singular_values_of(&operator_section_spectrum(&op, *n_list.last().unwrap(), &[])?.values);
    let s_prev = singular_values_of(&operator_section_spectrum(&op, n_prev, &[])?.values);
    let singular_values: Vec<(usize, f64)> = k_list.iter().map(|&k| (k, s_last[k - 1])).collect();
    let value = s_last[k_last - 1];
    let k_step = if k_list.len() >= 2 { (value - s_last[k_list[k_list.len() - 2] - 1]).abs() } else { 0.0 };
    let n_step = (value - s_prev[k_last - 1]).abs();
    Ok(NormEstimate { value, residual: k_step + n_step, singular_values })
}

/// `||(A_n - z)^{-1}|| = 1 / dist(z, sigma(A_n))` per `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventCheck {
    pub z: Complex64,
    pub values: Vec<(usize, f64)>,
    pub nondecreasing: bool,
}

pub fn resolvent_convergence_check(spec: &OperatorSpec, z: Complex64, n_list: &[usize]) -> Result<ResolventCheck> {
    if z.im == 0.0 {
        return Err(Error::Contract(format!("resolvent point {z} must be non-real")));
    }
    check_n_list(n_list)?;
    let op = spec.prepare()?;
    let values = n_list
        .iter()
        .map(|&n| {
            let s = operator_section_spectrum(&op, n, &[])?;
            let dist = s.values.iter().map(|&l| (z - l).norm()).fold(f64::INFINITY, f64::min);
            Ok((n, 1.0 / dist))
        })
        .collect::<Result<Vec<_>>>()?;
    let nondecreasing = values.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12 * w[0].1);
    Ok(ResolventCheck { z, values, nondecreasing })
}
