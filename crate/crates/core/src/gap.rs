//! The weighted-average gap criterion.
//!
//! For convex weights `w_{nk}` the statistic `c_n = sum_k w_{nk} lambda_k(A_n)`
//! lies between the extreme eigenvalues of `A_n`. If, for some `delta` and
//! `K`, fewer than `K` eigenvalues of `A_n` sit within `delta` of `c_n` for
//! every `n`, the limit points of `c_n` are not essential, which (when the
//! spectrum and the essential spectrum share their bounds) forces a gap.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::eigen::{spectral_weights, EigenDecomposition};
use crate::model::OperatorSpec;
use crate::symbol::{GapCertificate, Provenance};
use crate::truncation::{estimate_bounds, operator_section_spectrum, BoundTolerances, SectionSpectrum, Trajectories};
use crate::{Error, Result};

/// Tolerance on weight bounds and normalization.
pub const WEIGHT_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for grouping tail values of the statistic.
pub const CENTER_TOLERANCE: f64 = 1e-3;
/// Window half-widths tried when none is given, relative to the scale.
pub const DEFAULT_DELTAS: [f64; 3] = [0.05, 0.1, 0.2];
/// Ranks used to test the bounds hypothesis.
const HYPOTHESIS_RANKS: usize = 8;

/// Selects one eigenvalue of each section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankIndex {
    /// `k`-th largest.
    Top(usize),
    /// `k`-th smallest.
    Bottom(usize),
    /// The eigenvalue closest to a point, e.g. a known gap edge.
    NearestTo(f64),
}

impl RankIndex {
    /// 0-based position in a nonincreasing list of `values`.
    fn position(&self, values: &[f64]) -> Result<usize> {
        let n = values.len();
        match *self {
            RankIndex::Top(k) if (1..=n).contains(&k) => Ok(k - 1),
            RankIndex::Bottom(k) if (1..=n).contains(&k) => Ok(n - k),
            RankIndex::NearestTo(x) if n > 0 => Ok((0..n)
                .min_by(|&i, &j| (values[i] - x).abs().total_cmp(&(values[j] - x).abs()))
                .unwrap()),
            RankIndex::Top(k) | RankIndex::Bottom(k) => Err(Error::IndexOutOfRange { index: k, order: n }),
            RankIndex::NearestTo(_) => Err(Error::Contract("empty spectrum".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightScheme {
    /// `w_{nk} = 1/n`: the statistic is `trace(A_n) / n`.
    Uniform,
    /// `w_{nk} = <Q_k e_i, e_i>`: the statistic is the diagonal entry `a_ii`.
    SpectralEntry(usize),
    /// Weight `t` on one selected eigenvalue and `1 - t` on another.
    TwoPoint { t: f64, l: RankIndex, m: RankIndex },
    /// Weight vectors per section order `n`.
    Explicit(BTreeMap<usize, Vec<f64>>),
}

impl WeightScheme {
    /// Basis indices whose spectral weights the scheme needs.
    pub fn basis(&self) -> Vec<usize> {
        match self {
            WeightScheme::SpectralEntry(i) => vec![*i],
            _ => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightScheme::SpectralEntry(0) => Err(Error::IndexOutOfRange { index: 0, order: 0 }),
            WeightScheme::TwoPoint { t, l, m } => {
                if !(*t > 0.0 && *t < 1.0) {
                    return Err(Error::Contract(format!("two-point weight t = {t} outside (0, 1)")));
                }
                for r in [l, m] {
                    if matches!(r, RankIndex::Top(0) | RankIndex::Bottom(0)) {
                        return Err(Error::Contract("ranks are 1-based".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Weight vector for one section, aligned with its nonincreasing values.
    pub fn weights(&self, section: &SectionSpectrum) -> Result<Vec<f64>> {
        self.validate()?;
        let n = section.values.len();
        let w = match self {
            WeightScheme::Uniform => vec![1.0 / n as f64; n],
            WeightScheme::SpectralEntry(i) => section
                .weights
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Contract(format!("section n = {} carries no weights for e_{i}", section.n)))?,
            WeightScheme::TwoPoint { t, l, m } => {
                let mut w = vec![0.0; n];
                w[l.position(&section.values)?] += t;
                w[m.position(&section.values)?] += 1.0 - t;
                w
            }
            WeightScheme::Explicit(table) => table
                .get(&section.n)
                .cloned()
                .ok_or_else(|| Error::Contract(format!("no weights given for n = {}", section.n)))?,
        };
        check_weights(&w, n)?;
        Ok(w)
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Contract(format!("{} weights for a section of order {n}", w.len())));
    }
    if let Some(bad) = w.iter().find(|&&x| !(x >= -WEIGHT_TOLERANCE && x <= 1.0 + WEIGHT_TOLERANCE)) {
        return Err(Error::Contract(format!("weight {bad} outside [0, 1]")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::Contract(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// `sum_k w_k lambda_k` for convex weights.
pub fn convex_combination(values: &[f64], weights: &[f64]) -> Result<f64> {
    check_weights(weights, values.len())?;
    Ok(values.iter().zip(weights).map(|(l, w)| l * w).sum())
}

/// The statistic of `scheme` on a dense decomposition.
pub fn weighted_statistic(decomp: &EigenDecomposition, scheme: &WeightScheme) -> Result<f64> {
    let n = decomp.order();
    let mut weights = BTreeMap::new();
    if let WeightScheme::SpectralEntry(i) = scheme {
        weights.insert(*i, spectral_weights(decomp, *i)?);
    }
    let section = SectionSpectrum { n, values: decomp.values().to_vec(), weights };
    statistic_of(&section, scheme)
}

/// The statistic of `scheme` on one section spectrum.
pub fn statistic_of(section: &SectionSpectrum, scheme: &WeightScheme) -> Result<f64> {
    convex_combination(&section.values, &scheme.weights(section)?)
}

/// Two-point weights on trajectory ranks, checked against the trajectories.
pub fn two_point_weights(trajs: &Trajectories, t: f64, l: RankIndex, m: RankIndex) -> Result<WeightScheme> {
    for r in [l, m] {
        if let RankIndex::Top(k) | RankIndex::Bottom(k) = r {
            if k == 0 || k > trajs.k_max {
                return Err(Error::IndexOutOfRange { index: k, order: trajs.k_max });
            }
        }
    }
    let scheme = WeightScheme::TwoPoint { t, l, m };
    scheme.validate()?;
    Ok(scheme)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    EvidenceFound,
    NoEvidence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapEvidence {
    pub scheme: WeightScheme,
    pub delta: f64,
    pub cap: usize,
    /// `(n, c_n)`.
    pub statistic: Vec<(usize, f64)>,
    /// `(n, #{j : |c_n - lambda_j| < delta})`.
    pub counts: Vec<(usize, usize)>,
    pub verdict: Verdict,
    /// Limit points of the statistic, from clustering its tail.
    pub centers: Vec<f64>,
    /// `(c - eps, c + eps)` per center when the verdict holds and the
    /// interval fits between the bound estimates.
    pub candidates: Vec<(f64, f64)>,
    /// No discrete trajectory limits outside the essential bound estimates,
    /// i.e. spectrum and essential spectrum appear to share their bounds.
    pub hypothesis_verified: bool,
    /// `(nu_hat, mu_hat)` when the bounds could be estimated.
    pub bounds: Option<(f64, f64)>,
}

impl GapEvidence {
    pub fn certificates(&self) -> Vec<GapCertificate> {
        self.candidates
            .iter()
            .map(|&(lo, hi)| GapCertificate {
                lo,
                hi,
                provenance: Provenance::Kb1Evidence { delta: self.delta, cap: self.cap },
                residual: 0.0,
            })
            .collect()
    }
}

/// Evaluates the criterion on sections `A_n`, `n` in `n_list`.
pub fn kb1_criterion(
    spec: &OperatorSpec,
    scheme: &WeightScheme,
    delta: f64,
    cap: usize,
    n_list: &[usize],
) -> Result<GapEvidence> {
    let op = spec.prepare()?;
    let basis = scheme.basis();
    let sections = n_list
        .iter()
        .map(|&n| operator_section_spectrum(&op, n, &basis))
        .collect::<Result<Vec<_>>>()?;
    kb1_from_spectra(scheme, delta, cap, &sections, op.enclosure())
}

/// Evaluates the criterion on precomputed section spectra (ascending `n`),
/// each carrying the weights named by [`WeightScheme::basis`].
pub fn kb1_from_spectra(
    scheme: &WeightScheme,
    delta: f64,
    cap: usize,
    sections: &[SectionSpectrum],
    enclosure: (f64, f64),
) -> Result<GapEvidence> {
    if !(delta > 0.0) {
        return Err(Error::Contract(format!("delta must be positive, got {delta}")));
    }
    if cap == 0 {
        return Err(Error::Contract("K must be at least 1".into()));
    }
    if sections.len() < 2 {
        return Err(Error::InsufficientData("at least two section orders are needed".into()));
    }
    scheme.validate()?;
    let mut statistic = Vec::with_capacity(sections.len());
    let mut counts = Vec::with_capacity(sections.len());
    for s in sections {
        let c = statistic_of(s, scheme)?;
        let count = s.values.iter().filter(|&&l| (c - l).abs() < delta).count();
        statistic.push((s.n, c));
        counts.push((s.n, count));
    }
    let verdict = if counts.iter().all(|&(_, k)| k < cap) { Verdict::EvidenceFound } else { Verdict::NoEvidence };

    let n_list: Vec<usize> = sections.iter().map(|s| s.n).collect();
    let spectra: Vec<Vec<f64>> = sections.iter().map(|s| s.values.clone()).collect();
    let k_max = HYPOTHESIS_RANKS.min(n_list[0]);
    let trajs = Trajectories::from_spectra(&n_list, k_max, &spectra, enclosure)?;
    let scale = trajs.scale();
    let estimate = estimate_bounds(&trajs, BoundTolerances::relative_to(scale)).ok();
    let hypothesis_verified =
        estimate.as_ref().is_some_and(|e| e.discrete_above.is_empty() && e.discrete_below.is_empty());
    let bounds = estimate.as_ref().map(|e| (e.nu_hat.value, e.mu_hat.value));

    let centers = tail_centers(&statistic, CENTER_TOLERANCE * scale);
    let candidates = match (verdict, bounds) {
        (Verdict::EvidenceFound, Some((nu, mu))) => centers
            .iter()
            .filter_map(|&c| {
                let eps = (delta / 2.0).min(c - nu).min(mu - c);
                (eps > 0.0).then(|| (c - eps, c + eps))
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(GapEvidence {
        scheme: scheme.clone(),
        delta,
        cap,
        statistic,
        counts,
        verdict,
        centers,
        candidates,
        hypothesis_verified,
        bounds,
    })
}

/// Groups the second half of the statistic sequence into clusters of
/// consecutive sorted values within `tol`; each cluster is represented by
/// its value at the largest `n`.
fn tail_centers(statistic: &[(usize, f64)], tol: f64) -> Vec<f64> {
    let tail = &statistic[statistic.len() / 2..];
    let mut sorted: Vec<(usize, f64)> = tail.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut centers = Vec::new();
    let mut group: Vec<(usize, f64)> = Vec::new();
    for item in sorted {
        if let Some(last) = group.last() {
            if item.1 - last.1 > tol {
                centers.push(group.iter().max_by_key(|g| g.0).unwrap().1);
                group.clear();
            }
        }
        group.push(item);
    }
    if let Some(g) = group.iter().max_by_key(|g| g.0) {
        centers.push(g.1);
    }
    centers
}

/// Window half-widths to try when the user gives none.
pub fn default_deltas(scale: f64) -> Vec<f64> {
    DEFAULT_DELTAS.iter().map(|d| d * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{eigh, HermitianMatrix};
    use crate::model::{ExplicitBand, Lattice, SchrodingerSpec};
    use crate::truncation::{eigenvalue_trajectories, DEFAULT_N_LIST};
    use num_complex::Complex64;

    fn one_two_three() -> OperatorSpec {
        SchrodingerSpec::nearest_neighbour(vec![1.0, 2.0, 3.0], Lattice::Half).unwrap().into()
    }

    #[test]
    fn statistics_of_small_matrices() {
        let d = eigh(&HermitianMatrix::from_diagonal(&[1.0, 2.0, 3.0])).unwrap();
        assert!((weighted_statistic(&d, &WeightScheme::Uniform).unwrap() - 2.0).abs() < 1e-15);

        let h = HermitianMatrix::from_fn(3, |i, j| {
            let v = [[0.5, 1.0, -2.0], [1.0, 3.0, 0.25], [-2.0, 0.25, -1.0]][i][j];
            Complex64::new(v, if i < j { 0.3 } else if i > j { -0.3 } else { 0.0 })
        })
        .unwrap();
        let d = eigh(&h).unwrap();
        for i in 1..=3 {
            let c = weighted_statistic(&d, &WeightScheme::SpectralEntry(i)).unwrap();
            assert!((c - h.get(i - 1, i - 1).re).abs() < 1e-12);
        }

        let d = eigh(&HermitianMatrix::from_diagonal(&[4.0, 3.0, 1.0, 0.0])).unwrap();
        let s = WeightScheme::TwoPoint { t: 0.5, l: RankIndex::Top(1), m: RankIndex::Bottom(1) };
        assert_eq!(weighted_statistic(&d, &s).unwrap(), 2.0);
    }

    #[test]
    fn bad_weights_rejected() {
        let d = eigh(&HermitianMatrix::from_diagonal(&[1.0, 2.0])).unwrap();
        let table = BTreeMap::from([(2, vec![0.7, 0.7])]);
        assert!(matches!(weighted_statistic(&d, &WeightScheme::Explicit(table)), Err(Error::Contract(_))));
        let s = WeightScheme::TwoPoint { t: 0.0, l: RankIndex::Top(1), m: RankIndex::Top(2) };
        assert!(weighted_statistic(&d, &s).is_err());
    }

    #[test]
    fn two_point_from_trajectories() {
        let trajs = eigenvalue_trajectories(&one_two_three(), &[30, 60], 4).unwrap();
        assert!(two_point_weights(&trajs, 0.5, RankIndex::Top(1), RankIndex::Bottom(4)).is_ok());
        assert!(two_point_weights(&trajs, 0.0, RankIndex::Top(1), RankIndex::Bottom(1)).is_err());
        assert!(two_point_weights(&trajs, 0.5, RankIndex::Top(5), RankIndex::Bottom(1)).is_err());
    }

    #[test]
    fn entry_scheme_finds_gap_at_one() {
        let e = kb1_criterion(&one_two_three(), &WeightScheme::SpectralEntry(1), 0.1, 8, &DEFAULT_N_LIST).unwrap();
        assert_eq!(e.verdict, Verdict::EvidenceFound);
        assert!(e.statistic.iter().all(|s| (s.1 - 1.0).abs() < 1e-10));
        assert_eq!(e.centers.len(), 1);
        assert!((e.centers[0] - 1.0).abs() < 1e-9);
        assert_eq!(e.candidates.len(), 1);
        assert!((e.candidates[0].1 - e.candidates[0].0 - 0.1).abs() < 1e-9);
    }

    #[test]
    fn free_laplacian_gives_no_evidence() {
        let free: OperatorSpec = SchrodingerSpec::nearest_neighbour(vec![0.0, 0.0], Lattice::Half).unwrap().into();
        let e = kb1_criterion(&free, &WeightScheme::Uniform, 0.1, 8, &[200, 400, 800]).unwrap();
        assert_eq!(e.verdict, Verdict::NoEvidence);
        assert!(e.counts.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(e.candidates.is_empty());
        let e = kb1_criterion(&free, &WeightScheme::SpectralEntry(1), 0.1, 8, &[200, 400, 800]).unwrap();
        assert_eq!(e.verdict, Verdict::NoEvidence);
    }

    #[test]
    fn identity_gives_no_evidence() {
        let id: OperatorSpec = ExplicitBand::periodic(Lattice::Half, vec![1.0], vec![]).unwrap().into();
        for scheme in [WeightScheme::Uniform, WeightScheme::SpectralEntry(1)] {
            let e = kb1_criterion(&id, &scheme, 0.5, 3, &[10, 20, 40]).unwrap();
            assert_eq!(e.verdict, Verdict::NoEvidence);
        }
    }

    #[test]
    fn verdict_monotone_in_cap() {
        let e = kb1_criterion(&one_two_three(), &WeightScheme::SpectralEntry(1), 0.3, 1, &[100, 200]).unwrap();
        let worst = e.counts.iter().map(|c| c.1).max().unwrap();
        for cap in 1..worst + 4 {
            let e = kb1_criterion(&one_two_three(), &WeightScheme::SpectralEntry(1), 0.3, cap, &[100, 200]).unwrap();
            assert_eq!(e.verdict == Verdict::EvidenceFound, cap > worst);
        }
    }

    #[test]
    fn tail_clusters() {
        let s = [(1, 0.0), (2, 5.0), (3, 1.0), (4, 1.0005), (5, 2.0), (6, 1.0002)];
        assert_eq!(tail_centers(&s, 1e-3), vec![1.0002, 2.0]);
    }
}
