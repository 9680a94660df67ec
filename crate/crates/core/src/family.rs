//! One-parameter families `x -> A(x)` of Schrödinger operators with
//! polynomial potentials: eigenvalue sweeps and gap stability radii.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{family_evaluate, schrodinger_symbol, FamilySpec, OperatorSpec};
use crate::symbol::{sample_bands, DEFAULT_GRID};
use crate::truncation::{
    eigenvalue_trajectories, estimate_bounds, in_gap_eigenvalues, BoundTolerances, Direction, Estimate, Trajectories,
};
use crate::{Error, Result};

/// Slack on the sweep invariants, relative to the spectral scale.
pub const SWEEP_TOLERANCE: f64 = 1e-9;
/// How far a user-supplied gap may overlap the sampled bands, relative to
/// the spectral scale. Covers gap edges quoted to a few decimals.
pub const GAP_EDGE_TOLERANCE: f64 = 1e-4;
/// Section order used to look for eigenvalues inside a gap.
pub const IN_GAP_ORDER: usize = 2000;

/// Trajectories of one family member.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub potential: Vec<f64>,
    pub trajectories: Trajectories,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// A trajectory moved the wrong way as `n` grew.
    Monotonicity,
    /// An eigenvalue moved more between grid neighbours than `||A(x) - A(x')||`.
    Equicontinuity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub x: f64,
    /// The grid neighbour, for equicontinuity.
    pub x_next: Option<f64>,
    pub n: usize,
    pub rank: usize,
    pub direction: Direction,
    /// Amount by which the bound was exceeded.
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub x_grid: Vec<f64>,
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub lipschitz: f64,
    pub points: Vec<SweepPoint>,
    pub violations: Vec<Violation>,
}

/// One row of the flattened table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub n: usize,
    pub rank: usize,
    pub direction: Direction,
    pub lambda: f64,
}

impl SweepTable {
    /// Rows ordered by `x`, then as in [`Trajectories::rows`].
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points
            .iter()
            .flat_map(|p| {
                p.trajectories.rows().into_iter().map(move |r| SweepRow {
                    x: p.x,
                    n: r.n,
                    rank: r.rank,
                    direction: r.direction,
                    lambda: r.lambda,
                })
            })
            .collect()
    }

    /// `sup_x |lambda_{1,n}(x) - lambda_{1,n'}(x)|` for consecutive `n < n'`
    /// in the list.
    pub fn uniform_top_differences(&self) -> Vec<(usize, usize, f64)> {
        self.n_list
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let sup = self
                    .points
                    .iter()
                    .map(|p| {
                        let s = &p.trajectories.top[0].samples;
                        (s[i + 1].1 - s[i].1).abs()
                    })
                    .fold(0.0, f64::max);
                (w[0], w[1], sup)
            })
            .collect()
    }
}

fn check_grid(family: &FamilySpec, x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() {
        return Err(Error::Contract("empty parameter grid".into()));
    }
    if x_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Contract("parameter grid must be strictly increasing".into()));
    }
    let (lo, hi) = family.domain;
    match x_grid.iter().find(|&&x| !(lo <= x && x <= hi)) {
        Some(&x) => Err(Error::Domain { x, lo, hi }),
        None => Ok(()),
    }
}

/// Trajectories of `A(x)` over `n_list`.
pub fn sweep_point(family: &FamilySpec, x: f64, n_list: &[usize], k_max: usize) -> Result<SweepPoint> {
    let spec = family_evaluate(family, x)?;
    let potential = spec.potential.clone();
    let trajectories = eigenvalue_trajectories(&spec.into(), n_list, k_max).map_err(|e| e.at(x))?;
    Ok(SweepPoint { x, potential, trajectories })
}

/// Checks the sweep invariants on points computed by [`sweep_point`] in
/// grid order.
pub fn assemble_sweep(family: &FamilySpec, points: Vec<SweepPoint>) -> Result<SweepTable> {
    let first = points.first().ok_or_else(|| Error::Contract("no sweep points".into()))?;
    let n_list = first.trajectories.n_list.clone();
    let k_max = first.trajectories.k_max;
    let x_grid: Vec<f64> = points.iter().map(|p| p.x).collect();
    check_grid(family, &x_grid)?;
    let scale = points.iter().map(|p| p.trajectories.scale()).fold(0.0, f64::max);
    let tol = SWEEP_TOLERANCE * scale;

    let mut violations = Vec::new();
    for p in &points {
        for (direction, trajs, sign) in
            [(Direction::Top, &p.trajectories.top, 1.0), (Direction::Bottom, &p.trajectories.bottom, -1.0)]
        {
            for t in trajs {
                for w in t.samples.windows(2) {
                    let drop = sign * (w[0].1 - w[1].1);
                    if drop > tol {
                        violations.push(Violation {
                            kind: ViolationKind::Monotonicity,
                            x: p.x,
                            x_next: None,
                            n: w[1].0,
                            rank: t.rank,
                            direction,
                            excess: drop,
                        });
                    }
                }
            }
        }
    }
    for w in points.windows(2) {
        let bound = w[0].potential.iter().zip(&w[1].potential).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        for (direction, left, right) in [
            (Direction::Top, &w[0].trajectories.top, &w[1].trajectories.top),
            (Direction::Bottom, &w[0].trajectories.bottom, &w[1].trajectories.bottom),
        ] {
            for (tl, tr) in left.iter().zip(right) {
                for (sl, sr) in tl.samples.iter().zip(&tr.samples) {
                    let excess = (sl.1 - sr.1).abs() - bound - 2.0 * tol;
                    if excess > 0.0 {
                        violations.push(Violation {
                            kind: ViolationKind::Equicontinuity,
                            x: w[0].x,
                            x_next: Some(w[1].x),
                            n: sl.0,
                            rank: tl.rank,
                            direction,
                            excess,
                        });
                    }
                }
            }
        }
    }
    Ok(SweepTable { x_grid, n_list, k_max, lipschitz: family.lipschitz(), points, violations })
}

/// Eigenvalue trajectories of `A(x)_n` for every `x` in `x_grid`.
pub fn sweep(family: &FamilySpec, x_grid: &[f64], n_list: &[usize], k_max: usize) -> Result<SweepTable> {
    check_grid(family, x_grid)?;
    let points = x_grid
        .iter()
        .map(|&x| sweep_point(family, x, n_list, k_max))
        .collect::<Result<Vec<_>>>()?;
    assemble_sweep(family, points)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundPoint {
    pub x: f64,
    pub nu_hat: Estimate,
    pub mu_hat: Estimate,
}

/// A pair of grid neighbours whose bound estimates differ by more than
/// `L |x - x'|` plus residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuityViolation {
    pub x: f64,
    pub x_next: f64,
    pub direction: Direction,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundFunctions {
    pub points: Vec<BoundPoint>,
    pub violations: Vec<ContinuityViolation>,
}

/// `(nu_hat(x), mu_hat(x))` for each swept `x`.
pub fn essential_bound_functions(table: &SweepTable) -> Result<BoundFunctions> {
    let mut points = Vec::with_capacity(table.points.len());
    let mut tolerances = Vec::with_capacity(table.points.len());
    for p in &table.points {
        let tol = BoundTolerances::relative_to(p.trajectories.scale());
        let e = estimate_bounds(&p.trajectories, tol).map_err(|e| e.at(p.x))?;
        points.push(BoundPoint { x: p.x, nu_hat: e.nu_hat, mu_hat: e.mu_hat });
        tolerances.push(tol.cluster_tol);
    }
    let mut violations = Vec::new();
    for (i, w) in points.windows(2).enumerate() {
        let allowed = table.lipschitz * (w[1].x - w[0].x) + tolerances[i] + tolerances[i + 1];
        for (direction, l, r) in [(Direction::Top, w[0].mu_hat, w[1].mu_hat), (Direction::Bottom, w[0].nu_hat, w[1].nu_hat)]
        {
            let excess = (l.value - r.value).abs() - allowed - l.residual - r.residual;
            if excess > 0.0 {
                violations.push(ContinuityViolation { x: w[0].x, x_next: w[1].x, direction, excess });
            }
        }
    }
    Ok(BoundFunctions { points, violations })
}

/// Radius of parameters around `x = 0` over which a shrunk gap persists.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub gap: (f64, f64),
    pub eps: f64,
    /// `(a + eps, b - eps)`.
    pub persisted: (f64, f64),
    /// Distance from the persisted interval to the bands of `A(0)`.
    pub distance: f64,
    /// `sup ||(A(0) - lambda)^{-1}||` over the persisted interval, `1 / distance`.
    pub m_resolvent: f64,
    /// `min(1 / M, eps)`.
    pub budget: f64,
    pub lipschitz: f64,
    /// `budget / L`; infinite when `L = 0`.
    pub delta: f64,
    pub grid_size: usize,
}

impl StabilityReport {
    pub fn is_unbounded(&self) -> bool {
        self.delta.is_infinite()
    }
}

/// [`gap_stability_radius_with`] at the default grid and in-gap section order.
pub fn gap_stability_radius(family: &FamilySpec, gap: (f64, f64), eps: f64) -> Result<StabilityReport> {
    gap_stability_radius_with(family, gap, eps, DEFAULT_GRID, IN_GAP_ORDER)
}

/// Checks that `(a, b)` is a gap of `A(0)` free of eigenvalues, then
/// computes `M`, the budget `min(1/M, eps)` and `delta = budget / L`.
pub fn gap_stability_radius_with(
    family: &FamilySpec,
    gap: (f64, f64),
    eps: f64,
    grid_size: usize,
    in_gap_order: usize,
) -> Result<StabilityReport> {
    family.validate()?;
    let (a, b) = gap;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Contract(format!("invalid gap ({a}, {b})")));
    }
    if !(eps > 0.0 && eps < 0.5 * (b - a)) {
        return Err(Error::Precondition(format!("eps = {eps} must lie in (0, {})", 0.5 * (b - a))));
    }
    let bands = sample_bands(&schrodinger_symbol(&family.base)?, grid_size)?;
    let hull = bands.bands.hull().unwrap_or((0.0, 0.0));
    let scale = hull.0.abs().max(hull.1.abs()).max(f64::MIN_POSITIVE);
    let slack = GAP_EDGE_TOLERANCE * scale;
    if bands.bands.meets_open(a + slack, b - slack) {
        return Err(Error::Precondition(format!("({a}, {b}) meets the bands of A(0)")));
    }
    let base: OperatorSpec = family.base.clone().into();
    let inside = in_gap_eigenvalues(&base, gap, in_gap_order)?;
    if let Some(e) = inside.first() {
        return Err(Error::Precondition(format!("A(0) has an eigenvalue {} inside ({a}, {b})", e.value)));
    }
    let persisted = (a + eps, b - eps);
    let distance = bands.bands.distance_to(persisted.0, persisted.1);
    let m_resolvent = 1.0 / distance;
    let budget = distance.min(eps);
    let lipschitz = family.lipschitz();
    let delta = if lipschitz == 0.0 { f64::INFINITY } else { budget / lipschitz };
    Ok(StabilityReport { gap, eps, persisted, distance, m_resolvent, budget, lipschitz, delta, grid_size })
}

/// For each `x`, whether the persisted interval misses the sampled bands of
/// `A(x)`.
pub fn check_persistence(family: &FamilySpec, report: &StabilityReport, xs: &[f64]) -> Result<Vec<(f64, bool)>> {
    xs.iter()
        .map(|&x| {
            let spec = family_evaluate(family, x)?;
            let bands = sample_bands(&schrodinger_symbol(&spec)?, report.grid_size).map_err(|e| e.at(x))?;
            Ok((x, !bands.bands.meets_open(report.persisted.0, report.persisted.1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Lattice, Polynomial, SchrodingerSpec};
    use alloc::vec;

    fn family(coeffs: Vec<Vec<f64>>, domain: (f64, f64)) -> FamilySpec {
        let p = coeffs.len();
        let base = SchrodingerSpec::nearest_neighbour(vec![0.0; p], Lattice::Full).unwrap();
        FamilySpec::new(base, coeffs.into_iter().map(Polynomial).collect(), domain).unwrap()
    }

    #[test]
    fn constant_family_is_flat() {
        let f = family(vec![vec![1.0], vec![2.0], vec![3.0]], (-1.0, 1.0));
        let t = sweep(&f, &[-0.5, 0.0, 0.5], &[40, 80], 3).unwrap();
        assert!(t.violations.is_empty());
        let rows = t.rows();
        let per_x = rows.len() / 3;
        for i in 0..per_x {
            assert_eq!(rows[i].lambda, rows[i + per_x].lambda);
            assert_eq!(rows[i].lambda, rows[i + 2 * per_x].lambda);
        }
        assert_eq!(t.lipschitz, 0.0);
    }

    #[test]
    fn shift_family_bounds() {
        let f = family(vec![vec![0.0, 1.0]; 3], (-1.0, 1.0));
        let t = sweep(&f, &[-0.5, 0.0, 0.5], &[200, 400, 800], 8).unwrap();
        assert!(t.violations.is_empty(), "{:?}", t.violations);
        let b = essential_bound_functions(&t).unwrap();
        for p in &b.points {
            assert!((p.mu_hat.value - (p.x + 2.0)).abs() < 1e-3, "{p:?}");
            assert!((p.nu_hat.value - (p.x - 2.0)).abs() < 1e-3, "{p:?}");
        }
        assert!(b.violations.is_empty());
    }

    #[test]
    fn grid_outside_domain() {
        let f = family(vec![vec![0.0, 1.0]; 2], (-0.1, 0.1));
        assert!(matches!(sweep(&f, &[0.0, 0.2], &[10, 20], 2), Err(Error::Domain { .. })));
    }

    #[test]
    fn stability_radius_recipe() {
        let f = family(vec![vec![1.0, 1.0], vec![2.0], vec![3.0]], (-1.0, 1.0));
        let r = gap_stability_radius(&f, (0.3249, 1.4608), 0.2).unwrap();
        assert_eq!(r.lipschitz, 1.0);
        assert!((r.m_resolvent - 5.0).abs() < 1e-2, "{r:?}");
        assert!((r.budget - 0.2).abs() < 1e-3);
        assert_eq!(r.budget, r.distance.min(r.eps));
        assert!(r.delta >= 0.19);
        let xs = [-0.95 * r.delta, 0.95 * r.delta];
        assert!(check_persistence(&f, &r, &xs).unwrap().iter().all(|p| p.1));
    }

    #[test]
    fn half_line_edge_state_blocks_radius() {
        let base = SchrodingerSpec::nearest_neighbour(vec![0.0; 3], Lattice::Half).unwrap();
        let coeffs = vec![Polynomial(vec![1.0, 1.0]), Polynomial(vec![2.0]), Polynomial(vec![3.0])];
        let f = FamilySpec::new(base, coeffs, (-1.0, 1.0)).unwrap();
        assert!(matches!(gap_stability_radius(&f, (0.3249, 1.4608), 0.2), Err(Error::Precondition(_))));
    }

    #[test]
    fn stability_preconditions() {
        let c = family(vec![vec![1.0], vec![2.0], vec![3.0]], (-1.0, 1.0));
        assert!(gap_stability_radius(&c, (0.3249, 1.4608), 0.2).unwrap().is_unbounded());
        assert!(matches!(gap_stability_radius(&c, (0.3249, 1.4608), 0.6), Err(Error::Precondition(_))));
        assert!(matches!(gap_stability_radius(&c, (0.0, 2.0), 0.1), Err(Error::Precondition(_))));
    }
}
