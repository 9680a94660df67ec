//! One function per subcommand. Each computes in parallel, then writes its
//! files in a fixed order.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use specgap_core::family::{
    assemble_sweep, essential_bound_functions, gap_stability_radius_with, sweep_point, ViolationKind, IN_GAP_ORDER,
};
use specgap_core::gap::{default_deltas, kb1_from_spectra, GapEvidence, RankIndex, Verdict, WeightScheme};
use specgap_core::model::{FamilySpec, OperatorSpec};
use specgap_core::symbol::{
    bands_from_samples, borg_check, branch_values, perturbation_certificate, GapCertificate, Provenance, DEFAULT_GRID,
};
use specgap_core::truncation::{
    check_classification_input, classify_counts, count_in_values, estimate_bounds, section_spectrum, BoundTolerances,
    Estimate, PointKind, SectionSpectrum, Trajectories, DEFAULT_CAP, DEFAULT_GROWTH_FACTOR, DEFAULT_N_LIST,
};

use crate::config::ConfigFile;
use crate::error::CliError;
use crate::output::{csv, float_cell, r12, r12p, r12v, write_file, write_json};

pub const DEFAULT_KMAX: usize = 8;
/// Default classification half-width, relative to the spectral scale.
pub const DEFAULT_POINT_DELTA: f64 = 0.05;
/// Number of parameter values in the default family grid.
pub const DEFAULT_X_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Json
    }
}

/// Command-line overrides of the config's `analysis` section.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub nmax: Option<usize>,
    pub kmax: Option<usize>,
    pub delta: Option<f64>,
    pub cap: Option<usize>,
    pub scheme: Option<String>,
    pub eps: Option<f64>,
}

/// Resolved parameters of one run.
#[derive(Clone, Debug)]
pub struct Params {
    pub grid: usize,
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub delta: Option<f64>,
    pub cap: usize,
    pub scheme: WeightScheme,
    pub scheme_text: String,
    pub eps: Option<f64>,
    pub format: Format,
}

fn config_err(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: message.into() }
}

/// `{nmax/8, nmax/4, nmax/2, nmax}`.
pub fn n_list_from_nmax(nmax: usize) -> Result<Vec<usize>, CliError> {
    if nmax < 16 {
        return Err(config_err("analysis.nmax", format!("nmax must be at least 16, got {nmax}")));
    }
    Ok(vec![nmax / 8, nmax / 4, nmax / 2, nmax])
}

fn parse_rank(text: &str) -> Result<RankIndex, CliError> {
    let bad = || config_err("analysis.scheme", format!("bad rank \"{text}\": use k, -k or @x"));
    if let Some(x) = text.strip_prefix('@') {
        return x.parse().map(RankIndex::NearestTo).map_err(|_| bad());
    }
    if let Some(k) = text.strip_prefix('-') {
        return k.parse().map(RankIndex::Bottom).map_err(|_| bad());
    }
    text.parse().map(RankIndex::Top).map_err(|_| bad())
}

/// `uniform`, `entry:I` or `twopoint:T:L:M`; ranks are `k` (k-th largest),
/// `-k` (k-th smallest) or `@x` (closest to `x`).
pub fn parse_scheme(text: &str) -> Result<WeightScheme, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = |m: &str| config_err("analysis.scheme", format!("{m} in \"{text}\""));
    let scheme = match parts.as_slice() {
        ["uniform"] => WeightScheme::Uniform,
        ["entry", i] => WeightScheme::SpectralEntry(i.parse().map_err(|_| bad("bad basis index"))?),
        ["twopoint", t, l, m] => WeightScheme::TwoPoint {
            t: t.parse().map_err(|_| bad("bad weight"))?,
            l: parse_rank(l)?,
            m: parse_rank(m)?,
        },
        _ => return Err(bad("unknown scheme")),
    };
    scheme.validate().map_err(|e| config_err("analysis.scheme", e.to_string()))?;
    Ok(scheme)
}

impl Params {
    pub fn resolve(config: &ConfigFile, o: &Overrides, format: Format) -> Result<Self, CliError> {
        let a = &config.analysis;
        let n_list = match (o.nmax.or(a.nmax), &a.n_list) {
            (Some(nmax), _) => n_list_from_nmax(nmax)?,
            (None, Some(list)) => list.clone(),
            (None, None) => DEFAULT_N_LIST.to_vec(),
        };
        if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("analysis.n_list", "must be nonempty, positive and strictly increasing"));
        }
        let k_max = o.kmax.or(a.kmax).unwrap_or(DEFAULT_KMAX);
        if k_max == 0 || k_max > n_list[0] {
            return Err(config_err("analysis.kmax", format!("kmax must lie in 1..={}, got {k_max}", n_list[0])));
        }
        let delta = o.delta.or(a.delta);
        if let Some(d) = delta {
            if !(d > 0.0) || !d.is_finite() {
                return Err(config_err("analysis.delta", format!("delta must be positive, got {d}")));
            }
        }
        let eps = o.eps.or(a.eps);
        if let Some(e) = eps {
            if !(e > 0.0) || !e.is_finite() {
                return Err(config_err("analysis.eps", format!("eps must be positive, got {e}")));
            }
        }
        let cap = o.cap.or(a.cap).unwrap_or(DEFAULT_CAP);
        if cap == 0 {
            return Err(config_err("analysis.cap", "cap must be at least 1"));
        }
        let scheme_text = o.scheme.clone().or(a.scheme.clone()).unwrap_or_else(|| "entry:1".into());
        let scheme = parse_scheme(&scheme_text)?;
        let grid = o.grid.or(a.grid).unwrap_or(DEFAULT_GRID);
        Ok(Self { grid, n_list, k_max, delta, cap, scheme, scheme_text, eps, format })
    }
}

fn spectra(spec: &OperatorSpec, n_list: &[usize], basis: &[usize]) -> Result<Vec<SectionSpectrum>, CliError> {
    let out: specgap_core::Result<Vec<_>> = n_list.par_iter().map(|&n| section_spectrum(spec, n, basis)).collect();
    Ok(out?)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct BandsReport {
    pub bands: Vec<[f64; 2]>,
    pub gaps: Vec<[f64; 2]>,
    pub branch_extrema: Vec<[f64; 2]>,
    pub grid_size: usize,
    pub residual: f64,
    pub connected: bool,
}

pub fn cmd_bands(spec: &OperatorSpec, params: &Params, out: &Path) -> Result<BandsReport, CliError> {
    let symbol = spec
        .symbol()?
        .ok_or_else(|| config_err("operator.kind", "bands need a matrix symbol; kind \"band\" has none"))?;
    let g = params.grid;
    if g < specgap_core::symbol::MIN_GRID {
        return Err(config_err("analysis.grid", format!("grid must be at least {}", specgap_core::symbol::MIN_GRID)));
    }
    let step = 2.0 * std::f64::consts::PI / g as f64;
    let thetas: Vec<f64> = (0..g).map(|m| m as f64 * step).collect();
    let samples: specgap_core::Result<Vec<_>> = thetas.par_iter().map(|&t| branch_values(&symbol, t)).collect();
    let sampling = bands_from_samples(&symbol, thetas, samples?)?;
    let report = BandsReport {
        bands: sampling.bands.intervals().iter().map(|&i| r12p(i)).collect(),
        gaps: sampling.gaps().into_iter().map(r12p).collect(),
        branch_extrema: sampling.branches.iter().map(|b| r12p((b.min, b.max))).collect(),
        grid_size: g,
        residual: r12(sampling.residual),
        connected: sampling.bands.is_connected(),
    };
    if params.format.json() {
        write_json(out, "bands.json", &report)?;
    }
    if params.format.csv() {
        let p = symbol.block_size();
        let mut header = vec!["theta".to_string()];
        header.extend((1..=p).map(|j| format!("lambda_{j}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = sampling.thetas.iter().zip(&sampling.samples).map(|(&t, s)| {
            std::iter::once(float_cell(t)).chain(s.iter().map(|&v| float_cell(v))).collect()
        });
        write_file(out, "branches.csv", &csv(&header, rows))?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct EstimateJson {
    pub value: f64,
    pub residual: f64,
}

impl From<Estimate> for EstimateJson {
    fn from(e: Estimate) -> Self {
        Self { value: r12(e.value), residual: r12(e.residual) }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassificationJson {
    pub point: f64,
    pub window: [f64; 2],
    pub kind: String,
    pub counts: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TruncationReport {
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub mu_hat: EstimateJson,
    pub nu_hat: EstimateJson,
    pub discrete_above: Vec<EstimateJson>,
    pub discrete_below: Vec<EstimateJson>,
    pub stall_tol: f64,
    pub cluster_tol: f64,
    pub monotonicity_defect: f64,
    pub classifications: Vec<ClassificationJson>,
}

fn kind_name(k: PointKind) -> &'static str {
    match k {
        PointKind::Essential => "essential",
        PointKind::Transient => "transient",
        PointKind::Undetermined => "undetermined",
    }
}

pub fn cmd_truncation(
    spec: &OperatorSpec,
    config: &ConfigFile,
    params: &Params,
    out: &Path,
) -> Result<TruncationReport, CliError> {
    let sections = spectra(spec, &params.n_list, &[])?;
    let values: Vec<Vec<f64>> = sections.into_iter().map(|s| s.values).collect();
    let trajs = Trajectories::from_spectra(&params.n_list, params.k_max, &values, spec.spectral_enclosure()?)?;
    let estimate = estimate_bounds(&trajs, BoundTolerances::relative_to(trajs.scale()))?;

    let points = config.analysis.points.clone().unwrap_or_else(|| {
        let mut p: Vec<f64> = estimate.discrete_above.iter().chain(&estimate.discrete_below).map(|e| e.value).collect();
        p.push(0.5 * (estimate.nu_hat.value + estimate.mu_hat.value));
        p
    });
    let delta = params.delta.unwrap_or(DEFAULT_POINT_DELTA * trajs.scale());
    let mut classifications = Vec::new();
    if check_classification_input(delta, &params.n_list).is_ok() {
        for &x in &points {
            let (lo, hi) = (x - delta, x + delta);
            let counts: Vec<(usize, usize)> =
                params.n_list.iter().zip(&values).map(|(&n, v)| (n, count_in_values(v, lo, hi))).collect();
            let class = classify_counts(&counts, (lo, hi), params.cap, DEFAULT_GROWTH_FACTOR);
            classifications.push(ClassificationJson {
                point: r12(x),
                window: r12p(class.window),
                kind: kind_name(class.kind).into(),
                counts: class.counts,
            });
        }
    }
    let report = TruncationReport {
        n_list: params.n_list.clone(),
        k_max: params.k_max,
        mu_hat: estimate.mu_hat.into(),
        nu_hat: estimate.nu_hat.into(),
        discrete_above: estimate.discrete_above.iter().map(|&e| e.into()).collect(),
        discrete_below: estimate.discrete_below.iter().map(|&e| e.into()).collect(),
        stall_tol: r12(estimate.tolerances.stall_tol),
        cluster_tol: r12(estimate.tolerances.cluster_tol),
        monotonicity_defect: r12(trajs.monotonicity_defect()),
        classifications,
    };
    if params.format.csv() {
        let rows = trajs.rows().into_iter().map(|r| {
            vec![
                r.n.to_string(),
                r.rank.to_string(),
                r.direction.as_str().to_string(),
                float_cell(r.lambda),
                r.residual.map(float_cell).unwrap_or_default(),
            ]
        });
        write_file(out, "trajectories.csv", &csv(&["n", "k", "direction", "lambda", "residual"], rows))?;
    }
    if params.format.json() {
        write_json(out, "estimate.json", &report)?;
    }
    Ok(report)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EvidenceJson {
    pub scheme: String,
    pub delta: f64,
    #[serde(rename = "K")]
    pub cap: usize,
    pub counts: Vec<(usize, usize)>,
    pub statistic: Vec<(usize, f64)>,
    pub verdict: String,
    pub centers: Vec<f64>,
    pub candidates: Vec<[f64; 2]>,
    pub hypothesis_verified: bool,
    pub bounds: Option<[f64; 2]>,
}

impl EvidenceJson {
    fn new(scheme: &str, e: &GapEvidence) -> Self {
        Self {
            scheme: scheme.into(),
            delta: r12(e.delta),
            cap: e.cap,
            counts: e.counts.clone(),
            statistic: e.statistic.iter().map(|&(n, c)| (n, r12(c))).collect(),
            verdict: match e.verdict {
                Verdict::EvidenceFound => "evidence_found",
                Verdict::NoEvidence => "no_evidence",
            }
            .into(),
            centers: r12v(&e.centers),
            candidates: e.candidates.iter().map(|&c| r12p(c)).collect(),
            hypothesis_verified: e.hypothesis_verified,
            bounds: e.bounds.map(r12p),
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct GapDetectReport {
    pub evidence: Vec<EvidenceJson>,
}

pub fn cmd_gapdetect(spec: &OperatorSpec, params: &Params, out: &Path) -> Result<GapDetectReport, CliError> {
    let sections = spectra(spec, &params.n_list, &params.scheme.basis())?;
    let enclosure = spec.spectral_enclosure()?;
    let deltas = match params.delta {
        Some(d) => vec![d],
        None => default_deltas(enclosure.0.abs().max(enclosure.1.abs())),
    };
    let evidence = deltas
        .iter()
        .map(|&d| {
            let e = kb1_from_spectra(&params.scheme, d, params.cap, &sections, enclosure)?;
            Ok(EvidenceJson::new(&params.scheme_text, &e))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = GapDetectReport { evidence };
    write_json(out, "evidence.json", &report)?;
    Ok(report)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CertificateJson {
    pub lo: f64,
    pub hi: f64,
    pub provenance: String,
    pub rho: Option<f64>,
    pub grid_size: Option<usize>,
    pub residual: f64,
}

impl From<&GapCertificate> for CertificateJson {
    fn from(c: &GapCertificate) -> Self {
        let (provenance, rho, grid_size) = match c.provenance {
            Provenance::SymbolExact { grid_size } => ("symbol_exact", None, Some(grid_size)),
            Provenance::PerturbationBound { rho } => ("perturbation_bound", Some(r12(rho)), None),
            Provenance::Kb1Evidence { .. } => ("kb1_evidence", None, None),
        };
        Self { lo: r12(c.lo), hi: r12(c.hi), provenance: provenance.into(), rho, grid_size, residual: r12(c.residual) }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct BorgJson {
    pub connected: bool,
    pub diagonal_constant: bool,
    pub ordered: bool,
    pub consistent: bool,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CertifyReport {
    pub rho: f64,
    pub constant_eigenvalues: Vec<f64>,
    pub inclusion: Vec<[f64; 2]>,
    pub certificates: Vec<CertificateJson>,
    pub borg: Option<BorgJson>,
}

pub fn cmd_certify(spec: &OperatorSpec, params: &Params, out: &Path) -> Result<CertifyReport, CliError> {
    let report = perturbation_certificate(spec, params.grid)?;
    let borg = match spec {
        OperatorSpec::Schrodinger(s) => {
            let b = borg_check(s, params.grid)?;
            Some(BorgJson {
                connected: b.connected,
                diagonal_constant: b.diagonal_constant,
                ordered: b.ordered,
                consistent: b.consistent,
            })
        }
        _ => None,
    };
    let report = CertifyReport {
        rho: r12(report.rho),
        constant_eigenvalues: r12v(&report.constant_eigenvalues),
        inclusion: report.inclusion.intervals().iter().map(|&i| r12p(i)).collect(),
        certificates: report.certificates.iter().map(Into::into).collect(),
        borg,
    };
    write_json(out, "certificates.json", &report)?;
    Ok(report)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ViolationJson {
    pub kind: String,
    pub x: f64,
    pub x_next: Option<f64>,
    pub n: usize,
    pub k: usize,
    pub direction: String,
    pub excess: f64,
}

/// Neighbouring bound estimates further apart than `L |x - x'|` allows.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ContinuityJson {
    pub x: f64,
    pub x_next: f64,
    pub direction: String,
    pub excess: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundJson {
    pub x: f64,
    pub nu_hat: EstimateJson,
    pub mu_hat: EstimateJson,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct StabilityJson {
    pub gap: [f64; 2],
    pub eps: f64,
    pub persisted: [f64; 2],
    pub distance: f64,
    pub m_resolvent: f64,
    pub budget: f64,
    pub lipschitz: f64,
    /// `null` when unbounded.
    pub delta: Option<f64>,
    pub unbounded: bool,
    pub grid_size: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FamilyReport {
    pub x_grid: Vec<f64>,
    pub n_list: Vec<usize>,
    pub k_max: usize,
    pub lipschitz: f64,
    pub violations: Vec<ViolationJson>,
    pub bounds: Vec<BoundJson>,
    pub bound_violations: Vec<ContinuityJson>,
    /// `[n, n', sup_x |lambda_{1,n}(x) - lambda_{1,n'}(x)|]`.
    pub uniform_top_differences: Vec<(usize, usize, f64)>,
    pub stability: Option<StabilityJson>,
}

fn default_x_grid(family: &FamilySpec) -> Vec<f64> {
    let (lo, hi) = family.domain;
    if lo == hi {
        return vec![lo];
    }
    let m = DEFAULT_X_POINTS - 1;
    (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
}

pub fn cmd_family(config: &ConfigFile, params: &Params, out: &Path) -> Result<FamilyReport, CliError> {
    let family = config
        .operator
        .family()?
        .ok_or_else(|| config_err("operator.family", "the family command needs a family"))?;
    let x_grid = config.analysis.x_grid.clone().unwrap_or_else(|| default_x_grid(&family));
    if x_grid.is_empty() || x_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(config_err("analysis.x_grid", "must be nonempty and strictly increasing"));
    }
    if let Some(&x) = x_grid.iter().find(|&&x| !(family.domain.0 <= x && x <= family.domain.1)) {
        return Err(config_err("analysis.x_grid", format!("{x} lies outside the family domain")));
    }
    let points: specgap_core::Result<Vec<_>> =
        x_grid.par_iter().map(|&x| sweep_point(&family, x, &params.n_list, params.k_max)).collect();
    let table = assemble_sweep(&family, points?)?;
    let bounds = essential_bound_functions(&table)?;

    let stability = match config.analysis.gap {
        None => None,
        Some([a, b]) => {
            let eps = params.eps.unwrap_or(0.25 * (b - a));
            let r = gap_stability_radius_with(&family, (a, b), eps, params.grid, IN_GAP_ORDER)?;
            Some(StabilityJson {
                gap: r12p(r.gap),
                eps: r12(r.eps),
                persisted: r12p(r.persisted),
                distance: r12(r.distance),
                m_resolvent: r12(r.m_resolvent),
                budget: r12(r.budget),
                lipschitz: r12(r.lipschitz),
                delta: (!r.is_unbounded()).then(|| r12(r.delta)),
                unbounded: r.is_unbounded(),
                grid_size: r.grid_size,
            })
        }
    };
    let report = FamilyReport {
        x_grid: r12v(&table.x_grid),
        n_list: table.n_list.clone(),
        k_max: table.k_max,
        lipschitz: r12(table.lipschitz),
        violations: table
            .violations
            .iter()
            .map(|v| ViolationJson {
                kind: match v.kind {
                    ViolationKind::Monotonicity => "monotonicity",
                    ViolationKind::Equicontinuity => "equicontinuity",
                }
                .into(),
                x: r12(v.x),
                x_next: v.x_next.map(r12),
                n: v.n,
                k: v.rank,
                direction: v.direction.as_str().into(),
                excess: r12(v.excess),
            })
            .collect(),
        bounds: bounds
            .points
            .iter()
            .map(|p| BoundJson { x: r12(p.x), nu_hat: p.nu_hat.into(), mu_hat: p.mu_hat.into() })
            .collect(),
        bound_violations: bounds
            .violations
            .iter()
            .map(|v| ContinuityJson {
                x: r12(v.x),
                x_next: r12(v.x_next),
                direction: v.direction.as_str().into(),
                excess: r12(v.excess),
            })
            .collect(),
        uniform_top_differences: table.uniform_top_differences().into_iter().map(|(a, b, d)| (a, b, r12(d))).collect(),
        stability,
    };
    if params.format.csv() {
        let rows = table.rows().into_iter().map(|r| {
            vec![float_cell(r.x), r.n.to_string(), r.rank.to_string(), r.direction.as_str().into(), float_cell(r.lambda)]
        });
        write_file(out, "sweep.csv", &csv(&["x", "n", "k", "direction", "lambda"], rows))?;
    }
    if params.format.json() {
        write_json(out, "stability.json", &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schemes() {
        assert_eq!(parse_scheme("uniform").unwrap(), WeightScheme::Uniform);
        assert_eq!(parse_scheme("entry:3").unwrap(), WeightScheme::SpectralEntry(3));
        assert_eq!(
            parse_scheme("twopoint:0.5:@0.3249:-2").unwrap(),
            WeightScheme::TwoPoint { t: 0.5, l: RankIndex::NearestTo(0.3249), m: RankIndex::Bottom(2) }
        );
        assert!(parse_scheme("twopoint:1.5:1:2").is_err());
        assert!(parse_scheme("entry:0").is_err());
        assert!(parse_scheme("median").is_err());
    }

    #[test]
    fn n_list_from_max() {
        assert_eq!(n_list_from_nmax(1600).unwrap(), vec![200, 400, 800, 1600]);
        assert!(n_list_from_nmax(8).is_err());
    }
}
