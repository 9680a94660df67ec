//! JSON run configuration.
//!
//! ```json
//! {
//!   "operator": { "kind": "schrodinger", "potential": [1, 2, 3], "lattice": "full" },
//!   "analysis": { "nmax": 1600 }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use specgap_core::model::{
    ExplicitBand, FamilySpec, JacobiSpec, Lattice, MatrixSymbol, OperatorSpec, Polynomial, SchrodingerSpec,
};
use specgap_core::Complex64;

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub operator: OperatorConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[default]
    Schrodinger,
    Jacobi,
    Symbol,
    Band,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum LatticeName {
    #[default]
    Half,
    Full,
}

impl From<LatticeName> for Lattice {
    fn from(l: LatticeName) -> Self {
        match l {
            LatticeName::Half => Lattice::Half,
            LatticeName::Full => Lattice::Full,
        }
    }
}

/// A matrix entry: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Entry> for Complex64 {
    fn from(e: Entry) -> Self {
        match e {
            Entry::Real(re) => Complex64::new(re, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: Kind,
    pub period: Option<usize>,
    pub potential: Option<Vec<f64>>,
    /// Corner coefficients `a_k` keyed by `k`.
    pub corner: Option<BTreeMap<String, f64>>,
    pub lattice: Option<LatticeName>,
    pub offdiag: Option<Vec<f64>>,
    pub diag: Option<Vec<f64>>,
    pub family: Option<FamilyConfig>,
    pub ordered: Option<bool>,
    pub rotation: Option<usize>,
    /// Symbol blocks `A_k` keyed by `k`; missing `A_{-k}` default to `A_k^*`.
    pub blocks: Option<BTreeMap<String, Vec<Vec<Entry>>>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// Ascending-power coefficients of `a_i(x)`, one list per cell site.
    pub coeffs: Vec<Vec<f64>>,
    pub domain: [f64; 2],
    pub lipschitz: Option<f64>,
}

/// Command parameters; command-line flags take precedence.
#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub grid: Option<usize>,
    pub nmax: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub kmax: Option<usize>,
    pub delta: Option<f64>,
    pub cap: Option<usize>,
    pub scheme: Option<String>,
    pub eps: Option<f64>,
    pub gap: Option<[f64; 2]>,
    pub x_grid: Option<Vec<f64>>,
    /// Points to classify as essential or transient.
    pub points: Option<Vec<f64>>,
}

fn config_err(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: message.into() }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(if path == "." { "" } else { &path }, e.into_inner().to_string())
    })
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err("", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn require<'a, T>(value: &'a Option<T>, path: &str, kind: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| config_err(path, format!("required for kind \"{kind}\"")))
}

fn forbid<T>(value: &Option<T>, path: &str, kind: &str) -> Result<(), CliError> {
    match value {
        Some(_) => Err(config_err(path, format!("not used by kind \"{kind}\""))),
        None => Ok(()),
    }
}

fn check_period(cfg: &OperatorConfig, actual: usize, source: &str) -> Result<(), CliError> {
    match cfg.period {
        Some(p) if p != actual => {
            Err(config_err("operator.period", format!("period {p} does not match {actual} entries in {source}")))
        }
        _ => Ok(()),
    }
}

fn parse_index(key: &str, path: &str) -> Result<i64, CliError> {
    key.trim().parse().map_err(|_| config_err(&format!("{path}.{key}"), "key must be an integer"))
}

fn core_err(path: &str) -> impl Fn(specgap_core::Error) -> CliError + '_ {
    move |e| config_err(path, e.to_string())
}

impl OperatorConfig {
    fn lattice(&self) -> Lattice {
        self.lattice.unwrap_or_default().into()
    }

    fn schrodinger(&self) -> Result<SchrodingerSpec, CliError> {
        let potential = match (&self.potential, &self.family) {
            (Some(p), _) => p.clone(),
            (None, Some(f)) => f.coeffs.iter().map(|c| Polynomial(c.clone()).eval(0.0)).collect(),
            (None, None) => return Err(config_err("operator.potential", "required for kind \"schrodinger\"")),
        };
        check_period(self, potential.len(), "operator.potential")?;
        let corner = match &self.corner {
            None => BTreeMap::from([(1, 1.0)]),
            Some(map) => map
                .iter()
                .map(|(k, &a)| Ok((parse_index(k, "operator.corner")?, a)))
                .collect::<Result<_, CliError>>()?,
        };
        let spec = SchrodingerSpec::new(potential, corner, self.lattice()).map_err(core_err("operator"))?;
        spec.with_ordered(self.ordered.unwrap_or(false)).map_err(core_err("operator.ordered"))
    }

    fn symbol(&self) -> Result<MatrixSymbol, CliError> {
        let blocks = require(&self.blocks, "operator.blocks", "symbol")?;
        let mut coeffs: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
        let mut size = None;
        for (key, rows) in blocks {
            let path = format!("operator.blocks.{key}");
            let k = parse_index(key, "operator.blocks")?;
            let p = rows.len();
            if p == 0 || rows.iter().any(|r| r.len() != p) {
                return Err(config_err(&path, "block must be a nonempty square matrix"));
            }
            if *size.get_or_insert(p) != p {
                return Err(config_err(&path, "all blocks must have the same size"));
            }
            coeffs.insert(k, rows.iter().flatten().map(|&e| e.into()).collect());
        }
        let p = size.ok_or_else(|| config_err("operator.blocks", "at least one block is required"))?;
        check_period(self, p, "operator.blocks")?;
        let given: Vec<i64> = coeffs.keys().copied().collect();
        for k in given {
            if !coeffs.contains_key(&-k) {
                let a = &coeffs[&k];
                let adjoint = (0..p * p).map(|idx| a[(idx % p) * p + idx / p].conj()).collect();
                coeffs.insert(-k, adjoint);
            }
        }
        MatrixSymbol::new(p, coeffs).map_err(core_err("operator.blocks"))
    }

    /// The operator described by this section.
    pub fn operator(&self) -> Result<OperatorSpec, CliError> {
        match self.kind {
            Kind::Schrodinger => {
                for (v, path) in [(&self.offdiag, "operator.offdiag"), (&self.diag, "operator.diag")] {
                    forbid(v, path, "schrodinger")?;
                }
                forbid(&self.rotation, "operator.rotation", "schrodinger")?;
                forbid(&self.blocks, "operator.blocks", "schrodinger")?;
                Ok(self.schrodinger()?.into())
            }
            Kind::Jacobi => {
                forbid(&self.potential, "operator.potential", "jacobi")?;
                forbid(&self.corner, "operator.corner", "jacobi")?;
                forbid(&self.family, "operator.family", "jacobi")?;
                forbid(&self.blocks, "operator.blocks", "jacobi")?;
                forbid(&self.ordered, "operator.ordered", "jacobi")?;
                let diag = require(&self.diag, "operator.diag", "jacobi")?.clone();
                let offdiag = require(&self.offdiag, "operator.offdiag", "jacobi")?.clone();
                check_period(self, diag.len(), "operator.diag")?;
                let spec = JacobiSpec::new(offdiag, diag, self.lattice()).map_err(core_err("operator"))?;
                Ok(spec.with_rotation(self.rotation.unwrap_or(0)).map_err(core_err("operator.rotation"))?.into())
            }
            Kind::Symbol => {
                for (v, path) in
                    [(&self.potential, "operator.potential"), (&self.offdiag, "operator.offdiag"), (&self.diag, "operator.diag")]
                {
                    forbid(v, path, "symbol")?;
                }
                forbid(&self.corner, "operator.corner", "symbol")?;
                forbid(&self.family, "operator.family", "symbol")?;
                forbid(&self.rotation, "operator.rotation", "symbol")?;
                forbid(&self.ordered, "operator.ordered", "symbol")?;
                Ok(OperatorSpec::Laurent { symbol: self.symbol()?, lattice: self.lattice() })
            }
            Kind::Band => {
                forbid(&self.potential, "operator.potential", "band")?;
                forbid(&self.corner, "operator.corner", "band")?;
                forbid(&self.family, "operator.family", "band")?;
                forbid(&self.rotation, "operator.rotation", "band")?;
                forbid(&self.blocks, "operator.blocks", "band")?;
                forbid(&self.ordered, "operator.ordered", "band")?;
                let diag = require(&self.diag, "operator.diag", "band")?.clone();
                check_period(self, diag.len(), "operator.diag")?;
                let hops = self.offdiag.clone().unwrap_or_default();
                Ok(ExplicitBand::periodic(self.lattice(), diag, hops).map_err(core_err("operator"))?.into())
            }
        }
    }

    /// The family, if the section declares one.
    pub fn family(&self) -> Result<Option<FamilySpec>, CliError> {
        let Some(f) = &self.family else { return Ok(None) };
        if self.kind != Kind::Schrodinger {
            return Err(config_err("operator.family", "families are only supported for kind \"schrodinger\""));
        }
        let base = self.schrodinger()?;
        if self.potential.is_some() {
            let at_zero: Vec<f64> = f.coeffs.iter().map(|c| Polynomial(c.clone()).eval(0.0)).collect();
            if at_zero != base.potential {
                return Err(config_err("operator.family.coeffs", "a_i(0) must equal operator.potential"));
            }
        }
        let coeffs = f.coeffs.iter().cloned().map(Polynomial).collect();
        let family = FamilySpec::new(base, coeffs, (f.domain[0], f.domain[1])).map_err(core_err("operator.family"))?;
        match f.lipschitz {
            Some(l) => family.with_lipschitz_bound(l).map(Some).map_err(core_err("operator.family.lipschitz")),
            None => Ok(Some(family)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_reports_path() {
        let err = parse_config(r#"{"operator": {"kind": "schrodinger", "potental": [1, 2]}}"#).unwrap_err();
        match err {
            CliError::Config { path, message } => {
                assert_eq!(path, "operator.potental");
                assert!(message.contains("potental"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn negative_period_reports_path() {
        let err = parse_config(r#"{"operator": {"kind": "schrodinger", "period": -3}}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { ref path, .. } if path == "operator.period"), "{err:?}");
    }

    #[test]
    fn counterexample_symbol_from_corner() {
        let cfg = parse_config(
            r#"{"operator": {"kind": "schrodinger", "potential": [1, 2, 2, 1], "corner": {"1": 5, "-1": 5}}}"#,
        )
        .unwrap();
        let symbol = cfg.operator.operator().unwrap().symbol().unwrap().unwrap();
        let f = symbol.evaluate(0.0).unwrap();
        assert_eq!(f.get(0, 3).re, 10.0);
    }

    #[test]
    fn symbol_blocks_fill_adjoints() {
        let cfg = parse_config(
            r#"{"operator": {"kind": "symbol", "blocks": {"0": [[1, 1], [1, 2]], "1": [[0, 0], [[0, 1], 0]]}}}"#,
        )
        .unwrap();
        let symbol = cfg.operator.operator().unwrap().symbol().unwrap().unwrap();
        assert_eq!(symbol.coeff(-1, 0, 1), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn period_mismatch() {
        let cfg = parse_config(r#"{"operator": {"kind": "schrodinger", "period": 2, "potential": [1, 2, 3]}}"#).unwrap();
        assert!(matches!(cfg.operator.operator(), Err(CliError::Config { ref path, .. }) if path == "operator.period"));
    }

    #[test]
    fn family_from_coefficients() {
        let cfg = parse_config(
            r#"{"operator": {"kind": "schrodinger", "lattice": "full",
                "family": {"coeffs": [[1, 1], [2], [3]], "domain": [-1, 1]}}}"#,
        )
        .unwrap();
        let family = cfg.operator.family().unwrap().unwrap();
        assert_eq!(family.base.potential, vec![1.0, 2.0, 3.0]);
        assert_eq!(family.lipschitz(), 1.0);
    }
}
