//! Operator, symbol and family descriptions, and their finite sections.
//!
//! Every operator acts on `l2(N)` (half line, sites `0, 1, 2, ...`) or on
//! `l2(Z)` (full line). Basis vector `e_1` is site 0 in both cases. On the
//! full line the basis is enumerated from the center outwards,
//! `0, 1, -1, 2, -2, ...`, so the first `n` basis vectors always cover a
//! contiguous window of sites and sections are nested.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::fmt;
use num_complex::Complex64;

use crate::eigen::{eigh, BandMatrix, HermitianMatrix};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lattice {
    /// `l2(N)`.
    Half,
    /// `l2(Z)`.
    Full,
}

/// Site of the `q`-th basis vector (0-based).
pub fn site_of(lattice: Lattice, q: usize) -> i64 {
    let q = q as i64;
    match lattice {
        Lattice::Half => q,
        Lattice::Full if q % 2 == 1 => (q + 1) / 2,
        Lattice::Full => -q / 2,
    }
}

/// First site of the window spanned by the first `n` basis vectors.
pub fn window_start(lattice: Lattice, n: usize) -> i64 {
    match lattice {
        Lattice::Half => 0,
        Lattice::Full => -((n as i64 - 1).max(0) / 2),
    }
}

/// Hermitian-matrix-valued trigonometric polynomial
/// `f(theta) = sum_k A_k e^{ik theta}` given by its `p x p` coefficient
/// blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSymbol {
    block_size: usize,
    /// Row-major `p x p` blocks, zero blocks dropped.
    coeffs: BTreeMap<i64, Vec<Complex64>>,
}

impl MatrixSymbol {
    /// Checks block shapes and `A_{-k} = A_k^*`.
    pub fn new(block_size: usize, coeffs: BTreeMap<i64, Vec<Complex64>>) -> Result<Self> {
        let p = block_size;
        if p == 0 {
            return Err(Error::InvalidSpec("block size must be positive".into()));
        }
        let mut scale = 0.0f64;
        for (k, block) in &coeffs {
            if block.len() != p * p {
                return Err(Error::InvalidSpec(format!("block {k} has {} entries, expected {}", block.len(), p * p)));
            }
            if block.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidSpec(format!("block {k} has non-finite entries")));
            }
            scale = scale.max(block.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let zero_block = vec![ZERO; p * p];
        for (&k, block) in &coeffs {
            let mirror = coeffs.get(&-k).unwrap_or(&zero_block);
            for s in 0..p {
                for t in 0..p {
                    if (block[s * p + t] - mirror[t * p + s].conj()).norm() > 1e-12 * scale.max(1.0) {
                        return Err(Error::InvalidSpec(format!(
                            "A_{} is not the conjugate transpose of A_{k} at ({}, {})",
                            -k,
                            t + 1,
                            s + 1
                        )));
                    }
                }
            }
        }
        let coeffs = coeffs.into_iter().filter(|(_, b)| b.iter().any(|z| *z != ZERO)).collect();
        Ok(Self { block_size, coeffs })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Largest `|k|` with a nonzero block.
    pub fn bandwidth(&self) -> usize {
        self.coeffs.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, Vec<Complex64>> {
        &self.coeffs
    }

    /// `(A_k)_{s,t}`, 0-based.
    pub fn coeff(&self, k: i64, s: usize, t: usize) -> Complex64 {
        self.coeffs.get(&k).map_or(ZERO, |b| b[s * self.block_size + t])
    }

    pub fn evaluate(&self, theta: f64) -> Result<HermitianMatrix> {
        let p = self.block_size;
        let mut data = vec![ZERO; p * p];
        for (&k, block) in &self.coeffs {
            let phase = Complex64::from_polar(1.0, k as f64 * theta);
            for (d, b) in data.iter_mut().zip(block) {
                *d += b * phase;
            }
        }
        HermitianMatrix::from_row_major(p, data)
    }

    /// Entry of the block Laurent operator between sites `i` and `j`.
    pub fn laurent_entry(&self, i: i64, j: i64) -> Complex64 {
        let p = self.block_size as i64;
        let k = i.div_euclid(p) - j.div_euclid(p);
        self.coeff(k, i.rem_euclid(p) as usize, j.rem_euclid(p) as usize)
    }

    /// Largest site distance `|i - j|` with a nonzero operator entry.
    pub fn reach(&self) -> usize {
        let p = self.block_size as i64;
        let mut reach = 0;
        for (&k, block) in &self.coeffs {
            for s in 0..p {
                for t in 0..p {
                    if block[(s * p + t) as usize] != ZERO {
                        reach = reach.max((k * p + s - t).unsigned_abs() as usize);
                    }
                }
            }
        }
        reach
    }

    /// Gershgorin enclosure of the Laurent operator's spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let p = self.block_size;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..p {
            let center = self.coeff(0, s, s).re;
            let mut radius = 0.0;
            for (&k, block) in &self.coeffs {
                for t in 0..p {
                    if !(k == 0 && t == s) {
                        radius += block[s * p + t].norm();
                    }
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        (lo, hi)
    }
}

/// Periodic discrete Schrödinger operator with hopping 1 and a corner
/// perturbation: its symbol is tridiagonal with diagonal `b` plus
/// `f(theta) = sum_k a_k e^{ik theta}` in the `(1, p)` corner.
#[derive(Clone, Debug, PartialEq)]
pub struct SchrodingerSpec {
    pub potential: Vec<f64>,
    pub corner: BTreeMap<i64, f64>,
    pub lattice: Lattice,
    /// Declares `b_1 <= ... <= b_p`; checked by [`SchrodingerSpec::validate`].
    pub ordered: bool,
}

impl SchrodingerSpec {
    pub fn new(potential: Vec<f64>, corner: BTreeMap<i64, f64>, lattice: Lattice) -> Result<Self> {
        let spec = Self { potential, corner, lattice, ordered: false };
        spec.validate()?;
        Ok(spec)
    }

    /// The plain nearest-neighbour operator: `f(theta) = e^{i theta}`.
    pub fn nearest_neighbour(potential: Vec<f64>, lattice: Lattice) -> Result<Self> {
        Self::new(potential, BTreeMap::from([(1, 1.0)]), lattice)
    }

    pub fn with_ordered(mut self, ordered: bool) -> Result<Self> {
        self.ordered = ordered;
        self.validate()?;
        Ok(self)
    }

    pub fn period(&self) -> usize {
        self.potential.len()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.potential.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.potential.len() < 2 {
            return Err(Error::InvalidSpec(format!("period must be at least 2, got {}", self.potential.len())));
        }
        if self.potential.iter().chain(self.corner.values()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite coefficient".into()));
        }
        if self.ordered && !self.is_nondecreasing() {
            return Err(Error::InvalidSpec("potential declared ordered but is not nondecreasing".into()));
        }
        Ok(())
    }

    /// `f(theta)`.
    pub fn corner_value(&self, theta: f64) -> Complex64 {
        self.corner.iter().map(|(&k, &a)| Complex64::from_polar(a, k as f64 * theta)).sum()
    }
}

/// Periodic Jacobi matrix: `J[n][n] = b_n`, `J[n][n+1] = a_n`, with
/// `a_{n+p} = a_n > 0` and `b_{n+p} = b_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiSpec {
    pub offdiag: Vec<f64>,
    pub diag: Vec<f64>,
    /// Which period cell the symbol starts at, `0..p`.
    pub rotation: usize,
    pub lattice: Lattice,
}

impl JacobiSpec {
    pub fn new(offdiag: Vec<f64>, diag: Vec<f64>, lattice: Lattice) -> Result<Self> {
        let spec = Self { offdiag, diag, rotation: 0, lattice };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rotation(mut self, rotation: usize) -> Result<Self> {
        self.rotation = rotation;
        self.validate()?;
        Ok(self)
    }

    pub fn period(&self) -> usize {
        self.diag.len()
    }

    /// Coefficient of `e^{i theta}` in the symbol corner.
    pub fn corner_coeff(&self) -> f64 {
        let p = self.period();
        self.offdiag[(self.rotation + p - 1) % p]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.diag.len();
        if p < 2 {
            return Err(Error::InvalidSpec(format!("period must be at least 2, got {p}")));
        }
        if self.offdiag.len() != p {
            return Err(Error::InvalidSpec(format!("expected {p} off-diagonal entries, got {}", self.offdiag.len())));
        }
        if let Some(a) = self.offdiag.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidSpec(format!("off-diagonal entries must be positive, got {a}")));
        }
        if self.diag.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSpec("non-finite diagonal entry".into()));
        }
        if self.rotation >= p {
            return Err(Error::InvalidSpec(format!("rotation {} outside 0..{p}", self.rotation)));
        }
        Ok(())
    }
}

type EntryRule = dyn Fn(i64, i64) -> Complex64 + Send + Sync;

/// Band operator given by an entry rule on sites.
#[derive(Clone)]
pub struct ExplicitBand {
    pub lattice: Lattice,
    pub bandwidth: usize,
    /// Declared bound on the operator norm; used as the spectral enclosure.
    pub norm_bound: f64,
    entry: Arc<EntryRule>,
}

impl ExplicitBand {
    /// `entry(i, j)` is only consulted for `|i - j| <= bandwidth` and must
    /// satisfy `entry(i, j) = conj(entry(j, i))`.
    pub fn new(
        lattice: Lattice,
        bandwidth: usize,
        norm_bound: f64,
        entry: impl Fn(i64, i64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { lattice, bandwidth, norm_bound, entry: Arc::new(entry) }
    }

    /// Real symmetric operator with `p`-periodic diagonal and hopping
    /// `hops[d - 1]` between sites at distance `d`.
    pub fn periodic(lattice: Lattice, diag: Vec<f64>, hops: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidSpec("diagonal must not be empty".into()));
        }
        if diag.iter().chain(&hops).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite coefficient".into()));
        }
        let bound = diag.iter().fold(0.0f64, |m, b| m.max(b.abs())) + 2.0 * hops.iter().map(|h| h.abs()).sum::<f64>();
        let p = diag.len() as i64;
        let w = hops.len();
        Ok(Self::new(lattice, w, bound, move |i, j| {
            let d = (i - j).unsigned_abs() as usize;
            let v = if d == 0 { diag[i.rem_euclid(p) as usize] } else { hops[d - 1] };
            Complex64::new(v, 0.0)
        }))
    }

    pub fn entry(&self, i: i64, j: i64) -> Complex64 {
        if (i - j).unsigned_abs() as usize > self.bandwidth {
            ZERO
        } else {
            (self.entry)(i, j)
        }
    }
}

impl fmt::Debug for ExplicitBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExplicitBand")
            .field("lattice", &self.lattice)
            .field("bandwidth", &self.bandwidth)
            .field("norm_bound", &self.norm_bound)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum OperatorSpec {
    Schrodinger(SchrodingerSpec),
    Jacobi(JacobiSpec),
    Laurent { symbol: MatrixSymbol, lattice: Lattice },
    Band(ExplicitBand),
}

impl From<SchrodingerSpec> for OperatorSpec {
    fn from(s: SchrodingerSpec) -> Self {
        OperatorSpec::Schrodinger(s)
    }
}

impl From<JacobiSpec> for OperatorSpec {
    fn from(s: JacobiSpec) -> Self {
        OperatorSpec::Jacobi(s)
    }
}

impl From<ExplicitBand> for OperatorSpec {
    fn from(b: ExplicitBand) -> Self {
        OperatorSpec::Band(b)
    }
}

/// Validated operator reduced to an entry rule on sites.
#[derive(Clone, Debug)]
pub(crate) enum Operator {
    Laurent { symbol: MatrixSymbol, lattice: Lattice, reach: usize },
    Band(ExplicitBand),
}

impl Operator {
    pub(crate) fn entry(&self, i: i64, j: i64) -> Complex64 {
        match self {
            Operator::Laurent { symbol, reach, .. } => {
                if (i - j).unsigned_abs() as usize > *reach {
                    ZERO
                } else {
                    symbol.laurent_entry(i, j)
                }
            }
            Operator::Band(b) => b.entry(i, j),
        }
    }

    pub(crate) fn lattice(&self) -> Lattice {
        match self {
            Operator::Laurent { lattice, .. } => *lattice,
            Operator::Band(b) => b.lattice,
        }
    }

    pub(crate) fn reach(&self) -> usize {
        match self {
            Operator::Laurent { reach, .. } => *reach,
            Operator::Band(b) => b.bandwidth,
        }
    }

    pub(crate) fn enclosure(&self) -> (f64, f64) {
        match self {
            Operator::Laurent { symbol, .. } => symbol.gershgorin(),
            Operator::Band(b) => (-b.norm_bound, b.norm_bound),
        }
    }
}

impl OperatorSpec {
    pub(crate) fn prepare(&self) -> Result<Operator> {
        let (symbol, lattice) = match self {
            OperatorSpec::Schrodinger(s) => (schrodinger_symbol(s)?, s.lattice),
            OperatorSpec::Jacobi(j) => (jacobi_symbol(&JacobiSpec { rotation: 0, ..j.clone() })?, j.lattice),
            OperatorSpec::Laurent { symbol, lattice } => (symbol.clone(), *lattice),
            OperatorSpec::Band(b) => {
                if !(b.norm_bound >= 0.0) {
                    return Err(Error::InvalidSpec("norm bound must be nonnegative".into()));
                }
                return Ok(Operator::Band(b.clone()));
            }
        };
        let reach = symbol.reach();
        Ok(Operator::Laurent { symbol, lattice, reach })
    }

    pub fn lattice(&self) -> Lattice {
        match self {
            OperatorSpec::Schrodinger(s) => s.lattice,
            OperatorSpec::Jacobi(j) => j.lattice,
            OperatorSpec::Laurent { lattice, .. } => *lattice,
            OperatorSpec::Band(b) => b.lattice,
        }
    }

    /// The matrix symbol, for every kind except explicit bands. Jacobi specs
    /// give the symbol of their rotation.
    pub fn symbol(&self) -> Result<Option<MatrixSymbol>> {
        Ok(match self {
            OperatorSpec::Schrodinger(s) => Some(schrodinger_symbol(s)?),
            OperatorSpec::Jacobi(j) => Some(jacobi_symbol(j)?),
            OperatorSpec::Laurent { symbol, .. } => Some(symbol.clone()),
            OperatorSpec::Band(_) => None,
        })
    }

    /// Operator entry between sites `i` and `j`.
    pub fn entry(&self, i: i64, j: i64) -> Result<Complex64> {
        Ok(self.prepare()?.entry(i, j))
    }

    /// Largest site distance with a nonzero entry.
    pub fn reach(&self) -> Result<usize> {
        Ok(self.prepare()?.reach())
    }

    /// Interval `[m, M]` containing the spectrum: Gershgorin discs for
    /// Laurent operators, the declared norm bound for explicit bands.
    pub fn spectral_enclosure(&self) -> Result<(f64, f64)> {
        Ok(self.prepare()?.enclosure())
    }
}

/// Symbol of a Schrödinger spec: diagonal `b`, ones next to the diagonal,
/// `f(theta)` in the `(1, p)` corner (added onto the off-diagonal when
/// `p = 2`).
pub fn schrodinger_symbol(spec: &SchrodingerSpec) -> Result<MatrixSymbol> {
    spec.validate()?;
    let p = spec.period();
    let mut coeffs: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
    let mut a0 = vec![ZERO; p * p];
    for s in 0..p {
        a0[s * p + s] = spec.potential[s].into();
        if s + 1 < p {
            a0[s * p + s + 1] = 1.0.into();
            a0[(s + 1) * p + s] = 1.0.into();
        }
    }
    coeffs.insert(0, a0);
    for (&k, &a) in &spec.corner {
        for (key, s, t) in [(k, 0, p - 1), (-k, p - 1, 0)] {
            coeffs.entry(key).or_insert_with(|| vec![ZERO; p * p])[s * p + t] += a;
        }
    }
    MatrixSymbol::new(p, coeffs)
}

/// Symbol `f_k(theta)` of a periodic Jacobi matrix for the spec's rotation
/// `k`: diagonal `b_{k+1}, ..., b_{k+p}`, off-diagonals
/// `a_{k+1}, ..., a_{k+p-1}` and `e^{i theta} a_{k+p}` in the corner
/// (indices mod `p`).
pub fn jacobi_symbol(spec: &JacobiSpec) -> Result<MatrixSymbol> {
    spec.validate()?;
    let p = spec.period();
    let k = spec.rotation;
    let mut a0 = vec![ZERO; p * p];
    for s in 0..p {
        a0[s * p + s] = spec.diag[(k + s) % p].into();
        if s + 1 < p {
            let a = spec.offdiag[(k + s) % p];
            a0[s * p + s + 1] = a.into();
            a0[(s + 1) * p + s] = a.into();
        }
    }
    let corner = spec.corner_coeff();
    let mut a1 = vec![ZERO; p * p];
    a1[p - 1] = corner.into();
    let mut am1 = vec![ZERO; p * p];
    am1[(p - 1) * p] = corner.into();
    MatrixSymbol::new(p, BTreeMap::from([(0, a0), (1, a1), (-1, am1)]))
}

/// Real polynomial with coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(self.0.iter().enumerate().skip(1).map(|(j, &c)| j as f64 * c).collect())
    }

    /// `sum_j |c_j| r^j`, a bound for `|p(x)|` on `|x| <= r`.
    pub fn abs_bound(&self, r: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }
}

/// Schrödinger operators whose potential entries are polynomials in a real
/// parameter `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    /// Spec at `x = 0`; its potential is `a_i(0)`.
    pub base: SchrodingerSpec,
    pub coeffs: Vec<Polynomial>,
    pub domain: (f64, f64),
    /// Overrides the computed bound on `sup ||A'(x)||`.
    pub lipschitz_bound: Option<f64>,
}

impl FamilySpec {
    /// Replaces the base potential by `a_i(0)`.
    pub fn new(base: SchrodingerSpec, coeffs: Vec<Polynomial>, domain: (f64, f64)) -> Result<Self> {
        let mut base = base;
        base.potential = coeffs.iter().map(|c| c.eval(0.0)).collect();
        let family = Self { base, coeffs, domain, lipschitz_bound: None };
        family.validate()?;
        Ok(family)
    }

    pub fn with_lipschitz_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::InvalidSpec(format!("Lipschitz bound must be finite and nonnegative, got {bound}")));
        }
        self.lipschitz_bound = Some(bound);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(lo <= 0.0 && 0.0 <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidSpec(format!("domain [{lo}, {hi}] must be finite and contain 0")));
        }
        if self.coeffs.len() != self.base.period() {
            return Err(Error::InvalidSpec(format!(
                "{} coefficient polynomials for period {}",
                self.coeffs.len(),
                self.base.period()
            )));
        }
        if self.coeffs.iter().any(|c| c.0.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidSpec("non-finite polynomial coefficient".into()));
        }
        for (c, &b) in self.coeffs.iter().zip(&self.base.potential) {
            if c.eval(0.0) != b {
                return Err(Error::InvalidSpec("base potential differs from a_i(0)".into()));
            }
        }
        self.base.validate()
    }

    /// `sup_x ||A'(x)||` over the domain: the override if set, else
    /// `max_i sum_j j |c_ij| R^{j-1}` with `R = max(|x_lo|, |x_hi|)`.
    pub fn lipschitz(&self) -> f64 {
        if let Some(l) = self.lipschitz_bound {
            return l;
        }
        let r = self.domain.0.abs().max(self.domain.1.abs());
        self.coeffs.iter().map(|c| c.derivative().abs_bound(r)).fold(0.0, f64::max)
    }
}

/// The family member at `x`.
pub fn family_evaluate(family: &FamilySpec, x: f64) -> Result<SchrodingerSpec> {
    let (lo, hi) = family.domain;
    if !(lo <= x && x <= hi) {
        return Err(Error::Domain { x, lo, hi });
    }
    let spec = SchrodingerSpec {
        potential: family.coeffs.iter().map(|c| c.eval(x)).collect(),
        ..family.base.clone()
    };
    spec.validate()?;
    Ok(spec)
}

/// `A_n = P_n A P_n` in basis enumeration order.
pub fn truncate(spec: &OperatorSpec, n: usize) -> Result<HermitianMatrix> {
    if n == 0 {
        return Err(Error::Contract("section order must be positive".into()));
    }
    let op = spec.prepare()?;
    section_dense(&op, n)
}

pub(crate) fn section_dense(op: &Operator, n: usize) -> Result<HermitianMatrix> {
    let sites: Vec<i64> = (0..n).map(|q| site_of(op.lattice(), q)).collect();
    HermitianMatrix::from_fn(n, |a, b| op.entry(sites[a], sites[b]))
}

/// A finite section stored as a band matrix over its window of sites in
/// increasing site order. Same spectrum as [`truncate`]; the basis is only
/// permuted.
#[derive(Clone, Debug)]
pub struct BandSection {
    pub matrix: BandMatrix,
    pub first_site: i64,
    pub lattice: Lattice,
}

impl BandSection {
    /// Row of the band matrix holding basis vector `e_i` (1-based).
    pub fn row_of_basis(&self, basis_index: usize) -> Result<usize> {
        let n = self.matrix.order();
        if basis_index == 0 || basis_index > n {
            return Err(Error::IndexOutOfRange { index: basis_index, order: n });
        }
        Ok((site_of(self.lattice, basis_index - 1) - self.first_site) as usize)
    }
}

pub fn truncate_band(spec: &OperatorSpec, n: usize) -> Result<BandSection> {
    if n == 0 {
        return Err(Error::Contract("section order must be positive".into()));
    }
    section_band(&spec.prepare()?, n)
}

pub(crate) fn section_band(op: &Operator, n: usize) -> Result<BandSection> {
    let lattice = op.lattice();
    let first = window_start(lattice, n);
    let w = op.reach().min(n.saturating_sub(1));
    let mut defect = 0.0f64;
    let mut scale = 0.0f64;
    let matrix = BandMatrix::from_lower_fn(n, w, |r, c| {
        let (i, j) = (first + r as i64, first + c as i64);
        let z = op.entry(i, j);
        defect = defect.max((z - op.entry(j, i).conj()).norm());
        scale = scale.max(z.norm());
        z
    });
    if defect > 1e-12 * scale.max(1.0) {
        return Err(Error::Contract(format!("operator entries are not Hermitian: defect {defect:e}")));
    }
    Ok(BandSection { matrix, first_site: first, lattice })
}

/// Numerical rank of the commutator `P_n A - A P_n`.
///
/// Only enumeration indices within one enumeration bandwidth of the cut can
/// carry nonzero commutator entries, so the rank is computed on that block.
/// Singular values below `1e-9 ||C||_F` count as zero.
pub fn degree_rank(spec: &OperatorSpec, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Contract("section order must be positive".into()));
    }
    let op = spec.prepare()?;
    let lattice = op.lattice();
    // Site distance w is at most 2w + 1 apart in the centered enumeration.
    let span = match lattice {
        Lattice::Half => op.reach(),
        Lattice::Full => 2 * op.reach() + 1,
    };
    let indices: Vec<usize> = (n.saturating_sub(span)..n + span).collect();
    let m = indices.len();
    let sites: Vec<i64> = indices.iter().map(|&q| site_of(lattice, q)).collect();
    // i C is Hermitian because C is skew-Hermitian.
    let ic = HermitianMatrix::from_fn(m, |a, b| {
        let inside = |q: usize| if q < n { 1.0 } else { 0.0 };
        op.entry(sites[a], sites[b]) * Complex64::new(0.0, inside(indices[a]) - inside(indices[b]))
    })?;
    let norm = ic.frobenius_norm();
    if norm == 0.0 {
        return Ok(0);
    }
    let d = eigh(&ic)?;
    Ok(d.values().iter().filter(|v| v.abs() > 1e-9 * norm).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn one_two_three(lattice: Lattice) -> SchrodingerSpec {
        SchrodingerSpec::nearest_neighbour(vec![1.0, 2.0, 3.0], lattice).unwrap()
    }

    #[test]
    fn schrodinger_symbol_of_one_two_three() {
        let sym = schrodinger_symbol(&one_two_three(Lattice::Half)).unwrap();
        for &theta in &[0.0, 0.7, 2.0, PI] {
            let e = Complex64::from_polar(1.0, theta);
            let want = [[c(1.0), c(1.0), e], [c(1.0), c(2.0), c(1.0)], [e.conj(), c(1.0), c(3.0)]];
            let h = sym.evaluate(theta).unwrap();
            for s in 0..3 {
                for t in 0..3 {
                    assert!((h.get(s, t) - want[s][t]).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn free_symbol_has_no_corner() {
        let spec = SchrodingerSpec::new(vec![0.0, 0.0], BTreeMap::new(), Lattice::Half).unwrap();
        let h = schrodinger_symbol(&spec).unwrap().evaluate(1.3).unwrap();
        assert_eq!(h.as_slice(), &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    }

    #[test]
    fn cosine_corner_symbol() {
        let spec = SchrodingerSpec::new(vec![1.0, 2.0, 2.0, 1.0], BTreeMap::from([(1, 5.0), (-1, 5.0)]), Lattice::Full)
            .unwrap();
        let sym = schrodinger_symbol(&spec).unwrap();
        for &theta in &[0.0, 1.0, PI] {
            let h = sym.evaluate(theta).unwrap();
            assert!((h.get(0, 3) - c(10.0 * theta.cos())).norm() < 1e-13);
            assert!((h.get(3, 0) - c(10.0 * theta.cos())).norm() < 1e-13);
            assert_eq!(h.get(1, 1), c(2.0));
        }
    }

    #[test]
    fn period_one_rejected() {
        let err = SchrodingerSpec::nearest_neighbour(vec![1.0], Lattice::Half).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn ordered_flag_must_match() {
        let s = SchrodingerSpec::nearest_neighbour(vec![1.0, 2.0, 2.0, 1.0], Lattice::Full).unwrap();
        assert!(s.clone().with_ordered(true).is_err());
        assert!(one_two_three(Lattice::Full).with_ordered(true).is_ok());
    }

    #[test]
    fn jacobi_symbols() {
        let free = JacobiSpec::new(vec![1.0; 3], vec![0.0; 3], Lattice::Half).unwrap();
        let sym = jacobi_symbol(&free).unwrap();
        let schr = schrodinger_symbol(&SchrodingerSpec::nearest_neighbour(vec![0.0; 3], Lattice::Half).unwrap()).unwrap();
        assert_eq!(sym, schr);

        let spec = JacobiSpec::new(vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], Lattice::Half).unwrap();
        let h = jacobi_symbol(&spec).unwrap().evaluate(0.4).unwrap();
        assert!((h.get(0, 2) - Complex64::from_polar(3.0, 0.4)).norm() < 1e-15);
        assert_eq!((h.get(0, 0), h.get(1, 1), h.get(2, 2)), (c(4.0), c(5.0), c(6.0)));
        assert_eq!((h.get(0, 1), h.get(1, 2)), (c(1.0), c(2.0)));

        let rotated = jacobi_symbol(&spec.clone().with_rotation(1).unwrap()).unwrap().evaluate(0.0).unwrap();
        assert_eq!((rotated.get(0, 0), rotated.get(0, 1), rotated.get(0, 2)), (c(5.0), c(2.0), c(1.0)));
    }

    #[test]
    fn jacobi_period_two() {
        let spec = JacobiSpec::new(vec![1.0, 0.5], vec![3.0, -1.0], Lattice::Half).unwrap();
        let h = jacobi_symbol(&spec).unwrap().evaluate(0.9).unwrap();
        assert!((h.get(0, 1) - (c(1.0) + Complex64::from_polar(0.5, 0.9))).norm() < 1e-15);
        assert_eq!((h.get(0, 0), h.get(1, 1)), (c(3.0), c(-1.0)));
    }

    #[test]
    fn jacobi_rejects_nonpositive_offdiag() {
        assert!(JacobiSpec::new(vec![1.0, 0.0], vec![0.0, 0.0], Lattice::Half).is_err());
        assert!(JacobiSpec::new(vec![1.0, -2.0, 1.0], vec![0.0; 3], Lattice::Half).is_err());
    }

    #[test]
    fn truncation_of_one_two_three() {
        let spec: OperatorSpec = one_two_three(Lattice::Half).into();
        let a = truncate(&spec, 3).unwrap();
        let want = [[1.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.get(i, j), c(want[i][j]));
            }
        }
        assert_eq!(truncate(&spec, 1).unwrap().as_slice(), &[c(1.0)]);
    }

    #[test]
    fn centered_free_laplacian() {
        let spec: OperatorSpec = SchrodingerSpec::nearest_neighbour(vec![0.0, 0.0], Lattice::Full).unwrap().into();
        let d = eigh(&truncate(&spec, 5).unwrap()).unwrap();
        for k in 1..=5 {
            assert!((d.top(k) - 2.0 * (PI * k as f64 / 6.0).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_window() {
        let sites: Vec<i64> = (0..6).map(|q| site_of(Lattice::Full, q)).collect();
        assert_eq!(sites, vec![0, 1, -1, 2, -2, 3]);
        for n in 1..20 {
            let mut s: Vec<i64> = (0..n).map(|q| site_of(Lattice::Full, q)).collect();
            s.sort();
            let lo = window_start(Lattice::Full, n);
            assert_eq!(s, (lo..lo + n as i64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sections_are_nested() {
        let spec: OperatorSpec = SchrodingerSpec::new(vec![0.5, -1.0, 2.0], BTreeMap::from([(1, 1.0), (2, 0.3)]), Lattice::Full)
            .unwrap()
            .into();
        let big = truncate(&spec, 14).unwrap();
        for n in 1..14 {
            assert_eq!(truncate(&spec, n).unwrap(), big.leading(n));
        }
    }

    #[test]
    fn band_section_matches_dense() {
        let spec: OperatorSpec = SchrodingerSpec::new(vec![0.5, -1.0, 2.0], BTreeMap::from([(1, 1.0), (-2, 0.3)]), Lattice::Full)
            .unwrap()
            .into();
        for n in [1, 2, 7, 12] {
            let dense = truncate(&spec, n).unwrap();
            let band = truncate_band(&spec, n).unwrap();
            for i in 1..=n {
                for j in 1..=n {
                    let (r, s) = (band.row_of_basis(i).unwrap(), band.row_of_basis(j).unwrap());
                    assert_eq!(band.matrix.get(r, s), dense.get(i - 1, j - 1));
                }
            }
        }
    }

    #[test]
    fn family_evaluation() {
        let base = one_two_three(Lattice::Full);
        let coeffs = vec![Polynomial(vec![1.0, 1.0]), Polynomial(vec![2.0]), Polynomial(vec![3.0, -1.0])];
        let fam = FamilySpec::new(base.clone(), coeffs, (-1.0, 1.0)).unwrap();
        assert_eq!(family_evaluate(&fam, 0.0).unwrap(), base);
        assert_eq!(family_evaluate(&fam, 0.5).unwrap().potential, vec![1.5, 2.0, 2.5]);
        assert_eq!(family_evaluate(&fam, 2.0).unwrap_err(), Error::Domain { x: 2.0, lo: -1.0, hi: 1.0 });
        assert_eq!(fam.lipschitz(), 1.0);

        let constant = FamilySpec::new(base, vec![Polynomial(vec![4.0]); 3], (-1.0, 1.0)).unwrap();
        assert_eq!(family_evaluate(&constant, 0.3).unwrap(), family_evaluate(&constant, -0.9).unwrap());
        assert_eq!(constant.lipschitz(), 0.0);
    }

    #[test]
    fn degree_ranks() {
        let diag: OperatorSpec = ExplicitBand::periodic(Lattice::Half, vec![1.0, 3.0], vec![]).unwrap().into();
        let tri: OperatorSpec = one_two_three(Lattice::Half).into();
        for n in [1, 2, 5, 9] {
            assert_eq!(degree_rank(&diag, n).unwrap(), 0);
            assert_eq!(degree_rank(&tri, n).unwrap(), 2);
        }
        let corner: OperatorSpec =
            SchrodingerSpec::new(vec![1.0, 2.0, 3.0], BTreeMap::from([(1, 1.0), (2, 0.5)]), Lattice::Half).unwrap().into();
        let w = corner.reach().unwrap();
        for n in [3, 4, 8] {
            assert!(degree_rank(&corner, n).unwrap() <= 2 * w);
        }
        let full: OperatorSpec = one_two_three(Lattice::Full).into();
        // Two cuts in the window, each crossing one bond.
        assert_eq!(degree_rank(&full, 6).unwrap(), 4);
    }

    #[test]
    fn laurent_gershgorin_encloses_symbol() {
        let sym = schrodinger_symbol(&one_two_three(Lattice::Full)).unwrap();
        assert_eq!(sym.gershgorin(), (-1.0, 5.0));
    }
}
