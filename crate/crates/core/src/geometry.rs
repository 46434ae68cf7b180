//! Orbifold models `(P^n_Z, D, epsilon, S)` and primitive projective points.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use smallvec::SmallVec;

use crate::arith;
use crate::error::{Error, Result};

pub type Coords = SmallVec<[i64; 4]>;

/// A point of `P^n(Q)` stored as its primitive integer representative whose
/// first nonzero coordinate is positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjectivePoint {
    coords: Coords,
}

impl ProjectivePoint {
    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// Ambient dimension `n` of the `P^n` this point lives in.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// `max_j |x_j|`, the exponential of the naive height.
    pub fn max_abs(&self) -> u64 {
        self.coords.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// Wrap coordinates already known to be primitive and sign-normalized.
    pub(crate) fn from_normalized(coords: Coords) -> Self {
        debug_assert!(is_normalized(&coords), "{coords:?} is not normalized");
        ProjectivePoint { coords }
    }
}

fn is_normalized(c: &[i64]) -> bool {
    let g = c.iter().fold(0u64, |g, &x| g.gcd(&x.unsigned_abs()));
    g == 1 && c.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

/// Primitive, sign-normalized representative of the class of `raw`.
pub fn normalize(raw: &[i64]) -> Result<ProjectivePoint> {
    let g = raw.iter().fold(0u64, |g, &x| g.gcd(&x.unsigned_abs()));
    if g == 0 {
        return Err(Error::ZeroPoint);
    }
    let first = raw.iter().copied().find(|&x| x != 0).unwrap();
    let flip = first < 0;
    let coords = raw
        .iter()
        .map(|&x| {
            let q = x as i128 / g as i128;
            let q = if flip { -q } else { q };
            i64::try_from(q).map_err(|_| Error::Overflow("normalizing a point"))
        })
        .collect::<Result<Coords>>()?;
    Ok(ProjectivePoint { coords })
}

impl FromStr for ProjectivePoint {
    type Err = Error;

    /// Parses comma-separated integers, e.g. `8,9` or `(0, -5, 10)`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let raw = inner
            .split([',', ':'])
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::parse(format!("coordinate {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if raw.len() < 2 {
            return Err(Error::parse("a projective point needs at least two coordinates"));
        }
        normalize(&raw)
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for ProjectivePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.coords.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: i64,
    pub exponents: SmallVec<[u32; 4]>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

/// An integral form, kept as a list of monomials with distinct exponent
/// vectors and nonzero coefficients, sorted by exponent vector (descending).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Form {
    terms: Vec<Monomial>,
    /// Dense coefficients when every term is linear, for fast evaluation.
    linear: Option<SmallVec<[i64; 4]>>,
}

impl Form {
    /// Build a form from `(coefficient, exponent vector)` pairs. Repeated
    /// exponent vectors are merged and zero terms dropped.
    pub fn new<I, E>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, E)>,
        E: AsRef<[u32]>,
    {
        let mut merged: BTreeMap<SmallVec<[u32; 4]>, i64> = BTreeMap::new();
        for (c, e) in terms {
            let slot = merged.entry(SmallVec::from_slice(e.as_ref())).or_insert(0);
            *slot = slot
                .checked_add(c)
                .ok_or(Error::Overflow("merging form coefficients"))?;
        }
        let terms = merged
            .into_iter()
            .rev()
            .filter(|(_, c)| *c != 0)
            .map(|(exponents, coeff)| Monomial { coeff, exponents })
            .collect::<Vec<_>>();
        let linear = match terms.first() {
            Some(t) if terms.iter().all(|m| m.degree() == 1 && m.exponents.len() == t.exponents.len()) => {
                let mut dense: SmallVec<[i64; 4]> = smallvec::smallvec![0; t.exponents.len()];
                for m in &terms {
                    let j = m.exponents.iter().position(|&e| e == 1).expect("degree one");
                    dense[j] = m.coeff;
                }
                Some(dense)
            }
            _ => None,
        };
        Ok(Form { terms, linear })
    }

    /// `sum_j coeffs[j] * x_j`.
    pub fn linear(coeffs: &[i64]) -> Self {
        let n = coeffs.len();
        Form::new(coeffs.iter().enumerate().map(|(j, &c)| {
            let mut e = vec![0u32; n];
            e[j] = 1;
            (c, e)
        }))
        .expect("linear coefficients cannot overflow when merged")
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// Number of variables, taken from the first monomial.
    pub fn arity(&self) -> usize {
        self.terms.first().map_or(0, |t| t.exponents.len())
    }

    /// Degree of the first monomial; 0 for the zero form.
    pub fn degree(&self) -> u32 {
        self.terms.first().map_or(0, Monomial::degree)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.iter().all(|t| t.degree() == d)
    }

    fn uniform_arity(&self) -> bool {
        let a = self.arity();
        self.terms.iter().all(|t| t.exponents.len() == a)
    }

    /// gcd of all coefficients.
    pub fn content(&self) -> u64 {
        self.terms
            .iter()
            .fold(0u64, |g, t| g.gcd(&t.coeff.unsigned_abs()))
    }

    /// Sum of absolute values of the coefficients.
    pub fn l1_norm(&self) -> u128 {
        self.terms.iter().map(|t| t.coeff.unsigned_abs() as u128).sum()
    }

    /// If this is `±x_j`, return `j`.
    pub fn coordinate_index(&self) -> Option<usize> {
        match self.terms.as_slice() {
            [t] if t.coeff.abs() == 1 && t.degree() == 1 => {
                t.exponents.iter().position(|&e| e == 1)
            }
            _ => None,
        }
    }

    /// Exact value at integer coordinates.
    pub fn evaluate(&self, x: &[i64]) -> Result<i128> {
        if x.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                found: x.len(),
            });
        }
        if let Some(dense) = &self.linear {
            return dense.iter().zip(x).try_fold(0i128, |acc, (&c, &xi)| {
                acc.checked_add(c as i128 * xi as i128).ok_or(Error::Overflow("evaluating a form"))
            });
        }
        let mut acc: i128 = 0;
        for t in &self.terms {
            let mut v = t.coeff as i128;
            for (&xi, &e) in x.iter().zip(&t.exponents) {
                for _ in 0..e {
                    v = v
                        .checked_mul(xi as i128)
                        .ok_or(Error::Overflow("evaluating a form"))?;
                }
            }
            acc = acc
                .checked_add(v)
                .ok_or(Error::Overflow("evaluating a form"))?;
        }
        Ok(acc)
    }

    fn coefficient(&self, exps: &[u32]) -> i64 {
        self.terms
            .iter()
            .find(|t| t.exponents.as_slice() == exps)
            .map_or(0, |t| t.coeff)
    }

    /// `true` when `self = lambda * other` for some nonzero rational lambda.
    pub fn is_proportional(&self, other: &Form) -> bool {
        if self.terms.len() != other.terms.len() || self.terms.is_empty() {
            return false;
        }
        let a0 = self.terms[0].coeff as i128;
        let b0 = other.coefficient(&self.terms[0].exponents) as i128;
        if b0 == 0 {
            return false;
        }
        self.terms.iter().all(|t| {
            let b = other.coefficient(&t.exponents) as i128;
            b != 0 && t.coeff as i128 * b0 == b * a0
        })
    }

    /// Coefficients of a binary form, `a_k` for `x0^(d-k) x1^k`.
    fn binary_coefficients(&self) -> Vec<BigInt> {
        let d = self.degree();
        (0..=d)
            .map(|k| BigInt::from(self.coefficient(&[d - k, k])))
            .collect()
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let c = t.coeff;
            match (i, c < 0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let vars: Vec<String> = t
                .exponents
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(j, &e)| if e == 1 { format!("x{j}") } else { format!("x{j}^{e}") })
                .collect();
            let mag = c.unsigned_abs();
            if vars.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1 {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{mag}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Resultant of two binary forms by fraction-free elimination of the
/// Sylvester matrix. Zero exactly when the forms share a root in `P^1`.
pub fn binary_resultant(f: &Form, g: &Form) -> BigInt {
    let a = f.binary_coefficients();
    let b = g.binary_coefficients();
    let (d, e) = (a.len() - 1, b.len() - 1);
    let size = d + e;
    if size == 0 {
        return BigInt::one();
    }
    let mut m = vec![vec![BigInt::zero(); size]; size];
    for row in 0..e {
        for (k, c) in a.iter().enumerate() {
            m[row][row + k] = c.clone();
        }
    }
    for row in 0..d {
        for (k, c) in b.iter().enumerate() {
            m[e + row][row + k] = c.clone();
        }
    }
    bareiss_determinant(m)
}

fn bareiss_determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Parse an exact weight such as `1/2`, `0` or `1`. Decimal notation is
/// rejected.
pub fn parse_weight(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.contains(['.', 'e', 'E']) {
        return Err(Error::parse(format!(
            "weight {s:?} must be an integer or a fraction p/q, not a decimal"
        )));
    }
    let bad = |e: num_bigint::ParseBigIntError| Error::parse(format!("weight {s:?}: {e}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(bad)?;
            let q: BigInt = q.trim().parse().map_err(bad)?;
            if q.is_zero() {
                return Err(Error::parse(format!("weight {s:?} has zero denominator")));
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(bad)?)),
    }
}

/// Parse a comma-separated list of weights.
pub fn parse_weights(s: &str) -> Result<Vec<BigRational>> {
    s.split(',').map(parse_weight).collect()
}

/// One boundary component `D_i = {F_i = 0}` with its weight `epsilon_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorComponent {
    form: Form,
    weight: BigRational,
}

impl DivisorComponent {
    pub fn new(form: Form, weight: BigRational) -> Self {
        DivisorComponent { form, weight }
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    pub fn weight(&self) -> &BigRational {
        &self.weight
    }

    pub fn degree(&self) -> u32 {
        self.form.degree()
    }

    pub fn evaluate(&self, x: &ProjectivePoint) -> Result<i128> {
        self.form.evaluate(x.coords())
    }
}

/// Weights rescaled to integers: `epsilon_i = scaled[i] / denom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct WeightScale {
    pub denom: i64,
    pub scaled: Vec<i64>,
}

impl WeightScale {
    fn new(weights: &[&BigRational]) -> Option<Self> {
        let denom = weights
            .iter()
            .try_fold(BigInt::one(), |l, w| Some(l.lcm(w.denom())))?;
        let scaled = weights
            .iter()
            .map(|w| (w.numer() * (&denom / w.denom())).to_i64())
            .collect::<Option<Vec<_>>>()?;
        Some(WeightScale {
            denom: denom.to_i64()?,
            scaled,
        })
    }
}

/// A normal crossings model on `P^n_Z`: boundary components with weights and
/// the finite part of `S`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbifoldModel {
    ambient_dim: usize,
    components: Vec<DivisorComponent>,
    s_primes: BTreeSet<u128>,
    scale: Option<WeightScale>,
}

impl OrbifoldModel {
    /// Assemble a model without checking it; see [`OrbifoldModel::validated`].
    pub fn new(
        ambient_dim: usize,
        components: Vec<DivisorComponent>,
        s_primes: impl IntoIterator<Item = u128>,
    ) -> Self {
        let scale = WeightScale::new(&components.iter().map(|c| &c.weight).collect::<Vec<_>>());
        OrbifoldModel {
            ambient_dim,
            components,
            s_primes: s_primes.into_iter().collect(),
            scale,
        }
    }

    /// Assemble a model and reject it unless [`validate_model`] is clean.
    pub fn validated(
        ambient_dim: usize,
        components: Vec<DivisorComponent>,
        s_primes: impl IntoIterator<Item = u128>,
    ) -> Result<Self> {
        OrbifoldModel::new(ambient_dim, components, s_primes).check()
    }

    pub(crate) fn check(self) -> Result<Self> {
        let report = validate_model(&self);
        if report.is_valid() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn components(&self) -> &[DivisorComponent] {
        &self.components
    }

    pub fn s_primes(&self) -> &BTreeSet<u128> {
        &self.s_primes
    }

    pub fn in_s(&self, p: u128) -> bool {
        self.s_primes.contains(&p)
    }

    pub fn weights(&self) -> Vec<BigRational> {
        self.components.iter().map(|c| c.weight.clone()).collect()
    }

    pub(crate) fn scale(&self) -> &WeightScale {
        self.scale
            .as_ref()
            .expect("weights of a validated model have a machine-size common denominator")
    }

    /// Same divisor and `S`, new weights.
    pub fn with_weights(&self, weights: &[BigRational]) -> Result<Self> {
        if weights.len() != self.components.len() {
            return Err(Error::WeightCount {
                expected: self.components.len(),
                found: weights.len(),
            });
        }
        let components = self
            .components
            .iter()
            .zip(weights)
            .map(|(c, w)| DivisorComponent::new(c.form.clone(), w.clone()))
            .collect();
        OrbifoldModel::validated(self.ambient_dim, components, self.s_primes.iter().copied())
    }

    /// Same divisor and weights, new finite part of `S`.
    pub fn with_s_primes(&self, s: impl IntoIterator<Item = u128>) -> Result<Self> {
        OrbifoldModel::validated(self.ambient_dim, self.components.clone(), s)
    }

    /// All weights set to the same value.
    pub fn with_uniform_weight(&self, w: &BigRational) -> Result<Self> {
        self.with_weights(&vec![w.clone(); self.components.len()])
    }

    pub fn evaluate_all(&self, x: &ProjectivePoint) -> Result<SmallVec<[i128; 8]>> {
        self.check_arity(x)?;
        self.components.iter().map(|c| c.evaluate(x)).collect()
    }

    pub(crate) fn check_arity(&self, x: &ProjectivePoint) -> Result<()> {
        if x.coords().len() != self.ambient_dim + 1 {
            return Err(Error::ArityMismatch {
                expected: self.ambient_dim + 1,
                found: x.coords().len(),
            });
        }
        Ok(())
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            ambient_dim: self.ambient_dim,
            components: self
                .components
                .iter()
                .map(|c| ComponentSummary {
                    form: c.form.to_string(),
                    degree: c.degree(),
                    weight: c.weight.to_string(),
                })
                .collect(),
            s_primes: self.s_primes.iter().map(|p| p.to_string()).collect(),
            bigness_margin: crate::heights::bigness_margin(self).to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentSummary {
    pub form: String,
    pub degree: u32,
    pub weight: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModelSummary {
    pub ambient_dim: usize,
    pub components: Vec<ComponentSummary>,
    pub s_primes: Vec<String>,
    pub bigness_margin: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    AmbientDimension(usize),
    ZeroForm { component: usize },
    ArityMismatch { component: usize, expected: usize, found: usize },
    NotHomogeneous { component: usize },
    ZeroDegree { component: usize },
    Content { component: usize, content: u64 },
    WeightOutOfRange { component: usize, weight: String },
    WeightDenominator,
    Proportional { first: usize, second: usize },
    CommonRoot { first: usize, second: usize },
    NotPrime(u128),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            AmbientDimension(n) => write!(f, "ambient dimension must be at least 1, got {n}"),
            ZeroForm { component } => write!(f, "component {component}: form is zero"),
            ArityMismatch { component, expected, found } => write!(
                f,
                "component {component}: monomials need {expected} exponents, found {found}"
            ),
            NotHomogeneous { component } => write!(f, "component {component}: form is not homogeneous"),
            ZeroDegree { component } => write!(f, "component {component}: degree must be at least 1"),
            Content { component, content } => {
                write!(f, "component {component}: coefficients share the factor {content}")
            }
            WeightOutOfRange { component, weight } => {
                write!(f, "component {component}: weight {weight} is outside [0, 1]")
            }
            WeightDenominator => write!(f, "common denominator of the weights does not fit in 64 bits"),
            Proportional { first, second } => {
                write!(f, "components {first} and {second} are proportional")
            }
            CommonRoot { first, second } => {
                write!(f, "components {first} and {second} have a common root (resultant 0)")
            }
            NotPrime(p) => write!(f, "S entry {p} is not prime"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Check every structural invariant of a model and list what fails.
///
/// Normal crossings is not verified in dimension 2 and above; on `P^1` the
/// components are required to have pairwise distinct support.
pub fn validate_model(m: &OrbifoldModel) -> ValidationReport {
    let mut v = Vec::new();
    if m.ambient_dim == 0 {
        v.push(Violation::AmbientDimension(0));
    }
    let arity = m.ambient_dim + 1;
    let mut well_formed = vec![true; m.components.len()];
    for (i, c) in m.components.iter().enumerate() {
        let f = &c.form;
        if f.terms.is_empty() {
            v.push(Violation::ZeroForm { component: i });
            well_formed[i] = false;
            continue;
        }
        if let Some(t) = f.terms.iter().find(|t| t.exponents.len() != arity) {
            v.push(Violation::ArityMismatch {
                component: i,
                expected: arity,
                found: t.exponents.len(),
            });
            well_formed[i] = false;
            continue;
        }
        debug_assert!(f.uniform_arity());
        if !f.is_homogeneous() {
            v.push(Violation::NotHomogeneous { component: i });
            well_formed[i] = false;
        } else if f.degree() == 0 {
            v.push(Violation::ZeroDegree { component: i });
            well_formed[i] = false;
        }
        let content = f.content();
        if content != 1 {
            v.push(Violation::Content { component: i, content });
        }
        if c.weight.is_negative() || c.weight > BigRational::one() {
            v.push(Violation::WeightOutOfRange {
                component: i,
                weight: c.weight.to_string(),
            });
        }
    }
    if m.scale.is_none() {
        v.push(Violation::WeightDenominator);
    }
    for i in 0..m.components.len() {
        for j in i + 1..m.components.len() {
            if !(well_formed[i] && well_formed[j]) {
                continue;
            }
            let (fi, fj) = (&m.components[i].form, &m.components[j].form);
            if fi.is_proportional(fj) {
                v.push(Violation::Proportional { first: i, second: j });
            } else if m.ambient_dim == 1 && binary_resultant(fi, fj).is_zero() {
                v.push(Violation::CommonRoot { first: i, second: j });
            }
        }
    }
    for &p in &m.s_primes {
        if !arith::is_prime(p) {
            v.push(Violation::NotPrime(p));
        }
    }
    ValidationReport { violations: v }
}
