//! Counting functions, heights and the Vojta gap as exact formal sums
//! `sum_p c_p log p` with rational coefficients.
//!
//! Heights are fixed representatives of their bounded-difference classes:
//! `h(x) = log max |x_j|`, `h_D = deg(D) h` and
//! `h_{K(D)} = (sum d_i - n - 1) h`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::arith;
use crate::error::{Error, Result};
use crate::geometry::{OrbifoldModel, ProjectivePoint};
use crate::local::{check_weight_count, Contact};

/// Exact comparison builds `prod p^(L c_p)` on both sides; past this many
/// bits the comparison falls back to floating point.
const EXACT_COMPARE_BITS: f64 = (1u64 << 24) as f64;
/// Relative guard band of the floating-point fallback.
const FLOAT_GUARD: f64 = 1e-9;

/// `sum_p c_p log p` over primes `p`, zero coefficients never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LogSum {
    terms: BTreeMap<u128, BigRational>,
}

impl LogSum {
    pub fn zero() -> Self {
        LogSum::default()
    }

    pub fn log_prime(p: u128) -> Self {
        let mut s = LogSum::zero();
        s.add_term(p, BigRational::one());
        s
    }

    /// `log n`, expanded over the prime factors of `n`. `n` must be positive.
    pub fn log_of(n: u128) -> Self {
        assert!(n > 0, "log of zero");
        let mut s = LogSum::zero();
        for (p, e) in arith::factor_list(n) {
            s.add_term(p, BigRational::from_integer(e.into()));
        }
        s
    }

    pub fn add_term(&mut self, p: u128, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(p).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&p);
        }
    }

    pub fn terms(&self) -> &BTreeMap<u128, BigRational> {
        &self.terms
    }

    pub fn coefficient(&self, p: u128) -> BigRational {
        self.terms.get(&p).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return LogSum::zero();
        }
        LogSum {
            terms: self.terms.iter().map(|(&p, v)| (p, v * c)).collect(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(&p, c)| ratio_to_f64(c) * (p as f64).ln())
            .sum()
    }

    /// Exact comparison of the real numbers represented.
    ///
    /// Logs of distinct primes are linearly independent over `Q`, so the
    /// difference vanishes only when every coefficient does, and a difference
    /// whose coefficients share a sign is decided at once. Otherwise both sides
    /// are cleared of denominators and compared as integers `prod p^(L c_p)`.
    /// `None` is returned only when those integers would be impractically
    /// large and the floating-point value lies inside the guard band.
    pub fn cmp_exact(&self, other: &LogSum) -> Option<Ordering> {
        let diff = self - other;
        if diff.is_zero() {
            return Some(Ordering::Equal);
        }
        if diff.terms.values().all(|c| c.is_positive()) {
            return Some(Ordering::Greater);
        }
        if diff.terms.values().all(|c| c.is_negative()) {
            return Some(Ordering::Less);
        }
        let denom = diff
            .terms
            .values()
            .fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        let exponents: Vec<(u128, BigInt)> = diff
            .terms
            .iter()
            .map(|(&p, c)| (p, c.numer() * (&denom / c.denom())))
            .collect();
        let bits: f64 = exponents
            .iter()
            .map(|(p, e)| e.abs().to_f64().unwrap_or(f64::INFINITY) * (*p as f64).log2())
            .sum();
        if bits <= EXACT_COMPARE_BITS {
            let side = |positive: bool| {
                exponents
                    .iter()
                    .filter(|(_, e)| e.is_positive() == positive)
                    .fold(BigUint::one(), |acc, (p, e)| {
                        let e = e.abs().to_u32().expect("exponent bounded by the bit budget");
                        acc * BigUint::from(*p).pow(e)
                    })
            };
            return Some(side(true).cmp(&side(false)));
        }
        let v = diff.to_f64();
        let scale: f64 = diff
            .terms
            .iter()
            .map(|(&p, c)| ratio_to_f64(c).abs() * (p as f64).ln())
            .sum();
        if v.abs() > FLOAT_GUARD * scale {
            Some(if v > 0.0 { Ordering::Greater } else { Ordering::Less })
        } else {
            None
        }
    }

    /// `self <= other`, decided exactly. Undecidable comparisons count as
    /// false.
    pub fn le(&self, other: &LogSum) -> bool {
        matches!(self.cmp_exact(other), Some(Ordering::Less | Ordering::Equal))
    }

    /// `true` when every coefficient of `self` is at most the matching one of
    /// `other`, which implies `self <= other`.
    pub fn dominated_by(&self, other: &LogSum) -> bool {
        (other - self).terms.values().all(|c| c.is_positive())
    }
}

fn ratio_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

impl<'a> Add<&'a LogSum> for &'a LogSum {
    type Output = LogSum;
    fn add(self, rhs: &LogSum) -> LogSum {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for LogSum {
    type Output = LogSum;
    fn add(mut self, rhs: LogSum) -> LogSum {
        self += &rhs;
        self
    }
}

impl AddAssign<&LogSum> for LogSum {
    fn add_assign(&mut self, rhs: &LogSum) {
        for (&p, c) in &rhs.terms {
            self.add_term(p, c.clone());
        }
    }
}

impl Neg for &LogSum {
    type Output = LogSum;
    fn neg(self) -> LogSum {
        LogSum {
            terms: self.terms.iter().map(|(&p, c)| (p, -c)).collect(),
        }
    }
}

impl<'a> Sub<&'a LogSum> for &'a LogSum {
    type Output = LogSum;
    fn sub(self, rhs: &LogSum) -> LogSum {
        self + &(-rhs)
    }
}

impl fmt::Display for LogSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*log({p})")?;
        }
        Ok(())
    }
}

impl Serialize for LogSum {
    /// As a map from prime to coefficient string, e.g. `{"2": "3/2"}`.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_map(self.terms.iter().map(|(p, c)| (p.to_string(), c.to_string())))
    }
}

/// `N(D_w, x) = sum_{p not in S} (sum_i w_i n_p(D_i, x)) log p`.
pub fn counting_n(m: &OrbifoldModel, x: &ProjectivePoint, weights: &[BigRational]) -> Result<LogSum> {
    check_weight_count(m, weights)?;
    let contact = Contact::of_selected(m, x, |i| !weights[i].is_zero())?;
    let mut out = LogSum::zero();
    for (i, w) in weights.iter().enumerate() {
        for &(p, e) in &contact.factors[i] {
            if !m.in_s(p) {
                out.add_term(p, w * BigRational::from_integer(e.into()));
            }
        }
    }
    Ok(out)
}

/// Truncated counting function: `log p` once for each support prime.
pub fn counting_n1(m: &OrbifoldModel, x: &ProjectivePoint) -> Result<LogSum> {
    let contact = Contact::of(m, x)?;
    let mut out = LogSum::zero();
    for p in contact.support(m) {
        out.add_term(p, BigRational::one());
    }
    Ok(out)
}

/// `log max_j |x_j|` for the primitive representative.
pub fn weil_height(x: &ProjectivePoint) -> LogSum {
    LogSum::log_of(x.max_abs() as u128)
}

/// `(sum_i w_i d_i) h(x)`.
pub fn divisor_height(m: &OrbifoldModel, x: &ProjectivePoint, weights: &[BigRational]) -> Result<LogSum> {
    check_weight_count(m, weights)?;
    m.check_arity(x)?;
    Ok(weil_height(x).scale(&weighted_degree(m, weights)))
}

pub fn weighted_degree(m: &OrbifoldModel, weights: &[BigRational]) -> BigRational {
    m.components()
        .iter()
        .zip(weights)
        .map(|(c, w)| w * BigRational::from_integer(c.degree().into()))
        .fold(BigRational::zero(), |a, b| a + b)
}

/// `sum_i w_i log ||F_i||_1`, the constant with
/// `N(D_w, x) <= h_{D_w}(x) + constant` for every point off the support.
pub fn height_constant(m: &OrbifoldModel, weights: &[BigRational]) -> LogSum {
    m.components()
        .iter()
        .zip(weights)
        .fold(LogSum::zero(), |acc, (c, w)| acc + LogSum::log_of(c.form().l1_norm()).scale(w))
}

/// Degree of `K_X + sum (1 - eps_i) D_i` on `P^n`; positive exactly when that
/// divisor is big.
pub fn bigness_margin(m: &OrbifoldModel) -> BigRational {
    let n = m.ambient_dim() as i64;
    m.components()
        .iter()
        .map(|c| (BigRational::one() - c.weight()) * BigRational::from_integer(c.degree().into()))
        .fold(BigRational::from_integer((-(n + 1)).into()), |a, b| a + b)
}

/// Degree of `K_X(D) = K_X + sum D_i` on `P^n`.
pub fn log_canonical_degree(m: &OrbifoldModel) -> i64 {
    m.components().iter().map(|c| c.degree() as i64).sum::<i64>() - m.ambient_dim() as i64 - 1
}

/// `N^(1)(D, x) - h_{K(D)}(x) + delta h(x)` with `H = O(1)`.
pub fn vojta_gap(m: &OrbifoldModel, x: &ProjectivePoint, delta: &BigRational) -> Result<f64> {
    let n1 = counting_n1(m, x)?;
    let h = weil_height(x);
    let k = BigRational::from_integer(log_canonical_degree(m).into());
    let gap = &(&n1 - &h.scale(&k)) + &h.scale(delta);
    Ok(gap.to_f64())
}

/// The chain `N^(1)(D, x) <= N(D_eps, x) <= h_{D_eps}(x) + C` at one point,
/// each inequality decided exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LemmaChain {
    pub truncated: LogSum,
    pub weighted: LogSum,
    pub bound: LogSum,
    pub first_holds: bool,
    pub second_holds: bool,
}

impl LemmaChain {
    pub fn holds(&self) -> bool {
        self.first_holds && self.second_holds
    }
}

pub fn lemma_chain(m: &OrbifoldModel, x: &ProjectivePoint) -> Result<LemmaChain> {
    let w = m.weights();
    let truncated = counting_n1(m, x)?;
    let weighted = counting_n(m, x, &w)?;
    let bound = &divisor_height(m, x, &w)? + &height_constant(m, &w);
    let first_holds = truncated.le(&weighted);
    let second_holds = weighted.le(&bound);
    Ok(LemmaChain {
        truncated,
        weighted,
        bound,
        first_holds,
        second_holds,
    })
}

/// Reject negative `delta`.
pub fn check_delta(delta: &BigRational) -> Result<()> {
    if delta.is_negative() {
        return Err(Error::parse(format!("delta must be nonnegative, got {delta}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{normalize, DivisorComponent, Form};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn pt(c: &[i64]) -> ProjectivePoint {
        normalize(c).unwrap()
    }

    fn model(n: usize, forms: Vec<Form>, w: BigRational, s: &[u128]) -> OrbifoldModel {
        OrbifoldModel::validated(
            n,
            forms.into_iter().map(|f| DivisorComponent::new(f, w.clone())).collect(),
            s.iter().copied(),
        )
        .unwrap()
    }

    fn logs(terms: &[(u128, i64, i64)]) -> LogSum {
        let mut s = LogSum::zero();
        for &(p, n, d) in terms {
            s.add_term(p, q(n, d));
        }
        s
    }

    fn five_lines(w: BigRational) -> OrbifoldModel {
        model(
            1,
            [[1, 0], [0, 1], [1, -1], [1, 1], [1, -2]].iter().map(|c| Form::linear(c)).collect(),
            w,
            &[],
        )
    }

    #[test]
    fn counting_examples() {
        let m = model(1, vec![Form::linear(&[1, 0])], q(1, 1), &[]);
        let x = pt(&[12, 5]);
        assert_eq!(counting_n(&m, &x, &[q(1, 1)]).unwrap(), logs(&[(2, 2, 1), (3, 1, 1)]));
        assert_eq!(counting_n(&m, &x, &[q(1, 1)]).unwrap(), LogSum::log_of(12));
        assert_eq!(counting_n1(&m, &x).unwrap(), LogSum::log_of(6));
        assert!(counting_n1(&m, &pt(&[1, 5])).unwrap().is_zero());

        let m2 = m.with_s_primes([2]).unwrap();
        assert_eq!(counting_n(&m2, &x, &[q(1, 1)]).unwrap(), LogSum::log_prime(3));

        let m = model(1, vec![Form::linear(&[1, 0]), Form::linear(&[0, 1])], q(1, 2), &[]);
        let x = pt(&[8, 9]);
        assert_eq!(
            counting_n(&m, &x, &m.weights()).unwrap(),
            logs(&[(2, 3, 2), (3, 1, 1)])
        );
        assert_eq!(counting_n1(&m, &x).unwrap(), LogSum::log_of(6));
    }

    #[test]
    fn height_examples() {
        assert_eq!(weil_height(&pt(&[3, 4])), LogSum::log_of(4));
        assert!(weil_height(&pt(&[1, 0])).is_zero());
        assert_eq!(weil_height(&pt(&[8, 9])), LogSum::log_of(9));

        let m = model(1, vec![Form::linear(&[1, 0]), Form::linear(&[0, 1])], q(1, 2), &[]);
        assert_eq!(divisor_height(&m, &pt(&[8, 9]), &m.weights()).unwrap(), LogSum::log_of(9));

        let conic = model(2, vec![Form::new([(1, [1, 1, 0]), (-1, [0, 0, 2])]).unwrap()], q(1, 1), &[]);
        assert!(divisor_height(&conic, &pt(&[1, 1, 1]), &[q(1, 1)]).unwrap().is_zero());

        let m = five_lines(q(1, 1));
        assert_eq!(
            divisor_height(&m, &pt(&[3, 4]), &m.weights()).unwrap(),
            LogSum::log_of(4).scale(&q(5, 1))
        );
    }

    #[test]
    fn bigness_examples() {
        let two = |w| model(1, vec![Form::linear(&[1, 0]), Form::linear(&[0, 1])], w, &[]);
        assert_eq!(bigness_margin(&two(q(1, 2))), q(-1, 1));
        assert_eq!(bigness_margin(&five_lines(q(1, 2))), q(1, 2));
        assert_eq!(bigness_margin(&two(q(0, 1))), q(0, 1));
    }

    #[test]
    fn vojta_gap_examples() {
        let m = model(1, vec![Form::linear(&[1, 0]), Form::linear(&[0, 1])], q(1, 2), &[]);
        let g = vojta_gap(&m, &pt(&[8, 9]), &q(0, 1)).unwrap();
        assert!((g - 6f64.ln()).abs() < 1e-12);
        assert!((g - 1.7918).abs() < 1e-4);

        // Five lines at (1, 2): values 1, 2, -1, 3, -3, support {2, 3};
        // K(D) has degree 5 - 2 = 3 and h = log 2.
        let m = five_lines(q(1, 2));
        let g = vojta_gap(&m, &pt(&[1, 2]), &q(0, 1)).unwrap();
        assert!((g - (6f64.ln() - 3.0 * 2f64.ln())).abs() < 1e-12);

        // Integral point: N^(1) = 0.
        let g = vojta_gap(&m, &pt(&[1, 1]), &q(0, 1));
        assert!(matches!(g, Err(Error::OnComponent { component: 2, .. })));
        let m = model(1, vec![Form::linear(&[1, 0]), Form::linear(&[0, 1])], q(0, 1), &[]);
        let g = vojta_gap(&m, &pt(&[1, -1]), &q(1, 10)).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn exact_comparisons() {
        // log 8 = 3 log 2 > log 7; log 9 > log 8.
        assert_eq!(LogSum::log_of(8).cmp_exact(&LogSum::log_of(7)), Some(Ordering::Greater));
        assert_eq!(LogSum::log_of(8).cmp_exact(&LogSum::log_of(9)), Some(Ordering::Less));
        // (1/2) log 4 = log 2.
        assert_eq!(
            LogSum::log_of(4).scale(&q(1, 2)).cmp_exact(&LogSum::log_prime(2)),
            Some(Ordering::Equal)
        );
        // 2^10 = 1024 > 10^3.
        assert_eq!(
            LogSum::log_of(2).scale(&q(10, 1)).cmp_exact(&LogSum::log_of(1000)),
            Some(Ordering::Greater)
        );
        assert!(LogSum::zero().le(&LogSum::zero()));
    }

    #[test]
    fn lemma_chain_at_a_campana_point() {
        let m = model(1, vec![Form::linear(&[1, 0]), Form::linear(&[0, 1])], q(1, 2), &[]);
        let chain = lemma_chain(&m, &pt(&[8, 9])).unwrap();
        assert!(chain.holds());
        assert_eq!(chain.truncated, LogSum::log_of(6));
        assert_eq!(chain.weighted, logs(&[(2, 3, 2), (3, 1, 1)]));
        assert_eq!(chain.bound, LogSum::log_of(9));
    }

    proptest! {
        #[test]
        fn truncation_bound(a in 1i64..100_000, b in -100_000i64..100_000) {
            let m = five_lines(q(1, 1));
            let x = normalize(&[a, b]).unwrap();
            if let Ok(n1) = counting_n1(&m, &x) {
                let n = counting_n(&m, &x, &m.weights()).unwrap();
                prop_assert!(n1.dominated_by(&n) || n1 == n);
                prop_assert!(n1.le(&n));
            }
        }

        #[test]
        fn comparison_matches_floats(
            a in proptest::collection::vec((-20i64..20, 1i64..5), 4),
        ) {
            let mut s = LogSum::zero();
            for ((n, d), p) in a.iter().zip([2u128, 3, 5, 7]) {
                s.add_term(p, q(*n, *d));
            }
            let v = s.to_f64();
            match s.cmp_exact(&LogSum::zero()).unwrap() {
                Ordering::Greater => prop_assert!(v > -1e-12),
                Ordering::Less => prop_assert!(v < 1e-12),
                Ordering::Equal => prop_assert!(s.is_zero()),
            }
        }
    }
}
