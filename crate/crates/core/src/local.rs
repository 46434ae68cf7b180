//! Intersection multiplicities `n_p(D_i, x)`.
//!
//! On `P^n_Z` with a primitive point `x` and a content-one form `F_i`, the
//! pullback of the ideal of `D_i` along `x` is generated by `F_i(x)`, so the
//! multiplicity at `p` is the `p`-adic valuation of `F_i(x)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use smallvec::SmallVec;

use crate::arith::{self, FactorList};
use crate::error::{Error, Result};
use crate::geometry::{OrbifoldModel, ProjectivePoint};

/// `n_p(D_i, x)` for every component `i` at one prime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiplicityVector {
    pub point: ProjectivePoint,
    pub prime: u128,
    pub entries: Vec<u32>,
}

fn on_component(x: &ProjectivePoint, component: usize) -> Error {
    Error::OnComponent {
        point: x.to_string(),
        component,
    }
}

fn check_prime(m: &OrbifoldModel, p: u128) -> Result<()> {
    if !arith::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if m.in_s(p) {
        return Err(Error::PrimeInS(p));
    }
    Ok(())
}

pub fn multiplicity(m: &OrbifoldModel, x: &ProjectivePoint, p: u128, i: usize) -> Result<u32> {
    let comp = m.components().get(i).ok_or(Error::ComponentIndex {
        index: i,
        len: m.components().len(),
    })?;
    check_prime(m, p)?;
    m.check_arity(x)?;
    let v = comp.evaluate(x)?;
    if v == 0 {
        return Err(on_component(x, i));
    }
    arith::valuation(p, v)
}

/// `sum_i weights[i] * n_p(D_i, x)`. Components with weight zero are skipped,
/// so they may pass through `x`.
pub fn weighted_multiplicity(
    m: &OrbifoldModel,
    x: &ProjectivePoint,
    p: u128,
    weights: &[BigRational],
) -> Result<BigRational> {
    check_weight_count(m, weights)?;
    let mut acc = BigRational::zero();
    for (i, w) in weights.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let n = multiplicity(m, x, p, i)?;
        acc += w * BigRational::from_integer(BigInt::from(n));
    }
    Ok(acc)
}

pub fn multiplicity_vector(m: &OrbifoldModel, x: &ProjectivePoint, p: u128) -> Result<MultiplicityVector> {
    let entries = (0..m.components().len())
        .map(|i| multiplicity(m, x, p, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiplicityVector {
        point: x.clone(),
        prime: p,
        entries,
    })
}

pub(crate) fn check_weight_count(m: &OrbifoldModel, weights: &[BigRational]) -> Result<()> {
    if weights.len() != m.components().len() {
        return Err(Error::WeightCount {
            expected: m.components().len(),
            found: weights.len(),
        });
    }
    Ok(())
}

/// Values `F_i(x)` and their factorizations, computed once per point.
pub(crate) struct Contact {
    pub factors: SmallVec<[FactorList; 6]>,
}

impl Contact {
    /// Fails with `OnComponent` for the first component through `x`.
    pub fn of(m: &OrbifoldModel, x: &ProjectivePoint) -> Result<Self> {
        Contact::of_selected(m, x, |_| true)
    }

    /// Only components accepted by `keep` are evaluated; the rest get an
    /// empty factor list.
    pub fn of_selected(m: &OrbifoldModel, x: &ProjectivePoint, keep: impl Fn(usize) -> bool) -> Result<Self> {
        m.check_arity(x)?;
        let mut factors = SmallVec::new();
        for (i, c) in m.components().iter().enumerate() {
            let mut list = FactorList::new();
            if keep(i) {
                let v = c.evaluate(x)?;
                if v == 0 {
                    return Err(on_component(x, i));
                }
                arith::factor_into(v.unsigned_abs(), &mut list);
            }
            factors.push(list);
        }
        Ok(Contact { factors })
    }

    pub fn exponent(&self, i: usize, p: u128) -> u32 {
        self.factors[i]
            .iter()
            .find(|(q, _)| *q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Primes outside `S` dividing some `F_i(x)`, ascending.
    pub fn support(&self, m: &OrbifoldModel) -> SmallVec<[u128; 16]> {
        let mut primes: SmallVec<[u128; 16]> = self
            .factors
            .iter()
            .flat_map(|l| l.iter().map(|&(p, _)| p))
            .filter(|&p| !m.in_s(p))
            .collect();
        primes.sort_unstable();
        primes.dedup();
        primes
    }
}

/// One row per support prime of `x`, for display.
pub fn contact_table(m: &OrbifoldModel, x: &ProjectivePoint) -> Result<Vec<MultiplicityVector>> {
    let contact = Contact::of(m, x)?;
    Ok(contact
        .support(m)
        .into_iter()
        .map(|p| MultiplicityVector {
            point: x.clone(),
            prime: p,
            entries: (0..m.components().len()).map(|i| contact.exponent(i, p)).collect(),
        })
        .collect())
}
