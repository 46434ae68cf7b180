//! Brute-force ground truths for the classifier and the counters.
//!
//! Everything here is computed from factorizations of the raw form values;
//! nothing goes through the multiplicity or Campana code it is meant to
//! check.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::arith;
use crate::campana::{is_campana, PointClass};
use crate::enumerate::{bucket_edges, sweep};
use crate::error::{Error, Result};
use crate::geometry::{OrbifoldModel, ProjectivePoint};

/// `|n| = 1` or every prime dividing `n` does so at least twice.
pub fn is_squarefull(n: i128) -> Result<bool> {
    if n == 0 {
        return Err(Error::ZeroInput);
    }
    Ok(arith::factor_list(n.unsigned_abs()).iter().all(|&(_, e)| e >= 2))
}

fn boundary(x: &ProjectivePoint, component: usize) -> Error {
    Error::OnComponent {
        point: x.to_string(),
        component,
    }
}

/// Membership in the Campana set of `(P^1, 1/2 {0} + 1/2 {oo})` with
/// `S` empty: both coordinates squarefull.
pub fn campana_oracle_p1_halves(x: &ProjectivePoint) -> Result<bool> {
    let c = x.coords();
    if c.len() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            found: c.len(),
        });
    }
    for (j, &v) in c.iter().enumerate() {
        if v == 0 {
            return Err(boundary(x, j));
        }
    }
    Ok(is_squarefull(c[0] as i128)? && is_squarefull(c[1] as i128)?)
}

/// Every prime factor of every `|F_i(x)|` lies in `S`.
pub fn sunit_oracle(m: &OrbifoldModel, x: &ProjectivePoint) -> Result<bool> {
    let mut all_in_s = true;
    for (i, c) in m.components().iter().enumerate() {
        let v = c.form().evaluate(x.coords())?;
        if v == 0 {
            return Err(boundary(x, i));
        }
        all_in_s &= arith::factor_list(v.unsigned_abs()).iter().all(|&(p, _)| m.in_s(p));
    }
    Ok(all_in_s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleId {
    /// Squarefull coordinates on `(P^1, 1/2 {0} + 1/2 {oo})`, `S` empty.
    Squarefull,
    /// All weights zero: Campana points are the S-integral points.
    SUnit,
    /// All weights one: every point off the boundary is Campana.
    ConstantTrue,
}

impl OracleId {
    pub const ALL: [OracleId; 3] = [OracleId::Squarefull, OracleId::SUnit, OracleId::ConstantTrue];

    pub fn name(self) -> &'static str {
        match self {
            OracleId::Squarefull => "squarefull",
            OracleId::SUnit => "s-unit",
            OracleId::ConstantTrue => "constant-true",
        }
    }

    /// `Ok` when the oracle describes the Campana set of `m`.
    pub fn check_applicable(self, m: &OrbifoldModel) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::OracleNotApplicable {
                oracle: self.name().to_string(),
                reason: reason.to_string(),
            })
        };
        let weights = m.weights();
        match self {
            OracleId::Squarefull => {
                if m.ambient_dim() != 1 {
                    return fail("needs P^1");
                }
                if !m.s_primes().is_empty() {
                    return fail("needs S empty");
                }
                let mut coords: Vec<Option<usize>> =
                    m.components().iter().map(|c| c.form().coordinate_index()).collect();
                coords.sort();
                if coords != [Some(0), Some(1)] {
                    return fail("components must be x0 = 0 and x1 = 0");
                }
                let half = num_rational::BigRational::new(1.into(), 2.into());
                if weights.iter().any(|w| *w != half) {
                    return fail("both weights must be 1/2");
                }
            }
            OracleId::SUnit => {
                if !weights.iter().all(Zero::is_zero) {
                    return fail("all weights must be 0");
                }
            }
            OracleId::ConstantTrue => {
                if !weights.iter().all(One::is_one) {
                    return fail("all weights must be 1");
                }
            }
        }
        Ok(())
    }

    /// Expected Campana membership; boundary points are rejected.
    pub fn expected(self, m: &OrbifoldModel, x: &ProjectivePoint) -> Result<bool> {
        match self {
            OracleId::Squarefull => campana_oracle_p1_halves(x),
            OracleId::SUnit => sunit_oracle(m, x),
            OracleId::ConstantTrue => {
                for (i, c) in m.components().iter().enumerate() {
                    if c.form().evaluate(x.coords())? == 0 {
                        return Err(boundary(x, i));
                    }
                }
                Ok(true)
            }
        }
    }
}

impl fmt::Display for OracleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OracleId::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::parse(format!("unknown oracle {s:?} (squarefull, s-unit, constant-true)")))
    }
}

/// One point where the oracle and the classifier were compared.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    pub point: ProjectivePoint,
    pub expected: bool,
    pub actual: bool,
    pub actual_class: PointClass,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CrossValidation {
    pub oracle: OracleId,
    pub height_bound: u64,
    pub checked: u64,
    pub skipped_boundary: u64,
    pub disagreements: Vec<OracleVerdict>,
}

impl CrossValidation {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty()
    }
}

#[derive(Default)]
struct Acc {
    checked: u64,
    skipped: u64,
    disagreements: Vec<OracleVerdict>,
    failure: Option<Error>,
}

/// Compare the classifier with `oracle` at every point of height at most
/// `bound` off the boundary.
pub fn cross_validate(m: &OrbifoldModel, bound: u64, oracle: OracleId, threads: usize) -> Result<CrossValidation> {
    oracle.check_applicable(m)?;
    let acc = sweep(
        m.ambient_dim(),
        bound,
        threads,
        Acc::default,
        |acc: &mut Acc, x| {
            let expected = match oracle.expected(m, x) {
                Ok(e) => e,
                Err(Error::OnComponent { .. }) => {
                    acc.skipped += 1;
                    return;
                }
                Err(e) => {
                    acc.failure.get_or_insert(e);
                    return;
                }
            };
            acc.checked += 1;
            match is_campana(m, x) {
                Ok(class) => {
                    let actual = class.in_campana_set();
                    if actual != expected {
                        acc.disagreements.push(OracleVerdict {
                            point: x.clone(),
                            expected,
                            actual,
                            actual_class: class,
                            agree: false,
                        });
                    }
                }
                Err(e) => {
                    acc.failure.get_or_insert(e);
                }
            }
        },
        |mut a, b| {
            a.checked += b.checked;
            a.skipped += b.skipped;
            a.disagreements.extend(b.disagreements);
            a.failure = a.failure.or(b.failure);
            a
        },
    )?;
    if let Some(e) = acc.failure {
        return Err(e);
    }
    Ok(CrossValidation {
        oracle,
        height_bound: bound,
        checked: acc.checked,
        skipped_boundary: acc.skipped,
        disagreements: acc.disagreements,
    })
}

/// Squarefull integers in `[1, bound]`, by factoring each one.
pub fn squarefull_up_to(bound: u64) -> Vec<u64> {
    (1..=bound)
        .filter(|&n| arith::factor_list(n as u128).iter().all(|&(_, e)| e >= 2))
        .collect()
}

/// Number of points `(a, b)` of `P^1` with `a b != 0`, both coordinates
/// squarefull and height at most each bucket edge, as `(edge, count)`.
pub fn squarefull_pair_counts(bound: u64) -> Vec<(u64, u64)> {
    let sf = squarefull_up_to(bound);
    let edges = bucket_edges(bound);
    let mut per_height = vec![0u64; edges.len()];
    for &a in &sf {
        for &b in &sf {
            if a.gcd(&b) == 1 {
                let h = a.max(b);
                let k = edges.partition_point(|&e| e < h);
                // (a, b) and (a, -b).
                per_height[k] += 2;
            }
        }
    }
    let mut cum = 0;
    edges
        .iter()
        .zip(per_height)
        .map(|(&e, c)| {
            cum += c;
            (e, cum)
        })
        .collect()
}
