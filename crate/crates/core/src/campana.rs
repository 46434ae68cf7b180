//! The epsilon-Campana condition: at every prime `p` outside `S` where `x`
//! meets the boundary, the weighted multiplicity `sum_i eps_i n_p(D_i, x)`
//! must be at least one.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{OrbifoldModel, ProjectivePoint};
use crate::local::Contact;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum PointClass {
    /// No prime outside `S` meets the boundary; the condition holds vacuously.
    Integral,
    Campana,
    /// `witness` is the smallest prime where the weighted multiplicity is
    /// positive but below one.
    NonCampana { witness: u128 },
    OnBoundary { component: usize },
}

impl PointClass {
    /// Membership in the Campana set (integral points included).
    pub fn in_campana_set(self) -> bool {
        matches!(self, PointClass::Integral | PointClass::Campana)
    }

    pub fn witness(self) -> Option<u128> {
        match self {
            PointClass::NonCampana { witness } => Some(witness),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PointClass::Integral => "Integral",
            PointClass::Campana => "Campana",
            PointClass::NonCampana { .. } => "NonCampana",
            PointClass::OnBoundary { .. } => "OnBoundary",
        }
    }
}

impl fmt::Display for PointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointClass::NonCampana { witness } => write!(f, "NonCampana (witness p = {witness})"),
            PointClass::OnBoundary { component } => write!(f, "OnBoundary (component {component})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Primes outside `S` at which `x` meets `D`.
pub fn support_primes(m: &OrbifoldModel, x: &ProjectivePoint) -> Result<BTreeSet<u128>> {
    Ok(Contact::of(m, x)?.support(m).into_iter().collect())
}

/// Decide the Campana condition in exact integer arithmetic: with weights
/// written as `scaled_i / L`, the test `sum eps_i n_i >= 1` becomes
/// `sum scaled_i n_i >= L`. Equality counts as Campana.
pub fn is_campana(m: &OrbifoldModel, x: &ProjectivePoint) -> Result<PointClass> {
    let contact = match Contact::of(m, x) {
        Ok(c) => c,
        Err(Error::OnComponent { component, .. }) => return Ok(PointClass::OnBoundary { component }),
        Err(e) => return Err(e),
    };
    let support = contact.support(m);
    if support.is_empty() {
        return Ok(PointClass::Integral);
    }
    let scale = m.scale();
    for &p in &support {
        let total: i128 = scale
            .scaled
            .iter()
            .enumerate()
            .map(|(i, &w)| w as i128 * contact.exponent(i, p) as i128)
            .sum();
        if total < scale.denom as i128 {
            return Ok(PointClass::NonCampana { witness: p });
        }
    }
    Ok(PointClass::Campana)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{normalize, DivisorComponent, Form};
    use crate::local::weighted_multiplicity;
    use num_rational::BigRational;
    use num_traits::One;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn coordinate_model(w: [BigRational; 2], s: &[u128]) -> OrbifoldModel {
        let [w0, w1] = w;
        OrbifoldModel::validated(
            1,
            vec![
                DivisorComponent::new(Form::linear(&[1, 0]), w0),
                DivisorComponent::new(Form::linear(&[0, 1]), w1),
            ],
            s.iter().copied(),
        )
        .unwrap()
    }

    fn pt(c: &[i64]) -> ProjectivePoint {
        normalize(c).unwrap()
    }

    fn squarefull(n: i64) -> bool {
        let n = n.unsigned_abs();
        (2..=n).filter(|p| n.is_multiple_of(*p) && (2..*p).all(|d| p % d != 0)).all(|p| n.is_multiple_of(p * p))
    }

    #[test]
    fn support_examples() {
        let m = coordinate_model([q(1, 2), q(1, 2)], &[]);
        assert_eq!(support_primes(&m, &pt(&[8, 9])).unwrap(), BTreeSet::from([2, 3]));
        assert!(support_primes(&m, &pt(&[1, 1])).unwrap().is_empty());
        let m = coordinate_model([q(1, 2), q(1, 2)], &[2]);
        assert_eq!(support_primes(&m, &pt(&[8, 9])).unwrap(), BTreeSet::from([3]));
        assert!(matches!(support_primes(&m, &pt(&[0, 1])), Err(Error::OnComponent { .. })));
    }

    #[test]
    fn classification_examples() {
        let m = coordinate_model([q(1, 2), q(1, 2)], &[]);
        assert_eq!(is_campana(&m, &pt(&[8, 9])).unwrap(), PointClass::Campana);
        assert_eq!(
            is_campana(&m, &pt(&[2, 3])).unwrap(),
            PointClass::NonCampana { witness: 2 }
        );
        assert_eq!(is_campana(&m, &pt(&[1, -1])).unwrap(), PointClass::Integral);
        assert_eq!(
            is_campana(&m, &pt(&[0, 1])).unwrap(),
            PointClass::OnBoundary { component: 0 }
        );
        // p = 3 gives exactly 1: ties are Campana.
        assert_eq!(is_campana(&m, &pt(&[4, 9])).unwrap(), PointClass::Campana);
    }

    #[test]
    fn weight_one_accepts_everything() {
        let m = coordinate_model([q(1, 1), q(1, 1)], &[]);
        for a in 1..60i64 {
            for b in -60..60i64 {
                let Ok(x) = normalize(&[a, b]) else { continue };
                if b == 0 {
                    continue;
                }
                assert!(is_campana(&m, &x).unwrap().in_campana_set());
            }
        }
    }

    #[test]
    fn halves_agree_with_squarefull_coordinates() {
        let m = coordinate_model([q(1, 2), q(1, 2)], &[]);
        for a in 1..150i64 {
            for b in -150..150i64 {
                if b == 0 || num_integer::gcd(a, b) != 1 {
                    continue;
                }
                let x = pt(&[a, b]);
                let class = is_campana(&m, &x).unwrap();
                assert_eq!(class.in_campana_set(), squarefull(a) && squarefull(b), "{x}");
            }
        }
    }

    #[test]
    fn predicate_matches_rational_route() {
        // Integer-scaled decision versus summing BigRationals prime by prime.
        let m = OrbifoldModel::validated(
            1,
            vec![
                DivisorComponent::new(Form::linear(&[1, 0]), q(1, 3)),
                DivisorComponent::new(Form::linear(&[1, 1]), q(2, 3)),
                DivisorComponent::new(Form::linear(&[1, -1]), q(1, 2)),
            ],
            [5],
        )
        .unwrap();
        let w = m.weights();
        for a in 1..80i64 {
            for b in -80..80i64 {
                let Ok(x) = normalize(&[a, b]) else { continue };
                let class = is_campana(&m, &x).unwrap();
                let Ok(support) = support_primes(&m, &x) else {
                    assert!(matches!(class, PointClass::OnBoundary { .. }));
                    continue;
                };
                let failing = support
                    .iter()
                    .copied()
                    .find(|&p| weighted_multiplicity(&m, &x, p, &w).unwrap() < BigRational::one());
                let expected = match (support.is_empty(), failing) {
                    (true, _) => PointClass::Integral,
                    (false, Some(p)) => PointClass::NonCampana { witness: p },
                    (false, None) => PointClass::Campana,
                };
                assert_eq!(class, expected, "{x}");
            }
        }
    }
}
