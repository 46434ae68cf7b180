//! Writes the offline census fixture: every curve
//! `[a1, a2, a3, a4, a6]` with `a1, a3` in {0, 1}, `a2` in {-1, 0, 1} and
//! `|a4|, |a6| <= 12`, one row per isomorphism class, labelled by the
//! coefficients of the first model met.
//!
//! cargo run -p campana-core --example census_fixture > crates/core/tests/fixtures/curves.csv

use std::collections::BTreeSet;
use std::io::Write;

use campana_core::census::curves::{conductor, torsion, Weierstrass};

fn main() -> std::io::Result<()> {
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for a1 in 0..=1 {
        for a2 in -1..=1 {
            for a3 in 0..=1 {
                for a4 in -12..=12 {
                    for a6 in -12..=12 {
                        let e = Weierstrass::new(a1, a2, a3, a4, a6);
                        if e.discriminant() == 0 || !seen.insert(e.isomorphism_key()) {
                            continue;
                        }
                        let n = conductor(&e).expect("nonsingular");
                        let t = torsion(&e).expect("nonsingular");
                        rows.push((n, format!("{a1};{a2};{a3};{a4};{a6}"), t));
                    }
                }
            }
        }
    }
    rows.sort();
    let mut out = std::io::stdout().lock();
    writeln!(out, "label,conductor,torsion")?;
    for (n, label, t) in rows {
        writeln!(out, "{label},{n},\"{t}\"")?;
    }
    Ok(())
}
