//! Elliptic-curve census: ingest `(label, conductor, torsion)` records, flag
//! semistability away from `S`, and report which torsion orders occur.
//!
//! A full level-`m` structure cannot be read off a torsion field, so the
//! report counts curves with a rational point of order `m` instead. That is
//! strictly weaker, and every report carries [`LEVEL_CAVEAT`].

pub mod curves;
#[cfg(feature = "remote")]
pub mod remote;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::arith;
use crate::error::{Error, Result};

pub const LEVEL_CAVEAT: &str = "level m here means a rational point of order m (m divides the largest \
torsion invariant factor); this is a strictly weaker proxy for a full level-m structure, which \
cannot be certified from database torsion fields";

/// Rational torsion subgroups possible over `Q`: `Z/n` for `n <= 10` or
/// `n = 12`, and `Z/2 x Z/2n` for `n <= 4`.
pub fn is_possible_over_q(factors: &[u32]) -> bool {
    match factors {
        [] => true,
        [n] => (2..=10).contains(n) || *n == 12,
        [2, m] => [2, 4, 6, 8].contains(m),
        _ => false,
    }
}

/// Invariant factors `d_1 | d_2` of the rational torsion subgroup; trivial
/// torsion has none.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Torsion(SmallVec<[u32; 2]>);

impl Torsion {
    pub fn new(mut factors: Vec<u32>) -> Result<Self> {
        factors.retain(|&d| d != 1);
        if factors.contains(&0) {
            return Err(Error::parse("torsion invariant factor 0"));
        }
        if factors.windows(2).any(|w| w[1] % w[0] != 0) {
            return Err(Error::parse(format!("invariant factors {factors:?} do not divide in sequence")));
        }
        if !is_possible_over_q(&factors) {
            return Err(Error::parse(format!("torsion {factors:?} does not occur over Q")));
        }
        Ok(Torsion(factors.into_iter().collect()))
    }

    pub fn factors(&self) -> &[u32] {
        &self.0
    }

    pub fn order(&self) -> u32 {
        self.0.iter().product()
    }

    /// Largest order of a rational torsion point.
    pub fn exponent(&self) -> u32 {
        self.0.last().copied().unwrap_or(1)
    }
}

impl FromStr for Torsion {
    type Err = Error;

    /// `[5]`, `[2,4]`, `[]` or `[1]`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::parse(format!("torsion {s:?} is not a bracketed list")))?;
        let factors = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|e| Error::parse(format!("torsion {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?
        };
        Torsion::new(factors)
    }
}

impl fmt::Display for Torsion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl Serialize for Torsion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    RemoteApi,
    LocalFile,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CurveRecord {
    pub label: String,
    pub conductor: u64,
    pub torsion: Torsion,
    pub source: Source,
}

/// Parsed records plus the rows that were rejected.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Ingested {
    pub records: Vec<CurveRecord>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

impl Ingested {
    fn skip(&mut self, msg: String) {
        self.skipped += 1;
        self.warnings.push(msg);
    }
}

fn parse_conductor(s: &str) -> Result<u64> {
    let n: u64 = s.trim().parse().map_err(|e| Error::parse(format!("conductor {s:?}: {e}")))?;
    if n == 0 {
        return Err(Error::parse("conductor 0"));
    }
    Ok(n)
}

/// Read `label,conductor,torsion` rows. An unquoted torsion list such as
/// `[2,4]` spills over several CSV fields and is joined back together.
/// Malformed rows are skipped and counted; at most `limit` records are kept.
pub fn ingest_csv(reader: impl Read, limit: usize) -> Result<Ingested> {
    let mut out = Ingested::default();
    if limit == 0 {
        return Ok(out);
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(format!("missing column {name:?}")))
    };
    let (label_col, conductor_col, torsion_col) = (col("label")?, col("conductor")?, col("torsion")?);
    if torsion_col != headers.len() - 1 {
        return Err(Error::parse("torsion must be the last column"));
    }
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.skip(format!("line {line}: {e}"));
                continue;
            }
        };
        if rec.len() < headers.len() {
            out.skip(format!("line {line}: expected {} fields, found {}", headers.len(), rec.len()));
            continue;
        }
        let torsion_text = rec.iter().skip(torsion_col).collect::<Vec<_>>().join(",");
        let parsed = (|| -> Result<CurveRecord> {
            let label = rec[label_col].to_string();
            if label.is_empty() {
                return Err(Error::parse("empty label"));
            }
            Ok(CurveRecord {
                label,
                conductor: parse_conductor(&rec[conductor_col])?,
                torsion: torsion_text.parse()?,
                source: Source::LocalFile,
            })
        })();
        match parsed {
            Ok(r) => {
                out.records.push(r);
                if out.records.len() == limit {
                    break;
                }
            }
            Err(e) => out.skip(format!("line {line}: {e}")),
        }
    }
    Ok(out)
}

pub fn ingest_csv_file(path: impl AsRef<Path>, limit: usize) -> Result<Ingested> {
    ingest_csv(std::fs::File::open(path)?, limit)
}

/// Squarefree away from `s_primes`, i.e. semistable reduction outside `S`.
pub fn is_semistable(conductor: u64, s_primes: &BTreeSet<u128>) -> bool {
    conductor > 0
        && arith::factor_list(conductor as u128)
            .iter()
            .all(|&(p, e)| e == 1 || s_primes.contains(&p))
}

/// How often each torsion order occurs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LevelStats {
    pub curves: u64,
    /// For each `m >= 2`, the number of curves with a rational point of
    /// order `m`.
    pub per_level: BTreeMap<u32, u64>,
    /// Largest `m` present; `None` for no curves.
    pub max_level: Option<u32>,
}

pub fn max_torsion_level(records: &[CurveRecord], semistable_only: bool, s_primes: &BTreeSet<u128>) -> LevelStats {
    let mut stats = LevelStats::default();
    for r in records {
        if semistable_only && !is_semistable(r.conductor, s_primes) {
            continue;
        }
        stats.curves += 1;
        let e = r.torsion.exponent();
        for m in (2..=e).filter(|m| e % m == 0) {
            *stats.per_level.entry(m).or_insert(0) += 1;
        }
        stats.max_level = Some(stats.max_level.unwrap_or(1).max(e));
    }
    stats
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CensusReport {
    pub records: usize,
    pub skipped: usize,
    pub s_primes: Vec<String>,
    pub semistable_records: u64,
    pub all_curves: LevelStats,
    pub semistable: LevelStats,
    pub caveat: &'static str,
}

pub fn census_report(ingested: &Ingested, s_primes: &BTreeSet<u128>) -> CensusReport {
    let semistable = max_torsion_level(&ingested.records, true, s_primes);
    CensusReport {
        records: ingested.records.len(),
        skipped: ingested.skipped,
        s_primes: s_primes.iter().map(|p| p.to_string()).collect(),
        semistable_records: semistable.curves,
        all_curves: max_torsion_level(&ingested.records, false, s_primes),
        semistable,
        caveat: LEVEL_CAVEAT,
    }
}
