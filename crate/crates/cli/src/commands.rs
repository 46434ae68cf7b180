use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use num_rational::BigRational;
use serde::Serialize;

use campana_core::arith;
use campana_core::census::{self, CurveRecord};
use campana_core::enumerate::{self, CountOptions, Method};
use campana_core::geometry::{parse_weight, parse_weights};
use campana_core::local::contact_table;
use campana_core::oracle::{self, OracleId};
use campana_core::{is_campana, load_model, OrbifoldModel, PointClass, ProjectivePoint};

use crate::{CensusArgs, ClassifyArgs, EnumerateArgs, ModelArgs, OutputArgs, VerifyArgs, VojtaArgs};

fn parse_primes(s: &str) -> Result<Vec<u128>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let p: u128 = t.parse().with_context(|| format!("bad prime {t:?}"))?;
            if !arith::is_prime(p) {
                bail!("{p} is not a prime");
            }
            Ok(p)
        })
        .collect()
}

fn load(args: &ModelArgs) -> Result<OrbifoldModel> {
    let mut m = load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    if let Some(s) = &args.set_s {
        m = m.with_s_primes(parse_primes(s)?)?;
    }
    if let Some(w) = &args.eps {
        m = m.with_weights(&parse_weights(w)?)?;
    }
    Ok(m)
}

fn check_bound(b: u64) -> Result<()> {
    if b == 0 {
        bail!("--height-bound must be at least 1");
    }
    Ok(())
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Collects report files; timestamps go only into `meta.json` so the other
/// files depend on the configuration alone.
struct Outputs<'a> {
    dir: Option<&'a Path>,
    command: &'static str,
    started: u128,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(args: &'a OutputArgs, command: &'static str) -> Result<Self> {
        if let Some(dir) = &args.out {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Outputs {
            dir: args.out.as_deref(),
            command,
            started: unix_ms(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(self) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let meta = serde_json::json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "args": std::env::args().skip(1).collect::<Vec<_>>(),
            "started_unix_ms": self.started.to_string(),
            "finished_unix_ms": unix_ms().to_string(),
            "files": self.files,
        });
        let path = dir.join("meta.json");
        fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct PrimeRow {
    prime: String,
    multiplicities: Vec<u32>,
    weighted: String,
}

#[derive(Serialize)]
struct Classification {
    point: ProjectivePoint,
    #[serde(flatten)]
    class: PointClass,
    support: Vec<PrimeRow>,
}

pub fn classify(args: ClassifyArgs) -> Result<ExitCode> {
    let m = load(&args.model)?;
    let x: ProjectivePoint = args.point.parse()?;
    let class = is_campana(&m, &x)?;
    let weights = m.weights();
    let support = match class {
        PointClass::OnBoundary { .. } => Vec::new(),
        _ => contact_table(&m, &x)?
            .into_iter()
            .map(|row| {
                let weighted: BigRational = row
                    .entries
                    .iter()
                    .zip(&weights)
                    .map(|(&n, w)| w * BigRational::from_integer(n.into()))
                    .sum();
                PrimeRow {
                    prime: row.prime.to_string(),
                    multiplicities: row.entries,
                    weighted: weighted.to_string(),
                }
            })
            .collect(),
    };
    let report = Classification { point: x.clone(), class, support };
    if args.json {
        print_json(&report)?;
    } else {
        println!("{x}: {class}");
        if !report.support.is_empty() {
            let heads: Vec<String> = (0..m.components().len()).map(|i| format!("n_p(D{i})")).collect();
            println!("  {:>8}  {}  weighted", "p", heads.join("  "));
            for row in &report.support {
                let cells: Vec<String> = row
                    .multiplicities
                    .iter()
                    .zip(&heads)
                    .map(|(n, h)| format!("{n:>w$}", w = h.len()))
                    .collect();
                println!("  {:>8}  {}  {}", row.prime, cells.join("  "), row.weighted);
            }
        }
    }
    if let PointClass::OnBoundary { component } = class {
        eprintln!("{x} lies on component {component}: {}", m.components()[component].form());
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn enumerate(args: EnumerateArgs) -> Result<ExitCode> {
    check_bound(args.height_bound)?;
    let m = load(&args.model)?;
    let opts = CountOptions {
        threads: args.threads,
        include_boundary: args.include_boundary,
        method: if args.method == "sweep" { Method::Sweep } else { Method::Auto },
        top_lines: args.top_lines,
    };
    let mut out = Outputs::new(&args.output, "enumerate")?;
    let report = enumerate::count_campana(&m, args.height_bound, &opts)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    out.write("counting.csv", &csv)?;
    out.json("counting.json", &report)?;
    out.finish()?;
    if args.output.json {
        print_json(&report)?;
        return Ok(ExitCode::SUCCESS);
    }
    let t = report.totals();
    println!("height bound {} ({} method)", report.height_bound, report.method);
    println!("bigness margin: {}", report.model.bigness_margin);
    println!(
        "total {}  campana {}  integral {}  non-campana {}  on boundary {}",
        t.total, t.campana, t.integral, t.non_campana, t.on_boundary
    );
    for (name, fit) in [("campana", &report.campana_fit), ("total", &report.total_fit)] {
        match fit {
            Some(f) => println!("{name} count ~ {:.4} B^{:.4} ({} buckets)", f.coefficient, f.exponent, f.buckets_used),
            None => println!("{name} count: too few points to fit"),
        }
    }
    for l in &report.lines {
        println!("line {:?} through {} Campana points", l.line, l.points);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn vojta_gap(args: VojtaArgs) -> Result<ExitCode> {
    check_bound(args.height_bound)?;
    let delta = parse_weight(&args.delta).context("--delta")?;
    campana_core::heights::check_delta(&delta)?;
    let m = load(&args.model)?;
    let mut out = Outputs::new(&args.output, "vojta-gap")?;
    let scan = enumerate::vojta_scan(&m, args.height_bound, &delta, args.threads)?;
    let mut csv = Vec::new();
    scan.write_csv(&mut csv)?;
    out.write("gaps.csv", &csv)?;
    out.json("gaps.json", &scan)?;
    out.finish()?;
    if args.output.json {
        print_json(&scan)?;
    } else {
        let gaps = scan.rows.iter().map(|r| r.gap);
        let min = gaps.clone().fold(f64::INFINITY, f64::min);
        let max = gaps.fold(f64::NEG_INFINITY, f64::max);
        println!("{} Campana points up to height {}", scan.rows.len(), scan.height_bound);
        if !scan.rows.is_empty() {
            println!("gap range [{min:.6}, {max:.6}] with delta = {}", scan.delta);
        }
        println!("counting-function chain violations: {}", scan.lemma_violations);
    }
    Ok(if scan.lemma_violations == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    check_bound(args.height_bound)?;
    let m = load(&args.model)?;
    let oracle = match &args.oracle {
        Some(name) => name.parse::<OracleId>()?,
        None => OracleId::ALL
            .into_iter()
            .find(|o| o.check_applicable(&m).is_ok())
            .context("no oracle applies to this model (needs the halves model, all weights 0 or all weights 1)")?,
    };
    let mut out = Outputs::new(&args.output, "verify")?;
    let result = oracle::cross_validate(&m, args.height_bound, oracle, args.threads)?;
    out.json("verify.json", &result)?;
    out.finish()?;
    if args.output.json {
        print_json(&result)?;
    } else {
        println!(
            "oracle {}: {} points up to height {} checked, {} boundary points skipped, {} disagreements",
            result.oracle,
            result.checked,
            result.height_bound,
            result.skipped_boundary,
            result.disagreements.len()
        );
        for d in result.disagreements.iter().take(20) {
            println!("  {}: oracle {}, classifier {}", d.point, d.expected, d.actual_class);
        }
    }
    Ok(if result.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn records_csv(records: &[CurveRecord], s: &BTreeSet<u128>) -> Vec<u8> {
    let mut out = b"label,conductor,torsion,semistable\n".to_vec();
    for r in records {
        let line = format!(
            "{},{},\"{}\",{}\n",
            r.label,
            r.conductor,
            r.torsion,
            census::is_semistable(r.conductor, s)
        );
        out.extend_from_slice(line.as_bytes());
    }
    out
}

#[cfg(feature = "remote")]
fn fetch_remote(args: &CensusArgs) -> Result<census::Ingested> {
    use campana_core::census::remote;
    let config: remote::RemoteConfig = match &args.remote_config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => remote::RemoteConfig::default(),
    };
    let dir = args.cache_dir.clone().unwrap_or_else(remote::default_cache_dir);
    let fetched = remote::fetch(&config, args.limit, &dir)?;
    eprintln!(
        "{} pages ({} fetched over the network), cache {}",
        fetched.pages,
        fetched.network_requests,
        dir.display()
    );
    Ok(fetched.ingested)
}

#[cfg(not(feature = "remote"))]
fn fetch_remote(_args: &CensusArgs) -> Result<census::Ingested> {
    bail!("built without remote support")
}

pub fn census(args: CensusArgs) -> Result<ExitCode> {
    let s: BTreeSet<u128> = parse_primes(args.set_s.as_deref().unwrap_or(""))?.into_iter().collect();
    let ingested = match (&args.input, args.remote) {
        (Some(path), false) => census::ingest_csv_file(path, args.limit)
            .with_context(|| format!("reading {}", path.display()))?,
        (None, true) => fetch_remote(&args)?,
        _ => bail!("give either --input FILE or --remote"),
    };
    for w in ingested.warnings.iter().take(10) {
        eprintln!("warning: {w}");
    }
    if ingested.warnings.len() > 10 {
        eprintln!("warning: ... {} more", ingested.warnings.len() - 10);
    }
    let report = census::census_report(&ingested, &s);
    let mut out = Outputs::new(&args.output, "census")?;
    out.json("census.json", &report)?;
    out.write("records.csv", &records_csv(&ingested.records, &s))?;
    out.finish()?;
    if args.output.json {
        print_json(&report)?;
    } else {
        println!("{} records ({} skipped), {} semistable", report.records, report.skipped, report.semistable_records);
        let level = |l: Option<u32>| l.map_or("none".to_string(), |v| v.to_string());
        println!("max torsion level, all curves: {}", level(report.all_curves.max_level));
        println!("max torsion level, semistable: {}", level(report.semistable.max_level));
        for (m, n) in &report.all_curves.per_level {
            let semi = report.semistable.per_level.get(m).copied().unwrap_or(0);
            println!("  m = {m:>2}: {n} curves, {semi} semistable");
        }
        println!("note: {}", report.caveat);
    }
    Ok(ExitCode::SUCCESS)
}
