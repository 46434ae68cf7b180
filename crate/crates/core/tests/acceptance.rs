//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! lines show up in `cargo test` output; exits nonzero if any check fails.

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use campana_core::census::{self, census_report, ingest_csv_file, is_semistable, max_torsion_level};
use campana_core::enumerate::{count_campana, points_up_to, vojta_scan, CountOptions, Method};
use campana_core::heights::{bigness_margin, counting_n};
use campana_core::oracle::{cross_validate, squarefull_pair_counts, OracleId};
use campana_core::{
    is_campana, load_model, normalize, validate_model, DivisorComponent, Form, LogSum, OrbifoldModel,
    ProjectivePoint,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> OrbifoldModel {
    load_model(models_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_equivalence() -> Outcome {
    let r = cross_validate(&model("p1_halves.toml"), 10_000, OracleId::Squarefull, 0).map_err(|e| e.to_string())?;
    ensure(r.passed(), || {
        format!("{} disagreements, first at {}", r.disagreements.len(), r.disagreements[0].point)
    })?;
    Ok(format!("{} points of height <= 10^4 checked, 0 disagreements", r.checked))
}

fn endpoint_recovery() -> Outcome {
    let mut checked = 0;
    for name in ["p1_halves.toml", "five_lines.toml", "p1_mixed.toml"] {
        let m = model(name);
        for (w, oracle) in [(q(1, 1), OracleId::ConstantTrue), (q(0, 1), OracleId::SUnit)] {
            let m = m.with_uniform_weight(&w).map_err(|e| e.to_string())?;
            let r = cross_validate(&m, 1000, oracle, 0).map_err(|e| e.to_string())?;
            ensure(r.passed(), || format!("{name} eps = {w}: {} exceptions", r.disagreements.len()))?;
            checked += r.checked;
        }
    }
    Ok(format!("3 models x eps in {{0, 1}} at height <= 10^3, {checked} points, 0 exceptions"))
}

fn lemma_chain() -> Outcome {
    let mut parts = Vec::new();
    for name in ["p1_halves.toml", "five_lines.toml"] {
        let scan = vojta_scan(&model(name), 10_000, &BigRational::zero(), 0).map_err(|e| e.to_string())?;
        ensure(scan.lemma_violations == 0, || format!("{name}: {} violations", scan.lemma_violations))?;
        parts.push(format!("{name}: {} Campana points", scan.rows.len()));
    }
    Ok(format!("{}, 0 violations (exact)", parts.join("; ")))
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> ProjectivePoint {
    loop {
        let c: Vec<i64> = (0..=n).map(|_| rng.gen_range(-1_000_000..=1_000_000)).collect();
        if let Ok(x) = normalize(&c) {
            return x;
        }
    }
}

fn product_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let forms: Vec<Form> = ["five_lines.toml", "p1_mixed.toml", "p2_conic.toml"]
        .iter()
        .flat_map(|n| model(n).components().iter().map(|c| c.form().clone()).collect::<Vec<_>>())
        .collect();
    let mut worst = 0f64;
    let mut evaluated = 0;
    for k in 0..10_000 {
        let f = &forms[k % forms.len()];
        let n = f.arity() - 1;
        let m = OrbifoldModel::validated(n, vec![DivisorComponent::new(f.clone(), BigRational::one())], [])
            .map_err(|e| e.to_string())?;
        let x = random_point(&mut rng, n);
        let v = f.evaluate(x.coords()).map_err(|e| e.to_string())?;
        if v == 0 {
            continue;
        }
        let got = counting_n(&m, &x, &[BigRational::one()]).map_err(|e| e.to_string())?;
        ensure(got == LogSum::log_of(v.unsigned_abs()), || format!("N({f}, {x}) is not log|F(x)| exactly"))?;
        let diff = (got.to_f64() - (v.unsigned_abs() as f64).ln()).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || format!("float discrepancy {diff:e} at {x}"))?;
        evaluated += 1;
    }
    Ok(format!("{evaluated} random points, exact LogSum equality, max float discrepancy {worst:.2e}"))
}

fn random_model(rng: &mut ChaCha8Rng) -> OrbifoldModel {
    let weights = [q(0, 1), q(1, 4), q(1, 3), q(1, 2), q(2, 3), q(3, 4), q(1, 1)];
    loop {
        let k = rng.gen_range(1..=5);
        let comps = (0..k)
            .map(|_| {
                let form = if rng.gen_bool(0.7) {
                    Form::linear(&[rng.gen_range(-3..=3), rng.gen_range(-3..=3)])
                } else {
                    Form::new([
                        (rng.gen_range(-2..=2), [2, 0]),
                        (rng.gen_range(-2..=2), [1, 1]),
                        (rng.gen_range(-2..=2), [0, 2]),
                    ])
                    .unwrap_or_else(|_| Form::linear(&[1, 0]))
                };
                DivisorComponent::new(form, weights[rng.gen_range(0..weights.len())].clone())
            })
            .collect();
        let s: Vec<u128> = [2u128, 3, 5].into_iter().filter(|_| rng.gen_bool(0.3)).collect();
        let m = OrbifoldModel::new(1, comps, s);
        if validate_model(&m).is_valid() {
            return OrbifoldModel::validated(1, m.components().to_vec(), m.s_primes().iter().copied()).unwrap();
        }
    }
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let points: Vec<ProjectivePoint> = points_up_to(1, 200).map_err(|e| e.to_string())?.collect();
    let mut comparisons = 0u64;
    for _ in 0..12 {
        let m = random_model(&mut rng);
        let raised: Vec<BigRational> = m
            .weights()
            .iter()
            .map(|w| if rng.gen_bool(0.5) { w.clone() } else { (w + BigRational::one()) / q(2, 1) })
            .collect();
        let m_eps = m.with_weights(&raised).map_err(|e| e.to_string())?;
        let mut bigger_s: BTreeSet<u128> = m.s_primes().clone();
        bigger_s.extend([2u128, 7].into_iter().filter(|_| rng.gen_bool(0.7)));
        bigger_s.insert(3);
        let m_s = m.with_s_primes(bigger_s).map_err(|e| e.to_string())?;
        for x in &points {
            let base = is_campana(&m, x).map_err(|e| e.to_string())?;
            if !base.in_campana_set() {
                continue;
            }
            for (label, other) in [("eps", &m_eps), ("S", &m_s)] {
                let c = is_campana(other, x).map_err(|e| e.to_string())?;
                ensure(c.in_campana_set(), || format!("{x} leaves the Campana set when {label} grows"))?;
                comparisons += 1;
            }
        }
    }
    Ok(format!("12 random P^1 models, {} points each, {comparisons} inclusions checked", points.len()))
}

fn brute(n: usize, b: i64) -> BTreeSet<ProjectivePoint> {
    let mut out = BTreeSet::new();
    let r = -b..=b;
    if n == 1 {
        for x0 in r.clone() {
            for x1 in r.clone() {
                if x0.gcd(&x1) == 1 {
                    out.insert(normalize(&[x0, x1]).unwrap());
                }
            }
        }
    } else {
        for x0 in r.clone() {
            for x1 in r.clone() {
                for x2 in r.clone() {
                    if x0.gcd(&x1).gcd(&x2) == 1 {
                        out.insert(normalize(&[x0, x1, x2]).unwrap());
                    }
                }
            }
        }
    }
    out
}

fn enumeration() -> Outcome {
    for (n, max_b) in [(1usize, 500i64), (2, 40)] {
        let full = brute(n, max_b);
        for b in 1..=max_b {
            let listed: Vec<ProjectivePoint> = points_up_to(n, b as u64).map_err(|e| e.to_string())?.collect();
            let expected: BTreeSet<ProjectivePoint> =
                full.iter().filter(|x| x.max_abs() <= b as u64).cloned().collect();
            ensure(listed.len() == expected.len(), || format!("n = {n}, B = {b}: {} points, expected {}", listed.len(), expected.len()))?;
            let set: HashSet<&ProjectivePoint> = listed.iter().collect();
            ensure(set.len() == listed.len(), || format!("n = {n}, B = {b}: duplicates"))?;
            ensure(listed.iter().all(|x| expected.contains(x)), || format!("n = {n}, B = {b}: stray point"))?;
        }
    }
    let cases = [("p1_halves.toml", 3000u64), ("five_lines.toml", 1000), ("p2_conic.toml", 30)];
    for (name, b) in cases {
        let m = model(name);
        let run = |threads| {
            let opts = CountOptions { threads, method: Method::Sweep, ..CountOptions::default() };
            serde_json::to_vec(&count_campana(&m, b, &opts).unwrap()).unwrap()
        };
        ensure(run(1) == run(4), || format!("{name}: parallel and serial reports differ"))?;
        let scan = |threads| serde_json::to_vec(&vojta_scan(&m, b.min(500), &q(1, 10), threads).unwrap()).unwrap();
        ensure(scan(1) == scan(3), || format!("{name}: parallel and serial gap scans differ"))?;
    }
    Ok("n = 1 for every B <= 500 and n = 2 for every B <= 40 match brute force; serial and parallel reports byte-identical".into())
}

fn growth() -> Outcome {
    let m = model("p1_halves.toml");
    let report = count_campana(&m, 100_000, &CountOptions::default()).map_err(|e| e.to_string())?;
    let oracle = squarefull_pair_counts(100_000);
    for (b, (edge, count)) in report.buckets.iter().zip(&oracle) {
        ensure(b.hi == *edge && b.cumulative.campana == *count, || {
            format!("B = {}: counted {}, squarefull pairs {}", b.hi, b.cumulative.campana, count)
        })?;
    }
    // The sieve against the exhaustive sweep at a smaller bound.
    let sweep_opts = CountOptions { method: Method::Sweep, ..CountOptions::default() };
    let swept = count_campana(&m, 10_000, &sweep_opts).map_err(|e| e.to_string())?;
    let sieved = count_campana(&m, 10_000, &CountOptions::default()).map_err(|e| e.to_string())?;
    ensure(swept.buckets == sieved.buckets, || "sieve and sweep differ at B = 10^4".into())?;
    let theta = report.campana_fit.as_ref().ok_or("no Campana fit")?.exponent;
    let total = report.total_fit.as_ref().ok_or("no total fit")?.exponent;
    ensure((theta - 1.0).abs() <= 0.1, || format!("Campana exponent {theta:.4} outside 1.0 +- 0.1"))?;
    ensure((total - 2.0).abs() <= 0.1, || format!("total exponent {total:.4} outside 2.0 +- 0.1"))?;
    Ok(format!(
        "theta = {theta:.4} (Campana, {} points at 10^5, equal to the squarefull-pair count), {total:.4} (all points)",
        report.totals().campana
    ))
}

fn bigness() -> Outcome {
    let cases = [("p1_halves.toml", q(-1, 1)), ("five_lines.toml", q(1, 2)), ("p1_integral.toml", q(0, 1))];
    for (name, want) in &cases {
        let got = bigness_margin(&model(name));
        ensure(got == *want, || format!("{name}: {got}, expected {want}"))?;
    }
    Ok("-1, 1/2, 0 exactly".into())
}

fn squarefree_by_trial_division(n: u64) -> bool {
    let mut n = n;
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            n /= d;
            if n.is_multiple_of(d) {
                return false;
            }
        }
        d += 1;
    }
    true
}

/// Serves the records as `{"data": [...]}` pages for
/// `/curves?offset=O&limit=L`, until `up` is cleared.
fn mock_server(records: Vec<serde_json::Value>, up: Arc<AtomicBool>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut line = String::new();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            if reader.read_line(&mut line).is_err() {
                continue;
            }
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).is_err() || h.trim().is_empty() {
                    break;
                }
            }
            let (status, body) = if up.load(Ordering::SeqCst) {
                let path = line.split_whitespace().nth(1).unwrap_or("");
                let param = |k: &str| {
                    path.split(['?', '&'])
                        .find_map(|kv| kv.strip_prefix(k).and_then(|v| v.strip_prefix('=')))
                        .and_then(|v| v.parse::<usize>().ok())
                        .unwrap_or(0)
                };
                let (o, l) = (param("offset"), param("limit"));
                let page: Vec<_> = records.iter().skip(o).take(l).cloned().collect();
                ("200 OK", serde_json::json!({ "data": page }).to_string())
            } else {
                ("503 Service Unavailable", String::new())
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    format!("http://{addr}/curves?offset={{offset}}&limit={{limit}}")
}

#[cfg(feature = "remote")]
fn remote_reproducible(fixture: &census::Ingested) -> Result<String, String> {
    use campana_core::census::remote::{fetch, RemoteConfig};
    let items: Vec<serde_json::Value> = fixture
        .records
        .iter()
        .map(|r| serde_json::json!({ "label": r.label, "conductor": r.conductor, "torsion": r.torsion.factors() }))
        .collect();
    let up = Arc::new(AtomicBool::new(true));
    let endpoint = mock_server(items, up.clone());
    let config = RemoteConfig {
        endpoint,
        page_size: 500,
        min_interval_ms: 0,
        max_retries: 1,
        backoff_ms: 10,
        timeout_secs: 10,
        data_key: Some("data".into()),
        label_field: "label".into(),
        conductor_field: "conductor".into(),
        torsion_field: "torsion".into(),
    };
    let cache = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = BTreeSet::new();
    let first = fetch(&config, usize::MAX, cache.path()).map_err(|e| e.to_string())?;
    up.store(false, Ordering::SeqCst);
    let second = fetch(&config, usize::MAX, cache.path()).map_err(|e| e.to_string())?;
    ensure(second.network_requests == 0, || "second run touched the network".into())?;
    let bytes = |f: &campana_core::census::remote::Fetched| {
        let records = serde_json::to_vec(&f.ingested.records).unwrap();
        let report = serde_json::to_vec(&census_report(&f.ingested, &s)).unwrap();
        (records, report)
    };
    ensure(bytes(&first) == bytes(&second), || "cached rerun differs".into())?;
    ensure(first.ingested.records.len() == fixture.records.len(), || "remote fetch lost records".into())?;
    let fresh = tempfile::tempdir().map_err(|e| e.to_string())?;
    match fetch(&config, 10, fresh.path()) {
        Err(campana_core::Error::Network(_)) => {}
        other => return Err(format!("offline fetch without cache gave {other:?}")),
    }
    Ok(format!("remote fetch of {} pages replayed from cache byte-for-byte", first.pages))
}

#[cfg(not(feature = "remote"))]
fn remote_reproducible(_: &census::Ingested) -> Result<String, String> {
    Ok("remote cache check skipped (built without remote)".into())
}

fn census_check() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/curves.csv");
    let fixture = ingest_csv_file(&path, usize::MAX).map_err(|e| e.to_string())?;
    ensure(fixture.records.len() >= 1000, || format!("only {} records", fixture.records.len()))?;
    ensure(fixture.skipped == 0, || format!("{} fixture rows skipped", fixture.skipped))?;
    let none = BTreeSet::new();
    for r in &fixture.records {
        ensure(is_semistable(r.conductor, &none) == squarefree_by_trial_division(r.conductor), || {
            format!("conductor {} of {}", r.conductor, r.label)
        })?;
    }
    for n in 1..=1_000_000u64 {
        ensure(is_semistable(n, &none) == squarefree_by_trial_division(n), || format!("conductor {n}"))?;
    }
    let all = max_torsion_level(&fixture.records, false, &none);
    let semi = max_torsion_level(&fixture.records, true, &none);
    ensure(semi.max_level <= all.max_level, || "semistable max level above the overall one".into())?;
    ensure(all.max_level.is_some_and(|m| m <= 12), || "torsion level beyond Mazur's bound".into())?;
    let again = ingest_csv_file(&path, usize::MAX).map_err(|e| e.to_string())?;
    let json = |i: &census::Ingested| serde_json::to_vec(&census_report(i, &none)).unwrap();
    ensure(json(&fixture) == json(&again), || "local rerun differs".into())?;
    let remote = remote_reproducible(&fixture)?;
    Ok(format!(
        "{} records, semistability = squarefree (records and all N <= 10^6), max level {} semistable vs {} overall; {remote}",
        fixture.records.len(),
        semi.max_level.unwrap_or(1),
        all.max_level.unwrap_or(1)
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence (halves model vs squarefull oracle, B = 10^4)", oracle_equivalence),
        ("endpoint recovery (eps = 1 and eps = 0, B = 10^3)", endpoint_recovery),
        ("counting-function chain, exact (B = 10^4)", lemma_chain),
        ("product formula (10^4 random points, 1e-9)", product_formula),
        ("monotonicity in eps and S (B = 200)", monotonicity),
        ("enumeration vs brute force; parallel = serial", enumeration),
        ("growth exponents (B = 10^5, 1.0 +- 0.1 and 2.0 +- 0.1)", growth),
        ("bigness margins", bigness),
        ("census fixture", census_check),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f) && f != (k + 1).to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why} ({secs:.1}s)", k + 1);
            }
        }
        std::io::stdout().flush().ok();
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
