//! Browser bindings. Every function takes a model in the TOML file format
//! and returns a JSON string, `{"error": "..."}` on failure, so the same
//! code is testable natively.

use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use campana_core::enumerate::{count_campana, vojta_scan, CountOptions};
use campana_core::geometry::parse_weight;
use campana_core::heights::{counting_n, counting_n1, weil_height};
use campana_core::local::contact_table;
use campana_core::{is_campana, parse_model, PointClass, ProjectivePoint};

/// Largest height bound the page may request.
pub const MAX_BOUND: u64 = 2000;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check_bound(bound: u32) -> Result<u64, String> {
    let b = u64::from(bound);
    if b == 0 || b > MAX_BOUND {
        return Err(format!("height bound must be between 1 and {MAX_BOUND}"));
    }
    Ok(b)
}

#[derive(Serialize)]
struct PrimeRow {
    prime: String,
    multiplicities: Vec<u32>,
}

/// Class of a point, its contact with each component prime by prime, and
/// the counting functions against the height.
#[wasm_bindgen]
pub fn classify_point(model: &str, point: &str) -> String {
    respond((|| {
        let m = parse_model(model).map_err(err)?;
        let x: ProjectivePoint = point.parse().map_err(err)?;
        let class = is_campana(&m, &x).map_err(err)?;
        let summary = m.summary();
        if let PointClass::OnBoundary { .. } = class {
            return Ok(json!({ "point": x, "class": class, "model": summary }));
        }
        let rows: Vec<PrimeRow> = contact_table(&m, &x)
            .map_err(err)?
            .into_iter()
            .map(|r| PrimeRow {
                prime: r.prime.to_string(),
                multiplicities: r.entries,
            })
            .collect();
        let n1 = counting_n1(&m, &x).map_err(err)?;
        let n = counting_n(&m, &x, &m.weights()).map_err(err)?;
        let h = weil_height(&x);
        Ok(json!({
            "point": x,
            "class": class,
            "model": summary,
            "support": rows,
            "n1": n1.to_f64(),
            "n_eps": n.to_f64(),
            "height": h.to_f64(),
        }))
    })())
}

/// Cumulative Campana and total counts at each bucket edge up to `bound`.
#[wasm_bindgen]
pub fn counting_curve(model: &str, bound: u32) -> String {
    respond((|| {
        let m = parse_model(model).map_err(err)?;
        let b = check_bound(bound)?;
        let opts = CountOptions {
            threads: 1,
            top_lines: 5,
            ..CountOptions::default()
        };
        let r = count_campana(&m, b, &opts).map_err(err)?;
        let series: Vec<Value> = r
            .buckets
            .iter()
            .map(|k| json!({ "bound": k.hi, "campana": k.cumulative.campana, "total": k.cumulative.total }))
            .collect();
        Ok(json!({
            "series": series,
            "campana_fit": r.campana_fit,
            "total_fit": r.total_fit,
            "bigness_margin": r.model.bigness_margin,
            "lines": r.lines,
        }))
    })())
}

/// `(height, gap)` at every Campana point up to `bound`.
#[wasm_bindgen]
pub fn gap_scatter(model: &str, bound: u32, delta: &str) -> String {
    respond((|| {
        let m = parse_model(model).map_err(err)?;
        let b = check_bound(bound)?;
        let delta: BigRational = parse_weight(delta).map_err(err)?;
        let scan = vojta_scan(&m, b, &delta, 1).map_err(err)?;
        let points: Vec<[f64; 2]> = scan.rows.iter().map(|r| [r.height, r.gap]).collect();
        Ok(json!({
            "points": points,
            "lemma_violations": scan.lemma_violations,
            "bigness_margin": scan.model.bigness_margin,
        }))
    })())
}
