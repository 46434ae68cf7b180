//! Bounded-height enumeration of `P^1(Q)` and `P^2(Q)` and counting reports
//! for Campana sets.
//!
//! `P^1` is walked as a Stern-Brocot tree of reduced fractions `p/q` in
//! `(0, 1)`, so no gcd is ever taken; each fraction gives the four points
//! `(p, ±q)` and `(q, ±p)`. `P^2` is swept lexicographically with a gcd
//! filter. Both are cut into independent work units whose results are merged
//! in unit order, so serial and parallel runs agree exactly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::arith;
use crate::campana::{is_campana, PointClass};
use crate::error::{Error, Result};
use crate::geometry::{validate_model, ModelSummary, OrbifoldModel, ProjectivePoint};
use crate::heights::{self, lemma_chain};

/// Depth at which the Stern-Brocot tree is cut into work units.
const SPLIT_DEPTH: u32 = 8;
/// Buckets whose cumulative count is below this are left out of power fits.
const FIT_MIN_COUNT: u64 = 10;
/// Line detection in `P^2` looks at no more than this many Campana points.
const LINE_POINT_CAP: usize = 4000;

/// One independent slice of an enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Unit {
    /// `(1,0), (0,1), (1,1), (1,-1)`.
    P1Base,
    /// Fractions found while cutting the tree.
    P1Fractions(Vec<(u64, u64)>),
    /// All fractions strictly between the neighbours `l` and `r`.
    P1Subtree { l: (u64, u64), r: (u64, u64) },
    /// Points of `P^2` whose first coordinate is this value.
    P2Slice(u64),
}

pub(crate) fn units(n: usize, bound: u64) -> Result<Vec<Unit>> {
    match n {
        1 => Ok(p1_units(bound)),
        2 => Ok((0..=bound).map(Unit::P2Slice).collect()),
        other => Err(Error::UnsupportedDimension(other)),
    }
}

fn p1_units(bound: u64) -> Vec<Unit> {
    let mut prefix = Vec::new();
    let mut frontier = vec![((0u64, 1u64), (1u64, 1u64))];
    for _ in 0..SPLIT_DEPTH {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (l, r) in frontier {
            let m = (l.0 + r.0, l.1 + r.1);
            if m.1 > bound {
                continue;
            }
            prefix.push(m);
            next.push((l, m));
            next.push((m, r));
        }
        frontier = next;
    }
    let mut out = vec![Unit::P1Base, Unit::P1Fractions(prefix)];
    out.extend(frontier.into_iter().map(|(l, r)| Unit::P1Subtree { l, r }));
    out
}

/// Depth-first walk over the reduced fractions strictly between two
/// Stern-Brocot neighbours, pruned at denominator `bound`.
pub(crate) struct SternBrocot {
    bound: u64,
    stack: Vec<((u64, u64), (u64, u64))>,
}

impl SternBrocot {
    pub fn new(l: (u64, u64), r: (u64, u64), bound: u64) -> Self {
        SternBrocot {
            bound,
            stack: vec![(l, r)],
        }
    }
}

impl Iterator for SternBrocot {
    type Item = (u64, u64);

    fn next(&mut self) -> Option<(u64, u64)> {
        while let Some((l, r)) = self.stack.pop() {
            let m = (l.0 + r.0, l.1 + r.1);
            if m.1 > self.bound {
                continue;
            }
            self.stack.push((m, r));
            self.stack.push((l, m));
            return Some(m);
        }
        None
    }
}

fn point(c: &[i64]) -> ProjectivePoint {
    ProjectivePoint::from_normalized(c.iter().copied().collect())
}

fn fraction_points((p, q): (u64, u64)) -> [ProjectivePoint; 4] {
    let (p, q) = (p as i64, q as i64);
    [point(&[p, q]), point(&[p, -q]), point(&[q, p]), point(&[q, -p])]
}

/// Points of `P^2` with `x0 = a`, all coordinates in `[-bound, bound]`.
struct P2Slice {
    a: u64,
    bound: i64,
    x1: i64,
    x2: i64,
    row_gcd: u64,
    done: bool,
}

impl P2Slice {
    fn new(a: u64, bound: u64) -> Self {
        let bound = bound as i64;
        let x1 = if a == 0 { 0 } else { -bound };
        let mut s = P2Slice {
            a,
            bound,
            x1,
            x2: -bound - 1,
            row_gcd: 0,
            done: false,
        };
        s.row_gcd = a.gcd(&x1.unsigned_abs());
        s
    }
}

impl Iterator for P2Slice {
    type Item = ProjectivePoint;

    fn next(&mut self) -> Option<ProjectivePoint> {
        if self.done {
            return None;
        }
        if self.a == 0 && self.x1 == 0 {
            // The only point with x0 = x1 = 0.
            self.x1 = 1;
            self.x2 = -self.bound - 1;
            self.row_gcd = 1;
            if self.bound >= 1 {
                return Some(point(&[0, 0, 1]));
            }
            self.done = true;
            return None;
        }
        loop {
            self.x2 += 1;
            if self.x2 > self.bound {
                self.x1 += 1;
                if self.x1 > self.bound {
                    self.done = true;
                    return None;
                }
                self.x2 = -self.bound;
                self.row_gcd = self.a.gcd(&self.x1.unsigned_abs());
            }
            if self.row_gcd.gcd(&self.x2.unsigned_abs()) == 1 {
                return Some(point(&[self.a as i64, self.x1, self.x2]));
            }
        }
    }
}

impl Unit {
    pub(crate) fn points(&self, bound: u64) -> Box<dyn Iterator<Item = ProjectivePoint> + '_> {
        match self {
            Unit::P1Fractions(list) => Box::new(list.iter().flat_map(|&f| fraction_points(f))),
            other => other.clone().into_points(bound),
        }
    }

    fn into_points(self, bound: u64) -> Box<dyn Iterator<Item = ProjectivePoint>> {
        match self {
            Unit::P1Base => Box::new(
                [point(&[1, 0]), point(&[0, 1]), point(&[1, 1]), point(&[1, -1])].into_iter(),
            ),
            Unit::P1Fractions(list) => Box::new(list.into_iter().flat_map(fraction_points)),
            Unit::P1Subtree { l, r } => Box::new(SternBrocot::new(l, r, bound).flat_map(fraction_points)),
            Unit::P2Slice(a) => Box::new(P2Slice::new(a, bound)),
        }
    }
}

/// Every point of `P^n(Q)` with `max |x_j| <= bound`, once each, in a fixed
/// order. Supported for `n` in `{1, 2}`.
pub fn points_up_to(n: usize, bound: u64) -> Result<impl Iterator<Item = ProjectivePoint>> {
    let units = if bound == 0 { Vec::new() } else { units(n, bound)? };
    Ok(units.into_iter().flat_map(move |u| u.into_points(bound)))
}

/// Visit every point up to `bound`, one accumulator per work unit, merged in
/// unit order. `threads == 1` runs on the calling thread; `0` means one
/// thread per core.
pub(crate) fn sweep<T, I, V, M>(n: usize, bound: u64, threads: usize, init: I, visit: V, merge: M) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    V: Fn(&mut T, &ProjectivePoint) + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    let units = if bound == 0 { Vec::new() } else { units(n, bound)? };
    let run = |u: &Unit| {
        let mut acc = init();
        for x in u.points(bound) {
            visit(&mut acc, &x);
        }
        acc
    };
    if threads == 1 {
        return Ok(units.iter().map(run).fold(init(), &merge));
    }
    parallel_fold(&units, threads, &init, run, &merge)
}

#[cfg(feature = "parallel")]
fn parallel_fold<T, I, R, M>(units: &[Unit], threads: usize, init: &I, run: R, merge: &M) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    R: Fn(&Unit) -> T + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::parse(format!("thread pool: {e}")))?;
    Ok(pool.install(|| units.par_iter().map(run).reduce(init, merge)))
}

#[cfg(not(feature = "parallel"))]
fn parallel_fold<T, I, R, M>(units: &[Unit], _threads: usize, init: &I, run: R, merge: &M) -> Result<T>
where
    I: Fn() -> T,
    R: Fn(&Unit) -> T,
    M: Fn(T, T) -> T,
{
    Ok(units.iter().map(run).fold(init(), merge))
}

/// Per-bucket point tallies. `campana` counts the whole Campana set, so it
/// includes the `integral` points; `total = campana + non_campana +
/// on_boundary`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub total: u64,
    pub integral: u64,
    pub campana: u64,
    pub non_campana: u64,
    pub on_boundary: u64,
}

impl Tally {
    pub fn record(&mut self, class: PointClass) {
        self.total += 1;
        match class {
            PointClass::Integral => {
                self.integral += 1;
                self.campana += 1;
            }
            PointClass::Campana => self.campana += 1,
            PointClass::NonCampana { .. } => self.non_campana += 1,
            PointClass::OnBoundary { .. } => self.on_boundary += 1,
        }
    }

    fn add(&mut self, o: &Tally) {
        self.total += o.total;
        self.integral += o.integral;
        self.campana += o.campana;
        self.non_campana += o.non_campana;
        self.on_boundary += o.on_boundary;
    }

    fn without_boundary(mut self) -> Tally {
        self.total -= self.on_boundary;
        self.on_boundary = 0;
        self
    }
}

/// Bucket upper edges: `1, 2, 4, ...` up to `bound`, with `bound` itself as
/// the last edge.
pub fn bucket_edges(bound: u64) -> Vec<u64> {
    let mut edges = Vec::new();
    let mut e = 1u64;
    while e < bound {
        edges.push(e);
        e = e.saturating_mul(2);
    }
    edges.push(bound.max(1));
    edges
}

/// Index of the bucket holding height `h`.
pub fn bucket_of(h: u64, n_buckets: usize) -> usize {
    let k = if h <= 1 { 0 } else { (64 - (h - 1).leading_zeros()) as usize };
    k.min(n_buckets - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BucketRow {
    /// Heights in `(lo, hi]`; the first bucket is `[1, 1]`.
    pub lo: u64,
    pub hi: u64,
    pub tally: Tally,
    pub cumulative: Tally,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub buckets_used: usize,
}

/// Least-squares fit of `log count = exponent * log B + log coefficient` over
/// the points with `count >= 10`.
pub fn fit_power_law(points: &[(u64, u64)]) -> Option<PowerFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(b, c)| c >= FIT_MIN_COUNT && b > 1)
        .map(|&(b, c)| ((b as f64).ln(), (c as f64).ln()))
        .collect();
    if used.len() < 2 {
        return None;
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(PowerFit {
        exponent: slope,
        coefficient: (my - slope * mx).exp(),
        buckets_used: used.len(),
    })
}

/// A line of `P^2`, as its primitive coefficient vector, with the number of
/// enumerated Campana points on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineReport {
    pub line: [i64; 3],
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    /// Exact sieve for coordinate-hyperplane models on `P^1`, the sweep
    /// otherwise.
    #[default]
    Auto,
    Sweep,
}

#[derive(Clone, Debug)]
pub struct CountOptions {
    pub threads: usize,
    pub include_boundary: bool,
    pub method: Method,
    pub top_lines: usize,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            threads: 0,
            include_boundary: false,
            method: Method::Auto,
            top_lines: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingReport {
    pub model: ModelSummary,
    pub height_bound: u64,
    pub include_boundary: bool,
    pub method: String,
    pub buckets: Vec<BucketRow>,
    pub campana_fit: Option<PowerFit>,
    pub total_fit: Option<PowerFit>,
    /// `P^2` only: lines through at least three Campana points, most
    /// populated first.
    pub lines: Vec<LineReport>,
    pub lines_truncated: bool,
}

impl CountingReport {
    fn assemble(
        m: &OrbifoldModel,
        bound: u64,
        include_boundary: bool,
        method: &str,
        raw: Vec<Tally>,
    ) -> Self {
        let edges = bucket_edges(bound);
        let mut cum = Tally::default();
        let mut buckets = Vec::with_capacity(edges.len());
        for (k, (&hi, t)) in edges.iter().zip(raw).enumerate() {
            let t = if include_boundary { t } else { t.without_boundary() };
            cum.add(&t);
            buckets.push(BucketRow {
                lo: if k == 0 { 0 } else { edges[k - 1] },
                hi,
                tally: t,
                cumulative: cum,
            });
        }
        let campana: Vec<_> = buckets.iter().map(|b| (b.hi, b.cumulative.campana)).collect();
        let total: Vec<_> = buckets.iter().map(|b| (b.hi, b.cumulative.total)).collect();
        CountingReport {
            model: m.summary(),
            height_bound: bound,
            include_boundary,
            method: method.to_string(),
            campana_fit: fit_power_law(&campana),
            total_fit: fit_power_law(&total),
            buckets,
            lines: Vec::new(),
            lines_truncated: false,
        }
    }

    pub fn totals(&self) -> Tally {
        self.buckets.last().map(|b| b.cumulative).unwrap_or_default()
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "lo,hi,total,integral,campana,non_campana,on_boundary,cum_total,cum_integral,cum_campana,cum_non_campana,cum_on_boundary"
        )?;
        for b in &self.buckets {
            let (t, c) = (&b.tally, &b.cumulative);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                b.lo, b.hi, t.total, t.integral, t.campana, t.non_campana, t.on_boundary,
                c.total, c.integral, c.campana, c.non_campana, c.on_boundary
            )?;
        }
        Ok(())
    }
}

struct SweepAcc {
    buckets: Vec<Tally>,
    campana_points: Vec<ProjectivePoint>,
    failure: Option<Error>,
}

/// Classify every point of height at most `bound` and tally by height bucket.
pub fn count_campana(m: &OrbifoldModel, bound: u64, opts: &CountOptions) -> Result<CountingReport> {
    let report = validate_model(m);
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    if bound == 0 {
        return Err(Error::parse("height bound must be at least 1"));
    }
    if opts.method == Method::Auto {
        if let Some(plan) = CoordinatePlan::new(m) {
            let raw = plan.count(bound);
            return Ok(CountingReport::assemble(m, bound, opts.include_boundary, "coordinate-sieve", raw));
        }
    }
    let n_buckets = bucket_edges(bound).len();
    let keep_points = m.ambient_dim() == 2 && opts.top_lines > 0;
    let acc = sweep(
        m.ambient_dim(),
        bound,
        opts.threads,
        || SweepAcc {
            buckets: vec![Tally::default(); n_buckets],
            campana_points: Vec::new(),
            failure: None,
        },
        |acc, x| match is_campana(m, x) {
            Ok(class) => {
                acc.buckets[bucket_of(x.max_abs(), n_buckets)].record(class);
                if keep_points && class.in_campana_set() && acc.campana_points.len() < LINE_POINT_CAP {
                    acc.campana_points.push(x.clone());
                }
            }
            Err(e) => {
                acc.failure.get_or_insert(e);
            }
        },
        |mut a, b| {
            for (t, u) in a.buckets.iter_mut().zip(&b.buckets) {
                t.add(u);
            }
            let room = LINE_POINT_CAP.saturating_sub(a.campana_points.len());
            a.campana_points.extend(b.campana_points.into_iter().take(room));
            a.failure = a.failure.or(b.failure);
            a
        },
    )?;
    if let Some(e) = acc.failure {
        return Err(e);
    }
    let mut report = CountingReport::assemble(m, bound, opts.include_boundary, "sweep", acc.buckets);
    if keep_points {
        let campana_total = report.totals().campana as usize;
        report.lines_truncated = campana_total > acc.campana_points.len();
        report.lines = collinear_lines(&acc.campana_points, opts.top_lines);
    }
    Ok(report)
}

fn primitive_line(a: &[i64], b: &[i64]) -> Option<[i64; 3]> {
    let (a, b): (Vec<i128>, Vec<i128>) = (
        a.iter().map(|&v| v as i128).collect(),
        b.iter().map(|&v| v as i128).collect(),
    );
    let l = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let g = l.iter().fold(0i128, |g, v| g.gcd(v));
    if g == 0 {
        return None;
    }
    let sign = if l.iter().find(|v| **v != 0).is_some_and(|v| *v < 0) { -g } else { g };
    let mut out = [0i64; 3];
    for (o, v) in out.iter_mut().zip(l) {
        *o = (v / sign).to_i64()?;
    }
    Some(out)
}

/// Lines through at least three of `points`, found by hashing the line
/// through each pair.
pub fn collinear_lines(points: &[ProjectivePoint], top: usize) -> Vec<LineReport> {
    let mut seen: HashSet<[i64; 3]> = HashSet::new();
    let mut found = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut through: HashMap<[i64; 3], usize> = HashMap::new();
        for q in &points[i + 1..] {
            if let Some(l) = primitive_line(p.coords(), q.coords()) {
                *through.entry(l).or_insert(0) += 1;
            }
        }
        for (l, k) in through {
            if k >= 2 && seen.insert(l) {
                found.push(LineReport { line: l, points: k + 1 });
            }
        }
    }
    found.sort_by(|a, b| b.points.cmp(&a.points).then(a.line.cmp(&b.line)));
    found.truncate(top);
    found
}

/// Which integers may sit in one coordinate of a Campana (or integral) point
/// of a coordinate-hyperplane model.
#[derive(Clone, Debug, PartialEq, Eq)]
enum CoordinateSet {
    All,
    /// Sorted members in `[1, bound]`.
    List(Vec<u64>),
}

/// Exact counter for models on `P^1` whose components are the coordinate
/// hyperplanes. Coordinates of a primitive point are coprime, so each prime
/// meets at most one component and the Campana condition splits into one
/// condition per coordinate: every prime `p` outside `S` dividing `x_j` does
/// so to exponent at least `ceil(1 / eps_j)`.
struct CoordinatePlan {
    /// Component index on each coordinate, if any.
    component: [Option<usize>; 2],
    /// Minimum exponent per coordinate; `None` forbids primes outside `S`.
    min_exponent: [Option<u32>; 2],
    s_primes: Vec<u64>,
}

impl CoordinatePlan {
    fn new(m: &OrbifoldModel) -> Option<Self> {
        if m.ambient_dim() != 1 {
            return None;
        }
        let mut component = [None, None];
        for (i, c) in m.components().iter().enumerate() {
            let j = c.form().coordinate_index()?;
            if component[j].replace(i).is_some() {
                return None;
            }
        }
        let scale = m.scale();
        let min_exponent = component.map(|c| {
            c.and_then(|i| {
                let w = scale.scaled[i];
                (w > 0).then(|| (scale.denom as u64).div_ceil(w as u64) as u32)
            })
        });
        Some(CoordinatePlan {
            component,
            min_exponent,
            s_primes: m.s_primes().iter().map(|&p| p as u64).collect(),
        })
    }

    fn campana_set(&self, j: usize, bound: u64) -> CoordinateSet {
        match (self.component[j], self.min_exponent[j]) {
            (None, _) | (Some(_), Some(1)) => CoordinateSet::All,
            (Some(_), k) => CoordinateSet::List(self.restricted(bound, k)),
        }
    }

    fn integral_set(&self, j: usize, bound: u64) -> CoordinateSet {
        match self.component[j] {
            None => CoordinateSet::All,
            Some(_) => CoordinateSet::List(self.restricted(bound, None)),
        }
    }

    /// Integers in `[1, bound]` whose primes outside `S` all appear with
    /// exponent at least `min_exp` (`None`: not at all).
    fn restricted(&self, bound: u64, min_exp: Option<u32>) -> Vec<u64> {
        let mut choices: Vec<(u64, u32)> = self.s_primes.iter().map(|&p| (p, 1)).collect();
        if let Some(k) = min_exp {
            let limit = integer_root(bound, k);
            choices.extend(
                arith::primes_up_to(limit)
                    .filter(|p| !self.s_primes.contains(p))
                    .map(|p| (p, k)),
            );
        }
        choices.sort_unstable();
        let mut out = Vec::new();
        extend_products(&choices, 0, 1, bound, &mut out);
        out.sort_unstable();
        out
    }

    fn count(&self, bound: u64) -> Vec<Tally> {
        let edges = bucket_edges(bound);
        let nb = edges.len();
        let phi = totients(bound);
        let all = pair_counts(&CoordinateSet::All, &CoordinateSet::All, &edges, &phi);
        let campana = pair_counts(
            &self.campana_set(0, bound),
            &self.campana_set(1, bound),
            &edges,
            &phi,
        );
        let integral = pair_counts(
            &self.integral_set(0, bound),
            &self.integral_set(1, bound),
            &edges,
            &phi,
        );
        let mut out = vec![Tally::default(); nb];
        for k in 0..nb {
            // (a, b) and (a, -b) for every positive coprime pair.
            out[k].total = 2 * all[k];
            out[k].campana = 2 * campana[k];
            out[k].integral = 2 * integral[k];
        }
        // (1, 0) lies on x1 = 0 and (0, 1) on x0 = 0.
        for j in 0..2 {
            let t = &mut out[0];
            t.total += 1;
            if self.component[1 - j].is_some() {
                t.on_boundary += 1;
            } else {
                t.campana += 1;
                t.integral += 1;
            }
        }
        for t in &mut out {
            t.non_campana = t.total - t.campana - t.on_boundary;
        }
        out
    }
}

fn integer_root(n: u64, k: u32) -> u64 {
    let mut r = (n as f64).powf(1.0 / k as f64) as u64;
    while r > 0 && r.checked_pow(k).is_none_or(|v| v > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

/// All products `<= bound` of prime powers `p^e` with `e = 0` or
/// `e >= min_e`, over the given `(p, min_e)` choices.
fn extend_products(choices: &[(u64, u32)], from: usize, acc: u64, bound: u64, out: &mut Vec<u64>) {
    out.push(acc);
    for (idx, &(p, min_e)) in choices.iter().enumerate().skip(from) {
        let Some(mut v) = p.checked_pow(min_e).and_then(|q| acc.checked_mul(q)) else {
            continue;
        };
        while v <= bound {
            extend_products(choices, idx + 1, v, bound, out);
            match v.checked_mul(p) {
                Some(w) => v = w,
                None => break,
            }
        }
    }
}

fn totients(bound: u64) -> Vec<u64> {
    let n = bound as usize;
    let mut phi: Vec<u64> = (0..=n as u64).collect();
    for i in 2..=n {
        if phi[i] == i as u64 {
            let mut j = i;
            while j <= n {
                phi[j] -= phi[j] / i as u64;
                j += i;
            }
        }
    }
    phi
}

/// `#{1 <= t <= n : gcd(t, a) = 1}` by inclusion-exclusion over the prime
/// divisors of `a`.
fn coprime_count(primes: &[u64], n: u64) -> i64 {
    let mut total = 0i64;
    for mask in 0u32..(1 << primes.len()) {
        let d: u64 = (0..primes.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| primes[i])
            .product();
        let term = (n / d) as i64;
        total += if mask.count_ones() % 2 == 0 { term } else { -term };
    }
    total
}

/// Number of coprime pairs `(a, b)` with `a` in `first`, `b` in `second`,
/// both positive, bucketed by `max(a, b)`.
fn pair_counts(first: &CoordinateSet, second: &CoordinateSet, edges: &[u64], phi: &[u64]) -> Vec<u64> {
    let nb = edges.len();
    let mut out = vec![0u64; nb];
    match (first, second) {
        (CoordinateSet::All, CoordinateSet::All) => {
            for h in 1..phi.len() as u64 {
                let pairs = if h == 1 { 1 } else { 2 * phi[h as usize] };
                out[bucket_of(h, nb)] += pairs;
            }
        }
        (CoordinateSet::List(list), CoordinateSet::All) | (CoordinateSet::All, CoordinateSet::List(list)) => {
            let bound = *edges.last().unwrap();
            for &a in list {
                let primes: Vec<u64> = arith::factor_list(a as u128).iter().map(|&(p, _)| p as u64).collect();
                // Partners up to a have height a.
                out[bucket_of(a, nb)] += coprime_count(&primes, a) as u64;
                // Partners b in (a, bound] have height b.
                let mut prev = a;
                for &e in edges {
                    if e <= a {
                        continue;
                    }
                    let hi = e.min(bound);
                    let c = coprime_count(&primes, hi) - coprime_count(&primes, prev);
                    out[bucket_of(hi, nb)] += c as u64;
                    prev = hi;
                }
            }
        }
        (CoordinateSet::List(xs), CoordinateSet::List(ys)) => {
            for &a in xs {
                for &b in ys {
                    if a.gcd(&b) == 1 {
                        out[bucket_of(a.max(b), nb)] += 1;
                    }
                }
            }
        }
    }
    out
}

/// One Campana point with its counting functions and Vojta gap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub point: ProjectivePoint,
    pub height: f64,
    pub truncated: f64,
    pub weighted: f64,
    pub bound: f64,
    pub gap: f64,
    pub lemma_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapScan {
    pub model: ModelSummary,
    pub height_bound: u64,
    pub delta: String,
    pub rows: Vec<GapRow>,
    /// Campana points at which either inequality of the chain failed.
    pub lemma_violations: u64,
}

impl GapScan {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "point,height,n1,n_eps,height_bound,gap,lemma_holds")?;
        for r in &self.rows {
            let coords: Vec<String> = r.point.coords().iter().map(|c| c.to_string()).collect();
            writeln!(
                w,
                "{},{:.12},{:.12},{:.12},{:.12},{:.12},{}",
                coords.join(":"),
                r.height,
                r.truncated,
                r.weighted,
                r.bound,
                r.gap,
                r.lemma_holds
            )?;
        }
        Ok(())
    }
}

/// Evaluate the counting functions, the height bound and the Vojta gap at
/// every Campana point of height at most `bound`, checking
/// `N^(1) <= N(D_eps) <= h_{D_eps} + C` exactly at each.
pub fn vojta_scan(m: &OrbifoldModel, bound: u64, delta: &BigRational, threads: usize) -> Result<GapScan> {
    heights::check_delta(delta)?;
    let report = validate_model(m);
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let k = BigRational::from_integer(heights::log_canonical_degree(m).into());
    let (rows, failure) = sweep(
        m.ambient_dim(),
        bound,
        threads,
        || (Vec::new(), None),
        |(rows, failure): &mut (Vec<GapRow>, Option<Error>), x| {
            let row = (|| -> Result<Option<GapRow>> {
                if !is_campana(m, x)?.in_campana_set() {
                    return Ok(None);
                }
                let chain = lemma_chain(m, x)?;
                let h = heights::weil_height(x);
                let gap = &(&chain.truncated - &h.scale(&k)) + &h.scale(delta);
                Ok(Some(GapRow {
                    point: x.clone(),
                    height: h.to_f64(),
                    truncated: chain.truncated.to_f64(),
                    weighted: chain.weighted.to_f64(),
                    bound: chain.bound.to_f64(),
                    gap: gap.to_f64(),
                    lemma_holds: chain.holds(),
                }))
            })();
            match row {
                Ok(Some(r)) => rows.push(r),
                Ok(None) => {}
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        },
        |(mut a, fa), (b, fb)| {
            a.extend(b);
            (a, fa.or(fb))
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let lemma_violations = rows.iter().filter(|r| !r.lemma_holds).count() as u64;
    Ok(GapScan {
        model: m.summary(),
        height_bound: bound,
        delta: delta.to_string(),
        rows,
        lemma_violations,
    })
}

/// Campana counts at each bucket edge, for quick plotting.
pub fn cumulative_series(report: &CountingReport) -> BTreeMap<u64, (u64, u64)> {
    report
        .buckets
        .iter()
        .map(|b| (b.hi, (b.cumulative.campana, b.cumulative.total)))
        .collect()
}
