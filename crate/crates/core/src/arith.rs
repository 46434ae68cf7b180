//! Integer arithmetic: primality, factorization, p-adic valuations and prime
//! streams.
//!
//! All values are machine integers of at most 127 bits of magnitude. Values
//! below 2^20 factor through a smallest-prime-factor table; larger values go
//! through trial division by the primes below 10^6, a Miller-Rabin check and
//! Brent's variant of Pollard rho with fixed polynomial constants, so every
//! result is reproducible.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_integer::Integer;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Prime/exponent pairs in ascending prime order.
pub type FactorList = SmallVec<[(u128, u32); 12]>;

const SPF_LIMIT: usize = 1 << 20;
const TRIAL_LIMIT: u64 = 1_000_000;
/// Check primality of the cofactor once trial division passes this prime.
const EARLY_PRIMALITY_CHECK: u64 = 1_000;

/// The first 13 primes are a deterministic Miller-Rabin witness set for every
/// n below this bound (Sorenson and Webster).
pub const MR_DETERMINISTIC_BOUND: u128 = 3_317_044_064_679_887_385_961_981;
const MR_BASES: [u64; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];
const MR_EXTRA_BASES: [u64; 11] = [43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn spf_table() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut spf = vec![0u32; SPF_LIMIT];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..SPF_LIMIT {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let ip = i * p as usize;
                if p > si || ip >= SPF_LIMIT {
                    break;
                }
                spf[ip] = p;
            }
        }
        spf
    })
}

fn trial_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| sieve(TRIAL_LIMIT))
}

fn sieve(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

#[inline]
fn rem_small(n: u128, p: u64) -> u64 {
    if n >> 64 == 0 {
        (n as u64) % p
    } else {
        (n % p as u128) as u64
    }
}

#[inline]
fn add_mod(a: u128, b: u128, m: u128) -> u128 {
    if a >= m - b {
        a - (m - b)
    } else {
        a + b
    }
}

#[inline]
fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    if m >> 64 == 0 {
        return (a * b) % m;
    }
    let (mut a, mut b) = (a % m, b % m);
    let mut acc = 0u128;
    while b > 0 {
        if b & 1 == 1 {
            acc = add_mod(acc, a, m);
        }
        a = add_mod(a, a, m);
        b >>= 1;
    }
    acc
}

fn pow_mod(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn strong_probable_prime(n: u128, d: u128, s: u32, base: u64) -> bool {
    let a = base as u128 % n;
    if a == 0 {
        return true;
    }
    let mut x = pow_mod(a, d, n);
    if x == 1 || x == n - 1 {
        return true;
    }
    for _ in 1..s {
        x = mul_mod(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

/// Miller-Rabin primality test.
///
/// Deterministic below [`MR_DETERMINISTIC_BOUND`]; above it eleven further
/// fixed bases are used, so a wrong answer is possible in principle but has
/// never been observed for inputs of this size.
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    if n < SPF_LIMIT as u128 {
        return spf_table()[n as usize] as u128 == n;
    }
    for &p in &MR_BASES {
        if rem_small(n, p) == 0 {
            return n == p as u128;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    let bases = MR_BASES.iter();
    let extra = if n < MR_DETERMINISTIC_BOUND {
        [].iter()
    } else {
        MR_EXTRA_BASES.iter()
    };
    bases.chain(extra).all(|&b| strong_probable_prime(n, d, s, b))
}

fn abs_diff(a: u128, b: u128) -> u128 {
    a.abs_diff(b)
}

/// Brent's cycle-finding variant of Pollard rho; `n` must be an odd composite.
fn rho_split(n: u128) -> u128 {
    const BATCH: u64 = 128;
    for c in 1u128.. {
        let step = |x: u128| add_mod(mul_mod(x, x, n), c % n, n);
        let mut y = 2 % n;
        let mut r = 1u64;
        let mut q = 1u128;
        let mut g = 1u128;
        let mut x = y;
        let mut ys = y;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = step(y);
            }
            let mut k = 0u64;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BATCH.min(r - k) {
                    y = step(y);
                    q = mul_mod(q, abs_diff(x, y), n);
                }
                g = q.gcd(&n);
                k += BATCH;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = step(ys);
                g = abs_diff(x, ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
    }
    unreachable!("rho exhausted every polynomial constant")
}

fn push_factor(out: &mut FactorList, p: u128, e: u32) {
    match out.iter_mut().find(|(q, _)| *q == p) {
        Some((_, f)) => *f += e,
        None => out.push((p, e)),
    }
}

fn split_large(n: u128, out: &mut FactorList) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        push_factor(out, n, 1);
        return;
    }
    let d = rho_split(n);
    split_large(d, out);
    split_large(n / d, out);
}

fn factor_spf(n: usize, out: &mut FactorList) {
    let spf = spf_table();
    let mut n = n as u32;
    while n > 1 {
        let p = spf[n as usize];
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        out.push((p as u128, e));
    }
}

/// Factor a positive integer into `out`, ascending by prime.
///
/// `out` is cleared first. Zero and one both produce an empty list.
pub fn factor_into(n: u128, out: &mut FactorList) {
    out.clear();
    if n < 2 {
        return;
    }
    if n < SPF_LIMIT as u128 {
        factor_spf(n as usize, out);
        return;
    }
    let mut n = n;
    let mut checked_cofactor = false;
    for &p in trial_primes() {
        if (p as u128) * (p as u128) > n {
            break;
        }
        if n < SPF_LIMIT as u128 {
            let mut rest = FactorList::new();
            factor_spf(n as usize, &mut rest);
            out.extend(rest);
            return;
        }
        if rem_small(n, p) == 0 {
            let mut e = 0;
            while rem_small(n, p) == 0 {
                n /= p as u128;
                e += 1;
            }
            out.push((p as u128, e));
        }
        if !checked_cofactor && p >= EARLY_PRIMALITY_CHECK {
            checked_cofactor = true;
            if is_prime(n) {
                break;
            }
        }
    }
    if n > 1 {
        let start = out.len();
        split_large(n, out);
        out[start..].sort_unstable();
    }
}

/// Convenience wrapper around [`factor_into`].
pub fn factor_list(n: u128) -> FactorList {
    let mut out = FactorList::new();
    factor_into(n, &mut out);
    out
}

/// Prime factorization of a nonzero integer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Factorization {
    value: i128,
    sign: i8,
    factors: BTreeMap<u128, u32>,
}

impl Factorization {
    pub fn value(&self) -> i128 {
        self.value
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn factors(&self) -> &BTreeMap<u128, u32> {
        &self.factors
    }

    pub fn exponent(&self, p: u128) -> u32 {
        self.factors.get(&p).copied().unwrap_or(0)
    }

    pub fn primes(&self) -> impl Iterator<Item = u128> + '_ {
        self.factors.keys().copied()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.values().all(|&e| e == 1)
    }

    /// Recompute sign · ∏ p^e; `None` on overflow.
    pub fn product(&self) -> Option<i128> {
        let mut acc: i128 = self.sign as i128;
        for (&p, &e) in &self.factors {
            let p = i128::try_from(p).ok()?;
            for _ in 0..e {
                acc = acc.checked_mul(p)?;
            }
        }
        Some(acc)
    }
}

pub fn factorize(n: i128) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::ZeroInput);
    }
    let list = factor_list(n.unsigned_abs());
    Ok(Factorization {
        value: n,
        sign: if n < 0 { -1 } else { 1 },
        factors: list.into_iter().collect(),
    })
}

/// Exponent of the prime `p` in `n`, by repeated exact division.
pub fn valuation(p: u128, n: i128) -> Result<u32> {
    if n == 0 {
        return Err(Error::ZeroInput);
    }
    if p < 2 {
        return Err(Error::NotPrime(p));
    }
    debug_assert!(is_prime(p), "valuation called with composite {p}");
    let mut m = n.unsigned_abs();
    let mut e = 0;
    while m.is_multiple_of(p) {
        m /= p;
        e += 1;
    }
    Ok(e)
}

/// Ascending primes `<= bound`, produced by a segmented sieve.
pub fn primes_up_to(bound: u64) -> PrimeStream {
    PrimeStream::new(bound)
}

pub struct PrimeStream {
    bound: u64,
    base: Vec<u64>,
    segment_lo: u64,
    segment: Vec<bool>,
    cursor: usize,
}

const SEGMENT: u64 = 1 << 16;

impl PrimeStream {
    fn new(bound: u64) -> Self {
        let base = sieve(bound.isqrt());
        let mut s = PrimeStream {
            bound,
            base,
            segment_lo: 0,
            segment: Vec::new(),
            cursor: 0,
        };
        if bound >= 2 {
            s.fill(2);
        }
        s
    }

    fn fill(&mut self, lo: u64) {
        let hi = lo.saturating_add(SEGMENT - 1).min(self.bound);
        let len = (hi - lo + 1) as usize;
        self.segment.clear();
        self.segment.resize(len, true);
        for &p in &self.base {
            if p.saturating_mul(p) > hi {
                break;
            }
            let start = (p * p).max(lo.div_ceil(p) * p);
            let mut j = start;
            while j <= hi {
                self.segment[(j - lo) as usize] = false;
                j += p;
            }
        }
        self.segment_lo = lo;
        self.cursor = 0;
    }
}

impl Iterator for PrimeStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            while self.cursor < self.segment.len() {
                let i = self.cursor;
                self.cursor += 1;
                if self.segment[i] {
                    return Some(self.segment_lo + i as u64);
                }
            }
            let next_lo = self.segment_lo + self.segment.len() as u64;
            if self.segment.is_empty() || next_lo > self.bound || next_lo == 0 {
                return None;
            }
            self.fill(next_lo);
        }
    }
}
