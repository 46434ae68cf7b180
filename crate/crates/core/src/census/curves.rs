//! Conductor and rational torsion of elliptic curves over `Q` given by
//! integral Weierstrass coefficients. Used to build the offline census
//! fixture and to spot-check it.

use num_rational::BigRational;
use num_traits::Zero;

use crate::arith;
use crate::error::{Error, Result};

use super::Torsion;

/// `y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Weierstrass {
    pub a: [i128; 5],
}

impl Weierstrass {
    pub fn new(a1: i64, a2: i64, a3: i64, a4: i64, a6: i64) -> Self {
        Weierstrass {
            a: [a1, a2, a3, a4, a6].map(i128::from),
        }
    }

    fn get(&self) -> (i128, i128, i128, i128, i128) {
        let [a1, a2, a3, a4, a6] = self.a;
        (a1, a2, a3, a4, a6)
    }

    /// `(b2, b4, b6, b8)`.
    pub fn b_invariants(&self) -> [i128; 4] {
        let (a1, a2, a3, a4, a6) = self.get();
        [
            a1 * a1 + 4 * a2,
            2 * a4 + a1 * a3,
            a3 * a3 + 4 * a6,
            a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4,
        ]
    }

    pub fn c4(&self) -> i128 {
        let [b2, b4, _, _] = self.b_invariants();
        b2 * b2 - 24 * b4
    }

    pub fn c6(&self) -> i128 {
        let [b2, b4, b6, _] = self.b_invariants();
        -b2 * b2 * b2 + 36 * b2 * b4 - 216 * b6
    }

    pub fn discriminant(&self) -> i128 {
        let [b2, b4, b6, b8] = self.b_invariants();
        -b2 * b2 * b8 - 8 * b4 * b4 * b4 - 27 * b6 * b6 + 9 * b2 * b4 * b6
    }

    /// Substitute `x = x' + r`, `y = y' + s x' + t`.
    fn shift(&self, r: i128, s: i128, t: i128) -> Self {
        let (a1, a2, a3, a4, a6) = self.get();
        Weierstrass {
            a: [
                a1 + 2 * s,
                a2 - s * a1 + 3 * r - s * s,
                a3 + r * a1 + 2 * t,
                a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t,
                a6 + r * a4 + r * r * a2 + r * r * r - t * a3 - t * t - r * t * a1,
            ],
        }
    }

    /// Divide `a_i` by `p^i`.
    fn descale(&self, p: i128) -> Self {
        let mut a = self.a;
        for (ai, k) in a.iter_mut().zip([1u32, 2, 3, 4, 6]) {
            *ai /= p.pow(k);
        }
        Weierstrass { a }
    }

    /// Key shared exactly by `Q`-isomorphic curves: `(c4, c6)` with the
    /// largest `u` such that `u^4 | c4` and `u^6 | c6` divided out.
    pub fn isomorphism_key(&self) -> (i128, i128) {
        let (mut c4, mut c6) = (self.c4(), self.c6());
        let g = num_integer::gcd(c4, c6).unsigned_abs();
        for (p, _) in arith::factor_list(g.max(1)) {
            let p = p as i128;
            while c4 % p.pow(4) == 0 && c6 % p.pow(6) == 0 && (c4, c6) != (0, 0) {
                c4 /= p.pow(4);
                c6 /= p.pow(6);
            }
        }
        (c4, c6)
    }
}

fn v(p: i128, n: i128) -> u32 {
    if n == 0 {
        u32::MAX
    } else {
        arith::valuation(p as u128, n).expect("nonzero")
    }
}

fn divisible(n: i128, p: i128, k: u32) -> bool {
    n % p.pow(k) == 0
}

/// Roots in `F_p` of `c2 T^2 + c1 T + c0`, found by trying every residue.
fn roots_mod(p: i128, coeffs: &[i128]) -> Vec<i128> {
    (0..p)
        .filter(|&t| coeffs.iter().rev().fold(0i128, |acc, &c| (acc * t + c).rem_euclid(p)) == 0)
        .collect()
}

/// Multiplicity of `root` for `c_k T^k + ... + c_0` over `F_p`.
fn root_multiplicity(p: i128, coeffs: &[i128], root: i128) -> usize {
    let mut poly: Vec<i128> = coeffs.iter().map(|c| c.rem_euclid(p)).collect();
    let mut m = 0;
    loop {
        let value = poly.iter().rev().fold(0i128, |acc, &c| (acc * root + c).rem_euclid(p));
        if value != 0 || poly.len() <= 1 {
            return m;
        }
        // Synthetic division by (T - root).
        let mut q = vec![0i128; poly.len() - 1];
        let mut carry = 0i128;
        for k in (1..poly.len()).rev() {
            carry = (poly[k] + carry * root).rem_euclid(p);
            q[k - 1] = carry;
        }
        poly = q;
        m += 1;
    }
}

/// Exponent of `p` in the conductor, by Tate's algorithm. `p` must be 2 or 3.
fn tate_small_prime(mut e: Weierstrass, p: i128) -> u32 {
    loop {
        let disc = e.discriminant();
        let vd = v(p, disc);
        if vd == 0 {
            return 0;
        }
        // Move a singular point of the reduction to (0, 0).
        let (a1, a2, a3, a4, a6) = e.get();
        let singular = (0..p)
            .flat_map(|x| (0..p).map(move |y| (x, y)))
            .find(|&(x, y)| {
                let f = y * y + a1 * x * y + a3 * y - x * x * x - a2 * x * x - a4 * x - a6;
                let fx = a1 * y - 3 * x * x - 2 * a2 * x - a4;
                let fy = 2 * y + a1 * x + a3;
                [f, fx, fy].iter().all(|v| v.rem_euclid(p) == 0)
            })
            .expect("reduction is singular");
        e = e.shift(singular.0, 0, singular.1);
        let [b2, _, b6, b8] = e.b_invariants();
        if b2 % p != 0 {
            return 1;
        }
        let (_, _, _, _, a6) = e.get();
        if !divisible(a6, p, 2) {
            return vd;
        }
        if !divisible(b8, p, 3) {
            return vd - 1;
        }
        if !divisible(b6, p, 3) {
            return vd - 2;
        }
        // Arrange p | a1, a2; p^2 | a3, a4; p^3 | a6.
        let mut arranged = None;
        'search: for s in 0..p {
            for r in (0..p * p * p).step_by(p as usize) {
                for t in (0..p * p * p).step_by(p as usize) {
                    let f = e.shift(r, s, t);
                    let (a1, a2, a3, a4, a6) = f.get();
                    if a1 % p == 0
                        && a2 % p == 0
                        && divisible(a3, p, 2)
                        && divisible(a4, p, 2)
                        && divisible(a6, p, 3)
                    {
                        arranged = Some(f);
                        break 'search;
                    }
                }
            }
        }
        e = arranged.expect("coordinates exist by the algorithm");
        let (_, a2, _, a4, a6) = e.get();
        let cubic = [a6 / p.pow(3), a4 / p.pow(2), a2 / p, 1];
        let roots = roots_mod(p, &cubic);
        let mult: Vec<usize> = roots.iter().map(|&r| root_multiplicity(p, &cubic, r)).collect();
        if mult.iter().all(|&m| m == 1) {
            // Distinct roots over the algebraic closure: I0*.
            return vd - 4;
        }
        if let Some(k) = mult.iter().position(|&m| m == 2) {
            // I_n*: move the double root to 0, then look for n.
            e = e.shift(roots[k] * p, 0, 0);
            let mut n = 1u32;
            loop {
                let (_, a2, a3, a4, a6) = e.get();
                let quad = if n % 2 == 1 {
                    let k = n.div_ceil(2);
                    [-(a6 / p.pow(2 * k + 2)), a3 / p.pow(k + 1), 1]
                } else {
                    let k = n / 2;
                    [a6 / p.pow(2 * k + 3), a4 / p.pow(k + 2), a2 / p]
                };
                let double = roots_mod(p, &quad)
                    .into_iter()
                    .find(|&r| root_multiplicity(p, &quad, r) == 2);
                let Some(r) = double else {
                    return vd - 4 - n;
                };
                e = if n % 2 == 1 {
                    e.shift(0, 0, r * p.pow(n.div_ceil(2) + 1))
                } else {
                    e.shift(r * p.pow(n / 2 + 1), 0, 0)
                };
                n += 1;
            }
        }
        let triple = roots[mult.iter().position(|&m| m == 3).expect("triple root")];
        // Triple root: move it to 0.
        e = e.shift(triple * p, 0, 0);
        let (_, _, a3, _, a6) = e.get();
        let quad = [-(a6 / p.pow(4)), a3 / p.pow(2), 1];
        let rs = roots_mod(p, &quad);
        if !(rs.len() == 1 && root_multiplicity(p, &quad, rs[0]) == 2) {
            return vd - 6;
        }
        e = e.shift(0, 0, rs[0] * p.pow(2));
        let (_, _, _, a4, a6) = e.get();
        if !divisible(a4, p, 4) {
            return vd - 7;
        }
        if !divisible(a6, p, 6) {
            return vd - 8;
        }
        // Not minimal at p.
        e = e.descale(p);
    }
}

/// Exponent of `p >= 5` in the conductor, from the valuations of `c4` and
/// the discriminant after removing non-minimality.
fn conductor_exponent_large(e: &Weierstrass, p: i128) -> u32 {
    let (mut v4, mut vd) = (v(p, e.c4()), v(p, e.discriminant()));
    while vd >= 12 && v4 >= 4 {
        vd -= 12;
        v4 = v4.saturating_sub(4);
    }
    match (vd, v4) {
        (0, _) => 0,
        (_, 0) => 1,
        _ => 2,
    }
}

/// Conductor of a nonsingular curve.
pub fn conductor(e: &Weierstrass) -> Result<u128> {
    let disc = e.discriminant();
    if disc == 0 {
        return Err(Error::parse("singular curve"));
    }
    let mut n = 1u128;
    for (p, _) in arith::factor_list(disc.unsigned_abs()) {
        let f = if p <= 3 {
            tate_small_prime(*e, p as i128)
        } else {
            conductor_exponent_large(e, p as i128)
        };
        n *= p.pow(f);
    }
    Ok(n)
}

type Pt = Option<(BigRational, BigRational)>;

/// Short model `y^2 = x^3 + A x + B` with `A = -27 c4`, `B = -54 c6`.
struct Short {
    a: BigRational,
}

impl Short {
    fn add(&self, p: &Pt, q: &Pt) -> Pt {
        let (Some((x1, y1)), Some((x2, y2))) = (p, q) else {
            return p.clone().or_else(|| q.clone());
        };
        let lambda = if x1 == x2 {
            if (y1 + y2).is_zero() {
                return None;
            }
            let three = BigRational::from_integer(3.into());
            (three * x1 * x1 + &self.a) / (BigRational::from_integer(2.into()) * y1)
        } else {
            (y2 - y1) / (x2 - x1)
        };
        let x3 = &lambda * &lambda - x1 - x2;
        let y3 = lambda * (x1 - &x3) - y1;
        Some((x3, y3))
    }
}

fn integer_cubic_roots(a: i128, b: i128) -> Vec<i128> {
    // Real roots of x^3 + a x + b, then exact checks near each.
    let (af, bf) = (a as f64, b as f64);
    let f = |x: f64| x * x * x + af * x + bf;
    let df = |x: f64| 3.0 * x * x + af;
    let mut approx = Vec::new();
    let scale = 1.0 + af.abs().sqrt() + bf.abs().cbrt();
    for start in [-2.0 * scale, 0.0, 2.0 * scale, -scale / 2.0, scale / 2.0] {
        let mut x: f64 = start;
        for _ in 0..200 {
            let d = df(x);
            if d == 0.0 {
                x += 1.0;
                continue;
            }
            x -= f(x) / d;
        }
        approx.push(x);
    }
    let mut out: Vec<i128> = approx
        .into_iter()
        .filter(|x| x.is_finite())
        .flat_map(|x| {
            let r = x.round() as i128;
            r - 2..=r + 2
        })
        .filter(|&x| x * x * x + a * x + b == 0)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Rational torsion subgroup, from the Nagell-Lutz candidates on the short
/// model.
pub fn torsion(e: &Weierstrass) -> Result<Torsion> {
    let disc = e.discriminant();
    if disc == 0 {
        return Err(Error::parse("singular curve"));
    }
    let (a, b) = (-27 * e.c4(), -54 * e.c6());
    let big_d = 4 * a * a * a + 27 * b * b;
    let short = Short {
        a: BigRational::from_integer(a.into()),
    };
    let mut ys: Vec<i128> = vec![1];
    for (p, k) in arith::factor_list(big_d.unsigned_abs()) {
        let mut next = Vec::new();
        for y in &ys {
            let mut pow = 1i128;
            for _ in 0..=k / 2 {
                next.push(y * pow);
                pow *= p as i128;
            }
        }
        ys = next;
    }
    let mut candidates: Vec<(i128, i128)> = integer_cubic_roots(a, b).into_iter().map(|x| (x, 0)).collect();
    for &y in &ys {
        for x in integer_cubic_roots(a, b - y * y) {
            candidates.push((x, y));
            candidates.push((x, -y));
        }
    }
    let is_integral = |p: &Pt| match p {
        None => true,
        Some((x, y)) => x.is_integer() && y.is_integer(),
    };
    let mut order = 1u32;
    let mut two_torsion = 0;
    for (x, y) in candidates {
        let p: Pt = Some((BigRational::from_integer(x.into()), BigRational::from_integer(y.into())));
        let mut q = p.clone();
        let mut n = 1;
        while q.is_some() && n <= 12 && is_integral(&q) {
            q = short.add(&q, &p);
            n += 1;
        }
        if q.is_none() {
            order += 1;
            if y == 0 {
                two_torsion += 1;
            }
        }
    }
    let factors = if order == 1 {
        vec![]
    } else if two_torsion == 3 {
        vec![2, order / 2]
    } else {
        vec![order]
    };
    Torsion::new(factors)
}
