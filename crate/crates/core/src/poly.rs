//! Exact polynomial algebra over the rationals.
//!
//! A polynomial `p` of degree at most `k` can be written in the binomial basis
//! at scale `delta` around a base point `t0`:
//!
//! ```text
//! p(t) = sum_{j=0}^{k} c_j * binom((t - t0) / delta, j)
//! ```
//!
//! and `p` maps `delta Z` into `Z` exactly when every `c_j` (taken around
//! `t0 = 0`) is an integer. Everything in this module is built on that fact:
//! the integrality test, the constructive Bezout splitting of a 1-integral
//! polynomial into an `a`-integral plus a `b`-integral part, the CRT
//! alignment of several integral polynomials, and the comparability decision
//! for local polynomial phases.
//!
//! ```
//! use ulab::poly::{to_binomial_basis, RationalPoly};
//! use num_rational::BigRational;
//!
//! let p: RationalPoly = "0 + 0*x + 1*x^2".parse().unwrap();
//! let c = to_binomial_basis(&p, &BigRational::from_integer(1.into()), &BigRational::from_integer(0.into()));
//! let c: Vec<String> = c.iter().map(|v| v.to_string()).collect();
//! assert_eq!(c, ["0", "1", "2"]);
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::is_prime;
use crate::error::{Error, Result};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Polynomial of degree at most `degree_bound` with exact rational
/// coefficients in the monomial basis `1, t, t^2, ...`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalPoly {
    coeffs: Vec<BigRational>,
}

impl RationalPoly {
    /// `coeffs[j]` multiplies `t^j`; the degree bound is `coeffs.len() - 1`.
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(BigRational::zero());
        }
        RationalPoly { coeffs }
    }

    pub fn zero(degree_bound: usize) -> Self {
        RationalPoly {
            coeffs: vec![BigRational::zero(); degree_bound + 1],
        }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        RationalPoly::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn constant(c: BigRational, degree_bound: usize) -> Self {
        let mut p = RationalPoly::zero(degree_bound);
        p.coeffs[0] = c;
        p
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn degree_bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Actual degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Same polynomial with a larger (or equal) degree bound.
    pub fn with_degree_bound(&self, k: usize) -> Self {
        let mut c = self.coeffs.clone();
        if c.len() < k + 1 {
            c.resize(k + 1, BigRational::zero());
        }
        RationalPoly { coeffs: c }
    }

    fn trimmed_coeffs(&self) -> &[BigRational] {
        match self.degree() {
            Some(d) => &self.coeffs[..=d],
            None => &self.coeffs[..0],
        }
    }

    pub fn eval(&self, t: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        RationalPoly {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn derivative(&self) -> Self {
        let k = self.degree_bound();
        let mut out = vec![BigRational::zero(); k.max(1)];
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            out[j - 1] = c * int(j as i64);
        }
        RationalPoly::new(out)
    }

    /// `t -> p(a t + b)`.
    pub fn compose_affine(&self, a: &BigRational, b: &BigRational) -> Self {
        let lin = RationalPoly::new(vec![b.clone(), a.clone()]);
        let mut acc = RationalPoly::zero(self.degree_bound());
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * &lin) + &RationalPoly::constant(c.clone(), 0);
        }
        acc.with_degree_bound(self.degree_bound()).truncate_to(self.degree_bound())
    }

    fn truncate_to(mut self, k: usize) -> Self {
        debug_assert!(self.coeffs[k + 1..].iter().all(Zero::is_zero));
        self.coeffs.truncate(k + 1);
        self
    }

    /// `binom((t - t0) / delta, j)` expanded in the monomial basis.
    pub fn binomial(j: usize, delta: &BigRational, t0: &BigRational) -> Self {
        // s (s - 1) ... (s - j + 1) / j!  with s = (t - t0) / delta
        let inv = delta.recip();
        let s = RationalPoly::new(vec![-(t0 * &inv), inv]);
        let mut acc = RationalPoly::from_ints(&[1]);
        let mut fact = BigRational::one();
        for i in 0..j {
            let factor = &s - &RationalPoly::constant(int(i as i64), 0);
            acc = &acc * &factor;
            fact *= int(i as i64 + 1);
        }
        acc.scale(&fact.recip()).with_degree_bound(j)
    }

    /// Evaluates a binomial-basis expansion at `t`.
    pub fn from_binomial_basis(c: &[BigRational], delta: &BigRational, t0: &BigRational) -> Self {
        let k = c.len().saturating_sub(1);
        let mut acc = RationalPoly::zero(k);
        for (j, cj) in c.iter().enumerate() {
            if !cj.is_zero() {
                acc = &acc + &RationalPoly::binomial(j, delta, t0).scale(cj);
            }
        }
        acc.with_degree_bound(k)
    }

    pub(crate) fn strip(&self) -> Vec<BigRational> {
        self.trimmed_coeffs().to_vec()
    }
}

impl<'a> Add<&'a RationalPoly> for &'a RationalPoly {
    type Output = RationalPoly;
    fn add(self, rhs: &RationalPoly) -> RationalPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = BigRational::zero();
        RationalPoly {
            coeffs: (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&zero) + rhs.coeffs.get(i).unwrap_or(&zero))
                .collect(),
        }
    }
}

impl<'a> Sub<&'a RationalPoly> for &'a RationalPoly {
    type Output = RationalPoly;
    fn sub(self, rhs: &RationalPoly) -> RationalPoly {
        self + &(-rhs)
    }
}

impl Neg for &RationalPoly {
    type Output = RationalPoly;
    fn neg(self) -> RationalPoly {
        RationalPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl<'a> Mul<&'a RationalPoly> for &'a RationalPoly {
    type Output = RationalPoly;
    fn mul(self, rhs: &RationalPoly) -> RationalPoly {
        let mut out = vec![BigRational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RationalPoly { coeffs: out }
    }
}

impl fmt::Display for RationalPoly {
    /// `c0 + c1*x + c2*x^2`, all coefficients up to the degree bound.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, c) in self.coeffs.iter().enumerate() {
            if j > 0 {
                f.write_str(" + ")?;
            }
            match j {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*x")?,
                _ => write!(f, "{c}*x^{j}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for RationalPoly {
    type Err = Error;

    /// Accepts sums of terms `c`, `c*x`, `c*x^j`, `x^j` with rational `c`
    /// written `p/q` or as decimals; `-` may separate terms.
    fn from_str(s: &str) -> Result<Self> {
        parse_poly(s)
    }
}

fn parse_err(column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        column,
        message: message.into(),
    }
}

/// Parses a rational written as `p`, `p/q`, or a finite decimal.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        if fp.is_empty() || !fp.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let neg = ip.trim_start().starts_with('-');
        let ip_abs = ip.trim().trim_start_matches(['-', '+']);
        let whole: BigInt = if ip_abs.is_empty() {
            BigInt::zero()
        } else {
            ip_abs.parse().ok()?
        };
        let frac: BigInt = fp.parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), fp.len());
        let v = BigRational::new(whole * &den + frac, den);
        return Some(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().ok()?;
    Some(BigRational::from_integer(n))
}

fn parse_poly(s: &str) -> Result<RationalPoly> {
    let bytes: Vec<char> = s.chars().collect();
    let mut terms: Vec<(usize, bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut cur_start = 0usize;
    let mut sign_neg = false;
    let mut depth_ok = true;
    for (i, &ch) in bytes.iter().enumerate() {
        let prev_nonspace = cur.trim_end().chars().last();
        let is_sep = (ch == '+' || ch == '-')
            && !matches!(prev_nonspace, Some('*') | Some('^') | Some('/'))
            && !cur.trim().is_empty();
        if is_sep {
            terms.push((cur_start, sign_neg, std::mem::take(&mut cur)));
            sign_neg = ch == '-';
            cur_start = i + 1;
        } else {
            if cur.trim().is_empty() && (ch == '+' || ch == '-') && terms.is_empty() && depth_ok {
                // leading sign of the first term
                cur.push(ch);
                depth_ok = false;
                continue;
            }
            if cur.is_empty() {
                cur_start = i;
            }
            cur.push(ch);
        }
    }
    terms.push((cur_start, sign_neg, cur));

    let mut coeffs: Vec<BigRational> = Vec::new();
    for (col, neg, term) in terms {
        let t = term.trim();
        if t.is_empty() {
            return Err(parse_err(col + 1, "empty term"));
        }
        let (coef_str, power) = if let Some(xpos) = t.find('x') {
            let before = t[..xpos].trim().trim_end_matches('*').trim();
            let after = t[xpos + 1..].trim();
            let power = if after.is_empty() {
                1
            } else if let Some(e) = after.strip_prefix('^') {
                e.trim()
                    .parse::<usize>()
                    .map_err(|_| parse_err(col + xpos + 2, format!("bad exponent {e:?}")))?
            } else {
                return Err(parse_err(col + xpos + 2, format!("unexpected {after:?}")));
            };
            let coef = match before {
                "" | "+" => "1".to_string(),
                "-" => "-1".to_string(),
                b => b.to_string(),
            };
            (coef, power)
        } else {
            (t.to_string(), 0)
        };
        let mut c = parse_rational(&coef_str)
            .ok_or_else(|| parse_err(col + 1, format!("bad coefficient {coef_str:?}")))?;
        if neg {
            c = -c;
        }
        if coeffs.len() <= power {
            coeffs.resize(power + 1, BigRational::zero());
        }
        coeffs[power] += c;
    }
    Ok(RationalPoly::new(coeffs))
}

/// Binomial-basis coefficients `c_0..c_k` of `p` at scale `delta` around `t0`.
///
/// Computed as forward differences of `s -> p(t0 + delta s)` at `s = 0`.
pub fn to_binomial_basis(p: &RationalPoly, delta: &BigRational, t0: &BigRational) -> Vec<BigRational> {
    let k = p.degree_bound();
    let mut vals: Vec<BigRational> = (0..=k)
        .map(|s| p.eval(&(t0 + delta * int(s as i64))))
        .collect();
    let mut out = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        out.push(vals[0].clone());
        for i in 0..vals.len() - 1 {
            vals[i] = &vals[i + 1] - &vals[i];
        }
        vals.pop();
    }
    out
}

/// Inverse of [`to_binomial_basis`].
pub fn from_binomial_basis(c: &[BigRational], delta: &BigRational, t0: &BigRational) -> RationalPoly {
    RationalPoly::from_binomial_basis(c, delta, t0)
}

/// Whether `p(delta Z) ⊂ Z`.
pub fn is_integral(p: &RationalPoly, delta: &BigRational) -> bool {
    to_binomial_basis(p, delta, &BigRational::zero())
        .iter()
        .all(|c| c.is_integer())
}

/// Solves `c = q A + r B` for coprime `A, B`, choosing `q` of least absolute
/// value (the positive one on a tie).
fn bezout_coefficients(c: &BigInt, a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
    let eg = a.extended_gcd(b);
    debug_assert!(eg.gcd.is_one());
    let q0 = c * &eg.x;
    let mut q = q0.mod_floor(b);
    if &(&q * 2) > b {
        q -= b;
    }
    let r = (c - &q * a) / b;
    debug_assert_eq!(&q * a + &r * b, *c);
    (q, r)
}

/// Splits a 1-integral polynomial as `gamma = gamma_a + gamma_b` with
/// `gamma_a((1/a) Z) ⊂ Z` and `gamma_b((1/b) Z) ⊂ Z`.
///
/// Works top-down: the leading binomial coefficient `c` is written as
/// `q a^j + r b^j`, `q binom(a t, j) + r binom(b t, j)` is peeled off, and the
/// integral remainder of lower degree is split recursively.
pub fn bezout_split(gamma: &RationalPoly, a: u64, b: u64) -> Result<(RationalPoly, RationalPoly)> {
    if a == 0 || b == 0 {
        return Err(Error::InvalidArgument("a and b must be positive".into()));
    }
    if a.gcd(&b) != 1 {
        return Err(Error::NotCoprime(a, b));
    }
    let one = BigRational::one();
    let zero = BigRational::zero();
    if !is_integral(gamma, &one) {
        return Err(Error::NotIntegral("1".into()));
    }
    let k = gamma.degree_bound();
    let da = rat(1, a as i64);
    let db = rat(1, b as i64);
    let (ai, bi) = (BigInt::from(a), BigInt::from(b));
    let mut rest = gamma.clone();
    let mut ga = RationalPoly::zero(k);
    let mut gb = RationalPoly::zero(k);
    for j in (1..=k).rev() {
        let c = to_binomial_basis(&rest, &one, &zero)[j].to_integer();
        if c.is_zero() {
            continue;
        }
        let (q, r) = bezout_coefficients(&c, &num_traits::pow(ai.clone(), j), &num_traits::pow(bi.clone(), j));
        let pa = RationalPoly::binomial(j, &da, &zero).scale(&BigRational::from_integer(q));
        let pb = RationalPoly::binomial(j, &db, &zero).scale(&BigRational::from_integer(r));
        rest = &(&rest - &pa) - &pb;
        ga = &ga + &pa;
        gb = &gb + &pb;
    }
    // What remains is an integer constant.
    ga = &ga + &rest;
    Ok((ga.with_degree_bound(k), gb.with_degree_bound(k)))
}

/// Given 1-integral `gamma_p` for distinct primes `p`, returns a 1-integral
/// `gamma` with `gamma_p - gamma` being `p`-integral for every `p`.
pub fn crt_align(gammas: &[(u64, RationalPoly)]) -> Result<RationalPoly> {
    let one = BigRational::one();
    let mut seen = std::collections::BTreeSet::new();
    for (p, g) in gammas {
        if !is_prime(*p) {
            return Err(Error::InvalidArgument(format!("{p} is not prime")));
        }
        if !seen.insert(*p) {
            return Err(Error::RepeatedPrime(*p));
        }
        if !is_integral(g, &one) {
            return Err(Error::NotIntegral("1".into()));
        }
    }
    let Some((first_p, first)) = gammas.first() else {
        return Err(Error::InvalidArgument("no polynomials to align".into()));
    };
    let k = gammas.iter().map(|(_, g)| g.degree_bound()).max().unwrap_or(0);
    let mut gamma = first.with_degree_bound(k);
    let mut modulus = *first_p;
    for (p, gp) in &gammas[1..] {
        // gamma - gp = u_A + u_p; shifting gamma by u_A keeps every earlier
        // difference A-integral and makes the new one p-integral.
        let diff = &gamma - &gp.with_degree_bound(k);
        let (u_a, _) = bezout_split(&diff, modulus, *p)?;
        gamma = &gamma - &u_a;
        modulus *= p;
    }
    Ok(gamma)
}

/// Closed interval `[lo, hi]` with rational endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Interval {
    pub fn new(lo: BigRational, hi: BigRational) -> Result<Self> {
        if hi <= lo {
            return Err(Error::InvalidArgument(format!(
                "interval [{lo}, {hi}] must have positive length"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn from_ints(lo: i64, hi: i64) -> Result<Self> {
        Interval::new(int(lo), int(hi))
    }

    /// The interval with midpoint `x` and length `len`.
    pub fn from_midpoint(x: BigRational, len: BigRational) -> Result<Self> {
        let half = &len / int(2);
        Interval::new(&x - &half, &x + &half)
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn length(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn scale(&self, lambda: &BigRational) -> Self {
        Interval {
            lo: &self.lo * lambda,
            hi: &self.hi * lambda,
        }
    }

    /// `diam(self ∪ other) / |self|`.
    pub fn relative_distance(&self, other: &Interval) -> BigRational {
        let lo = self.lo.clone().min(other.lo.clone());
        let hi = self.hi.clone().max(other.hi.clone());
        (hi - lo) / self.length()
    }
}

/// Whether `diam(I ∪ J) <= C |I|` and `diam(I ∪ J) <= C |J|`.
pub fn interval_comparable(i: &Interval, j: &Interval, c: f64) -> bool {
    let Some(c) = BigRational::from_float(c) else {
        return false;
    };
    i.relative_distance(j) <= c && j.relative_distance(i) <= c
}

/// An interval together with a polynomial phase on it.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPhase {
    pub interval: Interval,
    pub poly: RationalPoly,
}

impl LocalPhase {
    pub fn new(interval: Interval, poly: RationalPoly) -> Self {
        LocalPhase { interval, poly }
    }

    /// `lambda * (I, P) = (lambda I, P(. / lambda))`.
    pub fn dilate(&self, lambda: &BigRational) -> Self {
        LocalPhase {
            interval: self.interval.scale(lambda),
            poly: self.poly.compose_affine(&lambda.recip(), &BigRational::zero()),
        }
    }
}

/// `P1 - P2 = eps + gamma` with `gamma` integral on `delta Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDecomposition {
    pub eps: RationalPoly,
    pub gamma: RationalPoly,
    /// `sup_{t in I1} |eps(t)|`.
    pub smooth_bound: f64,
}

/// Nearest integer, with exact half-integers rounded toward zero.
pub fn round_half_to_zero(c: &BigRational) -> BigInt {
    let f = c.floor();
    let frac = c - &f;
    let half = rat(1, 2);
    match frac.cmp(&half) {
        Ordering::Less => f.to_integer(),
        Ordering::Greater => f.to_integer() + 1,
        Ordering::Equal => {
            if c.is_positive() {
                f.to_integer()
            } else {
                f.to_integer() + 1
            }
        }
    }
}

/// Decides `phi1 ~_delta phi2` at tolerance `C`.
///
/// `P1 - P2` is expanded in the binomial basis at scale `delta` around the
/// point of `delta Z` nearest the midpoint of `I1`; rounding each coefficient
/// gives `gamma` and the remainder is `eps`. The pair is accepted when the
/// intervals are comparable at tolerance `C` and `sup_{I1} |eps| <= C`.
pub fn compare_phases(
    phi1: &LocalPhase,
    phi2: &LocalPhase,
    delta: &BigRational,
    c: f64,
) -> Option<PhaseDecomposition> {
    assert!(delta.is_positive(), "delta must be positive");
    if !interval_comparable(&phi1.interval, &phi2.interval, c) {
        return None;
    }
    let k = phi1.poly.degree_bound().max(phi2.poly.degree_bound());
    let diff = &phi1.poly.with_degree_bound(k) - &phi2.poly.with_degree_bound(k);
    let base = BigRational::from_integer(round_half_to_zero(&(phi1.interval.midpoint() / delta))) * delta;
    let coeffs = to_binomial_basis(&diff, delta, &base);
    let rounded: Vec<BigRational> = coeffs
        .iter()
        .map(|c| BigRational::from_integer(round_half_to_zero(c)))
        .collect();
    let gamma = from_binomial_basis(&rounded, delta, &base).with_degree_bound(k);
    let eps = &diff - &gamma;
    let smooth_bound = sup_abs(&eps, &phi1.interval);
    (smooth_bound <= c).then_some(PhaseDecomposition {
        eps,
        gamma,
        smooth_bound,
    })
}

/// Sturm chain of a polynomial given by trimmed coefficients.
fn sturm_chain(p: &[BigRational]) -> Vec<Vec<BigRational>> {
    let mut chain = vec![p.to_vec(), derivative_coeffs(p)];
    loop {
        let n = chain.len();
        if chain[n - 1].is_empty() {
            chain.pop();
            break;
        }
        let r = poly_rem(&chain[n - 2], &chain[n - 1]);
        if r.is_empty() {
            break;
        }
        chain.push(r.into_iter().map(|c| -c).collect());
    }
    chain
}

fn derivative_coeffs(p: &[BigRational]) -> Vec<BigRational> {
    let mut d: Vec<BigRational> = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| c * int(j as i64))
        .collect();
    while d.last().is_some_and(Zero::is_zero) {
        d.pop();
    }
    d
}

fn poly_rem(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lead = &b[db];
    while r.len() > db && !r.is_empty() {
        let shift = r.len() - 1 - db;
        let factor = r.last().unwrap() / lead;
        for (i, bc) in b.iter().enumerate() {
            r[shift + i] -= &factor * bc;
        }
        r.pop();
        while r.last().is_some_and(Zero::is_zero) {
            r.pop();
        }
    }
    r
}

fn eval_coeffs(p: &[BigRational], t: &BigRational) -> BigRational {
    p.iter().rev().fold(BigRational::zero(), |acc, c| acc * t + c)
}

fn sign_changes(chain: &[Vec<BigRational>], t: &BigRational) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for p in chain {
        let v = eval_coeffs(p, t);
        let s = if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// Bisection steps allowed while isolating and refining roots.
const ROOT_BUDGET: usize = 4000;

/// Real roots of `p` in `(lo, hi]`, each located to within
/// `(hi - lo) 2^-64`; `None` if the bisection budget runs out.
pub(crate) fn real_roots(p: &[BigRational], lo: &BigRational, hi: &BigRational) -> Option<Vec<BigRational>> {
    if p.len() <= 1 {
        return Some(Vec::new());
    }
    let chain = sturm_chain(p);
    let tol = (hi - lo) / BigRational::from_integer(BigInt::one() << 64);
    let mut steps = 0usize;
    let mut stack = vec![(lo.clone(), hi.clone())];
    let mut roots = Vec::new();
    while let Some((a, b)) = stack.pop() {
        let n = sign_changes(&chain, &a) as i64 - sign_changes(&chain, &b) as i64;
        if n <= 0 {
            continue;
        }
        if n == 1 || &b - &a <= tol {
            // Refine a single root (of the squarefree part) by bisection on
            // the Sturm count.
            let (mut a, mut b) = (a, b);
            while &b - &a > tol {
                steps += 1;
                if steps > ROOT_BUDGET {
                    return None;
                }
                let m = (&a + &b) / int(2);
                if sign_changes(&chain, &a) > sign_changes(&chain, &m) {
                    b = m;
                } else {
                    a = m;
                }
            }
            roots.push(b);
            continue;
        }
        steps += 1;
        if steps > ROOT_BUDGET {
            return None;
        }
        let m = (&a + &b) / int(2);
        stack.push((a, m.clone()));
        stack.push((m, b));
    }
    Some(roots)
}

/// `sup_{t in I} |p(t)|`, from the endpoints and the real roots of `p'`.
/// Falls back to 1000-point sampling if root isolation exceeds its budget.
pub fn sup_abs(p: &RationalPoly, interval: &Interval) -> f64 {
    let abs_at = |t: &BigRational| p.eval(t).abs().to_f64().unwrap_or(f64::INFINITY);
    let mut best = abs_at(&interval.lo).max(abs_at(&interval.hi));
    let d = derivative_coeffs(&p.strip());
    match real_roots(&d, &interval.lo, &interval.hi) {
        Some(roots) => {
            for r in roots {
                best = best.max(abs_at(&r));
            }
        }
        None => {
            let len = interval.length();
            for i in 0..=1000 {
                let t = &interval.lo + &len * rat(i, 1000);
                best = best.max(abs_at(&t));
            }
        }
    }
    best
}
