//! Sign and value patterns of multiplicative functions, and averaged
//! correlations: Chowla sums with a short average over the shift, polynomial
//! averages, and W-tricked von Mangoldt weights.
//!
//! Averages use the unweighted `E_{n <= X} a_n = (1/X) sum_{n=1}^{X} a_n`
//! unless the logarithmic flag is set, in which case
//! `E^log_{n <= X} a_n = (sum a_n / n) / (sum 1 / n)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{totient, von_mangoldt, Kahan};
use crate::error::{Error, Result};
use crate::sieve::{build_table, sieve_liouville, FunctionTable, MultSpec};

/// Distinct length-`k` windows `(g(n+1), ..., g(n+k))`, `0 <= n < N`.
///
/// Patterns are encoded in base `l` with `g(n+1)` as the least significant
/// digit, the digit of `e(r/l)` being `r`. For signs, digit 1 is `-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCount {
    pub k: usize,
    pub n: u64,
    pub alphabet: u32,
    pub count: usize,
    pub first_occurrence: BTreeMap<u64, u64>,
}

impl PatternCount {
    /// `+-+` for signs, `0,2,1` for larger alphabets.
    pub fn render(&self, code: u64) -> String {
        let digits = (0..self.k).map(|i| (code / (self.alphabet as u64).pow(i as u32)) % self.alphabet as u64);
        if self.alphabet == 2 {
            digits.map(|d| if d == 0 { '+' } else { '-' }).collect()
        } else {
            digits.map(|d| d.to_string()).collect::<Vec<_>>().join(",")
        }
    }

    /// `(pattern, first n)` ordered by first occurrence.
    pub fn occurrences(&self) -> Vec<(String, u64)> {
        let mut v: Vec<(String, u64)> = self
            .first_occurrence
            .iter()
            .map(|(&code, &n)| (self.render(code), n))
            .collect();
        v.sort_by_key(|&(_, n)| n);
        v
    }
}

fn check_cover(table: &FunctionTable, lo: i64, hi: i64) -> Result<()> {
    if !table.contains(lo) || !table.contains(hi) {
        return Err(Error::OutsideTable {
            start: table.start(),
            end: table.end(),
            lo,
            hi,
        });
    }
    Ok(())
}

fn scan(k: usize, n: u64, alphabet: u32, digit: impl Fn(i64) -> Result<u64>) -> Result<PatternCount> {
    let mut first = BTreeMap::new();
    if k == 0 {
        first.insert(0, 0);
        return Ok(PatternCount {
            k,
            n,
            alphabet,
            count: 1,
            first_occurrence: first,
        });
    }
    let l = alphabet as u64;
    let top = l.pow(k as u32 - 1);
    let mut code = 0u64;
    for i in (1..=k as i64).rev() {
        code = code * l + digit(i)?;
    }
    for start in 0..n {
        first.entry(code).or_insert(start);
        if start + 1 < n {
            // Drop g(start + 1), append g(start + k + 1).
            code = code / l + digit(start as i64 + k as i64 + 1)? * top;
        }
    }
    Ok(PatternCount {
        k,
        n,
        alphabet,
        count: first.len(),
        first_occurrence: first,
    })
}

/// Sign patterns of length `k` of a `+-1` table covering `[1, N + k]`.
pub fn sign_patterns_on(table: &FunctionTable, k: usize, n: u64) -> Result<PatternCount> {
    if k < 1 || n < k as u64 {
        return Err(Error::InvalidArgument("need k >= 1 and N >= k".into()));
    }
    check_cover(table, 1, n as i64 + k as i64)?;
    scan(k, n, 2, |m| {
        let v = table.get_real(m);
        if v == 1.0 {
            Ok(0)
        } else if v == -1.0 {
            Ok(1)
        } else {
            Err(Error::NotRootOfUnity(m as u64))
        }
    })
}

/// Sign patterns of length `k` of the Liouville function.
pub fn sign_patterns(k: usize, n: u64) -> Result<PatternCount> {
    let table = sieve_liouville(1, n + k as u64)?;
    sign_patterns_on(&table, k, n)
}

/// Value patterns of an `l`-th-root-of-unity valued table covering `[1, N + k]`.
pub fn value_patterns_on(table: &FunctionTable, k: usize, n: u64, l: u32) -> Result<PatternCount> {
    if l < 1 {
        return Err(Error::InvalidArgument("alphabet size must be positive".into()));
    }
    if k == 0 {
        return scan(0, n, l, |_| Ok(0));
    }
    if n < k as u64 {
        return Err(Error::InvalidArgument("need N >= k".into()));
    }
    if (l as f64).powi(k as i32) >= u64::MAX as f64 {
        return Err(Error::InvalidArgument("l^k does not fit in 64 bits".into()));
    }
    check_cover(table, 1, n as i64 + k as i64)?;
    scan(k, n, l, |m| root_digit(table.get(m), l).ok_or(Error::NotRootOfUnity(m as u64)))
}

/// Value patterns of a completely multiplicative function given by `spec`.
pub fn value_patterns(spec: &MultSpec, k: usize, n: u64, l: u32) -> Result<PatternCount> {
    let table = build_table(spec, 1, n + k as u64)?;
    value_patterns_on(&table, k, n, l)
}

/// `r` with `z = e(r / l)`, if any.
fn root_digit(z: Complex64, l: u32) -> Option<u64> {
    if (z.norm() - 1.0).abs() > 1e-9 {
        return None;
    }
    let turns = z.arg() / std::f64::consts::TAU * l as f64;
    let r = turns.round();
    ((turns - r).abs() < 1e-6).then(|| r.rem_euclid(l as f64) as u64)
}

/// The result of an averaged correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub value: f64,
    pub x: u64,
    pub epsilon: f64,
    /// Shifts or polynomials, as text.
    pub family: String,
    pub weights: Vec<Weight>,
    /// Number of outer parameters averaged over.
    pub outer: u64,
    /// Terms whose argument fell outside the tables and were taken as zero.
    pub truncated_terms: u64,
}

/// `floor(X^eps)`, guarding against `10^{0.5 * 2} = 9.999...`.
pub fn short_range(x: u64, eps: f64) -> u64 {
    let v = (x as f64).powf(eps);
    let r = v.round();
    if (v - r).abs() < 1e-9 * r.max(1.0) {
        r as u64
    } else {
        v.floor() as u64
    }
}

fn inner_average(terms: impl Iterator<Item = (u64, f64)>, log: bool) -> f64 {
    let mut s = Kahan::new();
    let mut w = Kahan::new();
    for (n, v) in terms {
        let wt = if log { 1.0 / n as f64 } else { 1.0 };
        s.add(v * wt);
        w.add(wt);
    }
    s.value() / w.value()
}

fn ordered_mean(values: &[f64]) -> f64 {
    let mut s = Kahan::new();
    for &v in values {
        s.add(v);
    }
    s.value() / values.len() as f64
}

/// `E_{h <= X^eps} |E_{n <= X} prod_i f(n + a_i h)|` for a real table
/// covering `[1, X + max(a) floor(X^eps)]`.
pub fn chowla_average_on(table: &FunctionTable, shifts: &[u64], x: u64, eps: f64, log: bool) -> Result<CorrelationResult> {
    validate_shifts(shifts)?;
    let hmax = short_range(x, eps);
    if x == 0 || hmax == 0 {
        return Err(Error::InvalidArgument("need X >= 1 and X^eps >= 1".into()));
    }
    let amax = *shifts.iter().max().expect("nonempty");
    check_cover(table, 1, (x + amax * hmax) as i64)?;
    let per_h: Vec<f64> = (1..=hmax)
        .into_par_iter()
        .map(|h| {
            let terms = (1..=x).map(|n| {
                let v: f64 = shifts.iter().map(|&a| table.get_real((n + a * h) as i64)).product();
                (n, v)
            });
            inner_average(terms, log).abs()
        })
        .collect();
    Ok(CorrelationResult {
        value: ordered_mean(&per_h),
        x,
        epsilon: eps,
        family: format!("{shifts:?}"),
        weights: vec![Weight::Liouville; shifts.len()],
        outer: hmax,
        truncated_terms: 0,
    })
}

/// [`chowla_average_on`] for the Liouville function.
pub fn chowla_average(shifts: &[u64], x: u64, eps: f64, log: bool) -> Result<CorrelationResult> {
    validate_shifts(shifts)?;
    let amax = *shifts.iter().max().expect("nonempty");
    let table = sieve_liouville(1, (x + amax * short_range(x, eps)).max(1))?;
    chowla_average_on(&table, shifts, x, eps, log)
}

fn validate_shifts(shifts: &[u64]) -> Result<()> {
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("need at least one shift".into()));
    }
    let mut s = shifts.to_vec();
    s.sort_unstable();
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("shifts must be distinct".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    Liouville,
    VonMangoldt,
    /// Constant 1, for checks.
    Constant,
}

impl FromStr for Weight {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lambda" | "liouville" | "l" => Ok(Weight::Liouville),
            "von_mangoldt" | "vonmangoldt" | "lambda_vm" | "v" => Ok(Weight::VonMangoldt),
            "one" | "constant" | "1" => Ok(Weight::Constant),
            other => Err(Error::InvalidArgument(format!("unknown weight {other:?}"))),
        }
    }
}

/// Multivariate polynomial with integer coefficients in `m1, ..., mr`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPoly {
    /// `(coefficient, exponents)`; exponents have length `vars`.
    terms: Vec<(i64, Vec<u32>)>,
    vars: usize,
}

impl IntPoly {
    pub fn new(vars: usize, terms: Vec<(i64, Vec<u32>)>) -> Result<Self> {
        if terms.iter().any(|(_, e)| e.len() != vars) {
            return Err(Error::Shape("exponent vector length differs from variable count".into()));
        }
        Ok(IntPoly { terms, vars }.normalized())
    }

    /// `a * m1`.
    pub fn linear(a: i64) -> Self {
        IntPoly::new(1, vec![(a, vec![1])]).expect("one variable")
    }

    fn normalized(mut self) -> Self {
        let mut map: BTreeMap<Vec<u32>, i64> = BTreeMap::new();
        for (c, e) in self.terms.drain(..) {
            *map.entry(e).or_insert(0) += c;
        }
        self.terms = map.into_iter().filter(|&(_, c)| c != 0).map(|(e, c)| (c, e)).collect();
        self
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn with_vars(&self, vars: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, e)| {
                let mut e = e.clone();
                e.resize(vars, 0);
                (*c, e)
            })
            .collect();
        IntPoly { terms, vars }
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        let vars = self.vars.max(other.vars);
        let mut terms = self.with_vars(vars).terms;
        terms.extend(other.with_vars(vars).terms.into_iter().map(|(c, e)| (-c, e)));
        IntPoly { terms, vars }.normalized()
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn eval(&self, m: &[i64]) -> i64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(m).map(|(&k, &v)| v.pow(k)).product::<i64>())
            .sum()
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (c, e)) in self.terms.iter().enumerate() {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(v, &k)| if k == 1 { format!("m{}", v + 1) } else { format!("m{}^{k}", v + 1) })
                .collect();
            let sign = if *c < 0 { "-" } else { "+" };
            if i == 0 {
                if *c < 0 {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let a = c.unsigned_abs();
            match (a, mono.is_empty()) {
                (_, true) => write!(f, "{a}")?,
                (1, false) => write!(f, "{}", mono.join("*"))?,
                (_, false) => write!(f, "{a}*{}", mono.join("*"))?,
            }
        }
        Ok(())
    }
}

impl FromStr for IntPoly {
    type Err = Error;

    /// Sums of terms like `3*m1^2*m2`, `-m2`, `7`; `m` alone means `m1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut terms: Vec<(i64, Vec<(usize, u32)>)> = Vec::new();
        let mut vars = 1;
        let chars: Vec<char> = s.chars().collect();
        let mut i = 0;
        let err = |col: usize, msg: &str| Error::Parse {
            column: col + 1,
            message: msg.into(),
        };
        let skip_ws = |i: &mut usize| {
            while *i < chars.len() && chars[*i].is_whitespace() {
                *i += 1;
            }
        };
        let read_num = |i: &mut usize| -> Option<u64> {
            let start = *i;
            while *i < chars.len() && chars[*i].is_ascii_digit() {
                *i += 1;
            }
            chars[start..*i].iter().collect::<String>().parse().ok()
        };
        let mut first = true;
        loop {
            skip_ws(&mut i);
            if i >= chars.len() {
                if first {
                    return Err(err(i, "empty polynomial"));
                }
                break;
            }
            let mut sign = 1i64;
            if chars[i] == '+' || chars[i] == '-' {
                if chars[i] == '-' {
                    sign = -1;
                }
                i += 1;
                skip_ws(&mut i);
            } else if !first {
                return Err(err(i, "expected + or -"));
            }
            first = false;
            let mut coef = 1i64;
            let mut factors = Vec::new();
            let mut expect_factor = true;
            while expect_factor {
                skip_ws(&mut i);
                if i >= chars.len() {
                    return Err(err(i, "dangling operator"));
                }
                if chars[i].is_ascii_digit() {
                    let v = read_num(&mut i).ok_or_else(|| err(i, "bad number"))?;
                    coef = coef
                        .checked_mul(v as i64)
                        .ok_or_else(|| err(i, "coefficient overflow"))?;
                } else if chars[i] == 'm' {
                    i += 1;
                    let v = if i < chars.len() && chars[i].is_ascii_digit() {
                        read_num(&mut i).ok_or_else(|| err(i, "bad variable index"))? as usize
                    } else {
                        1
                    };
                    if v == 0 {
                        return Err(err(i, "variables are numbered from m1"));
                    }
                    skip_ws(&mut i);
                    let mut pow = 1u32;
                    if i < chars.len() && chars[i] == '^' {
                        i += 1;
                        skip_ws(&mut i);
                        pow = read_num(&mut i).ok_or_else(|| err(i, "bad exponent"))? as u32;
                    }
                    vars = vars.max(v);
                    factors.push((v - 1, pow));
                } else {
                    return Err(err(i, &format!("unexpected {:?}", chars[i])));
                }
                skip_ws(&mut i);
                expect_factor = i < chars.len() && chars[i] == '*';
                if expect_factor {
                    i += 1;
                }
            }
            terms.push((sign * coef, factors));
        }
        let terms = terms
            .into_iter()
            .map(|(c, fs)| {
                let mut e = vec![0u32; vars];
                for (v, p) in fs {
                    e[v] += p;
                }
                (c, e)
            })
            .collect();
        IntPoly::new(vars, terms)
    }
}

/// `E_{m in [X^eps]^r} |E_{n <= X} prod_i w_i(n + P_i(m))|`.
///
/// Weights are read from tables covering `[1, X + max P_i]`; arguments
/// outside `[1, table end]` count as zero and are tallied in
/// `truncated_terms`.
pub fn poly_average(polys: &[IntPoly], weights: &[Weight], x: u64, eps: f64) -> Result<CorrelationResult> {
    validate_family(polys, weights, eps)?;
    let r = polys.iter().map(IntPoly::vars).max().unwrap_or(1);
    let mrange = short_range(x, eps);
    let corner = vec![mrange as i64; r];
    // Polynomials can be largest anywhere in the box when coefficients mix signs.
    let pmax = box_points(r, mrange)
        .flat_map(|m| polys.iter().map(move |p| p.eval(&m)))
        .chain(std::iter::once(polys[0].eval(&corner)))
        .max()
        .unwrap_or(0)
        .max(0) as u64;
    let end = (x + pmax).max(1);
    let lam = weights.contains(&Weight::Liouville).then(|| sieve_liouville(1, end)).transpose()?;
    let vm = weights
        .contains(&Weight::VonMangoldt)
        .then(|| build_table(&MultSpec::VonMangoldt, 1, end))
        .transpose()?;
    poly_average_on(polys, weights, x, eps, lam.as_ref(), vm.as_ref())
}

fn box_points(r: usize, m: u64) -> impl Iterator<Item = Vec<i64>> {
    let total = m.pow(r as u32);
    (0..total).map(move |mut code| {
        (0..r)
            .map(|_| {
                let v = (code % m) as i64 + 1;
                code /= m;
                v
            })
            .collect()
    })
}

fn validate_family(polys: &[IntPoly], weights: &[Weight], eps: f64) -> Result<()> {
    if polys.is_empty() || polys.len() != weights.len() {
        return Err(Error::InvalidArgument("need one weight per polynomial".into()));
    }
    for i in 0..polys.len() {
        for j in i + 1..polys.len() {
            if polys[i].sub(&polys[j]).is_constant() {
                return Err(Error::DegenerateFamily(i, j));
            }
        }
    }
    let deg = polys.iter().map(IntPoly::degree).max().unwrap_or(0).max(1);
    if !(eps > 0.0 && eps < 1.0 / deg as f64) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1/{deg})")));
    }
    Ok(())
}

/// As [`poly_average`], with caller-provided tables.
pub fn poly_average_on(
    polys: &[IntPoly],
    weights: &[Weight],
    x: u64,
    eps: f64,
    liouville: Option<&FunctionTable>,
    von_mangoldt: Option<&FunctionTable>,
) -> Result<CorrelationResult> {
    validate_family(polys, weights, eps)?;
    let mrange = short_range(x, eps);
    if x == 0 || mrange == 0 {
        return Err(Error::InvalidArgument("need X >= 1 and X^eps >= 1".into()));
    }
    let tables: Vec<&FunctionTable> = weights
        .iter()
        .map(|w| match w {
            Weight::Liouville => liouville.ok_or_else(|| Error::InvalidArgument("Liouville table missing".into())),
            Weight::VonMangoldt => von_mangoldt.ok_or_else(|| Error::InvalidArgument("von Mangoldt table missing".into())),
            Weight::Constant => Ok(liouville.or(von_mangoldt).unwrap_or_else(|| unreachable_table())),
        })
        .collect::<Result<_>>()?;
    let r = polys.iter().map(IntPoly::vars).max().unwrap_or(1);
    let points: Vec<Vec<i64>> = box_points(r, mrange).collect();
    let per_m: Vec<(f64, u64)> = points
        .par_iter()
        .map(|m| {
            let offsets: Vec<i64> = polys.iter().map(|p| p.eval(m)).collect();
            let mut truncated = 0u64;
            let terms = (1..=x).map(|n| {
                let mut v = 1.0;
                for ((&off, w), t) in offsets.iter().zip(weights).zip(&tables) {
                    if *w == Weight::Constant {
                        continue;
                    }
                    let arg = n as i64 + off;
                    if !t.contains(arg) {
                        truncated += 1;
                    }
                    v *= t.get_real(arg);
                }
                (n, v)
            });
            (inner_average(terms, false).abs(), truncated)
        })
        .collect();
    let values: Vec<f64> = per_m.iter().map(|p| p.0).collect();
    Ok(CorrelationResult {
        value: ordered_mean(&values),
        x,
        epsilon: eps,
        family: polys.iter().map(|p| format!("({p})")).collect::<Vec<_>>().join(", "),
        weights: weights.to_vec(),
        outer: points.len() as u64,
        truncated_terms: per_m.iter().map(|p| p.1).sum(),
    })
}

/// Placeholder table for all-constant weights; never read.
fn unreachable_table() -> &'static FunctionTable {
    use std::sync::OnceLock;
    static EMPTY: OnceLock<FunctionTable> = OnceLock::new();
    EMPTY.get_or_init(|| {
        FunctionTable::from_values(1, crate::sieve::Values::Real(vec![1.0]), MultSpec::VonMangoldt).expect("one entry")
    })
}

/// `Lambda_{W,b}(d) = (phi(W) / W) Lambda(W d + b)`.
pub fn w_trick_weight(w: u64, b: u64, d: u64) -> Result<f64> {
    if w < 1 || b < 1 || b > w {
        return Err(Error::InvalidArgument("need 1 <= b <= W".into()));
    }
    Ok(totient(w) as f64 / w as f64 * von_mangoldt(w * d + b))
}
