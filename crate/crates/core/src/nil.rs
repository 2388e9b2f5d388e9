//! Unipotent matrix groups, polynomial sequences in them, and nilsequences on
//! the Heisenberg nilmanifold.
//!
//! Group elements are upper unitriangular `d x d` matrices and Lie algebra
//! elements are strictly upper triangular ones, so `exp` and `log` are finite
//! sums and everything works over exact rationals as well as `f64`.
//!
//! The Heisenberg element with coordinates `(x, y, z)` is the matrix
//!
//! ```text
//! 1 x z
//! 0 1 y
//! 0 0 1
//! ```
//!
//! and the lattice `Gamma` is the set of such matrices with integer entries.
//!
//! ```
//! use num_rational::BigRational;
//! use ulab::nil::{bch_product, LieElement};
//!
//! let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
//! let x = LieElement::heisenberg(r(1, 1), r(0, 1), r(0, 1));
//! let y = LieElement::heisenberg(r(0, 1), r(1, 1), r(0, 1));
//! let xy = bch_product(&x, &y).unwrap();
//! assert_eq!(xy.heisenberg_coords(), (r(1, 1), r(1, 1), r(1, 2)));
//! ```

use std::f64::consts::TAU;
use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{e, Kahan};
use crate::error::{Error, Result};
use crate::poly::{bezout_split, from_binomial_basis, int, is_integral, RationalPoly};
use crate::sieve::FunctionTable;

/// Entries of group elements: `f64` or exact `BigRational`.
pub trait Scalar: Clone + Debug + PartialEq + Num + Neg<Output = Self> + Send + Sync {
    fn from_i64(v: i64) -> Self;
    fn floor(&self) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
struct Matrix<S> {
    d: usize,
    a: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    fn zero(d: usize) -> Self {
        Matrix {
            d,
            a: vec![S::zero(); d * d],
        }
    }

    fn identity(d: usize) -> Self {
        let mut m = Matrix::zero(d);
        for i in 0..d {
            m.a[i * d + i] = S::one();
        }
        m
    }

    fn at(&self, i: usize, j: usize) -> &S {
        &self.a[i * self.d + j]
    }

    fn mul(&self, other: &Matrix<S>) -> Matrix<S> {
        let d = self.d;
        let mut out: Matrix<S> = Matrix::zero(d);
        // Both factors are upper triangular.
        for i in 0..d {
            for k in i..d {
                let aik = self.at(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in k..d {
                    let v = aik.clone() * other.at(k, j).clone();
                    out.a[i * d + j] = out.a[i * d + j].clone() + v;
                }
            }
        }
        out
    }

    fn add(&self, other: &Matrix<S>) -> Matrix<S> {
        Matrix {
            d: self.d,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x.clone() + y.clone()).collect(),
        }
    }

    fn sub(&self, other: &Matrix<S>) -> Matrix<S> {
        Matrix {
            d: self.d,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x.clone() - y.clone()).collect(),
        }
    }

    fn scale(&self, s: &S) -> Matrix<S> {
        Matrix {
            d: self.d,
            a: self.a.iter().map(|x| x.clone() * s.clone()).collect(),
        }
    }
}

/// Upper unitriangular matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct NilGroupElement<S> {
    m: Matrix<S>,
}

/// Strictly upper triangular matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LieElement<S> {
    m: Matrix<S>,
}

fn check_square<S>(d: usize, entries: &[S]) -> Result<()> {
    if d == 0 || entries.len() != d * d {
        return Err(Error::Shape(format!("expected {d}x{d} entries, got {}", entries.len())));
    }
    Ok(())
}

impl<S: Scalar> NilGroupElement<S> {
    pub fn identity(d: usize) -> Self {
        NilGroupElement { m: Matrix::identity(d) }
    }

    /// From row-major entries; must be upper unitriangular.
    pub fn from_entries(d: usize, entries: Vec<S>) -> Result<Self> {
        check_square(d, &entries)?;
        for i in 0..d {
            for j in 0..d {
                let v = &entries[i * d + j];
                let ok = match i.cmp(&j) {
                    std::cmp::Ordering::Equal => v.is_one(),
                    std::cmp::Ordering::Greater => v.is_zero(),
                    std::cmp::Ordering::Less => true,
                };
                if !ok {
                    return Err(Error::Shape(format!("entry ({i}, {j}) breaks unitriangularity")));
                }
            }
        }
        Ok(NilGroupElement {
            m: Matrix { d, a: entries },
        })
    }

    pub fn heisenberg(x: S, y: S, z: S) -> Self {
        let (o, n) = (S::one(), S::zero());
        NilGroupElement {
            m: Matrix {
                d: 3,
                a: vec![o.clone(), x, z, n.clone(), o.clone(), y, n.clone(), n, o],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.m.d
    }

    pub fn entry(&self, i: usize, j: usize) -> &S {
        self.m.at(i, j)
    }

    pub fn entries(&self) -> &[S] {
        &self.m.a
    }

    /// `(x, y, z)` of a Heisenberg element.
    pub fn heisenberg_coords(&self) -> (S, S, S) {
        assert_eq!(self.m.d, 3, "not a Heisenberg element");
        (self.m.at(0, 1).clone(), self.m.at(1, 2).clone(), self.m.at(0, 2).clone())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        same_dim(self.m.d, other.m.d)?;
        Ok(NilGroupElement { m: self.m.mul(&other.m) })
    }

    pub fn inverse(&self) -> Self {
        let x = nil_log(self);
        nil_exp(&LieElement { m: x.m.scale(&-S::one()) })
    }

    pub fn is_identity(&self) -> bool {
        self.m == Matrix::identity(self.m.d)
    }

    /// Whether every entry is an integer.
    pub fn is_lattice(&self) -> bool {
        self.m.a.iter().all(|v| v.floor() == *v)
    }
}

impl<S: Scalar> LieElement<S> {
    pub fn zero(d: usize) -> Self {
        LieElement { m: Matrix::zero(d) }
    }

    /// From row-major entries; must be strictly upper triangular.
    pub fn from_entries(d: usize, entries: Vec<S>) -> Result<Self> {
        check_square(d, &entries)?;
        for i in 0..d {
            for j in 0..=i {
                if !entries[i * d + j].is_zero() {
                    return Err(Error::Shape(format!("entry ({i}, {j}) must vanish")));
                }
            }
        }
        Ok(LieElement {
            m: Matrix { d, a: entries },
        })
    }

    pub fn heisenberg(x: S, y: S, z: S) -> Self {
        let n = S::zero();
        LieElement {
            m: Matrix {
                d: 3,
                a: vec![n.clone(), x, z, n.clone(), n.clone(), y, n.clone(), n.clone(), n],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.m.d
    }

    pub fn entry(&self, i: usize, j: usize) -> &S {
        self.m.at(i, j)
    }

    pub fn entries(&self) -> &[S] {
        &self.m.a
    }

    pub fn heisenberg_coords(&self) -> (S, S, S) {
        assert_eq!(self.m.d, 3, "not a Heisenberg element");
        (self.m.at(0, 1).clone(), self.m.at(1, 2).clone(), self.m.at(0, 2).clone())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self.m.d, other.m.d)?;
        Ok(LieElement { m: self.m.add(&other.m) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self.m.d, other.m.d)?;
        Ok(LieElement { m: self.m.sub(&other.m) })
    }

    pub fn scale(&self, s: &S) -> Self {
        LieElement { m: self.m.scale(s) }
    }

    /// `[X, Y] = XY - YX`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        same_dim(self.m.d, other.m.d)?;
        Ok(LieElement {
            m: self.m.mul(&other.m).sub(&other.m.mul(&self.m)),
        })
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("dimensions {a} and {b} differ")));
    }
    Ok(())
}

/// `sum_{i < d} X^i / i!`.
pub fn nil_exp<S: Scalar>(x: &LieElement<S>) -> NilGroupElement<S> {
    let d = x.m.d;
    let mut out = Matrix::identity(d);
    let mut term = Matrix::identity(d);
    for i in 1..d {
        term = term.mul(&x.m).scale(&(S::one() / S::from_i64(i as i64)));
        out = out.add(&term);
    }
    NilGroupElement { m: out }
}

/// `sum_{1 <= i < d} (-1)^{i+1} (g - 1)^i / i`.
pub fn nil_log<S: Scalar>(g: &NilGroupElement<S>) -> LieElement<S> {
    let d = g.m.d;
    let n = g.m.sub(&Matrix::identity(d));
    let mut out = Matrix::zero(d);
    let mut power = Matrix::identity(d);
    for i in 1..d {
        power = power.mul(&n);
        let mut c = S::one() / S::from_i64(i as i64);
        if i % 2 == 0 {
            c = -c;
        }
        out = out.add(&power.scale(&c));
    }
    LieElement { m: out }
}

/// `X * Y = log(exp X exp Y)`.
pub fn bch_product<S: Scalar>(x: &LieElement<S>, y: &LieElement<S>) -> Result<LieElement<S>> {
    Ok(nil_log(&nil_exp(x).mul(&nil_exp(y))?))
}

/// `g^t = exp(t log g)`.
pub fn real_power<S: Scalar>(g: &NilGroupElement<S>, t: &S) -> NilGroupElement<S> {
    nil_exp(&nil_log(g).scale(t))
}

/// `binom(t, j)` for a scalar `t`.
pub fn binomial<S: Scalar>(t: &S, j: usize) -> S {
    let mut acc = S::one();
    for i in 0..j {
        acc = acc * (t.clone() - S::from_i64(i as i64)) / S::from_i64(i as i64 + 1);
    }
    acc
}

/// Filtration `G = G_0 = G_1 ⊇ ... ⊇ G_{k+1} = 1` by coordinate subgroups:
/// `masks[i][r * d + c]` says whether `log G_i` may use entry `(r, c)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filtration {
    d: usize,
    degree: usize,
    masks: Vec<Vec<bool>>,
}

impl Filtration {
    /// Checks nesting, `G_0 = G_1 = G`, `G_{k+1} = 1` and
    /// `[G_i, G_j] ⊆ G_{i+j}` on elementary matrices.
    pub fn new(d: usize, masks: Vec<Vec<bool>>) -> Result<Self> {
        if masks.len() < 3 || masks.iter().any(|m| m.len() != d * d) {
            return Err(Error::Shape("need masks for G_0, G_1, ..., G_{k+1}".into()));
        }
        let degree = masks.len() - 2;
        let full: Vec<bool> = (0..d * d).map(|e| e % d > e / d).collect();
        if masks[0] != full || masks[1] != full {
            return Err(Error::FiltrationViolation { level: 1 });
        }
        if masks[degree + 1].iter().any(|&b| b) {
            return Err(Error::FiltrationViolation { level: degree + 1 });
        }
        for i in 0..masks.len() {
            if masks[i].iter().zip(&full).any(|(&m, &f)| m && !f) {
                return Err(Error::FiltrationViolation { level: i });
            }
            if i > 0 && masks[i].iter().zip(&masks[i - 1]).any(|(&m, &p)| m && !p) {
                return Err(Error::FiltrationViolation { level: i });
            }
        }
        let f = Filtration { d, degree, masks };
        for i in 1..=degree {
            for j in 1..=degree {
                for (a, &in_i) in f.masks[i].iter().enumerate() {
                    for (b, &in_j) in f.masks[j].iter().enumerate() {
                        if !(in_i && in_j) {
                            continue;
                        }
                        // [E_{pq}, E_{rs}] = [q = r] E_{ps} - [s = p] E_{rq}
                        let (p, q, r, s) = (a / d, a % d, b / d, b % d);
                        let target = f.mask(i + j);
                        if q == r && !target[p * d + s] || s == p && !target[r * d + q] {
                            return Err(Error::FiltrationViolation { level: i + j });
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    /// Lower central series of the `d x d` unitriangular group, degree `d - 1`:
    /// `G_i` uses the entries at least `i` above the diagonal.
    pub fn lower_central(d: usize) -> Self {
        let masks = (0..=d)
            .map(|i| (0..d * d).map(|e| e % d >= e / d + i.max(1)).collect())
            .collect();
        Filtration::new(d, masks).expect("lower central series is a filtration")
    }

    /// Heisenberg filtration of degree `2k`: `G_i = G` for `i <= k`, the
    /// centre for `k < i <= 2k`. Its polynomial sequences have horizontal
    /// coordinates of degree at most `k`.
    pub fn heisenberg(k: usize) -> Self {
        assert!(k >= 1);
        let full = vec![false, true, true, false, false, true, false, false, false];
        let centre = vec![false, false, true, false, false, false, false, false, false];
        let none = vec![false; 9];
        let mut masks = vec![full; k + 1];
        masks.extend(std::iter::repeat(centre).take(k));
        masks.push(none);
        Filtration::new(3, masks).expect("Heisenberg filtration")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Mask of `G_i`; empty beyond the degree.
    pub fn mask(&self, i: usize) -> &[bool] {
        &self.masks[i.min(self.degree + 1)]
    }

    pub fn contains<S: Scalar>(&self, level: usize, g: &NilGroupElement<S>) -> bool {
        let x = nil_log(g);
        x.m.a
            .iter()
            .zip(self.mask(level))
            .all(|(v, &allowed)| allowed || v.is_zero())
    }
}

/// `g(t) = g_0 g_1^{binom(t,1)} ... g_k^{binom(t,k)}` with `g_j` in `G_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NilPolySeq<S> {
    filtration: Filtration,
    coeffs: Vec<NilGroupElement<S>>,
}

impl<S: Scalar> NilPolySeq<S> {
    pub fn new(filtration: Filtration, coeffs: Vec<NilGroupElement<S>>) -> Result<Self> {
        if coeffs.len() > filtration.degree() + 1 {
            return Err(Error::FiltrationViolation { level: coeffs.len() - 1 });
        }
        for (j, g) in coeffs.iter().enumerate() {
            same_dim(g.dim(), filtration.dim())?;
            if !filtration.contains(j, g) {
                return Err(Error::FiltrationViolation { level: j });
            }
        }
        Ok(NilPolySeq { filtration, coeffs })
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn coeffs(&self) -> &[NilGroupElement<S>] {
        &self.coeffs
    }

    /// Recovers the Taylor coefficients of a sequence from its values at
    /// `t = 0..=degree`, using `g_j = (prod_{i<j} g_i^{binom(j,i)})^{-1} g(j)`.
    pub fn from_values<F>(filtration: Filtration, g: F) -> Result<Self>
    where
        F: Fn(i64) -> NilGroupElement<S>,
    {
        let mut coeffs: Vec<NilGroupElement<S>> = Vec::new();
        for j in 0..=filtration.degree() {
            let mut prefix = NilGroupElement::identity(filtration.dim());
            for (i, gi) in coeffs.iter().enumerate() {
                let e = binomial(&S::from_i64(j as i64), i);
                prefix = prefix.mul(&real_power(gi, &e))?;
            }
            coeffs.push(prefix.inverse().mul(&g(j as i64))?);
        }
        while coeffs.len() > 1 && coeffs.last().is_some_and(NilGroupElement::is_identity) {
            coeffs.pop();
        }
        NilPolySeq::new(filtration, coeffs)
    }
}

/// `g(t)` for real or rational `t`.
pub fn eval_polyseq<S: Scalar>(seq: &NilPolySeq<S>, t: &S) -> NilGroupElement<S> {
    let mut acc = NilGroupElement::identity(seq.filtration.dim());
    for (j, g) in seq.coeffs.iter().enumerate() {
        let p = real_power(g, &binomial(t, j));
        acc = NilGroupElement { m: acc.m.mul(&p.m) };
    }
    acc
}

/// Writes a Heisenberg element as `h gamma` with `h` in the fundamental
/// domain `[0, 1)^3` and `gamma` in the lattice. Returns
/// `((x~, y~, z~), gamma)`.
pub fn heisenberg_reduce<S: Scalar>(g: &NilGroupElement<S>) -> ((S, S, S), NilGroupElement<S>) {
    // (hx, hy, hz)(a, b, c) = (hx + a, hy + b, hz + hx b + c)
    let (x, y, z) = g.heisenberg_coords();
    let a = x.floor();
    let hx = x - a.clone();
    let b = y.floor();
    let hy = y - b.clone();
    let w = z - hx.clone() * b.clone();
    let c = w.floor();
    let hz = w - c.clone();
    ((hx, hy, hz), NilGroupElement::heisenberg(a, b, c))
}

/// Built-in functions on the Heisenberg nilmanifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NilFunction {
    /// `e(a x~ + b y~)`.
    Horizontal { a: i64, b: i64 },
    /// `e(m z~) w(x~) w(y~)` with `w(u) = (1 - cos 2 pi u) / 2`.
    VerticalSmoothed { m: i64 },
}

/// `w(u) = (1 - cos 2 pi u) / 2`.
pub fn bump(u: f64) -> f64 {
    (1.0 - (TAU * u).cos()) / 2.0
}

impl NilFunction {
    pub fn eval(&self, coords: (f64, f64, f64)) -> Complex64 {
        let (x, y, z) = coords;
        match *self {
            NilFunction::Horizontal { a, b } => e(a as f64 * x + b as f64 * y),
            NilFunction::VerticalSmoothed { m } => e(m as f64 * z) * (bump(x) * bump(y)),
        }
    }

    /// `int F dmu` over the fundamental domain.
    pub fn mean(&self) -> f64 {
        match *self {
            NilFunction::Horizontal { a, b } => (a == 0 && b == 0) as u8 as f64,
            NilFunction::VerticalSmoothed { m } if m != 0 => 0.0,
            NilFunction::VerticalSmoothed { .. } => {
                // Midpoint rule; exact for the trigonometric polynomial w.
                let n = 64;
                let mut s = Kahan::new();
                for i in 0..n {
                    for j in 0..n {
                        s.add(bump((i as f64 + 0.5) / n as f64) * bump((j as f64 + 0.5) / n as f64));
                    }
                }
                s.value() / (n * n) as f64
            }
        }
    }
}

impl std::str::FromStr for NilFunction {
    type Err = Error;

    /// `horizontal(a,b)` or `vertical(m)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("unknown nil function {s:?}"));
        let (name, args) = s.split_once('(').ok_or_else(bad)?;
        let args = args.strip_suffix(')').ok_or_else(bad)?;
        let nums: Vec<i64> = args
            .split(',')
            .map(|a| a.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name.trim(), nums.as_slice()) {
            ("horizontal", &[a, b]) => Ok(NilFunction::Horizontal { a, b }),
            ("vertical" | "vertical_smoothed", &[m]) => Ok(NilFunction::VerticalSmoothed { m }),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for NilFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NilFunction::Horizontal { a, b } => write!(f, "horizontal({a},{b})"),
            NilFunction::VerticalSmoothed { m } => write!(f, "vertical({m})"),
        }
    }
}

fn require_heisenberg<S>(seq: &NilPolySeq<S>) -> Result<()> {
    if seq.filtration.dim() != 3 {
        return Err(Error::Shape("nilsequences are defined on the Heisenberg group".into()));
    }
    Ok(())
}

/// `F(g(n) Gamma)`.
pub fn eval_nilsequence(f: &NilFunction, seq: &NilPolySeq<f64>, n: i64) -> Result<Complex64> {
    require_heisenberg(seq)?;
    let (coords, _) = heisenberg_reduce(&eval_polyseq(seq, &(n as f64)));
    Ok(f.eval(coords))
}

const CHUNK: usize = 4096;

/// Sums `term(n)` over `n` in `lo..lo + len` in fixed-size chunks, reduced in order.
fn chunked_sum<T>(lo: i64, len: usize, term: T) -> Complex64
where
    T: Fn(i64) -> Complex64 + Sync,
{
    let chunks: Vec<Complex64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = Kahan::new_complex();
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                s.add(term(lo + i as i64));
            }
            s.value()
        })
        .collect();
    let mut total = Kahan::new_complex();
    for c in chunks {
        total.add(c);
    }
    total.value()
}

/// `(1/H) sum_{x <= n < x+H} f(n) conj F(g(n) Gamma)`.
pub fn discorrelation(
    table: &FunctionTable,
    x: i64,
    h: usize,
    f: &NilFunction,
    seq: &NilPolySeq<f64>,
) -> Result<Complex64> {
    require_heisenberg(seq)?;
    if h == 0 {
        return Err(Error::InvalidArgument("H must be at least 1".into()));
    }
    let values = table.window_checked(x, h)?;
    let sum = chunked_sum(x, h, |n| {
        let (coords, _) = heisenberg_reduce(&eval_polyseq(seq, &(n as f64)));
        values[(n - x) as usize] * f.eval(coords).conj()
    });
    Ok(sum / h as f64)
}

/// `|(1/N) sum_{1 <= n <= N} F(g(n) Gamma) - int F|`.
pub fn equidistribution_defect(seq: &NilPolySeq<f64>, f: &NilFunction, n: usize) -> Result<f64> {
    require_heisenberg(seq)?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let sum = chunked_sum(1, n, |m| {
        let (coords, _) = heisenberg_reduce(&eval_polyseq(seq, &(m as f64)));
        f.eval(coords)
    });
    Ok((sum / n as f64 - f.mean()).norm())
}

/// A Heisenberg polynomial sequence in coordinates:
/// `t -> (x(t), y(t), z(t))` with exact rational polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergPoly {
    pub x: RationalPoly,
    pub y: RationalPoly,
    pub z: RationalPoly,
}

impl HeisenbergPoly {
    /// Interpolates the coordinates of a sequence from `t = 0..=2 degree`.
    pub fn from_seq(seq: &NilPolySeq<BigRational>) -> Result<Self> {
        require_heisenberg(seq)?;
        let pts = 2 * seq.filtration.degree();
        let vals: Vec<(BigRational, BigRational, BigRational)> = (0..=pts as i64)
            .map(|t| eval_polyseq(seq, &int(t)).heisenberg_coords())
            .collect();
        let interp = |pick: &dyn Fn(&(BigRational, BigRational, BigRational)) -> BigRational| {
            let ys: Vec<BigRational> = vals.iter().map(pick).collect();
            interpolate(&ys)
        };
        Ok(HeisenbergPoly {
            x: interp(&|v| v.0.clone()),
            y: interp(&|v| v.1.clone()),
            z: interp(&|v| v.2.clone()),
        })
    }

    pub fn eval(&self, t: &BigRational) -> NilGroupElement<BigRational> {
        NilGroupElement::heisenberg(self.x.eval(t), self.y.eval(t), self.z.eval(t))
    }

    /// Whether the sequence maps `delta Z` into the lattice.
    pub fn is_integral(&self, delta: &BigRational) -> bool {
        is_integral(&self.x, delta) && is_integral(&self.y, delta) && is_integral(&self.z, delta)
    }
}

/// The polynomial of degree `< ys.len()` through `(t, ys[t])`.
fn interpolate(ys: &[BigRational]) -> RationalPoly {
    let mut diffs = Vec::with_capacity(ys.len());
    let mut row = ys.to_vec();
    while !row.is_empty() {
        diffs.push(row[0].clone());
        row = row.windows(2).map(|w| &w[1] - &w[0]).collect();
    }
    from_binomial_basis(&diffs, &int(1), &int(0))
}

/// Factors a lattice-valued Heisenberg sequence as `gamma = gamma_a gamma_b`
/// with `gamma_a((1/a) Z)` and `gamma_b((1/b) Z)` in the lattice.
///
/// The horizontal coordinates are split with the scalar Bezout splitting,
/// `gamma = gamma'_a sigma gamma'_b` then leaves a central `sigma` with
/// `z_sigma = z - x_a y_b`, which is integral on `Z` and is split the same way.
pub fn heisenberg_bezout(gamma: &HeisenbergPoly, a: u64, b: u64) -> Result<(HeisenbergPoly, HeisenbergPoly)> {
    if !gamma.is_integral(&int(1)) {
        return Err(Error::NotIntegral("1".into()));
    }
    let (xa, xb) = bezout_split(&gamma.x, a, b)?;
    let (ya, yb) = bezout_split(&gamma.y, a, b)?;
    let k = gamma.z.degree_bound().max(xa.degree_bound() + yb.degree_bound());
    let z_sigma = &gamma.z.with_degree_bound(k) - &(&xa * &yb).with_degree_bound(k);
    let (za, zb) = bezout_split(&z_sigma, a, b)?;
    Ok((
        HeisenbergPoly { x: xa, y: ya, z: za },
        HeisenbergPoly { x: xb, y: yb, z: zb },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;
    use crate::sieve::sieve_liouville;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Q = BigRational;

    fn rand_rat(rng: &mut ChaCha8Rng) -> Q {
        rat(rng.gen_range(-20..=20), rng.gen_range(1..=6))
    }

    fn rand_lie(rng: &mut ChaCha8Rng, d: usize) -> LieElement<Q> {
        let entries = (0..d * d)
            .map(|e| if e % d > e / d { rand_rat(rng) } else { int(0) })
            .collect();
        LieElement::from_entries(d, entries).unwrap()
    }

    #[test]
    fn heisenberg_exp_examples() {
        let g = nil_exp(&LieElement::heisenberg(int(1), int(1), int(0)));
        assert_eq!(g.heisenberg_coords(), (int(1), int(1), rat(1, 2)));
        assert!(nil_exp(&LieElement::<Q>::zero(4)).is_identity());
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 2..=5 {
            let x = rand_lie(&mut rng, d);
            assert_eq!(nil_log(&nil_exp(&x)), x);
        }
        let xf = LieElement::from_entries(
            4,
            (0..16).map(|e| if e % 4 > e / 4 { 0.3 * e as f64 } else { 0.0 }).collect(),
        )
        .unwrap();
        let back = nil_log(&nil_exp(&xf));
        for (a, b) in back.entries().iter().zip(xf.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bch_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = rand_lie(&mut rng, 3);
            let y = rand_lie(&mut rng, 3);
            let xy = bch_product(&x, &y).unwrap();
            let expected = x.add(&y).unwrap().add(&x.bracket(&y).unwrap().scale(&rat(1, 2))).unwrap();
            assert_eq!(xy, expected);
            let yx = bch_product(&y, &x).unwrap();
            assert_eq!(xy.sub(&yx).unwrap(), x.bracket(&y).unwrap());
            assert_eq!(bch_product(&x, &LieElement::zero(3)).unwrap(), x);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(LieElement::<Q>::from_entries(2, vec![int(1), int(0), int(0), int(0)]).is_err());
        assert!(NilGroupElement::<Q>::from_entries(2, vec![int(1), int(5), int(1), int(1)]).is_err());
        assert!(NilGroupElement::<Q>::from_entries(2, vec![int(1)]).is_err());
        let a = NilGroupElement::<Q>::identity(2);
        assert!(a.mul(&NilGroupElement::identity(3)).is_err());
    }

    #[test]
    fn real_power_examples() {
        let g = NilGroupElement::heisenberg(int(1), int(1), int(0));
        for t in [rat(0, 1), rat(1, 3), rat(5, 2), rat(-7, 4)] {
            let p = real_power(&g, &t);
            let z = &t * (&t - int(1)) / int(2);
            assert_eq!(p.heisenberg_coords(), (t.clone(), t.clone(), z));
        }
        let gf = NilGroupElement::heisenberg(0.7, -1.3, 0.2);
        let cube = gf.mul(&gf).unwrap().mul(&gf).unwrap();
        let p = real_power(&gf, &3.0);
        for (a, b) in p.entries().iter().zip(cube.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn abelianization_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = nil_exp(&rand_lie(&mut rng, 3));
            let h = nil_exp(&rand_lie(&mut rng, 3));
            let (gx, gy, _) = nil_log(&g).heisenberg_coords();
            let (hx, hy, _) = nil_log(&h).heisenberg_coords();
            let (x, y, _) = nil_log(&g.mul(&h).unwrap()).heisenberg_coords();
            assert_eq!((x, y), (gx + hx, gy + hy));
        }
    }

    #[test]
    fn filtrations() {
        let f = Filtration::lower_central(4);
        assert_eq!(f.degree(), 3);
        assert!(f.contains(3, &NilGroupElement::<Q>::from_entries(4, {
            let mut v = NilGroupElement::<Q>::identity(4).entries().to_vec();
            v[3] = int(2);
            v
        }).unwrap()));
        let h = Filtration::heisenberg(2);
        assert_eq!(h.degree(), 4);
        // G_2 must contain [G_1, G_1]: dropping the centre from it fails.
        let full = vec![false, true, true, false, false, true, false, false, false];
        let horizontal = vec![false, true, false, false, false, true, false, false, false];
        let none = vec![false; 9];
        assert!(matches!(
            Filtration::new(3, vec![full.clone(), full.clone(), horizontal, none]),
            Err(Error::FiltrationViolation { .. })
        ));
        assert!(Filtration::new(3, vec![full.clone(), full, vec![false; 9]]).is_err());
    }

    #[test]
    fn polyseq_examples() {
        let f = Filtration::heisenberg(1);
        let id = NilPolySeq::<f64>::new(f.clone(), vec![NilGroupElement::identity(3); 3]).unwrap();
        assert!(eval_polyseq(&id, &3.7).is_identity());

        let (al, be) = (rat(2, 7), rat(-3, 5));
        let seq = NilPolySeq::new(
            f.clone(),
            vec![NilGroupElement::identity(3), NilGroupElement::heisenberg(al.clone(), be.clone(), int(0))],
        )
        .unwrap();
        for n in 0..8 {
            let nq = int(n);
            let g = eval_polyseq(&seq, &nq);
            let c2 = &nq * (&nq - int(1)) / int(2);
            assert_eq!(g.heisenberg_coords(), (&nq * &al, &nq * &be, c2 * &al * &be));
        }

        // A horizontal element is not in G_2.
        let bad = NilPolySeq::new(
            f,
            vec![
                NilGroupElement::identity(3),
                NilGroupElement::identity(3),
                NilGroupElement::heisenberg(int(1), int(0), int(0)),
            ],
        );
        assert!(matches!(bad, Err(Error::FiltrationViolation { level: 2 })));
    }

    fn random_lattice_seq(rng: &mut ChaCha8Rng, k: usize) -> NilPolySeq<Q> {
        let f = Filtration::heisenberg(k);
        let coeffs = (0..=2 * k)
            .map(|j| {
                let z = int(rng.gen_range(-5..=5));
                if j <= k {
                    NilGroupElement::heisenberg(int(rng.gen_range(-5..=5)), int(rng.gen_range(-5..=5)), z)
                } else {
                    NilGroupElement::heisenberg(int(0), int(0), z)
                }
            })
            .collect();
        NilPolySeq::new(f, coeffs).unwrap()
    }

    #[test]
    fn lattice_coefficients_give_lattice_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = random_lattice_seq(&mut rng, 2);
        for t in 0..=10 {
            assert!(eval_polyseq(&seq, &int(t)).is_lattice());
        }
    }

    #[test]
    fn products_of_sequences_are_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let a = random_lattice_seq(&mut rng, 1);
            let b = random_lattice_seq(&mut rng, 1);
            let prod = |t: i64| eval_polyseq(&a, &int(t)).mul(&eval_polyseq(&b, &int(t))).unwrap();
            let c = NilPolySeq::from_values(a.filtration().clone(), prod).unwrap();
            for g in c.coeffs() {
                assert!(g.is_lattice());
            }
            for t in -4..12 {
                assert_eq!(eval_polyseq(&c, &int(t)), prod(t));
            }
        }
    }

    #[test]
    fn reduction_examples() {
        let g = NilGroupElement::heisenberg(int(3), int(-2), int(7));
        let (h, gamma) = heisenberg_reduce(&g);
        assert_eq!(h, (int(0), int(0), int(0)));
        assert_eq!(gamma, g);

        let (h, gamma) = heisenberg_reduce(&NilGroupElement::heisenberg(1.5, 0.0, 0.0));
        assert_eq!(h, (0.5, 0.0, 0.0));
        assert_eq!(gamma, NilGroupElement::heisenberg(1.0, 0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let g = NilGroupElement::heisenberg(rand_rat(&mut rng), rand_rat(&mut rng), rand_rat(&mut rng));
            let (h, gamma) = heisenberg_reduce(&g);
            for c in [&h.0, &h.1, &h.2] {
                assert!(*c >= int(0) && *c < int(1));
            }
            assert!(gamma.is_lattice());
            let hg = NilGroupElement::heisenberg(h.0.clone(), h.1.clone(), h.2.clone());
            assert_eq!(hg.mul(&gamma).unwrap(), g);
            let (h2, gamma2) = heisenberg_reduce(&hg);
            assert_eq!(h2, h);
            assert!(gamma2.is_identity());
        }
    }

    fn linear_seq(alpha: f64, beta: f64) -> NilPolySeq<f64> {
        NilPolySeq::new(
            Filtration::heisenberg(1),
            vec![NilGroupElement::identity(3), NilGroupElement::heisenberg(alpha, beta, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn nilsequence_examples() {
        let seq = linear_seq(0.3, 0.0);
        let one = NilFunction::Horizontal { a: 0, b: 0 };
        let hor = NilFunction::Horizontal { a: 1, b: 0 };
        for n in 0..20 {
            assert_eq!(eval_nilsequence(&one, &seq, n).unwrap(), Complex64::new(1.0, 0.0));
            assert!((eval_nilsequence(&hor, &seq, n).unwrap() - e(0.3 * n as f64)).norm() < 1e-12);
        }
        let (al, be) = (2f64.sqrt().fract(), 3f64.sqrt().fract());
        let seq = linear_seq(al, be);
        let v = eval_nilsequence(&NilFunction::VerticalSmoothed { m: 1 }, &seq, 5).unwrap();
        let (x, y) = ((5.0 * al).fract(), (5.0 * be).fract());
        let z = (10.0 * al * be - x * (5.0 * be).floor()).rem_euclid(1.0);
        let want = e(z) * bump(x) * bump(y);
        assert!((v - want).norm() < 1e-12);
    }

    #[test]
    fn function_means_and_parsing() {
        assert!((NilFunction::VerticalSmoothed { m: 0 }.mean() - 0.25).abs() < 1e-15);
        assert_eq!(NilFunction::VerticalSmoothed { m: 2 }.mean(), 0.0);
        assert_eq!(NilFunction::Horizontal { a: 0, b: 0 }.mean(), 1.0);
        assert_eq!("horizontal(1, -2)".parse::<NilFunction>().unwrap(), NilFunction::Horizontal { a: 1, b: -2 });
        assert_eq!("vertical(3)".parse::<NilFunction>().unwrap().to_string(), "vertical(3)");
        assert!("diagonal(1)".parse::<NilFunction>().is_err());
    }

    #[test]
    fn discorrelation_examples() {
        let seq = linear_seq(0.41, 0.77);
        let f = NilFunction::Horizontal { a: 1, b: 0 };
        let values: Vec<Complex64> = (0..300).map(|n| eval_nilsequence(&f, &seq, 100 + n).unwrap()).collect();
        let table = FunctionTable::from_values(100, crate::sieve::Values::Complex(values), crate::sieve::MultSpec::Liouville).unwrap();
        let d = discorrelation(&table, 100, 300, &f, &seq).unwrap();
        assert!((d - Complex64::new(1.0, 0.0)).norm() < 1e-9);

        let zeros = FunctionTable::from_values(1, crate::sieve::Values::Real(vec![0.0; 50]), crate::sieve::MultSpec::VonMangoldt).unwrap();
        assert_eq!(discorrelation(&zeros, 1, 50, &f, &seq).unwrap(), Complex64::new(0.0, 0.0));
        assert!(discorrelation(&zeros, 10, 50, &f, &seq).is_err());

        let lam = sieve_liouville(100_000, 101_000).unwrap();
        let v = discorrelation(&lam, 100_000, 1000, &NilFunction::VerticalSmoothed { m: 1 }, &linear_seq(2f64.sqrt(), 3f64.sqrt()))
            .unwrap();
        assert!(v.norm() < 0.1);
    }

    #[test]
    fn equidistribution_examples() {
        let seq = linear_seq(2f64.sqrt().fract(), 3f64.sqrt().fract());
        assert!(equidistribution_defect(&seq, &NilFunction::Horizontal { a: 0, b: 0 }, 100).unwrap() < 1e-12);
        let id = linear_seq(0.0, 0.0);
        let d = equidistribution_defect(&id, &NilFunction::Horizontal { a: 1, b: 0 }, 100).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let f = NilFunction::Horizontal { a: 1, b: 1 };
        assert!(equidistribution_defect(&seq, &f, 100_000).unwrap() < equidistribution_defect(&seq, &f, 1000).unwrap());
    }

    #[test]
    fn nilpotent_bezout() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let seq = random_lattice_seq(&mut rng, 2);
            let gamma = HeisenbergPoly::from_seq(&seq).unwrap();
            for t in -3..6 {
                assert_eq!(gamma.eval(&int(t)), eval_polyseq(&seq, &int(t)));
            }
            let (ga, gb) = heisenberg_bezout(&gamma, 2, 3).unwrap();
            for j in -30..=30 {
                let t = rat(j, 6);
                assert_eq!(ga.eval(&t).mul(&gb.eval(&t)).unwrap(), gamma.eval(&t));
                if j % 3 == 0 {
                    assert!(ga.eval(&t).is_lattice());
                }
                if j % 2 == 0 {
                    assert!(gb.eval(&t).is_lattice());
                }
            }
        }
        let bad = HeisenbergPoly {
            x: RationalPoly::new(vec![rat(1, 2)]),
            y: RationalPoly::zero(0),
            z: RationalPoly::zero(0),
        };
        assert!(heisenberg_bezout(&bad, 2, 3).is_err());
    }
}
