//! Tables of multiplicative functions on integer ranges.
//!
//! Liouville, Moebius and von Mangoldt tables are produced by a segmented
//! sieve over the primes up to `sqrt(end)`; segments hold `2^20` entries and
//! are built independently. Completely multiplicative functions given by their
//! values on primes use the same factor-stripping pass.
//!
//! ```
//! use ulab::sieve::sieve_liouville;
//!
//! let t = sieve_liouville(1, 10).unwrap();
//! let v: Vec<i8> = (1..=10).map(|n| t.get_real(n) as i8).collect();
//! assert_eq!(v, [1, -1, -1, 1, -1, 1, -1, -1, 1, 1]);
//! ```

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{e, primes_up_to};
use crate::error::{Error, Result};
use crate::pretentious::character;

/// Entries per sieve segment.
pub const SEGMENT_LEN: u64 = 1 << 20;

/// Largest table built unless a caller asks for more.
pub const DEFAULT_TABLE_BUDGET: u64 = 1 << 29;

/// Values of a completely multiplicative function on the primes: a default
/// for every prime plus explicit overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeMap {
    pub default: Complex64,
    #[serde(default)]
    pub overrides: BTreeMap<u64, Complex64>,
}

impl PrimeMap {
    pub fn constant(value: Complex64) -> Self {
        PrimeMap {
            default: value,
            overrides: BTreeMap::new(),
        }
    }

    pub fn at(&self, p: u64) -> Complex64 {
        self.overrides.get(&p).copied().unwrap_or(self.default)
    }
}

/// Which arithmetic function a table holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultSpec {
    Liouville,
    Moebius,
    VonMangoldt,
    /// `n -> chi(n) n^{it}` with `chi` the `character_index`-th character mod `modulus`.
    CharacterTwist {
        modulus: u64,
        character_index: usize,
        t: f64,
    },
    /// Completely multiplicative with the given prime values.
    CustomPrimeMap { primes: PrimeMap },
}

impl MultSpec {
    pub fn kind_byte(&self) -> u8 {
        match self {
            MultSpec::Liouville => 0,
            MultSpec::Moebius => 1,
            MultSpec::VonMangoldt => 2,
            MultSpec::CharacterTwist { .. } => 3,
            MultSpec::CustomPrimeMap { .. } => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MultSpec::Liouville => "liouville",
            MultSpec::Moebius => "moebius",
            MultSpec::VonMangoldt => "von_mangoldt",
            MultSpec::CharacterTwist { .. } => "character_twist",
            MultSpec::CustomPrimeMap { .. } => "custom_prime_map",
        }
    }

    /// Checks the per-kind invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            MultSpec::CharacterTwist {
                modulus,
                character_index,
                ..
            } => {
                character(*modulus, *character_index)?;
            }
            MultSpec::CustomPrimeMap { primes } => {
                let bad = std::iter::once(&primes.default)
                    .chain(primes.overrides.values())
                    .any(|z| z.norm() > 1.0 + 1e-12);
                if bad {
                    return Err(Error::InvalidArgument(
                        "prime values must have modulus <= 1".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Value at a prime, for the 1-bounded kinds.
    pub fn prime_value(&self, p: u64) -> Result<Complex64> {
        match self {
            MultSpec::Liouville | MultSpec::Moebius => Ok(Complex64::new(-1.0, 0.0)),
            MultSpec::VonMangoldt => Err(Error::InvalidArgument(
                "von Mangoldt is not a 1-bounded multiplicative function".into(),
            )),
            MultSpec::CharacterTwist { .. } => eval_character_twist(p, self),
            MultSpec::CustomPrimeMap { primes } => Ok(primes.at(p)),
        }
    }

    pub fn is_signed(&self) -> bool {
        matches!(self, MultSpec::Liouville | MultSpec::Moebius)
    }
}

/// Storage for table values: signed bytes for the `{-1, 0, 1}`-valued kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum Values {
    Signed(Vec<i8>),
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Signed(v) => v.len(),
            Values::Real(v) => v.len(),
            Values::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values of an arithmetic function on `[start, end]`; lookups outside the
/// range return zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionTable {
    start: u64,
    end: u64,
    values: Values,
    spec: MultSpec,
}

impl FunctionTable {
    /// Wraps precomputed values; `values` must have `end - start + 1` entries.
    pub fn from_values(start: u64, values: Values, spec: MultSpec) -> Result<Self> {
        if start < 1 || values.is_empty() {
            return Err(Error::InvalidRange {
                start,
                end: start,
                reason: "tables start at 1 and are nonempty",
            });
        }
        let end = start + values.len() as u64 - 1;
        Ok(FunctionTable {
            start,
            end,
            values,
            spec,
        })
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spec(&self) -> &MultSpec {
        &self.spec
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.start as i64 && n <= self.end as i64
    }

    #[inline]
    pub fn get(&self, n: i64) -> Complex64 {
        if !self.contains(n) {
            return Complex64::new(0.0, 0.0);
        }
        let i = (n as u64 - self.start) as usize;
        match &self.values {
            Values::Signed(v) => Complex64::new(v[i] as f64, 0.0),
            Values::Real(v) => Complex64::new(v[i], 0.0),
            Values::Complex(v) => v[i],
        }
    }

    /// Real part of the value at `n` (exact for the real-valued kinds).
    #[inline]
    pub fn get_real(&self, n: i64) -> f64 {
        if !self.contains(n) {
            return 0.0;
        }
        let i = (n as u64 - self.start) as usize;
        match &self.values {
            Values::Signed(v) => v[i] as f64,
            Values::Real(v) => v[i],
            Values::Complex(v) => v[i].re,
        }
    }

    /// Values on `[lo, lo + len)` with zero outside the table.
    pub fn window(&self, lo: i64, len: usize) -> Vec<Complex64> {
        (0..len as i64).map(|i| self.get(lo + i)).collect()
    }

    /// Like [`window`](Self::window) but the whole window must lie in the table.
    pub fn window_checked(&self, lo: i64, len: usize) -> Result<Vec<Complex64>> {
        let hi = lo + len as i64 - 1;
        if len == 0 || !self.contains(lo) || !self.contains(hi) {
            return Err(Error::OutsideTable {
                start: self.start,
                end: self.end,
                lo,
                hi,
            });
        }
        Ok(self.window(lo, len))
    }

    pub fn is_real(&self) -> bool {
        !matches!(self.values, Values::Complex(_))
    }

    /// Writes the binary table format: little-endian header
    /// (`"ULAB"`, version `u32`, start `u64`, end `u64`, kind `u8`) followed
    /// by raw values (`i8`, `f64`, or `(f64, f64)` pairs).
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.start.to_le_bytes())?;
        w.write_all(&self.end.to_le_bytes())?;
        w.write_all(&[self.spec.kind_byte()])?;
        match &self.values {
            Values::Signed(v) => {
                let bytes: Vec<u8> = v.iter().map(|&x| x as u8).collect();
                w.write_all(&bytes)?;
            }
            Values::Real(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            Values::Complex(v) => {
                for z in v {
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Reads a table written by [`write_to`](Self::write_to). The header kind
    /// must match `spec`.
    pub fn read_from<R: Read>(r: &mut R, spec: &MultSpec) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::CorruptCache("magic mismatch".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CACHE_VERSION {
            return Err(Error::CorruptCache(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b8)?;
        let start = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let end = u64::from_le_bytes(b8);
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        if kind[0] != spec.kind_byte() {
            return Err(Error::CorruptCache(format!(
                "kind {} does not match {}",
                kind[0],
                spec.name()
            )));
        }
        if start < 1 || end < start {
            return Err(Error::CorruptCache(format!("bad range [{start}, {end}]")));
        }
        let len = (end - start + 1) as usize;
        let values = match spec {
            MultSpec::Liouville | MultSpec::Moebius => {
                let mut buf = vec![0u8; len];
                r.read_exact(&mut buf)?;
                Values::Signed(buf.into_iter().map(|b| b as i8).collect())
            }
            MultSpec::VonMangoldt => {
                let mut out = Vec::with_capacity(len);
                for _ in 0..len {
                    r.read_exact(&mut b8)?;
                    out.push(f64::from_le_bytes(b8));
                }
                Values::Real(out)
            }
            _ => {
                let mut out = Vec::with_capacity(len);
                for _ in 0..len {
                    r.read_exact(&mut b8)?;
                    let re = f64::from_le_bytes(b8);
                    r.read_exact(&mut b8)?;
                    out.push(Complex64::new(re, f64::from_le_bytes(b8)));
                }
                Values::Complex(out)
            }
        };
        Ok(FunctionTable {
            start,
            end,
            values,
            spec: spec.clone(),
        })
    }
}

pub const CACHE_MAGIC: &[u8; 4] = b"ULAB";
pub const CACHE_VERSION: u32 = 1;

fn check_range(start: u64, end: u64, budget: u64) -> Result<()> {
    if start < 1 {
        return Err(Error::InvalidRange {
            start,
            end,
            reason: "start must be >= 1",
        });
    }
    if end < start {
        return Err(Error::InvalidRange {
            start,
            end,
            reason: "end must be >= start",
        });
    }
    let len = end - start + 1;
    if len > budget {
        return Err(Error::RangeTooLarge { len, budget });
    }
    Ok(())
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn segments(start: u64, end: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut lo = start;
    while lo <= end {
        let hi = (lo + SEGMENT_LEN - 1).min(end);
        out.push((lo, hi));
        lo = hi + 1;
    }
    out
}

fn first_multiple(m: u64, lo: u64) -> u64 {
    lo.div_ceil(m) * m
}

/// Per-segment factor data: `Omega(n)` and squarefreeness.
struct SegmentFactors {
    omega: Vec<u8>,
    squarefree: Vec<bool>,
}

fn factor_segment(lo: u64, hi: u64, base: &[u64]) -> SegmentFactors {
    let len = (hi - lo + 1) as usize;
    let mut rest: Vec<u64> = (lo..=hi).collect();
    let mut omega = vec![0u8; len];
    let mut squarefree = vec![true; len];
    for &p in base {
        let mut pk = p;
        let mut power = 1;
        loop {
            let mut m = first_multiple(pk, lo);
            while m <= hi {
                let i = (m - lo) as usize;
                rest[i] /= p;
                omega[i] += 1;
                if power >= 2 {
                    squarefree[i] = false;
                }
                m += pk;
            }
            match pk.checked_mul(p) {
                Some(next) if next <= hi => {
                    pk = next;
                    power += 1;
                }
                _ => break,
            }
        }
    }
    for (r, o) in rest.iter().zip(omega.iter_mut()) {
        if *r > 1 {
            *o += 1;
        }
    }
    SegmentFactors { omega, squarefree }
}

fn signed_table<F>(start: u64, end: u64, spec: MultSpec, map: F) -> Result<FunctionTable>
where
    F: Fn(&SegmentFactors, usize) -> i8 + Sync,
{
    check_range(start, end, DEFAULT_TABLE_BUDGET)?;
    let base = primes_up_to(isqrt(end));
    let parts: Vec<Vec<i8>> = segments(start, end)
        .into_par_iter()
        .map(|(lo, hi)| {
            let f = factor_segment(lo, hi, &base);
            (0..f.omega.len()).map(|i| map(&f, i)).collect()
        })
        .collect();
    Ok(FunctionTable {
        start,
        end,
        values: Values::Signed(parts.concat()),
        spec,
    })
}

/// `lambda(n) = (-1)^{Omega(n)}` on `[start, end]`.
pub fn sieve_liouville(start: u64, end: u64) -> Result<FunctionTable> {
    signed_table(start, end, MultSpec::Liouville, |f, i| {
        if f.omega[i] % 2 == 0 {
            1
        } else {
            -1
        }
    })
}

/// `mu(n)` on `[start, end]`: zero off the squarefree integers.
pub fn sieve_moebius(start: u64, end: u64) -> Result<FunctionTable> {
    signed_table(start, end, MultSpec::Moebius, |f, i| {
        if !f.squarefree[i] {
            0
        } else if f.omega[i] % 2 == 0 {
            1
        } else {
            -1
        }
    })
}

/// `Lambda(n) = log p` when `n = p^m`, else 0.
pub fn sieve_von_mangoldt(start: u64, end: u64) -> Result<FunctionTable> {
    check_range(start, end, DEFAULT_TABLE_BUDGET)?;
    let base = primes_up_to(isqrt(end));
    let parts: Vec<Vec<f64>> = segments(start, end)
        .into_par_iter()
        .map(|(lo, hi)| {
            let len = (hi - lo + 1) as usize;
            let mut out = vec![0.0; len];
            let mut has_small = vec![false; len];
            for &p in &base {
                let mut m = first_multiple(p, lo);
                while m <= hi {
                    has_small[(m - lo) as usize] = true;
                    m += p;
                }
                let lp = (p as f64).ln();
                let mut pk = p;
                loop {
                    if pk >= lo && pk <= hi {
                        out[(pk - lo) as usize] = lp;
                    }
                    match pk.checked_mul(p) {
                        Some(next) if next <= hi => pk = next,
                        _ => break,
                    }
                }
            }
            for (i, n) in (lo..=hi).enumerate() {
                if n > 1 && !has_small[i] {
                    out[i] = (n as f64).ln();
                }
            }
            out
        })
        .collect();
    Ok(FunctionTable {
        start,
        end,
        values: Values::Real(parts.concat()),
        spec: MultSpec::VonMangoldt,
    })
}

/// `chi(n) n^{it} = chi(n) e(t ln n / 2 pi)` for a `CharacterTwist` spec.
pub fn eval_character_twist(n: u64, spec: &MultSpec) -> Result<Complex64> {
    match spec {
        MultSpec::CharacterTwist {
            modulus,
            character_index,
            t,
        } => {
            let chi = character(*modulus, *character_index)?;
            Ok(twist_value(chi.eval(n), n, *t))
        }
        _ => Err(Error::InvalidArgument(format!(
            "{} is not a character twist",
            spec.name()
        ))),
    }
}

#[inline]
fn twist_value(chi_n: Complex64, n: u64, t: f64) -> Complex64 {
    if chi_n.re == 0.0 && chi_n.im == 0.0 {
        return chi_n;
    }
    if t == 0.0 {
        return chi_n;
    }
    chi_n * e(t * (n as f64).ln() / TAU)
}

/// Builds the table of any spec on `[start, end]`.
pub fn build_table(spec: &MultSpec, start: u64, end: u64) -> Result<FunctionTable> {
    spec.validate()?;
    match spec {
        MultSpec::Liouville => sieve_liouville(start, end),
        MultSpec::Moebius => sieve_moebius(start, end),
        MultSpec::VonMangoldt => sieve_von_mangoldt(start, end),
        MultSpec::CharacterTwist {
            modulus,
            character_index,
            t,
        } => {
            check_range(start, end, DEFAULT_TABLE_BUDGET)?;
            let chi = character(*modulus, *character_index)?;
            let values = (start..=end)
                .into_par_iter()
                .map(|n| twist_value(chi.eval(n), n, *t))
                .collect();
            Ok(FunctionTable {
                start,
                end,
                values: Values::Complex(values),
                spec: spec.clone(),
            })
        }
        MultSpec::CustomPrimeMap { primes } => {
            check_range(start, end, DEFAULT_TABLE_BUDGET)?;
            let base = primes_up_to(isqrt(end));
            let parts: Vec<Vec<Complex64>> = segments(start, end)
                .into_par_iter()
                .map(|(lo, hi)| {
                    let len = (hi - lo + 1) as usize;
                    let mut rest: Vec<u64> = (lo..=hi).collect();
                    let mut out = vec![Complex64::new(1.0, 0.0); len];
                    for &p in &base {
                        let fp = primes.at(p);
                        let mut pk = p;
                        loop {
                            let mut m = first_multiple(pk, lo);
                            while m <= hi {
                                let i = (m - lo) as usize;
                                rest[i] /= p;
                                out[i] *= fp;
                                m += pk;
                            }
                            match pk.checked_mul(p) {
                                Some(next) if next <= hi => pk = next,
                                _ => break,
                            }
                        }
                    }
                    for (o, &r) in out.iter_mut().zip(&rest) {
                        if r > 1 {
                            *o *= primes.at(r);
                        }
                    }
                    out
                })
                .collect();
            Ok(FunctionTable {
                start,
                end,
                values: Values::Complex(parts.concat()),
                spec: spec.clone(),
            })
        }
    }
}

/// On-disk cache of sieved tables, keyed by kind and range.
///
/// Only Liouville, Moebius and von Mangoldt tables are cached; the other
/// kinds carry parameters the header does not record.
#[derive(Clone, Debug)]
pub struct TableCache {
    dir: PathBuf,
}

impl TableCache {
    pub fn new<P: AsRef<Path>>(dir: P) -> Self {
        TableCache {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    pub fn path_for(&self, spec: &MultSpec, start: u64, end: u64) -> PathBuf {
        self.dir
            .join(format!("{}_{}_{}.ulab", spec.name(), start, end))
    }

    /// Loads the table from disk if present, else builds and stores it.
    pub fn get_or_build(&self, spec: &MultSpec, start: u64, end: u64) -> Result<FunctionTable> {
        if !spec.is_signed() && *spec != MultSpec::VonMangoldt {
            return build_table(spec, start, end);
        }
        let path = self.path_for(spec, start, end);
        if path.exists() {
            let mut r = BufReader::new(File::open(&path)?);
            let t = FunctionTable::read_from(&mut r, spec)?;
            if t.start != start || t.end != end {
                return Err(Error::CorruptCache(format!(
                    "{} holds [{}, {}]",
                    path.display(),
                    t.start,
                    t.end
                )));
            }
            return Ok(t);
        }
        let t = build_table(spec, start, end)?;
        std::fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            t.write_to(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, &path)?;
        Ok(t)
    }
}
