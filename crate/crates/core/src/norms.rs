//! Gowers uniformity norms on integer intervals and on `Z/NZ`, Gowers box
//! norms, and short-interval averages.
//!
//! Intervals are half-open: `[x, x + H)` holds the `H` integers
//! `x, ..., x + H - 1`. The normalized norm over such an interval is
//!
//! ```text
//! ||f||_{U^{k+1}[x, x+H)} = ||f 1_I||_{U^{k+1}(Z)} / ||1_I||_{U^{k+1}(Z)}
//! ```
//!
//! where the unnormalized norm is the `2^{k+1}`-th root of the sum over all
//! `(y, h_1, ..., h_{k+1})` of the conjugate-alternating product over the
//! vertices of the cube.
//!
//! ```
//! use num_complex::Complex64;
//! use ulab::norms::{gowers_unnormalized, gowers_recursive};
//!
//! let f = vec![Complex64::new(1.0, 0.0); 2];
//! let direct = gowers_unnormalized(&f, 1).unwrap();
//! assert!((direct - 6f64.powf(0.25)).abs() < 1e-12);
//! assert!((gowers_recursive(&f, 1).unwrap() - direct).abs() < 1e-12);
//! ```

use std::cell::RefCell;
use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::Kahan;
use crate::error::{Error, Result};
use crate::sieve::{build_table, FunctionTable, MultSpec};

/// Default number of multiply-adds allowed per norm evaluation.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

/// Negative Gowers sums down to this relative size are rounding noise.
const NEGATIVE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Enumerate every cube.
    Direct,
    /// `||f||^{2^{k+1}}_{U^{k+1}} = sum_h ||Delta_h f||^{2^k}_{U^k}`.
    Recursive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GowersResult {
    pub value: f64,
    /// The norm is `U^{k+1}`.
    pub k: usize,
    pub x: i64,
    pub h: usize,
    pub method: Method,
}

fn check_budget(needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        Err(Error::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

fn root_of_sum(sum: Complex64, k: usize, scale: f64) -> Result<f64> {
    let tol = NEGATIVE_SLACK * scale.max(sum.norm());
    if sum.re < -tol {
        return Err(Error::NegativeGowersSum(sum.re));
    }
    let exponent = 1.0 / (1u64 << (k + 1)) as f64;
    Ok(sum.re.max(0.0).powf(exponent))
}

/// Unnormalized `U^{k+1}(Z)` norm of `f`, supported on `0..f.len()`, by
/// enumerating every cube `(y, h)` with all vertices inside the support.
pub fn gowers_unnormalized(f: &[Complex64], k: usize) -> Result<f64> {
    gowers_unnormalized_with_budget(f, k, DEFAULT_BUDGET)
}

pub fn gowers_unnormalized_with_budget(f: &[Complex64], k: usize, budget: u128) -> Result<f64> {
    let h = f.len();
    if h == 0 {
        return Ok(0.0);
    }
    let dims = k + 1;
    check_budget((h as u128).pow(dims as u32 + 1), budget)?;

    let vertices = 1usize << dims;
    let parity: Vec<bool> = (0..vertices).map(|s| s.count_ones() % 2 == 1).collect();
    let span = h as i64 - 1;
    let mut shifts = vec![-span; dims];
    let mut offsets = vec![0i64; vertices];
    let conj: Vec<Complex64> = f.iter().map(|z| z.conj()).collect();
    let mut acc = Kahan::new_complex();
    let mut scale = Kahan::new();
    'outer: loop {
        let neg: i64 = shifts.iter().filter(|&&s| s < 0).sum();
        let pos: i64 = shifts.iter().filter(|&&s| s > 0).sum();
        let (y_lo, y_hi) = (-neg, span - pos);
        if y_lo <= y_hi {
            for (s, off) in offsets.iter_mut().enumerate() {
                *off = (0..dims).filter(|j| s >> j & 1 == 1).map(|j| shifts[j]).sum();
            }
            for y in y_lo..=y_hi {
                let mut prod = Complex64::new(1.0, 0.0);
                let mut mag = 1.0;
                for s in 0..vertices {
                    let i = (y + offsets[s]) as usize;
                    let v = if parity[s] { conj[i] } else { f[i] };
                    prod *= v;
                    mag *= v.norm();
                }
                acc.add(prod);
                scale.add(mag);
            }
        }
        for s in shifts.iter_mut() {
            if *s < span {
                *s += 1;
                continue 'outer;
            }
            *s = -span;
        }
        break;
    }
    root_of_sum(acc.value(), k, scale.value())
}

/// The `2^{k+1}`-th power of the unnormalized norm, by the inductive identity.
fn recursive_power(f: &[Complex64], k: usize, work: &mut Vec<Vec<Complex64>>, depth: usize) -> Complex64 {
    if k == 0 {
        let mut s = Kahan::new_complex();
        for &v in f {
            s.add(v);
        }
        let s = s.value();
        return Complex64::new(s.norm_sqr(), 0.0);
    }
    let n = f.len();
    if work.len() <= depth {
        work.push(Vec::with_capacity(n));
    }
    let mut acc = Kahan::new_complex();
    for shift in -(n as i64 - 1)..=(n as i64 - 1) {
        // Delta_h f(y) = f(y + h) conj f(y), supported where both are.
        let (lo, hi) = if shift >= 0 {
            (0, n - shift as usize)
        } else {
            ((-shift) as usize, n)
        };
        let mut buf = std::mem::take(&mut work[depth]);
        buf.clear();
        buf.extend((lo..hi).map(|y| f[(y as i64 + shift) as usize] * f[y].conj()));
        acc.add(recursive_power(&buf, k - 1, work, depth + 1));
        work[depth] = buf;
    }
    acc.value()
}

/// Unnormalized `U^{k+1}(Z)` norm of `f` by the inductive identity
/// `||f||^{2^{k+1}}_{U^{k+1}} = sum_h ||Delta_h f||^{2^k}_{U^k}` with
/// `Delta_h f(y) = f(y + h) conj f(y)`, bottoming out at `||g||_{U^1} = |sum g|`.
pub fn gowers_recursive(f: &[Complex64], k: usize) -> Result<f64> {
    gowers_recursive_with_budget(f, k, DEFAULT_BUDGET)
}

pub fn gowers_recursive_with_budget(f: &[Complex64], k: usize, budget: u128) -> Result<f64> {
    let h = f.len() as u128;
    if h == 0 {
        return Ok(0.0);
    }
    check_budget((2 * h).pow(k as u32) * h, budget)?;
    let mut work = Vec::new();
    let sum = recursive_power(f, k, &mut work, 0);
    let scale: f64 = f.iter().map(|z| z.norm()).sum::<f64>().powi(1 << (k + 1).min(30));
    root_of_sum(sum, k, scale.min(f64::MAX))
}

fn unnormalized(f: &[Complex64], k: usize, method: Method, budget: u128) -> Result<f64> {
    match method {
        Method::Direct => gowers_unnormalized_with_budget(f, k, budget),
        Method::Recursive => gowers_recursive_with_budget(f, k, budget),
    }
}

thread_local! {
    static INDICATOR_NORMS: RefCell<HashMap<(usize, usize, Method), f64>> = RefCell::new(HashMap::new());
}

/// `||1_{[0, h)}||_{U^{k+1}(Z)}`, memoized per thread.
pub fn indicator_norm(h: usize, k: usize, method: Method) -> Result<f64> {
    if let Some(v) = INDICATOR_NORMS.with(|m| m.borrow().get(&(h, k, method)).copied()) {
        return Ok(v);
    }
    let ones = vec![Complex64::new(1.0, 0.0); h];
    let v = unnormalized(&ones, k, method, u128::MAX)?;
    INDICATOR_NORMS.with(|m| m.borrow_mut().insert((h, k, method), v));
    Ok(v)
}

/// Normalized norm of a window of values, taken as `f` on `[0, len)`.
pub fn gowers_normalized(values: &[Complex64], k: usize, method: Method) -> Result<f64> {
    gowers_normalized_with_budget(values, k, method, DEFAULT_BUDGET)
}

pub fn gowers_normalized_with_budget(
    values: &[Complex64],
    k: usize,
    method: Method,
    budget: u128,
) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("H must be at least 1".into()));
    }
    let num = unnormalized(values, k, method, budget)?;
    Ok(num / indicator_norm(values.len(), k, method)?)
}

/// `||f||_{U^{k+1}[x, x+H)}`; values outside the table count as zero.
pub fn gowers_interval(table: &FunctionTable, x: i64, h: usize, k: usize, method: Method) -> Result<GowersResult> {
    let values = table.window(x, h);
    let value = gowers_normalized(&values, k, method)?;
    Ok(GowersResult {
        value,
        k,
        x,
        h,
        method,
    })
}

/// Gowers box norm of `f` on `Z/NZ` (`N = f.len()`) with boxes `C_1..C_d`.
///
/// Each `h_i` ranges over the differences `c - c'` with `c, c' in C_i`,
/// counted with multiplicity, so the average is a genuine `2^d`-th power.
/// With every `C_i = Z/NZ` this is the `U^d(Z/NZ)` norm.
pub fn box_norm(f: &[Complex64], boxes: &[Vec<i64>]) -> Result<f64> {
    box_norm_with_budget(f, boxes, DEFAULT_BUDGET)
}

pub fn box_norm_with_budget(f: &[Complex64], boxes: &[Vec<i64>], budget: u128) -> Result<f64> {
    let n = f.len();
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if boxes.is_empty() || boxes.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("boxes must be nonempty".into()));
    }
    let d = boxes.len();
    let ni = n as i64;
    // Distinct differences mod N with their multiplicities.
    let diffs: Vec<Vec<(usize, f64)>> = boxes
        .iter()
        .map(|c| {
            let mut count = vec![0u64; n];
            for &a in c {
                for &b in c {
                    count[(a - b).rem_euclid(ni) as usize] += 1;
                }
            }
            let total = (c.len() * c.len()) as f64;
            count
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0)
                .map(|(h, &m)| (h, m as f64 / total))
                .collect()
        })
        .collect();
    let needed = diffs.iter().map(|v| v.len() as u128).product::<u128>() * n as u128 * (1u128 << d);
    check_budget(needed, budget)?;

    let vertices = 1usize << d;
    let parity: Vec<bool> = (0..vertices).map(|s| s.count_ones() % 2 == 1).collect();
    let mut idx = vec![0usize; d];
    let mut offsets = vec![0usize; vertices];
    let mut acc = Kahan::new_complex();
    'outer: loop {
        let mut weight = 1.0;
        for (i, &j) in idx.iter().enumerate() {
            weight *= diffs[i][j].1;
        }
        for (s, off) in offsets.iter_mut().enumerate() {
            *off = (0..d).filter(|i| s >> i & 1 == 1).map(|i| diffs[i][idx[i]].0).sum::<usize>() % n;
        }
        let mut inner = Kahan::new_complex();
        for x in 0..n {
            let mut prod = Complex64::new(1.0, 0.0);
            for s in 0..vertices {
                let v = f[(x + offsets[s]) % n];
                prod *= if parity[s] { v.conj() } else { v };
            }
            inner.add(prod);
        }
        acc.add(inner.value() * weight);
        for (i, j) in idx.iter_mut().enumerate() {
            if *j + 1 < diffs[i].len() {
                *j += 1;
                continue 'outer;
            }
            *j = 0;
        }
        break;
    }
    let mean = acc.value() / n as f64;
    let tol = NEGATIVE_SLACK * mean.norm().max(1.0);
    if mean.re < -tol {
        return Err(Error::NegativeGowersSum(mean.re));
    }
    Ok(mean.re.max(0.0).powf(1.0 / vertices as f64))
}

/// `U^d(Z/NZ)`: the box norm with every box the whole group.
pub fn gowers_cyclic(f: &[Complex64], d: usize) -> Result<f64> {
    let full: Vec<i64> = (0..f.len() as i64).collect();
    box_norm(f, &vec![full; d])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedGowers {
    pub mean: f64,
    pub stderr: f64,
    /// One sampled norm per stratum, in stratum order.
    pub values: Vec<f64>,
    pub points: Vec<i64>,
}

/// The sample point of each stratum: `[X, 2X)` is cut into `samples` equal
/// strata and one point is drawn uniformly from each, stratum `i` using
/// stream `i` of a ChaCha8 generator seeded with `seed`.
pub fn stratum_points(x: u64, samples: usize, seed: u64) -> Vec<i64> {
    let width = x as f64 / samples as f64;
    (0..samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let u: f64 = rng.gen();
            let p = (x as f64 + (i as f64 + u) * width).floor() as i64;
            p.clamp(x as i64, 2 * x as i64 - 1)
        })
        .collect()
}

/// Stratified estimate of `(1/X) int_X^{2X} ||f||_{U^{k+1}[x, x+H)} dx`.
pub fn averaged_gowers(
    spec: &MultSpec,
    x: u64,
    h: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<AveragedGowers> {
    if x == 0 || h == 0 || samples == 0 {
        return Err(Error::InvalidArgument("X, H and samples must be positive".into()));
    }
    let table = build_table(spec, x, 2 * x + h as u64)?;
    averaged_gowers_on(&table, x, h, k, samples, seed)
}

/// As [`averaged_gowers`], over a table covering `[X, 2X + H]`.
pub fn averaged_gowers_on(
    table: &FunctionTable,
    x: u64,
    h: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<AveragedGowers> {
    let per_eval = (2 * h as u128).pow(k as u32) * h as u128;
    check_budget(per_eval * samples as u128, DEFAULT_BUDGET * 100)?;
    let points = stratum_points(x, samples, seed);
    let values: Vec<f64> = points
        .par_iter()
        .map(|&p| {
            let w = table.window_checked(p, h)?;
            gowers_normalized_with_budget(&w, k, Method::Recursive, u128::MAX)
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(AveragedGowers {
        mean,
        stderr,
        values,
        points,
    })
}

/// Mean and standard error, summed in order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut s = Kahan::new();
    for &v in values {
        s.add(v);
    }
    let mean = s.value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut ss = Kahan::new();
    for &v in values {
        ss.add((v - mean) * (v - mean));
    }
    (mean, (ss.value() / (n - 1.0)).sqrt() / n.sqrt())
}
