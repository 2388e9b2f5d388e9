//! Weak Gowers norms, Weyl-style rationalization of phase coefficients, and
//! the Archimedean fit `P = eps + (T / 2 pi) log t + gamma`.
//!
//! The weak norm of `f` on `[x, x + H)` is
//!
//! ```text
//! u^{k+1}(f) = sup_P (1/H) |sum_{x <= n < x+H} f(n) e(-P(n))|
//! ```
//!
//! over real polynomials of degree at most `k`. Phases are written around a
//! base point `t0` in the interval as `P(t) = sum_j alpha_j (t - t0)^j`.
//!
//! ## Exhaustive search
//!
//! With `t0` the middle of the interval and `m = n - t0`, moving `alpha_j` by
//! `d` changes the normalized sum by at most `L_j |d|` where
//! `L_j = (2 pi / H) sum_n |m|^j`. Coordinate `j` is searched on `M_j` equally
//! spaced points of `[0, 1)` with `M_j` chosen so that
//! `sum_j L_j / (2 M_j) <= 2 pi (k + 1) sigma`; that bound is the reported
//! guarantee. The `alpha_1` axis is handled by one FFT of length `M_1` per
//! setting of the higher coordinates.

use std::f64::consts::{PI, TAU};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::arith::{dist_to_int, e, Kahan};
use crate::error::{Error, Result};
use crate::poly::{int, real_roots, round_half_to_zero, to_binomial_basis, Interval, RationalPoly};
use crate::pretentious::golden_min;
use crate::sieve::FunctionTable;

/// Default cap on the number of grid points in exhaustive mode.
pub const DEFAULT_GRID_BUDGET: u128 = 1_000_000_000;

/// `P(t) = sum_j alphas[j] (t - t0)^j`, each `alpha_j` in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub k: usize,
    pub t0: i64,
    pub alphas: Vec<f64>,
}

impl PhasePoint {
    pub fn new(t0: i64, alphas: Vec<f64>) -> Self {
        assert!(!alphas.is_empty());
        let alphas = alphas.into_iter().map(|a| a.rem_euclid(1.0)).collect::<Vec<_>>();
        PhasePoint {
            k: alphas.len() - 1,
            t0,
            alphas,
        }
    }

    pub fn eval(&self, n: i64) -> f64 {
        let m = (n - self.t0) as f64;
        self.alphas.iter().rev().fold(0.0, |acc, a| acc * m + a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakGowersOptions {
    pub mode: SearchMode,
    pub sigma: f64,
    /// Random starts in heuristic mode.
    pub restarts: usize,
    pub seed: u64,
    pub grid_budget: u128,
}

impl Default for WeakGowersOptions {
    fn default() -> Self {
        WeakGowersOptions {
            mode: SearchMode::Exhaustive,
            sigma: 0.05,
            restarts: 8,
            seed: 0,
            grid_budget: DEFAULT_GRID_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakGowersResult {
    pub value: f64,
    pub argmax: PhasePoint,
    /// The true supremum is at most `value + guarantee`; infinite for
    /// heuristic searches.
    pub guarantee: f64,
}

/// `(1/H) |sum f(n) e(-P(n))|` over `n = x..x+H-1`.
pub fn phase_correlation(values: &[Complex64], x: i64, p: &PhasePoint) -> f64 {
    let mut acc = Kahan::new_complex();
    for (i, v) in values.iter().enumerate() {
        acc.add(v * e(-p.eval(x + i as i64)));
    }
    acc.value().norm() / values.len() as f64
}

/// Grid sizes `M_1..M_k` for the exhaustive search.
pub fn grid_shape(h: usize, k: usize, sigma: f64) -> Vec<usize> {
    let t0 = (h as i64 - 1) / 2;
    (1..=k)
        .map(|j| {
            let lip: f64 = TAU / h as f64 * (0..h as i64).map(|i| ((i - t0).abs() as f64).powi(j as i32)).sum::<f64>();
            let m = (lip * k as f64 / (4.0 * PI * sigma * (k + 1) as f64)).ceil();
            (m as usize).max(1)
        })
        .collect()
}

/// `||f||_{u^{k+1}[x, x+H)}` for a table.
pub fn weak_gowers(table: &FunctionTable, x: i64, h: usize, k: usize, opts: &WeakGowersOptions) -> Result<WeakGowersResult> {
    if h < 1 {
        return Err(Error::InvalidArgument("H must be at least 1".into()));
    }
    weak_gowers_values(&table.window(x, h), x, k, opts)
}

/// As [`weak_gowers`], for `values[i] = f(x + i)`.
pub fn weak_gowers_values(values: &[Complex64], x: i64, k: usize, opts: &WeakGowersOptions) -> Result<WeakGowersResult> {
    let h = values.len();
    if h < 1 {
        return Err(Error::InvalidArgument("H must be at least 1".into()));
    }
    if !(opts.sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let t0 = x + (h as i64 - 1) / 2;
    let gap = TAU * (k + 1) as f64 * opts.sigma;
    if k == 0 {
        let p = PhasePoint::new(t0, vec![0.0]);
        let value = phase_correlation(values, x, &p);
        return Ok(WeakGowersResult {
            value,
            argmax: p,
            guarantee: 0.0,
        });
    }
    match opts.mode {
        SearchMode::Exhaustive => {
            let shape = grid_shape(h, k, opts.sigma);
            let size: u128 = shape.iter().map(|&m| m as u128).product();
            if size > opts.grid_budget {
                return Err(Error::BudgetExceeded {
                    needed: size,
                    budget: opts.grid_budget,
                });
            }
            let (grid_value, alphas) = grid_search(values, x, t0, &shape);
            let start = PhasePoint::new(t0, alphas);
            let steps: Vec<f64> = shape.iter().map(|&m| 1.0 / m as f64).collect();
            let (value, argmax) = refine(values, x, start, grid_value, &steps);
            Ok(WeakGowersResult {
                value,
                argmax,
                guarantee: gap,
            })
        }
        SearchMode::Heuristic => {
            let shape: Vec<usize> = grid_shape(h, k, opts.sigma).into_iter().map(|m| m.min(4096)).collect();
            let steps: Vec<f64> = shape.iter().map(|&m| 1.0 / m as f64).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut best: Option<(f64, PhasePoint)> = None;
            for _ in 0..opts.restarts.max(1) {
                let mut alphas = vec![0.0];
                alphas.extend((0..k).map(|_| rng.gen::<f64>()));
                let mut p = PhasePoint::new(t0, alphas);
                let mut v = phase_correlation(values, x, &p);
                for _ in 0..SWEEPS {
                    for j in 1..=k {
                        // Coarse scan of the whole circle, then a local search.
                        let m = shape[j - 1];
                        let mut trial = p.clone();
                        for i in 0..m {
                            trial.alphas[j] = i as f64 / m as f64;
                            let tv = phase_correlation(values, x, &trial);
                            if tv > v {
                                v = tv;
                                p.alphas[j] = trial.alphas[j];
                            }
                        }
                    }
                    let (rv, rp) = refine_sweep(values, x, p, v, &steps);
                    v = rv;
                    p = rp;
                }
                if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
                    best = Some((v, p));
                }
            }
            let (value, argmax) = best.expect("at least one restart");
            Ok(WeakGowersResult {
                value,
                argmax,
                guarantee: f64::INFINITY,
            })
        }
    }
}

const SWEEPS: usize = 3;
const GOLDEN_ITERS: usize = 40;

fn refine(values: &[Complex64], x: i64, mut p: PhasePoint, mut v: f64, steps: &[f64]) -> (f64, PhasePoint) {
    for _ in 0..SWEEPS {
        (v, p) = refine_sweep(values, x, p, v, steps);
    }
    (v, p)
}

/// One coordinate-descent sweep: golden-section search of each `alpha_j`
/// within one grid step of its current value. Never lowers the value.
fn refine_sweep(values: &[Complex64], x: i64, mut p: PhasePoint, mut v: f64, steps: &[f64]) -> (f64, PhasePoint) {
    for j in 1..=p.k {
        let centre = p.alphas[j];
        let objective = |a: f64| {
            let mut q = p.clone();
            q.alphas[j] = a;
            -phase_correlation(values, x, &q)
        };
        let (a, neg) = golden_min(&objective, centre - steps[j - 1], centre + steps[j - 1], GOLDEN_ITERS);
        if -neg > v {
            v = -neg;
            p.alphas[j] = a.rem_euclid(1.0);
        }
    }
    (v, p)
}

/// Exhaustive grid; returns the best normalized value and its alphas,
/// breaking ties toward the lexicographically smallest `(alpha_k, ..., alpha_1)`.
fn grid_search(values: &[Complex64], x: i64, t0: i64, shape: &[usize]) -> (f64, Vec<f64>) {
    let k = shape.len();
    let h = values.len() as f64;
    let m1 = shape[0];
    let ms: Vec<i64> = (0..values.len() as i64).map(|i| x + i - t0).collect();
    let fold1: Vec<usize> = ms.iter().map(|&m| m.rem_euclid(m1 as i64) as usize).collect();
    // m^j mod M_j and the table of e(-r / M_j), for j >= 2.
    let powers: Vec<Vec<u64>> = (2..=k)
        .map(|j| {
            let mj = shape[j - 1] as i128;
            ms.iter().map(|&m| (m as i128).pow(j as u32).rem_euclid(mj) as u64).collect()
        })
        .collect();
    let roots: Vec<Vec<Complex64>> = (2..=k)
        .map(|j| {
            let mj = shape[j - 1];
            (0..mj).map(|r| e(-(r as f64) / mj as f64)).collect()
        })
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m1);
    let outer = if k >= 2 { shape[k - 1] } else { 1 };
    let inner_count: usize = if k >= 3 { shape[1..k - 1].iter().product() } else { 1 };

    let per_outer: Vec<(f64, Vec<usize>)> = (0..outer)
        .into_par_iter()
        .map(|top| {
            let mut buf = vec![Complex64::new(0.0, 0.0); m1];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            let mut best = (-1.0, Vec::new());
            for inner in 0..inner_count {
                // Mixed-radix digits for alpha_2..alpha_{k-1}, alpha_2 fastest.
                let mut idx = vec![0usize; k + 1];
                let mut rem = inner;
                for j in 2..k {
                    idx[j] = rem % shape[j - 1];
                    rem /= shape[j - 1];
                }
                if k >= 2 {
                    idx[k] = top;
                }
                buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
                for (n, v) in values.iter().enumerate() {
                    let mut w = *v;
                    for j in 2..=k {
                        let mj = shape[j - 1] as u64;
                        let r = (idx[j] as u64 * powers[j - 2][n]) % mj;
                        w *= roots[j - 2][r as usize];
                    }
                    buf[fold1[n]] += w;
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, z) in buf.iter().enumerate() {
                    let val = z.norm() / h;
                    if val > best.0 {
                        idx[1] = a;
                        best = (val, idx.clone());
                    }
                }
            }
            best
        })
        .collect();
    // Candidates arrive in increasing (alpha_k, ..., alpha_1) order.
    let mut best = (-1.0, Vec::new());
    for cand in per_outer {
        if cand.0 > best.0 {
            best = cand;
        }
    }
    let mut alphas = vec![0.0; k + 1];
    for j in 1..=k {
        alphas[j] = best.1[j] as f64 / shape[j - 1] as f64;
    }
    (best.0, alphas)
}

/// `q` with `||q alpha_j|| <= c_j H^{-j}` for `j = 1..k`, and the nearest
/// integers `a_j` to `q alpha_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalApprox {
    pub q: u64,
    /// `a_0..a_k`.
    pub numerators: Vec<i64>,
    /// `||q alpha_j||` for `j = 0..k`.
    pub residuals: Vec<f64>,
}

/// Tolerance for coordinate `j >= 1`; a single entry applies to every `j`.
fn tolerance(c: &[f64], j: usize) -> f64 {
    if c.len() == 1 {
        c[0]
    } else {
        c[j - 1]
    }
}

/// Smallest `q` in `1..=Q` with `||q alpha_j|| <= c_j H^{-j}` for all `j >= 1`.
pub fn weyl_rationalize(pt: &PhasePoint, h: u64, q_max: u64, c: &[f64]) -> Option<RationalApprox> {
    assert!(q_max >= 1, "Q must be at least 1");
    assert!(c.len() == 1 || c.len() == pt.k, "one tolerance per coefficient");
    let hf = h as f64;
    (1..=q_max).find_map(|q| {
        let ok = (1..=pt.k).all(|j| dist_to_int(q as f64 * pt.alphas[j]) <= tolerance(c, j) * hf.powi(-(j as i32)));
        ok.then(|| RationalApprox {
            q,
            numerators: pt.alphas.iter().map(|a| (q as f64 * a).round() as i64).collect(),
            residuals: pt.alphas.iter().map(|a| dist_to_int(q as f64 * a)).collect(),
        })
    })
}

/// `P = eps + (T / 2 pi) log t + gamma` on an interval, with `gamma` mapping
/// the integers into `(1/q) Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchimedeanFit {
    pub t: f64,
    pub gamma: RationalPoly,
    pub eps_sup: f64,
    pub q: u64,
    centre: BigRational,
    /// `T / 2 pi` exactly as used.
    c: BigRational,
    /// `eps(centre + s) + c * tail(s / centre)` as a polynomial in `s`.
    smooth: RationalPoly,
}

/// `log(1 + u) - sum_{j=1}^{k} (-1)^{j-1} u^j / j`.
fn log_tail(u: f64, k: usize) -> f64 {
    if u.abs() > 0.5 {
        let head: f64 = (1..=k).map(|j| (-1f64).powi(j as i32 - 1) * u.powi(j as i32) / j as f64).sum();
        return u.ln_1p() - head;
    }
    let mut sum = 0.0;
    let mut j = k + 1;
    let mut term = u.powi(j as i32);
    while term.abs() > 1e-300 {
        let t = if j % 2 == 1 { term / j as f64 } else { -term / j as f64 };
        sum += t;
        if t.abs() <= 1e-18 * sum.abs() {
            break;
        }
        j += 1;
        term *= u;
    }
    sum
}

impl ArchimedeanFit {
    /// `P(t) - (T / 2 pi) log t - gamma(t)`, evaluated stably around the
    /// centre of the interval.
    pub fn remainder(&self, t: &BigRational) -> f64 {
        let s = t - &self.centre;
        let u = (&s / &self.centre).to_f64().unwrap_or(f64::NAN);
        let k = self.smooth.degree_bound();
        self.smooth.eval(&s).to_f64().unwrap_or(f64::NAN) - self.c.to_f64().unwrap_or(f64::NAN) * log_tail(u, k)
    }
}

fn rational_from_f64(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Fits `P` on `I` as `eps + (T / 2 pi) log t + gamma` with `gamma` having
/// binomial coefficients in `(1/q) Z`, trying every `q <= q_max` and keeping
/// the fit with the smallest `sup_I |eps|` (smallest `q` on ties).
///
/// For each `q` the top binomial coefficient `b_k` of `P` is split as
/// `n_k / q` plus the `k`-th derivative of `(T / 2 pi) log t` at the centre
/// `x` of `I`, which fixes `T`. The lower coefficients of `P` minus the
/// degree-`k` Taylor polynomial of `(T / 2 pi) log t` at `x` are rounded to
/// `(1/q) Z` to give `gamma`.
pub fn archimedean_fit(p: &RationalPoly, interval: &Interval, q_max: u64) -> Result<ArchimedeanFit> {
    if !interval.lo.is_positive() {
        return Err(Error::InvalidArgument("interval must lie in (0, inf)".into()));
    }
    if interval.hi <= interval.lo {
        return Err(Error::InvalidArgument("interval is empty".into()));
    }
    let Some(k) = p.degree().filter(|&d| d >= 1) else {
        return Err(Error::InvalidArgument("P must have degree at least 1".into()));
    };
    if q_max < 1 {
        return Err(Error::InvalidArgument("q_max must be at least 1".into()));
    }
    let p = RationalPoly::new(p.coeffs()[..=k].to_vec());
    let x = interval.midpoint();
    let base = BigRational::from_integer(round_half_to_zero(&x));
    let one = BigRational::one();
    let b_k = to_binomial_basis(&p, &one, &BigRational::zero())[k].clone();
    let log_x = rational_from_f64(x.to_f64().expect("finite").ln());
    // (k-1)! (-1)^{k-1} / x^k: the k-th derivative of log t at x.
    let mut kth = (1..k as i64).fold(one.clone(), |acc, i| acc * int(i));
    if k % 2 == 0 {
        kth = -kth;
    }
    let kth = kth / num_traits::pow(x.clone(), k);
    // Taylor polynomial of log t at x without its constant, in t.
    let mut taylor = RationalPoly::zero(k);
    let shift = RationalPoly::new(vec![-x.clone(), one.clone()]);
    let mut power = RationalPoly::from_ints(&[1]);
    for j in 1..=k {
        power = &power * &shift;
        let mut coef = one.clone() / (int(j as i64) * num_traits::pow(x.clone(), j));
        if j % 2 == 0 {
            coef = -coef;
        }
        taylor = &taylor + &power.scale(&coef);
    }
    let taylor = &taylor.with_degree_bound(k) + &RationalPoly::constant(log_x, k);

    let mut best: Option<ArchimedeanFit> = None;
    for q in 1..=q_max {
        let qr = BigRational::from_integer(BigInt::from(q));
        let n_k = round_half_to_zero(&(&b_k * &qr));
        let c = (&b_k - BigRational::from_integer(n_k) / &qr) / &kth;
        let residual = &p - &taylor.scale(&c);
        let coeffs = to_binomial_basis(&residual, &one, &base);
        let rounded: Vec<BigRational> = coeffs
            .iter()
            .map(|b| BigRational::from_integer(round_half_to_zero(&(b * &qr))) / &qr)
            .collect();
        let gamma = RationalPoly::from_binomial_basis(&rounded, &one, &base).with_degree_bound(k);
        let fit = finish_fit(&p, interval, &x, c, gamma, q, k);
        let better = match &best {
            None => true,
            Some(b) => fit.eps_sup < b.eps_sup * (1.0 - 1e-9) - 1e-15,
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("q_max >= 1"))
}

fn finish_fit(
    p: &RationalPoly,
    interval: &Interval,
    x: &BigRational,
    c: BigRational,
    gamma: RationalPoly,
    q: u64,
    k: usize,
) -> ArchimedeanFit {
    let d = p - &gamma;
    // smooth(s) = d(x + s) - c [log x + sum_{j<=k} (-1)^{j-1} (s/x)^j / j]
    let one = BigRational::one();
    let mut smooth = d.compose_affine(&one, x);
    let log_x = rational_from_f64(x.to_f64().expect("finite").ln());
    let mut head = RationalPoly::constant(log_x, k);
    for j in 1..=k {
        let mut coef = one.clone() / (int(j as i64) * num_traits::pow(x.clone(), j));
        if j % 2 == 0 {
            coef = -coef;
        }
        let mut mono = vec![BigRational::zero(); j + 1];
        mono[j] = coef;
        head = &head + &RationalPoly::new(mono).with_degree_bound(k);
    }
    smooth = &smooth - &head.scale(&c);
    let t = (c.to_f64().unwrap_or(f64::NAN)) * TAU;
    let mut fit = ArchimedeanFit {
        t,
        gamma,
        eps_sup: 0.0,
        q,
        centre: x.clone(),
        c: c.clone(),
        smooth,
    };
    // Critical points of eps: roots of t d'(t) - c.
    let crit = &(&RationalPoly::new(vec![BigRational::zero(), one]) * &d.derivative()) - &RationalPoly::constant(c, 0);
    let mut sup = fit.remainder(&interval.lo).abs().max(fit.remainder(&interval.hi).abs());
    match real_roots(&crit.strip(), &interval.lo, &interval.hi) {
        Some(roots) => {
            for r in roots {
                sup = sup.max(fit.remainder(&r).abs());
            }
        }
        None => {
            let len = interval.length();
            for i in 0..=4000 {
                let t = &interval.lo + &len * BigRational::new(i.into(), 4000.into());
                sup = sup.max(fit.remainder(&t).abs());
            }
        }
    }
    fit.eps_sup = sup;
    fit
}
