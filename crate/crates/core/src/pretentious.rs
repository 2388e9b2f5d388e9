//! Dirichlet characters, the pretentious distance between multiplicative
//! functions, and the twisted-character score `M(f; X, Q)`.
//!
//! The distance between two 1-bounded multiplicative functions up to `X` is
//!
//! ```text
//! D(f, g; X)^2 = sum_{p <= X} (1 - Re f(p) conj(g(p))) / p
//! ```
//!
//! and `M(f; X, Q)` is its infimum over `g(n) = chi(n) n^{it}` with `chi` of
//! modulus `q <= Q` and `|t| <= X`.

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;

use crate::arith::{factorize, primes_up_to, root_of_unity, totient, Kahan};
use crate::error::{Error, Result};
use crate::sieve::MultSpec;

/// A Dirichlet character modulo `modulus`, stored as its value table on
/// `[0, modulus)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletCharacter {
    modulus: u64,
    index: usize,
    values: Vec<Complex64>,
}

impl DirichletCharacter {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Position in the enumeration returned by [`characters_mod`]; 0 is principal.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn eval(&self, n: u64) -> Complex64 {
        self.values[(n % self.modulus) as usize]
    }

    /// `chi(n)` for negative arguments as well, via `n mod q`.
    #[inline]
    pub fn eval_signed(&self, n: i64) -> Complex64 {
        self.values[n.rem_euclid(self.modulus as i64) as usize]
    }

    pub fn is_principal(&self) -> bool {
        self.index == 0
    }
}

/// One cyclic factor of `(Z/qZ)^x`: residues mod `modulus` with a discrete
/// logarithm table of the given order.
struct CyclicFactor {
    modulus: u64,
    order: u64,
    dlog: Vec<Option<u64>>,
}

fn primitive_root_prime_power(p: u64, e: u32) -> u64 {
    let phi_p = p - 1;
    let prime_factors: Vec<u64> = factorize(phi_p).into_iter().map(|(r, _)| r).collect();
    let g = (2..p)
        .find(|&g| prime_factors.iter().all(|&r| pow_mod(g, phi_p / r, p) != 1))
        .unwrap_or(1);
    if e == 1 {
        return g;
    }
    // A primitive root mod p lifts to all p^e unless g^(p-1) = 1 mod p^2.
    if pow_mod(g, phi_p, p * p) == 1 {
        g + p
    } else {
        g
    }
}

fn pow_mod(b: u64, mut e: u64, m: u64) -> u64 {
    let m128 = m as u128;
    let mut r = 1u128 % m128;
    let mut b128 = b as u128 % m128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b128 % m128;
        }
        b128 = b128 * b128 % m128;
        e >>= 1;
    }
    r as u64
}

fn cyclic_from_generator(modulus: u64, generator: u64, order: u64) -> CyclicFactor {
    let mut dlog = vec![None; modulus as usize];
    let mut x = 1 % modulus;
    for k in 0..order {
        dlog[x as usize] = Some(k);
        x = x * generator % modulus;
    }
    CyclicFactor {
        modulus,
        order,
        dlog,
    }
}

fn cyclic_factors(q: u64) -> Vec<CyclicFactor> {
    let mut out = Vec::new();
    for (p, e) in factorize(q) {
        let pe = p.pow(e);
        if p == 2 {
            match e {
                1 => {}
                2 => out.push(cyclic_from_generator(4, 3, 2)),
                _ => {
                    // n = (-1)^a 5^b mod 2^e.
                    let mut sign = vec![None; pe as usize];
                    let mut five = vec![None; pe as usize];
                    let order5 = pe / 4;
                    let mut x = 1u64;
                    for b in 0..order5 {
                        sign[x as usize] = Some(0);
                        sign[(pe - x) as usize] = Some(1);
                        five[x as usize] = Some(b);
                        five[(pe - x) as usize] = Some(b);
                        x = x * 5 % pe;
                    }
                    out.push(CyclicFactor {
                        modulus: pe,
                        order: 2,
                        dlog: sign,
                    });
                    out.push(CyclicFactor {
                        modulus: pe,
                        order: order5,
                        dlog: five,
                    });
                }
            }
        } else {
            let g = primitive_root_prime_power(p, e);
            out.push(cyclic_from_generator(pe, g, pe / p * (p - 1)));
        }
    }
    out
}

/// All `phi(q)` Dirichlet characters modulo `q`, principal character first.
///
/// Characters are indexed in mixed radix over the cyclic factors of
/// `(Z/qZ)^x` (odd prime powers via a primitive root, powers of two via the
/// `{+-1} x <5>` decomposition), first factor least significant.
pub fn characters_mod(q: u64) -> Result<Vec<DirichletCharacter>> {
    if q == 0 {
        return Err(Error::InvalidArgument("modulus must be >= 1".into()));
    }
    let factors = cyclic_factors(q);
    let count: u64 = factors.iter().map(|f| f.order).product();
    debug_assert_eq!(count, totient(q));
    let common = factors.iter().fold(1u64, |acc, f| acc.lcm(&f.order));

    // Discrete logs of each residue, or None when gcd(n, q) > 1.
    let logs: Vec<Option<Vec<u64>>> = (0..q)
        .map(|n| {
            if n.gcd(&q) != 1 {
                return None;
            }
            Some(
                factors
                    .iter()
                    .map(|f| f.dlog[(n % f.modulus) as usize].expect("unit has a log"))
                    .collect(),
            )
        })
        .collect();

    let mut chars = Vec::with_capacity(count as usize);
    for index in 0..count {
        let mut digits = Vec::with_capacity(factors.len());
        let mut rest = index;
        for f in &factors {
            digits.push(rest % f.order);
            rest /= f.order;
        }
        let values = logs
            .iter()
            .map(|l| match l {
                None => Complex64::new(0.0, 0.0),
                Some(l) => {
                    let num: u64 = factors
                        .iter()
                        .zip(&digits)
                        .zip(l)
                        .map(|((f, &k), &lg)| (k * lg % f.order) * (common / f.order))
                        .sum();
                    root_of_unity((num % common) as i64, common)
                }
            })
            .collect();
        chars.push(DirichletCharacter {
            modulus: q,
            index: index as usize,
            values,
        });
    }
    Ok(chars)
}

/// The character with the given index modulo `q`.
pub fn character(q: u64, index: usize) -> Result<DirichletCharacter> {
    let mut all = characters_mod(q)?;
    if index >= all.len() {
        return Err(Error::InvalidCharacter {
            modulus: q,
            index,
            count: all.len(),
        });
    }
    Ok(all.swap_remove(index))
}

/// `D(f, g; X)` with `f, g` given on primes.
pub fn pretentious_distance<F, G>(f: F, g: G, x: u64) -> Result<f64>
where
    F: Fn(u64) -> Complex64,
    G: Fn(u64) -> Complex64,
{
    if x < 2 {
        return Err(Error::InvalidArgument(format!("X = {x} must be >= 2")));
    }
    let mut acc = Kahan::new();
    for p in primes_up_to(x) {
        let z = f(p) * g(p).conj();
        acc.add((1.0 - z.re) / p as f64);
    }
    Ok(acc.value().max(0.0).sqrt())
}

/// `chi(p) p^{it}` as a function on primes.
pub fn twisted_character(chi: &DirichletCharacter, t: f64) -> impl Fn(u64) -> Complex64 + '_ {
    move |p| {
        let c = chi.eval(p);
        if c == Complex64::new(0.0, 0.0) {
            c
        } else {
            c * Complex64::from_polar(1.0, t * (p as f64).ln())
        }
    }
}

/// Result of the `M(f; X, Q)` search.
#[derive(Clone, Debug, PartialEq)]
pub struct MScore {
    /// `D(f, chi n^{it}; X)` at the reported minimiser.
    pub value: f64,
    pub argmin_t: f64,
    /// `(q, index)` of the minimising character.
    pub argmin_character: (u64, usize),
}

/// Search parameters for [`m_score`].
#[derive(Clone, Debug)]
pub struct MScoreOptions {
    /// Range of `t` searched is `|t| <= t_max`; defaults to `X`.
    pub t_max: Option<f64>,
    /// Upper bound on `grid points * primes` work.
    pub budget: u128,
}

impl Default for MScoreOptions {
    fn default() -> Self {
        MScoreOptions {
            t_max: None,
            budget: 1u128 << 36,
        }
    }
}

/// Step count of one rotation chunk; rotations are reseeded exactly at the
/// start of each chunk.
const T_CHUNK: usize = 512;

const BIN_LCM_LIMIT: u64 = 1 << 16;

struct Candidate {
    d2: f64,
    q: u64,
    index: usize,
    t: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        if self.d2 != other.d2 {
            return self.d2 < other.d2;
        }
        (self.q, self.index, self.t.abs(), self.t) < (other.q, other.index, other.t.abs(), other.t)
    }
}

/// `M(f; X, Q)`: minimise `D(f, chi n^{it}; X)` over every character of
/// modulus `q <= Q` and `t` on the grid `{0, +-t_resolution, ...}` with
/// `|t| <= t_max`, then refine `t` by golden-section search around the grid
/// minimiser.
///
/// `|d/dt D^2| <= sum_{p <= X} log p / p <= 2 log X`, so a grid spacing of
/// `eps / (2 log X)` keeps the grid error in `D^2` below `eps`.
pub fn m_score(f: &MultSpec, x: u64, q_max: u64, t_resolution: f64) -> Result<MScore> {
    m_score_with(f, x, q_max, t_resolution, &MScoreOptions::default())
}

pub fn m_score_with(
    f: &MultSpec,
    x: u64,
    q_max: u64,
    t_resolution: f64,
    opts: &MScoreOptions,
) -> Result<MScore> {
    if q_max < 1 {
        return Err(Error::InvalidArgument("Q must be >= 1".into()));
    }
    if !(t_resolution > 0.0) {
        return Err(Error::InvalidArgument("t_resolution must be > 0".into()));
    }
    if x < 2 {
        return Err(Error::InvalidArgument(format!("X = {x} must be >= 2")));
    }
    let t_max = opts.t_max.unwrap_or(x as f64);
    let steps = (t_max / t_resolution).floor() as i64;
    let primes = primes_up_to(x);
    let fp: Vec<Complex64> = primes
        .iter()
        .map(|&p| f.prime_value(p))
        .collect::<Result<_>>()?;

    let lcm = (1..=q_max).try_fold(1u64, |acc, q| {
        let l = acc.lcm(&q);
        (l <= BIN_LCM_LIMIT).then_some(l)
    });
    // Each bin modulus is paired with the moduli whose characters it serves.
    let bin_groups: Vec<(u64, Vec<u64>)> = match lcm {
        Some(l) => vec![(l, (1..=q_max).collect())],
        None => (1..=q_max).map(|q| (q, vec![q])).collect(),
    };
    let grid_points = (2 * steps + 1) as u128;
    let needed = grid_points * primes.len() as u128 * bin_groups.len() as u128;
    if needed > opts.budget {
        return Err(Error::BudgetExceeded {
            needed,
            budget: opts.budget,
        });
    }

    let chars: Vec<Vec<DirichletCharacter>> = (1..=q_max)
        .map(characters_mod)
        .collect::<Result<_>>()?;
    let inv_p_sum = {
        let mut k = Kahan::new();
        for &p in &primes {
            k.add(1.0 / p as f64);
        }
        k.value()
    };
    let logs: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
    let weights: Vec<Complex64> = fp
        .iter()
        .zip(&primes)
        .map(|(z, &p)| z / p as f64)
        .collect();

    let n_chunks = ((2 * steps + 1) as usize).div_ceil(T_CHUNK);
    let best = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let m0 = -steps + (c * T_CHUNK) as i64;
            let m1 = (m0 + T_CHUNK as i64 - 1).min(steps);
            scan_chunk(
                m0,
                m1,
                t_resolution,
                &primes,
                &logs,
                &weights,
                &bin_groups,
                &chars,
                inv_p_sum,
            )
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None::<Candidate>, |acc, c| match acc {
            Some(a) if !c.better_than(&a) => Some(a),
            _ => Some(c),
        })
        .expect("grid is nonempty");

    // Golden-section refinement of t at the grid minimiser.
    let chi = &chars[(best.q - 1) as usize][best.index];
    let d2_at = |t: f64| -> f64 {
        let mut k = Kahan::new();
        for ((&p, w), &lp) in primes.iter().zip(&weights).zip(&logs) {
            let c = chi.eval(p);
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            // f(p) conj(chi(p) p^{it}) / p
            let z = w * c.conj() * Complex64::from_polar(1.0, -t * lp);
            k.add(z.re);
        }
        inv_p_sum - k.value()
    };
    let lo = (best.t - t_resolution).max(-t_max);
    let hi = (best.t + t_resolution).min(t_max);
    let (t_ref, d2_ref) = golden_min(&d2_at, lo, hi, 60);
    let grid_d2 = d2_at(best.t);
    let (t, d2) = if d2_ref < grid_d2 {
        (t_ref, d2_ref)
    } else {
        (best.t, grid_d2)
    };
    Ok(MScore {
        value: d2.max(0.0).sqrt(),
        argmin_t: t,
        argmin_character: (best.q, best.index),
    })
}

#[allow(clippy::too_many_arguments)]
fn scan_chunk(
    m0: i64,
    m1: i64,
    dt: f64,
    primes: &[u64],
    logs: &[f64],
    weights: &[Complex64],
    bin_groups: &[(u64, Vec<u64>)],
    chars: &[Vec<DirichletCharacter>],
    inv_p_sum: f64,
) -> Candidate {
    // z_p = f(p) p^{-it} / p, rotated by p^{-i dt} per step.
    let t0 = m0 as f64 * dt;
    let mut z: Vec<Complex64> = weights
        .iter()
        .zip(logs)
        .map(|(w, &lp)| w * Complex64::from_polar(1.0, -t0 * lp))
        .collect();
    let rot: Vec<Complex64> = logs
        .iter()
        .map(|&lp| Complex64::from_polar(1.0, -dt * lp))
        .collect();

    let mut best = Candidate {
        d2: f64::INFINITY,
        q: u64::MAX,
        index: usize::MAX,
        t: 0.0,
    };
    let mut bins: Vec<Vec<Complex64>> = bin_groups
        .iter()
        .map(|(b, _)| vec![Complex64::new(0.0, 0.0); *b as usize])
        .collect();
    // Residues actually hit by primes, per bin modulus.
    let active: Vec<Vec<usize>> = bin_groups
        .iter()
        .map(|(b, _)| {
            let mut r: Vec<usize> = primes.iter().map(|&p| (p % b) as usize).collect();
            r.sort_unstable();
            r.dedup();
            r
        })
        .collect();
    let mut folded: Vec<Vec<Complex64>> = chars
        .iter()
        .enumerate()
        .map(|(i, _)| vec![Complex64::new(0.0, 0.0); i + 1])
        .collect();
    for m in m0..=m1 {
        let t = m as f64 * dt;
        for (((b, moduli), bin), act) in bin_groups.iter().zip(bins.iter_mut()).zip(&active) {
            for &r in act {
                bin[r] = Complex64::new(0.0, 0.0);
            }
            for (zp, &p) in z.iter().zip(primes) {
                bin[(p % b) as usize] += zp;
            }
            for &q in moduli {
                debug_assert_eq!(b % q, 0);
                // Fold bins mod b down to residues mod q.
                let fq = &mut folded[(q - 1) as usize];
                fq.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for &r in act {
                    fq[r % q as usize] += bin[r];
                }
                for chi in &chars[(q - 1) as usize] {
                    let s: f64 = chi
                        .values()
                        .iter()
                        .zip(fq.iter())
                        .map(|(c, v)| c.re * v.re + c.im * v.im)
                        .sum();
                    let cand = Candidate {
                        d2: inv_p_sum - s,
                        q,
                        index: chi.index(),
                        t,
                    };
                    if cand.better_than(&best) {
                        best = cand;
                    }
                }
            }
        }
        for (zp, r) in z.iter_mut().zip(&rot) {
            *zp *= r;
        }
    }
    best
}

/// Golden-section minimisation on `[lo, hi]`; returns `(argmin, min)`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn liouville_on_primes(_: u64) -> Complex64 {
        Complex64::new(-1.0, 0.0)
    }

    fn one(_: u64) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn modulus_one_and_four() {
        let c1 = characters_mod(1).unwrap();
        assert_eq!(c1.len(), 1);
        assert_eq!(c1[0].eval(12345), Complex64::new(1.0, 0.0));

        let c4 = characters_mod(4).unwrap();
        assert_eq!(c4.len(), 2);
        assert!(c4[0].is_principal());
        assert_eq!(c4[0].eval(3), Complex64::new(1.0, 0.0));
        assert_eq!(c4[1].eval(3), Complex64::new(-1.0, 0.0));
        assert_eq!(c4[1].eval(2), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn orthogonality_up_to_fifty() {
        for q in 1..=50u64 {
            let chars = characters_mod(q).unwrap();
            assert_eq!(chars.len() as u64, totient(q), "q = {q}");
            for (i, a) in chars.iter().enumerate() {
                assert_eq!(a.eval(1), Complex64::new(1.0, 0.0));
                for (j, b) in chars.iter().enumerate() {
                    let s: Complex64 = (1..=q).map(|n| a.eval(n) * b.eval(n).conj()).sum();
                    let expect = if i == j { totient(q) as f64 } else { 0.0 };
                    assert!((s - expect).norm() < 1e-9, "q={q} i={i} j={j} s={s}");
                }
            }
        }
    }

    #[test]
    fn characters_are_multiplicative() {
        for q in [8u64, 9, 12, 15, 16, 32, 45] {
            for chi in characters_mod(q).unwrap() {
                for m in 0..q {
                    for n in 0..q {
                        let lhs = chi.eval(m * n);
                        let rhs = chi.eval(m) * chi.eval(n);
                        assert!((lhs - rhs).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_character_index() {
        assert!(matches!(
            character(5, 4),
            Err(Error::InvalidCharacter { count: 4, .. })
        ));
        assert!(characters_mod(0).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(pretentious_distance(one, one, 1000).unwrap(), 0.0);
        let d = pretentious_distance(liouville_on_primes, one, 10).unwrap();
        let expect = 2.0 * (1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0);
        assert!((d * d - expect).abs() < 1e-12);
        let chi = character(1, 0).unwrap();
        let g = twisted_character(&chi, 0.0);
        let lam_twisted = |p| liouville_on_primes(p) * g(p);
        assert_eq!(
            pretentious_distance(liouville_on_primes, lam_twisted, 500).unwrap(),
            0.0
        );
        assert!(pretentious_distance(one, one, 1).is_err());
    }

    #[test]
    fn m_score_finds_model_function() {
        let spec = MultSpec::CharacterTwist {
            modulus: 1,
            character_index: 0,
            t: 2.5,
        };
        let s = m_score(&spec, 1000, 4, 0.5).unwrap();
        assert!(s.value < 1e-6, "{s:?}");
        assert_eq!(s.argmin_character, (1, 0));
        assert!((s.argmin_t - 2.5).abs() < 1e-6);

        // f vanishes at p = 3, which the distance charges as 1/3.
        let spec = MultSpec::CharacterTwist {
            modulus: 3,
            character_index: 1,
            t: -1.0,
        };
        let s = m_score(&spec, 1000, 4, 0.5).unwrap();
        assert!((s.value - (1.0f64 / 3.0).sqrt()).abs() < 1e-9, "{s:?}");
        assert_eq!(s.argmin_character, (3, 1));
    }

    #[test]
    fn m_score_rejects_bad_input() {
        assert!(m_score(&MultSpec::Liouville, 100, 0, 1.0).is_err());
        assert!(m_score(&MultSpec::Liouville, 100, 2, 0.0).is_err());
        assert!(m_score(&MultSpec::VonMangoldt, 100, 2, 1.0).is_err());
        let opts = MScoreOptions {
            t_max: None,
            budget: 10,
        };
        assert!(matches!(
            m_score_with(&MultSpec::Liouville, 100, 2, 1.0, &opts),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
