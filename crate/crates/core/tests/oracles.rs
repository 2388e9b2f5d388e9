use std::collections::HashSet;

use num_complex::Complex64;
use proptest::prelude::*;
use ulab::norms::{self, Method};
use ulab::patterns;
use ulab::phase::{weak_gowers_values, WeakGowersOptions};
use ulab::sieve::{build_table, sieve_liouville, sieve_moebius, sieve_von_mangoldt, MultSpec, TableCache};

/// Prime factorization by trial division, exponents included.
fn trial_factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn naive_liouville(n: u64) -> f64 {
    let omega: u32 = trial_factor(n).iter().map(|&(_, e)| e).sum();
    if omega % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn naive_moebius(n: u64) -> f64 {
    let f = trial_factor(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0.0
    } else if f.len() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn naive_von_mangoldt(n: u64) -> f64 {
    match trial_factor(n).as_slice() {
        [(p, _)] => (*p as f64).ln(),
        _ => 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sieves_match_trial_division(start in 1u64..5_000_000, len in 1u64..3000) {
        let end = start + len - 1;
        let l = sieve_liouville(start, end).unwrap();
        let m = sieve_moebius(start, end).unwrap();
        let v = sieve_von_mangoldt(start, end).unwrap();
        for n in start..=end {
            prop_assert_eq!(l.get_real(n as i64), naive_liouville(n));
            prop_assert_eq!(m.get_real(n as i64), naive_moebius(n));
            prop_assert!((v.get_real(n as i64) - naive_von_mangoldt(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_count_matches_hash_set(k in 1usize..7, n in 1u64..4000) {
        prop_assume!(n >= k as u64);
        let got = patterns::sign_patterns(k, n).unwrap();
        let lam: Vec<i8> = (1..=n + k as u64).map(|m| naive_liouville(m) as i8).collect();
        let set: HashSet<&[i8]> = (0..n as usize).map(|i| &lam[i..i + k]).collect();
        prop_assert_eq!(got.count, set.len());
    }

    #[test]
    fn gowers_norm_bounded_by_one(seed in any::<u64>(), h in 1usize..24, k in 0usize..3) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<Complex64> = (0..h)
            .map(|_| Complex64::from_polar(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..6.3)))
            .collect();
        let v = norms::gowers_normalized(&f, k, Method::Recursive).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }
}

#[test]
fn chowla_two_shifts_matches_naive_sum() {
    let (x, eps) = (3000u64, 0.3);
    let hmax = patterns::short_range(x, eps);
    let mut total = 0.0;
    for h in 1..=hmax {
        let s: f64 = (1..=x).map(|n| naive_liouville(n) * naive_liouville(n + 2 * h)).sum();
        total += (s / x as f64).abs();
    }
    let got = patterns::chowla_average(&[0, 2], x, eps, false).unwrap();
    assert!((got.value - total / hmax as f64).abs() < 1e-12);
}

#[test]
fn quadratic_phase_has_unit_u3_norm() {
    let f: Vec<Complex64> = (0..30)
        .map(|n| Complex64::from_polar(1.0, std::f64::consts::TAU * 0.37 * (n * n) as f64))
        .collect();
    let v = norms::gowers_normalized(&f, 2, Method::Recursive).unwrap();
    assert!((v - 1.0).abs() < 1e-9, "{v}");
    let u2 = norms::gowers_normalized(&f, 1, Method::Recursive).unwrap();
    assert!(u2 < 0.9, "{u2}");
}

#[test]
fn weak_norm_sees_planted_phase() {
    let alpha = 0.123;
    let f: Vec<Complex64> = (0..40)
        .map(|n| Complex64::from_polar(1.0, std::f64::consts::TAU * alpha * n as f64))
        .collect();
    let opts = WeakGowersOptions {
        sigma: 0.01,
        ..WeakGowersOptions::default()
    };
    let r = weak_gowers_values(&f, 0, 1, &opts).unwrap();
    assert!(r.value > 1.0 - r.guarantee - 1e-9, "{} {}", r.value, r.guarantee);
    let mean = (f.iter().sum::<Complex64>() / 40.0).norm();
    assert!(r.value >= mean);
}

#[test]
fn cache_returns_identical_table() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TableCache::new(dir.path());
    let a = cache.get_or_build(&MultSpec::Moebius, 100, 5000).unwrap();
    let b = cache.get_or_build(&MultSpec::Moebius, 100, 5000).unwrap();
    assert!(cache.path_for(&MultSpec::Moebius, 100, 5000).exists());
    assert_eq!(a, b);
    assert_eq!(a, build_table(&MultSpec::Moebius, 100, 5000).unwrap());
}
