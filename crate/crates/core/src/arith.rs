//! Small integer and floating-point helpers shared by the other modules.

use std::f64::consts::TAU;
use std::ops::AddAssign;

use num_complex::Complex64;

/// `e(x) = exp(2 pi i x)`.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let (s, c) = (TAU * x).sin_cos();
    Complex64::new(c, s)
}

/// `e(num / den)` with the quarter turns returned exactly.
pub fn root_of_unity(num: i64, den: u64) -> Complex64 {
    assert!(den > 0);
    let r = num.rem_euclid(den as i64) as u64;
    if (4 * r) % den == 0 {
        return match 4 * r / den {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    e(r as f64 / den as f64)
}

/// Distance from `x` to the nearest integer.
#[inline]
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Sieve of Eratosthenes; all primes `<= n`.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Trial-division factorisation into `(prime, exponent)` pairs, primes ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    let f = factorize(n);
    f.len() == 1 && f[0].1 == 1
}

/// Euler's totient.
pub fn totient(n: u64) -> u64 {
    factorize(n)
        .into_iter()
        .fold(n, |acc, (p, _)| acc / p * (p - 1))
}

/// Von Mangoldt function of a single integer, by factoring.
pub fn von_mangoldt(n: u64) -> f64 {
    match factorize(n).as_slice() {
        [(p, _)] => (*p as f64).ln(),
        _ => 0.0,
    }
}

/// Total number of prime factors counted with multiplicity.
pub fn big_omega(n: u64) -> u32 {
    factorize(n).iter().map(|&(_, e)| e).sum()
}

/// Compensated (Kahan-Babuska) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan<T> {
    sum: T,
    comp: T,
}

impl Kahan<f64> {
    pub fn new() -> Self {
        Kahan { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for Kahan<f64> {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl Kahan<Complex64> {
    pub fn new_complex() -> Self {
        Kahan {
            sum: Complex64::new(0.0, 0.0),
            comp: Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    pub fn add(&mut self, x: Complex64) {
        let mut re = Kahan {
            sum: self.sum.re,
            comp: self.comp.re,
        };
        let mut im = Kahan {
            sum: self.sum.im,
            comp: self.comp.im,
        };
        re.add(x.re);
        im.add(x.im);
        self.sum = Complex64::new(re.sum, im.sum);
        self.comp = Complex64::new(re.comp, im.comp);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

impl AddAssign<Complex64> for Kahan<Complex64> {
    fn add_assign(&mut self, rhs: Complex64) {
        self.add(rhs);
    }
}

/// Parse integers written as `1000000`, `10^6`, `1e6` or `1_000_000`.
pub fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim().replace('_', "");
    if let Some((b, e)) = s.split_once('^') {
        let b: u64 = b.trim().parse().ok()?;
        let e: u32 = e.trim().parse().ok()?;
        return b.checked_pow(e);
    }
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let v: f64 = s.parse().ok()?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
        Some(v as u64)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorization_and_totient() {
        assert_eq!(factorize(360), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(factorize(1), vec![]);
        assert_eq!(totient(1), 1);
        assert_eq!(totient(6), 2);
        assert_eq!(totient(2520), 576);
        assert!(is_prime(7) && !is_prime(1) && !is_prime(9));
    }

    #[test]
    fn quarter_turns_are_exact() {
        assert_eq!(root_of_unity(1, 2), Complex64::new(-1.0, 0.0));
        assert_eq!(root_of_unity(3, 4), Complex64::new(0.0, -1.0));
        assert_eq!(root_of_unity(-1, 2), Complex64::new(-1.0, 0.0));
        assert!((root_of_unity(1, 3) - e(1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = Kahan::new();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn count_parsing() {
        assert_eq!(parse_count("10^6"), Some(1_000_000));
        assert_eq!(parse_count("1e4"), Some(10_000));
        assert_eq!(parse_count("1_000"), Some(1000));
        assert_eq!(parse_count("x"), None);
    }
}
