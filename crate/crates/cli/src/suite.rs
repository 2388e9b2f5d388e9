//! Fixed parameter ladders with pass/fail checks.

use std::str::FromStr;
use std::time::Instant;

use anyhow::bail;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ulab::nil::{self, LieElement, NilFunction};
use ulab::poly::{self, Interval, LocalPhase, RationalPoly};
use ulab::pretentious::pretentious_distance;
use ulab::sieve::MultSpec;

use crate::config::{HRule, Kind, NilParams, Params};
use crate::experiment::{self, fmt_f64, nilsequence_table, Context, ResultRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    DecayU2,
    DecayWeak,
    PretentiousGrowth,
    ChowlaDecay,
    NilDiscorrelation,
    AlgebraVerify,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::DecayU2,
        Suite::DecayWeak,
        Suite::PretentiousGrowth,
        Suite::ChowlaDecay,
        Suite::NilDiscorrelation,
        Suite::AlgebraVerify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::DecayU2 => "decay-u2",
            Suite::DecayWeak => "decay-weak",
            Suite::PretentiousGrowth => "pretentious-growth",
            Suite::ChowlaDecay => "chowla-decay",
            Suite::NilDiscorrelation => "nil-discorrelation",
            Suite::AlgebraVerify => "algebra-verify",
        }
    }
}

impl FromStr for Suite {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        match Suite::ALL.into_iter().find(|x| x.name() == s) {
            Some(x) => Ok(x),
            None => {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                bail!("unknown suite {s:?}; expected one of {}", names.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub rows: Vec<ResultRow>,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail,
        });
    }
}

const LADDER: [u64; 3] = [10_000, 100_000, 1_000_000];

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn column(rows: &[ResultRow], name: &str) -> Vec<f64> {
    rows.iter().filter_map(|r| r.value_f64(name)).collect()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" > ")
}

pub fn run_suite(suite: Suite, ctx: &Context) -> anyhow::Result<SuiteReport> {
    let mut rep = SuiteReport::default();
    match suite {
        Suite::DecayU2 => {
            let p = Params {
                x: LADDER.to_vec(),
                h: Some(HRule::Power(0.4)),
                k: vec![1],
                samples: Some(200),
                ..Params::default()
            };
            rep.rows = experiment::run(Kind::GowersAvg, &p, 1, ctx)?;
            let v = column(&rep.rows, "mean_norm");
            rep.check("U2 mean strictly decreasing in X", strictly_decreasing(&v), list(&v));
        }
        Suite::DecayWeak => {
            let p = Params {
                x: LADDER.to_vec(),
                h: Some(HRule::Absolute(48)),
                k: vec![2],
                sigma: Some(0.02),
                samples: Some(50),
                ..Params::default()
            };
            rep.rows = experiment::run(Kind::WeakGowers, &p, 1, ctx)?;
            let v = column(&rep.rows, "mean_value");
            rep.check("weak u3 mean strictly decreasing in X", strictly_decreasing(&v), list(&v));
        }
        Suite::PretentiousGrowth => {
            let p = Params {
                x: vec![1_000, 10_000, 100_000],
                q: Some(10),
                resolution: Some(1.0),
                ..Params::default()
            };
            rep.rows = experiment::run(Kind::Pretentious, &p, 0, ctx)?;
            let v = column(&rep.rows, "m_score");
            let ok = v.windows(2).all(|w| w[1] >= w[0]);
            rep.check("M(lambda; X, 10) nondecreasing in X", ok, list(&v).replace('>', "<="));
            let lam = MultSpec::Liouville;
            let d = pretentious_distance(|n| lam.prime_value(n).expect("prime"), |_| 1.0.into(), 10)?;
            let want = 2.0 * (1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0);
            rep.check(
                "D(lambda, 1; 10)^2 = 2(1/2 + 1/3 + 1/5 + 1/7)",
                (d * d - want).abs() <= 1e-12,
                format!("{} vs {}", fmt_f64(d * d), fmt_f64(want)),
            );
        }
        Suite::ChowlaDecay => {
            let p = Params {
                x: LADDER.to_vec(),
                epsilon: Some(0.3),
                shifts: vec![0, 1],
                ..Params::default()
            };
            rep.rows = experiment::run(Kind::Chowla, &p, 0, ctx)?;
            let v = column(&rep.rows, "value");
            rep.check("Chowla (0,1) short average strictly decreasing", strictly_decreasing(&v), list(&v));
        }
        Suite::NilDiscorrelation => {
            let coeffs = vec![[0.0; 3], [2f64.sqrt(), 3f64.sqrt(), 0.0]];
            let p = Params {
                n: vec![1_000, 100_000],
                x: LADDER.to_vec(),
                h: Some(HRule::Power(0.5)),
                nil: Some(NilParams {
                    coeffs: coeffs.clone(),
                    function: "horizontal(1,1)".into(),
                }),
                ..Params::default()
            };
            rep.rows = experiment::run(Kind::Nilseq, &p, 0, ctx)?;
            let d: Vec<f64> = rep
                .rows
                .iter()
                .filter(|r| r.value("statistic") == Some("defect"))
                .filter_map(|r| r.value_f64("value"))
                .collect();
            rep.check("equidistribution defect shrinks from N=1e3 to 1e5", d[1] < d[0], list(&d));
            let seq = experiment::heisenberg_sequence(&coeffs)?;
            let f = NilFunction::Horizontal { a: 1, b: 1 };
            let table = nilsequence_table(&f, &seq, 1000, 2000)?;
            let c = nil::discorrelation(&table, 1000, 1000, &f, &seq)?;
            rep.check(
                "discorrelation of F(g(n)) with itself is 1",
                (c - 1.0).norm() <= 1e-9,
                format!("{c}"),
            );
        }
        Suite::AlgebraVerify => algebra_verify(&mut rep, 1000, 1)?,
    }
    Ok(rep)
}

fn random_poly(rng: &mut ChaCha8Rng, k: usize, den: i64) -> RationalPoly {
    RationalPoly::new(
        (0..=k)
            .map(|_| BigRational::new(rng.gen_range(-50i64..=50).into(), rng.gen_range(1..=den).into()))
            .collect(),
    )
}

/// A 1-integral polynomial: integer combination of `binom(t, j)`.
fn random_integral(rng: &mut ChaCha8Rng, k: usize) -> RationalPoly {
    let c: Vec<BigRational> = (0..=k).map(|_| BigRational::from_integer(rng.gen_range(-30i64..=30).into())).collect();
    poly::from_binomial_basis(&c, &BigRational::one(), &BigRational::zero())
}

/// Exact algebra property checks, `trials` of each kind.
pub fn algebra_verify(rep: &mut SuiteReport, trials: usize, seed: u64) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = BigRational::one();
    let record = |rep: &mut SuiteReport, name: &'static str, failures: usize, t: Instant| {
        rep.rows.push(ResultRow {
            experiment: "algebra-verify".into(),
            params: vec![("check", name.into()), ("trials", trials.to_string())],
            values: vec![("failures", failures.to_string())],
            wall_time: t.elapsed(),
        });
        rep.check(name, failures == 0, format!("{failures} failures in {trials}"));
    };

    let t = Instant::now();
    let mut bad = 0;
    for _ in 0..trials {
        let k = rng.gen_range(0..=4);
        let p = random_poly(&mut rng, k, 12);
        let delta = BigRational::new(rng.gen_range(1i64..=9).into(), rng.gen_range(1i64..=9).into());
        let t0 = BigRational::from_integer(rng.gen_range(-20i64..=20).into()) * &delta;
        let c = poly::to_binomial_basis(&p, &delta, &t0);
        if poly::from_binomial_basis(&c, &delta, &t0) != p {
            bad += 1;
        }
    }
    record(rep, "binomial basis round trip", bad, t);

    let t = Instant::now();
    let mut bad = 0;
    for _ in 0..trials {
        let (a, b) = coprime_pair(&mut rng);
        let k = rng.gen_range(0..=3);
        let g = random_integral(&mut rng, k);
        let (ga, gb) = poly::bezout_split(&g, a, b)?;
        let ok = &ga + &gb == g
            && poly::is_integral(&ga, &BigRational::new(1.into(), a.into()))
            && poly::is_integral(&gb, &BigRational::new(1.into(), b.into()));
        bad += usize::from(!ok);
    }
    record(rep, "bezout split", bad, t);

    let t = Instant::now();
    let mut bad = 0;
    let primes = [2u64, 3, 5, 7, 11, 13];
    for _ in 0..trials {
        let m = rng.gen_range(1..=3);
        let start = rng.gen_range(0..=primes.len() - m);
        let k = rng.gen_range(0..=3);
        let gs: Vec<(u64, RationalPoly)> = primes[start..start + m]
            .iter()
            .map(|&p| (p, random_integral(&mut rng, k)))
            .collect();
        let g = poly::crt_align(&gs)?;
        let ok = poly::is_integral(&g, &one)
            && gs
                .iter()
                .all(|(p, gp)| poly::is_integral(&(gp - &g), &BigRational::new(1.into(), (*p).into())));
        bad += usize::from(!ok);
    }
    record(rep, "crt align", bad, t);

    let t = Instant::now();
    let mut bad = 0;
    for _ in 0..trials {
        let k = rng.gen_range(0..=3);
        let delta = BigRational::new(1.into(), rng.gen_range(1i64..=6).into());
        let lo = BigRational::from_integer(rng.gen_range(0i64..=50).into());
        let len = BigRational::from_integer(rng.gen_range(1i64..=20).into());
        let i = Interval::new(lo.clone(), &lo + &len)?;
        let p1 = LocalPhase::new(i.clone(), random_poly(&mut rng, k, 8));
        let p2 = LocalPhase::new(i, random_poly(&mut rng, k, 8));
        if let Some(d) = poly::compare_phases(&p1, &p2, &delta, 1e12) {
            let ok = &d.eps + &d.gamma == &p1.poly.with_degree_bound(k) - &p2.poly.with_degree_bound(k)
                && poly::is_integral(&d.gamma, &delta);
            bad += usize::from(!ok);
        } else {
            bad += 1;
        }
    }
    record(rep, "compare phases decomposition", bad, t);

    let t = Instant::now();
    let mut bad = 0;
    for _ in 0..trials {
        let mut r = || BigRational::new(rng.gen_range(-20i64..=20).into(), rng.gen_range(1i64..=10).into());
        let x = LieElement::heisenberg(r(), r(), r());
        let y = LieElement::heisenberg(r(), r(), r());
        let lhs = nil::nil_exp(&nil::bch_product(&x, &y)?);
        let rhs = nil::nil_exp(&x).mul(&nil::nil_exp(&y))?;
        bad += usize::from(lhs != rhs);
    }
    record(rep, "BCH exactness (Heisenberg)", bad, t);
    Ok(())
}

fn coprime_pair(rng: &mut ChaCha8Rng) -> (u64, u64) {
    loop {
        let a: u64 = rng.gen_range(1..=30);
        let b: u64 = rng.gen_range(1..=30);
        if num_integer::gcd(a, b) == 1 {
            return (a, b);
        }
    }
}
