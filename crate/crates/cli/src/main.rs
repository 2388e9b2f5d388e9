use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use ulab::phase::{archimedean_fit, weyl_rationalize, PhasePoint};
use ulab::poly::{self, parse_rational, Interval, RationalPoly};
use ulab::sieve::{MultSpec, Values};

use ulab_cli::config::{parse_count, ExperimentConfig, HRule, Kind, NilParams, Params};
use ulab_cli::experiment::{self, pattern_json_lines, write_csv, Context, ResultRow};
use ulab_cli::suite::{algebra_verify, run_suite, Suite, SuiteReport};

#[derive(Parser)]
#[command(name = "ulab", version, about = "Uniformity experiments for multiplicative functions")]
struct Cli {
    /// Table cache directory.
    #[arg(long, global = true, env = "ULAB_CACHE")]
    cache_dir: Option<PathBuf>,
    /// Write CSV here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Add a wall-time column.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sieve a function on [start, end].
    Sieve {
        #[arg(long, default_value = "liouville", value_parser = parse_spec)]
        kind: MultSpec,
        #[arg(long, value_parser = parse_count)]
        start: u64,
        #[arg(long, value_parser = parse_count)]
        end: u64,
        /// Print every value, one per line.
        #[arg(long)]
        print: bool,
    },
    /// Stratified average of U^{k+1} norms over [X, 2X).
    GowersAvg {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H")]
        h: HRule,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Stratified average of weak u^{k+1} norms over [X, 2X).
    WeakGowers {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H")]
        h: HRule,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        /// Random restarts instead of the full grid.
        #[arg(long)]
        heuristic: bool,
    },
    /// M(f; X, Q) over twisted characters.
    Pretentious {
        #[command(flatten)]
        common: Common,
        #[arg(long = "Q", default_value_t = 10)]
        q: u64,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
    },
    /// Distinct value patterns of length k among the first N windows.
    Patterns {
        #[arg(long, default_value = "liouville", value_parser = parse_spec)]
        kind: MultSpec,
        /// A range `1..4` or a list `1,2,3`.
        #[arg(long, value_parser = parse_k_range)]
        k: KRange,
        #[arg(long = "N", value_delimiter = ',', value_parser = parse_count, required = true)]
        n: Vec<u64>,
        /// Values are l-th roots of unity.
        #[arg(long, default_value_t = 2)]
        alphabet: u32,
        /// Emit JSON lines of first occurrences instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// E_{h <= X^eps} |E_{n <= X} prod f(n + a_i h)|.
    Chowla {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        shifts: Vec<u64>,
        #[arg(long)]
        eps: f64,
        /// Logarithmic inner average.
        #[arg(long)]
        log: bool,
    },
    /// Polynomial correlation averages.
    Polyavg {
        #[arg(long = "X", value_delimiter = ',', value_parser = parse_count, required = true)]
        x: Vec<u64>,
        /// Repeat once per polynomial, e.g. --poly m --poly "m^2".
        #[arg(long = "poly", required = true)]
        polys: Vec<String>,
        /// One per polynomial: lambda, von_mangoldt or one.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<ulab::patterns::Weight>,
        #[arg(long)]
        eps: f64,
    },
    /// Heisenberg nilsequence statistics.
    Nilseq {
        /// Coordinates x,y,z of g_0, g_1, ...; repeat once per coefficient.
        #[arg(long = "coeff", value_parser = parse_triple, required = true)]
        coeffs: Vec<[f64; 3]>,
        #[arg(long = "F", default_value = "horizontal(1,1)")]
        function: String,
        /// Equidistribution defect lengths.
        #[arg(long = "N", value_delimiter = ',', value_parser = parse_count)]
        n: Vec<u64>,
        /// Interval starts for discorrelation with --kind.
        #[arg(long = "X", value_delimiter = ',', value_parser = parse_count)]
        x: Vec<u64>,
        #[arg(long = "H")]
        h: Option<HRule>,
        #[arg(long, default_value = "liouville", value_parser = parse_spec)]
        kind: MultSpec,
    },
    /// Exact polynomial algebra.
    Algebra {
        #[command(subcommand)]
        op: AlgebraOp,
    },
    /// Run a named experiment suite.
    Suite { name: Suite },
    /// Run an experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overwrite an existing output file.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long = "X", value_delimiter = ',', value_parser = parse_count, required = true)]
    x: Vec<u64>,
    #[arg(long, default_value = "liouville", value_parser = parse_spec)]
    kind: MultSpec,
}

#[derive(Subcommand)]
enum AlgebraOp {
    /// Randomized exact checks.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Coefficients of P in the basis binom((t - t0)/delta, j).
    Binomial {
        #[arg(long)]
        poly: RationalPoly,
        #[arg(long, default_value = "1", value_parser = parse_rat)]
        delta: BigRational,
        #[arg(long, default_value = "0", value_parser = parse_rat)]
        t0: BigRational,
    },
    /// gamma = gamma_a + gamma_b for a 1-integral gamma.
    Bezout {
        #[arg(long)]
        poly: RationalPoly,
        #[arg(long)]
        a: u64,
        #[arg(long)]
        b: u64,
    },
    /// Smallest q <= Q with ||q alpha_j|| <= c_j H^{-j}.
    Rationalize {
        /// alpha_1, ..., alpha_k
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        alpha: Vec<f64>,
        #[arg(long = "H")]
        h: u64,
        #[arg(long = "Q")]
        q: u64,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        c: Vec<f64>,
    },
    /// Split P on [lo, hi] into T log t / 2 pi + gamma + eps.
    Fit {
        #[arg(long)]
        poly: RationalPoly,
        #[arg(long, value_parser = parse_rat)]
        lo: BigRational,
        #[arg(long, value_parser = parse_rat)]
        hi: BigRational,
        #[arg(long = "Q", default_value_t = 10)]
        q: u64,
    },
}

#[derive(Clone, Debug)]
struct KRange(Vec<usize>);

fn parse_k_range(s: &str) -> Result<KRange, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| format!("bad range {s:?}"))?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range {s:?}"))?;
        if a > b {
            return Err(format!("empty range {s:?}"));
        }
        return Ok(KRange((a..=b).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad k {t:?}")))
        .collect::<Result<_, _>>()
        .map(KRange)
}

fn parse_spec(s: &str) -> Result<MultSpec, String> {
    match s {
        "liouville" | "lambda" => Ok(MultSpec::Liouville),
        "moebius" | "mobius" | "mu" => Ok(MultSpec::Moebius),
        "von-mangoldt" | "von_mangoldt" => Ok(MultSpec::VonMangoldt),
        _ => {
            // chi:q:index[:t]
            let parts: Vec<&str> = s.split(':').collect();
            match parts.as_slice() {
                ["chi", q, i, rest @ ..] if rest.len() <= 1 => {
                    let spec = MultSpec::CharacterTwist {
                        modulus: q.parse().map_err(|_| format!("bad modulus in {s:?}"))?,
                        character_index: i.parse().map_err(|_| format!("bad index in {s:?}"))?,
                        t: rest.first().map_or(Ok(0.0), |t| t.parse()).map_err(|_| format!("bad t in {s:?}"))?,
                    };
                    spec.validate().map_err(|e| e.to_string())?;
                    Ok(spec)
                }
                _ => Err(format!(
                    "unknown function {s:?}; use liouville, moebius, von-mangoldt or chi:q:index[:t]"
                )),
            }
        }
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad number {t:?}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected x,y,z, got {s:?}"))
}

fn parse_rat(s: &str) -> Result<BigRational, String> {
    parse_rational(s).ok_or_else(|| format!("not a rational number: {s:?}"))
}

fn sink(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report(rep: &SuiteReport, name: &str) -> ExitCode {
    for c in &rep.checks {
        eprintln!("{} {name}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if rep.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let ctx = Context::new(cli.cache_dir.clone())?;
    let emit = |rows: Vec<ResultRow>| -> anyhow::Result<ExitCode> {
        let mut out = sink(&cli.output)?;
        write_csv(&mut out, &rows, cli.timing)?;
        out.flush()?;
        Ok(ExitCode::SUCCESS)
    };
    match cli.cmd {
        Cmd::Sieve { ref kind, start, end, print } => {
            let table = ctx.table(kind, start, end)?;
            let mut out = sink(&cli.output)?;
            if print {
                match table.values() {
                    Values::Signed(v) => v.iter().try_for_each(|x| writeln!(out, "{x}"))?,
                    Values::Real(v) => v.iter().try_for_each(|x| writeln!(out, "{x}"))?,
                    Values::Complex(v) => v.iter().try_for_each(|z| writeln!(out, "{},{}", z.re, z.im))?,
                }
            } else {
                let sum: num_complex::Complex64 = (start..=end).map(|n| table.get(n as i64)).sum();
                writeln!(out, "function,start,end,sum_re,sum_im")?;
                writeln!(out, "{},{start},{end},{},{}", kind.name(), sum.re, sum.im)?;
            }
            out.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::GowersAvg {
            ref common,
            h,
            ref k,
            samples,
            seed,
        } => {
            let p = Params {
                x: common.x.clone(),
                h: Some(h),
                k: k.clone(),
                samples: Some(samples),
                function: Some(common.kind.clone()),
                ..Params::default()
            };
            emit(experiment::run(Kind::GowersAvg, &p, seed, &ctx)?)
        }
        Cmd::WeakGowers {
            ref common,
            h,
            ref k,
            sigma,
            samples,
            seed,
            heuristic,
        } => {
            let p = Params {
                x: common.x.clone(),
                h: Some(h),
                k: k.clone(),
                sigma: Some(sigma),
                samples: Some(samples),
                heuristic,
                function: Some(common.kind.clone()),
                ..Params::default()
            };
            emit(experiment::run(Kind::WeakGowers, &p, seed, &ctx)?)
        }
        Cmd::Pretentious { ref common, q, resolution } => {
            let p = Params {
                x: common.x.clone(),
                q: Some(q),
                resolution: Some(resolution),
                function: Some(common.kind.clone()),
                ..Params::default()
            };
            emit(experiment::run(Kind::Pretentious, &p, 0, &ctx)?)
        }
        Cmd::Patterns {
            ref kind,
            ref k,
            ref n,
            alphabet,
            json,
        } => {
            let p = Params {
                k: k.0.clone(),
                n: n.clone(),
                alphabet: Some(alphabet),
                function: Some(kind.clone()),
                ..Params::default()
            };
            let (rows, counts) = experiment::pattern_counts(&p, &ctx)?;
            if json {
                let mut out = sink(&cli.output)?;
                for c in &counts {
                    out.write_all(pattern_json_lines(c).as_bytes())?;
                }
                out.flush()?;
                Ok(ExitCode::SUCCESS)
            } else {
                emit(rows)
            }
        }
        Cmd::Chowla {
            ref common,
            ref shifts,
            eps,
            log,
        } => {
            let p = Params {
                x: common.x.clone(),
                shifts: shifts.clone(),
                epsilon: Some(eps),
                log,
                function: Some(common.kind.clone()),
                ..Params::default()
            };
            emit(experiment::run(Kind::Chowla, &p, 0, &ctx)?)
        }
        Cmd::Polyavg {
            ref x,
            ref polys,
            ref weights,
            eps,
        } => {
            let p = Params {
                x: x.clone(),
                polys: polys.clone(),
                weights: weights.clone(),
                epsilon: Some(eps),
                ..Params::default()
            };
            emit(experiment::run(Kind::Polyavg, &p, 0, &ctx)?)
        }
        Cmd::Nilseq {
            ref coeffs,
            ref function,
            ref n,
            ref x,
            h,
            ref kind,
        } => {
            let p = Params {
                x: x.clone(),
                n: n.clone(),
                h,
                function: Some(kind.clone()),
                nil: Some(NilParams {
                    coeffs: coeffs.clone(),
                    function: function.clone(),
                }),
                ..Params::default()
            };
            emit(experiment::run(Kind::Nilseq, &p, 0, &ctx)?)
        }
        Cmd::Algebra { ref op } => algebra(op, &cli),
        Cmd::Suite { name } => {
            let rep = run_suite(name, &ctx)?;
            let mut out = sink(&cli.output)?;
            write_csv(&mut out, &rep.rows, cli.timing)?;
            out.flush()?;
            Ok(report(&rep, name.name()))
        }
        Cmd::Run { ref config, force } => {
            let cfg = ExperimentConfig::load(config)?;
            cfg.validate()?;
            let out = &cfg.experiment.output;
            if out.exists() && !force {
                eprintln!("{} exists; nothing written (use --force to overwrite)", out.display());
                return Ok(ExitCode::SUCCESS);
            }
            let ctx = match cli.cache_dir.clone().or_else(|| cfg.experiment.cache_dir.clone()) {
                Some(dir) => Context::new(Some(dir))?,
                None => ctx,
            };
            let rows = experiment::run(cfg.experiment.kind, &cfg.params, cfg.experiment.seed, &ctx)?;
            let mut w = sink(&Some(out.clone()))?;
            write_csv(&mut w, &rows, cli.timing)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn algebra(op: &AlgebraOp, cli: &Cli) -> anyhow::Result<ExitCode> {
    let mut out = sink(&cli.output)?;
    match op {
        AlgebraOp::Verify { trials, seed } => {
            let mut rep = SuiteReport::default();
            algebra_verify(&mut rep, *trials, *seed)?;
            write_csv(&mut out, &rep.rows, cli.timing)?;
            out.flush()?;
            return Ok(report(&rep, "algebra"));
        }
        AlgebraOp::Binomial { poly, delta, t0 } => {
            for (j, c) in poly::to_binomial_basis(poly, delta, t0).iter().enumerate() {
                writeln!(out, "c{j} = {c}")?;
            }
            writeln!(out, "integral = {}", poly::is_integral(poly, delta))?;
        }
        AlgebraOp::Bezout { poly, a, b } => {
            let (ga, gb) = poly::bezout_split(poly, *a, *b)?;
            writeln!(out, "gamma_a = {ga}")?;
            writeln!(out, "gamma_b = {gb}")?;
        }
        AlgebraOp::Rationalize { alpha, h, q, c } => {
            if *q == 0 {
                bail!("Q must be at least 1");
            }
            if c.len() != 1 && c.len() != alpha.len() {
                bail!("give one c or one per alpha");
            }
            let mut alphas = vec![0.0];
            alphas.extend(alpha);
            match weyl_rationalize(&PhasePoint::new(0, alphas), *h, *q, c) {
                Some(r) => {
                    writeln!(out, "q = {}", r.q)?;
                    let nums: Vec<String> = r.numerators[1..].iter().map(i64::to_string).collect();
                    writeln!(out, "numerators = {}", nums.join(","))?;
                }
                None => writeln!(out, "no q <= {q} qualifies")?,
            }
        }
        AlgebraOp::Fit { poly, lo, hi, q } => {
            let fit = archimedean_fit(poly, &Interval::new(lo.clone(), hi.clone())?, *q)?;
            writeln!(out, "T = {}", fit.t)?;
            writeln!(out, "q = {}", fit.q)?;
            writeln!(out, "gamma = {}", fit.gamma)?;
            writeln!(out, "eps_sup = {}", fit.eps_sup)?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}
