//! Experiment runners shared by the subcommands, `run` and the suites.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{bail, Context as _};
use ulab::nil::{self, Filtration, NilFunction, NilGroupElement, NilPolySeq};
use ulab::norms::{averaged_gowers_on, mean_stderr, stratum_points};
use ulab::patterns::{self, IntPoly, PatternCount};
use ulab::phase::{weak_gowers, SearchMode, WeakGowersOptions};
use ulab::pretentious::m_score;
use ulab::sieve::{build_table, FunctionTable, MultSpec, TableCache, Values};

use crate::config::{Kind, NilParams, Params};

/// Where tables come from.
#[derive(Clone, Debug, Default)]
pub struct Context {
    cache: Option<TableCache>,
}

impl Context {
    pub fn new(cache_dir: Option<PathBuf>) -> anyhow::Result<Self> {
        let cache = match cache_dir {
            Some(dir) => {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating cache dir {}", dir.display()))?;
                Some(TableCache::new(dir))
            }
            None => None,
        };
        Ok(Context { cache })
    }

    pub fn table(&self, spec: &MultSpec, start: u64, end: u64) -> anyhow::Result<FunctionTable> {
        Ok(match &self.cache {
            Some(c) => c.get_or_build(spec, start, end)?,
            None => build_table(spec, start, end)?,
        })
    }
}

/// One output line. Every row of an experiment kind has the same columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub params: Vec<(&'static str, String)>,
    pub values: Vec<(&'static str, String)>,
    pub wall_time: Duration,
}

impl ResultRow {
    pub fn value(&self, name: &str) -> Option<&str> {
        self.values.iter().chain(&self.params).find(|(k, _)| *k == name).map(|(_, v)| v.as_str())
    }

    pub fn value_f64(&self, name: &str) -> Option<f64> {
        self.value(name)?.parse().ok()
    }

    fn header(&self, timing: bool) -> Vec<&str> {
        let mut h = vec!["experiment"];
        h.extend(self.params.iter().map(|(k, _)| *k));
        h.extend(self.values.iter().map(|(k, _)| *k));
        if timing {
            h.push("wall_time_s");
        }
        h
    }
}

/// Writes rows as CSV with a header. Wall time is left out unless asked for,
/// so that reruns are byte-identical.
pub fn write_csv<W: Write>(w: W, rows: &[ResultRow], timing: bool) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let Some(first) = rows.first() else {
        out.flush()?;
        return Ok(());
    };
    let header = first.header(timing);
    out.write_record(&header)?;
    for row in rows {
        if row.header(timing) != header {
            bail!("rows of one table must share columns");
        }
        let mut rec = vec![row.experiment.clone()];
        rec.extend(row.params.iter().map(|(_, v)| v.clone()));
        rec.extend(row.values.iter().map(|(_, v)| v.clone()));
        if timing {
            rec.push(format!("{:.3}", row.wall_time.as_secs_f64()));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn spec_label(spec: &MultSpec) -> String {
    match spec {
        MultSpec::CharacterTwist {
            modulus,
            character_index,
            t,
        } => format!("chi_{modulus}_{character_index}*n^i{t}"),
        other => other.name().to_string(),
    }
}

fn row(kind: Kind, params: Vec<(&'static str, String)>, values: Vec<(&'static str, String)>, start: Instant) -> ResultRow {
    ResultRow {
        experiment: kind.name().to_string(),
        params,
        values,
        wall_time: start.elapsed(),
    }
}

pub fn run(kind: Kind, p: &Params, seed: u64, ctx: &Context) -> anyhow::Result<Vec<ResultRow>> {
    match kind {
        Kind::GowersAvg => gowers_avg(p, seed, ctx),
        Kind::WeakGowers => weak(p, seed, ctx),
        Kind::Pretentious => pretentious(p),
        Kind::Patterns => Ok(pattern_counts(p, ctx)?.0),
        Kind::Chowla => chowla(p, ctx),
        Kind::Polyavg => polyavg(p),
        Kind::Nilseq => nilseq(p, ctx),
    }
}

fn gowers_avg(p: &Params, seed: u64, ctx: &Context) -> anyhow::Result<Vec<ResultRow>> {
    let spec = p.function();
    let (hrule, samples) = (p.need_h()?, p.need_samples()?);
    let mut rows = Vec::new();
    for &x in p.need_x()? {
        let h = hrule.at(x);
        let table = ctx.table(&spec, x, 2 * x + h as u64)?;
        for &k in p.need_k()? {
            let t = Instant::now();
            let r = averaged_gowers_on(&table, x, h, k, samples, seed)?;
            rows.push(row(
                Kind::GowersAvg,
                vec![
                    ("function", spec_label(&spec)),
                    ("x", x.to_string()),
                    ("h", h.to_string()),
                    ("k", k.to_string()),
                    ("samples", samples.to_string()),
                    ("seed", seed.to_string()),
                ],
                vec![("mean_norm", fmt_f64(r.mean)), ("stderr", fmt_f64(r.stderr))],
                t,
            ));
        }
    }
    Ok(rows)
}

/// Mean of `weak_gowers` over one stratified point per stratum of `[X, 2X)`.
pub fn averaged_weak_gowers(
    table: &FunctionTable,
    x: u64,
    h: usize,
    k: usize,
    samples: usize,
    opts: &WeakGowersOptions,
) -> anyhow::Result<(f64, f64, f64)> {
    let mut values = Vec::with_capacity(samples);
    let mut guarantee = 0.0;
    for pt in stratum_points(x, samples, opts.seed) {
        let r = weak_gowers(table, pt, h, k, opts)?;
        guarantee = r.guarantee;
        values.push(r.value);
    }
    let (mean, stderr) = mean_stderr(&values);
    Ok((mean, stderr, guarantee))
}

fn weak(p: &Params, seed: u64, ctx: &Context) -> anyhow::Result<Vec<ResultRow>> {
    let spec = p.function();
    let (hrule, samples) = (p.need_h()?, p.need_samples()?);
    let opts = WeakGowersOptions {
        mode: if p.heuristic {
            SearchMode::Heuristic
        } else {
            SearchMode::Exhaustive
        },
        sigma: p.sigma.unwrap_or(WeakGowersOptions::default().sigma),
        seed,
        ..WeakGowersOptions::default()
    };
    let mut rows = Vec::new();
    for &x in p.need_x()? {
        let h = hrule.at(x);
        let table = ctx.table(&spec, x, 2 * x + h as u64)?;
        for &k in p.need_k()? {
            let t = Instant::now();
            let (mean, stderr, guarantee) = averaged_weak_gowers(&table, x, h, k, samples, &opts)?;
            rows.push(row(
                Kind::WeakGowers,
                vec![
                    ("function", spec_label(&spec)),
                    ("x", x.to_string()),
                    ("h", h.to_string()),
                    ("k", k.to_string()),
                    ("sigma", fmt_f64(opts.sigma)),
                    ("mode", if p.heuristic { "heuristic" } else { "exhaustive" }.into()),
                    ("samples", samples.to_string()),
                    ("seed", seed.to_string()),
                ],
                vec![
                    ("mean_value", fmt_f64(mean)),
                    ("stderr", fmt_f64(stderr)),
                    ("guarantee", fmt_f64(guarantee)),
                ],
                t,
            ));
        }
    }
    Ok(rows)
}

fn pretentious(p: &Params) -> anyhow::Result<Vec<ResultRow>> {
    let spec = p.function();
    let q = p.q.context("params.q is required")?;
    let res = p.resolution.unwrap_or(1.0);
    let mut rows = Vec::new();
    for &x in p.need_x()? {
        let t = Instant::now();
        let m = m_score(&spec, x, q, res)?;
        rows.push(row(
            Kind::Pretentious,
            vec![
                ("function", spec_label(&spec)),
                ("x", x.to_string()),
                ("q", q.to_string()),
                ("resolution", fmt_f64(res)),
            ],
            vec![
                ("m_score", fmt_f64(m.value)),
                ("argmin_t", fmt_f64(m.argmin_t)),
                ("argmin_modulus", m.argmin_character.0.to_string()),
                ("argmin_index", m.argmin_character.1.to_string()),
            ],
            t,
        ));
    }
    Ok(rows)
}

/// Pattern counts for every `(k, N)`, one table shared by all.
pub fn pattern_counts(p: &Params, ctx: &Context) -> anyhow::Result<(Vec<ResultRow>, Vec<PatternCount>)> {
    let spec = p.function();
    let ks = p.need_k()?;
    if p.n.is_empty() {
        bail!("params.n must list at least one N");
    }
    let l = p.alphabet.unwrap_or(2);
    let end = p.n.iter().max().copied().unwrap_or(0) + ks.iter().max().copied().unwrap_or(0) as u64;
    let table = ctx.table(&spec, 1, end.max(1))?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for &n in &p.n {
        for &k in ks {
            let t = Instant::now();
            let c = if l == 2 && spec.is_signed() {
                patterns::sign_patterns_on(&table, k, n)?
            } else {
                patterns::value_patterns_on(&table, k, n, l)?
            };
            let possible = (l as u128).checked_pow(k as u32).map_or("overflow".into(), |v| v.to_string());
            rows.push(row(
                Kind::Patterns,
                vec![
                    ("function", spec_label(&spec)),
                    ("k", k.to_string()),
                    ("n", n.to_string()),
                    ("alphabet", l.to_string()),
                ],
                vec![("count", c.count.to_string()), ("possible", possible)],
                t,
            ));
            counts.push(c);
        }
    }
    Ok((rows, counts))
}

/// JSON lines, one per pattern, in order of first occurrence.
pub fn pattern_json_lines(c: &PatternCount) -> String {
    c.occurrences()
        .into_iter()
        .map(|(pattern, first_n)| {
            serde_json::json!({"k": c.k, "n": c.n, "pattern": pattern, "first_n": first_n}).to_string() + "\n"
        })
        .collect()
}

fn chowla(p: &Params, ctx: &Context) -> anyhow::Result<Vec<ResultRow>> {
    let eps = p.need_epsilon()?;
    if p.shifts.is_empty() {
        bail!("params.shifts must list at least one shift");
    }
    let spec = p.function();
    let xs = p.need_x()?;
    let amax = p.shifts.iter().max().copied().unwrap_or(0);
    let end = xs
        .iter()
        .map(|&x| x + amax * patterns::short_range(x, eps))
        .max()
        .unwrap_or(1);
    let table = ctx.table(&spec, 1, end.max(1))?;
    let shifts = p.shifts.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    let mut rows = Vec::new();
    for &x in xs {
        let t = Instant::now();
        let r = patterns::chowla_average_on(&table, &p.shifts, x, eps, p.log)?;
        rows.push(row(
            Kind::Chowla,
            vec![
                ("function", spec_label(&spec)),
                ("x", x.to_string()),
                ("epsilon", fmt_f64(eps)),
                ("shifts", shifts.clone()),
                ("log", p.log.to_string()),
            ],
            vec![("value", fmt_f64(r.value)), ("h_max", r.outer.to_string())],
            t,
        ));
    }
    Ok(rows)
}

fn polyavg(p: &Params) -> anyhow::Result<Vec<ResultRow>> {
    let eps = p.need_epsilon()?;
    let polys: Vec<IntPoly> = p
        .polys
        .iter()
        .map(|s| s.parse().with_context(|| format!("polynomial {s:?}")))
        .collect::<anyhow::Result<_>>()?;
    let weights = if p.weights.is_empty() {
        vec![patterns::Weight::Liouville; polys.len()]
    } else {
        p.weights.clone()
    };
    let mut rows = Vec::new();
    for &x in p.need_x()? {
        let t = Instant::now();
        let r = patterns::poly_average(&polys, &weights, x, eps)?;
        rows.push(row(
            Kind::Polyavg,
            vec![
                ("x", x.to_string()),
                ("epsilon", fmt_f64(eps)),
                ("polys", r.family.clone()),
                (
                    "weights",
                    weights.iter().map(|w| format!("{w:?}").to_lowercase()).collect::<Vec<_>>().join(" "),
                ),
            ],
            vec![
                ("value", fmt_f64(r.value)),
                ("outer", r.outer.to_string()),
                ("truncated", r.truncated_terms.to_string()),
            ],
            t,
        ));
    }
    Ok(rows)
}

/// The Heisenberg polynomial sequence with the given coefficients.
pub fn heisenberg_sequence(coeffs: &[[f64; 3]]) -> anyhow::Result<NilPolySeq<f64>> {
    if coeffs.is_empty() {
        bail!("a polynomial sequence needs at least g_0");
    }
    let elems = coeffs
        .iter()
        .map(|&[x, y, z]| NilGroupElement::heisenberg(x, y, z))
        .collect();
    Ok(NilPolySeq::new(Filtration::heisenberg(coeffs.len().max(2) - 1), elems)?)
}

/// The table `n -> F(g(n) Gamma)` on `[start, end]`.
pub fn nilsequence_table(f: &NilFunction, seq: &NilPolySeq<f64>, start: u64, end: u64) -> anyhow::Result<FunctionTable> {
    let values = (start..=end)
        .map(|n| nil::eval_nilsequence(f, seq, n as i64))
        .collect::<ulab::Result<Vec<_>>>()?;
    Ok(FunctionTable::from_values(
        start,
        Values::Complex(values),
        MultSpec::CustomPrimeMap {
            primes: ulab::sieve::PrimeMap::constant(num_complex::Complex64::new(1.0, 0.0)),
        },
    )?)
}

fn nilseq(p: &Params, ctx: &Context) -> anyhow::Result<Vec<ResultRow>> {
    let NilParams { coeffs, function } = p.nil.as_ref().context("params.nil is required")?;
    let f: NilFunction = function.parse()?;
    let seq = heisenberg_sequence(coeffs)?;
    let label = coeffs
        .iter()
        .map(|c| format!("({},{},{})", c[0], c[1], c[2]))
        .collect::<Vec<_>>()
        .join(" ");
    let params = |stat: &str, at: u64, h: String| {
        vec![
            ("nil_function", f.to_string()),
            ("coeffs", label.clone()),
            ("statistic", stat.to_string()),
            ("at", at.to_string()),
            ("h", h),
        ]
    };
    let mut rows = Vec::new();
    for &n in &p.n {
        let t = Instant::now();
        let d = nil::equidistribution_defect(&seq, &f, n as usize)?;
        rows.push(row(Kind::Nilseq, params("defect", n, String::new()), vec![("value", fmt_f64(d))], t));
    }
    if !p.x.is_empty() {
        let spec = p.function();
        let hrule = p.need_h()?;
        for &x in &p.x {
            let t = Instant::now();
            let h = hrule.at(x);
            let table = ctx.table(&spec, x, x + h as u64)?;
            let c = nil::discorrelation(&table, x as i64, h, &f, &seq)?;
            let stat = format!("discorrelation_{}", spec_label(&spec));
            rows.push(row(Kind::Nilseq, params(&stat, x, h.to_string()), vec![("value", fmt_f64(c.norm()))], t));
        }
    }
    if rows.is_empty() {
        bail!("nothing to compute: give params.n and/or params.x");
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HRule;

    fn params() -> Params {
        Params {
            x: vec![10_000],
            h: Some(HRule::Absolute(40)),
            k: vec![1],
            samples: Some(100),
            ..Params::default()
        }
    }

    #[test]
    fn gowers_row_in_unit_interval() {
        let rows = run(Kind::GowersAvg, &params(), 1, &Context::default()).unwrap();
        assert_eq!(rows.len(), 1);
        let v = rows[0].value_f64("mean_norm").unwrap();
        assert!(v > 0.0 && v < 1.0, "{v}");
    }

    #[test]
    fn csv_is_deterministic_and_has_header() {
        let ctx = Context::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&mut a, &run(Kind::GowersAvg, &params(), 3, &ctx).unwrap(), false).unwrap();
        write_csv(&mut b, &run(Kind::GowersAvg, &params(), 3, &ctx).unwrap(), false).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("experiment,function,x,h,k,samples,seed,mean_norm,stderr\n"));
    }

    #[test]
    fn cache_round_trip_gives_same_rows() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context::new(Some(dir.path().to_path_buf())).unwrap();
        let p = Params {
            x: vec![1000, 5000],
            epsilon: Some(0.3),
            shifts: vec![0, 1],
            ..Params::default()
        };
        let a = run(Kind::Chowla, &p, 0, &ctx).unwrap();
        let b = run(Kind::Chowla, &p, 0, &ctx).unwrap();
        let c = run(Kind::Chowla, &p, 0, &Context::default()).unwrap();
        let vals = |rows: &[ResultRow]| rows.iter().map(|r| r.values.clone()).collect::<Vec<_>>();
        assert_eq!(vals(&a), vals(&b));
        assert_eq!(vals(&a), vals(&c));
        assert!(std::fs::read_dir(dir.path()).unwrap().count() > 0);
    }

    #[test]
    fn pattern_json() {
        let p = Params {
            k: vec![2],
            n: vec![20],
            ..Params::default()
        };
        let (rows, counts) = pattern_counts(&p, &Context::default()).unwrap();
        assert_eq!(rows[0].value("count"), Some("4"));
        let lines = pattern_json_lines(&counts[0]);
        assert_eq!(lines.lines().count(), 4);
        assert!(lines.starts_with(r#"{"first_n":0,"k":2,"n":20,"pattern":"+-"}"#), "{lines}");
    }

    #[test]
    fn nilsequence_correlates_with_itself() {
        let seq = heisenberg_sequence(&[[0.0; 3], [2f64.sqrt(), 3f64.sqrt(), 0.1]]).unwrap();
        let f = NilFunction::Horizontal { a: 1, b: 2 };
        let table = nilsequence_table(&f, &seq, 100, 400).unwrap();
        let c = nil::discorrelation(&table, 100, 300, &f, &seq).unwrap();
        assert!((c.re - 1.0).abs() < 1e-9 && c.im.abs() < 1e-9);
    }

    #[test]
    fn nilseq_rows() {
        let p = Params {
            n: vec![1000],
            x: vec![1000],
            h: Some(HRule::Absolute(50)),
            nil: Some(NilParams {
                coeffs: vec![[0.0; 3], [0.5f64.sqrt(), 0.3, 0.0]],
                function: "horizontal(1,1)".into(),
            }),
            ..Params::default()
        };
        let rows = run(Kind::Nilseq, &p, 0, &Context::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].value("statistic"), Some("defect"));
    }
}
