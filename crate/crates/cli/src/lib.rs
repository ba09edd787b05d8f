//! Command-line surface of `polymoments`.
//!
//! [`dispatch`] parses an argument vector, runs one subcommand and returns the
//! exit code with the emitted document, so the binary and the tests share a
//! single code path. JSON documents have the shape
//! `{"meta": {...}, "results": [...]}` and re-parse into [`Document`].

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use polymoments::exact_moments::{
    asymptotic_ratio, euclid_moment, fourth_moment_V, fourth_moment_is_extension,
    isotropic_second_moments, miles_moment, second_moment_V,
};
use polymoments::mc_engine::{
    estimate_moment_with_threads, SampleConfig, Statistic, DEFAULT_BATCHES, DEFAULT_SAMPLES,
};
use polymoments::perm_combinatorics::{d_table, enumerate_t, log_d_sequence, verify_sign};
use polymoments::validation::{
    default_suite_with_samples, exact_suite, monte_carlo_suite, run_suite, CaseResult, Summary,
};
use polymoments::{BodySpec, LogPositive, QIndex};

/// Environment variable that overrides the default Monte Carlo sample count.
pub const SAMPLES_ENV: &str = "POLYMOMENTS_SAMPLES";

const MAX_DNK_N: usize = 5000;
const MAX_ASYMPT_N: usize = 20_000;

/// Exit code for a validation run with failing cases.
pub const EXIT_FAILED: i32 = 1;
/// Exit code for invalid arguments or failed preconditions.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "polymoments",
    version,
    about = "Exact and simulated volume moments of random simplices and crosspolytopes in l_q balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for sampling; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write the document to this path instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format (default: csv for `table`, json otherwise)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Record the current Unix time in the document metadata
    #[arg(long, global = true)]
    timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExactStat {
    #[value(name = "U2")]
    U2,
    #[value(name = "V2")]
    V2,
    #[value(name = "V4")]
    V4,
    #[value(name = "Vp_euclid")]
    VpEuclid,
    #[value(name = "miles")]
    Miles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimStat {
    #[value(name = "U")]
    U,
    #[value(name = "V")]
    V,
    #[value(name = "miles")]
    Miles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Default,
    Exact,
    MonteCarlo,
}

fn parse_q(s: &str) -> Result<QIndex, String> {
    s.parse::<QIndex>().map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form moment
    Exact {
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_q)]
        q: QIndex,
        #[arg(long, value_enum)]
        stat: ExactStat,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
    },
    /// Monte Carlo estimate of a moment
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_q)]
        q: QIndex,
        #[arg(long, value_enum)]
        stat: SimStat,
        #[arg(long)]
        p: f64,
        /// Sample count [default: $POLYMOMENTS_SAMPLES or 1000000]
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BATCHES)]
        batches: u32,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
    },
    /// Run a validation suite; exit status 0 iff every case passes
    Validate {
        #[arg(long, value_enum, default_value = "default")]
        suite: Suite,
    },
    /// Counts d_m and d_{m,k} of permutation triples
    Dnk {
        #[arg(long)]
        n: usize,
    },
    /// List the permutation triples of T_n (n <= 6)
    Enumerate {
        #[arg(long)]
        n: usize,
        /// Omit the member list
        #[arg(long)]
        histogram_only: bool,
    },
    /// Grid of exact moments
    Table {
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_q)]
        q_list: Vec<QIndex>,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,4")]
        moments: Vec<u32>,
    },
    /// Ratio of a moment to its leading asymptotic for n = 1..n_max
    Asympt {
        #[arg(long, value_parser = parse_q)]
        q: QIndex,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 2)]
        moment: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch, present only with `--timestamp`.
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub meta: Meta,
    pub results: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub stat: String,
    pub n: usize,
    pub q: QIndex,
    pub p: Option<f64>,
    pub k: Option<usize>,
    pub s: Option<usize>,
    pub log_value: f64,
    pub value: Option<f64>,
    /// The formula is evaluated outside the dimension range it was derived for.
    pub extended_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResult {
    pub log_value: f64,
    pub value: Option<f64>,
    pub log_stderr: f64,
    pub samples: u64,
    pub zero_volume_samples: u64,
    pub config: SampleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnkRow {
    pub m: usize,
    /// `d_m` in decimal.
    pub d: String,
    pub log_d: Option<f64>,
    /// `d_{m,0} .. d_{m,m}` in decimal.
    pub row: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    pub t3: Vec<usize>,
    pub fixed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerateResult {
    pub n: usize,
    pub count: u64,
    /// Members by number of fully fixed coordinates.
    pub histogram: Vec<u64>,
    pub all_signs_positive: bool,
    pub members: Option<Vec<MemberRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: usize,
    pub q: QIndex,
    pub moment_order: u32,
    pub log_value: f64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptRow {
    pub n: usize,
    pub q: QIndex,
    pub moment_order: u32,
    pub ratio: f64,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub code: i32,
    /// The document for the output target; empty on usage errors.
    pub document: String,
    /// A single-line message for standard error.
    pub diagnostic: Option<String>,
    pub out: Option<PathBuf>,
}

impl Emitted {
    fn usage(message: impl std::fmt::Display) -> Self {
        Emitted {
            code: EXIT_USAGE,
            document: String::new(),
            diagnostic: Some(format!("error: {message}")),
            out: None,
        }
    }
}

struct Rendered {
    json: String,
    csv: Option<Csv>,
    code: i32,
}

struct Csv {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn render<T: Serialize>(doc: &Document<T>, csv: Option<Csv>) -> Result<Rendered, String> {
    let mut json = serde_json::to_string_pretty(doc).map_err(|e| e.to_string())?;
    json.push('\n');
    Ok(Rendered { json, csv, code: 0 })
}

fn write_csv(csv: &Csv) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&csv.header).map_err(|e| e.to_string())?;
    for row in &csv.rows {
        w.write_record(row).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn meta(seed: Option<u64>, timestamp: bool) -> Meta {
    Meta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        timestamp: timestamp
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
    }
}

/// The default sample count: `$POLYMOMENTS_SAMPLES` when set, else one million.
pub fn default_samples() -> Result<u64, String> {
    match std::env::var(SAMPLES_ENV) {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("{SAMPLES_ENV} must be a positive integer, got {v:?}")),
        },
        Err(_) => Ok(DEFAULT_SAMPLES),
    }
}

fn reject_unused(stat: &str, flags: &[(&str, bool)]) -> Result<(), String> {
    match flags.iter().find(|(_, present)| *present) {
        Some((name, _)) => Err(format!("--{name} is not used by --stat {stat}")),
        None => Ok(()),
    }
}

fn require<T: Copy>(name: &str, stat: &str, v: Option<T>) -> Result<T, String> {
    v.ok_or_else(|| format!("--stat {stat} requires --{name}"))
}

fn require_euclidean(stat: &str, q: QIndex) -> Result<(), String> {
    if q == QIndex::TWO {
        Ok(())
    } else {
        Err(format!("--stat {stat} is defined for the Euclidean ball; --q must be 2, got {q}"))
    }
}

fn exact(
    n: usize,
    q: QIndex,
    stat: ExactStat,
    p: Option<f64>,
    k: Option<usize>,
    s: Option<usize>,
) -> Result<ExactResult, String> {
    let name = stat.to_possible_value().expect("no skipped variants").get_name().to_string();
    let e = |x: polymoments::Error| x.to_string();
    let no_pks = [("p", p.is_some()), ("k", k.is_some()), ("s", s.is_some())];
    let mut extended_range = false;
    let value: LogPositive = match stat {
        ExactStat::U2 | ExactStat::V2 | ExactStat::V4 => {
            reject_unused(&name, &no_pks)?;
            let body = BodySpec::new(n, q).map_err(e)?;
            match stat {
                ExactStat::U2 => isotropic_second_moments(body).1,
                ExactStat::V2 => second_moment_V(body),
                _ => {
                    extended_range = fourth_moment_is_extension(body);
                    fourth_moment_V(body)
                }
            }
        }
        ExactStat::VpEuclid => {
            reject_unused(&name, &no_pks[1..])?;
            require_euclidean(&name, q)?;
            euclid_moment(n, require("p", &name, p)?).map_err(e)?
        }
        ExactStat::Miles => {
            require_euclidean(&name, q)?;
            miles_moment(n, require("k", &name, k)?, require("s", &name, s)?, require("p", &name, p)?)
                .map_err(e)?
        }
    };
    Ok(ExactResult {
        stat: name,
        n,
        q,
        p,
        k,
        s,
        log_value: value.ln(),
        value: value.checked_value(),
        extended_range,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    n: usize,
    q: QIndex,
    stat: SimStat,
    p: f64,
    samples: Option<u64>,
    seed: u64,
    batches: u32,
    k: Option<usize>,
    s: Option<usize>,
    threads: Option<usize>,
) -> Result<SimulateResult, String> {
    let statistic = match stat {
        SimStat::U | SimStat::V => {
            let name = if stat == SimStat::U { "U" } else { "V" };
            reject_unused(name, &[("k", k.is_some()), ("s", s.is_some())])?;
            if stat == SimStat::U {
                Statistic::USimplex
            } else {
                Statistic::VCrosspolytope
            }
        }
        SimStat::Miles => Statistic::VMiles {
            k: require("k", "miles", k)?,
            s: require("s", "miles", s)?,
        },
    };
    let samples = match samples {
        Some(v) => v,
        None => default_samples()?,
    };
    let body = BodySpec::new(n, q).map_err(|e| e.to_string())?;
    let config = SampleConfig::new(body, statistic, p, samples, seed).with_batches(batches);
    let est = estimate_moment_with_threads(&config, threads).map_err(|e| e.to_string())?;
    Ok(SimulateResult {
        log_value: est.log_mean,
        value: LogPositive::from_ln(est.log_mean).checked_value(),
        log_stderr: est.log_stderr,
        samples: est.samples,
        zero_volume_samples: est.zero_volume_samples,
        config: est.config,
    })
}

fn table(qs: &[QIndex], ns: &[usize], moments: &[u32]) -> Result<Vec<TableRow>, String> {
    if let Some(m) = moments.iter().find(|m| **m != 2 && **m != 4) {
        return Err(format!("--moments accepts 2 and 4, got {m}"));
    }
    let mut bodies = Vec::new();
    for &q in qs {
        for &n in ns {
            bodies.push(BodySpec::new(n, q).map_err(|e| e.to_string())?);
        }
    }
    Ok(bodies
        .into_iter()
        .flat_map(|body| {
            moments.iter().map(move |&m| {
                let v = if m == 2 { second_moment_V(body) } else { fourth_moment_V(body) };
                TableRow {
                    n: body.n,
                    q: body.q,
                    moment_order: m,
                    log_value: v.ln(),
                    value: v.checked_value(),
                }
            })
        })
        .collect())
}

fn run(cli: Cli) -> Result<Rendered, String> {
    let ts = cli.timestamp;
    match cli.command {
        Command::Exact { n, q, stat, p, k, s } => {
            let r = exact(n, q, stat, p, k, s)?;
            let csv = Csv {
                header: vec!["stat", "n", "q", "p", "k", "s", "log_value", "value", "extended_range"],
                rows: vec![vec![
                    r.stat.clone(),
                    r.n.to_string(),
                    r.q.to_string(),
                    opt(r.p),
                    r.k.map(|v| v.to_string()).unwrap_or_default(),
                    r.s.map(|v| v.to_string()).unwrap_or_default(),
                    r.log_value.to_string(),
                    opt(r.value),
                    r.extended_range.to_string(),
                ]],
            };
            render(&Document { meta: meta(None, ts), results: vec![r], summary: None }, Some(csv))
        }
        Command::Simulate { n, q, stat, p, samples, seed, batches, k, s } => {
            let r = simulate(n, q, stat, p, samples, seed, batches, k, s, cli.threads)?;
            let csv = Csv {
                header: vec!["log_value", "value", "log_stderr", "samples", "zero_volume_samples", "seed"],
                rows: vec![vec![
                    r.log_value.to_string(),
                    opt(r.value),
                    r.log_stderr.to_string(),
                    r.samples.to_string(),
                    r.zero_volume_samples.to_string(),
                    seed.to_string(),
                ]],
            };
            render(&Document { meta: meta(Some(seed), ts), results: vec![r], summary: None }, Some(csv))
        }
        Command::Validate { suite } => {
            let cases = match suite {
                Suite::Default => default_suite_with_samples(default_samples()?),
                Suite::Exact => exact_suite(),
                Suite::MonteCarlo => monte_carlo_suite(default_samples()?),
            };
            let report = run_suite(&cases, cli.threads);
            let code = if report.all_passed() { 0 } else { EXIT_FAILED };
            let csv = Csv {
                header: vec![
                    "id", "criterion", "kind", "passed", "exact_log", "estimate_log", "stderr_log",
                    "z_score", "rel_error", "margin", "error",
                ],
                rows: report
                    .cases
                    .iter()
                    .map(|c: &CaseResult| {
                        vec![
                            c.id.clone(),
                            c.criterion.map(|v| v.to_string()).unwrap_or_default(),
                            serde_json::to_value(c.kind)
                                .ok()
                                .and_then(|v| v.as_str().map(str::to_string))
                                .unwrap_or_default(),
                            c.passed.to_string(),
                            opt(c.exact_log),
                            opt(c.estimate_log),
                            opt(c.stderr_log),
                            opt(c.z_score),
                            opt(c.rel_error),
                            opt(c.margin),
                            c.error.clone().unwrap_or_default(),
                        ]
                    })
                    .collect(),
            };
            let doc = Document {
                meta: meta(None, ts),
                summary: Some(report.summary),
                results: report.cases,
            };
            let mut rendered = render(&doc, Some(csv))?;
            rendered.code = code;
            Ok(rendered)
        }
        Command::Dnk { n } => {
            if n > MAX_DNK_N {
                return Err(format!("--n must be at most {MAX_DNK_N}, got {n}"));
            }
            let table = d_table(n);
            let logs = log_d_sequence(n);
            let rows: Vec<DnkRow> = (0..=n)
                .map(|m| DnkRow {
                    m,
                    d: table.d[m].to_string(),
                    log_d: logs[m].is_finite().then_some(logs[m]),
                    row: table.row(m).iter().map(|x| x.to_string()).collect(),
                })
                .collect();
            let csv = Csv {
                header: vec!["m", "d", "row"],
                rows: rows.iter().map(|r| vec![r.m.to_string(), r.d.clone(), r.row.join(" ")]).collect(),
            };
            render(&Document { meta: meta(None, ts), results: rows, summary: None }, Some(csv))
        }
        Command::Enumerate { n, histogram_only } => {
            let members = enumerate_t(n).map_err(|e| e.to_string())?;
            let mut histogram = vec![0u64; n + 1];
            for m in &members {
                histogram[m.fixed] += 1;
            }
            let result = EnumerateResult {
                n,
                count: members.len() as u64,
                all_signs_positive: verify_sign(n).map_err(|e| e.to_string())?,
                members: (!histogram_only).then(|| {
                    members
                        .iter()
                        .map(|m| MemberRow {
                            t1: m.triple.t1.one_based(),
                            t2: m.triple.t2.one_based(),
                            t3: m.triple.t3.one_based(),
                            fixed: m.fixed,
                        })
                        .collect()
                }),
                histogram,
            };
            let csv = Csv {
                header: vec!["k", "count"],
                rows: result
                    .histogram
                    .iter()
                    .enumerate()
                    .map(|(k, c)| vec![k.to_string(), c.to_string()])
                    .collect(),
            };
            render(&Document { meta: meta(None, ts), results: vec![result], summary: None }, Some(csv))
        }
        Command::Table { q_list, n_list, moments } => {
            let rows = table(&q_list, &n_list, &moments)?;
            let csv = Csv {
                header: vec!["n", "q", "moment_order", "log_value", "value"],
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            r.q.to_string(),
                            r.moment_order.to_string(),
                            r.log_value.to_string(),
                            opt(r.value),
                        ]
                    })
                    .collect(),
            };
            render(&Document { meta: meta(None, ts), results: rows, summary: None }, Some(csv))
        }
        Command::Asympt { q, n_max, moment } => {
            if n_max == 0 || n_max > MAX_ASYMPT_N {
                return Err(format!("--n-max must be in 1..={MAX_ASYMPT_N}, got {n_max}"));
            }
            let rows = (1..=n_max)
                .map(|n| {
                    asymptotic_ratio(n, q, moment)
                        .map(|ratio| AsymptRow { n, q, moment_order: moment, ratio })
                        .map_err(|e| e.to_string())
                })
                .collect::<Result<Vec<_>, _>>()?;
            let csv = Csv {
                header: vec!["n", "q", "moment_order", "ratio"],
                rows: rows
                    .iter()
                    .map(|r| vec![r.n.to_string(), r.q.to_string(), r.moment_order.to_string(), r.ratio.to_string()])
                    .collect(),
            };
            render(&Document { meta: meta(None, ts), results: rows, summary: None }, Some(csv))
        }
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn dispatch<I, T>(argv: I) -> Emitted
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Emitted {
                    code: 0,
                    document: e.to_string(),
                    diagnostic: None,
                    out: None,
                },
                _ => {
                    let text = e.to_string();
                    let line = text.lines().next().unwrap_or("invalid arguments");
                    Emitted::usage(line.trim_start_matches("error: "))
                }
            };
        }
    };
    let out = cli.out.clone();
    let csv_default = matches!(cli.command, Command::Table { .. });
    let format = cli.format.unwrap_or(if csv_default { Format::Csv } else { Format::Json });
    let rendered = match run(cli) {
        Ok(r) => r,
        Err(msg) => return Emitted::usage(msg),
    };
    let document = match format {
        Format::Json => rendered.json,
        Format::Csv => match rendered.csv.as_ref().map(write_csv) {
            Some(Ok(text)) => text,
            Some(Err(msg)) => return Emitted::usage(msg),
            None => return Emitted::usage("csv output is not available for this command"),
        },
    };
    Emitted {
        code: rendered.code,
        document,
        diagnostic: (rendered.code == EXIT_FAILED).then(|| "validation failed".to_string()),
        out,
    }
}
