//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string; errors surface as JavaScript exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use polymoments::exact_moments::{
    asymptotic_ratio, euclid_moment, fourth_moment_V, isotropic_second_moments, miles_moment,
    second_moment_V,
};
use polymoments::mc_engine::{estimate_moment, SampleConfig, Statistic};
use polymoments::perm_combinatorics::d_table;
use polymoments::{BodySpec, LogPositive, QIndex};

const MAX_CURVE_N: usize = 2000;
const MAX_SAMPLES: u64 = 2_000_000;
const MAX_TABLE_N: usize = 60;

#[derive(Serialize)]
struct CurvePoint {
    n: usize,
    log_value: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct Curve {
    q: String,
    points: Vec<CurvePoint>,
}

#[derive(Serialize)]
struct Simulation {
    log_mean: f64,
    log_stderr: f64,
    exact_log: Option<f64>,
    z: Option<f64>,
    zero_volume_samples: u64,
}

#[derive(Serialize)]
struct DRow {
    m: usize,
    d: String,
    row: Vec<String>,
}

fn parse_q(s: &str) -> Result<QIndex, String> {
    s.parse::<QIndex>().map_err(|e| format!("q = {s:?}: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// `ln E V^order` and its ratio to the leading asymptotic for `n = 1..=n_max`,
/// one curve per comma-separated `q`.
pub fn moment_curves_json(q_list: &str, n_max: usize, order: u32) -> Result<String, String> {
    if n_max == 0 || n_max > MAX_CURVE_N {
        return Err(format!("n_max must be in 1..={MAX_CURVE_N}"));
    }
    if order != 2 && order != 4 {
        return Err("moment order must be 2 or 4".into());
    }
    let curves = q_list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|qs| {
            let q = parse_q(qs)?;
            let points = (1..=n_max)
                .map(|n| {
                    let body = BodySpec::new(n, q).map_err(|e| e.to_string())?;
                    let m = if order == 2 { second_moment_V(body) } else { fourth_moment_V(body) };
                    Ok(CurvePoint {
                        n,
                        log_value: m.ln(),
                        ratio: asymptotic_ratio(n, q, order).map_err(|e| e.to_string())?,
                    })
                })
                .collect::<Result<Vec<_>, String>>()?;
            Ok(Curve { q: q.to_string(), points })
        })
        .collect::<Result<Vec<_>, String>>()?;
    if curves.is_empty() {
        return Err("no q values given".into());
    }
    to_json(&curves)
}

/// The closed form matching a sample configuration, where one exists.
fn exact_reference(config: &SampleConfig) -> Option<LogPositive> {
    let SampleConfig { body, statistic, power, .. } = *config;
    match statistic {
        Statistic::VCrosspolytope if power == 2.0 => Some(second_moment_V(body)),
        Statistic::VCrosspolytope if power == 4.0 => Some(fourth_moment_V(body)),
        Statistic::VCrosspolytope if body.q == QIndex::TWO => euclid_moment(body.n, power).ok(),
        Statistic::USimplex if power == 2.0 => Some(isotropic_second_moments(body).1),
        Statistic::VMiles { k, s } => miles_moment(body.n, k, s, power).ok(),
        _ => None,
    }
}

/// Monte Carlo estimate of `E stat^p` next to its closed form.
/// `stat` is `"U"`, `"V"`, or `"miles:k:s"`.
pub fn simulate_json(n: usize, q: &str, stat: &str, p: f64, samples: u64, seed: u64) -> Result<String, String> {
    if samples > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples in the browser"));
    }
    let statistic = match stat {
        "U" => Statistic::USimplex,
        "V" => Statistic::VCrosspolytope,
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            match parts.as_slice() {
                ["miles", k, s] => Statistic::VMiles {
                    k: k.parse().map_err(|_| format!("bad k in {other:?}"))?,
                    s: s.parse().map_err(|_| format!("bad s in {other:?}"))?,
                },
                _ => return Err(format!("unknown statistic {other:?}")),
            }
        }
    };
    let body = BodySpec::new(n, parse_q(q)?).map_err(|e| e.to_string())?;
    let config = SampleConfig::new(body, statistic, p, samples, seed);
    let est = estimate_moment(&config).map_err(|e| e.to_string())?;
    let exact = exact_reference(&config).map(LogPositive::ln);
    to_json(&Simulation {
        log_mean: est.log_mean,
        log_stderr: est.log_stderr,
        exact_log: exact,
        z: exact.map(|e| est.z_score(e)).filter(|z| z.is_finite()),
        zero_volume_samples: est.zero_volume_samples,
    })
}

/// Rows `m = 0..=n` of the permutation-triple counts.
pub fn d_table_json(n: usize) -> Result<String, String> {
    if n > MAX_TABLE_N {
        return Err(format!("n must be at most {MAX_TABLE_N}"));
    }
    let table = d_table(n);
    let rows: Vec<DRow> = (0..=n)
        .map(|m| DRow {
            m,
            d: table.d[m].to_string(),
            row: table.row(m).iter().map(ToString::to_string).collect(),
        })
        .collect();
    to_json(&rows)
}

#[wasm_bindgen]
pub fn moment_curves(q_list: &str, n_max: usize, order: u32) -> Result<String, JsError> {
    moment_curves_json(q_list, n_max, order).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(n: usize, q: &str, stat: &str, p: f64, samples: u32, seed: u32) -> Result<String, JsError> {
    simulate_json(n, q, stat, p, u64::from(samples), u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dnk_table(n: usize) -> Result<String, JsError> {
    d_table_json(n).map_err(|e| JsError::new(&e))
}
