//! Acceptance run: one PASS/FAIL line per criterion, each timed against its
//! runtime budget. Exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use polymoments::mc_engine::DEFAULT_SAMPLES;
use polymoments::validation::{exact_suite, monte_carlo_suite, run_suite, ValidationCase};

struct Criterion {
    id: u8,
    title: &'static str,
    budget: Option<Duration>,
}

const CRITERIA: [Criterion; 8] = [
    Criterion { id: 1, title: "combinatorial exactness", budget: Some(Duration::from_secs(10)) },
    Criterion { id: 2, title: "generating-function identity", budget: Some(Duration::from_secs(5)) },
    Criterion { id: 3, title: "fourth-moment bridge", budget: Some(Duration::from_secs(30)) },
    Criterion { id: 4, title: "cross-formula equalities", budget: Some(Duration::from_secs(1)) },
    Criterion { id: 5, title: "monte carlo vs exact", budget: Some(Duration::from_secs(600)) },
    Criterion { id: 6, title: "miles formula", budget: Some(Duration::from_secs(180)) },
    Criterion { id: 7, title: "inequality suites", budget: None },
    Criterion { id: 8, title: "asymptotic trends", budget: Some(Duration::from_secs(1)) },
];

fn cases_for(id: u8, all: &[ValidationCase]) -> Vec<ValidationCase> {
    all.iter().filter(|c| c.criterion == Some(id)).cloned().collect()
}

fn line(id: u8, title: &str, ok: bool, detail: &str) -> bool {
    println!("criterion {id} [{}] {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn run_bin(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_polymoments"))
        .args(args)
        .env_remove(polymoments_cli::SAMPLES_ENV)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).trim().to_string());
    }
    Ok(out.stdout)
}

fn reproducibility() -> (bool, String) {
    let invocations: [&[&str]; 3] = [
        &["simulate", "--n", "3", "--q", "1.5", "--stat", "V", "--p", "2", "--samples", "200000", "--seed", "7"],
        &["simulate", "--n", "5", "--q", "inf", "--stat", "U", "--p", "1", "--samples", "100000", "--seed", "42", "--batches", "50"],
        &["simulate", "--n", "5", "--q", "2", "--stat", "miles", "--k", "3", "--s", "3", "--p", "1", "--samples", "100000", "--seed", "9"],
    ];
    let mut checked = 0;
    for args in invocations {
        let mut outputs = Vec::new();
        for threads in [None, Some("1"), Some("4"), Some("1")] {
            let mut full = args.to_vec();
            if let Some(t) = threads {
                full.extend(["--threads", t]);
            }
            match run_bin(&full) {
                Ok(bytes) => outputs.push(bytes),
                Err(e) => return (false, format!("{args:?} failed: {e}")),
            }
            let argv = std::iter::once("polymoments").chain(full.iter().copied());
            outputs.push(polymoments_cli::dispatch(argv).document.into_bytes());
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return (false, format!("output differs across runs for {args:?}"));
        }
        checked += outputs.len();
    }
    (true, format!("{checked} runs byte-identical across repeats and thread hints"))
}

fn main() -> ExitCode {
    let mut all = exact_suite();
    all.extend(monte_carlo_suite(DEFAULT_SAMPLES));
    let mut failed = 0;

    for c in &CRITERIA {
        let cases = cases_for(c.id, &all);
        let start = Instant::now();
        let report = run_suite(&cases, None);
        let elapsed = start.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let failing: Vec<String> = report
            .cases
            .iter()
            .filter(|r| !r.passed)
            .map(|r| match &r.error {
                Some(e) => format!("{} ({e})", r.id),
                None => format!("{} ({})", r.id, r.detail),
            })
            .collect();
        let budget = c.budget.map(|b| format!(" / {}s", b.as_secs())).unwrap_or_default();
        let mut detail = format!(
            "{}/{} cases in {:.2}s{budget}",
            report.summary.passed,
            report.summary.total,
            elapsed.as_secs_f64()
        );
        if !in_budget {
            detail.push_str(", over budget");
        }
        if !failing.is_empty() {
            detail.push_str(&format!("; failing: {}", failing.join("; ")));
        }
        if !line(c.id, c.title, report.all_passed() && in_budget && report.summary.total > 0, &detail) {
            failed += 1;
        }
    }

    let (ok, detail) = reproducibility();
    if !line(9, "reproducibility", ok, &detail) {
        failed += 1;
    }

    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
