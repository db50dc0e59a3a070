//! Sandboxed test execution: one implementation file plus one test file in a
//! fresh temporary directory, run by a configurable command with a timeout,
//! with line coverage parsed from a structured report the runner writes.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker inserted into the captured output when the runner is killed.
pub const TIMEOUT_MARKER: &str = "[sandbox timeout]";

const DEFAULT_RUNNER_SCRIPT: &str = include_str!("../assets/pytest_cov_runner.py");

/// Configuration for the test runner.
///
/// The runner command is a template; each argument may contain the
/// placeholders `{impl}`, `{tests}`, `{coverage}`, `{dir}` and `{runner}`.
/// `{runner}` expands to the bundled pytest+coverage runner script, which is
/// materialized into the working directory. Overriding the template makes
/// the module subject-language-agnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandboxConfig {
    #[serde(default = "default_runner")]
    pub runner: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Optional container invocation prepended to the runner command.
    #[serde(default)]
    pub container: Vec<String>,
    #[serde(default = "default_coverage_file")]
    pub coverage_file: String,
    #[serde(default = "default_truncate")]
    pub output_limit_bytes: usize,
    /// Environment variables passed through to the child; everything else
    /// is dropped.
    #[serde(default = "default_env_allowlist")]
    pub env_allowlist: Vec<String>,
    #[serde(default = "default_impl_filename")]
    pub impl_filename: String,
    #[serde(default = "default_tests_filename")]
    pub tests_filename: String,
}

fn default_runner() -> Vec<String> {
    [
        "python3",
        "{runner}",
        "--impl",
        "{impl}",
        "--tests",
        "{tests}",
        "--out",
        "{coverage}",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

fn default_timeout() -> u64 {
    60
}

fn default_coverage_file() -> String {
    "coverage.json".to_string()
}

fn default_truncate() -> usize {
    65_536
}

fn default_env_allowlist() -> Vec<String> {
    ["PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH", "TMPDIR"]
        .into_iter()
        .map(String::from)
        .collect()
}

fn default_impl_filename() -> String {
    "implementation.py".to_string()
}

fn default_tests_filename() -> String {
    "test_implementation.py".to_string()
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            runner: default_runner(),
            timeout_secs: default_timeout(),
            container: Vec::new(),
            coverage_file: default_coverage_file(),
            output_limit_bytes: default_truncate(),
            env_allowlist: default_env_allowlist(),
            impl_filename: default_impl_filename(),
            tests_filename: default_tests_filename(),
        }
    }
}

/// Outcome of one test run. `passed` holds exactly when the runner exited
/// with code 0; `coverage` is present exactly when a parseable coverage
/// artifact was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub passed: bool,
    pub exit_code: Option<i32>,
    pub output: String,
    pub coverage: Option<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("test runner `{0}` not found")]
    RunnerNotFound(String),
    #[error("sandbox I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn fill_placeholders(arg: &str, vars: &[(&str, &str)]) -> String {
    let mut out = arg.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

/// Run `tests` against `implementation` in a fresh temporary directory.
///
/// Both files are materialized under their configured names, the runner is
/// invoked as a child process with only allowlisted environment variables,
/// and the coverage artifact (if any) is parsed for the implementation
/// file's line-coverage fraction. A timeout yields `passed = false` with
/// [`TIMEOUT_MARKER`] in the output, not an error.
pub fn run_tests(
    implementation: &str,
    tests: &str,
    env: &SandboxConfig,
) -> Result<TestReport, SandboxError> {
    let dir = tempfile::tempdir()?;
    let impl_path = dir.path().join(&env.impl_filename);
    let tests_path = dir.path().join(&env.tests_filename);
    let coverage_path = dir.path().join(&env.coverage_file);
    std::fs::write(&impl_path, implementation)?;
    std::fs::write(&tests_path, tests)?;

    let runner_path = dir.path().join("sandbox_runner.py");
    if env.runner.iter().any(|a| a.contains("{runner}")) {
        std::fs::write(&runner_path, DEFAULT_RUNNER_SCRIPT)?;
    }

    let vars = [
        ("impl", path_str(&impl_path)),
        ("tests", path_str(&tests_path)),
        ("coverage", path_str(&coverage_path)),
        ("runner", path_str(&runner_path)),
        ("dir", path_str(&PathBuf::from(dir.path()))),
    ];
    let vars: Vec<(&str, &str)> = vars.iter().map(|(k, v)| (*k, v.as_str())).collect();

    let mut argv: Vec<String> = env.container.clone();
    argv.extend(env.runner.iter().map(|a| fill_placeholders(a, &vars)));
    if argv.is_empty() {
        return Err(SandboxError::RunnerNotFound("<empty command>".to_string()));
    }

    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env_clear()
        .env("PYTHONDONTWRITEBYTECODE", "1");
    for key in &env.env_allowlist {
        if let Ok(value) = std::env::var(key) {
            command.env(key, value);
        }
    }

    let started = Instant::now();
    let mut child = command.spawn().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            SandboxError::RunnerNotFound(argv[0].clone())
        } else {
            SandboxError::Io(e)
        }
    })?;

    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");
    let out_handle = std::thread::spawn(move || drain(stdout));
    let err_handle = std::thread::spawn(move || drain(stderr));

    let deadline = started + Duration::from_secs(env.timeout_secs);
    let mut timed_out = false;
    let exit_status = loop {
        match child.try_wait()? {
            Some(status) => break Some(status),
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                timed_out = true;
                break None;
            }
            None => std::thread::sleep(Duration::from_millis(10)),
        }
    };

    let mut output = out_handle.join().unwrap_or_default();
    output.push_str(&err_handle.join().unwrap_or_default());
    if timed_out {
        output.push_str(&format!("\n{TIMEOUT_MARKER} after {}s\n", env.timeout_secs));
    }
    // The per-run directory name is noise; stable output keeps reports
    // comparable across runs.
    output = output.replace(&path_str(&PathBuf::from(dir.path())), "<sandbox>");
    output.truncate(floor_char_boundary(&output, env.output_limit_bytes));

    let exit_code = exit_status.and_then(|s| s.code());
    let passed = exit_code == Some(0);
    let coverage = parse_coverage(&coverage_path, &env.impl_filename);

    Ok(TestReport {
        passed,
        exit_code,
        output,
        coverage,
        wall_time: started.elapsed(),
    })
}

fn path_str(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn drain(mut reader: impl Read) -> String {
    let mut buf = Vec::new();
    let _ = reader.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).into_owned()
}

fn floor_char_boundary(s: &str, limit: usize) -> usize {
    if limit >= s.len() {
        return s.len();
    }
    let mut idx = limit;
    while idx > 0 && !s.is_char_boundary(idx) {
        idx -= 1;
    }
    idx
}

/// Extract the implementation file's line-coverage fraction from a
/// coverage.py-style JSON report. A missing or unparseable artifact yields
/// `None`; by contract that is not a run failure.
fn parse_coverage(path: &Path, impl_filename: &str) -> Option<f64> {
    let raw = std::fs::read_to_string(path).ok()?;
    let doc: serde_json::Value = serde_json::from_str(&raw).ok()?;
    let files = doc.get("files")?.as_object()?;
    let entry = files
        .iter()
        .find(|(name, _)| {
            name.as_str() == impl_filename || name.ends_with(&format!("/{impl_filename}"))
        })
        .map(|(_, v)| v)?;
    let summary = entry.get("summary")?;
    let fraction = match (
        summary.get("covered_lines").and_then(|v| v.as_f64()),
        summary.get("num_statements").and_then(|v| v.as_f64()),
    ) {
        (Some(covered), Some(total)) if total > 0.0 => covered / total,
        _ => summary.get("percent_covered")?.as_f64()? / 100.0,
    };
    Some(fraction.clamp(0.0, 1.0))
}

/// Run a batch of (implementation, tests) items on a bounded worker pool.
/// Results preserve input order; each item runs in its own directory and
/// failures are reported per item.
pub fn run_tests_batch(
    items: &[(String, String)],
    env: &SandboxConfig,
    parallelism: usize,
) -> Vec<Result<TestReport, SandboxError>> {
    if items.is_empty() {
        return Vec::new();
    }
    let workers = parallelism.max(1).min(items.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, Result<TestReport, SandboxError>>> =
        Mutex::new(BTreeMap::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= items.len() {
                    break;
                }
                let (implementation, tests) = &items[idx];
                let report = run_tests(implementation, tests, env);
                results.lock().expect("poisoned results").insert(idx, report);
            });
        }
    });
    results
        .into_inner()
        .expect("poisoned results")
        .into_values()
        .collect()
}

#[cfg(test)]
pub(crate) fn report_for_tests(passed: bool) -> TestReport {
    TestReport {
        passed,
        exit_code: Some(if passed { 0 } else { 1 }),
        output: String::new(),
        coverage: None,
        wall_time: Duration::ZERO,
    }
}
