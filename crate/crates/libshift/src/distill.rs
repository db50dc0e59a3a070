//! Migration-knowledge distillation: sample use cases, implementations,
//! tests, and migrations from a chat model, then validate everything in the
//! sandbox and select at most one migration triple per implementation.
//!
//! Use-case generation is a self-instruct loop: a handful of seed use cases
//! come from a direct prompt, after which each new use case is prompted with
//! a few previously generated ones as exemplars. Implementations, tests, and
//! migrations are stochastic batches; malformed completions in a batch are
//! discarded rather than retried, since the batch itself provides
//! redundancy. Only use-case slots are retried, because exactly N use cases
//! are required.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{ChatClient, ChatError, ChatMessage, ChatRequest};
use crate::sandbox::{self, SandboxConfig};

pub const USE_CASE_SEED_PROMPT: &str = include_str!("../assets/prompts/use_case_seed.md");
pub const USE_CASE_MORE_PROMPT: &str = include_str!("../assets/prompts/use_case_more.md");
pub const IMPLEMENTATION_PROMPT: &str = include_str!("../assets/prompts/implementation.md");
pub const TESTS_PROMPT: &str = include_str!("../assets/prompts/tests.md");
pub const MIGRATION_PROMPT: &str = include_str!("../assets/prompts/migration.md");

/// Substitute `{{name}}` placeholders in a prompt template.
pub fn fill_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

/// The migration task: source library, target library, and the identifier
/// markers whose absence defines a completed migration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryPair {
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub source_markers: BTreeSet<String>,
    #[serde(default)]
    pub target_markers: BTreeSet<String>,
}

impl LibraryPair {
    pub fn validate(&self) -> Result<(), DistillError> {
        if self.source.is_empty() || self.target.is_empty() || self.source == self.target {
            return Err(DistillError::InvalidPair);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseCase {
    pub id: String,
    pub title: String,
    pub description: String,
}

/// Sampling counts and thresholds for one distillation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Total use cases to generate (N).
    #[serde(default = "default_use_cases")]
    pub use_cases: usize,
    /// Use cases taken from the direct seed prompt before the
    /// self-instruct loop starts.
    #[serde(default = "default_seed_use_cases")]
    pub seed_use_cases: usize,
    /// Prior use cases sampled as few-shot exemplars per loop step (k).
    #[serde(default = "default_few_shot")]
    pub few_shot: usize,
    /// Implementations sampled per use case (n).
    #[serde(default = "default_per_use_case")]
    pub implementations: usize,
    /// Test files sampled per implementation (p).
    #[serde(default = "default_per_use_case")]
    pub tests: usize,
    /// Migration attempts sampled per implementation (q).
    #[serde(default = "default_per_use_case")]
    pub migrations: usize,
    /// Minimum line coverage on both sides of a valid triple.
    #[serde(default = "default_coverage_threshold")]
    pub coverage_threshold: f64,
    /// Total retries allowed across all use-case slots.
    #[serde(default = "default_retry_budget")]
    pub retry_budget: usize,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_use_cases() -> usize {
    100
}
fn default_seed_use_cases() -> usize {
    5
}
fn default_few_shot() -> usize {
    3
}
fn default_per_use_case() -> usize {
    5
}
fn default_coverage_threshold() -> f64 {
    0.60
}
fn default_retry_budget() -> usize {
    10
}
fn default_model() -> String {
    "gpt-4o-mini".to_string()
}
fn default_temperature() -> f64 {
    0.8
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            use_cases: default_use_cases(),
            seed_use_cases: default_seed_use_cases(),
            few_shot: default_few_shot(),
            implementations: default_per_use_case(),
            tests: default_per_use_case(),
            migrations: default_per_use_case(),
            coverage_threshold: default_coverage_threshold(),
            retry_budget: default_retry_budget(),
            model: default_model(),
            temperature: default_temperature(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DistillError {
    #[error(transparent)]
    Client(#[from] ChatError),
    #[error("retry budget exhausted while generating use cases")]
    RetryBudgetExhausted,
    #[error("library pair must name two distinct, non-empty libraries")]
    InvalidPair,
    #[error("dataset I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Pipeline position of a triple. The ordering is monotone: a triple only
/// ever moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleStatus {
    Raw,
    ImplValid,
    Valid,
    Selected,
}

impl TripleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TripleStatus::Raw => "raw",
            TripleStatus::ImplValid => "impl_valid",
            TripleStatus::Valid => "valid",
            TripleStatus::Selected => "selected",
        }
    }
}

/// One (source implementation, shared tests, migration) combination with its
/// validation state.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationTriple {
    pub use_case_id: String,
    pub impl_id: usize,
    pub test_id: usize,
    pub migration_id: usize,
    pub source_impl: String,
    pub tests: String,
    pub migration: String,
    pub source_coverage: Option<f64>,
    pub migration_coverage: Option<f64>,
    pub status: TripleStatus,
}

/// All artifacts sampled for one implementation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImplSamples {
    pub code: String,
    pub tests: Vec<String>,
    pub migrations: Vec<String>,
}

/// All artifacts sampled for one use case.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub use_case: UseCase,
    pub implementations: Vec<ImplSamples>,
}

// ---------------------------------------------------------------------------
// Completion parsing
// ---------------------------------------------------------------------------

/// Parse a `Title:` / `Description:` completion. Falls back to treating the
/// first non-empty line as the title. Returns `None` when no description
/// can be recovered.
pub fn parse_use_case(completion: &str) -> Option<(String, String)> {
    let mut title = None;
    let mut description_lines: Vec<&str> = Vec::new();
    let mut in_description = false;
    for line in completion.lines() {
        let trimmed = line.trim().trim_start_matches(['#', '*', '-']).trim();
        if let Some(rest) = trimmed.strip_prefix("Title:") {
            title = Some(rest.trim().to_string());
            in_description = false;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Description:") {
            in_description = true;
            if !rest.trim().is_empty() {
                description_lines.push(rest.trim());
            }
            continue;
        }
        if in_description && !trimmed.is_empty() {
            description_lines.push(trimmed);
        }
    }
    if title.is_none() {
        // Fallback: first non-empty line is the title, the rest describes.
        let mut lines = completion.lines().filter(|l| !l.trim().is_empty());
        title = lines.next().map(|l| l.trim().to_string());
        description_lines = lines.map(str::trim).collect();
    }
    let title = title.filter(|t| !t.is_empty())?;
    let description = description_lines.join(" ");
    if description.is_empty() {
        return None;
    }
    Some((title, description))
}

/// Extract the first fenced code block. Completions without a complete
/// fenced block yield `None` and the sample is discarded.
pub fn extract_code_block(completion: &str) -> Option<String> {
    let open = completion.find("```")?;
    let after_fence = &completion[open + 3..];
    let body_start = after_fence.find('\n')? + 1;
    let body = &after_fence[body_start..];
    let close = body.find("```")?;
    Some(body[..close].trim_end().to_string() + "\n")
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

fn render_exemplars(cases: &[&UseCase]) -> String {
    cases
        .iter()
        .map(|c| format!("- Title: {}\n  Description: {}", c.title, c.description))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Generate exactly N use cases: the first slots from the seed prompt, the
/// rest from a self-instruct loop over `few_shot` sampled exemplars.
/// Unparseable completions are retried with a fresh request until the retry
/// budget runs out.
pub fn generate_use_cases(
    pair: &LibraryPair,
    client: &dyn ChatClient,
    cfg: &DistillConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<UseCase>, DistillError> {
    pair.validate()?;
    let mut cases: Vec<UseCase> = Vec::new();
    let mut retries_left = cfg.retry_budget;
    while cases.len() < cfg.use_cases {
        let slot = cases.len();
        let prompt = if slot < cfg.seed_use_cases || cases.is_empty() {
            fill_template(
                USE_CASE_SEED_PROMPT,
                &[("source", &pair.source), ("target", &pair.target)],
            )
        } else {
            let k = cfg.few_shot.min(cases.len());
            let mut picked: Vec<usize> = Vec::with_capacity(k);
            while picked.len() < k {
                let idx = rng.random_range(0..cases.len());
                if !picked.contains(&idx) {
                    picked.push(idx);
                }
            }
            let exemplars: Vec<&UseCase> = picked.iter().map(|&i| &cases[i]).collect();
            fill_template(
                USE_CASE_MORE_PROMPT,
                &[
                    ("source", pair.source.as_str()),
                    ("target", pair.target.as_str()),
                    ("examples", render_exemplars(&exemplars).as_str()),
                ],
            )
        };
        let mut attempt: u32 = 0;
        loop {
            let request = ChatRequest::new(
                cfg.model.clone(),
                vec![ChatMessage::user(prompt.clone())],
                cfg.temperature,
            )
            .with_sample_index(slot as u32 * 100 + attempt);
            let completion = client.complete(&request)?;
            if let Some((title, description)) = parse_use_case(&completion) {
                cases.push(UseCase {
                    id: format!("uc-{slot:03}"),
                    title,
                    description,
                });
                break;
            }
            if retries_left == 0 {
                return Err(DistillError::RetryBudgetExhausted);
            }
            retries_left -= 1;
            attempt += 1;
        }
    }
    Ok(cases)
}

/// Issue a batch of independent requests, optionally in parallel, keeping
/// result order aligned with request order.
fn fan_out(
    client: &dyn ChatClient,
    requests: &[ChatRequest],
    parallelism: usize,
) -> Vec<Result<String, ChatError>> {
    if requests.is_empty() {
        return Vec::new();
    }
    let workers = parallelism.max(1).min(requests.len());
    if workers == 1 {
        return requests.iter().map(|r| client.complete(r)).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<String, ChatError>>>> =
        Mutex::new((0..requests.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= requests.len() {
                    break;
                }
                let result = client.complete(&requests[idx]);
                results.lock().expect("results poisoned")[idx] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("results poisoned")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn sample_code_batch(
    client: &dyn ChatClient,
    prompt: &str,
    count: usize,
    cfg: &DistillConfig,
    parallelism: usize,
) -> Result<Vec<String>, DistillError> {
    let requests: Vec<ChatRequest> = (0..count)
        .map(|i| {
            ChatRequest::new(
                cfg.model.clone(),
                vec![ChatMessage::user(prompt.to_string())],
                cfg.temperature,
            )
            .with_sample_index(i as u32)
        })
        .collect();
    let mut out = Vec::new();
    for result in fan_out(client, &requests, parallelism) {
        let completion = result?;
        if let Some(code) = extract_code_block(&completion) {
            out.push(code);
        }
    }
    Ok(out)
}

/// Sample up to n candidate implementations of a use case in the source
/// library. Completions without a code block are discarded, not retried.
pub fn generate_implementations(
    use_case: &UseCase,
    pair: &LibraryPair,
    client: &dyn ChatClient,
    cfg: &DistillConfig,
    parallelism: usize,
) -> Result<Vec<String>, DistillError> {
    let prompt = fill_template(
        IMPLEMENTATION_PROMPT,
        &[
            ("source", pair.source.as_str()),
            ("title", use_case.title.as_str()),
            ("description", use_case.description.as_str()),
        ],
    );
    sample_code_batch(client, &prompt, cfg.implementations, cfg, parallelism)
}

/// Sample up to p test files for one implementation.
pub fn generate_tests(
    use_case: &UseCase,
    implementation: &str,
    client: &dyn ChatClient,
    cfg: &DistillConfig,
    parallelism: usize,
) -> Result<Vec<String>, DistillError> {
    let prompt = fill_template(
        TESTS_PROMPT,
        &[
            ("title", use_case.title.as_str()),
            ("description", use_case.description.as_str()),
            ("implementation", implementation),
        ],
    );
    sample_code_batch(client, &prompt, cfg.tests, cfg, parallelism)
}

/// Sample up to q migration attempts for one implementation.
pub fn generate_migrations(
    use_case: &UseCase,
    implementation: &str,
    pair: &LibraryPair,
    client: &dyn ChatClient,
    cfg: &DistillConfig,
    parallelism: usize,
) -> Result<Vec<String>, DistillError> {
    let prompt = fill_template(
        MIGRATION_PROMPT,
        &[
            ("source", pair.source.as_str()),
            ("target", pair.target.as_str()),
            ("title", use_case.title.as_str()),
            ("description", use_case.description.as_str()),
            ("implementation", implementation),
        ],
    );
    sample_code_batch(client, &prompt, cfg.migrations, cfg, parallelism)
}

/// Run the full sampling pipeline for one use case.
pub fn sample_use_case(
    use_case: &UseCase,
    pair: &LibraryPair,
    client: &dyn ChatClient,
    cfg: &DistillConfig,
    parallelism: usize,
) -> Result<CandidateSet, DistillError> {
    let mut implementations = Vec::new();
    for code in generate_implementations(use_case, pair, client, cfg, parallelism)? {
        let tests = generate_tests(use_case, &code, client, cfg, parallelism)?;
        let migrations = generate_migrations(use_case, &code, pair, client, cfg, parallelism)?;
        implementations.push(ImplSamples {
            code,
            tests,
            migrations,
        });
    }
    Ok(CandidateSet {
        use_case: use_case.clone(),
        implementations,
    })
}

// ---------------------------------------------------------------------------
// Validation and selection
// ---------------------------------------------------------------------------

/// Validate all sampled artifacts and select triples.
///
/// Stage A pairs each implementation with each of its test files and keeps
/// the passing pairs. Stage B reruns each migration attempt against every
/// surviving test file. Stage C drops triples with line coverage below the
/// threshold on either side. Finally, each implementation contributes at
/// most one selected triple: the one with the highest migration coverage,
/// ties broken by higher source coverage, then smaller test id, then
/// smaller migration id.
pub fn validate_and_select(
    sets: &[CandidateSet],
    sandbox_cfg: &SandboxConfig,
    cfg: &DistillConfig,
    parallelism: usize,
) -> Vec<MigrationTriple> {
    // Stage A: implementation validation.
    let mut pair_keys: Vec<(usize, usize, usize)> = Vec::new();
    let mut pair_items: Vec<(String, String)> = Vec::new();
    for (si, set) in sets.iter().enumerate() {
        for (ii, imp) in set.implementations.iter().enumerate() {
            for (ti, tests) in imp.tests.iter().enumerate() {
                pair_keys.push((si, ii, ti));
                pair_items.push((imp.code.clone(), tests.clone()));
            }
        }
    }
    let pair_reports = sandbox::run_tests_batch(&pair_items, sandbox_cfg, parallelism);
    let mut pair_passed: std::collections::BTreeMap<(usize, usize, usize), Option<f64>> =
        Default::default();
    for (key, report) in pair_keys.iter().zip(&pair_reports) {
        if let Ok(r) = report {
            if r.passed {
                pair_passed.insert(*key, r.coverage);
            }
        }
    }

    // Stage B: migration validation against surviving pairs.
    let mut mig_keys: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut mig_items: Vec<(String, String)> = Vec::new();
    for (&(si, ii, ti), _) in &pair_passed {
        let imp = &sets[si].implementations[ii];
        for (mi, migration) in imp.migrations.iter().enumerate() {
            mig_keys.push((si, ii, ti, mi));
            mig_items.push((migration.clone(), imp.tests[ti].clone()));
        }
    }
    let mig_reports = sandbox::run_tests_batch(&mig_items, sandbox_cfg, parallelism);
    let mut mig_passed: std::collections::BTreeMap<(usize, usize, usize, usize), Option<f64>> =
        Default::default();
    for (key, report) in mig_keys.iter().zip(&mig_reports) {
        if let Ok(r) = report {
            if r.passed {
                mig_passed.insert(*key, r.coverage);
            }
        }
    }

    // Assemble every combination with its status.
    let mut triples = Vec::new();
    for (si, set) in sets.iter().enumerate() {
        for (ii, imp) in set.implementations.iter().enumerate() {
            for (ti, tests) in imp.tests.iter().enumerate() {
                for (mi, migration) in imp.migrations.iter().enumerate() {
                    let source_coverage = pair_passed.get(&(si, ii, ti)).copied().flatten();
                    let migration_coverage =
                        mig_passed.get(&(si, ii, ti, mi)).copied().flatten();
                    let mut status = TripleStatus::Raw;
                    if pair_passed.contains_key(&(si, ii, ti)) {
                        status = TripleStatus::ImplValid;
                        if mig_passed.contains_key(&(si, ii, ti, mi)) {
                            let covered = source_coverage
                                .is_some_and(|c| c >= cfg.coverage_threshold)
                                && migration_coverage
                                    .is_some_and(|c| c >= cfg.coverage_threshold);
                            if covered {
                                status = TripleStatus::Valid;
                            }
                        }
                    }
                    triples.push(MigrationTriple {
                        use_case_id: set.use_case.id.clone(),
                        impl_id: ii,
                        test_id: ti,
                        migration_id: mi,
                        source_impl: imp.code.clone(),
                        tests: tests.clone(),
                        migration: migration.clone(),
                        source_coverage,
                        migration_coverage,
                        status,
                    });
                }
            }
        }
    }

    // Selection: best valid triple per implementation.
    let mut by_impl: std::collections::BTreeMap<(String, usize), Vec<usize>> = Default::default();
    for (idx, triple) in triples.iter().enumerate() {
        if triple.status == TripleStatus::Valid {
            by_impl
                .entry((triple.use_case_id.clone(), triple.impl_id))
                .or_default()
                .push(idx);
        }
    }
    for (_, candidates) in by_impl {
        let best = candidates
            .into_iter()
            .min_by(|&a, &b| {
                let (ta, tb) = (&triples[a], &triples[b]);
                tb.migration_coverage
                    .partial_cmp(&ta.migration_coverage)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(
                        tb.source_coverage
                            .partial_cmp(&ta.source_coverage)
                            .unwrap_or(std::cmp::Ordering::Equal),
                    )
                    .then(ta.test_id.cmp(&tb.test_id))
                    .then(ta.migration_id.cmp(&tb.migration_id))
            })
            .expect("non-empty candidate list");
        triples[best].status = TripleStatus::Selected;
    }
    triples
}

// ---------------------------------------------------------------------------
// Dataset persistence
// ---------------------------------------------------------------------------

/// One manifest line. The manifest is line-delimited JSON, one record per
/// artifact, written in a deterministic order.
#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub use_case: String,
    #[serde(rename = "impl", skip_serializing_if = "Option::is_none")]
    pub impl_id: Option<usize>,
    #[serde(rename = "test", skip_serializing_if = "Option::is_none")]
    pub test_id: Option<usize>,
    #[serde(rename = "mig", skip_serializing_if = "Option::is_none")]
    pub migration_id: Option<usize>,
    pub role: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Pointer file for one selected triple; artifact paths are relative to the
/// file's own directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleFile {
    pub use_case: String,
    pub impl_id: usize,
    pub test_id: usize,
    pub migration_id: usize,
    pub source: String,
    pub tests: String,
    pub migration: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub migration_coverage: Option<f64>,
}

/// A triple loaded back from disk, with file contents inlined.
#[derive(Debug, Clone)]
pub struct LoadedTriple {
    pub meta: TripleFile,
    pub source_text: String,
    pub tests_text: String,
    pub migration_text: String,
}

impl TripleFile {
    pub fn load(path: &Path) -> std::io::Result<LoadedTriple> {
        let raw = std::fs::read_to_string(path)?;
        let meta: TripleFile = serde_json::from_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(LoadedTriple {
            source_text: std::fs::read_to_string(base.join(&meta.source))?,
            tests_text: std::fs::read_to_string(base.join(&meta.tests))?,
            migration_text: std::fs::read_to_string(base.join(&meta.migration))?,
            meta,
        })
    }
}

/// Stage counts for one distillation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DistillCounts {
    pub use_cases: usize,
    /// Use cases with at least one implementation passing a test file.
    pub implemented: usize,
    /// Use cases with at least one valid triple.
    pub migrated: usize,
    pub valid_triples: usize,
    pub selected: usize,
}

fn impl_file(ii: usize) -> String {
    format!("impl-{ii:02}.py")
}

fn test_file(ii: usize, ti: usize) -> String {
    format!("impl-{ii:02}.test-{ti:02}.py")
}

fn mig_file(ii: usize, mi: usize) -> String {
    format!("impl-{ii:02}.mig-{mi:02}.py")
}

fn triple_file(ii: usize) -> String {
    format!("triple-{ii:02}.json")
}

/// Write the dataset directory: one subdirectory per use case holding every
/// sampled artifact, a pointer file per selected triple, and a manifest.
/// Output is byte-deterministic for identical inputs.
pub fn write_dataset(
    dir: &Path,
    sets: &[CandidateSet],
    triples: &[MigrationTriple],
) -> Result<DistillCounts, DistillError> {
    std::fs::create_dir_all(dir)?;
    let mut manifest: Vec<ManifestRecord> = Vec::new();

    let status_of = |pred: &dyn Fn(&MigrationTriple) -> bool, floor: TripleStatus| {
        triples
            .iter()
            .filter(|t| pred(t))
            .map(|t| t.status)
            .max()
            .filter(|s| *s >= floor)
    };

    for set in sets {
        let uc_dir = dir.join(&set.use_case.id);
        std::fs::create_dir_all(&uc_dir)?;
        let uc_rel = |name: &str| format!("{}/{}", set.use_case.id, name);

        std::fs::write(
            uc_dir.join("use_case.json"),
            serde_json::to_string(&set.use_case).expect("use case serializes"),
        )?;
        let uc_status = status_of(&|t| t.use_case_id == set.use_case.id, TripleStatus::ImplValid);
        manifest.push(ManifestRecord {
            use_case: set.use_case.id.clone(),
            impl_id: None,
            test_id: None,
            migration_id: None,
            role: "use_case".into(),
            status: match uc_status {
                Some(s) if s >= TripleStatus::Valid => "migrated".into(),
                Some(_) => "implemented".into(),
                None => "raw".into(),
            },
            coverage: None,
            path: Some(uc_rel("use_case.json")),
        });

        for (ii, imp) in set.implementations.iter().enumerate() {
            std::fs::write(uc_dir.join(impl_file(ii)), &imp.code)?;
            let impl_triples = |t: &MigrationTriple| {
                t.use_case_id == set.use_case.id && t.impl_id == ii
            };
            let impl_status = status_of(&impl_triples, TripleStatus::ImplValid);
            let best_cov = triples
                .iter()
                .filter(|t| impl_triples(t))
                .filter_map(|t| t.source_coverage)
                .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            manifest.push(ManifestRecord {
                use_case: set.use_case.id.clone(),
                impl_id: Some(ii),
                test_id: None,
                migration_id: None,
                role: "implementation".into(),
                status: if impl_status.is_some() { "impl_valid" } else { "raw" }.into(),
                coverage: best_cov,
                path: Some(uc_rel(&impl_file(ii))),
            });

            for (ti, tests) in imp.tests.iter().enumerate() {
                std::fs::write(uc_dir.join(test_file(ii, ti)), tests)?;
                let pair = |t: &MigrationTriple| impl_triples(t) && t.test_id == ti;
                let pair_status = status_of(&pair, TripleStatus::ImplValid);
                let pair_cov = triples
                    .iter()
                    .find(|t| pair(t) && t.source_coverage.is_some())
                    .and_then(|t| t.source_coverage);
                manifest.push(ManifestRecord {
                    use_case: set.use_case.id.clone(),
                    impl_id: Some(ii),
                    test_id: Some(ti),
                    migration_id: None,
                    role: "test".into(),
                    status: if pair_status.is_some() { "impl_valid" } else { "raw" }.into(),
                    coverage: pair_cov,
                    path: Some(uc_rel(&test_file(ii, ti))),
                });
            }

            for (mi, migration) in imp.migrations.iter().enumerate() {
                std::fs::write(uc_dir.join(mig_file(ii, mi)), migration)?;
                let mig = |t: &MigrationTriple| impl_triples(t) && t.migration_id == mi;
                let mig_status = status_of(&mig, TripleStatus::Valid);
                let best_mig_cov = triples
                    .iter()
                    .filter(|t| mig(t))
                    .filter_map(|t| t.migration_coverage)
                    .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                manifest.push(ManifestRecord {
                    use_case: set.use_case.id.clone(),
                    impl_id: Some(ii),
                    test_id: None,
                    migration_id: Some(mi),
                    role: "migration".into(),
                    status: mig_status.map(|s| s.as_str()).unwrap_or("raw").into(),
                    coverage: best_mig_cov,
                    path: Some(uc_rel(&mig_file(ii, mi))),
                });
            }
        }
    }

    // Triple records and pointer files for selected triples.
    for triple in triples {
        if triple.status < TripleStatus::Valid {
            continue;
        }
        let path = if triple.status == TripleStatus::Selected {
            let uc_dir = dir.join(&triple.use_case_id);
            let pointer = TripleFile {
                use_case: triple.use_case_id.clone(),
                impl_id: triple.impl_id,
                test_id: triple.test_id,
                migration_id: triple.migration_id,
                source: impl_file(triple.impl_id),
                tests: test_file(triple.impl_id, triple.test_id),
                migration: mig_file(triple.impl_id, triple.migration_id),
                source_coverage: triple.source_coverage,
                migration_coverage: triple.migration_coverage,
            };
            let name = triple_file(triple.impl_id);
            std::fs::write(
                uc_dir.join(&name),
                serde_json::to_string_pretty(&pointer).expect("triple serializes"),
            )?;
            Some(format!("{}/{}", triple.use_case_id, name))
        } else {
            None
        };
        manifest.push(ManifestRecord {
            use_case: triple.use_case_id.clone(),
            impl_id: Some(triple.impl_id),
            test_id: Some(triple.test_id),
            migration_id: Some(triple.migration_id),
            role: "triple".into(),
            status: triple.status.as_str().into(),
            coverage: triple.migration_coverage,
            path,
        });
    }

    let mut lines: Vec<String> = manifest
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect();
    lines.push(String::new());
    std::fs::write(dir.join("manifest.jsonl"), lines.join("\n"))?;

    Ok(counts_for(sets, triples))
}

pub fn counts_for(sets: &[CandidateSet], triples: &[MigrationTriple]) -> DistillCounts {
    let implemented = sets
        .iter()
        .filter(|s| {
            triples
                .iter()
                .any(|t| t.use_case_id == s.use_case.id && t.status >= TripleStatus::ImplValid)
        })
        .count();
    let migrated = sets
        .iter()
        .filter(|s| {
            triples
                .iter()
                .any(|t| t.use_case_id == s.use_case.id && t.status >= TripleStatus::Valid)
        })
        .count();
    DistillCounts {
        use_cases: sets.len(),
        implemented,
        migrated,
        valid_triples: triples
            .iter()
            .filter(|t| t.status >= TripleStatus::Valid)
            .count(),
        selected: triples
            .iter()
            .filter(|t| t.status == TripleStatus::Selected)
            .count(),
    }
}
