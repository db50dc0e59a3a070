//! Command implementations behind the binary. Each command returns its exit
//! code; 0 is success, 1 an operational error, 2 a synthesis run that
//! exhausted its iterations, 3 validation that produced empty output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agent::{self, AgentEnv, Outcome};
use crate::config::RunConfig;
use crate::distill::{self, TripleFile};
use crate::inference;
use crate::rulegraph::{self, ExecutionLimits};
use crate::tokentree::LanguageProfile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_EXHAUSTED: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Distill(#[from] crate::distill::DistillError),
    #[error(transparent)]
    Graph(#[from] crate::rulegraph::GraphError),
    #[error(transparent)]
    Exec(#[from] crate::rulegraph::ExecError),
    #[error(transparent)]
    Agent(#[from] crate::agent::AgentError),
    #[error(transparent)]
    Sandbox(#[from] crate::sandbox::SandboxError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

/// Run the whole distillation pipeline and persist the dataset.
pub fn cmd_distill(config: &RunConfig, parallelism: usize) -> Result<i32, CliError> {
    let seed = config.seed()?;
    let client = config.make_client()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let use_cases =
        distill::generate_use_cases(&config.pair, client.as_ref(), &config.distill, &mut rng)?;
    println!("generated {} use cases", use_cases.len());

    let mut sets = Vec::new();
    for use_case in &use_cases {
        let set = distill::sample_use_case(
            use_case,
            &config.pair,
            client.as_ref(),
            &config.distill,
            config.client.request_parallelism,
        )?;
        println!(
            "{}: {} implementations sampled",
            use_case.id,
            set.implementations.len()
        );
        sets.push(set);
    }

    let triples =
        distill::validate_and_select(&sets, &config.sandbox, &config.distill, parallelism);
    let counts = distill::write_dataset(&config.paths.dataset_dir, &sets, &triples)?;

    println!(
        "use cases: {}  implemented: {}  migrated: {}  valid triples: {}  selected: {}",
        counts.use_cases, counts.implemented, counts.migrated, counts.valid_triples,
        counts.selected
    );
    if counts.selected == 0 {
        eprintln!("warning: validation selected no triples; dataset written anyway");
    }
    Ok(EXIT_OK)
}

/// Infer the initial ruleset from one triple and write it as a rule file.
pub fn cmd_infer(
    triple_path: &Path,
    out_path: &Path,
    profile: &LanguageProfile,
) -> Result<i32, CliError> {
    let triple = TripleFile::load(triple_path)?;
    let denylist = inference::import_denylist(
        &[triple.source_text.as_str(), triple.migration_text.as_str()],
        profile,
    );
    let rules = inference::infer_ruleset(
        &triple.source_text,
        &triple.migration_text,
        &denylist,
        profile,
    );
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out_path, inference::export_ruleset(&rules))?;
    println!(
        "inferred {} rules from {} -> {}",
        rules.len(),
        triple_path.display(),
        out_path.display()
    );
    Ok(if rules.is_empty() { EXIT_EMPTY } else { EXIT_OK })
}

/// Drive the synthesis loop for one triple, writing the final script and the
/// transcript whatever the outcome.
pub fn cmd_synthesize(
    triple_path: &Path,
    r0_path: &Path,
    config: &RunConfig,
) -> Result<i32, CliError> {
    let triple = TripleFile::load(triple_path)?;
    let r0_text = std::fs::read_to_string(r0_path)?;
    // Validate the ruleset file before prompting with it.
    rulegraph::load_ruleset(&r0_text)?;
    let client = config.make_client()?;
    let env = AgentEnv {
        pair: config.pair.clone(),
        profile: config.language_profile()?,
        sandbox: config.sandbox.clone(),
        limits: config.limits.execution(),
        model: config.client.synthesis_model.clone(),
        temperature: config.client.synthesis_temperature,
    };
    let (graph, transcript) = agent::synthesize_with_ruleset(
        &triple,
        &r0_text,
        client.as_ref(),
        config.limits.agent_iterations,
        &env,
    )?;

    std::fs::create_dir_all(&config.paths.scripts_dir)?;
    std::fs::create_dir_all(&config.paths.transcripts_dir)?;
    let stem = triple_stem(&triple.meta);
    let script_path = config.paths.scripts_dir.join(format!("{stem}.json"));
    let transcript_path = config
        .paths
        .transcripts_dir
        .join(format!("{stem}.jsonl"));
    std::fs::write(&script_path, graph.to_canonical_json())?;
    agent::write_transcript(&transcript_path, &transcript)?;

    println!(
        "outcome: {:?} after {} iterations; script: {}",
        transcript.outcome,
        transcript.iteration_count(),
        script_path.display()
    );
    if let Some(reason) = &transcript.abort_reason {
        eprintln!("aborted: {reason}");
    }
    Ok(match transcript.outcome {
        Outcome::Success => EXIT_OK,
        Outcome::Exhausted => EXIT_EXHAUSTED,
        Outcome::Aborted => EXIT_ERROR,
    })
}

fn triple_stem(meta: &TripleFile) -> String {
    format!(
        "{}-impl{:02}-test{:02}-mig{:02}",
        meta.use_case, meta.impl_id, meta.test_id, meta.migration_id
    )
}

/// Apply a script to a file or directory tree, writing results under
/// `out_dir` and printing a rewrite summary. Inputs are never modified.
pub fn cmd_apply(
    script_path: &Path,
    target: &Path,
    out_dir: &Path,
    profile: &LanguageProfile,
    limits: &ExecutionLimits,
) -> Result<i32, CliError> {
    let graph = rulegraph::load_graph(&std::fs::read_to_string(script_path)?)?;

    let mut files: BTreeMap<String, String> = BTreeMap::new();
    if target.is_dir() {
        for entry in walkdir::WalkDir::new(target).sort_by_file_name() {
            let entry = entry.map_err(|e| CliError::Other(e.to_string()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let ext = entry
                .path()
                .extension()
                .and_then(|e| e.to_str())
                .unwrap_or("");
            if !profile.file_extensions.iter().any(|e| e == ext) {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(target)
                .expect("walkdir stays under target")
                .to_string_lossy()
                .into_owned();
            files.insert(rel, std::fs::read_to_string(entry.path())?);
        }
    } else {
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Other(format!("bad target path {}", target.display())))?;
        files.insert(name, std::fs::read_to_string(target)?);
    }

    let (rewritten, log) = rulegraph::execute(&graph, &files, profile, limits)?;

    for (rel, text) in &rewritten {
        let dest = out_dir.join(rel);
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(dest, text)?;
    }

    let mut per_rule: BTreeMap<&str, usize> = BTreeMap::new();
    for entry in &log.entries {
        *per_rule.entry(entry.rule.as_str()).or_default() += 1;
    }
    for (rule, count) in &per_rule {
        println!("{rule}: {count} rewrites");
    }
    println!(
        "total: {} rewrites across {} files in {} passes; output in {}",
        log.count(),
        rewritten.len(),
        log.passes,
        out_dir.display()
    );
    Ok(EXIT_OK)
}

/// Apply a script to every sibling implementation recorded in a use-case
/// directory and report which still pass their tests afterwards.
pub fn cmd_eval_siblings(
    script_path: &Path,
    use_case_dir: &Path,
    config: &RunConfig,
) -> Result<i32, CliError> {
    let graph = rulegraph::load_graph(&std::fs::read_to_string(script_path)?)?;
    let profile = config.language_profile()?;
    let limits = config.limits.execution();

    let mut triple_paths: Vec<PathBuf> = std::fs::read_dir(use_case_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("triple-") && n.ends_with(".json"))
        })
        .collect();
    triple_paths.sort();

    let mut passed = 0usize;
    for path in &triple_paths {
        let triple = TripleFile::load(path)?;
        let ok = match rulegraph::execute_on_text(
            &graph,
            &triple.source_text,
            &profile,
            &limits,
        ) {
            Ok((migrated, _)) => agent::subject_succeeds(
                &migrated,
                &triple.tests_text,
                &config.pair.source_markers,
                &profile,
                &config.sandbox,
            )?,
            Err(err) => {
                eprintln!("{}: engine error: {err}", path.display());
                false
            }
        };
        println!(
            "impl-{:02}: {}",
            triple.meta.impl_id,
            if ok { "pass" } else { "fail" }
        );
        if ok {
            passed += 1;
        }
    }
    println!("{passed}/{} siblings migrated successfully", triple_paths.len());
    Ok(EXIT_OK)
}
