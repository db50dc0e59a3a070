//! The iterative synthesis loop: converse with a chat model through a fixed
//! action protocol, execute each action against the rewrite engine and the
//! sandbox, feed structured observations back, and stop on verified success
//! or at the iteration cap.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chat::{ChatClient, ChatMessage, ChatRequest};
use crate::distill::{LibraryPair, LoadedTriple};
use crate::inference;
use crate::pattern::PatternError;
use crate::rulegraph::{
    self, Edge, EdgeSpec, ExecError, ExecutionLimits, GraphError, Rule, RuleFileDoc, RuleGraph,
    RuleSpec,
};
use crate::sandbox::{self, SandboxConfig};
use crate::tokentree::LanguageProfile;

pub const SYSTEM_PROMPT: &str = include_str!("../assets/prompts/agent_system.md");
pub const TASK_PROMPT: &str = include_str!("../assets/prompts/agent_task.md");

/// Bump when hint wording changes; recorded in transcripts so observations
/// stay interpretable across versions.
pub const HINT_CATALOG_VERSION: u32 = 1;

const MAX_PAYLOAD_BYTES: usize = 16_384;

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum AgentAction {
    RefineRule { rule: Rule, isolated: bool },
    AddRules { rules: Vec<Rule>, edges: Vec<Edge> },
    ReviseGraph { revision: GraphRevision },
    TestMigration,
}

#[derive(Debug, Clone)]
pub enum GraphRevision {
    Replace { rules: Vec<Rule>, edges: Vec<Edge> },
    Edit(EditList),
}

#[derive(Debug, Clone, Default)]
pub struct EditList {
    pub remove_rules: Vec<String>,
    pub add_rules: Vec<Rule>,
    pub remove_edges: Vec<Edge>,
    pub add_edges: Vec<Edge>,
    pub set_seed: Vec<(String, bool)>,
}

fn rule_from_value(value: &Value) -> Result<Rule, String> {
    let specs: Vec<RuleSpec> = if let Some(text) = value.as_str() {
        let (rules, _) = rulegraph::load_ruleset(text).map_err(|e| e.to_string())?;
        return match <[Rule; 1]>::try_from(rules) {
            Ok([rule]) => Ok(rule),
            Err(_) => Err("rule text must define exactly one rule".to_string()),
        };
    } else {
        vec![serde_json::from_value(value.clone()).map_err(|e| e.to_string())?]
    };
    let (rules, _) = rulegraph::rules_from_doc(RuleFileDoc {
        rules: specs,
        edges: Vec::new(),
    })
    .map_err(|e| e.to_string())?;
    rules
        .into_iter()
        .next()
        .ok_or_else(|| "empty rule".to_string())
}

fn rules_from_value(value: Option<&Value>) -> Result<Vec<Rule>, String> {
    match value {
        None => Ok(Vec::new()),
        Some(Value::Array(items)) => items.iter().map(rule_from_value).collect(),
        Some(other) => Err(format!("expected an array of rules, got {other}")),
    }
}

fn edges_from_value(value: Option<&Value>) -> Result<Vec<Edge>, String> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    let specs: Vec<EdgeSpec> =
        serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
    specs
        .into_iter()
        .map(|spec| {
            Ok(Edge {
                from: spec.from,
                scope: spec.scope.parse()?,
                to: spec.to,
            })
        })
        .collect()
}

/// Parse one action from a completion: the first fenced code block must hold
/// a JSON object with an `action` field. Returns the action and the raw
/// JSON for the transcript.
pub fn parse_action(completion: &str) -> Result<(AgentAction, Value), String> {
    let block = crate::distill::extract_code_block(completion)
        .ok_or_else(|| "no fenced code block in reply".to_string())?;
    let value: Value =
        serde_json::from_str(&block).map_err(|e| format!("action block is not JSON: {e}"))?;
    let kind = value
        .get("action")
        .and_then(Value::as_str)
        .ok_or_else(|| "missing `action` field".to_string())?;
    let action = match kind {
        "refine_rule" => AgentAction::RefineRule {
            rule: rule_from_value(
                value.get("rule").ok_or_else(|| "missing `rule`".to_string())?,
            )?,
            isolated: value
                .get("isolated")
                .and_then(Value::as_bool)
                .unwrap_or(true),
        },
        "add_rules" => AgentAction::AddRules {
            rules: rules_from_value(value.get("rules"))?,
            edges: edges_from_value(value.get("edges"))?,
        },
        "revise_graph" => {
            if let Some(graph) = value.get("graph") {
                let doc: RuleFileDoc =
                    serde_json::from_value(graph.clone()).map_err(|e| e.to_string())?;
                let (rules, edges) =
                    rulegraph::rules_from_doc(doc).map_err(|e| e.to_string())?;
                AgentAction::ReviseGraph {
                    revision: GraphRevision::Replace { rules, edges },
                }
            } else if let Some(edits) = value.get("edits") {
                let remove_rules: Vec<String> = edits
                    .get("remove_rules")
                    .map(|v| serde_json::from_value(v.clone()).map_err(|e| e.to_string()))
                    .transpose()?
                    .unwrap_or_default();
                let set_seed: Vec<(String, bool)> = edits
                    .get("set_seed")
                    .and_then(Value::as_object)
                    .map(|m| {
                        m.iter()
                            .map(|(k, v)| (k.clone(), v.as_bool().unwrap_or(false)))
                            .collect()
                    })
                    .unwrap_or_default();
                AgentAction::ReviseGraph {
                    revision: GraphRevision::Edit(EditList {
                        remove_rules,
                        add_rules: rules_from_value(edits.get("add_rules"))?,
                        remove_edges: edges_from_value(edits.get("remove_edges"))?,
                        add_edges: edges_from_value(edits.get("add_edges"))?,
                        set_seed,
                    }),
                }
            } else {
                return Err("revise_graph needs `graph` or `edits`".to_string());
            }
        }
        "test_migration" => AgentAction::TestMigration,
        other => return Err(format!("unknown action `{other}`")),
    };
    Ok((action, value))
}

// ---------------------------------------------------------------------------
// Hints
// ---------------------------------------------------------------------------

/// Failure classes with canned diagnostic suggestions, mirroring the
/// engine's known pitfalls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureClass {
    UnbalancedPattern,
    UnboundHole(String),
    NoSeedRule,
    ScopeFallback,
    WhitespaceMismatch,
    RewriteBudget,
    NoMatches,
    MalformedAction,
}

/// Deterministic lookup into the versioned hint catalog.
pub fn render_hints(failure: &FailureClass) -> Vec<String> {
    match failure {
        FailureClass::UnbalancedPattern => vec![
            "Hole syntax is `:[name]` or `:[name+]`; check for an unclosed `:[`.".into(),
            "Literal segments must keep (), [] and {} balanced; a match pattern also needs at least one literal anchor.".into(),
        ],
        FailureClass::UnboundHole(name) => vec![
            format!("The replacement uses `:[{name}]` but the match pattern never binds it; every replacement hole must appear in the match pattern."),
        ],
        FailureClass::NoSeedRule => vec![
            "The graph has no seed rule, so nothing ever fires; mark an entry rule with \"seed\": true.".into(),
        ],
        FailureClass::ScopeFallback => vec![
            "Function and Class scopes fall back to the whole file when the fire site has no enclosing def/class block; check where the parent rule actually matched.".into(),
        ],
        FailureClass::WhitespaceMismatch => vec![
            "Pattern whitespace is flexible run-for-run, but where the pattern has no whitespace the subject must have none; compare spacing around punctuation.".into(),
        ],
        FailureClass::RewriteBudget => vec![
            "The rewrite budget tripped: the graph likely cycles, with rules rewriting each other's output; tighten patterns or edge scopes so a fixpoint exists.".into(),
        ],
        FailureClass::NoMatches => vec![
            "No rule matched. Check the graph has a seed rule whose pattern occurs in the source.".into(),
            "Whitespace must align: a pattern without spaces will not match spaced code, and vice versa at zero-width positions.".into(),
            "Holes never cross statement boundaries or split delimiter groups; a pattern spanning lines needs explicit newlines.".into(),
            "Scoped follow-up rules only see the enclosing region of the parent's fire site (falling back to the file when no def/class encloses it).".into(),
        ],
        FailureClass::MalformedAction => vec![
            "Reply with exactly one fenced ```json block holding one action object with an `action` field.".into(),
        ],
    }
}

fn classify_graph_error(err: &GraphError) -> FailureClass {
    match err {
        GraphError::NoSeedRule => FailureClass::NoSeedRule,
        GraphError::Pattern { source, .. } => classify_pattern_error(source),
        _ => FailureClass::UnbalancedPattern,
    }
}

fn classify_pattern_error(err: &PatternError) -> FailureClass {
    match err {
        PatternError::UnboundHole(name) => FailureClass::UnboundHole(name.clone()),
        _ => FailureClass::UnbalancedPattern,
    }
}

fn classify_exec_error(err: &ExecError) -> FailureClass {
    match err {
        ExecError::RewriteBudgetExceeded(_) => FailureClass::RewriteBudget,
        ExecError::Pattern(p) => classify_pattern_error(p),
    }
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    RewriteResult,
    EngineError,
    NoChange,
    TestResult,
}

/// What the environment tells the model after an action. Engine errors and
/// no-change results always carry at least one hint.
#[derive(Debug, Clone, Serialize)]
pub struct Observation {
    pub kind: ObservationKind,
    pub payload: String,
    pub hints: Vec<String>,
}

impl Observation {
    fn rewrite(payload: String) -> Observation {
        Observation {
            kind: ObservationKind::RewriteResult,
            payload,
            hints: Vec::new(),
        }
    }

    fn engine_error(payload: String, failure: &FailureClass) -> Observation {
        Observation {
            kind: ObservationKind::EngineError,
            payload,
            hints: render_hints(failure),
        }
    }

    fn no_change(payload: String, failure: &FailureClass) -> Observation {
        Observation {
            kind: ObservationKind::NoChange,
            payload,
            hints: render_hints(failure),
        }
    }
}

/// Replace wall-clock duration tokens like `0.03s` with a fixed value so
/// observations, and therefore transcripts, are byte-stable across runs.
fn scrub_timings(text: &str) -> String {
    text.split_inclusive(char::is_whitespace)
        .map(|piece| {
            let word = piece.trim_end_matches(char::is_whitespace);
            let core = word.trim_matches(|c: char| matches!(c, '(' | ')' | ',' | '='));
            if let Some(number) = core.strip_suffix('s') {
                if !number.is_empty() && number.parse::<f64>().is_ok() {
                    return piece.replace(number, "0.00");
                }
            }
            piece.to_string()
        })
        .collect()
}

fn truncate_payload(mut payload: String) -> String {
    if payload.len() > MAX_PAYLOAD_BYTES {
        let mut cut = MAX_PAYLOAD_BYTES;
        while cut > 0 && !payload.is_char_boundary(cut) {
            cut -= 1;
        }
        payload.truncate(cut);
        payload.push_str("\n[truncated]");
    }
    payload
}

fn render_diff(before: &str, after: &str) -> String {
    let hunks = inference::diff_hunks(before, after);
    if hunks.is_empty() {
        return "(no differences)".to_string();
    }
    let mut out = String::new();
    for hunk in hunks {
        out.push_str(&format!("@@ source line {}\n", hunk.source_lines.start + 1));
        for line in &hunk.deleted {
            out.push_str("- ");
            out.push_str(line);
            out.push('\n');
        }
        for line in &hunk.added {
            out.push_str("+ ");
            out.push_str(line);
            out.push('\n');
        }
    }
    truncate_payload(out)
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Everything the agent environment needs besides the conversation itself.
#[derive(Debug, Clone)]
pub struct AgentEnv {
    pub pair: LibraryPair,
    pub profile: LanguageProfile,
    pub sandbox: SandboxConfig,
    pub limits: ExecutionLimits,
    pub model: String,
    pub temperature: f64,
}

#[derive(Debug, Default)]
pub struct AgentState {
    pub graph: RuleGraph,
}

/// Structured side channel from [`execute_action`] back to the loop; the
/// observation is what the model sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionEffect {
    None,
    TestOutcome { tests_passed: bool, success: bool },
}

fn run_graph(
    graph: &RuleGraph,
    source: &str,
    env: &AgentEnv,
) -> Result<(String, usize), ExecError> {
    let (out, log) = rulegraph::execute_on_text(graph, source, &env.profile, &env.limits)?;
    Ok((out, log.count()))
}

fn graph_run_observation(graph: &RuleGraph, source: &str, env: &AgentEnv) -> Observation {
    if !graph.has_seed() {
        return Observation::no_change(
            "The graph ran but performed no rewrites.".to_string(),
            &FailureClass::NoSeedRule,
        );
    }
    match run_graph(graph, source, env) {
        Ok((out, count)) => {
            if count == 0 || out == source {
                Observation::no_change(
                    "The graph ran but the source is unchanged.".to_string(),
                    &FailureClass::NoMatches,
                )
            } else {
                Observation::rewrite(render_diff(source, &out))
            }
        }
        Err(err) => {
            let class = classify_exec_error(&err);
            Observation::engine_error(err.to_string(), &class)
        }
    }
}

/// Execute one action against the engine and sandbox. Engine failures are
/// converted into observations, never raised past this boundary.
pub fn execute_action(
    action: &AgentAction,
    state: &mut AgentState,
    triple: &LoadedTriple,
    env: &AgentEnv,
) -> (Observation, ActionEffect) {
    let source = triple.source_text.as_str();
    match action {
        AgentAction::RefineRule { rule, isolated } => {
            if *isolated {
                let mut solo = rule.clone();
                solo.is_seed = true;
                let graph = RuleGraph::new(vec![solo], Vec::new())
                    .expect("single rule graph is valid");
                (graph_run_observation(&graph, source, env), ActionEffect::None)
            } else {
                let mut rules: Vec<Rule> = state.graph.rules().to_vec();
                match rules.iter_mut().find(|r| r.name == rule.name) {
                    Some(existing) => *existing = rule.clone(),
                    None => rules.push(rule.clone()),
                }
                let edges = state.graph.edges().to_vec();
                match RuleGraph::new(rules, edges) {
                    Ok(graph) => {
                        state.graph = graph;
                        (
                            graph_run_observation(&state.graph, source, env),
                            ActionEffect::None,
                        )
                    }
                    Err(err) => {
                        let class = classify_graph_error(&err);
                        (
                            Observation::engine_error(err.to_string(), &class),
                            ActionEffect::None,
                        )
                    }
                }
            }
        }
        AgentAction::AddRules { rules, edges } => {
            let mut all_rules = state.graph.rules().to_vec();
            for rule in rules {
                if all_rules.iter().any(|r| r.name == rule.name) {
                    let err = GraphError::DuplicateRuleName(rule.name.clone());
                    let class = classify_graph_error(&err);
                    return (
                        Observation::engine_error(err.to_string(), &class),
                        ActionEffect::None,
                    );
                }
                all_rules.push(rule.clone());
            }
            let mut all_edges = state.graph.edges().to_vec();
            all_edges.extend(edges.iter().cloned());
            match RuleGraph::new(all_rules, all_edges) {
                Ok(graph) => {
                    state.graph = graph;
                    (
                        graph_run_observation(&state.graph, source, env),
                        ActionEffect::None,
                    )
                }
                Err(err) => {
                    let class = classify_graph_error(&err);
                    (
                        Observation::engine_error(err.to_string(), &class),
                        ActionEffect::None,
                    )
                }
            }
        }
        AgentAction::ReviseGraph { revision } => {
            let built = match revision {
                GraphRevision::Replace { rules, edges } => {
                    RuleGraph::new(rules.clone(), edges.clone())
                }
                GraphRevision::Edit(edits) => {
                    let mut rules: Vec<Rule> = state
                        .graph
                        .rules()
                        .iter()
                        .filter(|r| !edits.remove_rules.contains(&r.name))
                        .cloned()
                        .collect();
                    let mut edges: Vec<Edge> = state
                        .graph
                        .edges()
                        .iter()
                        .filter(|e| {
                            !edits.remove_rules.contains(&e.from)
                                && !edits.remove_rules.contains(&e.to)
                                && !edits.remove_edges.contains(e)
                        })
                        .cloned()
                        .collect();
                    rules.extend(edits.add_rules.iter().cloned());
                    edges.extend(edits.add_edges.iter().cloned());
                    for (name, seed) in &edits.set_seed {
                        if let Some(rule) = rules.iter_mut().find(|r| r.name == *name) {
                            rule.is_seed = *seed;
                        }
                    }
                    RuleGraph::new(rules, edges)
                }
            };
            match built {
                Ok(graph) => {
                    state.graph = graph;
                    (
                        graph_run_observation(&state.graph, source, env),
                        ActionEffect::None,
                    )
                }
                Err(err) => {
                    let class = classify_graph_error(&err);
                    (
                        Observation::engine_error(err.to_string(), &class),
                        ActionEffect::None,
                    )
                }
            }
        }
        AgentAction::TestMigration => {
            let migrated = match run_graph(&state.graph, source, env) {
                Ok((out, _)) => out,
                Err(err) => {
                    let class = classify_exec_error(&err);
                    return (
                        Observation::engine_error(err.to_string(), &class),
                        ActionEffect::None,
                    );
                }
            };
            let report = match sandbox::run_tests(&migrated, &triple.tests_text, &env.sandbox) {
                Ok(report) => report,
                Err(err) => {
                    return (
                        Observation::engine_error(
                            format!("test runner failed: {err}"),
                            &FailureClass::MalformedAction,
                        ),
                        ActionEffect::None,
                    );
                }
            };
            let mut files = std::collections::BTreeMap::new();
            files.insert("<input>".to_string(), migrated.clone());
            let markers_gone =
                rulegraph::markers_absent(&files, &env.pair.source_markers, &env.profile);
            let success = report.passed && markers_gone;
            let payload = truncate_payload(format!(
                "tests {} (exit code {})\nsource-library markers absent: {}\n--- runner output ---\n{}",
                if report.passed { "passed" } else { "failed" },
                report
                    .exit_code
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "none".to_string()),
                if markers_gone { "yes" } else { "no" },
                scrub_timings(&report.output),
            ));
            (
                Observation {
                    kind: ObservationKind::TestResult,
                    payload,
                    hints: Vec::new(),
                },
                ActionEffect::TestOutcome {
                    tests_passed: report.passed,
                    success,
                },
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Transcript
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Exhausted,
    Aborted,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub prompt_digest: String,
    pub action: Value,
    pub observation: Observation,
}

#[derive(Debug, Serialize)]
pub struct AgentTranscript {
    pub triple_id: String,
    pub hint_catalog_version: u32,
    pub iterations: Vec<IterationRecord>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    /// Canonical JSON of the final graph, whatever the outcome.
    pub final_graph: String,
}

impl AgentTranscript {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    /// Line-delimited rendering: header, one line per iteration, footer.
    pub fn to_jsonl(&self) -> String {
        let mut lines = Vec::new();
        lines.push(
            serde_json::json!({
                "triple": self.triple_id,
                "hint_catalog_version": self.hint_catalog_version,
            })
            .to_string(),
        );
        for record in &self.iterations {
            lines.push(serde_json::to_string(record).expect("record serializes"));
        }
        lines.push(
            serde_json::json!({
                "outcome": self.outcome,
                "iterations": self.iterations.len(),
                "abort_reason": self.abort_reason,
                "final_graph": self.final_graph,
            })
            .to_string(),
        );
        lines.push(String::new());
        lines.join("\n")
    }
}

pub fn write_transcript(path: &std::path::Path, transcript: &AgentTranscript) -> std::io::Result<()> {
    std::fs::write(path, transcript.to_jsonl())
}

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("transcript I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn digest_request(request: &ChatRequest) -> String {
    let bytes = serde_json::to_string(&request.messages).expect("messages serialize");
    hex::encode(Sha256::digest(bytes.as_bytes()))
}

fn render_observation(observation: &Observation) -> String {
    let kind = match observation.kind {
        ObservationKind::RewriteResult => "rewrite_result",
        ObservationKind::EngineError => "engine_error",
        ObservationKind::NoChange => "no_change",
        ObservationKind::TestResult => "test_result",
    };
    let mut out = format!("## {kind}\n{}\n", observation.payload);
    if !observation.hints.is_empty() {
        out.push_str("\nHints:\n");
        for hint in &observation.hints {
            out.push_str("- ");
            out.push_str(hint);
            out.push('\n');
        }
    }
    out
}

fn task_prompt(triple: &LoadedTriple, initial_rules: &str, env: &AgentEnv) -> String {
    let markers = env
        .pair
        .source_markers
        .iter()
        .cloned()
        .collect::<Vec<_>>()
        .join(", ");
    crate::distill::fill_template(
        TASK_PROMPT,
        &[
            ("source_lib", env.pair.source.as_str()),
            ("target_lib", env.pair.target.as_str()),
            ("markers", markers.as_str()),
            ("source_code", triple.source_text.as_str()),
            ("migrated_code", triple.migration_text.as_str()),
            ("tests", triple.tests_text.as_str()),
            ("initial_rules", initial_rules),
        ],
    )
}

/// Re-load the graph from its canonical serialization on disk and verify the
/// full success predicate from scratch.
fn reverify(graph: &RuleGraph, triple: &LoadedTriple, env: &AgentEnv) -> bool {
    let verify = || -> Result<bool, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("script.json");
        std::fs::write(&path, graph.to_canonical_json()).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let loaded = rulegraph::load_graph(&text).map_err(|e| e.to_string())?;
        let (out, _) =
            rulegraph::execute_on_text(&loaded, &triple.source_text, &env.profile, &env.limits)
                .map_err(|e| e.to_string())?;
        let report = sandbox::run_tests(&out, &triple.tests_text, &env.sandbox)
            .map_err(|e| e.to_string())?;
        let mut files = std::collections::BTreeMap::new();
        files.insert("<input>".to_string(), out);
        Ok(rulegraph::check_success(
            &files,
            &env.pair.source_markers,
            &report,
            &env.profile,
        ))
    };
    verify().unwrap_or(false)
}

/// Drive the synthesis loop for one triple. Returns the final graph and the
/// transcript; the transcript's outcome distinguishes verified success,
/// iteration-cap exhaustion, and aborts (client failure or an unparseable
/// reply after one re-ask).
pub fn synthesize(
    triple: &LoadedTriple,
    r0: &[inference::AtomicRule],
    client: &dyn ChatClient,
    cap: usize,
    env: &AgentEnv,
) -> Result<(RuleGraph, AgentTranscript), AgentError> {
    synthesize_with_ruleset(triple, &inference::export_ruleset(r0), client, cap, env)
}

/// Like [`synthesize`], but with the initial ruleset already rendered as a
/// rule-file document, e.g. read back from disk.
pub fn synthesize_with_ruleset(
    triple: &LoadedTriple,
    initial_rules: &str,
    client: &dyn ChatClient,
    cap: usize,
    env: &AgentEnv,
) -> Result<(RuleGraph, AgentTranscript), AgentError> {
    let triple_id = format!(
        "{}/impl-{:02}/test-{:02}/mig-{:02}",
        triple.meta.use_case, triple.meta.impl_id, triple.meta.test_id, triple.meta.migration_id
    );
    let mut messages = vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(task_prompt(triple, initial_rules, env)),
    ];
    let mut state = AgentState::default();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut outcome = Outcome::Exhausted;
    let mut abort_reason: Option<String> = None;

    'turns: for iteration in 1..=cap {
        let request = ChatRequest::new(env.model.clone(), messages.clone(), env.temperature);
        let digest = digest_request(&request);
        let completion = match client.complete(&request) {
            Ok(c) => c,
            Err(err) => {
                outcome = Outcome::Aborted;
                abort_reason = Some(format!("client error: {err}"));
                break 'turns;
            }
        };

        // One re-ask per turn for an unparseable reply.
        let (action, raw, completion) = match parse_action(&completion) {
            Ok((action, raw)) => (action, raw, completion),
            Err(first_err) => {
                messages.push(ChatMessage::assistant(completion));
                messages.push(ChatMessage::user(format!(
                    "Could not parse an action from that reply: {first_err}\n{}",
                    render_hints(&FailureClass::MalformedAction).join("\n"),
                )));
                let retry = ChatRequest::new(env.model.clone(), messages.clone(), env.temperature);
                match client.complete(&retry) {
                    Ok(second) => match parse_action(&second) {
                        Ok((action, raw)) => (action, raw, second),
                        Err(second_err) => {
                            outcome = Outcome::Aborted;
                            abort_reason = Some(format!(
                                "protocol error: no parseable action after one re-ask ({second_err})"
                            ));
                            break 'turns;
                        }
                    },
                    Err(err) => {
                        outcome = Outcome::Aborted;
                        abort_reason = Some(format!("client error: {err}"));
                        break 'turns;
                    }
                }
            }
        };

        let (observation, effect) = execute_action(&action, &mut state, triple, env);
        iterations.push(IterationRecord {
            iteration,
            prompt_digest: digest,
            action: raw,
            observation: observation.clone(),
        });

        if let ActionEffect::TestOutcome { success: true, .. } = effect {
            if reverify(&state.graph, triple, env) {
                outcome = Outcome::Success;
                break 'turns;
            }
            outcome = Outcome::Aborted;
            abort_reason =
                Some("re-verification of the serialized graph failed".to_string());
            break 'turns;
        }

        messages.push(ChatMessage::assistant(completion));
        messages.push(ChatMessage::user(render_observation(&observation)));
    }

    let transcript = AgentTranscript {
        triple_id,
        hint_catalog_version: HINT_CATALOG_VERSION,
        iterations,
        outcome,
        abort_reason,
        final_graph: state.graph.to_canonical_json(),
    };
    Ok((state.graph, transcript))
}

/// Markers helper for sibling evaluation: success on one subject text.
pub fn subject_succeeds(
    migrated: &str,
    tests: &str,
    markers: &BTreeSet<String>,
    profile: &LanguageProfile,
    sandbox_cfg: &SandboxConfig,
) -> Result<bool, sandbox::SandboxError> {
    let report = sandbox::run_tests(migrated, tests, sandbox_cfg)?;
    let mut files = std::collections::BTreeMap::new();
    files.insert("<input>".to_string(), migrated.to_string());
    Ok(rulegraph::check_success(&files, markers, &report, profile))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_action_kind() {
        let (action, _) = parse_action(
            "Adding a rule.\n```json\n{\"action\":\"refine_rule\",\"rule\":{\"name\":\"r\",\"match\":\"a\",\"replace\":\"b\"}}\n```\n",
        )
        .unwrap();
        assert!(matches!(
            action,
            AgentAction::RefineRule { isolated: true, .. }
        ));

        let (action, _) = parse_action(
            "```json\n{\"action\":\"add_rules\",\"rules\":[{\"name\":\"r\",\"match\":\"a\",\"seed\":true}],\"edges\":[]}\n```",
        )
        .unwrap();
        assert!(matches!(action, AgentAction::AddRules { .. }));

        let (action, _) = parse_action(
            "```json\n{\"action\":\"revise_graph\",\"graph\":{\"rules\":[{\"name\":\"r\",\"match\":\"a\",\"seed\":true}],\"edges\":[]}}\n```",
        )
        .unwrap();
        assert!(matches!(action, AgentAction::ReviseGraph { .. }));

        let (action, _) =
            parse_action("```json\n{\"action\":\"test_migration\"}\n```").unwrap();
        assert!(matches!(action, AgentAction::TestMigration));
    }

    #[test]
    fn rejects_malformed_actions() {
        assert!(parse_action("no block at all").is_err());
        assert!(parse_action("```json\n{\"no_action\": 1}\n```").is_err());
        assert!(parse_action("```json\n{\"action\":\"fly\"}\n```").is_err());
        // A rule with an invalid pattern is rejected at parse time.
        assert!(parse_action(
            "```json\n{\"action\":\"refine_rule\",\"rule\":{\"name\":\"r\",\"match\":\":[oops\"}}\n```"
        )
        .is_err());
    }

    #[test]
    fn hint_catalog_covers_failure_classes() {
        for class in [
            FailureClass::UnbalancedPattern,
            FailureClass::UnboundHole("x".into()),
            FailureClass::NoSeedRule,
            FailureClass::ScopeFallback,
            FailureClass::WhitespaceMismatch,
            FailureClass::RewriteBudget,
            FailureClass::NoMatches,
            FailureClass::MalformedAction,
        ] {
            assert!(!render_hints(&class).is_empty());
        }
        let hints = render_hints(&FailureClass::UnboundHole("data".into()));
        assert!(hints[0].contains(":[data]"));
        assert!(render_hints(&FailureClass::RewriteBudget)[0].contains("cycle"));
        assert!(render_hints(&FailureClass::NoSeedRule)[0].contains("seed"));
    }

    #[test]
    fn diff_rendering_shows_hunks() {
        let diff = render_diff("a\nb\nc\n", "a\nB\nc\n");
        assert!(diff.contains("@@ source line 2"));
        assert!(diff.contains("- b"));
        assert!(diff.contains("+ B"));
        assert_eq!(render_diff("same\n", "same\n"), "(no differences)");
    }
}
