//! Migration programs as rule graphs, and their runtime.
//!
//! A program is a set of named match→replace rules plus directed edges
//! labeled with scopes. The runtime starts from a queue of seed rules at
//! global scope and applies rules depth-first: each time a rule fires at a
//! site, its outgoing edges trigger the target rules within the enclosing
//! scope of that site, against the already-rewritten text. Whole passes
//! repeat until one performs zero rewrites or the rewrite budget trips.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{self, Binding, Pattern, PatternError};
use crate::sandbox::TestReport;
use crate::tokentree::{self, LanguageProfile, ScopeLabel, Span, TokenKind};

/// One named rewrite rule. A rule without a replacement is an anchor: it
/// matches and triggers its edges but rewrites nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub match_pattern: Pattern,
    pub replace: Option<Pattern>,
    pub is_seed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: String,
    pub scope: ScopeLabel,
    pub to: String,
}

#[derive(Debug, Clone, Default)]
pub struct RuleGraph {
    rules: Vec<Rule>,
    edges: Vec<Edge>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to parse rule file: {0}")]
    Parse(String),
    #[error("duplicate rule name `{0}`")]
    DuplicateRuleName(String),
    #[error("edge references unknown rule `{0}`")]
    DanglingEdge(String),
    #[error("graph has no seed rule")]
    NoSeedRule,
    #[error("rule `{name}`: {source}")]
    Pattern {
        name: String,
        source: PatternError,
    },
}

impl RuleGraph {
    /// Build a graph, checking name uniqueness and edge endpoints. Seed
    /// presence is a rule-file invariant, not a construction invariant: an
    /// agent's work-in-progress graph may transiently have no seeds.
    pub fn new(rules: Vec<Rule>, edges: Vec<Edge>) -> Result<RuleGraph, GraphError> {
        let mut seen = BTreeSet::new();
        for rule in &rules {
            if !seen.insert(rule.name.as_str()) {
                return Err(GraphError::DuplicateRuleName(rule.name.clone()));
            }
        }
        for edge in &edges {
            for endpoint in [&edge.from, &edge.to] {
                if !seen.contains(endpoint.as_str()) {
                    return Err(GraphError::DanglingEdge(endpoint.clone()));
                }
            }
        }
        Ok(RuleGraph { rules, edges })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn seeds(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.is_seed)
    }

    pub fn has_seed(&self) -> bool {
        self.rules.iter().any(|r| r.is_seed)
    }

    pub fn edges_from<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == name)
    }

    /// The canonical serialization: a compact JSON document. Hashes of rule
    /// graphs are taken over these bytes.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&RuleFileDoc::from(self)).expect("graph serializes")
    }

    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }
}

// ---------------------------------------------------------------------------
// Rule-file format
// ---------------------------------------------------------------------------

/// Wire form of a rule file. Two renderings are accepted: JSON (canonical,
/// used for hashing) and TOML. Both carry `rules` with `name`/`match`/
/// optional `replace`/`seed` and `edges` with `from`/`scope`/`to`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RuleFileDoc {
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RuleSpec {
    pub name: String,
    #[serde(rename = "match")]
    pub match_pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replace: Option<String>,
    #[serde(default)]
    pub seed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub scope: String,
    pub to: String,
}

impl From<&RuleGraph> for RuleFileDoc {
    fn from(graph: &RuleGraph) -> RuleFileDoc {
        RuleFileDoc {
            rules: graph
                .rules
                .iter()
                .map(|r| RuleSpec {
                    name: r.name.clone(),
                    match_pattern: r.match_pattern.to_string(),
                    replace: r.replace.as_ref().map(|p| p.to_string()),
                    seed: r.is_seed,
                })
                .collect(),
            edges: graph
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    from: e.from.clone(),
                    scope: e.scope.to_string(),
                    to: e.to.clone(),
                })
                .collect(),
        }
    }
}

fn parse_doc(document: &str) -> Result<RuleFileDoc, GraphError> {
    let trimmed = document.trim_start();
    if trimmed.starts_with('{') {
        serde_json::from_str(document).map_err(|e| GraphError::Parse(e.to_string()))
    } else {
        toml::from_str(document).map_err(|e| GraphError::Parse(e.to_string()))
    }
}

pub fn rules_from_doc(doc: RuleFileDoc) -> Result<(Vec<Rule>, Vec<Edge>), GraphError> {
    let mut rules = Vec::new();
    for spec in doc.rules {
        let match_pattern =
            Pattern::parse(&spec.match_pattern).map_err(|source| GraphError::Pattern {
                name: spec.name.clone(),
                source,
            })?;
        let replace = spec
            .replace
            .as_deref()
            .map(Pattern::parse_replacement)
            .transpose()
            .map_err(|source| GraphError::Pattern {
                name: spec.name.clone(),
                source,
            })?;
        rules.push(Rule {
            name: spec.name,
            match_pattern,
            replace,
            is_seed: spec.seed,
        });
    }
    let mut edges = Vec::new();
    for spec in doc.edges {
        let scope: ScopeLabel = spec
            .scope
            .parse()
            .map_err(|e: String| GraphError::Parse(e))?;
        edges.push(Edge {
            from: spec.from,
            scope,
            to: spec.to,
        });
    }
    Ok((rules, edges))
}

/// Load a complete migration program. Enforces every rule-file invariant,
/// including the presence of at least one seed rule.
pub fn load_graph(document: &str) -> Result<RuleGraph, GraphError> {
    let (rules, edges) = rules_from_doc(parse_doc(document)?)?;
    let graph = RuleGraph::new(rules, edges)?;
    if !graph.has_seed() {
        return Err(GraphError::NoSeedRule);
    }
    Ok(graph)
}

/// Load a bare ruleset, e.g. an exported initial ruleset. No seed-presence
/// requirement and the file may be empty.
pub fn load_ruleset(document: &str) -> Result<(Vec<Rule>, Vec<Edge>), GraphError> {
    rules_from_doc(parse_doc(document)?)
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ExecutionLimits {
    pub max_rewrites: usize,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        ExecutionLimits { max_rewrites: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RewriteEntry {
    pub rule: String,
    pub file: String,
    pub site: Span,
    pub replacement: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RewriteLog {
    pub entries: Vec<RewriteEntry>,
    /// Full passes performed, including the final zero-rewrite pass.
    pub passes: usize,
}

impl RewriteLog {
    pub fn count(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("rewrite budget of {0} exceeded; the graph likely cycles")]
    RewriteBudgetExceeded(usize),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

struct EditRecord {
    file: String,
    start: usize,
    old_len: usize,
    new_len: usize,
}

impl EditRecord {
    /// Shift a byte position to account for this edit.
    fn adjust(&self, pos: usize) -> usize {
        if self.start + self.old_len <= pos {
            (pos as isize + self.new_len as isize - self.old_len as isize) as usize
        } else if self.start >= pos {
            pos
        } else {
            self.start + self.new_len
        }
    }
}

struct ExecState<'a> {
    graph: &'a RuleGraph,
    profile: &'a LanguageProfile,
    limits: &'a ExecutionLimits,
    files: BTreeMap<String, String>,
    log: RewriteLog,
    /// Rule firings (rewrites plus anchor matches). Anchor firings count
    /// against the budget too; otherwise a cyclic anchor chain would never
    /// terminate.
    events: usize,
    journal: Vec<EditRecord>,
}

impl ExecState<'_> {
    fn spend(&mut self) -> Result<(), ExecError> {
        self.events += 1;
        if self.events > self.limits.max_rewrites {
            return Err(ExecError::RewriteBudgetExceeded(self.limits.max_rewrites));
        }
        Ok(())
    }

    fn replay_since(&self, mark: usize, file: &str, positions: &mut [&mut usize]) {
        for rec in &self.journal[mark..] {
            if rec.file != file {
                continue;
            }
            for pos in positions.iter_mut() {
                **pos = rec.adjust(**pos);
            }
        }
    }
}

/// Execute a migration program over a set of files. Returns the rewritten
/// files and the log of every rewrite performed.
pub fn execute(
    graph: &RuleGraph,
    files: &BTreeMap<String, String>,
    profile: &LanguageProfile,
    limits: &ExecutionLimits,
) -> Result<(BTreeMap<String, String>, RewriteLog), ExecError> {
    let mut state = ExecState {
        graph,
        profile,
        limits,
        files: files.clone(),
        log: RewriteLog::default(),
        events: 0,
        journal: Vec::new(),
    };
    loop {
        let before = state.log.count();
        let seeds: Vec<String> = graph.seeds().map(|r| r.name.clone()).collect();
        for seed in seeds {
            process_global(&mut state, &seed, &Binding::new())?;
        }
        state.log.passes += 1;
        if state.log.count() == before {
            break;
        }
    }
    Ok((state.files, state.log))
}

/// Convenience wrapper for single-file subjects.
pub fn execute_on_text(
    graph: &RuleGraph,
    text: &str,
    profile: &LanguageProfile,
    limits: &ExecutionLimits,
) -> Result<(String, RewriteLog), ExecError> {
    let mut files = BTreeMap::new();
    files.insert("<input>".to_string(), text.to_string());
    let (out, log) = execute(graph, &files, profile, limits)?;
    Ok((out.into_values().next().expect("one file"), log))
}

fn process_global(
    state: &mut ExecState<'_>,
    rule_name: &str,
    inherited: &Binding,
) -> Result<(), ExecError> {
    let file_ids: Vec<String> = state.files.keys().cloned().collect();
    for file in file_ids {
        let len = state.files[&file].len();
        process_region(state, rule_name, &file, Span::new(0, len), inherited)?;
    }
    Ok(())
}

fn process_region(
    state: &mut ExecState<'_>,
    rule_name: &str,
    file: &str,
    region: Span,
    inherited: &Binding,
) -> Result<(), ExecError> {
    let Some(rule) = state.graph.rule(rule_name) else {
        return Ok(());
    };
    // Ancestor bindings become literal text before matching.
    let match_p = rule.match_pattern.resolve(inherited);
    let replace_p = rule.replace.as_ref().map(|p| p.resolve(inherited));
    let rule_name = rule.name.clone();
    let edges: Vec<Edge> = state.graph.edges_from(&rule_name).cloned().collect();

    let mut cursor = region.start;
    let mut region_end = region.end;
    loop {
        let text = state.files[file].clone();
        let end = region_end.min(text.len());
        if cursor >= end {
            break;
        }
        let tree = tokentree::lex(&text, state.profile).map_err(PatternError::from)?;
        let window = Span::new(cursor, end);
        let matches = pattern::find_matches_in_region(&match_p, &tree, state.profile, window);
        let Some(m) = matches.into_iter().next() else {
            break;
        };
        state.spend()?;

        let mut site_now = m.site;
        if let Some(replace_p) = &replace_p {
            let merged = m.bindings.layered_over(inherited);
            let raw = pattern::substitute(replace_p, &merged)?;
            let replacement = pattern::reindent(&raw, pattern::line_indent(&text, m.site.start));
            let mut new_text = String::with_capacity(text.len());
            new_text.push_str(&text[..m.site.start]);
            new_text.push_str(&replacement);
            new_text.push_str(&text[m.site.end..]);
            state.files.insert(file.to_string(), new_text);
            state.log.entries.push(RewriteEntry {
                rule: rule_name.clone(),
                file: file.to_string(),
                site: m.site,
                replacement: replacement.clone(),
            });
            state.journal.push(EditRecord {
                file: file.to_string(),
                start: m.site.start,
                old_len: m.site.len(),
                new_len: replacement.len(),
            });
            let delta = replacement.len() as isize - m.site.len() as isize;
            region_end = (region_end as isize + delta) as usize;
            // Resume after the replacement: a rule never re-fires on text
            // produced by its own replacement within the same scan.
            cursor = m.site.start + replacement.len();
            site_now = Span::new(m.site.start, m.site.start + replacement.len());
        } else {
            cursor = m.site.end;
        }

        let merged = m.bindings.layered_over(inherited);
        for edge in &edges {
            let mark = state.journal.len();
            match edge.scope {
                ScopeLabel::Global => process_global(state, &edge.to, &merged)?,
                ScopeLabel::File => {
                    let len = state.files[file].len();
                    process_region(state, &edge.to, file, Span::new(0, len), &merged)?;
                }
                ScopeLabel::Function | ScopeLabel::Class => {
                    let current = state.files[file].clone();
                    let tree_now =
                        tokentree::lex(&current, state.profile).map_err(PatternError::from)?;
                    let anchor = Span::new(
                        site_now.start.min(current.len()),
                        site_now.end.min(current.len()),
                    );
                    let scope =
                        tokentree::enclosing_scope(&tree_now, anchor, edge.scope, state.profile);
                    process_region(state, &edge.to, file, scope, &merged)?;
                }
            }
            let mut site_start = site_now.start;
            let mut site_end = site_now.end;
            state.replay_since(
                mark,
                file,
                &mut [&mut cursor, &mut region_end, &mut site_start, &mut site_end],
            );
            site_now = Span::new(site_start, site_end);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Success predicate
// ---------------------------------------------------------------------------

/// True when no marker occurs as a whole identifier token outside strings
/// and comments in any file. Files that no longer lex count as a failure.
pub fn markers_absent(
    files: &BTreeMap<String, String>,
    markers: &BTreeSet<String>,
    profile: &LanguageProfile,
) -> bool {
    files.values().all(|text| match tokentree::lex(text, profile) {
        Ok(tree) => tree
            .flatten()
            .iter()
            .all(|t| t.kind != TokenKind::Identifier || !markers.contains(&t.text)),
        Err(_) => false,
    })
}

/// The migration success predicate: every source-library marker is gone from
/// the migrated files and the shared test suite passes.
pub fn check_success(
    migrated: &BTreeMap<String, String>,
    source_api_markers: &BTreeSet<String>,
    test_outcome: &TestReport,
    profile: &LanguageProfile,
) -> bool {
    markers_absent(migrated, source_api_markers, profile) && test_outcome.passed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn py() -> LanguageProfile {
        LanguageProfile::python()
    }

    const FIG_GRAPH_TOML: &str = r#"
[[rules]]
name = "replace import"
match = "from cryptography.fernet import Fernet"
replace = "from Crypto.Cipher import AES\nfrom Crypto.Util.Padding import pad"
seed = true

[[rules]]
name = "replace decl"
match = ":[var] = Fernet(:[key])"
replace = ":[var] = AES.new(:[key], AES.MODE_CBC)"

[[rules]]
name = "replace encrypt"
match = ":[x1] = :[x2].encrypt(:[x3])"
replace = "padded_data = pad(:[x3], AES.block_size)\n:[x1] = iv + :[x2].encrypt(padded_data)"

[[edges]]
from = "replace import"
scope = "File"
to = "replace decl"

[[edges]]
from = "replace decl"
scope = "File"
to = "replace encrypt"
"#;

    const BEFORE: &str = "import hashlib\nfrom cryptography.fernet import Fernet\n\n\ndef encrypt_document(document: str, key: bytes) -> bytes:\n    cipher = Fernet(key)\n    encrypted = cipher.encrypt(document.encode())\n    return encrypted\n";

    #[test]
    fn loads_three_rule_migration_file() {
        let graph = load_graph(FIG_GRAPH_TOML).unwrap();
        assert_eq!(graph.rules().len(), 3);
        assert_eq!(graph.edges().len(), 2);
        assert!(graph.rule("replace import").unwrap().is_seed);
        assert!(!graph.rule("replace decl").unwrap().is_seed);
    }

    #[test]
    fn json_rendering_loads_identically() {
        let graph = load_graph(FIG_GRAPH_TOML).unwrap();
        let json = graph.to_canonical_json();
        let reloaded = load_graph(&json).unwrap();
        assert_eq!(reloaded.to_canonical_json(), json);
    }

    #[test]
    fn dangling_edge_is_rejected() {
        let doc = r#"{"rules":[{"name":"a","match":"x","seed":true}],"edges":[{"from":"a","scope":"File","to":"ghost"}]}"#;
        assert!(matches!(
            load_graph(doc),
            Err(GraphError::DanglingEdge(name)) if name == "ghost"
        ));
    }

    #[test]
    fn single_seed_rule_no_edges_is_valid() {
        let doc = r#"{"rules":[{"name":"only","match":"a","replace":"b","seed":true}]}"#;
        let graph = load_graph(doc).unwrap();
        assert_eq!(graph.rules().len(), 1);
        assert!(graph.edges().is_empty());
    }

    #[test]
    fn duplicate_names_and_missing_seed_are_rejected() {
        let dup = r#"{"rules":[{"name":"a","match":"x","seed":true},{"name":"a","match":"y"}]}"#;
        assert!(matches!(
            load_graph(dup),
            Err(GraphError::DuplicateRuleName(_))
        ));
        let unseeded = r#"{"rules":[{"name":"a","match":"x"}]}"#;
        assert!(matches!(load_graph(unseeded), Err(GraphError::NoSeedRule)));
    }

    #[test]
    fn cascade_rewrites_whole_function() {
        let graph = load_graph(FIG_GRAPH_TOML).unwrap();
        let (out, log) =
            execute_on_text(&graph, BEFORE, &py(), &ExecutionLimits::default()).unwrap();
        assert!(out.contains("from Crypto.Cipher import AES"));
        assert!(out.contains("from Crypto.Util.Padding import pad"));
        assert!(out.contains("cipher = AES.new(key, AES.MODE_CBC)"));
        assert!(out.contains("    padded_data = pad(document.encode(), AES.block_size)"));
        assert!(out.contains("    encrypted = iv + cipher.encrypt(padded_data)"));
        assert!(!out.contains("Fernet"));
        assert!(!out.contains("fernet"));
        assert_eq!(log.count(), 3);
        assert_eq!(log.passes, 2);
    }

    #[test]
    fn cascade_is_idempotent_at_fixpoint() {
        let graph = load_graph(FIG_GRAPH_TOML).unwrap();
        let profile = py();
        let limits = ExecutionLimits::default();
        let (out, _) = execute_on_text(&graph, BEFORE, &profile, &limits).unwrap();
        let (again, log) = execute_on_text(&graph, &out, &profile, &limits).unwrap();
        assert_eq!(again, out);
        assert_eq!(log.count(), 0);
        assert_eq!(log.passes, 1);
    }

    #[test]
    fn degenerate_graph_equals_apply_rewrite_fixpoint() {
        let doc = r#"{"rules":[{"name":"r","match":"foo(:[a+])","replace":"bar(:[a])","seed":true}]}"#;
        let graph = load_graph(doc).unwrap();
        let src = "x = foo(1,2,3)\ny = foo(4)\n";
        let (out, log) =
            execute_on_text(&graph, src, &py(), &ExecutionLimits::default()).unwrap();
        let profile = py();
        let (oracle, n) = pattern::apply_rewrite(
            &Pattern::parse("foo(:[a+])").unwrap(),
            &Pattern::parse_replacement("bar(:[a])").unwrap(),
            src,
            &profile,
            Span::new(0, src.len()),
        )
        .unwrap();
        assert_eq!(out, oracle);
        assert_eq!(log.count(), n);
    }

    #[test]
    fn cyclic_graph_exceeds_budget() {
        let doc = r#"{"rules":[
            {"name":"ab","match":"a","replace":"b","seed":true},
            {"name":"ba","match":"b","replace":"a","seed":true}
        ]}"#;
        let graph = load_graph(doc).unwrap();
        let limits = ExecutionLimits { max_rewrites: 100 };
        let err = execute_on_text(&graph, "a", &py(), &limits).unwrap_err();
        assert!(matches!(err, ExecError::RewriteBudgetExceeded(100)));
    }

    #[test]
    fn bindings_propagate_along_edges() {
        let doc = r#"{"rules":[
            {"name":"decl","match":":[var] = make()","replace":":[var] = build()","seed":true},
            {"name":"use","match":":[var].go()","replace":":[var].run()"}
        ],"edges":[{"from":"decl","scope":"File","to":"use"}]}"#;
        let graph = load_graph(doc).unwrap();
        let src = "a = make()\nb = make()\nb.go()\na.go()\n";
        let (out, _) =
            execute_on_text(&graph, src, &py(), &ExecutionLimits::default()).unwrap();
        assert_eq!(out, "a = build()\nb = build()\nb.run()\na.run()\n");
    }

    #[test]
    fn bound_child_rule_only_touches_its_variable() {
        let doc = r#"{"rules":[
            {"name":"decl","match":":[var] = make()","replace":":[var] = build()","seed":true},
            {"name":"use","match":":[var].go()","replace":":[var].run()"}
        ],"edges":[{"from":"decl","scope":"File","to":"use"}]}"#;
        let graph = load_graph(doc).unwrap();
        // `c` is never declared via make(), so c.go() must survive.
        let src = "a = make()\nc.go()\na.go()\n";
        let (out, _) =
            execute_on_text(&graph, src, &py(), &ExecutionLimits::default()).unwrap();
        assert_eq!(out, "a = build()\nc.go()\na.run()\n");
    }

    #[test]
    fn function_scope_limits_child_rewrites() {
        let doc = r#"{"rules":[
            {"name":"trigger","match":"MIGRATE_ME","replace":"migrated = True","seed":true},
            {"name":"upgrade","match":"old(:[a])","replace":"new(:[a])"}
        ],"edges":[{"from":"trigger","scope":"Function","to":"upgrade"}]}"#;
        let graph = load_graph(doc).unwrap();
        let src = "def first():\n    MIGRATE_ME\n    old(1)\n\ndef second():\n    old(2)\n";
        let (out, _) =
            execute_on_text(&graph, src, &py(), &ExecutionLimits::default()).unwrap();
        assert!(out.contains("new(1)"));
        assert!(out.contains("old(2)"), "second def is outside the scope");
    }

    #[test]
    fn anchor_rule_triggers_edges_without_rewriting() {
        let doc = r#"{"rules":[
            {"name":"in def","match":"def :[name](:[args]):","seed":true},
            {"name":"upgrade","match":"old()","replace":"new()"}
        ],"edges":[{"from":"in def","scope":"Function","to":"upgrade"}]}"#;
        let graph = load_graph(doc).unwrap();
        let src = "old()\n\ndef f():\n    old()\n";
        let (out, log) =
            execute_on_text(&graph, src, &py(), &ExecutionLimits::default()).unwrap();
        assert_eq!(out, "old()\n\ndef f():\n    new()\n");
        assert_eq!(log.count(), 1);
    }

    #[test]
    fn global_edges_reach_other_files() {
        let doc = r#"{"rules":[
            {"name":"root","match":"ROOT","replace":"root","seed":true},
            {"name":"sweep","match":"old()","replace":"new()"}
        ],"edges":[{"from":"root","scope":"Global","to":"sweep"}]}"#;
        let graph = load_graph(doc).unwrap();
        let mut files = BTreeMap::new();
        files.insert("a.py".to_string(), "ROOT\nold()\n".to_string());
        files.insert("b.py".to_string(), "old()\n".to_string());
        let (out, _) = execute(&graph, &files, &py(), &ExecutionLimits::default()).unwrap();
        assert_eq!(out["a.py"], "root\nnew()\n");
        assert_eq!(out["b.py"], "new()\n");
    }

    #[test]
    fn marker_check_spots_residual_identifiers() {
        let markers: BTreeSet<String> =
            ["Fernet", "fernet"].iter().map(|s| s.to_string()).collect();
        let mut files = BTreeMap::new();
        files.insert(
            "a.py".to_string(),
            "key = fernet.generate_key()\n".to_string(),
        );
        assert!(!markers_absent(&files, &markers, &py()));
        files.insert(
            "a.py".to_string(),
            "# fernet is gone\nx = \"fernet\"\n".to_string(),
        );
        assert!(
            markers_absent(&files, &markers, &py()),
            "strings and comments do not count"
        );
        files.insert("a.py".to_string(), "fernet_like = 1\n".to_string());
        assert!(
            markers_absent(&files, &markers, &py()),
            "markers match on identifier boundaries only"
        );
    }

    #[test]
    fn check_success_requires_both_conjuncts() {
        let markers: BTreeSet<String> = ["fernet".to_string()].into_iter().collect();
        let mut files = BTreeMap::new();
        files.insert("a.py".to_string(), "x = 1\n".to_string());
        let passing = crate::sandbox::report_for_tests(true);
        let failing = crate::sandbox::report_for_tests(false);
        assert!(check_success(&files, &markers, &passing, &py()));
        assert!(!check_success(&files, &markers, &failing, &py()));
        files.insert("a.py".to_string(), "fernet.rotate()\n".to_string());
        assert!(!check_success(&files, &markers, &passing, &py()));
    }
}
