//! Atomic rule inference: diff two implementations line-by-line and
//! anti-unify each hunk into a match→replace rule.
//!
//! Anti-unification keeps the common structure of the deleted and added
//! lines and abstracts shared identifiers and literals into numbered holes.
//! Guardrails keep API-shaped tokens concrete: keywords, denylisted names,
//! attribute and call positions never become holes, and a rule whose match
//! pattern would retain no concrete identifier or operator is dropped as
//! overgeneral. Hunks that only add code produce no rule.

use std::collections::BTreeSet;

use crate::pattern::{HoleMode, Pattern, Segment};
use crate::tokentree::{self, LanguageProfile, TokenKind};

/// One diff hunk: a maximal run of changed lines with zero context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffHunk {
    /// Deleted lines, without trailing newlines.
    pub deleted: Vec<String>,
    /// Added lines, without trailing newlines.
    pub added: Vec<String>,
    /// Line range in the source implementation (0-based, half-open).
    pub source_lines: std::ops::Range<usize>,
}

/// A rule inferred from one hunk. Hole names are `x1, x2, …` in order of
/// first appearance in the deleted lines, and every hole in the replacement
/// also occurs in the match pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicRule {
    pub match_pattern: Pattern,
    pub replace_pattern: Pattern,
    pub hole_count: usize,
    pub provenance: DiffHunk,
}

/// Line-level LCS diff. Runs of consecutive non-equal lines form one hunk;
/// hunks separated by at least one unchanged line are distinct.
pub fn diff_hunks(source: &str, migrated: &str) -> Vec<DiffHunk> {
    let old: Vec<&str> = source.lines().collect();
    let new: Vec<&str> = migrated.lines().collect();

    // LCS table over line equality.
    let mut table = vec![vec![0u32; new.len() + 1]; old.len() + 1];
    for i in (0..old.len()).rev() {
        for j in (0..new.len()).rev() {
            table[i][j] = if old[i] == new[j] {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }

    let mut hunks = Vec::new();
    let mut pending: Option<DiffHunk> = None;
    let (mut i, mut j) = (0, 0);
    let mut flush = |pending: &mut Option<DiffHunk>| {
        if let Some(h) = pending.take() {
            hunks.push(h);
        }
    };
    while i < old.len() || j < new.len() {
        if i < old.len() && j < new.len() && old[i] == new[j] {
            flush(&mut pending);
            i += 1;
            j += 1;
            continue;
        }
        let delete = j == new.len()
            || (i < old.len() && table[i + 1][j] >= table[i][j + 1]);
        let hunk = pending.get_or_insert_with(|| DiffHunk {
            deleted: Vec::new(),
            added: Vec::new(),
            source_lines: i..i,
        });
        if delete {
            hunk.deleted.push(old[i].to_string());
            hunk.source_lines.end = i + 1;
            i += 1;
        } else {
            hunk.added.push(new[j].to_string());
            j += 1;
        }
    }
    flush(&mut pending);
    hunks
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FlatToken {
    kind: TokenKind,
    text: String,
}

fn scan_lines(lines: &[String], profile: &LanguageProfile) -> Vec<FlatToken> {
    tokentree::scan(&lines.join("\n"), profile)
        .into_iter()
        .map(|t| FlatToken {
            kind: t.kind,
            text: t.text,
        })
        .collect()
}

fn is_candidate_kind(kind: TokenKind) -> bool {
    matches!(
        kind,
        TokenKind::Identifier | TokenKind::Number | TokenKind::String
    )
}

/// Texts that may not be abstracted because some occurrence sits in
/// attribute position (after `.`) or call position (before `(`).
fn positional_exclusions(tokens: &[FlatToken]) -> BTreeSet<String> {
    let mut excluded = BTreeSet::new();
    for (idx, tok) in tokens.iter().enumerate() {
        if tok.kind != TokenKind::Identifier {
            continue;
        }
        let prev_is_dot = idx > 0 && tokens[idx - 1].text == ".";
        let next_is_call = tokens.get(idx + 1).is_some_and(|t| t.text == "(");
        if prev_is_dot || next_is_call {
            excluded.insert(tok.text.clone());
        }
    }
    excluded
}

/// Anti-unify one hunk into an atomic rule, or nothing when the hunk only
/// adds code or the generalization would lose every concrete anchor.
pub fn anti_unify(
    hunk: &DiffHunk,
    denylist: &BTreeSet<String>,
    profile: &LanguageProfile,
) -> Option<AtomicRule> {
    if hunk.deleted.is_empty() {
        return None;
    }
    let minus = scan_lines(&hunk.deleted, profile);
    let plus = scan_lines(&hunk.added, profile);

    let minus_texts: BTreeSet<&str> = minus
        .iter()
        .filter(|t| is_candidate_kind(t.kind))
        .map(|t| t.text.as_str())
        .collect();
    let plus_texts: BTreeSet<&str> = plus
        .iter()
        .filter(|t| is_candidate_kind(t.kind))
        .map(|t| t.text.as_str())
        .collect();

    let mut excluded = positional_exclusions(&minus);
    excluded.extend(positional_exclusions(&plus));

    // Hole names follow first occurrence in the deleted lines.
    let mut holes: Vec<String> = Vec::new();
    for tok in &minus {
        if !is_candidate_kind(tok.kind)
            || !plus_texts.contains(tok.text.as_str())
            || profile.keywords.contains(&tok.text)
            || denylist.contains(&tok.text)
            || excluded.contains(&tok.text)
            || holes.contains(&tok.text)
        {
            continue;
        }
        holes.push(tok.text.clone());
    }
    let _ = minus_texts;

    let hole_name = |text: &str| -> Option<String> {
        holes
            .iter()
            .position(|h| h == text)
            .map(|idx| format!("x{}", idx + 1))
    };

    // Overgeneralization guardrail: the match side must keep at least one
    // concrete identifier or operator token.
    let has_anchor = minus.iter().any(|tok| {
        matches!(tok.kind, TokenKind::Identifier | TokenKind::Operator)
            && !holes.contains(&tok.text)
    });
    if !has_anchor {
        return None;
    }

    let build = |tokens: &[FlatToken]| -> Pattern {
        let mut segments: Vec<Segment> = Vec::new();
        for tok in tokens {
            let hole = if is_candidate_kind(tok.kind) {
                hole_name(&tok.text)
            } else {
                None
            };
            match hole {
                Some(name) => segments.push(Segment::Hole {
                    name,
                    mode: HoleMode::Optional,
                }),
                None => match segments.last_mut() {
                    Some(Segment::Literal(prev)) => prev.push_str(&tok.text),
                    _ => segments.push(Segment::Literal(tok.text.clone())),
                },
            }
        }
        Pattern::from_segments(segments)
    };

    Some(AtomicRule {
        match_pattern: build(&minus),
        replace_pattern: build(&plus),
        hole_count: holes.len(),
        provenance: hunk.clone(),
    })
}

/// Infer the initial ruleset: anti-unify every hunk of the diff, keeping
/// hunk order and dropping hunks that produce no rule.
pub fn infer_ruleset(
    source: &str,
    migrated: &str,
    denylist: &BTreeSet<String>,
    profile: &LanguageProfile,
) -> Vec<AtomicRule> {
    diff_hunks(source, migrated)
        .iter()
        .filter_map(|hunk| anti_unify(hunk, denylist, profile))
        .collect()
}

/// Render atomic rules as a rule-file document: every rule is a seed and
/// there are no edges, since inferred rules carry no orchestration.
pub fn ruleset_doc(rules: &[AtomicRule]) -> crate::rulegraph::RuleFileDoc {
    crate::rulegraph::RuleFileDoc {
        rules: rules
            .iter()
            .enumerate()
            .map(|(idx, rule)| crate::rulegraph::RuleSpec {
                name: format!("hunk-{}", idx + 1),
                match_pattern: rule.match_pattern.to_string(),
                replace: Some(rule.replace_pattern.to_string()),
                seed: true,
            })
            .collect(),
        edges: Vec::new(),
    }
}

/// The exported ruleset in the canonical rule-file rendering.
pub fn export_ruleset(rules: &[AtomicRule]) -> String {
    serde_json::to_string_pretty(&ruleset_doc(rules)).expect("ruleset serializes")
}

/// Identifiers mentioned in import statements: module path components,
/// imported names, and aliases. Seeds the anti-unification denylist so
/// library API names stay concrete.
pub fn import_denylist(texts: &[&str], profile: &LanguageProfile) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    for text in texts {
        for line in text.lines() {
            let tokens: Vec<_> = tokentree::scan(line, profile)
                .into_iter()
                .filter(|t| !t.kind.is_spacing())
                .collect();
            let Some(first) = tokens.first() else { continue };
            if first.text != "import" && first.text != "from" {
                continue;
            }
            for tok in &tokens {
                if tok.kind == TokenKind::Identifier && !profile.keywords.contains(&tok.text) {
                    names.insert(tok.text.clone());
                }
            }
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{apply_rewrite, Pattern};
    use crate::tokentree::Span;

    fn py() -> LanguageProfile {
        LanguageProfile::python()
    }

    fn no_denylist() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn identical_files_have_no_hunks() {
        assert!(diff_hunks("a\nb\nc\n", "a\nb\nc\n").is_empty());
    }

    #[test]
    fn one_changed_line_is_one_hunk() {
        let hunks = diff_hunks("a\nb\nc\n", "a\nB\nc\n");
        assert_eq!(hunks.len(), 1);
        assert_eq!(hunks[0].deleted, vec!["b"]);
        assert_eq!(hunks[0].added, vec!["B"]);
        assert_eq!(hunks[0].source_lines, 1..2);
    }

    #[test]
    fn separated_changes_are_distinct_hunks() {
        let hunks = diff_hunks("a\nb\nc\nd\ne\n", "a\nB\nc\nD\ne\n");
        assert_eq!(hunks.len(), 2);
        assert_eq!(hunks[0].deleted, vec!["b"]);
        assert_eq!(hunks[1].deleted, vec!["d"]);
    }

    #[test]
    fn adjacent_delete_and_add_share_a_hunk() {
        let hunks = diff_hunks("keep\nold1\nold2\nkeep2\n", "keep\nnew1\nnew2\nnew3\nkeep2\n");
        assert_eq!(hunks.len(), 1);
        assert_eq!(hunks[0].deleted, vec!["old1", "old2"]);
        assert_eq!(hunks[0].added, vec!["new1", "new2", "new3"]);
    }

    #[test]
    fn migration_diff_contains_decl_hunk() {
        let before = "import hashlib\nfrom cryptography.fernet import Fernet\n\ndef encrypt_document(document: str, key: bytes) -> bytes:\n    cipher = Fernet(key)\n    encrypted = cipher.encrypt(document.encode())\n    return encrypted\n";
        let after = "from Crypto.Cipher import AES\nfrom Crypto.Util.Padding import pad\n\ndef encrypt_document(document: str, key: bytes) -> bytes:\n    cipher = AES.new(key, AES.MODE_CBC)\n    padded_data = pad(document.encode(), AES.block_size)\n    encrypted = iv + cipher.encrypt(padded_data)\n    return encrypted\n";
        let hunks = diff_hunks(before, after);
        assert!(hunks.iter().any(|h| h
            .deleted
            .iter()
            .any(|l| l.contains("cipher = Fernet(key)"))
            && h.added
                .iter()
                .any(|l| l.contains("cipher = AES.new(key, AES.MODE_CBC)"))));
    }

    fn hunk(deleted: &[&str], added: &[&str]) -> DiffHunk {
        DiffHunk {
            deleted: deleted.iter().map(|s| s.to_string()).collect(),
            added: added.iter().map(|s| s.to_string()).collect(),
            source_lines: 0..deleted.len(),
        }
    }

    #[test]
    fn encrypt_hunk_reproduces_worked_rule() {
        let h = hunk(
            &["encrypted_data = fernet.encrypt(data)"],
            &[
                "padded_data = pad(data, AES.block_size)",
                "encrypted_data = iv + fernet.encrypt(padded_data)",
            ],
        );
        let rule = anti_unify(&h, &no_denylist(), &py()).unwrap();
        assert_eq!(
            rule.match_pattern.to_string(),
            ":[x1] = :[x2].encrypt(:[x3])"
        );
        assert_eq!(
            rule.replace_pattern.to_string(),
            "padded_data = pad(:[x3], AES.block_size)\n:[x1] = iv + :[x2].encrypt(padded_data)"
        );
        assert_eq!(rule.hole_count, 3);
    }

    #[test]
    fn add_only_hunk_produces_no_rule() {
        let h = hunk(&[], &["import os"]);
        assert!(anti_unify(&h, &no_denylist(), &py()).is_none());
    }

    #[test]
    fn literal_assignment_abstracts_variable_only() {
        let h = hunk(&["x = 1"], &["x = 2"]);
        let rule = anti_unify(&h, &no_denylist(), &py()).unwrap();
        assert_eq!(rule.match_pattern.to_string(), ":[x1] = 1");
        assert_eq!(rule.replace_pattern.to_string(), ":[x1] = 2");
    }

    #[test]
    fn denylist_keeps_names_concrete() {
        let h = hunk(
            &["client = fernet.encrypt(data)"],
            &["client = fernet.seal(data)"],
        );
        let deny: BTreeSet<String> = ["fernet".to_string()].into_iter().collect();
        let rule = anti_unify(&h, &deny, &py()).unwrap();
        assert_eq!(
            rule.match_pattern.to_string(),
            ":[x1] = fernet.encrypt(:[x2])"
        );
    }

    #[test]
    fn keywords_and_call_names_stay_concrete() {
        let h = hunk(&["return pack(data)"], &["return pack(data, 1)"]);
        let rule = anti_unify(&h, &no_denylist(), &py()).unwrap();
        // `return` is a keyword and `pack` is in call position.
        assert_eq!(rule.match_pattern.to_string(), "return pack(:[x1])");
        assert_eq!(rule.replace_pattern.to_string(), "return pack(:[x1], 1)");
    }

    #[test]
    fn overgeneral_patterns_are_dropped() {
        // Abstracting `value` would leave only `(`, `)` — no anchor.
        let h = hunk(&["(value)"], &["(value, value)"]);
        assert!(anti_unify(&h, &no_denylist(), &py()).is_none());
    }

    #[test]
    fn string_literals_abstract_only_when_identical() {
        let h = hunk(&["log(\"boot\")"], &["record(\"boot\")"]);
        let rule = anti_unify(&h, &no_denylist(), &py()).unwrap();
        assert_eq!(rule.match_pattern.to_string(), "log(:[x1])");
        assert_eq!(rule.replace_pattern.to_string(), "record(:[x1])");
        let h2 = hunk(&["log(\"boot\")"], &["record(\"start\")"]);
        let rule2 = anti_unify(&h2, &no_denylist(), &py()).unwrap();
        assert_eq!(rule2.match_pattern.to_string(), "log(\"boot\")");
    }

    #[test]
    fn soundness_rule_reapplies_to_its_own_hunk() {
        let cases = [
            hunk(
                &["encrypted_data = fernet.encrypt(data)"],
                &[
                    "padded_data = pad(data, AES.block_size)",
                    "encrypted_data = iv + fernet.encrypt(padded_data)",
                ],
            ),
            hunk(&["x = 1"], &["x = 2"]),
            hunk(&["resp = requests.get(url)"], &["resp = httpx.get(url)"]),
        ];
        for h in cases {
            let rule = anti_unify(&h, &no_denylist(), &py()).unwrap();
            let before = h.deleted.join("\n");
            let after = h.added.join("\n");
            let (out, n) = apply_rewrite(
                &rule.match_pattern,
                &rule.replace_pattern,
                &before,
                &py(),
                Span::new(0, before.len()),
            )
            .unwrap();
            assert_eq!(out, after);
            assert!(n >= 1);
        }
    }

    #[test]
    fn replace_holes_are_contained_in_match_holes() {
        let h = hunk(
            &["total = count + 1"],
            &["total = count + count + 1"],
        );
        let rule = anti_unify(&h, &no_denylist(), &py()).unwrap();
        let match_holes: BTreeSet<_> =
            rule.match_pattern.hole_names().into_iter().collect();
        for name in rule.replace_pattern.hole_names() {
            assert!(match_holes.contains(name));
        }
        assert!(Pattern::parse(&rule.match_pattern.to_string()).is_ok());
    }

    #[test]
    fn ruleset_preserves_hunk_order_and_drops_empties() {
        let before = "a = old_open(path)\nkeep\nb = old_read(a)\n";
        let after = "a = new_open(path)\nkeep\nb = new_read(a)\nextra = 1\n";
        let rules = infer_ruleset(before, after, &no_denylist(), &py());
        assert_eq!(rules.len(), 2);
        assert!(rules[0].match_pattern.to_string().contains("old_open"));
        assert!(rules[1].match_pattern.to_string().contains("old_read"));
    }

    #[test]
    fn identical_files_yield_empty_ruleset() {
        let text = "a = 1\n";
        assert!(infer_ruleset(text, text, &no_denylist(), &py()).is_empty());
    }

    #[test]
    fn add_only_migration_yields_empty_ruleset() {
        let rules = infer_ruleset("a = 1\n", "a = 1\nb = 2\n", &no_denylist(), &py());
        assert!(rules.is_empty());
    }

    #[test]
    fn import_scan_collects_identifiers() {
        let text = "import hashlib\nfrom cryptography.fernet import Fernet as F\nx = 1\n";
        let names = import_denylist(&[text], &py());
        for expected in ["hashlib", "cryptography", "fernet", "Fernet", "F"] {
            assert!(names.contains(expected), "missing {expected}");
        }
        assert!(!names.contains("x"));
        assert!(!names.contains("import"));
    }
}
