//! Concrete-syntax patterns with named template holes.
//!
//! A pattern interleaves literal text with holes written `:[name]` (may bind
//! empty text) or `:[name+]` (must bind non-empty text). Holes bind balanced
//! token runs of the subject, never split a string, comment, or delimiter
//! group, and never cross a statement boundary (a newline at group depth 0).
//! Literal whitespace runs in a pattern match any non-empty whitespace run of
//! the subject, which lets one rule tolerate formatting variance.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::tokentree::{
    self, close_delimiter, open_delimiter, LanguageProfile, LexError, Span, Token, TokenKind,
    TokenTree,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HoleMode {
    /// `:[x]` — may bind empty text.
    Optional,
    /// `:[x+]` — must bind non-empty text.
    Plus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Hole { name: String, mode: HoleMode },
}

/// A parsed match or replacement pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    segments: Vec<Segment>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("malformed hole at byte {0}: expected `:[name]` or `:[name+]`")]
    MalformedHole(usize),
    #[error("empty pattern")]
    EmptyPattern,
    #[error("pattern consists solely of holes")]
    AllHolesPattern,
    #[error("hole `{0}` has no binding")]
    UnboundHole(String),
    #[error(transparent)]
    Lex(#[from] LexError),
}

impl Pattern {
    /// Parse a match pattern. Rejects empty patterns and patterns with no
    /// literal text at all.
    pub fn parse(text: &str) -> Result<Pattern, PatternError> {
        let segments = parse_segments(text)?;
        if segments.is_empty() {
            return Err(PatternError::EmptyPattern);
        }
        if segments
            .iter()
            .all(|s| matches!(s, Segment::Hole { .. }))
        {
            return Err(PatternError::AllHolesPattern);
        }
        Ok(Pattern { segments })
    }

    /// Parse a replacement pattern. The empty string is a valid replacement
    /// (it deletes the matched site), as is a lone hole.
    pub fn parse_replacement(text: &str) -> Result<Pattern, PatternError> {
        let mut segments = parse_segments(text)?;
        if segments.is_empty() {
            segments.push(Segment::Literal(String::new()));
        }
        Ok(Pattern { segments })
    }

    /// Build a pattern directly from segments. Callers are responsible for
    /// the match/replacement distinction; rule inference uses this to emit
    /// token-exact patterns without a render/re-parse round trip.
    pub(crate) fn from_segments(segments: Vec<Segment>) -> Pattern {
        let segments = if segments.is_empty() {
            vec![Segment::Literal(String::new())]
        } else {
            segments
        };
        Pattern { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Hole names in order of first appearance.
    pub fn hole_names(&self) -> Vec<&str> {
        let mut names = Vec::new();
        for seg in &self.segments {
            if let Segment::Hole { name, .. } = seg {
                if !names.contains(&name.as_str()) {
                    names.push(name.as_str());
                }
            }
        }
        names
    }

    /// Replace every hole that `bindings` covers with its bound text as a
    /// literal segment. Used to propagate ancestor bindings into descendant
    /// rules before matching.
    pub fn resolve(&self, bindings: &Binding) -> Pattern {
        let mut segments: Vec<Segment> = Vec::new();
        for seg in &self.segments {
            let resolved = match seg {
                Segment::Hole { name, .. } => match bindings.get(name) {
                    Some(bound) => Segment::Literal(bound.text.clone()),
                    None => seg.clone(),
                },
                lit => lit.clone(),
            };
            match (segments.last_mut(), resolved) {
                (Some(Segment::Literal(prev)), Segment::Literal(next)) => prev.push_str(&next),
                (_, other) => segments.push(other),
            }
        }
        Pattern { segments }
    }
}

impl fmt::Display for Pattern {
    /// Renders back to pattern syntax: literals verbatim, holes as `:[name]`
    /// or `:[name+]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.segments {
            match seg {
                Segment::Literal(text) => f.write_str(text)?,
                Segment::Hole { name, mode } => {
                    let plus = if *mode == HoleMode::Plus { "+" } else { "" };
                    write!(f, ":[{name}{plus}]")?;
                }
            }
        }
        Ok(())
    }
}

fn parse_segments(text: &str) -> Result<Vec<Segment>, PatternError> {
    let mut segments: Vec<Segment> = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(pos) = rest.find(":[") {
        literal.push_str(&rest[..pos]);
        let hole_start = offset + pos;
        let after = &rest[pos + 2..];
        let name_len = after
            .char_indices()
            .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
            .map(|(i, _)| i)
            .unwrap_or(after.len());
        let name = &after[..name_len];
        let tail = &after[name_len..];
        let (mode, consumed) = if let Some(t) = tail.strip_prefix("+]") {
            let _ = t;
            (HoleMode::Plus, name_len + 2)
        } else if tail.starts_with(']') {
            (HoleMode::Optional, name_len + 1)
        } else {
            return Err(PatternError::MalformedHole(hole_start));
        };
        let valid_name = name
            .chars()
            .next()
            .is_some_and(|c| c.is_alphabetic() || c == '_');
        if !valid_name {
            return Err(PatternError::MalformedHole(hole_start));
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(std::mem::take(&mut literal)));
        }
        segments.push(Segment::Hole {
            name: name.to_string(),
            mode,
        });
        offset = hole_start + 2 + consumed;
        rest = &rest[pos + 2 + consumed..];
    }
    literal.push_str(rest);
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

/// Text bound to one hole together with the byte span it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundText {
    pub text: String,
    pub span: Span,
}

/// Hole name → bound text. Repeated holes always carry identical text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Binding {
    map: BTreeMap<String, BoundText>,
}

impl Binding {
    pub fn new() -> Binding {
        Binding::default()
    }

    pub fn bind(&mut self, name: &str, text: String, span: Span) {
        self.map.insert(name.to_string(), BoundText { text, span });
    }

    pub fn get(&self, name: &str) -> Option<&BoundText> {
        self.map.get(name)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BoundText)> {
        self.map.iter()
    }

    /// Layer `self` over `base`: names bound here shadow the base.
    pub fn layered_over(&self, base: &Binding) -> Binding {
        let mut map = base.map.clone();
        map.extend(self.map.clone());
        Binding { map }
    }
}

/// One occurrence of a pattern in a subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub site: Span,
    pub bindings: Binding,
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// Compiled pattern element. Literal segments are lexed with the subject
/// profile so strings and comments stay atomic on the pattern side too.
#[derive(Debug, Clone, PartialEq, Eq)]
enum PElem {
    /// One concrete non-spacing token.
    Tok(String),
    /// A run of pattern whitespace. `newline` records whether the run
    /// contained a line break; only such runs may match across statements.
    Ws { newline: bool },
    Hole { name: String, mode: HoleMode },
}

fn compile(pattern: &Pattern, profile: &LanguageProfile) -> Vec<PElem> {
    let mut elems: Vec<PElem> = Vec::new();
    for seg in pattern.segments() {
        match seg {
            Segment::Hole { name, mode } => elems.push(PElem::Hole {
                name: name.clone(),
                mode: *mode,
            }),
            Segment::Literal(text) => {
                for tok in tokentree::scan(text, profile) {
                    if tok.kind.is_spacing() {
                        let nl = tok.kind == TokenKind::Newline;
                        match elems.last_mut() {
                            Some(PElem::Ws { newline }) => *newline |= nl,
                            _ => elems.push(PElem::Ws { newline: nl }),
                        }
                    } else {
                        elems.push(PElem::Tok(tok.text));
                    }
                }
            }
        }
    }
    elems
}

/// Subject tokens flattened with their group depth. `depth[i]` is the depth
/// before token `i`; open delimiters carry `delta` +1, closers −1.
struct FlatView<'t> {
    tokens: Vec<&'t Token>,
    depth: Vec<i32>,
    delta: Vec<i32>,
}

impl<'t> FlatView<'t> {
    fn new(tree: &'t TokenTree, region: Span) -> FlatView<'t> {
        let mut tokens = Vec::new();
        let mut depth = Vec::new();
        let mut delta = Vec::new();
        let mut d = 0i32;
        for tok in tree.flatten() {
            let dl = if open_delimiter(&tok.text).is_some() {
                1
            } else if close_delimiter(&tok.text).is_some() {
                -1
            } else {
                0
            };
            let before = d;
            d += dl;
            if tok.span.start >= region.start && tok.span.end <= region.end {
                tokens.push(tok);
                depth.push(if dl < 0 { before + dl } else { before });
                delta.push(dl);
            }
        }
        FlatView { tokens, depth, delta }
    }
}

struct Matcher<'v, 't> {
    view: &'v FlatView<'t>,
    elems: Vec<PElem>,
}

impl<'v, 't> Matcher<'v, 't> {
    /// A hole may stop growing at token window `[from, to)` only when the
    /// window is delimiter-balanced.
    fn window_balanced(&self, from: usize, to: usize) -> bool {
        let mut bal = 0i32;
        for i in from..to {
            bal += self.view.delta[i];
            if bal < 0 {
                return false;
            }
        }
        bal == 0
    }

    fn window_text(&self, from: usize, to: usize) -> String {
        self.view.tokens[from..to]
            .iter()
            .map(|t| t.text.as_str())
            .collect()
    }

    /// Depth-0 newline: the statement boundary a hole may never cross.
    fn is_boundary(&self, idx: usize) -> bool {
        self.view.tokens[idx].kind == TokenKind::Newline && self.view.depth[idx] == 0
    }

    fn is_spacing(&self, idx: usize) -> bool {
        self.view.tokens[idx].kind.is_spacing()
    }

    /// Match all elements from `elem` starting at token `pos`. Holes are
    /// expanded lazily: the shortest balanced window that lets the remaining
    /// elements match wins. Returns the token index one past the match.
    fn match_from(&self, elem: usize, pos: usize, bindings: &mut Binding) -> Option<usize> {
        let Some(e) = self.elems.get(elem) else {
            return Some(pos);
        };
        match e {
            PElem::Tok(text) => {
                let tok = self.view.tokens.get(pos)?;
                if tok.kind.is_spacing() || tok.text != *text {
                    return None;
                }
                self.match_from(elem + 1, pos + 1, bindings)
            }
            PElem::Ws { newline } => {
                let mut end = pos;
                let mut saw_newline = false;
                while end < self.view.tokens.len() && self.is_spacing(end) {
                    if self.view.tokens[end].kind == TokenKind::Newline {
                        if !newline && self.view.depth[end] == 0 {
                            break;
                        }
                        saw_newline = true;
                    }
                    end += 1;
                }
                if end == pos {
                    return None;
                }
                if *newline && !saw_newline {
                    return None;
                }
                self.match_from(elem + 1, end, bindings)
            }
            PElem::Hole { name, mode } => {
                if let Some(bound) = bindings.get(name) {
                    let text = bound.text.clone();
                    let end = self.consume_exact(pos, &text)?;
                    return self.match_from(elem + 1, end, bindings);
                }
                let min_len = if *mode == HoleMode::Plus { 1 } else { 0 };
                let mut end = pos + min_len;
                if end > self.view.tokens.len() {
                    return None;
                }
                loop {
                    // A window may not contain a statement boundary.
                    if end > pos && self.is_boundary(end - 1) {
                        return None;
                    }
                    if self.window_balanced(pos, end) {
                        let start_byte = self
                            .view
                            .tokens
                            .get(pos)
                            .map(|t| t.span.start)
                            .unwrap_or_else(|| self.byte_at(pos));
                        let end_byte = if end == pos {
                            start_byte
                        } else {
                            self.view.tokens[end - 1].span.end
                        };
                        bindings.bind(
                            name,
                            self.window_text(pos, end),
                            Span::new(start_byte, end_byte),
                        );
                        if let Some(done) = self.match_from(elem + 1, end, bindings) {
                            return Some(done);
                        }
                        bindings.unbind(name);
                    }
                    if end >= self.view.tokens.len() {
                        return None;
                    }
                    end += 1;
                }
            }
        }
    }

    /// Consume tokens whose concatenated text equals `text` exactly,
    /// ending on a token boundary.
    fn consume_exact(&self, pos: usize, text: &str) -> Option<usize> {
        let mut remaining = text;
        let mut idx = pos;
        while !remaining.is_empty() {
            let tok = self.view.tokens.get(idx)?;
            remaining = remaining.strip_prefix(tok.text.as_str())?;
            idx += 1;
        }
        Some(idx)
    }

    /// Byte position represented by token index `pos` (used for zero-width
    /// bindings at the end of the subject).
    fn byte_at(&self, pos: usize) -> usize {
        if pos == 0 {
            0
        } else {
            self.view.tokens[pos - 1].span.end
        }
    }
}

impl Binding {
    fn unbind(&mut self, name: &str) {
        self.map.remove(name);
    }
}

/// All non-overlapping matches of `pattern` in `tree`, leftmost first.
pub fn find_matches(
    pattern: &Pattern,
    tree: &TokenTree,
    profile: &LanguageProfile,
) -> Vec<Match> {
    let region = Span::new(0, tree.source_len());
    find_matches_in_region(pattern, tree, profile, region)
}

/// Non-overlapping matches whose sites lie entirely inside `region`.
pub fn find_matches_in_region(
    pattern: &Pattern,
    tree: &TokenTree,
    profile: &LanguageProfile,
    region: Span,
) -> Vec<Match> {
    find_with_inherited(pattern, tree, profile, region, &Binding::new())
}

/// Like [`find_matches_in_region`] but with pre-existing bindings that
/// repeated holes must agree with.
pub fn find_with_inherited(
    pattern: &Pattern,
    tree: &TokenTree,
    profile: &LanguageProfile,
    region: Span,
    inherited: &Binding,
) -> Vec<Match> {
    let view = FlatView::new(tree, region);
    let matcher = Matcher {
        elems: compile(pattern, profile),
        view: &view,
    };
    if matcher.elems.is_empty() {
        return Vec::new();
    }
    let starts_with_ws = matches!(matcher.elems.first(), Some(PElem::Ws { .. }));
    let mut matches = Vec::new();
    let mut start = 0;
    while start < view.tokens.len() {
        // A site never begins on whitespace the pattern does not mention.
        if !starts_with_ws && view.tokens[start].kind.is_spacing() {
            start += 1;
            continue;
        }
        let mut bindings = inherited.clone();
        if let Some(end) = matcher.match_from(0, start, &mut bindings) {
            if end > start {
                let site = Span::new(
                    view.tokens[start].span.start,
                    view.tokens[end - 1].span.end,
                );
                let mut own = Binding::new();
                for (name, bound) in bindings.iter() {
                    if inherited.get(name).is_none() {
                        own.bind(name, bound.text.clone(), bound.span);
                    }
                }
                matches.push(Match { site, bindings: own });
                start = end;
                continue;
            }
        }
        start += 1;
    }
    matches
}

/// Substitute `bindings` into `pattern`: literals verbatim, holes replaced
/// by their bound text. An unbound `:[x]` becomes empty text; an unbound
/// `:[x+]` is an error.
pub fn substitute(pattern: &Pattern, bindings: &Binding) -> Result<String, PatternError> {
    let mut out = String::new();
    for seg in pattern.segments() {
        match seg {
            Segment::Literal(text) => out.push_str(text),
            Segment::Hole { name, mode } => match bindings.get(name) {
                Some(bound) => out.push_str(&bound.text),
                None if *mode == HoleMode::Optional => {}
                None => return Err(PatternError::UnboundHole(name.clone())),
            },
        }
    }
    Ok(out)
}

/// Leading whitespace of the line containing byte `pos`.
pub(crate) fn line_indent(source: &str, pos: usize) -> &str {
    let line_start = source[..pos].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let line_end = source[line_start..]
        .find('\n')
        .map(|i| line_start + i)
        .unwrap_or(source.len());
    let line = &source[line_start..line_end];
    let indent_len = line
        .char_indices()
        .find(|(_, c)| !(*c == ' ' || *c == '\t'))
        .map(|(i, _)| i)
        .unwrap_or(line.len());
    &line[..indent_len]
}

/// Prefix every line after the first with `indent`, leaving blank lines bare.
pub(crate) fn reindent(replacement: &str, indent: &str) -> String {
    if indent.is_empty() || !replacement.contains('\n') {
        return replacement.to_string();
    }
    let mut out = String::new();
    for (i, line) in replacement.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
            if !line.is_empty() {
                out.push_str(indent);
            }
        }
        out.push_str(line);
    }
    out
}

/// Rewrite every match of `match_p` inside `region` with `replace_p`
/// in one left-to-right pass. Returns the new text and the replacement count.
/// Multi-line replacements are re-indented to the indentation of the matched
/// site's first line.
pub fn apply_rewrite(
    match_p: &Pattern,
    replace_p: &Pattern,
    source: &str,
    profile: &LanguageProfile,
    region: Span,
) -> Result<(String, usize), PatternError> {
    let tree = tokentree::lex(source, profile)?;
    let matches = find_matches_in_region(match_p, &tree, profile, region);
    let mut out = String::with_capacity(source.len());
    let mut cursor = 0;
    let mut count = 0;
    for m in &matches {
        out.push_str(&source[cursor..m.site.start]);
        let replacement = substitute(replace_p, &m.bindings)?;
        out.push_str(&reindent(&replacement, line_indent(source, m.site.start)));
        cursor = m.site.end;
        count += 1;
    }
    out.push_str(&source[cursor..]);
    Ok((out, count))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn py() -> LanguageProfile {
        LanguageProfile::python()
    }

    fn p(text: &str) -> Pattern {
        Pattern::parse(text).unwrap()
    }

    fn r(text: &str) -> Pattern {
        Pattern::parse_replacement(text).unwrap()
    }

    fn matches_of(pattern: &str, subject: &str) -> Vec<Match> {
        let profile = py();
        let tree = tokentree::lex(subject, &profile).unwrap();
        find_matches(&p(pattern), &tree, &profile)
    }

    fn binding_text(m: &Match, name: &str) -> String {
        m.bindings.get(name).unwrap().text.clone()
    }

    #[test]
    fn parses_call_pattern() {
        let pat = p("foo(:[args+])");
        assert_eq!(
            pat.segments(),
            &[
                Segment::Literal("foo(".into()),
                Segment::Hole {
                    name: "args".into(),
                    mode: HoleMode::Plus
                },
                Segment::Literal(")".into()),
            ]
        );
        assert_eq!(pat.to_string(), "foo(:[args+])");
    }

    #[test]
    fn parses_repeated_hole() {
        let pat = p(":[x] = :[x]");
        assert_eq!(
            pat.segments(),
            &[
                Segment::Hole {
                    name: "x".into(),
                    mode: HoleMode::Optional
                },
                Segment::Literal(" = ".into()),
                Segment::Hole {
                    name: "x".into(),
                    mode: HoleMode::Optional
                },
            ]
        );
    }

    #[test]
    fn rejects_malformed_and_degenerate_patterns() {
        assert!(matches!(
            Pattern::parse(":[x"),
            Err(PatternError::MalformedHole(0))
        ));
        assert!(matches!(
            Pattern::parse(":[]"),
            Err(PatternError::MalformedHole(0))
        ));
        assert!(matches!(Pattern::parse(""), Err(PatternError::EmptyPattern)));
        assert!(matches!(
            Pattern::parse(":[a]:[b+]"),
            Err(PatternError::AllHolesPattern)
        ));
        // Replacements may be empty or holes-only.
        assert!(Pattern::parse_replacement("").is_ok());
        assert!(Pattern::parse_replacement(":[a]").is_ok());
    }

    #[test]
    fn binds_call_arguments_without_parens() {
        let ms = matches_of("foo(:[args+])", "foo(1,2,3)");
        assert_eq!(ms.len(), 1);
        assert_eq!(binding_text(&ms[0], "args"), "1,2,3");
        assert_eq!(ms[0].site, Span::new(0, 10));
    }

    #[test]
    fn repeated_hole_requires_equal_text() {
        assert!(matches_of(":[x] + :[x]", "a + b").is_empty());
        let ms = matches_of(":[x] + :[x]", "a + a");
        assert_eq!(ms.len(), 1);
        assert_eq!(binding_text(&ms[0], "x"), "a");
    }

    #[test]
    fn full_text_literal_matches_once_with_no_bindings() {
        let ms = matches_of("a + b", "a + b");
        assert_eq!(ms.len(), 1);
        assert!(ms[0].bindings.is_empty());
        assert_eq!(ms[0].site, Span::new(0, 5));
    }

    #[test]
    fn hole_binding_is_balanced() {
        // The shortest balanced window is the whole nested call.
        let ms = matches_of("foo(:[x+])", "foo(bar(1), 2)");
        assert_eq!(ms.len(), 1);
        assert_eq!(binding_text(&ms[0], "x"), "bar(1), 2");
        // A hole can never stop inside a group: the only balanced window
        // here leaves nothing for the trailing literal to match.
        assert!(matches_of("g :[x+] h", "g ( h h )").is_empty());
    }

    #[test]
    fn hole_does_not_cross_statement_boundary() {
        assert!(matches_of("x = :[rhs+] 2", "x = 1\ny2 = 2").is_empty());
        // Inside a group the newline is fine.
        let ms = matches_of("foo(:[args+])", "foo(1,\n    2)");
        assert_eq!(ms.len(), 1);
        assert_eq!(binding_text(&ms[0], "args"), "1,\n    2");
    }

    #[test]
    fn whitespace_runs_are_flexible() {
        let ms = matches_of("a = b", "a   =\tb");
        assert_eq!(ms.len(), 1);
        // But absent pattern whitespace stays absent.
        assert!(matches_of("foo(1)", "foo (1)").is_empty());
        // And a plain space does not match a statement boundary.
        assert!(matches_of("a = b c = d", "a = b\nc = d").is_empty());
    }

    #[test]
    fn pattern_newline_matches_line_break() {
        let ms = matches_of("a = 1\nb = 2", "a  =  1\nb=2");
        assert_eq!(ms.len(), 0); // "b=2" lacks the pattern's spaces around `=`
        let ms = matches_of("a = 1\nb = 2", "a  =  1\nb = 2");
        assert_eq!(ms.len(), 1);
    }

    #[test]
    fn matches_are_leftmost_and_non_overlapping() {
        let ms = matches_of("foo(:[a+])", "foo(1) + foo(2)");
        assert_eq!(ms.len(), 2);
        assert_eq!(binding_text(&ms[0], "a"), "1");
        assert_eq!(binding_text(&ms[1], "a"), "2");
        assert!(ms[0].site.end <= ms[1].site.start);
    }

    #[test]
    fn holes_never_split_atomic_tokens() {
        // "(" inside the string cannot satisfy the pattern's ")" literal.
        let ms = matches_of("foo(:[x+])", "foo(\") not a close\")");
        assert_eq!(ms.len(), 1);
        assert_eq!(binding_text(&ms[0], "x"), "\") not a close\"");
    }

    #[test]
    fn optional_hole_may_bind_empty() {
        let ms = matches_of("log(:[x])", "log()");
        assert_eq!(ms.len(), 1);
        assert_eq!(binding_text(&ms[0], "x"), "");
        assert!(matches_of("log(:[x+])", "log()").is_empty());
    }

    #[test]
    fn substitute_replaces_holes() {
        let mut b = Binding::new();
        b.bind("args", "1,2,3".into(), Span::new(0, 0));
        assert_eq!(substitute(&r("bar(:[args])"), &b).unwrap(), "bar(1,2,3)");
    }

    #[test]
    fn substitute_round_trips_own_match() {
        let pat = p("foo(:[args+])");
        let subject = "x = foo(1, 2)";
        let ms = matches_of("foo(:[args+])", subject);
        let text = substitute(&pat, &ms[0].bindings).unwrap();
        assert_eq!(text, &subject[ms[0].site.start..ms[0].site.end]);
    }

    #[test]
    fn substitute_pad_example() {
        let mut b = Binding::new();
        b.bind("x3", "data".into(), Span::new(0, 0));
        assert_eq!(
            substitute(&r("pad(:[x3], AES.block_size)"), &b).unwrap(),
            "pad(data, AES.block_size)"
        );
    }

    #[test]
    fn unbound_plus_hole_is_an_error() {
        let err = substitute(&r("bar(:[missing+])"), &Binding::new()).unwrap_err();
        assert!(matches!(err, PatternError::UnboundHole(name) if name == "missing"));
    }

    #[test]
    fn rewrite_applies_left_to_right_in_one_pass() {
        let src = "x = foo(1,2,3)\ny = foo(4)";
        let (out, n) = apply_rewrite(
            &p("foo(:[args+])"),
            &r("bar(:[args])"),
            src,
            &py(),
            Span::new(0, src.len()),
        )
        .unwrap();
        assert_eq!(out, "x = bar(1,2,3)\ny = bar(4)");
        assert_eq!(n, 2);
    }

    #[test]
    fn identity_rewrite_is_a_fixed_point_of_text() {
        let src = "foo(1) + foo(2)";
        let (out, n) = apply_rewrite(
            &p("foo(:[a+])"),
            &r("foo(:[a])"),
            src,
            &py(),
            Span::new(0, src.len()),
        )
        .unwrap();
        assert_eq!(out, src);
        assert_eq!(n, 2);
    }

    #[test]
    fn encrypt_rule_rewrites_call_chain() {
        let src = "    encrypted_data = fernet.encrypt(data)";
        let (out, n) = apply_rewrite(
            &p(":[x1] = :[x2].encrypt(:[x3])"),
            &r("padded_data = pad(:[x3], AES.block_size)\n:[x1] = iv + :[x2].encrypt(padded_data)"),
            src,
            &py(),
            Span::new(0, src.len()),
        )
        .unwrap();
        assert_eq!(n, 1);
        assert_eq!(
            out,
            "    padded_data = pad(data, AES.block_size)\n    encrypted_data = iv + fernet.encrypt(padded_data)"
        );
    }

    #[test]
    fn rewrite_respects_region() {
        let src = "foo(1)\nfoo(2)\n";
        let second = src.find("foo(2)").unwrap();
        let (out, n) = apply_rewrite(
            &p("foo(:[a+])"),
            &r("bar(:[a])"),
            src,
            &py(),
            Span::new(second, src.len()),
        )
        .unwrap();
        assert_eq!(out, "foo(1)\nbar(2)\n");
        assert_eq!(n, 1);
    }

    #[test]
    fn resolve_concretizes_inherited_bindings() {
        let pat = p(":[var].close(:[arg])");
        let mut b = Binding::new();
        b.bind("var", "conn".into(), Span::new(0, 0));
        let resolved = pat.resolve(&b);
        assert_eq!(
            resolved.segments(),
            &[
                Segment::Literal("conn.close(".into()),
                Segment::Hole {
                    name: "arg".into(),
                    mode: HoleMode::Optional
                },
                Segment::Literal(")".into()),
            ]
        );
    }

    #[test]
    fn balanced_replacement_keeps_output_lexable() {
        let src = "a = foo(bar(1), [2, 3])\n";
        let profile = py();
        let (out, _) = apply_rewrite(
            &p("foo(:[x+])"),
            &r("wrapped({:[x]})"),
            src,
            &profile,
            Span::new(0, src.len()),
        )
        .unwrap();
        assert!(tokentree::lex(&out, &profile).is_ok());
    }
}
