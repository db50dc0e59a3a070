//! Grammar-free lexing of subject-language source into a balanced token tree.
//!
//! The lexer knows only tokens and delimiter balance: strings and comments
//! are atomic (their content never opens a group), and `()`, `[]`, `{}`
//! pairs nest into groups. Concatenating the token texts in order always
//! reproduces the input byte-for-byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-open byte range `[start, end)` into the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains_span(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    Number,
    String,
    Comment,
    Operator,
    Punctuation,
    Whitespace,
    Newline,
}

impl TokenKind {
    pub fn is_spacing(self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Newline)
    }
}

/// One atomic lexical unit with its exact source bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

/// A node is either a leaf token or a balanced delimiter group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Leaf(Token),
    Group(Group),
}

/// `(open, children, close)` for one of the delimiter pairs `()`, `[]`, `{}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub open: Token,
    pub children: TokenTree,
    pub close: Token,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenTree {
    pub nodes: Vec<TreeNode>,
}

impl TokenTree {
    /// In-order token sequence; flattening is the inverse of tree building.
    pub fn flatten(&self) -> Vec<&Token> {
        let mut out = Vec::new();
        collect_tokens(self, &mut out);
        out
    }

    /// Reconstructs the original source byte-for-byte.
    pub fn to_text(&self) -> String {
        self.flatten().iter().map(|t| t.text.as_str()).collect()
    }

    /// Byte length of the underlying source.
    pub fn source_len(&self) -> usize {
        self.flatten().last().map(|t| t.span.end).unwrap_or(0)
    }
}

fn collect_tokens<'a>(tree: &'a TokenTree, out: &mut Vec<&'a Token>) {
    for node in &tree.nodes {
        match node {
            TreeNode::Leaf(tok) => out.push(tok),
            TreeNode::Group(g) => {
                out.push(&g.open);
                collect_tokens(&g.children, out);
                out.push(&g.close);
            }
        }
    }
}

/// Scope labels the engine understands. `Global` and `File` need no profile
/// support; `Function` and `Class` are resolved by the profile's scope finders.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ScopeLabel {
    Global,
    File,
    Class,
    Function,
}

impl fmt::Display for ScopeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScopeLabel::Global => "Global",
            ScopeLabel::File => "File",
            ScopeLabel::Class => "Class",
            ScopeLabel::Function => "Function",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ScopeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Global" => Ok(ScopeLabel::Global),
            "File" => Ok(ScopeLabel::File),
            "Class" => Ok(ScopeLabel::Class),
            "Function" => Ok(ScopeLabel::Function),
            other => Err(format!("unknown scope label `{other}`")),
        }
    }
}

/// One string quoting convention. `escape` controls whether a backslash
/// escapes the next character inside the literal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringDelim {
    pub quote: String,
    #[serde(default = "default_true")]
    pub escape: bool,
}

fn default_true() -> bool {
    true
}

/// Finds the enclosing definition block for a scope label. The only finder
/// kind is the indentation block: a block starts at a line whose first
/// non-space tokens are `<keyword> <identifier>` and extends while
/// subsequent non-blank lines are indented strictly deeper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeFinder {
    pub keyword: String,
}

/// Lexing and scoping rules for one subject language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub name: String,
    #[serde(default)]
    pub string_prefixes: Vec<String>,
    #[serde(rename = "strings")]
    pub string_delims: Vec<StringDelim>,
    #[serde(default)]
    pub line_comments: Vec<String>,
    #[serde(default)]
    pub block_comments: Vec<(String, String)>,
    pub keywords: BTreeSet<String>,
    /// File extensions this profile applies to, without the dot.
    #[serde(default)]
    pub file_extensions: Vec<String>,
    pub scope_finders: BTreeMap<ScopeLabel, ScopeFinder>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("failed to read profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("profile `{0}` has an empty keyword set")]
    EmptyKeywords(String),
    #[error("profile `{name}` lacks a scope finder for {label}")]
    MissingScopeFinder { name: String, label: ScopeLabel },
}

const PYTHON_PROFILE_TOML: &str = include_str!("../assets/profiles/python.toml");

impl LanguageProfile {
    /// The built-in reference profile.
    pub fn python() -> LanguageProfile {
        Self::from_toml(PYTHON_PROFILE_TOML).expect("built-in python profile is valid")
    }

    pub fn from_toml(text: &str) -> Result<LanguageProfile, ProfileError> {
        let mut profile: LanguageProfile = toml::from_str(text)?;
        profile.validate()?;
        // Longest-first so `"""` wins over `"` at the same position.
        profile
            .string_delims
            .sort_by(|a, b| b.quote.len().cmp(&a.quote.len()));
        profile
            .string_prefixes
            .sort_by(|a, b| b.len().cmp(&a.len()));
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<LanguageProfile, ProfileError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ProfileError> {
        if self.keywords.is_empty() {
            return Err(ProfileError::EmptyKeywords(self.name.clone()));
        }
        for label in [ScopeLabel::Function, ScopeLabel::Class] {
            if !self.scope_finders.contains_key(&label) {
                return Err(ProfileError::MissingScopeFinder {
                    name: self.name.clone(),
                    label,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexError {
    #[error("unbalanced delimiter at byte {0}")]
    UnbalancedDelimiter(usize),
}

/// Lex `source` into a balanced token tree. Lossless: flattening the result
/// and concatenating token texts reproduces `source` exactly.
pub fn lex(source: &str, profile: &LanguageProfile) -> Result<TokenTree, LexError> {
    build_tree(scan(source, profile))
}

/// Flat token scan without balance checking. Infallible and lossless.
pub fn scan(source: &str, profile: &LanguageProfile) -> Vec<Token> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &source[i..];
        let start = i;
        let (kind, len) = if let Some(len) = newline_len(rest) {
            (TokenKind::Newline, len)
        } else if let Some(len) = whitespace_len(rest) {
            (TokenKind::Whitespace, len)
        } else if let Some(len) = comment_len(rest, profile) {
            (TokenKind::Comment, len)
        } else if let Some(len) = string_len(rest, profile) {
            (TokenKind::String, len)
        } else if let Some(len) = identifier_len(rest) {
            (TokenKind::Identifier, len)
        } else if let Some(len) = number_len(rest) {
            (TokenKind::Number, len)
        } else {
            let ch = rest.chars().next().expect("non-empty rest");
            let kind = if is_punctuation(ch) {
                TokenKind::Punctuation
            } else {
                TokenKind::Operator
            };
            (kind, ch.len_utf8())
        };
        i += len;
        tokens.push(Token {
            kind,
            text: source[start..i].to_string(),
            span: Span::new(start, i),
        });
    }
    tokens
}

fn newline_len(rest: &str) -> Option<usize> {
    if rest.starts_with("\r\n") {
        Some(2)
    } else if rest.starts_with('\n') || rest.starts_with('\r') {
        Some(1)
    } else {
        None
    }
}

fn whitespace_len(rest: &str) -> Option<usize> {
    let len = rest
        .char_indices()
        .find(|(_, c)| !(c.is_whitespace() && *c != '\n' && *c != '\r'))
        .map(|(i, _)| i)
        .unwrap_or(rest.len());
    (len > 0).then_some(len)
}

fn comment_len(rest: &str, profile: &LanguageProfile) -> Option<usize> {
    for marker in &profile.line_comments {
        if rest.starts_with(marker.as_str()) {
            let len = rest.find(['\n', '\r']).unwrap_or(rest.len());
            return Some(len);
        }
    }
    for (open, close) in &profile.block_comments {
        if rest.starts_with(open.as_str()) {
            let len = match rest[open.len()..].find(close.as_str()) {
                Some(pos) => open.len() + pos + close.len(),
                None => rest.len(),
            };
            return Some(len);
        }
    }
    None
}

fn string_len(rest: &str, profile: &LanguageProfile) -> Option<usize> {
    let mut prefixes: Vec<&str> = vec![""];
    prefixes.extend(profile.string_prefixes.iter().map(String::as_str));
    for prefix in prefixes {
        if !rest.starts_with(prefix) {
            continue;
        }
        let after = &rest[prefix.len()..];
        for delim in &profile.string_delims {
            if !after.starts_with(delim.quote.as_str()) {
                continue;
            }
            // A raw-style prefix (contains 'r' or 'R') disables escapes.
            let escapes = delim.escape && !prefix.contains(['r', 'R']);
            let body_start = prefix.len() + delim.quote.len();
            let mut j = body_start;
            let b = rest.as_bytes();
            while j < rest.len() {
                if escapes && b[j] == b'\\' {
                    j += 1;
                    if j < rest.len() {
                        j += utf8_len(b[j]);
                    }
                    continue;
                }
                if rest[j..].starts_with(delim.quote.as_str()) {
                    return Some(j + delim.quote.len());
                }
                j += utf8_len(b[j]);
            }
            // Unterminated: the rest of the input is one atomic string token.
            return Some(rest.len());
        }
    }
    None
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

fn identifier_len(rest: &str) -> Option<usize> {
    let first = rest.chars().next()?;
    if !(first.is_alphabetic() || first == '_') {
        return None;
    }
    let len = rest
        .char_indices()
        .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
        .map(|(i, _)| i)
        .unwrap_or(rest.len());
    Some(len)
}

fn number_len(rest: &str) -> Option<usize> {
    let first = rest.chars().next()?;
    if !first.is_ascii_digit() {
        return None;
    }
    let bytes = rest.as_bytes();
    let mut i = 0;
    let mut seen_dot = false;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphanumeric() || c == '_' {
            i += 1;
        } else if c == '.'
            && !seen_dot
            && bytes.get(i + 1).is_some_and(|b| (*b as char).is_ascii_digit())
        {
            seen_dot = true;
            i += 1;
        } else {
            break;
        }
    }
    Some(i)
}

fn is_punctuation(c: char) -> bool {
    matches!(c, '(' | ')' | '[' | ']' | '{' | '}' | ',' | ';' | ':' | '.')
}

pub fn open_delimiter(text: &str) -> Option<char> {
    match text {
        "(" | "[" | "{" => text.chars().next(),
        _ => None,
    }
}

pub fn close_delimiter(text: &str) -> Option<char> {
    match text {
        ")" | "]" | "}" => text.chars().next(),
        _ => None,
    }
}

pub fn delimiters_match(open: char, close: char) -> bool {
    matches!((open, close), ('(', ')') | ('[', ']') | ('{', '}'))
}

fn build_tree(tokens: Vec<Token>) -> Result<TokenTree, LexError> {
    let mut stack: Vec<(Token, Vec<TreeNode>)> = Vec::new();
    let mut current: Vec<TreeNode> = Vec::new();
    for tok in tokens {
        if open_delimiter(&tok.text).is_some() {
            stack.push((tok, std::mem::take(&mut current)));
        } else if let Some(close) = close_delimiter(&tok.text) {
            let Some((open, parent)) = stack.pop() else {
                return Err(LexError::UnbalancedDelimiter(tok.span.start));
            };
            let open_ch = open.text.chars().next().expect("delimiter char");
            if !delimiters_match(open_ch, close) {
                return Err(LexError::UnbalancedDelimiter(tok.span.start));
            }
            let group = Group {
                open,
                children: TokenTree { nodes: std::mem::take(&mut current) },
                close: tok,
            };
            current = parent;
            current.push(TreeNode::Group(group));
        } else {
            current.push(TreeNode::Leaf(tok));
        }
    }
    if let Some((open, _)) = stack.pop() {
        return Err(LexError::UnbalancedDelimiter(open.span.start));
    }
    Ok(TokenTree { nodes: current })
}

/// Column width of a line's leading whitespace; tabs advance to the next
/// multiple of 8 columns.
fn indent_width(line: &str) -> usize {
    let mut col = 0;
    for c in line.chars() {
        match c {
            ' ' => col += 1,
            '\t' => col = (col / 8 + 1) * 8,
            _ => break,
        }
    }
    col
}

fn is_blank(line: &str) -> bool {
    line.chars().all(|c| c.is_whitespace())
}

/// Byte range of the innermost enclosing `label` scope around `span`.
///
/// `File` is the whole source; `Function`/`Class` use the profile's
/// indentation-block finder. When no enclosing definition exists the whole
/// file range is returned. `Global` is not resolvable against a single tree
/// and also falls back to the file range.
pub fn enclosing_scope(
    tree: &TokenTree,
    span: Span,
    label: ScopeLabel,
    profile: &LanguageProfile,
) -> Span {
    let source = tree.to_text();
    let file = Span::new(0, source.len());
    let finder = match label {
        ScopeLabel::File | ScopeLabel::Global => return file,
        ScopeLabel::Function | ScopeLabel::Class => match profile.scope_finders.get(&label) {
            Some(f) => f,
            None => return file,
        },
    };

    // Line table: (byte start, byte end including the newline, text).
    let mut lines: Vec<(usize, usize)> = Vec::new();
    let mut pos = 0;
    for seg in source.split_inclusive('\n') {
        lines.push((pos, pos + seg.len()));
        pos += seg.len();
    }
    if lines.is_empty() {
        return file;
    }

    let tokens = tree.flatten();
    let mut best: Option<Span> = None;
    for (idx, &(lstart, lend)) in lines.iter().enumerate() {
        let line = &source[lstart..lend];
        if is_blank(line) || !line_starts_definition(&tokens, lstart, lend, finder) {
            continue;
        }
        let base = indent_width(line);
        let mut last = idx;
        for (j, &(s, e)) in lines.iter().enumerate().skip(idx + 1) {
            let l = &source[s..e];
            if is_blank(l) {
                continue;
            }
            if indent_width(l) > base {
                last = j;
            } else {
                break;
            }
        }
        let block = Span::new(lstart, lines[last].1);
        if block.contains_span(&span) {
            // Innermost block: latest start among containing blocks.
            if best.map_or(true, |b| block.start >= b.start) {
                best = Some(block);
            }
        }
    }
    best.unwrap_or(file)
}

/// True when the line's first non-space tokens are `<keyword> <identifier>`.
fn line_starts_definition(
    tokens: &[&Token],
    line_start: usize,
    line_end: usize,
    finder: &ScopeFinder,
) -> bool {
    let mut significant = tokens
        .iter()
        .filter(|t| t.span.start >= line_start && t.span.start < line_end)
        .filter(|t| !t.kind.is_spacing());
    let Some(first) = significant.next() else {
        return false;
    };
    if first.kind != TokenKind::Identifier || first.text != finder.keyword {
        return false;
    }
    matches!(
        significant.next(),
        Some(tok) if tok.kind == TokenKind::Identifier
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn py() -> LanguageProfile {
        LanguageProfile::python()
    }

    fn kinds_and_texts(tree: &TokenTree) -> Vec<(TokenKind, String)> {
        tree.flatten()
            .iter()
            .map(|t| (t.kind, t.text.clone()))
            .collect()
    }

    #[test]
    fn lexes_call_into_group() {
        let tree = lex("foo(1,2,3)", &py()).unwrap();
        assert_eq!(tree.nodes.len(), 2);
        match &tree.nodes[0] {
            TreeNode::Leaf(t) => {
                assert_eq!(t.kind, TokenKind::Identifier);
                assert_eq!(t.text, "foo");
            }
            other => panic!("expected leaf, got {other:?}"),
        }
        match &tree.nodes[1] {
            TreeNode::Group(g) => {
                assert_eq!(g.open.text, "(");
                assert_eq!(g.close.text, ")");
                let inner = kinds_and_texts(&g.children);
                assert_eq!(
                    inner,
                    vec![
                        (TokenKind::Number, "1".to_string()),
                        (TokenKind::Punctuation, ",".to_string()),
                        (TokenKind::Number, "2".to_string()),
                        (TokenKind::Punctuation, ",".to_string()),
                        (TokenKind::Number, "3".to_string()),
                    ]
                );
            }
            other => panic!("expected group, got {other:?}"),
        }
    }

    #[test]
    fn unclosed_delimiter_reports_position() {
        assert_eq!(
            lex("foo(", &py()).unwrap_err(),
            LexError::UnbalancedDelimiter(3)
        );
        assert_eq!(
            lex("foo)", &py()).unwrap_err(),
            LexError::UnbalancedDelimiter(3)
        );
        assert_eq!(
            lex("(]", &py()).unwrap_err(),
            LexError::UnbalancedDelimiter(1)
        );
    }

    #[test]
    fn strings_are_atomic() {
        let tree = lex("x = \"(\"", &py()).unwrap();
        let toks = kinds_and_texts(&tree);
        assert!(toks.contains(&(TokenKind::String, "\"(\"".to_string())));
        assert!(tree
            .nodes
            .iter()
            .all(|n| matches!(n, TreeNode::Leaf(_))));
    }

    #[test]
    fn triple_quoted_and_raw_strings() {
        let tree = lex("s = '''a(\nb'''\nt = r\"\\\"", &py()).unwrap();
        let strings: Vec<_> = tree
            .flatten()
            .into_iter()
            .filter(|t| t.kind == TokenKind::String)
            .map(|t| t.text.clone())
            .collect();
        assert_eq!(strings, vec!["'''a(\nb'''".to_string(), "r\"\\\"".to_string()]);
    }

    #[test]
    fn escaped_quote_stays_inside_string() {
        let tree = lex(r#"x = "a\"b(""#, &py()).unwrap();
        let strings: Vec<_> = tree
            .flatten()
            .into_iter()
            .filter(|t| t.kind == TokenKind::String)
            .collect();
        assert_eq!(strings.len(), 1);
        assert_eq!(strings[0].text, r#""a\"b(""#);
    }

    #[test]
    fn comments_do_not_open_groups() {
        let tree = lex("x = 1  # not ( a group\ny = 2", &py()).unwrap();
        assert!(tree.nodes.iter().all(|n| matches!(n, TreeNode::Leaf(_))));
    }

    #[test]
    fn flatten_round_trips() {
        for src in ["a+b", "", "def f(x):\n    return [x, {1: (2)}]\n"] {
            let tree = lex(src, &py()).unwrap();
            assert_eq!(tree.to_text(), src);
        }
    }

    #[test]
    fn flatten_of_empty_source_is_empty() {
        let tree = lex("", &py()).unwrap();
        assert!(tree.flatten().is_empty());
        assert_eq!(tree.source_len(), 0);
    }

    #[test]
    fn random_ascii_round_trip() {
        // 200 pseudo-random ASCII programs; oracle is string identity.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let alphabet: Vec<char> =
            "abc XY_09+-*/=.,:#'\"\n\t(){}[]".chars().collect();
        let profile = py();
        for _ in 0..200 {
            let len = rng.random_range(0..60);
            let src: String = (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let flat: String = scan(&src, &profile)
                .iter()
                .map(|t| t.text.as_str())
                .collect();
            assert_eq!(flat, src, "scan must be lossless for {src:?}");
        }
    }

    #[test]
    fn group_depth_matches_nesting() {
        let tree = lex("a(b[c{d}])", &py()).unwrap();
        fn depth(tree: &TokenTree) -> usize {
            tree.nodes
                .iter()
                .map(|n| match n {
                    TreeNode::Leaf(_) => 0,
                    TreeNode::Group(g) => 1 + depth(&g.children),
                })
                .max()
                .unwrap_or(0)
        }
        assert_eq!(depth(&tree), 3);
    }

    const DOC: &str = "import os\n\nclass Vault:\n    def encrypt_document(self, document, key):\n        cipher = make(key)\n        return cipher.seal(document)\n\n    def other(self):\n        pass\n\ntop = 1\n";

    #[test]
    fn function_scope_is_innermost_def_block() {
        let profile = py();
        let tree = lex(DOC, &profile).unwrap();
        let needle = DOC.find("cipher = make").unwrap();
        let span = Span::new(needle, needle + 6);
        let scope = enclosing_scope(&tree, span, ScopeLabel::Function, &profile);
        let text = &DOC[scope.start..scope.end];
        assert!(text.starts_with("    def encrypt_document"));
        assert!(text.contains("cipher.seal"));
        assert!(!text.contains("def other"));
    }

    #[test]
    fn file_scope_is_whole_source() {
        let profile = py();
        let tree = lex(DOC, &profile).unwrap();
        let scope = enclosing_scope(&tree, Span::new(5, 7), ScopeLabel::File, &profile);
        assert_eq!(scope, Span::new(0, DOC.len()));
    }

    #[test]
    fn top_level_span_falls_back_to_file_range() {
        let profile = py();
        let tree = lex(DOC, &profile).unwrap();
        let needle = DOC.find("top = 1").unwrap();
        let scope = enclosing_scope(
            &tree,
            Span::new(needle, needle + 3),
            ScopeLabel::Function,
            &profile,
        );
        assert_eq!(scope, Span::new(0, DOC.len()));
    }

    #[test]
    fn scope_nesting_is_monotone() {
        let profile = py();
        let tree = lex(DOC, &profile).unwrap();
        let needle = DOC.find("cipher = make").unwrap();
        let span = Span::new(needle, needle + 6);
        let func = enclosing_scope(&tree, span, ScopeLabel::Function, &profile);
        let class = enclosing_scope(&tree, span, ScopeLabel::Class, &profile);
        let file = enclosing_scope(&tree, span, ScopeLabel::File, &profile);
        assert!(class.contains_span(&func));
        assert!(file.contains_span(&class));
    }

    #[test]
    fn blank_lines_do_not_end_blocks() {
        let src = "def f():\n    a = 1\n\n    b = 2\nc = 3\n";
        let profile = py();
        let tree = lex(src, &profile).unwrap();
        let needle = src.find("a = 1").unwrap();
        let scope = enclosing_scope(
            &tree,
            Span::new(needle, needle + 1),
            ScopeLabel::Function,
            &profile,
        );
        let text = &src[scope.start..scope.end];
        assert!(text.contains("b = 2"));
        assert!(!text.contains("c = 3"));
    }

    #[test]
    fn profile_requires_function_and_class_finders() {
        let bad = r#"
name = "x"
keywords = ["kw"]
strings = [{ quote = "\"" }]
[scope_finders.Function]
keyword = "def"
"#;
        assert!(matches!(
            LanguageProfile::from_toml(bad),
            Err(ProfileError::MissingScopeFinder { .. })
        ));
    }
}
