//! Ordered rewrite-rule tables.
//!
//! A rule file is UTF-8 TSV with `priority<TAB>pattern<TAB>replacement` rows
//! and `#` comment lines. Patterns use `regex` syntax; replacements are
//! literal text with `\x{HHHH}` escapes and `$n` / `${n}` capture references.
//! Both sides may only mention codepoints in the Myanmar block, so a rule can
//! never insert, delete or reorder anything outside it.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use regex::Regex;
use regex_syntax::hir::{Class, Hir, HirKind, Look};

use super::EncodingError;

/// First and last codepoint a rule is allowed to touch.
pub const MYANMAR_BLOCK: (char, char) = ('\u{1000}', '\u{109F}');

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Group(usize),
}

/// Replacement template over capture groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pieces: Vec<Piece>,
}

impl Template {
    pub fn parse(src: &str) -> Result<Self, String> {
        let mut pieces = Vec::new();
        let mut lit = String::new();
        let mut chars = src.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some('x') | Some('u') => {
                        if chars.next() != Some('{') {
                            return Err(format!("expected '{{' after escape in {src:?}"));
                        }
                        let mut hex = String::new();
                        loop {
                            match chars.next() {
                                Some('}') => break,
                                Some(h) if h.is_ascii_hexdigit() => hex.push(h),
                                _ => return Err(format!("bad hex escape in {src:?}")),
                            }
                        }
                        let cp = u32::from_str_radix(&hex, 16)
                            .ok()
                            .and_then(char::from_u32)
                            .ok_or_else(|| format!("invalid codepoint {hex} in {src:?}"))?;
                        lit.push(cp);
                    }
                    Some('\\') => lit.push('\\'),
                    Some('$') => lit.push('$'),
                    other => return Err(format!("unknown escape \\{other:?} in {src:?}")),
                },
                '$' => {
                    let braced = chars.peek() == Some(&'{');
                    if braced {
                        chars.next();
                    }
                    let mut digits = String::new();
                    while let Some(d) = chars.peek().copied().filter(char::is_ascii_digit) {
                        digits.push(d);
                        chars.next();
                    }
                    if braced && chars.next() != Some('}') {
                        return Err(format!("unterminated ${{...}} in {src:?}"));
                    }
                    let group: usize = digits
                        .parse()
                        .map_err(|_| format!("'$' without group number in {src:?}"))?;
                    if !lit.is_empty() {
                        pieces.push(Piece::Literal(std::mem::take(&mut lit)));
                    }
                    pieces.push(Piece::Group(group));
                }
                other => lit.push(other),
            }
        }
        if !lit.is_empty() {
            pieces.push(Piece::Literal(lit));
        }
        Ok(Template { pieces })
    }

    fn max_group(&self) -> usize {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Group(g) => Some(*g),
                Piece::Literal(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn literal_chars(&self) -> impl Iterator<Item = char> + '_ {
        self.pieces.iter().flat_map(|p| match p {
            Piece::Literal(s) => s.chars().collect::<Vec<_>>(),
            Piece::Group(_) => Vec::new(),
        })
    }

    fn expand(&self, caps: &regex::Captures<'_>, dst: &mut String) {
        for piece in &self.pieces {
            match piece {
                Piece::Literal(s) => dst.push_str(s),
                Piece::Group(g) => {
                    if let Some(m) = caps.get(*g) {
                        dst.push_str(m.as_str());
                    }
                }
            }
        }
    }
}

/// One rewrite rule. Applied as a single left-to-right, non-overlapping pass.
#[derive(Debug, Clone)]
pub struct RewriteRule {
    pub priority: i64,
    pub pattern: Regex,
    pub replacement: Template,
}

impl RewriteRule {
    pub fn apply(&self, text: &str) -> String {
        if !self.pattern.is_match(text) {
            return text.to_string();
        }
        self.pattern
            .replace_all(text, |caps: &regex::Captures<'_>| {
                let mut out = String::new();
                self.replacement.expand(caps, &mut out);
                out
            })
            .into_owned()
    }
}

/// Rules sorted by strictly ascending priority.
#[derive(Debug, Clone)]
pub struct RuleTable {
    rules: Vec<RewriteRule>,
}

impl RuleTable {
    pub fn from_tsv(src: &str) -> Result<Self, EncodingError> {
        let mut rules = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in src.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let invalid = |reason: String| EncodingError::RuleTableInvalid { line: line_no, reason };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(invalid(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let priority: i64 = cols[0]
                .trim()
                .parse()
                .map_err(|_| invalid(format!("priority {:?} is not an integer", cols[0])))?;
            if !seen.insert(priority) {
                return Err(invalid(format!("duplicate priority {priority}")));
            }
            let pattern = Regex::new(cols[1]).map_err(|e| invalid(format!("bad pattern: {e}")))?;
            check_pattern_scope(cols[1]).map_err(invalid)?;
            let replacement = Template::parse(cols[2]).map_err(invalid)?;
            let groups = pattern.captures_len() - 1;
            if replacement.max_group() > groups {
                return Err(invalid(format!(
                    "replacement references ${} but pattern has {groups} groups",
                    replacement.max_group()
                )));
            }
            if let Some(c) = replacement.literal_chars().find(|c| !in_block(*c)) {
                return Err(invalid(format!("replacement inserts U+{:04X} outside the Myanmar block", c as u32)));
            }
            rules.push(RewriteRule { priority, pattern, replacement });
        }
        rules.sort_by_key(|r| r.priority);
        Ok(RuleTable { rules })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, EncodingError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| EncodingError::FileUnreadable {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_tsv(&src)
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Runs every rule once, in priority order.
    pub fn apply(&self, text: &str) -> String {
        self.rules
            .iter()
            .fold(text.to_string(), |acc, rule| rule.apply(&acc))
    }
}

impl fmt::Display for RuleTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{}\t{}", r.priority, r.pattern.as_str())?;
        }
        Ok(())
    }
}

fn in_block(c: char) -> bool {
    (MYANMAR_BLOCK.0..=MYANMAR_BLOCK.1).contains(&c)
}

/// Rejects patterns that could match a codepoint outside the Myanmar block.
fn check_pattern_scope(pattern: &str) -> Result<(), String> {
    let hir = regex_syntax::Parser::new()
        .parse(pattern)
        .map_err(|e| format!("bad pattern: {e}"))?;
    walk(&hir)
}

fn walk(hir: &Hir) -> Result<(), String> {
    match hir.kind() {
        HirKind::Empty => Ok(()),
        HirKind::Literal(lit) => {
            let s = std::str::from_utf8(&lit.0).map_err(|_| "non-UTF-8 literal".to_string())?;
            match s.chars().find(|c| !in_block(*c)) {
                Some(c) => Err(format!("pattern matches U+{:04X} outside the Myanmar block", c as u32)),
                None => Ok(()),
            }
        }
        HirKind::Class(Class::Unicode(cls)) => {
            for r in cls.ranges() {
                if !in_block(r.start()) || !in_block(r.end()) {
                    return Err(format!(
                        "character class [{:04X}-{:04X}] leaves the Myanmar block",
                        r.start() as u32,
                        r.end() as u32
                    ));
                }
            }
            Ok(())
        }
        HirKind::Class(Class::Bytes(_)) => Err("byte classes are not allowed".into()),
        HirKind::Look(look) => match look {
            Look::Start | Look::End => Ok(()),
            other => Err(format!("unsupported assertion {other:?}")),
        },
        HirKind::Repetition(rep) => walk(&rep.sub),
        HirKind::Capture(cap) => walk(&cap.sub),
        HirKind::Concat(items) | HirKind::Alternation(items) => items.iter().try_for_each(walk),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_parses_escapes_and_groups() {
        let t = Template::parse(r"\x{1004}$1${2}x").unwrap();
        assert_eq!(
            t.pieces,
            vec![
                Piece::Literal("\u{1004}".into()),
                Piece::Group(1),
                Piece::Group(2),
                Piece::Literal("x".into())
            ]
        );
        assert!(Template::parse(r"\x{zz}").is_err());
        assert!(Template::parse("$").is_err());
    }

    #[test]
    fn rules_sorted_by_priority() {
        let table = RuleTable::from_tsv("20\t\\x{1001}\t\\x{1002}\n# c\n10\t\\x{1000}\t\\x{1001}\n").unwrap();
        assert_eq!(table.rules()[0].priority, 10);
        // 1000 -> 1001 -> 1002: each rule sees the previous rule's output.
        assert_eq!(table.apply("\u{1000}"), "\u{1002}");
    }

    #[test]
    fn single_pass_no_reentry() {
        // A rule whose output matches its own pattern still terminates.
        let table = RuleTable::from_tsv("1\t\\x{1000}\t\\x{1000}\\x{1000}\n").unwrap();
        assert_eq!(table.apply("\u{1000}"), "\u{1000}\u{1000}");
    }

    #[test]
    fn duplicate_priority_rejected() {
        let err = RuleTable::from_tsv("1\t\\x{1000}\t\\x{1001}\n1\t\\x{1001}\t\\x{1002}\n").unwrap_err();
        assert!(matches!(err, EncodingError::RuleTableInvalid { line: 2, .. }), "{err}");
    }

    #[test]
    fn bad_pattern_rejected() {
        assert!(RuleTable::from_tsv("1\t(\\x{1000}\t\\x{1001}\n").is_err());
        assert!(RuleTable::from_tsv("1\t\\x{1000}\n").is_err());
        assert!(RuleTable::from_tsv("x\t\\x{1000}\t\\x{1001}\n").is_err());
    }

    #[test]
    fn out_of_block_rules_rejected() {
        assert!(RuleTable::from_tsv("1\ta\t\\x{1001}\n").is_err());
        assert!(RuleTable::from_tsv("1\t.\t\\x{1001}\n").is_err());
        assert!(RuleTable::from_tsv("1\t\\x{1000}\tb\n").is_err());
        assert!(RuleTable::from_tsv("1\t(\\x{1000})\t$2\n").is_err());
    }
}
