//! SEARCH/REPLACE edit blocks:
//!
//! ```text
//! <<<<<<< SEARCH
//! old text
//! =======
//! new text
//! >>>>>>> REPLACE
//! ```
//!
//! Anything outside a block (prose, code fences) is ignored.

use thiserror::Error;

pub const SEARCH_MARKER: &str = "<<<<<<< SEARCH";
pub const DIVIDER: &str = "=======";
pub const REPLACE_MARKER: &str = ">>>>>>> REPLACE";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("malformed diff: {0}")]
    Parse(String),
    #[error("block {block}: search text not found")]
    NoMatch { block: usize },
    #[error("block {block}: search text matches {count} times")]
    Ambiguous { block: usize, count: usize },
    #[error("diff leaves the program unchanged")]
    NoOp,
}

impl DiffError {
    pub fn kind(&self) -> &'static str {
        match self {
            DiffError::Parse(_) => "parse",
            DiffError::NoMatch { .. } => "no-match",
            DiffError::Ambiguous { .. } => "ambiguous",
            DiffError::NoOp => "no-op",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffBlock {
    pub search: String,
    pub replace: String,
}

impl DiffBlock {
    pub fn new(search: impl Into<String>, replace: impl Into<String>) -> Self {
        DiffBlock {
            search: search.into(),
            replace: replace.into(),
        }
    }
}

pub fn parse_diff(text: &str) -> Result<Vec<DiffBlock>, DiffError> {
    enum State {
        Outside,
        Search(Vec<String>),
        Replace(Vec<String>, Vec<String>),
    }
    let mut blocks = Vec::new();
    let mut state = State::Outside;
    for (i, line) in text.lines().enumerate() {
        let marker = line.trim_end();
        state = match state {
            State::Outside if marker == SEARCH_MARKER => State::Search(Vec::new()),
            State::Outside => State::Outside,
            State::Search(s) if marker == DIVIDER => State::Replace(s, Vec::new()),
            State::Search(_) if marker == SEARCH_MARKER || marker == REPLACE_MARKER => {
                return Err(DiffError::Parse(format!("line {}: expected `{DIVIDER}`", i + 1)));
            }
            State::Search(mut s) => {
                s.push(line.to_owned());
                State::Search(s)
            }
            State::Replace(s, r) if marker == REPLACE_MARKER => {
                if s.is_empty() || s.iter().all(|l| l.is_empty()) {
                    return Err(DiffError::Parse(format!(
                        "block {} has empty search text",
                        blocks.len() + 1
                    )));
                }
                blocks.push(DiffBlock::new(s.join("\n"), r.join("\n")));
                State::Outside
            }
            State::Replace(..) if marker == SEARCH_MARKER || marker == DIVIDER => {
                return Err(DiffError::Parse(format!("line {}: expected `{REPLACE_MARKER}`", i + 1)));
            }
            State::Replace(s, mut r) => {
                r.push(line.to_owned());
                State::Replace(s, r)
            }
        };
    }
    if !matches!(state, State::Outside) {
        return Err(DiffError::Parse("unterminated block".into()));
    }
    if blocks.is_empty() {
        return Err(DiffError::Parse("no SEARCH/REPLACE blocks".into()));
    }
    Ok(blocks)
}

/// Counts occurrences of `needle`, overlapping ones included.
fn occurrences(haystack: &str, needle: &str) -> (usize, Option<usize>) {
    let mut count = 0;
    let mut first = None;
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let at = from + pos;
        first.get_or_insert(at);
        count += 1;
        let step = haystack[at..].chars().next().map_or(1, char::len_utf8);
        from = at + step;
    }
    (count, first)
}

/// Applies blocks in order; each search text must occur exactly once in
/// the program as modified by the preceding blocks.
pub fn apply_blocks(program: &str, blocks: &[DiffBlock]) -> Result<String, DiffError> {
    let mut out = program.to_owned();
    for (i, b) in blocks.iter().enumerate() {
        match occurrences(&out, &b.search) {
            (0, _) => return Err(DiffError::NoMatch { block: i + 1 }),
            (1, Some(at)) => out.replace_range(at..at + b.search.len(), &b.replace),
            (count, _) => return Err(DiffError::Ambiguous { block: i + 1, count }),
        }
    }
    if out == program {
        return Err(DiffError::NoOp);
    }
    Ok(out)
}

pub fn apply_diff(program: &str, diff: &str) -> Result<String, DiffError> {
    apply_blocks(program, &parse_diff(diff)?)
}

pub fn render_diff(blocks: &[DiffBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(SEARCH_MARKER);
        out.push('\n');
        out.push_str(&b.search);
        out.push('\n');
        out.push_str(DIVIDER);
        out.push('\n');
        if !b.replace.is_empty() {
            out.push_str(&b.replace);
            out.push('\n');
        }
        out.push_str(REPLACE_MARKER);
        out.push('\n');
    }
    out
}

/// One-line description of a change, used as "prior attempted change"
/// context for later mutations.
pub fn summarize(blocks: &[DiffBlock]) -> String {
    fn clip(s: &str) -> String {
        let flat = s.split_whitespace().collect::<Vec<_>>().join(" ");
        if flat.chars().count() > 60 {
            format!("{}…", flat.chars().take(60).collect::<String>())
        } else {
            flat
        }
    }
    blocks
        .iter()
        .map(|b| format!("`{}` -> `{}`", clip(&b.search), clip(&b.replace)))
        .collect::<Vec<_>>()
        .join("; ")
}
