//! Pulling planning files and item lists out of free-form model output.

use std::collections::BTreeSet;

use crate::LlmError;

/// Bodies of ``` fenced blocks in document order. An unterminated fence
/// runs to the end of the text.
pub fn fenced_blocks(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(lines), true) => {
                out.push(lines.join("\n"));
                current = None;
            }
            (Some(lines), false) => lines.push(line),
            (None, false) => {}
        }
    }
    if let Some(lines) = current {
        out.push(lines.join("\n"));
    }
    out
}

/// Byte ranges of balanced top-level parenthesized expressions, skipping
/// `;` comments. An expression left open at the end is not returned.
pub fn balanced_spans(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'(' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b')' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push((start, i + 1));
                }
            }
            _ => {}
        }
        i += 1;
    }
    spans
}

fn is_define(expr: &str) -> bool {
    let inner = expr[1..].trim_start();
    inner.len() >= 6
        && inner[..6].eq_ignore_ascii_case("define")
        && !inner[6..].starts_with(|c: char| c.is_alphanumeric() || c == '_' || c == '-')
}

fn defines_in(text: &str) -> Vec<String> {
    balanced_spans(text)
        .into_iter()
        .map(|(a, b)| &text[a..b])
        .filter(|e| is_define(e))
        .map(str::to_string)
        .collect()
}

/// Every balanced `(define ...)` expression, taken from fenced blocks when
/// any contain one and from the whole text otherwise.
pub fn extract_pddl(text: &str) -> Result<Vec<String>, LlmError> {
    let fenced: Vec<String> = fenced_blocks(text).iter().flat_map(|b| defines_in(b)).collect();
    let found = if fenced.is_empty() { defines_in(text) } else { fenced };
    if found.is_empty() {
        Err(LlmError::NoPlanningFileFound)
    } else {
        Ok(found)
    }
}

/// The balanced expressions of the first fenced block that has any, else
/// of the whole text, joined by newlines. Used for sub-goal lists.
pub fn extract_expressions(text: &str) -> Result<String, LlmError> {
    let collect = |t: &str| -> Vec<String> {
        balanced_spans(t)
            .into_iter()
            .map(|(a, b)| t[a..b].to_string())
            .collect()
    };
    let found = fenced_blocks(text)
        .iter()
        .map(|b| collect(b))
        .find(|v| !v.is_empty())
        .unwrap_or_else(|| collect(text));
    if found.is_empty() {
        Err(LlmError::NoPlanningFileFound)
    } else {
        Ok(found.join("\n"))
    }
}

/// Known item ids mentioned in the response, in first-mention order. Only
/// fenced blocks are read when the response has any.
pub fn extract_item_ids(text: &str, known: &BTreeSet<String>) -> Vec<String> {
    let blocks = fenced_blocks(text);
    let source = if blocks.is_empty() {
        text.to_string()
    } else {
        blocks.join("\n")
    };
    let mut seen = BTreeSet::new();
    source
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
        .map(str::to_ascii_lowercase)
        .filter(|t| known.contains(t) && seen.insert(t.clone()))
        .collect()
}

/// One id per nonempty line of the first fenced block, or of the whole
/// text when there is none. List markers and trailing punctuation are
/// stripped; ids are lowercased and deduplicated in order.
pub fn extract_listed_ids(text: &str) -> Vec<String> {
    let blocks = fenced_blocks(text);
    let source = blocks.into_iter().next().unwrap_or_else(|| text.to_string());
    let mut seen = BTreeSet::new();
    source
        .lines()
        .filter_map(|line| {
            let line = line
                .trim()
                .trim_start_matches(|c: char| c == '-' || c == '*' || c.is_ascii_digit() || c == '.' || c == ')');
            let token = line.split_whitespace().next()?;
            let token = token.trim_end_matches([',', ';', '.', ':']).to_ascii_lowercase();
            (!token.is_empty()).then_some(token)
        })
        .filter(|t| seen.insert(t.clone()))
        .collect()
}
