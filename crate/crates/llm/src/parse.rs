//! Tolerant extraction of `key: value` answers.
//!
//! Lines are scanned top to bottom; markdown emphasis, backticks, bullets
//! and surrounding quotes are ignored, keys are case-insensitive and the
//! first line whose key matches wins.

use prescribe_core::{AgLevel, AggressionScore, DiLabel, ItemCategory};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no `{0}:` line in the response")]
    MissingKey(&'static str),
    #[error("`{key}` has an unusable value `{value}`")]
    BadValue { key: &'static str, value: String },
}

/// What one response was parsed into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parsed {
    Toxic(bool),
    Di(DiLabel),
    Items(Vec<ItemCategory>),
    Score { score: AggressionScore, stated_level: Option<AgLevel> },
}

fn clean(line: &str) -> String {
    line.trim()
        .trim_start_matches(['-', '*', '>', '•'])
        .replace(['*', '`'], "")
        .trim()
        .trim_matches('"')
        .trim()
        .to_owned()
}

/// Value of the first line whose key is one of `keys`.
fn value_of(response: &str, keys: &[&str]) -> Option<String> {
    response.lines().find_map(|line| {
        let line = clean(line);
        let (key, value) = line.split_once([':', '='])?;
        let key = key.trim().to_ascii_lowercase();
        keys.contains(&key.as_str()).then(|| value.trim().trim_matches('"').trim().to_owned())
    })
}

/// A bare answer: the whole response is a single token.
fn bare(response: &str) -> Option<String> {
    let lines: Vec<String> = response.lines().map(clean).filter(|l| !l.is_empty()).collect();
    match lines.as_slice() {
        [only] if !only.contains(char::is_whitespace) => Some(only.trim_end_matches('.').to_owned()),
        _ => None,
    }
}

fn binary(key: &'static str, value: &str) -> Result<bool, ParseError> {
    let bad = || ParseError::BadValue { key, value: value.to_owned() };
    let first = value.split(|c: char| c.is_whitespace() || c == ',' || c == '.').next().unwrap_or("");
    match first.to_ascii_lowercase().as_str() {
        "1" | "yes" | "true" => Ok(true),
        "0" | "no" | "false" => Ok(false),
        _ => Err(bad()),
    }
}

pub fn parse_toxic(response: &str) -> Result<bool, ParseError> {
    let value = value_of(response, &["toxic", "label", "answer"])
        .or_else(|| bare(response))
        .ok_or(ParseError::MissingKey("toxic"))?;
    binary("toxic", &value)
}

pub fn parse_di(response: &str) -> Result<DiLabel, ParseError> {
    let value = value_of(response, &["di", "direction of intent", "direction"])
        .or_else(|| bare(response))
        .ok_or(ParseError::MissingKey("DI"))?;
    Ok(if binary("DI", &value)? { DiLabel::DIRECTED } else { DiLabel::NOT_DIRECTED })
}

/// Category list, in first-mention order without repeats.
pub fn parse_items(response: &str) -> Result<Vec<ItemCategory>, ParseError> {
    let value = value_of(response, &["items", "categories", "category"]).ok_or(ParseError::MissingKey("items"))?;
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']').trim();
    let mut out = Vec::new();
    if inner.is_empty() || inner.eq_ignore_ascii_case("none") {
        return Ok(out);
    }
    for name in inner.split(',') {
        let name = name.trim().trim_matches(['"', '\'']);
        let category: ItemCategory =
            name.parse().map_err(|_| ParseError::BadValue { key: "items", value: name.to_owned() })?;
        if !out.contains(&category) {
            out.push(category);
        }
    }
    Ok(out)
}

/// Score (required) and the level the model claims (optional, advisory).
pub fn parse_score(response: &str) -> Result<(AggressionScore, Option<AgLevel>), ParseError> {
    let value = value_of(response, &["score", "aggression score"]).ok_or(ParseError::MissingKey("score"))?;
    let number = value.split_whitespace().next().unwrap_or("");
    let score = number
        .parse::<f64>()
        .ok()
        .and_then(|v| AggressionScore::from_f64(v).ok())
        .ok_or_else(|| ParseError::BadValue { key: "score", value: value.clone() })?;
    let level = value_of(response, &["level", "ag", "aggression level"])
        .and_then(|v| v.split_whitespace().next()?.parse::<u8>().ok())
        .and_then(|v| AgLevel::new(v).ok());
    Ok((score, level))
}
