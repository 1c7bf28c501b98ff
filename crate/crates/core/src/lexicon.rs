//! Surface patterns for the ten aggression item categories.
//!
//! Lexicon files are UTF-8 TSV:
//!
//! ```text
//! # comment
//! pattern<TAB>category[<TAB>alias-of[<TAB>notes]]
//! ```
//!
//! Patterns are tokenized with the same normalizer as the text they are
//! matched against, so `"dumb ass"` is a two-token pattern and `"f**k"` a
//! one-token pattern. The alias column documents the canonical form an
//! obfuscated spelling stands for.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::normalize::normalize;
use crate::types::TextUnit;
use crate::Span;

/// Linguistic level an item operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemLevel {
    Lexical,
    Syntactic,
    Discourse,
}

/// How an item contributes to the aggression score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    /// Aggressive item, worth 1 point.
    Ai,
    /// Aggression catalyzer, worth 0.5 and nothing without an aggressive base.
    Ac,
    /// Inert alone; becomes a 0.5 aggressive base next to a catalyzer.
    FalseConstruct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ItemCategory {
    AggressiveNounDetPhrase,
    AggressiveVerbPhrase,
    AggressiveAdjPhrase,
    AggressiveAdvPhrase,
    StrongExpression,
    RhetoricalQuestion,
    Imperative,
    IronicExpression,
    FalseConstruct,
    ControversialContent,
}

impl ItemCategory {
    pub const ALL: [ItemCategory; 10] = [
        ItemCategory::AggressiveNounDetPhrase,
        ItemCategory::AggressiveVerbPhrase,
        ItemCategory::AggressiveAdjPhrase,
        ItemCategory::AggressiveAdvPhrase,
        ItemCategory::StrongExpression,
        ItemCategory::RhetoricalQuestion,
        ItemCategory::Imperative,
        ItemCategory::IronicExpression,
        ItemCategory::FalseConstruct,
        ItemCategory::ControversialContent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ItemCategory::AggressiveNounDetPhrase => "AggressiveNounDetPhrase",
            ItemCategory::AggressiveVerbPhrase => "AggressiveVerbPhrase",
            ItemCategory::AggressiveAdjPhrase => "AggressiveAdjPhrase",
            ItemCategory::AggressiveAdvPhrase => "AggressiveAdvPhrase",
            ItemCategory::StrongExpression => "StrongExpression",
            ItemCategory::RhetoricalQuestion => "RhetoricalQuestion",
            ItemCategory::Imperative => "Imperative",
            ItemCategory::IronicExpression => "IronicExpression",
            ItemCategory::FalseConstruct => "FalseConstruct",
            ItemCategory::ControversialContent => "ControversialContent",
        }
    }

    pub fn level(self) -> ItemLevel {
        use ItemCategory::*;
        match self {
            AggressiveNounDetPhrase | AggressiveVerbPhrase | AggressiveAdjPhrase | AggressiveAdvPhrase => {
                ItemLevel::Lexical
            }
            StrongExpression | RhetoricalQuestion | Imperative => ItemLevel::Syntactic,
            IronicExpression | FalseConstruct | ControversialContent => ItemLevel::Discourse,
        }
    }

    pub fn kind(self) -> ItemKind {
        use ItemCategory::*;
        match self {
            AggressiveNounDetPhrase | AggressiveVerbPhrase | AggressiveAdjPhrase | ControversialContent => ItemKind::Ai,
            AggressiveAdvPhrase | StrongExpression | RhetoricalQuestion | Imperative | IronicExpression => ItemKind::Ac,
            FalseConstruct => ItemKind::FalseConstruct,
        }
    }

    fn valid_names() -> String {
        ItemCategory::ALL.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for ItemCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown category `{name}`; valid categories: {valid}")]
pub struct UnknownCategory {
    pub name: String,
    pub valid: String,
}

impl FromStr for ItemCategory {
    type Err = UnknownCategory;

    /// Exact names, or the same ignoring case, spaces, `_` and `-`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let squash = |x: &str| x.chars().filter(|c| !matches!(c, ' ' | '_' | '-')).collect::<String>().to_lowercase();
        let wanted = squash(s.trim());
        ItemCategory::ALL
            .into_iter()
            .find(|c| squash(c.name()) == wanted)
            .ok_or_else(|| UnknownCategory { name: s.trim().to_owned(), valid: ItemCategory::valid_names() })
    }
}

/// Exemplars listed for each category in the scoring reference table.
pub const REFERENCE_EXEMPLARS: &[(ItemCategory, &str)] = &[
    (ItemCategory::AggressiveNounDetPhrase, "nigga"),
    (ItemCategory::AggressiveNounDetPhrase, "chingchong"),
    (ItemCategory::AggressiveNounDetPhrase, "bitch"),
    (ItemCategory::AggressiveNounDetPhrase, "shit"),
    (ItemCategory::AggressiveNounDetPhrase, "dumbass"),
    (ItemCategory::AggressiveVerbPhrase, "fuck"),
    (ItemCategory::AggressiveVerbPhrase, "hate"),
    (ItemCategory::AggressiveAdjPhrase, "retarded"),
    (ItemCategory::AggressiveAdjPhrase, "psycho"),
    (ItemCategory::AggressiveAdjPhrase, "stupid"),
    (ItemCategory::AggressiveAdvPhrase, "fucking"),
    (ItemCategory::StrongExpression, "should"),
    (ItemCategory::StrongExpression, "must"),
    (ItemCategory::StrongExpression, "definitely"),
    (ItemCategory::RhetoricalQuestion, "Doesn't everyone feel the same?"),
    (ItemCategory::Imperative, "Shut the door"),
    (ItemCategory::IronicExpression, "Clear as mud"),
    (ItemCategory::FalseConstruct, "Those are people who only believe in flat earth"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub category: ItemCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias_of: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl LexiconEntry {
    pub fn new(pattern: &str, category: ItemCategory) -> Self {
        LexiconEntry { pattern: canonical_pattern(pattern), category, alias_of: None, notes: String::new() }
    }
}

/// Lowercase, trimmed, inner whitespace collapsed to single spaces.
fn canonical_pattern(pattern: &str) -> String {
    pattern.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("lexicon line {line}: {source}")]
    UnknownCategory {
        line: usize,
        #[source]
        source: UnknownCategory,
    },
}

/// A lexicon hit: which entry matched where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconMatch<'a> {
    pub entry: &'a LexiconEntry,
    /// Half-open token index range.
    pub tokens: std::ops::Range<usize>,
    pub span: Span,
}

/// Immutable, indexed set of entries.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    /// First pattern token -> (pattern tokens, entry index).
    index: HashMap<String, Vec<(Vec<String>, usize)>>,
    version: String,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_entries(Vec::new()).expect("empty lexicon")
    }
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

const SEED_TSV: &str = include_str!("../data/seed_lexicon.tsv");

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn seed() -> Lexicon {
        static SEED: std::sync::LazyLock<Lexicon> =
            std::sync::LazyLock::new(|| Lexicon::parse_tsv(SEED_TSV).expect("seed lexicon is valid"));
        SEED.clone()
    }

    pub fn seed_tsv() -> &'static str {
        SEED_TSV
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| LexiconError::Io { path: path.to_owned(), source })?;
        Lexicon::parse_tsv(&text)
    }

    pub fn parse_tsv(text: &str) -> Result<Lexicon, LexiconError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(LexiconError::Malformed {
                    line: line_no,
                    reason: "expected `pattern<TAB>category`".into(),
                });
            }
            if cols.len() > 4 {
                return Err(LexiconError::Malformed {
                    line: line_no,
                    reason: format!("expected at most 4 columns, found {}", cols.len()),
                });
            }
            let pattern = canonical_pattern(cols[0]);
            if pattern.is_empty() {
                return Err(LexiconError::Malformed { line: line_no, reason: "empty pattern".into() });
            }
            if normalize(&pattern).is_empty() {
                return Err(LexiconError::Malformed {
                    line: line_no,
                    reason: format!("pattern `{pattern}` has no tokens"),
                });
            }
            let category = cols[1]
                .trim()
                .parse::<ItemCategory>()
                .map_err(|source| LexiconError::UnknownCategory { line: line_no, source })?;
            let alias_of = cols.get(2).map(|a| canonical_pattern(a)).filter(|a| !a.is_empty());
            let notes = cols.get(3).map(|n| n.trim().to_owned()).unwrap_or_default();
            entries.push(LexiconEntry { pattern, category, alias_of, notes });
        }
        Lexicon::from_entries(entries)
    }

    /// Builds a lexicon; duplicate (pattern, category) pairs collapse to the first.
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Lexicon, LexiconError> {
        let mut unique: BTreeMap<(String, ItemCategory), LexiconEntry> = BTreeMap::new();
        for mut entry in entries {
            entry.pattern = canonical_pattern(&entry.pattern);
            if entry.pattern.is_empty() || normalize(&entry.pattern).is_empty() {
                return Err(LexiconError::Malformed {
                    line: 0,
                    reason: format!("entry `{}` has an empty pattern", entry.pattern),
                });
            }
            unique.entry((entry.pattern.clone(), entry.category)).or_insert(entry);
        }
        let entries: Vec<LexiconEntry> = unique.into_values().collect();

        let mut index: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        let mut hasher = Sha256::new();
        for (i, entry) in entries.iter().enumerate() {
            let toks: Vec<String> = normalize(&entry.pattern).into_iter().map(|t| t.text).collect();
            index.entry(toks[0].clone()).or_default().push((toks, i));
            hasher.update(entry.pattern.as_bytes());
            hasher.update([0]);
            hasher.update(entry.category.name().as_bytes());
            hasher.update([0]);
            hasher.update(entry.alias_of.as_deref().unwrap_or("").as_bytes());
            hasher.update(b"\n");
        }
        let version = hex::encode(hasher.finalize());
        Ok(Lexicon { entries, index, version })
    }

    /// Returns a new lexicon with `extra` added.
    pub fn extended(&self, extra: impl IntoIterator<Item = LexiconEntry>) -> Result<Lexicon, LexiconError> {
        Lexicon::from_entries(self.entries.iter().cloned().chain(extra).collect())
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Content hash of the entries.
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Matches the lexicon against a unit's tokens.
    ///
    /// Within each category, matching is greedy left-to-right with the
    /// longest pattern winning at each position and no overlaps. Matches of
    /// different categories may share tokens. Results are ordered by span
    /// start, then category.
    pub fn find_matches<'a>(&'a self, unit: &TextUnit) -> Vec<LexiconMatch<'a>> {
        let tokens = unit.tokens();
        let mut blocked_until: HashMap<ItemCategory, usize> = HashMap::new();
        let mut out = Vec::new();
        for start in 0..tokens.len() {
            let Some(candidates) = self.index.get(&tokens[start].text) else {
                continue;
            };
            // Longest candidate per category at this position.
            let mut best: BTreeMap<ItemCategory, (usize, usize)> = BTreeMap::new();
            for (pattern, entry_idx) in candidates {
                let end = start + pattern.len();
                if end > tokens.len() || !pattern.iter().zip(&tokens[start..end]).all(|(p, t)| *p == t.text) {
                    continue;
                }
                let category = self.entries[*entry_idx].category;
                let slot = best.entry(category).or_insert((end, *entry_idx));
                if end > slot.0 || (end == slot.0 && *entry_idx < slot.1) {
                    *slot = (end, *entry_idx);
                }
            }
            for (category, (end, entry_idx)) in best {
                if blocked_until.get(&category).is_some_and(|&b| start < b) {
                    continue;
                }
                blocked_until.insert(category, end);
                out.push(LexiconMatch {
                    entry: &self.entries[entry_idx],
                    tokens: start..end,
                    span: Span::new(tokens[start].span.start, tokens[end - 1].span.end),
                });
            }
        }
        out
    }
}
