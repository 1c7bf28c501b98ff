//! Aggression detection and relative aggression scoring.
//!
//! Scoring rules:
//!
//! * aggressive items (AI) are worth 1 point, catalyzers (AC) 0.5;
//! * each category counts once, however many items of it occur;
//! * with no aggressive base (an AI, or a false construct promoted by a
//!   co-occurring catalyzer) the score is 0;
//! * a false construct next to any catalyzer is a 0.5 aggressive base,
//!   otherwise it is kept for audit but contributes nothing;
//! * level 0 at score 0, level 1 for scores up to and including 1, level 2 above.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::lexicon::{ItemCategory, ItemKind, Lexicon, LexiconMatch};
use crate::normalize::{Token, TokenKind};
use crate::types::{AgLevel, AggressionScore, TextUnit};
use crate::Span;

/// Scoring role of a finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FindingRole {
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "AC")]
    Ac,
    #[serde(rename = "FalseConstructAsAI")]
    FalseConstructAsAi,
    /// A false construct with no catalyzer beside it.
    #[serde(rename = "InertFalseConstruct")]
    InertFalseConstruct,
}

impl FindingRole {
    /// Nominal weight. An inert false construct keeps its nominal 0.5 but is never counted.
    pub fn weight(self) -> AggressionScore {
        match self {
            FindingRole::Ai => AggressionScore::ONE,
            _ => AggressionScore::HALF,
        }
    }

    pub fn is_base(self) -> bool {
        matches!(self, FindingRole::Ai | FindingRole::FalseConstructAsAi)
    }

    pub fn counts(self) -> bool {
        self != FindingRole::InertFalseConstruct
    }
}

/// Where a finding came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingSource {
    Lexicon,
    Rule,
    /// Externally supplied discourse tag or annotator selection.
    Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggressionFinding {
    pub category: ItemCategory,
    /// `None` marks a whole-unit (discourse-level) finding.
    pub span: Option<Span>,
    pub role: FindingRole,
    #[serde(default = "default_source")]
    pub source: FindingSource,
    /// Matched lexicon pattern or rule name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue: Option<String>,
}

fn default_source() -> FindingSource {
    FindingSource::Tag
}

impl AggressionFinding {
    /// A finding with the role its category implies in isolation.
    ///
    /// False constructs start inert; [`resolve_roles`] promotes them.
    pub fn new(category: ItemCategory, span: Option<Span>, source: FindingSource) -> Self {
        let role = match category.kind() {
            ItemKind::Ai => FindingRole::Ai,
            ItemKind::Ac => FindingRole::Ac,
            ItemKind::FalseConstruct => FindingRole::InertFalseConstruct,
        };
        AggressionFinding { category, span, role, source, cue: None }
    }

    pub fn with_cue(mut self, cue: impl Into<String>) -> Self {
        self.cue = Some(cue.into());
        self
    }

    pub fn weight(&self) -> AggressionScore {
        self.role.weight()
    }
}

/// Re-derives every role from the categories present.
///
/// Roles supplied by callers are never trusted: AI and AC come from the
/// category, and false constructs are promoted iff any catalyzer is present.
pub fn resolve_roles(findings: &mut [AggressionFinding]) {
    let has_catalyzer = findings.iter().any(|f| f.category.kind() == ItemKind::Ac);
    for f in findings.iter_mut() {
        f.role = match f.category.kind() {
            ItemKind::Ai => FindingRole::Ai,
            ItemKind::Ac => FindingRole::Ac,
            ItemKind::FalseConstruct if has_catalyzer => FindingRole::FalseConstructAsAi,
            ItemKind::FalseConstruct => FindingRole::InertFalseConstruct,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggressionResult {
    pub findings: Vec<AggressionFinding>,
    pub counted_categories: BTreeSet<ItemCategory>,
    pub score: AggressionScore,
    pub level: AgLevel,
}

const NEGATIONS: &[&str] = &["not", "no", "never", "nobody", "nothing", "none", "nor", "cannot"];
const UNIVERSALS: &[&str] = &["everyone", "everybody", "anyone", "anybody", "nobody", "all", "always", "everything"];
const IMPERATIVE_LEADERS: &[&str] = &["please", "just", "now", "so", "pls", "plz"];

/// Finds aggressive items and catalyzers in a unit.
///
/// Lexical categories, strong expressions, irony, false constructs and
/// controversial content come straight from lexicon hits. Imperative cues
/// count only as the first word of a sentence (after an optional "please",
/// "just", ...). Rhetorical-question cues count only in a sentence ending
/// in `?`; such a sentence also counts when it contains a negation or a
/// universal quantifier. Discourse tags attached to the unit are added as
/// findings unchanged.
pub fn detect(unit: &TextUnit, lexicon: &Lexicon) -> Vec<AggressionFinding> {
    let tokens = unit.tokens();
    let sentences = unit.sentences();
    let mut findings = Vec::new();
    let mut question_hits: BTreeSet<usize> = BTreeSet::new();

    for m in lexicon.find_matches(unit) {
        let category = m.entry.category;
        match category {
            ItemCategory::Imperative => {
                let Some(s) = sentence_of(&sentences, m.tokens.start) else { continue };
                if !is_sentence_initial(tokens, sentences[s].clone(), m.tokens.start) {
                    continue;
                }
            }
            ItemCategory::RhetoricalQuestion => {
                let Some(s) = sentence_of(&sentences, m.tokens.start) else { continue };
                if !ends_in_question(tokens, sentences[s].clone()) {
                    continue;
                }
                question_hits.insert(s);
            }
            _ => {}
        }
        findings.push(lexicon_finding(&m));
    }

    for (s, range) in sentences.iter().enumerate() {
        if question_hits.contains(&s) || !ends_in_question(tokens, range.clone()) {
            continue;
        }
        let cue = tokens[range.clone()].iter().find_map(|t| {
            let text = t.text.as_str();
            if NEGATIONS.contains(&text) || text.ends_with("n't") {
                Some("negated-question")
            } else if UNIVERSALS.contains(&text) {
                Some("universal-question")
            } else {
                None
            }
        });
        if let Some(cue) = cue {
            let span = Span::new(tokens[range.start].span.start, tokens[range.end - 1].span.end);
            findings.push(
                AggressionFinding::new(ItemCategory::RhetoricalQuestion, Some(span), FindingSource::Rule).with_cue(cue),
            );
        }
    }

    for tag in unit.discourse_tags() {
        findings.push(AggressionFinding::new(tag.category, tag.span, FindingSource::Tag));
    }

    findings.sort_by_key(|f| (f.span.map_or(usize::MAX, |s| s.start), f.category));
    resolve_roles(&mut findings);
    findings
}

fn lexicon_finding(m: &LexiconMatch<'_>) -> AggressionFinding {
    AggressionFinding::new(m.entry.category, Some(m.span), FindingSource::Lexicon).with_cue(m.entry.pattern.clone())
}

fn sentence_of(sentences: &[Range<usize>], token: usize) -> Option<usize> {
    sentences.iter().position(|r| r.contains(&token))
}

fn ends_in_question(tokens: &[Token], sentence: Range<usize>) -> bool {
    tokens[sentence].iter().rev().take_while(|t| t.kind == TokenKind::Punct).any(|t| t.text == "?")
}

/// True when only punctuation, quotes or softening leaders precede `token` in its sentence.
fn is_sentence_initial(tokens: &[Token], sentence: Range<usize>, token: usize) -> bool {
    tokens[sentence.start..token].iter().all(|t| match t.kind {
        TokenKind::Punct | TokenKind::Emoji | TokenKind::Mention => true,
        TokenKind::Word => IMPERATIVE_LEADERS.contains(&t.text.as_str()),
        _ => false,
    })
}

/// Scores findings under the uniqueness, override and special-case rules.
pub fn score(findings: &[AggressionFinding]) -> AggressionResult {
    let mut findings = findings.to_vec();
    resolve_roles(&mut findings);
    let has_base = findings.iter().any(|f| f.role.is_base());
    let counted_categories: BTreeSet<ItemCategory> = if has_base {
        findings.iter().filter(|f| f.role.counts()).map(|f| f.category).collect()
    } else {
        BTreeSet::new()
    };
    let score: AggressionScore = counted_categories
        .iter()
        .map(|c| findings.iter().find(|f| f.category == *c).expect("category present").weight())
        .sum();
    AggressionResult { findings, counted_categories, score, level: AgLevel::from_score(score) }
}

pub fn analyze(unit: &TextUnit, lexicon: &Lexicon) -> AggressionResult {
    score(&detect(unit, lexicon))
}
