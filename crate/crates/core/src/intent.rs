//! Direction-of-intent classification.
//!
//! An ordered rule cascade over sentences:
//!
//! 1. `SecondPerson`: a second-person pronoun outside quotation marks.
//! 2. `MentionAdjacency` / `ProperNounAdjacency`: an @-mention or a
//!    capitalized non-initial word within three tokens of an aggression
//!    finding in the same sentence.
//! 3. `DemonstrativeTarget`: an aggressive noun phrase preceded by a
//!    demonstrative or third-person determiner ("those", "they", "that", ...),
//!    unless its clause has a first-person subject.
//! 4. Otherwise 0: self-directed, ironic or global statements.
//!
//! Cues that were seen but did not fire (quoted pronouns, in-group
//! vocatives after "my", targets inside self-referential clauses) are kept
//! as suppressed evidence and yield an alternate reading of 1. A directed
//! unit that also has a self-referential aggressive sentence gets the
//! alternate 0.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::aggression::AggressionFinding;
use crate::lexicon::ItemCategory;
use crate::normalize::{Token, TokenKind};
use crate::types::{DiLabel, TextUnit};
use crate::Span;

const SECOND_PERSON: &[&str] = &[
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "u",
    "ur",
    "y'all",
    "yall",
    "ya'll",
    "you're",
    "youre",
    "you've",
    "you'll",
    "you'd",
    "thou",
    "thee",
];
const FIRST_PERSON_SUBJECT: &[&str] =
    &["i", "i'm", "im", "i've", "ive", "i'll", "i'd", "we", "we're", "we've", "we'll", "we'd"];
const FIRST_PERSON_POSSESSIVE: &[&str] = &["my", "our", "mine"];
const DEMONSTRATIVES: &[&str] =
    &["those", "these", "that", "this", "they", "their", "them", "his", "her", "dat", "dem", "tha"];
const CLAUSE_BREAKS: &[&str] = &[",", ";", ":", "—", "–", "but", "and"];
const ADJACENCY_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiRule {
    SecondPerson,
    MentionAdjacency,
    ProperNounAdjacency,
    DemonstrativeTarget,
    /// First-person subject in a clause that carries an aggression finding.
    SelfReference,
}

impl DiRule {
    /// The label this rule argues for when it fires.
    pub fn supports(self) -> DiLabel {
        match self {
            DiRule::SelfReference => DiLabel::NOT_DIRECTED,
            _ => DiLabel::DIRECTED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiEvidence {
    pub rule: DiRule,
    pub span: Span,
    /// The cue was present but a guard kept it from firing.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub suppressed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiResult {
    pub primary: DiLabel,
    pub alternates: BTreeSet<DiLabel>,
    pub evidence: Vec<DiEvidence>,
}

struct Cues<'a> {
    unit: &'a TextUnit,
    tokens: &'a [Token],
    quoted: Vec<bool>,
    /// Token ranges covered by findings that have a span.
    finding_ranges: Vec<(ItemCategory, Range<usize>)>,
}

/// Classifies DI given the unit and its aggression findings.
pub fn classify_di(unit: &TextUnit, findings: &[AggressionFinding]) -> DiResult {
    let tokens = unit.tokens();
    let cues = Cues {
        unit,
        tokens,
        quoted: quoted_mask(tokens),
        finding_ranges: findings
            .iter()
            .filter_map(|f| f.span.and_then(|s| token_range(tokens, s)).map(|r| (f.category, r)))
            .collect(),
    };

    let mut evidence = Vec::new();
    let mut directed_sentences = BTreeSet::new();
    let mut self_sentences = BTreeSet::new();

    for (s, sentence) in unit.sentences().into_iter().enumerate() {
        let before = evidence.len();
        cues.second_person(sentence.clone(), &mut evidence);
        cues.adjacency(sentence.clone(), &mut evidence);
        cues.demonstrative_targets(sentence.clone(), &mut evidence);
        cues.self_reference(sentence, &mut evidence);
        for e in &evidence[before..] {
            if e.suppressed {
                continue;
            }
            if e.rule.supports().is_directed() {
                directed_sentences.insert(s);
            } else {
                self_sentences.insert(s);
            }
        }
    }

    let primary = if directed_sentences.is_empty() { DiLabel::NOT_DIRECTED } else { DiLabel::DIRECTED };
    let mut alternates = BTreeSet::new();
    if primary.is_directed() {
        if self_sentences.iter().any(|s| !directed_sentences.contains(s)) {
            alternates.insert(DiLabel::NOT_DIRECTED);
        }
    } else if evidence.iter().any(|e| e.suppressed && e.rule.supports().is_directed()) {
        alternates.insert(DiLabel::DIRECTED);
    }
    DiResult { primary, alternates, evidence }
}

impl Cues<'_> {
    fn second_person(&self, sentence: Range<usize>, out: &mut Vec<DiEvidence>) {
        for i in sentence {
            let t = &self.tokens[i];
            if t.kind == TokenKind::Word && SECOND_PERSON.contains(&t.text.as_str()) {
                out.push(DiEvidence { rule: DiRule::SecondPerson, span: t.span, suppressed: self.quoted[i] });
            }
        }
    }

    fn adjacency(&self, sentence: Range<usize>, out: &mut Vec<DiEvidence>) {
        let first_word = sentence.clone().find(|&i| self.tokens[i].kind == TokenKind::Word);
        for i in sentence.clone() {
            let t = &self.tokens[i];
            let rule = match t.kind {
                TokenKind::Mention if !(i > 0 && self.tokens[i - 1].text == "rt") => DiRule::MentionAdjacency,
                TokenKind::Word if Some(i) != first_word && self.is_proper_noun(i) => DiRule::ProperNounAdjacency,
                _ => continue,
            };
            let near = self
                .finding_ranges
                .iter()
                .filter(|(_, r)| sentence.contains(&r.start) && !r.contains(&i) && distance(i, r) <= ADJACENCY_WINDOW);
            let mut fired = false;
            let mut vocative = false;
            for (_, r) in near {
                if self.after_first_person_possessive(r.start) {
                    vocative = true;
                } else {
                    fired = true;
                }
            }
            if fired || vocative {
                out.push(DiEvidence { rule, span: t.span, suppressed: !fired });
            }
        }
    }

    fn demonstrative_targets(&self, sentence: Range<usize>, out: &mut Vec<DiEvidence>) {
        for (category, r) in &self.finding_ranges {
            if *category != ItemCategory::AggressiveNounDetPhrase || !sentence.contains(&r.start) {
                continue;
            }
            let lookback = r.start.saturating_sub(2).max(sentence.start);
            let Some(det) = (lookback..r.start).rev().find(|&j| DEMONSTRATIVES.contains(&self.tokens[j].text.as_str()))
            else {
                continue;
            };
            let clause = self.clause_of(sentence.clone(), r.start);
            let self_referential = self.has_first_person_subject(clause);
            out.push(DiEvidence {
                rule: DiRule::DemonstrativeTarget,
                span: Span::cover(self.tokens[det].span, self.tokens[r.end - 1].span),
                suppressed: self_referential,
            });
        }
    }

    fn self_reference(&self, sentence: Range<usize>, out: &mut Vec<DiEvidence>) {
        let mut seen = BTreeSet::new();
        for (_, r) in &self.finding_ranges {
            if !sentence.contains(&r.start) {
                continue;
            }
            let clause = self.clause_of(sentence.clone(), r.start);
            if !seen.insert(clause.start) {
                continue;
            }
            if let Some(i) = clause.clone().find(|&i| FIRST_PERSON_SUBJECT.contains(&self.tokens[i].text.as_str())) {
                out.push(DiEvidence { rule: DiRule::SelfReference, span: self.tokens[i].span, suppressed: false });
            }
        }
    }

    fn is_proper_noun(&self, i: usize) -> bool {
        let t = &self.tokens[i];
        if FIRST_PERSON_SUBJECT.contains(&t.text.as_str()) || self.finding_ranges.iter().any(|(_, r)| r.contains(&i)) {
            return false;
        }
        let surface = self.unit.surface(t);
        let mut chars = surface.chars();
        chars.next().is_some_and(char::is_uppercase) && chars.any(char::is_lowercase)
    }

    fn after_first_person_possessive(&self, start: usize) -> bool {
        start > 0 && FIRST_PERSON_POSSESSIVE.contains(&self.tokens[start - 1].text.as_str())
    }

    fn clause_of(&self, sentence: Range<usize>, token: usize) -> Range<usize> {
        let is_break = |j: usize| CLAUSE_BREAKS.contains(&self.tokens[j].text.as_str());
        let start = (sentence.start..token).rev().find(|&j| is_break(j)).map_or(sentence.start, |j| j + 1);
        let end = (token + 1..sentence.end).find(|&j| is_break(j)).unwrap_or(sentence.end);
        start..end
    }

    fn has_first_person_subject(&self, clause: Range<usize>) -> bool {
        self.tokens[clause].iter().any(|t| FIRST_PERSON_SUBJECT.contains(&t.text.as_str()))
    }
}

fn distance(i: usize, r: &Range<usize>) -> usize {
    if i < r.start {
        r.start - i
    } else {
        i + 1 - r.end
    }
}

/// Token indices covered by a byte span.
fn token_range(tokens: &[Token], span: Span) -> Option<Range<usize>> {
    let start = tokens.iter().position(|t| t.span.start >= span.start && t.span.end <= span.end)?;
    let end = tokens[start..].iter().position(|t| t.span.end > span.end).map_or(tokens.len(), |n| start + n);
    Some(start..end)
}

/// Marks tokens inside quotation marks. `"` toggles; curly quotes open and close.
/// An unclosed quote runs to the end of the unit.
fn quoted_mask(tokens: &[Token]) -> Vec<bool> {
    let mut inside = false;
    tokens
        .iter()
        .map(|t| match t.text.as_str() {
            "\"" => {
                inside = !inside;
                false
            }
            "“" => {
                inside = true;
                false
            }
            "”" => {
                inside = false;
                false
            }
            _ => inside,
        })
        .collect()
}
