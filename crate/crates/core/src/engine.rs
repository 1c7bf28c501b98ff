use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::aggression::{self, AggressionResult};
use crate::intent::{classify_di, DiResult};
use crate::lexicon::Lexicon;
use crate::types::{verdict, AnnotationRecord, AnnotatorId, TextUnit};

/// Full rule-engine judgement of one unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub unit_id: String,
    pub aggression: AggressionResult,
    pub di: DiResult,
    pub toxic: bool,
}

/// Rule engine bound to a lexicon.
#[derive(Debug, Clone)]
pub struct Engine {
    lexicon: Arc<Lexicon>,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(Arc::new(Lexicon::seed()))
    }
}

impl Engine {
    pub fn new(lexicon: Arc<Lexicon>) -> Self {
        Engine { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Provenance tag for records this engine produces.
    pub fn annotator_id(&self) -> AnnotatorId {
        AnnotatorId::new(format!("engine@{}", &self.lexicon.version()[..12]))
    }

    pub fn analyze(&self, unit: &TextUnit) -> Analysis {
        let aggression = aggression::analyze(unit, &self.lexicon);
        let di = classify_di(unit, &aggression.findings);
        let toxic = verdict(di.primary, aggression.level);
        Analysis { unit_id: unit.id().to_owned(), aggression, di, toxic }
    }

    pub fn annotate(&self, unit: &TextUnit, created_at: DateTime<Utc>) -> AnnotationRecord {
        let analysis = self.analyze(unit);
        AnnotationRecord::prescriptive(
            unit.id(),
            self.annotator_id(),
            analysis.di.primary,
            analysis.di.alternates,
            analysis.aggression.score,
            analysis.aggression.findings,
            created_at,
        )
        .expect("classifier alternates exclude the primary label")
    }
}
