use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use prescribe_core::lexicon::{ItemKind, REFERENCE_EXEMPLARS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Descriptive,
    PrescriptiveDi,
    /// Always issued right before [`PromptKind::PrescriptiveAgScoring`] for the same unit.
    PrescriptiveAgUsage,
    PrescriptiveAgScoring,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] = [
        PromptKind::Descriptive,
        PromptKind::PrescriptiveDi,
        PromptKind::PrescriptiveAgUsage,
        PromptKind::PrescriptiveAgScoring,
    ];

    /// Table name in the template file.
    pub fn key(self) -> &'static str {
        match self {
            PromptKind::Descriptive => "descriptive",
            PromptKind::PrescriptiveDi => "prescriptive_di",
            PromptKind::PrescriptiveAgUsage => "prescriptive_ag_usage",
            PromptKind::PrescriptiveAgScoring => "prescriptive_ag_scoring",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub text: String,
    /// Value for the `{items}` slot when the template has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<String>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system: String,
    pub user: String,
    #[serde(default)]
    pub few_shots: Vec<FewShot>,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read templates {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid template file {path}: {reason}")]
    Syntax { path: PathBuf, reason: String },
    #[error("template `{kind}`: {reason}")]
    Invalid { kind: PromptKind, reason: String },
    #[error("no template for `{0}`")]
    Missing(PromptKind),
}

impl PromptTemplate {
    /// Fills the user template. `{text}` is replaced exactly once; slots
    /// that appear inside the substituted values are left alone.
    pub fn render_user(&self, text: &str, items: Option<&str>) -> String {
        let (before, after) = self.user.split_once("{text}").expect("validated: one {text} slot");
        let fill = |part: &str| match items {
            Some(items) => part.replace("{items}", items),
            None => part.to_owned(),
        };
        let mut out = fill(before);
        out.push_str(text);
        out.push_str(&fill(after));
        out
    }

    fn validate(&self, kind: PromptKind) -> Result<(), TemplateError> {
        let invalid = |reason: String| TemplateError::Invalid { kind, reason };
        let slots = self.user.matches("{text}").count();
        if slots != 1 {
            return Err(invalid(format!("user template must contain exactly one {{text}} slot, found {slots}")));
        }
        let item_slots = self.user.matches("{items}").count();
        match kind {
            PromptKind::PrescriptiveAgScoring if item_slots > 1 => {
                return Err(invalid("at most one {items} slot is allowed".into()))
            }
            PromptKind::PrescriptiveAgScoring => {}
            _ if item_slots > 0 => return Err(invalid("only the scoring template takes {items}".into())),
            _ => {}
        }
        match kind {
            PromptKind::Descriptive if !self.few_shots.is_empty() => {
                return Err(invalid("descriptive prompts take no few-shot examples".into()))
            }
            PromptKind::PrescriptiveAgUsage => {
                let mut kinds = Vec::new();
                for shot in &self.few_shots {
                    let exemplar = REFERENCE_EXEMPLARS
                        .iter()
                        .find(|(c, t)| t.eq_ignore_ascii_case(shot.text.trim()) && c.kind() != ItemKind::FalseConstruct)
                        .ok_or_else(|| {
                            invalid(format!("few-shot `{}` is not an AI or AC reference exemplar", shot.text))
                        })?;
                    kinds.push(exemplar.0.kind());
                }
                if !kinds.contains(&ItemKind::Ai) || !kinds.contains(&ItemKind::Ac) {
                    return Err(invalid("few-shots need at least one AI and one AC exemplar".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Content hash over every field.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("template serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Validated templates keyed by prompt kind. Kinds may be absent; building
/// a prompt for an absent kind is an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<PromptKind, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::parse(DEFAULT_TEMPLATES, Path::new("<default>")).expect("default templates are valid")
    }
}

impl TemplateSet {
    pub fn default_toml() -> &'static str {
        DEFAULT_TEMPLATES
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| TemplateError::Io { path: path.to_owned(), source })?;
        TemplateSet::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, TemplateError> {
        let mut raw: BTreeMap<String, PromptTemplate> = toml::from_str(text)
            .map_err(|e| TemplateError::Syntax { path: origin.to_owned(), reason: e.to_string() })?;
        let mut templates = BTreeMap::new();
        for kind in PromptKind::ALL {
            if let Some(t) = raw.remove(kind.key()) {
                t.validate(kind)?;
                templates.insert(kind, t);
            }
        }
        if let Some(unknown) = raw.keys().next() {
            return Err(TemplateError::Syntax {
                path: origin.to_owned(),
                reason: format!("unknown template table `{unknown}`"),
            });
        }
        Ok(TemplateSet { templates })
    }

    pub fn from_templates(
        templates: impl IntoIterator<Item = (PromptKind, PromptTemplate)>,
    ) -> Result<Self, TemplateError> {
        let mut map = BTreeMap::new();
        for (kind, t) in templates {
            t.validate(kind)?;
            map.insert(kind, t);
        }
        Ok(TemplateSet { templates: map })
    }

    pub fn get(&self, kind: PromptKind) -> Result<&PromptTemplate, TemplateError> {
        self.templates.get(&kind).ok_or(TemplateError::Missing(kind))
    }

    /// Hash over all templates, used in annotator ids.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (kind, t) in &self.templates {
            h.update(kind.key());
            h.update(t.hash());
        }
        hex::encode(h.finalize())
    }
}
