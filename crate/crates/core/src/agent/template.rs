use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {template}: unknown placeholder {{{name}}}")]
    UnknownPlaceholder { template: String, name: String },
    #[error("template {template}: missing required placeholder {{{name}}}")]
    MissingPlaceholder { template: String, name: String },
    #[error("template {template}: unterminated placeholder")]
    Unterminated { template: String },
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

/// A text template with `{name}` placeholders. `{{` and `}}` are literal braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Template {
    pieces: Vec<Piece>,
}

impl Template {
    fn parse(name: &str, text: &str, allowed: &[&str], required: &[&str]) -> Result<Self, TemplateError> {
        let mut pieces = Vec::new();
        let mut literal = String::new();
        let mut chars = text.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    literal.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    literal.push('}');
                }
                '{' => {
                    let mut slot = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) if ch.is_ascii_alphanumeric() || ch == '_' => slot.push(ch),
                            _ => {
                                return Err(TemplateError::Unterminated {
                                    template: name.to_string(),
                                })
                            }
                        }
                    }
                    if !allowed.contains(&slot.as_str()) {
                        return Err(TemplateError::UnknownPlaceholder {
                            template: name.to_string(),
                            name: slot,
                        });
                    }
                    if !literal.is_empty() {
                        pieces.push(Piece::Text(std::mem::take(&mut literal)));
                    }
                    pieces.push(Piece::Slot(slot));
                }
                other => literal.push(other),
            }
        }
        if !literal.is_empty() {
            pieces.push(Piece::Text(literal));
        }
        for req in required {
            if !pieces.iter().any(|p| matches!(p, Piece::Slot(s) if s == req)) {
                return Err(TemplateError::MissingPlaceholder {
                    template: name.to_string(),
                    name: req.to_string(),
                });
            }
        }
        Ok(Self { pieces })
    }

    pub(crate) fn render(&self, values: &BTreeMap<&str, String>) -> String {
        let mut out = String::new();
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => out.push_str(values.get(s.as_str()).map(String::as_str).unwrap_or_default()),
            }
        }
        out.trim_end().to_string()
    }
}

const PLACEHOLDERS: &[&str] = &[
    "context",
    "instruction",
    "proposal",
    "feedback",
    "sentence_limit",
    "round",
];

struct Spec {
    file: &'static str,
    bundled: &'static str,
    required: &'static [&'static str],
}

const SPECS: [Spec; 5] = [
    Spec {
        file: "system_proposer.txt",
        bundled: include_str!("../../data/templates/system_proposer.txt"),
        required: &[],
    },
    Spec {
        file: "system_follower.txt",
        bundled: include_str!("../../data/templates/system_follower.txt"),
        required: &[],
    },
    Spec {
        file: "proposal.txt",
        bundled: include_str!("../../data/templates/proposal.txt"),
        required: &["context", "instruction"],
    },
    Spec {
        file: "revision.txt",
        bundled: include_str!("../../data/templates/revision.txt"),
        required: &["context", "instruction", "feedback"],
    },
    Spec {
        file: "follower.txt",
        bundled: include_str!("../../data/templates/follower.txt"),
        required: &["context", "instruction", "proposal"],
    },
];

/// The five prompt templates. Bundled defaults can be overridden per file
/// from a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub(crate) system_proposer: Template,
    pub(crate) system_follower: Template,
    pub(crate) proposal: Template,
    pub(crate) revision: Template,
    pub(crate) follower: Template,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::build(|spec| Ok(spec.bundled.to_string())).expect("bundled templates are valid")
    }
}

impl TemplateSet {
    /// Loads templates from `dir`; files that are absent fall back to the
    /// bundled versions.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        Self::build(|spec| {
            let path = dir.join(spec.file);
            match std::fs::read_to_string(&path) {
                Ok(text) => Ok(text),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(spec.bundled.to_string()),
                Err(source) => Err(TemplateError::Io {
                    path: path.display().to_string(),
                    source,
                }),
            }
        })
    }

    fn build(mut load: impl FnMut(&Spec) -> Result<String, TemplateError>) -> Result<Self, TemplateError> {
        let mut parsed = Vec::with_capacity(SPECS.len());
        for spec in &SPECS {
            let text = load(spec)?;
            parsed.push(Template::parse(spec.file, &text, PLACEHOLDERS, spec.required)?);
        }
        let mut it = parsed.into_iter();
        let mut next = || it.next().expect("one template per spec");
        Ok(Self {
            system_proposer: next(),
            system_follower: next(),
            proposal: next(),
            revision: next(),
            follower: next(),
        })
    }
}
