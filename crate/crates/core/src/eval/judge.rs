use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, JudgeMode, SuccessJudgment};
use crate::agent::{Proposal, Verdict};
use crate::dataset::{AmbiguityType, InstructionEntry};

const DEFAULT_TERM_TABLE: &str = include_str!("../../data/term_table.json");

/// Generic question terms per ambiguity type. Slot-derived terms (the
/// substituted words, the landmark, the object phrase) are added per entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermTable {
    pub numerical: Vec<String>,
    pub attribute_noun: Vec<String>,
    pub attribute_color: Vec<String>,
    pub spatial: Vec<String>,
}

impl Default for TermTable {
    fn default() -> Self {
        Self::from_json(DEFAULT_TERM_TABLE).expect("bundled term table is valid")
    }
}

impl TermTable {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let table: TermTable = serde_path_to_error::deserialize(de)
            .map_err(|e| EvalError::TermTable(format!("{}: {}", e.path(), e.inner())))?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), EvalError> {
        for kind in AmbiguityType::ALL {
            let terms = self.generic(kind);
            if terms.is_empty() {
                return Err(EvalError::TermTable(format!("{kind} has no terms")));
            }
            if let Some(t) = terms.iter().find(|t| t.trim().is_empty() || t.trim() != t.as_str()) {
                return Err(EvalError::TermTable(format!("{kind} term {t:?} is blank or padded")));
            }
        }
        Ok(())
    }

    pub fn generic(&self, kind: AmbiguityType) -> &[String] {
        match kind {
            AmbiguityType::Numerical => &self.numerical,
            AmbiguityType::AttributeNoun => &self.attribute_noun,
            AmbiguityType::AttributeColor => &self.attribute_color,
            AmbiguityType::Spatial => &self.spatial,
        }
    }

    /// Terms that make a question count as targeted, and terms that are only
    /// reported when present.
    fn terms_for(&self, entry: &InstructionEntry) -> (Vec<String>, Vec<String>) {
        let s = &entry.slots;
        let mut target: Vec<String> = self.generic(entry.ambiguity_type).to_vec();
        let object_phrases = vec![
            format!("{} {}", s.object_color, s.object_noun),
            format!("{} {}s", s.object_color, s.object_noun),
        ];
        let context = match entry.ambiguity_type {
            AmbiguityType::Numerical => {
                target.extend(s.quantity_vague.iter().cloned());
                target.push(s.quantity_precise.clone());
                let mut c = object_phrases;
                c.push(s.landmark_phrase());
                c
            }
            AmbiguityType::AttributeNoun => {
                target.extend(s.noun_substitute.iter().cloned());
                target.push(s.object_noun.clone());
                target.push(format!("{}s", s.object_noun));
                vec![s.landmark_phrase()]
            }
            AmbiguityType::AttributeColor => {
                target.extend(s.color_substitute.iter().cloned());
                target.push(s.object_color.clone());
                vec![s.landmark_phrase()]
            }
            AmbiguityType::Spatial => {
                target.extend(s.preposition_vague.iter().cloned());
                target.push(s.preposition_precise.clone());
                target.push(s.landmark_phrase());
                object_phrases
            }
        };
        (target, context)
    }

    pub fn judge(&self, proposal: Option<&Proposal>, entry: &InstructionEntry, mode: JudgeMode) -> SuccessJudgment {
        let question = match proposal.map(|p| &p.verdict) {
            Some(Verdict::ClarifyingQuestion(q)) => q,
            _ => {
                return SuccessJudgment {
                    success: false,
                    mode,
                    matched_slot_terms: Vec::new(),
                }
            }
        };
        let haystack = question.to_lowercase();
        let (target, context) = self.terms_for(entry);

        let mut hits: Vec<(usize, usize, &str)> = Vec::new();
        let mut targeted = false;
        for (term, is_target) in target
            .iter()
            .map(|t| (t, true))
            .chain(context.iter().map(|t| (t, false)))
        {
            let needle = term.to_lowercase();
            for start in occurrences(&haystack, &needle) {
                targeted |= is_target;
                hits.push((start, start + needle.len(), term));
            }
        }
        // earliest first, longest first among equal starts; drop hits nested
        // inside an accepted one
        hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut accepted: Vec<(usize, usize, &str)> = Vec::new();
        for hit in hits {
            if accepted.iter().any(|a| a.0 <= hit.0 && hit.1 <= a.1) {
                continue;
            }
            accepted.push(hit);
        }
        let mut matched: Vec<String> = Vec::new();
        for (_, _, term) in accepted {
            let term = term.to_lowercase();
            if !matched.contains(&term) {
                matched.push(term);
            }
        }
        let success = match mode {
            JudgeMode::Lenient => true,
            JudgeMode::Strict => targeted,
        };
        SuccessJudgment {
            success,
            mode,
            matched_slot_terms: matched,
        }
    }
}

/// Byte offsets where `needle` occurs in `haystack` on word boundaries.
fn occurrences(haystack: &str, needle: &str) -> Vec<usize> {
    if needle.is_empty() {
        return Vec::new();
    }
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric());
    haystack
        .match_indices(needle)
        .filter(|(start, _)| {
            let before = haystack[..*start].chars().next_back();
            let after = haystack[start + needle.len()..].chars().next();
            !is_word(before) && !is_word(after)
        })
        .map(|(start, _)| start)
        .collect()
}

/// Judges with the bundled term table.
pub fn judge_success(proposal: Option<&Proposal>, entry: &InstructionEntry, mode: JudgeMode) -> SuccessJudgment {
    TermTable::default().judge(proposal, entry, mode)
}
