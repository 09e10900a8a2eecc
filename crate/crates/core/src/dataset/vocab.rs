use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

const DEFAULT_VOCABULARY: &str = include_str!("../../data/vocabulary.json");

/// Word lists the generator draws from. Loaded from JSON; the shipped
/// default lives in `data/vocabulary.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub actions: Vec<String>,
    pub colors: Vec<String>,
    /// Singular noun of the manipulated objects ("block").
    pub object_noun: String,
    pub object_noun_plural: String,
    /// Noun of the container objects ("bowl"), usable as landmarks.
    pub container_noun: String,
    pub vague_quantities: Vec<String>,
    pub precise_quantities: Vec<String>,
    pub general_nouns: Vec<String>,
    pub color_synonyms: BTreeMap<String, Vec<String>>,
    pub precise_prepositions: Vec<String>,
    pub vague_prepositions: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_VOCABULARY).expect("bundled vocabulary is valid JSON")
    }
}

impl Vocabulary {
    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let vocab: Vocabulary = serde_path_to_error::deserialize(de).map_err(|e| DatasetError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let lists: [(&str, &Vec<String>); 7] = [
            ("actions", &self.actions),
            ("colors", &self.colors),
            ("vague_quantities", &self.vague_quantities),
            ("precise_quantities", &self.precise_quantities),
            ("general_nouns", &self.general_nouns),
            ("precise_prepositions", &self.precise_prepositions),
            ("vague_prepositions", &self.vague_prepositions),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(DatasetError::InvalidVocabulary(format!("{name} is empty")));
            }
            if list.iter().any(|w| w.trim().is_empty() || w.trim() != w) {
                return Err(DatasetError::InvalidVocabulary(format!(
                    "{name} contains a blank or untrimmed term"
                )));
            }
        }
        for noun in [&self.object_noun, &self.object_noun_plural, &self.container_noun] {
            if noun.trim().is_empty() {
                return Err(DatasetError::InvalidVocabulary("object nouns must be non-empty".into()));
            }
        }
        for color in &self.colors {
            match self.color_synonyms.get(color) {
                Some(syns) if !syns.is_empty() => {}
                _ => {
                    return Err(DatasetError::InvalidVocabulary(format!(
                        "color_synonyms has no entry for {color}"
                    )))
                }
            }
        }
        for q in &self.precise_quantities {
            if quantity_value(q, 3).is_none() {
                return Err(DatasetError::InvalidVocabulary(format!(
                    "unrecognised precise quantity {q:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Resolves a precise quantity term against the number of available objects.
/// Returns `None` for terms that are not precise quantities.
pub fn quantity_value(term: &str, available: u32) -> Option<u32> {
    let n = match term.to_ascii_lowercase().as_str() {
        "all" | "all of the" | "every" => return Some(available),
        "a" | "an" | "a single" | "one" | "single" => 1,
        "two" | "a pair of" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        _ => return None,
    };
    Some(n)
}
