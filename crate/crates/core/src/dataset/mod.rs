//! Paired ambiguous/unambiguous instruction datasets.
//!
//! Every entry is built from a fixed tabletop scenario by filling a sentence
//! template from a [`Vocabulary`], then substituting exactly one slot
//! (a quantity, the object noun, the object color, or the spatial
//! preposition) with an imprecise term. The character spans of the
//! substitution are recorded at construction time.

mod generate;
mod io;
mod vocab;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_dataset, AttributeSub, DatasetCounts, Generator, RETRY_BUDGET};
pub use io::{dataset_from_json, dataset_to_json, read_dataset, write_dataset};
pub use vocab::{quantity_value, Vocabulary};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("invalid scenario context: {0}")]
    InvalidContext(String),
    #[error("vocabulary exhausted for {kind}: produced {produced} distinct instructions, {requested} requested")]
    VocabularyExhausted {
        kind: AmbiguityType,
        produced: usize,
        requested: usize,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

/// The fixed environment every instruction refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioContext {
    pub description: String,
    pub block_inventory: BTreeMap<String, u32>,
    pub bowl_inventory: BTreeMap<String, u32>,
}

impl ScenarioContext {
    pub fn new(block_inventory: BTreeMap<String, u32>, bowl_inventory: BTreeMap<String, u32>) -> Self {
        let description = describe(&block_inventory, &bowl_inventory);
        Self {
            description,
            block_inventory,
            bowl_inventory,
        }
    }

    /// Three blocks and one bowl of each of red, yellow and green.
    pub fn tabletop() -> Self {
        let colors = ["red", "yellow", "green"];
        let blocks = colors.iter().map(|c| (c.to_string(), 3)).collect();
        let bowls = colors.iter().map(|c| (c.to_string(), 1)).collect();
        Self::new(blocks, bowls)
    }

    pub fn blocks_of(&self, color: &str) -> u32 {
        self.block_inventory.get(color).copied().unwrap_or(0)
    }

    pub fn bowls_of(&self, color: &str) -> u32 {
        self.bowl_inventory.get(color).copied().unwrap_or(0)
    }
}

impl Default for ScenarioContext {
    fn default() -> Self {
        Self::tabletop()
    }
}

pub(crate) fn number_word(n: u32) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS
        .get(n as usize)
        .map(|w| w.to_string())
        .unwrap_or_else(|| n.to_string())
}

fn inventory_phrases(inventory: &BTreeMap<String, u32>, noun: &str) -> Vec<String> {
    inventory
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(color, &n)| {
            let noun = if n == 1 { noun.to_string() } else { format!("{noun}s") };
            format!("{} {} {}", number_word(n), color, noun)
        })
        .collect()
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {}", rest.join(", "), last),
    }
}

fn describe(blocks: &BTreeMap<String, u32>, bowls: &BTreeMap<String, u32>) -> String {
    let blocks = inventory_phrases(blocks, "block");
    let bowls = inventory_phrases(bowls, "bowl");
    match (blocks.is_empty(), bowls.is_empty()) {
        (true, true) => "There is an empty table.".to_string(),
        (false, true) => format!("On the table there are {}.", join_list(&blocks)),
        (true, false) => format!("On the table there are {}.", join_list(&bowls)),
        (false, false) => format!(
            "On the table there are {}. There are also {}.",
            join_list(&blocks),
            join_list(&bowls)
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguityType {
    Numerical,
    AttributeNoun,
    AttributeColor,
    Spatial,
}

impl AmbiguityType {
    pub const ALL: [AmbiguityType; 4] = [
        AmbiguityType::Numerical,
        AmbiguityType::AttributeNoun,
        AmbiguityType::AttributeColor,
        AmbiguityType::Spatial,
    ];

    pub fn category(self) -> Category {
        match self {
            AmbiguityType::Numerical => Category::Numerical,
            AmbiguityType::AttributeNoun | AmbiguityType::AttributeColor => Category::Attribute,
            AmbiguityType::Spatial => Category::Spatial,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AmbiguityType::Numerical => "numerical",
            AmbiguityType::AttributeNoun => "attribute_noun",
            AmbiguityType::AttributeColor => "attribute_color",
            AmbiguityType::Spatial => "spatial",
        }
    }
}

impl fmt::Display for AmbiguityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reporting granularity: the two attribute variants collapse into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Numerical,
    Attribute,
    Spatial,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Numerical, Category::Attribute, Category::Spatial];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Numerical => "numerical",
            Category::Attribute => "attribute",
            Category::Spatial => "spatial",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open byte range into an instruction string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        if self.start > self.end {
            return None;
        }
        text.get(self.start..self.end)
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub action: String,
    pub object_noun: String,
    pub object_color: String,
    pub quantity_precise: String,
    /// `quantity_precise` resolved against the block inventory.
    pub quantity_count: u32,
    pub quantity_vague: Option<String>,
    pub noun_substitute: Option<String>,
    pub color_substitute: Option<String>,
    pub preposition_precise: String,
    pub preposition_vague: Option<String>,
    pub landmark_noun: String,
    pub landmark_color: String,
    pub ambiguous_span: Span,
    pub unambiguous_span: Span,
}

impl SlotRecord {
    /// The (substituted, original) terms of the active slot for `kind`.
    pub fn substitution(&self, kind: AmbiguityType) -> Option<(&str, &str)> {
        let (vague, precise) = match kind {
            AmbiguityType::Numerical => (&self.quantity_vague, &self.quantity_precise),
            AmbiguityType::AttributeNoun => (&self.noun_substitute, &self.object_noun),
            AmbiguityType::AttributeColor => (&self.color_substitute, &self.object_color),
            AmbiguityType::Spatial => (&self.preposition_vague, &self.preposition_precise),
        };
        vague.as_deref().map(|v| (v, precise.as_str()))
    }

    fn active_count(&self) -> usize {
        [
            &self.quantity_vague,
            &self.noun_substitute,
            &self.color_substitute,
            &self.preposition_vague,
        ]
        .iter()
        .filter(|s| s.is_some())
        .count()
    }

    /// Noun phrase for the manipulated object as it appears in the unambiguous text.
    pub fn object_phrase(&self) -> String {
        if self.quantity_count == 1 {
            format!("{} {}", self.object_color, self.object_noun)
        } else {
            format!("{} {}s", self.object_color, self.object_noun)
        }
    }

    pub fn landmark_phrase(&self) -> String {
        format!("{} {}", self.landmark_color, self.landmark_noun)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionEntry {
    pub id: String,
    pub context: ScenarioContext,
    #[serde(rename = "ambiguous_instruction")]
    pub ambiguous: String,
    #[serde(rename = "unambiguous_instruction")]
    pub unambiguous: String,
    pub ambiguity_type: AmbiguityType,
    pub slots: SlotRecord,
}

impl InstructionEntry {
    /// Checks the structural invariants of an entry. On failure returns the
    /// offending field path (relative to the entry) and a message.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let fail = |path: &str, msg: String| Err((path.to_string(), msg));
        if self.id.trim().is_empty() {
            return fail("id", "empty id".into());
        }
        if self.ambiguous == self.unambiguous {
            return fail(
                "ambiguous_instruction",
                "identical to the unambiguous instruction".into(),
            );
        }
        if self.slots.active_count() != 1 {
            return fail(
                "slots",
                format!(
                    "expected exactly one substituted slot, found {}",
                    self.slots.active_count()
                ),
            );
        }
        let Some((vague, precise)) = self.slots.substitution(self.ambiguity_type) else {
            return fail("slots", format!("no substitution recorded for {}", self.ambiguity_type));
        };
        let a = self.slots.ambiguous_span;
        let u = self.slots.unambiguous_span;
        let Some(a_text) = a.slice(&self.ambiguous) else {
            return fail(
                "slots.ambiguous_span",
                format!(
                    "span {}..{} invalid for text of length {}",
                    a.start,
                    a.end,
                    self.ambiguous.len()
                ),
            );
        };
        let Some(u_text) = u.slice(&self.unambiguous) else {
            return fail(
                "slots.unambiguous_span",
                format!(
                    "span {}..{} invalid for text of length {}",
                    u.start,
                    u.end,
                    self.unambiguous.len()
                ),
            );
        };
        if a_text != vague {
            return fail(
                "slots.ambiguous_span",
                format!("span covers {a_text:?}, expected substituted term {vague:?}"),
            );
        }
        if u_text != precise {
            return fail(
                "slots.unambiguous_span",
                format!("span covers {u_text:?}, expected original term {precise:?}"),
            );
        }
        if self.ambiguous[..a.start] != self.unambiguous[..u.start]
            || self.ambiguous[a.end..] != self.unambiguous[u.end..]
        {
            return fail("slots", "instructions differ outside the recorded spans".into());
        }
        if self.slots.landmark_noun == self.slots.object_noun && self.slots.landmark_color == self.slots.object_color {
            return fail("slots.landmark_color", "landmark is the manipulated object".into());
        }
        Ok(())
    }
}
