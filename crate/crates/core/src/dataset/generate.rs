use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{quantity_value, Vocabulary};
use super::{AmbiguityType, DatasetError, InstructionEntry, ScenarioContext, SlotRecord, Span};

/// Rejection-sampling attempts allowed per entry before giving up.
pub const RETRY_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeSub {
    Noun,
    Color,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub numerical: usize,
    pub attribute: usize,
    pub spatial: usize,
}

impl DatasetCounts {
    pub fn per_type(n: usize) -> Self {
        Self {
            numerical: n,
            attribute: n,
            spatial: n,
        }
    }

    pub fn total(&self) -> usize {
        self.numerical + self.attribute + self.spatial
    }
}

// Template slot positions: action quantity color noun preposition "the" landmark-color landmark-noun
const QUANTITY: usize = 1;
const COLOR: usize = 2;
const NOUN: usize = 3;
const PREPOSITION: usize = 4;

struct Draft {
    action: String,
    quantity: String,
    count: u32,
    color: String,
    preposition: String,
    landmark_noun: String,
    landmark_color: String,
}

/// Seeded instruction generator. All randomness comes from a ChaCha8 stream
/// seeded with the caller's 64-bit seed, so output is platform independent.
pub struct Generator<'a> {
    rng: ChaCha8Rng,
    vocab: &'a Vocabulary,
    context: &'a ScenarioContext,
    seen: HashSet<String>,
    next_id: usize,
}

impl<'a> Generator<'a> {
    pub fn new(seed: u64, vocab: &'a Vocabulary, context: &'a ScenarioContext) -> Result<Self, DatasetError> {
        vocab.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vocab,
            context,
            seen: HashSet::new(),
            next_id: 1,
        })
    }

    pub fn numerical(&mut self) -> Result<InstructionEntry, DatasetError> {
        if !self.vocab.colors.iter().any(|c| self.context.blocks_of(c) >= 2) {
            return Err(DatasetError::InvalidContext(
                "numerical ambiguity needs a block color with at least two blocks".into(),
            ));
        }
        self.unique(AmbiguityType::Numerical, |g| {
            let colors: Vec<&String> = g.vocab.colors.iter().filter(|c| g.context.blocks_of(c) >= 2).collect();
            let color = colors[g.rng.random_range(0..colors.len())].clone();
            let available = g.context.blocks_of(&color);
            let quantities: Vec<(&String, u32)> = g
                .vocab
                .precise_quantities
                .iter()
                .filter_map(|q| quantity_value(q, available).map(|n| (q, n)))
                .filter(|&(_, n)| n >= 2 && n <= available)
                .collect();
            if quantities.is_empty() {
                return None;
            }
            let (quantity, count) = quantities[g.rng.random_range(0..quantities.len())];
            let quantity = quantity.clone();
            let vague = pick(&mut g.rng, &g.vocab.vague_quantities);
            let draft = g.draft(quantity, count, color)?;
            g.build(draft, AmbiguityType::Numerical, QUANTITY, vague)
        })
    }

    pub fn attribute(&mut self, sub: AttributeSub) -> Result<InstructionEntry, DatasetError> {
        let Some(single) = self
            .vocab
            .precise_quantities
            .iter()
            .find(|q| quantity_value(q, 1) == Some(1) && q.as_str() != "all")
            .cloned()
        else {
            return Err(DatasetError::InvalidVocabulary(
                "attribute ambiguity needs a singular precise quantity".into(),
            ));
        };
        let kind = match sub {
            AttributeSub::Noun => AmbiguityType::AttributeNoun,
            AttributeSub::Color => AmbiguityType::AttributeColor,
        };
        self.unique(kind, |g| {
            let color = g.pick_block_color(1)?;
            let draft = g.draft(single.clone(), 1, color.clone())?;
            match sub {
                AttributeSub::Noun => {
                    let noun = pick(&mut g.rng, &g.vocab.general_nouns);
                    g.build(draft, kind, NOUN, noun)
                }
                AttributeSub::Color => {
                    let synonym = pick(&mut g.rng, g.vocab.color_synonyms.get(&color)?);
                    g.build(draft, kind, COLOR, synonym)
                }
            }
        })
    }

    pub fn spatial(&mut self) -> Result<InstructionEntry, DatasetError> {
        self.unique(AmbiguityType::Spatial, |g| {
            let color = g.pick_block_color(1)?;
            let available = g.context.blocks_of(&color);
            let quantities: Vec<(&String, u32)> = g
                .vocab
                .precise_quantities
                .iter()
                .filter_map(|q| quantity_value(q, available).map(|n| (q, n)))
                .filter(|&(q, n)| n >= 1 && n <= available && !(q == "all" && n < 2))
                .collect();
            if quantities.is_empty() {
                return None;
            }
            let (quantity, count) = quantities[g.rng.random_range(0..quantities.len())];
            let quantity = quantity.clone();
            let draft = g.draft(quantity, count, color)?;
            let precise = &draft.preposition;
            let candidates: Vec<String> = g
                .vocab
                .vague_prepositions
                .iter()
                .filter(|v| boundaries_differ(v, precise))
                .cloned()
                .collect();
            if candidates.is_empty() {
                return None;
            }
            let vague = pick(&mut g.rng, &candidates);
            g.build(draft, AmbiguityType::Spatial, PREPOSITION, vague)
        })
    }

    fn unique<F>(&mut self, kind: AmbiguityType, mut sample: F) -> Result<InstructionEntry, DatasetError>
    where
        F: FnMut(&mut Self) -> Option<InstructionEntry>,
    {
        for _ in 0..RETRY_BUDGET {
            let Some(mut entry) = sample(self) else { continue };
            if self.seen.insert(entry.ambiguous.clone()) {
                entry.id = format!("amb-{:04}", self.next_id);
                self.next_id += 1;
                return Ok(entry);
            }
        }
        Err(DatasetError::VocabularyExhausted {
            kind,
            produced: self.seen.len(),
            requested: self.seen.len() + 1,
        })
    }

    fn pick_block_color(&mut self, min: u32) -> Option<String> {
        let colors: Vec<String> = self
            .vocab
            .colors
            .iter()
            .filter(|c| self.context.blocks_of(c) >= min)
            .cloned()
            .collect();
        if colors.is_empty() {
            return None;
        }
        Some(pick(&mut self.rng, &colors))
    }

    fn draft(&mut self, quantity: String, count: u32, color: String) -> Option<Draft> {
        let action = pick(&mut self.rng, &self.vocab.actions);
        let preposition = pick(&mut self.rng, &self.vocab.precise_prepositions);
        let mut landmarks = Vec::new();
        for c in &self.vocab.colors {
            if self.context.bowls_of(c) >= 1 {
                landmarks.push((self.vocab.container_noun.clone(), c.clone()));
            }
            if self.context.blocks_of(c) >= 1 && *c != color {
                landmarks.push((self.vocab.object_noun.clone(), c.clone()));
            }
        }
        if landmarks.is_empty() {
            return None;
        }
        let (landmark_noun, landmark_color) = landmarks[self.rng.random_range(0..landmarks.len())].clone();
        Some(Draft {
            action,
            quantity,
            count,
            color,
            preposition,
            landmark_noun,
            landmark_color,
        })
    }

    fn build(&self, d: Draft, kind: AmbiguityType, slot: usize, substitute: String) -> Option<InstructionEntry> {
        let noun = if d.count == 1 {
            self.vocab.object_noun.clone()
        } else {
            self.vocab.object_noun_plural.clone()
        };
        let parts = [
            d.action.as_str(),
            d.quantity.as_str(),
            d.color.as_str(),
            noun.as_str(),
            d.preposition.as_str(),
            "the",
            d.landmark_color.as_str(),
            d.landmark_noun.as_str(),
        ];
        if parts[slot] == substitute || !boundaries_differ(parts[slot], &substitute) {
            return None;
        }
        let (unambiguous, unambiguous_span) = assemble(&parts, slot, None);
        let (ambiguous, ambiguous_span) = assemble(&parts, slot, Some(&substitute));
        let active = |k: AmbiguityType| (k == kind).then(|| substitute.clone());
        Some(InstructionEntry {
            id: String::new(),
            context: self.context.clone(),
            ambiguous,
            unambiguous,
            ambiguity_type: kind,
            slots: SlotRecord {
                action: d.action,
                object_noun: self.vocab.object_noun.clone(),
                object_color: d.color,
                quantity_precise: d.quantity,
                quantity_count: d.count,
                quantity_vague: active(AmbiguityType::Numerical),
                noun_substitute: active(AmbiguityType::AttributeNoun),
                color_substitute: active(AmbiguityType::AttributeColor),
                preposition_precise: d.preposition,
                preposition_vague: active(AmbiguityType::Spatial),
                landmark_noun: d.landmark_noun,
                landmark_color: d.landmark_color,
                ambiguous_span,
                unambiguous_span,
            },
        })
    }
}

fn pick(rng: &mut ChaCha8Rng, list: &[String]) -> String {
    list[rng.random_range(0..list.len())].clone()
}

/// Joins template parts with single spaces, optionally replacing `slot`, and
/// returns the byte span the slot occupies in the result.
fn assemble(parts: &[&str], slot: usize, replacement: Option<&str>) -> (String, Span) {
    let mut text = String::new();
    let mut span = Span::new(0, 0);
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        let word = if i == slot { replacement.unwrap_or(part) } else { part };
        if i == slot {
            span.start = text.len();
        }
        text.push_str(word);
        if i == slot {
            span.end = text.len();
        }
    }
    (text, span)
}

/// A substitution stays a single minimal token span only if the first and
/// last tokens of the two terms differ.
fn boundaries_differ(a: &str, b: &str) -> bool {
    let (mut at, mut bt) = (a.split_whitespace(), b.split_whitespace());
    at.next() != bt.next() && a.split_whitespace().last() != b.split_whitespace().last()
}

/// Builds a dataset: numerical entries first, then attribute entries
/// (alternating noun and color substitutions), then spatial entries.
pub fn generate_dataset(
    seed: u64,
    counts: DatasetCounts,
    vocab: &Vocabulary,
    context: &ScenarioContext,
) -> Result<Vec<InstructionEntry>, DatasetError> {
    let mut generator = Generator::new(seed, vocab, context)?;
    let mut entries = Vec::with_capacity(counts.total());
    let requested = counts.total();
    let exhausted = |e: DatasetError, produced: usize| match e {
        DatasetError::VocabularyExhausted { kind, .. } => DatasetError::VocabularyExhausted {
            kind,
            produced,
            requested,
        },
        other => other,
    };
    for _ in 0..counts.numerical {
        let entry = generator.numerical().map_err(|e| exhausted(e, entries.len()))?;
        entries.push(entry);
    }
    for i in 0..counts.attribute {
        let sub = if i % 2 == 0 {
            AttributeSub::Noun
        } else {
            AttributeSub::Color
        };
        let entry = generator.attribute(sub).map_err(|e| exhausted(e, entries.len()))?;
        entries.push(entry);
    }
    for _ in 0..counts.spatial {
        let entry = generator.spatial().map_err(|e| exhausted(e, entries.len()))?;
        entries.push(entry);
    }
    Ok(entries)
}
