use thiserror::Error;

use super::{FollowerFeedback, Proposal, Stance, Verdict};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty response")]
    Empty,
    #[error("no {0} marker found")]
    MissingMarker(&'static str),
    #[error("{0} marker appears more than once")]
    DuplicateMarker(&'static str),
    #[error("verdict states both CLEAR and QUESTION")]
    ConflictingVerdict,
    #[error("unrecognised verdict {0:?}")]
    UnknownVerdict(String),
    #[error("clarifying question is empty")]
    EmptyQuestion,
    #[error("unrecognised stance {0:?}")]
    UnknownStance(String),
    #[error("agreeing follower supplied an alternative question")]
    AgreeWithAlternative,
}

#[derive(Debug)]
struct Section<'a> {
    key: &'static str,
    /// Text after the colon on the marker line.
    head: &'a str,
    /// Following non-marker lines.
    body: Vec<&'a str>,
}

impl Section<'_> {
    fn full_text(&self) -> String {
        let mut parts = vec![self.head.trim()];
        parts.extend(self.body.iter().map(|l| l.trim()));
        parts.retain(|p| !p.is_empty());
        parts.join("\n")
    }

    /// The marker-line value, or the first non-empty following line when the
    /// marker line itself is empty.
    fn value(&self) -> &str {
        let head = self.head.trim();
        if !head.is_empty() {
            return head;
        }
        self.body.iter().map(|l| l.trim()).find(|l| !l.is_empty()).unwrap_or("")
    }
}

fn marker_key(line: &str, keys: &[&'static str]) -> Option<(&'static str, usize)> {
    let stripped = line.trim_start_matches(|c: char| c.is_whitespace() || "*#>-`_".contains(c));
    let offset = line.len() - stripped.len();
    let colon = stripped.find(':')?;
    let raw_key = stripped[..colon].trim_end_matches(|c: char| c == '*' || c.is_whitespace());
    if raw_key.len() > 24 {
        return None;
    }
    let normalized = raw_key.to_ascii_uppercase().replace([' ', '-'], "_");
    let key = keys
        .iter()
        .find(|k| **k == normalized || (**k == "ALT_QUESTION" && normalized == "ALTERNATIVE_QUESTION"))?;
    Some((key, offset + colon + 1))
}

fn sections<'a>(raw: &'a str, keys: &[&'static str]) -> Vec<Section<'a>> {
    let mut out: Vec<Section<'a>> = Vec::new();
    for line in raw.lines() {
        if let Some((key, at)) = marker_key(line, keys) {
            let head = line[at..].trim_start_matches(|c: char| c == '*' || c.is_whitespace());
            out.push(Section {
                key,
                head,
                body: Vec::new(),
            });
        } else if let Some(last) = out.last_mut() {
            last.body.push(line);
        }
    }
    out
}

fn single<'s, 'a>(sections: &'s [Section<'a>], key: &'static str) -> Result<Option<&'s Section<'a>>, ParseError> {
    let mut found = sections.iter().filter(|s| s.key == key);
    let first = found.next();
    if found.next().is_some() {
        return Err(ParseError::DuplicateMarker(key));
    }
    Ok(first)
}

fn clean_question(q: &str) -> String {
    q.trim()
        .trim_matches(|c: char| c == '"' || c == '\u{201c}' || c == '\u{201d}' || c == '*')
        .trim()
        .to_string()
}

pub fn parse_proposal(raw: &str) -> Result<Proposal, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let secs = sections(raw, &["REASONING", "VERDICT"]);
    let verdict = single(&secs, "VERDICT")?.ok_or(ParseError::MissingMarker("VERDICT"))?;
    let reasoning = single(&secs, "REASONING")?.map(Section::full_text).unwrap_or_default();
    let value = verdict.value();
    let word: String = value.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let rest = &value[word.len()..];
    let verdict = match word.to_ascii_uppercase().as_str() {
        "CLEAR" => {
            if rest.to_ascii_uppercase().contains("QUESTION") {
                return Err(ParseError::ConflictingVerdict);
            }
            Verdict::Clear
        }
        "QUESTION" => {
            let rest = rest.trim_start().trim_start_matches(':');
            if rest.trim().trim_end_matches('.').eq_ignore_ascii_case("clear") {
                return Err(ParseError::ConflictingVerdict);
            }
            let question = if rest.trim().is_empty() {
                verdict
                    .body
                    .iter()
                    .map(|l| l.trim())
                    .find(|l| !l.is_empty())
                    .unwrap_or("")
            } else {
                rest
            };
            let question = clean_question(question);
            if question.is_empty() {
                return Err(ParseError::EmptyQuestion);
            }
            Verdict::ClarifyingQuestion(question)
        }
        _ => return Err(ParseError::UnknownVerdict(value.to_string())),
    };
    Ok(Proposal { reasoning, verdict })
}

const NO_ALTERNATIVE: [&str; 6] = ["", "NONE", "N/A", "NA", "-", "NO ALTERNATIVE"];

pub fn parse_feedback(raw: &str) -> Result<FollowerFeedback, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let secs = sections(raw, &["STANCE", "REASONING", "ALT_QUESTION"]);
    let stance = single(&secs, "STANCE")?.ok_or(ParseError::MissingMarker("STANCE"))?;
    let word: String = stance
        .value()
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_uppercase();
    let stance = match word.as_str() {
        "AGREE" => Stance::Agree,
        "DISAGREE" => Stance::Disagree,
        _ => return Err(ParseError::UnknownStance(stance.value().to_string())),
    };
    let reasoning = single(&secs, "REASONING")?.map(Section::full_text).unwrap_or_default();
    let alternative_question = single(&secs, "ALT_QUESTION")?
        .map(|s| clean_question(s.value()))
        .filter(|q| {
            let upper = q.trim_end_matches('.').to_ascii_uppercase();
            !NO_ALTERNATIVE.contains(&upper.as_str())
        });
    if stance == Stance::Agree && alternative_question.is_some() {
        return Err(ParseError::AgreeWithAlternative);
    }
    Ok(FollowerFeedback {
        stance,
        reasoning,
        alternative_question,
    })
}

/// Canonical marker text for a proposal; `parse_proposal` inverts it.
pub fn render_proposal(proposal: &Proposal) -> String {
    let verdict = match &proposal.verdict {
        Verdict::Clear => "CLEAR".to_string(),
        Verdict::ClarifyingQuestion(q) => format!("QUESTION: {q}"),
    };
    format!("REASONING: {}\nVERDICT: {verdict}", proposal.reasoning)
}

pub fn render_feedback(feedback: &FollowerFeedback) -> String {
    let stance = match feedback.stance {
        Stance::Agree => "AGREE",
        Stance::Disagree => "DISAGREE",
    };
    format!(
        "STANCE: {stance}\nREASONING: {}\nALT_QUESTION: {}",
        feedback.reasoning,
        feedback.alternative_question.as_deref().unwrap_or("NONE")
    )
}
