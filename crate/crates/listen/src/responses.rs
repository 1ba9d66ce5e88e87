//! Response payloads, validation and keyword scoring.

use avse_core::grid::{parse_colour, parse_letter, Keywords, COLOURS};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::sessions::Trial;
use crate::{Error, Result};

pub const RATING_MAX: u8 = 100;
/// Longest accepted free-text letter answer, in characters.
pub const LETTER_MAX_CHARS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingsPayload {
    /// One rating per presentation slot.
    pub ratings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordPayload {
    pub colour: String,
    pub digit: i64,
    pub letter: String,
}

/// A response as submitted: `{"ratings": [..]}` for MUSHRA trials,
/// `{"colour", "digit", "letter"}` for intelligibility trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponsePayload {
    Mushra(RatingsPayload),
    Intelligibility(KeywordPayload),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MushraAnswer {
    pub ratings: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordAnswer {
    /// One of the four grammar colours, lower case.
    pub colour: String,
    pub digit: u8,
    /// The letter exactly as typed.
    pub letter: String,
}

/// A validated response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Mushra(MushraAnswer),
    Intelligibility(KeywordAnswer),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub trial: String,
    pub received_at: DateTime<Utc>,
    pub answer: Answer,
}

fn rating(slot: usize, v: f64) -> Result<u8> {
    if v.is_finite() && v.fract() == 0.0 && (0.0..=RATING_MAX as f64).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::Invalid(format!("rating {v} in slot {slot} is not an integer from 0 to {RATING_MAX}")))
    }
}

/// Checks a payload against the trial it answers.
pub fn validate(trial: &Trial, payload: &ResponsePayload) -> Result<Answer> {
    match (trial, payload) {
        (Trial::Mushra(t), ResponsePayload::Mushra(p)) => {
            if p.ratings.len() != t.stimuli.len() {
                return Err(Error::Invalid(format!("expected {} ratings, got {}", t.stimuli.len(), p.ratings.len())));
            }
            let ratings = p.ratings.iter().enumerate().map(|(i, &v)| rating(i, v)).collect::<Result<_>>()?;
            Ok(Answer::Mushra(MushraAnswer { ratings }))
        }
        (Trial::Intelligibility(_), ResponsePayload::Intelligibility(p)) => {
            let colour = parse_colour(&p.colour)
                .ok_or_else(|| Error::Invalid(format!("colour {:?} is not one of {}", p.colour, COLOURS.join("/"))))?;
            let digit = u8::try_from(p.digit)
                .ok()
                .filter(|d| *d <= 9)
                .ok_or_else(|| Error::Invalid(format!("digit {} is not 0-9", p.digit)))?;
            if p.letter.chars().count() > LETTER_MAX_CHARS {
                return Err(Error::Invalid(format!("letter answer longer than {LETTER_MAX_CHARS} characters")));
            }
            Ok(Answer::Intelligibility(KeywordAnswer { colour: colour.into(), digit, letter: p.letter.clone() }))
        }
        (Trial::Mushra(_), _) => Err(Error::Invalid("a MUSHRA trial takes {\"ratings\": [...]}".into())),
        (Trial::Intelligibility(_), _) => Err(Error::Invalid("an intelligibility trial takes colour, digit and letter".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordScore {
    pub colour: bool,
    pub letter: bool,
    pub digit: bool,
}

impl KeywordScore {
    pub fn correct(&self) -> usize {
        [self.colour, self.letter, self.digit].iter().filter(|&&b| b).count()
    }
}

/// Colour and digit must match exactly; the letter is compared case-folded
/// and anything other than one grammar letter (A-Z without W) is wrong.
pub fn score_keywords(answer: &KeywordAnswer, truth: &Keywords) -> KeywordScore {
    KeywordScore {
        colour: parse_colour(&answer.colour) == Some(truth.colour.as_str()),
        letter: parse_letter(&answer.letter) == Some(truth.letter),
        digit: answer.digit == truth.digit,
    }
}
