//! GRID sentence grammar: command, colour, preposition, letter, digit,
//! adverb. Colour, letter and digit are the keywords.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const COMMANDS: [&str; 4] = ["bin", "lay", "place", "set"];
pub const COLOURS: [&str; 4] = ["blue", "green", "red", "white"];
pub const PREPOSITIONS: [&str; 4] = ["at", "by", "in", "with"];
pub const ADVERBS: [&str; 4] = ["again", "now", "please", "soon"];
pub const DIGIT_WORDS: [&str; 10] = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

/// Letters A-Z without W.
pub fn letters() -> impl Iterator<Item = char> {
    ('A'..='Z').filter(|&c| c != 'W')
}

/// Case-folded letter keyword, or `None` for anything that is not a single
/// letter of the grammar.
pub fn parse_letter(s: &str) -> Option<char> {
    let mut chars = s.trim().chars();
    let c = chars.next()?.to_ascii_uppercase();
    (chars.next().is_none() && c.is_ascii_uppercase() && c != 'W').then_some(c)
}

/// A digit keyword written as a numeral or as an English word.
pub fn parse_digit(s: &str) -> Option<u8> {
    let s = s.trim().to_ascii_lowercase();
    if s.len() == 1 {
        if let Some(d) = s.chars().next().and_then(|c| c.to_digit(10)) {
            return Some(d as u8);
        }
    }
    DIGIT_WORDS.iter().position(|w| *w == s).map(|d| d as u8)
}

pub fn parse_colour(s: &str) -> Option<&'static str> {
    let s = s.trim().to_ascii_lowercase();
    COLOURS.iter().find(|c| **c == s).copied()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Keywords {
    pub colour: String,
    pub letter: char,
    pub digit: u8,
}

/// A validated six-word sentence, stored in lower case with the digit
/// written as a numeral.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transcript {
    words: [String; 6],
}

impl Transcript {
    pub fn keywords(&self) -> Keywords {
        Keywords {
            colour: self.words[1].clone(),
            letter: self.words[3].chars().next().unwrap().to_ascii_uppercase(),
            digit: self.words[4].parse().unwrap(),
        }
    }

    pub fn words(&self) -> &[String; 6] {
        &self.words
    }

    pub fn new(command: &str, colour: &str, preposition: &str, letter: char, digit: u8, adverb: &str) -> Result<Self> {
        format!("{command} {colour} {preposition} {letter} {digit} {adverb}").parse()
    }
}

impl FromStr for Transcript {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let words: Vec<&str> = s.split_whitespace().collect();
        if words.len() != 6 {
            return Err(Error::Format(format!("expected 6 words, got {} in {s:?}", words.len())));
        }
        let pick = |slot: &str, w: &str, set: &[&str]| -> Result<String> {
            let lw = w.to_ascii_lowercase();
            if set.contains(&lw.as_str()) {
                Ok(lw)
            } else {
                Err(Error::Format(format!("{w:?} is not a valid {slot} (expected one of {})", set.join("/"))))
            }
        };
        let letter = parse_letter(words[3])
            .ok_or_else(|| Error::Format(format!("{:?} is not a valid letter (A-Z excluding W)", words[3])))?;
        let digit = parse_digit(words[4]).ok_or_else(|| Error::Format(format!("{:?} is not a digit 0-9", words[4])))?;
        Ok(Self {
            words: [
                pick("command", words[0], &COMMANDS)?,
                pick("colour", words[1], &COLOURS)?,
                pick("preposition", words[2], &PREPOSITIONS)?,
                letter.to_ascii_lowercase().to_string(),
                digit.to_string(),
                pick("adverb", words[5], &ADVERBS)?,
            ],
        })
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.words.join(" "))
    }
}

impl Serialize for Transcript {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Transcript {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalises() {
        let t: Transcript = "Bin BLUE at f two now".parse().unwrap();
        assert_eq!(t.to_string(), "bin blue at f 2 now");
        assert_eq!(t.keywords(), Keywords { colour: "blue".into(), letter: 'F', digit: 2 });
    }

    #[test]
    fn rejects_w_and_bad_slots() {
        let e = "bin blue at W 1 now".parse::<Transcript>().unwrap_err().to_string();
        assert!(e.contains("letter"), "{e}");
        assert!("bin black at a 1 now".parse::<Transcript>().is_err());
        assert!("bin blue at a 10 now".parse::<Transcript>().is_err());
        assert!("bin blue at a 1".parse::<Transcript>().is_err());
        assert!("put blue at a 1 now".parse::<Transcript>().is_err());
    }

    #[test]
    fn keyword_parsers() {
        assert_eq!(parse_letter(" a "), Some('A'));
        assert_eq!(parse_letter("w"), None);
        assert_eq!(parse_letter("ab"), None);
        assert_eq!(parse_letter("7"), None);
        assert_eq!(parse_digit("seven"), Some(7));
        assert_eq!(parse_digit("0"), Some(0));
        assert_eq!(parse_digit("12"), None);
        assert_eq!(parse_colour("Red"), Some("red"));
        assert_eq!(letters().count(), 25);
    }

    #[test]
    fn serde_round_trip() {
        let t = Transcript::new("set", "white", "with", 'z', 9, "soon").unwrap();
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(j, "\"set white with z 9 soon\"");
        assert_eq!(serde_json::from_str::<Transcript>(&j).unwrap(), t);
        assert!(serde_json::from_str::<Transcript>("\"set white with w 9 soon\"").is_err());
    }
}
