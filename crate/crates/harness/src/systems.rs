//! The twelve evaluated systems: {VO, AO, AV} x {L, NL} x {narrow, wide}.

use std::fmt;
use std::str::FromStr;

use avse_core::mask::Modality;
use avse_core::noise::{SnrGrid, SpeakingStyle};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemSpec {
    pub modality: Modality,
    pub training_style: SpeakingStyle,
    pub snr_range: SnrGrid,
}

/// A speaking style mixed at one SNR.
pub type Condition = (SpeakingStyle, f64);

impl SystemSpec {
    pub fn new(modality: Modality, training_style: SpeakingStyle, snr_range: SnrGrid) -> Self {
        Self { modality, training_style, snr_range }
    }

    /// Training mixtures. Narrow systems use their style on the narrow grid.
    /// Wide Lombard systems use Lombard speech up to 5 dB and plain speech
    /// from 10 dB; wide plain systems use plain speech throughout.
    pub fn training_conditions(&self) -> Vec<Condition> {
        match (self.snr_range, self.training_style) {
            (SnrGrid::Narrow, s) => SnrGrid::NARROW.iter().map(|&v| (s, v)).collect(),
            (SnrGrid::Wide, SpeakingStyle::Lombard) => wide_split(),
            (SnrGrid::Wide, SpeakingStyle::NonLombard) => {
                SnrGrid::Wide.values().into_iter().map(|v| (SpeakingStyle::NonLombard, v)).collect()
            }
        }
    }

    /// Test mixtures: Lombard speech on the narrow grid, plus plain speech
    /// from 10 dB for the wide systems.
    pub fn evaluation_conditions(&self) -> Vec<Condition> {
        match self.snr_range {
            SnrGrid::Narrow => SnrGrid::NARROW.iter().map(|&v| (SpeakingStyle::Lombard, v)).collect(),
            SnrGrid::Wide => wide_split(),
        }
    }

    pub fn name(&self) -> String {
        let w = if self.snr_range == SnrGrid::Wide { "(w)" } else { "" };
        format!("{}-{}{w}", self.modality.label(), self.training_style.short())
    }
}

fn wide_split() -> Vec<Condition> {
    let low = SnrGrid::NARROW.iter().map(|&v| (SpeakingStyle::Lombard, v));
    low.chain(SnrGrid::HIGH.iter().map(|&v| (SpeakingStyle::NonLombard, v))).collect()
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for SystemSpec {
    type Err = Error;

    /// Parses names such as `AV-L`, `ao-nl(w)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown system {s:?} (expected e.g. AV-L or VO-NL(w))"));
        let t = s.trim().to_ascii_uppercase();
        let (t, range) = match t.strip_suffix("(W)") {
            Some(rest) => (rest.to_string(), SnrGrid::Wide),
            None => (t, SnrGrid::Narrow),
        };
        let (m, style) = t.split_once('-').ok_or_else(bad)?;
        let modality: Modality = m.parse().map_err(|_| bad())?;
        let style = match style {
            "L" => SpeakingStyle::Lombard,
            "NL" => SpeakingStyle::NonLombard,
            _ => return Err(bad()),
        };
        Ok(Self::new(modality, style, range))
    }
}

impl Serialize for SystemName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for SystemName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map(SystemName).map_err(serde::de::Error::custom)
    }
}

/// A system written by its name in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemName(pub SystemSpec);

/// All twelve systems, narrow before wide, L before NL, VO/AO/AV.
pub fn condition_matrix() -> Vec<SystemSpec> {
    let mut out = Vec::with_capacity(12);
    for range in [SnrGrid::Narrow, SnrGrid::Wide] {
        for style in [SpeakingStyle::Lombard, SpeakingStyle::NonLombard] {
            for m in [Modality::Vo, Modality::Ao, Modality::Av] {
                out.push(SystemSpec::new(m, style, range));
            }
        }
    }
    out
}
