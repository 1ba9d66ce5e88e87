use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::noise::SpeakingStyle;

/// Features measured on one utterance. `None` marks an unusable value
/// (e.g. unvoiced F0), which is left out of the averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceFeatures {
    pub speaker: String,
    pub style: SpeakingStyle,
    pub f0_hz: Option<f64>,
    pub mouth_aperture: Option<f64>,
    pub mouth_spreading: Option<f64>,
}

/// One metric value of one system on one utterance of a speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub speaker: String,
    pub system: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DeltaInputs<'a> {
    pub features: &'a [UtteranceFeatures],
    pub scores: &'a [SystemScore],
    /// Metric increments are `mean(first) - mean(second)`.
    pub system_pair: (&'a str, &'a str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerFeatureDelta {
    pub speaker: String,
    pub delta_f0: Option<f64>,
    pub delta_ma: Option<f64>,
    pub delta_ms: Option<f64>,
    pub delta_metric: BTreeMap<String, f64>,
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn style_delta(rows: &[&UtteranceFeatures], pick: impl Fn(&UtteranceFeatures) -> Option<f64>) -> Option<f64> {
    let l = mean(rows.iter().filter(|r| r.style == SpeakingStyle::Lombard).filter_map(|r| pick(r)))?;
    let nl = mean(rows.iter().filter(|r| r.style == SpeakingStyle::NonLombard).filter_map(|r| pick(r)))?;
    Some(l - nl)
}

/// Lombard-minus-plain feature means and system-pair metric increments per
/// speaker. Speakers missing either style are returned in the second list.
pub fn speaker_deltas(inputs: &DeltaInputs<'_>) -> (Vec<SpeakerFeatureDelta>, Vec<String>) {
    let mut by_speaker: BTreeMap<&str, Vec<&UtteranceFeatures>> = BTreeMap::new();
    for f in inputs.features {
        by_speaker.entry(f.speaker.as_str()).or_default().push(f);
    }
    let mut out = Vec::new();
    let mut excluded = Vec::new();
    for (speaker, rows) in by_speaker {
        let styles: BTreeSet<SpeakingStyle> = rows.iter().map(|r| r.style).collect();
        if styles.len() < 2 {
            log::info!("speaker {speaker} lacks one speaking style; excluded from deltas");
            excluded.push(speaker.to_string());
            continue;
        }
        let metrics: BTreeSet<&str> = inputs
            .scores
            .iter()
            .filter(|s| s.speaker == speaker)
            .map(|s| s.metric.as_str())
            .collect();
        let mut delta_metric = BTreeMap::new();
        for metric in metrics {
            let sys_mean = |sys: &str| {
                mean(
                    inputs
                        .scores
                        .iter()
                        .filter(|s| s.speaker == speaker && s.metric == metric && s.system == sys)
                        .map(|s| s.value),
                )
            };
            if let (Some(a), Some(b)) = (sys_mean(inputs.system_pair.0), sys_mean(inputs.system_pair.1)) {
                delta_metric.insert(metric.to_string(), a - b);
            }
        }
        out.push(SpeakerFeatureDelta {
            speaker: speaker.to_string(),
            delta_f0: style_delta(&rows, |r| r.f0_hz),
            delta_ma: style_delta(&rows, |r| r.mouth_aperture),
            delta_ms: style_delta(&rows, |r| r.mouth_spreading),
            delta_metric,
        });
    }
    (out, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Waveform;
    use crate::features::{estimate_f0, F0Config};
    use crate::noise::{synth_speechlike, SynthParams};

    fn row(speaker: &str, style: SpeakingStyle, f0: f64, ma: f64, ms: f64) -> UtteranceFeatures {
        UtteranceFeatures {
            speaker: speaker.into(),
            style,
            f0_hz: Some(f0),
            mouth_aperture: Some(ma),
            mouth_spreading: Some(ms),
        }
    }

    #[test]
    fn identical_styles_give_zero() {
        let f = vec![
            row("s2", SpeakingStyle::Lombard, 150.0, 10.0, 40.0),
            row("s2", SpeakingStyle::NonLombard, 150.0, 10.0, 40.0),
        ];
        let (d, ex) = speaker_deltas(&DeltaInputs { features: &f, scores: &[], system_pair: ("a", "b") });
        assert!(ex.is_empty());
        assert_eq!((d[0].delta_f0, d[0].delta_ma, d[0].delta_ms), (Some(0.0), Some(0.0), Some(0.0)));
    }

    #[test]
    fn missing_style_excludes_speaker() {
        let f = vec![row("s3", SpeakingStyle::Lombard, 150.0, 10.0, 40.0)];
        let (d, ex) = speaker_deltas(&DeltaInputs { features: &f, scores: &[], system_pair: ("a", "b") });
        assert!(d.is_empty());
        assert_eq!(ex, vec!["s3".to_string()]);
    }

    #[test]
    fn metric_increment_and_antisymmetry() {
        let f = vec![
            row("s4", SpeakingStyle::Lombard, 180.0, 12.0, 41.0),
            row("s4", SpeakingStyle::Lombard, 190.0, 14.0, 43.0),
            row("s4", SpeakingStyle::NonLombard, 150.0, 10.0, 40.0),
        ];
        let scores = vec![
            SystemScore { speaker: "s4".into(), system: "AV-L".into(), metric: "estoi".into(), value: 0.6 },
            SystemScore { speaker: "s4".into(), system: "AV-NL".into(), metric: "estoi".into(), value: 0.5 },
        ];
        let (d, _) = speaker_deltas(&DeltaInputs { features: &f, scores: &scores, system_pair: ("AV-L", "AV-NL") });
        assert_eq!(d[0].delta_f0, Some(35.0));
        assert_eq!(d[0].delta_ma, Some(3.0));
        assert!((d[0].delta_metric["estoi"] - 0.1).abs() < 1e-12);

        let swapped: Vec<_> = f
            .iter()
            .map(|r| UtteranceFeatures {
                style: match r.style {
                    SpeakingStyle::Lombard => SpeakingStyle::NonLombard,
                    SpeakingStyle::NonLombard => SpeakingStyle::Lombard,
                },
                ..r.clone()
            })
            .collect();
        let (s, _) = speaker_deltas(&DeltaInputs { features: &swapped, scores: &[], system_pair: ("a", "b") });
        assert_eq!(s[0].delta_f0, Some(-35.0));
        assert_eq!(s[0].delta_ms, d[0].delta_ms.map(|v| -v));
    }

    #[test]
    fn constructed_f0_offset_is_recovered() {
        let mut feats = Vec::new();
        for seed in 0..4 {
            for style in [SpeakingStyle::Lombard, SpeakingStyle::NonLombard] {
                let w: Waveform<f64> = synth_speechlike(&SynthParams::new(seed, 1.5, 130.0, style)).unwrap();
                let f0 = estimate_f0(&w, &F0Config::default()).unwrap().hz();
                feats.push(UtteranceFeatures { speaker: "s9".into(), style, f0_hz: f0, mouth_aperture: None, mouth_spreading: None });
            }
        }
        let (d, _) = speaker_deltas(&DeltaInputs { features: &feats, scores: &[], system_pair: ("a", "b") });
        let df0 = d[0].delta_f0.unwrap();
        assert!((df0 - 40.0).abs() <= 2.0, "{df0}");
        assert_eq!(d[0].delta_ma, None);
    }
}
