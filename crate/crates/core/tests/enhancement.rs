use avse_core::dsp::{StftConfig, Waveform};
use avse_core::mask::{enhance_utterance, EnhanceOptions, IdealMaskEstimator};
use avse_core::metrics::estoi;
use avse_core::noise::{fit_lpc, generate_ssn, mix_at_snr, synth_speechlike, LpcModel, SnrGrid, SpeakingStyle, SynthParams};

fn ssn_model() -> LpcModel<f64> {
    let refs: Vec<Waveform<f64>> = (0..6)
        .map(|s| synth_speechlike(&SynthParams::new(100 + s, 2.0, 100.0 + 20.0 * s as f64, SpeakingStyle::NonLombard)).unwrap())
        .collect();
    fit_lpc(&refs, 12).unwrap()
}

fn utterance(seed: u64) -> Waveform<f64> {
    synth_speechlike(&SynthParams::new(seed, 1.5, 110.0 + (seed % 7) as f64 * 15.0, SpeakingStyle::NonLombard)).unwrap()
}

#[test]
fn estoi_rises_with_snr() {
    let model = ssn_model();
    let mut means = Vec::new();
    for &snr in &SnrGrid::NARROW {
        let mut acc = 0.0;
        for seed in 0..20u64 {
            let clean = utterance(seed);
            let noise = generate_ssn(&model, 2.0, 1000 + seed, 16_000).unwrap();
            let mix = mix_at_snr(&clean, &noise, snr, seed).unwrap();
            acc += estoi(&clean, &mix.noisy).unwrap();
        }
        means.push(acc / 20.0);
    }
    assert!(means.windows(2).all(|p| p[1] > p[0]), "{means:?}");
}

#[test]
fn ideal_mask_beats_unprocessed() {
    let model = ssn_model();
    let cfg = StftConfig::speech_16k();
    for &snr in &SnrGrid::NARROW {
        let mut violations = Vec::new();
        for seed in 0..20u64 {
            let clean = utterance(seed);
            let noise = generate_ssn(&model, 2.0, 2000 + seed, 16_000).unwrap();
            let mix = mix_at_snr(&clean, &noise, snr, seed).unwrap();
            let oracle = IdealMaskEstimator::new(&clean, &cfg, 10.0).unwrap();
            let enhanced = enhance_utterance(&oracle, &mix.noisy, None, &EnhanceOptions::default()).unwrap();
            let (e, u) = (estoi(&clean, &enhanced).unwrap(), estoi(&clean, &mix.noisy).unwrap());
            if e <= u {
                violations.push((seed, e, u));
            }
        }
        assert!(violations.len() <= 1, "{snr} dB: {violations:?}");
    }
}
