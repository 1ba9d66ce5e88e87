//! Speech-shaped noise synthesis, SNR-controlled mixing, and the synthetic
//! speech-like signals that stand in for a recorded corpus.

mod lpc;
mod mix;
mod synth;

pub use lpc::{fit_lpc, generate_ssn, LpcModel, DEFAULT_LPC_ORDER};
pub use mix::{measured_snr_db, mix_at_snr, MixSpec, Mixture, NoiseKind, SnrGrid};
pub use synth::{synth_speechlike, synth_utterance, LombardShift, SpeakingStyle, SynthParams, SynthUtterance};
