//! Mono WAV input/output (16-bit PCM or 32-bit float).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{Waveform, DEFAULT_SAMPLE_RATE};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Accept rates other than 16 kHz unchanged instead of failing.
    pub allow_any_rate: bool,
}

pub fn read_wav<T: Real>(path: impl AsRef<Path>, opts: ReadOptions) -> Result<Waveform<T>> {
    let reader = WavReader::open(path)?;
    decode(reader, opts)
}

pub fn read_wav_bytes<T: Real>(bytes: &[u8], opts: ReadOptions) -> Result<Waveform<T>> {
    decode(WavReader::new(std::io::Cursor::new(bytes))?, opts)
}

fn decode<T: Real, R: std::io::Read>(reader: WavReader<R>, opts: ReadOptions) -> Result<Waveform<T>> {
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!("expected mono audio, found {} channels", spec.channels)));
    }
    if spec.sample_rate != DEFAULT_SAMPLE_RATE && !opts.allow_any_rate {
        return Err(Error::SampleRate(spec.sample_rate));
    }
    let samples: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| T::lit(v as f64 / 32_768.0)))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| T::lit(v as f64)))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => return Err(Error::Format(format!("unsupported WAV encoding {fmt:?}/{bits} bit"))),
    };
    Waveform::new(samples, spec.sample_rate)
}

fn spec_for(rate: u32, enc: WavEncoding) -> WavSpec {
    match enc {
        WavEncoding::Pcm16 => WavSpec { channels: 1, sample_rate: rate, bits_per_sample: 16, sample_format: SampleFormat::Int },
        WavEncoding::Float32 => WavSpec { channels: 1, sample_rate: rate, bits_per_sample: 32, sample_format: SampleFormat::Float },
    }
}

fn encode<T: Real, W: std::io::Write + std::io::Seek>(w: &Waveform<T>, enc: WavEncoding, mut writer: WavWriter<W>) -> Result<()> {
    for &s in w.samples() {
        let v = s.to_f64_();
        match enc {
            WavEncoding::Pcm16 => writer.write_sample((v * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16)?,
            WavEncoding::Float32 => writer.write_sample(v as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}

pub fn write_wav<T: Real>(path: impl AsRef<Path>, w: &Waveform<T>, enc: WavEncoding) -> Result<()> {
    encode(w, enc, WavWriter::create(path, spec_for(w.sample_rate(), enc))?)
}

pub fn wav_bytes<T: Real>(w: &Waveform<T>, enc: WavEncoding) -> Result<Vec<u8>> {
    let mut cursor = std::io::Cursor::new(Vec::new());
    encode(w, enc, WavWriter::new(&mut cursor, spec_for(w.sample_rate(), enc))?)?;
    Ok(cursor.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_exact_in_single_precision() {
        let w = Waveform::from_samples(vec![0.5f64, -0.25, 0.125]).unwrap();
        let bytes = wav_bytes(&w, WavEncoding::Float32).unwrap();
        let r: Waveform<f64> = read_wav_bytes(&bytes, ReadOptions::default()).unwrap();
        assert_eq!(r.samples(), w.samples());
    }

    #[test]
    fn pcm16_quantises() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let w = Waveform::from_samples(vec![0.3f64, -0.7]).unwrap();
        write_wav(&p, &w, WavEncoding::Pcm16).unwrap();
        let r: Waveform<f64> = read_wav(&p, ReadOptions::default()).unwrap();
        for (a, b) in r.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() < 1.0 / 32_768.0);
        }
    }

    #[test]
    fn non_16k_rejected_unless_allowed() {
        let w = Waveform::new(vec![0.1f64; 10], 8000).unwrap();
        let bytes = wav_bytes(&w, WavEncoding::Float32).unwrap();
        assert!(matches!(read_wav_bytes::<f64>(&bytes, ReadOptions::default()), Err(Error::SampleRate(8000))));
        let ok: Waveform<f64> = read_wav_bytes(&bytes, ReadOptions { allow_any_rate: true }).unwrap();
        assert_eq!(ok.sample_rate(), 8000);
    }
}
