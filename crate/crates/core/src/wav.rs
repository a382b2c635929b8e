//! 16-bit PCM WAV decoding and encoding.

use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectra::AudioSignal;
use crate::Scalar;

const FULL_SCALE: f64 = 32768.0;

/// Decodes a 16-bit integer PCM WAV. Stereo input keeps channel 0.
pub fn decode_audio<T: Scalar>(bytes: &[u8]) -> Result<AudioSignal<T>> {
    decode_reader(Cursor::new(bytes))
}

pub fn read_wav<T: Scalar>(path: &Path) -> Result<AudioSignal<T>> {
    let bytes = std::fs::read(path)?;
    decode_audio(&bytes)
}

fn decode_reader<T: Scalar, R: Read>(reader: R) -> Result<AudioSignal<T>> {
    let reader = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Unsupported(format!(
            "{:?} with {} bits per sample",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::Unsupported(format!("{} channels", spec.channels)));
    }
    let channels = spec.channels as usize;
    let mut samples = Vec::with_capacity(reader.len() as usize / channels);
    for (i, s) in reader.into_samples::<i16>().enumerate() {
        let s = s.map_err(map_hound)?;
        if i % channels == 0 {
            samples.push(T::of(s as f64 / FULL_SCALE));
        }
    }
    AudioSignal::new(samples, spec.sample_rate as f64)
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => Error::Unsupported("non-PCM encoding".into()),
        hound::Error::IoError(io) => Error::Format(format!("truncated or unreadable: {io}")),
        other => Error::Format(other.to_string()),
    }
}

/// Quantizes `x` in [-1, 1] to a 16-bit sample; the inverse of decoding.
pub fn quantize(x: f64) -> i16 {
    (x * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_audio<T: Scalar>(signal: &AudioSignal<T>) -> Result<Vec<u8>> {
    let mut cursor = Cursor::new(Vec::new());
    write_to(&mut cursor, signal)?;
    Ok(cursor.into_inner())
}

pub fn write_wav<T: Scalar>(path: &Path, signal: &AudioSignal<T>) -> Result<()> {
    let bytes = encode_audio(signal)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

fn write_to<T: Scalar, W: Write + Seek>(w: W, signal: &AudioSignal<T>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate().round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::new(w, spec).map_err(map_hound)?;
    for &s in signal.samples() {
        writer.write_sample(quantize(s.as_f64())).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)?;
    Ok(())
}
