//! PCM16 mono WAV reading and writing.

use super::DataError;
use crate::dsp::Waveform;
use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

const FULL_SCALE: f64 = 32768.0;

/// Outcome of a write: how many samples fell outside the 16-bit range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub clipped: usize,
}

/// Round half away from zero, then clip to the i16 range.
pub fn quantize(x: f64) -> (i16, bool) {
    let q = (x * FULL_SCALE).round();
    if q > i16::MAX as f64 {
        (i16::MAX, true)
    } else if q < i16::MIN as f64 {
        (i16::MIN, true)
    } else {
        (q as i16, false)
    }
}

fn map_hound(e: hound::Error) -> DataError {
    match e {
        // hound reports a short read as a custom Other error.
        hound::Error::IoError(io)
            if io.kind() == std::io::ErrorKind::UnexpectedEof || io.to_string().contains("enough bytes") =>
        {
            DataError::Truncated
        }
        hound::Error::IoError(io) => DataError::Io(io),
        hound::Error::FormatError(msg) => DataError::BadHeader(msg.to_string()),
        hound::Error::Unsupported => DataError::UnsupportedFormat("unsupported WAV encoding".into()),
        hound::Error::TooWide => DataError::UnsupportedFormat("sample width too large".into()),
        other => DataError::BadHeader(other.to_string()),
    }
}

pub fn read_wav_from<R: Read>(reader: R) -> Result<Waveform, DataError> {
    let r = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(DataError::UnsupportedFormat(format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(DataError::UnsupportedFormat(format!(
            "{:?} {}-bit, expected 16-bit PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let declared = r.len() as usize;
    let samples = r
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / FULL_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    if samples.is_empty() || samples.len() < declared {
        return Err(DataError::Truncated);
    }
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

pub fn read_wav(path: &Path) -> Result<Waveform, DataError> {
    let file = std::fs::File::open(path)?;
    read_wav_from(std::io::BufReader::new(file))
}

pub fn write_wav_to<W: Write + Seek>(writer: W, w: &Waveform) -> Result<WriteReport, DataError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut out = hound::WavWriter::new(writer, spec).map_err(map_hound)?;
    let mut report = WriteReport::default();
    for &x in w.samples() {
        let (q, clipped) = quantize(x);
        report.clipped += clipped as usize;
        out.write_sample(q).map_err(map_hound)?;
    }
    out.finalize().map_err(map_hound)?;
    Ok(report)
}

pub fn encode_wav(w: &Waveform) -> Result<(Vec<u8>, WriteReport), DataError> {
    let mut cursor = Cursor::new(Vec::new());
    let report = write_wav_to(&mut cursor, w)?;
    Ok((cursor.into_inner(), report))
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<WriteReport, DataError> {
    let (bytes, report) = encode_wav(w)?;
    std::fs::write(path, bytes)?;
    Ok(report)
}
